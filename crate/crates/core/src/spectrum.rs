//! The projected Jacobi operator `L̂_z = P L_z P` on the Ḣ¹-orthocomplement
//! `𝒱_z` of the tangent space, and its eigenvalues closest to zero.
//!
//! Vectors of `𝒱_z` are handled in "gradient coordinates" `h = F⁻¹[2π|k| f̂]`,
//! in which the Ḣ¹ inner product is the grid mean of `h·g`. The eigensolver is
//! a block Krylov–Schur iteration on `L̂²` with full reorthogonalisation.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::bubbles::{
    bubble_with_derivative, frame_from, BubbleContext, BubbleParams, TangentFrame,
};
use crate::energy::{second_variation, JacobiOperator};
use crate::error::{Error, Result};
use crate::field::{h1_inner, Field};
use crate::lattice::{LatticeTorus, C64};
use crate::random::{random_field, seeded_rng, SeededRng};

/// `P(L_u(P w))` with `P` removing the Ḣ¹ components along an orthonormal `frame`.
pub fn projected_apply(u: &Field, frame: &[Field], w: &Field) -> Result<Field> {
    let pw = project_out(frame, w)?;
    let lw = JacobiOperator::new(u)?.apply(&pw)?;
    project_out(frame, &lw)
}

/// `w - Σ ⟨w, t_i⟩ t_i`, applied twice for stability.
pub fn project_out(frame: &[Field], w: &Field) -> Result<Field> {
    let mut out = w.clone();
    for _ in 0..2 {
        for t in frame {
            let c = h1_inner(&out, t);
            out = out.axpy(-c, t)?;
        }
    }
    Ok(out)
}

/// Eigensolver settings.
#[derive(Clone, Debug, Serialize)]
pub struct SpectrumOptions {
    /// Number of eigenvalues wanted (3 ≤ k ≤ 16).
    pub k: usize,
    pub tol: f64,
    pub block: usize,
    /// Largest basis before a restart.
    pub basis: usize,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        SpectrumOptions {
            k: 4,
            tol: 1e-4,
            block: 4,
            basis: 64,
            max_restarts: 60,
            seed: 1,
        }
    }
}

/// Sign-split check of the quadratic form on converged eigenvectors.
#[derive(Clone, Debug, Serialize)]
pub struct SignSplit {
    pub positive: usize,
    pub negative: usize,
    /// `max |d²E(z)[w⁺, w⁻]|` over unit eigenvectors of opposite sign.
    pub cross: f64,
    /// `min ±d²E(z)[w^±, w^±] - (min|eig| - tol)`; nonnegative when definite.
    pub definiteness_margin: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumReport {
    pub lambda: f64,
    pub n: usize,
    /// Eigenvalues of `L̂_z`, sorted by magnitude.
    pub smallest_eigs: Vec<f64>,
    /// `‖L̂ w - μ w‖_{Ḣ¹}` recomputed from the assembled eigenvectors.
    pub residuals: Vec<f64>,
    /// `‖L_z t_i‖_{Ḣ¹}` for the normalised raw directions `∂_λ, ∂_{a1}, ∂_{a2}, ω_1, ω_2, ω_3`.
    pub tangent_residuals: [f64; 6],
    /// Block expansions performed.
    pub iterations: usize,
    pub applications: usize,
    pub sign_split: SignSplit,
}

/// `L̂_z` acting on gradient coordinates.
pub struct ProjectedJacobi {
    torus: LatticeTorus,
    jacobi: JacobiOperator,
    frame: Vec<Vec<f64>>,
    kabs: Vec<f64>,
    focus: Option<([f64; 2], f64)>,
}

impl ProjectedJacobi {
    /// Operator at `u` with the orthonormal `frame` removed.
    pub fn new(u: &Field, frame: &[Field]) -> Result<ProjectedJacobi> {
        let torus = u.torus().clone();
        let (kx, ky) = torus.wave_vectors();
        let kabs = kx
            .iter()
            .zip(ky)
            .map(|(a, b)| std::f64::consts::TAU * (a * a + b * b).sqrt())
            .collect();
        let mut op = ProjectedJacobi {
            torus,
            jacobi: JacobiOperator::new(u)?,
            frame: Vec::new(),
            kabs,
            focus: None,
        };
        op.frame = frame.iter().map(|t| op.to_h(t)).collect();
        Ok(op)
    }

    /// Starting vectors are localised around `center` with width `width`.
    pub fn focus(mut self, center: [f64; 2], width: f64) -> ProjectedJacobi {
        self.focus = Some((center, width));
        self
    }

    pub fn dim(&self) -> usize {
        3 * self.torus.len()
    }

    /// Ḣ¹ inner product in gradient coordinates.
    pub fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / self.torus.len() as f64
    }

    pub fn to_h(&self, f: &Field) -> Vec<f64> {
        f.map_spectral(|_, i, v| v * self.kabs[i]).values().to_vec()
    }

    pub fn from_h(&self, h: &[f64]) -> Field {
        Field::from_values(&self.torus, 3, h.to_vec())
            .expect("shape is consistent")
            .map_spectral(|_, i, v| {
                if self.kabs[i] == 0.0 {
                    C64::new(0.0, 0.0)
                } else {
                    v / self.kabs[i]
                }
            })
            .into_mean_zero()
    }

    pub fn project(&self, h: &mut [f64]) {
        for _ in 0..2 {
            for t in &self.frame {
                let c = self.dot(h, t);
                axpy(h, -c, t);
            }
        }
    }

    pub fn apply(&self, h: &[f64]) -> Result<Vec<f64>> {
        let mut ph = h.to_vec();
        self.project(&mut ph);
        let c = self.jacobi.compact_part(&self.from_h(&ph))?;
        let ch = self.to_h(&c);
        for (a, b) in ph.iter_mut().zip(&ch) {
            *a += b;
        }
        self.project(&mut ph);
        Ok(ph)
    }

    fn random_start(&self, rng: &mut SeededRng) -> Vec<f64> {
        let kmax = self.torus.resolved_wavenumber() / 2.0;
        let mut f = random_field(&self.torus, 3, kmax, 1.0, rng);
        if let Some((c, width)) = self.focus {
            let n = self.torus.n();
            let len = self.torus.len();
            let mut vals = f.values().to_vec();
            for i in 0..n {
                for j in 0..n {
                    let x = self.torus.min_image({
                        let p = self.torus.point(i, j);
                        [p[0] - c[0], p[1] - c[1]]
                    });
                    let g = (-(x[0] * x[0] + x[1] * x[1]) / (2.0 * width * width)).exp();
                    for k in 0..3 {
                        vals[k * len + i * n + j] *= g;
                    }
                }
            }
            f = Field::from_values(&self.torus, 3, vals)
                .expect("shape is consistent")
                .into_mean_zero();
        }
        let mut h = self.to_h(&f);
        self.project(&mut h);
        h
    }
}

fn axpy(y: &mut [f64], s: f64, x: &[f64]) {
    for (a, b) in y.iter_mut().zip(x) {
        *a += s * b;
    }
}

/// Converged eigenpairs of `L̂_z` in gradient coordinates.
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub applications: usize,
}

/// Orthonormalises `block` against `basis` and itself; returns the
/// coefficients `R` of the block on its new orthonormal columns.
fn orthonormalize_block(
    op: &ProjectedJacobi,
    basis: &[Vec<f64>],
    block: &mut [Vec<f64>],
    rng: &mut SeededRng,
) -> DMatrix<f64> {
    let bs = block.len();
    let mut r = DMatrix::zeros(bs, bs);
    for j in 0..bs {
        let before = op.dot(&block[j], &block[j]).sqrt();
        for _ in 0..2 {
            for v in basis {
                let c = op.dot(&block[j], v);
                axpy(&mut block[j], -c, v);
            }
            for i in 0..j {
                let (head, tail) = block.split_at_mut(j);
                let c = op.dot(&tail[0], &head[i]);
                axpy(&mut tail[0], -c, &head[i]);
                r[(i, j)] += c;
            }
        }
        let norm = op.dot(&block[j], &block[j]).sqrt();
        if norm <= 1e-10 * before.max(1e-300) {
            // deflated column: continue the space with a fresh direction
            let mut fresh = op.random_start(rng);
            for _ in 0..2 {
                for v in basis.iter().chain(&block[..j]) {
                    let c = op.dot(&fresh, v);
                    axpy(&mut fresh, -c, v);
                }
            }
            let nf = op.dot(&fresh, &fresh).sqrt();
            block[j] = fresh.into_iter().map(|x| x / nf).collect();
            r[(j, j)] = 0.0;
        } else {
            for x in block[j].iter_mut() {
                *x /= norm;
            }
            r[(j, j)] = norm;
        }
    }
    r
}

/// Eigenvalues of `L̂` of smallest magnitude by block Krylov–Schur on `L̂²`,
/// whose smallest eigenvalues are extremal (Ritz values of `L̂` itself near
/// zero are unreliable since the spectrum surrounds zero).
pub fn eigenpairs(op: &ProjectedJacobi, opts: &SpectrumOptions) -> Result<EigenPairs> {
    if opts.k > 16 || opts.k == 0 {
        return Err(Error::ShapeError(format!("k = {} outside 1..=16", opts.k)));
    }
    let bs = opts.block.max(1);
    let keep = (opts.k + bs + 2).min(opts.basis.saturating_sub(bs));
    if keep < opts.k {
        return Err(Error::ShapeError(
            "basis too small for the requested k".into(),
        ));
    }
    let mut rng = seeded_rng(opts.seed);
    let mut applications = 0usize;
    let mut iterations = 0usize;

    // relation A V = V M + F Bᵀ with F ⟂ V
    let mut v: Vec<Vec<f64>> = Vec::new();
    let mut m = DMatrix::<f64>::zeros(0, 0);
    let mut b = DMatrix::<f64>::zeros(0, bs);
    let mut f: Vec<Vec<f64>> = (0..bs).map(|_| op.random_start(&mut rng)).collect();
    let mut r = orthonormalize_block(op, &v, &mut f, &mut rng);
    // the starting block has no history: its coupling to V is empty
    let mut first = true;

    let mut best_residual = f64::INFINITY;
    for restart in 0..=opts.max_restarts {
        while v.len() + bs <= opts.basis {
            let p = v.len();
            let q = std::mem::take(&mut f);
            // extend M with the coupling R Bᵀ
            let mut m2 = DMatrix::zeros(p + bs, p + bs);
            m2.view_mut((0, 0), (p, p)).copy_from(&m);
            if !first {
                let rb = &r * b.transpose();
                m2.view_mut((p, 0), (bs, p)).copy_from(&rb);
                m2.view_mut((0, p), (p, bs)).copy_from(&rb.transpose());
            }
            first = false;
            let mut w: Vec<Vec<f64>> = Vec::with_capacity(bs);
            for qi in &q {
                w.push(op.apply(&op.apply(qi)?)?);
                applications += 2;
            }
            v.extend(q);
            for j in 0..bs {
                for i in 0..bs {
                    let c = op.dot(&v[p + i], &w[j]);
                    if i <= j {
                        m2[(p + i, p + j)] = c;
                        m2[(p + j, p + i)] = c;
                    }
                }
            }
            m = m2;
            f = w;
            r = orthonormalize_block(op, &v, &mut f, &mut rng);
            let mut bn = DMatrix::zeros(p + bs, bs);
            bn.view_mut((p, 0), (bs, bs)).fill_with_identity();
            b = bn;
            iterations += 1;
        }

        let eig = SymmetricEigen::new(m.clone());
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
        let rb = &r * b.transpose();
        let estimate = |i: usize| (&rb * eig.eigenvectors.column(i)).norm();
        // a residual ε of L̂² bounds the L̂ residual by about ε/|μ|
        let worst = order[..opts.k]
            .iter()
            .map(|&i| estimate(i) / eig.eigenvalues[i].abs().sqrt().max(1e-3))
            .fold(0.0f64, f64::max);
        best_residual = best_residual.min(worst);
        let converged = worst <= opts.tol;
        let take = if converged { opts.k } else { keep };
        let chosen: Vec<usize> = order[..take].to_vec();

        let s = DMatrix::from_fn(v.len(), take, |i, j| eig.eigenvectors[(i, chosen[j])]);
        let mut y: Vec<Vec<f64>> = vec![vec![0.0; op.dim()]; take];
        for (i, vi) in v.iter().enumerate() {
            for j in 0..take {
                axpy(&mut y[j], s[(i, j)], vi);
            }
        }
        let theta: Vec<f64> = chosen.iter().map(|&i| eig.eigenvalues[i]).collect();

        if converged {
            // eigenvectors of L̂² with distinct |μ| are eigenvectors of L̂
            let mut found: Vec<(f64, f64, Vec<f64>)> = Vec::with_capacity(take);
            for yj in y {
                let mut ay = op.apply(&yj)?;
                applications += 1;
                let mu = op.dot(&ay, &yj) / op.dot(&yj, &yj);
                axpy(&mut ay, -mu, &yj);
                found.push((mu, op.dot(&ay, &ay).sqrt(), yj));
            }
            found.sort_by(|a, b| a.0.abs().partial_cmp(&b.0.abs()).unwrap());
            let mut pairs = EigenPairs {
                values: Vec::new(),
                vectors: Vec::new(),
                residuals: Vec::new(),
                iterations,
                applications,
            };
            for (mu, res, y) in found {
                pairs.values.push(mu);
                pairs.residuals.push(res);
                pairs.vectors.push(y);
            }
            return Ok(pairs);
        }
        if restart == opts.max_restarts {
            break;
        }
        b = s.transpose() * &b;
        m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(theta));
        v = y;
    }
    Err(Error::EigsNotConverged {
        iterations,
        residual: best_residual,
    })
}

/// Eigenvalues of `L̂_z` closest to zero at the bubble `p`, with tangent
/// residuals and the sign-split check.
pub fn small_spectrum(
    ctx: &BubbleContext,
    p: &BubbleParams,
    opts: &SpectrumOptions,
) -> Result<SpectrumReport> {
    let (z, dz) = bubble_with_derivative(&ctx.torus, &ctx.green, &ctx.cutoff, p)?;
    let frame = frame_from(p, &z, &dz)?;
    spectrum_at(&z, &frame, opts)
}

/// As [`small_spectrum`] for an already assembled bubble and frame.
pub fn spectrum_at(
    z: &Field,
    frame: &TangentFrame,
    opts: &SpectrumOptions,
) -> Result<SpectrumReport> {
    let p = &frame.params;
    let op = ProjectedJacobi::new(z, &frame.ortho)?.focus(p.a, 4.0 / p.lambda);
    let pairs = eigenpairs(&op, opts)?;

    let jac = JacobiOperator::new(z)?;
    let mut tangent_residuals = [0.0; 6];
    for (i, t) in frame.raw.iter().enumerate() {
        let unit = t.scale(1.0 / t.h1_norm());
        tangent_residuals[i] = jac.apply(&unit)?.h1_norm();
    }

    let fields: Vec<Field> = pairs.vectors.iter().map(|h| op.from_h(h)).collect();
    let sign_split = sign_split(z, &pairs.values, &fields, opts.tol)?;

    Ok(SpectrumReport {
        lambda: frame.params.lambda,
        n: z.torus().n(),
        smallest_eigs: pairs.values,
        residuals: pairs.residuals,
        tangent_residuals,
        iterations: pairs.iterations,
        applications: pairs.applications,
        sign_split,
    })
}

fn sign_split(z: &Field, values: &[f64], vectors: &[Field], tol: f64) -> Result<SignSplit> {
    let min_abs = values.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let mut cross = 0.0f64;
    let mut margin = f64::INFINITY;
    let (mut positive, mut negative) = (0, 0);
    for (i, wi) in vectors.iter().enumerate() {
        let ni = wi.h1_norm();
        let q = second_variation(z, wi, wi)? * values[i].signum();
        margin = margin.min(q / (ni * ni) - (min_abs - tol));
        if values[i] > 0.0 {
            positive += 1;
        } else {
            negative += 1;
        }
        for (j, wj) in vectors.iter().enumerate().skip(i + 1) {
            if values[i].signum() != values[j].signum() {
                let c = second_variation(z, wi, wj)? / (ni * wj.h1_norm());
                cross = cross.max(c.abs());
            }
        }
    }
    Ok(SignSplit {
        positive,
        negative,
        cross,
        definiteness_margin: margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bubbles::tangent_frame;
    use crate::lattice::square_torus;

    #[test]
    fn zero_base_is_identity_off_the_frame() {
        let ctx = BubbleContext::square(128, 0.05).unwrap();
        let p = BubbleParams::at(8.0, [0.3, 0.6]).unwrap();
        let frame = tangent_frame(&ctx.torus, &ctx.green, &ctx.cutoff, &p).unwrap();
        let w = random_field(&ctx.torus, 3, 10.0, 1.5, &mut seeded_rng(3));
        let w = project_out(&frame.ortho, &w).unwrap();
        let zero = Field::zeros(&ctx.torus, 3);
        let out = projected_apply(&zero, &frame.ortho, &w).unwrap();
        assert!(out.sub(&w).unwrap().h1_norm() <= 1e-12 * w.h1_norm());
        for t in &frame.ortho {
            let o = projected_apply(&zero, &frame.ortho, t).unwrap();
            assert!(o.h1_norm() <= 1e-10);
        }
    }

    #[test]
    fn projection_is_idempotent_and_symmetric() {
        let ctx = BubbleContext::square(128, 0.05).unwrap();
        let p = BubbleParams::at(8.0, [0.5, 0.5]).unwrap();
        let frame = tangent_frame(&ctx.torus, &ctx.green, &ctx.cutoff, &p).unwrap();
        let mut rng = seeded_rng(9);
        let a = random_field(&ctx.torus, 3, 12.0, 1.0, &mut rng);
        let b = random_field(&ctx.torus, 3, 12.0, 1.0, &mut rng);
        let pa = project_out(&frame.ortho, &a).unwrap();
        let ppa = project_out(&frame.ortho, &pa).unwrap();
        assert!(ppa.sub(&pa).unwrap().h1_norm() <= 1e-10 * a.h1_norm());
        let pb = project_out(&frame.ortho, &b).unwrap();
        let lhs = h1_inner(&pa, &b);
        let rhs = h1_inner(&a, &pb);
        assert!((lhs - rhs).abs() <= 1e-10 * a.h1_norm() * b.h1_norm());
    }

    #[test]
    fn projected_operator_is_self_adjoint() {
        let ctx = BubbleContext::square(128, 0.05).unwrap();
        let p = BubbleParams::at(8.0, [0.25, 0.5]).unwrap();
        let (z, dz) = bubble_with_derivative(&ctx.torus, &ctx.green, &ctx.cutoff, &p).unwrap();
        let frame = frame_from(&p, &z, &dz).unwrap();
        let mut rng = seeded_rng(4);
        let w1 = random_field(&ctx.torus, 3, 16.0, 1.0, &mut rng);
        let w2 = random_field(&ctx.torus, 3, 16.0, 1.0, &mut rng);
        let l1 = projected_apply(&z, &frame.ortho, &w1).unwrap();
        let l2 = projected_apply(&z, &frame.ortho, &w2).unwrap();
        let a = h1_inner(&l1, &w2);
        let b = h1_inner(&w1, &l2);
        assert!((a - b).abs() <= 1e-8 * w1.h1_norm() * w2.h1_norm());
    }

    #[test]
    fn gradient_coordinates_round_trip() {
        let t = square_torus(64).unwrap();
        let z = Field::zeros(&t, 3);
        let op = ProjectedJacobi::new(&z, &[]).unwrap();
        let f = random_field(&t, 3, 12.0, 1.0, &mut seeded_rng(2));
        let h = op.to_h(&f);
        assert!((op.dot(&h, &h) - f.h1_norm().powi(2)).abs() < 1e-10 * f.h1_norm().powi(2));
        let back = op.from_h(&h);
        assert!(back.sub(&f).unwrap().h1_norm() < 1e-12 * f.h1_norm());
    }

    #[test]
    fn recovers_a_known_spectrum() {
        // u = 0: L̂ is the identity, every eigenvalue is 1
        let t = square_torus(32).unwrap();
        let z = Field::zeros(&t, 3);
        let op = ProjectedJacobi::new(&z, &[]).unwrap();
        let opts = SpectrumOptions {
            k: 3,
            ..SpectrumOptions::default()
        };
        let pairs = eigenpairs(&op, &opts).unwrap();
        for (v, r) in pairs.values.iter().zip(&pairs.residuals) {
            assert!((v - 1.0).abs() < 1e-10 && *r < 1e-8);
        }
    }
}
