//! Adapted bubbles `R z_{λ,a}` on a flat torus, their tangent frame and the
//! nearest-bubble projection.
//!
//! In the chart `x = p - a` (nearest image) the bubble is
//!
//! ```text
//! ẑ = φ (π_λ(x) + (-(2/λ) ∇J(x), 2 j(x)/λ² + 1)) + (1 - φ) (-(2/λ) ∇Ĝ(x), 0)
//! ```
//!
//! where `∇_y J_a(x, 0) = -∇J(x)` and `∇_y G_a(x, 0) = -∇Ĝ(x)` on a flat torus.
//! Outside the support of `φ` only the Green tail survives, which is also the
//! definition away from the chart, so one formula covers the whole torus.

use nalgebra::{Matrix6, SymmetricEigen, Vector6};

use crate::error::{Error, Result};
use crate::field::{h1_inner, partial, Field};
use crate::green::GreenTable;
use crate::lattice::LatticeTorus;

/// Default bubble-scale floor.
pub const LAMBDA_MIN: f64 = 8.0;

/// `(λ, a, R)` identifying `R z_{λ,a}`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct BubbleParams {
    pub lambda: f64,
    pub a: [f64; 2],
    pub rotation: [[f64; 3]; 3],
}

pub const IDENTITY: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

impl BubbleParams {
    pub fn new(lambda: f64, a: [f64; 2], rotation: [[f64; 3]; 3]) -> Result<BubbleParams> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::GeometryError(format!(
                "bubble scale {lambda} must be positive"
            )));
        }
        let err = orthogonality_defect(&rotation);
        if err > 1e-12 {
            return Err(Error::GeometryError(format!(
                "rotation deviates from SO(3) by {err:e}"
            )));
        }
        Ok(BubbleParams {
            lambda,
            a,
            rotation,
        })
    }

    /// Unrotated bubble at `(λ, a)`.
    pub fn at(lambda: f64, a: [f64; 2]) -> Result<BubbleParams> {
        BubbleParams::new(lambda, a, IDENTITY)
    }
}

fn orthogonality_defect(r: &[[f64; 3]; 3]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            let dot: f64 = (0..3).map(|k| r[k][i] * r[k][j]).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot - target).abs());
        }
    }
    worst.max((det3(r) - 1.0).abs())
}

fn det3(r: &[[f64; 3]; 3]) -> f64 {
    r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
        - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
        + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0])
}

fn matmul3(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// Unit quaternion `(w, x, y, z)` of a rotation matrix.
pub fn quaternion_from_matrix(r: &[[f64; 3]; 3]) -> [f64; 4] {
    let tr = r[0][0] + r[1][1] + r[2][2];
    let q = if tr > 0.0 {
        let s = 2.0 * (tr + 1.0).sqrt();
        [
            0.25 * s,
            (r[2][1] - r[1][2]) / s,
            (r[0][2] - r[2][0]) / s,
            (r[1][0] - r[0][1]) / s,
        ]
    } else if r[0][0] > r[1][1] && r[0][0] > r[2][2] {
        let s = 2.0 * (1.0 + r[0][0] - r[1][1] - r[2][2]).sqrt();
        [
            (r[2][1] - r[1][2]) / s,
            0.25 * s,
            (r[0][1] + r[1][0]) / s,
            (r[0][2] + r[2][0]) / s,
        ]
    } else if r[1][1] > r[2][2] {
        let s = 2.0 * (1.0 + r[1][1] - r[0][0] - r[2][2]).sqrt();
        [
            (r[0][2] - r[2][0]) / s,
            (r[0][1] + r[1][0]) / s,
            0.25 * s,
            (r[1][2] + r[2][1]) / s,
        ]
    } else {
        let s = 2.0 * (1.0 + r[2][2] - r[0][0] - r[1][1]).sqrt();
        [
            (r[1][0] - r[0][1]) / s,
            (r[0][2] + r[2][0]) / s,
            (r[1][2] + r[2][1]) / s,
            0.25 * s,
        ]
    };
    normalize4(q)
}

fn normalize4(q: [f64; 4]) -> [f64; 4] {
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    [q[0] / n, q[1] / n, q[2] / n, q[3] / n]
}

/// Rotation matrix of a (not necessarily normalised) quaternion.
pub fn matrix_from_quaternion(q: [f64; 4]) -> [[f64; 3]; 3] {
    let [w, x, y, z] = normalize4(q);
    [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
        ],
        [
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
        ],
        [
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ]
}

fn quat_mul(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    [
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    ]
}

/// `exp(θ_1 ω_1 + θ_2 ω_2 + θ_3 ω_3) R`, renormalised through quaternions.
pub fn rotate_left(theta: [f64; 3], r: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let angle = (theta[0] * theta[0] + theta[1] * theta[1] + theta[2] * theta[2]).sqrt();
    let dq = if angle < 1e-300 {
        [1.0, 0.0, 0.0, 0.0]
    } else {
        let s = (0.5 * angle).sin() / angle;
        [
            (0.5 * angle).cos(),
            theta[0] * s,
            theta[1] * s,
            theta[2] * s,
        ]
    };
    matrix_from_quaternion(quat_mul(dq, quaternion_from_matrix(r)))
}

/// Standard basis of `so(3)`; `ω_3` rotates the first two target components.
pub const OMEGA: [[[f64; 3]; 3]; 3] = [
    [[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]],
    [[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]],
    [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]],
];

/// Inverse stereographic projection `π(x) = (2x, 1 - |x|²) / (1 + |x|²)`.
pub fn std_bubble(x: [f64; 2]) -> [f64; 3] {
    let r2 = x[0] * x[0] + x[1] * x[1];
    let d = 1.0 + r2;
    [2.0 * x[0] / d, 2.0 * x[1] / d, (1.0 - r2) / d]
}

/// `∂_λ π(λ x)`.
pub fn d_lambda_std_bubble(lambda: f64, x: [f64; 2]) -> [f64; 3] {
    let r2 = x[0] * x[0] + x[1] * x[1];
    let l2r2 = lambda * lambda * r2;
    let d = 1.0 + l2r2;
    let d2 = d * d;
    [
        2.0 * x[0] * (1.0 - l2r2) / d2,
        2.0 * x[1] * (1.0 - l2r2) / d2,
        -4.0 * lambda * r2 / d2,
    ]
}

/// Radial cut-offs `ψ` (1 on `D_{r/2}`, 0 off `D_r`), `φ` (1 on `D_r`, 0 off
/// `D_{2r}`) and the interpolation `j = ψ/r² + (1 - ψ)/|x|²`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct CutoffProfile {
    pub r: f64,
}

/// `35t⁴ - 84t⁵ + 70t⁶ - 20t⁷` clamped to `[0, 1]`.
pub fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let t4 = t * t * t * t;
        t4 * (35.0 + t * (-84.0 + t * (70.0 - 20.0 * t)))
    }
}

impl CutoffProfile {
    /// Profile of radius `r`, which must satisfy `0 < r < ι/4`.
    pub fn new(torus: &LatticeTorus, r: f64) -> Result<CutoffProfile> {
        if !(r > 0.0 && r < torus.iota() / 4.0) {
            return Err(Error::GeometryError(format!(
                "cutoff radius {r} must lie in (0, iota/4) = (0, {})",
                torus.iota() / 4.0
            )));
        }
        Ok(CutoffProfile { r })
    }

    pub fn psi(&self, rho: f64) -> f64 {
        let h = 0.5 * self.r;
        1.0 - smoothstep((rho - h) / h)
    }

    pub fn phi(&self, rho: f64) -> f64 {
        1.0 - smoothstep((rho - self.r) / self.r)
    }

    pub fn j(&self, rho: f64) -> f64 {
        let psi = self.psi(rho);
        if psi >= 1.0 {
            1.0 / (self.r * self.r)
        } else {
            psi / (self.r * self.r) + (1.0 - psi) / (rho * rho)
        }
    }
}

/// Torus, Green table and cut-off shared by every bubble of one experiment.
#[derive(Clone, Debug)]
pub struct BubbleContext {
    pub torus: LatticeTorus,
    pub green: GreenTable,
    pub cutoff: CutoffProfile,
    pub lambda_min: f64,
}

impl BubbleContext {
    pub fn new(green: GreenTable, cutoff: CutoffProfile) -> BubbleContext {
        BubbleContext {
            torus: green.torus().clone(),
            green,
            cutoff,
            lambda_min: LAMBDA_MIN,
        }
    }

    /// Square torus at resolution `n` with cut-off radius `r`.
    pub fn square(n: usize, r: f64) -> Result<BubbleContext> {
        let torus = crate::lattice::square_torus(n)?;
        let cutoff = CutoffProfile::new(&torus, r)?;
        Ok(BubbleContext::new(
            crate::green::build_green(&torus),
            cutoff,
        ))
    }
}

fn check_guards(torus: &LatticeTorus, cut: &CutoffProfile, lambda: f64) -> Result<()> {
    if lambda / torus.n() as f64 > 1.0 / 16.0 {
        return Err(Error::UnderResolvedBubble {
            lambda,
            n: torus.n(),
        });
    }
    if !(2.0 * cut.r < torus.iota()) {
        return Err(Error::GeometryError(format!(
            "2r = {} must stay inside the chart radius {}",
            2.0 * cut.r,
            torus.iota()
        )));
    }
    Ok(())
}

/// Chart formula for `ẑ` and `∂_λ ẑ` at a point with `∇J(x) = grad_j`.
#[inline]
fn profile_at(
    cut: &CutoffProfile,
    lambda: f64,
    x: [f64; 2],
    grad_j: [f64; 2],
    out: &mut [f64; 3],
    dout: Option<&mut [f64; 3]>,
) {
    let r2 = x[0] * x[0] + x[1] * x[1];
    let rho = r2.sqrt();
    let phi = cut.phi(rho);
    let tail = 2.0 / lambda;
    // (1 - φ) x/|x|² vanishes where φ = 1, which includes the origin
    let (ex, ey) = if phi < 1.0 {
        (x[0] / r2, x[1] / r2)
    } else {
        (0.0, 0.0)
    };
    let l2r2 = lambda * lambda * r2;
    let d = 1.0 + l2r2;
    if phi > 0.0 {
        let j = cut.j(rho);
        out[0] = phi * 2.0 * lambda * x[0] / d - tail * grad_j[0] + (1.0 - phi) * tail * ex;
        out[1] = phi * 2.0 * lambda * x[1] / d - tail * grad_j[1] + (1.0 - phi) * tail * ey;
        out[2] = phi * (2.0 / d + 2.0 * j / (lambda * lambda));
        if let Some(dz) = dout {
            let dp = d_lambda_std_bubble(lambda, x);
            let t2 = tail / lambda;
            dz[0] = phi * dp[0] + t2 * grad_j[0] - (1.0 - phi) * t2 * ex;
            dz[1] = phi * dp[1] + t2 * grad_j[1] - (1.0 - phi) * t2 * ey;
            dz[2] = phi * (dp[2] - 4.0 * j / (lambda * lambda * lambda));
        }
    } else {
        out[0] = tail * (ex - grad_j[0]);
        out[1] = tail * (ey - grad_j[1]);
        out[2] = 0.0;
        if let Some(dz) = dout {
            let t2 = tail / lambda;
            dz[0] = -t2 * (ex - grad_j[0]);
            dz[1] = -t2 * (ey - grad_j[1]);
            dz[2] = 0.0;
        }
    }
}

/// Samples `z̃` (and optionally `∂_λ z̃`) before mean removal and rotation.
fn raw_samples(
    gt: &GreenTable,
    cut: &CutoffProfile,
    lambda: f64,
    a: [f64; 2],
    with_derivative: bool,
) -> (Vec<f64>, Option<Vec<f64>>) {
    let torus = gt.torus();
    let len = torus.len();
    let cs = gt.chart_samples(a);
    let mut z = vec![0.0; 3 * len];
    let mut dz = if with_derivative {
        Some(vec![0.0; 3 * len])
    } else {
        None
    };
    let mut v = [0.0; 3];
    let mut dv = [0.0; 3];
    for i in 0..len {
        let x = [cs.x1[i], cs.x2[i]];
        let g = [cs.grad_j1[i], cs.grad_j2[i]];
        if dz.is_some() {
            profile_at(cut, lambda, x, g, &mut v, Some(&mut dv));
        } else {
            profile_at(cut, lambda, x, g, &mut v, None);
        }
        for c in 0..3 {
            z[c * len + i] = v[c];
        }
        if let Some(d) = dz.as_mut() {
            for c in 0..3 {
                d[c * len + i] = dv[c];
            }
        }
    }
    (z, dz)
}

fn finish(torus: &LatticeTorus, values: Vec<f64>, rotation: &[[f64; 3]; 3]) -> Result<Field> {
    Field::from_values(torus, 3, values)?
        .into_mean_zero()
        .rotate_target(rotation)
}

/// Grid samples of `R z_{λ,a}` (mean-zero, 3 components).
pub fn adapted_bubble(
    torus: &LatticeTorus,
    gt: &GreenTable,
    cut: &CutoffProfile,
    p: &BubbleParams,
) -> Result<Field> {
    check_guards(torus, cut, p.lambda)?;
    let (z, _) = raw_samples(gt, cut, p.lambda, p.a, false);
    finish(torus, z, &p.rotation)
}

/// Analytic `∂_λ (R z_{λ,a})`.
pub fn d_lambda_adapted(
    torus: &LatticeTorus,
    gt: &GreenTable,
    cut: &CutoffProfile,
    p: &BubbleParams,
) -> Result<Field> {
    Ok(bubble_with_derivative(torus, gt, cut, p)?.1)
}

/// `R z_{λ,a}` and `∂_λ (R z_{λ,a})` from one pass over the grid.
pub fn bubble_with_derivative(
    torus: &LatticeTorus,
    gt: &GreenTable,
    cut: &CutoffProfile,
    p: &BubbleParams,
) -> Result<(Field, Field)> {
    check_guards(torus, cut, p.lambda)?;
    let (z, dz) = raw_samples(gt, cut, p.lambda, p.a, true);
    Ok((
        finish(torus, z, &p.rotation)?,
        finish(torus, dz.expect("requested"), &p.rotation)?,
    ))
}

/// Largest difference between the chart formula and the Green-tail formula on
/// circles `|x| = ρ` around `a`, evaluated pointwise with the Ewald evaluator.
pub fn piece_mismatch(
    gt: &GreenTable,
    cut: &CutoffProfile,
    lambda: f64,
    radii: &[f64],
) -> Result<f64> {
    let mut worst = 0.0f64;
    for &rho in radii {
        for k in 0..64 {
            let th = 2.0 * std::f64::consts::PI * k as f64 / 64.0;
            let x = [rho * th.cos(), rho * th.sin()];
            let gj = gt.regular_gradient_at(x)?;
            let mut chart = [0.0; 3];
            profile_at(cut, lambda, x, gj, &mut chart, None);
            let g = gt.gradient(x);
            let outer = [-2.0 / lambda * g[0], -2.0 / lambda * g[1], 0.0];
            for c in 0..3 {
                worst = worst.max((chart[c] - outer[c]).abs());
            }
        }
    }
    Ok(worst)
}

/// Six Ḣ¹-orthonormal directions spanning `T_z 𝒵` and the raw Gram matrix.
#[derive(Clone, Debug)]
pub struct TangentFrame {
    pub params: BubbleParams,
    /// `∂_λ, ∂_{a1}, ∂_{a2}, ω_1, ω_2, ω_3` applied to `R z`.
    pub raw: Vec<Field>,
    pub ortho: Vec<Field>,
    pub gram: [[f64; 6]; 6],
    /// Condition number of the Gram matrix after diagonal scaling.
    pub condition: f64,
}

/// Raw tangent directions at `z = R z_{λ,a}` given `z` and `∂_λ z`.
///
/// Moving `a` translates the construction, so `∂_a z = -∇z` exactly.
pub fn raw_directions(z: &Field, dz: &Field) -> Result<Vec<Field>> {
    let mut raw = Vec::with_capacity(6);
    raw.push(dz.clone());
    raw.push(partial(z, 0).scale(-1.0));
    raw.push(partial(z, 1).scale(-1.0));
    for w in &OMEGA {
        raw.push(z.rotate_target(w)?);
    }
    Ok(raw)
}

pub fn gram_matrix(fields: &[Field]) -> [[f64; 6]; 6] {
    let mut g = [[0.0; 6]; 6];
    for i in 0..6 {
        for j in i..6 {
            let v = h1_inner(&fields[i], &fields[j]);
            g[i][j] = v;
            g[j][i] = v;
        }
    }
    g
}

fn scaled_condition(g: &[[f64; 6]; 6]) -> f64 {
    let m = Matrix6::from_fn(|i, j| g[i][j] / (g[i][i] * g[j][j]).sqrt());
    let eig = SymmetricEigen::new(m).eigenvalues;
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| {
        (lo.min(*v), hi.max(*v))
    });
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Modified Gram–Schmidt in `⟨·,·⟩_{Ḣ¹}`.
fn orthonormalize(raw: &[Field]) -> Result<Vec<Field>> {
    let mut out: Vec<Field> = Vec::with_capacity(raw.len());
    for f in raw {
        let mut v = f.clone();
        for q in &out {
            let c = h1_inner(&v, q);
            v = v.axpy(-c, q)?;
        }
        let norm = v.h1_norm();
        out.push(v.scale(1.0 / norm));
    }
    Ok(out)
}

/// Tangent frame of `𝒵` at `p`.
pub fn tangent_frame(
    torus: &LatticeTorus,
    gt: &GreenTable,
    cut: &CutoffProfile,
    p: &BubbleParams,
) -> Result<TangentFrame> {
    let (z, dz) = bubble_with_derivative(torus, gt, cut, p)?;
    frame_from(p, &z, &dz)
}

pub(crate) fn frame_from(p: &BubbleParams, z: &Field, dz: &Field) -> Result<TangentFrame> {
    let raw = raw_directions(z, dz)?;
    let gram = gram_matrix(&raw);
    let condition = scaled_condition(&gram);
    if !(condition <= 1e8) {
        return Err(Error::DegenerateFrame { cond: condition });
    }
    let ortho = orthonormalize(&raw)?;
    Ok(TangentFrame {
        params: *p,
        raw,
        ortho,
        gram,
        condition,
    })
}

/// Result of [`nearest_bubble`].
#[derive(Clone, Debug)]
pub struct Projection {
    pub params: BubbleParams,
    pub w: Field,
    pub residual: f64,
    pub iterations: usize,
    /// `max_i |⟨w, t_i⟩_{Ḣ¹}|` over the orthonormal frame at the foot.
    pub optimality: f64,
}

/// Minimises `‖u - R z_{λ,a}‖_{Ḣ¹}` over `(λ, a, R)` by damped Gauss–Newton.
pub fn nearest_bubble(ctx: &BubbleContext, u: &Field, guess: &BubbleParams) -> Result<Projection> {
    const MAX_ITER: usize = 100;
    let unorm = u.h1_norm();
    let mut p = *guess;
    let mut step: Option<(BubbleParams, Vector6<f64>)> = None;
    let mut last_residual = f64::INFINITY;
    let mut damping = 1.0;
    for it in 0..MAX_ITER {
        if p.lambda < ctx.lambda_min {
            return Err(Error::LeftBubbleRegime {
                lambda: p.lambda,
                lambda_min: ctx.lambda_min,
            });
        }
        let (z, dz) = bubble_with_derivative(&ctx.torus, &ctx.green, &ctx.cutoff, &p)?;
        let w = u.sub(&z)?;
        let residual = w.h1_norm();

        if residual > last_residual * (1.0 + 1e-12) {
            // reject and retry the previous step with half the length
            if let Some((prev, delta)) = step {
                damping *= 0.5;
                if damping < 1e-6 {
                    return Err(Error::ProjectionDiverged { iterations: it });
                }
                p = apply_step(&prev, &(delta * damping), &ctx.cutoff);
                continue;
            }
        }

        let raw = raw_directions(&z, &dz)?;
        let gram = gram_matrix(&raw);
        let g = Matrix6::from_fn(|i, j| gram[i][j]);
        let b = Vector6::from_fn(|i, _| h1_inner(&w, &raw[i]));
        let chol = g.cholesky().ok_or(Error::DegenerateFrame {
            cond: f64::INFINITY,
        })?;
        let coeffs = chol.l().solve_lower_triangular(&b).unwrap_or(b);
        let optimality = coeffs.amax();
        // below ~1e-13‖u‖ the inner products are round-off
        let floor = 1e-13 * unorm.max(1.0);
        if optimality <= (1e-8 * residual).max(floor) || residual <= 1e-12 * unorm.max(1.0) {
            return Ok(Projection {
                params: p,
                w: w.into_mean_zero(),
                residual,
                iterations: it,
                optimality,
            });
        }
        let delta = chol.solve(&b);
        last_residual = residual;
        damping = 1.0;
        let limited = limit_step(&delta, &p, &ctx.cutoff);
        step = Some((p, limited));
        p = apply_step(&p, &limited, &ctx.cutoff);
    }
    Err(Error::ProjectionDiverged {
        iterations: MAX_ITER,
    })
}

fn limit_step(delta: &Vector6<f64>, p: &BubbleParams, cut: &CutoffProfile) -> Vector6<f64> {
    let mut s: f64 = 1.0;
    s = s.min(0.2 * p.lambda / delta[0].abs().max(1e-300));
    s = s.min(0.25 * cut.r / delta[1].hypot(delta[2]).max(1e-300));
    let th = (delta[3] * delta[3] + delta[4] * delta[4] + delta[5] * delta[5]).sqrt();
    s = s.min(0.2 / th.max(1e-300));
    delta * s
}

fn apply_step(p: &BubbleParams, delta: &Vector6<f64>, _cut: &CutoffProfile) -> BubbleParams {
    BubbleParams {
        lambda: p.lambda + delta[0],
        a: [p.a[0] + delta[1], p.a[1] + delta[2]],
        rotation: rotate_left([delta[3], delta[4], delta[5]], &p.rotation),
    }
}

/// Rotation composed after a bubble, used by tests and the probe harness.
pub fn compose(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    matmul3(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stereographic_examples() {
        assert_eq!(std_bubble([0.0, 0.0]), [0.0, 0.0, 1.0]);
        assert_eq!(std_bubble([1.0, 0.0]), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn d_lambda_of_standard_bubble_has_closed_norm() {
        for &(l, x) in &[(3.0, [0.1, 0.2]), (40.0, [0.01, -0.03]), (7.5, [0.5, 0.0])] {
            let d = d_lambda_std_bubble(l, x);
            let r2: f64 = x[0] * x[0] + x[1] * x[1];
            let expect = 4.0 * r2 / (1.0 + l * l * r2).powi(2);
            let got: f64 = d.iter().map(|v| v * v).sum();
            assert!((got - expect).abs() < 1e-14 * expect.max(1.0));
        }
    }

    #[test]
    fn cutoff_profiles() {
        let t = crate::lattice::square_torus(64).unwrap();
        let c = CutoffProfile::new(&t, 0.05).unwrap();
        assert_eq!(c.psi(0.0), 1.0);
        assert_eq!(c.psi(0.025), 1.0);
        assert_eq!(c.psi(0.05), 0.0);
        assert_eq!(c.phi(0.05), 1.0);
        assert_eq!(c.phi(0.1), 0.0);
        assert!((c.j(0.0) - 400.0).abs() < 1e-12);
        assert!((c.j(0.07) - 1.0 / 0.0049).abs() < 1e-12);
        assert!(CutoffProfile::new(&t, 0.07).is_err());
    }

    #[test]
    fn smoothstep_is_monotone_and_flat_at_ends() {
        let mut prev = 0.0;
        for i in 0..=1000 {
            let v = smoothstep(i as f64 / 1000.0);
            assert!(v >= prev);
            prev = v;
        }
        let h = 1e-3;
        assert!(smoothstep(h) < 1e-10 && 1.0 - smoothstep(1.0 - h) < 1e-10);
    }

    #[test]
    fn quaternion_round_trip() {
        let r = rotate_left([0.3, -0.2, 0.9], &IDENTITY);
        let back = matrix_from_quaternion(quaternion_from_matrix(&r));
        for i in 0..3 {
            for j in 0..3 {
                assert!((r[i][j] - back[i][j]).abs() < 1e-14);
            }
        }
        assert!(orthogonality_defect(&r) < 1e-14);
    }

    #[test]
    fn rotation_generator_matches_derivative() {
        let r0 = rotate_left([0.1, 0.4, -0.3], &IDENTITY);
        let h = 1e-6;
        for (i, w) in OMEGA.iter().enumerate() {
            let mut th = [0.0; 3];
            th[i] = h;
            let plus = rotate_left(th, &r0);
            th[i] = -h;
            let minus = rotate_left(th, &r0);
            let exact = matmul3(w, &r0);
            for a in 0..3 {
                for b in 0..3 {
                    let fd = (plus[a][b] - minus[a][b]) / (2.0 * h);
                    assert!((fd - exact[a][b]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn guards() {
        let ctx = BubbleContext::square(64, 0.05).unwrap();
        let p = BubbleParams::at(8.0, [0.5, 0.5]).unwrap();
        assert!(matches!(
            adapted_bubble(&ctx.torus, &ctx.green, &ctx.cutoff, &p),
            Err(Error::UnderResolvedBubble { .. })
        ));
        assert!(BubbleParams::new(
            4.0,
            [0.0; 2],
            [[2.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
        )
        .is_err());
    }
}
