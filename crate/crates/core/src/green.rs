//! Green's function of the flat unit-area torus by Ewald summation.
//!
//! With `τ = σ²/4` the mean-zero Green's function of `-Δ` (normalised as
//! `-ΔĜ = 2πδ_0 - 2π`) is
//!
//! ```text
//! Ĝ(x) = ½ Σ_n E1(|x+n|²/σ²) - πσ²/2 + Σ_{k≠0} e^{-π²σ²|k|²} cos(2πk·x) / (2π|k|²)
//! ```
//!
//! summed over lattice vectors `n` and dual vectors `k`. Its Fourier
//! coefficients are `1/(2π|k|²)` and its integral is exactly zero. The regular
//! part `J(x) = Ĝ(x) + log|x|` is evaluated with `E1(s) = Ein(s) - ln s - γ` on
//! the nearest image, so it is smooth through `x = 0`.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::lattice::{LatticeTorus, C64};
use crate::special::{e1, ein, EULER_GAMMA};

/// Exponent beyond which Gaussian factors are below `1e-17`.
const CUTOFF: f64 = 40.0;

/// Ewald evaluator for `Ĝ`, `∇Ĝ` and the regular part on one torus.
#[derive(Clone, Debug)]
pub struct GreenTable {
    torus: LatticeTorus,
    sigma: f64,
    normalization: f64,
    images: Vec<[f64; 2]>,
    duals: Vec<([f64; 2], f64)>,
    real_radius: f64,
    dual_radius: f64,
}

/// Truncation data recorded alongside reports.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct Truncation {
    pub sigma: f64,
    pub real_radius: f64,
    pub real_terms: usize,
    pub dual_radius: f64,
    pub dual_terms: usize,
}

/// Builds the table with the default split `σ = |shortest lattice vector| / 3`.
pub fn build_green(torus: &LatticeTorus) -> GreenTable {
    GreenTable::with_sigma(torus, torus.shortest_vector() / 3.0)
}

impl GreenTable {
    pub fn with_sigma(torus: &LatticeTorus, sigma: f64) -> GreenTable {
        // real-space terms die once |y|²/σ² exceeds CUTOFF; the reduced point has
        // norm at most the circumradius of the Voronoi cell
        let real_radius = sigma * CUTOFF.sqrt();
        let reach = real_radius + cell_circumradius(torus);
        let images = torus.lattice_points(reach);
        let dual_radius = CUTOFF.sqrt() / (PI * sigma);
        let duals = torus
            .dual_points(dual_radius)
            .into_iter()
            .map(|k| {
                let k2 = k[0] * k[0] + k[1] * k[1];
                (k, (-PI * PI * sigma * sigma * k2).exp() / k2)
            })
            .collect();
        GreenTable {
            torus: torus.clone(),
            sigma,
            normalization: 0.0,
            images,
            duals,
            real_radius,
            dual_radius,
        }
    }

    pub fn torus(&self) -> &LatticeTorus {
        &self.torus
    }
    pub fn ewald_split(&self) -> f64 {
        self.sigma
    }
    /// Additive constant; the Ewald form already integrates to zero.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn truncation(&self) -> Truncation {
        Truncation {
            sigma: self.sigma,
            real_radius: self.real_radius,
            real_terms: self.images.len(),
            dual_radius: self.dual_radius,
            dual_terms: self.duals.len(),
        }
    }

    /// `Ĝ(x)`; infinite on the lattice.
    pub fn value(&self, x: [f64; 2]) -> f64 {
        let y = self.torus.min_image(x);
        let r = y[0].hypot(y[1]);
        if r == 0.0 {
            return f64::INFINITY;
        }
        self.regular_value(y) - r.ln()
    }

    /// `∇Ĝ(x)`.
    pub fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        let y = self.torus.min_image(x);
        let r2 = y[0] * y[0] + y[1] * y[1];
        let g = self.regular_gradient(y);
        [g[0] - y[0] / r2, g[1] - y[1] / r2]
    }

    /// `J(y) = Ĝ(y) + log|y|` for an already reduced `y`.
    fn regular_value(&self, y: [f64; 2]) -> f64 {
        let s2 = self.sigma * self.sigma;
        let mut acc = 0.0;
        for n in &self.images {
            let z = [y[0] + n[0], y[1] + n[1]];
            let s = (z[0] * z[0] + z[1] * z[1]) / s2;
            if n[0] == 0.0 && n[1] == 0.0 {
                acc += 0.5 * ein(s) + 0.5 * (s2.ln() - EULER_GAMMA);
            } else if s < CUTOFF {
                acc += 0.5 * e1(s);
            }
        }
        acc -= 0.5 * PI * s2;
        for (k, w) in &self.duals {
            acc += w * (2.0 * PI * (k[0] * y[0] + k[1] * y[1])).cos() / (2.0 * PI);
        }
        acc + self.normalization
    }

    /// `∇J(y)` for an already reduced `y`.
    fn regular_gradient(&self, y: [f64; 2]) -> [f64; 2] {
        let s2 = self.sigma * self.sigma;
        let mut g = [0.0, 0.0];
        for n in &self.images {
            let z = [y[0] + n[0], y[1] + n[1]];
            let r2 = z[0] * z[0] + z[1] * z[1];
            let s = r2 / s2;
            if n[0] == 0.0 && n[1] == 0.0 {
                let q = one_minus_exp_over(s) / s2;
                g[0] += q * z[0];
                g[1] += q * z[1];
            } else if s < CUTOFF {
                let f = -(-s).exp() / r2;
                g[0] += f * z[0];
                g[1] += f * z[1];
            }
        }
        for (k, w) in &self.duals {
            let sn = (2.0 * PI * (k[0] * y[0] + k[1] * y[1])).sin();
            g[0] -= w * sn * k[0];
            g[1] -= w * sn * k[1];
        }
        g
    }

    /// Full Hessian of `J` at a reduced `y`, summed term by term.
    fn regular_hessian(&self, y: [f64; 2]) -> [[f64; 2]; 2] {
        let s2 = self.sigma * self.sigma;
        let mut h = [[0.0; 2]; 2];
        for n in &self.images {
            let z = [y[0] + n[0], y[1] + n[1]];
            let r2 = z[0] * z[0] + z[1] * z[1];
            let s = r2 / s2;
            if n[0] == 0.0 && n[1] == 0.0 {
                let q = one_minus_exp_over(s);
                let dq = one_minus_exp_over_derivative(s);
                for i in 0..2 {
                    for j in 0..2 {
                        let delta = if i == j { 1.0 } else { 0.0 };
                        h[i][j] += q * delta / s2 + dq * 2.0 * z[i] * z[j] / (s2 * s2);
                    }
                }
            } else if s < CUTOFF {
                let e = (-s).exp();
                for i in 0..2 {
                    for j in 0..2 {
                        let delta = if i == j { 1.0 } else { 0.0 };
                        h[i][j] += e * (2.0 * z[i] * z[j] / (s2 * r2))
                            - e * (delta / r2 - 2.0 * z[i] * z[j] / (r2 * r2));
                    }
                }
            }
        }
        for (k, w) in &self.duals {
            let c = (2.0 * PI * (k[0] * y[0] + k[1] * y[1])).cos();
            for i in 0..2 {
                for j in 0..2 {
                    h[i][j] -= 2.0 * PI * w * c * k[i] * k[j];
                }
            }
        }
        h
    }

    /// Regular part `J(x)` and the `y`-gradient `∇_y J(x, 0) = -∇J(x)` on the chart `|x| < ι`.
    pub fn regular_part(&self, x: [f64; 2]) -> Result<(f64, [f64; 2])> {
        let r = x[0].hypot(x[1]);
        if !(r < self.torus.iota()) {
            return Err(Error::ChartDomainError {
                norm: r,
                iota: self.torus.iota(),
            });
        }
        let g = self.regular_gradient(x);
        Ok((self.regular_value(x), [-g[0], -g[1]]))
    }

    /// `∇J(x)` on the chart (gradient in the first slot).
    pub fn regular_gradient_at(&self, x: [f64; 2]) -> Result<[f64; 2]> {
        let (_, gy) = self.regular_part(x)?;
        Ok([-gy[0], -gy[1]])
    }

    /// Mixed-derivative trace of the regular part at coincidence.
    ///
    /// On a flat torus `J_a(x, y) = J(x - y)`, so the trace is `-ΔJ(0)`; the
    /// Laplacian of every Ewald term at the origin has the closed forms used here.
    pub fn script_j(&self, a: [f64; 2]) -> f64 {
        debug_assert!(a[0].is_finite() && a[1].is_finite());
        let s2 = self.sigma * self.sigma;
        let mut real = 0.0;
        for n in &self.images {
            let s = (n[0] * n[0] + n[1] * n[1]) / s2;
            if s < CUTOFF {
                real += (-s).exp();
            }
        }
        let mut dual = 0.0;
        for (k, _) in &self.duals {
            dual += (-PI * PI * s2 * (k[0] * k[0] + k[1] * k[1])).exp();
        }
        -(2.0 / s2 * real - 2.0 * PI * dual)
    }

    /// `4 Re ∂_z ∂_ζ̄ G_a(x, 0)` at coincidence from the complex Wirtinger
    /// derivatives applied to the full Hessian of the regular part.
    pub fn bergman_mixed(&self) -> f64 {
        let h = self.regular_hessian([0.0, 0.0]);
        // f(x - y): ∂_z = ½(∂_1 - i∂_2) in x, ∂_ζ̄ = ½(∂_{y1} + i∂_{y2}) = -½(∂_1 + i∂_2)
        let dz = [Complex64::new(0.5, 0.0), Complex64::new(0.0, -0.5)];
        let dzeta_bar = [Complex64::new(-0.5, 0.0), Complex64::new(0.0, -0.5)];
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..2 {
            for j in 0..2 {
                acc += dz[i] * dzeta_bar[j] * h[i][j];
            }
        }
        4.0 * acc.re
    }

    /// Grid samples of `x` (the chart coordinate `p - a` reduced to the
    /// nearest image) and of `∇J(x)`, in component-major order `[x1, x2, ∂1J, ∂2J]`.
    ///
    /// The long-range part is synthesised exactly from its Fourier coefficients
    /// with a split narrow enough that the real-space part only involves the
    /// nearest images.
    pub fn chart_samples(&self, a: [f64; 2]) -> ChartSamples {
        let torus = &self.torus;
        let n = torus.n();
        let len = torus.len();
        let sigma = self.sigma.min(2.2 / torus.resolved_wavenumber());
        let s2 = sigma * sigma;

        let (kx, ky) = torus.wave_vectors();
        let mut gx = vec![C64::new(0.0, 0.0); len];
        let mut gy = vec![C64::new(0.0, 0.0); len];
        for p in 0..n {
            for q in 0..n {
                let i = p * n + q;
                if i == 0 || !torus.in_band(p, q) {
                    continue;
                }
                let k2 = kx[i] * kx[i] + ky[i] * ky[i];
                let w = (-PI * PI * s2 * k2).exp() / (2.0 * PI * k2);
                if w < 1e-300 {
                    continue;
                }
                let phase = -2.0 * PI * (kx[i] * a[0] + ky[i] * a[1]);
                // coefficient of ∇Ĝ_long(p - a): 2πik ĝ_k e^{-2πik·a}
                let c = C64::new(0.0, 2.0 * PI * w) * C64::from_polar(1.0, phase);
                gx[i] = c * kx[i];
                gy[i] = c * ky[i];
            }
        }
        let (mut jx, mut jy) = torus.inverse_pair(&gx, &gy);

        let reach = sigma * CUTOFF.sqrt();
        let near = torus.lattice_points(reach + cell_circumradius(torus));
        let mut xs = vec![0.0; len];
        let mut ys = vec![0.0; len];
        for i in 0..n {
            for j in 0..n {
                let p = torus.point(i, j);
                let x = torus.min_image([p[0] - a[0], p[1] - a[1]]);
                let idx = i * n + j;
                xs[idx] = x[0];
                ys[idx] = x[1];
                let mut g = [0.0, 0.0];
                for m in &near {
                    let z = [x[0] + m[0], x[1] + m[1]];
                    let r2 = z[0] * z[0] + z[1] * z[1];
                    let s = r2 / s2;
                    if m[0] == 0.0 && m[1] == 0.0 {
                        let q = one_minus_exp_over(s) / s2;
                        g[0] += q * z[0];
                        g[1] += q * z[1];
                    } else if s < CUTOFF {
                        let f = -(-s).exp() / r2;
                        g[0] += f * z[0];
                        g[1] += f * z[1];
                    }
                }
                jx[idx] += g[0];
                jy[idx] += g[1];
            }
        }
        ChartSamples {
            x1: xs,
            x2: ys,
            grad_j1: jx,
            grad_j2: jy,
        }
    }

    /// Band-limited projection of `Ĝ` (coefficients `1/(2π|k|²)`, zero mean).
    pub fn band_limited_field(&self, a: [f64; 2]) -> Field {
        let torus = &self.torus;
        let (kx, ky) = torus.wave_vectors();
        let spec: Vec<C64> = (0..torus.len())
            .map(|i| {
                if i == 0 {
                    return C64::new(0.0, 0.0);
                }
                let k2 = kx[i] * kx[i] + ky[i] * ky[i];
                let phase = -2.0 * PI * (kx[i] * a[0] + ky[i] * a[1]);
                C64::from_polar(1.0 / (2.0 * PI * k2), phase)
            })
            .collect();
        Field::from_spectral(torus, 1, spec)
            .expect("shape is consistent")
            .into_mean_zero()
    }
}

/// Grid data consumed by the bubble construction.
pub struct ChartSamples {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub grad_j1: Vec<f64>,
    pub grad_j2: Vec<f64>,
}

fn cell_circumradius(torus: &LatticeTorus) -> f64 {
    let b = torus.basis();
    let corners = [
        [0.5 * (b[0][0] + b[1][0]), 0.5 * (b[0][1] + b[1][1])],
        [0.5 * (b[0][0] - b[1][0]), 0.5 * (b[0][1] - b[1][1])],
    ];
    corners.iter().map(|c| c[0].hypot(c[1])).fold(0.0, f64::max) + 1e-9
}

/// `(1 - e^{-s}) / s`, continuous at 0.
fn one_minus_exp_over(s: f64) -> f64 {
    if s < 1e-8 {
        1.0 - 0.5 * s
    } else {
        -(-s).exp_m1() / s
    }
}

/// Derivative of [`one_minus_exp_over`].
fn one_minus_exp_over_derivative(s: f64) -> f64 {
    if s < 1e-3 {
        -0.5 + s / 3.0 - s * s / 8.0
    } else {
        let e = (-s).exp();
        (s * e + (-s).exp_m1()) / (s * s)
    }
}

/// Quadrature of `∫ Ĝ(x) f(x) dx` over the torus for a smooth periodic `f`.
///
/// The logarithmic singularity is removed with a smooth bump: the remainder is
/// integrated on an `m x m` grid, the bump part in polar coordinates with
/// Gauss–Legendre nodes. Used to test the Ewald evaluator against its Fourier
/// coefficients and the weak Green identity.
pub fn integrate_against(gt: &GreenTable, m: usize, f: impl Fn([f64; 2]) -> f64) -> f64 {
    let torus = gt.torus();
    let rho = 0.9 * torus.iota();
    let bump = |r: f64| -> f64 {
        if r >= rho {
            0.0
        } else {
            let t = r / rho;
            (1.0 - 1.0 / (1.0 - t * t).max(1e-300)).exp() * if t < 1.0 { 1.0 } else { 0.0 }
        }
    };
    let b = torus.basis();
    let mut grid_sum = 0.0;
    for i in 0..m {
        for j in 0..m {
            let (s, t) = (i as f64 / m as f64, j as f64 / m as f64);
            let p = [s * b[0][0] + t * b[1][0], s * b[0][1] + t * b[1][1]];
            let x = torus.min_image(p);
            let r = x[0].hypot(x[1]);
            let smooth = if r == 0.0 {
                gt.regular_value([0.0, 0.0])
            } else {
                gt.value(x) + bump(r) * r.ln()
            };
            grid_sum += smooth * f(p);
        }
    }
    grid_sum /= (m * m) as f64;

    // ∫ bump(r) ln r f dx over the disc of radius rho
    let (nodes, weights) = gauss_legendre(64);
    let mut polar = 0.0;
    let n_theta = 256;
    for (u, w) in nodes.iter().zip(&weights) {
        // r = rho t^2 tames the r ln r endpoint behaviour
        let t = 0.5 * (u + 1.0);
        let r = rho * t * t;
        let jac = 0.5 * w * 2.0 * rho * t;
        let mut ring = 0.0;
        for k in 0..n_theta {
            let th = 2.0 * PI * k as f64 / n_theta as f64;
            ring += f([r * th.cos(), r * th.sin()]);
        }
        ring *= 2.0 * PI / n_theta as f64;
        polar += jac * r * r.ln() * bump(r) * ring;
    }
    grid_sum - polar
}

fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                let (mut q0, mut q1) = (1.0, z);
                for k in 2..=n {
                    let q2 = ((2 * k - 1) as f64 * z * q1 - (k - 1) as f64 * q0) / k as f64;
                    q0 = q1;
                    q1 = q2;
                }
                let dq = n as f64 * (z * q1 - q0) / (z * z - 1.0);
                x[i] = z;
                w[i] = 2.0 / ((1.0 - z * z) * dq * dq);
                break;
            }
        }
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{make_grid, square_torus};

    #[test]
    fn script_j_is_minus_two_pi() {
        let t = square_torus(64).unwrap();
        let gt = build_green(&t);
        assert!((gt.script_j([0.3, 0.1]) + 2.0 * PI).abs() < 1e-10);
        let g2 = GreenTable::with_sigma(&t, 2.0 * gt.ewald_split());
        assert!((g2.script_j([0.0, 0.0]) - gt.script_j([0.0, 0.0])).abs() < 1e-8);
    }

    #[test]
    fn bergman_matches_trace() {
        for basis in [
            [[1.0, 0.0], [0.0, 1.0]],
            [[1.0, 0.0], [0.5, 1.0]],
            [[1.2, 0.0], [0.3, 1.0 / 1.2]],
        ] {
            let t = make_grid(basis, 32).unwrap();
            let gt = build_green(&t);
            assert!((gt.bergman_mixed() - gt.script_j([0.0, 0.0])).abs() < 1e-9);
        }
    }

    #[test]
    fn green_is_even_and_split_independent() {
        let t = make_grid([[1.0, 0.0], [0.5, 1.0]], 32).unwrap();
        let g1 = build_green(&t);
        let g2 = GreenTable::with_sigma(&t, 0.5 * g1.ewald_split());
        for &x in &[[0.1, 0.2], [0.37, -0.41], [0.05, 0.01]] {
            let v = g1.value(x);
            assert!((v - g1.value([-x[0], -x[1]])).abs() < 1e-12);
            assert!((v - g2.value(x)).abs() < 1e-11);
            let (a, b) = (g1.gradient(x), g2.gradient(x));
            assert!((a[0] - b[0]).abs() < 1e-10 && (a[1] - b[1]).abs() < 1e-10);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let t = square_torus(32).unwrap();
        let gt = build_green(&t);
        let x = [0.21, -0.13];
        let h = 1e-5;
        let g = gt.gradient(x);
        let fd0 = (gt.value([x[0] + h, x[1]]) - gt.value([x[0] - h, x[1]])) / (2.0 * h);
        let fd1 = (gt.value([x[0], x[1] + h]) - gt.value([x[0], x[1] - h])) / (2.0 * h);
        assert!((g[0] - fd0).abs() < 1e-8 && (g[1] - fd1).abs() < 1e-8);
    }

    #[test]
    fn regular_part_near_origin() {
        let t = square_torus(32).unwrap();
        let gt = build_green(&t);
        let (j0, g0) = gt.regular_part([0.0, 0.0]).unwrap();
        assert!(g0[0].abs() < 1e-14 && g0[1].abs() < 1e-14);
        let (j1, _) = gt.regular_part([1e-4, 0.0]).unwrap();
        assert!((j1 - j0).abs() < 1e-6);
        assert!(matches!(
            gt.regular_part([0.3, 0.0]),
            Err(Error::ChartDomainError { .. })
        ));
    }

    #[test]
    fn chart_samples_match_point_evaluator() {
        let t = make_grid([[1.0, 0.0], [0.5, 1.0]], 64).unwrap();
        let gt = build_green(&t);
        let a = [0.31, 0.47];
        let cs = gt.chart_samples(a);
        for idx in [0usize, 77, 1000, 2049, 4095] {
            let x = [cs.x1[idx], cs.x2[idx]];
            let g = gt.regular_gradient(x);
            assert!((cs.grad_j1[idx] - g[0]).abs() < 1e-10, "{idx}");
            assert!((cs.grad_j2[idx] - g[1]).abs() < 1e-10, "{idx}");
        }
    }

    #[test]
    fn fourier_coefficient_of_unit_mode() {
        let t = square_torus(32).unwrap();
        let gt = build_green(&t);
        let c = integrate_against(&gt, 256, |p| (2.0 * PI * p[0]).cos());
        assert!((c - 1.0 / (2.0 * PI)).abs() < 1e-8, "{c}");
        let mean = integrate_against(&gt, 256, |_| 1.0);
        assert!(mean.abs() < 1e-8, "{mean}");
    }
}
