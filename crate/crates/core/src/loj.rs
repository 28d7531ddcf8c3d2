//! Exponent bookkeeping for Łojasiewicz estimates near a manifold of almost
//! critical points: the `F_∞`/`F_0` selection rules on (power, log-power)
//! pairs, decay-rate records, the derived exponents, and synthetic
//! finite-dimensional functionals on which the two abstract lemmas are
//! checked by sampling.

use nalgebra::{DMatrix, DVector};
use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::random::{normal, seeded_rng};

pub type Q = Ratio<i64>;

pub fn q(n: i64, d: i64) -> Q {
    Ratio::new(n, d)
}

fn qi(n: i64) -> Q {
    Ratio::from_integer(n)
}

/// `λ^a (log λ)^b` (or `δ^a |log δ|^b` for small `δ`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ExpPair {
    pub a: Q,
    pub b: Q,
}

impl ExpPair {
    pub fn new(a: Q, b: Q) -> ExpPair {
        ExpPair { a, b }
    }

    pub fn ints(a: i64, b: i64) -> ExpPair {
        ExpPair::new(qi(a), qi(b))
    }

    pub fn neg(self) -> ExpPair {
        ExpPair::new(-self.a, -self.b)
    }

    pub fn to_f64(self) -> (f64, f64) {
        (to_f64(self.a), to_f64(self.b))
    }
}

pub fn to_f64(x: Q) -> f64 {
    x.to_f64().expect("finite rational")
}

/// Dominant pair as `λ → ∞`: larger power, ties broken by the larger log power.
pub fn f_infty(p: ExpPair, q: ExpPair) -> ExpPair {
    if p.a > q.a || (p.a == q.a && p.b >= q.b) {
        p
    } else {
        q
    }
}

/// Dominant pair as `δ → 0⁺`: smaller power, ties broken by the larger log power.
pub fn f_zero(p: ExpPair, q: ExpPair) -> ExpPair {
    if p.a < q.a || (p.a == q.a && p.b >= q.b) {
        p
    } else {
        q
    }
}

/// Rates `f_i(λ) ~ λ^{-γ_i} (log λ)^{-σ_i}` of the five control functions and `ν`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecayRates {
    pub gamma: [Q; 5],
    pub sigma: [Q; 5],
    pub nu: Q,
}

impl DecayRates {
    pub fn new(gamma: [Q; 5], sigma: [Q; 5], nu: Q) -> Result<DecayRates> {
        if gamma.iter().any(|g| g.is_negative()) {
            return Err(Error::WrongRegime("rates γ_i must be nonnegative".into()));
        }
        if nu < Q::one() {
            return Err(Error::WrongRegime(format!("ν = {nu} must be at least 1")));
        }
        for i in [0, 2, 4] {
            if gamma[i].is_zero() && !sigma[i].is_positive() {
                return Err(Error::WrongRegime(format!(
                    "σ_{i} must be positive when γ_{i} = 0"
                )));
            }
        }
        Ok(DecayRates { gamma, sigma, nu })
    }

    pub fn pair(&self, i: usize) -> ExpPair {
        ExpPair::new(self.gamma[i], self.sigma[i])
    }

    /// Rates of the H-energy with the `L²` gradient norm.
    pub fn h_energy_l2() -> DecayRates {
        let h = q(1, 2);
        DecayRates::new(
            [qi(2), qi(2), qi(2), qi(1), qi(2)],
            [qi(0), -h, -h, -h, qi(0)],
            qi(2),
        )
        .expect("valid preset")
    }

    /// Rates of the H-energy with the `H⁻¹` (dual Ḣ¹) gradient norm.
    pub fn h_energy_hm1() -> DecayRates {
        let h = q(1, 2);
        DecayRates::new(
            [qi(2), qi(2), qi(2), qi(0), qi(2)],
            [qi(0), -h, -h, qi(0), qi(0)],
            qi(2),
        )
        .expect("valid preset")
    }

    pub fn preset(name: &str) -> Option<DecayRates> {
        match name {
            "h-energy-l2" => Some(DecayRates::h_energy_l2()),
            "h-energy-hm1" | "h-energy-h-1" => Some(DecayRates::h_energy_hm1()),
            _ => None,
        }
    }
}

/// `(γ_{1,3}, σ_{1,3})`: the slower of the decays of `f_1` and `f_3`.
pub fn combine_13(r: &DecayRates) -> ExpPair {
    f_infty(r.pair(1).neg(), r.pair(3).neg()).neg()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LojExponents {
    /// `γ_0 > 0`: `(α_i, β_i)` for `λ⁻¹`, the distance and the energy defect.
    Poly { alpha: [Q; 3], beta: [Q; 3] },
    /// `γ_0 = 0`: rates `η_i`.
    Log { eta: [Q; 3] },
}

impl LojExponents {
    pub fn regime(&self) -> &'static str {
        match self {
            LojExponents::Poly { .. } => "poly",
            LojExponents::Log { .. } => "log",
        }
    }
}

pub fn exponents_poly(r: &DecayRates) -> Result<LojExponents> {
    let g0 = r.gamma[0];
    if !g0.is_positive() {
        return Err(Error::WrongRegime(
            "γ_0 = 0 belongs to the logarithmic regime".into(),
        ));
    }
    let c = combine_13(r);
    let inv = f_infty(
        ExpPair::new(g0 - c.a, r.sigma[0] - c.b),
        ExpPair::new(g0 / r.nu, r.sigma[0] / r.nu),
    );
    if !inv.a.is_positive() {
        return Err(Error::WrongRegime(format!(
            "1/α_1 = {} is not positive",
            inv.a
        )));
    }
    let a1 = inv.a.recip();
    let b1 = inv.b * a1;
    let p2 = f_zero(
        ExpPair::ints(1, 0),
        ExpPair::new(r.gamma[2] * a1, r.gamma[2] * b1 - r.sigma[2]),
    );
    let p3 = f_zero(
        ExpPair::new(p2.a * 2, p2.b * 2),
        ExpPair::new(r.gamma[4] * a1, r.gamma[4] * b1 - r.sigma[4]),
    );
    let alpha = [a1, p2.a, p3.a];
    if alpha.iter().any(|a| !a.is_positive()) {
        return Err(Error::WrongRegime(format!(
            "nonpositive exponent in {alpha:?}"
        )));
    }
    Ok(LojExponents::Poly {
        alpha,
        beta: [b1, p2.b, p3.b],
    })
}

pub fn exponents_log(r: &DecayRates) -> Result<LojExponents> {
    if !r.gamma[0].is_zero() || !r.sigma[0].is_positive() {
        return Err(Error::WrongRegime(
            "the logarithmic regime needs γ_0 = 0 and σ_0 > 0".into(),
        ));
    }
    let s0 = r.sigma[0];
    let c = combine_13(r);
    let eta1 = if c.a.is_positive() {
        r.nu / s0
    } else {
        let m = (s0 - c.b).max(s0 / r.nu);
        m.recip()
    };
    let eta2 = if r.gamma[2].is_positive() {
        Q::one()
    } else {
        Q::one().min(r.sigma[2] * eta1)
    };
    let eta3 = if r.gamma[4].is_positive() {
        eta2 * 2
    } else {
        (eta2 * 2).min(r.sigma[4] * eta1)
    };
    let eta = [eta1, eta2, eta3];
    if eta.iter().any(|e| !e.is_positive()) {
        return Err(Error::WrongRegime(format!("nonpositive rate in {eta:?}")));
    }
    Ok(LojExponents::Log { eta })
}

/// Picks the regime from `γ_0`.
pub fn exponents(r: &DecayRates) -> Result<LojExponents> {
    if r.gamma[0].is_positive() {
        exponents_poly(r)
    } else {
        exponents_log(r)
    }
}

/// Synthetic functional on `ℝ^dim = ℝ e_0 ⊕ ℝ^m`,
///
/// `𝓘(t, y) = F(t) + b(t)·y + ½ yᵀ D y + (κ/3) Σ y_i³`
///
/// with the curve `𝒵 = {(t, 0)}`, `λ(t, 0) = t`, `y_z = e_0`,
/// `F'(t) = -t^{-γ_0} (log t)^{-σ_0}` and `b(t) = t^{-γ_2} e`.
#[derive(Clone, Debug)]
pub struct ToyFunctional {
    pub d: DMatrix<f64>,
    /// Unit direction of `b`.
    pub e: DVector<f64>,
    pub gamma0: f64,
    pub sigma0: f64,
    pub gamma2: f64,
    pub kappa: f64,
    /// Smallest `|eigenvalue|` of `D`.
    pub c0: f64,
    /// Eigenvectors of `D` (columns).
    pub eigvecs: DMatrix<f64>,
}

impl ToyFunctional {
    pub fn m(&self) -> usize {
        self.d.nrows()
    }

    pub fn f0(&self, t: f64) -> f64 {
        t.powf(-self.gamma0) * t.ln().powf(-self.sigma0)
    }

    pub fn f1(&self, t: f64) -> f64 {
        self.b_scale() * self.gamma2 * t.powf(-self.gamma2 - 1.0)
    }

    pub fn f2(&self, t: f64) -> f64 {
        self.b_scale() * t.powf(-self.gamma2)
    }

    fn b_scale(&self) -> f64 {
        if self.e.norm() == 0.0 {
            0.0
        } else {
            1.0
        }
    }

    /// `(∂_t 𝓘, ∇_y 𝓘)` at `(t, y)`.
    pub fn gradient(&self, t: f64, y: &DVector<f64>) -> (f64, DVector<f64>) {
        let bt = &self.e * t.powf(-self.gamma2);
        let dbt = &self.e * (-self.gamma2 * t.powf(-self.gamma2 - 1.0));
        let dt = -self.f0(t) + dbt.dot(y);
        let mut gy = bt + &self.d * y;
        for i in 0..y.len() {
            gy[i] += self.kappa * y[i] * y[i];
        }
        (dt, gy)
    }

    /// `𝓘(t, y)` with `F(t) = ∫_2^t F'`.
    pub fn value(&self, t: f64, y: &DVector<f64>) -> f64 {
        // composite Simpson on [2, t]
        let n = 4000;
        let h = (t - 2.0) / n as f64;
        let f = -(0..=n)
            .map(|i| {
                let w = if i == 0 || i == n {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                w * self.f0(2.0 + h * i as f64)
            })
            .sum::<f64>()
            * h
            / 3.0;
        let b = self.e.dot(y) * t.powf(-self.gamma2);
        let cubic: f64 = y.iter().map(|v| v * v * v).sum::<f64>() * self.kappa / 3.0;
        f + b + 0.5 * y.dot(&(&self.d * y)) + cubic
    }
}

/// Which synthetic functional to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ToyKind {
    /// `b = 0`, `κ = 0`, indefinite `D`.
    Quadratic,
    /// Indefinite `D` with cubic terms and decaying `b`.
    Nonlinear,
    /// Positive definite `D` (`𝒱⁻ = ∅`) with cubic terms.
    Definite,
}

pub fn build_toy(kind: ToyKind, dim: usize, seed: u64, gamma0: f64, sigma0: f64) -> ToyFunctional {
    assert!((2..=50).contains(&dim), "toy dimension must lie in 2..=50");
    let m = dim - 1;
    let mut rng = seeded_rng(seed);
    let raw = DMatrix::from_fn(m, m, |_, _| normal(&mut rng));
    let qm = raw.qr().q();
    let eig: Vec<f64> = (0..m)
        .map(|i| {
            let mag = 0.5 + 1.5 * (i as f64) / (m.max(2) - 1) as f64;
            let sign = match kind {
                ToyKind::Definite => 1.0,
                _ if i % 2 == 1 => -1.0,
                _ => 1.0,
            };
            sign * mag
        })
        .collect();
    let d = &qm * DMatrix::from_diagonal(&DVector::from_vec(eig.clone())) * qm.transpose();
    let c0 = eig.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    let (e, kappa, gamma2) = match kind {
        ToyKind::Quadratic => (DVector::zeros(m), 0.0, 2.0),
        _ => {
            let v = DVector::from_fn(m, |_, _| normal(&mut rng));
            (v.normalize(), 0.3, 2.0)
        }
    };
    ToyFunctional {
        d,
        e,
        gamma0,
        sigma0,
        gamma2,
        kappa,
        c0,
        eigvecs: qm,
    }
}

/// Outcome of sampling both lemmas on one synthetic functional.
#[derive(Clone, Debug, Serialize)]
pub struct ToyReport {
    pub kind: ToyKind,
    pub dim: usize,
    pub samples: usize,
    pub c0: f64,
    /// Constant used in the distance bound (`1/c_0` for quadratic, `2/c_0` otherwise).
    pub c_lemma1: f64,
    /// `max ‖u - z‖ / (‖d𝓘(u)‖_{𝒱*} + ‖d𝓘(z)‖_{𝒱*})` over the samples.
    pub c_lemma1_fit: f64,
    pub lemma1_violations: usize,
    /// `max f_0 / rhs` of the second lemma (≤ 1 when it holds).
    pub lemma2_max_ratio: f64,
    pub lemma2_violations: usize,
    pub lambda1: f64,
    pub eps1: f64,
}

impl ToyReport {
    pub fn passed(&self) -> bool {
        self.lemma1_violations == 0 && self.lemma2_violations == 0
    }
}

/// Samples `samples` points near the curve and checks both lemmas.
pub fn check_toy(toy: &ToyFunctional, kind: ToyKind, samples: usize, seed: u64) -> ToyReport {
    let m = toy.m();
    let c0 = toy.c0;
    let quadratic = toy.kappa == 0.0;
    // Hessian drift 2κ‖y‖ stays below c0/2 on the ball of radius eps1
    let eps1 = if quadratic {
        1.0
    } else {
        c0 / (4.0 * toy.kappa)
    };
    let c_l1 = if quadratic { 1.0 / c0 } else { 2.0 / c0 };
    let nu = 2.0;
    // |(d²𝓘(z + w) - d²𝓘(z))[e_0, w]| = 0 here; keep a generic ν-term constant
    let c_nu = 1.0;
    // absorb C_L f1 f2 + 2^{ν-1} C_nu C_L^ν f2^ν into f0/2
    let absorbed = |t: f64| {
        c_l1 * toy.f1(t) * toy.f2(t)
            + 2f64.powf(nu - 1.0) * c_nu * c_l1.powf(nu) * toy.f2(t).powf(nu)
            <= 0.5 * toy.f0(t)
    };
    let mut lambda1 = 3.0;
    while !absorbed(lambda1) {
        lambda1 *= 1.25;
    }
    let mut rng = seeded_rng(seed ^ 0x9e37_79b9);
    let mut fit = 0.0f64;
    let (mut v1, mut v2) = (0, 0);
    let mut worst2 = 0.0f64;
    for s in 0..samples {
        let t = lambda1 * (10f64).powf(rng_unit(&mut rng));
        let dir = if s < 2 * m {
            // eigen-directions of D, both signs
            let col = toy.eigvecs.column(s % m).into_owned();
            if s < m {
                col
            } else {
                -col
            }
        } else {
            DVector::from_fn(m, |_, _| normal(&mut rng)).normalize()
        };
        let radius = eps1 * 0.999 * rng_unit(&mut rng).max(1e-3);
        let y = dir * radius;
        let (_, gz) = toy.gradient(t, &DVector::zeros(m));
        let (dt_u, gu) = toy.gradient(t, &y);
        let a = gu.norm();
        let lhs1 = y.norm();
        let denom = a + gz.norm();
        fit = fit.max(lhs1 / denom);
        if lhs1 > c_l1 * denom * (1.0 + 1e-12) {
            v1 += 1;
        }
        let rhs2 = 2.0 * dt_u.abs()
            + 2.0 * c_l1 * toy.f1(t) * a
            + 2f64.powf(nu) * c_nu * c_l1.powf(nu) * a.powf(nu);
        let ratio = toy.f0(t) / rhs2;
        worst2 = worst2.max(ratio);
        if ratio > 1.0 + 1e-12 {
            v2 += 1;
        }
    }
    ToyReport {
        kind,
        dim: m + 1,
        samples,
        c0,
        c_lemma1: c_l1,
        c_lemma1_fit: fit,
        lemma1_violations: v1,
        lemma2_max_ratio: worst2,
        lemma2_violations: v2,
        lambda1,
        eps1,
    }
}

fn rng_unit(rng: &mut impl rand::Rng) -> f64 {
    rng.gen::<f64>()
}

/// Runs the three synthetic configurations with rates `(γ_0, σ_0) = (2, 0)`
/// on `10³` samples each.
pub fn toy_model_check(dim: usize, seed: u64) -> Vec<ToyReport> {
    [ToyKind::Quadratic, ToyKind::Nonlinear, ToyKind::Definite]
        .iter()
        .map(|&kind| {
            let toy = build_toy(kind, dim, seed, 2.0, 0.0);
            check_toy(&toy, kind, 1000, seed)
        })
        .collect()
}
