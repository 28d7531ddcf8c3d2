//! The H-energy `E(u) = ½∫|∇u|² - 2V(u)`, `V(u) = ⅓∫u·(u_{x1} ∧ u_{x2})`, its
//! variations, the Jacobi operator and the Wente energy.
//!
//! All cubic terms go through the trilinear form
//! `T(a, b, c) = ∫ a·(b_1 ∧ c_2 - b_2 ∧ c_1)`, which is totally symmetric, so
//!
//! ```text
//! E(u)       = ½‖u‖² - ⅓T(u,u,u)
//! dE(u)[v]   = ⟨u,v⟩ - T(v,u,u)          = ∫ v·(-Δu - 2 u_1 ∧ u_2)
//! d²E(u)[w,v] = ⟨w,v⟩ - 2T(u,v,w)
//! ```

use crate::error::{Error, Result};
use crate::field::{
    h1_inner, h_minus1_norm, jacobian_bracket, l2_inner, project_padded, solve_poisson,
    DensityFunctional, Field, Padded,
};
use crate::lattice::C64;

const FOUR_PI2: f64 = 4.0 * std::f64::consts::PI * std::f64::consts::PI;

/// `E`, `V` and the Dirichlet part `½∫|∇u|²`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct EnergyReport {
    pub e: f64,
    pub v: f64,
    pub dirichlet: f64,
}

fn require_map(u: &Field) -> Result<()> {
    if u.comps() != 3 {
        return Err(Error::ShapeError(format!(
            "expected a 3-component map, got {} components",
            u.comps()
        )));
    }
    Ok(())
}

fn require_mean_zero_map(u: &Field, what: &'static str) -> Result<()> {
    require_map(u)?;
    if !u.is_mean_zero() {
        let scale = 1.0 + u.l2_norm();
        let worst = u.means().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if worst > 1e-12 * scale {
            return Err(Error::MeanZeroRequired { what, mean: worst });
        }
    }
    Ok(())
}

#[inline]
fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
fn at(p: &[Vec<f64>], i: usize) -> [f64; 3] {
    [p[0][i], p[1][i], p[2][i]]
}

/// Energy of a mean-zero 3-component map.
pub fn energy(u: &Field) -> Result<EnergyReport> {
    require_map(u)?;
    let pu = Padded::new(u, true);
    let m = pu.val[0].len();
    let mut cubic = 0.0;
    for i in 0..m {
        let c = cross(at(&pu.d1, i), at(&pu.d2, i));
        let v = at(&pu.val, i);
        cubic += v[0] * c[0] + v[1] * c[1] + v[2] * c[2];
    }
    let v = cubic / m as f64 / 3.0;
    let dirichlet = 0.5 * h1_inner(u, u);
    Ok(EnergyReport {
        e: dirichlet - 2.0 * v,
        v,
        dirichlet,
    })
}

/// `L^2` representative of `dE(u)` with its norms.
#[derive(Clone, Debug)]
pub struct FirstVariation {
    pub rho: DensityFunctional,
    pub l2_norm: f64,
    pub hm1_norm: f64,
    /// Largest component mean removed from the raw density.
    pub mean_residue: f64,
}

impl FirstVariation {
    /// `dE(u)[v]`.
    pub fn apply(&self, v: &Field) -> Result<f64> {
        self.rho.apply(v)
    }
}

/// Band projection of `u_1 ∧ u_2`.
fn wedge_density(u: &Field) -> Vec<C64> {
    let pu = Padded::new(u, false);
    let m = pu.d1[0].len();
    let mut parts = vec![vec![0.0; m], vec![0.0; m], vec![0.0; m]];
    for i in 0..m {
        let c = cross(at(&pu.d1, i), at(&pu.d2, i));
        for k in 0..3 {
            parts[k][i] = c[k];
        }
    }
    project_padded(u.torus(), parts)
}

/// `ρ = -Δu - 2 u_1 ∧ u_2`, so that `dE(u)[v] = ∫ ρ·v`.
pub fn first_variation(u: &Field) -> Result<FirstVariation> {
    require_mean_zero_map(u, "first_variation input")?;
    let torus = u.torus();
    let len = torus.len();
    let (kx, ky) = torus.wave_vectors();
    let wedge = wedge_density(u);
    let us = u.spectral();
    let mut spec: Vec<C64> = (0..3 * len)
        .map(|idx| {
            let i = idx % len;
            us[idx] * (FOUR_PI2 * (kx[i] * kx[i] + ky[i] * ky[i])) - wedge[idx] * 2.0
        })
        .collect();
    let mut mean_residue = 0.0f64;
    for c in 0..3 {
        mean_residue = mean_residue.max(spec[c * len].norm());
        spec[c * len] = C64::new(0.0, 0.0);
    }
    let rho = DensityFunctional::new(Field::from_spectral(torus, 3, spec)?.into_mean_zero())?;
    let hm1_norm = h_minus1_norm(&rho)?;
    Ok(FirstVariation {
        l2_norm: rho.l2_norm(),
        hm1_norm,
        rho,
        mean_residue,
    })
}

/// `d²E(u)[w, v] = ⟨w, v⟩_{Ḣ¹} - 2 ∫ u·(v_1 ∧ w_2 - v_2 ∧ w_1)`.
pub fn second_variation(u: &Field, w: &Field, v: &Field) -> Result<f64> {
    for f in [u, w, v] {
        require_map(f)?;
    }
    let pu = Padded::new(u, true);
    let pw = Padded::new(w, false);
    let pv = Padded::new(v, false);
    let m = pu.val[0].len();
    let mut cubic = 0.0;
    for i in 0..m {
        let a = cross(at(&pv.d1, i), at(&pw.d2, i));
        let b = cross(at(&pv.d2, i), at(&pw.d1, i));
        let x = at(&pu.val, i);
        cubic += x[0] * (a[0] - b[0]) + x[1] * (a[1] - b[1]) + x[2] * (a[2] - b[2]);
    }
    Ok(h1_inner(w, v) - 2.0 * cubic / m as f64)
}

/// `L_u = Id + c_u`, the Ḣ¹ representation of `d²E(u)`, with `u` preprocessed
/// once for repeated application.
pub struct JacobiOperator {
    u: Field,
    pu: Padded,
}

impl JacobiOperator {
    pub fn new(u: &Field) -> Result<JacobiOperator> {
        require_map(u)?;
        Ok(JacobiOperator {
            u: u.clone(),
            pu: Padded::new(u, false),
        })
    }

    pub fn base(&self) -> &Field {
        &self.u
    }

    /// `c_u(w) = (-Δ)^{-1}[-2 (u_1 ∧ w_2 - u_2 ∧ w_1)]`.
    pub fn compact_part(&self, w: &Field) -> Result<Field> {
        require_map(w)?;
        let pw = Padded::new(w, false);
        let m = pw.d1[0].len();
        let mut parts = vec![vec![0.0; m], vec![0.0; m], vec![0.0; m]];
        for i in 0..m {
            let a = cross(at(&self.pu.d1, i), at(&pw.d2, i));
            let b = cross(at(&self.pu.d2, i), at(&pw.d1, i));
            for k in 0..3 {
                parts[k][i] = -2.0 * (a[k] - b[k]);
            }
        }
        let torus = w.torus();
        let mut spec = project_padded(torus, parts);
        let len = torus.len();
        for c in 0..3 {
            spec[c * len] = C64::new(0.0, 0.0);
        }
        solve_poisson(&Field::from_spectral(torus, 3, spec)?.into_mean_zero())
    }

    pub fn apply(&self, w: &Field) -> Result<Field> {
        w.add(&self.compact_part(w)?)
    }
}

/// `L_u(w) = w + c_u(w)`.
pub fn jacobi_apply(u: &Field, w: &Field) -> Result<Field> {
    require_mean_zero_map(u, "jacobi_apply base")?;
    require_mean_zero_map(w, "jacobi_apply direction")?;
    JacobiOperator::new(u)?.apply(w)
}

/// `φ_{ab}` solving `-Δφ = {a, b}` with zero mean.
pub fn wente_solve(a: &Field, b: &Field) -> Result<Field> {
    let bracket = jacobian_bracket(a, b)?.into_mean_zero();
    solve_poisson(&bracket)
}

/// Wente energy `W(a, b) = ‖a‖²‖b‖²/‖φ_{ab}‖²` and the lift
/// `u = (W^{1/2}/2)(a, b, φ_{ab}/‖φ_{ab}‖)` with `W = 8 E(u)`.
pub fn wente_energy_and_lift(a: &Field, b: &Field) -> Result<(f64, Field)> {
    let (na, nb) = (a.h1_norm(), b.h1_norm());
    if (na - 1.0).abs() > 1e-10 || (nb - 1.0).abs() > 1e-10 {
        return Err(Error::ShapeError(format!(
            "Wente pair must be Ḣ¹-normalised, got norms {na} and {nb}"
        )));
    }
    let phi = wente_solve(a, b)?;
    let nphi = phi.h1_norm();
    if !(nphi > 1e-14) {
        return Err(Error::DegeneratePair);
    }
    let w = (na * na * nb * nb) / (nphi * nphi);
    let s = 0.5 * w.sqrt();
    let u = Field::stack(&[&a.scale(s), &b.scale(s), &phi.scale(s / nphi)])?.into_mean_zero();
    Ok((w, u))
}

/// Wente energy alone (no normalisation requirement).
pub fn wente_energy(a: &Field, b: &Field) -> Result<f64> {
    let phi = wente_solve(a, b)?;
    let nphi = phi.h1_norm();
    if !(nphi > 1e-14) {
        return Err(Error::DegeneratePair);
    }
    let (na, nb) = (a.h1_norm(), b.h1_norm());
    Ok(na * na * nb * nb / (nphi * nphi))
}

/// `dE(u)[v]` evaluated directly from the trilinear form, without forming `ρ`.
pub fn first_variation_direct(u: &Field, v: &Field) -> Result<f64> {
    require_map(u)?;
    require_map(v)?;
    let pu = Padded::new(u, false);
    let pv = Padded::new(v, true);
    let m = pu.d1[0].len();
    let mut cubic = 0.0;
    for i in 0..m {
        let c = cross(at(&pu.d1, i), at(&pu.d2, i));
        let x = at(&pv.val, i);
        cubic += x[0] * c[0] + x[1] * c[1] + x[2] * c[2];
    }
    Ok(h1_inner(u, v) - 2.0 * cubic / m as f64)
}

/// `⟨ρ, v⟩_{L²}` helper for callers holding a density.
pub fn pair(rho: &DensityFunctional, v: &Field) -> f64 {
    l2_inner(rho.density(), v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::square_torus;
    use crate::random::{random_field, seeded_rng};

    #[test]
    fn jacobi_duality_quick() {
        let t = square_torus(64).unwrap();
        let mut rng = seeded_rng(11);
        let u = random_field(&t, 3, 6.0, 1.0, &mut rng);
        let w = random_field(&t, 3, 6.0, 1.0, &mut rng);
        let v = random_field(&t, 3, 6.0, 1.0, &mut rng);
        let lhs = h1_inner(&jacobi_apply(&u, &w).unwrap(), &v);
        let rhs = second_variation(&u, &w, &v).unwrap();
        println!("{lhs} {rhs}");
        assert!((lhs - rhs).abs() < 1e-8 * lhs.abs().max(1.0));
    }
}
