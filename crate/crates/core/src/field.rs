//! Band-limited fields on a [`LatticeTorus`] and the exact spectral calculus on them.
//!
//! Every field is band-limited: the Nyquist row and column of its spectrum are
//! zero. Quadratic products evaluated on the `3N/2` grid and projected back to
//! the band are then exact, and so are integrals of triple products, which is
//! what keeps the energy and its variations mutually consistent to rounding.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::lattice::{LatticeTorus, C64};

const FOUR_PI2: f64 = 4.0 * std::f64::consts::PI * std::f64::consts::PI;

/// A scalar or vector valued band-limited function on the torus.
///
/// Values and Fourier coefficients are both cached lazily; at least one of them
/// is always present. Fields are immutable once built.
pub struct Field {
    torus: LatticeTorus,
    comps: usize,
    values: OnceLock<Vec<f64>>,
    spectral: OnceLock<Vec<C64>>,
    mean_zero: bool,
}

impl Clone for Field {
    fn clone(&self) -> Self {
        let values = OnceLock::new();
        if let Some(v) = self.values.get() {
            let _ = values.set(v.clone());
        }
        let spectral = OnceLock::new();
        if let Some(s) = self.spectral.get() {
            let _ = spectral.set(s.clone());
        }
        Field {
            torus: self.torus.clone(),
            comps: self.comps,
            values,
            spectral,
            mean_zero: self.mean_zero,
        }
    }
}

impl std::fmt::Debug for Field {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Field")
            .field("n", &self.torus.n())
            .field("comps", &self.comps)
            .field("mean_zero", &self.mean_zero)
            .finish()
    }
}

impl Field {
    /// Samples `values` (component-major, `comps * N * N`) and projects them to the band.
    pub fn from_values(torus: &LatticeTorus, comps: usize, values: Vec<f64>) -> Result<Field> {
        let len = torus.len();
        if comps == 0 || values.len() != comps * len {
            return Err(Error::ShapeError(format!(
                "expected {} samples for {} components, got {}",
                comps * len,
                comps,
                values.len()
            )));
        }
        let mut spec = forward_components(torus, comps, &values);
        let n = torus.n();
        let h = n / 2;
        let mut touched = false;
        for c in 0..comps {
            let s = &mut spec[c * len..(c + 1) * len];
            for q in 0..n {
                touched |= s[h * n + q].norm() != 0.0 || s[q * n + h].norm() != 0.0;
            }
            torus.band_limit(s);
        }
        let field = Field {
            torus: torus.clone(),
            comps,
            values: OnceLock::new(),
            spectral: OnceLock::new(),
            mean_zero: false,
        };
        if !touched {
            let _ = field.values.set(values);
        }
        let _ = field.spectral.set(spec);
        Ok(field)
    }

    /// Field with the given Fourier coefficients (component-major); Nyquist modes are dropped.
    pub fn from_spectral(torus: &LatticeTorus, comps: usize, mut spec: Vec<C64>) -> Result<Field> {
        let len = torus.len();
        if comps == 0 || spec.len() != comps * len {
            return Err(Error::ShapeError(format!(
                "expected {} coefficients for {} components, got {}",
                comps * len,
                comps,
                spec.len()
            )));
        }
        for c in 0..comps {
            torus.band_limit(&mut spec[c * len..(c + 1) * len]);
        }
        let field = Field {
            torus: torus.clone(),
            comps,
            values: OnceLock::new(),
            spectral: OnceLock::new(),
            mean_zero: false,
        };
        let _ = field.spectral.set(spec);
        Ok(field)
    }

    /// Samples `f` at every grid node; `f` writes `comps` values for the point.
    pub fn from_fn(
        torus: &LatticeTorus,
        comps: usize,
        mut f: impl FnMut([f64; 2], &mut [f64]),
    ) -> Result<Field> {
        let n = torus.n();
        let len = torus.len();
        let mut values = vec![0.0; comps * len];
        let mut buf = vec![0.0; comps];
        for i in 0..n {
            for j in 0..n {
                f(torus.point(i, j), &mut buf);
                for c in 0..comps {
                    values[c * len + i * n + j] = buf[c];
                }
            }
        }
        Field::from_values(torus, comps, values)
    }

    pub fn zeros(torus: &LatticeTorus, comps: usize) -> Field {
        Field::from_spectral(torus, comps, vec![C64::new(0.0, 0.0); comps * torus.len()])
            .expect("shape is consistent")
            .into_mean_zero()
    }

    pub fn torus(&self) -> &LatticeTorus {
        &self.torus
    }
    pub fn comps(&self) -> usize {
        self.comps
    }
    pub fn is_mean_zero(&self) -> bool {
        self.mean_zero
    }

    /// Grid samples, component-major.
    pub fn values(&self) -> &[f64] {
        self.values.get_or_init(|| {
            let spec = self
                .spectral
                .get()
                .expect("one representation is always present");
            inverse_components(&self.torus, self.comps, spec)
        })
    }

    /// Fourier coefficients, component-major.
    pub fn spectral(&self) -> &[C64] {
        self.spectral.get_or_init(|| {
            let vals = self
                .values
                .get()
                .expect("one representation is always present");
            forward_components(&self.torus, self.comps, vals)
        })
    }

    pub fn component_values(&self, c: usize) -> &[f64] {
        let len = self.torus.len();
        &self.values()[c * len..(c + 1) * len]
    }

    pub fn component_spectral(&self, c: usize) -> &[C64] {
        let len = self.torus.len();
        &self.spectral()[c * len..(c + 1) * len]
    }

    /// Single component as a scalar field.
    pub fn component(&self, c: usize) -> Field {
        let out = Field::from_spectral(&self.torus, 1, self.component_spectral(c).to_vec())
            .expect("shape is consistent");
        if self.mean_zero {
            out.into_mean_zero()
        } else {
            out
        }
    }

    /// Stacks scalar or vector fields into one field.
    pub fn stack(parts: &[&Field]) -> Result<Field> {
        let torus = parts
            .first()
            .ok_or_else(|| Error::ShapeError("cannot stack zero fields".into()))?
            .torus
            .clone();
        let mut spec = Vec::new();
        let mut comps = 0;
        for p in parts {
            if p.torus.n() != torus.n() {
                return Err(Error::ShapeError("fields live on different grids".into()));
            }
            spec.extend_from_slice(p.spectral());
            comps += p.comps;
        }
        let out = Field::from_spectral(&torus, comps, spec)?;
        Ok(if parts.iter().all(|p| p.mean_zero) {
            out.into_mean_zero()
        } else {
            out
        })
    }

    /// Grid mean of each component.
    pub fn means(&self) -> Vec<f64> {
        (0..self.comps)
            .map(|c| self.component_spectral(c)[0].re)
            .collect()
    }

    /// Removes the mean of every component and marks the field mean-zero.
    pub fn into_mean_zero(self) -> Field {
        let needs = self.means().iter().any(|m| *m != 0.0);
        if !needs {
            let mut f = self;
            f.mean_zero = true;
            return f;
        }
        let len = self.torus.len();
        let mut spec = self.spectral().to_vec();
        for c in 0..self.comps {
            spec[c * len] = C64::new(0.0, 0.0);
        }
        let mut f =
            Field::from_spectral(&self.torus, self.comps, spec).expect("shape is consistent");
        f.mean_zero = true;
        f
    }

    /// Applies a spectral multiplier to every component.
    pub fn map_spectral(&self, mut f: impl FnMut(usize, usize, C64) -> C64) -> Field {
        let len = self.torus.len();
        let spec: Vec<C64> = self
            .spectral()
            .iter()
            .enumerate()
            .map(|(idx, &v)| f(idx / len, idx % len, v))
            .collect();
        let mut out =
            Field::from_spectral(&self.torus, self.comps, spec).expect("shape is consistent");
        out.mean_zero = self.mean_zero;
        out
    }

    /// Pointwise map of samples producing a new (band-limited) field.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Field {
        let values = self.values().iter().map(|&v| f(v)).collect();
        Field::from_values(&self.torus, self.comps, values).expect("shape is consistent")
    }

    pub fn scale(&self, s: f64) -> Field {
        self.map_spectral(|_, _, v| v * s)
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &Field) -> Result<Field> {
        check_shape(self, other)?;
        let spec: Vec<C64> = self
            .spectral()
            .iter()
            .zip(other.spectral())
            .map(|(a, b)| a + b * s)
            .collect();
        let mut out = Field::from_spectral(&self.torus, self.comps, spec)?;
        out.mean_zero = self.mean_zero && other.mean_zero;
        Ok(out)
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.axpy(-1.0, other)
    }

    /// Applies a constant matrix to the target: `(M u)(x) = M u(x)`.
    pub fn rotate_target(&self, m: &[[f64; 3]; 3]) -> Result<Field> {
        if self.comps != 3 {
            return Err(Error::ShapeError(
                "target rotation needs 3 components".into(),
            ));
        }
        let len = self.torus.len();
        let src = self.spectral();
        let mut spec = vec![C64::new(0.0, 0.0); 3 * len];
        for r in 0..3 {
            for c in 0..3 {
                let w = m[r][c];
                if w == 0.0 {
                    continue;
                }
                let (dst, s) = (
                    &mut spec[r * len..(r + 1) * len],
                    &src[c * len..(c + 1) * len],
                );
                for (d, v) in dst.iter_mut().zip(s) {
                    *d += v * w;
                }
            }
        }
        let mut out = Field::from_spectral(&self.torus, 3, spec)?;
        out.mean_zero = self.mean_zero;
        Ok(out)
    }

    /// `(1/N^2) * sum |values|^2` over every component.
    pub fn l2_norm(&self) -> f64 {
        self.spectral()
            .iter()
            .map(|c| c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn h1_norm(&self) -> f64 {
        h1_inner(self, self).max(0.0).sqrt()
    }

    /// Largest sample magnitude.
    pub fn max_abs(&self) -> f64 {
        self.values().iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

fn forward_components(torus: &LatticeTorus, comps: usize, values: &[f64]) -> Vec<C64> {
    let len = torus.len();
    let mut spec = Vec::with_capacity(comps * len);
    let mut c = 0;
    while c < comps {
        if c + 1 < comps {
            let (a, b) = torus.forward_pair(
                &values[c * len..(c + 1) * len],
                &values[(c + 1) * len..(c + 2) * len],
            );
            spec.extend(a);
            spec.extend(b);
            c += 2;
        } else {
            spec.extend(torus.forward_real(&values[c * len..(c + 1) * len]));
            c += 1;
        }
    }
    spec
}

fn inverse_components(torus: &LatticeTorus, comps: usize, spec: &[C64]) -> Vec<f64> {
    let len = torus.len();
    let mut values = Vec::with_capacity(comps * len);
    let mut c = 0;
    while c < comps {
        if c + 1 < comps {
            let (a, b) = torus.inverse_pair(
                &spec[c * len..(c + 1) * len],
                &spec[(c + 1) * len..(c + 2) * len],
            );
            values.extend(a);
            values.extend(b);
            c += 2;
        } else {
            values.extend(torus.inverse_real(&spec[c * len..(c + 1) * len]));
            c += 1;
        }
    }
    values
}

fn check_shape(f: &Field, g: &Field) -> Result<()> {
    if f.comps != g.comps || f.torus.n() != g.torus.n() {
        return Err(Error::ShapeError(format!(
            "fields with {} and {} components on N = {} and {}",
            f.comps,
            g.comps,
            f.torus.n(),
            g.torus.n()
        )));
    }
    Ok(())
}

fn require_mean_zero(f: &Field, what: &'static str, tol: f64) -> Result<()> {
    let scale = 1.0 + f.l2_norm();
    let worst = f.means().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if worst > tol * scale {
        return Err(Error::MeanZeroRequired { what, mean: worst });
    }
    Ok(())
}

/// Multiplies every coefficient by `-4 pi^2 |k|^2`.
pub fn laplacian(f: &Field) -> Field {
    let (kx, ky) = f.torus.wave_vectors();
    let mut out = f.map_spectral(|_, i, v| v * (-FOUR_PI2 * (kx[i] * kx[i] + ky[i] * ky[i])));
    out.mean_zero = true;
    out
}

/// Inverse of [`laplacian`] on mean-zero fields; the zero mode is set to 0.
pub fn inv_laplacian(f: &Field) -> Result<Field> {
    require_mean_zero(f, "inv_laplacian input", 1e-12)?;
    let (kx, ky) = f.torus.wave_vectors();
    let mut out = f.map_spectral(|_, i, v| {
        if i == 0 {
            C64::new(0.0, 0.0)
        } else {
            v / (-FOUR_PI2 * (kx[i] * kx[i] + ky[i] * ky[i]))
        }
    });
    out.mean_zero = true;
    Ok(out)
}

/// Solves `-Δ φ = f` for mean-zero `f` (mean-zero `φ`).
pub fn solve_poisson(f: &Field) -> Result<Field> {
    Ok(inv_laplacian(f)?.scale(-1.0))
}

/// Cartesian partial derivative `∂/∂x_dir` of every component.
pub fn partial(f: &Field, dir: usize) -> Field {
    let (kx, ky) = f.torus.wave_vectors();
    let k = if dir == 0 { kx } else { ky };
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut out = f.map_spectral(|_, i, v| v * C64::new(0.0, two_pi * k[i]));
    out.mean_zero = true;
    out
}

/// Gradient of a scalar field as a 2-component field.
pub fn grad(f: &Field) -> Result<Field> {
    require_scalar(f)?;
    Field::stack(&[&partial(f, 0), &partial(f, 1)])
}

/// `(-∂_2 f, ∂_1 f)`, the gradient rotated by +90 degrees.
pub fn perp_grad(f: &Field) -> Result<Field> {
    require_scalar(f)?;
    Field::stack(&[&partial(f, 1).scale(-1.0), &partial(f, 0)])
}

fn require_scalar(f: &Field) -> Result<()> {
    if f.comps != 1 {
        return Err(Error::ShapeError(format!(
            "expected a scalar field, got {} components",
            f.comps
        )));
    }
    Ok(())
}

/// Exact `L^2` inner product (Parseval over the band).
pub fn l2_inner(f: &Field, g: &Field) -> f64 {
    f.spectral()
        .iter()
        .zip(g.spectral())
        .map(|(a, b)| a.re * b.re + a.im * b.im)
        .sum()
}

/// `sum_c ∫ ∇f^c · ∇g^c`.
pub fn h1_inner(f: &Field, g: &Field) -> f64 {
    let (kx, ky) = f.torus.wave_vectors();
    let len = f.torus.len();
    f.spectral()
        .iter()
        .zip(g.spectral())
        .enumerate()
        .map(|(idx, (a, b))| {
            let i = idx % len;
            FOUR_PI2 * (kx[i] * kx[i] + ky[i] * ky[i]) * (a.re * b.re + a.im * b.im)
        })
        .sum()
}

/// `(⟨f, g⟩_{L^2}, ⟨f, g⟩_{Ḣ^1})`.
pub fn inner_products(f: &Field, g: &Field) -> Result<(f64, f64)> {
    check_shape(f, g)?;
    Ok((l2_inner(f, g), h1_inner(f, g)))
}

/// Samples of `f`, `∂_1 f`, `∂_2 f` for each component on the `3N/2` grid.
pub(crate) struct Padded {
    pub val: Vec<Vec<f64>>,
    pub d1: Vec<Vec<f64>>,
    pub d2: Vec<Vec<f64>>,
}

impl Padded {
    pub(crate) fn new(f: &Field, with_values: bool) -> Padded {
        let torus = &f.torus;
        let (kx, ky) = torus.wave_vectors();
        let two_pi = 2.0 * std::f64::consts::PI;
        let mut pending: Vec<Vec<C64>> = Vec::new();
        for c in 0..f.comps {
            let s = f.component_spectral(c);
            if with_values {
                pending.push(s.to_vec());
            }
            pending.push(
                s.iter()
                    .zip(kx)
                    .map(|(v, k)| v * C64::new(0.0, two_pi * k))
                    .collect(),
            );
            pending.push(
                s.iter()
                    .zip(ky)
                    .map(|(v, k)| v * C64::new(0.0, two_pi * k))
                    .collect(),
            );
        }
        let mut real = Vec::with_capacity(pending.len());
        let mut it = pending.chunks(2);
        for pair in &mut it {
            if pair.len() == 2 {
                let (a, b) = torus.padded_inverse_pair(&pair[0], &pair[1]);
                real.push(a);
                real.push(b);
            } else {
                let zero = vec![C64::new(0.0, 0.0); pair[0].len()];
                let (a, _) = torus.padded_inverse_pair(&pair[0], &zero);
                real.push(a);
            }
        }
        let mut it = real.into_iter();
        let mut out = Padded {
            val: Vec::new(),
            d1: Vec::new(),
            d2: Vec::new(),
        };
        for _ in 0..f.comps {
            if with_values {
                out.val.push(it.next().unwrap());
            }
            out.d1.push(it.next().unwrap());
            out.d2.push(it.next().unwrap());
        }
        out
    }
}

/// Band projection of products sampled on the padded grid, one per component.
pub(crate) fn project_padded(torus: &LatticeTorus, parts: Vec<Vec<f64>>) -> Vec<C64> {
    let len = torus.len();
    let mut spec = Vec::with_capacity(parts.len() * len);
    let mut i = 0;
    while i < parts.len() {
        if i + 1 < parts.len() {
            let (a, b) = torus.padded_forward_pair(&parts[i], &parts[i + 1]);
            spec.extend(a);
            spec.extend(b);
            i += 2;
        } else {
            let zero = vec![0.0; parts[i].len()];
            let (a, _) = torus.padded_forward_pair(&parts[i], &zero);
            spec.extend(a);
            i += 1;
        }
    }
    spec
}

/// Jacobian bracket `{a, b} = ∂_1 a ∂_2 b - ∂_2 a ∂_1 b`, evaluated on the padded
/// grid and projected to the band.
pub fn jacobian_bracket(a: &Field, b: &Field) -> Result<Field> {
    require_scalar(a)?;
    require_scalar(b)?;
    check_shape(a, b)?;
    let pa = Padded::new(a, false);
    let pb = Padded::new(b, false);
    let prod: Vec<f64> = pa.d1[0]
        .iter()
        .zip(&pa.d2[0])
        .zip(pb.d1[0].iter().zip(&pb.d2[0]))
        .map(|((a1, a2), (b1, b2))| a1 * b2 - a2 * b1)
        .collect();
    let spec = project_padded(&a.torus, vec![prod]);
    Field::from_spectral(&a.torus, 1, spec)
}

/// Mean-zero density standing for the functional `v ↦ ∫ ρ · v`.
#[derive(Clone, Debug)]
pub struct DensityFunctional {
    density: Field,
}

impl DensityFunctional {
    pub fn new(density: Field) -> Result<DensityFunctional> {
        require_mean_zero(&density, "density", 1e-10)?;
        Ok(DensityFunctional {
            density: density.into_mean_zero(),
        })
    }

    pub fn density(&self) -> &Field {
        &self.density
    }

    /// `∫ ρ · v`.
    pub fn apply(&self, v: &Field) -> Result<f64> {
        check_shape(&self.density, v)?;
        Ok(l2_inner(&self.density, v))
    }

    pub fn l2_norm(&self) -> f64 {
        self.density.l2_norm()
    }

    /// Ḣ¹ representative `(-Δ)^{-1} ρ` (the Riesz vector of the functional).
    pub fn riesz(&self) -> Field {
        solve_poisson(&self.density).expect("density is mean-zero")
    }
}

/// Dual norm of `v ↦ ∫ ρ · v` on `(Ḣ^1, ⟨·,·⟩_{Ḣ^1})`.
pub fn h_minus1_norm(rho: &DensityFunctional) -> Result<f64> {
    let f = &rho.density;
    require_mean_zero(f, "h_minus1_norm input", 1e-10)?;
    let (kx, ky) = f.torus.wave_vectors();
    let len = f.torus.len();
    let s: f64 = f
        .spectral()
        .iter()
        .enumerate()
        .filter(|(idx, _)| idx % len != 0)
        .map(|(idx, v)| {
            let i = idx % len;
            v.norm_sqr() / (FOUR_PI2 * (kx[i] * kx[i] + ky[i] * ky[i]))
        })
        .sum();
    Ok(s.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::square_torus;
    use std::f64::consts::PI;

    fn sin_x1(t: &LatticeTorus) -> Field {
        Field::from_fn(t, 1, |x, out| out[0] = (2.0 * PI * x[0]).sin()).unwrap()
    }

    #[test]
    fn laplacian_of_eigenfunction() {
        let t = square_torus(32).unwrap();
        let f = sin_x1(&t);
        let lf = laplacian(&f);
        for (a, b) in lf.values().iter().zip(f.values()) {
            assert!((a + 4.0 * PI * PI * b).abs() < 1e-10);
        }
        let back = inv_laplacian(&lf).unwrap();
        for (a, b) in back.values().iter().zip(f.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn laplacian_of_constant_vanishes() {
        let t = square_torus(16).unwrap();
        let one = Field::from_fn(&t, 1, |_, o| o[0] = 1.0).unwrap();
        assert!(laplacian(&one).max_abs() < 1e-14);
        assert!(matches!(
            inv_laplacian(&one).unwrap_err(),
            Error::MeanZeroRequired { .. }
        ));
    }

    #[test]
    fn gradients_of_sine() {
        let t = square_torus(32).unwrap();
        let f = sin_x1(&t);
        let g = grad(&f).unwrap();
        let p = perp_grad(&f).unwrap();
        let len = t.len();
        for i in 0..len {
            let x = t.point(i / 32, i % 32);
            let c = 2.0 * PI * (2.0 * PI * x[0]).cos();
            assert!((g.values()[i] - c).abs() < 1e-10);
            assert!(g.values()[len + i].abs() < 1e-10);
            assert!(p.values()[i].abs() < 1e-10);
            assert!((p.values()[len + i] - c).abs() < 1e-10);
        }
    }

    #[test]
    fn inner_product_examples() {
        let t = square_torus(32).unwrap();
        let s = sin_x1(&t);
        let c = Field::from_fn(&t, 1, |x, o| o[0] = (2.0 * PI * x[0]).cos()).unwrap();
        let (l2, h1) = inner_products(&s, &s).unwrap();
        assert!((h1 - 2.0 * PI * PI).abs() < 1e-10);
        assert!((l2 - 0.5).abs() < 1e-14);
        assert!(inner_products(&s, &c).unwrap().0.abs() < 1e-14);
        let two = Field::from_fn(&t, 1, |x, o| {
            o[0] = (2.0 * PI * x[0]).sin() + (4.0 * PI * x[1]).sin()
        })
        .unwrap();
        let h1 = inner_products(&two, &two).unwrap().1;
        assert!((h1 - 10.0 * PI * PI).abs() < 1e-9);
        let v = Field::zeros(&t, 3);
        assert!(matches!(inner_products(&s, &v), Err(Error::ShapeError(_))));
    }

    #[test]
    fn bracket_of_coordinate_sines() {
        let t = square_torus(32).unwrap();
        let a = sin_x1(&t);
        let b = Field::from_fn(&t, 1, |x, o| o[0] = (2.0 * PI * x[1]).sin()).unwrap();
        let ab = jacobian_bracket(&a, &b).unwrap();
        let expect = Field::from_fn(&t, 1, |x, o| {
            o[0] = 4.0 * PI * PI * (2.0 * PI * x[0]).cos() * (2.0 * PI * x[1]).cos()
        })
        .unwrap();
        for (x, y) in ab.values().iter().zip(expect.values()) {
            assert!((x - y).abs() < 1e-9);
        }
        let aa = jacobian_bracket(&a, &a).unwrap();
        assert!(aa.max_abs() < 1e-12);
        let mixed = Field::from_fn(&t, 1, |x, o| {
            o[0] = (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos()
        })
        .unwrap();
        let mm = jacobian_bracket(&mixed, &mixed).unwrap();
        assert!(mm.means()[0].abs() < 1e-10);
    }

    #[test]
    fn h_minus1_of_single_mode() {
        let t = square_torus(32).unwrap();
        let rho = DensityFunctional::new(sin_x1(&t)).unwrap();
        let v = h_minus1_norm(&rho).unwrap();
        assert!((v - 1.0 / (2.0 * PI) / 2f64.sqrt()).abs() < 1e-14);
        let zero = DensityFunctional::new(Field::zeros(&t, 3)).unwrap();
        assert_eq!(h_minus1_norm(&zero).unwrap(), 0.0);
    }

    #[test]
    fn values_and_spectrum_agree() {
        let t = square_torus(16).unwrap();
        let f = Field::from_fn(&t, 3, |x, o| {
            o[0] = (2.0 * PI * x[0]).cos();
            o[1] = (2.0 * PI * (x[0] + 2.0 * x[1])).sin();
            o[2] = 0.3;
        })
        .unwrap();
        let again = Field::from_values(&t, 3, f.values().to_vec()).unwrap();
        for (a, b) in again.spectral().iter().zip(f.spectral()) {
            assert!((a - b).norm() < 1e-14);
        }
    }
}
