//! Flat unit-area tori and the discrete Fourier machinery shared by every field.
//!
//! A torus is `R^2 / (Z b1 + Z b2)` sampled at `(i/N) b1 + (j/N) b2`. Spectral
//! index `(p, q)` carries the wave vector `s(p) b1* + s(q) b2*` where `b*` is the
//! dual basis, so a sheared lattice is handled by the ordinary square DFT.
//! Coefficients are stored as Fourier coefficients of the underlying function
//! (forward transform scaled by `1/N^2`), which makes them independent of the
//! grid they were computed on and lets the `3N/2` padded grid reuse them as is.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub type C64 = Complex64;

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Plans {
    fn new(planner: &mut FftPlanner<f64>, len: usize) -> Self {
        Plans {
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }
}

struct Inner {
    basis: [[f64; 2]; 2],
    dual: [[f64; 2]; 2],
    reduced: [[f64; 2]; 2],
    n: usize,
    injectivity_radius: f64,
    iota: f64,
    plain: Plans,
    padded: Plans,
    kx: Vec<f64>,
    ky: Vec<f64>,
}

/// Flat torus of unit area with an `N x N` sampling grid.
///
/// Cloning is cheap: FFT plans and wave-vector tables are shared.
#[derive(Clone)]
pub struct LatticeTorus(Arc<Inner>);

impl std::fmt::Debug for LatticeTorus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LatticeTorus")
            .field("basis", &self.0.basis)
            .field("n", &self.0.n)
            .field("injectivity_radius", &self.0.injectivity_radius)
            .field("iota", &self.0.iota)
            .finish()
    }
}

impl PartialEq for LatticeTorus {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || (self.0.basis == other.0.basis && self.0.n == other.0.n)
    }
}

/// Builds the torus spanned by `basis` (two lattice vectors) sampled at `n x n` points.
pub fn make_grid(basis: [[f64; 2]; 2], n: usize) -> Result<LatticeTorus> {
    let det = basis[0][0] * basis[1][1] - basis[0][1] * basis[1][0];
    if !det.is_finite() || (det.abs() - 1.0).abs() > 1e-12 {
        return Err(Error::UnitAreaViolation { det: det.abs() });
    }
    if n % 2 != 0 || !(16..=4096).contains(&n) {
        return Err(Error::ResolutionError { n });
    }
    // dual vectors satisfy b_i . b*_j = delta_ij
    let dual = [
        [basis[1][1] / det, -basis[1][0] / det],
        [-basis[0][1] / det, basis[0][0] / det],
    ];
    let shortest = shortest_vector(&basis, &dual);
    let injectivity_radius = 0.5 * shortest;

    let mut planner = FftPlanner::new();
    let plain = Plans::new(&mut planner, n);
    let padded = Plans::new(&mut planner, 3 * n / 2);

    let mut kx = vec![0.0; n * n];
    let mut ky = vec![0.0; n * n];
    for p in 0..n {
        let sp = signed_freq(p, n) as f64;
        for q in 0..n {
            let sq = signed_freq(q, n) as f64;
            kx[p * n + q] = sp * dual[0][0] + sq * dual[1][0];
            ky[p * n + q] = sp * dual[0][1] + sq * dual[1][1];
        }
    }

    Ok(LatticeTorus(Arc::new(Inner {
        basis,
        dual,
        reduced: gauss_reduce(basis),
        n,
        injectivity_radius,
        iota: 0.5 * injectivity_radius,
        plain,
        padded,
        kx,
        ky,
    })))
}

/// The unit square torus `R^2 / Z^2`.
pub fn square_torus(n: usize) -> Result<LatticeTorus> {
    make_grid([[1.0, 0.0], [0.0, 1.0]], n)
}

fn shortest_vector(basis: &[[f64; 2]; 2], dual: &[[f64; 2]; 2]) -> f64 {
    // coefficients of any vector of length <= 2 are bounded by 2 |b*_i|
    let bound = |d: &[f64; 2]| (2.0 * d[0].hypot(d[1])).ceil() as i64 + 1;
    let (m1, m2) = (bound(&dual[0]), bound(&dual[1]));
    let mut best = f64::INFINITY;
    for i in -m1..=m1 {
        for j in -m2..=m2 {
            if i == 0 && j == 0 {
                continue;
            }
            let v = [
                i as f64 * basis[0][0] + j as f64 * basis[1][0],
                i as f64 * basis[0][1] + j as f64 * basis[1][1],
            ];
            let len = v[0].hypot(v[1]);
            if len <= 2.0 + 1e-12 {
                best = best.min(len);
            }
        }
    }
    best
}

fn gauss_reduce(basis: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let dot = |a: [f64; 2], b: [f64; 2]| a[0] * b[0] + a[1] * b[1];
    let (mut u, mut v) = (basis[0], basis[1]);
    if dot(u, u) > dot(v, v) {
        std::mem::swap(&mut u, &mut v);
    }
    loop {
        let mu = (dot(u, v) / dot(u, u)).round();
        v = [v[0] - mu * u[0], v[1] - mu * u[1]];
        if dot(v, v) >= dot(u, u) {
            return [u, v];
        }
        std::mem::swap(&mut u, &mut v);
    }
}

/// Signed frequency of DFT index `p` on a grid of `n` points.
#[inline]
pub fn signed_freq(p: usize, n: usize) -> i64 {
    if p <= n / 2 {
        p as i64
    } else {
        p as i64 - n as i64
    }
}

impl LatticeTorus {
    pub fn basis(&self) -> [[f64; 2]; 2] {
        self.0.basis
    }
    pub fn dual_basis(&self) -> [[f64; 2]; 2] {
        self.0.dual
    }
    pub fn n(&self) -> usize {
        self.0.n
    }
    /// Side of the zero-padded product grid.
    pub fn padded_n(&self) -> usize {
        3 * self.0.n / 2
    }
    pub fn injectivity_radius(&self) -> f64 {
        self.0.injectivity_radius
    }
    pub fn iota(&self) -> f64 {
        self.0.iota
    }
    pub fn shortest_vector(&self) -> f64 {
        2.0 * self.0.injectivity_radius
    }
    /// Number of samples per component.
    pub fn len(&self) -> usize {
        self.0.n * self.0.n
    }
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Cartesian position of grid node `(i, j)`.
    pub fn point(&self, i: usize, j: usize) -> [f64; 2] {
        let n = self.0.n as f64;
        let (s, t) = (i as f64 / n, j as f64 / n);
        let b = &self.0.basis;
        [s * b[0][0] + t * b[1][0], s * b[0][1] + t * b[1][1]]
    }

    /// Representative of `x` modulo the lattice with the smallest norm.
    pub fn min_image(&self, x: [f64; 2]) -> [f64; 2] {
        let d = &self.0.dual;
        let b = &self.0.basis;
        let c0 = x[0] * d[0][0] + x[1] * d[0][1];
        let c1 = x[0] * d[1][0] + x[1] * d[1][1];
        let (c0, c1) = (c0 - c0.round(), c1 - c1.round());
        let y = [c0 * b[0][0] + c1 * b[1][0], c0 * b[0][1] + c1 * b[1][1]];
        let r = &self.0.reduced;
        let mut best = y;
        let mut best_len = y[0] * y[0] + y[1] * y[1];
        for i in -1i32..=1 {
            for j in -1i32..=1 {
                let z = [
                    y[0] + i as f64 * r[0][0] + j as f64 * r[1][0],
                    y[1] + i as f64 * r[0][1] + j as f64 * r[1][1],
                ];
                let len = z[0] * z[0] + z[1] * z[1];
                if len < best_len - 1e-15 {
                    best = z;
                    best_len = len;
                }
            }
        }
        best
    }

    /// Lattice vectors with norm at most `radius`.
    pub fn lattice_points(&self, radius: f64) -> Vec<[f64; 2]> {
        let b = &self.0.basis;
        let d = &self.0.dual;
        let bound = |v: &[f64; 2]| (radius * v[0].hypot(v[1])).ceil() as i64 + 1;
        let (m1, m2) = (bound(&d[0]), bound(&d[1]));
        let mut out = Vec::new();
        for i in -m1..=m1 {
            for j in -m2..=m2 {
                let v = [
                    i as f64 * b[0][0] + j as f64 * b[1][0],
                    i as f64 * b[0][1] + j as f64 * b[1][1],
                ];
                if v[0].hypot(v[1]) <= radius {
                    out.push(v);
                }
            }
        }
        out
    }

    /// Nonzero dual-lattice vectors with norm at most `radius`.
    pub fn dual_points(&self, radius: f64) -> Vec<[f64; 2]> {
        let b = &self.0.basis;
        let d = &self.0.dual;
        let bound = |v: &[f64; 2]| (radius * v[0].hypot(v[1])).ceil() as i64 + 1;
        let (m1, m2) = (bound(&b[0]), bound(&b[1]));
        let mut out = Vec::new();
        for i in -m1..=m1 {
            for j in -m2..=m2 {
                if i == 0 && j == 0 {
                    continue;
                }
                let k = [
                    i as f64 * d[0][0] + j as f64 * d[1][0],
                    i as f64 * d[0][1] + j as f64 * d[1][1],
                ];
                if k[0].hypot(k[1]) <= radius {
                    out.push(k);
                }
            }
        }
        out
    }

    /// Radius of the largest disc of wave vectors resolved by the grid.
    pub fn resolved_wavenumber(&self) -> f64 {
        let b = &self.0.basis;
        let longest = b[0][0].hypot(b[0][1]).max(b[1][0].hypot(b[1][1]));
        (self.0.n as f64 / 2.0 - 1.0) / longest
    }

    /// Cartesian wave vector tables indexed like spectral arrays.
    pub fn wave_vectors(&self) -> (&[f64], &[f64]) {
        (&self.0.kx, &self.0.ky)
    }

    /// True unless `(p, q)` touches the Nyquist row or column.
    #[inline]
    pub fn in_band(&self, p: usize, q: usize) -> bool {
        let h = self.0.n / 2;
        p != h && q != h
    }

    fn fft2(&self, buf: &mut [C64], padded: bool, inverse: bool) {
        let plans = if padded {
            &self.0.padded
        } else {
            &self.0.plain
        };
        let fft = if inverse {
            &plans.inverse
        } else {
            &plans.forward
        };
        let m = if padded { self.padded_n() } else { self.0.n };
        debug_assert_eq!(buf.len(), m * m);
        let mut scratch = vec![C64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(buf, &mut scratch);
        transpose(buf, m);
        fft.process_with_scratch(buf, &mut scratch);
        transpose(buf, m);
    }

    /// Fourier coefficients of one real component.
    pub fn forward_real(&self, values: &[f64]) -> Vec<C64> {
        let mut buf: Vec<C64> = values.iter().map(|&v| C64::new(v, 0.0)).collect();
        self.fft2(&mut buf, false, false);
        let scale = 1.0 / self.len() as f64;
        for c in buf.iter_mut() {
            *c *= scale;
        }
        buf
    }

    /// Fourier coefficients of two real components from one complex transform.
    pub fn forward_pair(&self, a: &[f64], b: &[f64]) -> (Vec<C64>, Vec<C64>) {
        let n = self.0.n;
        let mut buf: Vec<C64> = a.iter().zip(b).map(|(&x, &y)| C64::new(x, y)).collect();
        self.fft2(&mut buf, false, false);
        split_pair(&buf, n, 1.0 / self.len() as f64)
    }

    /// Samples of a real function from its (Hermitian) coefficients.
    pub fn inverse_real(&self, spec: &[C64]) -> Vec<f64> {
        let mut buf = spec.to_vec();
        self.fft2(&mut buf, false, true);
        buf.into_iter().map(|c| c.re).collect()
    }

    /// Samples of two real functions from one complex inverse transform.
    pub fn inverse_pair(&self, a: &[C64], b: &[C64]) -> (Vec<f64>, Vec<f64>) {
        let mut buf: Vec<C64> = a.iter().zip(b).map(|(&x, &y)| x + C64::i() * y).collect();
        self.fft2(&mut buf, false, true);
        buf.into_iter().map(|c| (c.re, c.im)).unzip()
    }

    /// Samples on the `3N/2` grid of two band-limited functions given by coefficients.
    pub fn padded_inverse_pair(&self, a: &[C64], b: &[C64]) -> (Vec<f64>, Vec<f64>) {
        let mut buf = self.embed(a);
        let eb = self.embed(b);
        for (x, y) in buf.iter_mut().zip(eb) {
            *x += C64::i() * y;
        }
        self.fft2(&mut buf, true, true);
        buf.into_iter().map(|c| (c.re, c.im)).unzip()
    }

    /// Band coefficients (Nyquist and beyond dropped) of two real functions sampled on the padded grid.
    pub fn padded_forward_pair(&self, a: &[f64], b: &[f64]) -> (Vec<C64>, Vec<C64>) {
        let m = self.padded_n();
        let mut buf: Vec<C64> = a.iter().zip(b).map(|(&x, &y)| C64::new(x, y)).collect();
        self.fft2(&mut buf, true, false);
        let (fa, fb) = split_pair(&buf, m, 1.0 / (m * m) as f64);
        (self.truncate(&fa), self.truncate(&fb))
    }

    /// Copies band coefficients into a zero-padded `3N/2` spectrum.
    pub fn embed(&self, spec: &[C64]) -> Vec<C64> {
        let n = self.0.n;
        let m = self.padded_n();
        let mut out = vec![C64::new(0.0, 0.0); m * m];
        for p in 0..n {
            if p == n / 2 {
                continue;
            }
            let pp = wrap(signed_freq(p, n), m);
            for q in 0..n {
                if q == n / 2 {
                    continue;
                }
                let qq = wrap(signed_freq(q, n), m);
                out[pp * m + qq] = spec[p * n + q];
            }
        }
        out
    }

    /// Restricts a padded spectrum to the band of the base grid.
    pub fn truncate(&self, spec: &[C64]) -> Vec<C64> {
        let n = self.0.n;
        let m = self.padded_n();
        let mut out = vec![C64::new(0.0, 0.0); n * n];
        for p in 0..n {
            if p == n / 2 {
                continue;
            }
            let pp = wrap(signed_freq(p, n), m);
            for q in 0..n {
                if q == n / 2 {
                    continue;
                }
                let qq = wrap(signed_freq(q, n), m);
                out[p * n + q] = spec[pp * m + qq];
            }
        }
        out
    }

    /// Zeroes the Nyquist row and column in place.
    pub fn band_limit(&self, spec: &mut [C64]) {
        let n = self.0.n;
        let h = n / 2;
        for q in 0..n {
            spec[h * n + q] = C64::new(0.0, 0.0);
            spec[q * n + h] = C64::new(0.0, 0.0);
        }
    }
}

#[inline]
fn wrap(s: i64, m: usize) -> usize {
    if s < 0 {
        (s + m as i64) as usize
    } else {
        s as usize
    }
}

fn split_pair(z: &[C64], n: usize, scale: f64) -> (Vec<C64>, Vec<C64>) {
    let mut a = vec![C64::new(0.0, 0.0); n * n];
    let mut b = vec![C64::new(0.0, 0.0); n * n];
    for p in 0..n {
        let pm = (n - p) % n;
        for q in 0..n {
            let qm = (n - q) % n;
            let zk = z[p * n + q];
            let zc = z[pm * n + qm].conj();
            a[p * n + q] = (zk + zc) * (0.5 * scale);
            b[p * n + q] = (zk - zc) * C64::new(0.0, -0.5 * scale);
        }
    }
    (a, b)
}

fn transpose(buf: &mut [C64], m: usize) {
    const BLOCK: usize = 32;
    for ib in (0..m).step_by(BLOCK) {
        for jb in (ib..m).step_by(BLOCK) {
            for i in ib..(ib + BLOCK).min(m) {
                let start = if ib == jb { i + 1 } else { jb };
                for j in start..(jb + BLOCK).min(m) {
                    buf.swap(i * m + j, j * m + i);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_torus_radii() {
        let t = square_torus(64).unwrap();
        assert_eq!(t.injectivity_radius(), 0.5);
        assert_eq!(t.iota(), 0.25);
    }

    #[test]
    fn rejects_non_unimodular_basis() {
        let err = make_grid([[2.0, 0.0], [0.0, 1.0]], 64).unwrap_err();
        assert!(matches!(err, Error::UnitAreaViolation { .. }));
    }

    #[test]
    fn rejects_bad_resolution() {
        for n in [15, 17, 8, 5000] {
            assert!(matches!(
                square_torus(n).unwrap_err(),
                Error::ResolutionError { .. }
            ));
        }
    }

    #[test]
    fn sheared_torus_matches_brute_force() {
        let basis = [[1.0, 0.0], [0.5, 1.0]];
        let t = make_grid(basis, 128).unwrap();
        let mut best = f64::INFINITY;
        for i in -20i32..=20 {
            for j in -20i32..=20 {
                if (i, j) != (0, 0) {
                    let v = [i as f64 + 0.5 * j as f64, j as f64];
                    best = best.min(v[0].hypot(v[1]));
                }
            }
        }
        assert!((t.injectivity_radius() - 0.5 * best).abs() < 1e-15);
        assert_eq!(t.iota(), t.injectivity_radius() / 2.0);
    }

    #[test]
    fn min_image_is_shortest_representative() {
        let t = make_grid([[1.0, 0.0], [0.7, 1.0]], 32).unwrap();
        for &(x, y) in &[(0.9, 0.1), (0.3, -0.8), (2.2, 1.7), (-0.49, 0.51)] {
            let r = t.min_image([x, y]);
            let norm = r[0].hypot(r[1]);
            for v in t.lattice_points(4.0) {
                let w = [r[0] + v[0], r[1] + v[1]];
                assert!(w[0].hypot(w[1]) >= norm - 1e-12);
            }
        }
    }

    #[test]
    fn pair_transforms_round_trip() {
        let t = square_torus(16).unwrap();
        let a: Vec<f64> = (0..256).map(|i| ((i * 7 % 13) as f64).sin()).collect();
        let b: Vec<f64> = (0..256).map(|i| ((i * 3 % 11) as f64).cos()).collect();
        let (fa, fb) = t.forward_pair(&a, &b);
        let single = t.forward_real(&a);
        for (x, y) in fa.iter().zip(&single) {
            assert!((x - y).norm() < 1e-14);
        }
        let (ra, rb) = t.inverse_pair(&fa, &fb);
        for i in 0..256 {
            assert!((ra[i] - a[i]).abs() < 1e-12);
            assert!((rb[i] - b[i]).abs() < 1e-12);
        }
    }
}
