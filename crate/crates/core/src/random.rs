//! Seeded random band-limited fields.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::field::Field;
use crate::lattice::{LatticeTorus, C64};

pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mean-zero field with modes `0 < |k| ≤ kmax` of amplitude `|k|^{-decay}`
/// times a standard normal draw.
pub fn random_field(
    torus: &LatticeTorus,
    comps: usize,
    kmax: f64,
    decay: f64,
    rng: &mut impl Rng,
) -> Field {
    let len = torus.len();
    let noise: Vec<f64> = (0..comps * len).map(|_| normal(rng)).collect();
    let (kx, ky) = torus.wave_vectors();
    let scale = len as f64;
    Field::from_values(torus, comps, noise)
        .expect("shape is consistent")
        .map_spectral(|_, i, v| {
            let k = (kx[i] * kx[i] + ky[i] * ky[i]).sqrt();
            if k == 0.0 || k > kmax {
                C64::new(0.0, 0.0)
            } else {
                // white noise has coefficient variance 1/N²
                v * (scale.sqrt() * k.powf(-decay))
            }
        })
        .into_mean_zero()
}

/// Standard normal by Box–Muller.
pub fn normal(rng: &mut impl Rng) -> f64 {
    let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let v: f64 = rng.gen();
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::square_torus;

    #[test]
    fn same_seed_same_field() {
        let t = square_torus(32).unwrap();
        let a = random_field(&t, 3, 6.0, 2.0, &mut seeded_rng(5));
        let b = random_field(&t, 3, 6.0, 2.0, &mut seeded_rng(5));
        assert_eq!(a.values(), b.values());
        let c = random_field(&t, 3, 6.0, 2.0, &mut seeded_rng(6));
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn modes_outside_the_window_vanish() {
        let t = square_torus(32).unwrap();
        let f = random_field(&t, 1, 3.0, 1.0, &mut seeded_rng(1));
        let (kx, ky) = t.wave_vectors();
        for (i, c) in f.spectral().iter().enumerate() {
            let k = (kx[i] * kx[i] + ky[i] * ky[i]).sqrt();
            if k > 3.0 || k == 0.0 {
                assert_eq!(c.norm(), 0.0);
            }
        }
        assert!(f.l2_norm() > 0.0);
    }
}
