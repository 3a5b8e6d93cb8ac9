//! Seeded random test inputs. Every experiment draws from a ChaCha stream so
//! that a `(config, seed)` pair reproduces its report exactly.

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::grid::{GridSpec, OpFn};

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn complex_normal(rng: &mut Rng) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im)
}

/// Independent complex normal samples for every slot of the grid.
pub fn random_samples(grid: &GridSpec, rng: &mut Rng) -> Vec<C64> {
    (0..grid.len()).map(|_| complex_normal(rng)).collect()
}

/// Complex normal coefficients on `|m| ≤ radius`, zero elsewhere, each
/// weighted by `(1+|m|²)^{weight/2}`.
pub fn random_band_limited(grid: &GridSpec, radius: f64, weight: f64, rng: &mut Rng) -> OpFn {
    let s = grid.slots();
    let r = grid.freq_radius();
    let mut c = vec![C64::new(0.0, 0.0); grid.len()];
    for (idx, chunk) in c.chunks_mut(s).enumerate() {
        if r[idx] <= radius {
            let w = (1.0 + r[idx] * r[idx]).powf(weight / 2.0);
            for v in chunk.iter_mut() {
                *v = complex_normal(rng) * w;
            }
        }
    }
    OpFn::from_coeffs(*grid, c).expect("length fixed by grid")
}

pub fn uniform(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    use rand::Rng as _;
    rng.random_range(lo..hi)
}
