//! Linear trend plus a 30-step sine plus unit Gaussian noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::types::TimeSeries;

pub const SYNTHETIC_PERIOD: usize = 30;

/// Noise-free part at 1-based time `t`.
pub fn synthetic_signal(t: f64) -> f64 {
    0.1 * t + 100.0 * (2.0 * std::f64::consts::PI * t / SYNTHETIC_PERIOD as f64).sin()
}

/// `y_t = 0.1 t + 100 sin(2πt/30) + ε_t` for `t = 1..=len`.
pub fn generate_synthetic(len: usize, seed: u64) -> Result<TimeSeries> {
    if len < 2 * SYNTHETIC_PERIOD {
        return Err(Error::SeriesTooShort {
            needed: 2 * SYNTHETIC_PERIOD,
            got: len,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (1..=len)
        .map(|t| {
            let eps: f64 = StandardNormal.sample(&mut rng);
            synthetic_signal(t as f64) + eps
        })
        .collect();
    TimeSeries::new(values, SYNTHETIC_PERIOD, None)
}
