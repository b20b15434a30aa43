//! Shared fixtures for the criterion benches.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wast_core::data::{standardize, synth_informative};
use wast_core::{Dataset, SynthParams};

/// Standardized synthetic data with the given shape.
pub fn synthetic(samples: usize, features: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = SynthParams {
        samples,
        features,
        informative: (features / 25).max(1),
        ..SynthParams::madelon_like()
    };
    let mut data = synth_informative(params, &mut rng).expect("valid synthetic parameters");
    standardize(&mut data, &mut []).expect("non-empty data");
    data
}
