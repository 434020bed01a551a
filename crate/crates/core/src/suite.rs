//! Seeded random structured states.
//!
//! Each draw has one or two blocks; each block factor is either trivial or a
//! `qubit_bloch` map, so blocks are at most 2x2. Parameter ranges:
//! means in `[-1.5, 1.5]`, variances in `[0.5, 2]`, `alpha, beta` in
//! `[0.5, 2]`, `gamma` in `[-pi, pi]`, mixedness in `[0, 0.5]`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cq::{CiBlock, StructuredCiState};
use crate::family::StateFamilySpec;
use crate::grid::DensitySpec;

fn density(rng: &mut ChaCha8Rng) -> DensitySpec {
    DensitySpec::Gaussian {
        mean: rng.random_range(-1.5..=1.5),
        variance: rng.random_range(0.5..=2.0),
    }
}

fn family(rng: &mut ChaCha8Rng) -> StateFamilySpec {
    if rng.random_bool(0.25) {
        return StateFamilySpec::trivial();
    }
    StateFamilySpec::QubitBloch {
        alpha: rng.random_range(0.5..=2.0),
        beta: rng.random_range(0.5..=2.0),
        gamma: rng.random_range(-PI..=PI),
        mixedness: rng.random_range(0.0..=0.5),
    }
}

/// One random structured state.
pub fn random_structured(rng: &mut ChaCha8Rng) -> StructuredCiState {
    let blocks = if rng.random_bool(0.5) { 1 } else { 2 };
    let weights = if blocks == 1 {
        vec![1.0]
    } else {
        let w: f64 = rng.random_range(0.2..=0.8);
        vec![w, 1.0 - w]
    };
    let blocks = weights
        .into_iter()
        .map(|weight| CiBlock {
            weight,
            density_x: density(rng),
            density_y: density(rng),
            family_x: family(rng),
            family_y: family(rng),
        })
        .collect();
    StructuredCiState { blocks }
}

/// `draws` states from one seeded stream.
pub fn random_suite(seed: u64, draws: usize) -> Vec<StructuredCiState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..draws).map(|_| random_structured(&mut rng)).collect()
}
