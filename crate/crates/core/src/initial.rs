//! Seeded, norm-targeted initial data.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::model::State;
use crate::spectral::{FieldC, FieldR, SineBasis};

/// Random state with coefficients `k^{-decay} * N(0, 1)`, rescaled so that
/// its phase-space norm equals `radius`.
///
/// Draws are taken mode by mode in the order `n, n_t, Re E, Im E`, so a
/// larger basis extends the same data rather than reshuffling it.
pub fn seeded_state(basis: &SineBasis, decay: f64, radius: f64, seed: u64) -> State {
    let modes = basis.modes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = State::zeros(modes);
    for k in 0..modes {
        let w = ((k + 1) as f64).powf(-decay);
        let draws: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
        state.n.0[k] = w * draws[0];
        state.m.0[k] = w * draws[1];
        state.e.0[k] = Complex64::new(w * draws[2], w * draws[3]);
    }
    let norm = state.norm_h(basis);
    if norm > 0.0 {
        state = state.scaled(radius / norm);
    }
    state
}

/// Real field with coefficients `k^{-decay} * N(0, 1)` (unscaled).
pub fn seeded_field_r(modes: usize, decay: f64, seed: u64) -> FieldR {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FieldR(
        (0..modes)
            .map(|k| {
                let x: f64 = StandardNormal.sample(&mut rng);
                ((k + 1) as f64).powf(-decay) * x
            })
            .collect(),
    )
}

/// Complex field with coefficients `k^{-decay} * (N(0,1) + i N(0,1))`.
pub fn seeded_field_c(modes: usize, decay: f64, seed: u64) -> FieldC {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FieldC(
        (0..modes)
            .map(|k| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re, im) * ((k + 1) as f64).powf(-decay)
            })
            .collect(),
    )
}
