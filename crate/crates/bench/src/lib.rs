//! Fixtures shared by the criterion benches.

use std::f64::consts::PI;

use qzak_core::initial::{seeded_field_c, seeded_field_r, seeded_state};
use qzak_core::{ModelParams, SineBasis, State};

/// Damped, forced problem with smooth seeded data at `modes` modes.
pub fn fixture(modes: usize) -> (SineBasis, ModelParams, State) {
    let basis = SineBasis::with_default_grid(PI, modes).expect("valid basis");
    let params = ModelParams::new(
        1.0,
        0.5,
        0.5,
        seeded_field_r(modes, 6.0, 12),
        seeded_field_c(modes, 6.0, 22),
    )
    .expect("valid params");
    let state = seeded_state(&basis, 6.0, 1.0, 1);
    (basis, params, state)
}
