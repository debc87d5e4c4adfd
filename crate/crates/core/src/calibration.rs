//! Tolerances shared by `verify`, the tests and the acceptance suite.
//!
//! Thresholds below were frozen after dt-refinement studies on the default
//! resolution (`N = 64`, `L = pi`, `h = 1`).

/// Relative error of `||E(t)||` against `||E_0|| e^{-gamma t}` when `g = 0`.
pub const MASS_LAW_REL: f64 = 1e-6;

/// `|V(t) - V(0)| / |V(0)|` on a conservative run at `dt = 1e-3`.
pub const CONSERVATION_DRIFT_REL: f64 = 1e-5;

/// Smallest accepted drift reduction when `dt` halves.
pub const CONSERVATION_HALVING_RATIO: f64 = 3.4;

/// Accepted window for observed second-order slopes.
pub const ORDER_MIN: f64 = 1.8;
pub const ORDER_MAX: f64 = 2.2;

/// Closed-form oracles of the linear subsystems.
pub const LINEAR_ORACLE_ABS: f64 = 1e-10;

/// Relative disagreement of Lipschitz ratios for `eps` and `eps / 2`.
pub const LIPSCHITZ_AGREEMENT: f64 = 0.05;

/// Smallest error ratio per doubling of `N` on smooth data.
pub const N_RATIO_MIN: f64 = 4.0;

/// Residual of the weak balance relation relative to the energy scale of the
/// run (largest magnitude of any term). Equals the conservation drift bound
/// in the conservative case.
pub const VERIFY_BALANCE_REL: f64 = 1e-5;

/// Same for the semi-strong balance relation.
pub const VERIFY_SEMI_BALANCE_REL: f64 = 1e-4;

/// Centered-difference mismatch of the mass identity relative to its scale.
/// The difference quotient over `cadence * dt` is second order, so this is
/// loose; a corrupted mass column misses it by orders of magnitude.
pub const VERIFY_MASS_IDENTITY_REL: f64 = 1e-3;

/// First logged record against a fresh evaluation of the initial state.
pub const VERIFY_INITIAL_REL: f64 = 1e-12;

/// Name and value of every tolerance, for reports.
pub const TABLE: &[(&str, f64)] = &[
    ("mass_law_rel", MASS_LAW_REL),
    ("conservation_drift_rel", CONSERVATION_DRIFT_REL),
    ("conservation_halving_ratio", CONSERVATION_HALVING_RATIO),
    ("order_min", ORDER_MIN),
    ("order_max", ORDER_MAX),
    ("linear_oracle_abs", LINEAR_ORACLE_ABS),
    ("lipschitz_agreement", LIPSCHITZ_AGREEMENT),
    ("n_ratio_min", N_RATIO_MIN),
    ("radius_spread", crate::experiments::RADIUS_SPREAD_LIMIT),
    ("verify_balance_rel", VERIFY_BALANCE_REL),
    ("verify_semi_balance_rel", VERIFY_SEMI_BALANCE_REL),
    ("verify_mass_identity_rel", VERIFY_MASS_IDENTITY_REL),
    ("verify_initial_rel", VERIFY_INITIAL_REL),
];
