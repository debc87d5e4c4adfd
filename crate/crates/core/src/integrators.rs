//! Time stepping.
//!
//! [`SplitStepper`] advances the Galerkin system with Strang splitting: the
//! stiff linear part (wave operator with biharmonic term and damping, and
//! the damped Schroedinger phase) is propagated exactly mode by mode, the
//! nonlinear couplings and loads with an explicit midpoint step whose
//! weights integrate the linear phases exactly.
//! [`step_reference_rk4`] is a plain four-stage scheme on the full
//! right-hand side, usable only at small `N` because of its stability limit.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{rhs, Derivative, ModelParams, State};
use crate::spectral::{FieldC, FieldR, SineBasis};
use crate::trajectory::{Accumulators, PointEval, TrajectoryLog};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Largest `dt * max_k omega_k^2` accepted by the reference integrator.
pub const RK4_STABILITY_LIMIT: f64 = 2.5;

/// Exact per-mode propagator of the linear part over a step `dt`.
#[derive(Clone, Debug)]
pub struct LinearPropagator {
    pub dt: f64,
    /// `exp(dt [[0, 1], [-omega^2, -alpha]])` acting on `(n_k, m_k)`.
    pub n_blocks: Vec<[[f64; 2]; 2]>,
    /// `exp((-i omega^2 - gamma) dt)`.
    pub e_factors: Vec<Complex64>,
}

// cos(sqrt z) and sin(sqrt z)/sqrt z as entire functions of z
fn cos_sinc_series(z: f64) -> (f64, f64) {
    let (mut c, mut s) = (0.0, 0.0);
    // term = (-z)^k / (2k)!
    let mut term = 1.0;
    for k in 0..24 {
        c += term;
        let odd = term / (2 * k + 1) as f64;
        s += odd;
        term = -odd * z / (2 * k + 2) as f64;
    }
    (c, s)
}

/// `exp(t [[0, 1], [-omega2, -alpha]])`.
///
/// The under- and overdamped closed forms are joined through the series of
/// `cos(sqrt z)` and `sin(sqrt z)/sqrt z` in `z = (omega2 - alpha^2/4) t^2`,
/// which covers the critically damped regime without cancellation.
pub fn damped_oscillator_matrix(omega2: f64, alpha: f64, t: f64) -> [[f64; 2]; 2] {
    let sigma = 0.5 * alpha;
    let d = omega2 - sigma * sigma;
    let z = d * t * t;
    if z < -1.0 {
        // overdamped: real exponents -sigma +- beta
        let beta = (-d).sqrt();
        let slow = ((beta - sigma) * t).exp();
        let fast = (-(beta + sigma) * t).exp();
        let ch = 0.5 * (slow + fast);
        let sh_over_beta = 0.5 * (slow - fast) / beta;
        return [
            [ch + sigma * sh_over_beta, sh_over_beta],
            [-omega2 * sh_over_beta, ch - sigma * sh_over_beta],
        ];
    }
    let (c, ts) = if z > 1.0 {
        let beta = d.sqrt();
        ((beta * t).cos(), (beta * t).sin() / beta)
    } else {
        let (c, s) = cos_sinc_series(z);
        (c, s * t)
    };
    let decay = (-sigma * t).exp();
    [
        [decay * (c + sigma * ts), decay * ts],
        [-decay * omega2 * ts, decay * (c - sigma * ts)],
    ]
}

/// `int_0^t exp(s [[0, 1], [-omega2, -alpha]]) ds (0, 1)^T`, the response of
/// `(n_k, m_k)` to a unit load held constant over the step.
pub fn oscillator_kick(omega2: f64, alpha: f64, t: f64) -> [f64; 2] {
    let b = damped_oscillator_matrix(omega2, alpha, t);
    if omega2 * t * t > 1.0 || alpha * t > 1.0 {
        return [(1.0 - b[1][1] - alpha * b[0][1]) / omega2, b[0][1]];
    }
    // Taylor coefficients of phi'' + alpha phi' + omega2 phi = 0, phi(0) = 0, phi'(0) = 1
    let (mut a0, mut a1) = (0.0, 1.0);
    let mut integral = 0.0;
    let mut power = t;
    for j in 0..60 {
        integral += a0 * power / (j + 1) as f64;
        let a2 = -(alpha * (j + 1) as f64 * a1 + omega2 * a0) / ((j + 2) * (j + 1)) as f64;
        a0 = a1;
        a1 = a2;
        power *= t;
    }
    [integral, b[0][1]]
}

/// `int_0^t exp((-i omega2 - gamma) s) ds`.
pub fn schroedinger_kick(omega2: f64, gamma: f64, t: f64) -> Complex64 {
    let z = Complex64::new(-gamma, -omega2) * t;
    if z.norm() > 0.5 {
        return (z.exp() - 1.0) / z * t;
    }
    let mut sum = Complex64::new(0.0, 0.0);
    let mut term = Complex64::new(t, 0.0);
    for j in 1..20 {
        sum += term;
        term *= z / (j + 1) as f64;
    }
    sum
}

/// Builds the exact linear propagator for step `dt`.
pub fn build_propagator(params: &ModelParams, basis: &SineBasis, dt: f64) -> LinearPropagator {
    let omega2 = params.stiffness(basis);
    let damp = (-params.gamma * dt).exp();
    LinearPropagator {
        dt,
        n_blocks: omega2
            .iter()
            .map(|&w2| damped_oscillator_matrix(w2, params.alpha, dt))
            .collect(),
        e_factors: omega2
            .iter()
            .map(|&w2| {
                let phase = w2 * dt;
                Complex64::new(phase.cos(), -phase.sin()) * damp
            })
            .collect(),
    }
}

impl LinearPropagator {
    pub fn apply(&self, state: &mut State) {
        for (k, b) in self.n_blocks.iter().enumerate() {
            let (n, m) = (state.n.0[k], state.m.0[k]);
            state.n.0[k] = b[0][0] * n + b[0][1] * m;
            state.m.0[k] = b[1][0] * n + b[1][1] * m;
        }
        for (e, f) in state.e.0.iter_mut().zip(&self.e_factors) {
            *e *= f;
        }
    }
}

/// Strang splitting stepper for a fixed `dt`.
#[derive(Clone, Debug)]
pub struct SplitStepper<'a> {
    params: &'a ModelParams,
    basis: &'a SineBasis,
    dt: f64,
    half: LinearPropagator,
    kick_n: Vec<[f64; 2]>,
    kick_e: Vec<Complex64>,
    /// `sinc((omega_k^2 - omega_l^2) dt / 2)`, row-major.
    filter: Vec<f64>,
    /// `dt` times `filter`.
    weights: Vec<f64>,
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

impl<'a> SplitStepper<'a> {
    pub fn new(params: &'a ModelParams, basis: &'a SineBasis, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::config("dt", format!("step must be positive, got {dt}")));
        }
        params.check(basis)?;
        let omega2 = params.stiffness(basis);
        let filter: Vec<f64> = omega2
            .iter()
            .flat_map(|wk| omega2.iter().map(move |wl| sinc(0.5 * (wk - wl) * dt)))
            .collect();
        let weights = filter.iter().map(|s| s * dt).collect();
        Ok(SplitStepper {
            params,
            basis,
            dt,
            half: build_propagator(params, basis, 0.5 * dt),
            kick_n: omega2.iter().map(|&w2| oscillator_kick(w2, params.alpha, dt)).collect(),
            kick_e: omega2.iter().map(|&w2| schroedinger_kick(w2, params.gamma, dt)).collect(),
            filter,
            weights,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// One step: half linear, coupling and loads, half linear.
    ///
    /// In the frame of the half-step linear flow, `E` is advanced by the
    /// explicit midpoint rule on `E' = -i H E` with `n` frozen, where
    /// `H_kl = A_kl(n) dt sinc((omega_k^2 - omega_l^2) dt / 2)` integrates the
    /// relative phase of each mode pair exactly. `H` is real symmetric, so the
    /// coupling conserves mass to fourth order in `dt`, and pairs whose phase
    /// difference per step is a nonzero multiple of `2 pi` are not pumped.
    /// The density force on `n_t` uses the same pair filter (it is the
    /// gradient of the filtered interaction energy). Loads and the density
    /// force are applied with the exact Duhamel weight for a forcing held
    /// constant over the step.
    pub fn step(&self, state: &State) -> Result<State> {
        let n_modes = self.basis.modes();
        let mut y = state.clone();
        self.half.apply(&mut y);

        let a = self.basis.multiplication_matrix(&y.n.0);
        let h: Vec<f64> = a.iter().zip(&self.weights).map(|(a, w)| a * w).collect();
        let coupling = |e: &[Complex64]| -> Vec<Complex64> {
            h.chunks_exact(n_modes)
                .map(|row| -I * row.iter().zip(e).map(|(w, z)| z * *w).sum::<Complex64>())
                .collect()
        };
        let d0 = coupling(&y.e.0);
        let stage: Vec<Complex64> = y
            .e
            .0
            .iter()
            .zip(&d0)
            .zip(&self.params.g.0)
            .map(|((e, d), g)| e + d * 0.5 - I * g * (0.5 * self.dt))
            .collect();
        let q = self.basis.weighted_density(&stage, &self.filter);
        let d1 = coupling(&stage);
        for (e, d) in y.e.0.iter_mut().zip(&d1) {
            *e += d;
        }

        self.half.apply(&mut y);
        for (k, kick) in self.kick_n.iter().enumerate() {
            let force = self.params.f.0[k] - self.basis.lambda()[k] * q.0[k];
            y.n.0[k] += kick[0] * force;
            y.m.0[k] += kick[1] * force;
        }
        for ((e, kick), g) in y.e.0.iter_mut().zip(&self.kick_e).zip(&self.params.g.0) {
            *e += kick * (-I * g);
        }
        y.t = state.t + self.dt;
        if !y.is_finite() {
            return Err(Error::Divergence {
                t: state.t,
                last_good: Box::new(Some(state.clone())),
            });
        }
        Ok(y)
    }
}

/// Single split step (builds the propagator on every call).
pub fn step_split(state: &State, params: &ModelParams, basis: &SineBasis, dt: f64) -> Result<State> {
    state.check(basis)?;
    SplitStepper::new(params, basis, dt)?.step(state)
}

fn add_scaled(state: &State, h: f64, d: &Derivative) -> State {
    State {
        t: state.t + h,
        n: FieldR(state.n.0.iter().zip(&d.dn.0).map(|(a, b)| a + h * b).collect()),
        m: FieldR(state.m.0.iter().zip(&d.dm.0).map(|(a, b)| a + h * b).collect()),
        e: FieldC(state.e.0.iter().zip(&d.de.0).map(|(a, b)| a + b * h).collect()),
    }
}

/// Checks the explicit stability limit of the reference integrator.
pub fn check_rk4_step(params: &ModelParams, basis: &SineBasis, dt: f64) -> Result<()> {
    let stiff = params.stiffness(basis).into_iter().fold(0.0, f64::max);
    if dt.abs() * stiff > RK4_STABILITY_LIMIT {
        return Err(Error::config(
            "dt",
            format!(
                "reference integrator unstable: dt * max omega^2 = {:.3e} exceeds {RK4_STABILITY_LIMIT}",
                dt.abs() * stiff
            ),
        ));
    }
    Ok(())
}

/// Classical four-stage step on the full right-hand side. Negative `dt` is
/// allowed (backward flow), subject to the same stability bound.
pub fn step_reference_rk4(state: &State, params: &ModelParams, basis: &SineBasis, dt: f64) -> Result<State> {
    check_rk4_step(params, basis, dt)?;
    let k1 = rhs(state, params, basis)?;
    let k2 = rhs(&add_scaled(state, 0.5 * dt, &k1), params, basis)?;
    let k3 = rhs(&add_scaled(state, 0.5 * dt, &k2), params, basis)?;
    let k4 = rhs(&add_scaled(state, dt, &k3), params, basis)?;
    let h6 = dt / 6.0;
    let comb_r = |a: &FieldR, b: &FieldR, c: &FieldR, d: &FieldR, y: &FieldR| {
        FieldR(
            (0..y.0.len())
                .map(|k| y.0[k] + h6 * (a.0[k] + 2.0 * b.0[k] + 2.0 * c.0[k] + d.0[k]))
                .collect(),
        )
    };
    let out = State {
        t: state.t + dt,
        n: comb_r(&k1.dn, &k2.dn, &k3.dn, &k4.dn, &state.n),
        m: comb_r(&k1.dm, &k2.dm, &k3.dm, &k4.dm, &state.m),
        e: FieldC(
            (0..state.e.0.len())
                .map(|k| {
                    state.e.0[k] + (k1.de.0[k] + k2.de.0[k] * 2.0 + k3.de.0[k] * 2.0 + k4.de.0[k]) * h6
                })
                .collect(),
        ),
    };
    if !out.is_finite() {
        return Err(Error::Divergence {
            t: state.t,
            last_good: Box::new(Some(state.clone())),
        });
    }
    Ok(out)
}

/// Which one-step method drives [`integrate`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Scheme {
    #[default]
    Split,
    ReferenceRk4,
}

#[derive(Clone, Copy, Debug)]
pub struct IntegrateOptions {
    /// Emit a record every `cadence` steps.
    pub cadence: usize,
    /// Track `E_t` and the semi-strong balance.
    pub semi_strong: bool,
    /// Keep the full state in each record.
    pub keep_states: bool,
    pub scheme: Scheme,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions {
            cadence: 10,
            semi_strong: false,
            keep_states: false,
            scheme: Scheme::Split,
        }
    }
}

/// Number of steps for horizon `t_end`; `t_end` must be a whole multiple of
/// `dt` and the step count a multiple of `cadence`.
pub fn step_count(dt: f64, t_end: f64, cadence: usize) -> Result<usize> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::config("dt", format!("must be positive, got {dt}")));
    }
    if !(t_end.is_finite() && t_end >= dt) {
        return Err(Error::config("T", format!("horizon must be at least dt, got {t_end}")));
    }
    if cadence == 0 {
        return Err(Error::config("cadence", "must be at least 1"));
    }
    let steps = (t_end / dt).round();
    if (steps * dt - t_end).abs() > 1e-9 * t_end {
        return Err(Error::config("T", format!("horizon {t_end} is not a multiple of dt = {dt}")));
    }
    let steps = steps as usize;
    if !steps.is_multiple_of(cadence) {
        return Err(Error::config(
            "cadence",
            format!("cadence {cadence} does not divide the step count {steps}"),
        ));
    }
    Ok(steps)
}

/// Integrates from `initial` to `t_end`, updating the balance accumulators
/// with the trapezoid rule after every step and logging every `cadence` steps.
pub fn integrate(
    initial: &State,
    params: &ModelParams,
    basis: &SineBasis,
    dt: f64,
    t_end: f64,
    opts: IntegrateOptions,
) -> Result<TrajectoryLog> {
    initial.check(basis)?;
    params.check(basis)?;
    let steps = step_count(dt, t_end, opts.cadence)?;
    let stepper = SplitStepper::new(params, basis, dt)?;
    if opts.scheme == Scheme::ReferenceRk4 {
        check_rk4_step(params, basis, dt)?;
    }

    let mut state = initial.clone();
    let t0 = initial.t;
    let mut point = PointEval::evaluate(&state, params, basis, opts.semi_strong)?;
    let mut acc = Accumulators::default();
    let mut log = TrajectoryLog::new(dt, opts.semi_strong);
    log.push(point.record(&state, acc, opts.keep_states));

    for step in 1..=steps {
        let next = match opts.scheme {
            Scheme::Split => stepper.step(&state),
            Scheme::ReferenceRk4 => step_reference_rk4(&state, params, basis, dt),
        };
        let mut next = next.map_err(|_| Error::Divergence {
            t: state.t,
            last_good: Box::new(Some(state.clone())),
        })?;
        next.t = t0 + step as f64 * dt;
        let next_point = PointEval::evaluate(&next, params, basis, opts.semi_strong).map_err(|_| {
            Error::Divergence {
                t: state.t,
                last_good: Box::new(Some(state.clone())),
            }
        })?;
        acc.trapezoid(dt, &point, &next_point);
        state = next;
        point = next_point;
        if step % opts.cadence == 0 {
            log.push(point.record(&state, acc, opts.keep_states));
        }
    }
    Ok(log)
}

/// Advances `steps` split steps without diagnostics.
pub fn evolve(state: &State, stepper: &SplitStepper<'_>, steps: usize) -> Result<State> {
    let mut s = state.clone();
    for _ in 0..steps {
        s = stepper.step(&s)?;
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initial::seeded_state;
    use crate::model::{energy_report, inner_c, nonlinear_terms};
    use std::f64::consts::PI;

    // scaling-and-squaring Taylor exponential of a 2x2 matrix
    fn expm2(a: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
        let norm = a.iter().flatten().map(|x| x.abs()).fold(0.0, f64::max);
        let squarings = (norm.max(1e-300).log2().ceil().max(0.0) as i32) + 4;
        let scale = 2f64.powi(-squarings);
        let b = [[a[0][0] * scale, a[0][1] * scale], [a[1][0] * scale, a[1][1] * scale]];
        let mul = |x: [[f64; 2]; 2], y: [[f64; 2]; 2]| {
            [
                [x[0][0] * y[0][0] + x[0][1] * y[1][0], x[0][0] * y[0][1] + x[0][1] * y[1][1]],
                [x[1][0] * y[0][0] + x[1][1] * y[1][0], x[1][0] * y[0][1] + x[1][1] * y[1][1]],
            ]
        };
        let mut result = [[1.0, 0.0], [0.0, 1.0]];
        let mut term = [[1.0, 0.0], [0.0, 1.0]];
        for k in 1..30 {
            term = mul(term, b);
            let inv = 1.0 / k as f64;
            term = [[term[0][0] * inv, term[0][1] * inv], [term[1][0] * inv, term[1][1] * inv]];
            for i in 0..2 {
                for j in 0..2 {
                    result[i][j] += term[i][j];
                }
            }
        }
        for _ in 0..squarings {
            result = mul(result, result);
        }
        result
    }

    #[test]
    fn undamped_quarter_period_is_rotation() {
        let m = damped_oscillator_matrix(1.0, 0.0, PI / 2.0);
        let want = [[0.0, 1.0], [-1.0, 0.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((m[i][j] - want[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn matches_dense_exponential_across_regimes() {
        for &(omega2, alpha, t) in &[
            (2.0, 0.5, 1.0),
            (0.01, 3.0, 2.0),
            (1.0, 2.0, 1.0),
            (1.0 + 1e-9, 2.0, 1.0),
            (1.0 - 1e-9, 2.0, 1.0),
            (1.0 + 1e-4, 2.0, 1.3),
            (1.0 - 1e-4, 2.0, 0.7),
            (1.0 + 0.3, 2.0, 1.0),
            (1.0 - 0.3, 2.0, 1.0),
            (4.0, 0.0, 0.37),
            (50.0, 1.0, 0.2),
        ] {
            let got = damped_oscillator_matrix(omega2, alpha, t);
            let want = expm2([[0.0, t], [-omega2 * t, -alpha * t]]);
            for i in 0..2 {
                for j in 0..2 {
                    assert!(
                        (got[i][j] - want[i][j]).abs() < 1e-12,
                        "omega2={omega2} alpha={alpha}: {got:?} vs {want:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn e_factor_modulus_and_n_block_contraction() {
        let b = SineBasis::new(PI, 8, 32).unwrap();
        let p = ModelParams::unforced(1.0, 0.7, 0.5, 8).unwrap();
        let prop = build_propagator(&p, &b, 1.0);
        for f in &prop.e_factors {
            assert!((f.norm() - (-0.5f64).exp()).abs() < 1e-15);
        }
        // per-mode energy 1/2 (m^2 + omega^2 n^2) never grows
        let omega2 = p.stiffness(&b);
        let undamped = build_propagator(&ModelParams::unforced(1.0, 0.0, 0.0, 8).unwrap(), &b, 0.3);
        for (k, (blk, und)) in prop.n_blocks.iter().zip(&undamped.n_blocks).enumerate() {
            for (n, m) in [(1.0, 0.0), (0.0, 1.0), (0.6, -0.8)] {
                let e0 = m * m + omega2[k] * n * n;
                let en = |b: &[[f64; 2]; 2]| {
                    let (n1, m1) = (b[0][0] * n + b[0][1] * m, b[1][0] * n + b[1][1] * m);
                    m1 * m1 + omega2[k] * n1 * n1
                };
                assert!(en(blk) <= e0 * (1.0 + 1e-12));
                assert!((en(und) - e0).abs() <= 1e-10 * e0);
            }
        }
    }

    fn simpson<F: Fn(f64) -> f64>(f: F, t: f64, panels: usize) -> f64 {
        let h = t / panels as f64;
        let mut sum = f(0.0) + f(t);
        for j in 1..panels {
            sum += f(j as f64 * h) * if j % 2 == 1 { 4.0 } else { 2.0 };
        }
        sum * h / 3.0
    }

    #[test]
    fn kicks_match_quadrature_across_regimes() {
        for &(w2, alpha, t) in &[
            (2.0, 0.0, 1e-3),
            (2.0, 0.5, 0.3),
            (4096.0, 0.5, 1e-3),
            (1.7e7, 0.5, 1e-3),
            (1.0, 2.0, 1.0),
            (1.0, 4000.0, 1e-2),
            (0.5, 1.0, 2.0),
        ] {
            let kick = oscillator_kick(w2, alpha, t);
            let panels = 20_000;
            let kn = simpson(|s| damped_oscillator_matrix(w2, alpha, s)[0][1], t, panels);
            let km = simpson(|s| damped_oscillator_matrix(w2, alpha, s)[1][1], t, panels);
            let scale = kn.abs().max(1e-300);
            assert!((kick[0] - kn).abs() < 1e-8 * scale, "{w2} {alpha} {t}: {} vs {kn}", kick[0]);
            assert!((kick[1] - km).abs() < 1e-8 * km.abs().max(t * 1e-3), "{w2} {alpha} {t}");
        }
        for &(w2, gamma, t) in &[(2.0, 0.0, 1e-3), (2.0, 0.5, 0.1), (4160.0, 0.5, 1e-3), (3.0, 0.0, 2.0)] {
            let kick = schroedinger_kick(w2, gamma, t);
            let re = simpson(|s| (-gamma * s).exp() * (w2 * s).cos(), t, 20_000);
            let im = simpson(|s| -(-gamma * s).exp() * (w2 * s).sin(), t, 20_000);
            assert!((kick - Complex64::new(re, im)).norm() < 1e-9 * t, "{w2} {gamma} {t}");
        }
    }

    #[test]
    fn constant_loads_are_integrated_exactly() {
        // with E = 0 the coupling vanishes and n_k, m_k see a constant load
        let b = SineBasis::new(PI, 4, 16).unwrap();
        let mut p = ModelParams::unforced(1.0, 0.3, 0.2, 4).unwrap();
        p.f.0[0] = 0.7;
        let mut s = State::zeros(4);
        s.n.0[0] = 0.1;
        let dt = 0.1;
        let w2 = p.stiffness(&b)[0];
        let stepped = evolve(&s, &SplitStepper::new(&p, &b, dt).unwrap(), 10).unwrap();
        // n = n_eq + (n0 - n_eq) phi11 + (m0) phi12 around the equilibrium f / omega^2
        let eq = 0.7 / w2;
        let phi = damped_oscillator_matrix(w2, 0.3, 1.0);
        let n = eq + (0.1 - eq) * phi[0][0];
        let m = (0.1 - eq) * phi[1][0];
        assert!((stepped.n.0[0] - n).abs() < 1e-13);
        assert!((stepped.m.0[0] - m).abs() < 1e-13);
    }

    #[test]
    fn resonant_step_does_not_pump_a_mode() {
        // dt * omega_41^2 is within 0.02 of 450 * 2 pi for L = pi, h = 1
        let b = SineBasis::with_default_grid(PI, 64).unwrap();
        let p = ModelParams::unforced(1.0, 0.0, 0.0, 64).unwrap();
        let w2 = p.stiffness(&b)[40];
        let phase = (w2 * 1e-3) % (2.0 * PI);
        assert!(phase.min(2.0 * PI - phase) < 0.03);
        let s = seeded_state(&b, 6.0, 1.0, 3);
        let coarse = evolve(&s, &SplitStepper::new(&p, &b, 1e-3).unwrap(), 1000).unwrap();
        let fine = evolve(&s, &SplitStepper::new(&p, &b, 2.5e-4).unwrap(), 4000).unwrap();
        let lambda = b.lambda()[40];
        assert!(lambda * (coarse.e.0[40] - fine.e.0[40]).norm() < 1e-8);
    }

    #[test]
    fn split_step_is_exact_for_linear_data() {
        let b = SineBasis::new(PI, 8, 32).unwrap();
        let p = ModelParams::unforced(0.9, 0.4, 0.3, 8).unwrap();
        let mut s = seeded_state(&b, 2.0, 1.0, 1);
        s.e = FieldC::zeros(8);
        let dt = 0.05;
        let stepped = step_split(&s, &p, &b, dt).unwrap();
        let prop = build_propagator(&p, &b, dt);
        let mut exact = s.clone();
        prop.apply(&mut exact);
        for k in 0..8 {
            assert!((stepped.n.0[k] - exact.n.0[k]).abs() < 1e-14);
            assert!((stepped.m.0[k] - exact.m.0[k]).abs() < 1e-13);
        }
        assert!((stepped.t - dt).abs() < 1e-16);
    }

    #[test]
    fn split_step_damps_single_mode_exactly() {
        let b = SineBasis::new(PI, 8, 32).unwrap();
        let p = ModelParams::unforced(1.0, 0.0, 0.5, 8).unwrap();
        let mut s = State::zeros(8);
        s.e = FieldC::unit(8, 2, Complex64::new(0.3, 0.4));
        let dt = 0.01;
        let out = step_split(&s, &p, &b, dt).unwrap();
        let before = b_norm(&s.e);
        let after = b_norm(&out.e);
        assert!((after - (-0.5 * dt).exp() * before).abs() < 1e-14);
    }

    fn b_norm(e: &FieldC) -> f64 {
        e.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    #[test]
    fn rk4_zero_state_and_stability_guard() {
        let b = SineBasis::new(PI, 4, 16).unwrap();
        let p = ModelParams::unforced(1.0, 0.1, 0.1, 4).unwrap();
        let z = step_reference_rk4(&State::zeros(4), &p, &b, 1e-3).unwrap();
        assert!(z.n.0.iter().chain(&z.m.0).all(|&x| x == 0.0));
        // omega_4^2 = 16 + 256 = 272
        assert!(step_reference_rk4(&State::zeros(4), &p, &b, 0.01).is_err());
    }

    fn oscillator_closed_form(omega2: f64, alpha: f64, n0: f64, m0: f64, t: f64) -> (f64, f64) {
        // underdamped case, written from the characteristic roots
        let sigma = alpha / 2.0;
        let beta = (omega2 - sigma * sigma).sqrt();
        let a = n0;
        let c = (m0 + sigma * n0) / beta;
        let decay = (-sigma * t).exp();
        let n = decay * (a * (beta * t).cos() + c * (beta * t).sin());
        let m = -sigma * n + decay * beta * (-a * (beta * t).sin() + c * (beta * t).cos());
        (n, m)
    }

    #[test]
    fn rk4_single_mode_oscillator_is_fourth_order() {
        let b = SineBasis::new(PI, 2, 8).unwrap();
        let p = ModelParams::unforced(1.0, 0.6, 0.0, 2).unwrap();
        let (n0, m0) = (0.7, -0.2);
        let exact = oscillator_closed_form(2.0, 0.6, n0, m0, 1.0);
        let err = |dt: f64| {
            let mut s = State::zeros(2);
            s.n.0[0] = n0;
            s.m.0[0] = m0;
            let steps = (1.0 / dt).round() as usize;
            for _ in 0..steps {
                s = step_reference_rk4(&s, &p, &b, dt).unwrap();
            }
            ((s.n.0[0] - exact.0).powi(2) + (s.m.0[0] - exact.1).powi(2)).sqrt()
        };
        let ratio = err(0.1) / err(0.05);
        assert!((13.0..19.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn rk4_single_mode_schroedinger_matches_closed_form() {
        let b = SineBasis::new(PI, 2, 8).unwrap();
        let p = ModelParams::unforced(1.0, 0.0, 0.5, 2).unwrap();
        let mut s = State::zeros(2);
        // small enough that the induced density wave is below the tolerance
        let e0 = Complex64::new(2e-5, -1e-5);
        s.e.0[0] = e0;
        for _ in 0..10_000 {
            s = step_reference_rk4(&s, &p, &b, 1e-4).unwrap();
        }
        let exact = e0 * (Complex64::new(-0.5, -2.0)).exp();
        assert!((s.e.0[0] - exact).norm() < 1e-10 * e0.norm());
    }

    #[test]
    fn rhs_matches_reference_flow_difference() {
        let b = SineBasis::new(PI, 4, 16).unwrap();
        let s = seeded_state(&b, 3.0, 0.5, 2);
        let f = crate::initial::seeded_field_r(4, 2.0, 3);
        let g = crate::initial::seeded_field_c(4, 2.0, 4);
        let p = ModelParams::new(0.5, 0.3, 0.2, f, g).unwrap();
        let eps = 1e-5;
        let fwd = step_reference_rk4(&s, &p, &b, eps).unwrap();
        let bwd = step_reference_rk4(&s, &p, &b, -eps).unwrap();
        let d = rhs(&s, &p, &b).unwrap();
        for k in 0..4 {
            assert!(((fwd.n.0[k] - bwd.n.0[k]) / (2.0 * eps) - d.dn.0[k]).abs() < 1e-6);
            assert!(((fwd.m.0[k] - bwd.m.0[k]) / (2.0 * eps) - d.dm.0[k]).abs() < 1e-6);
            assert!(((fwd.e.0[k] - bwd.e.0[k]) / (2.0 * eps) - d.de.0[k]).norm() < 1e-6);
        }
    }

    #[test]
    fn split_matches_reference_at_second_order() {
        let b = SineBasis::new(PI, 4, 16).unwrap();
        let s = seeded_state(&b, 3.0, 1.0, 9);
        let p = ModelParams::new(
            0.5,
            0.2,
            0.3,
            crate::initial::seeded_field_r(4, 2.0, 1),
            crate::initial::seeded_field_c(4, 2.0, 2),
        )
        .unwrap();
        let reference = |dt: f64| {
            let opts = IntegrateOptions { cadence: 1, keep_states: true, scheme: Scheme::ReferenceRk4, ..Default::default() };
            integrate(&s, &p, &b, dt, 1.0, opts).unwrap()
        };
        let split = |dt: f64| {
            let opts = IntegrateOptions { cadence: 1, keep_states: true, ..Default::default() };
            integrate(&s, &p, &b, dt, 1.0, opts).unwrap()
        };
        let dist = |dt: f64| {
            let a = split(dt);
            let r = reference(dt / 4.0);
            a.records
                .iter()
                .map(|rec| {
                    let idx = (rec.t / (dt / 4.0)).round() as usize;
                    let sa = rec.state.as_ref().unwrap();
                    let sr = r.records[idx].state.as_ref().unwrap();
                    sa.difference(sr).norm_h(&b)
                })
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (dist(0.02), dist(0.01));
        let order = (e1 / e2).log2();
        assert!((1.8..2.3).contains(&order), "order {order} ({e1}, {e2})");
    }

    #[test]
    fn mass_flux_identity_holds_on_steps() {
        let b = SineBasis::with_default_grid(PI, 16).unwrap();
        let s = seeded_state(&b, 3.0, 1.0, 4);
        let (_, p) = nonlinear_terms(&s, &b).unwrap();
        assert!(inner_c(&p, &s.e).im.abs() < 1e-12);
    }

    #[test]
    fn integrate_zero_data_is_zero_and_deterministic() {
        let b = SineBasis::with_default_grid(PI, 8).unwrap();
        let p = ModelParams::unforced(1.0, 0.5, 0.5, 8).unwrap();
        let log = integrate(&State::zeros(8), &p, &b, 1e-2, 0.5, IntegrateOptions { cadence: 5, ..Default::default() }).unwrap();
        assert_eq!(log.records.len(), 11);
        for r in &log.records {
            assert_eq!(r.energies.v, 0.0);
            assert_eq!(r.energies.mass_e, 0.0);
            assert_eq!(r.norm_h, 0.0);
        }
        let s = seeded_state(&b, 3.0, 1.0, 3);
        let a = integrate(&s, &p, &b, 1e-2, 0.5, IntegrateOptions::default()).unwrap();
        let c = integrate(&s, &p, &b, 1e-2, 0.5, IntegrateOptions::default()).unwrap();
        assert_eq!(a, c);
        assert!((a.records.last().unwrap().t - 0.5).abs() < 1e-15);
    }

    #[test]
    fn integrate_rejects_bad_cadence_and_horizon() {
        let b = SineBasis::with_default_grid(PI, 4).unwrap();
        let p = ModelParams::unforced(1.0, 0.5, 0.5, 4).unwrap();
        let s = State::zeros(4);
        assert!(integrate(&s, &p, &b, 0.1, 1.0, IntegrateOptions { cadence: 3, ..Default::default() }).is_err());
        assert!(integrate(&s, &p, &b, 0.1, 1.05, IntegrateOptions::default()).is_err());
        assert!(integrate(&s, &p, &b, -0.1, 1.0, IntegrateOptions::default()).is_err());
    }

    #[test]
    fn divergence_carries_last_good_state() {
        let b = SineBasis::with_default_grid(PI, 4).unwrap();
        let mut p = ModelParams::unforced(1.0, 0.0, 0.0, 4).unwrap();
        p.f.0[0] = 1e307;
        let err = integrate(&State::zeros(4), &p, &b, 1.0, 100.0, IntegrateOptions { cadence: 1, ..Default::default() }).unwrap_err();
        match err {
            Error::Divergence { last_good, .. } => assert!(last_good.unwrap().is_finite()),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn energy_is_nearly_conserved_without_damping() {
        let b = SineBasis::with_default_grid(PI, 16).unwrap();
        let p = ModelParams::unforced(1.0, 0.0, 0.0, 16).unwrap();
        let s = seeded_state(&b, 6.0, 1.0, 12);
        let v0 = energy_report(&s, &p, &b, None).unwrap().v;
        let log = integrate(&s, &p, &b, 1e-3, 1.0, IntegrateOptions { cadence: 100, ..Default::default() }).unwrap();
        for r in &log.records {
            assert!((r.energies.v - v0).abs() < 1e-6 * v0.abs(), "{} vs {v0}", r.energies.v);
        }
    }
}
