//! Multi-run studies: absorbing-ball sweeps, two-trajectory contraction and
//! self-convergence in `N` and `dt`.
//!
//! Ensemble members and sweep points run concurrently on the rayon pool;
//! every report is assembled in a fixed order, so identical inputs give
//! bitwise identical reports.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::initial::seeded_state;
use crate::integrators::{step_count, SplitStepper};
use crate::model::{ModelParams, State};
use crate::spectral::{FieldC, FieldR, SineBasis};

/// Fraction of the horizon treated as the final window.
pub const FINAL_WINDOW: f64 = 0.2;

/// Largest accepted spread of final-window norms across radii.
pub const RADIUS_SPREAD_LIMIT: f64 = 2.0;

/// One point of a parameter sweep. Loads are the sweep loads times `load_scale`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParamPoint {
    pub h: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub load_scale: f64,
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub basis: SineBasis,
    pub f: FieldR,
    pub g: FieldC,
    pub grid: Vec<ParamPoint>,
    pub ensemble: usize,
    pub radii: Vec<f64>,
    pub horizon: f64,
    pub dt: f64,
    pub cadence: usize,
    /// Spectral decay of the seeded initial data.
    pub decay: f64,
    /// Member `i` uses seed `seed + i` at every radius.
    pub seed: u64,
}

impl SweepSpec {
    fn validate(&self) -> Result<usize> {
        if self.ensemble == 0 {
            return Err(Error::config("ensemble", "must be at least 1"));
        }
        if self.radii.is_empty() || self.radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::config("radii", "radii must be positive"));
        }
        if self.grid.is_empty() {
            return Err(Error::config("grid", "parameter grid is empty"));
        }
        for p in &self.grid {
            if !(p.alpha > 0.0) {
                return Err(Error::config("alpha", format!("absorbing sets need alpha > 0, got {}", p.alpha)));
            }
            if !(p.gamma > 0.0) {
                return Err(Error::config("gamma", format!("absorbing sets need gamma > 0, got {}", p.gamma)));
            }
            self.params_at(p)?;
        }
        step_count(self.dt, self.horizon, self.cadence)
    }

    fn params_at(&self, p: &ParamPoint) -> Result<ModelParams> {
        let f = FieldR(self.f.0.iter().map(|x| x * p.load_scale).collect());
        let g = FieldC(self.g.0.iter().map(|z| z * p.load_scale).collect());
        let params = ModelParams::new(p.h, p.alpha, p.gamma, f, g)?;
        params.check(&self.basis)?;
        Ok(params)
    }
}

/// Ensemble member that left the finite range.
#[derive(Clone, Debug, PartialEq)]
pub struct MemberFailure {
    pub member: usize,
    pub seed: u64,
    pub t: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadiusReport {
    pub radius: f64,
    pub times: Vec<f64>,
    /// Sup over the surviving members of the phase-space norm.
    pub sup_norm: Vec<f64>,
    /// First time after which `sup_norm` stays inside the candidate ball.
    pub entry_time: Option<f64>,
    pub final_max: f64,
    pub final_mean: f64,
    pub diverged: Vec<MemberFailure>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointReport {
    pub point: ParamPoint,
    /// Candidate absorbing radius: twice the largest final-window norm.
    pub ball_radius: f64,
    pub radii: Vec<RadiusReport>,
    /// Largest over smallest final-window maximum across radii.
    pub spread: f64,
    pub radius_independent: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AbsorbReport {
    pub points: Vec<PointReport>,
}

// norms at every cadence-th step, or the failure time
fn norm_series(initial: &State, stepper: &SplitStepper<'_>, basis: &SineBasis, steps: usize, cadence: usize) -> std::result::Result<Vec<f64>, f64> {
    let mut state = initial.clone();
    let mut out = Vec::with_capacity(steps / cadence + 1);
    out.push(state.norm_h(basis));
    for step in 1..=steps {
        state = stepper.step(&state).map_err(|_| state.t)?;
        if step % cadence == 0 {
            out.push(state.norm_h(basis));
        }
    }
    Ok(out)
}

fn window_start(times: &[f64], horizon: f64) -> usize {
    let t0 = (1.0 - FINAL_WINDOW) * horizon;
    times.iter().position(|&t| t >= t0 - 1e-12 * horizon).unwrap_or(times.len())
}

/// Integrates each ensemble from each radius and compares the long-time
/// norm bounds across radii.
pub fn absorbing_set_experiment(spec: &SweepSpec) -> Result<AbsorbReport> {
    let steps = spec.validate()?;
    let params: Vec<ModelParams> = spec.grid.iter().map(|p| spec.params_at(p)).collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize, usize)> = (0..spec.grid.len())
        .flat_map(|p| (0..spec.radii.len()).flat_map(move |r| (0..spec.ensemble).map(move |m| (p, r, m))))
        .collect();
    let runs: Vec<std::result::Result<Vec<f64>, f64>> = jobs
        .par_iter()
        .map(|&(p, r, m)| {
            let stepper = SplitStepper::new(&params[p], &spec.basis, spec.dt).expect("validated");
            let initial = seeded_state(&spec.basis, spec.decay, spec.radii[r], spec.seed + m as u64);
            norm_series(&initial, &stepper, &spec.basis, steps, spec.cadence)
        })
        .collect();

    let times: Vec<f64> = (0..=steps / spec.cadence)
        .map(|i| (i * spec.cadence) as f64 * spec.dt)
        .collect();
    let start = window_start(&times, spec.horizon);
    let mut runs = runs.into_iter();
    let mut points = Vec::with_capacity(spec.grid.len());
    for point in &spec.grid {
        let mut radii = Vec::with_capacity(spec.radii.len());
        for &radius in &spec.radii {
            let mut sup = vec![f64::NEG_INFINITY; times.len()];
            let mut diverged = Vec::new();
            for member in 0..spec.ensemble {
                match runs.next().expect("one run per job") {
                    Ok(series) => {
                        for (s, v) in sup.iter_mut().zip(series) {
                            *s = s.max(v);
                        }
                    }
                    Err(t) => diverged.push(MemberFailure {
                        member,
                        seed: spec.seed + member as u64,
                        t,
                    }),
                }
            }
            if diverged.len() == spec.ensemble {
                sup.iter_mut().for_each(|s| *s = f64::NAN);
            }
            radii.push(RadiusReport {
                radius,
                times: times.clone(),
                sup_norm: sup,
                entry_time: None,
                final_max: f64::NAN,
                final_mean: f64::NAN,
                diverged,
            });
        }
        let ball_radius = RADIUS_SPREAD_LIMIT
            * radii
                .iter()
                .map(|r| r.sup_norm[start..].iter().cloned().fold(f64::NEG_INFINITY, f64::max))
                .fold(f64::NEG_INFINITY, f64::max);
        for r in radii.iter_mut() {
            let outside = r.sup_norm.iter().rposition(|&v| !(v <= ball_radius));
            let entry = match outside {
                None => Some(0),
                Some(i) if i + 1 < times.len() => Some(i + 1),
                Some(_) => None,
            };
            r.entry_time = entry.map(|i| times[i]);
            if let Some(i) = entry {
                let window = &r.sup_norm[start.max(i)..];
                r.final_max = window.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                r.final_mean = window.iter().sum::<f64>() / window.len() as f64;
            }
        }
        let maxima: Vec<f64> = radii.iter().map(|r| r.final_max).collect();
        let hi = maxima.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = maxima.iter().cloned().fold(f64::INFINITY, f64::min);
        let spread = if maxima.iter().any(|m| !m.is_finite()) {
            f64::NAN
        } else if hi == 0.0 {
            1.0
        } else {
            hi / lo
        };
        points.push(PointReport {
            point: *point,
            ball_radius,
            radius_independent: spread <= RADIUS_SPREAD_LIMIT,
            spread,
            radii,
        });
    }
    Ok(AbsorbReport { points })
}

#[derive(Clone, Debug)]
pub struct ContractionSpec {
    pub basis: SineBasis,
    pub params: ModelParams,
    pub dt: f64,
    pub cadence: usize,
    /// Time spent moving the base state towards the attractor first.
    pub warmup: f64,
    pub horizon: f64,
    /// Phase-space radius and decay of the seeded base state (radius 0 gives zero data).
    pub radius: f64,
    pub decay: f64,
    pub seed: u64,
    /// Semi-strong norm of the perturbation.
    pub eps: f64,
    /// Trajectories whose phase-space norm exceeds this mark the report invalid.
    pub bound: f64,
}

/// Fitted `||U(t)||_*^2 <= a e^{-kappa t} ||U(0)||_*^2 + b sup_{s<=t} ||E1 - E2||^2(s)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvelopeFit {
    pub a: f64,
    pub kappa: f64,
    pub b: f64,
    /// The fitted inequality holds at every logged time.
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContractionReport {
    pub times: Vec<f64>,
    /// `||U(t)||^2` in the semi-strong phase space.
    pub dist2_hstar: Vec<f64>,
    /// `||E1(t) - E2(t)||^2`.
    pub e_dist2: Vec<f64>,
    /// Running `sup_{s<=t} ||E1(s) - E2(s)||^2`.
    pub e_sup2: Vec<f64>,
    /// `max_t ||E1(t) - E2(t)||` over the window.
    pub e_seminorm: f64,
    /// Largest phase-space norm seen on either trajectory.
    pub max_norm: f64,
    pub valid: bool,
    pub fit: Option<EnvelopeFit>,
}

/// Running maximum from the right: `env_i = max_{j >= i} u_j`.
pub fn upper_envelope(u: &[f64]) -> Vec<f64> {
    let mut env = u.to_vec();
    for i in (0..env.len().saturating_sub(1)).rev() {
        env[i] = env[i].max(env[i + 1]);
    }
    env
}

/// Least-squares fit of `log env = log(a u0) - kappa t` followed by the
/// smallest `b` that makes the envelope inequality hold at every sample.
pub fn fit_envelope(times: &[f64], u: &[f64], e_sup2: &[f64]) -> Option<EnvelopeFit> {
    let u0 = *u.first()?;
    if !(u0 > 0.0) {
        return None;
    }
    let env = upper_envelope(u);
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(&env)
        .filter(|(_, &e)| e > 0.0)
        .map(|(&t, &e)| (t, e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let kappa = -slope;
    let a = (my - slope * mt).exp() / u0;
    let mut b: f64 = 0.0;
    for ((&t, &ui), &s) in times.iter().zip(u).zip(e_sup2) {
        let excess = ui - a * (-kappa * t).exp() * u0;
        if excess > 0.0 {
            b = b.max(if s > 0.0 { excess / s } else { f64::INFINITY });
        }
    }
    let holds = times
        .iter()
        .zip(u)
        .zip(e_sup2)
        .all(|((&t, &ui), &s)| ui <= (a * (-kappa * t).exp() * u0 + b * s) * (1.0 + 1e-12));
    Some(EnvelopeFit { a, kappa, b, holds })
}

/// Runs a base trajectory and an `eps`-perturbed copy and fits the
/// stabilizability envelope to their distance.
pub fn two_trajectory_experiment(spec: &ContractionSpec) -> Result<ContractionReport> {
    let basis = &spec.basis;
    let stepper = SplitStepper::new(&spec.params, basis, spec.dt)?;
    if !(spec.eps.is_finite() && spec.eps >= 0.0) {
        return Err(Error::config("eps", format!("must be non-negative, got {}", spec.eps)));
    }
    let steps = step_count(spec.dt, spec.horizon, spec.cadence)?;
    let warm_steps = if spec.warmup > 0.0 { step_count(spec.dt, spec.warmup, 1)? } else { 0 };

    let mut base = if spec.radius > 0.0 {
        seeded_state(basis, spec.decay, spec.radius, spec.seed)
    } else {
        State::zeros(basis.modes())
    };
    let mut max_norm: f64 = 0.0;
    let mut valid = true;
    for _ in 0..warm_steps {
        match stepper.step(&base) {
            Ok(next) => base = next,
            Err(_) => {
                valid = false;
                break;
            }
        }
    }
    base.t = 0.0;
    let direction = seeded_state(basis, spec.decay, 1.0, spec.seed.wrapping_add(0x5eed));
    let direction = direction.scaled(1.0 / direction.norm_hstar(basis));
    let mut other = base.axpy(spec.eps, &direction);

    let mut report = ContractionReport {
        times: Vec::new(),
        dist2_hstar: Vec::new(),
        e_dist2: Vec::new(),
        e_sup2: Vec::new(),
        e_seminorm: 0.0,
        max_norm: 0.0,
        valid,
        fit: None,
    };
    let mut sup2: f64 = 0.0;
    let mut log = |a: &State, b: &State, report: &mut ContractionReport| {
        let d = a.difference(b);
        let e2: f64 = d.e.0.iter().map(|z| z.norm_sqr()).sum();
        sup2 = sup2.max(e2);
        report.times.push(a.t);
        report.dist2_hstar.push(d.norm_hstar(basis).powi(2));
        report.e_dist2.push(e2);
        report.e_sup2.push(sup2);
    };
    max_norm = max_norm.max(base.norm_h(basis)).max(other.norm_h(basis));
    log(&base, &other, &mut report);
    if report.valid {
        for step in 1..=steps {
            match (stepper.step(&base), stepper.step(&other)) {
                (Ok(a), Ok(b)) => {
                    base = a;
                    other = b;
                }
                _ => {
                    report.valid = false;
                    break;
                }
            }
            max_norm = max_norm.max(base.norm_h(basis)).max(other.norm_h(basis));
            if step % spec.cadence == 0 {
                log(&base, &other, &mut report);
            }
        }
    }
    report.max_norm = max_norm;
    report.valid &= max_norm <= spec.bound;
    report.e_seminorm = report.e_dist2.iter().cloned().fold(0.0, f64::max).sqrt();
    if report.valid && spec.eps > 0.0 {
        report.fit = fit_envelope(&report.times, &report.dist2_hstar, &report.e_sup2);
    }
    Ok(report)
}

/// Slowest amplitude decay rate of the linearised dynamics:
/// `min(gamma, min_k rate of the damped oscillator k)`.
pub fn slowest_linear_rate(params: &ModelParams, basis: &SineBasis) -> f64 {
    let sigma = 0.5 * params.alpha;
    params
        .stiffness(basis)
        .iter()
        .map(|&w2| {
            let d = sigma * sigma - w2;
            if d > 0.0 {
                sigma - d.sqrt()
            } else {
                sigma
            }
        })
        .fold(params.gamma, f64::min)
}

#[derive(Clone, Debug)]
pub struct ConvergenceSpec {
    pub length: f64,
    pub h: f64,
    pub alpha: f64,
    pub gamma: f64,
    /// Loads, truncated or zero-padded to each resolution.
    pub f: FieldR,
    pub g: FieldC,
    pub ns: Vec<usize>,
    pub dts: Vec<f64>,
    /// Resolution of the `dt` study.
    pub n_dt: usize,
    pub t_end: f64,
    pub decay: f64,
    pub radius: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub n_ref: usize,
    pub dt_ref: f64,
    /// `(N, error)` at `dt_ref` against the `(n_ref, dt_ref)` solution.
    pub n_errors: Vec<(usize, f64)>,
    /// Successive error ratios per refinement of `N`.
    pub n_ratios: Vec<f64>,
    /// `(dt, error)` at `n_dt` against the `(n_dt, dt_ref)` solution.
    pub dt_errors: Vec<(f64, f64)>,
    /// `log2` of successive error ratios (observed order for halving).
    pub dt_orders: Vec<f64>,
}

fn resized_r(f: &FieldR, n: usize) -> FieldR {
    let mut out = FieldR::zeros(n);
    let k = n.min(f.0.len());
    out.0[..k].copy_from_slice(&f.0[..k]);
    out
}

fn resized_c(g: &FieldC, n: usize) -> FieldC {
    let mut out = FieldC::zeros(n);
    let k = n.min(g.0.len());
    out.0[..k].copy_from_slice(&g.0[..k]);
    out
}

/// Self-convergence in `N` and in `dt` at `t_end`, errors in the phase-space
/// norm. Initial data are seeded at the reference resolution and truncated.
pub fn convergence_study(spec: &ConvergenceSpec) -> Result<ConvergenceReport> {
    if spec.ns.is_empty() || spec.dts.is_empty() {
        return Err(Error::config("convergence", "need at least one N and one dt"));
    }
    let n_ref = 4 * spec.ns.iter().chain([&spec.n_dt]).copied().max().unwrap_or(1);
    let dt_ref = spec.dts.iter().cloned().fold(f64::INFINITY, f64::min) / 8.0;
    let ref_basis = SineBasis::with_default_grid(spec.length, n_ref)?;
    let initial = seeded_state(&ref_basis, spec.decay, spec.radius, spec.seed);

    let run = |n: usize, dt: f64| -> Result<State> {
        let basis = SineBasis::with_default_grid(spec.length, n)?;
        let params = ModelParams::new(spec.h, spec.alpha, spec.gamma, resized_r(&spec.f, n), resized_c(&spec.g, n))?;
        let stepper = SplitStepper::new(&params, &basis, dt)?;
        let steps = step_count(dt, spec.t_end, 1)?;
        let mut s = initial.resized(n);
        for _ in 0..steps {
            s = stepper.step(&s)?;
        }
        Ok(s)
    };

    let mut jobs: Vec<(usize, f64)> = vec![(n_ref, dt_ref), (spec.n_dt, dt_ref)];
    jobs.extend(spec.ns.iter().map(|&n| (n, dt_ref)));
    jobs.extend(spec.dts.iter().map(|&dt| (spec.n_dt, dt)));
    let finals: Vec<Result<State>> = jobs.par_iter().map(|&(n, dt)| run(n, dt)).collect();
    let mut finals = finals.into_iter();
    let reference = finals.next().expect("reference job")?;
    let dt_reference = finals.next().expect("dt reference job")?;

    let n_errors = spec
        .ns
        .iter()
        .map(|&n| {
            let s = finals.next().expect("N job")?;
            Ok((n, s.resized(n_ref).difference(&reference).norm_h(&ref_basis)))
        })
        .collect::<Result<Vec<_>>>()?;
    let dt_basis = SineBasis::with_default_grid(spec.length, spec.n_dt)?;
    let dt_errors = spec
        .dts
        .iter()
        .map(|&dt| {
            let s = finals.next().expect("dt job")?;
            Ok((dt, s.difference(&dt_reference).norm_h(&dt_basis)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceReport {
        n_ref,
        dt_ref,
        n_ratios: n_errors.windows(2).map(|w| w[0].1 / w[1].1).collect(),
        dt_orders: dt_errors
            .windows(2)
            .map(|w| (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln())
            .collect(),
        n_errors,
        dt_errors,
    })
}
