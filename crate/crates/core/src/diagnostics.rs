//! Balance residuals, decay bound, mass identity and Lipschitz ratios
//! evaluated on logged trajectories.

use crate::calibration;
use crate::error::{Error, Result};
use crate::model::{ModelParams, State};
use crate::spectral::{SineBasis, SpectralField};
use crate::trajectory::{PointEval, TrajectoryLog};

/// Slack allowed by [`decay_bound_check`], relative to `1 + rhs`.
pub const DECAY_BOUND_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct BalanceReport {
    pub times: Vec<f64>,
    /// Left minus right side of the weak energy balance at each record.
    pub residual_w_en2: Vec<f64>,
    /// Same for the semi-strong energy relation, when available.
    pub residual_w_en: Option<Vec<f64>>,
    /// Largest absolute residual of the relation the report was built for.
    pub max_abs_residual: f64,
    pub dt_used: f64,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn w_en2_series(log: &TrajectoryLog) -> Result<Vec<f64>> {
    let first = log
        .records
        .first()
        .ok_or_else(|| Error::MissingData("trajectory has no records".into()))?;
    let start = first.energies.v0 + first.energies.v1;
    Ok(log
        .records
        .iter()
        .map(|r| {
            let lhs = r.energies.v0 + r.energies.v1 + r.acc.w_en2_dissipation;
            let rhs = start + r.acc.w_en2_work;
            lhs - rhs
        })
        .collect())
}

/// Residual of `V0 + V1 + int(alpha ||n_t||_{-1}^2 + 2 gamma V1)
/// = V0(0) + V1(0) + 2 gamma int Re(g, E)`.
pub fn residual_w_en2(log: &TrajectoryLog) -> Result<BalanceReport> {
    let residual = w_en2_series(log)?;
    Ok(BalanceReport {
        times: log.times(),
        max_abs_residual: max_abs(&residual),
        residual_w_en2: residual,
        residual_w_en: None,
        dt_used: log.dt,
    })
}

/// Residual of `E_f + ||E_t||^2 + int(alpha ||n_t||^2 + 2 gamma ||E_t||^2)
/// = E_f(0) + ||E_1||^2 + 2 int R`.
pub fn residual_w_en(log: &TrajectoryLog) -> Result<BalanceReport> {
    let w_en2 = w_en2_series(log)?;
    let et = |i: usize| {
        log.records[i].energies.et_norm.ok_or_else(|| {
            Error::MissingData(format!(
                "E_t not logged at t = {} (enable semi-strong diagnostics)",
                log.records[i].t
            ))
        })
    };
    let first = &log.records[0];
    let start = first.energies.ef + et(0)?.powi(2);
    let residual = (0..log.records.len())
        .map(|i| {
            let r = &log.records[i];
            Ok(r.energies.ef + et(i)?.powi(2) + r.acc.w_en_dissipation - (start + r.acc.w_en_r))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(BalanceReport {
        times: log.times(),
        residual_w_en2: w_en2,
        max_abs_residual: max_abs(&residual),
        residual_w_en: Some(residual),
        dt_used: log.dt,
    })
}

/// `e_gamma(t) = (1 - exp(-gamma t)) / gamma`, or `t` when `gamma = 0`.
pub fn e_gamma(gamma: f64, t: f64) -> f64 {
    if gamma == 0.0 {
        t
    } else {
        -(-gamma * t).exp_m1() / gamma
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub times: Vec<f64>,
    /// `||E(t)||`.
    pub lhs: Vec<f64>,
    /// `||E_0|| exp(-gamma t) + e_gamma(t) ||g||`.
    pub rhs: Vec<f64>,
    pub margin: Vec<f64>,
    pub violations: usize,
    /// Time of the worst violation, if any.
    pub worst_violation: Option<f64>,
}

impl BoundReport {
    pub fn violated(&self) -> bool {
        self.violations > 0
    }
}

/// Evaluates `||E(t)|| <= ||E_0|| e^{-gamma t} + e_gamma(t) ||g||` at every
/// record, with `||E_0||` taken from the first record.
pub fn decay_bound_check(log: &TrajectoryLog, params: &ModelParams) -> Result<BoundReport> {
    let first = log
        .records
        .first()
        .ok_or_else(|| Error::MissingData("trajectory has no records".into()))?;
    decay_bound_check_from(log, params, first.energies.mass_e.sqrt())
}

/// As [`decay_bound_check`] with an externally supplied `||E_0||`.
pub fn decay_bound_check_from(log: &TrajectoryLog, params: &ModelParams, e0_norm: f64) -> Result<BoundReport> {
    let t0 = log
        .records
        .first()
        .ok_or_else(|| Error::MissingData("trajectory has no records".into()))?
        .t;
    let g_norm = params.g.coeffs().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let mut report = BoundReport {
        times: Vec::with_capacity(log.len()),
        lhs: Vec::with_capacity(log.len()),
        rhs: Vec::with_capacity(log.len()),
        margin: Vec::with_capacity(log.len()),
        violations: 0,
        worst_violation: None,
    };
    let mut worst = 0.0;
    for r in &log.records {
        let t = r.t - t0;
        let lhs = r.energies.mass_e.sqrt();
        let rhs = e0_norm * (-params.gamma * t).exp() + e_gamma(params.gamma, t) * g_norm;
        let excess = lhs - rhs;
        if excess > DECAY_BOUND_SLACK * (1.0 + rhs) {
            report.violations += 1;
            if excess > worst {
                worst = excess;
                report.worst_violation = Some(r.t);
            }
        }
        report.times.push(r.t);
        report.lhs.push(lhs);
        report.rhs.push(rhs);
        report.margin.push(rhs - lhs);
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MassReport {
    /// Interior record times where the centered difference is taken.
    pub times: Vec<f64>,
    /// `d/dt ||E||^2 - (-2 gamma ||E||^2 + 2 Im(g, E))`.
    pub mismatch: Vec<f64>,
    pub max_abs_mismatch: f64,
}

/// Checks `1/2 d/dt ||E||^2 + gamma ||E||^2 = Im(g, E)` with centered
/// differences of the logged mass.
pub fn mass_identity_residual(log: &TrajectoryLog, params: &ModelParams) -> Result<MassReport> {
    let r = &log.records;
    if r.len() < 3 {
        return Err(Error::MissingData(format!(
            "mass identity needs at least 3 records, got {}",
            r.len()
        )));
    }
    let mut times = Vec::with_capacity(r.len() - 2);
    let mut mismatch = Vec::with_capacity(r.len() - 2);
    for i in 1..r.len() - 1 {
        let derivative = (r[i + 1].energies.mass_e - r[i - 1].energies.mass_e) / (r[i + 1].t - r[i - 1].t);
        let model = -2.0 * params.gamma * r[i].energies.mass_e + 2.0 * r[i].im_ge;
        times.push(r[i].t);
        mismatch.push(derivative - model);
    }
    Ok(MassReport {
        max_abs_mismatch: max_abs(&mismatch),
        times,
        mismatch,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LipschitzReport {
    pub times: Vec<f64>,
    /// `||Y1(t) - Y2(t)||_H / ||Y1(0) - Y2(0)||_H`.
    pub ratio_h: Vec<f64>,
    /// Same on the semi-strong scale.
    pub ratio_hstar: Option<Vec<f64>>,
}

/// Distance ratios of two trajectories run on the same basis and time grid.
/// Both logs must keep states.
pub fn lipschitz_ratio(a: &TrajectoryLog, b: &TrajectoryLog, basis: &SineBasis) -> Result<LipschitzReport> {
    if a.len() != b.len() || a.records.iter().zip(&b.records).any(|(x, y)| x.t != y.t) {
        return Err(Error::MissingData("trajectories do not share a time grid".into()));
    }
    let states = a
        .records
        .iter()
        .zip(&b.records)
        .map(|(x, y)| match (&x.state, &y.state) {
            (Some(sx), Some(sy)) => Ok(sx.difference(sy)),
            _ => Err(Error::MissingData("lipschitz ratio needs logged states".into())),
        })
        .collect::<Result<Vec<_>>>()?;
    let first = states
        .first()
        .ok_or_else(|| Error::MissingData("trajectory has no records".into()))?;
    let d0 = first.norm_h(basis);
    if d0 == 0.0 {
        return Err(Error::MissingData(
            "identical initial data: distance ratio undefined".into(),
        ));
    }
    let semi = a.semi_strong && b.semi_strong;
    let d0_star = first.norm_hstar(basis);
    Ok(LipschitzReport {
        times: a.times(),
        ratio_h: states.iter().map(|d| d.norm_h(basis) / d0).collect(),
        ratio_hstar: semi.then(|| states.iter().map(|d| d.norm_hstar(basis) / d0_star).collect()),
    })
}

/// One line of a verification run.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: &'static str, value: f64, tolerance: f64) -> Self {
        Check {
            name,
            value,
            tolerance,
            pass: value <= tolerance,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Runs the diagnostic suite on a log: weak balance, semi-strong balance
/// (when `E_t` was logged), decay bound and mass identity. With `initial`,
/// the first record is also compared against a fresh evaluation of that
/// state, which catches logs that are self-consistent but do not belong to
/// the configured run.
pub fn verify_log(
    log: &TrajectoryLog,
    params: &ModelParams,
    basis: &SineBasis,
    initial: Option<&State>,
) -> Result<VerifyReport> {
    let mut checks = Vec::new();

    let w_en2 = residual_w_en2(log)?;
    let scale = log
        .records
        .iter()
        .map(|r| {
            [r.energies.v0, r.energies.v1, r.acc.w_en2_dissipation, r.acc.w_en2_work]
                .iter()
                .fold(0.0f64, |m, x| m.max(x.abs()))
        })
        .fold(f64::MIN_POSITIVE, f64::max);
    checks.push(Check::new("balance_w_en2", w_en2.max_abs_residual / scale, calibration::VERIFY_BALANCE_REL));

    if log.records.iter().all(|r| r.energies.et_norm.is_some()) {
        let w_en = residual_w_en(log)?;
        let scale = log
            .records
            .iter()
            .map(|r| {
                let et2 = r.energies.et_norm.unwrap_or(0.0).powi(2);
                [r.energies.ef, et2, r.acc.w_en_dissipation, r.acc.w_en_r]
                    .iter()
                    .fold(0.0f64, |m, x| m.max(x.abs()))
            })
            .fold(f64::MIN_POSITIVE, f64::max);
        checks.push(Check::new(
            "balance_w_en",
            w_en.max_abs_residual / scale,
            calibration::VERIFY_SEMI_BALANCE_REL,
        ));
    }

    let bound = decay_bound_check(log, params)?;
    checks.push(Check::new("decay_bound_violations", bound.violations as f64, 0.0));

    let mass = mass_identity_residual(log, params)?;
    let scale = log
        .records
        .iter()
        .map(|r| (1.0 + 2.0 * params.gamma) * r.energies.mass_e + 2.0 * r.im_ge.abs())
        .fold(f64::MIN_POSITIVE, f64::max);
    checks.push(Check::new(
        "mass_identity",
        mass.max_abs_mismatch / scale,
        calibration::VERIFY_MASS_IDENTITY_REL,
    ));

    if let Some(state) = initial {
        let fresh = PointEval::evaluate(state, params, basis, log.semi_strong)?.record(state, Default::default(), false);
        let first = &log.records[0];
        let (a, b) = (&first.energies, &fresh.energies);
        let mut worst = [
            rel(first.t, fresh.t),
            rel(a.mass_e, b.mass_e),
            rel(a.v0, b.v0),
            rel(a.v1, b.v1),
            rel(a.v, b.v),
            rel(a.ef, b.ef),
            rel(first.norm_h, fresh.norm_h),
            rel(first.im_ge, fresh.im_ge),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        if let (Some(x), Some(y)) = (a.et_norm, b.et_norm) {
            worst = worst.max(rel(x, y));
        }
        let acc = first.acc;
        if [acc.w_en2_dissipation, acc.w_en2_work, acc.w_en_dissipation, acc.w_en_r].iter().any(|x| *x != 0.0) {
            worst = f64::INFINITY;
        }
        checks.push(Check::new("initial_record", worst, calibration::VERIFY_INITIAL_REL));
    }
    Ok(VerifyReport { checks })
}
