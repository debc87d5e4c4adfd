//! Time-indexed run records and the running balance integrals.

use crate::error::{Error, Result};
use crate::model::{assemble_rhs, balance_r, energies_with_density, inner_c, Energies, GridSamples, ModelParams, State};
use crate::spectral::SineBasis;

/// Trapezoid accumulators of the balance integrals.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Accumulators {
    /// `int (alpha ||n_t||_{-1}^2 + 2 gamma V1)`.
    pub w_en2_dissipation: f64,
    /// `2 gamma int Re(g, E)`.
    pub w_en2_work: f64,
    /// `int (alpha ||n_t||^2 + 2 gamma ||E_t||^2)`.
    pub w_en_dissipation: f64,
    /// `2 int R`.
    pub w_en_r: f64,
}

impl Accumulators {
    pub(crate) fn trapezoid(&mut self, dt: f64, a: &PointEval, b: &PointEval) {
        let half = 0.5 * dt;
        self.w_en2_dissipation += half * (a.integrand[0] + b.integrand[0]);
        self.w_en2_work += half * (a.integrand[1] + b.integrand[1]);
        self.w_en_dissipation += half * (a.integrand[2] + b.integrand[2]);
        self.w_en_r += half * (a.integrand[3] + b.integrand[3]);
    }
}

/// Diagnostics of a single state, including the balance integrands.
#[derive(Clone, Debug)]
pub(crate) struct PointEval {
    energies: Energies,
    norm_h: f64,
    norm_hstar: Option<f64>,
    im_ge: f64,
    integrand: [f64; 4],
}

impl PointEval {
    pub fn evaluate(state: &State, params: &ModelParams, basis: &SineBasis, semi_strong: bool) -> Result<Self> {
        let grid = GridSamples::new(state, basis);
        let q = grid.density(basis);
        let et = if semi_strong {
            let p = grid.coupling(basis);
            Some(assemble_rhs(state, params, basis, &q, &p).de)
        } else {
            None
        };
        let energies = energies_with_density(state, params, basis, &q, et.as_ref());
        let ge = inner_c(&params.g, &state.e);
        let sq_m_dual = basis.norm_hs_sq_unchecked(state.m.0.iter().map(|x| x * x), -1.0);
        let sq_m = basis.norm_hs_sq_unchecked(state.m.0.iter().map(|x| x * x), 0.0);
        let (alpha, gamma) = (params.alpha, params.gamma);
        let (w_en_dissipation, w_en_r) = match &et {
            Some(et) => {
                let et2 = energies.et_norm.unwrap_or(0.0).powi(2);
                (alpha * sq_m + 2.0 * gamma * et2, 2.0 * balance_r(state, et, basis)?)
            }
            None => (0.0, 0.0),
        };
        let point = PointEval {
            energies,
            norm_h: state.norm_h(basis),
            norm_hstar: semi_strong.then(|| state.norm_hstar(basis)),
            im_ge: ge.im,
            integrand: [
                alpha * sq_m_dual + 2.0 * gamma * energies.v1,
                2.0 * gamma * ge.re,
                w_en_dissipation,
                w_en_r,
            ],
        };
        if !point.integrand.iter().all(|x| x.is_finite()) || !point.energies.v.is_finite() {
            return Err(Error::Divergence {
                t: state.t,
                last_good: Box::new(None),
            });
        }
        Ok(point)
    }

    pub fn record(&self, state: &State, acc: Accumulators, keep_state: bool) -> Record {
        Record {
            t: state.t,
            energies: self.energies,
            acc,
            norm_h: self.norm_h,
            norm_hstar: self.norm_hstar,
            im_ge: self.im_ge,
            state: keep_state.then(|| state.clone()),
        }
    }
}

/// One logged time.
#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub t: f64,
    pub energies: Energies,
    pub acc: Accumulators,
    /// `||(n_t; n; E)||` in `H x H_2 x H_2`.
    pub norm_h: f64,
    /// Same in `H x H_2 x H_4` (semi-strong runs).
    pub norm_hstar: Option<f64>,
    /// `Im(g, E)`.
    pub im_ge: f64,
    /// Full state, when the run keeps states (in memory only).
    pub state: Option<State>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryLog {
    /// Step size of the run that produced the log.
    pub dt: f64,
    pub semi_strong: bool,
    pub records: Vec<Record>,
}

impl TrajectoryLog {
    pub fn new(dt: f64, semi_strong: bool) -> Self {
        TrajectoryLog {
            dt,
            semi_strong,
            records: Vec::new(),
        }
    }

    pub fn push(&mut self, record: Record) {
        self.records.push(record);
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }
}
