//! Galerkin state, parameters, right-hand side and energy functionals.
//!
//! The semi-discrete system for the coefficients `(n, m = n_t, E)` reads
//!
//! ```text
//! n'  = m
//! m'  = -(A + h^2 A^2) n - A P_N|E|^2 - alpha m + f
//! E'  = -i (A + h^2 A^2) E - gamma E - i P_N(n E) - i g
//! ```
//!
//! with `A` the Dirichlet Laplacian, diagonal in the sine basis.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{FieldC, FieldR, SineBasis, SpectralField};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Discrete phase-space point `(n_t; n; E)` at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub t: f64,
    pub n: FieldR,
    /// Coefficients of `n_t`.
    pub m: FieldR,
    pub e: FieldC,
}

impl State {
    pub fn zeros(modes: usize) -> Self {
        State {
            t: 0.0,
            n: FieldR::zeros(modes),
            m: FieldR::zeros(modes),
            e: FieldC::zeros(modes),
        }
    }

    pub fn modes(&self) -> usize {
        self.n.len()
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.n.is_finite() && self.m.is_finite() && self.e.is_finite()
    }

    pub(crate) fn check(&self, basis: &SineBasis) -> Result<()> {
        basis.check_len(self.n.len())?;
        basis.check_len(self.m.len())?;
        basis.check_len(self.e.len())?;
        if !self.is_finite() {
            return Err(Error::Divergence {
                t: self.t,
                last_good: Box::new(None),
            });
        }
        Ok(())
    }

    /// Squared phase-space norm `||n_t||^2 + ||n||_2^2 + ||E||_s^2`, with
    /// `s = 2` for the weak scale and `s = 4` for the semi-strong scale.
    fn norm_sq(&self, basis: &SineBasis, e_order: f64) -> f64 {
        basis.norm_hs_sq_unchecked(self.m.0.iter().map(|x| x * x), 0.0)
            + basis.norm_hs_sq_unchecked(self.n.0.iter().map(|x| x * x), 2.0)
            + basis.norm_hs_sq_unchecked(self.e.0.iter().map(|z| z.norm_sqr()), e_order)
    }

    /// Norm in `H x H_2 x H_2`.
    pub fn norm_h(&self, basis: &SineBasis) -> f64 {
        self.norm_sq(basis, 2.0).sqrt()
    }

    /// Norm in `H x H_2 x H_4`.
    pub fn norm_hstar(&self, basis: &SineBasis) -> f64 {
        self.norm_sq(basis, 4.0).sqrt()
    }

    /// Componentwise difference `self - other` (time taken from `self`).
    pub fn difference(&self, other: &State) -> State {
        State {
            t: self.t,
            n: FieldR(self.n.0.iter().zip(&other.n.0).map(|(a, b)| a - b).collect()),
            m: FieldR(self.m.0.iter().zip(&other.m.0).map(|(a, b)| a - b).collect()),
            e: FieldC(self.e.0.iter().zip(&other.e.0).map(|(a, b)| a - b).collect()),
        }
    }

    /// Truncates or zero-pads to `modes` coefficients per field.
    pub fn resized(&self, modes: usize) -> State {
        let mut out = State::zeros(modes);
        out.t = self.t;
        let k = modes.min(self.modes());
        out.n.0[..k].copy_from_slice(&self.n.0[..k]);
        out.m.0[..k].copy_from_slice(&self.m.0[..k]);
        out.e.0[..k].copy_from_slice(&self.e.0[..k]);
        out
    }

    /// Multiplies every field by `factor`.
    pub fn scaled(&self, factor: f64) -> State {
        State {
            t: self.t,
            n: FieldR(self.n.0.iter().map(|x| x * factor).collect()),
            m: FieldR(self.m.0.iter().map(|x| x * factor).collect()),
            e: FieldC(self.e.0.iter().map(|z| z * factor).collect()),
        }
    }

    /// `self + factor * other`.
    pub fn axpy(&self, factor: f64, other: &State) -> State {
        State {
            t: self.t,
            n: FieldR(self.n.0.iter().zip(&other.n.0).map(|(a, b)| a + factor * b).collect()),
            m: FieldR(self.m.0.iter().zip(&other.m.0).map(|(a, b)| a + factor * b).collect()),
            e: FieldC(self.e.0.iter().zip(&other.e.0).map(|(a, b)| a + b * factor).collect()),
        }
    }
}

/// Physical parameters and load coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub h: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub f: FieldR,
    pub g: FieldC,
}

impl ModelParams {
    pub fn new(h: f64, alpha: f64, gamma: f64, f: FieldR, g: FieldC) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::config("h", format!("must be positive, got {h}")));
        }
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::config("alpha", format!("must be non-negative, got {alpha}")));
        }
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::config("gamma", format!("must be non-negative, got {gamma}")));
        }
        if f.len() != g.len() {
            return Err(Error::LengthMismatch {
                expected: f.len(),
                got: g.len(),
            });
        }
        if !f.is_finite() || !g.is_finite() {
            return Err(Error::config("load", "load coefficients must be finite"));
        }
        Ok(ModelParams { h, alpha, gamma, f, g })
    }

    /// Parameters with zero loads.
    pub fn unforced(h: f64, alpha: f64, gamma: f64, modes: usize) -> Result<Self> {
        Self::new(h, alpha, gamma, FieldR::zeros(modes), FieldC::zeros(modes))
    }

    /// `omega_k^2 = lambda_k + h^2 lambda_k^2` per mode.
    pub fn stiffness(&self, basis: &SineBasis) -> Vec<f64> {
        let h2 = self.h * self.h;
        basis.lambda().iter().map(|l| l + h2 * l * l).collect()
    }

    pub(crate) fn check(&self, basis: &SineBasis) -> Result<()> {
        basis.check_len(self.f.len())?;
        basis.check_len(self.g.len())
    }
}

/// Time derivative of a [`State`].
#[derive(Clone, Debug, PartialEq)]
pub struct Derivative {
    pub dn: FieldR,
    pub dm: FieldR,
    pub de: FieldC,
}

/// Grid samples of `n` and `E` on `j = 0..=M`, shared by product evaluations.
pub(crate) struct GridSamples {
    pub n: Vec<f64>,
    pub e: Vec<Complex64>,
}

impl GridSamples {
    pub fn new(state: &State, basis: &SineBasis) -> Self {
        GridSamples {
            n: basis.sine_values_real(&state.n.0),
            e: basis.sine_values_complex(&state.e.0),
        }
    }

    /// `P_N |E|^2`.
    pub fn density(&self, basis: &SineBasis) -> FieldR {
        let vals: Vec<f64> = self.e.iter().map(|z| z.norm_sqr()).collect();
        basis.project_product_real(&vals)
    }

    /// `P_N (n E)`.
    pub fn coupling(&self, basis: &SineBasis) -> FieldC {
        let vals: Vec<Complex64> = self.n.iter().zip(&self.e).map(|(n, e)| e * *n).collect();
        basis.project_product_complex(&vals)
    }
}

fn divergence(t: f64) -> Error {
    Error::Divergence {
        t,
        last_good: Box::new(None),
    }
}

/// Projected nonlinearities `q = P_N |E|^2` and `p = P_N (n E)`.
pub fn nonlinear_terms(state: &State, basis: &SineBasis) -> Result<(FieldR, FieldC)> {
    state.check(basis)?;
    let grid = GridSamples::new(state, basis);
    let q = grid.density(basis);
    let p = grid.coupling(basis);
    if !q.is_finite() || !p.is_finite() {
        return Err(divergence(state.t));
    }
    Ok((q, p))
}

pub(crate) fn assemble_rhs(state: &State, params: &ModelParams, basis: &SineBasis, q: &FieldR, p: &FieldC) -> Derivative {
    let omega2 = params.stiffness(basis);
    let lambda = basis.lambda();
    let dn = state.m.clone();
    let dm = FieldR(
        (0..basis.modes())
            .map(|k| {
                -omega2[k] * state.n.0[k] - lambda[k] * q.0[k] - params.alpha * state.m.0[k]
                    + params.f.0[k]
            })
            .collect(),
    );
    let de = FieldC(
        (0..basis.modes())
            .map(|k| {
                let e = state.e.0[k];
                -I * (e * omega2[k] + p.0[k] + params.g.0[k]) - e * params.gamma
            })
            .collect(),
    );
    Derivative { dn, dm, de }
}

/// Right-hand side of the Galerkin system.
pub fn rhs(state: &State, params: &ModelParams, basis: &SineBasis) -> Result<Derivative> {
    params.check(basis)?;
    let (q, p) = nonlinear_terms(state, basis)?;
    let d = assemble_rhs(state, params, basis, &q, &p);
    if !d.dm.is_finite() || !d.de.is_finite() {
        return Err(divergence(state.t));
    }
    Ok(d)
}

/// Initial value of `E_t`: `-i (A E0 + h^2 A^2 E0 + n0 E0 - i gamma E0 + g)`.
pub fn compute_e1(n0: &FieldR, e0: &FieldC, params: &ModelParams, basis: &SineBasis) -> Result<FieldC> {
    let state = State {
        t: 0.0,
        n: n0.clone(),
        m: FieldR::zeros(n0.len()),
        e: e0.clone(),
    };
    Ok(rhs(&state, params, basis)?.de)
}

/// Instantaneous energies of a state.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Energies {
    pub v0: f64,
    pub v1: f64,
    pub v: f64,
    pub ef: f64,
    /// `||E||^2`.
    pub mass_e: f64,
    /// `||E_t||`, present for semi-strong diagnostics.
    pub et_norm: Option<f64>,
}

/// `(u, v) = sum_k u_k conj(v_k)`.
pub(crate) fn inner_c(u: &FieldC, v: &FieldC) -> Complex64 {
    u.0.iter().zip(&v.0).map(|(a, b)| a * b.conj()).sum()
}

fn dot_r(u: &FieldR, v: &FieldR) -> f64 {
    u.0.iter().zip(&v.0).map(|(a, b)| a * b).sum()
}

/// Energies computed from a known `q = P_N |E|^2` (avoids recomputing it).
pub(crate) fn energies_with_density(
    state: &State,
    params: &ModelParams,
    basis: &SineBasis,
    q: &FieldR,
    et: Option<&FieldC>,
) -> Energies {
    let h2 = params.h * params.h;
    let sq_r = |f: &FieldR, s: f64| basis.norm_hs_sq_unchecked(f.0.iter().map(|x| x * x), s);
    let sq_c = |f: &FieldC, s: f64| basis.norm_hs_sq_unchecked(f.0.iter().map(|z| z.norm_sqr()), s);

    let f_n_dual = basis.inner_dual(&params.f, &state.n, -1.0).unwrap_or(0.0);
    let v0 = 0.5 * (sq_r(&state.m, -1.0) + sq_r(&state.n, 0.0) + h2 * sq_r(&state.n, 1.0)) - f_n_dual;
    let interaction = dot_r(&state.n, q);
    let v1 = sq_c(&state.e, 1.0)
        + h2 * sq_c(&state.e, 2.0)
        + interaction
        + 2.0 * inner_c(&params.g, &state.e).re;
    let ef = 0.5 * (sq_r(&state.m, 0.0) + sq_r(&state.n, 1.0) + h2 * sq_r(&state.n, 2.0) - 2.0 * dot_r(&params.f, &state.n));
    Energies {
        v0,
        v1,
        v: v0 + v1,
        ef,
        mass_e: sq_c(&state.e, 0.0),
        et_norm: et.map(|e| sq_c(e, 0.0).sqrt()),
    }
}

/// Energies `V0`, `V1`, `V = V0 + V1`, `E_f` and the mass `||E||^2`.
pub fn energy_report(
    state: &State,
    params: &ModelParams,
    basis: &SineBasis,
    et: Option<&FieldC>,
) -> Result<Energies> {
    params.check(basis)?;
    let (q, _) = nonlinear_terms(state, basis)?;
    if let Some(et) = et {
        basis.check_len(et.len())?;
    }
    Ok(energies_with_density(state, params, basis, &q, et))
}

/// Interaction term `(n, |E|^2)` of `V1`.
pub fn interaction_energy(state: &State, basis: &SineBasis) -> Result<f64> {
    let (q, _) = nonlinear_terms(state, basis)?;
    Ok(dot_r(&state.n, &q))
}

/// `W_* = E_0(n_t, n) + eps [ (n, n_t) + alpha/2 ||n||^2 ]`.
pub fn lyapunov_w(state: &State, params: &ModelParams, basis: &SineBasis, eps: f64) -> f64 {
    let h2 = params.h * params.h;
    let sq = |f: &FieldR, s: f64| basis.norm_hs_sq_unchecked(f.0.iter().map(|x| x * x), s);
    let e0 = 0.5 * (sq(&state.m, 0.0) + sq(&state.n, 1.0) + h2 * sq(&state.n, 2.0));
    e0 + eps * (dot_r(&state.n, &state.m) + 0.5 * params.alpha * sq(&state.n, 0.0))
}

/// Work density of the semi-strong balance:
/// `R = (n_t, |grad E|^2) + Re(n_t E, i E_t + Laplacian E)`.
pub fn balance_r(state: &State, et: &FieldC, basis: &SineBasis) -> Result<f64> {
    state.check(basis)?;
    basis.check_len(et.len())?;
    let dx = basis.derivative_values_complex(&state.e.0);
    let grad2: Vec<f64> = dx.iter().map(|z| z.norm_sqr()).collect();
    let first = dot_r(&state.m, &basis.project_product_real(&grad2));

    let m_vals = basis.sine_values_real(&state.m.0);
    let e_vals = basis.sine_values_complex(&state.e.0);
    let prod: Vec<Complex64> = m_vals.iter().zip(&e_vals).map(|(m, e)| e * *m).collect();
    let me = basis.project_product_complex(&prod);
    let w = FieldC(
        et.0.iter()
            .zip(&state.e.0)
            .zip(basis.lambda())
            .map(|((d, e), l)| I * d - e * *l)
            .collect(),
    );
    Ok(first + inner_c(&me, &w).re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initial::seeded_state;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_params(basis: &SineBasis, seed: u64) -> ModelParams {
        let s = seeded_state(basis, 2.0, 1.0, seed);
        ModelParams::new(0.7, 0.3, 0.4, s.n.clone(), s.e.clone()).unwrap()
    }

    // Simpson quadrature of a product of sine series
    fn simpson(l: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
        let h = l / n as f64;
        let mut s = f(0.0) + f(l);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        s * h / 3.0
    }

    fn eval_r(coeffs: &[f64], l: f64, x: f64) -> f64 {
        coeffs
            .iter()
            .enumerate()
            .map(|(i, a)| a * (2.0 / l).sqrt() * ((i + 1) as f64 * PI * x / l).sin())
            .sum()
    }

    fn eval_c(coeffs: &[Complex64], l: f64, x: f64) -> Complex64 {
        coeffs
            .iter()
            .enumerate()
            .map(|(i, a)| a * ((2.0 / l).sqrt() * ((i + 1) as f64 * PI * x / l).sin()))
            .sum()
    }

    #[test]
    fn zero_field_has_zero_nonlinearity() {
        let b = SineBasis::new(PI, 8, 32).unwrap();
        let (q, p) = nonlinear_terms(&State::zeros(8), &b).unwrap();
        assert!(q.0.iter().all(|&x| x == 0.0));
        assert!(p.0.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn density_of_single_mode_matches_quadrature() {
        // |e_1|^2 = (1 - cos 2x) / pi on (0, pi)
        let b = SineBasis::new(PI, 8, 32).unwrap();
        let mut s = State::zeros(8);
        s.e = FieldC::unit(8, 1, c(1.0, 0.0));
        let (q, _) = nonlinear_terms(&s, &b).unwrap();
        for k in 1..=8 {
            let oracle = simpson(PI, 20000, |x| {
                (1.0 - (2.0 * x).cos()) / PI * (2.0 / PI).sqrt() * (k as f64 * x).sin()
            });
            assert!((q.0[k - 1] - oracle).abs() < 1e-10, "k={k}");
        }
    }

    #[test]
    fn products_independent_of_padding() {
        let b4 = SineBasis::new(1.4, 16, 64).unwrap();
        let b8 = SineBasis::new(1.4, 16, 128).unwrap();
        let s = seeded_state(&b4, 2.0, 3.0, 11);
        let (q4, p4) = nonlinear_terms(&s, &b4).unwrap();
        let (q8, p8) = nonlinear_terms(&s, &b8).unwrap();
        for k in 0..16 {
            assert!((q4.0[k] - q8.0[k]).abs() < 1e-13);
            assert!((p4.0[k] - p8.0[k]).norm() < 1e-13);
        }
    }

    #[test]
    fn mass_flux_vanishes_and_density_is_real() {
        let b = SineBasis::with_default_grid(2.0, 24).unwrap();
        for seed in 0..5 {
            let s = seeded_state(&b, 2.0, 2.0, seed);
            let (_, p) = nonlinear_terms(&s, &b).unwrap();
            assert!(inner_c(&p, &s.e).im.abs() < 1e-12);
        }
    }

    #[test]
    fn non_finite_input_is_divergence() {
        let b = SineBasis::new(PI, 4, 16).unwrap();
        let mut s = State::zeros(4);
        s.n.0[2] = f64::NAN;
        assert!(matches!(nonlinear_terms(&s, &b), Err(Error::Divergence { .. })));
    }

    #[test]
    fn rhs_examples() {
        let b = SineBasis::new(PI, 4, 16).unwrap();
        let params = ModelParams::unforced(1.0, 0.0, 0.5, 4).unwrap();
        let d = rhs(&State::zeros(4), &params, &b).unwrap();
        assert!(d.dm.0.iter().chain(&d.dn.0).all(|&x| x == 0.0));
        assert!(d.de.0.iter().all(|z| z.norm() == 0.0));

        let mut s = State::zeros(4);
        s.e = FieldC::unit(4, 1, c(1.0, 0.0));
        let d = rhs(&s, &params, &b).unwrap();
        assert!((d.de.0[0] - c(-0.5, -2.0)).norm() < 1e-15);
    }

    #[test]
    fn rhs_is_affine_in_loads() {
        let b = SineBasis::with_default_grid(1.0, 12).unwrap();
        let s = seeded_state(&b, 2.0, 1.5, 3);
        let loaded = random_params(&b, 4);
        let bare = ModelParams::unforced(loaded.h, loaded.alpha, loaded.gamma, 12).unwrap();
        let d1 = rhs(&s, &loaded, &b).unwrap();
        let d0 = rhs(&s, &bare, &b).unwrap();
        for k in 0..12 {
            assert_eq!(d1.dn.0[k], d0.dn.0[k]);
            let scale = 1.0 + d0.dm.0[k].abs();
            assert!((d1.dm.0[k] - d0.dm.0[k] - loaded.f.0[k]).abs() <= 1e-15 * scale);
            let scale = 1.0 + d0.de.0[k].norm();
            assert!((d1.de.0[k] - d0.de.0[k] + I * loaded.g.0[k]).norm() <= 1e-15 * scale);
        }
    }

    #[test]
    fn e1_examples() {
        let b = SineBasis::new(PI, 4, 16).unwrap();
        let mut g = FieldC::zeros(4);
        g.0[1] = c(0.3, -0.2);
        let params = ModelParams::new(1.0, 0.0, 0.0, FieldR::zeros(4), g.clone()).unwrap();
        let e1 = compute_e1(&FieldR::zeros(4), &FieldC::zeros(4), &params, &b).unwrap();
        for k in 0..4 {
            assert!((e1.0[k] + I * g.0[k]).norm() < 1e-15);
        }
        let params = ModelParams::unforced(1.0, 0.0, 0.0, 4).unwrap();
        let e1 = compute_e1(&FieldR::zeros(4), &FieldC::unit(4, 1, c(1.0, 0.0)), &params, &b).unwrap();
        assert!((e1.0[0] - c(0.0, -2.0)).norm() < 1e-15);
        assert!(e1.0[1..].iter().all(|z| z.norm() < 1e-15));

        let b = SineBasis::with_default_grid(1.3, 10).unwrap();
        let s = seeded_state(&b, 2.0, 1.0, 5);
        let params = random_params(&b, 6);
        let e1 = compute_e1(&s.n, &s.e, &params, &b).unwrap();
        let d = rhs(&s, &params, &b).unwrap();
        for k in 0..10 {
            assert!((e1.0[k] - d.de.0[k]).norm() <= 1e-14 * (1.0 + d.de.0[k].norm()));
        }
    }

    #[test]
    fn energy_examples() {
        let b = SineBasis::new(PI, 4, 16).unwrap();
        let params = ModelParams::unforced(1.0, 0.0, 0.0, 4).unwrap();
        let e = energy_report(&State::zeros(4), &params, &b, None).unwrap();
        assert_eq!((e.v0, e.v1, e.ef, e.mass_e), (0.0, 0.0, 0.0, 0.0));
        let mut s = State::zeros(4);
        s.e = FieldC::unit(4, 1, c(1.0, 0.0));
        let e = energy_report(&s, &params, &b, None).unwrap();
        assert!((e.v1 - 2.0).abs() < 1e-14);
        assert!((e.mass_e - 1.0).abs() < 1e-15);
    }

    #[test]
    fn interaction_matches_fine_quadrature() {
        let l = 1.8;
        let b = SineBasis::with_default_grid(l, 16).unwrap();
        let s = seeded_state(&b, 2.0, 2.0, 21);
        let got = interaction_energy(&s, &b).unwrap();
        let oracle = simpson(l, 40000, |x| eval_r(&s.n.0, l, x) * eval_c(&s.e.0, l, x).norm_sqr());
        assert!((got - oracle).abs() < 1e-9, "{got} vs {oracle}");
    }

    #[test]
    fn energies_match_termwise_oracle() {
        let l = 2.2;
        let b = SineBasis::with_default_grid(l, 10).unwrap();
        let s = seeded_state(&b, 2.0, 1.0, 8);
        let p = random_params(&b, 9);
        let e = energy_report(&s, &p, &b, None).unwrap();
        let lam: Vec<f64> = (1..=10).map(|k| (k as f64 * PI / l).powi(2)).collect();
        let h2 = p.h * p.h;
        let mut v0 = 0.0;
        let mut ef = 0.0;
        let mut v1 = 0.0;
        for k in 0..10 {
            let (n, m, f) = (s.n.0[k], s.m.0[k], p.f.0[k]);
            v0 += 0.5 * (m * m / lam[k] + n * n + h2 * lam[k] * n * n) - f * n / lam[k];
            ef += 0.5 * (m * m + lam[k] * n * n + h2 * lam[k] * lam[k] * n * n) - f * n;
            let ee = s.e.0[k];
            v1 += lam[k] * ee.norm_sqr() + h2 * lam[k] * lam[k] * ee.norm_sqr()
                + 2.0 * (p.g.0[k] * ee.conj()).re;
        }
        v1 += simpson(l, 40000, |x| eval_r(&s.n.0, l, x) * eval_c(&s.e.0, l, x).norm_sqr());
        assert!((e.v0 - v0).abs() < 1e-12 * (1.0 + v0.abs()));
        assert!((e.ef - ef).abs() < 1e-12 * (1.0 + ef.abs()));
        assert!((e.v1 - v1).abs() < 1e-9 * (1.0 + v1.abs()));
        assert!((e.v - e.v0 - e.v1).abs() == 0.0);
    }

    #[test]
    fn lyapunov_examples() {
        let b = SineBasis::new(PI, 6, 32).unwrap();
        let p = ModelParams::unforced(0.8, 0.5, 0.5, 6).unwrap();
        assert_eq!(lyapunov_w(&State::zeros(6), &p, &b, 0.3), 0.0);
        let s = seeded_state(&b, 2.0, 1.0, 1);
        let e = energy_report(&s, &p, &b, None).unwrap();
        assert!((lyapunov_w(&s, &p, &b, 0.0) - e.ef).abs() < 1e-14);
        let mut oracle = 0.0;
        for k in 0..6 {
            let l = ((k + 1) * (k + 1)) as f64;
            let (n, m) = (s.n.0[k], s.m.0[k]);
            oracle += 0.5 * (m * m + l * n * n + 0.64 * l * l * n * n) + 0.1 * (n * m + 0.25 * n * n);
        }
        assert!((lyapunov_w(&s, &p, &b, 0.1) - oracle).abs() < 1e-13);
    }

    #[test]
    fn energy_exceeds_v_plus_by_a_bounded_amount() {
        // V - V_+ = (n,|E|^2) - (f,n)_{-1} + 2 Re(g,E) stays bounded on a
        // bounded ensemble and grows with the E amplitude
        let b = SineBasis::with_default_grid(PI, 16).unwrap();
        let p = random_params(&b, 77);
        let mut worst: [f64; 3] = [0.0; 3];
        for (i, radius) in [0.5, 1.0, 2.0].iter().enumerate() {
            for seed in 0..20 {
                let s = seeded_state(&b, 3.0, *radius, seed);
                let e = energy_report(&s, &p, &b, None).unwrap();
                let h2 = p.h * p.h;
                let vplus = 0.5
                    * (b.norm_hs(&s.m, -1.0).unwrap().powi(2)
                        + b.norm_hs(&s.n, 0.0).unwrap().powi(2)
                        + h2 * b.norm_hs(&s.n, 1.0).unwrap().powi(2))
                    + b.norm_hs(&s.e, 1.0).unwrap().powi(2)
                    + h2 * b.norm_hs(&s.e, 2.0).unwrap().powi(2);
                worst[i] = worst[i].max((e.v - vplus).abs());
            }
        }
        assert!(worst.iter().all(|w| w.is_finite() && *w < 100.0));
        assert!(worst[0] <= worst[2]);
    }

    #[test]
    fn balance_r_matches_quadrature() {
        let l = 1.5;
        let b = SineBasis::with_default_grid(l, 12).unwrap();
        let s = seeded_state(&b, 2.0, 1.0, 31);
        let p = random_params(&b, 32);
        let et = rhs(&s, &p, &b).unwrap().de;
        let got = balance_r(&s, &et, &b).unwrap();
        let dx = |x: f64| -> Complex64 {
            s.e.0
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    let k = (i + 1) as f64 * PI / l;
                    a * ((2.0 / l).sqrt() * k * (k * x).cos())
                })
                .sum()
        };
        let lap: Vec<Complex64> = s.e.0.iter().zip(b.lambda()).map(|(e, lam)| -e * *lam).collect();
        let oracle = simpson(l, 40000, |x| {
            let m = eval_r(&s.m.0, l, x);
            let e = eval_c(&s.e.0, l, x);
            let w = I * eval_c(&et.0, l, x) + eval_c(&lap, l, x);
            m * dx(x).norm_sqr() + (e * m * w.conj()).re
        });
        assert!((got - oracle).abs() < 1e-8 * (1.0 + oracle.abs()), "{got} vs {oracle}");
    }
}
