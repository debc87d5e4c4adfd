//! Sine eigenbasis of the Dirichlet Laplacian on `(0, L)`.
//!
//! A field is stored by its coefficients on the orthonormal eigenfunctions
//! `e_k(x) = sqrt(2/L) sin(k pi x / L)`, `k = 1..=N`, with eigenvalues
//! `lambda_k = (k pi / L)^2`. Sobolev norms `||A^{s/2} u||` are diagonal sums
//! in this basis.
//!
//! Grid work happens on the uniform grid `x_j = j L / M`. Products of two
//! band-limited sine (or cosine) series are cosine series of degree at most
//! `2N`, which the `M >= 4N` grid resolves without aliasing. Their Galerkin
//! projection back onto the first `N` sine modes is evaluated with the exact
//! cosine-to-sine overlap integrals, so `P_N(uv)` carries no quadrature error.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Real field: sine coefficients of `n`, `n_t` or the load `f`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldR(pub Vec<f64>);

/// Complex field: sine coefficients of `E`, `E_t` or the load `g`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldC(pub Vec<Complex64>);

/// Common access to real and complex coefficient vectors.
pub trait SpectralField: Clone {
    type Scalar: Copy + Send + Sync;

    fn coeffs(&self) -> &[Self::Scalar];
    fn from_coeffs(coeffs: Vec<Self::Scalar>) -> Self;
    fn abs2(x: Self::Scalar) -> f64;

    #[doc(hidden)]
    fn synthesize(basis: &SineBasis, coeffs: &[Self::Scalar]) -> Vec<Self::Scalar>;
    #[doc(hidden)]
    fn analyze(basis: &SineBasis, values: &[Self::Scalar]) -> Vec<Self::Scalar>;

    fn len(&self) -> usize {
        self.coeffs().len()
    }

    fn is_empty(&self) -> bool {
        self.coeffs().is_empty()
    }
}

impl FieldR {
    pub fn zeros(n: usize) -> Self {
        FieldR(vec![0.0; n])
    }

    /// Field with a single nonzero coefficient on mode `k` (1-based).
    pub fn unit(n: usize, k: usize, value: f64) -> Self {
        let mut f = Self::zeros(n);
        f.0[k - 1] = value;
        f
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl FieldC {
    pub fn zeros(n: usize) -> Self {
        FieldC(vec![Complex64::new(0.0, 0.0); n])
    }

    pub fn unit(n: usize, k: usize, value: Complex64) -> Self {
        let mut f = Self::zeros(n);
        f.0[k - 1] = value;
        f
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl SpectralField for FieldR {
    type Scalar = f64;

    fn coeffs(&self) -> &[f64] {
        &self.0
    }

    fn from_coeffs(coeffs: Vec<f64>) -> Self {
        FieldR(coeffs)
    }

    fn abs2(x: f64) -> f64 {
        x * x
    }

    fn synthesize(basis: &SineBasis, coeffs: &[f64]) -> Vec<f64> {
        basis.sine_sum_real(coeffs, 1..basis.grid)
    }

    fn analyze(basis: &SineBasis, values: &[f64]) -> Vec<f64> {
        // values[j - 1] = u(x_j); the sine kernel is symmetric in (j, k)
        let scale = basis.length / basis.grid as f64;
        basis
            .sine_sum_real(values, 1..basis.modes + 1)
            .into_iter()
            .map(|v| v * scale)
            .collect()
    }
}

impl SpectralField for FieldC {
    type Scalar = Complex64;

    fn coeffs(&self) -> &[Complex64] {
        &self.0
    }

    fn from_coeffs(coeffs: Vec<Complex64>) -> Self {
        FieldC(coeffs)
    }

    fn abs2(x: Complex64) -> f64 {
        x.norm_sqr()
    }

    fn synthesize(basis: &SineBasis, coeffs: &[Complex64]) -> Vec<Complex64> {
        basis.sine_sum_complex(coeffs, 1..basis.grid)
    }

    fn analyze(basis: &SineBasis, values: &[Complex64]) -> Vec<Complex64> {
        let scale = basis.length / basis.grid as f64;
        basis
            .sine_sum_complex(values, 1..basis.modes + 1)
            .into_iter()
            .map(|v| v * scale)
            .collect()
    }
}

/// Dirichlet-Laplacian eigenbasis with its padded collocation grid.
#[derive(Clone)]
pub struct SineBasis {
    length: f64,
    modes: usize,
    grid: usize,
    lambda: Vec<f64>,
    nodes: Vec<f64>,
    fft_forward: Arc<dyn Fft<f64>>,
    fft_inverse: Arc<dyn Fft<f64>>,
    // row-major N x (2N + 1): sqrt(2/L) * int_0^L cos(a pi x/L) sin(k pi x/L) dx
    cos_to_sine: Vec<f64>,
}

impl fmt::Debug for SineBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SineBasis")
            .field("length", &self.length)
            .field("modes", &self.modes)
            .field("grid", &self.grid)
            .finish()
    }
}

/// Default grid size: `4N` rounded up to the next power of two.
pub fn default_grid(modes: usize) -> usize {
    (4 * modes.max(1)).next_power_of_two()
}

impl SineBasis {
    /// Builds the basis for interval length `length`, `modes` retained modes
    /// and a grid of `grid` cells (`grid - 1` interior nodes).
    pub fn new(length: f64, modes: usize, grid: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::config("L", format!("interval length must be positive, got {length}")));
        }
        if modes == 0 {
            return Err(Error::config("N", "mode count must be at least 1"));
        }
        if grid < 4 * modes {
            return Err(Error::config(
                "M",
                format!("grid size {grid} is below 4N = {}", 4 * modes),
            ));
        }
        let lambda = (1..=modes)
            .map(|k| {
                let w = k as f64 * PI / length;
                w * w
            })
            .collect();
        let nodes = (1..grid)
            .map(|j| j as f64 * length / grid as f64)
            .collect();
        let mut planner = FftPlanner::new();
        let fft_forward = planner.plan_fft_forward(2 * grid);
        let fft_inverse = planner.plan_fft_inverse(2 * grid);

        let width = 2 * modes + 1;
        let amp = (2.0 / length).sqrt() * length / PI;
        let mut cos_to_sine = vec![0.0; modes * width];
        for k in 1..=modes {
            for a in 0..width {
                if (k + a) % 2 == 1 {
                    let (kf, af) = (k as f64, a as f64);
                    cos_to_sine[(k - 1) * width + a] = amp * 2.0 * kf / (kf * kf - af * af);
                }
            }
        }

        Ok(SineBasis {
            length,
            modes,
            grid,
            lambda,
            nodes,
            fft_forward,
            fft_inverse,
            cos_to_sine,
        })
    }

    /// Basis with the default grid size.
    pub fn with_default_grid(length: f64, modes: usize) -> Result<Self> {
        Self::new(length, modes, default_grid(modes))
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    /// Eigenvalues `lambda_k`, `k = 1..=N`.
    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// Interior nodes `x_j = j L / M`, `j = 1..M`.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Spacing of the collocation grid.
    pub fn spacing(&self) -> f64 {
        self.length / self.grid as f64
    }

    pub(crate) fn check_len(&self, got: usize) -> Result<()> {
        if got != self.modes {
            return Err(Error::LengthMismatch {
                expected: self.modes,
                got,
            });
        }
        Ok(())
    }

    /// Evaluates the sine expansion at the interior nodes.
    pub fn to_physical<F: SpectralField>(&self, field: &F) -> Result<Vec<F::Scalar>> {
        self.check_len(field.len())?;
        Ok(F::synthesize(self, field.coeffs()))
    }

    /// Discrete sine analysis of interior grid values, truncated to `N` modes.
    pub fn to_spectral<F: SpectralField>(&self, values: &[F::Scalar]) -> Result<F> {
        if values.len() != self.grid - 1 {
            return Err(Error::LengthMismatch {
                expected: self.grid - 1,
                got: values.len(),
            });
        }
        Ok(F::from_coeffs(F::analyze(self, values)))
    }

    /// `||u||_s = sqrt(sum_k lambda_k^s |u_k|^2)`.
    pub fn norm_hs<F: SpectralField>(&self, field: &F, s: f64) -> Result<f64> {
        self.check_len(field.len())?;
        Ok(self.norm_hs_sq_unchecked(field.coeffs().iter().map(|&c| F::abs2(c)), s).sqrt())
    }

    /// Squared Sobolev norm, without the length check.
    pub(crate) fn norm_hs_sq_unchecked(&self, abs2: impl Iterator<Item = f64>, s: f64) -> f64 {
        let mut acc = 0.0;
        if s == 0.0 {
            for a in abs2 {
                acc += a;
            }
        } else {
            for (a, l) in abs2.zip(&self.lambda) {
                acc += lambda_pow(*l, s) * a;
            }
        }
        acc
    }

    /// Pairing `sum_k lambda_k^s f_k n_k` of two real fields.
    pub fn inner_dual(&self, f: &FieldR, n: &FieldR, s: f64) -> Result<f64> {
        self.check_len(f.len())?;
        self.check_len(n.len())?;
        Ok(f
            .0
            .iter()
            .zip(&n.0)
            .zip(&self.lambda)
            .map(|((a, b), l)| lambda_pow(*l, s) * a * b)
            .sum())
    }

    /// Real field values on the full grid `j = 0..=M` (endpoints included).
    pub(crate) fn sine_values_real(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut v = self.sine_sum_real(coeffs, 0..self.grid + 1);
        v[0] = 0.0;
        v[self.grid] = 0.0;
        v
    }

    pub(crate) fn sine_values_complex(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let mut v = self.sine_sum_complex(coeffs, 0..self.grid + 1);
        v[0] = Complex64::new(0.0, 0.0);
        v[self.grid] = Complex64::new(0.0, 0.0);
        v
    }

    /// Values of `d/dx` of a complex sine series on `j = 0..=M`.
    pub(crate) fn derivative_values_complex(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let scaled: Vec<Complex64> = coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * ((i + 1) as f64 * PI / self.length))
            .collect();
        let norm = (2.0 / self.length).sqrt();
        let mut buf = self.load_buffer(&scaled);
        let mut back = buf.clone();
        self.fft_inverse.process(&mut buf);
        self.fft_forward.process(&mut back);
        (0..=self.grid)
            .map(|j| (buf[j] + back[j]) * (0.5 * norm))
            .collect()
    }

    /// Galerkin projection `P_N` of a real cosine polynomial of degree
    /// `<= 2N` sampled on `j = 0..=M`.
    pub(crate) fn project_product_real(&self, values: &[f64]) -> FieldR {
        let complex: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let cos = self.cosine_analysis(&complex);
        let cos_re: Vec<f64> = cos.iter().map(|c| c.re).collect();
        let width = 2 * self.modes + 1;
        // overlaps vanish unless k + a is odd; row k holds mode k + 1
        let out = (0..self.modes)
            .map(|k| {
                let row = &self.cos_to_sine[k * width..(k + 1) * width];
                (k % 2..width).step_by(2).map(|a| row[a] * cos_re[a]).sum()
            })
            .collect();
        FieldR(out)
    }

    pub(crate) fn project_product_complex(&self, values: &[Complex64]) -> FieldC {
        let cos = self.cosine_analysis(values);
        let width = 2 * self.modes + 1;
        let out = (0..self.modes)
            .map(|k| {
                let row = &self.cos_to_sine[k * width..(k + 1) * width];
                let mut acc = Complex64::new(0.0, 0.0);
                for a in (k % 2..width).step_by(2) {
                    acc += cos[a] * row[a];
                }
                acc
            })
            .collect();
        FieldC(out)
    }

    /// Matrix of `E -> P_N (n E)` in the sine basis, row-major `N x N`:
    /// `A_kl = int n e_k e_l = (c_{|k-l|} - c_{k+l}) / L` with the cosine
    /// moments `c_a = int n cos(a pi x / L)`.
    pub(crate) fn multiplication_matrix(&self, n: &[f64]) -> Vec<f64> {
        let width = 2 * self.modes + 1;
        let mut moments = vec![0.0; width];
        for (j, nj) in n.iter().enumerate() {
            let row = &self.cos_to_sine[j * width..(j + 1) * width];
            for a in (j % 2..width).step_by(2) {
                moments[a] += nj * row[a];
            }
        }
        let inv = 1.0 / self.length;
        let mut out = vec![0.0; self.modes * self.modes];
        for k in 0..self.modes {
            for l in 0..self.modes {
                out[k * self.modes + l] = (moments[k.abs_diff(l)] - moments[k + l + 2]) * inv;
            }
        }
        out
    }

    /// `q_k = sum_{l, l'} s_{l l'} Re(E_l conj E_l') int e_k e_l e_l'` for a
    /// symmetric `N x N` weight `s`; all-ones weights give `P_N |E|^2`.
    pub(crate) fn weighted_density(&self, e: &[Complex64], weights: &[f64]) -> FieldR {
        let n = self.modes;
        let width = 2 * n + 1;
        let mut diag = vec![0.0; width];
        for l in 0..n {
            for lp in 0..n {
                let p = weights[l * n + lp] * (e[l] * e[lp].conj()).re;
                diag[l.abs_diff(lp)] += p;
                diag[l + lp + 2] -= p;
            }
        }
        let inv = 1.0 / self.length;
        FieldR(
            (0..n)
                .map(|k| {
                    let row = &self.cos_to_sine[k * width..(k + 1) * width];
                    (k % 2..width).step_by(2).map(|a| row[a] * diag[a]).sum::<f64>() * inv
                })
                .collect(),
        )
    }

    // Cosine coefficients c_0..=c_{2N} of a cosine polynomial sampled at
    // j = 0..=M, with u(x) = sum_a c_a cos(a pi x / L).
    fn cosine_analysis(&self, values: &[Complex64]) -> Vec<Complex64> {
        let m = self.grid;
        debug_assert_eq!(values.len(), m + 1);
        let mut buf = vec![Complex64::new(0.0, 0.0); 2 * m];
        buf[..=m].copy_from_slice(values);
        for j in 1..m {
            buf[2 * m - j] = values[j];
        }
        self.fft_forward.process(&mut buf);
        let inv = 1.0 / m as f64;
        let mut out: Vec<Complex64> = buf[..=2 * self.modes].iter().map(|c| c * inv).collect();
        out[0] *= 0.5;
        out
    }

    fn load_buffer(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); 2 * self.grid];
        buf[1..=coeffs.len()].copy_from_slice(coeffs);
        buf
    }

    // sum_k c_k sqrt(2/L) sin(pi k j / M) for j in `range`; c is 1-based.
    fn sine_sum_real(&self, coeffs: &[f64], range: std::ops::Range<usize>) -> Vec<f64> {
        let complex: Vec<Complex64> = coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect();
        let mut buf = self.load_buffer(&complex);
        self.fft_inverse.process(&mut buf);
        let norm = (2.0 / self.length).sqrt();
        range.map(|j| buf[j].im * norm).collect()
    }

    fn sine_sum_complex(&self, coeffs: &[Complex64], range: std::ops::Range<usize>) -> Vec<Complex64> {
        let mut plus = self.load_buffer(coeffs);
        let mut minus = plus.clone();
        self.fft_inverse.process(&mut plus);
        self.fft_forward.process(&mut minus);
        let norm = (2.0 / self.length).sqrt();
        // sin(t) = (e^{it} - e^{-it}) / 2i
        let half_over_i = Complex64::new(0.0, -0.5 * norm);
        range.map(|j| (plus[j] - minus[j]) * half_over_i).collect()
    }
}

#[inline]
fn lambda_pow(lambda: f64, s: f64) -> f64 {
    if s == 1.0 {
        lambda
    } else if s == 2.0 {
        lambda * lambda
    } else if s == -1.0 {
        1.0 / lambda
    } else if s == 0.0 {
        1.0
    } else {
        lambda.powf(s)
    }
}
