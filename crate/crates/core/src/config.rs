//! Line-oriented `key = value` run configuration.
//!
//! ```text
//! # comment
//! L = pi
//! N = 64
//! h = 1
//! alpha = 0.5
//! gamma = 0.5
//! f = 1:0.5 3:-0.25          # mode:value pairs
//! g = seeded 6 22 0.1        # seeded decay seed scale
//! initial = seeded           # or: explicit, with n0 / nt0 / e0 mode lists
//! radius = 1
//! decay = 6
//! T = 10
//! ```
//!
//! Complex mode entries are written `k:re:im`. Every value is validated on
//! parse and errors name the key and the line it came from. The canonical
//! form (see [`RunConfig::canonical`]) lists every key in a fixed order with
//! shortest round-trip float formatting; its SHA-256 is the config hash.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::PathBuf;

use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::experiments::{ContractionSpec, ConvergenceSpec, ParamPoint, SweepSpec};
use crate::initial::{seeded_field_c, seeded_field_r, seeded_state};
use crate::model::{ModelParams, State};
use crate::spectral::{default_grid, FieldC, FieldR, SineBasis};

/// Load or coefficient specification.
#[derive(Clone, Debug, PartialEq)]
pub enum FieldSpec {
    Zero,
    /// `(k, re, im)` with 1-based mode index.
    Modes(Vec<(usize, f64, f64)>),
    /// `scale * k^{-decay} * normal draws` from `seed`.
    Seeded { decay: f64, seed: u64, scale: f64 },
}

impl FieldSpec {
    fn check(&self, key: &str, line: Option<usize>, modes: usize, complex: bool) -> Result<()> {
        match self {
            FieldSpec::Zero => Ok(()),
            FieldSpec::Modes(list) => {
                for &(k, re, im) in list {
                    if k == 0 || k > modes {
                        return Err(at(key, line, format!("mode {k} outside 1..={modes}")));
                    }
                    if !complex && im != 0.0 {
                        return Err(at(key, line, "real field takes k:value entries"));
                    }
                    if !(re.is_finite() && im.is_finite()) {
                        return Err(at(key, line, "coefficients must be finite"));
                    }
                }
                Ok(())
            }
            FieldSpec::Seeded { decay, scale, .. } => {
                if !(decay.is_finite() && scale.is_finite()) {
                    return Err(at(key, line, "decay and scale must be finite"));
                }
                Ok(())
            }
        }
    }

    pub fn real(&self, modes: usize) -> FieldR {
        match self {
            FieldSpec::Zero => FieldR::zeros(modes),
            FieldSpec::Modes(list) => {
                let mut f = FieldR::zeros(modes);
                for &(k, re, _) in list {
                    f.0[k - 1] += re;
                }
                f
            }
            FieldSpec::Seeded { decay, seed, scale } => {
                FieldR(seeded_field_r(modes, *decay, *seed).0.into_iter().map(|x| x * scale).collect())
            }
        }
    }

    pub fn complex(&self, modes: usize) -> FieldC {
        match self {
            FieldSpec::Zero => FieldC::zeros(modes),
            FieldSpec::Modes(list) => {
                let mut g = FieldC::zeros(modes);
                for &(k, re, im) in list {
                    g.0[k - 1] += Complex64::new(re, im);
                }
                g
            }
            FieldSpec::Seeded { decay, seed, scale } => {
                FieldC(seeded_field_c(modes, *decay, *seed).0.into_iter().map(|z| z * scale).collect())
            }
        }
    }

    fn render(&self, complex: bool) -> String {
        match self {
            FieldSpec::Zero => "none".into(),
            FieldSpec::Modes(list) => list
                .iter()
                .map(|(k, re, im)| {
                    if complex {
                        format!("{k}:{re:?}:{im:?}")
                    } else {
                        format!("{k}:{re:?}")
                    }
                })
                .collect::<Vec<_>>()
                .join(" "),
            FieldSpec::Seeded { decay, seed, scale } => format!("seeded {decay:?} {seed} {scale:?}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitialSpec {
    /// Seeded data with decay `k^{-decay}` scaled to phase-space norm `radius`.
    Seeded { decay: f64, radius: f64 },
    Explicit { n: FieldSpec, nt: FieldSpec, e: FieldSpec },
}

/// Settings used only by the multi-run subcommands.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub radii: Vec<f64>,
    pub ensemble: usize,
    pub sweep_h: Vec<f64>,
    pub sweep_alpha: Vec<f64>,
    pub sweep_gamma: Vec<f64>,
    pub sweep_load_scale: Vec<f64>,
    pub eps: f64,
    pub warmup: f64,
    pub bound: f64,
    pub ns: Vec<usize>,
    pub dts: Vec<f64>,
    pub n_dt: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub length: f64,
    pub modes: usize,
    /// Explicit grid size; `None` means the smallest power of two `>= 4N`.
    pub grid: Option<usize>,
    pub h: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub f: FieldSpec,
    pub g: FieldSpec,
    pub initial: InitialSpec,
    pub dt: f64,
    pub t_end: f64,
    pub cadence: usize,
    pub semi_strong: bool,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub experiment: ExperimentConfig,
}

fn at(key: &str, line: Option<usize>, msg: impl Into<String>) -> Error {
    Error::Config {
        key: key.into(),
        line,
        msg: msg.into(),
    }
}

const KEYS: &[&str] = &[
    "L", "N", "M", "h", "alpha", "gamma", "f", "g", "initial", "decay", "radius", "n0", "nt0", "e0", "dt", "T",
    "cadence", "semi_strong", "seed", "out", "radii", "ensemble", "sweep_h", "sweep_alpha", "sweep_gamma",
    "sweep_load_scale", "eps", "warmup", "bound", "ns", "dts", "n_dt",
];

struct Entries {
    values: HashMap<String, (String, usize)>,
}

impl Entries {
    fn line(&self, key: &str) -> Option<usize> {
        self.values.get(key).map(|v| v.1)
    }

    fn take<T>(&self, key: &str, default: T, parse: impl Fn(&str) -> Option<T>, what: &str) -> Result<T> {
        match self.values.get(key) {
            None => Ok(default),
            Some((raw, line)) => {
                parse(raw).ok_or_else(|| at(key, Some(*line), format!("expected {what}, got `{raw}`")))
            }
        }
    }

    fn float(&self, key: &str, default: f64) -> Result<f64> {
        self.take(key, default, parse_f64, "a number")
    }

    fn floats(&self, key: &str, default: Vec<f64>) -> Result<Vec<f64>> {
        self.take(key, default, |s| list(s, parse_f64), "a list of numbers")
    }

    fn field(&self, key: &str, complex: bool) -> Result<FieldSpec> {
        self.take(key, FieldSpec::Zero, |s| parse_field(s, complex), "`none`, k:value entries or `seeded decay seed scale`")
    }
}

fn parse_f64(s: &str) -> Option<f64> {
    let s = s.trim();
    let v = match s {
        "pi" => PI,
        "-pi" => -PI,
        _ => s.parse().ok()?,
    };
    v.is_finite().then_some(v)
}

fn list<T>(s: &str, item: impl Fn(&str) -> Option<T>) -> Option<Vec<T>> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(item)
        .collect()
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "true" | "on" | "yes" | "1" => Some(true),
        "false" | "off" | "no" | "0" => Some(false),
        _ => None,
    }
}

fn parse_field(s: &str, complex: bool) -> Option<FieldSpec> {
    let mut words = s.split_whitespace();
    match words.next()? {
        "none" | "0" => words.next().is_none().then_some(FieldSpec::Zero),
        "seeded" => {
            let decay = parse_f64(words.next()?)?;
            let seed = words.next()?.parse().ok()?;
            let scale = parse_f64(words.next()?)?;
            words.next().is_none().then_some(FieldSpec::Seeded { decay, seed, scale })
        }
        _ => {
            let entries = list(s, |tok| {
                let mut parts = tok.split(':');
                let k = parts.next()?.parse().ok()?;
                let re = parse_f64(parts.next()?)?;
                let im = match parts.next() {
                    Some(v) if complex => parse_f64(v)?,
                    Some(_) => return None,
                    None => 0.0,
                };
                parts.next().is_none().then_some((k, re, im))
            })?;
            (!entries.is_empty()).then_some(FieldSpec::Modes(entries))
        }
    }
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut values = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| at(content, Some(line), "expected `key = value`"))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(at(key, Some(line), "unknown key"));
        }
        if values.insert(key.to_string(), (value.trim().to_string(), line)).is_some() {
            return Err(at(key, Some(line), "key given twice"));
        }
    }
    let e = Entries { values };

    let initial = match e.values.get("initial") {
        None => return Err(at("initial", None, "initial data spec required")),
        Some((v, line)) => match v.as_str() {
            "seeded" => {
                for key in ["n0", "nt0", "e0"] {
                    if let Some(l) = e.line(key) {
                        return Err(at(key, Some(l), "only valid with `initial = explicit`"));
                    }
                }
                InitialSpec::Seeded {
                    decay: e.float("decay", 3.0)?,
                    radius: e.float("radius", 1.0)?,
                }
            }
            "explicit" => {
                for key in ["decay", "radius"] {
                    if let Some(l) = e.line(key) {
                        return Err(at(key, Some(l), "only valid with `initial = seeded`"));
                    }
                }
                InitialSpec::Explicit {
                    n: e.field("n0", false)?,
                    nt: e.field("nt0", false)?,
                    e: e.field("e0", true)?,
                }
            }
            other => return Err(at("initial", Some(*line), format!("expected `seeded` or `explicit`, got `{other}`"))),
        },
    };

    let h = e.float("h", 1.0)?;
    let alpha = e.float("alpha", 0.0)?;
    let gamma = e.float("gamma", 0.0)?;
    let usize_of = |s: &str| s.parse::<usize>().ok();
    let cfg = RunConfig {
        length: e.float("L", PI)?,
        modes: e.take("N", 64, usize_of, "a positive integer")?,
        grid: e.take("M", None, |s| usize_of(s).map(Some), "a positive integer")?,
        h,
        alpha,
        gamma,
        f: e.field("f", false)?,
        g: e.field("g", true)?,
        initial,
        dt: e.float("dt", 1e-3)?,
        t_end: e.float("T", 1.0)?,
        cadence: e.take("cadence", 10, usize_of, "a positive integer")?,
        semi_strong: e.take("semi_strong", false, parse_bool, "true or false")?,
        seed: e.take("seed", 0, |s| s.parse().ok(), "an unsigned integer")?,
        out: e.take("out", None, |s| (!s.is_empty()).then(|| Some(PathBuf::from(s))), "a path")?,
        experiment: ExperimentConfig {
            radii: e.floats("radii", vec![1.0, 10.0])?,
            ensemble: e.take("ensemble", 8, usize_of, "a positive integer")?,
            sweep_h: e.floats("sweep_h", vec![h])?,
            sweep_alpha: e.floats("sweep_alpha", vec![alpha])?,
            sweep_gamma: e.floats("sweep_gamma", vec![gamma])?,
            sweep_load_scale: e.floats("sweep_load_scale", vec![1.0])?,
            eps: e.float("eps", 1e-3)?,
            warmup: e.float("warmup", 20.0)?,
            bound: e.float("bound", 1e3)?,
            ns: e.take("ns", vec![8, 16, 32], |s| list(s, usize_of), "a list of positive integers")?,
            dts: e.floats("dts", vec![4e-3, 2e-3, 1e-3])?,
            n_dt: e.take("n_dt", 16, usize_of, "a positive integer")?,
        },
    };
    cfg.validate_with(|key| e.line(key))?;
    Ok(cfg)
}

impl RunConfig {
    /// Checks every invariant; used after parsing and after CLI overrides.
    pub fn validate(&self) -> Result<()> {
        self.validate_with(|_| None)
    }

    fn validate_with(&self, line: impl Fn(&str) -> Option<usize>) -> Result<()> {
        let bad = |key: &str, msg: String| Err(at(key, line(key), msg));
        if !(self.length > 0.0) {
            return bad("L", format!("must be positive, got {}", self.length));
        }
        if self.modes == 0 {
            return bad("N", "must be at least 1".into());
        }
        if let Some(m) = self.grid {
            if m < 4 * self.modes {
                return bad("M", format!("grid {m} is smaller than 4N = {}", 4 * self.modes));
            }
        }
        if !(self.h > 0.0) {
            return bad("h", format!("must be positive, got {}", self.h));
        }
        if !(self.alpha >= 0.0) {
            return bad("alpha", format!("must be non-negative, got {}", self.alpha));
        }
        if !(self.gamma >= 0.0) {
            return bad("gamma", format!("must be non-negative, got {}", self.gamma));
        }
        if !(self.dt > 0.0) {
            return bad("dt", format!("must be positive, got {}", self.dt));
        }
        if !(self.t_end >= self.dt) {
            return bad("T", format!("horizon {} is shorter than dt = {}", self.t_end, self.dt));
        }
        if self.cadence == 0 {
            return bad("cadence", "must be at least 1".into());
        }
        self.f.check("f", line("f"), self.modes, false)?;
        self.g.check("g", line("g"), self.modes, true)?;
        match &self.initial {
            InitialSpec::Seeded { decay, radius } => {
                if !(*radius >= 0.0) {
                    return bad("radius", format!("must be non-negative, got {radius}"));
                }
                if !decay.is_finite() {
                    return bad("decay", "must be finite".into());
                }
            }
            InitialSpec::Explicit { n, nt, e } => {
                n.check("n0", line("n0"), self.modes, false)?;
                nt.check("nt0", line("nt0"), self.modes, false)?;
                e.check("e0", line("e0"), self.modes, true)?;
            }
        }
        let x = &self.experiment;
        if x.radii.is_empty() || x.radii.iter().any(|r| !(*r > 0.0)) {
            return bad("radii", "radii must be positive".into());
        }
        if x.ensemble == 0 {
            return bad("ensemble", "must be at least 1".into());
        }
        for (key, v) in [
            ("sweep_h", &x.sweep_h),
            ("sweep_alpha", &x.sweep_alpha),
            ("sweep_gamma", &x.sweep_gamma),
            ("sweep_load_scale", &x.sweep_load_scale),
        ] {
            if v.is_empty() {
                return bad(key, "list is empty".into());
            }
        }
        if x.sweep_h.iter().any(|h| !(*h > 0.0)) {
            return bad("sweep_h", "values must be positive".into());
        }
        if !(x.eps >= 0.0) {
            return bad("eps", format!("must be non-negative, got {}", x.eps));
        }
        if !(x.warmup >= 0.0) {
            return bad("warmup", format!("must be non-negative, got {}", x.warmup));
        }
        if !(x.bound > 0.0) {
            return bad("bound", format!("must be positive, got {}", x.bound));
        }
        if x.ns.is_empty() || x.ns.contains(&0) {
            return bad("ns", "need positive resolutions".into());
        }
        if x.dts.is_empty() || x.dts.iter().any(|d| !(*d > 0.0)) {
            return bad("dts", "need positive step sizes".into());
        }
        if x.n_dt == 0 {
            return bad("n_dt", "must be at least 1".into());
        }
        Ok(())
    }

    /// Every key in fixed order, one per line. Re-parses to an equal config.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        let floats = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        put("L", format!("{:?}", self.length));
        put("N", self.modes.to_string());
        if let Some(m) = self.grid {
            put("M", m.to_string());
        }
        put("h", format!("{:?}", self.h));
        put("alpha", format!("{:?}", self.alpha));
        put("gamma", format!("{:?}", self.gamma));
        put("f", self.f.render(false));
        put("g", self.g.render(true));
        match &self.initial {
            InitialSpec::Seeded { decay, radius } => {
                put("initial", "seeded".into());
                put("decay", format!("{decay:?}"));
                put("radius", format!("{radius:?}"));
            }
            InitialSpec::Explicit { n, nt, e } => {
                put("initial", "explicit".into());
                put("n0", n.render(false));
                put("nt0", nt.render(false));
                put("e0", e.render(true));
            }
        }
        put("dt", format!("{:?}", self.dt));
        put("T", format!("{:?}", self.t_end));
        put("cadence", self.cadence.to_string());
        put("semi_strong", self.semi_strong.to_string());
        put("seed", self.seed.to_string());
        if let Some(out) = &self.out {
            put("out", out.display().to_string());
        }
        let x = &self.experiment;
        put("radii", floats(&x.radii));
        put("ensemble", x.ensemble.to_string());
        put("sweep_h", floats(&x.sweep_h));
        put("sweep_alpha", floats(&x.sweep_alpha));
        put("sweep_gamma", floats(&x.sweep_gamma));
        put("sweep_load_scale", floats(&x.sweep_load_scale));
        put("eps", format!("{:?}", x.eps));
        put("warmup", format!("{:?}", x.warmup));
        put("bound", format!("{:?}", x.bound));
        put("ns", x.ns.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(", "));
        put("dts", floats(&x.dts));
        put("n_dt", x.n_dt.to_string());
        s
    }

    /// Hex SHA-256 of the canonical UTF-8 bytes.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn basis(&self) -> Result<SineBasis> {
        SineBasis::new(self.length, self.modes, self.grid.unwrap_or(default_grid(self.modes)))
    }

    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.h, self.alpha, self.gamma, self.f.real(self.modes), self.g.complex(self.modes))
    }

    pub fn initial_state(&self, basis: &SineBasis) -> State {
        match &self.initial {
            InitialSpec::Seeded { decay, radius } => seeded_state(basis, *decay, *radius, self.seed),
            InitialSpec::Explicit { n, nt, e } => State {
                t: 0.0,
                n: n.real(self.modes),
                m: nt.real(self.modes),
                e: e.complex(self.modes),
            },
        }
    }

    fn decay(&self) -> f64 {
        match self.initial {
            InitialSpec::Seeded { decay, .. } => decay,
            InitialSpec::Explicit { .. } => 3.0,
        }
    }

    fn radius(&self) -> f64 {
        match self.initial {
            InitialSpec::Seeded { radius, .. } => radius,
            InitialSpec::Explicit { .. } => 1.0,
        }
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec> {
        let x = &self.experiment;
        let mut grid = Vec::new();
        for &h in &x.sweep_h {
            for &alpha in &x.sweep_alpha {
                for &gamma in &x.sweep_gamma {
                    for &load_scale in &x.sweep_load_scale {
                        grid.push(ParamPoint { h, alpha, gamma, load_scale });
                    }
                }
            }
        }
        Ok(SweepSpec {
            basis: self.basis()?,
            f: self.f.real(self.modes),
            g: self.g.complex(self.modes),
            grid,
            ensemble: x.ensemble,
            radii: x.radii.clone(),
            horizon: self.t_end,
            dt: self.dt,
            cadence: self.cadence,
            decay: self.decay(),
            seed: self.seed,
        })
    }

    /// Absorbing-set sweep at the single configured parameter point.
    pub fn absorb_spec(&self) -> Result<SweepSpec> {
        let mut spec = self.sweep_spec()?;
        spec.grid = vec![ParamPoint {
            h: self.h,
            alpha: self.alpha,
            gamma: self.gamma,
            load_scale: 1.0,
        }];
        Ok(spec)
    }

    pub fn contraction_spec(&self) -> Result<ContractionSpec> {
        Ok(ContractionSpec {
            basis: self.basis()?,
            params: self.params()?,
            dt: self.dt,
            cadence: self.cadence,
            warmup: self.experiment.warmup,
            horizon: self.t_end,
            radius: self.radius(),
            decay: self.decay(),
            seed: self.seed,
            eps: self.experiment.eps,
            bound: self.experiment.bound,
        })
    }

    pub fn convergence_spec(&self) -> ConvergenceSpec {
        let x = &self.experiment;
        let n_max = x.ns.iter().chain([&x.n_dt]).copied().max().unwrap_or(1);
        ConvergenceSpec {
            length: self.length,
            h: self.h,
            alpha: self.alpha,
            gamma: self.gamma,
            f: self.f.real(n_max),
            g: self.g.complex(n_max),
            ns: x.ns.clone(),
            dts: x.dts.clone(),
            n_dt: x.n_dt,
            t_end: self.t_end,
            decay: self.decay(),
            radius: self.radius(),
            seed: self.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const FULL: &str = "\
L = 2.5
N = 16
M = 128
h = 0.75
alpha = 0.5
gamma = 0.25   # damping
f = 1:0.5 3:-0.25
g = seeded 6 22 0.1
initial = seeded
decay = 6
radius = 2
dt = 2e-3
T = 4
cadence = 5
semi_strong = on
seed = 9
radii = 1, 5, 10
ns = 4, 8
";

    #[test]
    fn empty_input_needs_initial_data() {
        let err = parse_config("").unwrap_err().to_string();
        assert!(err.contains("initial data spec required"), "{err}");
    }

    #[test]
    fn defaults_are_applied() {
        let c = parse_config("initial = seeded\n").unwrap();
        assert_eq!(c.length, PI);
        assert_eq!((c.modes, c.dt, c.cadence, c.semi_strong), (64, 1e-3, 10, false));
        assert_eq!(c.basis().unwrap().grid(), 256);
        assert_eq!(c.f, FieldSpec::Zero);
    }

    #[test]
    fn errors_name_key_and_line() {
        let err = parse_config("initial = seeded\n\ngamma = -1\n").unwrap_err();
        match err {
            Error::Config { key, line, .. } => assert_eq!((key.as_str(), line), ("gamma", Some(3))),
            other => panic!("{other}"),
        }
        let err = parse_config("initial = seeded\nfoo = 1\n").unwrap_err();
        assert!(matches!(err, Error::Config { ref key, line: Some(2), .. } if key == "foo"), "{err}");
        let err = parse_config("initial = seeded\ndt = fast\n").unwrap_err();
        assert!(matches!(err, Error::Config { ref key, line: Some(2), .. } if key == "dt"), "{err}");
        let err = parse_config("initial = seeded\nN = 8\nf = 9:1\n").unwrap_err();
        assert!(matches!(err, Error::Config { ref key, line: Some(3), .. } if key == "f"), "{err}");
        let err = parse_config("initial = seeded\nf = 1:1:2\n").unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "f"), "{err}");
        let err = parse_config("initial = seeded\nN = 8\nM = 16\n").unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "M"), "{err}");
        let err = parse_config("initial = seeded\nn0 = 1:1\n").unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "n0"), "{err}");
        assert!(parse_config("initial = seeded\nT = 1e-4\n").is_err());
        assert!(parse_config("initial = seeded\nh = 1\nh = 2\n").is_err());
    }

    #[test]
    fn explicit_initial_data() {
        let c = parse_config("N = 4\ninitial = explicit\nn0 = 2:0.5\ne0 = 1:0:1 4:0.25\n").unwrap();
        let s = c.initial_state(&c.basis().unwrap());
        assert_eq!(s.n.0, vec![0.0, 0.5, 0.0, 0.0]);
        assert_eq!(s.m.0, vec![0.0; 4]);
        assert_eq!(s.e.0[0], Complex64::new(0.0, 1.0));
        assert_eq!(s.e.0[3], Complex64::new(0.25, 0.0));
    }

    #[test]
    fn full_config_round_trips_through_canonical_form() {
        let c = parse_config(FULL).unwrap();
        assert_eq!(c.grid, Some(128));
        assert!(c.semi_strong);
        let text = c.canonical();
        let again = parse_config(&text).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.canonical(), text);
        assert_eq!(again.hash(), c.hash());
        assert_eq!(c.hash().len(), 64);
    }

    #[test]
    fn hash_is_pinned() {
        // the canonical bytes and their digest must not change across platforms
        let c = parse_config("initial = seeded\n").unwrap();
        assert!(c.canonical().starts_with("L = 3.141592653589793\nN = 64\nh = 1.0\n"));
        let direct: String = Sha256::digest(c.canonical().as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(c.hash(), direct);
    }

    #[test]
    fn hash_tracks_content() {
        let a = parse_config("initial = seeded\n").unwrap();
        let b = parse_config("initial = seeded\ndt = 5e-4\n").unwrap();
        assert_ne!(a.hash(), b.hash());
        let c = parse_config("# comment\n  initial = seeded  \n\n").unwrap();
        assert_eq!(a.hash(), c.hash());
    }

    #[test]
    fn specs_follow_the_config() {
        let c = parse_config(FULL).unwrap();
        let sweep = c.sweep_spec().unwrap();
        assert_eq!(sweep.grid.len(), 1);
        assert_eq!(sweep.radii, vec![1.0, 5.0, 10.0]);
        assert_eq!(sweep.decay, 6.0);
        let conv = c.convergence_spec();
        assert_eq!(conv.f.0.len(), 16);
        assert_eq!(conv.f.0[2], -0.25);
        let p = c.params().unwrap();
        assert_eq!(p.f.0[0], 0.5);
        assert_eq!(p.g.0[0], seeded_field_c(16, 6.0, 22).0[0] * 0.1);
    }

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![-1e6..1e6f64, (-300i32..300).prop_map(|e| 10f64.powi(e))]
    }

    proptest! {
        #[test]
        fn random_configs_round_trip(
            length in 0.1..10.0f64,
            modes in 1usize..40,
            alpha in 0.0..5.0f64,
            dt in 1e-5..1e-2f64,
            cadence in 1usize..50,
            coeffs in prop::collection::vec((finite(), finite()), 0..4),
            seed in any::<u64>(),
        ) {
            let g = if coeffs.is_empty() {
                FieldSpec::Zero
            } else {
                FieldSpec::Modes(coeffs.iter().enumerate().map(|(i, (re, im))| ((i % modes) + 1, *re, *im)).collect())
            };
            let c = RunConfig {
                length,
                modes,
                grid: None,
                h: 1.0,
                alpha,
                gamma: alpha / 3.0,
                f: FieldSpec::Seeded { decay: 4.0, seed, scale: 0.1 },
                g,
                initial: InitialSpec::Seeded { decay: 3.0, radius: 1.5 },
                dt,
                t_end: 1.0,
                cadence,
                semi_strong: seed % 2 == 0,
                seed,
                out: None,
                experiment: parse_config("initial = seeded").unwrap().experiment,
            };
            c.validate().unwrap();
            let again = parse_config(&c.canonical()).unwrap();
            prop_assert_eq!(again, c);
        }
    }
}
