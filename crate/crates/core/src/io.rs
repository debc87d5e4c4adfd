//! Text persistence: trajectory CSV, decimal-17 checkpoints and experiment
//! reports.
//!
//! Every float is written with 17 significant digits (`{:.16e}`), which
//! round-trips binary doubles exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::experiments::{AbsorbReport, ContractionReport, ConvergenceReport};
use crate::model::{Energies, State};
use crate::spectral::{FieldC, FieldR};
use crate::trajectory::{Accumulators, Record, TrajectoryLog};

/// Column order of the trajectory CSV.
pub const TRAJECTORY_COLUMNS: [&str; 14] = [
    "t",
    "massE",
    "V0",
    "V1",
    "V",
    "Ef",
    "Et_norm",
    "norm_H_state",
    "norm_Hstar_state",
    "acc_w_en2_dissipation",
    "acc_w_en2_work",
    "acc_w_en_dissipation",
    "acc_w_en_R",
    "im_gE",
];

pub const CHECKPOINT_VERSION: u32 = 1;

pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt17(x: Option<f64>) -> String {
    x.map(fmt17).unwrap_or_default()
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(|e| Error::io(dir, e)),
        _ => Ok(()),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    create_parent(path)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        if let csv::ErrorKind::Io(io) = e.into_kind() {
            return Error::io(path, io);
        }
        unreachable!("io kind checked above");
    }
    Error::Csv(e)
}

/// Writes the header and one row per record. States are not persisted.
pub fn write_trajectory_csv(log: &TrajectoryLog, path: &Path) -> Result<()> {
    create_parent(path)?;
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(TRAJECTORY_COLUMNS).map_err(|e| csv_err(path, e))?;
    for r in &log.records {
        let e = &r.energies;
        let row = [
            fmt17(r.t),
            fmt17(e.mass_e),
            fmt17(e.v0),
            fmt17(e.v1),
            fmt17(e.v),
            fmt17(e.ef),
            opt17(e.et_norm),
            fmt17(r.norm_h),
            opt17(r.norm_hstar),
            fmt17(r.acc.w_en2_dissipation),
            fmt17(r.acc.w_en2_work),
            fmt17(r.acc.w_en_dissipation),
            fmt17(r.acc.w_en_r),
            fmt17(r.im_ge),
        ];
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Inverse of [`write_trajectory_csv`]. The step size is not part of the
/// schema, so the returned log has `dt = 0`; `semi_strong` is set when the
/// `Et_norm` column is filled.
pub fn read_trajectory_csv(path: &Path) -> Result<TrajectoryLog> {
    let file = path.display().to_string();
    let malformed = |row: usize, column: &str, msg: String| Error::Malformed {
        file: file.clone(),
        row,
        column: column.to_string(),
        msg,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.is_empty() {
        return Err(malformed(0, "header", "file is empty".into()));
    }
    for (i, want) in TRAJECTORY_COLUMNS.iter().enumerate() {
        match headers.get(i) {
            Some(h) if h == *want => {}
            Some(h) => return Err(malformed(0, want, format!("expected header `{want}`, found `{h}`"))),
            None => return Err(malformed(0, want, "missing column".into())),
        }
    }
    if headers.len() > TRAJECTORY_COLUMNS.len() {
        return Err(malformed(0, &headers[TRAJECTORY_COLUMNS.len()], "unexpected extra column".into()));
    }

    let mut log = TrajectoryLog::new(0.0, false);
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| malformed(row, "row", e.to_string()))?;
        if rec.len() != TRAJECTORY_COLUMNS.len() {
            return Err(malformed(
                row,
                "row",
                format!("expected {} fields, found {}", TRAJECTORY_COLUMNS.len(), rec.len()),
            ));
        }
        let opt = |c: usize| -> Result<Option<f64>> {
            let raw = rec[c].trim();
            if raw.is_empty() {
                return Ok(None);
            }
            raw.parse::<f64>()
                .map(Some)
                .map_err(|_| malformed(row, TRAJECTORY_COLUMNS[c], format!("not a number: `{raw}`")))
        };
        let req = |c: usize| -> Result<f64> {
            opt(c)?.ok_or_else(|| malformed(row, TRAJECTORY_COLUMNS[c], "empty cell".into()))
        };
        let et_norm = opt(6)?;
        if et_norm.is_some() {
            log.semi_strong = true;
        }
        log.push(Record {
            t: req(0)?,
            energies: Energies {
                mass_e: req(1)?,
                v0: req(2)?,
                v1: req(3)?,
                v: req(4)?,
                ef: req(5)?,
                et_norm,
            },
            norm_h: req(7)?,
            norm_hstar: opt(8)?,
            acc: Accumulators {
                w_en2_dissipation: req(9)?,
                w_en2_work: req(10)?,
                w_en_dissipation: req(11)?,
                w_en_r: req(12)?,
            },
            im_ge: req(13)?,
            state: None,
        });
    }
    Ok(log)
}

/// Saved state plus enough context to resume or audit it.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub length: f64,
    pub h: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub state: State,
}

/// Layout: a `qzak-checkpoint <version>` line, `key = value` header lines
/// (`N`, `L`, `t`, `h`, `alpha`, `gamma`), then blocks `[n]`, `[nt]`,
/// `[re_e]`, `[im_e]` with one value per line.
pub fn checkpoint_text(c: &Checkpoint) -> String {
    let s = &c.state;
    let mut out = format!("qzak-checkpoint {CHECKPOINT_VERSION}\n");
    let _ = writeln!(out, "N = {}", s.modes());
    for (k, v) in [("L", c.length), ("t", s.t), ("h", c.h), ("alpha", c.alpha), ("gamma", c.gamma)] {
        let _ = writeln!(out, "{k} = {}", fmt17(v));
    }
    let blocks: [(&str, Vec<f64>); 4] = [
        ("n", s.n.0.clone()),
        ("nt", s.m.0.clone()),
        ("re_e", s.e.0.iter().map(|z| z.re).collect()),
        ("im_e", s.e.0.iter().map(|z| z.im).collect()),
    ];
    for (name, values) in blocks {
        let _ = writeln!(out, "[{name}]");
        for v in values {
            out.push_str(&fmt17(v));
            out.push('\n');
        }
    }
    out
}

pub fn parse_checkpoint(text: &str, file: &str) -> Result<Checkpoint> {
    let bad = |row: usize, column: &str, msg: String| Error::Malformed {
        file: file.to_string(),
        row,
        column: column.to_string(),
        msg,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, l)) if l == format!("qzak-checkpoint {CHECKPOINT_VERSION}") => {}
        Some((row, l)) => return Err(bad(row, "version", format!("unsupported header `{l}`"))),
        None => return Err(bad(0, "version", "file is empty".into())),
    }
    let mut header = |key: &str| -> Result<(usize, String)> {
        let (row, l) = lines.next().ok_or_else(|| bad(0, key, "truncated header".into()))?;
        match l.split_once('=') {
            Some((k, v)) if k.trim() == key => Ok((row, v.trim().to_string())),
            _ => Err(bad(row, key, format!("expected `{key} = ...`"))),
        }
    };
    let (row, raw) = header("N")?;
    let modes: usize = raw.parse().map_err(|_| bad(row, "N", format!("not an integer: `{raw}`")))?;
    let mut scalars = [0.0; 5];
    for (slot, key) in scalars.iter_mut().zip(["L", "t", "h", "alpha", "gamma"]) {
        let (row, raw) = header(key)?;
        *slot = raw.parse().map_err(|_| bad(row, key, format!("not a number: `{raw}`")))?;
    }
    let mut blocks = Vec::with_capacity(4);
    for name in ["n", "nt", "re_e", "im_e"] {
        match lines.next() {
            Some((_, l)) if l == format!("[{name}]") => {}
            Some((row, _)) => return Err(bad(row, name, format!("expected block `[{name}]`"))),
            None => return Err(bad(0, name, "missing block".into())),
        }
        let mut values = Vec::with_capacity(modes);
        for _ in 0..modes {
            let (row, l) = lines.next().ok_or_else(|| bad(0, name, "block too short".into()))?;
            values.push(l.parse::<f64>().map_err(|_| bad(row, name, format!("not a number: `{l}`")))?);
        }
        blocks.push(values);
    }
    if let Some((row, l)) = lines.find(|(_, l)| !l.is_empty()) {
        return Err(bad(row, "trailer", format!("unexpected content `{l}`")));
    }
    let [length, t, h, alpha, gamma] = scalars;
    let e = blocks[2].iter().zip(&blocks[3]).map(|(re, im)| Complex64::new(*re, *im)).collect();
    Ok(Checkpoint {
        length,
        h,
        alpha,
        gamma,
        state: State {
            t,
            n: FieldR(blocks[0].clone()),
            m: FieldR(blocks[1].clone()),
            e: FieldC(e),
        },
    })
}

pub fn save_checkpoint(c: &Checkpoint, path: &Path) -> Result<()> {
    write_text(path, &checkpoint_text(c))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_checkpoint(&text, &path.display().to_string())
}

/// `<root>/<first 16 hex digits of the config hash>`.
pub fn run_dir(root: &Path, config: &RunConfig) -> PathBuf {
    root.join(&config.hash()[..16])
}

/// Writes `config.txt` (canonical form) into `dir`.
pub fn write_config_echo(dir: &Path, config: &RunConfig) -> Result<()> {
    write_text(&dir.join("config.txt"), &config.canonical())
}

/// `key = value` lines.
pub fn write_summary(path: &Path, entries: &[(String, String)]) -> Result<()> {
    let mut s = String::new();
    for (k, v) in entries {
        let _ = writeln!(s, "{k} = {v}");
    }
    write_text(path, &s)
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    create_parent(path)?;
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn kv(k: impl Into<String>, v: impl ToString) -> (String, String) {
    (k.into(), v.to_string())
}

fn opt_time(t: Option<f64>) -> String {
    t.map(fmt17).unwrap_or_else(|| "none".into())
}

/// `absorb.csv` (h, alpha, gamma, load_scale, radius, t, sup_norm) and
/// `absorb_summary.txt`.
pub fn write_absorb_report(dir: &Path, report: &AbsorbReport) -> Result<()> {
    let mut rows = Vec::new();
    let mut summary = vec![kv("points", report.points.len())];
    for (i, p) in report.points.iter().enumerate() {
        let pt = p.point;
        summary.push(kv(format!("point{i}.h"), fmt17(pt.h)));
        summary.push(kv(format!("point{i}.alpha"), fmt17(pt.alpha)));
        summary.push(kv(format!("point{i}.gamma"), fmt17(pt.gamma)));
        summary.push(kv(format!("point{i}.load_scale"), fmt17(pt.load_scale)));
        summary.push(kv(format!("point{i}.ball_radius"), fmt17(p.ball_radius)));
        summary.push(kv(format!("point{i}.spread"), fmt17(p.spread)));
        summary.push(kv(format!("point{i}.radius_independent"), p.radius_independent));
        for (j, r) in p.radii.iter().enumerate() {
            let pre = format!("point{i}.radius{j}");
            summary.push(kv(format!("{pre}.radius"), fmt17(r.radius)));
            summary.push(kv(format!("{pre}.entry_time"), opt_time(r.entry_time)));
            summary.push(kv(format!("{pre}.final_max"), fmt17(r.final_max)));
            summary.push(kv(format!("{pre}.final_mean"), fmt17(r.final_mean)));
            summary.push(kv(format!("{pre}.diverged"), r.diverged.len()));
            for (t, v) in r.times.iter().zip(&r.sup_norm) {
                rows.push(vec![
                    fmt17(pt.h),
                    fmt17(pt.alpha),
                    fmt17(pt.gamma),
                    fmt17(pt.load_scale),
                    fmt17(r.radius),
                    fmt17(*t),
                    fmt17(*v),
                ]);
            }
        }
    }
    write_rows(
        &dir.join("absorb.csv"),
        &["h", "alpha", "gamma", "load_scale", "radius", "t", "sup_norm"],
        rows,
    )?;
    write_summary(&dir.join("absorb_summary.txt"), &summary)
}

/// `contraction.csv` (t, dist2_hstar, e_dist2, e_sup2) and
/// `contraction_summary.txt`; `fit_skipped = true` marks `eps = 0` runs.
pub fn write_contraction_report(dir: &Path, report: &ContractionReport) -> Result<()> {
    let rows = (0..report.times.len()).map(|i| {
        vec![
            fmt17(report.times[i]),
            fmt17(report.dist2_hstar[i]),
            fmt17(report.e_dist2[i]),
            fmt17(report.e_sup2[i]),
        ]
    });
    write_rows(&dir.join("contraction.csv"), &["t", "dist2_hstar", "e_dist2", "e_sup2"], rows)?;
    let mut summary = vec![
        kv("valid", report.valid),
        kv("max_norm", fmt17(report.max_norm)),
        kv("e_seminorm", fmt17(report.e_seminorm)),
        kv("fit_skipped", report.fit.is_none()),
    ];
    if let Some(fit) = report.fit {
        summary.push(kv("a", fmt17(fit.a)));
        summary.push(kv("kappa", fmt17(fit.kappa)));
        summary.push(kv("b", fmt17(fit.b)));
        summary.push(kv("holds", fit.holds));
    }
    write_summary(&dir.join("contraction_summary.txt"), &summary)
}

/// `convergence.csv` (study, resolution, error) and `convergence_summary.txt`.
pub fn write_convergence_report(dir: &Path, report: &ConvergenceReport) -> Result<()> {
    let rows = report
        .n_errors
        .iter()
        .map(|(n, e)| vec!["N".to_string(), n.to_string(), fmt17(*e)])
        .chain(report.dt_errors.iter().map(|(dt, e)| vec!["dt".to_string(), fmt17(*dt), fmt17(*e)]));
    write_rows(&dir.join("convergence.csv"), &["study", "resolution", "error"], rows)?;
    let join = |v: &[f64]| v.iter().map(|x| fmt17(*x)).collect::<Vec<_>>().join(", ");
    write_summary(
        &dir.join("convergence_summary.txt"),
        &[
            kv("n_ref", report.n_ref),
            kv("dt_ref", fmt17(report.dt_ref)),
            kv("n_ratios", join(&report.n_ratios)),
            kv("dt_orders", join(&report.dt_orders)),
        ],
    )
}
