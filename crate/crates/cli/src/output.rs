//! CSV tables and the run manifest. Every file is written through a
//! temporary name and renamed into place.

use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use rtrg_core::cache::write_atomic;
use rtrg_core::evolution::EvolutionRun;
use rtrg_core::hotrg::QSweepRow;

use crate::error::CliResult;

/// 17 significant digits, enough to round-trip an f64.
pub fn num(x: f64) -> String {
    format!("{:.16e}", x)
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| std::io::Error::other(e.to_string()).into())
}

/// Collects written files under one output directory.
pub struct OutputDir {
    pub root: PathBuf,
    pub files: Vec<PathBuf>,
}

impl OutputDir {
    pub fn new(root: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(root)?;
        Ok(OutputDir { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let path = self.root.join(name);
        write_atomic(&path, bytes)?;
        self.files.push(path.clone());
        Ok(path)
    }
}

/// `(index, re_E, im_E, source)`.
pub fn spectrum_csv(sources: &[(&str, &[C64])]) -> CliResult<Vec<u8>> {
    let rows = sources.iter().flat_map(|(src, es)| {
        es.iter().enumerate().map(move |(i, e)| vec![i.to_string(), num(e.re), num(e.im), src.to_string()])
    });
    table(&["index", "re_E", "im_E", "source"], rows)
}

/// `(step, t, site, n_expect)`.
pub fn occupation_csv(run: &EvolutionRun) -> CliResult<Vec<u8>> {
    let rows = run.series.iter().flat_map(|r| {
        r.n_expect.iter().enumerate().map(move |(j, n)| vec![r.step.to_string(), num(r.time), j.to_string(), num(*n)])
    });
    table(&["step", "t", "site", "n_expect"], rows)
}

/// `(step, t, cbar, norm)`; an undefined centre is an empty field.
pub fn cbar_csv(run: &EvolutionRun) -> CliResult<Vec<u8>> {
    let rows = run.series.iter().map(|r| vec![r.step.to_string(), num(r.time), opt(r.cbar), num(r.norm)]);
    table(&["step", "t", "cbar", "norm"], rows)
}

/// `(step, t, mean_abs_diff, cbar_abs_diff)`.
pub fn diff_csv(run: &EvolutionRun, report: &crate::diff::DiffReport) -> CliResult<Vec<u8>> {
    let rows = run
        .series
        .iter()
        .zip(report.per_step.iter().zip(&report.cbar_abs_diff))
        .map(|(r, (d, c))| vec![r.step.to_string(), num(r.time), num(*d), opt(*c)]);
    table(&["step", "t", "mean_abs_diff", "cbar_abs_diff"], rows)
}

/// `(theta, eigen_index, value)` for one level.
pub fn q_sweep_csv(rows: &[QSweepRow], level: usize) -> CliResult<Vec<u8>> {
    let out = rows.iter().filter(|r| r.level == level).flat_map(|r| {
        r.eigenvalues.iter().enumerate().map(move |(i, v)| vec![num(r.theta), i.to_string(), num(*v)])
    });
    table(&["theta", "eigen_index", "value"], out)
}

/// One row per (λ, d_cut).
pub fn scan_csv(rows: &[(f64, usize, f64, Option<f64>)]) -> CliResult<Vec<u8>> {
    let out = rows.iter().map(|&(l, d, n, ed)| {
        vec![num(l), d.to_string(), num(n), opt(ed), opt(ed.map(|e| (n - e).abs()))]
    });
    table(&["lambda", "d_cut", "nbar", "ed_nbar", "abs_diff"], out)
}
