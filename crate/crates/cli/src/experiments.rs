//! Experiment drivers shared by the binary and the acceptance suite.

use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use ndarray::Array1;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde_json::{json, Value};

use rtrg_core::cache::{load_or_build, CacheStatus};
use rtrg_core::ed::{build_hamiltonian, dense_evolve, dense_packet, dense_spectrum, exact_teo, ground_state, occupations, trotter_teo};
use rtrg_core::evolution::{evolve, longitudinal_unitary, scan_row, spectrum, spectrum_of, EvolutionRun, EvolveOptions};
use rtrg_core::hotrg::{build_teo, q_sweep, CoarseTEO, QSweepRow};
use rtrg_core::ising::ModelParams;
use rtrg_core::states::{gaussian_packet, two_packets, vacuum_state};
use rtrg_core::tebd::{ground_state_mps, packet_mps, tebd_evolve, GateSet};

use crate::config::{ExperimentConfig, Kind, Oracle};
use crate::diff::{diff, DiffReport};
use crate::error::{CliError, CliResult};
use crate::output::{cbar_csv, diff_csv, occupation_csv, q_sweep_csv, scan_csv, spectrum_csv, OutputDir};

/// What a run produced, besides its files.
#[derive(Debug, Default)]
pub struct RunOutcome {
    pub manifest: Value,
    pub files: Vec<PathBuf>,
    pub diff: Option<DiffReport>,
    pub hotrg_energies: Vec<C64>,
    pub oracle_energies: Vec<C64>,
    pub scan: Vec<(f64, usize, f64, Option<f64>)>,
    pub sweep: Vec<QSweepRow>,
    pub hotrg_run: Option<EvolutionRun>,
    pub oracle_run: Option<EvolutionRun>,
}

struct TeoInfo {
    teo: CoarseTEO,
    cache: Option<CacheStatus>,
}

fn obtain_teo(cfg: &ExperimentConfig, p: &ModelParams) -> CliResult<TeoInfo> {
    match &cfg.cache_dir {
        Some(dir) => {
            let (teo, status) = load_or_build(dir, p)?;
            Ok(TeoInfo { teo, cache: Some(status) })
        }
        None => Ok(TeoInfo { teo: build_teo(p)?, cache: None }),
    }
}

fn cache_label(s: Option<CacheStatus>) -> Value {
    match s {
        None => Value::Null,
        Some(CacheStatus::Hit) => json!("hit"),
        Some(CacheStatus::Miss) => json!("miss"),
        Some(CacheStatus::Rebuilt) => json!("rebuilt"),
    }
}

fn teo_json(info: &TeoInfo) -> Value {
    json!({
        "dim": info.teo.dim(),
        "kept_dims": info.teo.tree.levels.iter().map(|l| l.kept_dim()).collect::<Vec<_>>(),
        "discarded_weights": info.teo.discarded_weights(),
        "warnings": info.teo.warnings,
        "non_unitarity": rtrg_core::tensor::unitarity_defect(info.teo.matrix.view()),
        "cache": cache_label(info.cache),
    })
}

fn params_json(p: &ModelParams) -> Value {
    json!({
        "n_sites": p.n_sites,
        "lambda": p.lambda,
        "dt": p.dt,
        "epsilon": p.epsilon,
        "d_cut": p.d_cut,
        "boundary": p.boundary.to_string(),
        "q_variant": p.q_variant.to_string(),
        "override_dt_guard": p.override_dt_guard,
    })
}

fn diff_json(d: &DiffReport) -> Value {
    json!({
        "mean_abs_diff": d.mean_abs_diff,
        "mean_pct_diff": d.mean_pct_diff,
        "mean_pct_diff_as_fraction": d.mean_pct_diff / 100.0,
        "mean_pointwise_pct_diff": d.mean_pointwise_pct_diff,
        "max_abs_diff": d.max_abs_diff,
        "mean_cbar_abs_diff": d.mean_cbar_abs_diff(),
    })
}

/// Run one experiment, writing its CSV tables and `manifest.json` to `cfg.out`.
pub fn run(cfg: &ExperimentConfig) -> CliResult<RunOutcome> {
    cfg.validate()?;
    let started = Instant::now();
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let mut out = OutputDir::new(&cfg.out)?;
    let mut outcome = RunOutcome::default();
    let results = match cfg.kind {
        Kind::Spectrum => run_spectrum(cfg, &mut out, &mut outcome)?,
        Kind::LambdaScan => run_scan(cfg, &mut out, &mut outcome)?,
        Kind::QSweep => run_sweep(cfg, &mut out, &mut outcome)?,
        Kind::EvolveOne | Kind::EvolveTwo | Kind::Longitudinal | Kind::TebdCompare => {
            run_evolution(cfg, &mut out, &mut outcome)?
        }
    };
    let manifest = json!({
        "kind": cfg.kind.name(),
        "code_version": env!("CARGO_PKG_VERSION"),
        "config_fingerprint": cfg.fingerprint(),
        "params": params_json(&cfg.params),
        "steps": cfg.steps,
        "oracle": cfg.oracle.to_string(),
        "tebd": { "max_bond": cfg.tebd.max_bond, "cutoff": cfg.tebd.cutoff, "boundary": cfg.tebd.boundary.to_string() },
        "started_unix": started_unix,
        "wall_time_s": started.elapsed().as_secs_f64(),
        "results": results,
        "files": out.files.iter().map(|f| f.file_name().unwrap_or_default().to_string_lossy().into_owned()).collect::<Vec<_>>(),
    });
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Config(e.to_string()))?;
    out.write("manifest.json", text.as_bytes())?;
    outcome.manifest = manifest;
    outcome.files = out.files;
    Ok(outcome)
}

/// Largest |Re E_a − E_b| pairing the sorted lists index by index.
pub fn max_energy_deviation(hotrg: &[C64], reference: &[C64]) -> f64 {
    hotrg.iter().zip(reference).map(|(a, b)| (a.re - b.re).abs()).fold(0.0, f64::max)
}

fn run_spectrum(cfg: &ExperimentConfig, out: &mut OutputDir, o: &mut RunOutcome) -> CliResult<Value> {
    let info = obtain_teo(cfg, &cfg.params)?;
    let s = spectrum(&info.teo)?;
    o.hotrg_energies = s.energies.clone();
    o.oracle_energies = match cfg.oracle {
        Oracle::EdExact => dense_spectrum(&build_hamiltonian(&cfg.params)?)?.into_iter().map(|e| C64::new(e, 0.0)).collect(),
        Oracle::EdTrotter => spectrum_of(&trotter_teo(&cfg.params)?, cfg.params.dt)?.energies,
        Oracle::Tebd | Oracle::None => Vec::new(),
    };
    let mut sources: Vec<(&str, &[C64])> = vec![("hotrg", &o.hotrg_energies)];
    if !o.oracle_energies.is_empty() {
        sources.push(("ed", &o.oracle_energies));
    }
    out.write("spectrum.csv", &spectrum_csv(&sources)?)?;
    Ok(json!({
        "teo": teo_json(&info),
        "n_energies": s.energies.len(),
        "aliased": s.aliased,
        "max_abs_re_deviation": (!o.oracle_energies.is_empty()).then(|| max_energy_deviation(&o.hotrg_energies, &o.oracle_energies)),
        "max_abs_im_energy": s.energies.iter().map(|e| e.im.abs()).fold(0.0, f64::max),
    }))
}

fn ed_nbar(p: &ModelParams) -> CliResult<f64> {
    let (_, g) = ground_state(&build_hamiltonian(p)?)?;
    Ok(occupations(&g, p.n_sites).iter().sum::<f64>() / p.n_sites as f64)
}

fn run_scan(cfg: &ExperimentConfig, out: &mut OutputDir, o: &mut RunOutcome) -> CliResult<Value> {
    let with_ed = matches!(cfg.oracle, Oracle::EdExact | Oracle::EdTrotter);
    let ed: Vec<Option<f64>> = cfg
        .lambdas
        .par_iter()
        .map(|&lambda| with_ed.then(|| ed_nbar(&ModelParams { lambda, ..cfg.params.clone() })).transpose())
        .collect::<CliResult<_>>()?;
    let points: Vec<(usize, usize)> = (0..cfg.dcuts.len()).flat_map(|d| (0..cfg.lambdas.len()).map(move |l| (d, l))).collect();
    let rows = points
        .par_iter()
        .map(|&(d, l)| {
            let p = ModelParams { lambda: cfg.lambdas[l], d_cut: cfg.dcuts[d], ..cfg.params.clone() };
            let info = obtain_teo(cfg, &p)?;
            let row = scan_row(&info.teo)?;
            Ok(((p.lambda, p.d_cut, row.nbar, ed[l]), teo_json(&info)))
        })
        .collect::<CliResult<Vec<_>>>()?;
    o.scan = rows.iter().map(|(r, _)| *r).collect();
    out.write("lambda_scan.csv", &scan_csv(&o.scan)?)?;
    Ok(json!({
        "rows": rows.iter().map(|((l, d, n, e), t)| json!({"lambda": l, "d_cut": d, "nbar": n, "ed_nbar": e, "teo": t})).collect::<Vec<_>>(),
    }))
}

/// Angles evenly spaced over `[0, π/2]`.
pub fn theta_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| std::f64::consts::FRAC_PI_2 * i as f64 / (n - 1) as f64).collect()
}

fn run_sweep(cfg: &ExperimentConfig, out: &mut OutputDir, o: &mut RunOutcome) -> CliResult<Value> {
    let thetas = theta_grid(cfg.n_theta);
    let chunks: Vec<Vec<QSweepRow>> = thetas
        .par_iter()
        .map(|&th| q_sweep(&cfg.params, &[th], cfg.params.q_variant, cfg.levels))
        .collect::<rtrg_core::Result<_>>()?;
    o.sweep = chunks.into_iter().flatten().collect();
    for level in 1..=cfg.levels {
        out.write(&format!("q_sweep_level{}.csv", level), &q_sweep_csv(&o.sweep, level)?)?;
    }
    let nan_count = o.sweep.iter().flat_map(|r| r.eigenvalues.iter()).filter(|v| !v.is_finite()).count();
    let spreads: Vec<Value> = o
        .sweep
        .iter()
        .filter(|r| r.theta == *thetas.last().unwrap())
        .map(|r| {
            let (hi, lo) = (r.eigenvalues[0], *r.eigenvalues.last().unwrap());
            json!({"level": r.level, "relative_spread": (hi - lo).abs() / hi.abs().max(lo.abs()).max(f64::MIN_POSITIVE)})
        })
        .collect();
    Ok(json!({ "variant": cfg.params.q_variant.to_string(), "nan_count": nan_count, "real_time_spread": spreads }))
}

fn run_evolution(cfg: &ExperimentConfig, out: &mut OutputDir, o: &mut RunOutcome) -> CliResult<Value> {
    let p = &cfg.params;
    let info = obtain_teo(cfg, p)?;
    let teo = &info.teo;
    let single = matches!(cfg.kind, Kind::EvolveOne | Kind::Longitudinal) || cfg.packets.len() == 1;
    let vac = vacuum_state(teo)?;
    let psi = if single {
        gaussian_packet(&cfg.packets[0], &teo.tree, &vac)?
    } else {
        two_packets(&cfg.packets[0], &cfg.packets[1], &teo.tree, &vac)?
    };
    let v = (p.epsilon != 0.0).then(|| longitudinal_unitary(&teo.tree, p.epsilon, p.dt)).transpose()?;
    let opts = EvolveOptions { renormalize: cfg.renormalize, keep_snapshots: false };
    let hotrg = evolve(&psi, teo, cfg.steps, v.as_ref(), opts)?;
    out.write("hotrg_occupations.csv", &occupation_csv(&hotrg)?)?;
    out.write("hotrg_cbar.csv", &cbar_csv(&hotrg)?)?;

    let mut extra = json!({});
    let oracle = match cfg.oracle {
        Oracle::None => None,
        Oracle::EdExact | Oracle::EdTrotter => {
            let free = ModelParams { epsilon: 0.0, ..p.clone() };
            let (_, ground) = ground_state(&build_hamiltonian(&free)?)?;
            let start = dense_packets(cfg, &ground, single)?;
            let u = if cfg.oracle == Oracle::EdExact { exact_teo(&build_hamiltonian(p)?, p.dt)? } else { trotter_teo(p)? };
            Some(dense_evolve(&start, &u, cfg.steps, p.dt)?)
        }
        Oracle::Tebd => {
            if p.epsilon != 0.0 {
                return Err(CliError::field("oracle", "the tebd reference has no longitudinal field".into()));
            }
            let vac = ground_state_mps(p.n_sites, p.lambda, cfg.tebd)?;
            let mut start = packet_mps(&cfg.packets[0], &vac)?;
            if !single {
                start = packet_mps(&cfg.packets[1], &start)?;
            }
            let gates = GateSet::real_time(p.n_sites, p.lambda, p.dt, cfg.tebd.boundary);
            let (run, discarded) = tebd_evolve(&start, &gates, cfg.steps, p.dt)?;
            extra = json!({
                "tebd_total_discarded": discarded.iter().sum::<f64>(),
                "tebd_max_bond_dim": start.max_bond_dim(),
            });
            Some(run)
        }
    };
    let mut results = json!({ "teo": teo_json(&info), "oracle_extra": extra });
    if let Some(reference) = &oracle {
        out.write("oracle_occupations.csv", &occupation_csv(reference)?)?;
        out.write("oracle_cbar.csv", &cbar_csv(reference)?)?;
        let d = diff(&hotrg, reference)?;
        out.write("diff.csv", &diff_csv(&hotrg, &d)?)?;
        results["diff"] = diff_json(&d);
        o.diff = Some(d);
    }
    results["final_norm"] = json!(hotrg.series.last().map(|r| r.norm));
    results["max_imag_residue"] = json!(hotrg.max_imag_residue);
    o.hotrg_run = Some(hotrg);
    o.oracle_run = oracle;
    Ok(results)
}

fn dense_packets(cfg: &ExperimentConfig, ground: &Array1<C64>, single: bool) -> CliResult<Array1<C64>> {
    let a = dense_packet(&cfg.packets[0], ground)?;
    Ok(if single { a } else { dense_packet(&cfg.packets[1], &a)? })
}
