use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rtrg_cli::config::{parse_pairs, ExperimentConfig, Kind};
use rtrg_cli::error::{CliError, CliResult};
use rtrg_cli::experiments::run;

#[derive(Parser)]
#[command(name = "rtrg", version, about = "Real-time tensor renormalization group experiments for the transverse-field Ising ring")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Energies from the coarse-grained evolution operator against exact diagonalization
    Spectrum(Common),
    /// Vacuum occupation over a grid of couplings and bond caps
    LambdaScan(Common),
    /// One wave packet
    EvolveOne(Common),
    /// Two colliding wave packets
    EvolveTwo(Common),
    /// One wave packet under an added longitudinal field
    Longitudinal(Common),
    /// Eigenvalues of the truncation matrix as the angle goes from imaginary to real time
    QSweep(Common),
    /// Two packets against a matrix product state reference
    TebdCompare(Common),
}

#[derive(Args)]
struct Common {
    /// File of `key = value` lines
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "RTRG_CACHE_DIR")]
    cache_dir: Option<PathBuf>,
    /// Do not read or write the operator cache
    #[arg(long)]
    no_cache: bool,
    #[arg(long)]
    sites: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    dt: Option<String>,
    #[arg(long)]
    dcut: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    steps: Option<String>,
    /// ed-exact, ed-trotter, tebd or none
    #[arg(long)]
    oracle: Option<String>,
    /// Allow time steps above the accuracy guard
    #[arg(long)]
    override_dt_guard: bool,
    /// Extra `key=value` settings, applied last
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

fn build(kind: Kind, c: Common) -> CliResult<ExperimentConfig> {
    let mut cfg = ExperimentConfig::defaults(kind);
    if let Some(path) = &c.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {}", path.display(), e)))?;
        cfg.apply_pairs(&parse_pairs(&text)?)?;
    }
    let flags = [
        ("sites", c.sites),
        ("lambda", c.lambda),
        ("dt", c.dt),
        ("dcut", c.dcut),
        ("epsilon", c.epsilon),
        ("steps", c.steps),
        ("oracle", c.oracle),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            cfg.set(k, &v)?;
        }
    }
    for s in &c.sets {
        let (k, v) = s.split_once('=').ok_or_else(|| CliError::field("set", format!("`{}`: expected KEY=VALUE", s)))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if c.override_dt_guard {
        cfg.params.override_dt_guard = true;
    }
    if let Some(out) = c.out {
        cfg.out = out;
    }
    if c.no_cache {
        cfg.cache_dir = None;
    } else if let Some(dir) = c.cache_dir {
        cfg.cache_dir = Some(dir);
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, common) = match cli.command {
        Command::Spectrum(c) => (Kind::Spectrum, c),
        Command::LambdaScan(c) => (Kind::LambdaScan, c),
        Command::EvolveOne(c) => (Kind::EvolveOne, c),
        Command::EvolveTwo(c) => (Kind::EvolveTwo, c),
        Command::Longitudinal(c) => (Kind::Longitudinal, c),
        Command::QSweep(c) => (Kind::QSweep, c),
        Command::TebdCompare(c) => (Kind::TebdCompare, c),
    };
    let result = build(kind, common).and_then(|cfg| run(&cfg).map(|o| (cfg, o)));
    match result {
        Ok((cfg, outcome)) => {
            if let Some(d) = &outcome.diff {
                println!(
                    "{}: mean |dN| = {:.3e}, mean % = {:.3e}, max |dN| = {:.3e}",
                    kind, d.mean_abs_diff, d.mean_pct_diff, d.max_abs_diff
                );
            }
            println!("wrote {} files to {}", outcome.files.len(), cfg.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
