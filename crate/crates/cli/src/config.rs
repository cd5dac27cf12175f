//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rtrg_core::ising::{Boundary, ModelParams, QVariant};
use rtrg_core::states::{Sector, WavePacketSpec};
use rtrg_core::tebd::TebdConfig;

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Spectrum,
    LambdaScan,
    EvolveOne,
    EvolveTwo,
    Longitudinal,
    QSweep,
    TebdCompare,
}

impl Kind {
    pub const ALL: [Kind; 7] =
        [Kind::Spectrum, Kind::LambdaScan, Kind::EvolveOne, Kind::EvolveTwo, Kind::Longitudinal, Kind::QSweep, Kind::TebdCompare];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Spectrum => "spectrum",
            Kind::LambdaScan => "lambda-scan",
            Kind::EvolveOne => "evolve-one",
            Kind::EvolveTwo => "evolve-two",
            Kind::Longitudinal => "longitudinal",
            Kind::QSweep => "q-sweep",
            Kind::TebdCompare => "tebd-compare",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kind {
    type Err = CliError;
    fn from_str(s: &str) -> CliResult<Self> {
        Kind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| CliError::field("kind", format!("unknown experiment `{}`", s)))
    }
}

/// Reference the HOTRG result is compared against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Oracle {
    EdExact,
    EdTrotter,
    Tebd,
    None,
}

impl fmt::Display for Oracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Oracle::EdExact => "ed-exact",
            Oracle::EdTrotter => "ed-trotter",
            Oracle::Tebd => "tebd",
            Oracle::None => "none",
        })
    }
}

impl FromStr for Oracle {
    type Err = CliError;
    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "ed-exact" => Ok(Oracle::EdExact),
            "ed-trotter" => Ok(Oracle::EdTrotter),
            "tebd" => Ok(Oracle::Tebd),
            "none" => Ok(Oracle::None),
            _ => Err(CliError::field("oracle", format!("unknown oracle `{}`", s))),
        }
    }
}

/// Normalisation of the percent difference.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PercentConvention {
    /// `100 Σ|a−b| / Σ|b|`
    Aggregate,
    /// `100 mean(|a−b|/|b|)` over entries with `b ≠ 0`
    Pointwise,
}

impl FromStr for PercentConvention {
    type Err = CliError;
    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "aggregate" => Ok(PercentConvention::Aggregate),
            "pointwise" => Ok(PercentConvention::Pointwise),
            _ => Err(CliError::field("pct_convention", format!("unknown convention `{}`", s))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub params: ModelParams,
    pub packets: Vec<WavePacketSpec>,
    pub steps: usize,
    pub oracle: Oracle,
    pub out: PathBuf,
    pub cache_dir: Option<PathBuf>,
    pub lambdas: Vec<f64>,
    pub dcuts: Vec<usize>,
    pub n_theta: usize,
    pub levels: usize,
    pub tebd: TebdConfig,
    pub renormalize: bool,
    pub pct_convention: PercentConvention,
}

/// Parse a real number, accepting multiples of π such as `-3pi/8` or `0.5*pi`.
pub fn parse_real(field: &'static str, s: &str) -> CliResult<f64> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_ascii_lowercase();
    if let Ok(x) = t.parse::<f64>() {
        return Ok(x);
    }
    let bad = || CliError::field(field, format!("cannot parse `{}` as a number", s));
    let pos = t.find("pi").ok_or_else(bad)?;
    let (head, tail) = (&t[..pos], &t[pos + 2..]);
    let head = head.trim_end_matches('*');
    let coef = match head {
        "" | "+" => 1.0,
        "-" => -1.0,
        h => h.parse::<f64>().map_err(|_| bad())?,
    };
    let denom = match tail {
        "" => 1.0,
        t if t.starts_with('/') => t[1..].parse::<f64>().map_err(|_| bad())?,
        _ => return Err(bad()),
    };
    Ok(coef * PI / denom)
}

fn parse_list<T>(field: &'static str, s: &str, one: impl Fn(&str) -> CliResult<T>) -> CliResult<Vec<T>> {
    let out = s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(one).collect::<CliResult<Vec<_>>>()?;
    if out.is_empty() {
        return Err(CliError::field(field, "empty list".into()));
    }
    Ok(out)
}

fn parse_usize(field: &'static str, s: &str) -> CliResult<usize> {
    s.trim().parse().map_err(|_| CliError::field(field, format!("`{}` is not a non-negative integer", s)))
}

fn parse_bool(field: &'static str, s: &str) -> CliResult<bool> {
    match s.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(CliError::field(field, format!("`{}` is not a boolean", s))),
    }
}

/// `k, x, sigma, sector`, e.g. `3pi/8, 0, 2, even`.
pub fn parse_packet(field: &'static str, s: &str) -> CliResult<WavePacketSpec> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err(CliError::field(field, "expected `k, x, sigma, sector`".into()));
    }
    Ok(WavePacketSpec {
        k_center: parse_real(field, parts[0])?,
        x_center: parse_usize(field, parts[1])?,
        sigma: parse_real(field, parts[2])?,
        sector: parts[3].parse::<Sector>().map_err(|e| CliError::field(field, e.to_string()))?,
    })
}

/// Read `key = value` lines; `#` starts a comment.
pub fn parse_pairs(text: &str) -> CliResult<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`", no + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

impl ExperimentConfig {
    /// Defaults reproducing the reference setup of each experiment.
    pub fn defaults(kind: Kind) -> Self {
        let sector_odd = |k: f64, x: usize| WavePacketSpec { k_center: k, x_center: x, sigma: 2.0, sector: Sector::Odd };
        let sector_even = |k: f64, x: usize| WavePacketSpec { k_center: k, x_center: x, sigma: 2.0, sector: Sector::Even };
        let mut c = ExperimentConfig {
            kind,
            params: ModelParams::new(8, 0.2, 0.01, 37),
            packets: Vec::new(),
            steps: 1000,
            oracle: Oracle::EdTrotter,
            out: PathBuf::from("out").join(kind.name()),
            cache_dir: None,
            lambdas: vec![0.0, 0.2, 0.5, 1.0, 2.0],
            dcuts: vec![93, 45, 9],
            n_theta: 32,
            levels: 1,
            tebd: TebdConfig::default(),
            renormalize: false,
            pct_convention: PercentConvention::Aggregate,
        };
        match kind {
            Kind::Spectrum => {
                c.params.lambda = 0.02;
                c.oracle = Oracle::EdExact;
            }
            Kind::LambdaScan => {
                c.params.d_cut = 93;
                c.oracle = Oracle::EdExact;
            }
            Kind::EvolveOne => {
                c.params.d_cut = 93;
                c.packets = vec![sector_odd(PI / 4.0, 1)];
            }
            Kind::EvolveTwo => {
                c.packets = vec![sector_even(3.0 * PI / 8.0, 0), sector_even(-3.0 * PI / 8.0, 4)];
                c.steps = 4000;
            }
            Kind::Longitudinal => {
                c.params.d_cut = 93;
                c.params.epsilon = 0.1;
                c.packets = vec![sector_odd(PI / 4.0, 1)];
            }
            Kind::QSweep => {
                c.params.q_variant = QVariant::MMdag;
                c.oracle = Oracle::None;
            }
            Kind::TebdCompare => {
                c.params = ModelParams::new(16, 0.2, 0.01, 137);
                c.packets = vec![sector_even(7.0 * PI / 16.0, 2), sector_even(-7.0 * PI / 16.0, 12)];
                c.oracle = Oracle::Tebd;
            }
        }
        c
    }

    /// Apply one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        let p = &mut self.params;
        match key {
            "kind" => {
                let k: Kind = value.parse()?;
                if k != self.kind {
                    return Err(CliError::field("kind", format!("config is for `{}`, command is `{}`", k, self.kind)));
                }
            }
            "sites" | "n_sites" => p.n_sites = parse_usize("sites", value)?,
            "lambda" => p.lambda = parse_real("lambda", value)?,
            "dt" => p.dt = parse_real("dt", value)?,
            "epsilon" => p.epsilon = parse_real("epsilon", value)?,
            "dcut" | "d_cut" => p.d_cut = parse_usize("dcut", value)?,
            "boundary" => p.boundary = value.parse::<Boundary>().map_err(|e| CliError::field("boundary", e.to_string()))?,
            "q_variant" => p.q_variant = value.parse::<QVariant>().map_err(|e| CliError::field("q_variant", e.to_string()))?,
            "override_dt_guard" => p.override_dt_guard = parse_bool("override_dt_guard", value)?,
            "steps" => self.steps = parse_usize("steps", value)?,
            "oracle" => self.oracle = value.parse()?,
            "out" => self.out = PathBuf::from(value),
            "cache_dir" => self.cache_dir = Some(PathBuf::from(value)),
            "lambdas" => self.lambdas = parse_list("lambdas", value, |s| parse_real("lambdas", s))?,
            "dcuts" => self.dcuts = parse_list("dcuts", value, |s| parse_usize("dcuts", s))?,
            "n_theta" => self.n_theta = parse_usize("n_theta", value)?,
            "levels" => self.levels = parse_usize("levels", value)?,
            "max_bond" => self.tebd.max_bond = parse_usize("max_bond", value)?,
            "cutoff" => self.tebd.cutoff = parse_real("cutoff", value)?,
            "tebd_boundary" => {
                self.tebd.boundary = value.parse::<Boundary>().map_err(|e| CliError::field("tebd_boundary", e.to_string()))?
            }
            "renormalize" => self.renormalize = parse_bool("renormalize", value)?,
            "pct_convention" => self.pct_convention = value.parse()?,
            "packet_a" | "packet_b" => {
                let idx = usize::from(key == "packet_b");
                let field = if idx == 0 { "packet_a" } else { "packet_b" };
                let spec = parse_packet(field, value)?;
                if self.packets.len() <= idx {
                    self.packets.resize(idx + 1, spec);
                }
                self.packets[idx] = spec;
            }
            "packets" => {
                self.packets = match value.trim() {
                    "1" | "one" => self.packets.iter().take(1).copied().collect(),
                    "2" | "two" => self.packets.clone(),
                    other => return Err(CliError::field("packets", format!("`{}`: expected 1 or 2", other))),
                }
            }
            _ => return Err(CliError::field("config", format!("unknown key `{}`", key))),
        }
        Ok(())
    }

    pub fn apply_pairs(&mut self, pairs: &BTreeMap<String, String>) -> CliResult<()> {
        pairs.iter().try_for_each(|(k, v)| self.set(k, v))
    }

    /// Check kind-specific requirements.
    pub fn validate(&self) -> CliResult<()> {
        self.params.validate()?;
        let n = self.params.n_sites;
        for (i, p) in self.packets.iter().enumerate() {
            p.validate(n).map_err(|e| CliError::field(if i == 0 { "packet_a" } else { "packet_b" }, e.to_string()))?;
        }
        let needs = match self.kind {
            Kind::EvolveOne | Kind::Longitudinal => 1,
            Kind::EvolveTwo => 2,
            Kind::TebdCompare => 1,
            _ => 0,
        };
        if self.packets.len() < needs {
            return Err(CliError::field("packet_a", format!("{} needs {} packet(s)", self.kind, needs)));
        }
        if matches!(self.kind, Kind::EvolveOne | Kind::EvolveTwo | Kind::Longitudinal | Kind::TebdCompare) && self.steps == 0 {
            return Err(CliError::field("steps", "must be at least 1".into()));
        }
        if self.kind == Kind::TebdCompare && self.oracle != Oracle::Tebd {
            return Err(CliError::field("oracle", "tebd-compare compares against tebd".into()));
        }
        if self.kind == Kind::QSweep && (self.n_theta < 2 || self.levels < 1) {
            return Err(CliError::field("n_theta", "need at least two angles and one level".into()));
        }
        if matches!(self.oracle, Oracle::EdExact | Oracle::EdTrotter) && n > rtrg_core::states::MAX_DENSE_SITES {
            return Err(CliError::field(
                "oracle",
                format!("dense reference limited to {} sites", rtrg_core::states::MAX_DENSE_SITES),
            ));
        }
        if self.lambdas.iter().any(|&l| !(l >= 0.0)) {
            return Err(CliError::field("lambdas", "values must be non-negative".into()));
        }
        Ok(())
    }

    /// Every setting as `key=value` lines in a fixed order.
    pub fn fingerprint(&self) -> String {
        let packets: Vec<String> = self
            .packets
            .iter()
            .map(|p| format!("{:e},{},{:e},{}", p.k_center, p.x_center, p.sigma, p.sector))
            .collect();
        format!(
            "kind={};{};packets=[{}];steps={};oracle={};lambdas={:?};dcuts={:?};n_theta={};levels={};max_bond={};cutoff={:e};tebd_boundary={};renormalize={}",
            self.kind,
            self.params.fingerprint(),
            packets.join("|"),
            self.steps,
            self.oracle,
            self.lambdas,
            self.dcuts,
            self.n_theta,
            self.levels,
            self.tebd.max_bond,
            self.tebd.cutoff,
            self.tebd.boundary,
            self.renormalize
        )
    }
}
