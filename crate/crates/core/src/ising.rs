//! Model parameters of the transverse-field Ising chain and the map onto a
//! single time slice of the anisotropic classical Ising network.

use std::f64::consts::FRAC_PI_4;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

/// Largest time step accepted without an explicit override.
pub const DT_GUARD: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Boundary {
    Periodic,
    Open,
}

/// Which real symmetric matrix is built from `M` to select the kept states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum QVariant {
    /// `Re[M Mᵀ]`, non-degenerate at real time.
    ReMMT,
    /// `M M†`, the Euclidean choice.
    MMdag,
    /// `Im[M M†]`
    ImMMdag,
    /// `Im[M Mᵀ]`
    ImMMT,
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Boundary::Periodic => "periodic",
            Boundary::Open => "open",
        })
    }
}

impl FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "periodic" | "pbc" => Ok(Boundary::Periodic),
            "open" | "obc" => Ok(Boundary::Open),
            other => Err(Error::InvalidParam { field: "boundary", reason: format!("unknown value `{}`", other) }),
        }
    }
}

impl fmt::Display for QVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QVariant::ReMMT => "ReMMT",
            QVariant::MMdag => "MMdag",
            QVariant::ImMMdag => "ImMMdag",
            QVariant::ImMMT => "ImMMT",
        })
    }
}

impl FromStr for QVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['_', '-', '[', ']', ' '], "").as_str() {
            "remmt" => Ok(QVariant::ReMMT),
            "mmdag" | "mmdagger" => Ok(QVariant::MMdag),
            "immmdag" | "immmdagger" => Ok(QVariant::ImMMdag),
            "immmt" => Ok(QVariant::ImMMT),
            _ => Err(Error::InvalidParam { field: "q_variant", reason: format!("unknown value `{}`", s) }),
        }
    }
}

/// Parameters of one chain and of its coarse-grained time-evolution operator.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub n_sites: usize,
    /// Nearest-neighbour coupling λ (transverse field fixed to one).
    pub lambda: f64,
    pub dt: f64,
    /// Longitudinal field ε.
    pub epsilon: f64,
    pub d_cut: usize,
    pub boundary: Boundary,
    pub q_variant: QVariant,
    pub override_dt_guard: bool,
}

impl ModelParams {
    pub fn new(n_sites: usize, lambda: f64, dt: f64, d_cut: usize) -> Self {
        Self {
            n_sites,
            lambda,
            dt,
            epsilon: 0.0,
            d_cut,
            boundary: Boundary::Periodic,
            q_variant: QVariant::ReMMT,
            override_dt_guard: false,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn with_q_variant(mut self, q_variant: QVariant) -> Self {
        self.q_variant = q_variant;
        self
    }

    pub fn with_dt_override(mut self, allow: bool) -> Self {
        self.override_dt_guard = allow;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field, reason: &str| Err(Error::InvalidParam { field, reason: reason.to_string() });
        if self.n_sites < 2 || !self.n_sites.is_power_of_two() {
            return bad("n_sites", "must be a power of two, at least 2");
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad("lambda", "must be finite and non-negative");
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad("dt", "must be finite and positive");
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return bad("epsilon", "must be finite and non-negative");
        }
        if self.d_cut < 1 {
            return bad("d_cut", "must be at least 1");
        }
        if self.dt > DT_GUARD && !self.override_dt_guard {
            return Err(Error::DtGuard { dt: self.dt, limit: DT_GUARD });
        }
        Ok(())
    }

    /// Number of coarse-graining levels, log₂ of the chain length.
    pub fn levels(&self) -> usize {
        self.n_sites.trailing_zeros() as usize
    }

    /// Canonical text fingerprint covering every field bit-exactly.
    pub fn fingerprint(&self) -> String {
        format!(
            "params-v1;n_sites={};lambda={:016x};dt={:016x};epsilon={:016x};d_cut={};boundary={};q_variant={};override_dt_guard={}",
            self.n_sites,
            self.lambda.to_bits(),
            self.dt.to_bits(),
            self.epsilon.to_bits(),
            self.d_cut,
            self.boundary,
            self.q_variant,
            self.override_dt_guard
        )
    }
}

/// Spatial and temporal couplings of the classical network.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassicalCouplings {
    pub beta_s: C64,
    pub beta_tau: C64,
}

impl ClassicalCouplings {
    pub fn tanh_s(&self) -> C64 {
        self.beta_s.tanh()
    }

    pub fn tanh_tau(&self) -> C64 {
        self.beta_tau.tanh()
    }
}

/// Real-time couplings `β_s = iλΔt`, `β_τ = −ln(Δt)/2 − iπ/4`.
pub fn quantum_to_classical(p: &ModelParams) -> Result<ClassicalCouplings> {
    if !(p.dt.is_finite() && p.dt > 0.0) {
        return Err(Error::InvalidParam { field: "dt", reason: "must be finite and positive".into() });
    }
    Ok(ClassicalCouplings {
        beta_s: C64::new(0.0, p.lambda * p.dt),
        beta_tau: C64::new(-p.dt.ln() / 2.0, -FRAC_PI_4),
    })
}

/// Couplings for a (possibly complex) Euclidean step Δτ:
/// `β_s = λΔτ` and `tanh β_τ = e^{−2Δτ}`.
///
/// A real Δτ is the classical imaginary-time network; `Δτ = iΔt` recovers the
/// real-time map up to O(Δt³) in the temporal weight.
pub fn euclidean_couplings(lambda: f64, dtau: C64) -> ClassicalCouplings {
    ClassicalCouplings { beta_s: dtau * lambda, beta_tau: (-2.0 * dtau).exp().atanh() }
}

/// Rank-4 site tensor with legs (left, right, bottom, top).
///
/// `T[i,j,k,l] = (√tanh β_s)^{i+j} (√tanh β_τ)^{k+l}` on even-parity index
/// sets and zero otherwise; the square roots use the principal branch.
pub fn fundamental_tensor(c: &ClassicalCouplings) -> DenseTensor {
    let ss = c.tanh_s().sqrt();
    let st = c.tanh_tau().sqrt();
    DenseTensor::from_fn(&[2, 2, 2, 2], |idx| {
        let (h, v) = (idx[0] + idx[1], idx[2] + idx[3]);
        if (h + v) % 2 == 1 {
            C64::new(0.0, 0.0)
        } else {
            ss.powu(h as u32) * st.powu(v as u32)
        }
    })
}

/// `cos^{N_s}(λΔt) e^{iΔt N_s}`, the constant relating the traced time slice
/// to the time-evolution operator.
pub fn teo_prefactor(p: &ModelParams) -> C64 {
    let n = p.n_sites as f64;
    let magnitude = (p.lambda * p.dt).cos().powi(p.n_sites as i32);
    C64::from_polar(1.0, p.dt * n) * magnitude
}
