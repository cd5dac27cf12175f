//! Time stepping in the truncated basis and the observables derived from it.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hotrg::{build_teo, CoarseTEO, IsometryTree};
use crate::ising::ModelParams;
use crate::states::{
    energy_from_eigenvalue, number_operator, project_product, sigma_x_total, vacuum_state, ProjectedOperator,
    ProjectedState,
};
use crate::tensor::{eig_general, herm_expm, unitarity_defect};

/// Below this total occupation the centre of mass is left undefined.
pub const CBAR_MIN_OCCUPATION: f64 = 1e-12;

/// Observables after one step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    /// `⟨N_j⟩` per site.
    pub n_expect: Vec<f64>,
    /// `Σ j⟨N_j⟩ / Σ⟨N_j⟩`, `None` when the state holds no particles.
    pub cbar: Option<f64>,
    pub norm: f64,
}

impl StepRecord {
    pub fn from_occupations(step: usize, time: f64, n_expect: Vec<f64>, norm: f64) -> Self {
        let total: f64 = n_expect.iter().sum();
        let cbar = (total.abs() >= CBAR_MIN_OCCUPATION)
            .then(|| n_expect.iter().enumerate().map(|(j, n)| j as f64 * n).sum::<f64>() / total);
        StepRecord { step, time, n_expect, cbar, norm }
    }

    pub fn total(&self) -> f64 {
        self.n_expect.iter().sum()
    }
}

/// A time series, including the initial state as step 0.
#[derive(Clone, Debug, Default)]
pub struct EvolutionRun {
    pub dt: f64,
    pub series: Vec<StepRecord>,
    /// Largest |Im⟨N_j⟩| seen; should be rounding-level.
    pub max_imag_residue: f64,
    pub snapshots: Vec<Vec<C64>>,
}

impl EvolutionRun {
    pub fn steps(&self) -> usize {
        self.series.len().saturating_sub(1)
    }

    /// Site occupations as a `(steps+1) × N_s` matrix.
    pub fn occupation_matrix(&self) -> Array2<f64> {
        let n = self.series.first().map_or(0, |r| r.n_expect.len());
        Array2::from_shape_fn((self.series.len(), n), |(t, j)| self.series[t].n_expect[j])
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct EvolveOptions {
    pub renormalize: bool,
    pub keep_snapshots: bool,
}

/// Projected `N_j` for every site.
pub fn projected_numbers(tree: &IsometryTree) -> Result<Vec<ProjectedOperator>> {
    (0..tree.n_sites()).map(|j| project_product(&number_operator(tree.n_sites(), j)?, tree)).collect()
}

fn measure(ops: &[ProjectedOperator], s: &ProjectedState, residue: &mut f64) -> Result<Vec<f64>> {
    ops.iter()
        .map(|op| {
            let v = op.expectation(s)?;
            *residue = residue.max(v.im.abs());
            Ok(v.re)
        })
        .collect()
}

/// Apply the evolution operator `steps` times, then the perturbation if any.
pub fn evolve(
    state: &ProjectedState,
    teo: &CoarseTEO,
    steps: usize,
    perturbation: Option<&ProjectedOperator>,
    opts: EvolveOptions,
) -> Result<EvolutionRun> {
    if steps < 1 {
        return Err(Error::InvalidParam { field: "steps", reason: "must be at least 1".into() });
    }
    let fp = &teo.tree.fingerprint;
    if &state.fingerprint != fp {
        return Err(Error::Fingerprint { expected: fp.clone(), found: state.fingerprint.clone() });
    }
    if let Some(v) = perturbation {
        if &v.fingerprint != fp {
            return Err(Error::Fingerprint { expected: fp.clone(), found: v.fingerprint.clone() });
        }
    }
    if state.vector.len() != teo.dim() {
        return Err(Error::Shape(format!("state length {} for a {}-dim operator", state.vector.len(), teo.dim())));
    }
    let ops = projected_numbers(&teo.tree)?;
    let dt = teo.params.dt;
    let mut run = EvolutionRun { dt, ..Default::default() };
    let mut psi = state.clone();
    for step in 0..=steps {
        if step > 0 {
            psi.vector = teo.matrix.dot(&psi.vector);
            if let Some(v) = perturbation {
                psi.vector = v.matrix.dot(&psi.vector);
            }
            psi.normalized = false;
            if opts.renormalize {
                psi = psi.normalize("evolution step")?;
            }
        }
        let n = measure(&ops, &psi, &mut run.max_imag_residue)?;
        run.series.push(StepRecord::from_occupations(step, step as f64 * dt, n, psi.norm()));
        if opts.keep_snapshots {
            run.snapshots.push(psi.vector.to_vec());
        }
    }
    Ok(run)
}

/// `exp(−iΔt ε Σ_j σˣ_j)` in the truncated basis.
pub fn longitudinal_unitary(tree: &IsometryTree, epsilon: f64, dt: f64) -> Result<ProjectedOperator> {
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidParam { field: "epsilon", reason: format!("{} is negative", epsilon) });
    }
    let parts = sigma_x_total(tree.n_sites())
        .iter()
        .map(|op| project_product(op, tree))
        .collect::<Result<Vec<_>>>()?;
    let sx = ProjectedOperator::linear_combination(&parts.iter().map(|o| (C64::new(1.0, 0.0), o)).collect::<Vec<_>>())?;
    let matrix = herm_expm(sx.matrix.view(), C64::new(0.0, -dt * epsilon))?;
    Ok(ProjectedOperator { matrix, fingerprint: tree.fingerprint.clone() })
}

/// Energies extracted from the evolution operator's eigenvalues.
#[derive(Clone, Debug)]
pub struct SpectrumResult {
    /// Sorted by real part, ascending.
    pub energies: Vec<C64>,
    pub dt: f64,
    /// Some energy sits so close to the branch cut (`|Re E|Δt ≈ π`) that
    /// it may have wrapped around.
    pub aliased: bool,
}

const ALIAS_MARGIN: f64 = 1e-3;

pub fn spectrum_of(matrix: &Array2<C64>, dt: f64) -> Result<SpectrumResult> {
    let (values, _) = eig_general(matrix.view())?;
    let mut energies: Vec<C64> = values.iter().map(|&l| energy_from_eigenvalue(l, dt)).collect();
    energies.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let aliased = energies.iter().any(|e| e.re.abs() * dt >= std::f64::consts::PI - ALIAS_MARGIN);
    Ok(SpectrumResult { energies, dt, aliased })
}

pub fn spectrum(teo: &CoarseTEO) -> Result<SpectrumResult> {
    spectrum_of(&teo.matrix, teo.params.dt)
}

/// One row of a coupling scan.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanRow {
    pub lambda: f64,
    pub d_cut: usize,
    /// `Σ_j ⟨N_j⟩ / N_s` on the vacuum.
    pub nbar: f64,
    pub non_unitarity: f64,
    pub warnings: Vec<String>,
}

/// Average vacuum occupation for each coupling and truncation.
pub fn lambda_scan(lambdas: &[f64], d_cuts: &[usize], template: &ModelParams) -> Result<Vec<ScanRow>> {
    let mut rows = Vec::with_capacity(lambdas.len() * d_cuts.len());
    for &d_cut in d_cuts {
        for &lambda in lambdas {
            let p = ModelParams { lambda, d_cut, ..template.clone() };
            let teo = build_teo(&p)?;
            rows.push(scan_row(&teo)?);
        }
    }
    Ok(rows)
}

pub fn scan_row(teo: &CoarseTEO) -> Result<ScanRow> {
    let vac = vacuum_state(teo)?;
    let ops = projected_numbers(&teo.tree)?;
    let mut residue = 0.0;
    let n = measure(&ops, &vac, &mut residue)?;
    Ok(ScanRow {
        lambda: teo.params.lambda,
        d_cut: teo.params.d_cut,
        nbar: n.iter().sum::<f64>() / teo.params.n_sites as f64,
        non_unitarity: unitarity_defect(teo.matrix.view()),
        warnings: teo.warnings.clone(),
    })
}
