//! Dense full-space reference for small chains.
//!
//! `H = −λ Σ σˣ_j σˣ_{j+1} − Σ σᶻ_j − ε Σ σˣ_j` in the basis where the
//! transverse field is diagonal. Site 0 is the most significant bit and bit
//! value 1 means σᶻ = −1 (one particle).

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::evolution::{EvolutionRun, StepRecord};
use crate::ising::{Boundary, ModelParams};
use crate::states::{jw_creation, WavePacketSpec, MAX_DENSE_SITES};
use crate::tensor::{eigh_hermitian, herm_expm};

#[derive(Clone, Debug)]
pub struct DenseHamiltonian {
    pub matrix: Array2<C64>,
    pub n_sites: usize,
}

fn guard(n_sites: usize) -> Result<()> {
    if n_sites > MAX_DENSE_SITES {
        return Err(Error::SizeGuard { n_sites, max: MAX_DENSE_SITES });
    }
    Ok(())
}

fn bonds(n: usize, boundary: Boundary) -> Vec<(usize, usize)> {
    let mut b: Vec<(usize, usize)> = (0..n.saturating_sub(1)).map(|j| (j, j + 1)).collect();
    if boundary == Boundary::Periodic && n > 1 {
        b.push((n - 1, 0));
    }
    b
}

fn mask(n: usize, site: usize) -> usize {
    1 << (n - 1 - site)
}

/// `Σ_j σᶻ_j` on a basis state.
fn z_total(n: usize, state: usize) -> f64 {
    n as f64 - 2.0 * state.count_ones() as f64
}

fn h_transverse(n: usize) -> Array2<C64> {
    let dim = 1 << n;
    let mut h = Array2::zeros((dim, dim));
    for s in 0..dim {
        h[[s, s]] = C64::new(-z_total(n, s), 0.0);
    }
    h
}

fn h_bonds(n: usize, boundary: Boundary, lambda: f64) -> Array2<C64> {
    let dim = 1 << n;
    let mut h = Array2::zeros((dim, dim));
    for (a, b) in bonds(n, boundary) {
        let flip = mask(n, a) | mask(n, b);
        for s in 0..dim {
            h[[s ^ flip, s]] -= C64::new(lambda, 0.0);
        }
    }
    h
}

fn sigma_x_sum(n: usize) -> Array2<C64> {
    let dim = 1 << n;
    let mut h = Array2::zeros((dim, dim));
    for j in 0..n {
        for s in 0..dim {
            h[[s ^ mask(n, j), s]] += C64::new(1.0, 0.0);
        }
    }
    h
}

pub fn build_hamiltonian(p: &ModelParams) -> Result<DenseHamiltonian> {
    guard(p.n_sites)?;
    let n = p.n_sites;
    let mut h = h_transverse(n) + h_bonds(n, p.boundary, p.lambda);
    if p.epsilon != 0.0 {
        h = h - sigma_x_sum(n) * C64::new(p.epsilon, 0.0);
    }
    Ok(DenseHamiltonian { matrix: h, n_sites: n })
}

/// `exp(−iΔt H)`.
pub fn exact_teo(h: &DenseHamiltonian, dt: f64) -> Result<Array2<C64>> {
    herm_expm(h.matrix.view(), C64::new(0.0, -dt))
}

/// Symmetric split step `e^{−iΔt H_T/2} e^{−iΔt H_NN} e^{−iΔt H_T/2}`,
/// followed by `e^{iΔt ε Σσˣ}` when ε ≠ 0.
pub fn trotter_teo(p: &ModelParams) -> Result<Array2<C64>> {
    guard(p.n_sites)?;
    let n = p.n_sites;
    let dim = 1 << n;
    let half: Vec<C64> = (0..dim).map(|s| C64::from_polar(1.0, p.dt * z_total(n, s) / 2.0)).collect();
    let u_nn = herm_expm(h_bonds(n, p.boundary, p.lambda).view(), C64::new(0.0, -p.dt))?;
    let mut u = Array2::from_shape_fn((dim, dim), |(i, j)| half[i] * u_nn[[i, j]] * half[j]);
    if p.epsilon != 0.0 {
        let v = herm_expm(sigma_x_sum(n).view(), C64::new(0.0, p.dt * p.epsilon))?;
        u = v.dot(&u);
    }
    Ok(u)
}

/// Eigenvalues ascending.
pub fn dense_spectrum(h: &DenseHamiltonian) -> Result<Vec<f64>> {
    Ok(eigh_hermitian(h.matrix.view())?.0)
}

/// Lowest eigenpair, phase-fixed.
pub fn ground_state(h: &DenseHamiltonian) -> Result<(f64, Array1<C64>)> {
    let (vals, vecs) = eigh_hermitian(h.matrix.view())?;
    Ok((vals[0], vecs.column(0).to_owned()))
}

/// `⟨N_j⟩` for every site of a full-space state, normalised by `⟨ψ|ψ⟩`.
pub fn occupations(psi: &Array1<C64>, n_sites: usize) -> Vec<f64> {
    let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
    let mut n = vec![0.0; n_sites];
    for (s, z) in psi.iter().enumerate() {
        let w = z.norm_sqr();
        if w == 0.0 {
            continue;
        }
        for (j, nj) in n.iter_mut().enumerate() {
            if s & mask(n_sites, j) != 0 {
                *nj += w;
            }
        }
    }
    if norm > 0.0 {
        n.iter_mut().for_each(|x| *x /= norm);
    }
    n
}

/// Repeatedly apply a dense step operator, recording the same observables as
/// the truncated-basis evolution.
pub fn dense_evolve(state: &Array1<C64>, u: &Array2<C64>, steps: usize, dt: f64) -> Result<EvolutionRun> {
    let dim = state.len();
    if !dim.is_power_of_two() || u.dim() != (dim, dim) {
        return Err(Error::Shape(format!("state of length {} with a {:?} operator", dim, u.dim())));
    }
    let n_sites = dim.trailing_zeros() as usize;
    guard(n_sites)?;
    let mut run = EvolutionRun { dt, ..Default::default() };
    let mut psi = state.clone();
    for step in 0..=steps {
        if step > 0 {
            psi = u.dot(&psi);
        }
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        run.series.push(StepRecord::from_occupations(step, step as f64 * dt, occupations(&psi, n_sites), norm));
    }
    Ok(run)
}

/// `Σ_j coef_j c†_j |base⟩`, normalised.
pub fn dense_packet(spec: &WavePacketSpec, base: &Array1<C64>) -> Result<Array1<C64>> {
    let n = base.len().trailing_zeros() as usize;
    guard(n)?;
    spec.validate(n)?;
    let mut out = Array1::<C64>::zeros(base.len());
    for (j, c) in spec.coefficients(n).into_iter().enumerate() {
        out.scaled_add(c, &jw_creation(n, j)?.apply_dense(base)?);
    }
    let norm = out.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if !(norm > 1e-14) {
        return Err(Error::ZeroNorm("dense packet creation"));
    }
    Ok(out.mapv(|z| z / norm))
}
