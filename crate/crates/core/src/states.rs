//! Operators and states in the full spin basis and in the truncated basis.
//!
//! Spin basis index 0 is σᶻ = +1 (no particle), 1 is σᶻ = −1 (particle).
//! In full-space vectors site 0 is the most significant bit, the same order
//! the isometry tree uses.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use ndarray::{array, Array1, Array2};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hotrg::{CoarseTEO, IsometryTree};
use crate::tensor::{contract, eig_general, fix_phase, DenseTensor};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Largest chain for which full 2^N_s matrices are built.
pub const MAX_DENSE_SITES: usize = 12;

/// Momentum sector of the fermion chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sector {
    /// Odd particle number: integer multiples of 2π/N_s.
    Odd,
    /// Even particle number: half-odd multiples of 2π/N_s.
    Even,
}

impl fmt::Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sector::Odd => "odd",
            Sector::Even => "even",
        })
    }
}

impl FromStr for Sector {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "odd" => Ok(Sector::Odd),
            "even" => Ok(Sector::Even),
            _ => Err(Error::InvalidParam { field: "sector", reason: format!("unknown sector `{}`", s) }),
        }
    }
}

/// Sorted momentum grid of a sector, `n_sites` entries.
pub fn allowed_momenta(sector: Sector, n_sites: usize) -> Vec<f64> {
    let n = n_sites as f64;
    let mut ks: Vec<f64> = match sector {
        Sector::Odd => (0..n_sites).map(|m| 2.0 * PI * (m as f64 - (n_sites as f64 / 2.0 - 1.0)) / n).collect(),
        Sector::Even => (0..n_sites).map(|m| PI * (2.0 * m as f64 + 1.0 - n) / n).collect(),
    };
    ks.sort_by(f64::total_cmp);
    ks
}

/// Tensor product of single-site 2×2 operators.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductOperator {
    pub locals: Vec<Array2<C64>>,
}

pub fn pauli_z() -> Array2<C64> {
    array![[ONE, ZERO], [ZERO, -ONE]]
}

pub fn pauli_x() -> Array2<C64> {
    array![[ZERO, ONE], [ONE, ZERO]]
}

/// σ⁻: takes σᶻ = +1 to σᶻ = −1, i.e. creates a particle.
pub fn sigma_minus() -> Array2<C64> {
    array![[ZERO, ZERO], [ONE, ZERO]]
}

fn site_number() -> Array2<C64> {
    array![[ZERO, ZERO], [ZERO, ONE]]
}

impl ProductOperator {
    pub fn identity(n_sites: usize) -> Self {
        ProductOperator { locals: vec![Array2::eye(2); n_sites] }
    }

    pub fn n_sites(&self) -> usize {
        self.locals.len()
    }

    /// Identity everywhere except `op` at `site`.
    pub fn single_site(n_sites: usize, site: usize, op: Array2<C64>) -> Result<Self> {
        check_site(site, n_sites)?;
        let mut p = Self::identity(n_sites);
        p.locals[site] = op;
        Ok(p)
    }

    pub fn adjoint(&self) -> Self {
        ProductOperator { locals: self.locals.iter().map(|m| m.t().mapv(|z| z.conj())).collect() }
    }

    /// Site-wise product `self · other`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.n_sites() != other.n_sites() {
            return Err(Error::Shape(format!("{} vs {} sites", self.n_sites(), other.n_sites())));
        }
        Ok(ProductOperator { locals: self.locals.iter().zip(&other.locals).map(|(a, b)| a.dot(b)).collect() })
    }

    /// Full 2^N_s matrix.
    pub fn to_dense(&self) -> Result<Array2<C64>> {
        let n = self.n_sites();
        if n > MAX_DENSE_SITES {
            return Err(Error::SizeGuard { n_sites: n, max: MAX_DENSE_SITES });
        }
        let dim = 1usize << n;
        let mut out = Array2::<C64>::zeros((dim, dim));
        for col in 0..dim {
            let mut e = Array1::<C64>::zeros(dim);
            e[col] = ONE;
            out.column_mut(col).assign(&self.apply_dense(&e)?);
        }
        Ok(out)
    }

    /// Act on a full-space vector without building the matrix.
    pub fn apply_dense(&self, v: &Array1<C64>) -> Result<Array1<C64>> {
        let n = self.n_sites();
        if v.len() != 1usize << n {
            return Err(Error::Shape(format!("vector length {} for {} sites", v.len(), n)));
        }
        let mut cur = v.clone();
        for (site, m) in self.locals.iter().enumerate() {
            if is_identity(m) {
                continue;
            }
            let stride = 1usize << (n - 1 - site);
            let mut next = Array1::<C64>::zeros(cur.len());
            for i in 0..cur.len() {
                if i & stride != 0 {
                    continue;
                }
                let (a, b) = (cur[i], cur[i | stride]);
                next[i] = m[[0, 0]] * a + m[[0, 1]] * b;
                next[i | stride] = m[[1, 0]] * a + m[[1, 1]] * b;
            }
            cur = next;
        }
        Ok(cur)
    }
}

fn is_identity(m: &Array2<C64>) -> bool {
    m[[0, 0]] == ONE && m[[1, 1]] == ONE && m[[0, 1]] == ZERO && m[[1, 0]] == ZERO
}

fn check_site(site: usize, n_sites: usize) -> Result<()> {
    if site >= n_sites {
        return Err(Error::SiteOutOfRange { site, n_sites });
    }
    Ok(())
}

/// Jordan-Wigner creation operator `c†_j = (∏_{m<j} −σᶻ_m) σ⁻_j`.
pub fn jw_creation(n_sites: usize, j: usize) -> Result<ProductOperator> {
    check_site(j, n_sites)?;
    let mut p = ProductOperator::identity(n_sites);
    for m in 0..j {
        p.locals[m] = -pauli_z();
    }
    p.locals[j] = sigma_minus();
    Ok(p)
}

/// `N_j = (1 − σᶻ_j)/2`.
pub fn number_operator(n_sites: usize, j: usize) -> Result<ProductOperator> {
    ProductOperator::single_site(n_sites, j, site_number())
}

/// The `N_s` single-site σˣ operators.
pub fn sigma_x_total(n_sites: usize) -> Vec<ProductOperator> {
    (0..n_sites).map(|j| ProductOperator::single_site(n_sites, j, pauli_x()).unwrap()).collect()
}

/// Operator in the truncated basis.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectedOperator {
    pub matrix: Array2<C64>,
    pub fingerprint: String,
}

impl ProjectedOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, s: &ProjectedState) -> Result<ProjectedState> {
        self.check(&s.fingerprint, s.vector.len())?;
        Ok(ProjectedState { vector: self.matrix.dot(&s.vector), fingerprint: s.fingerprint.clone(), normalized: false })
    }

    /// `⟨ψ|A|ψ⟩ / ⟨ψ|ψ⟩`.
    pub fn expectation(&self, s: &ProjectedState) -> Result<C64> {
        self.check(&s.fingerprint, s.vector.len())?;
        let v = &s.vector;
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>();
        if norm == 0.0 {
            return Err(Error::ZeroNorm("expectation value"));
        }
        let av = self.matrix.dot(v);
        Ok(v.iter().zip(av.iter()).map(|(a, b)| a.conj() * b).sum::<C64>() / norm)
    }

    fn check(&self, fingerprint: &str, len: usize) -> Result<()> {
        if fingerprint != self.fingerprint {
            return Err(Error::Fingerprint { expected: self.fingerprint.clone(), found: fingerprint.to_string() });
        }
        if len != self.dim() {
            return Err(Error::Shape(format!("state of length {} for a {}-dim operator", len, self.dim())));
        }
        Ok(())
    }

    /// Weighted sum `Σ c_i A_i` of operators on the same tree.
    pub fn linear_combination(terms: &[(C64, &ProjectedOperator)]) -> Result<ProjectedOperator> {
        let (_, first) = terms.first().ok_or_else(|| Error::Shape("empty linear combination".into()))?;
        let mut matrix = Array2::<C64>::zeros(first.matrix.raw_dim());
        for (c, op) in terms {
            if op.fingerprint != first.fingerprint || op.matrix.dim() != first.matrix.dim() {
                return Err(Error::Shape("operators live on different trees".into()));
            }
            matrix.scaled_add(*c, &op.matrix);
        }
        Ok(ProjectedOperator { matrix, fingerprint: first.fingerprint.clone() })
    }
}

/// Block the product operator up the tree: each level maps adjacent blocks
/// `A`, `B` to `Γᵀ (A ⊗ B) Γ`.
pub fn project_product(op: &ProductOperator, tree: &IsometryTree) -> Result<ProjectedOperator> {
    if op.n_sites() != tree.n_sites() {
        return Err(Error::Shape(format!("{}-site operator on a {}-site tree", op.n_sites(), tree.n_sites())));
    }
    let mut blocks: Vec<Array2<C64>> = op.locals.clone();
    for lvl in &tree.levels {
        let gamma = lvl.gamma_tensor();
        let gm = gamma.reshape(&[lvl.child_dim * lvl.child_dim, lvl.kept_dim()])?.to_matrix()?;
        let gt = gm.t().to_owned();
        let mut next = Vec::with_capacity(blocks.len() / 2);
        for pair in blocks.chunks(2) {
            let a = DenseTensor::from_matrix(pair[0].clone());
            let b = DenseTensor::from_matrix(pair[1].clone());
            // (i, j', k) then (i, k, j) -> (i, j, k)
            let x = contract(&a, &gamma, &[(1, 0)])?;
            let x = contract(&x, &b, &[(1, 1)])?.permute(&[0, 2, 1])?;
            let x = x.reshape(&[lvl.child_dim * lvl.child_dim, lvl.kept_dim()])?.to_matrix()?;
            next.push(gt.dot(&x));
        }
        blocks = next;
    }
    Ok(ProjectedOperator { matrix: blocks.pop().expect("one block remains"), fingerprint: tree.fingerprint.clone() })
}

/// Projected `Σ_j N_j`.
pub fn projected_total_number(tree: &IsometryTree) -> Result<ProjectedOperator> {
    let ops = (0..tree.n_sites())
        .map(|j| project_product(&number_operator(tree.n_sites(), j)?, tree))
        .collect::<Result<Vec<_>>>()?;
    ProjectedOperator::linear_combination(&ops.iter().map(|o| (ONE, o)).collect::<Vec<_>>())
}

/// State in the truncated basis.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectedState {
    pub vector: Array1<C64>,
    pub fingerprint: String,
    pub normalized: bool,
}

impl ProjectedState {
    pub fn norm(&self) -> f64 {
        self.vector.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalize(mut self, what: &'static str) -> Result<Self> {
        let n = self.norm();
        if !(n > 1e-14) {
            return Err(Error::ZeroNorm(what));
        }
        self.vector.mapv_inplace(|z| z / n);
        self.normalized = true;
        Ok(self)
    }

    pub fn overlap(&self, other: &ProjectedState) -> C64 {
        self.vector.iter().zip(other.vector.iter()).map(|(a, b)| a.conj() * b).sum()
    }
}

/// Gaussian packet parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WavePacketSpec {
    pub k_center: f64,
    pub x_center: usize,
    pub sigma: f64,
    pub sector: Sector,
}

impl WavePacketSpec {
    pub fn validate(&self, n_sites: usize) -> Result<()> {
        check_site(self.x_center, n_sites)?;
        if !(self.sigma > 0.0) {
            return Err(Error::InvalidParam { field: "sigma", reason: format!("{} is not positive", self.sigma) });
        }
        let on_grid = allowed_momenta(self.sector, n_sites).iter().any(|k| (k - self.k_center).abs() < 1e-9)
            || (self.sector == Sector::Odd && (self.k_center + PI).abs() < 1e-9);
        if !on_grid {
            return Err(Error::InvalidParam {
                field: "k_center",
                reason: format!("{} is not a {} sector momentum for {} sites", self.k_center, self.sector, n_sites),
            });
        }
        Ok(())
    }

    /// Site coefficients `e^{−ik x_j} e^{−r²/σ²}` with periodic distance r.
    pub fn coefficients(&self, n_sites: usize) -> Vec<C64> {
        (0..n_sites)
            .map(|j| {
                let d = j.abs_diff(self.x_center);
                let r = d.min(n_sites - d) as f64;
                C64::from_polar((-r * r / (self.sigma * self.sigma)).exp(), -self.k_center * j as f64)
            })
            .collect()
    }
}

/// Projected packet creation operator `Σ_j coef_j c†_j`.
pub fn packet_operator(spec: &WavePacketSpec, tree: &IsometryTree) -> Result<ProjectedOperator> {
    let n = tree.n_sites();
    spec.validate(n)?;
    let coefs = spec.coefficients(n);
    let ops = (0..n).map(|j| project_product(&jw_creation(n, j)?, tree)).collect::<Result<Vec<_>>>()?;
    ProjectedOperator::linear_combination(&coefs.iter().copied().zip(ops.iter()).collect::<Vec<_>>())
}

/// Apply one packet to `vacuum` and normalize.
pub fn gaussian_packet(spec: &WavePacketSpec, tree: &IsometryTree, vacuum: &ProjectedState) -> Result<ProjectedState> {
    packet_operator(spec, tree)?.apply(vacuum)?.normalize("packet creation")
}

/// Apply packet `a`, normalize, then packet `b`, normalize.
pub fn two_packets(
    a: &WavePacketSpec,
    b: &WavePacketSpec,
    tree: &IsometryTree,
    vacuum: &ProjectedState,
) -> Result<ProjectedState> {
    let first = gaussian_packet(a, tree, vacuum)?;
    packet_operator(b, tree)?.apply(&first)?.normalize("second packet creation")
}

/// `E = i Ln(λ)/Δt` for an eigenvalue of the evolution operator.
pub fn energy_from_eigenvalue(lambda: C64, dt: f64) -> C64 {
    C64::new(0.0, 1.0) * lambda.ln() / dt
}

/// Right eigenvector of the evolution operator with lowest Re E.
pub fn vacuum_state(teo: &CoarseTEO) -> Result<ProjectedState> {
    let (values, vectors) = eig_general(teo.matrix.view())?;
    let energies: Vec<f64> = values.iter().map(|&l| energy_from_eigenvalue(l, teo.params.dt).re).collect();
    let best = (0..energies.len())
        .min_by(|&a, &b| energies[a].total_cmp(&energies[b]))
        .ok_or_else(|| Error::Linalg("empty spectrum".into()))?;
    let mut v = vectors.column(best).to_owned();
    fix_phase(&mut v);
    ProjectedState { vector: v, fingerprint: teo.tree.fingerprint.clone(), normalized: false }.normalize("vacuum")
}

/// `ψ(k) = N_s^{-1/2} Σ_j e^{ikx_j} amp_j` on the sector's momentum grid.
pub fn momentum_profile(amplitudes: &[C64], sector: Sector) -> Vec<(f64, C64)> {
    let n = amplitudes.len();
    let norm = (n as f64).sqrt();
    allowed_momenta(sector, n)
        .into_iter()
        .map(|k| {
            let s: C64 = amplitudes.iter().enumerate().map(|(j, a)| C64::from_polar(1.0, k * j as f64) * a).sum();
            (k, s / norm)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hotrg::build_teo;
    use crate::ising::ModelParams;
    use crate::tensor::{eigh_hermitian, kron};
    use proptest::prelude::*;

    fn max_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
        (a - b).iter().fold(0.0f64, |m, z| m.max(z.norm()))
    }

    fn matmul(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
        a.dot(b)
    }

    #[test]
    fn momentum_grids() {
        let q = PI / 4.0;
        let odd = allowed_momenta(Sector::Odd, 8);
        let expect = [-3.0 * q, -2.0 * q, -q, 0.0, q, 2.0 * q, 3.0 * q, 4.0 * q];
        assert!(odd.iter().zip(expect.iter()).all(|(a, b)| (a - b).abs() < 1e-15));
        let even = allowed_momenta(Sector::Even, 8);
        let e = PI / 8.0;
        let expect = [-7.0 * e, -5.0 * e, -3.0 * e, -e, e, 3.0 * e, 5.0 * e, 7.0 * e];
        assert!(even.iter().zip(expect.iter()).all(|(a, b)| (a - b).abs() < 1e-15));
        for n in [2, 4, 16, 32] {
            assert_eq!(allowed_momenta(Sector::Odd, n).len(), n);
            assert_eq!(allowed_momenta(Sector::Even, n).len(), n);
        }
    }

    #[test]
    fn dense_matches_kron() {
        let op = jw_creation(3, 2).unwrap();
        let k = kron(kron((-pauli_z()).view(), (-pauli_z()).view()).view(), sigma_minus().view());
        assert_eq!(op.to_dense().unwrap(), k);
        assert_eq!(jw_creation(3, 0).unwrap().locals[1], Array2::<C64>::eye(2));
        assert!(jw_creation(3, 3).is_err());
    }

    #[test]
    fn canonical_anticommutation() {
        for n in 1..=6 {
            let c: Vec<Array2<C64>> = (0..n).map(|j| jw_creation(n, j).unwrap().to_dense().unwrap()).collect();
            let eye = Array2::<C64>::eye(1 << n);
            for i in 0..n {
                let ci = c[i].t().mapv(|z| z.conj());
                assert_eq!(matmul(&c[i], &c[i]), Array2::zeros(eye.raw_dim()));
                for j in 0..n {
                    let anti = matmul(&ci, &c[j]) + matmul(&c[j], &ci);
                    let expect = if i == j { eye.clone() } else { Array2::zeros(eye.raw_dim()) };
                    assert!(max_diff(&anti, &expect) < 1e-14, "n={} i={} j={}", n, i, j);
                    let cc = matmul(&c[i], &c[j]) + matmul(&c[j], &c[i]);
                    assert!(max_diff(&cc, &Array2::zeros(eye.raw_dim())) < 1e-14);
                }
            }
        }
    }

    #[test]
    fn number_operator_counts_flipped_spins() {
        let n = 4;
        let mut up = Array1::<C64>::zeros(16);
        up[0] = ONE;
        for j in 0..n {
            let nj = number_operator(n, j).unwrap();
            assert_eq!(nj.apply_dense(&up).unwrap(), Array1::zeros(16));
            let mut flipped = Array1::<C64>::zeros(16);
            flipped[1 << (n - 1 - j)] = ONE;
            assert_eq!(nj.apply_dense(&flipped).unwrap(), flipped);
        }
        let c = jw_creation(n, 2).unwrap();
        // c† c = N_j: the string signs square away
        let cdc = c.compose(&c.adjoint()).unwrap();
        assert_eq!(cdc.to_dense().unwrap(), number_operator(n, 2).unwrap().to_dense().unwrap());
    }

    #[test]
    fn identity_projects_to_identity() {
        let teo = build_teo(&ModelParams::new(8, 0.2, 0.01, 37)).unwrap();
        let id = project_product(&ProductOperator::identity(8), &teo.tree).unwrap();
        assert!(max_diff(&id.matrix, &Array2::eye(37)) < 1e-10);
        assert!(project_product(&ProductOperator::identity(4), &teo.tree).is_err());
    }

    #[test]
    fn projection_is_exact_basis_change_untruncated() {
        let teo = build_teo(&ModelParams::new(4, 0.4, 0.01, 16)).unwrap();
        let p = teo.tree.embedding().unwrap().mapv(|x| C64::new(x, 0.0));
        let ops = [jw_creation(4, 2).unwrap(), number_operator(4, 1).unwrap(), sigma_x_total(4)[3].clone()];
        for op in &ops {
            let proj = project_product(op, &teo.tree).unwrap();
            let full = p.t().dot(&op.to_dense().unwrap()).dot(&p);
            assert!(max_diff(&proj.matrix, &full) < 1e-12);
        }
    }

    #[test]
    fn projected_algebra_is_exact_untruncated() {
        let teo = build_teo(&ModelParams::new(4, 0.3, 0.01, 16)).unwrap();
        let paulis = [Array2::<C64>::eye(2), pauli_x(), array![[ZERO, -C64::i()], [C64::i(), ZERO]], pauli_z()];
        // all products of Pauli strings from a spread of index pairs
        for a in (0..256).step_by(7) {
            for b in (0..256).step_by(11) {
                let s = |code: usize| ProductOperator {
                    locals: (0..4).map(|j| paulis[(code >> (2 * j)) & 3].clone()).collect(),
                };
                let (pa, pb) = (s(a), s(b));
                let lhs = project_product(&pa, &teo.tree).unwrap().matrix.dot(&project_product(&pb, &teo.tree).unwrap().matrix);
                let rhs = project_product(&pa.compose(&pb).unwrap(), &teo.tree).unwrap().matrix;
                assert!(max_diff(&lhs, &rhs) < 1e-10);
            }
        }
    }

    #[test]
    fn total_number_spectrum_untruncated_is_binomial() {
        let teo = build_teo(&ModelParams::new(8, 0.2, 0.01, 256)).unwrap();
        let nt = projected_total_number(&teo.tree).unwrap();
        let (vals, _) = eigh_hermitian(nt.matrix.view()).unwrap();
        let mut counts = [0usize; 9];
        for v in vals {
            let r = v.round();
            assert!((v - r).abs() < 1e-9);
            counts[r as usize] += 1;
        }
        assert_eq!(counts, [1, 8, 28, 56, 70, 56, 28, 8, 1]);
    }

    #[test]
    fn truncated_number_spectrum_stays_in_range() {
        let teo = build_teo(&ModelParams::new(8, 0.2, 0.01, 37)).unwrap();
        let nt = projected_total_number(&teo.tree).unwrap();
        let herm = max_diff(&nt.matrix, &nt.matrix.t().mapv(|z| z.conj()));
        assert!(herm < 1e-10);
        let (vals, _) = eigh_hermitian(nt.matrix.view()).unwrap();
        assert!(vals.iter().all(|&v| (-1e-10..=8.0 + 1e-10).contains(&v)));
    }

    #[test]
    fn vacuum_at_zero_coupling_is_all_up() {
        let teo = build_teo(&ModelParams::new(4, 0.0, 0.01, 16)).unwrap();
        let vac = vacuum_state(&teo).unwrap();
        let full = teo.tree.embedding().unwrap().mapv(|x| C64::new(x, 0.0)).dot(&vac.vector);
        assert!((full[0] - ONE).norm() < 1e-10);
        assert!(vac.normalized);
    }

    #[test]
    fn vacuum_has_few_particles() {
        let teo = build_teo(&ModelParams::new(8, 0.2, 0.01, 37)).unwrap();
        let vac = vacuum_state(&teo).unwrap();
        let n = projected_total_number(&teo.tree).unwrap().expectation(&vac).unwrap();
        assert!(n.re < 0.05, "{}", n);
    }

    #[test]
    fn narrow_packet_is_single_site() {
        let teo = build_teo(&ModelParams::new(4, 0.0, 0.01, 16)).unwrap();
        let vac = vacuum_state(&teo).unwrap();
        let spec = WavePacketSpec { k_center: 0.0, x_center: 2, sigma: 0.05, sector: Sector::Odd };
        let psi = gaussian_packet(&spec, &teo.tree, &vac).unwrap();
        let full = teo.tree.embedding().unwrap().mapv(|x| C64::new(x, 0.0)).dot(&psi.vector);
        assert!((full[0b0010].norm() - 1.0).abs() < 1e-10);
        assert!((psi.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn packet_spec_validation() {
        let ok = WavePacketSpec { k_center: PI / 4.0, x_center: 1, sigma: 2.0, sector: Sector::Odd };
        assert!(ok.validate(8).is_ok());
        assert!(WavePacketSpec { sector: Sector::Even, ..ok }.validate(8).is_err());
        assert!(WavePacketSpec { sigma: 0.0, ..ok }.validate(8).is_err());
        assert!(WavePacketSpec { x_center: 8, ..ok }.validate(8).is_err());
        let c = ok.coefficients(8);
        // periodic distance: sites 0 and 2 are both one step from site 1
        assert!((c[0].norm() - c[2].norm()).abs() < 1e-15);
        assert!((c[7].norm() - (-4.0f64 / 4.0).exp()).abs() < 1e-15);
    }

    #[test]
    fn packet_profile_peaks_at_center_momentum() {
        let spec = WavePacketSpec { k_center: PI / 4.0, x_center: 1, sigma: 2.0, sector: Sector::Odd };
        let prof = momentum_profile(&spec.coefficients(8), Sector::Odd);
        let (k, _) = prof.iter().max_by(|a, b| a.1.norm().total_cmp(&b.1.norm())).unwrap();
        assert!((k - PI / 4.0).abs() < 1e-12);
        let flat = momentum_profile(&[ONE; 8], Sector::Odd);
        for (k, v) in flat {
            assert!(if k == 0.0 { (v.norm() - 8f64.sqrt()).abs() < 1e-12 } else { v.norm() < 1e-12 });
        }
    }

    #[test]
    fn two_packets_carry_two_particles() {
        let teo = build_teo(&ModelParams::new(8, 0.2, 0.01, 37)).unwrap();
        let vac = vacuum_state(&teo).unwrap();
        let a = WavePacketSpec { k_center: 3.0 * PI / 8.0, x_center: 0, sigma: 2.0, sector: Sector::Even };
        let b = WavePacketSpec { k_center: -3.0 * PI / 8.0, x_center: 4, ..a };
        let psi = two_packets(&a, &b, &teo.tree, &vac).unwrap();
        let n = projected_total_number(&teo.tree).unwrap().expectation(&psi).unwrap();
        assert!((n.re - 2.0).abs() < 0.05, "{}", n);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn parseval(re in prop::collection::vec(-2.0f64..2.0, 8), im in prop::collection::vec(-2.0f64..2.0, 8), even in any::<bool>()) {
            let amps: Vec<C64> = re.iter().zip(im.iter()).map(|(&a, &b)| C64::new(a, b)).collect();
            let sector = if even { Sector::Even } else { Sector::Odd };
            let lhs: f64 = momentum_profile(&amps, sector).iter().map(|(_, v)| v.norm_sqr()).sum();
            let rhs: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
            prop_assert!((lhs - rhs).abs() < 1e-12 * rhs.max(1.0));
        }

        #[test]
        fn projection_is_linear(a in -2.0f64..2.0, b in -2.0f64..2.0, i in 0usize..8, j in 0usize..8) {
            let teo = build_teo(&ModelParams::new(8, 0.2, 0.01, 20)).unwrap();
            let ni = project_product(&number_operator(8, i).unwrap(), &teo.tree).unwrap();
            let nj = project_product(&number_operator(8, j).unwrap(), &teo.tree).unwrap();
            let combo = ProjectedOperator::linear_combination(&[(C64::new(a, 0.0), &ni), (C64::new(b, 0.0), &nj)]).unwrap();
            let dense = number_operator(8, i).unwrap().to_dense().unwrap() * C64::new(a, 0.0)
                + number_operator(8, j).unwrap().to_dense().unwrap() * C64::new(b, 0.0);
            let p = teo.tree.embedding().unwrap().mapv(|x| C64::new(x, 0.0));
            let direct = p.t().dot(&dense).dot(&p);
            prop_assert!(max_diff(&combo.matrix, &direct) < 1e-10);
        }
    }
}
