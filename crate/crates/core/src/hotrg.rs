//! HOTRG coarse-graining of one time slice.
//!
//! Two copies of the current site tensor are joined along the spatial leg; the
//! pair of bottom legs (and, with the same isometry, the pair of top legs) is
//! merged and truncated to the `d_cut` states of largest |eigenvalue| of a
//! real symmetric `Q` built from the two-site block. After log₂ N_s steps the
//! spatial legs are traced to give the transfer matrix of the whole chain in
//! the truncated basis, which is proportional to the time-evolution operator.

use std::sync::Arc;

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::ising::{
    euclidean_couplings, fundamental_tensor, quantum_to_classical, teo_prefactor, Boundary, ModelParams, QVariant,
};
use crate::tensor::{contract, eigh_symmetric, group_axes, DenseTensor};

/// Discarded weight above which a level is flagged in [`CoarseTEO::warnings`].
pub const DISCARD_WARNING: f64 = 0.5;

/// One coarse-graining level: the isometry merging two child legs.
#[derive(Clone, Debug, PartialEq)]
pub struct HotrgLevel {
    pub level: usize,
    pub child_dim: usize,
    /// Isometry as a `child_dim² × kept_dim` matrix with orthonormal columns.
    /// Rows are the row-major pair (left child, right child).
    pub gamma: Array2<f64>,
    pub kept_eigenvalues: Vec<f64>,
    pub discarded_weight: f64,
}

impl HotrgLevel {
    pub fn kept_dim(&self) -> usize {
        self.gamma.ncols()
    }

    /// The isometry as a rank-3 tensor `(child, child, kept)`.
    pub fn gamma_tensor(&self) -> DenseTensor {
        let (c, k) = (self.child_dim, self.kept_dim());
        let data = self.gamma.iter().map(|&x| C64::new(x, 0.0)).collect();
        DenseTensor::new(&[c, c, k], data).expect("gamma has child²·kept entries")
    }

    /// `max |ΓᵀΓ − I|`.
    pub fn isometry_defect(&self) -> f64 {
        let g = self.gamma.t().dot(&self.gamma);
        let mut worst = 0.0f64;
        for ((i, j), v) in g.indexed_iter() {
            let t = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((v - t).abs());
        }
        worst
    }
}

/// The ordered list of isometries defining the truncated basis.
#[derive(Clone, Debug, PartialEq)]
pub struct IsometryTree {
    pub levels: Vec<HotrgLevel>,
    pub fingerprint: String,
}

impl IsometryTree {
    pub fn n_sites(&self) -> usize {
        1 << self.levels.len()
    }

    /// Dimension of the final truncated space.
    pub fn final_dim(&self) -> usize {
        self.levels.last().map_or(2, HotrgLevel::kept_dim)
    }

    /// Dense embedding `P` (2^N_s × d) of the truncated basis into the full
    /// spin basis, site 0 most significant. Only for small chains.
    pub fn embedding(&self) -> Result<Array2<f64>> {
        const MAX_SITES: usize = 12;
        if self.n_sites() > MAX_SITES {
            return Err(Error::SizeGuard { n_sites: self.n_sites(), max: MAX_SITES });
        }
        let mut p = Array2::<f64>::eye(2);
        for lvl in &self.levels {
            let kp = kron_real(p.view(), p.view());
            p = kp.dot(&lvl.gamma);
        }
        Ok(p)
    }
}

fn kron_real(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    Array2::from_shape_fn((ar * br, ac * bc), |(i, j)| a[[i / br, j / bc]] * b[[i % br, j % bc]])
}

/// Coarse-grained time-evolution operator in the truncated basis.
#[derive(Clone, Debug)]
pub struct CoarseTEO {
    /// `prefactor × traced transfer matrix`, acting on column vectors.
    pub matrix: Array2<C64>,
    pub prefactor: C64,
    pub tree: Arc<IsometryTree>,
    pub params: ModelParams,
    pub warnings: Vec<String>,
}

impl CoarseTEO {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn discarded_weights(&self) -> Vec<f64> {
        self.tree.levels.iter().map(|l| l.discarded_weight).collect()
    }
}

fn check_site_tensor(t: &DenseTensor) -> Result<()> {
    let s = t.shape();
    if s.len() != 4 {
        return Err(Error::Shape(format!("site tensor must be rank 4, got {:?}", s)));
    }
    if s[0] != s[1] || s[2] != s[3] {
        return Err(Error::Shape(format!("site tensor legs mismatch: {:?}", s)));
    }
    Ok(())
}

/// Two horizontally joined copies of `t` as a matrix with rows
/// (bottom₁, bottom₂) and columns (left₁, top₁, top₂, right₂).
pub fn build_m(t: &DenseTensor) -> Result<DenseTensor> {
    check_site_tensor(t)?;
    // axes after contraction: (l1, b1, t1, r2, b2, t2)
    let pair = contract(t, t, &[(1, 0)])?;
    group_axes(&pair, &[vec![1, 4], vec![0, 2, 5, 3]])
}

fn finish_q(mut q: Array2<f64>) -> Array2<f64> {
    let n = q.nrows();
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (q[[i, j]] + q[[j, i]]);
            q[[i, j]] = avg;
            q[[j, i]] = avg;
        }
    }
    q
}

/// Real symmetric selection matrix from an explicit `M`.
pub fn build_q(m: &DenseTensor, variant: QVariant) -> Result<Array2<f64>> {
    let m = m.to_matrix()?;
    let q = match variant {
        QVariant::ReMMT => m.dot(&m.t()).mapv(|z| z.re),
        QVariant::ImMMT => m.dot(&m.t()).mapv(|z| z.im),
        QVariant::MMdag => m.dot(&m.t().mapv(|z| z.conj())).mapv(|z| z.re),
        QVariant::ImMMdag => m.dot(&m.t().mapv(|z| z.conj())).mapv(|z| z.im),
    };
    Ok(finish_q(q))
}

/// Same matrix as `build_q(build_m(t))` without materialising `M`.
///
/// `M Mᵀ` over the bottom pair factorises through the shared spatial leg:
/// `Σ_{e,e'} X_{ee'} ⊗ Y_{ee'}` with `X` collecting the left copy's
/// environment and `Y` the right copy's. Cost is O(D⁴) instead of O(D⁶).
pub fn q_from_site_tensor(t: &DenseTensor, variant: QVariant) -> Result<Array2<f64>> {
    check_site_tensor(t)?;
    let conj_primed = matches!(variant, QVariant::MMdag | QVariant::ImMMdag);
    let primed = if conj_primed { t.conj() } else { t.clone() };
    let (s, d) = (t.shape()[0], t.shape()[2]);
    // x[e, i, e', i'] = Σ_{a,b} T[a,e,i,b] T'[a,e',i',b]
    let x = contract(t, &primed, &[(0, 0), (3, 3)])?;
    // y[e, j, e', j'] = Σ_{d,c} T[e,d,j,c] T'[e',d,j',c]
    let y = contract(t, &primed, &[(1, 1), (3, 3)])?;
    let (xs, ys) = (x.as_slice(), y.as_slice());
    let take_im = matches!(variant, QVariant::ImMMT | QVariant::ImMMdag);

    let n = d * d;
    let mut q = Array2::<f64>::zeros((n, n));
    let idx = |e: usize, i: usize, ep: usize, ip: usize| ((e * d + i) * s + ep) * d + ip;
    for e in 0..s {
        for ep in 0..s {
            for i in 0..d {
                for ip in 0..d {
                    let xv = xs[idx(e, i, ep, ip)];
                    if xv == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for j in 0..d {
                        let row = i * d + j;
                        let mut out = q.row_mut(row);
                        let base = ip * d;
                        for jp in 0..d {
                            let yv = ys[idx(e, j, ep, jp)];
                            let prod = xv * yv;
                            out[base + jp] += if take_im { prod.im } else { prod.re };
                        }
                    }
                }
            }
        }
    }
    Ok(finish_q(q))
}

/// Keep the `d_cut` eigenvectors of `q` with largest |eigenvalue|.
pub fn isometry_from_q(q: &Array2<f64>, d_cut: usize, level: usize) -> Result<HotrgLevel> {
    if d_cut < 1 {
        return Err(Error::InvalidParam { field: "d_cut", reason: "must be at least 1".into() });
    }
    let n = q.nrows();
    let child_dim = (n as f64).sqrt().round() as usize;
    if child_dim * child_dim != n {
        return Err(Error::Shape(format!("Q of size {} is not a merged pair of legs", n)));
    }
    let eig = eigh_symmetric(q.view())?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.values[b].abs().total_cmp(&eig.values[a].abs()));
    let kept = d_cut.min(n);

    let total: f64 = eig.values.iter().map(|v| v.abs()).sum();
    let dropped = order[kept..].iter().fold(0.0, |acc, &i| acc + eig.values[i].abs());
    let discarded_weight = if total > 0.0 { dropped / total } else { 0.0 };

    let mut gamma = Array2::<f64>::zeros((n, kept));
    for (dst, &src) in order[..kept].iter().enumerate() {
        gamma.column_mut(dst).assign(&eig.vectors.column(src));
    }
    Ok(HotrgLevel {
        level,
        child_dim,
        gamma,
        kept_eigenvalues: order[..kept].iter().map(|&i| eig.values[i]).collect(),
        discarded_weight,
    })
}

/// Join two copies of `t` horizontally and merge bottom and top pairs with
/// the level's isometry. Spatial extents are unchanged.
pub fn coarse_step(t: &DenseTensor, level: &HotrgLevel) -> Result<DenseTensor> {
    check_site_tensor(t)?;
    if t.shape()[2] != level.child_dim {
        return Err(Error::Shape(format!(
            "tensor vertical legs have extent {}, isometry expects {}",
            t.shape()[2],
            level.child_dim
        )));
    }
    let gamma = level.gamma_tensor();
    // right copy T[a,r,b2,t2] with Γ[b1,b2,k] over b2 -> (a, r, t2, b1, k)
    let x1 = contract(t, &gamma, &[(2, 1)])?;
    // left copy T[l,a,b1,t1] over a and b1 -> (l, t1, r, t2, k)
    let x2 = contract(t, &x1, &[(1, 0), (2, 3)])?;
    // tops (t1, t2) with the same Γ -> (l, r, k, k')
    let x3 = contract(&x2, &gamma, &[(1, 0), (3, 1)])?;
    Ok(x3)
}

/// Repeated coarse-graining from an explicit starting tensor.
pub fn coarse_grain_tensor(
    t0: &DenseTensor,
    n_levels: usize,
    d_cut: usize,
    variant: QVariant,
    fingerprint: String,
) -> Result<(DenseTensor, IsometryTree)> {
    let mut t = t0.clone();
    let mut levels = Vec::with_capacity(n_levels);
    for level in 1..=n_levels {
        let q = q_from_site_tensor(&t, variant)?;
        let lvl = isometry_from_q(&q, d_cut, level)?;
        t = coarse_step(&t, &lvl)?;
        levels.push(lvl);
    }
    Ok((t, IsometryTree { levels, fingerprint }))
}

/// Coarse-grain the real-time fundamental tensor log₂ N_s times.
pub fn coarse_grain(p: &ModelParams) -> Result<(DenseTensor, IsometryTree)> {
    p.validate()?;
    let t0 = fundamental_tensor(&quantum_to_classical(p)?);
    coarse_grain_tensor(&t0, p.levels(), p.d_cut, p.q_variant, p.fingerprint())
}

/// Trace (periodic) or pin (open) the spatial legs. The result maps bottom
/// index to top index: `out[[top, bottom]]`.
pub fn extract_transfer(t: &DenseTensor, boundary: Boundary) -> Result<Array2<C64>> {
    check_site_tensor(t)?;
    let (s, d) = (t.shape()[0], t.shape()[2]);
    let mut out = Array2::<C64>::zeros((d, d));
    let spatial: Vec<usize> = match boundary {
        Boundary::Periodic => (0..s).collect(),
        Boundary::Open => vec![0],
    };
    let data = t.as_slice();
    for &a in &spatial {
        let base = (a * s + a) * d * d;
        for b in 0..d {
            for top in 0..d {
                out[[top, b]] += data[base + b * d + top];
            }
        }
    }
    Ok(out)
}

/// Build the coarse-grained time-evolution operator for `p`.
pub fn build_teo(p: &ModelParams) -> Result<CoarseTEO> {
    let (t, tree) = coarse_grain(p)?;
    let prefactor = teo_prefactor(p);
    let matrix = extract_transfer(&t, p.boundary)? * prefactor;
    let warnings = discard_warnings(&tree);
    Ok(CoarseTEO { matrix, prefactor, tree: Arc::new(tree), params: p.clone(), warnings })
}

pub(crate) fn discard_warnings(tree: &IsometryTree) -> Vec<String> {
    tree.levels
        .iter()
        .filter(|l| l.discarded_weight > DISCARD_WARNING)
        .map(|l| {
            format!(
                "level {}: discarded weight {:.4} exceeds {}; truncation may be keeping high-energy states",
                l.level, l.discarded_weight, DISCARD_WARNING
            )
        })
        .collect()
}

/// Eigenvalues of `Q` at one angle of the Euclidean-to-real-time sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct QSweepRow {
    pub theta: f64,
    pub level: usize,
    /// Descending.
    pub eigenvalues: Vec<f64>,
}

/// Rotate the Euclidean step `Δτ → Δt e^{iθ}` and record the spectrum of `Q`
/// at the first `levels` coarse-graining steps for each angle.
pub fn q_sweep(p: &ModelParams, thetas: &[f64], variant: QVariant, levels: usize) -> Result<Vec<QSweepRow>> {
    if let Some(&bad) = thetas.iter().find(|&&th| !(0.0..=std::f64::consts::FRAC_PI_2 + 1e-12).contains(&th)) {
        return Err(Error::InvalidParam { field: "theta", reason: format!("{} outside [0, π/2]", bad) });
    }
    if levels < 1 || levels > p.levels() {
        return Err(Error::InvalidParam { field: "levels", reason: format!("must lie in 1..={}", p.levels()) });
    }
    let mut rows = Vec::with_capacity(thetas.len() * levels);
    for &theta in thetas {
        let dtau = C64::from_polar(p.dt, theta);
        let mut t = fundamental_tensor(&euclidean_couplings(p.lambda, dtau));
        for level in 1..=levels {
            let q = q_from_site_tensor(&t, variant)?;
            let eig = eigh_symmetric(q.view())?;
            rows.push(QSweepRow { theta, level, eigenvalues: eig.values.clone() });
            if level < levels {
                let lvl = isometry_from_q(&q, p.d_cut, level)?;
                t = coarse_step(&t, &lvl)?;
            }
        }
    }
    Ok(rows)
}
