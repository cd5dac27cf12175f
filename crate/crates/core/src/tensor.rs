//! Dense complex tensors and the handful of decompositions the rest of the
//! crate is built on.
//!
//! Every tensor is stored in row-major (C) order, so flattening a group of
//! adjacent axes is the usual mixed-radix index `i₀·n₁·n₂… + i₁·n₂… + …`.
//! [`group_axes`] and the matrix views used by [`contract`] rely on this.

use ndarray::{Array1, Array2, ArrayD, ArrayView2, Axis, Dimension, IxDyn};
use ndarray_linalg::{Eig, Eigh, UPLO};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Relative tolerance used when checking that an input matrix is symmetric or
/// Hermitian before it is decomposed.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// A dense complex tensor with immutable shape.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    data: ArrayD<C64>,
}

impl DenseTensor {
    pub fn new(shape: &[usize], data: Vec<C64>) -> Result<Self> {
        check_extents(shape)?;
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(Error::Shape(format!(
                "{} entries supplied for shape {:?} ({} expected)",
                data.len(),
                shape,
                expected
            )));
        }
        Ok(Self { data: ArrayD::from_shape_vec(IxDyn(shape), data)? })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self { data: ArrayD::zeros(IxDyn(shape)) }
    }

    /// Build a tensor entry by entry from its multi-index.
    pub fn from_fn<F>(shape: &[usize], mut f: F) -> Self
    where
        F: FnMut(&[usize]) -> C64,
    {
        let data = ArrayD::from_shape_fn(IxDyn(shape), |idx| f(idx.slice()));
        Self { data }
    }

    pub fn from_array(data: ArrayD<C64>) -> Self {
        let data = if data.is_standard_layout() {
            data
        } else {
            data.as_standard_layout().into_owned()
        };
        Self { data }
    }

    pub fn from_matrix(m: Array2<C64>) -> Self {
        Self::from_array(m.into_dyn())
    }

    pub fn shape(&self) -> &[usize] {
        self.data.shape()
    }

    pub fn rank(&self) -> usize {
        self.data.ndim()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Entries in row-major order.
    pub fn as_slice(&self) -> &[C64] {
        self.data.as_slice().expect("tensor data is kept in standard layout")
    }

    pub fn array(&self) -> &ArrayD<C64> {
        &self.data
    }

    pub fn into_array(self) -> ArrayD<C64> {
        self.data
    }

    pub fn get(&self, index: &[usize]) -> Option<C64> {
        self.data.get(IxDyn(index)).copied()
    }

    /// View a rank-2 tensor as a matrix.
    pub fn to_matrix(&self) -> Result<Array2<C64>> {
        if self.rank() != 2 {
            return Err(Error::Shape(format!("expected a rank-2 tensor, got shape {:?}", self.shape())));
        }
        Ok(self.data.clone().into_dimensionality()?)
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Self> {
        check_extents(shape)?;
        let n: usize = shape.iter().product();
        if n != self.len() {
            return Err(Error::Shape(format!("cannot reshape {:?} into {:?}", self.shape(), shape)));
        }
        Self::new(shape, self.as_slice().to_vec())
    }

    /// Reorder axes: axis `k` of the result is axis `axes[k]` of `self`.
    pub fn permute(&self, axes: &[usize]) -> Result<Self> {
        check_permutation(axes, self.rank())?;
        Ok(Self::from_array(self.data.view().permuted_axes(IxDyn(axes)).to_owned()))
    }

    pub fn conj(&self) -> Self {
        Self { data: self.data.mapv(|z| z.conj()) }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { data: &self.data * s }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!("{:?} vs {:?}", self.shape(), other.shape())));
        }
        Ok(self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }
}

fn check_extents(shape: &[usize]) -> Result<()> {
    if shape.iter().any(|&n| n == 0) {
        return Err(Error::Shape(format!("zero extent in shape {:?}", shape)));
    }
    Ok(())
}

fn check_permutation(axes: &[usize], rank: usize) -> Result<()> {
    if axes.len() != rank {
        return Err(Error::Partition(format!("{} axes given for rank {}", axes.len(), rank)));
    }
    let mut seen = vec![false; rank];
    for &a in axes {
        if a >= rank {
            return Err(Error::AxisOutOfRange { axis: a, rank });
        }
        if std::mem::replace(&mut seen[a], true) {
            return Err(Error::Partition(format!("axis {} repeated", a)));
        }
    }
    Ok(())
}

/// Contract `a` and `b` over the listed `(axis of a, axis of b)` pairs.
///
/// The result carries the uncontracted axes of `a` (in order) followed by
/// the uncontracted axes of `b`.
pub fn contract(a: &DenseTensor, b: &DenseTensor, pairs: &[(usize, usize)]) -> Result<DenseTensor> {
    let (ra, rb) = (a.rank(), b.rank());
    let mut used_a = vec![false; ra];
    let mut used_b = vec![false; rb];
    for &(ia, ib) in pairs {
        if ia >= ra {
            return Err(Error::AxisOutOfRange { axis: ia, rank: ra });
        }
        if ib >= rb {
            return Err(Error::AxisOutOfRange { axis: ib, rank: rb });
        }
        if used_a[ia] || used_b[ib] {
            return Err(Error::Partition(format!("axis pair ({}, {}) reuses an axis", ia, ib)));
        }
        if a.shape()[ia] != b.shape()[ib] {
            return Err(Error::Shape(format!(
                "contracted extents differ: a[{}] = {}, b[{}] = {}",
                ia,
                a.shape()[ia],
                ib,
                b.shape()[ib]
            )));
        }
        used_a[ia] = true;
        used_b[ib] = true;
    }
    let free_a: Vec<usize> = (0..ra).filter(|&i| !used_a[i]).collect();
    let free_b: Vec<usize> = (0..rb).filter(|&i| !used_b[i]).collect();

    let perm_a: Vec<usize> = free_a.iter().copied().chain(pairs.iter().map(|p| p.0)).collect();
    let perm_b: Vec<usize> = pairs.iter().map(|p| p.1).chain(free_b.iter().copied()).collect();
    let rows: usize = free_a.iter().map(|&i| a.shape()[i]).product();
    let inner: usize = pairs.iter().map(|p| a.shape()[p.0]).product();
    let cols: usize = free_b.iter().map(|&i| b.shape()[i]).product();

    let ma = matrix_view(&a.permute(&perm_a)?, rows, inner)?;
    let mb = matrix_view(&b.permute(&perm_b)?, inner, cols)?;
    let product = ma.dot(&mb);

    let mut shape: Vec<usize> = free_a.iter().map(|&i| a.shape()[i]).collect();
    shape.extend(free_b.iter().map(|&i| b.shape()[i]));
    if shape.is_empty() {
        // full contraction: keep a rank-1 tensor of extent one
        shape.push(1);
    }
    DenseTensor::new(&shape, product.iter().copied().collect())
}

fn matrix_view(t: &DenseTensor, rows: usize, cols: usize) -> Result<Array2<C64>> {
    Ok(Array2::from_shape_vec((rows, cols), t.as_slice().to_vec())?)
}

/// Merge axes according to an ordered partition: group `k` of the result is
/// the row-major flattening of the axes listed in `groups[k]`.
pub fn group_axes(t: &DenseTensor, groups: &[Vec<usize>]) -> Result<DenseTensor> {
    let order: Vec<usize> = groups.iter().flatten().copied().collect();
    if groups.iter().any(|g| g.is_empty()) {
        return Err(Error::Partition("empty group".into()));
    }
    check_permutation(&order, t.rank())?;
    let shape: Vec<usize> = groups
        .iter()
        .map(|g| g.iter().map(|&a| t.shape()[a]).product())
        .collect();
    t.permute(&order)?.reshape(&shape)
}

/// Eigen-decomposition of a real symmetric matrix.
#[derive(Clone, Debug)]
pub struct EigenResult {
    /// Eigenvalues, non-increasing.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, aligned with `values`.
    pub vectors: Array2<f64>,
    pub rank_kept: usize,
}

fn relative_asymmetry<F>(n: usize, scale: f64, mut dev: F) -> f64
where
    F: FnMut(usize, usize) -> f64,
{
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..i {
            worst = worst.max(dev(i, j));
        }
    }
    worst / scale.max(1.0)
}

/// Symmetric eigendecomposition with descending eigenvalues.
///
/// Ties keep the solver's index order; each eigenvector is flipped so that its
/// first largest-magnitude component is positive.
pub fn eigh_symmetric(q: ArrayView2<f64>) -> Result<EigenResult> {
    let (n, m) = q.dim();
    if n != m {
        return Err(Error::Shape(format!("eigh_symmetric needs a square matrix, got {}x{}", n, m)));
    }
    let scale = q.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let deviation = relative_asymmetry(n, scale, |i, j| (q[[i, j]] - q[[j, i]]).abs());
    if deviation > SYMMETRY_TOL {
        return Err(Error::NotSymmetric { deviation });
    }
    let sym = (&q + &q.t()) * 0.5;
    let (vals, vecs) = sym.eigh(UPLO::Lower)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));

    let mut vectors = Array2::<f64>::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        let mut col = vecs.column(src).to_owned();
        let lead = leading_index(col.iter().map(|x| x.abs()));
        if col[lead] < 0.0 {
            col.mapv_inplace(|x| -x);
        }
        vectors.column_mut(dst).assign(&col);
    }
    Ok(EigenResult { values: order.iter().map(|&i| vals[i]).collect(), vectors, rank_kept: n })
}

/// Index of the first entry whose magnitude equals the maximum, up to a
/// relative rounding slack so that exact ties resolve to the lower index.
fn leading_index<I: Iterator<Item = f64> + Clone>(mags: I) -> usize {
    let max = mags.clone().fold(0.0f64, f64::max);
    mags.into_iter().position(|m| m >= max * (1.0 - 1e-12)).unwrap_or(0)
}

/// Rotate a complex vector so its first largest-magnitude component is real
/// and positive.
pub fn fix_phase(v: &mut Array1<C64>) {
    if v.is_empty() {
        return;
    }
    let lead = leading_index(v.iter().map(|z| z.norm()));
    let z = v[lead];
    if z.norm() > 0.0 {
        let phase = z.conj() / z.norm();
        v.mapv_inplace(|x| x * phase);
    }
}

fn check_hermitian(h: ArrayView2<C64>) -> Result<()> {
    let (n, m) = h.dim();
    if n != m {
        return Err(Error::Shape(format!("expected a square matrix, got {}x{}", n, m)));
    }
    let scale = h.iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..=i {
            worst = worst.max((h[[i, j]] - h[[j, i]].conj()).norm());
        }
    }
    let deviation = worst / scale.max(1.0);
    if deviation > SYMMETRY_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(())
}

/// Hermitian eigendecomposition, eigenvalues ascending, phase-fixed columns.
pub fn eigh_hermitian(h: ArrayView2<C64>) -> Result<(Vec<f64>, Array2<C64>)> {
    check_hermitian(h)?;
    let herm = (&h + &h.t().mapv(|z| z.conj())) * C64::new(0.5, 0.0);
    let (vals, mut vecs) = herm.eigh(UPLO::Lower)?;
    for mut col in vecs.axis_iter_mut(Axis(1)) {
        let mut v = col.to_owned();
        fix_phase(&mut v);
        col.assign(&v);
    }
    Ok((vals.to_vec(), vecs))
}

/// `exp(scale · h)` for Hermitian `h`, computed in the eigenbasis of `h`.
pub fn herm_expm(h: ArrayView2<C64>, scale: C64) -> Result<Array2<C64>> {
    let (vals, vecs) = eigh_hermitian(h)?;
    let mut scaled = vecs.clone();
    for (mut col, &w) in scaled.axis_iter_mut(Axis(1)).zip(vals.iter()) {
        let f = (scale * w).exp();
        col.mapv_inplace(|z| z * f);
    }
    Ok(scaled.dot(&vecs.t().mapv(|z| z.conj())))
}

/// Right eigenpairs of a general complex square matrix (unsorted).
pub fn eig_general(a: ArrayView2<C64>) -> Result<(Vec<C64>, Array2<C64>)> {
    let (n, m) = a.dim();
    if n != m {
        return Err(Error::Shape(format!("expected a square matrix, got {}x{}", n, m)));
    }
    let (vals, vecs) = a.to_owned().eig()?;
    Ok((vals.to_vec(), vecs))
}

/// `‖U†U − I‖_max`, a cheap unitarity diagnostic.
pub fn unitarity_defect(u: ArrayView2<C64>) -> f64 {
    let n = u.nrows();
    let g = u.t().mapv(|z| z.conj()).dot(&u);
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[[i, j]] - target).norm());
        }
    }
    worst
}

/// Spectral norm of a complex matrix (largest singular value).
pub fn operator_norm(a: ArrayView2<C64>) -> Result<f64> {
    use ndarray_linalg::SVD;
    let (_, s, _) = a.to_owned().svd(false, false)?;
    Ok(s.iter().copied().fold(0.0, f64::max))
}

pub fn kron(a: ArrayView2<C64>, b: ArrayView2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    Array2::from_shape_fn((ar * br, ac * bc), |(i, j)| a[[i / br, j / bc]] * b[[i % br, j % bc]])
}
