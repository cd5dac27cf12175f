//! Matrix-product-state reference via time-evolving block decimation.
//!
//! Open-bond MPS (boundary bonds of extent 1) with the periodic coupling
//! handled by carrying the last site next to the first with swap gates.

use ndarray::{s, Array1, Array2, Array3};
use ndarray_linalg::{JobSvd, SVDDC};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::evolution::{EvolutionRun, StepRecord};
use crate::ising::Boundary;
use crate::states::{jw_creation, ProductOperator, WavePacketSpec};

pub const DEFAULT_CUTOFF: f64 = 1e-8;
pub const DEFAULT_MAX_BOND: usize = 20;

const NULL_SINGULAR: f64 = 1e-14;
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Truncation settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TebdConfig {
    pub max_bond: usize,
    /// Relative discarded weight `Σ_discarded s² / Σ s²` allowed per cut.
    pub cutoff: f64,
    pub boundary: Boundary,
}

impl Default for TebdConfig {
    fn default() -> Self {
        TebdConfig { max_bond: DEFAULT_MAX_BOND, cutoff: DEFAULT_CUTOFF, boundary: Boundary::Periodic }
    }
}

struct Split {
    u: Array2<C64>,
    s: Array1<f64>,
    vh: Array2<C64>,
    discarded: f64,
}

/// Thin SVD keeping the fewest singular values whose dropped weight stays
/// within `cutoff` (relative), capped at `max_bond`; at least one survives.
fn split(m: &Array2<C64>, cutoff: f64, max_bond: usize) -> Result<Split> {
    let (u, s, vh) = m.svddc(JobSvd::Some)?;
    let (u, vh) = (u.expect("requested U"), vh.expect("requested Vᴴ"));
    let total: f64 = s.iter().map(|x| x * x).sum();
    let mut keep = s.len();
    if total > 0.0 {
        let mut dropped = 0.0;
        while keep > 1 {
            let w = s[keep - 1] * s[keep - 1];
            if (dropped + w) / total > cutoff {
                break;
            }
            dropped += w;
            keep -= 1;
        }
    } else {
        keep = 1;
    }
    // numerically null directions never carry information
    let floor = s.first().copied().unwrap_or(0.0) * NULL_SINGULAR;
    while keep > 1 && s[keep - 1] <= floor {
        keep -= 1;
    }
    keep = keep.min(max_bond.max(1));
    let discarded = if total > 0.0 { s.slice(s![keep..]).iter().map(|x| x * x).sum::<f64>() / total } else { 0.0 };
    Ok(Split {
        u: u.slice(s![.., ..keep]).to_owned(),
        s: s.slice(s![..keep]).to_owned(),
        vh: vh.slice(s![..keep, ..]).to_owned(),
        discarded,
    })
}

/// Matrix product state with site tensors `(left, physical, right)`.
#[derive(Clone, Debug)]
pub struct Mps {
    pub tensors: Vec<Array3<C64>>,
    /// Orthogonality centre, `None` after a non-unitary local operation.
    pub center: Option<usize>,
    pub config: TebdConfig,
    /// Discarded weight summed over every truncation so far.
    pub discarded: f64,
}

impl Mps {
    /// Product state from per-site amplitudes `(up, down)`.
    pub fn product(locals: &[[C64; 2]], config: TebdConfig) -> Self {
        let tensors = locals.iter().map(|a| Array3::from_shape_fn((1, 2, 1), |(_, p, _)| a[p])).collect();
        Mps { tensors, center: None, config, discarded: 0.0 }
    }

    /// All spins up.
    pub fn all_up(n_sites: usize, config: TebdConfig) -> Self {
        let mut m = Self::product(&vec![[ONE, ZERO]; n_sites], config);
        m.center = Some(0);
        m
    }

    pub fn n_sites(&self) -> usize {
        self.tensors.len()
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        self.tensors.iter().take(self.n_sites().saturating_sub(1)).map(|t| t.dim().2).collect()
    }

    pub fn max_bond_dim(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    fn shift_right(&mut self, i: usize) -> Result<()> {
        let (l, p, r) = self.tensors[i].dim();
        let m = self.tensors[i].view().into_shape_with_order((l * p, r))?.to_owned();
        let sp = split(&m, 0.0, usize::MAX)?;
        let k = sp.s.len();
        self.tensors[i] = sp.u.into_shape_with_order((l, p, k))?;
        let sv = Array2::from_shape_fn((k, r), |(a, b)| sp.vh[[a, b]] * sp.s[a]);
        let (_, p2, r2) = self.tensors[i + 1].dim();
        let next = self.tensors[i + 1].view().into_shape_with_order((r, p2 * r2))?.to_owned();
        self.tensors[i + 1] = sv.dot(&next).into_shape_with_order((k, p2, r2))?;
        Ok(())
    }

    fn shift_left(&mut self, i: usize) -> Result<()> {
        let (l, p, r) = self.tensors[i].dim();
        let m = self.tensors[i].view().into_shape_with_order((l, p * r))?.to_owned();
        let sp = split(&m, 0.0, usize::MAX)?;
        let k = sp.s.len();
        self.tensors[i] = sp.vh.into_shape_with_order((k, p, r))?;
        let us = Array2::from_shape_fn((l, k), |(a, b)| sp.u[[a, b]] * sp.s[b]);
        let (l0, p0, _) = self.tensors[i - 1].dim();
        let prev = self.tensors[i - 1].view().into_shape_with_order((l0 * p0, l))?.to_owned();
        self.tensors[i - 1] = prev.dot(&us).into_shape_with_order((l0, p0, k))?;
        Ok(())
    }

    /// Bring the orthogonality centre to `target` without truncation.
    pub fn move_center(&mut self, target: usize) -> Result<()> {
        let n = self.n_sites();
        if target >= n {
            return Err(Error::SiteOutOfRange { site: target, n_sites: n });
        }
        let start = match self.center {
            Some(c) => c,
            None => {
                for i in 0..n - 1 {
                    self.shift_right(i)?;
                }
                n - 1
            }
        };
        if start < target {
            for i in start..target {
                self.shift_right(i)?;
            }
        } else {
            for i in (target + 1..=start).rev() {
                self.shift_left(i)?;
            }
        }
        self.center = Some(target);
        Ok(())
    }

    /// Recanonicalise and truncate every bond with the configured settings.
    pub fn compress(&mut self) -> Result<()> {
        let n = self.n_sites();
        self.center = None;
        self.move_center(n - 1)?;
        for i in (1..n).rev() {
            let (l, p, r) = self.tensors[i].dim();
            let m = self.tensors[i].view().into_shape_with_order((l, p * r))?.to_owned();
            let sp = split(&m, self.config.cutoff, self.config.max_bond)?;
            self.discarded += sp.discarded;
            let k = sp.s.len();
            self.tensors[i] = sp.vh.into_shape_with_order((k, p, r))?;
            let us = Array2::from_shape_fn((l, k), |(a, b)| sp.u[[a, b]] * sp.s[b]);
            let (l0, p0, _) = self.tensors[i - 1].dim();
            let prev = self.tensors[i - 1].view().into_shape_with_order((l0 * p0, l))?.to_owned();
            self.tensors[i - 1] = prev.dot(&us).into_shape_with_order((l0, p0, k))?;
        }
        self.center = Some(0);
        Ok(())
    }

    pub fn apply_local(&mut self, site: usize, op: &Array2<C64>) {
        let t = &self.tensors[site];
        let (l, _, r) = t.dim();
        self.tensors[site] = Array3::from_shape_fn((l, 2, r), |(a, p, b)| op[[p, 0]] * t[[a, 0, b]] + op[[p, 1]] * t[[a, 1, b]]);
        if self.center != Some(site) {
            self.center = None;
        }
    }

    pub fn apply_product(&mut self, op: &ProductOperator) -> Result<()> {
        if op.n_sites() != self.n_sites() {
            return Err(Error::Shape(format!("{}-site operator on a {}-site MPS", op.n_sites(), self.n_sites())));
        }
        for (j, m) in op.locals.iter().enumerate() {
            if m != &Array2::<C64>::eye(2) {
                self.apply_local(j, m);
            }
        }
        Ok(())
    }

    /// Apply a 4×4 gate (row index `2 p_j + p_{j+1}`) on sites `j, j+1`,
    /// leaving the centre on `j+1` if `right`, else on `j`. Returns the
    /// discarded weight of the cut.
    pub fn apply_two(&mut self, j: usize, gate: &Array2<C64>, right: bool) -> Result<f64> {
        self.apply_two_with(j, gate, right, self.config.cutoff)
    }

    fn apply_two_with(&mut self, j: usize, gate: &Array2<C64>, right: bool, cutoff: f64) -> Result<f64> {
        match self.center {
            Some(c) if c == j || c == j + 1 => {}
            _ => self.move_center(j)?,
        }
        let (l, _, m) = self.tensors[j].dim();
        let (_, _, r) = self.tensors[j + 1].dim();
        let a = self.tensors[j].view().into_shape_with_order((l * 2, m))?.to_owned();
        let b = self.tensors[j + 1].view().into_shape_with_order((m, 2 * r))?.to_owned();
        let theta = a.dot(&b).into_shape_with_order((l, 2, 2, r))?;
        let mut out = Array2::<C64>::zeros((l * 2, 2 * r));
        for x in 0..l {
            for y in 0..r {
                for pq in 0..4 {
                    let mut acc = ZERO;
                    for pq2 in 0..4 {
                        acc += gate[[pq, pq2]] * theta[[x, pq2 / 2, pq2 % 2, y]];
                    }
                    out[[x * 2 + pq / 2, (pq % 2) * r + y]] = acc;
                }
            }
        }
        let sp = split(&out, cutoff, self.config.max_bond)?;
        let k = sp.s.len();
        let (u, vh) = if right {
            (sp.u, Array2::from_shape_fn((k, 2 * r), |(a, b)| sp.vh[[a, b]] * sp.s[a]))
        } else {
            (Array2::from_shape_fn((l * 2, k), |(a, b)| sp.u[[a, b]] * sp.s[b]), sp.vh)
        };
        self.tensors[j] = u.into_shape_with_order((l, 2, k))?;
        self.tensors[j + 1] = vh.into_shape_with_order((k, 2, r))?;
        self.center = Some(if right { j + 1 } else { j });
        self.discarded += sp.discarded;
        Ok(sp.discarded)
    }

    /// Direct sum; bond dimensions add. Call [`Mps::compress`] afterwards.
    pub fn add(&self, other: &Mps) -> Result<Mps> {
        let n = self.n_sites();
        if other.n_sites() != n {
            return Err(Error::Shape(format!("adding {}-site and {}-site states", n, other.n_sites())));
        }
        if n == 1 {
            let t = &self.tensors[0] + &other.tensors[0];
            return Ok(Mps { tensors: vec![t], center: Some(0), config: self.config, discarded: self.discarded });
        }
        let mut tensors = Vec::with_capacity(n);
        for (j, (a, b)) in self.tensors.iter().zip(&other.tensors).enumerate() {
            let (la, _, ra) = a.dim();
            let (lb, _, rb) = b.dim();
            let t = if j == 0 {
                let mut t = Array3::zeros((1, 2, ra + rb));
                t.slice_mut(s![.., .., ..ra]).assign(a);
                t.slice_mut(s![.., .., ra..]).assign(b);
                t
            } else if j == n - 1 {
                let mut t = Array3::zeros((la + lb, 2, 1));
                t.slice_mut(s![..la, .., ..]).assign(a);
                t.slice_mut(s![la.., .., ..]).assign(b);
                t
            } else {
                let mut t = Array3::zeros((la + lb, 2, ra + rb));
                t.slice_mut(s![..la, .., ..ra]).assign(a);
                t.slice_mut(s![la.., .., ra..]).assign(b);
                t
            };
            tensors.push(t);
        }
        Ok(Mps { tensors, center: None, config: self.config, discarded: self.discarded + other.discarded })
    }

    pub fn scale(&mut self, c: C64) {
        let site = self.center.unwrap_or(0);
        self.tensors[site].mapv_inplace(|z| z * c);
    }

    /// `⟨self|other⟩`.
    pub fn overlap(&self, other: &Mps) -> C64 {
        let mut env = Array2::from_elem((1, 1), ONE);
        for (a, b) in self.tensors.iter().zip(&other.tensors) {
            let mut next = Array2::<C64>::zeros((a.dim().2, b.dim().2));
            for p in 0..2 {
                let ap: Array2<C64> = a.slice(s![.., p, ..]).mapv(|z| z.conj());
                let bp: Array2<C64> = b.slice(s![.., p, ..]).to_owned();
                next = next + ap.t().dot(&env).dot(&bp);
            }
            env = next;
        }
        env[[0, 0]]
    }

    pub fn norm(&self) -> f64 {
        self.overlap(self).re.max(0.0).sqrt()
    }

    pub fn normalize(&mut self, what: &'static str) -> Result<()> {
        let n = self.norm();
        if !(n > 1e-14) {
            return Err(Error::ZeroNorm(what));
        }
        self.scale(C64::new(1.0 / n, 0.0));
        Ok(())
    }

    /// `⟨N_j⟩ / ⟨ψ|ψ⟩` for every site.
    pub fn measure_n(&self) -> Vec<f64> {
        let n = self.n_sites();
        let transfer = |env: &Array2<C64>, t: &Array3<C64>, left: bool, only: Option<usize>| {
            let (l, _, r) = t.dim();
            let mut out = if left { Array2::zeros((r, r)) } else { Array2::zeros((l, l)) };
            for p in 0..2 {
                if only.is_some_and(|q| q != p) {
                    continue;
                }
                let tp = t.slice(s![.., p, ..]);
                let tc = tp.mapv(|z| z.conj());
                out = out + if left { tc.t().dot(env).dot(&tp) } else { tc.dot(env).dot(&tp.t()) };
            }
            out
        };
        let mut lefts = vec![Array2::from_elem((1, 1), ONE)];
        for t in &self.tensors {
            let next = transfer(lefts.last().unwrap(), t, true, None);
            lefts.push(next);
        }
        let mut rights = vec![Array2::from_elem((1, 1), ONE); n + 1];
        for j in (0..n).rev() {
            rights[j] = transfer(&rights[j + 1], &self.tensors[j], false, None);
        }
        let norm = lefts[n][[0, 0]].re;
        (0..n)
            .map(|j| {
                let e = transfer(&lefts[j], &self.tensors[j], true, Some(1));
                let v: C64 = e.iter().zip(rights[j + 1].iter()).map(|(a, b)| a * b).sum();
                v.re / norm
            })
            .collect()
    }

    /// Full 2^N_s amplitude vector, site 0 most significant. Small chains only.
    pub fn to_dense(&self) -> Result<Array1<C64>> {
        let n = self.n_sites();
        if n > crate::states::MAX_DENSE_SITES {
            return Err(Error::SizeGuard { n_sites: n, max: crate::states::MAX_DENSE_SITES });
        }
        let mut acc = Array2::from_elem((1, 1), ONE);
        for t in &self.tensors {
            let (_, _, r) = t.dim();
            let rows = acc.nrows();
            let mut next = Array2::<C64>::zeros((rows * 2, r));
            for p in 0..2 {
                let block = acc.dot(&t.slice(s![.., p, ..]));
                for i in 0..rows {
                    next.row_mut(i * 2 + p).assign(&block.row(i));
                }
            }
            acc = next;
        }
        Ok(acc.column(0).to_owned())
    }
}

/// Gates for one symmetric step.
#[derive(Clone, Debug)]
pub struct GateSet {
    pub n_sites: usize,
    pub boundary: Boundary,
    /// Field factor for half a step.
    pub half_field: Array2<C64>,
    /// Bond factor for half a step.
    pub half_bond: Array2<C64>,
    /// Imaginary-time gates are not unitary; the state is renormalised.
    pub imaginary: bool,
}

fn swap_gate() -> Array2<C64> {
    let mut g = Array2::zeros((4, 4));
    for (a, b) in [(0, 0), (1, 2), (2, 1), (3, 3)] {
        g[[a, b]] = ONE;
    }
    g
}

fn xx_gate(c: C64, s: C64) -> Array2<C64> {
    // c·I + s·σˣ⊗σˣ
    let mut g = Array2::zeros((4, 4));
    for i in 0..4 {
        g[[i, i]] = c;
        g[[i, 3 - i]] = s;
    }
    g
}

impl GateSet {
    /// `e^{−iΔt H_T/2}` and `e^{−iΔt H_NN/2}` factors for
    /// `H = −λΣσˣσˣ − Σσᶻ`.
    pub fn real_time(n_sites: usize, lambda: f64, dt: f64, boundary: Boundary) -> Self {
        let h = dt / 2.0;
        let half_field = Array2::from_diag(&ndarray::arr1(&[C64::from_polar(1.0, h), C64::from_polar(1.0, -h)]));
        let th = lambda * h;
        let half_bond = xx_gate(C64::new(th.cos(), 0.0), C64::new(0.0, th.sin()));
        GateSet { n_sites, boundary, half_field, half_bond, imaginary: false }
    }

    /// `e^{−dτ H_T/2}` and `e^{−dτ H_NN/2}`.
    pub fn imaginary_time(n_sites: usize, lambda: f64, dtau: f64, boundary: Boundary) -> Self {
        let h = dtau / 2.0;
        let half_field = Array2::from_diag(&ndarray::arr1(&[C64::new(h.exp(), 0.0), C64::new((-h).exp(), 0.0)]));
        let th = lambda * h;
        let half_bond = xx_gate(C64::new(th.cosh(), 0.0), C64::new(th.sinh(), 0.0));
        GateSet { n_sites, boundary, half_field, half_bond, imaginary: true }
    }

    pub fn unitarity_defect(&self) -> f64 {
        crate::tensor::unitarity_defect(self.half_field.view()).max(crate::tensor::unitarity_defect(self.half_bond.view()))
    }
}

/// The wrap-around bond `(N_s−1, 0)`: carry the last site next to the first
/// with swaps, apply, carry it back.
fn periodic_bond(psi: &mut Mps, gate: &Array2<C64>) -> Result<f64> {
    let n = psi.n_sites();
    let swap = swap_gate();
    let mut dw = 0.0;
    // swaps only permute; they are cut at the bond cap but not at the cutoff
    for j in (1..n - 1).rev() {
        dw += psi.apply_two_with(j, &swap, false, 0.0)?;
    }
    dw += psi.apply_two(0, gate, true)?;
    for j in 1..n - 1 {
        dw += psi.apply_two_with(j, &swap, true, 0.0)?;
    }
    Ok(dw)
}

fn apply_field(psi: &mut Mps, gates: &GateSet) {
    let center = psi.center;
    for j in 0..psi.n_sites() {
        psi.apply_local(j, &gates.half_field);
    }
    if !gates.imaginary {
        // a product of single-site unitaries keeps the canonical form
        psi.center = center;
    }
}

/// One symmetric step: field half step, bond half steps left to right, the
/// same again right to left, field half step. All bond factors commute, so
/// with no truncation this is exactly the split-step operator of the dense
/// reference. Returns the discarded weight of the step.
pub fn trotter_step(psi: &mut Mps, gates: &GateSet) -> Result<f64> {
    let n = psi.n_sites();
    if gates.n_sites != n {
        return Err(Error::Shape(format!("{}-site gates on a {}-site MPS", gates.n_sites, n)));
    }
    let mut dw = 0.0;
    if n >= 2 {
        psi.move_center(0)?;
    }
    apply_field(psi, gates);
    if n >= 2 {
        let wrap = gates.boundary == Boundary::Periodic;
        for j in 0..n - 1 {
            dw += psi.apply_two(j, &gates.half_bond, true)?;
        }
        if wrap {
            // both half factors of the wrap bond meet here; one transport suffices
            dw += periodic_bond(psi, &gates.half_bond.dot(&gates.half_bond))?;
        }
        for j in (0..n - 1).rev() {
            dw += psi.apply_two(j, &gates.half_bond, false)?;
        }
    }
    apply_field(psi, gates);
    if gates.imaginary {
        psi.normalize("imaginary-time step")?;
    }
    Ok(dw)
}

/// Imaginary-time schedule `(dτ, steps)` used by [`ground_state_mps`].
pub const GROUND_SCHEDULE: [(f64, usize); 4] = [(0.1, 100), (0.02, 100), (0.005, 100), (0.001, 200)];

/// Ground state by imaginary-time evolution from the all-up state.
pub fn ground_state_mps(n_sites: usize, lambda: f64, config: TebdConfig) -> Result<Mps> {
    let mut psi = Mps::all_up(n_sites, config);
    if lambda == 0.0 {
        return Ok(psi);
    }
    for &(dtau, steps) in &GROUND_SCHEDULE {
        let gates = GateSet::imaginary_time(n_sites, lambda, dtau, config.boundary);
        for _ in 0..steps {
            trotter_step(&mut psi, &gates)?;
        }
    }
    Ok(psi)
}

/// `Σ_j coef_j c†_j |base⟩` as a sum of MPS with recompression after each
/// term, normalised.
pub fn packet_mps(spec: &WavePacketSpec, base: &Mps) -> Result<Mps> {
    let n = base.n_sites();
    spec.validate(n)?;
    let mut acc: Option<Mps> = None;
    for (j, c) in spec.coefficients(n).into_iter().enumerate() {
        if c.norm() == 0.0 {
            continue;
        }
        let mut term = base.clone();
        term.apply_product(&jw_creation(n, j)?)?;
        term.scale(c);
        acc = Some(match acc {
            None => term,
            Some(prev) => {
                let mut sum = prev.add(&term)?;
                sum.compress()?;
                sum
            }
        });
    }
    let mut psi = acc.ok_or(Error::ZeroNorm("packet creation"))?;
    psi.compress()?;
    psi.normalize("packet creation")?;
    Ok(psi)
}

/// Evolve and record the same observables as the truncated-basis runs.
pub fn tebd_evolve(psi: &Mps, gates: &GateSet, steps: usize, dt: f64) -> Result<(EvolutionRun, Vec<f64>)> {
    let mut run = EvolutionRun { dt, ..Default::default() };
    let mut cur = psi.clone();
    let mut discarded = vec![0.0];
    run.series.push(StepRecord::from_occupations(0, 0.0, cur.measure_n(), cur.norm()));
    for step in 1..=steps {
        discarded.push(trotter_step(&mut cur, gates)?);
        run.series.push(StepRecord::from_occupations(step, step as f64 * dt, cur.measure_n(), cur.norm()));
    }
    Ok((run, discarded))
}
