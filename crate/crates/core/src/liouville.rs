//! Lindblad generators as sparse superoperators and their steady states.
//!
//! Density matrices are column-stacked: `ρ_ij` sits at index `i + j·d`, so
//! `vec(AXB) = (Bᵀ ⊗ A) vec(X)`. The master equation is
//!
//! ```text
//! ∂ρ = i[ρ, H] + Σ_k (γ_k/2)(2 c_k ρ c_k† − c_k†c_k ρ − ρ c_k†c_k)
//! ```
//!
//! which is `γ_k·D[c_k]` in the `D[c]ρ = cρc† − ½{c†c, ρ}` convention.
//!
//! Numerical work happens in a graded frame `L̃ = D⁻¹LD` where `D` is
//! diagonal with entries `s_i s_j` built from a per-basis-state scale `s`.
//! Correlations of weakly coupled sensors live in matrix elements many
//! orders of magnitude below the dominant ones; grading puts them on an
//! equal footing so that relative accuracy survives the linear algebra.

use std::sync::{Arc, Once};

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::Mat;

use crate::error::{Error, Result};
use crate::hilbert::{CompositeSpace, Operator};
use crate::regression::LiouvilleVector;
use crate::sparse::{CsrMatrix, C64, ONE, ZERO};

#[derive(Debug, Clone, PartialEq)]
pub struct Dissipator {
    pub rate: f64,
    pub collapse: Operator,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MasterEquation {
    space: Arc<CompositeSpace>,
    hamiltonian: Operator,
    dissipators: Vec<Dissipator>,
}

impl MasterEquation {
    pub fn new(hamiltonian: Operator, dissipators: Vec<Dissipator>) -> Result<Self> {
        let space = Arc::clone(hamiltonian.space());
        let dev = hamiltonian.hermiticity_deviation();
        if dev > 1e-12 * hamiltonian.matrix().max_abs() {
            return Err(Error::NonHermitian { deviation: dev });
        }
        for d in &dissipators {
            if !(d.rate >= 0.0 && d.rate.is_finite()) {
                return Err(Error::InvalidParameter(format!("dissipator rate {} must be finite and >= 0", d.rate)));
            }
            if **d.collapse.space() != *space {
                return Err(Error::SpaceMismatch);
            }
        }
        Ok(Self {
            space,
            hamiltonian,
            dissipators,
        })
    }

    pub fn space(&self) -> &Arc<CompositeSpace> {
        &self.space
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.hamiltonian
    }

    pub fn dissipators(&self) -> &[Dissipator] {
        &self.dissipators
    }

    /// Smallest strictly positive dissipator rate, if any.
    pub fn smallest_rate(&self) -> Option<f64> {
        self.dissipators
            .iter()
            .map(|d| d.rate)
            .filter(|&r| r > 0.0)
            .min_by(f64::total_cmp)
    }

    /// The same master equation re-expressed on a larger space whose leading
    /// factors coincide with this one.
    pub fn lift(&self, target: &Arc<CompositeSpace>) -> Result<Self> {
        let h = self.hamiltonian.lift(target)?;
        let d = self
            .dissipators
            .iter()
            .map(|d| {
                Ok(Dissipator {
                    rate: d.rate,
                    collapse: d.collapse.lift(target)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            space: Arc::clone(target),
            hamiltonian: h,
            dissipators: d,
        })
    }

    pub(crate) fn with_terms(&self, h_extra: &Operator, extra: Vec<Dissipator>) -> Result<Self> {
        let mut dissipators = self.dissipators.clone();
        dissipators.extend(extra);
        Self::new(self.hamiltonian.add(h_extra)?, dissipators)
    }
}

#[derive(Debug, Clone)]
pub struct DensityMatrix {
    inner: LiouvilleVector,
}

impl DensityMatrix {
    pub fn as_vector(&self) -> &LiouvilleVector {
        &self.inner
    }

    pub fn space(&self) -> &Arc<CompositeSpace> {
        self.inner.space()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.inner.get(i, j)
    }

    pub fn trace(&self) -> C64 {
        self.inner.trace()
    }

    /// Maximally mixed state `𝟙/d`.
    pub fn maximally_mixed(space: &Arc<CompositeSpace>) -> Self {
        let d = space.dim();
        let mut v = LiouvilleVector::zeros(space);
        for i in 0..d {
            v.set(i, i, C64::new(1.0 / d as f64, 0.0));
        }
        Self { inner: v }
    }

    /// Writes nonzero entries as `row col re im` lines.
    pub fn write_coordinates(&self, w: &mut impl std::io::Write) -> std::io::Result<()> {
        let d = self.space().dim();
        let mut entries = Vec::new();
        for i in 0..d {
            for j in 0..d {
                let v = self.get(i, j);
                if v != ZERO {
                    entries.push((i, j, v));
                }
            }
        }
        crate::hilbert::write_coordinates(&entries, w)
    }
}

/// `Tr[Aρ]`.
pub fn expectation(rho: &DensityMatrix, a: &Operator) -> Result<C64> {
    rho.inner.trace_with(a)
}

/// Connected components of the superoperator's sparsity graph.
#[derive(Debug, Clone)]
pub(crate) struct Block {
    pub indices: Vec<usize>,
    pub matrix: CsrMatrix,
}

#[derive(Debug, Clone)]
pub struct Liouvillian {
    me: MasterEquation,
    superop: CsrMatrix,
    state_scale: Vec<f64>,
    blocks: Vec<Block>,
    block_of: Vec<usize>,
    local: Vec<usize>,
    norm: f64,
}

static SEQUENTIAL: Once = Once::new();

fn sequential_faer() {
    SEQUENTIAL.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

pub fn build_liouvillian(me: &MasterEquation) -> Result<Liouvillian> {
    Liouvillian::new(me.clone())
}

pub fn steady_state(l: &Liouvillian) -> Result<DensityMatrix> {
    l.steady_state()
}

impl Liouvillian {
    pub fn new(me: MasterEquation) -> Result<Self> {
        let d = me.space.dim();
        Self::with_state_scale(me, vec![1.0; d])
    }

    /// Builds the generator with a grading `s_i` per Hilbert basis state.
    /// Scales must be positive and finite; they change the conditioning of
    /// internal solves, never the represented operator.
    pub fn with_state_scale(me: MasterEquation, state_scale: Vec<f64>) -> Result<Self> {
        sequential_faer();
        let d = me.space.dim();
        if state_scale.len() != d || state_scale.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidParameter("state scale must hold one positive entry per basis state".into()));
        }
        let superop = assemble(&me);
        let norm = superop.frobenius_norm();
        let (blocks, block_of, local) = decompose(&superop, &state_scale, d);
        Ok(Self {
            me,
            superop,
            state_scale,
            blocks,
            block_of,
            local,
            norm,
        })
    }

    pub fn master_equation(&self) -> &MasterEquation {
        &self.me
    }

    pub fn space(&self) -> &Arc<CompositeSpace> {
        &self.me.space
    }

    pub fn superop(&self) -> &CsrMatrix {
        &self.superop
    }

    pub fn hilbert_dim(&self) -> usize {
        self.me.space.dim()
    }

    pub fn dim(&self) -> usize {
        self.superop.nrows()
    }

    /// Frobenius norm of the superoperator.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.indices.len()).collect()
    }

    pub fn state_scale(&self) -> &[f64] {
        &self.state_scale
    }

    /// `L(σ)` evaluated with the unscaled superoperator.
    pub fn apply(&self, sigma: &LiouvilleVector) -> LiouvilleVector {
        LiouvilleVector::from_data(Arc::clone(self.space()), self.superop.mul_vec(sigma.data()))
    }

    pub(crate) fn liouville_scale(&self, p: usize) -> f64 {
        let d = self.hilbert_dim();
        self.state_scale[p % d] * self.state_scale[p / d]
    }

    pub(crate) fn to_graded(&self, v: &[C64]) -> Vec<C64> {
        v.iter().enumerate().map(|(p, x)| x / self.liouville_scale(p)).collect()
    }

    pub(crate) fn from_graded(&self, v: &[C64]) -> Vec<C64> {
        v.iter().enumerate().map(|(p, x)| x * self.liouville_scale(p)).collect()
    }

    /// Blocks touched by the nonzero entries of `v`, in ascending order.
    pub(crate) fn support_blocks(&self, v: &[C64]) -> Vec<usize> {
        let mut hit = vec![false; self.blocks.len()];
        for (p, x) in v.iter().enumerate() {
            if *x != ZERO {
                hit[self.block_of[p]] = true;
            }
        }
        (0..self.blocks.len()).filter(|&b| hit[b]).collect()
    }

    /// Applies `f` blockwise to a graded vector, leaving untouched blocks at zero.
    pub(crate) fn map_blocks(
        &self,
        v: &[C64],
        mut f: impl FnMut(&Block, Vec<C64>) -> Result<Vec<C64>>,
    ) -> Result<Vec<C64>> {
        let mut out = vec![ZERO; v.len()];
        for b in self.support_blocks(v) {
            let block = &self.blocks[b];
            let x: Vec<C64> = block.indices.iter().map(|&p| v[p]).collect();
            let y = f(block, x)?;
            for (&p, val) in block.indices.iter().zip(y) {
                out[p] = val;
            }
        }
        Ok(out)
    }

    /// Solves `(L̃ + shift)x = rhs` on the graded frame, blockwise.
    pub(crate) fn solve_shifted_graded(&self, shift: C64, rhs: &[C64]) -> Result<Vec<C64>> {
        let singular = || Error::ResolventSingular {
            re: shift.re,
            im: shift.im,
        };
        self.map_blocks(rhs, |block, b| {
            let n = b.len();
            let mut trip: Vec<_> = block.matrix.iter().collect();
            trip.extend((0..n).map(|i| (i, i, shift)));
            let a = CsrMatrix::from_triplets(n, n, trip);
            let x = lu_solve_refined(&a, &b).ok_or_else(singular)?;
            Ok(x)
        })
    }

    pub fn steady_state(&self) -> Result<DensityMatrix> {
        let d = self.hilbert_dim();
        let b0 = self.block_of[0];
        if (0..d).any(|i| self.block_of[i + i * d] != b0) {
            return Err(Error::DegenerateSteadyState);
        }
        let block = &self.blocks[b0];
        let n = block.indices.len();
        let row = self.local[0];
        let mut trip: Vec<_> = block.matrix.iter().filter(|&(i, _, _)| i != row).collect();
        for i in 0..d {
            let s = self.state_scale[i];
            trip.push((row, self.local[i + i * d], C64::new(s * s, 0.0)));
        }
        let a = CsrMatrix::from_triplets(n, n, trip);
        let mut rhs = vec![ZERO; n];
        rhs[row] = ONE;
        let x = lu_solve_refined(&a, &rhs).ok_or(Error::DegenerateSteadyState)?;
        if x.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::DegenerateSteadyState);
        }
        let mut graded = vec![ZERO; d * d];
        for (&p, v) in block.indices.iter().zip(x) {
            graded[p] = v;
        }
        let mut rho = LiouvilleVector::from_data(Arc::clone(self.space()), self.from_graded(&graded));
        rho.hermitize();
        let tr = rho.trace();
        rho.scale_in_place(ONE / tr);
        let residual = self.apply(&rho).frobenius_norm();
        if !(residual < 1e-10 * self.norm.max(f64::MIN_POSITIVE)) && residual != 0.0 {
            return Err(Error::SteadyStateNotConverged { residual });
        }
        Ok(DensityMatrix { inner: rho })
    }
}

/// `L = I⊗K + K̄⊗I + Σ γ c̄⊗c` with `K = −iH − Σ (γ/2) c†c`.
fn assemble(me: &MasterEquation) -> CsrMatrix {
    let d = me.space.dim();
    let id = CsrMatrix::identity(d);
    let mut k = me.hamiltonian.matrix().scale(C64::new(0.0, -1.0));
    let mut jump = CsrMatrix::zeros(d * d, d * d);
    for diss in &me.dissipators {
        if diss.rate == 0.0 {
            continue;
        }
        let c = diss.collapse.matrix();
        let cdc = c.adjoint().matmul(c);
        k = k.sub(&cdc.scale(C64::new(diss.rate / 2.0, 0.0)));
        jump = jump.add(&c.conj().kron(c).scale(C64::new(diss.rate, 0.0)));
    }
    id.kron(&k).add(&k.conj().kron(&id)).add(&jump)
}

type Decomposition = (Vec<Block>, Vec<usize>, Vec<usize>);

fn decompose(superop: &CsrMatrix, scale: &[f64], d: usize) -> Decomposition {
    let n = superop.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (i, j, _) in superop.iter() {
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
        if ri != rj {
            let (lo, hi) = if ri < rj { (ri, rj) } else { (rj, ri) };
            parent[hi] = lo;
        }
    }
    let mut root_block = vec![usize::MAX; n];
    let mut block_of = vec![0; n];
    let mut members: Vec<Vec<usize>> = Vec::new();
    for p in 0..n {
        let r = find(&mut parent, p);
        if root_block[r] == usize::MAX {
            root_block[r] = members.len();
            members.push(Vec::new());
        }
        block_of[p] = root_block[r];
        members[root_block[r]].push(p);
    }
    let mut local = vec![usize::MAX; n];
    for m in &members {
        for (k, &p) in m.iter().enumerate() {
            local[p] = k;
        }
    }
    let lscale = |p: usize| scale[p % d] * scale[p / d];
    let blocks = members
        .into_iter()
        .map(|indices| {
            let sub = superop.principal_submatrix(&indices, &local);
            let matrix = sub.map_values(|i, j, v| v * (lscale(indices[j]) / lscale(indices[i])));
            Block { indices, matrix }
        })
        .collect();
    (blocks, block_of, local)
}

/// Sparse LU solve with one step of iterative refinement. Returns `None`
/// when the factorization fails or produces non-finite values.
pub(crate) fn lu_solve_refined(a: &CsrMatrix, b: &[C64]) -> Option<Vec<C64>> {
    sequential_faer();
    let n = b.len();
    let csc = a.to_faer_csc();
    let lu: Lu<usize, C64> = csc.sp_lu().ok()?;
    let rhs = Mat::from_fn(n, 1, |i, _| b[i]);
    let x0 = lu.solve(&rhs);
    let mut x: Vec<C64> = (0..n).map(|i| x0[(i, 0)]).collect();
    if x.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return None;
    }
    let ax = a.mul_vec(&x);
    let r = Mat::from_fn(n, 1, |i, _| b[i] - ax[i]);
    let dx = lu.solve(&r);
    for (i, xi) in x.iter_mut().enumerate() {
        *xi += dx[(i, 0)];
    }
    if x.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return None;
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{annihilator, identity, make_space, number, FactorSpec};

    fn qubit(gamma: f64, pump: f64) -> MasterEquation {
        let s = make_space(vec![FactorSpec::qubit("q")]).unwrap();
        let sm = annihilator(&s, "q").unwrap();
        let mut diss = vec![Dissipator { rate: gamma, collapse: sm.clone() }];
        if pump > 0.0 {
            diss.push(Dissipator { rate: pump, collapse: sm.adjoint() });
        }
        MasterEquation::new(crate::hilbert::Operator::zero(&s), diss).unwrap()
    }

    #[test]
    fn rejects_non_hermitian() {
        let s = make_space(vec![FactorSpec::qubit("q")]).unwrap();
        let sm = annihilator(&s, "q").unwrap();
        assert!(matches!(MasterEquation::new(sm, vec![]), Err(Error::NonHermitian { .. })));
    }

    #[test]
    fn zero_generator() {
        let s = make_space(vec![FactorSpec::boson("a", 2)]).unwrap();
        let me = MasterEquation::new(crate::hilbert::Operator::zero(&s), vec![]).unwrap();
        let l = build_liouvillian(&me).unwrap();
        assert_eq!(l.superop().nnz(), 0);
        assert_eq!(l.steady_state().unwrap_err(), Error::DegenerateSteadyState);
    }

    #[test]
    fn qubit_steady_states() {
        let l = build_liouvillian(&qubit(1.0, 0.0)).unwrap();
        let rho = l.steady_state().unwrap();
        assert!((rho.get(0, 0) - ONE).norm() < 1e-14);
        assert!(rho.get(1, 1).norm() < 1e-14);

        let (g, p) = (0.7, 0.3);
        let l = build_liouvillian(&qubit(g, p)).unwrap();
        let rho = l.steady_state().unwrap();
        let n = number(l.space(), "q").unwrap();
        let pop = expectation(&rho, &n).unwrap();
        assert!((pop.re - p / (p + g)).abs() < 1e-14);
        assert!((expectation(&rho, &identity(l.space())).unwrap() - ONE).norm() < 1e-14);
    }

    #[test]
    fn thermal_cavity_population() {
        let s = make_space(vec![FactorSpec::boson("a", 10)]).unwrap();
        let a = annihilator(&s, "a").unwrap();
        let me = MasterEquation::new(
            crate::hilbert::Operator::zero(&s),
            vec![
                Dissipator { rate: 1.0, collapse: a.clone() },
                Dissipator { rate: 0.5, collapse: a.adjoint() },
            ],
        )
        .unwrap();
        let l = build_liouvillian(&me).unwrap();
        let rho = l.steady_state().unwrap();
        let n = expectation(&rho, &number(&s, "a").unwrap()).unwrap().re;
        assert!((n - 1.0).abs() < 0.01, "n = {n}");
    }

    #[test]
    fn maximally_mixed_trace() {
        let s = make_space(vec![FactorSpec::boson("a", 3)]).unwrap();
        let rho = DensityMatrix::maximally_mixed(&s);
        assert!((expectation(&rho, &identity(&s)).unwrap() - ONE).norm() < 1e-15);
    }

    #[test]
    fn grading_does_not_change_solution() {
        let (g, p) = (0.7, 0.3);
        let plain = build_liouvillian(&qubit(g, p)).unwrap().steady_state().unwrap();
        let graded = Liouvillian::with_state_scale(qubit(g, p), vec![1.0, 1e-6])
            .unwrap()
            .steady_state()
            .unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((plain.get(i, j) - graded.get(i, j)).norm() < 1e-14);
            }
        }
    }
}
