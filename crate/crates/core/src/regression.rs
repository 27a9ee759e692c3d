//! Propagation in Liouville space and two-time correlators by the quantum
//! regression theorem.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::hilbert::{CompositeSpace, Operator};
use crate::krylov::expv;
use crate::liouville::{DensityMatrix, Liouvillian};
use crate::sparse::{C64, ZERO};

pub const DEFAULT_RTOL: f64 = 1e-8;

/// A general operator on the Hilbert space, column-stacked.
#[derive(Debug, Clone, PartialEq)]
pub struct LiouvilleVector {
    space: Arc<CompositeSpace>,
    data: Vec<C64>,
}

impl LiouvilleVector {
    pub fn zeros(space: &Arc<CompositeSpace>) -> Self {
        let d = space.dim();
        Self {
            space: Arc::clone(space),
            data: vec![ZERO; d * d],
        }
    }

    pub(crate) fn from_data(space: Arc<CompositeSpace>, data: Vec<C64>) -> Self {
        debug_assert_eq!(data.len(), space.dim() * space.dim());
        Self { space, data }
    }

    /// Builds from a row-major dense `d×d` array.
    pub fn from_row_major(space: &Arc<CompositeSpace>, m: &[C64]) -> Result<Self> {
        let d = space.dim();
        if m.len() != d * d {
            return Err(Error::InvalidParameter(format!("expected {} entries, got {}", d * d, m.len())));
        }
        let mut v = Self::zeros(space);
        for i in 0..d {
            for j in 0..d {
                v.set(i, j, m[i * d + j]);
            }
        }
        Ok(v)
    }

    pub fn space(&self) -> &Arc<CompositeSpace> {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// Column-stacked entries.
    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i + j * self.dim()]
    }

    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        let d = self.dim();
        self.data[i + j * d] = v;
    }

    pub fn trace(&self) -> C64 {
        let d = self.dim();
        (0..d).map(|i| self.data[i + i * d]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale_in_place(&mut self, c: C64) {
        self.data.iter_mut().for_each(|v| *v *= c);
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            space: Arc::clone(&self.space),
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn adjoint(&self) -> Self {
        let d = self.dim();
        let mut out = Self::zeros(&self.space);
        for i in 0..d {
            for j in 0..d {
                out.set(j, i, self.get(i, j).conj());
            }
        }
        out
    }

    pub(crate) fn hermitize(&mut self) {
        let d = self.dim();
        for i in 0..d {
            for j in i..d {
                let v = 0.5 * (self.get(i, j) + self.get(j, i).conj());
                self.set(i, j, v);
                self.set(j, i, v.conj());
            }
        }
    }

    fn check(&self, a: &Operator) -> Result<()> {
        if **a.space() == *self.space {
            Ok(())
        } else {
            Err(Error::SpaceMismatch)
        }
    }

    /// `Aσ`.
    pub fn left_mul(&self, a: &Operator) -> Result<Self> {
        self.check(a)?;
        let d = self.dim();
        let mut out = vec![ZERO; d * d];
        for j in 0..d {
            a.matrix()
                .matvec(&self.data[j * d..(j + 1) * d], &mut out[j * d..(j + 1) * d]);
        }
        Ok(Self::from_data(Arc::clone(&self.space), out))
    }

    /// `σB`.
    pub fn right_mul(&self, b: &Operator) -> Result<Self> {
        self.check(b)?;
        let d = self.dim();
        let mut out = vec![ZERO; d * d];
        for (k, j, bkj) in b.matrix().iter() {
            let (src, dst) = (k * d, j * d);
            for i in 0..d {
                out[dst + i] += self.data[src + i] * bkj;
            }
        }
        Ok(Self::from_data(Arc::clone(&self.space), out))
    }

    /// `AσA†`.
    pub fn sandwich(&self, a: &Operator) -> Result<Self> {
        self.left_mul(a)?.right_mul(&a.adjoint())
    }

    /// `Tr[Aσ]`.
    pub fn trace_with(&self, a: &Operator) -> Result<C64> {
        self.check(a)?;
        let d = self.dim();
        Ok(a.matrix().iter().map(|(i, k, v)| v * self.data[k + i * d]).sum())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayGrid {
    delays: Vec<f64>,
    rtol: f64,
}

impl DelayGrid {
    pub fn new(delays: Vec<f64>) -> Result<Self> {
        Self::with_rtol(delays, DEFAULT_RTOL)
    }

    pub fn with_rtol(delays: Vec<f64>, rtol: f64) -> Result<Self> {
        if delays.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidDelays("non-finite delay".into()));
        }
        if delays.first().is_some_and(|&t| t < 0.0) {
            return Err(Error::InvalidDelays("first delay is negative".into()));
        }
        if delays.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidDelays("delays must be non-decreasing".into()));
        }
        if !(rtol > 0.0 && rtol < 1.0) {
            return Err(Error::InvalidParameter(format!("rtol {rtol} outside (0, 1)")));
        }
        Ok(Self { delays, rtol })
    }

    pub fn delays(&self) -> &[f64] {
        &self.delays
    }

    pub fn rtol(&self) -> f64 {
        self.rtol
    }
}

/// `e^{Lτ}σ`.
pub fn propagate(l: &Liouvillian, sigma: &LiouvilleVector, tau: f64, rtol: f64) -> Result<LiouvilleVector> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::InvalidDelays(format!("cannot propagate by {tau}")));
    }
    if tau == 0.0 {
        return Ok(sigma.clone());
    }
    let g = l.to_graded(sigma.data());
    let out = l.map_blocks(&g, |block, x| expv(&block.matrix, &x, tau, rtol))?;
    Ok(LiouvilleVector::from_data(Arc::clone(sigma.space()), l.from_graded(&out)))
}

/// Marches `σ` through the grid, calling `f(k, σ(τ_k))` at each point and
/// continuing from the previous state.
pub fn march<T>(
    l: &Liouvillian,
    sigma: &LiouvilleVector,
    start: f64,
    grid: &DelayGrid,
    mut f: impl FnMut(usize, &LiouvilleVector) -> Result<T>,
) -> Result<Vec<T>> {
    let mut state = sigma.clone();
    let mut t = start;
    let mut out = Vec::with_capacity(grid.delays.len());
    for (k, &tau) in grid.delays.iter().enumerate() {
        if tau < t {
            return Err(Error::InvalidDelays(format!("delay {tau} precedes {t}")));
        }
        state = propagate(l, &state, tau - t, grid.rtol)?;
        t = tau;
        out.push(f(k, &state)?);
    }
    Ok(out)
}

/// `Tr[mid · e^{Lτ}(right · ρ · left)]`.
pub fn two_time_sandwich(
    l: &Liouvillian,
    rho: &DensityMatrix,
    left: &Operator,
    mid: &Operator,
    right: &Operator,
    tau: f64,
) -> Result<C64> {
    let seed = rho.as_vector().left_mul(right)?.right_mul(left)?;
    propagate(l, &seed, tau, DEFAULT_RTOL)?.trace_with(mid)
}

/// Unfiltered `g⁽²⁾(τ) = ⟨a†a(τ)⟩_{aρa†} / ⟨a†a⟩²` on each grid delay.
pub fn colorblind_g2(l: &Liouvillian, rho: &DensityMatrix, a: &Operator, grid: &DelayGrid) -> Result<Vec<f64>> {
    let n = a.adjoint().matmul(a)?;
    let pop = rho.as_vector().trace_with(&n)?.re;
    if !(pop > 0.0) {
        return Err(Error::NormalizationUndefined);
    }
    let seed = rho.as_vector().sandwich(a)?;
    march(l, &seed, 0.0, grid, |_, s| Ok(s.trace_with(&n)?.re / (pop * pop)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{annihilator, identity, make_space, FactorSpec};
    use crate::liouville::{build_liouvillian, Dissipator, MasterEquation};
    use crate::sparse::ONE;

    fn decaying_qubit(gamma: f64) -> Liouvillian {
        let s = make_space(vec![FactorSpec::qubit("q")]).unwrap();
        let sm = annihilator(&s, "q").unwrap();
        let me = MasterEquation::new(Operator::zero(&s), vec![Dissipator { rate: gamma, collapse: sm }]).unwrap();
        build_liouvillian(&me).unwrap()
    }

    #[test]
    fn operator_products() {
        let s = make_space(vec![FactorSpec::boson("a", 2)]).unwrap();
        let a = annihilator(&s, "a").unwrap();
        let m: Vec<C64> = (0..9).map(|k| C64::new(k as f64, (k * k) as f64)).collect();
        let v = LiouvilleVector::from_row_major(&s, &m).unwrap();
        let dense_a = a.matrix().to_dense();
        let left = v.left_mul(&a).unwrap();
        let right = v.right_mul(&a).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let l: C64 = (0..3).map(|k| dense_a[i * 3 + k] * m[k * 3 + j]).sum();
                let r: C64 = (0..3).map(|k| m[i * 3 + k] * dense_a[k * 3 + j]).sum();
                assert!((left.get(i, j) - l).norm() < 1e-14);
                assert!((right.get(i, j) - r).norm() < 1e-14);
            }
        }
        let tr: C64 = (0..3).map(|i| left.get(i, i)).sum();
        assert!((v.trace_with(&a).unwrap() - tr).norm() < 1e-14);
    }

    #[test]
    fn zero_delay_is_identity() {
        let l = decaying_qubit(1.0);
        let s = l.space().clone();
        let v = LiouvilleVector::from_row_major(&s, &[ONE, C64::new(0.2, 0.1), ZERO, ONE]).unwrap();
        assert_eq!(propagate(&l, &v, 0.0, 1e-8).unwrap(), v);
    }

    #[test]
    fn qubit_decay() {
        let gamma = 0.8;
        let l = decaying_qubit(gamma);
        let s = l.space().clone();
        let excited = LiouvilleVector::from_row_major(&s, &[ZERO, ZERO, ZERO, ONE]).unwrap();
        for tau in [0.1, 1.0, 5.0] {
            let out = propagate(&l, &excited, tau, 1e-10).unwrap();
            assert!((out.get(1, 1).re - (-gamma * tau).exp()).abs() < 1e-9);
            assert!(out.get(0, 1).norm() < 1e-14);
            assert!((out.trace() - ONE).norm() < 1e-9);
        }
    }

    #[test]
    fn grid_rejects_unsorted() {
        assert!(DelayGrid::new(vec![1.0, 0.5]).is_err());
        assert!(DelayGrid::new(vec![-1.0]).is_err());
        assert!(DelayGrid::new(vec![0.0, 0.0, 2.0]).is_ok());
    }

    #[test]
    fn sandwich_identity_gives_one() {
        let l = decaying_qubit(1.0);
        let rho = l.steady_state().unwrap();
        let id = identity(l.space());
        let v = two_time_sandwich(&l, &rho, &id, &id, &id, 3.0).unwrap();
        assert!((v - ONE).norm() < 1e-10);
    }
}
