//! Truncated tensor-product Hilbert spaces and sparse operators on them.
//!
//! Index convention: the first factor varies slowest, so a composite basis
//! state `|n_0, n_1, …⟩` has index `((n_0·d_1 + n_1)·d_2 + n_2)…`.

use std::fmt::Write as _;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::{CsrMatrix, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorKind {
    Boson { n_max: usize },
    Qubit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorSpec {
    pub label: String,
    pub kind: FactorKind,
}

impl FactorSpec {
    pub fn boson(label: impl Into<String>, n_max: usize) -> Self {
        Self {
            label: label.into(),
            kind: FactorKind::Boson { n_max },
        }
    }

    pub fn qubit(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            kind: FactorKind::Qubit,
        }
    }

    pub fn local_dim(&self) -> usize {
        match self.kind {
            FactorKind::Boson { n_max } => n_max + 1,
            FactorKind::Qubit => 2,
        }
    }

    /// Lowering operator on this factor alone.
    pub fn local_lowering(&self) -> CsrMatrix {
        let d = self.local_dim();
        let trip = (1..d).map(|n| (n - 1, n, C64::new((n as f64).sqrt(), 0.0))).collect();
        CsrMatrix::from_triplets(d, d, trip)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompositeSpace {
    factors: Vec<FactorSpec>,
    dim: usize,
}

/// Builds a composite space from an ordered, non-empty list of factors.
pub fn make_space(factors: Vec<FactorSpec>) -> Result<Arc<CompositeSpace>> {
    if factors.is_empty() {
        return Err(Error::InvalidParameter("a space needs at least one factor".into()));
    }
    for (i, f) in factors.iter().enumerate() {
        if let FactorKind::Boson { n_max } = f.kind {
            if n_max < 1 {
                return Err(Error::InvalidFactor {
                    label: f.label.clone(),
                    reason: "n_max must be at least 1".into(),
                });
            }
        }
        if factors[..i].iter().any(|g| g.label == f.label) {
            return Err(Error::DuplicateLabel(f.label.clone()));
        }
    }
    let dim = factors.iter().map(FactorSpec::local_dim).product();
    Ok(Arc::new(CompositeSpace { factors, dim }))
}

impl CompositeSpace {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn factors(&self) -> &[FactorSpec] {
        &self.factors
    }

    pub fn factor_index(&self, label: &str) -> Result<usize> {
        self.factors
            .iter()
            .position(|f| f.label == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    /// Dimension of the factors strictly after position `k`.
    fn stride(&self, k: usize) -> usize {
        self.factors[k + 1..].iter().map(FactorSpec::local_dim).product()
    }

    /// Occupation of factor `k` in composite basis state `index`.
    pub fn level(&self, index: usize, k: usize) -> usize {
        (index / self.stride(k)) % self.factors[k].local_dim()
    }

    /// Returns a new space with `extra` factors appended after the existing ones.
    pub fn extended(&self, extra: Vec<FactorSpec>) -> Result<Arc<CompositeSpace>> {
        let mut factors = self.factors.clone();
        factors.extend(extra);
        make_space(factors)
    }

    /// Embeds a local matrix acting on factor `k` into the full space.
    pub fn embed(self: &Arc<Self>, k: usize, local: &CsrMatrix) -> Operator {
        let before: usize = self.factors[..k].iter().map(FactorSpec::local_dim).product();
        let after = self.stride(k);
        let m = CsrMatrix::identity(before)
            .kron(local)
            .kron(&CsrMatrix::identity(after));
        Operator {
            space: Arc::clone(self),
            matrix: m,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    space: Arc<CompositeSpace>,
    matrix: CsrMatrix,
}

/// Lowering operator of the factor named `label`, identity elsewhere.
pub fn annihilator(space: &Arc<CompositeSpace>, label: &str) -> Result<Operator> {
    let k = space.factor_index(label)?;
    Ok(space.embed(k, &space.factors[k].local_lowering()))
}

/// `c†c` for the factor named `label`.
pub fn number(space: &Arc<CompositeSpace>, label: &str) -> Result<Operator> {
    let a = annihilator(space, label)?;
    Ok(a.adjoint().matmul(&a).expect("same space"))
}

pub fn identity(space: &Arc<CompositeSpace>) -> Operator {
    Operator {
        space: Arc::clone(space),
        matrix: CsrMatrix::identity(space.dim),
    }
}

impl Operator {
    pub fn new(space: Arc<CompositeSpace>, matrix: CsrMatrix) -> Result<Self> {
        if matrix.nrows() != space.dim || matrix.ncols() != space.dim {
            return Err(Error::InvalidParameter(format!(
                "matrix is {}x{}, space dimension is {}",
                matrix.nrows(),
                matrix.ncols(),
                space.dim
            )));
        }
        Ok(Self { space, matrix })
    }

    pub fn zero(space: &Arc<CompositeSpace>) -> Self {
        Self {
            space: Arc::clone(space),
            matrix: CsrMatrix::zeros(space.dim, space.dim),
        }
    }

    pub fn space(&self) -> &Arc<CompositeSpace> {
        &self.space
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    fn check(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.space, &other.space) || self.space == other.space {
            Ok(())
        } else {
            Err(Error::SpaceMismatch)
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        Ok(Self {
            space: Arc::clone(&self.space),
            matrix: self.matrix.add(&other.matrix),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        Ok(Self {
            space: Arc::clone(&self.space),
            matrix: self.matrix.sub(&other.matrix),
        })
    }

    pub fn scale(&self, c: impl Into<C64>) -> Self {
        Self {
            space: Arc::clone(&self.space),
            matrix: self.matrix.scale(c.into()),
        }
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        Ok(Self {
            space: Arc::clone(&self.space),
            matrix: self.matrix.matmul(&other.matrix),
        })
    }

    pub fn adjoint(&self) -> Self {
        Self {
            space: Arc::clone(&self.space),
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.matmul(other)?.sub(&other.matmul(self)?)
    }

    /// Re-expresses this operator on `target`, whose leading factors must
    /// equal this operator's space; the appended factors get the identity.
    pub fn lift(&self, target: &Arc<CompositeSpace>) -> Result<Self> {
        let n = self.space.factors.len();
        if target.factors.len() < n || target.factors[..n] != self.space.factors[..] {
            return Err(Error::SpaceMismatch);
        }
        let rest = target.dim / self.space.dim;
        Ok(Self {
            space: Arc::clone(target),
            matrix: self.matrix.kron(&CsrMatrix::identity(rest)),
        })
    }

    /// Largest entry of `A − A†` in absolute value.
    pub fn hermiticity_deviation(&self) -> f64 {
        self.matrix.sub(&self.matrix.adjoint()).max_abs()
    }

    /// Coordinate-list dump: `row col re im` per nonzero.
    pub fn write_coordinates(&self, w: &mut impl Write) -> std::io::Result<()> {
        write_coordinates(&self.matrix.triplets(), w)
    }

    pub fn to_coordinate_string(&self) -> String {
        let mut s = String::new();
        for (i, j, v) in self.matrix.iter() {
            let _ = writeln!(s, "{i} {j} {:.16e} {:.16e}", v.re, v.im);
        }
        s
    }
}

pub(crate) fn write_coordinates(entries: &[(usize, usize, C64)], w: &mut impl Write) -> std::io::Result<()> {
    for (i, j, v) in entries {
        writeln!(w, "{i} {j} {:.16e} {:.16e}", v.re, v.im)?;
    }
    Ok(())
}
