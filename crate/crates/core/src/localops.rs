//! Local product operators `A ⊗ B ⊗ C ⊗ ⋯`.
//!
//! A [`ProductOperator`] holds one contraction per party. Applying it to a
//! state gives the post-selected state together with the probability of the
//! outcome it represents. [`decompose`] splits a single factor into a local
//! projector, a local filter and a local unitary whose product rebuilds it.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::states::{DensityMatrix, SystemShape};
use crate::tensor::{
    self, complete_orthonormal, kron_all, numerical_rank, orthonormality_deviation, svd,
    ComplexMatrix, Tolerance,
};

/// Outcomes whose probability does not exceed this are treated as impossible.
pub const IMPOSSIBLE_BRANCH: f64 = 1e-12;

/// Slack on the unit spectral-norm bound of a factor.
pub const CONTRACTION_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LocalFactor {
    party: String,
    mat: ComplexMatrix,
}

impl LocalFactor {
    pub fn new(party: impl Into<String>, mat: ComplexMatrix) -> Result<Self> {
        let party = party.into();
        if !mat.is_square() {
            return Err(Error::ShapeMismatch(format!(
                "factor for party {party} is {}x{}",
                mat.rows(),
                mat.cols()
            )));
        }
        let norm = mat.spectral_norm();
        if norm > 1.0 + CONTRACTION_SLACK {
            return Err(Error::NotContraction { party, norm });
        }
        Ok(Self { party, mat })
    }

    /// Rescales `mat` to spectral norm one when it exceeds one. Returns the
    /// factor and the scale that was applied (1 when untouched).
    pub fn normalized(party: impl Into<String>, mat: ComplexMatrix) -> Result<(Self, f64)> {
        let norm = mat.spectral_norm();
        let scale = if norm > 1.0 { 1.0 / norm } else { 1.0 };
        let factor = Self::new(party, mat.scale_real(scale))?;
        Ok((factor, scale))
    }

    pub fn identity(party: impl Into<String>, dim: usize) -> Self {
        Self {
            party: party.into(),
            mat: ComplexMatrix::identity(dim),
        }
    }

    pub fn party(&self) -> &str {
        &self.party
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn rank(&self, tol: &Tolerance) -> usize {
        numerical_rank(&self.mat, tol)
    }

    pub fn is_full_rank(&self, tol: &Tolerance) -> bool {
        self.rank(tol) == self.dim()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProductOperator {
    shape: SystemShape,
    factors: Vec<LocalFactor>,
}

impl ProductOperator {
    pub fn new(shape: SystemShape, factors: Vec<LocalFactor>) -> Result<Self> {
        if factors.len() != shape.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} factors for {} parties",
                factors.len(),
                shape.len()
            )));
        }
        for (party, factor) in shape.parties().iter().zip(&factors) {
            if party.label != factor.party {
                return Err(Error::ShapeMismatch(format!(
                    "factor for party {} where {} was expected",
                    factor.party, party.label
                )));
            }
            if party.dim() != factor.dim() {
                return Err(Error::ShapeMismatch(format!(
                    "factor for party {} has side {}, party dimension is {}",
                    party.label,
                    factor.dim(),
                    party.dim()
                )));
            }
        }
        Ok(Self { shape, factors })
    }

    pub fn identity(shape: &SystemShape) -> Self {
        let factors = shape
            .parties()
            .iter()
            .map(|p| LocalFactor::identity(p.label.clone(), p.dim()))
            .collect();
        Self {
            shape: shape.clone(),
            factors,
        }
    }

    /// `mat` on one party, identity elsewhere.
    pub fn on_party(shape: &SystemShape, party: usize, mat: ComplexMatrix) -> Result<Self> {
        let mut factors = Self::identity(shape).factors;
        factors[party] = LocalFactor::new(shape.party(party).label.clone(), mat)?;
        Self::new(shape.clone(), factors)
    }

    pub fn shape(&self) -> &SystemShape {
        &self.shape
    }

    pub fn factors(&self) -> &[LocalFactor] {
        &self.factors
    }

    pub fn full_matrix(&self) -> Result<ComplexMatrix> {
        kron_all(self.factors.iter().map(|f| &f.mat))
    }

    /// Every factor is invertible on its party's space.
    pub fn is_full_rank(&self, tol: &Tolerance) -> bool {
        self.factors.iter().all(|f| f.is_full_rank(tol))
    }
}

/// A post-selected state and the probability of reaching it.
#[derive(Debug, Clone, PartialEq)]
pub struct Applied {
    pub state: DensityMatrix,
    pub probability: f64,
}

/// `M ρ M† / tr(M ρ M†)` for a full-space operator `M`.
pub fn apply_matrix(m: &ComplexMatrix, rho: &DensityMatrix) -> Result<Applied> {
    apply_matrix_into(m, rho, rho.shape().clone())
}

/// As [`apply_matrix`], for rectangular `M` whose output space has `out_shape`.
pub(crate) fn apply_matrix_into(
    m: &ComplexMatrix,
    rho: &DensityMatrix,
    out_shape: SystemShape,
) -> Result<Applied> {
    if m.cols() != rho.dim() || m.rows() != out_shape.total_dim() {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} operator on a state of dimension {}",
            m.rows(),
            m.cols(),
            rho.dim()
        )));
    }
    let out = &(m * rho.matrix()) * &m.adjoint();
    let trace = out.trace().re;
    if trace <= IMPOSSIBLE_BRANCH {
        return Err(Error::OutcomeNeverOccurs { trace });
    }
    let (state, probability) = DensityMatrix::from_unnormalized(out_shape, &out);
    Ok(Applied { state, probability })
}

pub fn apply(op: &ProductOperator, rho: &DensityMatrix) -> Result<Applied> {
    if op.shape.dims() != rho.shape().dims() || op.shape.labels() != rho.shape().labels() {
        return Err(Error::ShapeMismatch(format!(
            "operator on {} applied to a state on {}",
            op.shape,
            rho.shape()
        )));
    }
    let m = op.full_matrix()?;
    let applied = apply_matrix(&m, rho)?;
    Ok(Applied {
        state: DensityMatrix::new_unchecked(rho.shape().clone(), applied.state.matrix().clone()),
        probability: applied.probability,
    })
}

/// Projector × filter × unitary factorization of a local operator.
#[derive(Debug, Clone)]
pub struct LpoLfoLuo {
    /// Projector onto the span of the retained input vectors.
    pub lpo: ComplexMatrix,
    /// Positive filter reweighting the retained input vectors.
    pub lfo: ComplexMatrix,
    /// Unitary carrying the retained input vectors to the output vectors.
    pub luo: ComplexMatrix,
    pub retained_dim: usize,
    /// Filter weights, descending.
    pub weights: Vec<f64>,
    /// Retained input vectors, one per weight.
    pub inputs: Vec<Vec<C64>>,
    /// Output vectors, one per weight.
    pub outputs: Vec<Vec<C64>>,
}

impl LpoLfoLuo {
    /// `luo · lfo · lpo`
    pub fn reconstruct(&self) -> ComplexMatrix {
        &(&self.luo * &self.lfo) * &self.lpo
    }
}

pub fn decompose(f: &LocalFactor, tol: &Tolerance) -> Result<LpoLfoLuo> {
    decompose_matrix(&f.mat, tol)
}

pub fn decompose_matrix(m: &ComplexMatrix, tol: &Tolerance) -> Result<LpoLfoLuo> {
    if !m.is_square() {
        return Err(Error::ShapeMismatch(
            "decomposition of a non-square operator".into(),
        ));
    }
    let dim = m.rows();
    let s = svd(m);
    let retained = tensor::rank_of_singulars(&s.singulars, tol);
    if retained == 0 {
        return Err(Error::ZeroOperator);
    }
    let inputs: Vec<Vec<C64>> = (0..retained).map(|j| s.right.column(j)).collect();
    let outputs: Vec<Vec<C64>> = (0..retained).map(|j| s.left.column(j)).collect();
    let weights = s.singulars[..retained].to_vec();

    let mut lpo = ComplexMatrix::zeros(dim, dim);
    let mut lfo = ComplexMatrix::zeros(dim, dim);
    for (v, &w) in inputs.iter().zip(&weights) {
        let p = ComplexMatrix::projector(v);
        lfo = &lfo + &p.scale_real(w);
        lpo = &lpo + &p;
    }

    let v_full = ComplexMatrix::from_columns(&complete_orthonormal(&inputs, dim));
    let u_full = ComplexMatrix::from_columns(&complete_orthonormal(&outputs, dim));
    let luo = &u_full * &v_full.adjoint();

    Ok(LpoLfoLuo {
        lpo,
        lfo,
        luo,
        retained_dim: retained,
        weights,
        inputs,
        outputs,
    })
}

/// Whether `f` acts injectively on `span(basis)`.
pub fn is_full_rank_on(f: &LocalFactor, basis: &[Vec<C64>], tol: &Tolerance) -> Result<bool> {
    if basis.is_empty() {
        return Err(Error::NotOrthonormal("empty basis".into()));
    }
    if basis.iter().any(|v| v.len() != f.dim()) {
        return Err(Error::ShapeMismatch(format!(
            "basis vectors must have length {}",
            f.dim()
        )));
    }
    let dev = orthonormality_deviation(basis);
    if dev > tol.herm_atol.max(1e-9) {
        return Err(Error::NotOrthonormal(format!("Gram deviation {dev:e}")));
    }
    let b = ComplexMatrix::from_columns(basis);
    Ok(numerical_rank(&(&f.mat * &b), tol) == basis.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lemma1Report {
    pub rank_before: usize,
    pub rank_after: usize,
    pub full_rank: bool,
    /// Vacuously true when the operator is not full rank.
    pub consistent: bool,
}

/// Compares the rank of `ρ` with the rank of its image under `op`.
pub fn verify_lemma1(
    rho: &DensityMatrix,
    op: &ProductOperator,
    tol: &Tolerance,
) -> Result<Lemma1Report> {
    let applied = apply(op, rho)?;
    let rank_before = rho.rank(tol);
    let rank_after = applied.state.rank(tol);
    let full_rank = op.is_full_rank(tol);
    Ok(Lemma1Report {
        rank_before,
        rank_after,
        full_rank,
        consistent: !full_rank || rank_before == rank_after,
    })
}

/// Applies `op` in two stages: first the local projectors of its
/// decomposition, then the filter-and-unitary remainder. The result equals
/// [`apply`] up to rounding, and the probabilities multiply.
pub fn apply_decomposed(
    op: &ProductOperator,
    rho: &DensityMatrix,
    tol: &Tolerance,
) -> Result<Applied> {
    let parts: Vec<LpoLfoLuo> = op
        .factors
        .iter()
        .map(|f| decompose(f, tol))
        .collect::<Result<_>>()?;
    let projector = kron_all(parts.iter().map(|d| &d.lpo))?;
    let remainders: Vec<ComplexMatrix> = parts.iter().map(|d| &d.luo * &d.lfo).collect();
    let remainder = kron_all(remainders.iter())?;
    let projected = apply_matrix(&projector, rho)?;
    let finished = apply_matrix(&remainder, &projected.state)?;
    Ok(Applied {
        state: finished.state,
        probability: projected.probability * finished.probability,
    })
}
