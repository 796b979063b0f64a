//! Distillable subspaces.
//!
//! A distillable subspace (DSS) is a product of local subspaces
//! `H'_A ⊗ H'_B ⊗ ⋯` onto which a (possibly multi-copy) state projects to a
//! pure entangled state. This module projects states onto such subspaces,
//! classifies the result, searches for subspaces spanned by subsets of
//! supplied per-party bases, and checks the rank bound any state with a DSS
//! must satisfy.
//!
//! # Search
//!
//! [`find_dss`] enumerates every product of nonempty subsets of the per-party
//! bases, `∏_k (2^{d_k} − 1)` candidates, in lexicographic order over
//! (party index, subset bitmask ascending). The state is rotated into the
//! product basis once, so each candidate's compression is a principal
//! submatrix. Before compressing, the pruned search discards a candidate when
//!
//! * its weight is at most [`ZERO_WEIGHT`], or
//! * two eigenvectors of the state keep nonzero components on the candidate
//!   whose supports are disjoint, each carrying more than a
//!   `PRUNE_MARGIN · purity_atol` share of the weight. The compression then has
//!   a second eigenvalue at least that large, so it cannot be pure, or
//! * the Frobenius norm of the compression already bounds its top eigenvalue
//!   below the purity threshold.
//!
//! Each rule only removes candidates that full classification would call
//! mixed or zero, so pruned and unpruned searches return the same list.

use std::sync::atomic::{AtomicU64, Ordering};

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entanglement::{concurrence, dimension_signature, DimensionSignature};
use crate::error::{Error, Result};
use crate::states::{DensityMatrix, PureState, SystemShape};
use crate::tensor::{
    self, basis_vector, eig_hermitian, kron_all, numerical_rank, orthonormality_deviation,
    ComplexMatrix, Tolerance,
};

/// Projections with trace at or below this have zero weight.
pub const ZERO_WEIGHT: f64 = 1e-12;

/// Orthonormality bound on subspace vectors.
pub const ORTHONORMAL_ATOL: f64 = 1e-9;

/// Safety factor between the pruning rules and the purity threshold.
const PRUNE_MARGIN: f64 = 4.0;

/// Eigenvector amplitudes at or below this are outside its support.
const SUPPORT_EPS: f64 = 1e-13;

/// Default bound on the number of enumerated candidates.
pub const DEFAULT_MAX_CANDIDATES: u128 = 4_000_000;

/// Concurrence gains at or below this are treated as rounding noise.
pub const IMPROVEMENT_EPS: f64 = 1e-9;

/// Per-party orthonormal vectors spanning `H'_A, H'_B, …`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalSubspace {
    vectors: Vec<Vec<Vec<C64>>>,
}

impl LocalSubspace {
    pub fn new(shape: &SystemShape, vectors: Vec<Vec<Vec<C64>>>) -> Result<Self> {
        let s = Self { vectors };
        s.validate_for(shape)?;
        Ok(s)
    }

    /// Computational-basis vectors selected by index, per party.
    pub fn computational(shape: &SystemShape, indices: &[Vec<usize>]) -> Result<Self> {
        Self::from_bases(&LocalBases::computational(shape), indices)
    }

    /// Columns of the supplied bases selected by index, per party.
    pub fn from_bases(bases: &LocalBases, indices: &[Vec<usize>]) -> Result<Self> {
        if indices.len() != bases.shape.len() {
            return Err(Error::ShapeMismatch(format!(
                "index sets for {} parties, shape has {}",
                indices.len(),
                bases.shape.len()
            )));
        }
        let mut vectors = Vec::with_capacity(indices.len());
        for (k, idx) in indices.iter().enumerate() {
            let basis = &bases.matrices[k];
            let mut party = Vec::with_capacity(idx.len());
            for &i in idx {
                if i >= basis.cols() {
                    return Err(Error::ShapeMismatch(format!(
                        "basis index {i} out of range for party {}",
                        bases.shape.party(k).label
                    )));
                }
                party.push(basis.column(i));
            }
            vectors.push(party);
        }
        Self::new(&bases.shape, vectors)
    }

    /// The whole space.
    pub fn full(shape: &SystemShape) -> Self {
        let vectors = shape
            .dims()
            .iter()
            .map(|&d| (0..d).map(|i| basis_vector(d, i)).collect())
            .collect();
        Self { vectors }
    }

    pub fn validate_for(&self, shape: &SystemShape) -> Result<()> {
        if self.vectors.len() != shape.len() {
            return Err(Error::ShapeMismatch(format!(
                "subspace has {} parties, shape {} has {}",
                self.vectors.len(),
                shape,
                shape.len()
            )));
        }
        for (party, vecs) in shape.parties().iter().zip(&self.vectors) {
            let d = party.dim();
            if vecs.is_empty() {
                return Err(Error::InvalidShape(format!(
                    "party {} has an empty local subspace",
                    party.label
                )));
            }
            if vecs.len() > d {
                return Err(Error::InvalidShape(format!(
                    "party {} has {} vectors in dimension {d}",
                    party.label,
                    vecs.len()
                )));
            }
            if let Some(v) = vecs.iter().find(|v| v.len() != d) {
                return Err(Error::ShapeMismatch(format!(
                    "party {} vector of length {} in dimension {d}",
                    party.label,
                    v.len()
                )));
            }
            let dev = orthonormality_deviation(vecs);
            if dev > ORTHONORMAL_ATOL {
                return Err(Error::NotOrthonormal(format!(
                    "party {} vectors deviate by {dev:e}",
                    party.label
                )));
            }
        }
        Ok(())
    }

    pub fn parties(&self) -> &[Vec<Vec<C64>>] {
        &self.vectors
    }

    /// Number of vectors per party.
    pub fn dims(&self) -> Vec<usize> {
        self.vectors.iter().map(Vec::len).collect()
    }

    /// Isometry `Q = ⊗_k V_k` whose columns span the subspace, in
    /// most-significant-first order of the per-party vector lists.
    pub fn isometry(&self) -> Result<ComplexMatrix> {
        let locals: Vec<ComplexMatrix> = self
            .vectors
            .iter()
            .map(|v| ComplexMatrix::from_columns(v))
            .collect();
        kron_all(locals.iter())
    }

    /// `⊗_k Σ_j |v_j⟩⟨v_j|`
    pub fn projector(&self) -> Result<ComplexMatrix> {
        let q = self.isometry()?;
        Ok(&q * &q.adjoint())
    }

    pub fn subspace_shape(&self, shape: &SystemShape) -> Result<SystemShape> {
        shape.with_dims(&self.dims())
    }
}

/// A full orthonormal basis per party, stored as unitary matrices whose
/// columns are the basis vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalBases {
    shape: SystemShape,
    matrices: Vec<ComplexMatrix>,
}

impl LocalBases {
    pub fn computational(shape: &SystemShape) -> Self {
        Self {
            shape: shape.clone(),
            matrices: shape
                .dims()
                .iter()
                .map(|&d| ComplexMatrix::identity(d))
                .collect(),
        }
    }

    pub fn new(shape: &SystemShape, matrices: Vec<ComplexMatrix>) -> Result<Self> {
        if matrices.len() != shape.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} bases for {} parties",
                matrices.len(),
                shape.len()
            )));
        }
        for (party, m) in shape.parties().iter().zip(&matrices) {
            if m.rows() != party.dim() || m.cols() != party.dim() {
                return Err(Error::ShapeMismatch(format!(
                    "basis for party {} is {}x{}, party dimension is {}",
                    party.label,
                    m.rows(),
                    m.cols(),
                    party.dim()
                )));
            }
            let deviation = m.unitary_deviation();
            if deviation > ORTHONORMAL_ATOL {
                return Err(Error::NotOrthonormal(format!(
                    "basis for party {} deviates by {deviation:e}",
                    party.label
                )));
            }
        }
        Ok(Self {
            shape: shape.clone(),
            matrices,
        })
    }

    pub fn shape(&self) -> &SystemShape {
        &self.shape
    }

    pub fn matrices(&self) -> &[ComplexMatrix] {
        &self.matrices
    }

    fn is_computational(&self) -> bool {
        self.matrices
            .iter()
            .all(|m| m.max_abs_diff(&ComplexMatrix::identity(m.rows())) == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    PureEntangled,
    PureProduct,
    Mixed,
    Zero,
}

impl Classification {
    pub fn is_pure(self) -> bool {
        matches!(
            self,
            Classification::PureEntangled | Classification::PureProduct
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Classification::PureEntangled => "pure-entangled",
            Classification::PureProduct => "pure-product",
            Classification::Mixed => "mixed",
            Classification::Zero => "zero",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionOutcome {
    /// Trace of `PρP`.
    pub weight: f64,
    /// Normalized compression onto the subspace coordinates; `None` when the
    /// weight is zero.
    pub state: Option<DensityMatrix>,
    pub classification: Classification,
    /// Largest eigenvalue over trace of the compression.
    pub top_ratio: f64,
    /// Dimension signature, for pure projections.
    pub signature: Option<DimensionSignature>,
    /// The projected pure state, for pure projections.
    pub pure_state: Option<PureState>,
}

fn zero_outcome(weight: f64) -> ProjectionOutcome {
    ProjectionOutcome {
        weight,
        state: None,
        classification: Classification::Zero,
        top_ratio: 0.0,
        signature: None,
        pure_state: None,
    }
}

/// Classifies an unnormalized compression on `sub_shape`.
fn classify(
    sub_shape: SystemShape,
    compressed: &ComplexMatrix,
    tol: &Tolerance,
) -> Result<ProjectionOutcome> {
    let weight = compressed.trace().re;
    if weight <= ZERO_WEIGHT {
        return Ok(zero_outcome(weight));
    }
    let (state, _) = DensityMatrix::from_unnormalized(sub_shape.clone(), compressed);
    let eig = eig_hermitian(state.matrix(), tol)?;
    let top_ratio = eig.values[0];
    if top_ratio < 1.0 - tol.purity_atol {
        return Ok(ProjectionOutcome {
            weight,
            state: Some(state),
            classification: Classification::Mixed,
            top_ratio,
            signature: None,
            pure_state: None,
        });
    }
    let psi = PureState::normalized(sub_shape, eig.vectors.column(0))?;
    let signature = dimension_signature(&psi, tol);
    let classification = if signature.is_entangled() {
        Classification::PureEntangled
    } else {
        Classification::PureProduct
    };
    Ok(ProjectionOutcome {
        weight,
        state: Some(state),
        classification,
        top_ratio,
        signature: Some(signature),
        pure_state: Some(psi),
    })
}

/// Projects `ρ` onto `s`, compresses to the subspace coordinates
/// `⟨v_i…|ρ|v_j…⟩` and classifies the result.
pub fn project(
    rho: &DensityMatrix,
    s: &LocalSubspace,
    tol: &Tolerance,
) -> Result<ProjectionOutcome> {
    s.validate_for(rho.shape())?;
    let q = s.isometry()?;
    let compressed = (&(&q.adjoint() * rho.matrix()) * &q).hermitian_part();
    classify(s.subspace_shape(rho.shape())?, &compressed, tol)
}

/// A verified distillable subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct DssCertificate {
    subspace: LocalSubspace,
    outcome: ProjectionOutcome,
    basis_indices: Option<Vec<Vec<usize>>>,
}

impl DssCertificate {
    pub fn subspace(&self) -> &LocalSubspace {
        &self.subspace
    }

    pub fn outcome(&self) -> &ProjectionOutcome {
        &self.outcome
    }

    /// Per-party indices into the searched bases, when found by search.
    pub fn basis_indices(&self) -> Option<&[Vec<usize>]> {
        self.basis_indices.as_deref()
    }

    pub fn weight(&self) -> f64 {
        self.outcome.weight
    }

    pub fn signature(&self) -> &DimensionSignature {
        self.outcome
            .signature
            .as_ref()
            .expect("certificates are pure")
    }

    pub fn state(&self) -> &DensityMatrix {
        self.outcome
            .state
            .as_ref()
            .expect("certificates have weight")
    }

    pub fn pure_state(&self) -> &PureState {
        self.outcome
            .pure_state
            .as_ref()
            .expect("certificates are pure")
    }

    /// Whether `other`'s index sets are contained in this certificate's,
    /// party by party (both must come from the same search).
    pub fn contains(&self, other: &DssCertificate) -> bool {
        match (&self.basis_indices, &other.basis_indices) {
            (Some(a), Some(b)) => a
                .iter()
                .zip(b)
                .all(|(big, small)| small.iter().all(|i| big.contains(i))),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DssConstraints {
    /// Entrywise lower bound on the dimension signature.
    pub min_signature: Option<Vec<usize>>,
    /// When false, pure product projections are also reported.
    pub require_entangled: bool,
}

impl Default for DssConstraints {
    fn default() -> Self {
        Self {
            min_signature: None,
            require_entangled: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub max_candidates: u128,
    pub prune: bool,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            max_candidates: DEFAULT_MAX_CANDIDATES,
            prune: true,
            threads: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    pub candidates: u64,
    pub zero_weight: u64,
    pub pruned_support: u64,
    pub pruned_purity: u64,
    pub classified: u64,
}

#[derive(Debug, Clone)]
pub struct DssSearch {
    pub certificates: Vec<DssCertificate>,
    pub stats: SearchStats,
}

impl DssSearch {
    /// Certificates that do not strictly contain another certificate.
    pub fn minimal(&self) -> Vec<&DssCertificate> {
        self.certificates
            .iter()
            .enumerate()
            .filter(|(i, c)| {
                !self
                    .certificates
                    .iter()
                    .enumerate()
                    .any(|(j, other)| *i != j && c.contains(other) && !other.contains(c))
            })
            .map(|(_, c)| c)
            .collect()
    }
}

/// Counts candidates `∏_k (2^{d_k} − 1)`, failing above `cap`.
pub fn candidate_count(dims: &[usize], cap: u128) -> Result<u128> {
    let mut count: u128 = 1;
    for &d in dims {
        let per_party = if d >= 127 {
            u128::MAX
        } else {
            (1u128 << d) - 1
        };
        count = count.saturating_mul(per_party);
    }
    if count > cap {
        return Err(Error::CandidateOverflow { count, cap });
    }
    Ok(count)
}

/// Candidate enumeration and the state expressed in the product basis.
struct Enumeration {
    dims: Vec<usize>,
    radices: Vec<u64>,
    count: u64,
    rotated: ComplexMatrix,
}

impl Enumeration {
    fn new(rho: &DensityMatrix, bases: &LocalBases, cap: u128) -> Result<Self> {
        if bases.shape.dims() != rho.shape().dims() {
            return Err(Error::ShapeMismatch(format!(
                "bases for {} used with a state on {}",
                bases.shape,
                rho.shape()
            )));
        }
        let dims = rho.shape().dims();
        let count = candidate_count(&dims, cap)? as u64;
        let rotated = if bases.is_computational() {
            rho.matrix().clone()
        } else {
            let b = kron_all(bases.matrices.iter())?;
            (&(&b.adjoint() * rho.matrix()) * &b).hermitian_part()
        };
        Ok(Self {
            radices: dims.iter().map(|&d| (1u64 << d) - 1).collect(),
            dims,
            count,
            rotated,
        })
    }

    /// Per-party index sets of candidate `c` (party 0 most significant).
    fn index_sets(&self, mut c: u64) -> Vec<Vec<usize>> {
        let mut masks = vec![0u64; self.dims.len()];
        for k in (0..self.dims.len()).rev() {
            masks[k] = c % self.radices[k] + 1;
            c /= self.radices[k];
        }
        masks
            .iter()
            .zip(&self.dims)
            .map(|(&m, &d)| (0..d).filter(|&i| m >> i & 1 == 1).collect())
            .collect()
    }

    /// Global indices of the product of the per-party index sets.
    fn global_indices(&self, sets: &[Vec<usize>]) -> Vec<usize> {
        let mut out = vec![0usize];
        for (set, &d) in sets.iter().zip(&self.dims) {
            out = out
                .iter()
                .flat_map(|&prefix| set.iter().map(move |&i| prefix * d + i))
                .collect();
        }
        out
    }
}

/// Eigen-structure of the rotated state used by the support rule.
struct SupportPattern {
    weights: Vec<f64>,
    vectors: Vec<Vec<C64>>,
    supports: Vec<Vec<u64>>,
}

impl SupportPattern {
    fn new(rotated: &ComplexMatrix, tol: &Tolerance) -> Result<Self> {
        let eig = eig_hermitian(rotated, tol)?;
        let cutoff = tol.rank_cutoff(eig.values[0]);
        let d = rotated.rows();
        let words = d.div_ceil(64);
        let mut weights = Vec::new();
        let mut vectors = Vec::new();
        let mut supports = Vec::new();
        for (k, &mu) in eig.values.iter().enumerate() {
            if mu <= cutoff {
                break;
            }
            let v = eig.vectors.column(k);
            let mut bits = vec![0u64; words];
            for (i, z) in v.iter().enumerate() {
                if z.norm() > SUPPORT_EPS {
                    bits[i / 64] |= 1 << (i % 64);
                }
            }
            weights.push(mu);
            vectors.push(v);
            supports.push(bits);
        }
        Ok(Self {
            weights,
            vectors,
            supports,
        })
    }

    /// True when two surviving eigen-components with disjoint supports each
    /// carry enough weight to force a mixed compression.
    fn forces_mixed(&self, indices: &[usize], weight: f64, tol: &Tolerance) -> bool {
        let words = self.supports.first().map_or(0, Vec::len);
        let mut mask = vec![0u64; words];
        for &i in indices {
            mask[i / 64] |= 1 << (i % 64);
        }
        let threshold = PRUNE_MARGIN * tol.purity_atol * weight;
        let surviving: Vec<Vec<u64>> = self
            .vectors
            .iter()
            .zip(&self.weights)
            .zip(&self.supports)
            .filter_map(|((v, &mu), supp)| {
                let w = mu * indices.iter().map(|&i| v[i].norm_sqr()).sum::<f64>();
                (w > threshold).then(|| supp.iter().zip(&mask).map(|(a, b)| a & b).collect())
            })
            .collect();
        for (a, sa) in surviving.iter().enumerate() {
            for sb in &surviving[a + 1..] {
                if sa.iter().zip(sb).all(|(x, y)| x & y == 0) {
                    return true;
                }
            }
        }
        false
    }
}

enum CandidateResult {
    Zero,
    PrunedSupport,
    PrunedPurity,
    Classified(Box<ProjectionOutcome>),
}

fn evaluate_candidate(
    en: &Enumeration,
    pattern: Option<&SupportPattern>,
    sub_shape: SystemShape,
    indices: &[usize],
    tol: &Tolerance,
) -> Result<CandidateResult> {
    if let Some(pattern) = pattern {
        let weight: f64 = indices.iter().map(|&i| en.rotated[(i, i)].re).sum();
        if weight <= ZERO_WEIGHT {
            return Ok(CandidateResult::Zero);
        }
        if pattern.forces_mixed(indices, weight, tol) {
            return Ok(CandidateResult::PrunedSupport);
        }
        let compressed = en.rotated.submatrix(indices, indices);
        // λ_max ≤ ‖C‖_F, so a small Frobenius norm rules out purity
        let frob = compressed
            .data()
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt();
        if frob / weight < 1.0 - PRUNE_MARGIN * tol.purity_atol {
            return Ok(CandidateResult::PrunedPurity);
        }
        return Ok(CandidateResult::Classified(Box::new(classify(
            sub_shape,
            &compressed,
            tol,
        )?)));
    }
    let compressed = en.rotated.submatrix(indices, indices);
    Ok(CandidateResult::Classified(Box::new(classify(
        sub_shape,
        &compressed,
        tol,
    )?)))
}

fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        None => f(),
    }
}

/// Searches products of nonempty subsets of `bases` for distillable
/// subspaces of `ρ`.
pub fn find_dss(
    rho: &DensityMatrix,
    bases: &LocalBases,
    constraints: &DssConstraints,
    options: &SearchOptions,
    tol: &Tolerance,
) -> Result<DssSearch> {
    if let Some(min) = &constraints.min_signature {
        if min.len() != rho.shape().len() {
            return Err(Error::ShapeMismatch(format!(
                "minimum signature has {} entries for {} parties",
                min.len(),
                rho.shape().len()
            )));
        }
    }
    let en = Enumeration::new(rho, bases, options.max_candidates)?;
    let pattern = if options.prune {
        Some(SupportPattern::new(&en.rotated, tol)?)
    } else {
        None
    };
    let zero = AtomicU64::new(0);
    let support = AtomicU64::new(0);
    let purity = AtomicU64::new(0);
    let classified = AtomicU64::new(0);

    let hits: Vec<Result<(Vec<Vec<usize>>, ProjectionOutcome)>> = in_pool(options.threads, || {
        (0..en.count)
            .into_par_iter()
            .filter_map(|c| {
                let sets = en.index_sets(c);
                let indices = en.global_indices(&sets);
                let sizes: Vec<usize> = sets.iter().map(Vec::len).collect();
                let sub_shape = match rho.shape().with_dims(&sizes) {
                    Ok(s) => s,
                    Err(e) => return Some(Err(e)),
                };
                let outcome =
                    match evaluate_candidate(&en, pattern.as_ref(), sub_shape, &indices, tol) {
                        Ok(CandidateResult::Classified(o)) => *o,
                        Ok(CandidateResult::Zero) => {
                            zero.fetch_add(1, Ordering::Relaxed);
                            return None;
                        }
                        Ok(CandidateResult::PrunedSupport) => {
                            support.fetch_add(1, Ordering::Relaxed);
                            return None;
                        }
                        Ok(CandidateResult::PrunedPurity) => {
                            purity.fetch_add(1, Ordering::Relaxed);
                            return None;
                        }
                        Err(e) => return Some(Err(e)),
                    };
                classified.fetch_add(1, Ordering::Relaxed);
                let accepted = match outcome.classification {
                    Classification::PureEntangled => true,
                    Classification::PureProduct => !constraints.require_entangled,
                    _ => false,
                };
                let meets_min = match (&constraints.min_signature, &outcome.signature) {
                    (Some(min), Some(sig)) => sig.meets(min),
                    _ => true,
                };
                (accepted && meets_min).then_some(Ok((sets, outcome)))
            })
            .collect()
    });

    let mut certificates = Vec::with_capacity(hits.len());
    for hit in hits {
        let (sets, outcome) = hit?;
        let subspace = LocalSubspace::from_bases(bases, &sets)?;
        certificates.push(DssCertificate {
            subspace,
            outcome,
            basis_indices: Some(sets),
        });
    }
    Ok(DssSearch {
        certificates,
        stats: SearchStats {
            candidates: en.count,
            zero_weight: zero.into_inner(),
            pruned_support: support.into_inner(),
            pruned_purity: purity.into_inner(),
            classified: classified.into_inner(),
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum Refusal {
    /// The subspace does not fit the state's shape or is not orthonormal.
    Invalid {
        message: String,
    },
    ZeroWeight {
        weight: f64,
    },
    Mixed {
        weight: f64,
        top_ratio: f64,
    },
    Product {
        weight: f64,
    },
}

impl std::fmt::Display for Refusal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Refusal::Invalid { message } => write!(f, "invalid subspace: {message}"),
            Refusal::ZeroWeight { weight } => write!(f, "projection has zero weight ({weight:e})"),
            Refusal::Mixed { top_ratio, .. } => {
                write!(f, "projection is mixed (top eigenvalue ratio {top_ratio})")
            }
            Refusal::Product { .. } => write!(f, "projection is a pure product state"),
        }
    }
}

/// Independently re-verifies a claimed distillable subspace.
pub fn check_certificate(
    rho: &DensityMatrix,
    s: &LocalSubspace,
    tol: &Tolerance,
) -> std::result::Result<DssCertificate, Refusal> {
    let outcome = project(rho, s, tol).map_err(|e| Refusal::Invalid {
        message: e.to_string(),
    })?;
    match outcome.classification {
        Classification::PureEntangled => Ok(DssCertificate {
            subspace: s.clone(),
            outcome,
            basis_indices: None,
        }),
        Classification::PureProduct => Err(Refusal::Product {
            weight: outcome.weight,
        }),
        Classification::Mixed => Err(Refusal::Mixed {
            weight: outcome.weight,
            top_ratio: outcome.top_ratio,
        }),
        Classification::Zero => Err(Refusal::ZeroWeight {
            weight: outcome.weight,
        }),
    }
}

/// `(∏ dim H_i)ⁿ − ∏ n_i + 1`: the largest rank `ρ^{⊗n}` can have when an
/// `n_A⊗n_B⊗⋯` pure state is distillable from it.
pub fn rank_bound(shape: &SystemShape, copies: usize, signature: &[usize]) -> Result<u128> {
    if signature.len() != shape.len() {
        return Err(Error::ShapeMismatch(format!(
            "signature with {} entries for {} parties",
            signature.len(),
            shape.len()
        )));
    }
    if signature.contains(&0) {
        return Err(Error::InvalidParameter {
            name: "signature entry",
            value: 0.0,
            range: "[1, ∞)",
        });
    }
    let total = (shape.total_dim() as u128)
        .checked_pow(copies as u32)
        .ok_or_else(|| Error::ShapeMismatch("dimension overflow".into()))?;
    let product: u128 = signature.iter().map(|&n| n as u128).product();
    if product > total {
        return Err(Error::ShapeMismatch(format!(
            "signature product {product} exceeds the dimension {total}"
        )));
    }
    Ok(total - product + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankBoundReport {
    pub rank: usize,
    pub bound: u128,
    /// A false value signals a tolerance inconsistency, never a genuine
    /// counterexample.
    pub satisfied: bool,
}

/// Checks `rank(ρ^{⊗n})` against [`rank_bound`] for a certificate found on
/// `ρ^{⊗n}`.
pub fn check_rank_bound(
    rho: &DensityMatrix,
    copies: usize,
    cert: &DssCertificate,
    tol: &Tolerance,
) -> Result<RankBoundReport> {
    let bound = rank_bound(rho.shape(), copies, &cert.signature().0)?;
    let power = rho.tensor_power(copies)?;
    let rank = numerical_rank(power.matrix(), tol);
    Ok(RankBoundReport {
        rank,
        bound,
        satisfied: (rank as u128) <= bound,
    })
}

#[derive(Debug, Clone)]
pub struct PurifyingSubspace {
    pub subspace: LocalSubspace,
    pub basis_indices: Vec<Vec<usize>>,
    pub weight: f64,
    pub state: DensityMatrix,
    pub concurrence_before: f64,
    pub concurrence_after: f64,
}

#[derive(Debug, Clone)]
pub struct PurifyingSearch {
    pub found: Vec<PurifyingSubspace>,
    /// Candidates whose compression is not 2⊗2, where concurrence is undefined.
    pub skipped: u64,
    pub reference: f64,
}

/// Searches like [`find_dss`] for subspaces whose (mixed) compression has
/// strictly more two-qubit concurrence than `reference`.
pub fn find_purifying_subspaces(
    rho: &DensityMatrix,
    bases: &LocalBases,
    reference: f64,
    options: &SearchOptions,
    tol: &Tolerance,
) -> Result<PurifyingSearch> {
    let en = Enumeration::new(rho, bases, options.max_candidates)?;
    let skipped = AtomicU64::new(0);
    let hits: Vec<Result<PurifyingSubspace>> = in_pool(options.threads, || {
        (0..en.count)
            .into_par_iter()
            .filter_map(|c| {
                let sets = en.index_sets(c);
                let sizes: Vec<usize> = sets.iter().map(Vec::len).collect();
                if sizes != [2, 2] {
                    skipped.fetch_add(1, Ordering::Relaxed);
                    return None;
                }
                let indices = en.global_indices(&sets);
                let compressed = en.rotated.submatrix(&indices, &indices);
                let run = || -> Result<Option<PurifyingSubspace>> {
                    let outcome = classify(rho.shape().with_dims(&sizes)?, &compressed, tol)?;
                    if outcome.classification != Classification::Mixed {
                        return Ok(None);
                    }
                    let state = outcome.state.expect("mixed outcomes carry a state");
                    let after = concurrence(&state, tol)?;
                    if after <= reference + IMPROVEMENT_EPS {
                        return Ok(None);
                    }
                    Ok(Some(PurifyingSubspace {
                        subspace: LocalSubspace::from_bases(bases, &sets)?,
                        basis_indices: sets,
                        weight: outcome.weight,
                        state,
                        concurrence_before: reference,
                        concurrence_after: after,
                    }))
                };
                run().transpose()
            })
            .collect()
    });
    Ok(PurifyingSearch {
        found: hits.into_iter().collect::<Result<_>>()?,
        skipped: skipped.into_inner(),
        reference,
    })
}

/// Embeds a compressed-coordinate pure state back into the full space via
/// the subspace isometry.
pub fn embed(s: &LocalSubspace, psi: &PureState, shape: &SystemShape) -> Result<PureState> {
    let q = s.isometry()?;
    PureState::normalized(shape.clone(), q.mul_vec(psi.amplitudes()))
}

/// Computational-basis index sets written as bit strings, e.g. `{01,10}`.
pub fn describe_indices(shape: &SystemShape, sets: &[Vec<usize>]) -> Vec<String> {
    shape
        .parties()
        .iter()
        .zip(sets)
        .map(|(party, set)| {
            let labels: Vec<String> = set
                .iter()
                .map(|&i| {
                    let digits = tensor::unravel(i, party.subsystems());
                    if party.subsystems().iter().all(|&d| d <= 10) {
                        digits.iter().map(|d| d.to_string()).collect()
                    } else {
                        format!("{digits:?}")
                    }
                })
                .collect();
            format!("{}:{{{}}}", party.label, labels.join(","))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random;
    use crate::states::{three_qubit_example, werner, Bell};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn odd_sets() -> Vec<Vec<usize>> {
        vec![vec![1, 2]; 3]
    }

    fn phi_two_copy() -> PureState {
        let shape = SystemShape::qubits(3).power(2).unwrap();
        let idx = |a: usize| a * 16 + a * 4 + a;
        PureState::from_terms(
            shape,
            &[(idx(1), C64::new(1.0, 0.0)), (idx(2), C64::new(1.0, 0.0))],
        )
        .unwrap()
    }

    #[test]
    fn ghz_example_projection() {
        for p in [0.2, 0.5, 0.9] {
            let rho2 = three_qubit_example(p).unwrap().tensor_power(2).unwrap();
            let s = LocalSubspace::computational(rho2.shape(), &odd_sets()).unwrap();
            let out = project(&rho2, &s, &tol()).unwrap();
            // brute force on the full 64x64 matrix: ⟨Φ|σ⊗σ|Φ⟩ and tr(Pσ⊗σP)
            let p_full = s.projector().unwrap();
            let raw = &(&p_full * rho2.matrix()) * &p_full;
            assert!((raw.trace().re - p * p / 2.0).abs() < 1e-12);
            assert!((out.weight - p * p / 2.0).abs() < 1e-12);
            assert_eq!(out.classification, Classification::PureEntangled);
            assert_eq!(out.signature.as_ref().unwrap().0, vec![2, 2, 2]);
            let embedded = embed(&s, out.pure_state.as_ref().unwrap(), rho2.shape()).unwrap();
            assert!((embedded.overlap(&phi_two_copy()) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn full_projection_is_identity() {
        let rho = werner(0.7).unwrap();
        let out = project(&rho, &LocalSubspace::full(rho.shape()), &tol()).unwrap();
        assert!((out.weight - 1.0).abs() < 1e-14);
        assert!(out.state.unwrap().matrix().max_abs_diff(rho.matrix()) < 1e-14);
    }

    #[test]
    fn werner_two_copy_projection_is_bell_diagonal() {
        let f = 0.8;
        let q = (1.0 - f) / 3.0;
        let rho2 = werner(f).unwrap().tensor_power(2).unwrap();
        let s = LocalSubspace::computational(rho2.shape(), &[vec![1, 2], vec![1, 2]]).unwrap();
        let out = project(&rho2, &s, &tol()).unwrap();
        assert_eq!(out.classification, Classification::Mixed);
        // brute-force entries from the 16x16 matrix
        let idx = [1usize, 2];
        let global: Vec<usize> = idx
            .iter()
            .flat_map(|&a| idx.iter().map(move |&b| a * 4 + b))
            .collect();
        let brute = rho2.matrix().submatrix(&global, &global);
        let w = brute.trace().re;
        assert!((out.weight - w).abs() < 1e-14);
        assert!((w - ((f + q) * (f + q) + 4.0 * q * q) / 2.0).abs() < 1e-12);
        let state = out.state.unwrap();
        assert!(state.matrix().max_abs_diff(&brute.scale_real(1.0 / w)) < 1e-14);
        let bell = crate::states::bell_basis();
        let in_bell = &(&bell.adjoint() * state.matrix()) * &bell;
        for r in 0..4 {
            for c in 0..4 {
                if r != c {
                    assert!(in_bell[(r, c)].norm() < 1e-12);
                }
            }
        }
        let norm = (f + q) * (f + q) + 4.0 * q * q;
        assert!((in_bell[(0, 0)].re - (f * f + q * q) / norm).abs() < 1e-12);
    }

    #[test]
    fn single_copy_has_no_dss() {
        let rho = three_qubit_example(0.5).unwrap();
        let search = find_dss(
            &rho,
            &LocalBases::computational(rho.shape()),
            &DssConstraints::default(),
            &SearchOptions::default(),
            &tol(),
        )
        .unwrap();
        assert!(search.certificates.is_empty());
        assert_eq!(search.stats.candidates, 27);
    }

    #[test]
    fn two_copies_have_the_odd_dss() {
        let rho2 = three_qubit_example(0.5).unwrap().tensor_power(2).unwrap();
        let search = find_dss(
            &rho2,
            &LocalBases::computational(rho2.shape()),
            &DssConstraints::default(),
            &SearchOptions::default(),
            &tol(),
        )
        .unwrap();
        assert_eq!(search.stats.candidates, 3375);
        assert!(search
            .certificates
            .iter()
            .any(|c| c.basis_indices() == Some(&odd_sets()[..])));
        let minimal = search.minimal();
        assert_eq!(minimal.len(), 1);
        assert_eq!(minimal[0].basis_indices().unwrap(), &odd_sets()[..]);
        for cert in &search.certificates {
            assert_eq!(cert.signature().0, vec![2, 2, 2]);
            let again = check_certificate(&rho2, cert.subspace(), &tol()).unwrap();
            assert!(again.state().matrix().max_abs_diff(cert.state().matrix()) < 1e-9);
        }
    }

    #[test]
    fn pure_input_is_its_own_dss() {
        let rho = Bell::PhiPlus.state().density();
        let search = find_dss(
            &rho,
            &LocalBases::computational(rho.shape()),
            &DssConstraints::default(),
            &SearchOptions::default(),
            &tol(),
        )
        .unwrap();
        assert!(search
            .certificates
            .iter()
            .any(|c| c.basis_indices() == Some(&[vec![0, 1], vec![0, 1]][..])
                && c.signature().0 == vec![2, 2]));
    }

    #[test]
    fn product_projections_only_on_request() {
        let rho = three_qubit_example(0.5).unwrap();
        let constraints = DssConstraints {
            min_signature: None,
            require_entangled: false,
        };
        let search = find_dss(
            &rho,
            &LocalBases::computational(rho.shape()),
            &constraints,
            &SearchOptions::default(),
            &tol(),
        )
        .unwrap();
        assert!(!search.certificates.is_empty());
        assert!(search
            .certificates
            .iter()
            .all(|c| c.outcome().classification == Classification::PureProduct));
    }

    #[test]
    fn min_signature_filters() {
        let rho2 = three_qubit_example(0.5).unwrap().tensor_power(2).unwrap();
        let constraints = DssConstraints {
            min_signature: Some(vec![3, 1, 1]),
            require_entangled: true,
        };
        let search = find_dss(
            &rho2,
            &LocalBases::computational(rho2.shape()),
            &constraints,
            &SearchOptions::default(),
            &tol(),
        )
        .unwrap();
        assert!(search.certificates.is_empty());
    }

    #[test]
    fn refusals() {
        let rho2 = three_qubit_example(0.5).unwrap().tensor_power(2).unwrap();
        let s = LocalSubspace::computational(rho2.shape(), &odd_sets()).unwrap();
        assert!(check_certificate(&rho2, &s, &tol()).is_ok());

        let even = LocalSubspace::computational(rho2.shape(), &vec![vec![0, 3]; 3]).unwrap();
        assert!(matches!(
            check_certificate(&rho2, &even, &tol()),
            Err(Refusal::Mixed { .. })
        ));

        let mixed = DensityMatrix::maximally_mixed(SystemShape::qubits(2));
        let s = LocalSubspace::computational(mixed.shape(), &[vec![0, 1], vec![0, 1]]).unwrap();
        assert!(matches!(
            check_certificate(&mixed, &s, &tol()),
            Err(Refusal::Mixed { .. })
        ));

        let rho = three_qubit_example(0.5).unwrap();
        let s = LocalSubspace::computational(rho.shape(), &[vec![1], vec![0], vec![0]]).unwrap();
        assert!(matches!(
            check_certificate(&rho, &s, &tol()),
            Err(Refusal::ZeroWeight { .. })
        ));
        let s = LocalSubspace::computational(rho.shape(), &[vec![0], vec![1], vec![1]]).unwrap();
        assert!(matches!(
            check_certificate(&rho, &s, &tol()),
            Err(Refusal::Product { .. })
        ));

        let werner2 = werner(0.8).unwrap().tensor_power(2).unwrap();
        let s = LocalSubspace::computational(werner2.shape(), &[vec![1, 2], vec![1, 2]]).unwrap();
        assert!(matches!(
            check_certificate(&werner2, &s, &tol()),
            Err(Refusal::Mixed { .. })
        ));
    }

    #[test]
    fn rank_bound_values() {
        assert_eq!(
            rank_bound(&SystemShape::qubits(3), 2, &[2, 2, 2]).unwrap(),
            57
        );
        assert_eq!(rank_bound(&SystemShape::qubits(2), 1, &[2, 2]).unwrap(), 1);
        assert_eq!(rank_bound(&SystemShape::qubits(2), 2, &[1, 1]).unwrap(), 16);
        assert!(rank_bound(&SystemShape::qubits(2), 1, &[0, 2]).is_err());
    }

    #[test]
    fn rank_bound_on_ghz_certificate() {
        let rho = three_qubit_example(0.5).unwrap();
        let rho2 = rho.tensor_power(2).unwrap();
        let s = LocalSubspace::computational(rho2.shape(), &odd_sets()).unwrap();
        let cert = check_certificate(&rho2, &s, &tol()).unwrap();
        let r = check_rank_bound(&rho, 2, &cert, &tol()).unwrap();
        assert_eq!((r.rank, r.bound, r.satisfied), (4, 57, true));

        let pure = Bell::PhiPlus.state().density();
        let cert = check_certificate(&pure, &LocalSubspace::full(pure.shape()), &tol()).unwrap();
        let r = check_rank_bound(&pure, 1, &cert, &tol()).unwrap();
        assert_eq!((r.rank, r.bound, r.satisfied), (1, 1, true));
    }

    #[test]
    fn candidate_overflow() {
        let rho = DensityMatrix::maximally_mixed(SystemShape::from_dims(&[16, 16]).unwrap());
        let err = find_dss(
            &rho,
            &LocalBases::computational(rho.shape()),
            &DssConstraints::default(),
            &SearchOptions::default(),
            &tol(),
        );
        assert!(matches!(err, Err(Error::CandidateOverflow { .. })));
    }

    #[test]
    fn weight_is_monotone_under_inclusion() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let shape = SystemShape::from_dims(&[3, 3]).unwrap();
        let rho = DensityMatrix::new(
            shape.clone(),
            random::density_matrix(&mut rng, 9, 5),
            &tol(),
        )
        .unwrap();
        for _ in 0..100 {
            let big: Vec<Vec<usize>> = (0..2)
                .map(|_| {
                    let mut s: Vec<usize> = (0..3).filter(|_| rng.random_bool(0.7)).collect();
                    if s.is_empty() {
                        s.push(rng.random_range(0..3));
                    }
                    s
                })
                .collect();
            let small: Vec<Vec<usize>> = big
                .iter()
                .map(|s| {
                    let keep: Vec<usize> =
                        s.iter().copied().filter(|_| rng.random_bool(0.5)).collect();
                    if keep.is_empty() {
                        vec![s[0]]
                    } else {
                        keep
                    }
                })
                .collect();
            let wb = project(
                &rho,
                &LocalSubspace::computational(&shape, &big).unwrap(),
                &tol(),
            )
            .unwrap()
            .weight;
            let ws = project(
                &rho,
                &LocalSubspace::computational(&shape, &small).unwrap(),
                &tol(),
            )
            .unwrap()
            .weight;
            assert!(wb >= ws - 1e-14);
        }
    }

    #[test]
    fn rotated_bases_find_rotated_dss() {
        // Φ+ written in the Hadamard basis of both parties is still a DSS
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let had = ComplexMatrix::from_real(2, 2, &[h, h, h, -h]);
        let rho = werner(1.0).unwrap();
        let bases = LocalBases::new(rho.shape(), vec![had.clone(), had]).unwrap();
        let search = find_dss(
            &rho,
            &bases,
            &DssConstraints::default(),
            &SearchOptions::default(),
            &tol(),
        )
        .unwrap();
        assert!(search
            .certificates
            .iter()
            .any(|c| c.basis_indices() == Some(&[vec![0, 1], vec![0, 1]][..])));
        for c in &search.certificates {
            check_certificate(&rho, c.subspace(), &tol()).unwrap();
        }
    }

    #[test]
    fn purifying_subspaces_for_werner() {
        let f = 0.8;
        let rho = werner(f).unwrap();
        let rho2 = rho.tensor_power(2).unwrap();
        let reference = concurrence(&rho, &tol()).unwrap();
        let found = find_purifying_subspaces(
            &rho2,
            &LocalBases::computational(rho2.shape()),
            reference,
            &SearchOptions::default(),
            &tol(),
        )
        .unwrap();
        let has = |sets: [[usize; 2]; 2]| {
            found
                .found
                .iter()
                .any(|p| p.basis_indices == vec![sets[0].to_vec(), sets[1].to_vec()])
        };
        assert!(has([[1, 2], [1, 2]]));
        assert!(has([[0, 3], [0, 3]]));
        assert!(found.skipped > 0);

        let pure = werner(1.0).unwrap().tensor_power(2).unwrap();
        let none = find_purifying_subspaces(
            &pure,
            &LocalBases::computational(pure.shape()),
            1.0,
            &SearchOptions::default(),
            &tol(),
        )
        .unwrap();
        assert!(none.found.is_empty());

        let product = PureState::basis(SystemShape::qubits(2), 0b01)
            .unwrap()
            .density();
        let product2 = product.tensor_power(2).unwrap();
        let none = find_purifying_subspaces(
            &product2,
            &LocalBases::computational(product2.shape()),
            0.0,
            &SearchOptions::default(),
            &tol(),
        )
        .unwrap();
        assert!(none.found.is_empty());
    }

    #[test]
    fn search_is_deterministic_across_thread_counts() {
        let rho2 = three_qubit_example(0.3).unwrap().tensor_power(2).unwrap();
        let bases = LocalBases::computational(rho2.shape());
        let run = |threads| {
            let opts = SearchOptions {
                threads: Some(threads),
                ..SearchOptions::default()
            };
            find_dss(&rho2, &bases, &DssConstraints::default(), &opts, &tol())
                .unwrap()
                .certificates
                .iter()
                .map(|c| c.basis_indices().unwrap().to_vec())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(1), run(4));
    }
}
