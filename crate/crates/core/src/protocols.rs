//! Scripted LOCC protocols with branch tracking.
//!
//! A protocol is a list of [`ProtocolStep`]s applied to a state. Projections
//! and filters are post-selected: the success branch continues and the
//! failure weight is added to [`RunReport::dropped_weight`]. Measurements
//! split every branch into one child per outcome and discard the measured
//! subsystem. Branches are expanded depth first, so their order is the
//! lexicographic order of their outcome sequences.

use crate::dss::{project, LocalSubspace};
use crate::entanglement::concurrence;
use crate::error::{Error, Result};
use crate::localops::{ProductOperator, IMPOSSIBLE_BRANCH};
use crate::states::{
    bell_basis, ghz, three_qubit_example, werner, DensityMatrix, Party, SystemShape,
};
use crate::tensor::{kron, kron_all, ComplexMatrix, Tolerance};

/// Unitarity bound for unitary steps and measurement bases.
pub const UNITARY_ATOL: f64 = 1e-9;

/// A condition on classical outcomes recorded by earlier steps.
#[derive(Debug, Clone, PartialEq)]
pub enum Predicate {
    /// Sum of the outcomes of the listed measurement steps is odd (or even).
    Parity { steps: Vec<usize>, odd: bool },
    /// The listed measurement step produced `value`.
    Equals { step: usize, value: usize },
}

impl Predicate {
    fn holds(&self, outcomes: &[Outcome]) -> bool {
        let value_of = |step: usize| outcomes.iter().find(|o| o.step == step).map(|o| o.value);
        match self {
            Predicate::Parity { steps, odd } => {
                let sum: usize = steps.iter().filter_map(|&s| value_of(s)).sum();
                (sum % 2 == 1) == *odd
            }
            Predicate::Equals { step, value } => value_of(*step) == Some(*value),
        }
    }

    fn referenced_steps(&self) -> Vec<usize> {
        match self {
            Predicate::Parity { steps, .. } => steps.clone(),
            Predicate::Equals { step, .. } => vec![*step],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProtocolStep {
    /// Post-select on the product subspace; the shape is unchanged.
    Project(LocalSubspace),
    /// Unitaries on the named parties, identity elsewhere.
    LocalUnitary(Vec<(String, ComplexMatrix)>),
    /// Projective measurement of one subsystem of a party, in the columns of
    /// `basis` (computational when `None`), followed by discarding it.
    MeasureAndDiscard {
        party: String,
        subsystem: usize,
        basis: Option<ComplexMatrix>,
    },
    /// Post-select on a product of local contractions.
    Filter(ProductOperator),
    /// Apply `step` only on branches where `predicate` holds.
    Conditional {
        predicate: Predicate,
        step: Box<ProtocolStep>,
    },
}

impl ProtocolStep {
    pub fn kind(&self) -> &'static str {
        match self {
            ProtocolStep::Project(_) => "project",
            ProtocolStep::LocalUnitary(_) => "local_unitary",
            ProtocolStep::MeasureAndDiscard { .. } => "measure_and_discard",
            ProtocolStep::Filter(_) => "filter",
            ProtocolStep::Conditional { .. } => "conditional",
        }
    }
}

/// A recorded measurement result.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub step: usize,
    pub party: String,
    pub subsystem: usize,
    pub value: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchTrace {
    pub outcomes: Vec<Outcome>,
    /// Probability of this branch from the initial state.
    pub probability: f64,
    pub state: DensityMatrix,
    /// Shape before the first step and after each step.
    pub shapes: Vec<SystemShape>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub branches: Vec<BranchTrace>,
    /// Total weight of post-selection failures and impossible outcomes.
    pub dropped_weight: f64,
}

impl RunReport {
    /// Sum of surviving branch probabilities.
    pub fn success_probability(&self) -> f64 {
        self.branches.iter().map(|b| b.probability).sum()
    }
}

fn step_error(step: usize, message: impl Into<String>) -> Error {
    Error::Protocol {
        step,
        message: message.into(),
    }
}

/// `M ρ M†` and its trace.
fn sandwich(m: &ComplexMatrix, rho: &ComplexMatrix) -> (ComplexMatrix, f64) {
    let out = (&(m * rho) * &m.adjoint()).hermitian_part();
    let trace = out.trace().re;
    (out, trace)
}

fn same_layout(a: &SystemShape, b: &SystemShape) -> bool {
    a.labels() == b.labels() && a.dims() == b.dims()
}

struct Runner {
    dropped: f64,
}

impl Runner {
    fn apply(
        &mut self,
        index: usize,
        step: &ProtocolStep,
        branch: BranchTrace,
        out: &mut Vec<BranchTrace>,
    ) -> Result<()> {
        match step {
            ProtocolStep::Project(s) => {
                s.validate_for(branch.state.shape())
                    .map_err(|e| step_error(index, e.to_string()))?;
                let p = s
                    .projector()
                    .map_err(|e| step_error(index, e.to_string()))?;
                self.post_select(&p, branch, out);
            }
            ProtocolStep::Filter(op) => {
                if !same_layout(op.shape(), branch.state.shape()) {
                    return Err(step_error(
                        index,
                        format!(
                            "filter on {} applied to a state on {}",
                            op.shape(),
                            branch.state.shape()
                        ),
                    ));
                }
                let m = op
                    .full_matrix()
                    .map_err(|e| step_error(index, e.to_string()))?;
                self.post_select(&m, branch, out);
            }
            ProtocolStep::LocalUnitary(unitaries) => {
                let u = unitary_operator(branch.state.shape(), unitaries)
                    .map_err(|e| step_error(index, e.to_string()))?;
                let (mat, _) = sandwich(&u, branch.state.matrix());
                let state = DensityMatrix::new_unchecked(branch.state.shape().clone(), mat);
                out.push(BranchTrace { state, ..branch });
            }
            ProtocolStep::MeasureAndDiscard {
                party,
                subsystem,
                basis,
            } => {
                self.measure(index, party, *subsystem, basis.as_ref(), branch, out)?;
            }
            ProtocolStep::Conditional { predicate, step } => {
                if predicate.referenced_steps().iter().any(|&s| s >= index) {
                    return Err(step_error(
                        index,
                        "condition refers to a step that has not run yet",
                    ));
                }
                if predicate.holds(&branch.outcomes) {
                    self.apply(index, step, branch, out)?;
                } else {
                    out.push(branch);
                }
            }
        }
        Ok(())
    }

    fn post_select(&mut self, m: &ComplexMatrix, branch: BranchTrace, out: &mut Vec<BranchTrace>) {
        let (mat, trace) = sandwich(m, branch.state.matrix());
        let success = trace.clamp(0.0, 1.0);
        if trace <= IMPOSSIBLE_BRANCH {
            self.dropped += branch.probability;
            return;
        }
        self.dropped += branch.probability * (1.0 - success);
        let (state, _) = DensityMatrix::from_unnormalized(branch.state.shape().clone(), &mat);
        out.push(BranchTrace {
            state,
            probability: branch.probability * success,
            ..branch
        });
    }

    fn measure(
        &mut self,
        index: usize,
        label: &str,
        subsystem: usize,
        basis: Option<&ComplexMatrix>,
        branch: BranchTrace,
        out: &mut Vec<BranchTrace>,
    ) -> Result<()> {
        let shape = branch.state.shape();
        let p = shape
            .party_index(label)
            .ok_or_else(|| step_error(index, format!("unknown party {label}")))?;
        let subs = shape.party(p).subsystems();
        if subsystem >= subs.len() {
            return Err(step_error(
                index,
                format!(
                    "party {label} has {} subsystems, index {subsystem} requested",
                    subs.len()
                ),
            ));
        }
        let d = subs[subsystem];
        let basis = match basis {
            Some(b) => {
                if b.rows() != d || b.cols() != d {
                    return Err(step_error(
                        index,
                        format!(
                            "measurement basis is {}x{}, subsystem dimension is {d}",
                            b.rows(),
                            b.cols()
                        ),
                    ));
                }
                let dev = b.unitary_deviation();
                if dev > UNITARY_ATOL {
                    return Err(step_error(
                        index,
                        format!("measurement basis is not orthonormal (deviation {dev:e})"),
                    ));
                }
                b.clone()
            }
            None => ComplexMatrix::identity(d),
        };
        let new_shape =
            discard_subsystem(shape, p, subsystem).map_err(|e| step_error(index, e.to_string()))?;
        let dims = shape.subsystem_dims();
        let g = shape.subsystem_offset(p) + subsystem;
        let before = ComplexMatrix::identity(dims[..g].iter().product());
        let after = ComplexMatrix::identity(dims[g + 1..].iter().product());
        for k in 0..d {
            let bra = ComplexMatrix::from_fn(1, d, |_, c| basis[(c, k)].conj());
            let kraus = kron_all([&before, &bra, &after])?;
            let (mat, trace) = sandwich(&kraus, branch.state.matrix());
            if trace <= IMPOSSIBLE_BRANCH {
                self.dropped += branch.probability * trace.max(0.0);
                continue;
            }
            let (state, _) = DensityMatrix::from_unnormalized(new_shape.clone(), &mat);
            let mut outcomes = branch.outcomes.clone();
            outcomes.push(Outcome {
                step: index,
                party: label.to_string(),
                subsystem,
                value: k,
            });
            out.push(BranchTrace {
                outcomes,
                probability: branch.probability * trace,
                state,
                shapes: branch.shapes.clone(),
            });
        }
        Ok(())
    }
}

/// Removes one subsystem; a party left with none is removed.
pub fn discard_subsystem(
    shape: &SystemShape,
    party: usize,
    subsystem: usize,
) -> Result<SystemShape> {
    let mut parties = Vec::with_capacity(shape.len());
    for (k, p) in shape.parties().iter().enumerate() {
        if k != party {
            parties.push(p.clone());
            continue;
        }
        let mut subs = p.subsystems().to_vec();
        subs.remove(subsystem);
        if !subs.is_empty() {
            parties.push(Party::with_subsystems(p.label.clone(), subs));
        }
    }
    if parties.is_empty() {
        return Err(Error::UnsupportedShape(
            "measurement would discard the last subsystem".into(),
        ));
    }
    SystemShape::new(parties)
}

fn unitary_operator(
    shape: &SystemShape,
    unitaries: &[(String, ComplexMatrix)],
) -> Result<ComplexMatrix> {
    let mut factors: Vec<ComplexMatrix> = shape
        .dims()
        .iter()
        .map(|&d| ComplexMatrix::identity(d))
        .collect();
    let mut seen = vec![false; shape.len()];
    for (label, u) in unitaries {
        let k = shape
            .party_index(label)
            .ok_or_else(|| Error::ShapeMismatch(format!("unknown party {label}")))?;
        if seen[k] {
            return Err(Error::ShapeMismatch(format!("party {label} listed twice")));
        }
        seen[k] = true;
        let d = shape.party(k).dim();
        if u.rows() != d || u.cols() != d {
            return Err(Error::ShapeMismatch(format!(
                "unitary for party {label} is {}x{}, party dimension is {d}",
                u.rows(),
                u.cols()
            )));
        }
        let deviation = u.unitary_deviation();
        if deviation > UNITARY_ATOL {
            return Err(Error::NotUnitary { deviation });
        }
        factors[k] = u.clone();
    }
    kron_all(factors.iter())
}

/// Runs `protocol` on `ρ`.
pub fn run(protocol: &[ProtocolStep], rho: &DensityMatrix) -> Result<RunReport> {
    let mut runner = Runner { dropped: 0.0 };
    let mut branches = vec![BranchTrace {
        outcomes: Vec::new(),
        probability: 1.0,
        state: rho.clone(),
        shapes: vec![rho.shape().clone()],
    }];
    for (index, step) in protocol.iter().enumerate() {
        let mut next = Vec::with_capacity(branches.len());
        for branch in branches {
            runner.apply(index, step, branch, &mut next)?;
        }
        for b in &mut next {
            b.shapes.push(b.state.shape().clone());
        }
        if next.is_empty() {
            return Err(Error::AllBranchesZero);
        }
        branches = next;
    }
    Ok(RunReport {
        branches,
        dropped_weight: runner.dropped,
    })
}

/* GHZ from two copies *******************************************************/

#[derive(Debug, Clone, PartialEq)]
pub struct GhzBranch {
    /// Outcomes `(s_A, s_B, s_C)` of the second-copy measurements.
    pub outcomes: [usize; 3],
    pub probability: f64,
    /// GHZ fidelity after the conditional phase flip.
    pub fidelity: f64,
    /// GHZ fidelity of the same branch without the correction.
    pub fidelity_uncorrected: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GhzReport {
    pub p: f64,
    /// Weight of the projection onto the per-party `{|01⟩, |10⟩}` subspace.
    pub success_probability: f64,
    pub dropped_weight: f64,
    pub branches: Vec<GhzBranch>,
}

impl GhzReport {
    pub fn min_fidelity(&self) -> f64 {
        self.branches
            .iter()
            .map(|b| b.fidelity)
            .fold(f64::INFINITY, f64::min)
    }
}

fn hadamard() -> ComplexMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::from_real(2, 2, &[h, h, h, -h])
}

fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, -1.0])
}

/// The steps of the two-copy GHZ protocol on parties `A, B, C`, each holding
/// one qubit from each copy. With `correct = false` the final conditional
/// phase flip is left out.
pub fn ghz_protocol(shape: &SystemShape, correct: bool) -> Result<Vec<ProtocolStep>> {
    let odd = LocalSubspace::computational(shape, &[vec![1, 2], vec![1, 2], vec![1, 2]])?;
    let rotate = kron(&ComplexMatrix::identity(2), &hadamard())?;
    let labels: Vec<String> = shape.labels().iter().map(|s| s.to_string()).collect();
    let mut steps = vec![
        ProtocolStep::Project(odd),
        ProtocolStep::LocalUnitary(labels.iter().map(|l| (l.clone(), rotate.clone())).collect()),
    ];
    for l in &labels {
        steps.push(ProtocolStep::MeasureAndDiscard {
            party: l.clone(),
            subsystem: 1,
            basis: None,
        });
    }
    if correct {
        steps.push(ProtocolStep::Conditional {
            predicate: Predicate::Parity {
                steps: vec![2, 3, 4],
                odd: true,
            },
            step: Box::new(ProtocolStep::LocalUnitary(vec![(
                labels[0].clone(),
                pauli_z(),
            )])),
        });
    }
    Ok(steps)
}

fn ghz_fidelity(rho: &DensityMatrix) -> f64 {
    let g = ghz();
    let v = rho.matrix().mul_vec(g.amplitudes());
    crate::tensor::inner(g.amplitudes(), &v).re
}

/// Distills GHZ from two copies of `p[GHZ] + (1−p)[|011⟩]`.
///
/// Each party projects its two qubits onto `{|01⟩, |10⟩}`, rotates its
/// second qubit by a Hadamard, measures it and discards it. When the three
/// outcomes have odd parity, party A applies `Z`.
pub fn ghz_from_two_copies(p: f64) -> Result<GhzReport> {
    let rho = three_qubit_example(p)?;
    if p == 0.0 {
        return Err(Error::InvalidParameter {
            name: "p",
            value: p,
            range: "(0, 1]",
        });
    }
    let rho2 = rho.tensor_power(2)?;
    let corrected = run(&ghz_protocol(rho2.shape(), true)?, &rho2)?;
    let plain = run(&ghz_protocol(rho2.shape(), false)?, &rho2)?;
    let branches = corrected
        .branches
        .iter()
        .zip(&plain.branches)
        .map(|(c, u)| {
            let mut outcomes = [0usize; 3];
            for (slot, o) in outcomes.iter_mut().zip(&c.outcomes) {
                *slot = o.value;
            }
            GhzBranch {
                outcomes,
                probability: c.probability,
                fidelity: ghz_fidelity(&c.state),
                fidelity_uncorrected: ghz_fidelity(&u.state),
            }
        })
        .collect();
    Ok(GhzReport {
        p,
        success_probability: corrected.success_probability(),
        dropped_weight: corrected.dropped_weight,
        branches,
    })
}

/* Werner two-copy projection *************************************************/

#[derive(Debug, Clone, PartialEq)]
pub struct WernerSubspace {
    /// Per-party computational index sets, e.g. `[[1, 2], [1, 2]]`.
    pub indices: Vec<Vec<usize>>,
    pub weight: f64,
    /// The projected 2⊗2 state in subspace coordinates.
    pub state: DensityMatrix,
    /// Bell-basis populations `Φ+, Φ−, Ψ+, Ψ−`.
    pub bell_weights: [f64; 4],
    pub max_off_diagonal: f64,
    pub bell_diagonal: bool,
    pub concurrence_after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WernerReport {
    pub fidelity: f64,
    pub concurrence_before: f64,
    pub subspaces: Vec<WernerSubspace>,
    /// Total post-selection weight over both subspaces.
    pub combined_weight: f64,
    /// Concurrence of the weight-averaged projected state.
    pub combined_after: f64,
}

/// Bound on Bell-basis coherences for a state to count as Bell-diagonal.
pub const BELL_DIAGONAL_ATOL: f64 = 1e-9;

/// `(populations, largest off-diagonal magnitude)` in the Bell basis.
pub fn bell_decomposition(rho: &DensityMatrix) -> Result<([f64; 4], f64)> {
    if rho.dim() != 4 {
        return Err(Error::UnsupportedShape(format!(
            "Bell basis needs a 2⊗2 state, got {}",
            rho.shape()
        )));
    }
    let b = bell_basis();
    let m = &(&b.adjoint() * rho.matrix()) * &b;
    let mut weights = [0.0; 4];
    let mut off = 0.0f64;
    for r in 0..4 {
        weights[r] = m[(r, r)].re;
        for c in 0..4 {
            if r != c {
                off = off.max(m[(r, c)].norm());
            }
        }
    }
    Ok((weights, off))
}

/// Projects two Werner copies onto Alice `{|01⟩,|10⟩}` with Bob
/// `{|01⟩,|10⟩}`, and onto Alice `{|00⟩,|11⟩}` with Bob `{|00⟩,|11⟩}`.
pub fn werner_two_copy(fidelity: f64, tol: &Tolerance) -> Result<WernerReport> {
    let rho = werner(fidelity)?;
    let before = concurrence(&rho, tol)?;
    let rho2 = rho.tensor_power(2)?;
    let mut subspaces = Vec::with_capacity(2);
    for set in [vec![1, 2], vec![0, 3]] {
        let indices = vec![set.clone(), set];
        let s = LocalSubspace::computational(rho2.shape(), &indices)?;
        let outcome = project(&rho2, &s, tol)?;
        let state = outcome.state.ok_or(Error::OutcomeNeverOccurs {
            trace: outcome.weight,
        })?;
        let (bell_weights, max_off_diagonal) = bell_decomposition(&state)?;
        subspaces.push(WernerSubspace {
            indices,
            weight: outcome.weight,
            concurrence_after: concurrence(&state, tol)?,
            state,
            bell_weights,
            max_off_diagonal,
            bell_diagonal: max_off_diagonal <= BELL_DIAGONAL_ATOL,
        });
    }
    let combined_weight: f64 = subspaces.iter().map(|s| s.weight).sum();
    let mut mix = ComplexMatrix::zeros(4, 4);
    for s in &subspaces {
        mix = &mix + &s.state.matrix().scale_real(s.weight / combined_weight);
    }
    let mixed = DensityMatrix::new_unchecked(subspaces[0].state.shape().clone(), mix);
    Ok(WernerReport {
        fidelity,
        concurrence_before: before,
        combined_after: concurrence(&mixed, tol)?,
        combined_weight,
        subspaces,
    })
}
