//! Entanglement diagnostics: dimension signatures of pure states, Schmidt
//! coefficients, the rank-signature check under invertible local operators,
//! and two-qubit concurrence / entanglement of formation.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::localops::{apply, ProductOperator, IMPOSSIBLE_BRANCH};
use crate::states::{filter_example, DensityMatrix, PureState, SystemShape};
use crate::tensor::{self, eig_hermitian, numerical_rank, svd, ComplexMatrix, Tolerance};

/// Ranks of the single-party reduced density matrices of a pure state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DimensionSignature(pub Vec<usize>);

impl DimensionSignature {
    /// A pure state is entangled iff some reduced state is mixed.
    pub fn is_entangled(&self) -> bool {
        self.0.iter().any(|&n| n > 1)
    }

    /// Entrywise `self ≥ min`.
    pub fn meets(&self, min: &[usize]) -> bool {
        self.0.len() == min.len() && self.0.iter().zip(min).all(|(a, b)| a >= b)
    }

    pub fn product(&self) -> usize {
        self.0.iter().product()
    }
}

impl fmt::Display for DimensionSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|n| n.to_string()).collect();
        write!(f, "{}", parts.join("⊗"))
    }
}

pub fn dimension_signature(psi: &PureState, tol: &Tolerance) -> DimensionSignature {
    DimensionSignature(
        (0..psi.shape().len())
            .map(|k| numerical_rank(&psi.reduced_density(k), tol))
            .collect(),
    )
}

/// Schmidt coefficients of a two-party pure state, descending, length
/// `min(d_A, d_B)`.
pub fn schmidt(psi: &PureState) -> Result<Vec<f64>> {
    if psi.shape().len() != 2 {
        return Err(Error::UnsupportedShape(format!(
            "Schmidt decomposition needs exactly two parties, got {}; bipartition first",
            psi.shape().len()
        )));
    }
    Ok(svd(&psi.party_matrix(0)).singulars)
}

/// Schmidt coefficients across the cut `group_a | rest`.
pub fn schmidt_bipartition(psi: &PureState, group_a: &[usize]) -> Result<Vec<f64>> {
    let shape = psi.shape();
    let mut a: Vec<usize> = group_a.to_vec();
    a.sort_unstable();
    a.dedup();
    if a.is_empty() || a.len() >= shape.len() || a.iter().any(|&k| k >= shape.len()) {
        return Err(Error::ShapeMismatch(format!(
            "invalid bipartition {group_a:?} of {} parties",
            shape.len()
        )));
    }
    let b: Vec<usize> = (0..shape.len()).filter(|k| !a.contains(k)).collect();
    let dims = shape.dims();
    let mut perm = a.clone();
    perm.extend(&b);
    let map = tensor::permutation_index_map(&dims, &perm)?;
    let da: usize = a.iter().map(|&k| dims[k]).product();
    let db: usize = b.iter().map(|&k| dims[k]).product();
    let amps = psi.amplitudes();
    let m = ComplexMatrix::from_fn(da, db, |r, c| amps[map[r * db + c]]);
    Ok(svd(&m).singulars)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lemma2Report {
    pub signature_before: DimensionSignature,
    pub signature_after: DimensionSignature,
    pub full_rank: bool,
    /// Vacuously true when the operator is not full rank.
    pub consistent: bool,
}

/// Compares dimension signatures of `ψ` and of `op ψ` (normalized).
pub fn verify_lemma2(
    psi: &PureState,
    op: &ProductOperator,
    tol: &Tolerance,
) -> Result<Lemma2Report> {
    let m = op.full_matrix()?;
    if m.cols() != psi.amplitudes().len() {
        return Err(Error::ShapeMismatch(format!(
            "operator on {} applied to a state on {}",
            op.shape(),
            psi.shape()
        )));
    }
    let image = m.mul_vec(psi.amplitudes());
    let probability: f64 = image.iter().map(|z| z.norm_sqr()).sum();
    if probability <= IMPOSSIBLE_BRANCH {
        return Err(Error::OutcomeNeverOccurs { trace: probability });
    }
    let after = PureState::normalized(psi.shape().clone(), image)?;
    let signature_before = dimension_signature(psi, tol);
    let signature_after = dimension_signature(&after, tol);
    let full_rank = op.is_full_rank(tol);
    Ok(Lemma2Report {
        consistent: !full_rank || signature_before == signature_after,
        signature_before,
        signature_after,
        full_rank,
    })
}

fn require_two_qubits(rho: &DensityMatrix) -> Result<()> {
    if rho.shape().dims() != [2, 2] {
        return Err(Error::UnsupportedShape(format!(
            "two-qubit measure on {}; only 2⊗2 states are supported",
            rho.shape()
        )));
    }
    Ok(())
}

/// `Y ⊗ Y` in the computational basis (real).
fn spin_flip() -> ComplexMatrix {
    ComplexMatrix::from_real(
        4,
        4,
        &[
            0.0, 0.0, 0.0, -1.0, //
            0.0, 0.0, 1.0, 0.0, //
            0.0, 1.0, 0.0, 0.0, //
            -1.0, 0.0, 0.0, 0.0,
        ],
    )
}

/// Eigenvalues below this fraction of the largest are rounding noise; their
/// square roots would otherwise inject errors of order √ε into the result.
const SQRT_CUTOFF: f64 = 1e-12;

fn psd_sqrt(m: &ComplexMatrix, tol: &Tolerance) -> Result<ComplexMatrix> {
    let eig = eig_hermitian(m, tol)?;
    let floor = SQRT_CUTOFF * eig.values[0].max(0.0);
    let roots: Vec<f64> = eig
        .values
        .iter()
        .map(|&v| if v > floor { v.sqrt() } else { 0.0 })
        .collect();
    let scaled = ComplexMatrix::from_fn(m.rows(), m.cols(), |r, c| eig.vectors[(r, c)] * roots[c]);
    Ok(&scaled * &eig.vectors.adjoint())
}

/// The square roots `λ₁ ≥ … ≥ λ₄` of the eigenvalues of `ρ (Y⊗Y) ρ* (Y⊗Y)`.
///
/// Computed as the singular values of `√ρ (Y⊗Y) √ρ*`, which avoids the
/// non-Hermitian eigenproblem.
pub fn wootters_lambdas(rho: &DensityMatrix, tol: &Tolerance) -> Result<Vec<f64>> {
    require_two_qubits(rho)?;
    let root = psd_sqrt(rho.matrix(), tol)?;
    let product = &(&root * &spin_flip()) * &root.conj();
    Ok(svd(&product).singulars)
}

pub fn concurrence(rho: &DensityMatrix, tol: &Tolerance) -> Result<f64> {
    let l = wootters_lambdas(rho, tol)?;
    Ok((l[0] - l[1] - l[2] - l[3]).clamp(0.0, 1.0))
}

pub fn binary_entropy(x: f64) -> f64 {
    let term = |p: f64| if p <= 0.0 { 0.0 } else { -p * p.log2() };
    term(x) + term(1.0 - x)
}

/// Two-qubit entanglement of formation, in ebits, from the concurrence.
pub fn eof_from_concurrence(c: f64) -> f64 {
    let c = c.clamp(0.0, 1.0);
    binary_entropy((1.0 + (1.0 - c * c).sqrt()) / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntanglementReport {
    pub concurrence: f64,
    pub eof: f64,
}

pub fn entanglement_of_formation(
    rho: &DensityMatrix,
    tol: &Tolerance,
) -> Result<EntanglementReport> {
    let c = concurrence(rho, tol)?;
    Ok(EntanglementReport {
        concurrence: c,
        eof: eof_from_concurrence(c),
    })
}

/// The local filter `½|0⟩⟨0| + (√3/2)|1⟩⟨1|` applied to party A.
pub fn example_filter() -> ComplexMatrix {
    ComplexMatrix::from_diag(&[0.5, 3f64.sqrt() / 2.0])
}

#[derive(Debug, Clone)]
pub struct FilterComparison {
    pub lambda: f64,
    /// Closed-form weight of `[Φ+]` after filtering, `3λ/(λ+2)`.
    pub lambda_prime: f64,
    pub before: EntanglementReport,
    pub after: EntanglementReport,
    pub filtered_state: DensityMatrix,
    pub success_probability: f64,
}

impl FilterComparison {
    pub fn improved(&self) -> bool {
        self.after.eof > self.before.eof
    }
}

/// Filters `λ[(√3/2)|00⟩ + ½|11⟩] + (1−λ)[|01⟩]` with [`example_filter`] on A
/// and compares entanglement of formation before and after.
pub fn filter_comparison(lambda: f64, tol: &Tolerance) -> Result<FilterComparison> {
    let rho = filter_example(lambda)?;
    let op = ProductOperator::on_party(rho.shape(), 0, example_filter())?;
    let out = apply(&op, &rho)?;
    Ok(FilterComparison {
        lambda,
        lambda_prime: 3.0 * lambda / (lambda + 2.0),
        before: entanglement_of_formation(&rho, tol)?,
        after: entanglement_of_formation(&out.state, tol)?,
        filtered_state: out.state,
        success_probability: out.probability,
    })
}

pub fn filter_curve(lambdas: &[f64], tol: &Tolerance) -> Result<Vec<FilterComparison>> {
    lambdas.iter().map(|&l| filter_comparison(l, tol)).collect()
}

/// Pure-state check helper: `2·s₀·s₁` from Schmidt coefficients.
pub fn pure_concurrence(psi: &PureState) -> Result<f64> {
    if psi.shape().dims() != [2, 2] {
        return Err(Error::UnsupportedShape(format!(
            "{} is not 2⊗2",
            psi.shape()
        )));
    }
    let s = schmidt(psi)?;
    Ok(2.0 * s[0] * s[1])
}

pub fn is_two_qubit(shape: &SystemShape) -> bool {
    shape.dims() == [2, 2]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::localops::LocalFactor;
    use crate::random;
    use crate::states::{ghz, werner, Bell};
    use crate::tensor::kron;
    use num_complex::Complex64 as C64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    /// X-state closed form `2·max(0, |ρ_{00,11}| − √(ρ_{01,01} ρ_{10,10}))`,
    /// valid when the only off-diagonal coherence is between |00⟩ and |11⟩.
    fn x_state_concurrence(rho: &DensityMatrix) -> f64 {
        let m = rho.matrix();
        2.0 * (m[(0, 3)].norm() - (m[(1, 1)].re * m[(2, 2)].re).sqrt()).max(0.0)
    }

    #[test]
    fn signatures() {
        assert_eq!(dimension_signature(&ghz(), &tol()).0, vec![2, 2, 2]);
        let product = PureState::basis(SystemShape::qubits(3), 0b011).unwrap();
        assert_eq!(dimension_signature(&product, &tol()).0, vec![1, 1, 1]);
    }

    #[test]
    fn signature_of_two_copy_phi() {
        // (|01,01,01⟩ + |10,10,10⟩)/√2 with each party holding two qubits
        let shape = SystemShape::qubits(3).power(2).unwrap();
        let idx = |a: usize| a * 16 + a * 4 + a;
        let phi = PureState::from_terms(
            shape,
            &[(idx(1), C64::new(1.0, 0.0)), (idx(2), C64::new(1.0, 0.0))],
        )
        .unwrap();
        // partial-trace oracle on the full density matrix
        let rho = phi.density();
        for party in 0..3 {
            let reduced = rho.reduced(&[party]).unwrap();
            assert_eq!(numerical_rank(reduced.matrix(), &tol()), 2);
        }
        assert_eq!(dimension_signature(&phi, &tol()).0, vec![2, 2, 2]);
    }

    #[test]
    fn schmidt_examples() {
        let s = schmidt(&Bell::PhiPlus.state()).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s[0] - h).abs() < 1e-14 && (s[1] - h).abs() < 1e-14);

        let s = schmidt(&crate::states::filter_example_pure()).unwrap();
        assert!((s[0] - 3f64.sqrt() / 2.0).abs() < 1e-14 && (s[1] - 0.5).abs() < 1e-14);

        let s = schmidt(&PureState::basis(SystemShape::qubits(2), 0b01).unwrap()).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-14 && s[1].abs() < 1e-14);

        assert!(matches!(schmidt(&ghz()), Err(Error::UnsupportedShape(_))));
        let cut = schmidt_bipartition(&ghz(), &[0]).unwrap();
        assert!((cut[0] - h).abs() < 1e-14 && (cut[1] - h).abs() < 1e-14);
    }

    #[test]
    fn signature_preservation_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let shape = SystemShape::qubits(3);
        let psi = PureState::normalized(shape.clone(), random::unit_vector(&mut rng, 8)).unwrap();
        let factors = ["A", "B", "C"]
            .iter()
            .map(|p| {
                LocalFactor::new(*p, random::invertible_contraction(&mut rng, 2, 0.2)).unwrap()
            })
            .collect();
        let op = ProductOperator::new(shape.clone(), factors).unwrap();
        let r = verify_lemma2(&psi, &op, &tol()).unwrap();
        assert!(r.full_rank && r.consistent);
        assert_eq!(r.signature_before, r.signature_after);

        let collapse =
            ProductOperator::on_party(&shape, 0, ComplexMatrix::from_diag(&[1.0, 0.0])).unwrap();
        let r = verify_lemma2(&ghz(), &collapse, &tol()).unwrap();
        assert!(!r.full_rank);
        assert_eq!(r.signature_after.0, vec![1, 1, 1]);

        let product = PureState::basis(shape, 0b101).unwrap();
        let r = verify_lemma2(&product, &op, &tol()).unwrap();
        assert_eq!(r.signature_after.0, vec![1, 1, 1]);
    }

    #[test]
    fn concurrence_examples() {
        let c = concurrence(&Bell::PhiPlus.state().density(), &tol()).unwrap();
        assert!((c - 1.0).abs() < 1e-9);
        for f in [0.0, 0.25, 0.5, 0.6, 0.8, 0.95, 1.0] {
            let c = concurrence(&werner(f).unwrap(), &tol()).unwrap();
            assert!((c - (2.0 * f - 1.0).max(0.0)).abs() < 1e-9, "F={f}");
        }
        for lambda in [0.05, 0.3, 0.5, 0.9, 0.99] {
            let rho = filter_example(lambda).unwrap();
            let c = concurrence(&rho, &tol()).unwrap();
            assert!((c - x_state_concurrence(&rho)).abs() < 1e-9);
            assert!((c - lambda * 3f64.sqrt() / 2.0).abs() < 1e-9);
        }
        assert!(matches!(
            concurrence(&ghz().density(), &tol()),
            Err(Error::UnsupportedShape(_))
        ));
    }

    #[test]
    fn eof_values() {
        assert_eq!(eof_from_concurrence(0.0), 0.0);
        assert!((eof_from_concurrence(1.0) - 1.0).abs() < 1e-15);
        // h(0.9) = -0.9 log2 0.9 - 0.1 log2 0.1
        let h09 = -0.9 * 0.9f64.log2() - 0.1 * 0.1f64.log2();
        assert!((eof_from_concurrence(0.6) - h09).abs() < 1e-12);
        assert!((h09 - 0.468_995_593_589_281).abs() < 1e-12);
        let grid: Vec<f64> = (0..=100)
            .map(|k| eof_from_concurrence(k as f64 / 100.0))
            .collect();
        assert!(grid.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn concurrence_local_unitary_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let shape = SystemShape::qubits(2);
        for trial in 0..200 {
            let rho = DensityMatrix::new(
                shape.clone(),
                random::density_matrix(&mut rng, 4, 1 + trial % 4),
                &tol(),
            )
            .unwrap();
            let u = kron(&random::unitary(&mut rng, 2), &random::unitary(&mut rng, 2)).unwrap();
            let rotated = DensityMatrix::new(
                shape.clone(),
                (&(&u * rho.matrix()) * &u.adjoint()).hermitian_part(),
                &tol(),
            )
            .unwrap();
            let a = concurrence(&rho, &tol()).unwrap();
            let b = concurrence(&rotated, &tol()).unwrap();
            assert!((a - b).abs() <= 1e-9, "trial {trial}: {a} vs {b}");
        }
    }

    #[test]
    fn pure_concurrence_matches_schmidt() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..200 {
            let psi =
                PureState::normalized(SystemShape::qubits(2), random::unit_vector(&mut rng, 4))
                    .unwrap();
            let c = concurrence(&psi.density(), &tol()).unwrap();
            assert!((c - pure_concurrence(&psi).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn filter_comparison_at_point_nine() {
        let r = filter_comparison(0.9, &tol()).unwrap();
        assert!(r.improved());
        assert!((r.lambda_prime - 2.7 / 2.9).abs() < 1e-15);
        assert!((r.success_probability - 0.3625).abs() < 1e-12);
        assert!((r.after.concurrence - 2.7 / 2.9).abs() < 1e-9);
    }

    #[test]
    fn filter_comparison_pure_limit() {
        let r = filter_comparison(1.0, &tol()).unwrap();
        assert!((r.before.concurrence - 3f64.sqrt() / 2.0).abs() < 1e-9);
        assert!((r.after.concurrence - 1.0).abs() < 1e-9);
        let phi = Bell::PhiPlus.state().density();
        assert!(r.filtered_state.matrix().max_abs_diff(phi.matrix()) < 1e-12);
    }
}
