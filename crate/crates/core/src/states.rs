//! Multipartite state model.
//!
//! A [`SystemShape`] lists the parties in index order. Each party owns one or
//! more subsystems (a single-copy party has one; after [`DensityMatrix::tensor_power`]
//! a party holds one subsystem per copy, adjacent and ordered by copy index).
//! The party's local dimension is the product of its subsystem dimensions.

use std::collections::HashSet;
use std::fmt;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{
    self, eig_hermitian, kron, kron_vec, norm, permutation_index_map, ComplexMatrix,
    HermitianEigen, Tolerance, MAX_SIDE, ZERO,
};

/// Trace must equal one to within this bound.
pub const TRACE_ATOL: f64 = 1e-9;
/// Pure states must have unit norm to within this bound.
pub const NORM_ATOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Party {
    pub label: String,
    subsystems: Vec<usize>,
}

impl Party {
    pub fn new(label: impl Into<String>, dim: usize) -> Self {
        Self {
            label: label.into(),
            subsystems: vec![dim],
        }
    }

    pub fn with_subsystems(label: impl Into<String>, subsystems: Vec<usize>) -> Self {
        Self {
            label: label.into(),
            subsystems,
        }
    }

    pub fn dim(&self) -> usize {
        self.subsystems.iter().product()
    }

    pub fn subsystems(&self) -> &[usize] {
        &self.subsystems
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SystemShape {
    parties: Vec<Party>,
}

impl fmt::Display for SystemShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .parties
            .iter()
            .map(|p| {
                if p.subsystems.len() == 1 {
                    format!("{}:{}", p.label, p.dim())
                } else {
                    let subs: Vec<String> = p.subsystems.iter().map(|d| d.to_string()).collect();
                    format!("{}:{}", p.label, subs.join("x"))
                }
            })
            .collect();
        write!(f, "{}", parts.join(" ⊗ "))
    }
}

pub fn default_label(index: usize) -> String {
    const LETTERS: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZ";
    if index < LETTERS.len() {
        (LETTERS[index] as char).to_string()
    } else {
        format!("P{index}")
    }
}

impl SystemShape {
    pub fn new(parties: Vec<Party>) -> Result<Self> {
        if parties.is_empty() {
            return Err(Error::InvalidShape("at least one party is required".into()));
        }
        let mut labels = HashSet::new();
        let mut total: usize = 1;
        for p in &parties {
            if p.label.is_empty() {
                return Err(Error::InvalidShape("empty party label".into()));
            }
            if !labels.insert(p.label.as_str()) {
                return Err(Error::InvalidShape(format!(
                    "duplicate party label {:?}",
                    p.label
                )));
            }
            if p.subsystems.is_empty() || p.subsystems.contains(&0) {
                return Err(Error::InvalidShape(format!(
                    "party {} has invalid subsystem dimensions {:?}",
                    p.label, p.subsystems
                )));
            }
            for &d in &p.subsystems {
                total = total.saturating_mul(d);
            }
        }
        if total > MAX_SIDE {
            return Err(Error::DimensionCap {
                side: total,
                cap: MAX_SIDE,
            });
        }
        Ok(Self { parties })
    }

    /// Parties labelled `A`, `B`, `C`, … with the given local dimensions.
    pub fn from_dims(dims: &[usize]) -> Result<Self> {
        Self::new(
            dims.iter()
                .enumerate()
                .map(|(i, &d)| Party::new(default_label(i), d))
                .collect(),
        )
    }

    pub fn qubits(n: usize) -> Self {
        Self::from_dims(&vec![2; n]).expect("small qubit shape")
    }

    pub fn parties(&self) -> &[Party] {
        &self.parties
    }

    pub fn party(&self, index: usize) -> &Party {
        &self.parties[index]
    }

    pub fn len(&self) -> usize {
        self.parties.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parties.is_empty()
    }

    pub fn party_index(&self, label: &str) -> Option<usize> {
        self.parties.iter().position(|p| p.label == label)
    }

    /// Local dimension of each party.
    pub fn dims(&self) -> Vec<usize> {
        self.parties.iter().map(Party::dim).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.parties.iter().map(Party::dim).product()
    }

    /// All subsystem dimensions, flattened in party order.
    pub fn subsystem_dims(&self) -> Vec<usize> {
        self.parties
            .iter()
            .flat_map(|p| p.subsystems.iter().copied())
            .collect()
    }

    /// Flattened index of the party's first subsystem.
    pub fn subsystem_offset(&self, party: usize) -> usize {
        self.parties[..party]
            .iter()
            .map(|p| p.subsystems.len())
            .sum()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.parties.iter().map(|p| p.label.as_str()).collect()
    }

    /// Same labels, one subsystem per party with the given dimensions.
    pub fn with_dims(&self, dims: &[usize]) -> Result<Self> {
        if dims.len() != self.parties.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} dimensions for {} parties",
                dims.len(),
                self.parties.len()
            )));
        }
        Self::new(
            self.parties
                .iter()
                .zip(dims)
                .map(|(p, &d)| Party::new(p.label.clone(), d))
                .collect(),
        )
    }

    /// Shape of `n` copies with each party's subsystems repeated per copy.
    pub fn power(&self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter {
                name: "copies",
                value: 0.0,
                range: "[1, ∞)",
            });
        }
        let total = (self.total_dim() as u128)
            .checked_pow(n as u32)
            .unwrap_or(u128::MAX);
        if total > MAX_SIDE as u128 {
            return Err(Error::DimensionCap {
                side: total.min(usize::MAX as u128) as usize,
                cap: MAX_SIDE,
            });
        }
        Self::new(
            self.parties
                .iter()
                .map(|p| {
                    let subs = std::iter::repeat_n(p.subsystems.iter().copied(), n)
                        .flatten()
                        .collect();
                    Party::with_subsystems(p.label.clone(), subs)
                })
                .collect(),
        )
    }

    /// Permutation taking the copy-major subsystem order of an `n`-fold
    /// Kronecker product to the party-major order of [`Self::power`].
    fn copy_regrouping(&self, n: usize) -> Vec<usize> {
        let per_copy = self.subsystem_dims().len();
        let mut perm = Vec::with_capacity(per_copy * n);
        for (p, party) in self.parties.iter().enumerate() {
            let off = self.subsystem_offset(p);
            for c in 0..n {
                for j in 0..party.subsystems.len() {
                    perm.push(c * per_copy + off + j);
                }
            }
        }
        perm
    }

    fn check_matrix(&self, m: &ComplexMatrix) -> Result<()> {
        let d = self.total_dim();
        if m.rows() != d || m.cols() != d {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} matrix for shape {} (dimension {})",
                m.rows(),
                m.cols(),
                self,
                d
            )));
        }
        Ok(())
    }
}

/* Pure states ****************************************************************/

#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    shape: SystemShape,
    amplitudes: Vec<C64>,
}

impl PureState {
    pub fn new(shape: SystemShape, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != shape.total_dim() {
            return Err(Error::ShapeMismatch(format!(
                "{} amplitudes for shape {}",
                amplitudes.len(),
                shape
            )));
        }
        let n = norm(&amplitudes);
        if !n.is_finite() || (n - 1.0).abs() > NORM_ATOL {
            return Err(Error::NotNormalized { norm: n });
        }
        Ok(Self { shape, amplitudes })
    }

    /// Rescales to unit norm; rejects the zero vector.
    pub fn normalized(shape: SystemShape, mut amplitudes: Vec<C64>) -> Result<Self> {
        let n = norm(&amplitudes);
        if !n.is_finite() || n <= 0.0 {
            return Err(Error::NotNormalized { norm: n });
        }
        amplitudes.iter_mut().for_each(|z| *z /= n);
        Self::new(shape, amplitudes)
    }

    /// Superposition of computational basis states given as `(index, amplitude)`,
    /// normalized.
    pub fn from_terms(shape: SystemShape, terms: &[(usize, C64)]) -> Result<Self> {
        let mut amps = vec![ZERO; shape.total_dim()];
        for &(i, a) in terms {
            if i >= amps.len() {
                return Err(Error::ShapeMismatch(format!(
                    "basis index {i} out of range"
                )));
            }
            amps[i] += a;
        }
        Self::normalized(shape, amps)
    }

    pub fn basis(shape: SystemShape, index: usize) -> Result<Self> {
        Self::from_terms(shape, &[(index, C64::new(1.0, 0.0))])
    }

    pub fn shape(&self) -> &SystemShape {
        &self.shape
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix {
            shape: self.shape.clone(),
            mat: ComplexMatrix::projector(&self.amplitudes),
        }
    }

    /// `|⟨self|other⟩|²`
    pub fn overlap(&self, other: &PureState) -> f64 {
        tensor::inner(&self.amplitudes, &other.amplitudes).norm_sqr()
    }

    /// Amplitudes reshaped with the party's index as rows and every other
    /// party's indices as columns.
    pub fn party_matrix(&self, party: usize) -> ComplexMatrix {
        let dims = self.shape.dims();
        let d = dims[party];
        let rest = self.shape.total_dim() / d;
        let mut m = ComplexMatrix::zeros(d, rest);
        let rest_dims: Vec<usize> = dims
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != party)
            .map(|(_, &x)| x)
            .collect();
        for (idx, a) in self.amplitudes.iter().enumerate() {
            let digits = tensor::unravel(idx, &dims);
            let rest_digits: Vec<usize> = digits
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != party)
                .map(|(_, &x)| x)
                .collect();
            m[(digits[party], tensor::ravel(&rest_digits, &rest_dims))] = *a;
        }
        m
    }

    /// Single-party reduced density matrix, computed directly from amplitudes.
    pub fn reduced_density(&self, party: usize) -> ComplexMatrix {
        let m = self.party_matrix(party);
        &m * &m.adjoint()
    }

    pub fn tensor(&self, other: &PureState) -> Result<PureState> {
        let mut parties = self.shape.parties.clone();
        parties.extend(other.shape.parties.iter().cloned());
        let shape = SystemShape::new(parties)?;
        Ok(Self {
            shape,
            amplitudes: kron_vec(&self.amplitudes, &other.amplitudes),
        })
    }

    pub fn tensor_power(&self, n: usize) -> Result<PureState> {
        let shape = self.shape.power(n)?;
        let mut amps = self.amplitudes.clone();
        for _ in 1..n {
            amps = kron_vec(&amps, &self.amplitudes);
        }
        let copy_dims: Vec<usize> = std::iter::repeat_n(self.shape.subsystem_dims(), n)
            .flatten()
            .collect();
        let map = permutation_index_map(&copy_dims, &self.shape.copy_regrouping(n))?;
        Ok(Self {
            shape,
            amplitudes: map.iter().map(|&old| amps[old]).collect(),
        })
    }
}

/* Density matrices ***********************************************************/

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    shape: SystemShape,
    mat: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity, in that order.
    pub fn new(shape: SystemShape, mat: ComplexMatrix, tol: &Tolerance) -> Result<Self> {
        shape.check_matrix(&mat)?;
        let deviation = mat.hermitian_deviation();
        if deviation > tol.herm_atol {
            return Err(Error::NotHermitian {
                deviation,
                tol: tol.herm_atol,
            });
        }
        let trace = mat.trace().re;
        if (trace - 1.0).abs() > TRACE_ATOL {
            return Err(Error::TraceNotOne { trace });
        }
        let eig = eig_hermitian(&mat, tol)?;
        let min_eigenvalue = eig.values.last().copied().unwrap_or(0.0);
        if min_eigenvalue < -tol.psd_atol {
            return Err(Error::NotPositive {
                min_eigenvalue,
                tol: tol.psd_atol,
            });
        }
        Ok(Self { shape, mat })
    }

    /// For internally produced matrices that are PSD by construction.
    pub(crate) fn new_unchecked(shape: SystemShape, mat: ComplexMatrix) -> Self {
        debug_assert_eq!(mat.rows(), shape.total_dim());
        Self { shape, mat }
    }

    /// Normalizes an unnormalized positive matrix (e.g. `MρM†`) by its trace.
    pub(crate) fn from_unnormalized(shape: SystemShape, mat: &ComplexMatrix) -> (Self, f64) {
        let trace = mat.trace().re;
        let normalized = mat.hermitian_part().scale_real(1.0 / trace);
        (Self::new_unchecked(shape, normalized), trace)
    }

    /// `Σ w_k |ψ_k⟩⟨ψ_k|`, weights normalized to sum one.
    pub fn mixture(components: &[(f64, &PureState)]) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidShape("empty mixture".into()))?;
        let shape = first.1.shape.clone();
        let total: f64 = components.iter().map(|c| c.0).sum();
        if !total.is_finite() || total <= 0.0 || components.iter().any(|c| c.0 < 0.0) {
            return Err(Error::InvalidParameter {
                name: "mixture weight",
                value: total,
                range: "nonnegative weights with positive sum",
            });
        }
        let d = shape.total_dim();
        let mut mat = ComplexMatrix::zeros(d, d);
        for (w, psi) in components {
            if psi.shape != shape {
                return Err(Error::ShapeMismatch(
                    "mixture components differ in shape".into(),
                ));
            }
            if *w > 0.0 {
                mat = &mat + &ComplexMatrix::projector(&psi.amplitudes).scale_real(w / total);
            }
        }
        Ok(Self::new_unchecked(shape, mat.hermitian_part()))
    }

    pub fn maximally_mixed(shape: SystemShape) -> Self {
        let d = shape.total_dim();
        Self::new_unchecked(shape, ComplexMatrix::identity(d).scale_real(1.0 / d as f64))
    }

    pub fn shape(&self) -> &SystemShape {
        &self.shape
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn into_parts(self) -> (SystemShape, ComplexMatrix) {
        (self.shape, self.mat)
    }

    pub fn eigen(&self, tol: &Tolerance) -> Result<HermitianEigen> {
        eig_hermitian(&self.mat, tol)
    }

    pub fn rank(&self, tol: &Tolerance) -> usize {
        tensor::numerical_rank(&self.mat, tol)
    }

    /// `tr ρ²`
    pub fn purity(&self) -> f64 {
        self.mat.data().iter().map(|z| z.norm_sqr()).sum()
    }

    /// `⟨ψ|ρ|ψ⟩`
    pub fn fidelity_with(&self, psi: &PureState) -> f64 {
        let v = self.mat.mul_vec(psi.amplitudes());
        tensor::inner(psi.amplitudes(), &v).re
    }

    /// Reduced state on the given parties (kept in shape order).
    pub fn reduced(&self, keep_parties: &[usize]) -> Result<DensityMatrix> {
        let mut keep: Vec<usize> = keep_parties.to_vec();
        keep.sort_unstable();
        keep.dedup();
        if let Some(&bad) = keep.iter().find(|&&k| k >= self.shape.len()) {
            return Err(Error::ShapeMismatch(format!("party {bad} out of range")));
        }
        let mat = tensor::partial_trace(&self.mat, &self.shape.dims(), &keep)?;
        let shape = SystemShape::new(
            keep.iter()
                .map(|&k| self.shape.parties[k].clone())
                .collect(),
        )?;
        Ok(Self::new_unchecked(shape, mat))
    }

    /// Joint state `self ⊗ other`; party labels must stay unique.
    pub fn tensor(&self, other: &DensityMatrix) -> Result<DensityMatrix> {
        let mut parties = self.shape.parties.clone();
        parties.extend(other.shape.parties.iter().cloned());
        let shape = SystemShape::new(parties)?;
        Ok(Self::new_unchecked(shape, kron(&self.mat, &other.mat)?))
    }

    /// `ρ^{⊗n}` over the regrouped shape of [`SystemShape::power`].
    pub fn tensor_power(&self, n: usize) -> Result<DensityMatrix> {
        let shape = self.shape.power(n)?;
        if n == 1 {
            return Ok(self.clone());
        }
        let mut m = self.mat.clone();
        for _ in 1..n {
            m = kron(&m, &self.mat)?;
        }
        let copy_dims: Vec<usize> = std::iter::repeat_n(self.shape.subsystem_dims(), n)
            .flatten()
            .collect();
        let mat = tensor::permute_subsystems(&m, &copy_dims, &self.shape.copy_regrouping(n))?;
        Ok(Self::new_unchecked(shape, mat))
    }

    /// Dominant eigenvector, as a pure state on the same shape.
    pub fn dominant_state(&self, tol: &Tolerance) -> Result<(f64, PureState)> {
        let eig = self.eigen(tol)?;
        let psi = PureState::normalized(self.shape.clone(), eig.vectors.column(0))?;
        Ok((eig.values[0], psi))
    }
}

/* Presets ********************************************************************/

fn check_unit_interval(name: &'static str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::InvalidParameter {
            name,
            value,
            range: "[0, 1]",
        });
    }
    Ok(())
}

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bell {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl Bell {
    pub const ALL: [Bell; 4] = [Bell::PhiPlus, Bell::PhiMinus, Bell::PsiPlus, Bell::PsiMinus];

    pub fn name(self) -> &'static str {
        match self {
            Bell::PhiPlus => "Φ+",
            Bell::PhiMinus => "Φ-",
            Bell::PsiPlus => "Ψ+",
            Bell::PsiMinus => "Ψ-",
        }
    }

    /// Amplitudes in the `|00⟩, |01⟩, |10⟩, |11⟩` basis.
    pub fn amplitudes(self) -> [C64; 4] {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            Bell::PhiPlus => [real(s), ZERO, ZERO, real(s)],
            Bell::PhiMinus => [real(s), ZERO, ZERO, real(-s)],
            Bell::PsiPlus => [ZERO, real(s), real(s), ZERO],
            Bell::PsiMinus => [ZERO, real(s), real(-s), ZERO],
        }
    }

    pub fn state(self) -> PureState {
        PureState {
            shape: SystemShape::qubits(2),
            amplitudes: self.amplitudes().to_vec(),
        }
    }
}

/// Columns are `Φ+, Φ-, Ψ+, Ψ-`.
pub fn bell_basis() -> ComplexMatrix {
    let cols: Vec<Vec<C64>> = Bell::ALL.iter().map(|b| b.amplitudes().to_vec()).collect();
    ComplexMatrix::from_columns(&cols)
}

/// `F[Φ+] + (1−F)/3 ([Φ−] + [Ψ+] + [Ψ−])`
pub fn werner(fidelity: f64) -> Result<DensityMatrix> {
    check_unit_interval("F", fidelity)?;
    let q = (1.0 - fidelity) / 3.0;
    let (phi_p, phi_m, psi_p, psi_m) = (
        Bell::PhiPlus.state(),
        Bell::PhiMinus.state(),
        Bell::PsiPlus.state(),
        Bell::PsiMinus.state(),
    );
    // weights are used as given (they already sum to one)
    let shape = SystemShape::qubits(2);
    let mut mat = ComplexMatrix::zeros(4, 4);
    for (w, psi) in [(fidelity, &phi_p), (q, &phi_m), (q, &psi_p), (q, &psi_m)] {
        mat = &mat + &ComplexMatrix::projector(psi.amplitudes()).scale_real(w);
    }
    Ok(DensityMatrix::new_unchecked(shape, mat))
}

/// `(|000⟩ + |111⟩)/√2`
pub fn ghz() -> PureState {
    PureState::from_terms(
        SystemShape::qubits(3),
        &[(0b000, real(1.0)), (0b111, real(1.0))],
    )
    .expect("valid preset")
}

/// The three-qubit W-type state `(|100⟩ + |010⟩ + |011⟩)/√3`. Note the last
/// component differs from the textbook W state; see [`w_standard`].
pub fn w_as_printed() -> PureState {
    PureState::from_terms(
        SystemShape::qubits(3),
        &[(0b100, real(1.0)), (0b010, real(1.0)), (0b011, real(1.0))],
    )
    .expect("valid preset")
}

/// Textbook W state `(|100⟩ + |010⟩ + |001⟩)/√3`.
pub fn w_standard() -> PureState {
    PureState::from_terms(
        SystemShape::qubits(3),
        &[(0b100, real(1.0)), (0b010, real(1.0)), (0b001, real(1.0))],
    )
    .expect("valid preset")
}

/// `(GHZ, W)` with W from [`w_as_printed`].
pub fn ghz_w() -> (PureState, PureState) {
    (ghz(), w_as_printed())
}

/// `p[GHZ] + (1−p)[|0⟩_A|1⟩_B|1⟩_C]`
pub fn three_qubit_example(p: f64) -> Result<DensityMatrix> {
    check_unit_interval("p", p)?;
    let product = PureState::basis(SystemShape::qubits(3), 0b011)?;
    DensityMatrix::mixture(&[(p, &ghz()), (1.0 - p, &product)])
}

/// `(√3/2)|00⟩ + (1/2)|11⟩`
pub fn filter_example_pure() -> PureState {
    PureState::from_terms(
        SystemShape::qubits(2),
        &[(0b00, real(3f64.sqrt() / 2.0)), (0b11, real(0.5))],
    )
    .expect("valid preset")
}

/// `λ[(√3/2)|00⟩ + (1/2)|11⟩] + (1−λ)[|01⟩]`
pub fn filter_example(lambda: f64) -> Result<DensityMatrix> {
    check_unit_interval("lambda", lambda)?;
    let product = PureState::basis(SystemShape::qubits(2), 0b01)?;
    DensityMatrix::mixture(&[(lambda, &filter_example_pure()), (1.0 - lambda, &product)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn reduced_ranks(psi: &PureState) -> Vec<usize> {
        (0..psi.shape().len())
            .map(|k| tensor::numerical_rank(&psi.reduced_density(k), &tol()))
            .collect()
    }

    #[test]
    fn shape_validation() {
        assert!(SystemShape::new(vec![]).is_err());
        assert!(SystemShape::new(vec![Party::new("A", 2), Party::new("A", 2)]).is_err());
        assert!(matches!(
            SystemShape::from_dims(&[64, 65]),
            Err(Error::DimensionCap { .. })
        ));
        let s = SystemShape::from_dims(&[2, 3]).unwrap();
        assert_eq!(s.labels(), vec!["A", "B"]);
        assert_eq!(s.total_dim(), 6);
    }

    #[test]
    fn tensor_power_one_is_identity() {
        let rho = werner(0.7).unwrap();
        let p = rho.tensor_power(1).unwrap();
        assert_eq!(p, rho);
    }

    #[test]
    fn tensor_power_product_state_regroups_by_party() {
        let zero =
            PureState::basis(SystemShape::new(vec![Party::new("A", 2)]).unwrap(), 0).unwrap();
        let one = PureState::basis(SystemShape::new(vec![Party::new("B", 2)]).unwrap(), 1).unwrap();
        let rho = zero.tensor(&one).unwrap().density();
        let two = rho.tensor_power(2).unwrap();
        assert_eq!(two.shape().party(0).subsystems(), &[2, 2]);
        assert_eq!(two.shape().dims(), vec![4, 4]);
        // |00⟩_A |11⟩_B = index 0b0011
        let expected = ComplexMatrix::projector(&tensor::basis_vector(16, 0b0011));
        assert!(two.matrix().max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn pure_and_mixed_tensor_powers_agree() {
        let psi = ghz();
        let a = psi.tensor_power(2).unwrap().density();
        let b = psi.density().tensor_power(2).unwrap();
        assert_eq!(a.shape(), b.shape());
        assert!(a.matrix().max_abs_diff(b.matrix()) < 1e-15);
    }

    #[test]
    fn tensor_power_spectrum_is_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for (dims, rank) in [(vec![2usize, 2], 3usize), (vec![2], 2), (vec![2, 2], 4)] {
            let shape = SystemShape::from_dims(&dims).unwrap();
            let d = shape.total_dim();
            let rho = DensityMatrix::new(shape, random::density_matrix(&mut rng, d, rank), &tol())
                .unwrap();
            let ev = rho.eigen(&tol()).unwrap().values;
            let two = rho.tensor_power(2).unwrap();
            assert!((two.matrix().trace().re - 1.0).abs() < 1e-12);
            let mut expected: Vec<f64> = ev
                .iter()
                .flat_map(|a| ev.iter().map(move |b| a * b))
                .collect();
            expected.sort_by(|a, b| b.total_cmp(a));
            let got = two.eigen(&tol()).unwrap().values;
            for (g, e) in got.iter().zip(&expected) {
                assert!((g - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn copy_one_marginal_recovers_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let shape = SystemShape::from_dims(&[2, 3]).unwrap();
        let rho =
            DensityMatrix::new(shape, random::density_matrix(&mut rng, 6, 4), &tol()).unwrap();
        let two = rho.tensor_power(2).unwrap();
        // subsystems: A.copy1, A.copy2, B.copy1, B.copy2
        let sub = two.shape().subsystem_dims();
        assert_eq!(sub, vec![2, 2, 3, 3]);
        let first = tensor::partial_trace(two.matrix(), &sub, &[0, 2]).unwrap();
        assert!(first.max_abs_diff(rho.matrix()) < 1e-12);
        let second = tensor::partial_trace(two.matrix(), &sub, &[1, 3]).unwrap();
        assert!(second.max_abs_diff(rho.matrix()) < 1e-12);
    }

    #[test]
    fn werner_presets() {
        let w1 = werner(1.0).unwrap();
        assert!(
            w1.matrix()
                .max_abs_diff(&Bell::PhiPlus.state().density().mat)
                < 1e-15
        );

        let quarter = werner(0.25).unwrap();
        assert!(
            quarter
                .matrix()
                .max_abs_diff(&ComplexMatrix::identity(4).scale_real(0.25))
                < 1e-15
        );

        let ev = werner(0.8).unwrap().eigen(&tol()).unwrap().values;
        let q = 0.2 / 3.0;
        for (g, e) in ev.iter().zip([0.8, q, q, q]) {
            assert!((g - e).abs() < 1e-12);
        }
        assert!(werner(1.2).is_err());
        assert!(werner(-0.1).is_err());
    }

    #[test]
    fn ghz_and_w() {
        let (g, w) = ghz_w();
        assert_eq!(reduced_ranks(&g), vec![2, 2, 2]);
        assert_eq!(reduced_ranks(&w), vec![2, 2, 2]);
        assert!(g.overlap(&w) < 1e-30);
        assert_eq!(reduced_ranks(&w_standard()), vec![2, 2, 2]);
    }

    #[test]
    fn three_qubit_example_preset() {
        let rho = three_qubit_example(0.5).unwrap();
        assert_eq!(rho.rank(&tol()), 2);
        assert!((rho.matrix().trace().re - 1.0).abs() < 1e-15);
        let pure = three_qubit_example(1.0).unwrap();
        assert!(pure.matrix().max_abs_diff(&ghz().density().mat) < 1e-15);
        for p in [0.1, 0.33, 0.9] {
            let r = three_qubit_example(p).unwrap();
            assert!((r.matrix().trace().re - 1.0).abs() < 1e-15);
            DensityMatrix::new(r.shape().clone(), r.matrix().clone(), &tol()).unwrap();
        }
        assert!(three_qubit_example(1.5).is_err());
    }

    #[test]
    fn filter_example_preset() {
        let psi = filter_example_pure();
        let reduced_a = psi.reduced_density(0);
        assert!(reduced_a.max_abs_diff(&ComplexMatrix::from_diag(&[0.75, 0.25])) < 1e-15);
        let at_one = filter_example(1.0).unwrap();
        assert!(at_one.matrix().max_abs_diff(&psi.density().mat) < 1e-15);
        assert_eq!(filter_example(0.5).unwrap().rank(&tol()), 2);
    }

    #[test]
    fn validation_names_failed_invariant() {
        let shape = SystemShape::qubits(1);
        let bad_trace = ComplexMatrix::from_diag(&[0.5, 0.4]);
        assert!(matches!(
            DensityMatrix::new(shape.clone(), bad_trace, &tol()),
            Err(Error::TraceNotOne { .. })
        ));
        let negative = ComplexMatrix::from_diag(&[1.001, -0.001]);
        assert!(matches!(
            DensityMatrix::new(shape.clone(), negative, &tol()),
            Err(Error::NotPositive { .. })
        ));
        let mut skew = ComplexMatrix::from_diag(&[0.5, 0.5]);
        skew[(0, 1)] = C64::new(0.1, 0.0);
        assert!(matches!(
            DensityMatrix::new(shape, skew, &tol()),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn constructors_pass_invariants() {
        let states = [
            werner(0.3).unwrap(),
            three_qubit_example(0.4).unwrap(),
            filter_example(0.2).unwrap(),
            ghz().density(),
            w_as_printed().density(),
        ];
        for rho in states {
            DensityMatrix::new(rho.shape().clone(), rho.matrix().clone(), &tol()).unwrap();
        }
    }
}
