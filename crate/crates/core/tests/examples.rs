use distill_core::dss::{
    check_certificate, check_rank_bound, find_dss, rank_bound, DssConstraints, LocalBases,
    LocalSubspace, SearchOptions,
};
use distill_core::entanglement::{concurrence, filter_comparison};
use distill_core::protocols::{ghz_from_two_copies, werner_two_copy};
use distill_core::states::{self, Bell};
use distill_core::tensor::{inner, kron, unravel};
use distill_core::{ComplexMatrix, DensityMatrix, Tolerance};

fn tol() -> Tolerance {
    Tolerance::default()
}

/// Success weight of the per-party {|01⟩,|10⟩} projection on two copies,
/// summed directly over the copy-major diagonal of ρ⊗ρ.
fn two_copy_weight_oracle(rho: &DensityMatrix) -> f64 {
    let pair = kron(rho.matrix(), rho.matrix()).unwrap();
    (0..64)
        .filter(|&i| {
            let d = unravel(i, &[2; 6]);
            (0..3).all(|k| d[k] != d[k + 3])
        })
        .map(|i| pair[(i, i)].re)
        .sum()
}

#[test]
fn three_qubit_example_has_no_single_copy_dss() {
    for p in [0.1, 0.5, 0.9] {
        let rho = states::three_qubit_example(p).unwrap();
        let search = find_dss(
            &rho,
            &LocalBases::computational(rho.shape()),
            &DssConstraints::default(),
            &SearchOptions::default(),
            &tol(),
        )
        .unwrap();
        assert!(search.certificates.is_empty(), "p = {p}");
        assert_eq!(search.stats.candidates, 27);
    }
}

#[test]
fn three_qubit_example_two_copy_certificate() {
    let ghz = states::ghz();
    for p in [0.1, 0.5, 0.9] {
        let single = states::three_qubit_example(p).unwrap();
        let rho = single.tensor_power(2).unwrap();
        let search = find_dss(
            &rho,
            &LocalBases::computational(rho.shape()),
            &DssConstraints::default(),
            &SearchOptions::default(),
            &tol(),
        )
        .unwrap();
        assert_eq!(search.stats.candidates, 3375);
        let minimal = search.minimal();
        assert_eq!(minimal.len(), 1);
        let cert = minimal[0];
        let indices = vec![vec![1, 2]; 3];
        assert_eq!(cert.basis_indices(), Some(indices.as_slice()));
        assert!((cert.weight() - p * p / 2.0).abs() <= 1e-9);
        assert!((cert.weight() - two_copy_weight_oracle(&single)).abs() <= 1e-12);
        let overlap = inner(ghz.amplitudes(), cert.pure_state().amplitudes()).norm_sqr();
        assert!(overlap >= 1.0 - 1e-9);
        assert_eq!(cert.signature().0, vec![2, 2, 2]);

        let rank = check_rank_bound(&single, 2, cert, &tol()).unwrap();
        assert_eq!((rank.rank, rank.bound), (4, 57));
        assert!(rank.satisfied);
        for c in &search.certificates {
            assert!(check_rank_bound(&single, 2, c, &tol()).unwrap().satisfied);
            assert!(check_certificate(&rho, c.subspace(), &tol()).is_ok());
        }
    }
}

#[test]
fn certificate_check_refuses_single_copy_ghz_subspace() {
    let rho = states::three_qubit_example(0.5).unwrap();
    let s =
        LocalSubspace::computational(rho.shape(), &[vec![0, 1], vec![0, 1], vec![0, 1]]).unwrap();
    assert!(check_certificate(&rho, &s, &tol()).is_err());
    let pure = states::ghz().density();
    let cert = check_certificate(&pure, &s, &tol()).unwrap();
    assert!((cert.weight() - 1.0).abs() <= 1e-12);
}

#[test]
fn rank_bound_examples() {
    let shape = distill_core::SystemShape::qubits(3);
    assert_eq!(rank_bound(&shape, 2, &[2, 2, 2]).unwrap(), 57);
    assert_eq!(rank_bound(&shape, 1, &[2, 2, 2]).unwrap(), 1);
    assert_eq!(
        rank_bound(&distill_core::SystemShape::qubits(2), 2, &[2, 2]).unwrap(),
        13
    );
}

#[test]
fn ghz_protocol_matches_brute_force_weight() {
    for k in 1..=9 {
        let p = k as f64 / 10.0;
        let r = ghz_from_two_copies(p).unwrap();
        let oracle = two_copy_weight_oracle(&states::three_qubit_example(p).unwrap());
        assert!((r.success_probability - p * p / 2.0).abs() <= 1e-9);
        assert!((r.success_probability - oracle).abs() <= 1e-12);
        assert!((r.success_probability + r.dropped_weight - 1.0).abs() <= 1e-12);
        assert_eq!(r.branches.len(), 8);
        assert!(r.min_fidelity() >= 1.0 - 1e-9);
        for b in &r.branches {
            assert!((b.probability - p * p / 16.0).abs() <= 1e-12);
            let odd = b.outcomes.iter().sum::<usize>() % 2 == 1;
            let expected = if odd { 0.0 } else { 1.0 };
            assert!((b.fidelity_uncorrected - expected).abs() <= 1e-9);
        }
    }
}

/// Concurrence of the Bell-diagonal state produced by either Werner
/// subspace: weights F²+q², 2Fq, 2q², 2q² over (F+q)²+4q², q = (1−F)/3.
fn werner_after_oracle(f: f64) -> f64 {
    let q = (1.0 - f) / 3.0;
    let n = (f + q).powi(2) + 4.0 * q * q;
    let top = [f * f + q * q, 2.0 * f * q, 2.0 * q * q]
        .into_iter()
        .fold(0.0, f64::max)
        / n;
    (2.0 * top - 1.0).max(0.0)
}

#[test]
fn werner_two_copy_projection() {
    for f in [0.6, 0.8, 0.9, 0.95] {
        let r = werner_two_copy(f, &tol()).unwrap();
        assert!((r.concurrence_before - (2.0 * f - 1.0).max(0.0)).abs() <= 1e-9);
        let single = states::werner(f).unwrap();
        assert!((concurrence(&single, &tol()).unwrap() - (2.0 * f - 1.0)).abs() <= 1e-9);
        assert_eq!(r.subspaces.len(), 2);
        let q = (1.0 - f) / 3.0;
        for s in &r.subspaces {
            assert!(s.bell_diagonal);
            assert!(s.max_off_diagonal <= 1e-9);
            assert!((s.weight - ((f + q).powi(2) + 4.0 * q * q) / 2.0).abs() <= 1e-12);
            assert!((s.concurrence_after - werner_after_oracle(f)).abs() <= 1e-9);
        }
    }
    let r = werner_two_copy(0.9, &tol()).unwrap();
    assert!((r.subspaces[0].concurrence_after - 67.2 / 78.8).abs() <= 1e-9);
}

#[test]
fn filter_example_improves_entanglement() {
    for lambda in [0.90, 0.925, 0.95, 0.975, 0.99] {
        let c = filter_comparison(lambda, &tol()).unwrap();
        assert!(c.after.eof - c.before.eof > 1e-6, "λ = {lambda}");
        let lp = 3.0 * lambda / (lambda + 2.0);
        assert!((c.lambda_prime - lp).abs() <= 1e-15);
        let phi = Bell::PhiPlus.state().density();
        let expected = &phi.matrix().scale_real(lp)
            + &ComplexMatrix::projector(&distill_core::tensor::basis_vector(4, 1))
                .scale_real(1.0 - lp);
        assert!(c.filtered_state.matrix().max_abs_diff(&expected) <= 1e-9);
        assert!((c.before.concurrence - 3f64.sqrt() / 2.0 * lambda).abs() <= 1e-9);
        assert!((c.after.concurrence - lp).abs() <= 1e-9);
    }
}
