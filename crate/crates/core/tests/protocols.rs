use distill_core::dss::{project, LocalBases, LocalSubspace};
use distill_core::localops::{LocalFactor, ProductOperator};
use distill_core::protocols::{discard_subsystem, run, Predicate, ProtocolStep};
use distill_core::random;
use distill_core::{DensityMatrix, Error, SystemShape, Tolerance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn shapes() -> Vec<SystemShape> {
    let two = SystemShape::qubits(2);
    let three = SystemShape::qubits(3);
    vec![two.power(2).unwrap(), three.power(2).unwrap(), two, three]
}

fn random_subset<R: Rng>(rng: &mut R, d: usize) -> Vec<usize> {
    loop {
        let set: Vec<usize> = (0..d).filter(|_| rng.random_bool(0.6)).collect();
        if !set.is_empty() {
            return set;
        }
    }
}

fn random_step<R: Rng>(rng: &mut R, shape: &SystemShape, measured: &[usize]) -> ProtocolStep {
    let subsystems: usize = shape.parties().iter().map(|p| p.subsystems().len()).sum();
    loop {
        match rng.random_range(0..5) {
            0 => {
                let sets: Vec<Vec<usize>> = shape
                    .dims()
                    .iter()
                    .map(|&d| random_subset(rng, d))
                    .collect();
                return ProtocolStep::Project(LocalSubspace::computational(shape, &sets).unwrap());
            }
            1 => {
                let k = rng.random_range(0..shape.len());
                let p = shape.party(k);
                return ProtocolStep::LocalUnitary(vec![(
                    p.label.clone(),
                    random::unitary(rng, p.dim()),
                )]);
            }
            2 if subsystems > 1 => {
                let k = rng.random_range(0..shape.len());
                let p = shape.party(k);
                let sub = rng.random_range(0..p.subsystems().len());
                let d = p.subsystems()[sub];
                let basis = rng.random_bool(0.5).then(|| random::unitary(rng, d));
                return ProtocolStep::MeasureAndDiscard {
                    party: p.label.clone(),
                    subsystem: sub,
                    basis,
                };
            }
            3 => {
                let factors = shape
                    .parties()
                    .iter()
                    .map(|p| {
                        let rank = rng.random_range(1..=p.dim());
                        LocalFactor::new(
                            p.label.clone(),
                            random::contraction_of_rank(rng, p.dim(), rank),
                        )
                        .unwrap()
                    })
                    .collect();
                return ProtocolStep::Filter(ProductOperator::new(shape.clone(), factors).unwrap());
            }
            4 if !measured.is_empty() => {
                let predicate = if rng.random_bool(0.5) {
                    Predicate::Parity {
                        steps: measured.to_vec(),
                        odd: rng.random_bool(0.5),
                    }
                } else {
                    Predicate::Equals {
                        step: measured[rng.random_range(0..measured.len())],
                        value: rng.random_range(0..2),
                    }
                };
                let k = rng.random_range(0..shape.len());
                let p = shape.party(k);
                let inner = ProtocolStep::LocalUnitary(vec![(
                    p.label.clone(),
                    random::unitary(rng, p.dim()),
                )]);
                return ProtocolStep::Conditional {
                    predicate,
                    step: Box::new(inner),
                };
            }
            _ => continue,
        }
    }
}

fn random_protocol<R: Rng>(rng: &mut R, shape: &SystemShape, len: usize) -> Vec<ProtocolStep> {
    let mut shape = shape.clone();
    let mut measured = Vec::new();
    let mut steps = Vec::new();
    for index in 0..len {
        let step = random_step(rng, &shape, &measured);
        if let ProtocolStep::MeasureAndDiscard {
            party, subsystem, ..
        } = &step
        {
            let k = shape.party_index(party).unwrap();
            shape = discard_subsystem(&shape, k, *subsystem).unwrap();
            measured.push(index);
        }
        steps.push(step);
    }
    steps
}

#[test]
fn branch_probabilities_are_conserved() {
    let mut rng = ChaCha8Rng::seed_from_u64(201);
    let tol = Tolerance::default();
    let shapes = shapes();
    let mut runs = 0;
    for trial in 0..200 {
        let shape = &shapes[trial % shapes.len()];
        let dim = shape.total_dim();
        let rank = rng.random_range(1..=dim);
        let rho = DensityMatrix::new(
            shape.clone(),
            random::density_matrix(&mut rng, dim, rank),
            &tol,
        )
        .unwrap();
        let len = rng.random_range(1..=4);
        let protocol = random_protocol(&mut rng, shape, len);
        let report = match run(&protocol, &rho) {
            Ok(r) => r,
            Err(Error::AllBranchesZero) => continue,
            Err(e) => panic!("trial {trial}: {e}"),
        };
        runs += 1;
        let total = report.success_probability() + report.dropped_weight;
        assert!((total - 1.0).abs() <= 1e-9, "trial {trial}: total {total}");
        assert!(report.dropped_weight >= -1e-15);
        for b in &report.branches {
            assert!(b.probability > 0.0);
            assert_eq!(b.shapes.len(), len + 1);
            let checked =
                DensityMatrix::new(b.state.shape().clone(), b.state.matrix().clone(), &tol);
            assert!(checked.is_ok(), "trial {trial}: branch state invalid");
        }
    }
    assert!(runs >= 190);
}

#[test]
fn single_projection_matches_project() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let tol = Tolerance::default();
    for (trial, shape) in shapes().iter().cycle().take(80).enumerate() {
        let dim = shape.total_dim();
        let rho = DensityMatrix::new(
            shape.clone(),
            random::density_matrix(&mut rng, dim, 1 + trial % dim),
            &tol,
        )
        .unwrap();
        let bases = if trial % 2 == 0 {
            LocalBases::computational(shape)
        } else {
            let us = shape
                .dims()
                .iter()
                .map(|&d| random::unitary(&mut rng, d))
                .collect();
            LocalBases::new(shape, us).unwrap()
        };
        let sets: Vec<Vec<usize>> = shape
            .dims()
            .iter()
            .map(|&d| random_subset(&mut rng, d))
            .collect();
        let s = LocalSubspace::from_bases(&bases, &sets).unwrap();
        let outcome = project(&rho, &s, &tol).unwrap();
        let report = run(&[ProtocolStep::Project(s.clone())], &rho).unwrap();
        assert_eq!(report.branches.len(), 1);
        let branch = &report.branches[0];
        assert!((branch.probability - outcome.weight).abs() <= 1e-12);
        assert!((report.dropped_weight - (1.0 - outcome.weight)).abs() <= 1e-12);
        let q = s.isometry().unwrap();
        let compressed = &(&q.adjoint() * branch.state.matrix()) * &q;
        let projected = outcome.state.expect("nonzero weight");
        assert!(
            compressed.max_abs_diff(projected.matrix()) <= 1e-12,
            "trial {trial}"
        );
    }
}
