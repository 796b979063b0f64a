//! Seeded property suites.
//!
//! Each suite draws its instances from a `ChaCha8Rng` seeded by the caller and
//! returns counts rather than panicking, so the same runs back both the test
//! suite and the CLI acceptance harness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dss::{
    check_certificate, check_rank_bound, find_dss, DssConstraints, DssSearch, LocalBases,
    SearchOptions,
};
use crate::entanglement::verify_lemma2;
use crate::error::Result;
use crate::localops::{decompose_matrix, verify_lemma1, LocalFactor, ProductOperator};
use crate::random;
use crate::states::{DensityMatrix, PureState, SystemShape};
use crate::tensor::{basis_vector, norm, ravel, unravel, Tolerance};
use crate::C64;

/// Default seed of every suite.
pub const DEFAULT_SEED: u64 = 0x5eed_d155;

/// Smallest singular value of the random invertible local factors.
const MIN_SINGULAR: f64 = 0.2;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SuiteReport {
    pub trials: usize,
    pub failures: usize,
    /// Human-readable description of the first failure.
    pub first_failure: Option<String>,
}

impl SuiteReport {
    fn fail(&mut self, message: impl FnOnce() -> String) {
        self.failures += 1;
        if self.first_failure.is_none() {
            self.first_failure = Some(message());
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Shapes cycled through by the rank and signature suites.
pub fn preservation_shapes() -> Vec<SystemShape> {
    [&[2, 2][..], &[3, 3], &[2, 2, 2]]
        .iter()
        .map(|d| SystemShape::from_dims(d).expect("valid dims"))
        .collect()
}

/// Product of Haar-rotated invertible contractions, one per party.
pub fn invertible_product_operator<R: Rng + ?Sized>(
    rng: &mut R,
    shape: &SystemShape,
    min_singular: f64,
) -> Result<ProductOperator> {
    let factors = shape
        .parties()
        .iter()
        .map(|p| {
            LocalFactor::new(
                p.label.clone(),
                random::invertible_contraction(rng, p.dim(), min_singular),
            )
        })
        .collect::<Result<_>>()?;
    ProductOperator::new(shape.clone(), factors)
}

/// Invertible product operators preserve the numerical rank of mixed states.
pub fn rank_preservation_suite(seed: u64, trials: usize, tol: &Tolerance) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shapes = preservation_shapes();
    let mut report = SuiteReport {
        trials,
        ..Default::default()
    };
    for t in 0..trials {
        let shape = &shapes[t % shapes.len()];
        let dim = shape.total_dim();
        let rank = rng.random_range(1..=dim);
        let rho = DensityMatrix::new(
            shape.clone(),
            random::density_matrix(&mut rng, dim, rank),
            tol,
        )?;
        let op = invertible_product_operator(&mut rng, shape, MIN_SINGULAR)?;
        let r = verify_lemma1(&rho, &op, tol)?;
        if !r.full_rank || r.rank_before != rank || r.rank_after != r.rank_before {
            report.fail(|| {
                format!(
                    "trial {t} on {:?}: planted rank {rank}, before {}, after {}, full rank {}",
                    shape.dims(),
                    r.rank_before,
                    r.rank_after,
                    r.full_rank
                )
            });
        }
    }
    Ok(report)
}

/// Pure state with a random, often degenerate, dimension signature: a Haar
/// vector pushed through local contractions of random rank.
fn random_pure<R: Rng + ?Sized>(rng: &mut R, shape: &SystemShape) -> Result<PureState> {
    loop {
        let mut amps = random::unit_vector(rng, shape.total_dim());
        if rng.random_bool(0.5) {
            let factors = shape
                .parties()
                .iter()
                .map(|p| {
                    let rank = rng.random_range(1..=p.dim());
                    LocalFactor::new(
                        p.label.clone(),
                        random::contraction_of_rank(rng, p.dim(), rank),
                    )
                })
                .collect::<Result<_>>()?;
            let m = ProductOperator::new(shape.clone(), factors)?.full_matrix()?;
            amps = m.mul_vec(&amps);
        }
        if norm(&amps) > 1e-6 {
            return PureState::normalized(shape.clone(), amps);
        }
    }
}

/// Invertible product operators preserve the dimension signature of pure
/// states.
pub fn signature_preservation_suite(
    seed: u64,
    trials: usize,
    tol: &Tolerance,
) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shapes = preservation_shapes();
    let mut report = SuiteReport {
        trials,
        ..Default::default()
    };
    for t in 0..trials {
        let shape = &shapes[t % shapes.len()];
        let psi = random_pure(&mut rng, shape)?;
        let op = invertible_product_operator(&mut rng, shape, MIN_SINGULAR)?;
        let r = verify_lemma2(&psi, &op, tol)?;
        if !r.full_rank || r.signature_before != r.signature_after {
            report.fail(|| {
                format!(
                    "trial {t} on {:?}: signature {:?} became {:?}",
                    shape.dims(),
                    r.signature_before.0,
                    r.signature_after.0
                )
            });
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DecompositionReport {
    pub suite: SuiteReport,
    pub rank_deficient: usize,
    pub max_reconstruction: f64,
    pub max_idempotence: f64,
    pub max_unitarity: f64,
}

/// Round trip of the projector, filter, unitary factorization on random
/// contractions; every third factor is rank deficient.
pub fn decomposition_suite(
    seed: u64,
    trials: usize,
    atol: f64,
    tol: &Tolerance,
) -> Result<DecompositionReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = DecompositionReport {
        suite: SuiteReport {
            trials,
            ..Default::default()
        },
        ..Default::default()
    };
    for t in 0..trials {
        let dim = rng.random_range(2..=4);
        let (f, rank) = if t % 3 == 0 {
            let rank = rng.random_range(1..dim);
            out.rank_deficient += 1;
            (random::contraction_of_rank(&mut rng, dim, rank), rank)
        } else {
            (random::invertible_contraction(&mut rng, dim, 0.05), dim)
        };
        let d = decompose_matrix(&f, tol)?;
        let recon = d.reconstruct().max_abs_diff(&f);
        let idem = (&d.lpo * &d.lpo)
            .max_abs_diff(&d.lpo)
            .max(d.lpo.hermitian_deviation());
        let unit = d.luo.unitary_deviation();
        out.max_reconstruction = out.max_reconstruction.max(recon);
        out.max_idempotence = out.max_idempotence.max(idem);
        out.max_unitarity = out.max_unitarity.max(unit);
        if recon > atol || idem > atol || unit > atol || d.retained_dim != rank {
            out.suite.fail(|| {
                format!(
                    "trial {t} (side {dim}, rank {rank}, retained {}): reconstruction {recon:e}, idempotence {idem:e}, unitarity {unit:e}",
                    d.retained_dim
                )
            });
        }
    }
    Ok(out)
}

/// A state with a known distillable subspace.
#[derive(Debug, Clone)]
pub struct PlantedInstance {
    pub state: DensityMatrix,
    /// Per-party computational indices of the planted subspace.
    pub indices: Vec<Vec<usize>>,
}

fn planted_shapes() -> Vec<SystemShape> {
    [&[2, 3][..], &[3, 3], &[2, 2, 2], &[3, 2, 2], &[2, 2, 3]]
        .iter()
        .map(|d| SystemShape::from_dims(d).expect("valid dims"))
        .collect()
}

/// `q[ψ] + (1−q)[e]` with `ψ` a random state on a product of computational
/// index sets and `e` a computational product vector outside that product.
/// Shapes need a party of dimension three or more, or three parties.
pub fn planted_instance<R: Rng + ?Sized>(
    rng: &mut R,
    shape: &SystemShape,
) -> Result<PlantedInstance> {
    let dims = shape.dims();
    // Two parties of size two or more keep the planted state entangled; one
    // proper subset leaves room for the outside product vector.
    let indices: Vec<Vec<usize>> = loop {
        let sets: Vec<Vec<usize>> = dims
            .iter()
            .map(|&d| loop {
                let set: Vec<usize> = (0..d).filter(|_| rng.random_bool(0.7)).collect();
                if !set.is_empty() {
                    break set;
                }
            })
            .collect();
        let wide = sets.iter().filter(|s| s.len() >= 2).count();
        if wide >= 2 && sets.iter().zip(&dims).any(|(s, &d)| s.len() < d) {
            break sets;
        }
    };
    let sizes: Vec<usize> = indices.iter().map(Vec::len).collect();
    let inner = random::unit_vector(rng, sizes.iter().product());
    let mut psi = vec![C64::new(0.0, 0.0); shape.total_dim()];
    for (k, amp) in inner.iter().enumerate() {
        let local = unravel(k, &sizes);
        let digits: Vec<usize> = local.iter().zip(&indices).map(|(&i, set)| set[i]).collect();
        psi[ravel(&digits, &dims)] = *amp;
    }
    let outside: Vec<usize> = (0..shape.total_dim())
        .filter(|&i| {
            let digits = unravel(i, &dims);
            digits.iter().zip(&indices).any(|(d, set)| !set.contains(d))
        })
        .collect();
    let e = outside[rng.random_range(0..outside.len())];
    let q = rng.random_range(0.2..0.8);
    let psi = PureState::new(shape.clone(), psi)?;
    let e = PureState::new(shape.clone(), basis_vector(shape.total_dim(), e))?;
    let state = DensityMatrix::mixture(&[(q, &psi), (1.0 - q, &e)])?;
    Ok(PlantedInstance { state, indices })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlantedReport {
    pub suite: SuiteReport,
    /// Instances whose planted subspace was among the certificates.
    pub recovered: usize,
    /// Instances where pruned and unpruned searches returned the same list.
    pub agreed: usize,
    /// Certificates checked for soundness and the rank bound.
    pub certificates: usize,
}

fn same_certificates(a: &DssSearch, b: &DssSearch) -> bool {
    a.certificates.len() == b.certificates.len()
        && a.certificates.iter().zip(&b.certificates).all(|(x, y)| {
            x.basis_indices() == y.basis_indices() && (x.weight() - y.weight()).abs() <= 1e-15
        })
}

/// Planted-subspace completeness, pruned versus unpruned agreement,
/// certificate soundness and the rank bound on seeded instances.
pub fn planted_suite(seed: u64, instances: usize, tol: &Tolerance) -> Result<PlantedReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shapes = planted_shapes();
    let mut out = PlantedReport {
        suite: SuiteReport {
            trials: instances,
            ..Default::default()
        },
        ..Default::default()
    };
    let constraints = DssConstraints::default();
    let pruned = SearchOptions::default();
    let unpruned = SearchOptions {
        prune: false,
        ..SearchOptions::default()
    };
    for t in 0..instances {
        let shape = &shapes[t % shapes.len()];
        let inst = planted_instance(&mut rng, shape)?;
        let bases = LocalBases::computational(shape);
        let a = find_dss(&inst.state, &bases, &constraints, &pruned, tol)?;
        let b = find_dss(&inst.state, &bases, &constraints, &unpruned, tol)?;
        let recovered = a
            .certificates
            .iter()
            .any(|c| c.basis_indices() == Some(inst.indices.as_slice()));
        let agreed = same_certificates(&a, &b);
        out.recovered += usize::from(recovered);
        out.agreed += usize::from(agreed);
        let mut unsound = None;
        for c in &a.certificates {
            out.certificates += 1;
            let checked = check_certificate(&inst.state, c.subspace(), tol);
            let bound = check_rank_bound(&inst.state, 1, c, tol)?;
            if checked.is_err() || !bound.satisfied {
                unsound = Some(format!("{:?}", c.basis_indices()));
                break;
            }
        }
        if !recovered || !agreed || unsound.is_some() {
            out.suite.fail(|| {
                format!(
                    "instance {t} on {:?} planted {:?}: recovered {recovered}, agreed {agreed}, unsound {unsound:?}",
                    shape.dims(),
                    inst.indices
                )
            });
        }
    }
    Ok(out)
}
