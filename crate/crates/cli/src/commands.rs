//! Subcommand handlers. Each returns the results section of a report plus
//! the exit code it implies.

use std::path::Path;

use anyhow::{bail, Context, Result};
use distill_core::dss::{
    self, check_certificate, describe_indices, embed, find_dss, rank_bound, DssConstraints,
    LocalBases, SearchOptions, DEFAULT_MAX_CANDIDATES,
};
use distill_core::entanglement::{
    dimension_signature, entanglement_of_formation, example_filter, filter_curve, is_two_qubit,
    schmidt,
};
use distill_core::io::{self, MatrixDoc, OperatorDoc};
use distill_core::localops::{decompose_matrix, LocalFactor};
use distill_core::protocols::{ghz_from_two_copies, run, werner_two_copy};
use distill_core::tensor::{numerical_rank, unravel, ComplexMatrix};
use distill_core::{DensityMatrix, PureState, SystemShape, Tolerance};

use crate::report::*;

/// Exit code for a negative scientific result (no DSS, refused certificate).
pub const EXIT_NEGATIVE: u8 = 2;

pub struct Outcome {
    pub results: Results,
    pub exit: u8,
    pub warnings: Vec<String>,
}

impl Outcome {
    fn ok(results: Results) -> Self {
        Self {
            results,
            exit: 0,
            warnings: Vec::new(),
        }
    }
}

/// Amplitudes above 1e-12 in magnitude, with the global phase fixed so the
/// first one is real and positive.
pub fn terms(psi: &PureState) -> Vec<Term> {
    let amps = psi.amplitudes();
    let phase = amps
        .iter()
        .find(|z| z.norm() > 1e-12)
        .map(|z| z.conj() / z.norm())
        .unwrap_or(distill_core::C64::new(1.0, 0.0));
    let shape = psi.shape();
    amps.iter()
        .enumerate()
        .filter(|(_, z)| z.norm() > 1e-12)
        .map(|(i, z)| {
            let z = z * phase;
            Term {
                ket: ket_label(shape, i),
                re: z.re,
                im: z.im,
            }
        })
        .collect()
}

/// Per-party digit strings joined by commas, e.g. `01,01,01`.
fn ket_label(shape: &SystemShape, index: usize) -> String {
    let digits = unravel(index, &shape.subsystem_dims());
    let mut parts = Vec::with_capacity(shape.len());
    let mut pos = 0;
    for party in shape.parties() {
        let n = party.subsystems().len();
        let wide = party.subsystems().iter().any(|&d| d > 10);
        let s: Vec<String> = digits[pos..pos + n].iter().map(|d| d.to_string()).collect();
        parts.push(if wide { s.join(".") } else { s.concat() });
        pos += n;
    }
    parts.join(",")
}

pub struct FindArgs<'a> {
    pub copies: usize,
    pub bases: Option<&'a Path>,
    pub min_signature: Option<Vec<usize>>,
    pub allow_product: bool,
    pub all: bool,
    pub unpruned: bool,
    pub threads: Option<usize>,
    pub max_candidates: Option<u128>,
}

pub fn dss_find(
    single: &DensityMatrix,
    rho: &DensityMatrix,
    a: &FindArgs,
    tol: &Tolerance,
) -> Result<Outcome> {
    let bases = match a.bases {
        Some(path) => io::load_vectors(path)?.to_bases(rho.shape())?,
        None => LocalBases::computational(rho.shape()),
    };
    let constraints = DssConstraints {
        min_signature: a.min_signature.clone(),
        require_entangled: !a.allow_product,
    };
    let cap = a.max_candidates.unwrap_or(DEFAULT_MAX_CANDIDATES);
    let options = SearchOptions {
        max_candidates: cap,
        prune: !a.unpruned,
        threads: a.threads,
    };
    let mut warnings = Vec::new();
    let count = dss::candidate_count(&rho.shape().dims(), u128::MAX)?;
    if count <= cap && count * 2 > cap {
        warnings.push(format!(
            "candidate count {count} is within a factor of two of the cap {cap}"
        ));
    }
    let search = find_dss(rho, &bases, &constraints, &options, tol)?;
    let chosen: Vec<&dss::DssCertificate> = if a.all {
        search.certificates.iter().collect()
    } else {
        search.minimal()
    };
    let rank = (!chosen.is_empty()).then(|| numerical_rank(rho.matrix(), tol));
    let mut certificates = Vec::with_capacity(chosen.len());
    for cert in chosen {
        let indices = cert
            .basis_indices()
            .expect("search certificates carry indices")
            .to_vec();
        let signature = cert.outcome().signature.clone().expect("pure").0;
        let psi = embed(cert.subspace(), cert.pure_state(), rho.shape())?;
        let rank_check = match rank {
            Some(rank) => {
                let bound = report_bound(rank_bound(single.shape(), a.copies, &signature)?)?;
                Some(RankCheck {
                    rank,
                    bound,
                    satisfied: rank as u64 <= bound,
                })
            }
            None => None,
        };
        certificates.push(Certificate {
            subspace: if a.bases.is_some() {
                indices
                    .iter()
                    .zip(rho.shape().labels())
                    .map(|(idx, l)| {
                        let idx: Vec<String> = idx.iter().map(usize::to_string).collect();
                        format!("{l}:basis{{{}}}", idx.join(","))
                    })
                    .collect()
            } else {
                describe_indices(rho.shape(), &indices)
            },
            basis_indices: indices,
            weight: cert.weight(),
            signature,
            state: terms(&psi),
            rank_check,
        });
    }
    let exit = if certificates.is_empty() {
        EXIT_NEGATIVE
    } else {
        0
    };
    let s = search.stats;
    Ok(Outcome {
        results: Results::DssFind(DssFindResult {
            shape: rho.shape().to_string(),
            copies: a.copies,
            counts: SearchCounts {
                candidates: s.candidates,
                zero_weight: s.zero_weight,
                pruned_support: s.pruned_support,
                pruned_purity: s.pruned_purity,
                classified: s.classified,
            },
            total_certificates: search.certificates.len(),
            minimal_only: !a.all,
            certificates,
        }),
        exit,
        warnings,
    })
}

pub fn dss_check(rho: &DensityMatrix, subspace: &Path, tol: &Tolerance) -> Result<Outcome> {
    let doc = io::load_vectors(subspace)?;
    let s = doc.to_subspace(rho.shape())?;
    let outcome = dss::project(rho, &s, tol)?;
    let verdict = check_certificate(rho, &s, tol);
    let state = match &outcome.pure_state {
        Some(psi) => terms(&embed(&s, psi, rho.shape())?),
        None => Vec::new(),
    };
    let (accepted, reason) = match &verdict {
        Ok(_) => (true, None),
        Err(refusal) => (false, Some(refusal.to_string())),
    };
    Ok(Outcome {
        results: Results::DssCheck(DssCheckResult {
            shape: rho.shape().to_string(),
            accepted,
            classification: outcome.classification.as_str().to_string(),
            weight: outcome.weight,
            top_ratio: outcome.top_ratio,
            signature: outcome.signature.map(|s| s.0),
            reason,
            state,
        }),
        exit: if accepted { 0 } else { EXIT_NEGATIVE },
        warnings: Vec::new(),
    })
}

pub fn decompose(operator: &str, tol: &Tolerance) -> Result<Outcome> {
    let factors: Vec<(String, ComplexMatrix)> = if operator == "example-filter" {
        vec![("A".to_string(), example_filter())]
    } else {
        let doc: OperatorDoc = io::load_operator(Path::new(operator))?;
        let shape = doc.shape()?;
        doc.factors
            .iter()
            .map(|f| {
                let side = shape
                    .as_ref()
                    .and_then(|s| s.party_index(&f.party).map(|k| s.party(k).dim()));
                let m = f
                    .matrix
                    .to_matrix(side)
                    .with_context(|| format!("factor for party {}", f.party))?;
                Ok((f.party.clone(), m))
            })
            .collect::<Result<_>>()?
    };
    if factors.is_empty() {
        bail!("operator has no factors");
    }
    let mut out = Vec::with_capacity(factors.len());
    for (party, m) in factors {
        let factor = LocalFactor::new(party.clone(), m)?;
        let d = decompose_matrix(factor.matrix(), tol)?;
        let n = factor.dim();
        let lpo_sq = &d.lpo * &d.lpo;
        let luo_gram = &d.luo.adjoint() * &d.luo;
        out.push(FactorResult {
            party,
            rank: d.retained_dim,
            full_rank: d.retained_dim == n,
            weights: d.weights.clone(),
            reconstruction_error: d.reconstruct().max_abs_diff(factor.matrix()),
            lpo_idempotence_error: lpo_sq.max_abs_diff(&d.lpo),
            luo_unitarity_error: luo_gram.max_abs_diff(&ComplexMatrix::identity(n)),
            lpo: MatrixDoc::dense(&d.lpo),
            lfo: MatrixDoc::dense(&d.lfo),
            luo: MatrixDoc::dense(&d.luo),
        });
    }
    Ok(Outcome::ok(Results::Decompose(DecomposeResult {
        factors: out,
    })))
}

pub fn entanglement(rho: &DensityMatrix, tol: &Tolerance) -> Result<Outcome> {
    let purity = rho.purity();
    let rank = rho.rank(tol);
    let (concurrence, eof) = if is_two_qubit(rho.shape()) {
        let r = entanglement_of_formation(rho, tol)?;
        (Some(r.concurrence), Some(r.eof))
    } else {
        (None, None)
    };
    let (signature, schmidt_coeffs) = if rank == 1 {
        let (_, psi) = rho.dominant_state(tol)?;
        let sig = dimension_signature(&psi, tol).0;
        let sch = if rho.shape().len() == 2 {
            Some(schmidt(&psi)?)
        } else {
            None
        };
        (Some(sig), sch)
    } else {
        (None, None)
    };
    Ok(Outcome::ok(Results::Entanglement(EntanglementResult {
        shape: rho.shape().to_string(),
        purity,
        rank,
        concurrence,
        eof,
        signature,
        schmidt: schmidt_coeffs,
    })))
}

pub fn filter_compare(lambdas: &[f64], tol: &Tolerance) -> Result<Outcome> {
    let rows = filter_curve(lambdas, tol)?
        .into_iter()
        .map(|c| FilterRow {
            lambda: c.lambda,
            lambda_prime: c.lambda_prime,
            success_probability: c.success_probability,
            concurrence_before: c.before.concurrence,
            concurrence_after: c.after.concurrence,
            eof_before: c.before.eof,
            eof_after: c.after.eof,
            improved: c.improved(),
        })
        .collect();
    Ok(Outcome::ok(Results::FilterCompare(FilterCompareResult {
        rows,
    })))
}

pub fn simulate_ghz(p: f64) -> Result<Outcome> {
    let r = ghz_from_two_copies(p)?;
    Ok(Outcome::ok(Results::SimulateGhz(GhzResult {
        p,
        success_probability: r.success_probability,
        dropped_weight: r.dropped_weight,
        branches: r
            .branches
            .iter()
            .map(|b| GhzBranchResult {
                outcomes: b.outcomes.to_vec(),
                probability: b.probability,
                fidelity: b.fidelity,
                fidelity_uncorrected: b.fidelity_uncorrected,
            })
            .collect(),
    })))
}

pub fn simulate_werner(fidelities: &[f64], tol: &Tolerance) -> Result<Outcome> {
    let shape = SystemShape::qubits(2).power(2)?;
    let rows = fidelities
        .iter()
        .map(|&fidelity| {
            let r = werner_two_copy(fidelity, tol)?;
            let subspaces = r
                .subspaces
                .iter()
                .map(|s| WernerSubspaceResult {
                    subspace: describe_indices(&shape, &s.indices),
                    weight: s.weight,
                    bell_weights: s.bell_weights.to_vec(),
                    max_off_diagonal: s.max_off_diagonal,
                    bell_diagonal: s.bell_diagonal,
                    concurrence_after: s.concurrence_after,
                    improved: s.concurrence_after > r.concurrence_before + dss::IMPROVEMENT_EPS,
                })
                .collect();
            Ok(WernerRow {
                fidelity,
                concurrence_before: r.concurrence_before,
                subspaces,
                combined_weight: r.combined_weight,
                combined_after: r.combined_after,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Outcome::ok(Results::SimulateWerner(WernerResult { rows })))
}

pub fn simulate_protocol(rho: &DensityMatrix, protocol: &Path) -> Result<Outcome> {
    let steps = io::load_protocol(protocol, rho.shape())?;
    let report = run(&steps, rho)?;
    let branches = report
        .branches
        .iter()
        .map(|b| BranchResult {
            outcomes: b
                .outcomes
                .iter()
                .map(|o| format!("{}[{}]@{}={}", o.party, o.subsystem, o.step, o.value))
                .collect(),
            probability: b.probability,
            shape: b.state.shape().to_string(),
            purity: b.state.purity(),
            state: MatrixDoc::dense(b.state.matrix()),
        })
        .collect();
    Ok(Outcome::ok(Results::SimulateProtocol(ProtocolResult {
        steps: steps.len(),
        success_probability: report.success_probability(),
        dropped_weight: report.dropped_weight,
        branches,
    })))
}

pub fn rankbound(
    single: &DensityMatrix,
    copies: usize,
    signature: &[usize],
    tol: &Tolerance,
) -> Result<Outcome> {
    let bound = rank_bound(single.shape(), copies, signature)?;
    let power = single.tensor_power(copies)?;
    let rank = numerical_rank(power.matrix(), tol);
    let bound = report_bound(bound)?;
    Ok(Outcome::ok(Results::RankBound(RankBoundResult {
        shape: single.shape().to_string(),
        copies,
        signature: signature.to_vec(),
        rank,
        bound,
        satisfied: rank as u64 <= bound,
    })))
}

/// Reports carry the bound as u64. Once ρ^⊗n has been built the bound is at
/// most its side, so this only fails on a broken invariant.
fn report_bound(bound: u128) -> Result<u64> {
    u64::try_from(bound).with_context(|| format!("rank bound {bound} does not fit in u64"))
}
