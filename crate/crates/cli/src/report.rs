//! Report model and rendering.
//!
//! Text output is stable and diff-friendly: fixed field order, numbers at 12
//! significant digits, magnitudes below 1e-12 printed as `0`, and no timing.
//! JSON output keeps full precision and parses back to an equal [`Report`].

use std::fmt::Write as _;

use distill_core::io::MatrixDoc;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub inputs_digest: String,
    pub results: Results,
    pub warnings: Vec<String>,
    pub timing_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Results {
    DssFind(DssFindResult),
    DssCheck(DssCheckResult),
    Decompose(DecomposeResult),
    Entanglement(EntanglementResult),
    FilterCompare(FilterCompareResult),
    SimulateGhz(GhzResult),
    SimulateWerner(WernerResult),
    SimulateProtocol(ProtocolResult),
    RankBound(RankBoundResult),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchCounts {
    pub candidates: u64,
    pub zero_weight: u64,
    pub pruned_support: u64,
    pub pruned_purity: u64,
    pub classified: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankCheck {
    pub rank: usize,
    pub bound: u64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub subspace: Vec<String>,
    pub basis_indices: Vec<Vec<usize>>,
    pub weight: f64,
    pub signature: Vec<usize>,
    /// Nonzero amplitudes of the projected pure state in the full space.
    pub state: Vec<Term>,
    pub rank_check: Option<RankCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub ket: String,
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DssFindResult {
    pub shape: String,
    pub copies: usize,
    pub counts: SearchCounts,
    pub total_certificates: usize,
    pub minimal_only: bool,
    pub certificates: Vec<Certificate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DssCheckResult {
    pub shape: String,
    pub accepted: bool,
    pub classification: String,
    pub weight: f64,
    pub top_ratio: f64,
    pub signature: Option<Vec<usize>>,
    pub reason: Option<String>,
    pub state: Vec<Term>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorResult {
    pub party: String,
    pub rank: usize,
    pub full_rank: bool,
    pub weights: Vec<f64>,
    pub reconstruction_error: f64,
    pub lpo_idempotence_error: f64,
    pub luo_unitarity_error: f64,
    pub lpo: MatrixDoc,
    pub lfo: MatrixDoc,
    pub luo: MatrixDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecomposeResult {
    pub factors: Vec<FactorResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntanglementResult {
    pub shape: String,
    pub purity: f64,
    pub rank: usize,
    pub concurrence: Option<f64>,
    pub eof: Option<f64>,
    pub signature: Option<Vec<usize>>,
    pub schmidt: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterRow {
    pub lambda: f64,
    pub lambda_prime: f64,
    pub success_probability: f64,
    pub concurrence_before: f64,
    pub concurrence_after: f64,
    pub eof_before: f64,
    pub eof_after: f64,
    pub improved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterCompareResult {
    pub rows: Vec<FilterRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GhzBranchResult {
    pub outcomes: Vec<usize>,
    pub probability: f64,
    pub fidelity: f64,
    pub fidelity_uncorrected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GhzResult {
    pub p: f64,
    pub success_probability: f64,
    pub dropped_weight: f64,
    pub branches: Vec<GhzBranchResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WernerSubspaceResult {
    pub subspace: Vec<String>,
    pub weight: f64,
    pub bell_weights: Vec<f64>,
    pub max_off_diagonal: f64,
    pub bell_diagonal: bool,
    pub concurrence_after: f64,
    pub improved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WernerResult {
    pub rows: Vec<WernerRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WernerRow {
    pub fidelity: f64,
    pub concurrence_before: f64,
    pub subspaces: Vec<WernerSubspaceResult>,
    pub combined_weight: f64,
    pub combined_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchResult {
    pub outcomes: Vec<String>,
    pub probability: f64,
    pub shape: String,
    pub purity: f64,
    pub state: MatrixDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolResult {
    pub steps: usize,
    pub success_probability: f64,
    pub dropped_weight: f64,
    pub branches: Vec<BranchResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankBoundResult {
    pub shape: String,
    pub copies: usize,
    pub signature: Vec<usize>,
    pub rank: usize,
    pub bound: u64,
    pub satisfied: bool,
}

/// First 16 hex digits of the SHA-256 of the given parts.
pub fn digest(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(&h.finalize()[..8])
}

/// 12 significant digits; magnitudes below 1e-12 print as `0`.
pub fn num(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x.abs() < 1e-12 {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim(&format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim(mantissa))
    }
}

fn trim(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

fn nums(xs: &[f64]) -> String {
    xs.iter().map(|&x| num(x)).collect::<Vec<_>>().join(", ")
}

fn signature(s: &[usize]) -> String {
    s.iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("⊗")
}

fn terms(ts: &[Term]) -> String {
    if ts.is_empty() {
        return "0".into();
    }
    ts.iter()
        .map(|t| {
            let coeff = if t.im.abs() < 1e-12 {
                num(t.re)
            } else {
                format!(
                    "({}{}{}i)",
                    num(t.re),
                    if t.im < 0.0 { "-" } else { "+" },
                    num(t.im.abs())
                )
            };
            format!("{coeff}|{}⟩", t.ket)
        })
        .collect::<Vec<_>>()
        .join(" + ")
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

pub fn render(r: &Report, format: Format) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(r).expect("reports serialize");
            s.push('\n');
            s
        }
        Format::Text => render_text(r),
    }
}

fn render_text(r: &Report) -> String {
    let mut o = String::new();
    let _ = writeln!(o, "command: {}", r.command);
    let _ = writeln!(o, "inputs: sha256:{}", r.inputs_digest);
    match &r.results {
        Results::DssFind(d) => dss_find_text(&mut o, d),
        Results::DssCheck(d) => dss_check_text(&mut o, d),
        Results::Decompose(d) => decompose_text(&mut o, d),
        Results::Entanglement(d) => entanglement_text(&mut o, d),
        Results::FilterCompare(d) => filter_text(&mut o, d),
        Results::SimulateGhz(d) => ghz_text(&mut o, d),
        Results::SimulateWerner(d) => werner_text(&mut o, d),
        Results::SimulateProtocol(d) => protocol_text(&mut o, d),
        Results::RankBound(d) => rank_text(&mut o, d),
    }
    if r.warnings.is_empty() {
        o.push_str("warnings: none\n");
    } else {
        for w in &r.warnings {
            let _ = writeln!(o, "warning: {w}");
        }
    }
    o
}

fn dss_find_text(o: &mut String, d: &DssFindResult) {
    let _ = writeln!(o, "shape: {}", d.shape);
    let _ = writeln!(o, "copies: {}", d.copies);
    let c = &d.counts;
    let _ = writeln!(
        o,
        "candidates: {} (zero weight {}, pruned by support {}, pruned by purity bound {}, classified {})",
        c.candidates, c.zero_weight, c.pruned_support, c.pruned_purity, c.classified
    );
    if d.certificates.is_empty() {
        o.push_str("no DSS found over supplied bases\n");
        return;
    }
    if d.minimal_only {
        let _ = writeln!(
            o,
            "certificates: {} minimal of {} found",
            d.certificates.len(),
            d.total_certificates
        );
    } else {
        let _ = writeln!(o, "certificates: {}", d.certificates.len());
    }
    for (i, cert) in d.certificates.iter().enumerate() {
        let _ = writeln!(o, "certificate {}", i + 1);
        let _ = writeln!(o, "  subspace: {}", cert.subspace.join(" "));
        let _ = writeln!(o, "  weight: {}", num(cert.weight));
        let _ = writeln!(o, "  signature: {}", signature(&cert.signature));
        let _ = writeln!(o, "  state: {}", terms(&cert.state));
        if let Some(rc) = &cert.rank_check {
            let _ = writeln!(
                o,
                "  rank bound: rank {} {} {} ({})",
                rc.rank,
                if rc.satisfied { "≤" } else { ">" },
                rc.bound,
                if rc.satisfied {
                    "satisfied"
                } else {
                    "VIOLATED"
                }
            );
        }
    }
}

fn dss_check_text(o: &mut String, d: &DssCheckResult) {
    let _ = writeln!(o, "shape: {}", d.shape);
    let _ = writeln!(o, "accepted: {}", yes_no(d.accepted));
    let _ = writeln!(o, "classification: {}", d.classification);
    let _ = writeln!(o, "weight: {}", num(d.weight));
    let _ = writeln!(o, "top eigenvalue ratio: {}", num(d.top_ratio));
    if let Some(s) = &d.signature {
        let _ = writeln!(o, "signature: {}", signature(s));
    }
    if !d.state.is_empty() {
        let _ = writeln!(o, "state: {}", terms(&d.state));
    }
    if let Some(reason) = &d.reason {
        let _ = writeln!(o, "refused: {reason}");
    }
}

fn decompose_text(o: &mut String, d: &DecomposeResult) {
    for f in &d.factors {
        let _ = writeln!(o, "party {}", f.party);
        let _ = writeln!(
            o,
            "  rank: {} ({})",
            f.rank,
            if f.full_rank { "full" } else { "deficient" }
        );
        let _ = writeln!(o, "  filter weights: {}", nums(&f.weights));
        let _ = writeln!(
            o,
            "  max |luo·lfo·lpo − f|: {}",
            num(f.reconstruction_error)
        );
        let _ = writeln!(o, "  max |lpo² − lpo|: {}", num(f.lpo_idempotence_error));
        let _ = writeln!(o, "  max |luo†luo − I|: {}", num(f.luo_unitarity_error));
    }
}

fn entanglement_text(o: &mut String, d: &EntanglementResult) {
    let _ = writeln!(o, "shape: {}", d.shape);
    let _ = writeln!(o, "purity: {}", num(d.purity));
    let _ = writeln!(o, "rank: {}", d.rank);
    if let Some(c) = d.concurrence {
        let _ = writeln!(o, "concurrence: {}", num(c));
    }
    if let Some(e) = d.eof {
        let _ = writeln!(o, "entanglement of formation: {}", num(e));
    }
    if let Some(s) = &d.signature {
        let _ = writeln!(o, "signature: {}", signature(s));
    }
    if let Some(s) = &d.schmidt {
        let _ = writeln!(o, "schmidt coefficients: {}", nums(s));
    }
}

fn filter_text(o: &mut String, d: &FilterCompareResult) {
    o.push_str(
        "lambda\tlambda'\tprobability\tC before\tC after\tEoF before\tEoF after\timproved\n",
    );
    for r in &d.rows {
        let _ = writeln!(
            o,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            num(r.lambda),
            num(r.lambda_prime),
            num(r.success_probability),
            num(r.concurrence_before),
            num(r.concurrence_after),
            num(r.eof_before),
            num(r.eof_after),
            yes_no(r.improved)
        );
    }
}

fn ghz_text(o: &mut String, d: &GhzResult) {
    let _ = writeln!(o, "p: {}", num(d.p));
    let _ = writeln!(o, "success probability: {}", num(d.success_probability));
    let _ = writeln!(o, "dropped weight: {}", num(d.dropped_weight));
    o.push_str("outcomes\tprobability\tGHZ fidelity\tuncorrected\n");
    for b in &d.branches {
        let outcomes: String = b.outcomes.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(
            o,
            "{outcomes}\t{}\t{}\t{}",
            num(b.probability),
            num(b.fidelity),
            num(b.fidelity_uncorrected)
        );
    }
}

fn werner_text(o: &mut String, d: &WernerResult) {
    for row in &d.rows {
        werner_row_text(o, row);
    }
    o.push_str("concurrence comparison\n");
    let labels: Vec<String> = d
        .rows
        .first()
        .map(|r| {
            r.subspaces
                .iter()
                .map(|s| format!("C after {}", s.subspace.join(" ")))
                .collect()
        })
        .unwrap_or_default();
    let _ = writeln!(
        o,
        "F\tC before\t{}\tC after combined\timproved",
        labels.join("\t")
    );
    for row in &d.rows {
        let after: Vec<String> = row
            .subspaces
            .iter()
            .map(|s| num(s.concurrence_after))
            .collect();
        let improved = row.subspaces.iter().all(|s| s.improved);
        let _ = writeln!(
            o,
            "{}\t{}\t{}\t{}\t{}",
            num(row.fidelity),
            num(row.concurrence_before),
            after.join("\t"),
            num(row.combined_after),
            yes_no(improved)
        );
    }
}

fn werner_row_text(o: &mut String, d: &WernerRow) {
    let _ = writeln!(o, "F: {}", num(d.fidelity));
    let _ = writeln!(o, "concurrence before: {}", num(d.concurrence_before));
    for s in &d.subspaces {
        let _ = writeln!(o, "subspace {}", s.subspace.join(" "));
        let _ = writeln!(o, "  weight: {}", num(s.weight));
        let _ = writeln!(
            o,
            "  bell weights (Φ+, Φ-, Ψ+, Ψ-): {}",
            nums(&s.bell_weights)
        );
        let _ = writeln!(o, "  max bell off-diagonal: {}", num(s.max_off_diagonal));
        let _ = writeln!(o, "  bell diagonal: {}", yes_no(s.bell_diagonal));
        let _ = writeln!(o, "  concurrence after: {}", num(s.concurrence_after));
        let _ = writeln!(o, "  improved: {}", yes_no(s.improved));
    }
    let _ = writeln!(o, "combined weight: {}", num(d.combined_weight));
    let _ = writeln!(o, "combined concurrence after: {}", num(d.combined_after));
}

fn protocol_text(o: &mut String, d: &ProtocolResult) {
    let _ = writeln!(o, "steps: {}", d.steps);
    let _ = writeln!(o, "success probability: {}", num(d.success_probability));
    let _ = writeln!(o, "dropped weight: {}", num(d.dropped_weight));
    let _ = writeln!(o, "branches: {}", d.branches.len());
    for b in &d.branches {
        let label = if b.outcomes.is_empty() {
            "-".to_string()
        } else {
            b.outcomes.join(",")
        };
        let _ = writeln!(
            o,
            "branch {label}: probability {} shape {} purity {}",
            num(b.probability),
            b.shape,
            num(b.purity)
        );
    }
}

fn rank_text(o: &mut String, d: &RankBoundResult) {
    let _ = writeln!(o, "shape: {}", d.shape);
    let _ = writeln!(o, "copies: {}", d.copies);
    let _ = writeln!(o, "signature: {}", signature(&d.signature));
    let _ = writeln!(o, "rank: {}", d.rank);
    let _ = writeln!(o, "bound: {}", d.bound);
    let _ = writeln!(o, "satisfied: {}", yes_no(d.satisfied));
}
