//! `distill`: command-line front end for distill-core.
//!
//! Exit codes: 0 on success, 2 when `dss find` finds no certificate or
//! `dss check` refuses one, 1 on any input or validation error.

mod commands;
mod report;
mod source;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use distill_core::io;

use crate::report::{Format, Report};
use crate::source::{Overrides, Params, TOLERANCE_ENV};

#[derive(Debug, Parser)]
#[command(
    name = "distill",
    version,
    about = "Certify finite-copy distillation of pure entangled states from multipartite mixed states",
    after_help = "Tolerance profile: set DISTILL_TOLERANCE to default (1e-9), strict (1e-12) or loose (1e-6).\n\
                  Exit codes: 0 success, 2 no DSS found / certificate refused, 1 error."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    global: GlobalArgs,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Output format.
    #[arg(long, value_enum, default_value = "text", global = true)]
    format: Format,

    /// Shorthand for `--format json`.
    #[arg(long, global = true)]
    json: bool,

    /// Write the report here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Set every tolerance to this value (at most 1e-3).
    #[arg(long, global = true, value_name = "X", allow_negative_numbers = true)]
    tol: Option<f64>,

    /// Relative cutoff for numerical rank.
    #[arg(long, global = true, value_name = "X", allow_negative_numbers = true)]
    rank_rtol: Option<f64>,

    /// Absolute Hermiticity tolerance.
    #[arg(long, global = true, value_name = "X", allow_negative_numbers = true)]
    herm_atol: Option<f64>,

    /// Allowed negative eigenvalue magnitude.
    #[arg(long, global = true, value_name = "X", allow_negative_numbers = true)]
    psd_atol: Option<f64>,

    /// Allowed shortfall of the top eigenvalue share when judging purity.
    #[arg(long, global = true, value_name = "X", allow_negative_numbers = true)]
    purity_atol: Option<f64>,
}

#[derive(Debug, Args, Clone)]
struct StateArgs {
    /// State file (JSON) or preset: werner, ghz, w, w-standard, example3q,
    /// filter-example, phi-plus.
    #[arg(long, value_name = "FILE|PRESET")]
    state: String,

    /// Mixing parameter of the example3q preset.
    #[arg(long)]
    p: Option<f64>,

    /// Fidelity of the werner preset.
    #[arg(long = "F", value_name = "F")]
    fidelity: Option<f64>,

    /// Mixing parameter of the filter-example preset.
    #[arg(long)]
    lambda: Option<f64>,

    /// Number of copies; the state is replaced by its tensor power.
    #[arg(long, default_value_t = 1)]
    copies: usize,
}

impl StateArgs {
    fn params(&self) -> Params {
        Params {
            p: self.p,
            fidelity: self.fidelity,
            lambda: self.lambda,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Distillable-subspace search and verification.
    #[command(subcommand)]
    Dss(DssCommand),

    /// Factor each local operator into unitary × filter × projector.
    Decompose {
        /// Operator file (JSON) or `example-filter`.
        #[arg(long, value_name = "FILE|example-filter")]
        operator: String,
    },

    /// Purity, rank, concurrence and entanglement of formation of a state.
    Entanglement {
        #[command(flatten)]
        state: StateArgs,
    },

    /// Entanglement of formation before and after the example local filter.
    FilterCompare {
        #[arg(long, conflicts_with = "grid")]
        lambda: Option<f64>,

        /// Inclusive grid `start:stop:step`.
        #[arg(long, value_name = "START:STOP:STEP")]
        grid: Option<String>,
    },

    /// Run a protocol file or one of the built-in two-copy examples.
    #[command(args_conflicts_with_subcommands = true)]
    Simulate {
        #[command(subcommand)]
        example: Option<Example>,

        /// Protocol file (JSON).
        #[arg(long, value_name = "FILE", requires = "state")]
        protocol: Option<PathBuf>,

        #[arg(long, value_name = "FILE|PRESET")]
        state: Option<String>,

        #[arg(long)]
        p: Option<f64>,

        #[arg(long = "F", value_name = "F")]
        fidelity: Option<f64>,

        #[arg(long)]
        lambda: Option<f64>,

        #[arg(long, default_value_t = 1)]
        copies: usize,
    },

    /// Compare rank(ρ^⊗n) with the bound implied by a distillable signature.
    Rankbound {
        #[command(flatten)]
        state: StateArgs,

        /// Signature n_A,n_B,… of the distillable pure state.
        #[arg(long, value_name = "N,N,...")]
        signature: String,
    },
}

#[derive(Debug, Subcommand)]
enum DssCommand {
    /// Search products of subsets of local bases for a distillable subspace.
    Find {
        #[command(flatten)]
        state: StateArgs,

        /// Per-party bases (JSON); computational when omitted.
        #[arg(long, value_name = "FILE")]
        bases: Option<PathBuf>,

        /// Entrywise lower bound on the dimension signature, e.g. 2,2,2.
        #[arg(long, value_name = "N,N,...")]
        min_signature: Option<String>,

        /// Also report pure product projections.
        #[arg(long)]
        allow_product: bool,

        /// List every certificate, not only the minimal ones.
        #[arg(long)]
        all: bool,

        /// Disable pruning (same result, slower).
        #[arg(long)]
        unpruned: bool,

        /// Worker threads for the search.
        #[arg(long)]
        threads: Option<usize>,

        /// Refuse searches with more candidates than this.
        #[arg(long)]
        max_candidates: Option<u128>,
    },

    /// Verify a claimed distillable subspace.
    Check {
        #[command(flatten)]
        state: StateArgs,

        /// Subspace file (JSON).
        #[arg(long, value_name = "FILE")]
        subspace: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum Example {
    /// GHZ from two copies of p[GHZ] + (1−p)[|011⟩].
    GhzExample {
        #[arg(long)]
        p: f64,
    },
    /// Two-copy Werner projection onto the {01,10} and {00,11} subspaces.
    WernerExample {
        /// One or more fidelities, comma separated.
        #[arg(long = "F", value_name = "F,...", value_delimiter = ',', num_args = 1.., required = true)]
        fidelity: Vec<f64>,
    },
}

struct Loaded {
    single: distill_core::DensityMatrix,
    state: distill_core::DensityMatrix,
    digest_bytes: Vec<u8>,
}

fn load(args: &StateArgs, tol: &distill_core::Tolerance) -> Result<Loaded> {
    let single = source::load_state(&args.state, &args.params(), tol)?;
    let digest_bytes = io::state_to_json(&single).into_bytes();
    let state = source::with_copies(single.clone(), args.copies)?;
    Ok(Loaded {
        single,
        state,
        digest_bytes,
    })
}

fn execute(cli: &Cli, tol: &distill_core::Tolerance) -> Result<(commands::Outcome, Vec<Vec<u8>>)> {
    let mut digest: Vec<Vec<u8>> = Vec::new();
    let outcome = match &cli.command {
        Command::Dss(DssCommand::Find {
            state,
            bases,
            min_signature,
            allow_product,
            all,
            unpruned,
            threads,
            max_candidates,
        }) => {
            let loaded = load(state, tol)?;
            digest.push(loaded.digest_bytes);
            digest.push(format!("copies={}", state.copies).into_bytes());
            if let Some(b) = bases {
                digest.push(io::read_text(b)?.into_bytes());
            }
            if threads == &Some(0) {
                bail!("--threads must be at least 1");
            }
            let find = commands::FindArgs {
                copies: state.copies,
                bases: bases.as_deref(),
                min_signature: min_signature
                    .as_deref()
                    .map(source::parse_signature)
                    .transpose()?,
                allow_product: *allow_product,
                all: *all,
                unpruned: *unpruned,
                threads: *threads,
                max_candidates: *max_candidates,
            };
            commands::dss_find(&loaded.single, &loaded.state, &find, tol)?
        }
        Command::Dss(DssCommand::Check { state, subspace }) => {
            let loaded = load(state, tol)?;
            digest.push(loaded.digest_bytes);
            digest.push(io::read_text(subspace)?.into_bytes());
            commands::dss_check(&loaded.state, subspace, tol)?
        }
        Command::Decompose { operator } => {
            if operator != "example-filter" {
                digest.push(io::read_text(std::path::Path::new(operator))?.into_bytes());
            } else {
                digest.push(operator.clone().into_bytes());
            }
            commands::decompose(operator, tol)?
        }
        Command::Entanglement { state } => {
            let loaded = load(state, tol)?;
            digest.push(loaded.digest_bytes);
            digest.push(format!("copies={}", state.copies).into_bytes());
            commands::entanglement(&loaded.state, tol)?
        }
        Command::FilterCompare { lambda, grid } => {
            let lambdas = match (lambda, grid) {
                (Some(l), None) => vec![*l],
                (None, Some(g)) => source::parse_grid(g)?,
                _ => bail!("filter-compare needs --lambda or --grid"),
            };
            digest.push(format!("{lambdas:?}").into_bytes());
            commands::filter_compare(&lambdas, tol)?
        }
        Command::Simulate {
            example,
            protocol,
            state,
            p,
            fidelity,
            lambda,
            copies,
        } => match (example, protocol) {
            (Some(Example::GhzExample { p }), _) => {
                digest.push(format!("ghz-example p={p:?}").into_bytes());
                commands::simulate_ghz(*p)?
            }
            (Some(Example::WernerExample { fidelity }), _) => {
                digest.push(format!("werner-example F={fidelity:?}").into_bytes());
                commands::simulate_werner(fidelity, tol)?
            }
            (None, Some(path)) => {
                let args = StateArgs {
                    state: state
                        .clone()
                        .expect("clap requires --state with --protocol"),
                    p: *p,
                    fidelity: *fidelity,
                    lambda: *lambda,
                    copies: *copies,
                };
                let loaded = load(&args, tol)?;
                digest.push(loaded.digest_bytes);
                digest.push(io::read_text(path)?.into_bytes());
                commands::simulate_protocol(&loaded.state, path)?
            }
            (None, None) => bail!("simulate needs ghz-example, werner-example or --protocol"),
        },
        Command::Rankbound { state, signature } => {
            let loaded = load(state, tol)?;
            digest.push(loaded.digest_bytes);
            digest.push(format!("copies={} signature={signature}", state.copies).into_bytes());
            let sig = source::parse_signature(signature)?;
            commands::rankbound(&loaded.single, state.copies, &sig, tol)?
        }
    };
    Ok((outcome, digest))
}

fn real_main() -> Result<u8> {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp
                | clap::error::ErrorKind::DisplayVersion
                | clap::error::ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    if e.kind() == clap::error::ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
                    {
                        1
                    } else {
                        0
                    }
                }
                _ => 1,
            };
            let _ = e.print();
            return Ok(code);
        }
    };
    let started = Instant::now();
    let g = &cli.global;
    let overrides = Overrides {
        all: g.tol,
        rank_rtol: g.rank_rtol,
        herm_atol: g.herm_atol,
        psd_atol: g.psd_atol,
        purity_atol: g.purity_atol,
    };
    let env_profile = std::env::var(TOLERANCE_ENV).ok();
    let tol = source::tolerance(env_profile.as_deref(), &overrides)?;
    let (outcome, digest_parts) = execute(&cli, &tol)?;

    let mut warnings = outcome.warnings;
    if overrides.any() {
        warnings.push(format!(
            "tolerances overridden: rank_rtol={:e} herm_atol={:e} psd_atol={:e} purity_atol={:e}",
            tol.rank_rtol, tol.herm_atol, tol.psd_atol, tol.purity_atol
        ));
    }
    if let Some(p) = env_profile.as_deref().filter(|p| *p != "default") {
        warnings.push(format!("tolerance profile `{p}` from {TOLERANCE_ENV}"));
    }
    let parts: Vec<&[u8]> = digest_parts.iter().map(Vec::as_slice).collect();
    let report = Report {
        command: std::iter::once("distill".to_string())
            .chain(argv.iter().skip(1).cloned())
            .collect::<Vec<_>>()
            .join(" "),
        inputs_digest: report::digest(&parts),
        results: outcome.results,
        warnings,
        timing_ms: started.elapsed().as_secs_f64() * 1e3,
    };
    let format = if g.json { Format::Json } else { g.format };
    let rendered = report::render(&report, format);
    match &g.out {
        Some(path) => io::write_text(path, &rendered)?,
        None => print!("{rendered}"),
    }
    Ok(outcome.exit)
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
