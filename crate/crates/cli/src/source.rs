//! State sources, tolerance profiles and small argument parsers.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use distill_core::states::{self, Bell};
use distill_core::{io, DensityMatrix, Tolerance};

/// Environment variable selecting the default tolerance profile.
pub const TOLERANCE_ENV: &str = "DISTILL_TOLERANCE";

/// Largest accepted tolerance override.
pub const MAX_OVERRIDE: f64 = 1e-3;

pub const PRESETS: &[&str] = &[
    "werner",
    "ghz",
    "w",
    "w-standard",
    "example3q",
    "filter-example",
    "phi-plus",
];

#[derive(Debug, Clone, Copy, Default)]
pub struct Params {
    pub p: Option<f64>,
    pub fidelity: Option<f64>,
    pub lambda: Option<f64>,
}

fn need(value: Option<f64>, flag: &str, preset: &str) -> Result<f64> {
    value.ok_or_else(|| anyhow!("preset `{preset}` needs {flag}"))
}

/// Loads a state from a JSON file or builds a named preset.
pub fn load_state(arg: &str, params: &Params, tol: &Tolerance) -> Result<DensityMatrix> {
    let path = Path::new(arg);
    if path.exists() || arg.ends_with(".json") {
        return io::load_state(path, tol).with_context(|| format!("loading state {arg}"));
    }
    let rho = match arg {
        "werner" => states::werner(need(params.fidelity, "--F", arg)?)?,
        "ghz" => states::ghz().density(),
        "w" => states::w_as_printed().density(),
        "w-standard" => states::w_standard().density(),
        "example3q" => states::three_qubit_example(need(params.p, "--p", arg)?)?,
        "filter-example" => states::filter_example(need(params.lambda, "--lambda", arg)?)?,
        "phi-plus" => Bell::PhiPlus.state().density(),
        _ => bail!(
            "`{arg}` is neither a readable file nor a preset (presets: {})",
            PRESETS.join(", ")
        ),
    };
    Ok(rho)
}

pub fn with_copies(rho: DensityMatrix, copies: usize) -> Result<DensityMatrix> {
    if copies == 0 {
        bail!("--copies must be at least 1");
    }
    Ok(rho.tensor_power(copies)?)
}

pub fn profile(name: &str) -> Result<Tolerance> {
    let value = match name {
        "default" => 1e-9,
        "strict" => 1e-12,
        "loose" => 1e-6,
        _ => bail!("unknown tolerance profile `{name}` (expected default, strict or loose)"),
    };
    Ok(Tolerance::uniform(value)?)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub all: Option<f64>,
    pub rank_rtol: Option<f64>,
    pub herm_atol: Option<f64>,
    pub psd_atol: Option<f64>,
    pub purity_atol: Option<f64>,
}

impl Overrides {
    pub fn any(&self) -> bool {
        self.all.is_some()
            || self.rank_rtol.is_some()
            || self.herm_atol.is_some()
            || self.psd_atol.is_some()
            || self.purity_atol.is_some()
    }
}

/// Profile from the environment, then a uniform override, then per-field
/// overrides.
pub fn tolerance(env_profile: Option<&str>, o: &Overrides) -> Result<Tolerance> {
    let mut tol = profile(env_profile.unwrap_or("default"))?;
    let check = |name: &str, v: f64| -> Result<f64> {
        if !(0.0..=MAX_OVERRIDE).contains(&v) {
            bail!("tolerance {name} = {v} outside [0, {MAX_OVERRIDE}]");
        }
        Ok(v)
    };
    if let Some(v) = o.all {
        tol = Tolerance::uniform(check("--tol", v)?)?;
    }
    if let Some(v) = o.rank_rtol {
        tol.rank_rtol = check("--rank-rtol", v)?;
    }
    if let Some(v) = o.herm_atol {
        tol.herm_atol = check("--herm-atol", v)?;
    }
    if let Some(v) = o.psd_atol {
        tol.psd_atol = check("--psd-atol", v)?;
    }
    if let Some(v) = o.purity_atol {
        tol.purity_atol = check("--purity-atol", v)?;
    }
    tol.validate()?;
    Ok(tol)
}

/// Parses `2,2,2` or `2x2x2`.
pub fn parse_signature(text: &str) -> Result<Vec<usize>> {
    text.split([',', 'x', '⊗'])
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| anyhow!("invalid signature `{text}`; expected e.g. 2,2,2"))
        })
        .collect()
}

/// Parses `start:stop:step` into an inclusive grid.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = text
        .split(':')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| anyhow!("invalid grid `{text}`; expected start:stop:step"))?;
    let [start, stop, step] = parts[..] else {
        bail!("invalid grid `{text}`; expected start:stop:step");
    };
    if !step.is_finite() || step <= 0.0 || stop < start || !start.is_finite() || !stop.is_finite() {
        bail!("invalid grid `{text}`; need start ≤ stop and step > 0");
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    if n > 100_000 {
        bail!("grid `{text}` has more than 100000 points");
    }
    Ok((0..=n).map(|k| start + k as f64 * step).collect())
}
