//! `key = value` run configuration with `#` comments.

use std::path::Path;

use pota_core::pipeline::{GradMode, RunConfig, SynthSpec};
use pota_core::solver::BInit;

use crate::error::{CliError, CliResult};

pub const KEYS: &[&str] = &[
    "e_total",
    "e_warm",
    "batch",
    "lambda",
    "tau_a",
    "tau_i",
    "lr",
    "seed",
    "grad_mode",
    "d2",
    "fd_step",
    "eps1",
    "eps2",
    "eps3",
    "t1",
    "t2",
    "newton_iters",
    "armijo_c1",
    "armijo_shrink",
    "max_backtracks",
    "marginal_tol",
    "prob_floor",
    "b_init",
];

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value.parse().map_err(|_| format!("invalid value {value:?} for {key}"))
}

fn parse_b_init(value: &str) -> Result<BInit, String> {
    match value {
        "uniform" => Ok(BInit::Uniform),
        _ => match value.strip_prefix("random:") {
            Some(seed) => Ok(BInit::Random(num("b_init", seed)?)),
            None => Err(format!("invalid value {value:?} for b_init (expected uniform or random:<seed>)")),
        },
    }
}

fn render_b_init(b: BInit) -> String {
    match b {
        BInit::Uniform => "uniform".into(),
        BInit::Random(s) => format!("random:{s}"),
    }
}

/// Apply one assignment; the error string is the diagnostic without location.
pub fn set(cfg: &mut RunConfig, key: &str, value: &str) -> Result<(), String> {
    let c = &mut cfg.caot;
    match key {
        "e_total" => cfg.e_total = num(key, value)?,
        "e_warm" => cfg.e_warm = num(key, value)?,
        "batch" => cfg.batch = num(key, value)?,
        "lambda" => cfg.lambda = num(key, value)?,
        "tau_a" => cfg.temps.tau_a = num(key, value)?,
        "tau_i" => cfg.temps.tau_i = num(key, value)?,
        "lr" => cfg.lr = num(key, value)?,
        "seed" => cfg.seed = num(key, value)?,
        "grad_mode" => {
            cfg.grad_mode = match value {
                "fd" => GradMode::Fd,
                "analytic" => GradMode::Analytic,
                _ => return Err(format!("invalid value {value:?} for grad_mode (expected fd or analytic)")),
            }
        }
        "d2" => cfg.d2 = num(key, value)?,
        "fd_step" => cfg.fd_step = num(key, value)?,
        "eps1" => c.eps1 = num(key, value)?,
        "eps2" => c.eps2 = num(key, value)?,
        "eps3" => c.eps3 = num(key, value)?,
        "t1" => c.t1 = num(key, value)?,
        "t2" => c.t2 = num(key, value)?,
        "newton_iters" => c.newton_iters = num(key, value)?,
        "armijo_c1" => c.armijo_c1 = num(key, value)?,
        "armijo_shrink" => c.armijo_shrink = num(key, value)?,
        "max_backtracks" => c.max_backtracks = num(key, value)?,
        "marginal_tol" => c.marginal_tol = num(key, value)?,
        "prob_floor" => c.prob_floor = num(key, value)?,
        "b_init" => c.b_init = parse_b_init(value)?,
        _ => return Err(format!("unknown key {key:?}; valid keys: {}", KEYS.join(", "))),
    }
    Ok(())
}

fn split_assignment(line: &str) -> Option<(&str, &str)> {
    let (k, v) = line.split_once('=')?;
    Some((k.trim(), v.trim()))
}

pub fn parse(path: &Path, text: &str, cfg: &mut RunConfig) -> CliResult<()> {
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = split_assignment(line).ok_or_else(|| CliError::at(path, i + 1, "expected key = value"))?;
        set(cfg, key, value).map_err(|msg| CliError::at(path, i + 1, msg))?;
    }
    Ok(())
}

pub fn load(path: Option<&Path>, overrides: &[String]) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = path {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        parse(path, &text, &mut cfg)?;
    }
    for ov in overrides {
        let (key, value) =
            split_assignment(ov).ok_or_else(|| CliError::Input(format!("--set expects key=value, got {ov:?}")))?;
        set(&mut cfg, key, value).map_err(CliError::Input)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// The resolved configuration in the same `key = value` format.
pub fn render(cfg: &RunConfig) -> String {
    let c = &cfg.caot;
    let grad = match cfg.grad_mode {
        GradMode::Fd => "fd",
        GradMode::Analytic => "analytic",
    };
    let pairs: Vec<(&str, String)> = vec![
        ("e_total", cfg.e_total.to_string()),
        ("e_warm", cfg.e_warm.to_string()),
        ("batch", cfg.batch.to_string()),
        ("lambda", cfg.lambda.to_string()),
        ("tau_a", cfg.temps.tau_a.to_string()),
        ("tau_i", cfg.temps.tau_i.to_string()),
        ("lr", cfg.lr.to_string()),
        ("seed", cfg.seed.to_string()),
        ("grad_mode", grad.to_string()),
        ("d2", cfg.d2.to_string()),
        ("fd_step", cfg.fd_step.to_string()),
        ("eps1", c.eps1.to_string()),
        ("eps2", c.eps2.to_string()),
        ("eps3", c.eps3.to_string()),
        ("t1", c.t1.to_string()),
        ("t2", c.t2.to_string()),
        ("newton_iters", c.newton_iters.to_string()),
        ("armijo_c1", c.armijo_c1.to_string()),
        ("armijo_shrink", c.armijo_shrink.to_string()),
        ("max_backtracks", c.max_backtracks.to_string()),
        ("marginal_tol", c.marginal_tol.to_string()),
        ("prob_floor", c.prob_floor.to_string()),
        ("b_init", render_b_init(c.b_init)),
    ];
    pairs.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

/// Parses `k=5,sizes=100x5,dim=16,sep=8,noise=0.5,seed=1`.
///
/// `sizes` is either `AxB` (B classes of A samples) or a `/`-separated list.
pub fn parse_synth(spec: &str) -> CliResult<SynthSpec> {
    let bad = |msg: String| CliError::Input(format!("--synth: {msg}"));
    let mut k = None;
    let mut sizes: Option<Vec<usize>> = None;
    let mut out = SynthSpec { k: 0, sizes: Vec::new(), dim: 16, separation: 8.0, noise: 0.5, seed: 0 };
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, value) = split_assignment(part).ok_or_else(|| bad(format!("expected key=value, got {part:?}")))?;
        match key {
            "k" => k = Some(num(key, value).map_err(bad)?),
            "sizes" => {
                let parsed = if let Some((each, count)) = value.split_once('x') {
                    let each: usize = num(key, each).map_err(bad)?;
                    let count: usize = num(key, count).map_err(bad)?;
                    vec![each; count]
                } else {
                    value.split('/').map(|s| num(key, s)).collect::<Result<_, _>>().map_err(bad)?
                };
                sizes = Some(parsed);
            }
            "dim" => out.dim = num(key, value).map_err(bad)?,
            "sep" => out.separation = num(key, value).map_err(bad)?,
            "noise" => out.noise = num(key, value).map_err(bad)?,
            "seed" => out.seed = num(key, value).map_err(bad)?,
            _ => return Err(bad(format!("unknown key {key:?}; valid keys: k, sizes, dim, sep, noise, seed"))),
        }
    }
    out.sizes = sizes.ok_or_else(|| bad("sizes is required".into()))?;
    out.k = k.unwrap_or(out.sizes.len());
    if out.sizes.len() != out.k {
        return Err(bad(format!("{} sizes given for k={}", out.sizes.len(), out.k)));
    }
    Ok(out)
}
