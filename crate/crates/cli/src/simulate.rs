//! `simulate`: resolve an [`ExperimentConfig`] from a JSON file and flags,
//! run it, and write the artifacts.
//!
//! Precedence: flags override the file; `--family` rebuilds the instance
//! from flags (file values fill the gaps), while `--eps` alone only moves
//! the success threshold of a file-defined instance.

use std::fs;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use sco_lab::experiments::{coin_instance, run_experiment, tent_instance, write_trials_csv, ExperimentConfig, ExperimentSummary, Rule};
use sco_lab::families::{
    AnyFamily, BlockGadgetFamily, Feasible, LogisticFamily, QuadGaussianFamily, SmallKappaQuadFamily,
};
use sco_lab::lattice::RadiusSpec;

use crate::{write_json, CmdResult, Failure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyKind {
    Coin,
    Tent,
    QuadGaussian,
    BlockGadget,
    SmallKappaQuad,
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FeasibleKind {
    AllSpace,
    Box,
    IntegerBox,
    Ball,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// ExperimentConfig JSON (a manifest.json is accepted too).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    id: Option<String>,
    #[arg(long, value_enum)]
    family: Option<FamilyKind>,
    #[arg(long)]
    rule: Option<Rule>,
    #[arg(long, value_enum)]
    feasible: Option<FeasibleKind>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long = "R")]
    r: Option<RadiusSpec>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long = "L")]
    l: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Comma-separated, strictly increasing.
    #[arg(long, value_delimiter = ',')]
    m_grid: Option<Vec<u64>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Mean vector of the Gaussian family (default 0.5 in every coordinate).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    theta: Option<Vec<f64>>,
    /// Gadget proportionality constant in γ = ε/(c₁·⌊d/2⌋).
    #[arg(long, default_value_t = 1.0 / 192.0)]
    c1: f64,
    /// Small-κ separation (default μ/72).
    #[arg(long)]
    gamma: Option<f64>,
    /// Logistic label-flip probability.
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    /// Logistic feature norm.
    #[arg(long, default_value_t = 1.0)]
    feature_norm: f64,
    /// Keep the hidden instance fixed instead of redrawing it per trial.
    #[arg(long)]
    fixed_instance: bool,
}

#[derive(Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub master_seed: u64,
    pub artifacts: Vec<String>,
    pub config: ExperimentConfig,
}

fn load_config(path: &PathBuf) -> Result<ExperimentConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("--config {}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("--config {}: {e}", path.display())))?;
    let inner = value.get("config").cloned().unwrap_or(value);
    serde_json::from_value(inner).map_err(|e| Failure::Usage(format!("--config {}: {e}", path.display())))
}

fn default_grid() -> Vec<u64> {
    (0..=16).map(|k| 1u64 << k).collect()
}

fn feasible_for(kind: FeasibleKind, r: RadiusSpec) -> Result<Feasible, Failure> {
    let bounded = |what: &str| {
        if r.is_finite() {
            Ok(r.value())
        } else {
            Err(Failure::Usage(format!("--feasible {what} needs a finite --R")))
        }
    };
    Ok(match kind {
        FeasibleKind::AllSpace => Feasible::AllSpace,
        FeasibleKind::Box => Feasible::ContinuousBox { radius: bounded("box")? },
        FeasibleKind::IntegerBox => Feasible::IntegerBox { floor_r: r.floor_r() },
        FeasibleKind::Ball => Feasible::L2Ball { radius: bounded("ball")? },
    })
}

/// Instance, default feasible set and default rule for a family built from flags.
fn build_instance(
    kind: FamilyKind,
    a: &SimulateArgs,
    d: usize,
    r: RadiusSpec,
    eps: f64,
    seed: u64,
) -> Result<(AnyFamily, FeasibleKind, Rule), Failure> {
    let mu = a.mu.unwrap_or(1.0);
    let sigma = a.sigma.unwrap_or(1.0);
    let finite = |flag: &str| {
        if r.is_finite() {
            Ok(r.value())
        } else {
            Err(Failure::Usage(format!("--family {flag} needs a finite --R")))
        }
    };
    Ok(match kind {
        FamilyKind::Coin => (AnyFamily::CoinLinear(coin_instance(d, finite("coin")?, eps)?), FeasibleKind::Box, Rule::Majority),
        FamilyKind::Tent => {
            finite("tent")?;
            let (t, _) = tent_instance(d, r, eps, seed)?;
            (AnyFamily::Tent(t), FeasibleKind::Ball, Rule::TentErm)
        }
        FamilyKind::BlockGadget => {
            let l = a.l.unwrap_or(64.0 * mu);
            let g = BlockGadgetFamily::for_epsilon(d, mu, l, r.floor_r(), eps, a.c1, sigma)?;
            (AnyFamily::BlockGadget(g), FeasibleKind::IntegerBox, Rule::IntegerErm)
        }
        FamilyKind::QuadGaussian => {
            let theta = a.theta.clone().unwrap_or_else(|| vec![0.5; d]);
            let q = QuadGaussianFamily::new(mu, sigma, theta)?;
            (AnyFamily::QuadGaussian(q), FeasibleKind::IntegerBox, Rule::IntegerErm)
        }
        FamilyKind::SmallKappaQuad => {
            let q = SmallKappaQuadFamily::new(mu, a.gamma.unwrap_or(mu / 72.0), vec![1; d], sigma)?;
            (AnyFamily::SmallKappaQuad(q), FeasibleKind::IntegerBox, Rule::IntegerErm)
        }
        FamilyKind::Logistic => {
            let f = LogisticFamily::new(d, mu, a.feature_norm, a.eta)?;
            let feas = if r.is_finite() { FeasibleKind::Ball } else { FeasibleKind::AllSpace };
            (AnyFamily::Logistic(f), feas, Rule::Sgd)
        }
    })
}

fn kind_name(k: FamilyKind) -> String {
    k.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default()
}

pub fn resolve(a: &SimulateArgs) -> Result<ExperimentConfig, Failure> {
    let base = a.config.as_ref().map(load_config).transpose()?;
    let eps = a.eps.or(base.as_ref().map(|c| c.epsilon));
    let seed = a.seed.or(base.as_ref().map(|c| c.master_seed)).unwrap_or(0);
    let mut cfg = match (a.family, base) {
        (Some(kind), base) => {
            let eps = eps.ok_or_else(|| Failure::Usage("--eps is required with --family".into()))?;
            let d = a.d.or(base.as_ref().map(|c| c.instance.dim())).unwrap_or(4);
            let r = a.r.unwrap_or(RadiusSpec::finite(8.0)?);
            let (instance, feas_kind, rule) = build_instance(kind, a, d, r, eps, seed)?;
            let rule = a.rule.unwrap_or(rule);
            ExperimentConfig {
                id: base.as_ref().map(|c| c.id.clone()).unwrap_or_else(|| format!("{}-{}", kind_name(kind), rule)),
                instance,
                feasible: feasible_for(a.feasible.unwrap_or(feas_kind), r)?,
                rule,
                epsilon: eps,
                delta: base.as_ref().map_or(0.25, |c| c.delta),
                m_grid: base.as_ref().map_or_else(default_grid, |c| c.m_grid.clone()),
                trials: base.as_ref().map_or(200, |c| c.trials),
                master_seed: seed,
                randomize_instance: base.as_ref().is_none_or(|c| c.randomize_instance),
                sgd_step: base.and_then(|c| c.sgd_step),
            }
        }
        (None, Some(mut c)) => {
            for (flag, set) in [
                ("--d", a.d.is_some()),
                ("--R", a.r.is_some()),
                ("--mu", a.mu.is_some()),
                ("--L", a.l.is_some()),
                ("--sigma", a.sigma.is_some()),
                ("--theta", a.theta.is_some()),
                ("--gamma", a.gamma.is_some()),
            ] {
                if set {
                    return Err(Failure::Usage(format!("{flag} only applies together with --family")));
                }
            }
            if let Some(kind) = a.feasible {
                let r = match &c.feasible {
                    Feasible::ContinuousBox { radius } | Feasible::L2Ball { radius } => RadiusSpec::finite(*radius)?,
                    Feasible::IntegerBox { floor_r: Some(f) } => RadiusSpec::finite(*f as f64)?,
                    _ => RadiusSpec::infinite(),
                };
                c.feasible = feasible_for(kind, r)?;
            }
            if let Some(e) = eps {
                c.epsilon = e;
            }
            if let Some(rule) = a.rule {
                c.rule = rule;
            }
            c.master_seed = seed;
            c
        }
        (None, None) => return Err(Failure::Usage("give --config or --family".into())),
    };
    if let Some(id) = &a.id {
        cfg.id = id.clone();
    }
    if let Some(d) = a.delta {
        cfg.delta = d;
    }
    if let Some(g) = &a.m_grid {
        cfg.m_grid = g.clone();
    }
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if a.fixed_instance {
        cfg.randomize_instance = false;
    }
    if cfg.id.is_empty() || cfg.id.contains(['/', '\\']) || cfg.id == "." || cfg.id == ".." {
        return Err(Failure::Usage(format!("--id {:?} is not a valid directory name", cfg.id)));
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(a: SimulateArgs) -> CmdResult {
    let cfg = resolve(&a)?;
    let outcome = run_experiment(&cfg)?;
    let dir = a.out.join(&cfg.id);
    fs::create_dir_all(&dir)?;

    let mut csv = Vec::new();
    write_trials_csv(&mut csv, &cfg, &outcome.records)?;
    fs::write(dir.join("trials.csv"), csv)?;
    write_json(Some(&dir.join("summary.json")), &ExperimentSummary::new(&cfg, &outcome))?;
    let manifest = Manifest {
        tool: "sco-lab".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: "simulate".into(),
        master_seed: cfg.master_seed,
        artifacts: vec!["trials.csv".into(), "summary.json".into()],
        config: cfg.clone(),
    };
    write_json(Some(&dir.join("manifest.json")), &manifest)?;

    println!("{}: {} {} on {}, eps={} delta={}", cfg.id, cfg.rule, cfg.instance.tag(), cfg.radius_label(), cfg.epsilon, cfg.delta);
    for e in &outcome.estimates {
        let errors = if e.errors > 0 { format!("  ({} errors)", e.errors) } else { String::new() };
        println!("  m={:<10} p_hat={:.3}  CI=[{:.3}, {:.3}]{errors}", e.m, e.p_hat, e.ci_low, e.ci_high);
    }
    match outcome.m_hat {
        Some(m) => println!("m_hat = {m}"),
        None => println!("m_hat: no grid point reached {}", 1.0 - cfg.delta),
    }
    println!("wrote {}", dir.display());
    Ok(())
}
