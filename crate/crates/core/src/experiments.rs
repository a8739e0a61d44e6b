//! Seeded Monte Carlo harness.
//!
//! Every trial owns a ChaCha stream seeded from `(master_seed, experiment id,
//! m, trial)`, so results do not depend on how trials are scheduled across
//! threads. Excess risk always comes from the families' closed forms.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::error::{Error, Result};
use crate::families::{
    block_continuous_minimizer, AnyFamily, CoinLinearFamily, CoinMode, CoinSample, Feasible, LossFamily, QuadGaussianFamily,
    TentFamily, TentSample,
};
use crate::info::tent_bias;
use crate::lattice::{enumerate_integer_points, l2_integer_packing, Norm, RadiusSpec, ScaledPacking};
use crate::solvers::{
    erm_block_gadget, erm_continuous, erm_enumerated, erm_quadratic_integer_box, majority_from_counts, projected_sgd, tent_erm,
    EmpiricalSummary, StepRule, BLOCK_WINDOW_BUDGET,
};

/// Learning rules the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// Coin majority decoder.
    Majority,
    /// Most-activated tent center.
    TentErm,
    /// Exact ERM over an integer box or explicit set.
    IntegerErm,
    /// Exact ERM over `R^d` or a continuous box.
    ContinuousErm,
    /// Projected SGD with suffix averaging.
    Sgd,
    /// Always outputs the origin.
    Zero,
}

impl Rule {
    pub fn as_str(&self) -> &'static str {
        match self {
            Rule::Majority => "majority",
            Rule::TentErm => "tent_erm",
            Rule::IntegerErm => "integer_erm",
            Rule::ContinuousErm => "continuous_erm",
            Rule::Sgd => "sgd",
            Rule::Zero => "zero",
        }
    }
}

impl std::str::FromStr for Rule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::invalid("rule", format!("unknown rule {s:?}")))
    }
}

impl std::fmt::Display for Rule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub id: String,
    /// Base instance; with `randomize_instance` its hidden signs or hidden
    /// center are redrawn uniformly in every trial.
    pub instance: AnyFamily,
    pub feasible: Feasible,
    pub rule: Rule,
    pub epsilon: f64,
    pub delta: f64,
    pub m_grid: Vec<u64>,
    pub trials: usize,
    pub master_seed: u64,
    #[serde(default = "default_true")]
    pub randomize_instance: bool,
    /// Overrides the default SGD schedule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sgd_step: Option<StepRule>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.instance.validate()?;
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::invalid("eps", "must be positive and finite"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid("delta", "must lie in (0, 1)"));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials", "must be at least 1"));
        }
        if self.m_grid.is_empty() || self.m_grid[0] == 0 {
            return Err(Error::invalid("m_grid", "need positive sample sizes"));
        }
        if self.m_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("m_grid", "must be strictly increasing"));
        }
        Ok(())
    }

    /// The radius column of the trial CSV.
    pub fn radius_label(&self) -> String {
        match &self.feasible {
            Feasible::AllSpace => "inf".into(),
            Feasible::ContinuousBox { radius } | Feasible::L2Ball { radius } => radius.to_string(),
            Feasible::IntegerBox { floor_r: Some(f) } => f.to_string(),
            Feasible::IntegerBox { floor_r: None } => "inf".into(),
            Feasible::Explicit(_) => "explicit".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub m: u64,
    pub trial: usize,
    pub seed: u64,
    /// Hidden signs or hidden center drawn for this trial.
    pub instance: String,
    pub excess: f64,
    pub success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a; stable across platforms and toolchains, unlike `DefaultHasher`.
fn fnv1a(s: &str) -> u64 {
    s.bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

/// Seed of one trial.
pub fn trial_seed(master_seed: u64, experiment_id: &str, m: u64, trial: usize) -> u64 {
    let a = splitmix64(master_seed ^ fnv1a(experiment_id));
    let b = splitmix64(a ^ m);
    splitmix64(b ^ trial as u64)
}

fn random_signs<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<i8> {
    (0..n).map(|_| if rng.random_bool(0.5) { 1 } else { -1 }).collect()
}

fn describe_signs(b: &[i8]) -> String {
    let s: String = b.iter().map(|&v| if v > 0 { '+' } else { '-' }).collect();
    format!("b={s}")
}

/// Redraws the hidden part of `base` and describes what was drawn.
fn draw_instance<R: Rng + ?Sized>(base: &AnyFamily, randomize: bool, rng: &mut R) -> Result<(AnyFamily, String)> {
    let mut f = base.clone();
    let descr = match &mut f {
        AnyFamily::CoinLinear(c) => match &mut c.mode {
            CoinMode::Dimension { b } => {
                if randomize {
                    *b = random_signs(rng, b.len());
                }
                describe_signs(b)
            }
            CoinMode::Confidence { b } => {
                if randomize {
                    *b = random_signs(rng, 1)[0];
                }
                describe_signs(&[*b])
            }
        },
        AnyFamily::Tent(t) => {
            if randomize {
                t.hidden = rng.random_range(0..t.len());
            }
            format!("u={}", t.hidden)
        }
        AnyFamily::BlockGadget(g) => {
            if randomize {
                g.b = random_signs(rng, g.b.len());
            }
            describe_signs(&g.b)
        }
        AnyFamily::SmallKappaQuad(q) => {
            if randomize {
                q.b = random_signs(rng, q.b.len());
            }
            describe_signs(&q.b)
        }
        AnyFamily::QuadGaussian(_) | AnyFamily::Logistic(_) => String::new(),
    };
    Ok((f, descr))
}

macro_rules! with_family {
    ($any:expr, $f:ident => $body:expr) => {
        match $any {
            AnyFamily::CoinLinear($f) => $body,
            AnyFamily::Tent($f) => $body,
            AnyFamily::QuadGaussian($f) => $body,
            AnyFamily::BlockGadget($f) => $body,
            AnyFamily::SmallKappaQuad($f) => $body,
            AnyFamily::Logistic($f) => $body,
        }
    };
}

/// Population excess of `x` for any family.
pub fn family_excess(family: &AnyFamily, feasible: &Feasible, x: &[f64]) -> Result<f64> {
    with_family!(family, f => f.excess(feasible, x))
}

fn box_scale(feasible: &Feasible) -> Result<f64> {
    match feasible {
        Feasible::ContinuousBox { radius } => Ok(*radius),
        Feasible::IntegerBox { floor_r: Some(f) } => Ok(*f as f64),
        _ => Err(Error::Unsupported("this rule needs a bounded box".into())),
    }
}

fn default_step(family: &AnyFamily, feasible: &Feasible) -> Result<StepRule> {
    match family {
        AnyFamily::QuadGaussian(f) => Ok(StepRule::StronglyConvex { mu: f.mu }),
        AnyFamily::SmallKappaQuad(f) => Ok(StepRule::StronglyConvex { mu: f.mu }),
        AnyFamily::BlockGadget(f) => Ok(StepRule::StronglyConvex { mu: f.mu }),
        AnyFamily::Logistic(f) => Ok(StepRule::StronglyConvex { mu: f.mu }),
        AnyFamily::CoinLinear(f) => Ok(StepRule::Lipschitz {
            radius: box_scale(feasible)? * (f.d as f64).sqrt(),
            lipschitz: 1.0,
        }),
        AnyFamily::Tent(_) => Err(Error::Unsupported("tent losses have no gradient oracle".into())),
    }
}

fn gaussian_mean<R: Rng + ?Sized>(family: &AnyFamily, m: u64, rng: &mut R) -> Option<(Vec<f64>, f64)> {
    match family {
        AnyFamily::QuadGaussian(f) => Some((f.sample_mean(m, rng), f.mu)),
        AnyFamily::SmallKappaQuad(f) => Some((f.as_quad().sample_mean(m, rng), f.mu)),
        AnyFamily::BlockGadget(f) => Some((f.sample_mean(m, rng), f.mu)),
        _ => None,
    }
}

/// Output of `rule` on `m` fresh samples from `family`.
///
/// Gaussian-mean families draw `Z̄ ~ N(θ, σ²/m·I)` directly for the ERM
/// rules; `Z̄` is a sufficient statistic for their empirical objective, so
/// this has the same law as averaging `m` individual draws.
pub fn apply_rule<R: Rng + ?Sized>(
    family: &AnyFamily,
    feasible: &Feasible,
    rule: Rule,
    m: u64,
    sgd_step: Option<StepRule>,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let d = family.dim();
    match (rule, family) {
        (Rule::Zero, _) => Ok(vec![0.0; d]),
        (Rule::Majority, AnyFamily::CoinLinear(f)) => {
            let samples: Vec<CoinSample> = (0..m).map(|_| f.sample(rng)).collect();
            let crate::solvers::Statistic::Coin { signed, .. } = EmpiricalSummary::coin(&samples, d)?.statistic else {
                unreachable!()
            };
            Ok(majority_from_counts(&signed, box_scale(feasible)?))
        }
        (Rule::TentErm, AnyFamily::Tent(f)) => {
            let counts = tent_counts(f, m, rng);
            Ok(f.centers[tent_erm(&counts)?].clone())
        }
        (Rule::IntegerErm, AnyFamily::Tent(f)) => {
            let Feasible::Explicit(points) = feasible else {
                return Err(Error::Unsupported("integer ERM for tents needs an explicit point list".into()));
            };
            let counts = tent_counts(f, m, rng);
            let summary = EmpiricalSummary {
                family: "tent".into(),
                m,
                statistic: crate::solvers::Statistic::Tent { counts },
            };
            Ok(erm_enumerated(points, |x| summary.empirical_objective(family, x).unwrap_or(f64::INFINITY))?.point)
        }
        (Rule::IntegerErm, _) => {
            let (zbar, mu) = gaussian_mean(family, m, rng)
                .ok_or_else(|| Error::Unsupported(format!("integer ERM is not wired for {}", family.tag())))?;
            match feasible {
                Feasible::IntegerBox { floor_r } => {
                    let x = match family {
                        AnyFamily::BlockGadget(g) => erm_block_gadget(&zbar, g, *floor_r, BLOCK_WINDOW_BUDGET)?,
                        _ => erm_quadratic_integer_box(&zbar, mu, *floor_r),
                    };
                    Ok(x.into_iter().map(|v| v as f64).collect())
                }
                Feasible::Explicit(points) => {
                    let summary = EmpiricalSummary::from_mean(family.tag(), zbar, m);
                    Ok(erm_enumerated(points, |x| summary.empirical_objective(family, x).unwrap_or(f64::INFINITY))?.point)
                }
                _ => Err(Error::Unsupported("integer ERM needs an integer box or explicit set".into())),
            }
        }
        (Rule::ContinuousErm, AnyFamily::BlockGadget(g)) => {
            if *feasible != Feasible::AllSpace {
                return Err(Error::Unsupported("continuous gadget ERM is wired for all of R^d".into()));
            }
            let zbar = g.sample_mean(m, rng);
            let mut x = vec![0.0; d];
            for j in 0..g.blocks() {
                let (a, b) = block_continuous_minimizer(zbar[2 * j], zbar[2 * j + 1], g.mu, g.l, g.tau);
                x[2 * j] = a;
                x[2 * j + 1] = b;
            }
            if d % 2 == 1 {
                x[d - 1] = zbar[d - 1] / g.mu;
            }
            Ok(x)
        }
        (Rule::ContinuousErm, _) => {
            let (zbar, mu) = gaussian_mean(family, m, rng)
                .ok_or_else(|| Error::Unsupported(format!("continuous ERM is not wired for {}", family.tag())))?;
            erm_continuous(&zbar, mu, feasible)
        }
        (Rule::Sgd, _) => {
            let step = match sgd_step {
                Some(s) => s,
                None => default_step(family, feasible)?,
            };
            with_family!(family, f => projected_sgd(f, feasible, m, step, true, rng))
        }
        (rule, family) => Err(Error::Unsupported(format!("rule {rule} does not apply to {}", family.tag()))),
    }
}

fn tent_counts<R: Rng + ?Sized>(f: &TentFamily, m: u64, rng: &mut R) -> Vec<u64> {
    let mut counts = vec![0u64; f.len()];
    for _ in 0..m {
        let v: TentSample = f.sample(rng);
        for (c, on) in counts.iter_mut().zip(v) {
            *c += on as u64;
        }
    }
    counts
}

/// Runs one trial. Rule or excess failures are recorded, not propagated.
pub fn run_trial(config: &ExperimentConfig, m: u64, trial: usize) -> TrialRecord {
    let seed = trial_seed(config.master_seed, &config.id, m, trial);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let outcome = draw_instance(&config.instance, config.randomize_instance, &mut rng).and_then(|(family, descr)| {
        let x = apply_rule(&family, &config.feasible, config.rule, m, config.sgd_step, &mut rng)?;
        Ok((descr, family_excess(&family, &config.feasible, &x)?))
    });
    match outcome {
        Ok((instance, excess)) => TrialRecord {
            m,
            trial,
            seed,
            instance,
            excess,
            success: excess <= config.epsilon,
            error: None,
        },
        Err(e) => TrialRecord {
            m,
            trial,
            seed,
            instance: String::new(),
            excess: f64::NAN,
            success: false,
            error: Some(e.to_string()),
        },
    }
}

/// Two-sided Clopper–Pearson interval at level `1 − alpha`.
pub fn clopper_pearson(successes: usize, trials: usize, alpha: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let (k, n) = (successes as f64, trials as f64);
    let lo = if successes == 0 {
        0.0
    } else {
        Beta::new(k, n - k + 1.0).map_or(0.0, |b| b.inverse_cdf(alpha / 2.0))
    };
    let hi = if successes == trials {
        1.0
    } else {
        Beta::new(k + 1.0, n - k).map_or(1.0, |b| b.inverse_cdf(1.0 - alpha / 2.0))
    };
    (lo, hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessEstimate {
    pub m: u64,
    pub trials: usize,
    pub successes: usize,
    /// Trials whose rule or excess evaluation failed (counted as failures).
    pub errors: usize,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl SuccessEstimate {
    pub fn from_records<'a>(m: u64, records: impl IntoIterator<Item = &'a TrialRecord>) -> Self {
        let (mut trials, mut successes, mut errors) = (0, 0, 0);
        for r in records {
            trials += 1;
            successes += r.success as usize;
            errors += r.error.is_some() as usize;
        }
        let (ci_low, ci_high) = clopper_pearson(successes, trials, 0.05);
        SuccessEstimate {
            m,
            trials,
            successes,
            errors,
            p_hat: if trials == 0 { 0.0 } else { successes as f64 / trials as f64 },
            ci_low,
            ci_high,
        }
    }
}

fn run_trials(config: &ExperimentConfig, m: u64) -> Vec<TrialRecord> {
    (0..config.trials).into_par_iter().map(|t| run_trial(config, m, t)).collect()
}

/// Success frequency at sample size `m` with a 95% Clopper–Pearson interval.
pub fn estimate_success(config: &ExperimentConfig, m: u64) -> Result<SuccessEstimate> {
    config.validate()?;
    Ok(SuccessEstimate::from_records(m, &run_trials(config, m)))
}

/// Smallest grid point whose point estimate reaches `1 − δ`.
pub fn min_m_from_estimates(estimates: &[SuccessEstimate], delta: f64) -> Option<u64> {
    estimates.iter().find(|e| e.p_hat >= 1.0 - delta).map(|e| e.m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub records: Vec<TrialRecord>,
    pub estimates: Vec<SuccessEstimate>,
    pub m_hat: Option<u64>,
}

/// All trials at every grid point, in `(m, trial)` order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.validate()?;
    let jobs: Vec<(u64, usize)> = config
        .m_grid
        .iter()
        .flat_map(|&m| (0..config.trials).map(move |t| (m, t)))
        .collect();
    let records: Vec<TrialRecord> = jobs.par_iter().map(|&(m, t)| run_trial(config, m, t)).collect();
    let estimates: Vec<SuccessEstimate> = records
        .chunks(config.trials)
        .zip(&config.m_grid)
        .map(|(chunk, &m)| SuccessEstimate::from_records(m, chunk))
        .collect();
    let m_hat = min_m_from_estimates(&estimates, config.delta);
    Ok(ExperimentOutcome {
        records,
        estimates,
        m_hat,
    })
}

/// [`run_experiment`] reduced to the grid decision.
pub fn find_min_m(config: &ExperimentConfig) -> Result<(Option<u64>, Vec<SuccessEstimate>)> {
    let out = run_experiment(config)?;
    Ok((out.m_hat, out.estimates))
}

pub const TRIAL_COLUMNS: [&str; 14] = [
    "experiment_id",
    "family",
    "rule",
    "d",
    "R",
    "eps",
    "delta",
    "m",
    "trial",
    "seed",
    "excess",
    "success",
    "instance",
    "error",
];

/// One CSV row per trial.
pub fn write_trials_csv<W: Write>(out: W, config: &ExperimentConfig, records: &[TrialRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Trace(e.to_string());
    w.write_record(TRIAL_COLUMNS).map_err(csv_err)?;
    let (family, rule, d, radius) = (
        config.instance.tag(),
        config.rule.as_str(),
        config.instance.dim().to_string(),
        config.radius_label(),
    );
    let (eps, delta) = (config.epsilon.to_string(), config.delta.to_string());
    for r in records {
        w.write_record([
            config.id.as_str(),
            family,
            rule,
            &d,
            &radius,
            &eps,
            &delta,
            &r.m.to_string(),
            &r.trial.to_string(),
            &r.seed.to_string(),
            &r.excess.to_string(),
            if r.success { "1" } else { "0" },
            &r.instance,
            r.error.as_deref().unwrap_or(""),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Least-squares fit of `ln m̂` against `ln(1/ε)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// `(ε, m̂)` pairs.
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::DegenerateFit("need at least three (eps, m) pairs".into()));
    }
    if points.iter().any(|&(e, m)| !(e > 0.0 && m > 0.0)) {
        return Err(Error::DegenerateFit("eps and m must be positive".into()));
    }
    let xs: Vec<f64> = points.iter().map(|p| (1.0 / p.0).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 1e-300 {
        return Err(Error::DegenerateFit("all eps values are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(RateFit {
        points: points.to_vec(),
        slope,
        intercept,
        r2,
    })
}

/// Summary document written next to the trial CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub config: ExperimentConfig,
    pub per_m: Vec<SuccessEstimate>,
    pub m_hat: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_fit: Option<RateFit>,
}

impl ExperimentSummary {
    pub fn new(config: &ExperimentConfig, outcome: &ExperimentOutcome) -> Self {
        ExperimentSummary {
            config: config.clone(),
            per_m: outcome.estimates.clone(),
            m_hat: outcome.m_hat,
            rate_fit: None,
        }
    }
}

/// Runs each per-ε configuration and fits the exponent over those with an `m̂`.
pub fn rate_sweep(configs: &[ExperimentConfig]) -> Result<(Vec<ExperimentOutcome>, RateFit)> {
    let outcomes = configs.iter().map(run_experiment).collect::<Result<Vec<_>>>()?;
    let pairs: Vec<(f64, f64)> = configs
        .iter()
        .zip(&outcomes)
        .filter_map(|(c, o)| o.m_hat.map(|m| (c.epsilon, m as f64)))
        .collect();
    let fit = fit_rate(&pairs)?;
    Ok((outcomes, fit))
}

/// Dimension-mode coin instance at accuracy `epsilon`: `ρ = 4ε/R`.
pub fn coin_instance(d: usize, radius: f64, epsilon: f64) -> Result<CoinLinearFamily> {
    CoinLinearFamily::dimension(d, radius, 4.0 * epsilon / radius, vec![1; d])
}

/// Tent instance over an integer `ℓ2` packing at accuracy `epsilon`: `ρ = 8ε/r`.
pub fn tent_instance(d: usize, radius: RadiusSpec, epsilon: f64, seed: u64) -> Result<(TentFamily, ScaledPacking)> {
    let packing = l2_integer_packing(d, radius, seed)?;
    let r = packing.radius();
    if !(epsilon > 0.0 && epsilon <= r / 16.0) {
        return Err(Error::invalid("eps", "must lie in (0, r/16]"));
    }
    let fam = TentFamily::from_packing(&packing, 0, tent_bias(r, epsilon))?;
    Ok((fam, packing))
}

/// Anchored uniform deviation samples for the quadratic family over an integer box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UcDeviation {
    pub m: u64,
    /// Closed form `⌊R⌋·‖Z̄ − θ‖₁` per trial.
    pub sups: Vec<f64>,
    /// Sup over the enumerated box, when `d ≤ 3`.
    pub brute_force: Option<Vec<f64>>,
}

impl UcDeviation {
    pub fn median(&self) -> f64 {
        median(&self.sups)
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => v[n / 2],
        _ => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

/// For `f(x; Z) = (μ/2)‖x‖² − ⟨Z, x⟩` the anchored deviation at `x` is
/// `|⟨Z̄ − θ, x⟩|`, whose sup over `{−⌊R⌋..⌊R⌋}^d` is `⌊R⌋·‖Z̄ − θ‖₁`.
#[allow(clippy::too_many_arguments)]
pub fn uc_deviation_quadratic(
    d: usize,
    floor_r: u64,
    mu: f64,
    sigma: f64,
    theta: &[f64],
    m: u64,
    trials: usize,
    seed: u64,
) -> Result<UcDeviation> {
    crate::error::ensure_dim(d, theta.len())?;
    if m == 0 {
        return Err(Error::invalid("m", "must be positive"));
    }
    let family = QuadGaussianFamily::new(mu, sigma, theta.to_vec())?;
    let lattice = if d <= 3 {
        let set = enumerate_integer_points(d, RadiusSpec::finite(floor_r.max(1) as f64)?, Norm::Linf)?;
        let pts: Vec<Vec<f64>> = set
            .iter()
            .filter(|p| p.iter().all(|v| v.unsigned_abs() <= floor_r))
            .map(|p| p.iter().map(|&v| v as f64).collect())
            .collect();
        Some(pts)
    } else {
        None
    };
    let r = floor_r as f64;
    let per_trial: Vec<(f64, Option<f64>)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, "uc_deviation", m, t));
            let mut zbar = vec![0.0; d];
            for _ in 0..m {
                for (a, z) in zbar.iter_mut().zip(family.sample(&mut rng)) {
                    *a += z;
                }
            }
            let xi: Vec<f64> = zbar.iter().zip(theta).map(|(a, th)| a / m as f64 - th).collect();
            let closed: f64 = xi.iter().map(|v| r * v.abs()).sum();
            let brute = lattice.as_ref().map(|pts| {
                pts.iter()
                    .map(|x| xi.iter().zip(x).map(|(a, b)| a * b).sum::<f64>().abs())
                    .fold(0.0, f64::max)
            });
            (closed, brute)
        })
        .collect();
    let sups = per_trial.iter().map(|p| p.0).collect();
    let brute_force = lattice.map(|_| per_trial.iter().map(|p| p.1.unwrap_or(f64::NAN)).collect());
    Ok(UcDeviation { m, sups, brute_force })
}

/// Rules for [`correlation_experiment`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationRule {
    Majority,
    /// Ignores the data.
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEstimate {
    pub mean: f64,
    pub standard_error: f64,
    pub ceiling: f64,
    pub trials: usize,
    /// `mean ≤ ceiling + 3·SE`
    pub within_ceiling: bool,
}

/// `E[⟨B, Y⟩/d]` for a uniform hidden `B` and `Y = A(S)/R`, against the
/// ceiling `ρ√(2m/d)`.
pub fn correlation_experiment(
    d: usize,
    radius: f64,
    rho: f64,
    m: u64,
    trials: usize,
    seed: u64,
    rule: CorrelationRule,
) -> Result<CorrelationEstimate> {
    if trials < 2 {
        return Err(Error::invalid("trials", "need at least two trials"));
    }
    let base = CoinLinearFamily::dimension(d, radius, rho, vec![1; d])?;
    let values: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, "correlation", m, t));
            let b = random_signs(&mut rng, d);
            let mut fam = base.clone();
            fam.mode = CoinMode::Dimension { b: b.clone() };
            let x = match rule {
                CorrelationRule::Zero => vec![0.0; d],
                CorrelationRule::Majority => {
                    let mut signed = vec![0i64; d];
                    for _ in 0..m {
                        let s = fam.sample(&mut rng);
                        signed[s.coord] += s.sign as i64;
                    }
                    majority_from_counts(&signed, radius)
                }
            };
            b.iter().zip(&x).map(|(&bj, xj)| bj as f64 * xj / radius).sum::<f64>() / d as f64
        })
        .collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let standard_error = (var / n).sqrt();
    let ceiling = rho * (2.0 * m as f64 / d as f64).sqrt();
    Ok(CorrelationEstimate {
        mean,
        standard_error,
        ceiling,
        trials,
        within_ceiling: mean <= ceiling + 3.0 * standard_error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NecessityReport {
    /// Rule output on the all-zero sample.
    pub a0: f64,
    /// `P[Z = 0]`.
    pub p: f64,
    /// Location of the second atom.
    pub atom: f64,
    /// Excess of `a0` under the constructed distribution.
    pub excess_at_zero_sample: f64,
    pub trials: usize,
    /// Trials with an all-zero sample and excess above `ε`.
    pub failures: usize,
    pub frequency: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Whether the 95% interval lies above `δ`.
    pub exceeds_delta: bool,
}

/// Two-atom distribution defeating a fixed deterministic rule for
/// `f(x; z) = (μ/2)(x − z)²`: with `p = (δ^{1/m} + 1)/2` the all-zero
/// sample has probability `p^m > δ`, while the mean sits `⌈2√(ε/μ)⌉` away
/// from what the rule outputs on that sample.
#[allow(clippy::too_many_arguments)]
pub fn adversarial_necessity_demo(
    rule: &(dyn Fn(&[f64]) -> f64 + Sync),
    mu: f64,
    epsilon: f64,
    delta: f64,
    m: u64,
    trials: usize,
    seed: u64,
) -> Result<NecessityReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("delta", "must lie in (0, 1)"));
    }
    if !(mu > 0.0) || !(epsilon > 0.0) || m == 0 || trials == 0 {
        return Err(Error::invalid("mu/eps/m/trials", "must be positive"));
    }
    let a0 = rule(&vec![0.0; m as usize]);
    let p = (delta.powf(1.0 / m as f64) + 1.0) / 2.0;
    let shift = (2.0 * (epsilon / mu).sqrt()).ceil();
    let atom = (a0 + shift) / (1.0 - p);
    let mean = (1.0 - p) * atom;
    let excess = |x: f64| 0.5 * mu * (x - mean) * (x - mean);
    let failures: usize = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, "increment_necessity", m, t));
            let sample: Vec<f64> = (0..m).map(|_| if rng.random::<f64>() < p { 0.0 } else { atom }).collect();
            let all_zero = sample.iter().all(|&z| z == 0.0);
            (all_zero && excess(rule(&sample)) > epsilon) as usize
        })
        .sum();
    let (ci_low, ci_high) = clopper_pearson(failures, trials, 0.05);
    Ok(NecessityReport {
        a0,
        p,
        atom,
        excess_at_zero_sample: excess(a0),
        trials,
        failures,
        frequency: failures as f64 / trials as f64,
        ci_low,
        ci_high,
        exceeds_delta: ci_low > delta,
    })
}
