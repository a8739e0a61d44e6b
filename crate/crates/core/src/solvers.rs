//! Learning rules: exact ERM over integer and continuous sets, the coin and
//! tent decoders, and a projected SGD baseline.
//!
//! Ties are always broken toward the lexicographically smallest point, so
//! every rule is a deterministic function of its input.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::families::{
    block_continuous_minimizer, block_quadratic, brute_force_minimizer, integer_quad_argmin, norm2, AnyFamily, BlockGadgetFamily,
    CoinSample, Feasible, LossFamily, Minimizer, TentSample,
};
use crate::lattice::{IntegerPointSet, DEFAULT_BUDGET};

/// The statistic that determines the empirical objective `F_S` of a family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Statistic {
    /// Per-coordinate sums of observed signs and observation counts.
    Coin { signed: Vec<i64>, seen: Vec<u64> },
    /// Per-center activation counts.
    Tent { counts: Vec<u64> },
    /// Sample mean `Z̄`.
    GaussianMean { zbar: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalSummary {
    pub family: String,
    pub m: u64,
    pub statistic: Statistic,
}

impl EmpiricalSummary {
    pub fn coin(samples: &[CoinSample], d: usize) -> Result<Self> {
        let mut signed = vec![0i64; d];
        let mut seen = vec![0u64; d];
        for s in samples {
            if s.coord >= d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: s.coord + 1,
                });
            }
            signed[s.coord] += s.sign as i64;
            seen[s.coord] += 1;
        }
        Ok(EmpiricalSummary {
            family: "coin_linear".into(),
            m: samples.len() as u64,
            statistic: Statistic::Coin { signed, seen },
        })
    }

    pub fn tent(samples: &[TentSample], centers: usize) -> Result<Self> {
        let mut counts = vec![0u64; centers];
        for v in samples {
            ensure_dim(centers, v.len())?;
            for (c, &on) in counts.iter_mut().zip(v) {
                *c += on as u64;
            }
        }
        Ok(EmpiricalSummary {
            family: "tent".into(),
            m: samples.len() as u64,
            statistic: Statistic::Tent { counts },
        })
    }

    pub fn gaussian(family: &str, samples: &[Vec<f64>], d: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("samples", "need at least one sample"));
        }
        let mut zbar = vec![0.0; d];
        for z in samples {
            ensure_dim(d, z.len())?;
            for (a, v) in zbar.iter_mut().zip(z) {
                *a += v;
            }
        }
        let m = samples.len() as f64;
        zbar.iter_mut().for_each(|a| *a /= m);
        Ok(Self::from_mean(family, zbar, samples.len() as u64))
    }

    pub fn from_mean(family: &str, zbar: Vec<f64>, m: u64) -> Self {
        EmpiricalSummary {
            family: family.to_string(),
            m,
            statistic: Statistic::GaussianMean { zbar },
        }
    }

    /// `F_S(x)` reconstructed from the statistic alone.
    pub fn empirical_objective(&self, family: &AnyFamily, x: &[f64]) -> Result<f64> {
        ensure_dim(family.dim(), x.len())?;
        let m = self.m as f64;
        match (&self.statistic, family) {
            (Statistic::Coin { signed, .. }, AnyFamily::CoinLinear(_)) => {
                Ok(-signed.iter().zip(x).map(|(&s, xi)| s as f64 * xi).sum::<f64>() / m)
            }
            (Statistic::Tent { counts }, AnyFamily::Tent(f)) => {
                // disjoint supports: only the tent containing x can contribute
                Ok(match f.active_tent(x) {
                    Some(i) => -(counts[i] as f64) / m * f.tent(i, x),
                    None => 0.0,
                })
            }
            (Statistic::GaussianMean { zbar }, AnyFamily::QuadGaussian(f)) => Ok(f.objective_with_mean(x, zbar)),
            (Statistic::GaussianMean { zbar }, AnyFamily::SmallKappaQuad(f)) => Ok(f.as_quad().objective_with_mean(x, zbar)),
            (Statistic::GaussianMean { zbar }, AnyFamily::BlockGadget(f)) => Ok(f.objective_with_mean(x, zbar)),
            _ => Err(Error::Unsupported(format!(
                "no {} statistic for the {} family",
                self.family,
                family.tag()
            ))),
        }
    }
}

/// `F_S(x) = (1/m) Σ f(x; z_i)` by direct averaging.
pub fn empirical_risk<F: LossFamily>(family: &F, samples: &[F::Sample], x: &[f64]) -> Result<f64> {
    ensure_dim(family.dim(), x.len())?;
    if samples.is_empty() {
        return Err(Error::invalid("samples", "need at least one sample"));
    }
    Ok(samples.iter().map(|z| family.eval(x, z)).sum::<f64>() / samples.len() as f64)
}

/// Exact argmin of `objective` over an explicit list, lexicographic ties.
pub fn erm_enumerated(points: &[Vec<f64>], objective: impl Fn(&[f64]) -> f64) -> Result<Minimizer> {
    brute_force_minimizer(points, objective)
}

/// [`erm_enumerated`] over the points of an [`IntegerPointSet`].
pub fn erm_over_point_set(points: &IntegerPointSet, objective: impl Fn(&[f64]) -> f64) -> Result<Minimizer> {
    let list: Vec<Vec<f64>> = points.iter().map(|p| p.iter().map(|&v| v as f64).collect()).collect();
    erm_enumerated(&list, objective)
}

/// Coordinatewise integer minimizer of `(μ/2)‖x‖² − ⟨z̄, x⟩` over `{−⌊R⌋..⌊R⌋}^d`.
pub fn erm_quadratic_integer_box(zbar: &[f64], mu: f64, floor_r: Option<u64>) -> Vec<i64> {
    zbar.iter().map(|&z| integer_quad_argmin(z, mu, floor_r)).collect()
}

/// Exact integer ERM for the block gadget given the sample mean.
///
/// Each block is solved by enumerating the integer points inside the
/// strong-convexity window around the continuous minimizer; `budget` caps
/// the number of candidates per block.
pub fn erm_block_gadget(zbar: &[f64], family: &BlockGadgetFamily, floor_r: Option<u64>, budget: u64) -> Result<Vec<i64>> {
    ensure_dim(family.d, zbar.len())?;
    let (mu, l, tau) = (family.mu, family.l, family.tau);
    let bound = floor_r.map(|f| f as f64);
    let clamp = |v: f64| bound.map_or(v, |b| v.clamp(-b, b));
    let mut out = vec![0i64; family.d];
    for j in 0..family.blocks() {
        let (z1, z2) = (zbar[2 * j], zbar[2 * j + 1]);
        let value = |x: f64, y: f64| block_quadratic(x, y, mu, l, tau) - z1 * x - z2 * y;
        let (xc, yc) = block_continuous_minimizer(z1, z2, mu, l, tau);
        let (xr, yr) = (clamp(round_half_down(xc)), clamp(round_half_down(yc)));
        // g(p) ≥ g(c) + (μ/2)‖p − c‖², so every point beating the rounded one lies in this disc
        let gap = (value(xr, yr) - value(xc, yc)).max(0.0);
        let radius = (2.0 * gap / mu).sqrt() * (1.0 + 1e-9) + 1e-9;
        let (x_lo, x_hi) = (clamp((xc - radius).ceil()), clamp((xc + radius).floor()));
        let (y_lo, y_hi) = (clamp((yc - radius).ceil()), clamp((yc + radius).floor()));
        let count = (x_hi - x_lo + 1.0).max(0.0) * (y_hi - y_lo + 1.0).max(0.0);
        if count > budget as f64 {
            return Err(Error::BudgetExceeded {
                estimated: count,
                budget,
            });
        }
        let mut best = (xr, yr, value(xr, yr));
        let mut x = x_lo;
        while x <= x_hi {
            let mut y = y_lo;
            while y <= y_hi {
                let v = value(x, y);
                if v < best.2 || (v == best.2 && (x, y) < (best.0, best.1)) {
                    best = (x, y, v);
                }
                y += 1.0;
            }
            x += 1.0;
        }
        out[2 * j] = best.0 as i64;
        out[2 * j + 1] = best.1 as i64;
    }
    if family.d % 2 == 1 {
        out[family.d - 1] = integer_quad_argmin(zbar[family.d - 1], mu, floor_r);
    }
    Ok(out)
}

fn round_half_down(v: f64) -> f64 {
    let r = v.round();
    if (r - v).abs() == 0.5 {
        v.floor()
    } else {
        r
    }
}

/// Minimizer of `(μ/2)‖x‖² − ⟨z̄, x⟩` over all of `R^d` or a box.
pub fn erm_continuous(zbar: &[f64], mu: f64, feasible: &Feasible) -> Result<Vec<f64>> {
    if !(mu > 0.0) {
        return Err(Error::invalid("mu", "must be positive"));
    }
    let center = zbar.iter().map(|z| z / mu);
    match feasible {
        Feasible::AllSpace => Ok(center.collect()),
        Feasible::ContinuousBox { radius } => Ok(center.map(|c| c.clamp(-radius, *radius)).collect()),
        _ => Err(Error::Unsupported("continuous ERM needs all of R^d or a box".into())),
    }
}

/// Index of the most-activated tent; ties go to the smallest index.
pub fn tent_erm(counts: &[u64]) -> Result<usize> {
    let mut best: Option<(usize, u64)> = None;
    for (i, &c) in counts.iter().enumerate() {
        if best.is_none_or(|(_, b)| c > b) {
            best = Some((i, c));
        }
    }
    best.map(|(i, _)| i).ok_or_else(|| Error::invalid("counts", "need at least one center"))
}

/// Box vertex `R·b̂` with `b̂_j` the sign of the summed outcomes on
/// coordinate `j`; unseen or balanced coordinates decode to `+1`.
pub fn coin_majority_decoder(samples: &[CoinSample], d: usize, radius: f64) -> Result<Vec<f64>> {
    match EmpiricalSummary::coin(samples, d)?.statistic {
        Statistic::Coin { signed, .. } => Ok(majority_from_counts(&signed, radius)),
        _ => unreachable!(),
    }
}

pub fn majority_from_counts(signed: &[i64], radius: f64) -> Vec<f64> {
    signed.iter().map(|&s| if s < 0 { -radius } else { radius }).collect()
}

/// Step size schedule for [`projected_sgd`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepRule {
    /// `η_t = 1/(μt)`
    StronglyConvex { mu: f64 },
    /// `η_t = R/(G√t)`
    Lipschitz { radius: f64, lipschitz: f64 },
}

impl StepRule {
    fn step(&self, t: u64) -> f64 {
        let t = t as f64;
        match *self {
            StepRule::StronglyConvex { mu } => 1.0 / (mu * t),
            StepRule::Lipschitz { radius, lipschitz } => radius / (lipschitz * t.sqrt()),
        }
    }
}

fn project(feasible: &Feasible, x: &mut [f64]) -> Result<()> {
    match feasible {
        Feasible::AllSpace => {}
        Feasible::ContinuousBox { radius } => x.iter_mut().for_each(|v| *v = v.clamp(-radius, *radius)),
        Feasible::L2Ball { radius } => {
            let n = norm2(x);
            if n > *radius {
                x.iter_mut().for_each(|v| *v *= radius / n);
            }
        }
        _ => return Err(Error::Unsupported("projected SGD needs a convex set".into())),
    }
    Ok(())
}

/// Projected SGD from the origin with `m` fresh samples. With
/// `suffix_average` the result is the mean of the last `⌈m/2⌉` iterates,
/// otherwise the last iterate.
pub fn projected_sgd<F: LossFamily, R: Rng + ?Sized>(
    family: &F,
    feasible: &Feasible,
    m: u64,
    rule: StepRule,
    suffix_average: bool,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let d = family.dim();
    let mut x = vec![0.0; d];
    project(feasible, &mut x)?;
    let mut avg = vec![0.0; d];
    let start = m / 2 + 1;
    for t in 1..=m {
        let z = family.sample(rng);
        let g = family
            .gradient(&x, &z)
            .ok_or_else(|| Error::Unsupported("SGD needs per-sample gradients".into()))?;
        let eta = rule.step(t);
        for (xi, gi) in x.iter_mut().zip(&g) {
            *xi -= eta * gi;
        }
        project(feasible, &mut x)?;
        if t >= start {
            for (a, xi) in avg.iter_mut().zip(&x) {
                *a += xi;
            }
        }
    }
    if suffix_average && m > 0 {
        let n = (m - start + 1) as f64;
        Ok(avg.into_iter().map(|a| a / n).collect())
    } else {
        Ok(x)
    }
}

/// One solver output row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverRow {
    pub solver: String,
    pub family: String,
    pub m: u64,
    pub x_hat: Vec<f64>,
    pub empirical_value: f64,
    pub excess: f64,
}

/// Writes `solver,family,m,x1..xd,empirical_value,excess`.
pub fn write_solver_rows<W: Write>(out: W, rows: &[SolverRow]) -> Result<()> {
    let d = rows.first().map_or(0, |r| r.x_hat.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["solver".to_string(), "family".into(), "m".into()];
    header.extend((1..=d).map(|i| format!("x{i}")));
    header.extend(["empirical_value".to_string(), "excess".into()]);
    w.write_record(&header).map_err(|e| Error::Trace(e.to_string()))?;
    for r in rows {
        ensure_dim(d, r.x_hat.len())?;
        let mut rec = vec![r.solver.clone(), r.family.clone(), r.m.to_string()];
        rec.extend(r.x_hat.iter().map(|v| v.to_string()));
        rec.extend([r.empirical_value.to_string(), r.excess.to_string()]);
        w.write_record(&rec).map_err(|e| Error::Trace(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Default per-block candidate budget for [`erm_block_gadget`].
pub const BLOCK_WINDOW_BUDGET: u64 = DEFAULT_BUDGET;
