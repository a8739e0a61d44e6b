//! The hard-instance loss families.
//!
//! Each family is a distribution over loss functions `f(·; z)` together with
//! a closed-form population objective `F(x) = E f(x; z)` and, where the
//! feasible set allows it, a closed-form population minimizer. Excess risk is
//! always computed from these closed forms, never from Monte Carlo averages.

mod coin;
mod gadget;
mod logistic;
mod quad;
pub mod regularity;
mod tent;
pub mod trace;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::lattice::Norm;

pub use coin::{CoinLinearFamily, CoinMode, CoinSample};
pub use gadget::{block_continuous_minimizer, block_decoder, block_quadratic, phi, BlockGadgetFamily};
pub use logistic::{LabeledSample, LogisticFamily};
pub use quad::{QuadGaussianFamily, SmallKappaQuadFamily};
pub use regularity::{verify_regularity, RegularityCheck, RegularityReport};
pub use tent::{TentFamily, TentSample};

/// A distribution over loss functions on `R^d`.
pub trait LossFamily: Send + Sync {
    type Sample: Clone + Send + Sync + std::fmt::Debug;

    fn dim(&self) -> usize;

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Sample;

    /// `f(x; z)`, assuming `x.len() == dim()`.
    fn eval(&self, x: &[f64], z: &Self::Sample) -> f64;

    /// `F(x)`, assuming `x.len() == dim()`.
    fn objective(&self, x: &[f64]) -> f64;

    /// Exact population minimizer over `feasible`.
    fn minimize(&self, feasible: &Feasible) -> Result<Minimizer>;

    /// Gradient of `f(·; z)` at `x`, for differentiable families.
    fn gradient(&self, _x: &[f64], _z: &Self::Sample) -> Option<Vec<f64>> {
        None
    }

    /// Row-major Hessian of `f(·; z)` at `x`, for twice-differentiable families.
    fn hessian(&self, _x: &[f64], _z: &Self::Sample) -> Option<Vec<f64>> {
        None
    }

    /// Whether `f(0; z) = 0` for every `z`.
    fn is_anchored(&self) -> bool {
        false
    }

    fn loss(&self, x: &[f64], z: &Self::Sample) -> Result<f64> {
        ensure_dim(self.dim(), x.len())?;
        Ok(self.eval(x, z))
    }

    fn population_objective(&self, x: &[f64]) -> Result<f64> {
        ensure_dim(self.dim(), x.len())?;
        Ok(self.objective(x))
    }

    fn population_minimizer(&self, feasible: &Feasible) -> Result<Minimizer> {
        feasible.check_dim(self.dim())?;
        match feasible {
            Feasible::Explicit(points) => brute_force_minimizer(points, |x| self.objective(x)),
            _ => self.minimize(feasible),
        }
    }

    /// `F(x) − min_feasible F`.
    fn excess(&self, feasible: &Feasible, x: &[f64]) -> Result<f64> {
        ensure_dim(self.dim(), x.len())?;
        if !feasible.contains(x) {
            return Err(Error::Infeasible);
        }
        let best = self.population_minimizer(feasible)?;
        Ok(self.objective(x) - best.value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minimizer {
    pub point: Vec<f64>,
    pub value: f64,
}

const FEASIBILITY_TOL: f64 = 1e-12;

/// Feasible sets the population minimizers understand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Feasible {
    AllSpace,
    /// `[−R, R]^d`
    ContinuousBox { radius: f64 },
    /// `{−⌊R⌋..⌊R⌋}^d`; `None` means all of `Z^d`.
    IntegerBox { floor_r: Option<u64> },
    /// `{x : ‖x‖₂ ≤ R}`
    L2Ball { radius: f64 },
    Explicit(Vec<Vec<f64>>),
}

impl Feasible {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Feasible::AllSpace => x.iter().all(|v| v.is_finite()),
            Feasible::ContinuousBox { radius } => x.iter().all(|v| v.abs() <= radius + FEASIBILITY_TOL),
            Feasible::IntegerBox { floor_r } => x.iter().all(|&v| {
                v.fract() == 0.0 && floor_r.is_none_or(|b| v.abs() <= b as f64)
            }),
            Feasible::L2Ball { radius } => norm2(x) <= radius + FEASIBILITY_TOL,
            Feasible::Explicit(points) => points.iter().any(|p| p.as_slice() == x),
        }
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        match self {
            Feasible::Explicit(points) => {
                if points.is_empty() {
                    return Err(Error::EmptyFeasibleSet);
                }
                points.iter().try_for_each(|p| ensure_dim(d, p.len()))
            }
            Feasible::ContinuousBox { radius } | Feasible::L2Ball { radius } if !(*radius >= 0.0) => {
                Err(Error::invalid("R", "feasible radius must be nonnegative"))
            }
            _ => Ok(()),
        }
    }

    /// The `ℓ∞` bound of integer boxes, or an error for other set kinds.
    pub fn integer_box_bound(&self) -> Result<Option<u64>> {
        match self {
            Feasible::IntegerBox { floor_r } => Ok(*floor_r),
            _ => Err(Error::Unsupported("expected an integer box".into())),
        }
    }
}

/// Lexicographically smallest minimizer of `objective` over `points`.
pub(crate) fn brute_force_minimizer(points: &[Vec<f64>], objective: impl Fn(&[f64]) -> f64) -> Result<Minimizer> {
    let mut best: Option<(usize, f64)> = None;
    for (i, p) in points.iter().enumerate() {
        let v = objective(p);
        best = match best {
            None => Some((i, v)),
            Some((j, bv)) => {
                if v < bv || (v == bv && lex_less(p, &points[j])) {
                    Some((i, v))
                } else {
                    Some((j, bv))
                }
            }
        };
    }
    let (i, value) = best.ok_or(Error::EmptyFeasibleSet)?;
    Ok(Minimizer {
        point: points[i].clone(),
        value,
    })
}

pub(crate) fn lex_less(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).find(|(x, y)| x != y).is_some_and(|(x, y)| x < y)
}

/// Integer minimizer of `(μ/2)x² − c·x` over `[−bound, bound]`, ties to the smaller `x`.
pub fn integer_quad_argmin(c: f64, mu: f64, bound: Option<u64>) -> i64 {
    let t = c / mu;
    let clamp = |v: f64| -> i64 {
        let v = match bound {
            Some(b) => v.clamp(-(b as f64), b as f64),
            None => v,
        };
        v as i64
    };
    let lo = clamp(t.floor());
    let hi = clamp(t.ceil());
    let value = |x: i64| {
        let x = x as f64;
        0.5 * mu * x * x - c * x
    };
    if value(hi) < value(lo) {
        hi
    } else {
        lo
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2_sq(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    norm2_sq(a).sqrt()
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub(crate) fn norm_of(norm: Norm, a: &[f64]) -> f64 {
    match norm {
        Norm::L2 => norm2(a),
        Norm::Linf => a.iter().fold(0.0, |m, v| m.max(v.abs())),
    }
}

pub(crate) fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, mean: &[f64], sigma: f64) -> Vec<f64> {
    mean.iter()
        .map(|&m| m + sigma * rng.sample::<f64, _>(rand_distr::StandardNormal))
        .collect()
}

pub(crate) fn check_signs(name: &'static str, b: &[i8]) -> Result<()> {
    if b.iter().all(|&v| v == 1 || v == -1) {
        Ok(())
    } else {
        Err(Error::invalid(name, "entries must be +1 or -1"))
    }
}

pub(crate) fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be positive and finite, got {v}")))
    }
}

/// Any of the six families, tagged for JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum AnyFamily {
    CoinLinear(CoinLinearFamily),
    Tent(TentFamily),
    QuadGaussian(QuadGaussianFamily),
    BlockGadget(BlockGadgetFamily),
    SmallKappaQuad(SmallKappaQuadFamily),
    Logistic(LogisticFamily),
}

impl AnyFamily {
    pub fn tag(&self) -> &'static str {
        match self {
            AnyFamily::CoinLinear(_) => "coin_linear",
            AnyFamily::Tent(_) => "tent",
            AnyFamily::QuadGaussian(_) => "quad_gaussian",
            AnyFamily::BlockGadget(_) => "block_gadget",
            AnyFamily::SmallKappaQuad(_) => "small_kappa_quad",
            AnyFamily::Logistic(_) => "logistic",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AnyFamily::CoinLinear(f) => f.validate(),
            AnyFamily::Tent(f) => f.validate(),
            AnyFamily::QuadGaussian(f) => f.validate(),
            AnyFamily::BlockGadget(f) => f.validate(),
            AnyFamily::SmallKappaQuad(f) => f.validate(),
            AnyFamily::Logistic(f) => f.validate(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            AnyFamily::CoinLinear(f) => f.dim(),
            AnyFamily::Tent(f) => f.dim(),
            AnyFamily::QuadGaussian(f) => f.dim(),
            AnyFamily::BlockGadget(f) => f.dim(),
            AnyFamily::SmallKappaQuad(f) => f.dim(),
            AnyFamily::Logistic(f) => f.dim(),
        }
    }
}

/// A family spec as stored on disk: the tagged family plus the seed it was drawn with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyDocument {
    #[serde(flatten)]
    pub family: AnyFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl FamilyDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: FamilyDocument = serde_json::from_str(text)?;
        doc.family.validate()?;
        Ok(doc)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
