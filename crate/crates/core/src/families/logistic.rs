use std::f64::consts::FRAC_PI_2;
use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{check_positive, dot, norm2, norm2_sq, Feasible, LossFamily, Minimizer};
use crate::error::{Error, Result};

/// A labeled example `(a, b)` with `‖a‖₂ ≤ M` and `b = ±1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    pub label: i8,
}

/// Ridge-regularized logistic loss `(μ/2)‖x‖² + ln(1 + exp(−b⟨a, x⟩))`.
///
/// Features are uniform on the sphere of radius `M`; labels are
/// `sign(a₁)` flipped with probability `η`. The population objective is
/// evaluated by Gauss–Legendre quadrature over the sphere, reduced to two
/// angles by rotational symmetry about `e₁`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFamily {
    pub d: usize,
    pub mu: f64,
    #[serde(rename = "M")]
    pub m_bound: f64,
    pub eta: f64,
}

/// `ln(1 + e^t)` without overflow.
pub fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// `1/(1 + e^{−t})`.
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

const NODES: usize = 96;

/// Nodes and weights on `(lo, hi)`.
fn rule(lo: f64, hi: f64) -> Vec<(f64, f64)> {
    static BASE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    let base = BASE.get_or_init(|| {
        GaussLegendre::new(NonZeroUsize::new(NODES).unwrap())
            .into_node_weight_pairs()
            .into_vec()
    });
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    base.iter().map(|&(x, w)| (mid + half * x, half * w)).collect()
}

impl LogisticFamily {
    pub fn new(d: usize, mu: f64, m_bound: f64, eta: f64) -> Result<Self> {
        let f = LogisticFamily { d, mu, m_bound, eta };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::invalid("d", "must be at least 1"));
        }
        check_positive("mu", self.mu)?;
        check_positive("M", self.m_bound)?;
        if !(0.0..0.5).contains(&self.eta) {
            return Err(Error::invalid("eta", "must lie in [0, 1/2)"));
        }
        Ok(())
    }

    /// Smoothness constant `μ + M²/4`.
    pub fn smoothness(&self) -> f64 {
        self.mu + self.m_bound * self.m_bound / 4.0
    }

    /// `E[ψ(a₁, s)]` for `a = M(t, √(1−t²)·v)` uniform on the sphere, where
    /// `s` is the first coordinate of `v`. Only the half `t > 0` is
    /// integrated; callers fold in the antipodal symmetry themselves.
    fn sphere_average(&self, psi: impl Fn(f64, f64) -> f64) -> f64 {
        match self.d {
            1 => psi(1.0, 0.0),
            d => {
                // t = sin α has density ∝ cos^{d-2} α on α ∈ (0, π/2)
                let outer = rule(0.0, FRAC_PI_2);
                let inner_rule = if d > 2 { rule(-FRAC_PI_2, FRAC_PI_2) } else { Vec::new() };
                let (mut num, mut den) = (0.0, 0.0);
                for &(alpha, wa) in &outer {
                    let (t, c) = alpha.sin_cos();
                    let wt = wa * c.powi(d as i32 - 2);
                    let inner = if d == 2 {
                        0.5 * (psi(t, 1.0) + psi(t, -1.0))
                    } else {
                        // s = sin β has density ∝ cos^{d-3} β on β ∈ (−π/2, π/2)
                        let (mut n2, mut d2) = (0.0, 0.0);
                        for &(beta, wb) in &inner_rule {
                            let (s, cb) = beta.sin_cos();
                            let w = wb * cb.powi(d as i32 - 3);
                            n2 += w * psi(t, s);
                            d2 += w;
                        }
                        n2 / d2
                    };
                    num += wt * inner;
                    den += wt;
                }
                num / den
            }
        }
    }

    /// `E[ln(1 + exp(−b⟨a, x⟩))]`.
    pub fn expected_logistic(&self, x: &[f64]) -> f64 {
        let x1 = x[0];
        let rest = norm2(&x[1..]);
        let m = self.m_bound;
        let eta = self.eta;
        // a and −a flip the label and the margin together, so restrict to a₁ > 0, b = +1 before noise
        self.sphere_average(|t, s| {
            let margin = m * (t * x1 + (1.0 - t * t).max(0.0).sqrt() * s * rest);
            (1.0 - eta) * softplus(-margin) + eta * softplus(margin)
        })
    }

    /// Population objective restricted to the ray `x = t·e₁`, and its derivative.
    fn along_axis(&self, t: f64) -> (f64, f64) {
        let m = self.m_bound;
        let eta = self.eta;
        let value = self.sphere_average(|a1, _| {
            let u = m * a1 * t;
            (1.0 - eta) * softplus(-u) + eta * softplus(u)
        });
        let slope = self.sphere_average(|a1, _| {
            let u = m * a1 * t;
            m * a1 * (-(1.0 - eta) * sigmoid(-u) + eta * sigmoid(u))
        });
        (0.5 * self.mu * t * t + value, self.mu * t + slope)
    }

    /// Minimizer of the convex scalar function `t ↦ F(t·e₁)` on `[lo, hi]`.
    fn axis_argmin(&self, lo: f64, hi: f64) -> f64 {
        if self.along_axis(lo).1 >= 0.0 {
            return lo;
        }
        if self.along_axis(hi).1 <= 0.0 {
            return hi;
        }
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if self.along_axis(mid).1 < 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    }

    fn unconstrained_bracket(&self) -> f64 {
        // |slope of the logistic part| ≤ M, so the root satisfies |t| ≤ M/μ
        self.m_bound / self.mu + 1.0
    }
}

impl LossFamily for LogisticFamily {
    type Sample = LabeledSample;

    fn dim(&self) -> usize {
        self.d
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> LabeledSample {
        let g: Vec<f64> = (0..self.d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = norm2(&g);
        let features: Vec<f64> = g.iter().map(|v| self.m_bound * v / n).collect();
        let clean: i8 = if features[0] >= 0.0 { 1 } else { -1 };
        let label = if rng.random::<f64>() < self.eta { -clean } else { clean };
        LabeledSample { features, label }
    }

    fn eval(&self, x: &[f64], z: &LabeledSample) -> f64 {
        0.5 * self.mu * norm2_sq(x) + softplus(-(z.label as f64) * dot(&z.features, x))
    }

    fn objective(&self, x: &[f64]) -> f64 {
        0.5 * self.mu * norm2_sq(x) + self.expected_logistic(x)
    }

    fn minimize(&self, feasible: &Feasible) -> Result<Minimizer> {
        // F is convex and invariant under rotations fixing e₁, so along every
        // slice x₁ = const it is minimized at x_{2..d} = 0 and grows with ‖x_{2..d}‖
        let t = match feasible {
            Feasible::AllSpace => {
                let b = self.unconstrained_bracket();
                self.axis_argmin(-b, b)
            }
            Feasible::ContinuousBox { radius } | Feasible::L2Ball { radius } => self.axis_argmin(-radius, *radius),
            Feasible::IntegerBox { floor_r } => {
                let b = self.unconstrained_bracket();
                let c = self.axis_argmin(-b, b);
                // a convex scalar function attains its integer minimum next to its real one
                let clamp = |v: f64| floor_r.map_or(v, |f| v.clamp(-(f as f64), f as f64));
                let (lo, hi) = (clamp(c.floor()), clamp(c.ceil()));
                if self.along_axis(hi).0 < self.along_axis(lo).0 {
                    hi
                } else {
                    lo
                }
            }
            Feasible::Explicit(_) => unreachable!("explicit sets are handled by population_minimizer"),
        };
        let mut point = vec![0.0; self.d];
        point[0] = t;
        let value = self.objective(&point);
        Ok(Minimizer { point, value })
    }

    fn gradient(&self, x: &[f64], z: &LabeledSample) -> Option<Vec<f64>> {
        let b = z.label as f64;
        let s = sigmoid(-b * dot(&z.features, x));
        Some(x.iter().zip(&z.features).map(|(xi, ai)| self.mu * xi - b * s * ai).collect())
    }

    fn hessian(&self, x: &[f64], z: &LabeledSample) -> Option<Vec<f64>> {
        let d = self.d;
        let u = dot(&z.features, x);
        let w = sigmoid(u) * sigmoid(-u);
        let mut h = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                h[i * d + j] = w * z.features[i] * z.features[j];
            }
            h[i * d + i] += self.mu;
        }
        Some(h)
    }
}
