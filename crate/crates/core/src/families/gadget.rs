use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_positive, check_signs, dot, gaussian_vector, Feasible, LossFamily, Minimizer};
use crate::error::{Error, Result};

/// Population block objective `φ_b(x, y) = μ(x − τy)² + (L/4)(y − ½)² − γ·b·x/τ`.
pub fn phi(b: i8, x: f64, y: f64, mu: f64, l: f64, tau: u64, gamma: f64) -> f64 {
    let t = tau as f64;
    block_quadratic(x, y, mu, l, tau) - gamma * b as f64 * x / t
}

/// The coupling part `μ(x − τy)² + (L/4)(y − ½)²` shared by every block.
pub fn block_quadratic(x: f64, y: f64, mu: f64, l: f64, tau: u64) -> f64 {
    let p = x - tau as f64 * y;
    mu * p * p + 0.25 * l * (y - 0.5) * (y - 0.5)
}

/// `+1` exactly at `(τ, 1)`, `−1` everywhere else.
pub fn block_decoder(x: f64, y: f64, tau: u64) -> i8 {
    if x == tau as f64 && y == 1.0 {
        1
    } else {
        -1
    }
}

/// Unconstrained minimizer of `block_quadratic(x, y) − z1·x − z2·y`.
pub fn block_continuous_minimizer(z1: f64, z2: f64, mu: f64, l: f64, tau: u64) -> (f64, f64) {
    // stationarity: 2μ(x − τy) = z1 and (L/2)(y − ½) = z2 + τ·z1
    let y = 0.5 + 2.0 * (z2 + tau as f64 * z1) / l;
    let x = tau as f64 * y + z1 / (2.0 * mu);
    (x, y)
}

/// `d/2` two-dimensional blocks, each hiding one sign in a coupled
/// strongly convex quadratic, plus `(μ/2)x_d²` when `d` is odd.
///
/// Samples are `Z ~ N(θ_b, σ²I)` with `θ_b` supported on the first
/// coordinate of each block, entering the loss as `−⟨Z, x⟩`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockGadgetFamily {
    pub d: usize,
    pub mu: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub tau: u64,
    pub gamma: f64,
    pub b: Vec<i8>,
    pub sigma: f64,
}

impl BlockGadgetFamily {
    pub fn new(d: usize, mu: f64, l: f64, tau: u64, gamma: f64, b: Vec<i8>, sigma: f64) -> Result<Self> {
        let f = BlockGadgetFamily {
            d,
            mu,
            l,
            tau,
            gamma,
            b,
            sigma,
        };
        f.validate()?;
        Ok(f)
    }

    /// `τ = max(1, ⌊min(√κ, ⌊R⌋)/4⌋)`; `None` stands for an unbounded box.
    pub fn tau_for(kappa: f64, floor_r: Option<u64>) -> u64 {
        let cap = match floor_r {
            Some(f) => kappa.sqrt().min(f as f64),
            None => kappa.sqrt(),
        };
        ((cap / 4.0).floor() as u64).max(1)
    }

    /// The hard instance tuned to accuracy `epsilon`: `γ = ε/(c1·⌊d/2⌋)` and
    /// `τ` from [`tau_for`](Self::tau_for). All hidden signs start at `+1`.
    pub fn for_epsilon(d: usize, mu: f64, l: f64, floor_r: Option<u64>, epsilon: f64, c1: f64, sigma: f64) -> Result<Self> {
        check_positive("epsilon", epsilon)?;
        check_positive("c1", c1)?;
        if d < 2 {
            return Err(Error::invalid("d", "need at least one block"));
        }
        let blocks = d / 2;
        let tau = Self::tau_for(l / mu, floor_r);
        Self::new(d, mu, l, tau, epsilon / (c1 * blocks as f64), vec![1; blocks], sigma)
    }

    pub fn with_signs(&self, b: Vec<i8>) -> Result<Self> {
        let mut f = self.clone();
        f.b = b;
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::invalid("d", "must be at least 2"));
        }
        check_positive("mu", self.mu)?;
        check_positive("L", self.l)?;
        let kappa = self.l / self.mu;
        if kappa < 64.0 {
            return Err(Error::invalid("L", format!("condition number {kappa} is below 64")));
        }
        if self.tau == 0 || (self.tau * self.tau) as f64 > kappa / 16.0 {
            return Err(Error::invalid("tau", "need a positive integer with tau^2 <= kappa/16"));
        }
        check_positive("gamma", self.gamma)?;
        if self.gamma > self.mu / 24.0 {
            return Err(Error::invalid("gamma", "must be at most mu/24"));
        }
        crate::error::ensure_dim(self.blocks(), self.b.len())?;
        check_signs("b", &self.b)?;
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::invalid("sigma", "must be nonnegative and finite"));
        }
        Ok(())
    }

    pub fn blocks(&self) -> usize {
        self.d / 2
    }

    pub fn kappa(&self) -> f64 {
        self.l / self.mu
    }

    pub fn theta(&self) -> Vec<f64> {
        let mut t = vec![0.0; self.d];
        for (j, &bj) in self.b.iter().enumerate() {
            t[2 * j] = self.gamma * bj as f64 / self.tau as f64;
        }
        t
    }

    /// Row-major Hessian of one block: `[[2μ, −2μτ], [−2μτ, 2μτ² + L/2]]`.
    pub fn block_hessian(&self) -> [f64; 4] {
        let t = self.tau as f64;
        let off = -2.0 * self.mu * t;
        [2.0 * self.mu, off, off, 2.0 * self.mu * t * t + 0.5 * self.l]
    }

    /// Determinant and trace of [`block_hessian`](Self::block_hessian).
    pub fn block_hessian_det_trace(&self) -> (f64, f64) {
        let h = self.block_hessian();
        (h[0] * h[3] - h[1] * h[2], h[0] + h[3])
    }

    /// The sign vector read off `x` block by block.
    pub fn decode(&self, x: &[f64]) -> Vec<i8> {
        (0..self.blocks()).map(|j| block_decoder(x[2 * j], x[2 * j + 1], self.tau)).collect()
    }

    /// Deterministic part of the loss (everything except `−⟨Z, x⟩`).
    pub fn deterministic(&self, x: &[f64]) -> f64 {
        let mut v: f64 = (0..self.blocks())
            .map(|j| block_quadratic(x[2 * j], x[2 * j + 1], self.mu, self.l, self.tau))
            .sum();
        if self.d % 2 == 1 {
            v += 0.5 * self.mu * x[self.d - 1] * x[self.d - 1];
        }
        v
    }

    /// Empirical objective given a sample mean.
    pub fn objective_with_mean(&self, x: &[f64], zbar: &[f64]) -> f64 {
        self.deterministic(x) - dot(zbar, x)
    }

    pub fn sample_mean<R: Rng + ?Sized>(&self, m: u64, rng: &mut R) -> Vec<f64> {
        gaussian_vector(rng, &self.theta(), self.sigma / (m as f64).sqrt())
    }

    /// Enumerates `{−4τ..4τ}×{−4..4}` for both signs and reports every point
    /// breaking the separation pattern: unique minimizer at the sign's
    /// vertex, gap exactly `γ` at the other vertex, at least `3γ` elsewhere.
    ///
    /// Gaps are formed as (quadratic difference) + (linear difference); the
    /// quadratic part is dyadic at integer points, so the `γ` check is exact.
    pub fn window_violations(&self) -> Vec<String> {
        let (mu, l, tau, gamma) = (self.mu, self.l, self.tau, self.gamma);
        let t = tau as i64;
        let mut out = Vec::new();
        for b in [1i8, -1] {
            let (best, other) = if b > 0 { ((t, 1), (0, 0)) } else { ((0, 0), (t, 1)) };
            let gap = |p: (i64, i64)| {
                let dq = block_quadratic(p.0 as f64, p.1 as f64, mu, l, tau)
                    - block_quadratic(best.0 as f64, best.1 as f64, mu, l, tau);
                dq - gamma * b as f64 * (p.0 - best.0) as f64 / tau as f64
            };
            if gap(other) != gamma {
                out.push(format!("b={b}: gap {} at {other:?}, expected {gamma}", gap(other)));
            }
            for x in -4 * t..=4 * t {
                for y in -4..=4 {
                    let p = (x, y);
                    if p != best && p != other && gap(p) < 3.0 * gamma {
                        out.push(format!("b={b}: gap {} at {p:?}", gap(p)));
                    }
                }
            }
        }
        out
    }
}

impl LossFamily for BlockGadgetFamily {
    type Sample = Vec<f64>;

    fn dim(&self) -> usize {
        self.d
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        gaussian_vector(rng, &self.theta(), self.sigma)
    }

    fn eval(&self, x: &[f64], z: &Vec<f64>) -> f64 {
        self.objective_with_mean(x, z)
    }

    fn objective(&self, x: &[f64]) -> f64 {
        self.objective_with_mean(x, &self.theta())
    }

    fn minimize(&self, feasible: &Feasible) -> Result<Minimizer> {
        let mut point = vec![0.0; self.d];
        match feasible {
            Feasible::IntegerBox { floor_r } => {
                if floor_r.is_some_and(|f| f < self.tau) {
                    return Err(Error::Unsupported("the integer box must contain (tau, 1)".into()));
                }
                for (j, &bj) in self.b.iter().enumerate() {
                    if bj == 1 {
                        point[2 * j] = self.tau as f64;
                        point[2 * j + 1] = 1.0;
                    }
                }
            }
            Feasible::AllSpace => {
                let theta = self.theta();
                for j in 0..self.blocks() {
                    let (x, y) = block_continuous_minimizer(theta[2 * j], 0.0, self.mu, self.l, self.tau);
                    point[2 * j] = x;
                    point[2 * j + 1] = y;
                }
            }
            _ => {
                return Err(Error::Unsupported(
                    "block gadget minimizers are available over integer boxes and all of R^d".into(),
                ))
            }
        }
        let value = self.objective(&point);
        Ok(Minimizer { point, value })
    }

    fn gradient(&self, x: &[f64], z: &Vec<f64>) -> Option<Vec<f64>> {
        let t = self.tau as f64;
        let mut g: Vec<f64> = z.iter().map(|v| -v).collect();
        for j in 0..self.blocks() {
            let p = x[2 * j] - t * x[2 * j + 1];
            g[2 * j] += 2.0 * self.mu * p;
            g[2 * j + 1] += -2.0 * self.mu * t * p + 0.5 * self.l * (x[2 * j + 1] - 0.5);
        }
        if self.d % 2 == 1 {
            g[self.d - 1] += self.mu * x[self.d - 1];
        }
        Some(g)
    }

    fn hessian(&self, _x: &[f64], _z: &Vec<f64>) -> Option<Vec<f64>> {
        let d = self.d;
        let hb = self.block_hessian();
        let mut h = vec![0.0; d * d];
        for j in 0..self.blocks() {
            let (a, b) = (2 * j, 2 * j + 1);
            h[a * d + a] = hb[0];
            h[a * d + b] = hb[1];
            h[b * d + a] = hb[2];
            h[b * d + b] = hb[3];
        }
        if d % 2 == 1 {
            h[(d - 1) * d + d - 1] = self.mu;
        }
        Some(h)
    }
}
