use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_positive, check_signs, Feasible, LossFamily, Minimizer};
use crate::error::{Error, Result};

/// Which biased-coin experiment generates the samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum CoinMode {
    /// Hidden `b ∈ {±1}^d`; a sample picks a uniform coordinate and flips its coin.
    Dimension { b: Vec<i8> },
    /// Hidden `b ∈ {±1}`; every sample reads coordinate 1.
    Confidence { b: i8 },
}

/// A sample `(j, k)`: coordinate index (0-based) and coin outcome `±1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoinSample {
    pub coord: usize,
    pub sign: i8,
}

/// Linear losses `f(x; (j,k)) = −k·x_j` on the `ℓ∞` box of radius `R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoinLinearFamily {
    pub d: usize,
    #[serde(rename = "R")]
    pub radius: f64,
    pub rho: f64,
    #[serde(flatten)]
    pub mode: CoinMode,
}

impl CoinLinearFamily {
    pub fn dimension(d: usize, radius: f64, rho: f64, b: Vec<i8>) -> Result<Self> {
        let f = CoinLinearFamily {
            d,
            radius,
            rho,
            mode: CoinMode::Dimension { b },
        };
        f.validate()?;
        Ok(f)
    }

    pub fn confidence(d: usize, radius: f64, rho: f64, b: i8) -> Result<Self> {
        let f = CoinLinearFamily {
            d,
            radius,
            rho,
            mode: CoinMode::Confidence { b },
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::invalid("d", "must be at least 1"));
        }
        check_positive("R", self.radius)?;
        if !(self.rho > 0.0 && self.rho <= 0.5) {
            return Err(Error::invalid("rho", "must lie in (0, 1/2]"));
        }
        match &self.mode {
            CoinMode::Dimension { b } => {
                crate::error::ensure_dim(self.d, b.len())?;
                check_signs("b", b)
            }
            CoinMode::Confidence { b } => check_signs("b", &[*b]),
        }
    }

    /// `P[(j, k)]` under the family's distribution.
    pub fn probability(&self, coord: usize, sign: i8) -> f64 {
        if coord >= self.d || !(sign == 1 || sign == -1) {
            return 0.0;
        }
        let k = sign as f64;
        match &self.mode {
            CoinMode::Dimension { b } => (1.0 + self.rho * k * b[coord] as f64) / (2.0 * self.d as f64),
            CoinMode::Confidence { b } if coord == 0 => (1.0 + self.rho * k * *b as f64) / 2.0,
            CoinMode::Confidence { .. } => 0.0,
        }
    }

    /// The hidden sign vector as seen by the population objective
    /// (zero beyond coordinate 1 in confidence mode).
    fn signal(&self) -> Vec<f64> {
        match &self.mode {
            CoinMode::Dimension { b } => b.iter().map(|&v| self.rho * v as f64 / self.d as f64).collect(),
            CoinMode::Confidence { b } => {
                let mut s = vec![0.0; self.d];
                s[0] = self.rho * *b as f64;
                s
            }
        }
    }

    fn vertex(&self, scale: f64) -> Vec<f64> {
        match &self.mode {
            CoinMode::Dimension { b } => b.iter().map(|&v| scale * v as f64).collect(),
            CoinMode::Confidence { b } => {
                let mut x = vec![0.0; self.d];
                x[0] = scale * *b as f64;
                x
            }
        }
    }
}

impl LossFamily for CoinLinearFamily {
    type Sample = CoinSample;

    fn dim(&self) -> usize {
        self.d
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CoinSample {
        let (coord, bj) = match &self.mode {
            CoinMode::Dimension { b } => {
                let j = rng.random_range(0..self.d);
                (j, b[j])
            }
            CoinMode::Confidence { b } => (0, *b),
        };
        let p_plus = (1.0 + self.rho * bj as f64) / 2.0;
        let sign = if rng.random::<f64>() < p_plus { 1 } else { -1 };
        CoinSample { coord, sign }
    }

    fn eval(&self, x: &[f64], z: &CoinSample) -> f64 {
        -(z.sign as f64) * x[z.coord]
    }

    fn objective(&self, x: &[f64]) -> f64 {
        -super::dot(&self.signal(), x)
    }

    fn minimize(&self, feasible: &Feasible) -> Result<Minimizer> {
        let scale = match feasible {
            Feasible::ContinuousBox { radius } => *radius,
            Feasible::IntegerBox { floor_r: Some(f) } => *f as f64,
            Feasible::L2Ball { radius } => {
                let point = match &self.mode {
                    CoinMode::Dimension { .. } => self.vertex(radius / (self.d as f64).sqrt()),
                    CoinMode::Confidence { .. } => self.vertex(*radius),
                };
                let value = self.objective(&point);
                return Ok(Minimizer { point, value });
            }
            _ => return Err(Error::Unsupported("linear coin losses need a bounded feasible set".into())),
        };
        let point = self.vertex(scale);
        let value = self.objective(&point);
        Ok(Minimizer { point, value })
    }

    fn gradient(&self, x: &[f64], z: &CoinSample) -> Option<Vec<f64>> {
        let mut g = vec![0.0; x.len()];
        g[z.coord] = -(z.sign as f64);
        Some(g)
    }

    fn hessian(&self, x: &[f64], _z: &CoinSample) -> Option<Vec<f64>> {
        Some(vec![0.0; x.len() * x.len()])
    }

    fn is_anchored(&self) -> bool {
        true
    }
}
