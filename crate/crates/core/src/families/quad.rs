use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_positive, check_signs, dot, gaussian_vector, integer_quad_argmin, norm2_sq, Feasible, LossFamily, Minimizer};
use crate::error::{Error, Result};

/// `f(x; Z) = (μ/2)‖x‖² − ⟨Z, x⟩` with `Z ~ N(θ, σ²I)`.
///
/// The centered increment `f(x;Z) − f(y;Z) − F(x) + F(y) = −⟨Z − θ, x − y⟩`
/// is exactly Gaussian with variance `σ²‖x − y‖²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadGaussianFamily {
    pub mu: f64,
    pub sigma: f64,
    pub theta: Vec<f64>,
}

impl QuadGaussianFamily {
    pub fn new(mu: f64, sigma: f64, theta: Vec<f64>) -> Result<Self> {
        let f = QuadGaussianFamily { mu, sigma, theta };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("mu", self.mu)?;
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::invalid("sigma", "must be nonnegative and finite"));
        }
        if self.theta.is_empty() {
            return Err(Error::invalid("theta", "dimension must be at least 1"));
        }
        if self.theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("theta", "entries must be finite"));
        }
        Ok(())
    }

    /// Objective of the same family with mean `zbar` in place of `θ`; this is
    /// the empirical objective `F_S` when `zbar` is the sample mean.
    pub fn objective_with_mean(&self, x: &[f64], zbar: &[f64]) -> f64 {
        0.5 * self.mu * norm2_sq(x) - dot(zbar, x)
    }

    /// Draws the sample mean of `m` samples directly: `Z̄ ~ N(θ, σ²/m·I)`.
    pub fn sample_mean<R: Rng + ?Sized>(&self, m: u64, rng: &mut R) -> Vec<f64> {
        gaussian_vector(rng, &self.theta, self.sigma / (m as f64).sqrt())
    }
}

impl LossFamily for QuadGaussianFamily {
    type Sample = Vec<f64>;

    fn dim(&self) -> usize {
        self.theta.len()
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        gaussian_vector(rng, &self.theta, self.sigma)
    }

    fn eval(&self, x: &[f64], z: &Vec<f64>) -> f64 {
        self.objective_with_mean(x, z)
    }

    fn objective(&self, x: &[f64]) -> f64 {
        self.objective_with_mean(x, &self.theta)
    }

    fn minimize(&self, feasible: &Feasible) -> Result<Minimizer> {
        let center: Vec<f64> = self.theta.iter().map(|t| t / self.mu).collect();
        let point = match feasible {
            Feasible::AllSpace => center,
            Feasible::ContinuousBox { radius } => center.iter().map(|c| c.clamp(-radius, *radius)).collect(),
            Feasible::IntegerBox { floor_r } => self
                .theta
                .iter()
                .map(|&t| integer_quad_argmin(t, self.mu, *floor_r) as f64)
                .collect(),
            Feasible::L2Ball { radius } => {
                // isotropic: the constrained minimizer is the projection of θ/μ
                let n = norm2_sq(&center).sqrt();
                if n <= *radius {
                    center
                } else {
                    center.iter().map(|c| c * radius / n).collect()
                }
            }
            Feasible::Explicit(_) => unreachable!("explicit sets are handled by population_minimizer"),
        };
        let value = self.objective(&point);
        Ok(Minimizer { point, value })
    }

    fn gradient(&self, x: &[f64], z: &Vec<f64>) -> Option<Vec<f64>> {
        Some(x.iter().zip(z).map(|(xi, zi)| self.mu * xi - zi).collect())
    }

    fn hessian(&self, x: &[f64], _z: &Vec<f64>) -> Option<Vec<f64>> {
        let d = x.len();
        let mut h = vec![0.0; d * d];
        for i in 0..d {
            h[i * d + i] = self.mu;
        }
        Some(h)
    }

    fn is_anchored(&self) -> bool {
        true
    }
}

/// The small-condition-number hard instance: `Z ~ N((μ/2)·1 + γ·b, σ²I)`.
///
/// With `γ ≤ μ/72` the integer minimizer is `1` where `b_j = +1` and `0`
/// where `b_j = −1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallKappaQuadFamily {
    pub mu: f64,
    pub gamma: f64,
    pub b: Vec<i8>,
    pub sigma: f64,
}

impl SmallKappaQuadFamily {
    pub fn new(mu: f64, gamma: f64, b: Vec<i8>, sigma: f64) -> Result<Self> {
        let f = SmallKappaQuadFamily { mu, gamma, b, sigma };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("mu", self.mu)?;
        check_positive("gamma", self.gamma)?;
        if self.gamma > self.mu / 72.0 {
            return Err(Error::invalid("gamma", "must be at most mu/72"));
        }
        if self.b.is_empty() {
            return Err(Error::invalid("b", "dimension must be at least 1"));
        }
        check_signs("b", &self.b)?;
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::invalid("sigma", "must be nonnegative and finite"));
        }
        Ok(())
    }

    pub fn theta(&self) -> Vec<f64> {
        self.b.iter().map(|&bj| self.mu / 2.0 + self.gamma * bj as f64).collect()
    }

    pub fn as_quad(&self) -> QuadGaussianFamily {
        QuadGaussianFamily {
            mu: self.mu,
            sigma: self.sigma,
            theta: self.theta(),
        }
    }
}

impl LossFamily for SmallKappaQuadFamily {
    type Sample = Vec<f64>;

    fn dim(&self) -> usize {
        self.b.len()
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        gaussian_vector(rng, &self.theta(), self.sigma)
    }

    fn eval(&self, x: &[f64], z: &Vec<f64>) -> f64 {
        0.5 * self.mu * norm2_sq(x) - dot(z, x)
    }

    fn objective(&self, x: &[f64]) -> f64 {
        0.5 * self.mu * norm2_sq(x) - dot(&self.theta(), x)
    }

    fn minimize(&self, feasible: &Feasible) -> Result<Minimizer> {
        self.as_quad().minimize(feasible)
    }

    fn gradient(&self, x: &[f64], z: &Vec<f64>) -> Option<Vec<f64>> {
        self.as_quad().gradient(x, z)
    }

    fn hessian(&self, x: &[f64], z: &Vec<f64>) -> Option<Vec<f64>> {
        self.as_quad().hessian(x, z)
    }

    fn is_anchored(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn anchored_and_zero_at_origin() {
        let f = QuadGaussianFamily::new(2.0, 1.0, vec![0.3, -0.7]).unwrap();
        assert_eq!(f.population_objective(&[0.0, 0.0]).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let z = f.sample(&mut rng);
        assert_eq!(f.loss(&[0.0, 0.0], &z).unwrap(), 0.0);
    }

    #[test]
    fn minimizers_over_each_set() {
        let f = QuadGaussianFamily::new(1.0, 1.0, vec![3.0, -0.4, 1.5]).unwrap();
        let m = f.population_minimizer(&Feasible::AllSpace).unwrap();
        assert_eq!(m.point, vec![3.0, -0.4, 1.5]);
        let m = f.population_minimizer(&Feasible::ContinuousBox { radius: 2.0 }).unwrap();
        assert_eq!(m.point, vec![2.0, -0.4, 1.5]);
        let m = f.population_minimizer(&Feasible::IntegerBox { floor_r: Some(2) }).unwrap();
        assert_eq!(m.point, vec![2.0, 0.0, 1.0]);

        let zero = QuadGaussianFamily::new(1.0, 1.0, vec![0.0, 0.0]).unwrap();
        for feas in [
            Feasible::AllSpace,
            Feasible::IntegerBox { floor_r: Some(1) },
            Feasible::L2Ball { radius: 1.0 },
            Feasible::Explicit(vec![vec![1.0, 0.0], vec![0.0, 0.0]]),
        ] {
            let m = zero.population_minimizer(&feas).unwrap();
            assert_eq!(m.point, vec![0.0, 0.0]);
            assert_eq!(m.value, 0.0);
        }
    }

    #[test]
    fn integer_box_minimizer_matches_enumeration() {
        let f = QuadGaussianFamily::new(1.5, 1.0, vec![2.2, -0.75]).unwrap();
        let pts: Vec<Vec<f64>> = (-3..=3)
            .flat_map(|a| (-3..=3).map(move |b| vec![a as f64, b as f64]))
            .collect();
        let brute = f.population_minimizer(&Feasible::Explicit(pts)).unwrap();
        let closed = f.population_minimizer(&Feasible::IntegerBox { floor_r: Some(3) }).unwrap();
        assert_eq!(brute.point, closed.point);
    }

    #[test]
    fn small_kappa_integer_pattern() {
        let f = SmallKappaQuadFamily::new(1.0, 1.0 / 72.0, vec![1, -1, -1, 1], 1.0).unwrap();
        let m = f.population_minimizer(&Feasible::IntegerBox { floor_r: Some(3) }).unwrap();
        assert_eq!(m.point, vec![1.0, 0.0, 0.0, 1.0]);
        assert!(SmallKappaQuadFamily::new(1.0, 0.02, vec![1], 1.0).is_err());
    }

    #[test]
    fn sample_mean_converges() {
        let f = QuadGaussianFamily::new(1.0, 2.0, vec![1.0, -3.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = 100_000;
        let mut acc = [0.0f64; 2];
        for _ in 0..m {
            let z = f.sample(&mut rng);
            acc[0] += z[0];
            acc[1] += z[1];
        }
        for (a, th) in acc.iter().zip(&f.theta) {
            assert!((a / m as f64 - th).abs() <= 4.0 * 2.0 / (m as f64).sqrt());
        }
    }
}
