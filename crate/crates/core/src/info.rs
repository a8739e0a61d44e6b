//! Information-theoretic calculators and closed-form sample-complexity bounds.
//!
//! Logarithms are natural throughout. Constants that come out of the lower-bound
//! constructions (512, 32, 1024, 96) are fixed; absolute constants that are
//! only known to exist are exposed as a `constant` argument.
//!
//! An infinite KL divergence is reported as `f64::INFINITY`, so it composes
//! with [`fano_error_lower_bound`] and [`pinsker_tv_bound`] without special
//! casing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::RadiusSpec;

/// Inputs shared by the bound evaluators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundQuery {
    pub d: usize,
    #[serde(rename = "R")]
    pub radius: RadiusSpec,
    pub epsilon: f64,
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, rename = "L", skip_serializing_if = "Option::is_none")]
    pub smoothness: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

impl BoundQuery {
    pub fn new(d: usize, radius: RadiusSpec, epsilon: f64, delta: f64) -> Result<Self> {
        let q = BoundQuery {
            d,
            radius,
            epsilon,
            delta,
            mu: None,
            smoothness: None,
            sigma: None,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn with_strong_convexity(mut self, mu: f64, smoothness: f64, sigma: f64) -> Result<Self> {
        self.mu = Some(mu);
        self.smoothness = Some(smoothness);
        self.sigma = Some(sigma);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::invalid("d", "must be at least 1"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("eps", "must be positive"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid("delta", "must lie in (0, 1)"));
        }
        for (name, v) in [("mu", self.mu), ("L", self.smoothness), ("sigma", self.sigma)] {
            if let Some(v) = v {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::invalid(name, "must be positive and finite"));
                }
            }
        }
        if let (Some(mu), Some(l)) = (self.mu, self.smoothness) {
            if l < mu {
                return Err(Error::invalid("L", "must be at least mu"));
            }
        }
        Ok(())
    }

    /// `κ = L/μ` when both are present.
    pub fn kappa(&self) -> Option<f64> {
        Some(self.smoothness? / self.mu?)
    }
}

/// `KL(Ber(p) ‖ Ber(q))` with `0·ln 0 = 0`.
pub fn bernoulli_kl(p: f64, q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid("p", "must lie in [0, 1]"));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::invalid("q", "must lie in [0, 1]"));
    }
    let term = |a: f64, b: f64| -> f64 {
        if a == 0.0 {
            0.0
        } else if b == 0.0 {
            f64::INFINITY
        } else {
            a * (a / b).ln()
        }
    };
    Ok(term(p, q) + term(1.0 - p, 1.0 - q))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoinKl {
    pub exact: f64,
    pub bound: f64,
}

/// KL between coins of bias `(1±2α)/2`: `2α·ln((1+2α)/(1−2α))`, bounded by `16α²`.
pub fn symmetric_coin_kl(alpha: f64) -> Result<CoinKl> {
    if !(0.0..=0.25).contains(&alpha) {
        return Err(Error::invalid("alpha", "must lie in [0, 1/4]"));
    }
    let exact = 2.0 * alpha * ((1.0 + 2.0 * alpha) / (1.0 - 2.0 * alpha)).ln();
    Ok(CoinKl {
        exact,
        bound: 16.0 * alpha * alpha,
    })
}

/// `KL(N(θ,σ²I)^m ‖ N(θ',σ²I)^m) = m‖θ−θ'‖²/(2σ²)`.
pub fn gaussian_product_kl(theta: &[f64], theta_prime: &[f64], sigma: f64, m: u64) -> Result<f64> {
    crate::error::ensure_dim(theta.len(), theta_prime.len())?;
    if !(sigma > 0.0) {
        return Err(Error::invalid("sigma", "must be positive"));
    }
    if m == 0 {
        return Err(Error::invalid("m", "must be at least 1"));
    }
    let dist2: f64 = theta.iter().zip(theta_prime).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(m as f64 * dist2 / (2.0 * sigma * sigma))
}

/// Fano: any test among `V_size` hypotheses errs on average with probability at
/// least `1 − (avg_kl + ln 2)/ln V_size`, clamped at zero.
pub fn fano_error_lower_bound(avg_kl: f64, v_size: u64) -> Result<f64> {
    if v_size < 2 {
        return Err(Error::invalid("V_size", "must be at least 2"));
    }
    if !(avg_kl >= 0.0) {
        return Err(Error::invalid("avg_kl", "must be nonnegative"));
    }
    Ok((1.0 - (avg_kl + std::f64::consts::LN_2) / (v_size as f64).ln()).max(0.0))
}

/// Minimum KL a `(1−δ, δ)`-separating experiment must supply: `½·ln(1/(2δ))`.
pub fn two_point_kl_threshold(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta <= 0.25) {
        return Err(Error::invalid("delta", "must lie in (0, 1/4]"));
    }
    Ok(0.5 * (1.0 / (2.0 * delta)).ln())
}

/// Pinsker: `TV ≤ √(KL/2)`.
pub fn pinsker_tv_bound(kl: f64) -> Result<f64> {
    if !(kl >= 0.0) {
        return Err(Error::invalid("kl", "must be nonnegative"));
    }
    Ok((kl / 2.0).sqrt())
}

/// Lower bounds for anchored 1-Lipschitz losses over the ℓ∞ box, with the
/// explicit constants of the coin construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinfLowerBounds {
    /// `R²d / (512 ε²)`
    pub dimension_term: f64,
    /// `R²/(32 ε²) · ln(1/(2δ))`
    pub confidence_term: f64,
    /// `R²/(1024 ε²) · (d + ln(1/δ))`
    pub combined: f64,
    /// False when `ε > R/8`, `δ > 1/4` or `R < 1`; the values are still reported.
    pub in_regime: bool,
}

pub fn linf_lower_bounds(q: &BoundQuery) -> Result<LinfLowerBounds> {
    q.validate()?;
    let r = q.radius.value();
    let eps2 = q.epsilon * q.epsilon;
    let d = q.d as f64;
    let r2 = r * r;
    Ok(LinfLowerBounds {
        dimension_term: r2 * d / (512.0 * eps2),
        confidence_term: r2 / (32.0 * eps2) * (1.0 / (2.0 * q.delta)).ln(),
        combined: r2 / (1024.0 * eps2) * (d + (1.0 / q.delta).ln()),
        in_regime: q.epsilon <= r / 8.0 && q.delta <= 0.25 && r >= 1.0,
    })
}

/// Tent-packing lower bound `(1/96)·ρ⁻²·(ln|W| + ln(1/δ))` with `ρ = 8ε/r`.
pub fn tent_lower_bound(r: f64, epsilon: f64, delta: f64, log_w: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::invalid("r", "must be positive"));
    }
    if !(epsilon > 0.0 && epsilon <= r / 16.0) {
        return Err(Error::invalid("eps", "must lie in (0, r/16]"));
    }
    if !(delta > 0.0 && delta <= 0.25) {
        return Err(Error::invalid("delta", "must lie in (0, 1/4]"));
    }
    if !(log_w > 0.0) {
        return Err(Error::invalid("log_W", "must be positive"));
    }
    let rho = tent_bias(r, epsilon);
    Ok((log_w + (1.0 / delta).ln()) / (96.0 * rho * rho))
}

/// The tent construction's bias `ρ = 8ε/r`.
pub fn tent_bias(r: f64, epsilon: f64) -> f64 {
    8.0 * epsilon / r
}

/// Strongly convex / smooth rates: anchored UC, integer ERM and continuous ERM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScRates {
    /// `C·σ²⌊R⌋²d·(d+ln(1/δ))/ε²`; infinite for unbounded boxes.
    pub auc_rate: f64,
    /// `C·σ²d·min{κ,⌊R⌋²}·(d+ln(1/δ))/ε²`
    pub erm_rate: f64,
    /// `C·σ²/(με)·(d+ln(1/δ))`
    pub continuous_erm_rate: f64,
}

pub fn sc_rate_formulas(q: &BoundQuery, constant: f64) -> Result<ScRates> {
    q.validate()?;
    if !(constant > 0.0) {
        return Err(Error::invalid("constant", "must be positive"));
    }
    let (mu, sigma) = match (q.mu, q.sigma) {
        (Some(mu), Some(sigma)) => (mu, sigma),
        _ => return Err(Error::invalid("mu/sigma", "strongly convex rates need mu, L and sigma")),
    };
    let kappa = q
        .kappa()
        .ok_or_else(|| Error::invalid("L", "strongly convex rates need mu, L and sigma"))?;
    let d = q.d as f64;
    let conf = d + (1.0 / q.delta).ln();
    let s2 = sigma * sigma;
    let eps2 = q.epsilon * q.epsilon;
    let (auc_rate, curvature) = match q.radius.floor_r() {
        Some(fr) => {
            let fr2 = (fr as f64) * (fr as f64);
            (constant * s2 * fr2 * d * conf / eps2, kappa.min(fr2))
        }
        None => (f64::INFINITY, kappa),
    };
    Ok(ScRates {
        auc_rate,
        erm_rate: constant * s2 * d * curvature * conf / eps2,
        continuous_erm_rate: constant * s2 / (mu * q.epsilon) * conf,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn bernoulli_kl_examples() {
        assert_eq!(bernoulli_kl(0.5, 0.5).unwrap(), 0.0);
        assert!(close(bernoulli_kl(0.75, 0.25).unwrap(), 0.5 * 3f64.ln(), 1e-15));
        assert!(close(bernoulli_kl(1.0, 0.5).unwrap(), 2f64.ln(), 1e-15));
        assert_eq!(bernoulli_kl(0.5, 0.0).unwrap(), f64::INFINITY);
        assert_eq!(bernoulli_kl(0.0, 0.0).unwrap(), 0.0);
        assert!(bernoulli_kl(1.2, 0.5).is_err());
    }

    #[test]
    fn coin_kl_examples() {
        assert_eq!(symmetric_coin_kl(0.0).unwrap(), CoinKl { exact: 0.0, bound: 0.0 });
        let c = symmetric_coin_kl(0.25).unwrap();
        assert!(close(c.exact, 0.5 * 3f64.ln(), 1e-15));
        assert_eq!(c.bound, 1.0);
        let c = symmetric_coin_kl(0.1).unwrap();
        assert!(close(c.exact, 0.2 * 1.5f64.ln(), 1e-15));
        assert!(close(c.exact, 0.0811, 1e-4));
        assert!(close(c.bound, 0.16, 1e-15));
        assert!(symmetric_coin_kl(0.3).is_err());
    }

    #[test]
    fn gaussian_kl_examples() {
        assert_eq!(gaussian_product_kl(&[1.0, 2.0], &[1.0, 2.0], 1.0, 5).unwrap(), 0.0);
        assert_eq!(gaussian_product_kl(&[1.0, 0.0], &[0.0, 0.0], 1.0, 2).unwrap(), 1.0);
        assert_eq!(gaussian_product_kl(&[0.5], &[-0.5], 2.0, 8).unwrap(), 1.0);
        assert!(gaussian_product_kl(&[0.5], &[-0.5, 1.0], 2.0, 8).is_err());
    }

    #[test]
    fn fano_examples() {
        assert_eq!(fano_error_lower_bound(0.0, 2).unwrap(), 0.0);
        let v = fano_error_lower_bound(0.5, 16).unwrap();
        assert!(close(v, 1.0 - (0.5 + 2f64.ln()) / 16f64.ln(), 1e-15));
        assert!(close(v, 0.5697, 1e-4));
        assert_eq!(fano_error_lower_bound(10.0, 4).unwrap(), 0.0);
        assert_eq!(fano_error_lower_bound(f64::INFINITY, 4).unwrap(), 0.0);
        assert!(fano_error_lower_bound(0.0, 1).is_err());
    }

    #[test]
    fn two_point_and_pinsker_examples() {
        assert!(close(two_point_kl_threshold(0.25).unwrap(), 0.5 * 2f64.ln(), 1e-15));
        let e2 = std::f64::consts::E.powi(2);
        assert!(close(two_point_kl_threshold(1.0 / (2.0 * e2)).unwrap(), 1.0, 1e-14));
        assert!(two_point_kl_threshold(0.3).is_err());
        assert!(two_point_kl_threshold(0.0).is_err());
        assert_eq!(pinsker_tv_bound(0.0).unwrap(), 0.0);
        assert_eq!(pinsker_tv_bound(2.0).unwrap(), 1.0);
        assert!(close(pinsker_tv_bound(0.08).unwrap(), 0.2, 1e-15));
        assert_eq!(pinsker_tv_bound(f64::INFINITY).unwrap(), f64::INFINITY);
    }

    #[test]
    fn linf_examples() {
        let r = |v| RadiusSpec::finite(v).unwrap();
        let b = linf_lower_bounds(&BoundQuery::new(4, r(2.0), 0.1, 0.25).unwrap()).unwrap();
        assert!(close(b.combined, 4.0 / 10.24 * (4.0 + 4f64.ln()), 1e-12));
        assert!(close(b.combined, 2.104, 1e-3));
        assert!(b.in_regime);
        // max{u,v} ≥ (u+v)/2 step: the combined form never exceeds the average of the two terms
        assert!(b.combined <= 0.5 * (b.dimension_term + b.confidence_term));

        let b = linf_lower_bounds(&BoundQuery::new(1, r(8.0), 1.0, 0.25).unwrap()).unwrap();
        assert_eq!(b.dimension_term, 0.125);

        let b = linf_lower_bounds(&BoundQuery::new(1, r(2.0), 1.0, 0.25).unwrap()).unwrap();
        assert!(!b.in_regime);
        assert!(b.combined > 0.0);
    }

    #[test]
    fn tent_examples() {
        let v = tent_lower_bound(16.0, 1.0, 0.25, 2f64.ln()).unwrap();
        assert!(close(v, 256.0 / 6144.0 * (2f64.ln() + 4f64.ln()), 1e-14));
        assert!(close(v, 0.0866, 1e-4));
        assert_eq!(tent_bias(16.0, 1.0), 0.5);
        let a = tent_lower_bound(16.0, 0.5, 0.1, 1.0).unwrap();
        let b = tent_lower_bound(32.0, 0.5, 0.1, 1.0).unwrap();
        assert!(close(b / a, 4.0, 1e-12));
        assert!(tent_lower_bound(16.0, 1.5, 0.25, 1.0).is_err());
        assert!(tent_lower_bound(16.0, 1.0, 0.3, 1.0).is_err());
    }

    #[test]
    fn sc_rate_examples() {
        let q = BoundQuery::new(2, RadiusSpec::finite(1.0).unwrap(), 0.1, (-1.0f64).exp())
            .unwrap()
            .with_strong_convexity(1.0, 1.0, 1.0)
            .unwrap();
        let rates = sc_rate_formulas(&q, 1.0).unwrap();
        assert!(close(rates.erm_rate, 600.0, 1e-9));

        let q = BoundQuery::new(3, RadiusSpec::finite(10.0).unwrap(), 0.1, 0.1)
            .unwrap()
            .with_strong_convexity(1.0, 16.0, 1.0)
            .unwrap();
        let rates = sc_rate_formulas(&q, 1.0).unwrap();
        assert!(rates.erm_rate < rates.auc_rate);

        let q = BoundQuery::new(3, RadiusSpec::infinite(), 0.1, 0.1)
            .unwrap()
            .with_strong_convexity(1.0, 16.0, 1.0)
            .unwrap();
        let rates = sc_rate_formulas(&q, 1.0).unwrap();
        assert_eq!(rates.auc_rate, f64::INFINITY);
        assert!(close(rates.erm_rate, 3.0 * 16.0 * (3.0 + 10f64.ln()) / 0.01, 1e-9));

        let bare = BoundQuery::new(3, RadiusSpec::infinite(), 0.1, 0.1).unwrap();
        assert!(sc_rate_formulas(&bare, 1.0).is_err());
    }

    #[test]
    fn query_validation() {
        let r = RadiusSpec::finite(1.0).unwrap();
        assert!(BoundQuery::new(0, r, 0.1, 0.1).is_err());
        assert!(BoundQuery::new(1, r, 0.0, 0.1).is_err());
        assert!(BoundQuery::new(1, r, 0.1, 1.0).is_err());
        let q = BoundQuery::new(1, r, 0.1, 0.1).unwrap();
        assert!(q.with_strong_convexity(2.0, 1.0, 1.0).is_err());
    }
}
