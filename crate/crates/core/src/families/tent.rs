use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{dist2, Feasible, LossFamily, Minimizer};
use crate::error::{Error, Result};
use crate::lattice::{ScaledPacking, SignPacking};

/// A sample `V ⊆ W`, as membership flags in packing order.
pub type TentSample = Vec<bool>;

/// Tents of height `r/4` at the points of a packing; the hidden center is
/// slightly more likely to be active than the others.
///
/// `f(x; V) = −max_{w ∈ V} ψ_w(x)` with `ψ_w(x) = max(0, r/4 − ‖x − w‖₂)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TentFamily {
    pub centers: Vec<Vec<f64>>,
    pub r: f64,
    pub hidden: usize,
    pub rho: f64,
}

impl TentFamily {
    /// Tents over an integer ℓ2 packing.
    pub fn from_packing(packing: &ScaledPacking, hidden: usize, rho: f64) -> Result<Self> {
        packing.verify()?;
        let centers = packing.iter().map(|c| c.iter().map(|&v| v as f64).collect()).collect();
        Self::new(centers, packing.radius(), hidden, rho)
    }

    /// Tents at `scale·u` for the vectors of a sign packing. The centers need
    /// not be integer; this is the continuous-ball variant.
    pub fn from_scaled_signs(packing: &SignPacking, scale: f64, hidden: usize, rho: f64) -> Result<Self> {
        packing.verify()?;
        super::check_positive("scale", scale)?;
        let centers = packing.iter().map(|u| u.iter().map(|&v| scale * v as f64).collect()).collect();
        Self::new(centers, scale * (packing.support_size() as f64).sqrt(), hidden, rho)
    }

    pub fn new(centers: Vec<Vec<f64>>, r: f64, hidden: usize, rho: f64) -> Result<Self> {
        let f = TentFamily {
            centers,
            r,
            hidden,
            rho,
        };
        f.validate()?;
        Ok(f)
    }

    /// Same packing, different hidden center.
    pub fn with_hidden(&self, hidden: usize) -> Result<Self> {
        let mut f = self.clone();
        f.hidden = hidden;
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        super::check_positive("r", self.r)?;
        if self.centers.len() < 2 {
            return Err(Error::invalid("centers", "need at least two tent centers"));
        }
        let d = self.centers[0].len();
        if d == 0 {
            return Err(Error::invalid("centers", "centers must have positive dimension"));
        }
        for c in &self.centers {
            crate::error::ensure_dim(d, c.len())?;
        }
        if self.hidden >= self.centers.len() {
            return Err(Error::invalid("hidden", "index out of range"));
        }
        if !(self.rho > 0.0 && self.rho <= 0.5) {
            return Err(Error::invalid("rho", "must lie in (0, 1/2]"));
        }
        // positive supports are open balls of radius r/4: disjoint iff centers are r/2 apart
        let tol = 1e-9 * self.r;
        for (i, a) in self.centers.iter().enumerate() {
            if (super::norm2(a) - self.r).abs() > tol {
                return Err(Error::Certificate(format!("center {i} does not have norm r")));
            }
            for (j, b) in self.centers.iter().enumerate().skip(i + 1) {
                if dist2(a, b) < self.r / 2.0 - tol {
                    return Err(Error::Certificate(format!("tents {i} and {j} overlap")));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn tent(&self, i: usize, x: &[f64]) -> f64 {
        (self.r / 4.0 - dist2(x, &self.centers[i])).max(0.0)
    }

    /// Index of the tent whose positive support contains `x`, if any.
    pub fn active_tent(&self, x: &[f64]) -> Option<usize> {
        (0..self.len()).find(|&i| self.tent(i, x) > 0.0)
    }

    pub fn membership_probability(&self, i: usize) -> f64 {
        if i == self.hidden {
            (1.0 + self.rho) / 2.0
        } else {
            (1.0 - self.rho) / 2.0
        }
    }
}

impl LossFamily for TentFamily {
    type Sample = TentSample;

    fn dim(&self) -> usize {
        self.centers[0].len()
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> TentSample {
        (0..self.len()).map(|i| rng.random::<f64>() < self.membership_probability(i)).collect()
    }

    fn eval(&self, x: &[f64], z: &TentSample) -> f64 {
        let best = z
            .iter()
            .enumerate()
            .filter(|(_, &on)| on)
            .map(|(i, _)| self.tent(i, x))
            .fold(0.0, f64::max);
        -best
    }

    fn objective(&self, x: &[f64]) -> f64 {
        match self.active_tent(x) {
            Some(i) => -self.membership_probability(i) * self.tent(i, x),
            None => 0.0,
        }
    }

    fn minimize(&self, feasible: &Feasible) -> Result<Minimizer> {
        let u = &self.centers[self.hidden];
        if feasible.contains(u) {
            Ok(Minimizer {
                point: u.clone(),
                value: -(1.0 + self.rho) * self.r / 8.0,
            })
        } else {
            Err(Error::Unsupported("the hidden tent center is not feasible".into()))
        }
    }

    fn is_anchored(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{l2_integer_packing, RadiusSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn family() -> TentFamily {
        let p = l2_integer_packing(8, RadiusSpec::finite(3.0).unwrap(), 5).unwrap();
        TentFamily::from_packing(&p, 2, 0.5).unwrap()
    }

    #[test]
    fn loss_at_center_is_minus_height() {
        let f = family();
        let w = f.centers[3].clone();
        let mut v = vec![false; f.len()];
        v[3] = true;
        assert!((f.loss(&w, &v).unwrap() + f.r / 4.0).abs() < 1e-15);
        assert_eq!(f.loss(&w, &vec![false; f.len()]).unwrap(), 0.0);
        assert_eq!(f.loss(&[0.0; 8], &vec![true; f.len()]).unwrap(), 0.0);
    }

    #[test]
    fn population_values() {
        let f = family();
        let u = f.centers[f.hidden].clone();
        assert!((f.objective(&u) + 1.5 * f.r / 8.0).abs() < 1e-15);
        let m = f.population_minimizer(&Feasible::L2Ball { radius: 3.0 }).unwrap();
        assert_eq!(m.point, u);
        // outside every tent the excess is (1+ρ)r/8 ≥ ρr/4
        let far = vec![0.0; 8];
        let e = f.excess(&Feasible::L2Ball { radius: 3.0 }, &far).unwrap();
        assert!((e - 1.5 * f.r / 8.0).abs() < 1e-15);
        assert!(e >= 0.5 * f.r / 4.0);
        // at a wrong center the gap is exactly ρr/4
        let other = f.centers[(f.hidden + 1) % f.len()].clone();
        let e = f.excess(&Feasible::L2Ball { radius: 3.0 }, &other).unwrap();
        assert!((e - 0.5 * f.r / 4.0).abs() < 1e-12);
    }

    #[test]
    fn membership_frequencies() {
        let f = family();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 20_000;
        let mut counts = vec![0u32; f.len()];
        for _ in 0..n {
            for (i, on) in f.sample(&mut rng).into_iter().enumerate() {
                counts[i] += on as u32;
            }
        }
        for (i, &c) in counts.iter().enumerate() {
            let p = f.membership_probability(i);
            let sd = (p * (1.0 - p) / n as f64).sqrt();
            assert!((c as f64 / n as f64 - p).abs() < 4.0 * sd, "center {i}");
        }
    }

    #[test]
    fn continuous_variant_and_validation() {
        let rows = vec![vec![1, 1, 1, 1], vec![1, 1, -1, -1], vec![1, -1, 1, -1]];
        let p = SignPacking::new(4, 4, rows).unwrap();
        let f = TentFamily::from_scaled_signs(&p, 0.75, 0, 0.25).unwrap();
        assert!((f.r - 1.5).abs() < 1e-15);
        assert!(f.with_hidden(5).is_err());
        let overlapping = TentFamily::new(vec![vec![1.0, 0.0], vec![0.96, 0.28]], 1.0, 0, 0.5);
        assert!(matches!(overlapping, Err(Error::Certificate(_))));
    }
}
