//! Randomized checks of the analytic properties each family is built to have.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{dist2, norm2, norm_of, AnyFamily, BlockGadgetFamily, CoinLinearFamily, LogisticFamily, LossFamily, TentFamily};
use crate::lattice::Norm;

const DERIVATIVE_RTOL: f64 = 1e-5;
const INCREMENT_DRAWS: usize = 100_000;
const MONTE_CARLO_DRAWS: usize = 100_000;
const MONTE_CARLO_POINTS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub family: String,
    pub checks: Vec<RegularityCheck>,
}

impl RegularityReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &RegularityCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    fn push(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(RegularityCheck {
            name: name.to_string(),
            passed,
            detail,
        });
    }
}

/// Runs every check that applies to `family` with `trials` random points each.
pub fn verify_regularity(family: &AnyFamily, trials: usize, seed: u64) -> RegularityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = RegularityReport {
        family: family.tag().to_string(),
        checks: Vec::new(),
    };
    if let Err(e) = family.validate() {
        report.push("parameters", false, e.to_string());
        return report;
    }
    let trials = trials.max(1);
    match family {
        AnyFamily::CoinLinear(f) => {
            let scale = f.radius;
            lipschitz(&mut report, f, Norm::Linf, 1.0, scale, trials, &mut rng);
            coin_axis_pairs(&mut report, f, &mut rng);
            anchoring(&mut report, f, trials, &mut rng);
            monte_carlo(&mut report, f, scale, &mut rng);
        }
        AnyFamily::Tent(f) => {
            let scale = 1.25 * f.r;
            lipschitz(&mut report, f, Norm::L2, 1.0, scale, trials, &mut rng);
            tent_disjointness(&mut report, f, 10_000, &mut rng);
            anchoring(&mut report, f, trials, &mut rng);
            monte_carlo_near_centers(&mut report, f, &mut rng);
        }
        AnyFamily::QuadGaussian(f) => {
            derivatives(&mut report, f, f.mu, f.mu, 3.0, trials, &mut rng);
            anchoring(&mut report, f, trials, &mut rng);
            gaussian_increments(&mut report, f, f.sigma, 3.0, &mut rng);
            monte_carlo(&mut report, f, 3.0, &mut rng);
        }
        AnyFamily::SmallKappaQuad(f) => {
            derivatives(&mut report, f, f.mu, f.mu, 3.0, trials, &mut rng);
            anchoring(&mut report, f, trials, &mut rng);
            gaussian_increments(&mut report, f, f.sigma, 3.0, &mut rng);
            monte_carlo(&mut report, f, 3.0, &mut rng);
        }
        AnyFamily::BlockGadget(f) => {
            let scale = 4.0 * f.tau as f64;
            gadget_hessian_exact(&mut report, f);
            derivatives(&mut report, f, f.mu, f.l, scale, trials, &mut rng);
            gaussian_increments(&mut report, f, f.sigma, scale, &mut rng);
            monte_carlo(&mut report, f, scale, &mut rng);
        }
        AnyFamily::Logistic(f) => {
            derivatives(&mut report, f, f.mu, f.smoothness(), 3.0, trials, &mut rng);
            logistic_increments(&mut report, f, trials, &mut rng);
            monte_carlo(&mut report, f, 2.0, &mut rng);
        }
    }
    report
}

fn uniform_point<R: Rng + ?Sized>(rng: &mut R, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-scale..=scale)).collect()
}

fn lipschitz<F: LossFamily, R: Rng + ?Sized>(
    report: &mut RegularityReport,
    f: &F,
    norm: Norm,
    constant: f64,
    scale: f64,
    trials: usize,
    rng: &mut R,
) {
    let d = f.dim();
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let x = uniform_point(rng, d, scale);
        let y = uniform_point(rng, d, scale);
        let z = f.sample(rng);
        let diff: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        let n = norm_of(norm, &diff);
        if n > 0.0 {
            worst = worst.max((f.eval(&x, &z) - f.eval(&y, &z)).abs() / n);
        }
    }
    report.push(
        "lipschitz",
        worst <= constant * (1.0 + 1e-12),
        format!("max ratio {worst:.6} against constant {constant} in {norm:?}"),
    );
}

fn coin_axis_pairs<R: Rng + ?Sized>(report: &mut RegularityReport, f: &CoinLinearFamily, rng: &mut R) {
    // along coordinate j, a sample reading coordinate j attains ratio exactly 1
    let mut exact = true;
    for j in 0..f.d {
        let mut x = vec![0.0; f.d];
        x[j] = f.radius;
        let y = vec![0.0; f.d];
        let sign = if rng.random_bool(0.5) { 1 } else { -1 };
        let z = super::CoinSample { coord: j, sign };
        if matches!(f.mode, super::CoinMode::Confidence { .. }) && j > 0 {
            continue;
        }
        let ratio = (f.eval(&x, &z) - f.eval(&y, &z)).abs() / f.radius;
        exact &= ratio == 1.0;
    }
    report.push("lipschitz_axis_pairs", exact, "ratio equals 1 on axis pairs".into());
}

fn anchoring<F: LossFamily, R: Rng + ?Sized>(report: &mut RegularityReport, f: &F, trials: usize, rng: &mut R) {
    let zero = vec![0.0; f.dim()];
    let ok = (0..trials).all(|_| f.eval(&zero, &f.sample(rng)) == 0.0);
    report.push("anchoring", ok, "f(0; z) = 0 on every draw".into());
}

fn tent_disjointness<R: Rng + ?Sized>(report: &mut RegularityReport, f: &TentFamily, points: usize, rng: &mut R) {
    let d = f.dim();
    let mut overlaps = 0usize;
    for _ in 0..points {
        // aim near a center so that positive supports are actually hit
        let c = &f.centers[rng.random_range(0..f.len())];
        let x: Vec<f64> = c.iter().map(|v| v + rng.random_range(-0.5 * f.r..=0.5 * f.r) / (d as f64).sqrt()).collect();
        let active = (0..f.len()).filter(|&i| f.tent(i, &x) > 0.0).count();
        if active > 1 {
            overlaps += 1;
        }
    }
    report.push(
        "tent_support_disjointness",
        overlaps == 0,
        format!("{overlaps} of {points} points in more than one tent"),
    );
}

/// Analytic gradient against central differences of `f`, analytic Hessian
/// against central differences of the gradient, and Hessian eigenvalues
/// within `[mu, l]`.
fn derivatives<F: LossFamily, R: Rng + ?Sized>(
    report: &mut RegularityReport,
    f: &F,
    mu: f64,
    l: f64,
    scale: f64,
    trials: usize,
    rng: &mut R,
) {
    let d = f.dim();
    let (mut grad_err, mut hess_err) = (0.0f64, 0.0f64);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..trials {
        let x = uniform_point(rng, d, scale);
        let z = f.sample(rng);
        let (Some(g), Some(h)) = (f.gradient(&x, &z), f.hessian(&x, &z)) else {
            report.push("derivatives", false, "family has no analytic derivatives".into());
            return;
        };
        let step = 1e-4 * (1.0 + norm2(&x));
        let g_scale = g.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let h_scale = h.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..d {
            let mut up = x.clone();
            let mut down = x.clone();
            up[i] += step;
            down[i] -= step;
            let fd = (f.eval(&up, &z) - f.eval(&down, &z)) / (2.0 * step);
            grad_err = grad_err.max((fd - g[i]).abs() / g_scale);
            let gu = f.gradient(&up, &z).unwrap();
            let gd = f.gradient(&down, &z).unwrap();
            for j in 0..d {
                let fd = (gu[j] - gd[j]) / (2.0 * step);
                hess_err = hess_err.max((fd - h[j * d + i]).abs() / h_scale);
            }
        }
        let eig = SymmetricEigen::new(DMatrix::from_row_slice(d, d, &h)).eigenvalues;
        lo = lo.min(eig.min());
        hi = hi.max(eig.max());
    }
    report.push(
        "gradient_finite_difference",
        grad_err <= DERIVATIVE_RTOL,
        format!("max relative error {grad_err:.3e}"),
    );
    report.push(
        "hessian_finite_difference",
        hess_err <= DERIVATIVE_RTOL,
        format!("max relative error {hess_err:.3e}"),
    );
    let tol = 1e-9 * l;
    report.push(
        "hessian_eigenvalues",
        lo >= mu - tol && hi <= l + tol,
        format!("eigenvalues in [{lo:.6}, {hi:.6}], declared [{mu}, {l}]"),
    );
}

fn gadget_hessian_exact(report: &mut RegularityReport, f: &BlockGadgetFamily) {
    let (det, trace) = f.block_hessian_det_trace();
    let target = f.mu * f.l;
    let det_ok = (det - target).abs() <= 1e-12 * target;
    report.push("gadget_hessian_determinant", det_ok, format!("det {det} against muL {target}"));
    report.push(
        "gadget_hessian_trace",
        trace <= f.l * (1.0 + 1e-12),
        format!("trace {trace} against L {}", f.l),
    );
}

/// Centered increments of a Gaussian-mean family have variance `σ²‖x − y‖²`.
fn gaussian_increments<F, R>(report: &mut RegularityReport, f: &F, sigma: f64, scale: f64, rng: &mut R)
where
    F: LossFamily<Sample = Vec<f64>>,
    R: Rng + ?Sized,
{
    let d = f.dim();
    let mut worst: f64 = 1.0;
    let mut exact_zero = true;
    for _ in 0..3 {
        let x = uniform_point(rng, d, scale);
        let y = uniform_point(rng, d, scale);
        let shift = f.objective(&x) - f.objective(&y);
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..INCREMENT_DRAWS {
            let z = f.sample(rng);
            let v = f.eval(&x, &z) - f.eval(&y, &z) - shift;
            s += v;
            s2 += v * v;
        }
        let n = INCREMENT_DRAWS as f64;
        let var = (s2 - s * s / n) / (n - 1.0);
        let target = sigma * sigma * dist2(&x, &y).powi(2);
        if target == 0.0 {
            exact_zero &= var.abs() <= 1e-18 * (1.0 + s2);
        } else {
            let ratio = var / target;
            if (ratio - 1.0).abs() > (worst - 1.0).abs() {
                worst = ratio;
            }
        }
    }
    report.push(
        "increment_variance",
        exact_zero && (0.9..=1.1).contains(&worst),
        format!("worst variance ratio {worst:.4} over {INCREMENT_DRAWS} draws"),
    );
}

/// The logistic part of the loss is `M`-Lipschitz, so increments are
/// bounded by `M‖x − y‖` and hence sub-Gaussian by Hoeffding's lemma.
fn logistic_increments<R: Rng + ?Sized>(report: &mut RegularityReport, f: &LogisticFamily, trials: usize, rng: &mut R) {
    let mut worst = 0.0f64;
    let mut features_ok = true;
    for _ in 0..trials {
        let x = uniform_point(rng, f.d, 3.0);
        let y = uniform_point(rng, f.d, 3.0);
        let z = f.sample(rng);
        features_ok &= norm2(&z.features) <= f.m_bound * (1.0 + 1e-12);
        let ridge = 0.5 * f.mu * (super::norm2_sq(&x) - super::norm2_sq(&y));
        let inc = (f.eval(&x, &z) - f.eval(&y, &z) - ridge).abs();
        let n = dist2(&x, &y);
        if n > 0.0 {
            worst = worst.max(inc / (f.m_bound * n));
        }
    }
    report.push("feature_norm_bound", features_ok, format!("all features within M = {}", f.m_bound));
    report.push(
        "increment_bound",
        worst <= 1.0 + 1e-12,
        format!("max |increment| / (M‖x−y‖) = {worst:.6}"),
    );
}

fn mean_and_se<F: LossFamily, R: Rng + ?Sized>(f: &F, x: &[f64], rng: &mut R) -> (f64, f64) {
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..MONTE_CARLO_DRAWS {
        let v = f.eval(x, &f.sample(rng));
        s += v;
        s2 += v * v;
    }
    let n = MONTE_CARLO_DRAWS as f64;
    let mean = s / n;
    let var = ((s2 - s * s / n) / (n - 1.0)).max(0.0);
    (mean, (var / n).sqrt())
}

fn compare_monte_carlo<F: LossFamily, R: Rng + ?Sized>(report: &mut RegularityReport, f: &F, points: &[Vec<f64>], rng: &mut R) {
    let mut worst = 0.0f64;
    for x in points {
        let (mean, se) = mean_and_se(f, x, rng);
        let gap = (mean - f.objective(x)).abs();
        let z = if se > 0.0 { gap / se } else if gap <= 1e-12 { 0.0 } else { f64::INFINITY };
        worst = worst.max(z);
    }
    report.push(
        "population_vs_monte_carlo",
        worst <= 5.0,
        format!("worst deviation {worst:.2} standard errors over {} points", points.len()),
    );
}

fn monte_carlo<F: LossFamily, R: Rng + ?Sized>(report: &mut RegularityReport, f: &F, scale: f64, rng: &mut R) {
    let points: Vec<Vec<f64>> = (0..MONTE_CARLO_POINTS).map(|_| uniform_point(rng, f.dim(), scale)).collect();
    compare_monte_carlo(report, f, &points, rng);
}

fn monte_carlo_near_centers<R: Rng + ?Sized>(report: &mut RegularityReport, f: &TentFamily, rng: &mut R) {
    let d = f.dim();
    let points: Vec<Vec<f64>> = (0..MONTE_CARLO_POINTS)
        .map(|_| {
            let c = &f.centers[rng.random_range(0..f.len())];
            c.iter().map(|v| v + rng.random_range(-0.3 * f.r..=0.3 * f.r) / (d as f64).sqrt()).collect()
        })
        .collect();
    compare_monte_carlo(report, f, &points, rng);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{QuadGaussianFamily, SmallKappaQuadFamily};
    use crate::lattice::{l2_integer_packing, RadiusSpec};

    fn assert_passes(f: AnyFamily) {
        let report = verify_regularity(&f, 50, 7);
        let failures: Vec<_> = report.failures().collect();
        assert!(failures.is_empty(), "{}: {failures:?}", report.family);
    }

    #[test]
    fn every_family_passes() {
        assert_passes(AnyFamily::CoinLinear(CoinLinearFamily::dimension(4, 2.0, 0.5, vec![1, -1, 1, 1]).unwrap()));
        assert_passes(AnyFamily::CoinLinear(CoinLinearFamily::confidence(3, 1.0, 0.25, -1).unwrap()));
        let p = l2_integer_packing(8, RadiusSpec::finite(3.0).unwrap(), 1).unwrap();
        assert_passes(AnyFamily::Tent(TentFamily::from_packing(&p, 0, 0.5).unwrap()));
        assert_passes(AnyFamily::QuadGaussian(QuadGaussianFamily::new(1.0, 1.0, vec![0.5, -0.2, 1.0]).unwrap()));
        assert_passes(AnyFamily::SmallKappaQuad(SmallKappaQuadFamily::new(2.0, 0.02, vec![1, -1], 0.5).unwrap()));
        assert_passes(AnyFamily::BlockGadget(BlockGadgetFamily::new(5, 1.0, 64.0, 2, 0.04, vec![1, -1], 1.0).unwrap()));
        assert_passes(AnyFamily::Logistic(LogisticFamily::new(3, 0.5, 2.0, 0.1).unwrap()));
    }

    #[test]
    fn detects_a_broken_declaration() {
        // smoothness above the declared μ + M²/4 would show up as an eigenvalue violation
        let mut report = RegularityReport {
            family: "quad_gaussian".into(),
            checks: Vec::new(),
        };
        let f = QuadGaussianFamily::new(2.0, 1.0, vec![0.0, 0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        derivatives(&mut report, &f, 1.0, 1.5, 1.0, 5, &mut rng);
        assert!(!report.passed());
    }
}
