use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sco_lab::experiments::{run_experiment, write_trials_csv, ExperimentConfig, Rule, SuccessEstimate};
use sco_lab::families::{
    AnyFamily, CoinLinearFamily, CoinSample, Feasible, LossFamily, Minimizer, QuadGaussianFamily, TentFamily,
};
use sco_lab::info::{
    bernoulli_kl, fano_error_lower_bound, gaussian_product_kl, linf_lower_bounds, sc_rate_formulas, symmetric_coin_kl,
    BoundQuery,
};
use sco_lab::lattice::{
    box_rounding, count_integer_points_l2, enumerate_integer_points, h2, l2_integer_packing, Norm, RadiusSpec,
};
use sco_lab::solvers::{empirical_risk, erm_enumerated, erm_quadratic_integer_box, projected_sgd, StepRule};

fn box_points(d: usize, floor_r: i64) -> Vec<Vec<f64>> {
    let side = (2 * floor_r + 1) as usize;
    (0..side.pow(d as u32))
        .map(|mut k| {
            (0..d)
                .map(|_| {
                    let v = (k % side) as i64 - floor_r;
                    k /= side;
                    v as f64
                })
                .collect()
        })
        .collect()
}

/// Adds a constant to every loss.
struct Offset<F> {
    inner: F,
    c: f64,
}

impl<F: LossFamily> LossFamily for Offset<F> {
    type Sample = F::Sample;
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Sample {
        self.inner.sample(rng)
    }
    fn eval(&self, x: &[f64], z: &Self::Sample) -> f64 {
        self.inner.eval(x, z) + self.c
    }
    fn objective(&self, x: &[f64]) -> f64 {
        self.inner.objective(x) + self.c
    }
    fn minimize(&self, feasible: &Feasible) -> sco_lab::Result<Minimizer> {
        self.inner.minimize(feasible)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn count_matches_enumeration(d in 1usize..=6, num in 1u64..=16, den in 1u64..=4) {
        prop_assume!(num <= 4 * den);
        let r = RadiusSpec::from_ratio(num, den).unwrap();
        let counted = count_integer_points_l2(d, r).unwrap();
        let listed = enumerate_integer_points(d, r, Norm::L2).unwrap().len() as u128;
        prop_assert_eq!(counted, listed);
    }

    #[test]
    fn log_count_within_grid_constant(d in 2usize..=10, r in 1.0f64..4.0) {
        let spec = RadiusSpec::finite(r).unwrap();
        prop_assume!(spec.floor_r2().unwrap() < d as u64);
        let count = count_integer_points_l2(d, spec).unwrap() as f64;
        prop_assert!(count.ln() <= 8.0 * h2(d, spec).unwrap());
    }

    #[test]
    fn h2_monotone_and_saturates(d in 1usize..=12, a in 0.0f64..5.0, b in 0.0f64..5.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (hlo, hhi) = (h2(d, RadiusSpec::finite(lo).unwrap()).unwrap(), h2(d, RadiusSpec::finite(hi).unwrap()).unwrap());
        prop_assert!(hlo <= hhi);
        if hi * hi >= d as f64 + 1e-9 {
            prop_assert!((hhi - d as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn box_rounding_guarantee(u in prop::collection::vec(-4.0f64..4.0, 1..8), fr in 1u64..=4) {
        let u: Vec<f64> = u.iter().map(|v| v.clamp(-(fr as f64), fr as f64)).collect();
        let q = box_rounding(&u, Some(fr)).unwrap();
        let dist2: f64 = q.iter().zip(&u).map(|(&a, b)| (a as f64 - b).powi(2)).sum();
        prop_assert!(dist2 <= u.len() as f64 / 4.0 + 1e-12);
        prop_assert!(q.iter().all(|v| v.unsigned_abs() <= fr));
    }

    #[test]
    fn packings_reverify(d in 2usize..=12, r in 1.0f64..4.0, seed in 0u64..1000) {
        let p = l2_integer_packing(d, RadiusSpec::finite(r).unwrap(), seed).unwrap();
        let r2 = p.radius_sq() as i64;
        let cs: Vec<&[i64]> = p.iter().collect();
        for (i, a) in cs.iter().enumerate() {
            prop_assert_eq!(a.iter().map(|v| v * v).sum::<i64>(), r2);
            for b in &cs[i + 1..] {
                let ip: i64 = a.iter().zip(b.iter()).map(|(x, y)| x * y).sum();
                prop_assert!(2 * ip <= r2);
            }
        }
    }

    #[test]
    fn pinsker_direction(p in 0.0f64..=1.0, q in 0.001f64..0.999) {
        prop_assert!(bernoulli_kl(p, q).unwrap() >= 2.0 * (p - q) * (p - q) - 1e-12);
    }

    #[test]
    fn coin_kl_under_bound(alpha in 0.0f64..=0.25) {
        let k = symmetric_coin_kl(alpha).unwrap();
        prop_assert!(k.exact <= k.bound + 1e-15);
    }

    #[test]
    fn gaussian_kl_symmetric_and_linear(
        t in prop::collection::vec(-3.0f64..3.0, 3),
        u in prop::collection::vec(-3.0f64..3.0, 3),
        sigma in 0.1f64..3.0,
        m in 1u64..100,
    ) {
        let a = gaussian_product_kl(&t, &u, sigma, m).unwrap();
        prop_assert_eq!(a, gaussian_product_kl(&u, &t, sigma, m).unwrap());
        let one = gaussian_product_kl(&t, &u, sigma, 1).unwrap();
        prop_assert!((a - m as f64 * one).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn fano_monotone(kl in 0.0f64..5.0, extra in 0.0f64..5.0, v in 3u64..1000, dv in 0u64..1000) {
        let base = fano_error_lower_bound(kl, v).unwrap();
        prop_assert!(fano_error_lower_bound(kl + extra, v).unwrap() <= base);
        prop_assert!(fano_error_lower_bound(kl, v + dv).unwrap() >= base);
    }

    #[test]
    fn bounds_monotone(
        d in 1usize..20, dd in 0usize..20,
        r in 1.0f64..10.0,
        eps in 0.01f64..1.0, de in 0.0f64..1.0,
        delta in 0.01f64..0.25, ddel in 0.0f64..0.2,
    ) {
        let radius = RadiusSpec::finite(r).unwrap();
        let q = |d: usize, e: f64, dl: f64| BoundQuery::new(d, radius, e, dl).unwrap()
            .with_strong_convexity(1.0, 100.0, 1.0).unwrap();
        let base = q(d, eps, delta);
        let fields = |q: &BoundQuery| {
            let l = linf_lower_bounds(q).unwrap();
            let s = sc_rate_formulas(q, 1.0).unwrap();
            [l.dimension_term, l.confidence_term, l.combined, s.auc_rate, s.erm_rate, s.continuous_erm_rate]
        };
        let b = fields(&base);
        let bigger_eps = fields(&q(d, eps + de, delta));
        let bigger_d = fields(&q(d + dd, eps, delta));
        let bigger_delta = fields(&q(d, eps, (delta + ddel).min(0.45)));
        for i in 0..6 {
            prop_assert!(bigger_eps[i] <= b[i]);
            prop_assert!(bigger_d[i] >= b[i]);
            prop_assert!(bigger_delta[i] <= b[i]);
        }
    }

    #[test]
    fn anchored_families_vanish_at_origin(seed in any::<u64>(), rho in 0.01f64..=0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coin = CoinLinearFamily::dimension(5, 2.0, rho, vec![1, -1, 1, 1, -1]).unwrap();
        let quad = QuadGaussianFamily::new(1.5, 2.0, vec![3.0, -1.0]).unwrap();
        let packing = l2_integer_packing(4, RadiusSpec::finite(2.0).unwrap(), seed % 50).unwrap();
        let tent = TentFamily::from_packing(&packing, 0, rho).unwrap();
        for _ in 0..20 {
            prop_assert_eq!(coin.eval(&[0.0; 5], &coin.sample(&mut rng)), 0.0);
            prop_assert_eq!(quad.eval(&[0.0; 2], &quad.sample(&mut rng)), 0.0);
            prop_assert_eq!(tent.eval(&[0.0; 4], &tent.sample(&mut rng)), 0.0);
        }
    }

    #[test]
    fn coin_population_identity(
        b in prop::collection::vec(prop::bool::ANY, 4),
        x in prop::collection::vec(-3i64..=3, 4),
        num in 1u32..=4,
    ) {
        let rho = num as f64 / 8.0;
        let b: Vec<i8> = b.iter().map(|&s| if s { 1 } else { -1 }).collect();
        let f = CoinLinearFamily::dimension(4, 3.0, rho, b.clone()).unwrap();
        let x: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        let inner: f64 = b.iter().zip(&x).map(|(&s, v)| s as f64 * v).sum();
        prop_assert_eq!(f.objective(&x) + rho / 4.0 * inner, 0.0);
    }

    #[test]
    fn tent_supports_are_disjoint(seed in 0u64..200, pts in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 6), 50)) {
        let packing = l2_integer_packing(6, RadiusSpec::finite(3.0).unwrap(), seed).unwrap();
        let t = TentFamily::from_packing(&packing, 0, 0.5).unwrap();
        for x in &pts {
            let active = (0..t.len()).filter(|&i| t.tent(i, x) > 0.0).count();
            prop_assert!(active <= 1);
        }
    }

    #[test]
    fn integer_erm_is_empirically_optimal(seed in any::<u64>(), d in 1usize..=3, fr in 1u64..=3, m in 1usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = QuadGaussianFamily::new(1.0, 1.0, vec![0.4; d]).unwrap();
        let samples: Vec<Vec<f64>> = (0..m).map(|_| f.sample(&mut rng)).collect();
        let zbar: Vec<f64> = (0..d).map(|j| samples.iter().map(|z| z[j]).sum::<f64>() / m as f64).collect();
        let xhat: Vec<f64> = erm_quadratic_integer_box(&zbar, 1.0, Some(fr)).iter().map(|&v| v as f64).collect();
        let best = empirical_risk(&f, &samples, &xhat).unwrap();
        for x in box_points(d, fr as i64) {
            prop_assert!(best <= empirical_risk(&f, &samples, &x).unwrap() + 1e-10);
        }
    }

    #[test]
    fn sgd_is_deterministic(seed in any::<u64>()) {
        let f = QuadGaussianFamily::new(1.0, 1.0, vec![0.5, -0.5]).unwrap();
        let feas = Feasible::ContinuousBox { radius: 2.0 };
        let run = || projected_sgd(&f, &feas, 50, StepRule::StronglyConvex { mu: 1.0 }, true, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn erm_ignores_constant_shifts(seed in any::<u64>(), c in -1000i32..1000, m in 1usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = box_points(3, 2);
        let coin = CoinLinearFamily::dimension(3, 2.0, 0.5, vec![1, -1, 1]).unwrap();
        let shifted = Offset { inner: coin.clone(), c: c as f64 };
        let s: Vec<CoinSample> = (0..m).map(|_| coin.sample(&mut rng)).collect();
        let a = erm_enumerated(&pts, |x| empirical_risk(&coin, &s, x).unwrap()).unwrap().point;
        let b = erm_enumerated(&pts, |x| empirical_risk(&shifted, &s, x).unwrap()).unwrap().point;
        prop_assert_eq!(a, b);

        // samples on a 1/8 grid keep quadratic risks exact
        let quad = QuadGaussianFamily::new(1.0, 1.0, vec![0.3, -0.7, 1.1]).unwrap();
        let shifted = Offset { inner: quad.clone(), c: c as f64 };
        let s: Vec<Vec<f64>> = (0..m)
            .map(|_| quad.sample(&mut rng).iter().map(|v| (v * 8.0).round() / 8.0).collect())
            .collect();
        let a = erm_enumerated(&pts, |x| empirical_risk(&quad, &s, x).unwrap()).unwrap().point;
        let b = erm_enumerated(&pts, |x| empirical_risk(&shifted, &s, x).unwrap()).unwrap().point;
        prop_assert_eq!(a, b);
    }
}

fn small_config(seed: u64, rule: Rule) -> ExperimentConfig {
    ExperimentConfig {
        id: format!("prop-{seed}"),
        instance: AnyFamily::CoinLinear(CoinLinearFamily::dimension(6, 1.0, 0.3, vec![1; 6]).unwrap()),
        feasible: Feasible::ContinuousBox { radius: 1.0 },
        rule,
        epsilon: 0.1,
        delta: 0.2,
        m_grid: vec![4, 32, 256],
        trials: 40,
        master_seed: seed,
        randomize_instance: true,
        sgd_step: None,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn records_are_identical_across_thread_counts(seed in any::<u64>(), sgd in prop::bool::ANY) {
        let cfg = small_config(seed, if sgd { Rule::Sgd } else { Rule::Majority });
        let csv = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            let out = pool.install(|| run_experiment(&cfg)).unwrap();
            let mut buf = Vec::new();
            write_trials_csv(&mut buf, &cfg, &out.records).unwrap();
            buf
        };
        prop_assert_eq!(csv(1), csv(3));
    }

    #[test]
    fn success_counts_ignore_trial_order(seed in any::<u64>(), shuffle in any::<u64>()) {
        let cfg = small_config(seed, Rule::Majority);
        let out = run_experiment(&cfg).unwrap();
        let mut recs: Vec<_> = out.records.iter().filter(|r| r.m == 32).cloned().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(shuffle);
        for i in (1..recs.len()).rev() {
            recs.swap(i, rng.random_range(0..=i));
        }
        prop_assert_eq!(&SuccessEstimate::from_records(32, &recs), &out.estimates[1]);
    }
}

/// Designated rules gain at least 0.2 success probability across the grid.
#[test]
fn success_rises_across_the_grid() {
    let cfg = small_config(1, Rule::Majority);
    let out = run_experiment(&cfg).unwrap();
    assert!(out.estimates[2].p_hat >= out.estimates[0].p_hat + 0.2, "{:?}", out.estimates);
}
