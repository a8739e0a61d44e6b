use std::fs;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sco_lab::families::{
    verify_regularity, AnyFamily, BlockGadgetFamily, CoinLinearFamily, FamilyDocument, LogisticFamily,
    QuadGaussianFamily, SmallKappaQuadFamily, TentFamily,
};
use sco_lab::lattice::{
    count_integer_points_l2, enumerate_integer_points, l2_integer_packing, sparse_sign_packing, Norm, RadiusSpec,
    DEFAULT_MAX_ATTEMPTS,
};
use sco_lab::solvers::{erm_block_gadget, erm_enumerated, erm_quadratic_integer_box, BLOCK_WINDOW_BUDGET};

use crate::{CmdResult, Failure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Lattice,
    Families,
    Gadget,
    Solvers,
    All,
}

#[derive(Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value = "all")]
    suite: Suite,
    /// Family JSON to check instead of the built-in instances.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Random points per regularity check.
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

struct Check {
    name: String,
    passed: bool,
    detail: String,
}

fn check(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Check {
    Check {
        name: name.into(),
        passed,
        detail: detail.into(),
    }
}

fn lattice_suite(seed: u64) -> Vec<Check> {
    let mut out = Vec::new();
    let mut mismatches = Vec::new();
    for d in 1..=4 {
        for r in [1.0, 1.5, 2.0, 2.5, 3.0] {
            let spec = RadiusSpec::finite(r).unwrap();
            let a = count_integer_points_l2(d, spec);
            let b = enumerate_integer_points(d, spec, Norm::L2).map(|s| s.len() as u128);
            match (a, b) {
                (Ok(a), Ok(b)) if a == b => {}
                (a, b) => mismatches.push(format!("d={d} R={r}: {a:?} vs {b:?}")),
            }
        }
    }
    out.push(check("count_vs_enumeration", mismatches.is_empty(), mismatches.join("; ")));
    let mut bad = Vec::new();
    for k in 0..10u64 {
        let (d, r) = [(4, 2.0), (8, 3.0), (10, 2.5)][k as usize % 3];
        if let Err(e) = l2_integer_packing(d, RadiusSpec::finite(r).unwrap(), seed + k).and_then(|p| p.verify()) {
            bad.push(format!("l2 d={d} R={r}: {e}"));
        }
        let (d, s) = [(8, 2), (16, 4), (24, 6)][k as usize % 3];
        if let Err(e) = sparse_sign_packing(d, s, 4, DEFAULT_MAX_ATTEMPTS, seed + k).and_then(|p| p.verify()) {
            bad.push(format!("sign d={d} s={s}: {e}"));
        }
    }
    out.push(check("packing_certificates", bad.is_empty(), bad.join("; ")));
    out
}

fn default_families(seed: u64) -> Vec<AnyFamily> {
    let packing = l2_integer_packing(4, RadiusSpec::finite(2.0).unwrap(), seed).expect("built-in packing");
    vec![
        AnyFamily::CoinLinear(CoinLinearFamily::dimension(4, 2.0, 0.25, vec![1, -1, 1, -1]).unwrap()),
        AnyFamily::Tent(TentFamily::from_packing(&packing, 0, 0.25).unwrap()),
        AnyFamily::QuadGaussian(QuadGaussianFamily::new(1.0, 1.0, vec![0.3, -0.1, 0.0]).unwrap()),
        AnyFamily::BlockGadget(BlockGadgetFamily::new(5, 1.0, 64.0, 2, 0.02, vec![1, -1], 1.0).unwrap()),
        AnyFamily::SmallKappaQuad(SmallKappaQuadFamily::new(1.0, 0.01, vec![1, -1, 1], 1.0).unwrap()),
        AnyFamily::Logistic(LogisticFamily::new(3, 0.5, 1.0, 0.1).unwrap()),
    ]
}

fn families_suite(families: &[AnyFamily], trials: usize, seed: u64) -> Vec<Check> {
    families
        .iter()
        .flat_map(|f| {
            let rep = verify_regularity(f, trials, seed);
            rep.checks
                .into_iter()
                .map(move |c| check(format!("{}/{}", rep.family, c.name), c.passed, c.detail))
        })
        .collect()
}

fn gadget_suite(gadgets: &[BlockGadgetFamily]) -> Vec<Check> {
    gadgets
        .iter()
        .flat_map(|g| {
            let tag = format!("gadget(L={}, tau={}, gamma={})", g.l, g.tau, g.gamma);
            let v = g.window_violations();
            let (det, trace) = g.block_hessian_det_trace();
            vec![
                check(format!("{tag}/separation_window"), v.is_empty(), v.join("; ")),
                check(
                    format!("{tag}/hessian"),
                    det == g.mu * g.l && trace <= g.l,
                    format!("det {det}, trace {trace}"),
                ),
            ]
        })
        .collect()
}

fn box_points(d: usize, floor_r: u64) -> Vec<Vec<f64>> {
    let r = floor_r as i64;
    let side = (2 * r + 1) as usize;
    (0..side.pow(d as u32))
        .map(|mut k| {
            (0..d)
                .map(|_| {
                    let v = (k % side) as i64 - r;
                    k /= side;
                    v as f64
                })
                .collect()
        })
        .collect()
}

fn solvers_suite(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut quad_bad = Vec::new();
    let mut gadget_bad = Vec::new();
    for i in 0..100 {
        let d = rng.random_range(1..=4usize);
        let fr = rng.random_range(1..=4u64);
        let zbar: Vec<f64> = (0..d).map(|_| rng.random_range(-6.0..6.0)).collect();
        let fast: Vec<f64> = erm_quadratic_integer_box(&zbar, 1.0, Some(fr)).iter().map(|&v| v as f64).collect();
        let obj = |x: &[f64]| x.iter().zip(&zbar).map(|(v, z)| 0.5 * v * v - z * v).sum::<f64>();
        let slow = erm_enumerated(&box_points(d, fr), obj).map(|m| m.point);
        if slow.as_ref().ok() != Some(&fast) {
            quad_bad.push(format!("#{i}"));
        }

        let d = [2usize, 3, 4][i % 3];
        let b: Vec<i8> = (0..d / 2).map(|_| if rng.random_bool(0.5) { 1 } else { -1 }).collect();
        let g = BlockGadgetFamily::new(d, 1.0, 64.0, 2, 1.0 / 24.0, b, 1.0).unwrap();
        let zbar = g.sample_mean(rng.random_range(1..50), &mut rng);
        let fast = erm_block_gadget(&zbar, &g, Some(fr), BLOCK_WINDOW_BUDGET)
            .map(|x| x.into_iter().map(|v| v as f64).collect::<Vec<_>>());
        let slow = erm_enumerated(&box_points(d, fr), |x| g.objective_with_mean(x, &zbar)).map(|m| m.point);
        if fast.ok() != slow.ok() {
            gadget_bad.push(format!("#{i}"));
        }
    }
    vec![
        check("erm_quadratic_integer_box_vs_enumeration", quad_bad.is_empty(), quad_bad.join(" ")),
        check("erm_block_gadget_vs_enumeration", gadget_bad.is_empty(), gadget_bad.join(" ")),
    ]
}

pub fn run(a: VerifyArgs) -> CmdResult {
    let custom = match &a.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).map_err(|e| Failure::Usage(format!("--config {}: {e}", path.display())))?;
            Some(FamilyDocument::from_json(&text)?.family)
        }
        None => None,
    };
    let families = custom.clone().map_or_else(|| default_families(a.seed), |f| vec![f]);
    let gadgets: Vec<BlockGadgetFamily> = match &custom {
        Some(AnyFamily::BlockGadget(g)) => vec![g.clone()],
        Some(_) if a.suite == Suite::Gadget => {
            return Err(Failure::Usage("--suite gadget needs a block_gadget --config".into()));
        }
        Some(_) => Vec::new(),
        None => [(64.0, 1), (64.0, 2), (256.0, 1), (256.0, 2)]
            .iter()
            .map(|&(l, tau)| BlockGadgetFamily::new(2, 1.0, l, tau, 1.0 / 24.0, vec![1], 1.0).unwrap())
            .collect(),
    };
    let mut checks = Vec::new();
    let all = a.suite == Suite::All;
    if all || a.suite == Suite::Lattice {
        checks.extend(lattice_suite(a.seed));
    }
    if all || a.suite == Suite::Families {
        checks.extend(families_suite(&families, a.trials, a.seed));
    }
    if all || a.suite == Suite::Gadget {
        checks.extend(gadget_suite(&gadgets));
    }
    if all || a.suite == Suite::Solvers {
        checks.extend(solvers_suite(a.seed));
    }
    let mut failed = 0;
    for c in &checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        if c.detail.is_empty() {
            println!("{status} {}", c.name);
        } else {
            println!("{status} {}: {}", c.name, c.detail);
        }
        failed += !c.passed as usize;
    }
    println!("{} checks, {failed} failed", checks.len());
    if failed > 0 {
        return Err(Failure::Verification(format!("{failed} of {} checks failed", checks.len())));
    }
    Ok(())
}
