use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use sco_lab::experiments::{fit_rate, ExperimentSummary};
use sco_lab::info::{linf_lower_bounds, sc_rate_formulas, tent_lower_bound, two_point_kl_threshold, BoundQuery};
use sco_lab::lattice::{
    count_integer_points_l2, enumerate_integer_points, h2, l2_integer_packing, sparse_sign_packing, Norm, RadiusSpec,
    DEFAULT_MAX_ATTEMPTS,
};

mod simulate;
mod verify;

#[derive(Parser)]
#[command(name = "sco-lab", version, about = "Sample-complexity laboratory for stochastic optimization")]
struct Cli {
    /// Worker threads for Monte Carlo trials (default: all cores).
    #[arg(long, global = true, env = "SCO_LAB_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integer-point counts, enumerations and packings.
    Geometry(GeometryArgs),
    /// Evaluate every bound formula for one query, as JSON.
    Bounds(BoundsArgs),
    /// Run invariant suites; exits 1 if any check fails.
    Verify(verify::VerifyArgs),
    /// Run a Monte Carlo experiment and write trials.csv, summary.json, manifest.json.
    Simulate(Box<simulate::SimulateArgs>),
    /// Fit ln m̂ against ln(1/ε) over several summaries.
    Ratefit(RatefitArgs),
}

#[derive(Args)]
struct GeometryArgs {
    #[command(subcommand)]
    what: GeometryCommand,
}

#[derive(Subcommand)]
enum GeometryCommand {
    /// Number of integer points in the ℓ2 ball.
    Count {
        #[arg(long)]
        d: usize,
        #[arg(long = "R")]
        r: RadiusSpec,
    },
    /// The entropy term H₂(d, R).
    H2 {
        #[arg(long)]
        d: usize,
        #[arg(long = "R")]
        r: RadiusSpec,
    },
    /// All integer points of a ball as CSV.
    Enumerate {
        #[arg(long)]
        d: usize,
        #[arg(long = "R")]
        r: RadiusSpec,
        #[arg(long, default_value = "l2")]
        norm: Norm,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integer ℓ2 packing certificate (JSON header line plus CSV).
    Packing {
        #[arg(long)]
        d: usize,
        #[arg(long = "R")]
        r: RadiusSpec,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sparse sign packing certificate.
    SignPacking {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        s: usize,
        #[arg(long, default_value_t = 8)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long)]
    d: usize,
    #[arg(long = "R")]
    r: RadiusSpec,
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long = "L")]
    l: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Multiplier for the rates whose absolute constant is unspecified.
    #[arg(long, default_value_t = 1.0)]
    constant: f64,
    /// Seed of the packing behind the tent bound.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct RatefitArgs {
    /// summary.json files, one per ε.
    #[arg(required = true)]
    summaries: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// How a command failed, and the exit status that goes with it.
pub enum Failure {
    Usage(String),
    Verification(String),
}

impl From<sco_lab::Error> for Failure {
    fn from(e: sco_lab::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

pub type CmdResult = Result<(), Failure>;

/// Writes to `path`, or stdout when absent.
pub fn with_output(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> sco_lab::Result<()>) -> CmdResult {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            let mut file = io::BufWriter::new(fs::File::create(p)?);
            f(&mut file)?;
            file.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)?;
        }
    }
    Ok(())
}

pub fn write_json(path: Option<&Path>, value: &impl serde::Serialize) -> CmdResult {
    let text = serde_json::to_string_pretty(value)?;
    with_output(path, |w| Ok(writeln!(w, "{text}")?))
}

fn geometry(args: GeometryArgs) -> CmdResult {
    match args.what {
        GeometryCommand::Count { d, r } => println!("{}", count_integer_points_l2(d, r)?),
        GeometryCommand::H2 { d, r } => println!("{}", h2(d, r)?),
        GeometryCommand::Enumerate { d, r, norm, out } => {
            let set = enumerate_integer_points(d, r, norm)?;
            with_output(out.as_deref(), |w| set.write_csv(w))?;
        }
        GeometryCommand::Packing { d, r, seed, out } => {
            let p = l2_integer_packing(d, r, seed)?;
            with_output(out.as_deref(), |w| p.write_csv(w))?;
        }
        GeometryCommand::SignPacking { d, s, size, seed, out } => {
            let p = sparse_sign_packing(d, s, size, DEFAULT_MAX_ATTEMPTS, seed)?;
            with_output(out.as_deref(), |w| p.write_csv(w))?;
        }
    }
    Ok(())
}

fn bounds(a: BoundsArgs) -> CmdResult {
    let mut q = BoundQuery::new(a.d, a.r, a.eps, a.delta)?;
    let sc = match (a.mu, a.l, a.sigma) {
        (Some(mu), Some(l), Some(sigma)) => {
            q = q.with_strong_convexity(mu, l, sigma)?;
            Some(sc_rate_formulas(&q, a.constant)?)
        }
        (None, None, None) => None,
        _ => return Err(Failure::Usage("--mu, --L and --sigma must be given together".into())),
    };
    let linf = linf_lower_bounds(&q)?;
    let tent = if a.r.is_finite() {
        l2_integer_packing(a.d, a.r, a.seed).ok().and_then(|p| {
            let r = p.radius();
            let log_w = (p.len() as f64).ln();
            tent_lower_bound(r, a.eps, a.delta, log_w)
                .ok()
                .map(|bound| json!({"r": r, "packing_size": p.len(), "log_W": log_w, "seed": a.seed, "bound": bound}))
        })
    } else {
        None
    };
    let doc = json!({
        "query": q,
        "h2": h2(a.d, a.r).ok(),
        "integer_points_l2": count_integer_points_l2(a.d, a.r).ok().map(|c| c.to_string()),
        "linf": linf,
        "dimension_term": linf.dimension_term,
        "confidence_term": linf.confidence_term,
        "combined": linf.combined,
        "two_point_kl_threshold": two_point_kl_threshold(a.delta).ok(),
        "tent": tent,
        "strongly_convex": sc,
        "constant": a.constant,
    });
    write_json(None, &doc)
}

fn ratefit(a: RatefitArgs) -> CmdResult {
    let mut pairs = Vec::new();
    for path in &a.summaries {
        let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        let s: ExperimentSummary =
            serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        match s.m_hat {
            Some(m) => pairs.push((s.config.epsilon, m as f64)),
            None => eprintln!("skipping {}: no grid point reached 1 - delta", path.display()),
        }
    }
    let fit = fit_rate(&pairs)?;
    write_json(a.out.as_deref(), &fit)
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Geometry(a) => geometry(a),
        Command::Bounds(a) => bounds(a),
        Command::Verify(a) => verify::run(a),
        Command::Simulate(a) => simulate::run(*a),
        Command::Ratefit(a) => ratefit(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
