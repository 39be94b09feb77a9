use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fairdiv_core::allocators::Algorithm;
use fairdiv_core::assignment_dynamics::{greedy_assignment, ode_y, ode_z};
use fairdiv_core::harness::{run_and_write, ConfigOverrides, ExperimentConfig};
use fairdiv_core::matching::{max_weight_assignment, WeightedAssignmentProblem};
use fairdiv_core::model::{fairness_report, sample_instance, AllocationDocument};
use fairdiv_core::oracle::{
    brute_max_weight, exists_ef_assignment_bruteforce, exists_fair_allocation, Criterion,
};
use fairdiv_core::{DistributionSpec, Error, Instance, RankingProfile, RngStream};

#[derive(Parser)]
#[command(
    name = "fairdiv",
    version,
    about = "Fair division of random indivisible items"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment and write CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        experiment: Option<String>,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Allocate one instance and print the result as JSON.
    Alloc {
        #[arg(long, required_unless_present = "input")]
        n: Option<usize>,
        #[arg(long, required_unless_present = "input")]
        m: Option<usize>,
        #[arg(long, default_value = "uniform")]
        dist: String,
        #[arg(long, default_value = "efx-auto")]
        algo: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Instance JSON (`{"n", "m", "utilities"}`) used instead of sampling.
        #[arg(long, conflicts_with_all = ["n", "m"])]
        input: Option<PathBuf>,
    },
    /// Print s, z(s), y(s) on an evenly spaced grid of [0, 1).
    Ode {
        #[arg(long, default_value_t = 100)]
        points: usize,
    },
    /// Cross-check fast algorithms against exhaustive search.
    Oracle {
        #[arg(long, value_enum, default_value_t = Suite::Tiny)]
        suite: Suite,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Tiny,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io { .. } => 3,
        Error::Config { .. }
        | Error::Parse(_)
        | Error::InvalidDistribution(_)
        | Error::Domain(_)
        | Error::Precondition(_) => 2,
        Error::TooLarge(_) => 1,
    }
}

fn stdout_error(source: std::io::Error) -> Error {
    Error::Io {
        path: PathBuf::from("<stdout>"),
        source,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            config,
            experiment,
            trials,
            seed,
            threads,
            out,
        } => {
            let overrides = ConfigOverrides {
                experiment,
                trials,
                master_seed: seed,
                threads,
                out_path: out,
            };
            ExperimentConfig::from_path(&config, &overrides)
                .and_then(|cfg| run_and_write(&cfg))
                .map(|_| true)
        }
        Command::Alloc {
            n,
            m,
            dist,
            algo,
            seed,
            input,
        } => alloc(n, m, &dist, &algo, seed, input).map(|_| true),
        Command::Ode { points } => ode(points).map(|_| true),
        Command::Oracle {
            suite: Suite::Tiny,
            trials,
            seed,
        } => oracle_tiny(trials, seed),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(err) => {
            eprintln!("fairdiv: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn alloc(
    n: Option<usize>,
    m: Option<usize>,
    dist: &str,
    algo: &str,
    seed: u64,
    input: Option<PathBuf>,
) -> Result<(), Error> {
    let spec: DistributionSpec = dist.parse().map_err(|e: Error| Error::Config {
        field: "dist".into(),
        message: e.to_string(),
    })?;
    let algorithm: Algorithm = algo.parse().map_err(|e: Error| Error::Config {
        field: "algo".into(),
        message: e.to_string(),
    })?;
    let inst = match input {
        Some(path) => {
            let text =
                std::fs::read_to_string(&path).map_err(|source| Error::Io { path, source })?;
            serde_json::from_str::<Instance>(&text).map_err(|e| Error::Parse(e.to_string()))?
        }
        None => sample_instance(
            n.expect("clap"),
            m.expect("clap"),
            &spec,
            &mut RngStream::from_seed(seed),
        )?,
    };
    let res = algorithm.run(&inst, spec.alpha())?;
    let report = res.allocation.as_ref().map(|a| fairness_report(&inst, a));
    let doc = AllocationDocument {
        n: inst.n(),
        m: inst.m(),
        utilities: inst.utilities().to_vec(),
        algorithm: res.algorithm.to_string(),
        fallback_used: res.fallback_used,
        bundles: res.allocation.as_ref().map(|a| a.bundles().to_vec()),
        flags: report.as_ref().map(|r| r.flags),
        witness: report.and_then(|r| r.witness),
    };
    let text = serde_json::to_string_pretty(&doc).map_err(|e| Error::Parse(e.to_string()))?;
    writeln!(std::io::stdout().lock(), "{text}").map_err(stdout_error)
}

fn ode(points: usize) -> Result<(), Error> {
    if points == 0 {
        return Err(Error::Config {
            field: "points".into(),
            message: "must be >= 1".into(),
        });
    }
    let mut out = std::io::BufWriter::new(std::io::stdout().lock());
    writeln!(out, "s\tz\ty").map_err(stdout_error)?;
    for k in 0..points {
        let s = k as f64 / points as f64;
        let (z, y) = (ode_z(s)?, ode_y(s)?);
        writeln!(out, "{s:.6}\t{z:.12}\t{y:.12}").map_err(stdout_error)?;
    }
    out.flush().map_err(stdout_error)
}

/// Prints one agreement line per check; returns false on any disagreement.
fn oracle_tiny(trials: u64, seed: u64) -> Result<bool, Error> {
    let mut rng = RngStream::from_seed(seed);
    let spec = DistributionSpec::uniform();
    let (mut greedy_bad, mut weight_bad, mut ef1_bad, mut efx_bad) = (0u64, 0u64, 0u64, 0u64);
    for _ in 0..trials {
        let profile = RankingProfile::uniform_random(1 + rng.below(4), 1 + rng.below(7), &mut rng);
        let greedy = greedy_assignment(&profile).0.is_some();
        greedy_bad += u64::from(greedy != exists_ef_assignment_bruteforce(&profile)?.is_some());

        let weights = (0..30).map(|_| rng.uniform()).collect();
        let allowed = (0..30).map(|_| rng.uniform() < 0.7).collect();
        let p = WeightedAssignmentProblem::new(5, 6, weights, allowed)?;
        let fast = max_weight_assignment(&p).map(|s| s.total_weight);
        let slow = brute_max_weight(&p)?;
        let agree = match (fast, slow) {
            (Some(a), Some(b)) => (a - b).abs() <= 1e-12,
            (None, None) => true,
            _ => false,
        };
        weight_bad += u64::from(!agree);

        let inst = sample_instance(1 + rng.below(3), 1 + rng.below(5), &spec, &mut rng)?;
        ef1_bad += u64::from(exists_fair_allocation(&inst, Criterion::Ef1)?.is_none());
        let efx = Algorithm::EfxAuto.run(&inst, 1.0)?;
        let found = efx
            .allocation
            .is_some_and(|a| fairness_report(&inst, &a).flags.efx);
        efx_bad += u64::from(found && exists_fair_allocation(&inst, Criterion::Efx)?.is_none());
    }
    let mut out = std::io::stdout().lock();
    for (name, bad) in [
        ("greedy assignment vs exhaustive injections", greedy_bad),
        ("hungarian vs exhaustive injections", weight_bad),
        ("EF1 allocation exists", ef1_bad),
        ("EFX found implies EFX exists", efx_bad),
    ] {
        writeln!(out, "{name}: {} of {trials} agree", trials - bad).map_err(stdout_error)?;
    }
    Ok(greedy_bad + weight_bad + ef1_bad + efx_bad == 0)
}
