//! Seeded Monte Carlo experiments.
//!
//! A config names a preset, a grid of `(n, m)` cells and a trial count.
//! Trial `k` of cell `c` draws from its own stream derived from
//! `(master_seed, c, k)`, so results do not depend on scheduling and the
//! CSV is a pure function of the config.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

use crate::allocators::{round_robin, simulate_rr_generative, Algorithm};
use crate::assignment_dynamics::{greedy_uniform_random, simulate_markov, OdeTable};
use crate::distributions::DistributionSpec;
use crate::error::{Error, Result};
use crate::model::{fairness_report, sample_instance};
use crate::rng::RngStream;
use crate::stats::{ks_two_sample, wilson_interval};

/// Largest Markov-chain deviation counted as a success.
pub const WORMALD_TOLERANCE: f64 = 0.02;
/// Largest KS distance counted as a success.
pub const KS_TOLERANCE: f64 = 0.01;
/// Upper bound on `r n` for ratio cells.
const MAX_ITEMS: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Experiment {
    EfSweep,
    PropSweep,
    EfxSweep,
    AssignThreshold,
    Wormald,
    Lemma4Ks,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::EfSweep,
        Experiment::PropSweep,
        Experiment::EfxSweep,
        Experiment::AssignThreshold,
        Experiment::Wormald,
        Experiment::Lemma4Ks,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::EfSweep => "ef-sweep",
            Experiment::PropSweep => "prop-sweep",
            Experiment::EfxSweep => "efx-sweep",
            Experiment::AssignThreshold => "assign-threshold",
            Experiment::Wormald => "wormald",
            Experiment::Lemma4Ks => "lemma4-ks",
        }
    }

    /// Allocation algorithm run by the sweeps when the config names none.
    pub fn default_algorithm(self) -> Option<Algorithm> {
        match self {
            Experiment::EfSweep => Some(Algorithm::RoundRobin),
            Experiment::PropSweep => Some(Algorithm::PropAuto),
            Experiment::EfxSweep => Some(Algorithm::EfxAuto),
            _ => None,
        }
    }

    /// Label for the `algorithm` column of presets that do not allocate.
    fn process_label(self) -> &'static str {
        match self {
            Experiment::AssignThreshold => "greedy",
            Experiment::Wormald => "markov",
            Experiment::Lemma4Ks => "rr-generative",
            _ => unreachable!("allocation presets carry an algorithm"),
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::config("experiment", format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ItemCounts {
    Absolute(Vec<usize>),
    /// `m = ceil(r n)`.
    Ratio(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub n_values: Vec<usize>,
    pub items: ItemCounts,
    pub distribution: DistributionSpec,
    pub algorithm: Option<Algorithm>,
    pub trials: u64,
    pub master_seed: u64,
    pub threads: usize,
    pub out_path: Option<PathBuf>,
    /// Sample size per side of each KS comparison in `lemma4-ks`.
    pub ks_samples: usize,
    /// Fill `wall_ms` with measured time; off by default so output stays
    /// byte-reproducible.
    pub record_timing: bool,
}

const KNOWN_KEYS: [&str; 12] = [
    "experiment",
    "n_values",
    "m_values",
    "ratio_values",
    "distribution",
    "algorithm",
    "trials",
    "master_seed",
    "threads",
    "out_path",
    "ks_samples",
    "record_timing",
];

/// Command-line values that replace config-file fields one by one.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigOverrides {
    pub experiment: Option<String>,
    pub trials: Option<u64>,
    pub master_seed: Option<u64>,
    pub threads: Option<usize>,
    pub out_path: Option<PathBuf>,
}

fn field<T: DeserializeOwned>(map: &Map<String, Value>, key: &str) -> Result<Option<T>> {
    map.get(key)
        .map(|v| serde_json::from_value(v.clone()).map_err(|e| Error::config(key, e.to_string())))
        .transpose()
}

fn required<T: DeserializeOwned>(map: &Map<String, Value>, key: &str) -> Result<T> {
    field(map, key)?.ok_or_else(|| Error::config(key, "missing required field"))
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_json_with(text, &ConfigOverrides::default())
    }

    /// Parses a JSON config, then applies `overrides`.
    pub fn from_json_with(text: &str, overrides: &ConfigOverrides) -> Result<Self> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| Error::config("<document>", e.to_string()))?;
        let Value::Object(map) = value else {
            return Err(Error::config("<document>", "expected a JSON object"));
        };
        if let Some(unknown) = map.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            return Err(Error::config(unknown.as_str(), "unknown field"));
        }

        let experiment = match &overrides.experiment {
            Some(name) => name.clone(),
            None => required::<String>(&map, "experiment")?,
        };
        let experiment: Experiment = experiment.parse()?;
        let items = match (
            field::<Vec<usize>>(&map, "m_values")?,
            field::<Vec<f64>>(&map, "ratio_values")?,
        ) {
            (Some(ms), None) => ItemCounts::Absolute(ms),
            (None, Some(rs)) => ItemCounts::Ratio(rs),
            (Some(_), Some(_)) => {
                return Err(Error::config(
                    "m_values",
                    "give exactly one of m_values and ratio_values",
                ))
            }
            (None, None) => {
                return Err(Error::config(
                    "m_values",
                    "one of m_values and ratio_values is required",
                ))
            }
        };
        let distribution = match field::<String>(&map, "distribution")? {
            Some(s) => s
                .parse()
                .map_err(|e: Error| Error::config("distribution", e.to_string()))?,
            None => DistributionSpec::uniform(),
        };
        let algorithm = field::<String>(&map, "algorithm")?
            .map(|s| {
                s.parse::<Algorithm>()
                    .map_err(|e| Error::config("algorithm", e.to_string()))
            })
            .transpose()?;

        let cfg = ExperimentConfig {
            experiment,
            n_values: required(&map, "n_values")?,
            items,
            distribution,
            algorithm,
            trials: match overrides.trials {
                Some(t) => t,
                None => required(&map, "trials")?,
            },
            master_seed: match overrides.master_seed {
                Some(s) => s,
                None => required(&map, "master_seed")?,
            },
            threads: overrides.threads.or(field(&map, "threads")?).unwrap_or(1),
            out_path: overrides.out_path.clone().or(field(&map, "out_path")?),
            ks_samples: field(&map, "ks_samples")?.unwrap_or(100_000),
            record_timing: field(&map, "record_timing")?.unwrap_or(false),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path, overrides: &ConfigOverrides) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_json_with(&text, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_values.is_empty() || self.n_values.contains(&0) {
            return Err(Error::config(
                "n_values",
                "need at least one value, all >= 1",
            ));
        }
        match &self.items {
            ItemCounts::Absolute(ms) if ms.is_empty() || ms.contains(&0) => {
                return Err(Error::config(
                    "m_values",
                    "need at least one value, all >= 1",
                ));
            }
            ItemCounts::Ratio(rs)
                if rs.is_empty() || rs.iter().any(|r| !r.is_finite() || *r <= 0.0) =>
            {
                return Err(Error::config(
                    "ratio_values",
                    "need at least one value, all finite and > 0",
                ));
            }
            ItemCounts::Ratio(rs) => {
                let widest = *self.n_values.iter().max().expect("checked non-empty") as f64;
                if rs.iter().any(|r| r * widest > MAX_ITEMS) {
                    return Err(Error::config(
                        "ratio_values",
                        format!("r * n must stay below {MAX_ITEMS:e}"),
                    ));
                }
            }
            _ => {}
        }
        if self.trials == 0 {
            return Err(Error::config("trials", "must be >= 1"));
        }
        if self.threads == 0 {
            return Err(Error::config("threads", "must be >= 1"));
        }
        if self.ks_samples == 0 {
            return Err(Error::config("ks_samples", "must be >= 1"));
        }
        if self.algorithm.is_some() && self.experiment.default_algorithm().is_none() {
            return Err(Error::config(
                "algorithm",
                format!("`{}` does not run an allocation algorithm", self.experiment),
            ));
        }
        Ok(())
    }

    /// `(n, m)` cells in config order.
    pub fn cells(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for &n in &self.n_values {
            match &self.items {
                ItemCounts::Absolute(ms) => out.extend(ms.iter().map(|&m| (n, m))),
                // the small slack keeps e.g. 1.1 * 100 at 110
                ItemCounts::Ratio(rs) => out.extend(
                    rs.iter()
                        .map(|&r| (n, ((r * n as f64) - 1e-9).ceil().max(1.0) as usize)),
                ),
            }
        }
        out
    }

    fn algorithm_label(&self) -> String {
        match self.algorithm.or(self.experiment.default_algorithm()) {
            Some(a) => a.to_string(),
            None => self.experiment.process_label().to_owned(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub success: bool,
    pub statistic: Option<f64>,
    pub fallback_used: bool,
    pub wall_micros: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: Experiment,
    pub algorithm: String,
    pub distribution: String,
    pub n: usize,
    pub m: usize,
    pub trials: u64,
    pub successes: u64,
    pub p_hat: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    pub mean_stat: Option<f64>,
    pub fallback_count: u64,
    pub seed: u64,
    pub wall_ms: f64,
}

pub const CSV_HEADER: [&str; 14] = [
    "experiment",
    "algorithm",
    "distribution",
    "n",
    "m",
    "trials",
    "successes",
    "p_hat",
    "ci95_low",
    "ci95_high",
    "mean_stat",
    "fallback_count",
    "seed",
    "wall_ms",
];

/// Runs one trial of `cfg` on cell `(n, m)`.
pub fn run_trial(
    cfg: &ExperimentConfig,
    n: usize,
    m: usize,
    rng: &mut RngStream,
) -> Result<TrialOutcome> {
    let start = Instant::now();
    let alpha = cfg.distribution.alpha();
    let (success, statistic, fallback_used) = match cfg.experiment {
        Experiment::EfSweep | Experiment::PropSweep | Experiment::EfxSweep => {
            let inst = sample_instance(n, m, &cfg.distribution, rng)?;
            let algorithm = cfg
                .algorithm
                .or(cfg.experiment.default_algorithm())
                .expect("sweep");
            let res = match algorithm.run(&inst, alpha) {
                Ok(res) => res,
                // the named algorithm does not apply to this cell
                Err(Error::Precondition(_)) => return Ok(failure(start)),
                Err(e) => return Err(e),
            };
            // leftover goods never break proportionality, so partial
            // allocations count there; envy notions need every item placed
            let success = res.allocation.as_ref().is_some_and(|a| {
                let flags = fairness_report(&inst, a).flags;
                match cfg.experiment {
                    Experiment::PropSweep => flags.proportional,
                    Experiment::EfSweep => a.is_complete() && flags.envy_free,
                    _ => a.is_complete() && flags.efx,
                }
            });
            (success, None, res.fallback_used)
        }
        Experiment::AssignThreshold => {
            let (res, trace) = greedy_uniform_random(n, m, rng);
            (res.is_some(), Some(trace.max_y() as f64 / m as f64), false)
        }
        Experiment::Wormald => {
            let trace = simulate_markov(m, rng)?;
            let dev = OdeTable::new(m).deviation(&trace)?;
            (dev <= WORMALD_TOLERANCE, Some(dev), false)
        }
        Experiment::Lemma4Ks => {
            let ks = lemma4_ks(n, m, &cfg.distribution, cfg.ks_samples, rng)?;
            (ks <= KS_TOLERANCE, Some(ks), false)
        }
    };
    Ok(TrialOutcome {
        success,
        statistic,
        fallback_used,
        wall_micros: start.elapsed().as_micros() as u64,
    })
}

fn failure(start: Instant) -> TrialOutcome {
    TrialOutcome {
        success: false,
        statistic: None,
        fallback_used: false,
        wall_micros: start.elapsed().as_micros() as u64,
    }
}

/// Largest two-sample KS distance, over agents, between first-round pick
/// values from real round-robin runs and from the sequential sampler.
pub fn lemma4_ks(
    n: usize,
    m: usize,
    spec: &DistributionSpec,
    samples: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    let agents = n.min(m);
    let mut real = vec![Vec::with_capacity(samples); agents];
    let mut generated = vec![Vec::with_capacity(samples); agents];
    for _ in 0..samples {
        let inst = sample_instance(n, m, spec, rng)?;
        let (_, trace) = round_robin(&inst);
        for p in trace.picks.iter().take(agents) {
            real[p.agent].push(p.value);
        }
        let x = simulate_rr_generative(n, m, spec, rng)?;
        for (i, column) in generated.iter_mut().enumerate() {
            column.push(x.get(i, i, 1).expect("every agent picks in round one"));
        }
    }
    Ok(real
        .iter()
        .zip(&generated)
        .map(|(a, b)| ks_two_sample(a, b))
        .fold(0.0, f64::max))
}

/// Runs every cell of `cfg` and returns rows sorted by `(experiment, n, m)`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::config("threads", e.to_string()))?;
    let cells = cfg.cells();
    let mut rows = Vec::with_capacity(cells.len());
    for (cell, &(n, m)) in cells.iter().enumerate() {
        let outcomes: Vec<TrialOutcome> = pool.install(|| {
            (0..cfg.trials)
                .into_par_iter()
                .map(|k| {
                    let mut rng = RngStream::derive(cfg.master_seed, &[cell as u64, k]);
                    run_trial(cfg, n, m, &mut rng)
                })
                .collect::<Result<_>>()
        })?;
        rows.push(aggregate(cfg, n, m, &outcomes)?);
    }
    rows.sort_by_key(|r| (r.experiment, r.n, r.m));
    Ok(rows)
}

fn aggregate(
    cfg: &ExperimentConfig,
    n: usize,
    m: usize,
    outcomes: &[TrialOutcome],
) -> Result<ResultRow> {
    let trials = outcomes.len() as u64;
    let successes = outcomes.iter().filter(|o| o.success).count() as u64;
    let (ci95_low, ci95_high) = wilson_interval(successes, trials)?;
    let stats: Vec<f64> = outcomes.iter().filter_map(|o| o.statistic).collect();
    let mean_stat = (!stats.is_empty()).then(|| stats.iter().sum::<f64>() / stats.len() as f64);
    let wall_ms = if cfg.record_timing {
        outcomes.iter().map(|o| o.wall_micros).sum::<u64>() as f64 / 1000.0
    } else {
        0.0
    };
    Ok(ResultRow {
        experiment: cfg.experiment,
        algorithm: cfg.algorithm_label(),
        distribution: cfg.distribution.to_string(),
        n,
        m,
        trials,
        successes,
        p_hat: successes as f64 / trials as f64,
        ci95_low,
        ci95_high,
        mean_stat,
        fallback_count: outcomes.iter().filter(|o| o.fallback_used).count() as u64,
        seed: cfg.master_seed,
        wall_ms,
    })
}

/// `%g`-style formatting with 6 significant digits.
pub fn format_real(x: f64) -> String {
    if x == 0.0 {
        return "0".to_owned();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    trim_zeros(&format!("{x:.*}", (5 - exp) as usize)).to_owned()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Writes the header and `rows` as LF-terminated CSV.
pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.experiment.name().to_owned(),
            r.algorithm.clone(),
            r.distribution.clone(),
            r.n.to_string(),
            r.m.to_string(),
            r.trials.to_string(),
            r.successes.to_string(),
            format_real(r.p_hat),
            format_real(r.ci95_low),
            format_real(r.ci95_high),
            r.mean_stat.map(format_real).unwrap_or_default(),
            r.fallback_count.to_string(),
            r.seed.to_string(),
            format_real(r.wall_ms),
        ])?;
    }
    w.flush()
}

pub fn csv_string(rows: &[ResultRow]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("CSV fields are UTF-8")
}

/// Runs `cfg` and writes the CSV to `cfg.out_path`, or stdout when unset.
pub fn run_and_write(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let rows = run_experiment(cfg)?;
    match &cfg.out_path {
        Some(path) => {
            let io_err = |source| Error::Io {
                path: path.clone(),
                source,
            };
            let file = std::fs::File::create(path).map_err(io_err)?;
            write_csv(&rows, std::io::BufWriter::new(file)).map_err(io_err)?;
        }
        None => write_csv(&rows, std::io::stdout().lock()).map_err(|source| Error::Io {
            path: PathBuf::from("<stdout>"),
            source,
        })?,
    }
    Ok(rows)
}
