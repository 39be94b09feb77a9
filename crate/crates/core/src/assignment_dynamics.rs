//! Greedy envy-free assignment, the Markov chain it induces, and the ODE
//! limit of that chain.
//!
//! During the greedy run `X` counts valid items nobody holds and `Y` counts
//! assigned agents. Every iteration either assigns a free valid item
//! (`X - 1, Y + 1`) or invalidates a held one and frees its holder
//! (`X, Y - 1`), so `2 X_t + Y_t = 2m - t` throughout.

use std::collections::HashMap;
use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Assignment, RankingProfile};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub m: usize,
    pub x: Vec<usize>,
    pub y: Vec<usize>,
}

impl TrajectoryRecord {
    fn start(m: usize) -> Self {
        Self {
            m,
            x: vec![m],
            y: vec![0],
        }
    }

    fn push(&mut self, x: usize, y: usize) {
        self.x.push(x);
        self.y.push(y);
    }

    /// Number of recorded steps `T`; the record holds `T + 1` states.
    pub fn len(&self) -> usize {
        self.x.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_complete(&self) -> bool {
        self.len() == 2 * self.m
    }

    pub fn max_y(&self) -> usize {
        self.y.iter().copied().max().unwrap_or(0)
    }

    /// True iff `2 X_t + Y_t = 2m - t` at every recorded `t`.
    pub fn satisfies_identity(&self) -> bool {
        self.x
            .iter()
            .zip(&self.y)
            .enumerate()
            .all(|(t, (&x, &y))| 2 * x + y + t == 2 * self.m)
    }
}

/// Yields each agent's ranking one position at a time.
pub trait PreferenceSource {
    fn agents(&self) -> usize;
    fn items(&self) -> usize;
    /// Item at `position` in `agent`'s ranking. Positions are requested in
    /// nondecreasing order per agent.
    fn item_at(&mut self, agent: usize, position: usize) -> usize;
}

impl PreferenceSource for &RankingProfile {
    fn agents(&self) -> usize {
        self.n()
    }
    fn items(&self) -> usize {
        self.m()
    }
    fn item_at(&mut self, agent: usize, position: usize) -> usize {
        self.ranking(agent)[position]
    }
}

/// Uniformly random rankings revealed on demand by a per-agent partial
/// Fisher-Yates shuffle. Only the prefix each agent actually inspects is
/// ever drawn.
#[derive(Debug)]
pub struct LazyUniformRankings<'a> {
    m: usize,
    rng: &'a mut RngStream,
    revealed: Vec<Vec<usize>>,
    swaps: Vec<HashMap<usize, usize>>,
}

impl<'a> LazyUniformRankings<'a> {
    pub fn new(n: usize, m: usize, rng: &'a mut RngStream) -> Self {
        Self {
            m,
            rng,
            revealed: vec![Vec::new(); n],
            swaps: vec![HashMap::new(); n],
        }
    }
}

impl PreferenceSource for LazyUniformRankings<'_> {
    fn agents(&self) -> usize {
        self.revealed.len()
    }
    fn items(&self) -> usize {
        self.m
    }
    fn item_at(&mut self, agent: usize, position: usize) -> usize {
        let shown = &mut self.revealed[agent];
        while shown.len() <= position {
            let p = shown.len();
            let swaps = &mut self.swaps[agent];
            let k = p + self.rng.below(self.m - p);
            let at_k = swaps.get(&k).copied().unwrap_or(k);
            let at_p = swaps.get(&p).copied().unwrap_or(p);
            swaps.insert(k, at_p);
            swaps.remove(&p);
            shown.push(at_k);
        }
        shown[position]
    }
}

/// Greedy envy-free assignment on an explicit profile.
pub fn greedy_assignment(profile: &RankingProfile) -> (Option<Assignment>, TrajectoryRecord) {
    greedy_assignment_with(profile)
}

/// Greedy envy-free assignment: the lowest-index unassigned agent looks at
/// her favourite valid item. A free item is assigned to her; a held item is
/// invalidated and its holder unassigned. Stops with an assignment once
/// every agent holds an item, or with `None` once no valid item remains.
pub fn greedy_assignment_with<P: PreferenceSource>(
    mut prefs: P,
) -> (Option<Assignment>, TrajectoryRecord) {
    let n = prefs.agents();
    let m = prefs.items();
    let mut cursor = vec![0usize; n];
    let mut holder: Vec<Option<usize>> = vec![None; m];
    let mut valid = vec![true; m];
    let mut assigned: Vec<Option<usize>> = vec![None; n];
    // unassigned agents, lowest index on top
    let mut idle: std::collections::BinaryHeap<std::cmp::Reverse<usize>> =
        (0..n).map(std::cmp::Reverse).collect();
    let mut valid_count = m;
    let mut y = 0usize;
    let mut trace = TrajectoryRecord::start(m);
    while let Some(&std::cmp::Reverse(agent)) = idle.peek() {
        if valid_count == 0 {
            return (None, trace);
        }
        let item = loop {
            let j = prefs.item_at(agent, cursor[agent]);
            if valid[j] {
                break j;
            }
            cursor[agent] += 1;
        };
        match holder[item] {
            Some(other) => {
                valid[item] = false;
                valid_count -= 1;
                holder[item] = None;
                assigned[other] = None;
                idle.push(std::cmp::Reverse(other));
                y -= 1;
            }
            None => {
                holder[item] = Some(agent);
                assigned[agent] = Some(item);
                idle.pop();
                y += 1;
            }
        }
        trace.push(valid_count - y, y);
    }
    let assignment = Assignment::new(assigned).expect("holders are unique");
    (Some(assignment), trace)
}

/// Greedy on `n` uniformly random rankings of `m` items, revealed lazily.
pub fn greedy_uniform_random(
    n: usize,
    m: usize,
    rng: &mut RngStream,
) -> (Option<Assignment>, TrajectoryRecord) {
    greedy_assignment_with(LazyUniformRankings::new(n, m, rng))
}

/// Runs the chain `X_{t+1} = X_t - 1` with probability
/// `X_t / (2m - t - X_t)` for `t = 0..2m`, with `Y_t = 2m - t - 2 X_t`.
pub fn simulate_markov(m: usize, rng: &mut RngStream) -> Result<TrajectoryRecord> {
    if m == 0 {
        return Err(Error::Precondition("Markov chain needs m >= 1".into()));
    }
    let mut trace = TrajectoryRecord::start(m);
    let mut x = m;
    for t in 0..2 * m {
        let left = 2 * m - t - x; // X_t + Y_t, positive for t < 2m
        if rng.uniform() * (left as f64) < x as f64 {
            x -= 1;
        }
        trace.push(x, 2 * m - (t + 1) - 2 * x);
    }
    Ok(trace)
}

pub const S_STAR: f64 = 1.0 - 3.0 / (2.0 * E);
pub const Z_STAR: f64 = 1.0 / (2.0 * E);
pub const Y_STAR: f64 = 1.0 / (2.0 * E);

fn ode_residual(z: f64, s: f64) -> f64 {
    2.0 * z - z * (2.0 * z).ln() - (1.0 - s)
}

/// Root in `(0, 1/2]` of `2z - z ln(2z) = 1 - s`, by bisection.
pub fn ode_z(s: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&s) {
        return Err(Error::Domain(format!("ode_z needs s in [0, 1), got {s}")));
    }
    let (mut lo, mut hi) = (0.0_f64, 0.5_f64);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if ode_residual(mid, s) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// `y(s) = z ln(1 / (2z))`, the rescaled number of assigned agents.
pub fn ode_y(s: f64) -> Result<f64> {
    let z = ode_z(s)?;
    Ok(z * (0.5 / z).ln())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakStats {
    pub s_star: f64,
    pub z_star: f64,
    pub y_star: f64,
    /// Maximum of `y` over `s = k / 10^4`, `k = 0..10^4`.
    pub grid_max: f64,
}

pub fn peak_stats() -> PeakStats {
    let grid_max = (0..10_000)
        .map(|k| ode_y(k as f64 / 10_000.0).expect("grid inside [0, 1)"))
        .fold(f64::NEG_INFINITY, f64::max);
    PeakStats {
        s_star: S_STAR,
        z_star: Z_STAR,
        y_star: Y_STAR,
        grid_max,
    }
}

/// `z(t / 2m)` for `t = 0..2m`, reusable across trajectories of one size.
#[derive(Debug, Clone)]
pub struct OdeTable {
    m: usize,
    z: Vec<f64>,
}

impl OdeTable {
    pub fn new(m: usize) -> Self {
        let steps = 2 * m;
        let z = (0..steps)
            .map(|t| ode_z(t as f64 / steps as f64).expect("t < 2m"))
            .collect();
        Self { m, z }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// `max_t |X_t - 2m z(t/2m)| / m` over `t = 0..2m-1`.
    pub fn deviation(&self, tr: &TrajectoryRecord) -> Result<f64> {
        if !tr.is_complete() {
            return Err(Error::Precondition(format!(
                "deviation needs a full trajectory of {} steps, got {}",
                2 * tr.m,
                tr.len()
            )));
        }
        if tr.m != self.m {
            return Err(Error::Precondition(format!(
                "table built for m = {}, trajectory has m = {}",
                self.m, tr.m
            )));
        }
        let two_m = 2.0 * self.m as f64;
        let worst = self
            .z
            .iter()
            .zip(&tr.x)
            .map(|(&z, &x)| (x as f64 - two_m * z).abs())
            .fold(0.0, f64::max);
        Ok(worst / self.m as f64)
    }
}

pub fn trajectory_deviation(tr: &TrajectoryRecord) -> Result<f64> {
    OdeTable::new(tr.m).deviation(tr)
}
