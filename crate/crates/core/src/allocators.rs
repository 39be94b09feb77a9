//! Allocation algorithms.
//!
//! * round-robin and round-robin with the final partial round reversed;
//! * threshold matching and the two-stage proportional matching;
//! * EFX via an envy-free balanced allocation, and the maximum-assignment
//!   EFX construction for `m = n + q`;
//! * case dispatchers for EFX and proportionality;
//! * the sequential sampler that reproduces round-robin's value tensor
//!   without ever building an instance.
//!
//! Threshold parameters take `alpha`, the lower density bound of the value
//! distribution; every threshold is clamped to `[0, 1]`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distributions::DistributionSpec;
use crate::error::{Error, Result};
use crate::matching::{
    max_cardinality_matching, max_weight_assignment, saturating_matching, topological_order,
    BipartiteGraph, Digraph, SaturationOutcome, TopologicalOutcome, WeightedAssignmentProblem,
};
use crate::model::{fairness_report, Allocation, Instance};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "rr")]
    RoundRobin,
    #[serde(rename = "rr-rev")]
    RoundRobinReversedLast,
    #[serde(rename = "threshold")]
    ThresholdMatching,
    #[serde(rename = "two-stage")]
    TwoStageMatching,
    #[serde(rename = "efx-via-ef")]
    EfxViaEf,
    #[serde(rename = "max-assign")]
    MaximumAssignment,
    #[serde(rename = "efx-auto")]
    EfxAuto,
    #[serde(rename = "prop-auto")]
    PropAuto,
}

impl Algorithm {
    pub const ALL: [Algorithm; 8] = [
        Algorithm::RoundRobin,
        Algorithm::RoundRobinReversedLast,
        Algorithm::ThresholdMatching,
        Algorithm::TwoStageMatching,
        Algorithm::EfxViaEf,
        Algorithm::MaximumAssignment,
        Algorithm::EfxAuto,
        Algorithm::PropAuto,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::RoundRobin => "rr",
            Algorithm::RoundRobinReversedLast => "rr-rev",
            Algorithm::ThresholdMatching => "threshold",
            Algorithm::TwoStageMatching => "two-stage",
            Algorithm::EfxViaEf => "efx-via-ef",
            Algorithm::MaximumAssignment => "max-assign",
            Algorithm::EfxAuto => "efx-auto",
            Algorithm::PropAuto => "prop-auto",
        }
    }

    /// Runs the named algorithm with its default parameters.
    pub fn run(self, inst: &Instance, alpha: f64) -> Result<AllocatorResult> {
        let n = inst.n();
        match self {
            Algorithm::RoundRobin => Ok(round_robin(inst).0),
            Algorithm::RoundRobinReversedLast => Ok(round_robin_reversed_last(inst).0),
            Algorithm::ThresholdMatching => {
                if inst.m() < n {
                    return Err(Error::Precondition(format!(
                        "threshold matching needs m >= n, got m = {}",
                        inst.m()
                    )));
                }
                let items: Vec<usize> = (0..n).collect();
                let tau = two_stage_default_tau(n, alpha);
                let allocation = threshold_matching(inst, tau, &items)?;
                Ok(AllocatorResult::new(allocation, self).with("tau", tau))
            }
            Algorithm::TwoStageMatching => {
                two_stage_matching(inst, two_stage_default_tau(n, alpha))
            }
            Algorithm::EfxViaEf => efx_via_ef(inst, alpha),
            Algorithm::MaximumAssignment => {
                maximum_assignment_efx(inst, max_assignment_default_tau(n, alpha))
            }
            Algorithm::EfxAuto => Ok(efx_dispatch(inst, alpha)),
            Algorithm::PropAuto => Ok(prop_dispatch(inst, alpha)),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown algorithm `{s}`")))
    }
}

/// Output of an allocator. `allocation == None` encodes NULL / FAILURE.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocatorResult {
    pub allocation: Option<Allocation>,
    /// Concrete algorithm that produced the allocation.
    pub algorithm: Algorithm,
    pub fallback_used: bool,
    pub diagnostics: BTreeMap<String, f64>,
}

impl AllocatorResult {
    fn new(allocation: Option<Allocation>, algorithm: Algorithm) -> Self {
        Self {
            allocation,
            algorithm,
            fallback_used: false,
            diagnostics: BTreeMap::new(),
        }
    }

    fn with(mut self, key: &str, value: f64) -> Self {
        self.diagnostics.insert(key.to_owned(), value);
        self
    }

    pub fn is_null(&self) -> bool {
        self.allocation.is_none()
    }
}

/// `1 - 1.1 log2(n) / (alpha n)`, the two-stage matching threshold.
pub fn two_stage_default_tau(n: usize, alpha: f64) -> f64 {
    (1.0 - 1.1 * (n as f64).log2() / (alpha * n as f64)).clamp(0.0, 1.0)
}

/// `1 - 2 log2(n) / (alpha n)`, the maximum-assignment threshold.
pub fn max_assignment_default_tau(n: usize, alpha: f64) -> f64 {
    (1.0 - 2.0 * (n as f64).log2() / (alpha * n as f64)).clamp(0.0, 1.0)
}

/// `1 - 2 log2(m) / (alpha n)`, the per-item floor the balanced envy-free
/// subroutine must certify.
pub fn balanced_value_floor(n: usize, m: usize, alpha: f64) -> f64 {
    (1.0 - 2.0 * (m.max(1) as f64).log2() / (alpha * n as f64)).clamp(0.0, 1.0)
}

/// `ceil(log2(max(n, 2)))`: remainders above this count as "large".
pub fn remainder_cutoff(n: usize) -> usize {
    (n.max(2) as f64).log2().ceil() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pick {
    /// 1-based round.
    pub round: usize,
    pub agent: usize,
    pub item: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RoundRobinTrace {
    pub picks: Vec<Pick>,
}

impl RoundRobinTrace {
    /// `X^{i,i'}_t` for the picks recorded here.
    pub fn value_tensor(&self, inst: &Instance) -> ValueTensor {
        let n = inst.n();
        let mut received: Vec<Vec<usize>> = vec![Vec::new(); n];
        for p in &self.picks {
            received[p.agent].push(p.item);
        }
        let values = (0..n)
            .map(|viewer| {
                received
                    .iter()
                    .map(|items| items.iter().map(|&j| inst.utility(viewer, j)).collect())
                    .collect()
            })
            .collect();
        ValueTensor { values }
    }
}

/// `values[i][k][t]`: agent `i`'s value for the `(t+1)`-th item received by
/// agent `k`. The diagonal `values[i][i]` holds agent `i`'s own picks.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTensor {
    values: Vec<Vec<Vec<f64>>>,
}

impl ValueTensor {
    pub fn agents(&self) -> usize {
        self.values.len()
    }

    /// Round `t` is 1-based.
    pub fn get(&self, viewer: usize, receiver: usize, t: usize) -> Option<f64> {
        t.checked_sub(1)
            .and_then(|t| self.values.get(viewer)?.get(receiver)?.get(t).copied())
    }

    pub fn rounds_of(&self, receiver: usize) -> usize {
        self.values.first().map_or(0, |v| v[receiver].len())
    }

    pub fn entries(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().flatten().flatten().copied()
    }
}

/// Max-heap entry: larger value first, lower item index on ties.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    value: f64,
    item: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.value
            .total_cmp(&other.value)
            .then(other.item.cmp(&self.item))
    }
}

/// Runs a picking sequence: each listed agent takes her favourite remaining
/// item. Per-agent heaps are built on first use and skip taken items lazily.
fn run_picks(
    inst: &Instance,
    order: impl Iterator<Item = (usize, usize)>,
) -> (Allocation, RoundRobinTrace) {
    let n = inst.n();
    let m = inst.m();
    let mut heaps: Vec<Option<BinaryHeap<Candidate>>> = vec![None; n];
    let mut taken = vec![false; m];
    let mut bundles = vec![Vec::new(); n];
    let mut trace = RoundRobinTrace::default();
    for (round, agent) in order {
        let heap = heaps[agent].get_or_insert_with(|| {
            inst.row(agent)
                .iter()
                .enumerate()
                .map(|(item, &value)| Candidate { value, item })
                .collect()
        });
        let best = loop {
            match heap.pop() {
                Some(c) if taken[c.item] => continue,
                other => break other,
            }
        };
        let Some(c) = best else { break };
        taken[c.item] = true;
        bundles[agent].push(c.item);
        trace.picks.push(Pick {
            round,
            agent,
            item: c.item,
            value: c.value,
        });
    }
    let alloc = Allocation::from_bundles(m, bundles).expect("picks are disjoint");
    (alloc, trace)
}

/// Agents `0..n` pick in turn until the items run out.
pub fn round_robin(inst: &Instance) -> (AllocatorResult, RoundRobinTrace) {
    let n = inst.n();
    let order = (0..inst.m()).map(|k| (k / n + 1, k % n));
    let (alloc, trace) = run_picks(inst, order);
    (
        AllocatorResult::new(Some(alloc), Algorithm::RoundRobin),
        trace,
    )
}

/// Round-robin for `r = floor(m/n)` full rounds, then agents
/// `n-1, n-2, ..., n-q` pick the `q` leftover items in that order.
pub fn round_robin_reversed_last(inst: &Instance) -> (AllocatorResult, RoundRobinTrace) {
    let n = inst.n();
    let r = inst.m() / n;
    let q = inst.m() % n;
    let full = (0..r * n).map(move |k| (k / n + 1, k % n));
    let last = (0..q).map(move |k| (r + 1, n - 1 - k));
    let (alloc, trace) = run_picks(inst, full.chain(last));
    let result = AllocatorResult::new(Some(alloc), Algorithm::RoundRobinReversedLast)
        .with("r", r as f64)
        .with("q", q as f64);
    (result, trace)
}

/// Perfect matching of agents to `items` using only edges of value `>= tau`.
/// Returns singleton bundles, or `None` if no such matching exists.
pub fn threshold_matching(
    inst: &Instance,
    tau: f64,
    items: &[usize],
) -> Result<Option<Allocation>> {
    let n = inst.n();
    if items.len() != n {
        return Err(Error::Precondition(format!(
            "threshold matching needs exactly {n} items, got {}",
            items.len()
        )));
    }
    let mut seen = vec![false; inst.m()];
    for &j in items {
        if j >= inst.m() || std::mem::replace(&mut seen[j], true) {
            return Err(Error::Precondition(format!(
                "item {j} repeated or out of range"
            )));
        }
    }
    let edges = (0..n).flat_map(|i| {
        items
            .iter()
            .enumerate()
            .filter(move |&(_, &j)| inst.utility(i, j) >= tau)
            .map(move |(k, _)| (i, k))
    });
    let g = BipartiteGraph::new(n, n, edges)?;
    let matching = max_cardinality_matching(&g);
    if matching.size() < n {
        return Ok(None);
    }
    let bundles = matching
        .left_to_right
        .iter()
        .map(|k| vec![items[k.expect("perfect")]])
        .collect();
    Ok(Some(Allocation::from_bundles(inst.m(), bundles)?))
}

/// Threshold matching on the first `n` items, then a matching of the
/// remaining items to the agents still short of a proportional share.
pub fn two_stage_matching(inst: &Instance, tau: f64) -> Result<AllocatorResult> {
    let (n, m) = (inst.n(), inst.m());
    if m < n || m > 2 * n {
        return Err(Error::Precondition(format!(
            "two-stage matching needs n <= m <= 2n, got n = {n}, m = {m}"
        )));
    }
    let first: Vec<usize> = (0..n).collect();
    let Some(stage_one) = threshold_matching(inst, tau, &first)? else {
        return Ok(AllocatorResult::new(None, Algorithm::TwoStageMatching).with("stage", 1.0));
    };
    let shares: Vec<f64> = (0..n).map(|i| inst.total_value(i) / n as f64).collect();
    let held: Vec<f64> = (0..n)
        .map(|i| inst.value_of(i, stage_one.bundle(i)))
        .collect();
    let violated: Vec<usize> = (0..n).filter(|&i| held[i] < shares[i]).collect();
    let edges = violated.iter().enumerate().flat_map(|(k, &i)| {
        let need = shares[i] - held[i];
        (n..m)
            .filter(move |&j| inst.utility(i, j) >= need)
            .map(move |j| (k, j - n))
    });
    let g = BipartiteGraph::new(violated.len(), m - n, edges)?;
    let all: Vec<usize> = (0..violated.len()).collect();
    let base = AllocatorResult::new(None, Algorithm::TwoStageMatching)
        .with("violated", violated.len() as f64);
    match saturating_matching(&g, &all)? {
        SaturationOutcome::HallViolation(_) => Ok(base.with("stage", 2.0)),
        SaturationOutcome::Saturating(fix) => {
            let mut bundles: Vec<Vec<usize>> = stage_one.bundles().to_vec();
            for (k, j) in fix.pairs() {
                bundles[violated[k]].push(n + j);
            }
            Ok(AllocatorResult {
                allocation: Some(Allocation::from_bundles(m, bundles)?),
                ..base
            })
        }
    }
}

/// `r` successive maximum-weight perfect assignments over `items`, kept
/// only if the result is envy-free and every item is worth at least
/// `value_floor` to its owner. `None` is FAILURE.
pub fn balanced_ef_subroutine(
    inst: &Instance,
    items: &[usize],
    r: usize,
    value_floor: f64,
) -> Result<Option<Allocation>> {
    let n = inst.n();
    if r == 0 || items.len() != r * n {
        return Err(Error::Precondition(format!(
            "balanced subroutine needs r >= 1 and r * n = {} items, got r = {r}, {} items",
            r * n,
            items.len()
        )));
    }
    let mut remaining = items.to_vec();
    let mut bundles: Vec<Vec<usize>> = vec![Vec::with_capacity(r); n];
    for _ in 0..r {
        let cols = remaining.len();
        let weights = (0..n)
            .flat_map(|i| remaining.iter().map(move |&j| inst.utility(i, j)))
            .collect();
        let problem = WeightedAssignmentProblem::dense(n, cols, weights)?;
        let solution = max_weight_assignment(&problem).expect("dense problems are feasible");
        let mut used = vec![false; cols];
        for (i, &c) in solution.row_to_col.iter().enumerate() {
            bundles[i].push(remaining[c]);
            used[c] = true;
        }
        remaining = remaining
            .into_iter()
            .zip(used)
            .filter(|&(_, u)| !u)
            .map(|(j, _)| j)
            .collect();
    }
    let low_value = bundles
        .iter()
        .enumerate()
        .any(|(i, b)| b.iter().any(|&j| inst.utility(i, j) < value_floor));
    let alloc = Allocation::from_bundles(inst.m(), bundles)?;
    if low_value || !fairness_report(inst, &alloc).flags.envy_free {
        return Ok(None);
    }
    Ok(Some(alloc))
}

/// Balanced envy-free allocation of the first `r n` items, then one
/// leftover item each to agents `n-q, ..., n-1`.
pub fn efx_via_ef(inst: &Instance, alpha: f64) -> Result<AllocatorResult> {
    let (n, m) = (inst.n(), inst.m());
    let r = m / n;
    let q = m % n;
    if r < 2 {
        return Err(Error::Precondition(format!(
            "efx-via-ef needs m >= 2n, got n = {n}, m = {m}"
        )));
    }
    let first: Vec<usize> = (0..r * n).collect();
    let floor = balanced_value_floor(n, m, alpha);
    let base = AllocatorResult::new(None, Algorithm::EfxViaEf).with("value_floor", floor);
    let Some(core) = balanced_ef_subroutine(inst, &first, r, floor)? else {
        return Ok(base.with("subroutine_failed", 1.0));
    };
    let mut bundles = core.bundles().to_vec();
    for k in 0..q {
        bundles[n - q + k].push(r * n + k);
    }
    Ok(AllocatorResult {
        allocation: Some(Allocation::from_bundles(m, bundles)?),
        ..base
    })
}

/// Maximum-weight assignment over edges of value `>= tau`, then the `q`
/// unused items go to the first `q` agents of a topological order of the
/// envy graph (nobody envies a source).
pub fn maximum_assignment_efx(inst: &Instance, tau: f64) -> Result<AllocatorResult> {
    let (n, m) = (inst.n(), inst.m());
    if m < n || m > 2 * n {
        return Err(Error::Precondition(format!(
            "maximum assignment needs n <= m <= 2n, got n = {n}, m = {m}"
        )));
    }
    let allowed = inst.utilities().iter().map(|&u| u >= tau).collect();
    let problem = WeightedAssignmentProblem::new(n, m, inst.utilities().to_vec(), allowed)?;
    let base = AllocatorResult::new(None, Algorithm::MaximumAssignment).with("tau", tau);
    let Some(solution) = max_weight_assignment(&problem) else {
        return Ok(base);
    };
    let psi = &solution.row_to_col;
    let envy = (0..n).flat_map(|i| {
        (0..n)
            .filter(move |&k| inst.utility(i, psi[i]) < inst.utility(i, psi[k]))
            .map(move |k| (i, k))
    });
    let graph = Digraph::new(n, envy)?;
    let order = match topological_order(&graph) {
        TopologicalOutcome::Order(order) => order,
        // excluded by optimality of psi; reported rather than trusted
        TopologicalOutcome::Cycle(_) => return Ok(base.with("envy_cycle", 1.0)),
    };
    let mut used = vec![false; m];
    for &j in psi {
        used[j] = true;
    }
    let unused: Vec<usize> = (0..m).filter(|&j| !used[j]).collect();
    let mut bundles: Vec<Vec<usize>> = psi.iter().map(|&j| vec![j]).collect();
    for (&agent, &item) in order.iter().zip(&unused) {
        bundles[agent].push(item);
    }
    Ok(AllocatorResult {
        allocation: Some(Allocation::from_bundles(m, bundles)?),
        ..base.with("envy_edges", graph.edges().count() as f64)
    })
}

/// Picks the EFX algorithm by `(r, q)`; NULL or FAILURE falls back to
/// round-robin with reversed last round.
pub fn efx_dispatch(inst: &Instance, alpha: f64) -> AllocatorResult {
    let (n, m) = (inst.n(), inst.m());
    if m <= n {
        return round_robin(inst).0;
    }
    let r = m / n;
    let q = m % n;
    let attempt = if q > remainder_cutoff(n) {
        return round_robin_reversed_last(inst).0;
    } else if r >= 2 {
        efx_via_ef(inst, alpha)
    } else {
        maximum_assignment_efx(inst, max_assignment_default_tau(n, alpha))
    };
    match attempt {
        Ok(res) if !res.is_null() => res,
        _ => {
            let mut res = round_robin_reversed_last(inst).0;
            res.fallback_used = true;
            res
        }
    }
}

/// Round-robin when `m >= 2n`, two-stage matching when `n <= m < 2n`,
/// NULL when `m < n` (some agent necessarily gets nothing).
pub fn prop_dispatch(inst: &Instance, alpha: f64) -> AllocatorResult {
    let (n, m) = (inst.n(), inst.m());
    if m >= 2 * n {
        round_robin(inst).0
    } else if m >= n {
        two_stage_matching(inst, two_stage_default_tau(n, alpha)).expect("n <= m < 2n")
    } else {
        AllocatorResult::new(None, Algorithm::PropAuto).with("too_few_items", 1.0)
    }
}

/// Samples round-robin's value tensor directly: agent `i`'s pick in round
/// `t` is the best of the items still on the table, capped by her previous
/// pick, and every other agent's view of that item is capped by her own
/// most recent pick (current round if she already picked, else previous).
pub fn simulate_rr_generative(
    n: usize,
    m: usize,
    spec: &DistributionSpec,
    rng: &mut RngStream,
) -> Result<ValueTensor> {
    if n == 0 || m == 0 {
        return Err(Error::Precondition(
            "generative sampler needs n >= 1 and m >= 1".into(),
        ));
    }
    let rounds = m.div_ceil(n);
    let mut values = vec![vec![Vec::with_capacity(rounds); n]; n];
    // most recent pick per agent, before and after this round
    let mut prev = vec![1.0_f64; n];
    let mut cur = vec![1.0_f64; n];
    let draw = |k: u64, cap: f64, rng: &mut RngStream| -> f64 {
        let fc = spec.cdf_unchecked(cap);
        if fc > 0.0 {
            spec.conditional_max_unchecked(k, cap, fc, rng.uniform())
        } else {
            rng.uniform();
            0.0
        }
    };
    for t0 in 0..rounds {
        let pickers = n.min(m - t0 * n);
        for i in 0..pickers {
            let on_table = (m - t0 * n - i) as u64;
            let x = draw(on_table, prev[i], rng);
            cur[i] = x;
            values[i][i].push(x);
            for other in 0..n {
                if other == i {
                    continue;
                }
                let cap = if other < i { cur[other] } else { prev[other] };
                let y = draw(1, cap, rng);
                values[other][i].push(y);
            }
        }
        prev[..pickers].copy_from_slice(&cur[..pickers]);
    }
    Ok(ValueTensor { values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{fairness_report, sample_instance};

    fn inst(rows: Vec<Vec<f64>>) -> Instance {
        Instance::from_rows(rows).unwrap()
    }

    fn bundles(res: &AllocatorResult) -> Vec<Vec<usize>> {
        res.allocation.as_ref().unwrap().bundles().to_vec()
    }

    #[test]
    fn names_roundtrip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("greedy".parse::<Algorithm>().is_err());
    }

    #[test]
    fn round_robin_examples() {
        let single = inst(vec![vec![0.3, 0.2, 0.9]]);
        assert_eq!(bundles(&round_robin(&single).0), vec![vec![0, 1, 2]]);

        let two = inst(vec![vec![0.9, 0.8, 0.3, 0.1], vec![0.7, 0.6, 0.5, 0.2]]);
        let (res, trace) = round_robin(&two);
        assert_eq!(bundles(&res), vec![vec![0, 2], vec![1, 3]]);
        let seq: Vec<(usize, usize, usize)> = trace
            .picks
            .iter()
            .map(|p| (p.round, p.agent, p.item))
            .collect();
        assert_eq!(seq, vec![(1, 0, 0), (1, 1, 1), (2, 0, 2), (2, 1, 3)]);
    }

    #[test]
    fn round_robin_ties_take_lowest_index() {
        let tied = inst(vec![vec![0.5, 0.5, 0.5], vec![0.5, 0.5, 0.5]]);
        assert_eq!(bundles(&round_robin(&tied).0), vec![vec![0, 2], vec![1]]);
    }

    #[test]
    fn reversed_last_round_order() {
        let u = inst(vec![vec![0.5; 4], vec![0.5; 4], vec![0.5; 4]]);
        let (_, trace) = round_robin_reversed_last(&u);
        let agents: Vec<usize> = trace.picks.iter().map(|p| p.agent).collect();
        assert_eq!(agents, vec![0, 1, 2, 2]);
        assert_eq!(trace.picks[3].round, 2);

        let mut rng = RngStream::from_seed(4);
        let spec = DistributionSpec::uniform();
        let even = sample_instance(3, 9, &spec, &mut rng).unwrap();
        assert_eq!(
            round_robin_reversed_last(&even).0.allocation,
            round_robin(&even).0.allocation
        );
    }

    #[test]
    fn threshold_examples() {
        let u = inst(vec![vec![0.9, 0.85], vec![0.95, 0.5]]);
        let a = threshold_matching(&u, 0.8, &[0, 1]).unwrap().unwrap();
        assert_eq!(a.bundles(), &[vec![1], vec![0]]);
        let u = inst(vec![vec![0.9, 0.1], vec![0.95, 0.2]]);
        assert_eq!(threshold_matching(&u, 0.8, &[0, 1]).unwrap(), None);
        assert!(threshold_matching(&u, 0.0, &[0, 1]).unwrap().is_some());
        assert!(threshold_matching(&u, 0.0, &[0]).is_err());
        assert!(threshold_matching(&u, 0.0, &[0, 0]).is_err());
    }

    #[test]
    fn two_stage_examples() {
        let u = inst(vec![vec![0.9, 0.1, 0.05], vec![0.1, 0.9, 0.05]]);
        let res = two_stage_matching(&u, 0.8).unwrap();
        assert_eq!(bundles(&res), vec![vec![0], vec![1]]);
        assert_eq!(res.diagnostics["violated"], 0.0);

        let u = inst(vec![vec![0.85, 0.8, 0.1], vec![0.8, 0.85, 0.1]]);
        let res = two_stage_matching(&u, 0.8).unwrap();
        assert!(res.is_null());
        assert_eq!(res.diagnostics["violated"], 2.0);

        let u = inst(vec![vec![0.9, 0.4]]);
        let res = two_stage_matching(&u, 0.8).unwrap();
        assert_eq!(bundles(&res), vec![vec![0, 1]]);

        assert!(two_stage_matching(&u, 0.8).is_ok());
        let wide = inst(vec![vec![0.5; 3]]);
        assert!(two_stage_matching(&wide, 0.8).is_err());
    }

    #[test]
    fn balanced_subroutine_single_round() {
        let u = inst(vec![vec![0.9, 0.2], vec![0.3, 0.8]]);
        let a = balanced_ef_subroutine(&u, &[0, 1], 1, 0.0)
            .unwrap()
            .unwrap();
        assert_eq!(a.bundles(), &[vec![0], vec![1]]);
        assert!(fairness_report(&u, &a).flags.envy_free);
        // value floor above what agent 1 can get
        assert_eq!(balanced_ef_subroutine(&u, &[0, 1], 1, 0.85).unwrap(), None);
        assert!(balanced_ef_subroutine(&u, &[0], 1, 0.0).is_err());
    }

    #[test]
    fn efx_via_ef_sizes() {
        let spec = DistributionSpec::uniform();
        let mut rng = RngStream::from_seed(11);
        let mut seen = 0;
        for _ in 0..50 {
            let u = sample_instance(2, 5, &spec, &mut rng).unwrap();
            let res = efx_via_ef(&u, 1.0).unwrap();
            if let Some(a) = &res.allocation {
                assert_eq!((a.bundle(0).len(), a.bundle(1).len()), (2, 3));
                assert!(a.bundle(1).contains(&4));
                seen += 1;
            }
        }
        assert!(seen > 0);
        let u = sample_instance(2, 3, &spec, &mut rng).unwrap();
        assert!(efx_via_ef(&u, 1.0).is_err());
    }

    #[test]
    fn max_assignment_example() {
        let u = inst(vec![vec![0.9, 0.6, 0.3], vec![0.7, 0.95, 0.4]]);
        let res = maximum_assignment_efx(&u, 0.5).unwrap();
        assert_eq!(bundles(&res), vec![vec![0, 2], vec![1]]);
        assert_eq!(res.diagnostics["envy_edges"], 0.0);

        let low = inst(vec![vec![0.1, 0.2, 0.3], vec![0.3, 0.2, 0.1]]);
        assert!(maximum_assignment_efx(&low, 0.5).unwrap().is_null());
        let narrow = inst(vec![vec![0.5], vec![0.5]]);
        assert!(maximum_assignment_efx(&narrow, 0.5).is_err());
        let wide = inst(vec![vec![0.5; 3]]);
        assert!(maximum_assignment_efx(&wide, 0.5).is_err());
    }

    #[test]
    fn efx_dispatch_cases() {
        let spec = DistributionSpec::uniform();
        let mut rng = RngStream::from_seed(3);
        let few = sample_instance(5, 3, &spec, &mut rng).unwrap();
        let res = efx_dispatch(&few, 1.0);
        let a = res.allocation.clone().unwrap();
        assert_eq!(a.bundles().iter().filter(|b| b.len() == 1).count(), 3);
        assert!(fairness_report(&few, &a).flags.efx);

        let big_q = sample_instance(100, 350, &spec, &mut rng).unwrap();
        assert_eq!(
            efx_dispatch(&big_q, 1.0).algorithm,
            Algorithm::RoundRobinReversedLast
        );
        let small_q = sample_instance(100, 103, &spec, &mut rng).unwrap();
        let res = efx_dispatch(&small_q, 1.0);
        assert!(res.algorithm == Algorithm::MaximumAssignment || res.fallback_used);
        assert_eq!(remainder_cutoff(100), 7);
    }

    #[test]
    fn prop_dispatch_cases() {
        let spec = DistributionSpec::uniform();
        let mut rng = RngStream::from_seed(8);
        let at_2n = sample_instance(10, 20, &spec, &mut rng).unwrap();
        assert_eq!(prop_dispatch(&at_2n, 1.0).algorithm, Algorithm::RoundRobin);
        let below = sample_instance(10, 19, &spec, &mut rng).unwrap();
        assert_eq!(
            prop_dispatch(&below, 1.0).algorithm,
            Algorithm::TwoStageMatching
        );
        let short = sample_instance(10, 9, &spec, &mut rng).unwrap();
        assert!(prop_dispatch(&short, 1.0).is_null());
    }

    #[test]
    fn default_thresholds() {
        assert_eq!(two_stage_default_tau(1, 1.0), 1.0);
        assert_eq!(two_stage_default_tau(4, 0.1), 0.0);
        let t = max_assignment_default_tau(200, 1.0);
        assert!((t - (1.0 - 2.0 * 200f64.log2() / 200.0)).abs() < 1e-15);
    }

    #[test]
    fn generative_support() {
        let spec = DistributionSpec::uniform();
        let mut rng = RngStream::from_seed(1);
        for _ in 0..200 {
            let x = simulate_rr_generative(1, 2, &spec, &mut rng).unwrap();
            assert!(x.get(0, 0, 1).unwrap() >= x.get(0, 0, 2).unwrap());
        }
        let x = simulate_rr_generative(5, 17, &spec, &mut rng).unwrap();
        assert!(x.entries().all(|v| (0.0..=1.0).contains(&v)));
        assert_eq!(x.rounds_of(0), 4);
        assert_eq!(x.rounds_of(1), 4);
        assert_eq!(x.rounds_of(2), 3);
        assert!(simulate_rr_generative(0, 2, &spec, &mut rng).is_err());
    }

    #[test]
    fn trace_tensor_matches_picks() {
        let spec = DistributionSpec::uniform();
        let u = sample_instance(3, 8, &spec, &mut RngStream::from_seed(2)).unwrap();
        let (_, trace) = round_robin(&u);
        let x = trace.value_tensor(&u);
        for p in &trace.picks {
            assert_eq!(x.get(p.agent, p.agent, p.round), Some(p.value));
        }
        assert_eq!(x.rounds_of(2), 2);
    }
}
