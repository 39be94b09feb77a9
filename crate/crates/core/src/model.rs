//! Instances, allocations, assignments and the fairness predicates.
//!
//! Agents and items are 0-based indices throughout. Utilities are additive:
//! a bundle is worth the sum of its items, summed in ascending item order.

use serde::{Deserialize, Serialize};

use crate::distributions::DistributionSpec;
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// `n` agents, `m` items, utilities in `[0, 1]` stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceRepr", into = "InstanceRepr")]
pub struct Instance {
    n: usize,
    m: usize,
    utilities: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceRepr {
    n: usize,
    m: usize,
    utilities: Vec<f64>,
}

impl TryFrom<InstanceRepr> for Instance {
    type Error = Error;
    fn try_from(r: InstanceRepr) -> Result<Self> {
        Instance::new(r.n, r.m, r.utilities)
    }
}

impl From<Instance> for InstanceRepr {
    fn from(i: Instance) -> Self {
        InstanceRepr {
            n: i.n,
            m: i.m,
            utilities: i.utilities,
        }
    }
}

impl Instance {
    pub fn new(n: usize, m: usize, utilities: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Precondition(
                "an instance needs at least one agent".into(),
            ));
        }
        if n.checked_mul(m) != Some(utilities.len()) {
            return Err(Error::Precondition(format!(
                "utility matrix has {} entries, expected {n} x {m}",
                utilities.len()
            )));
        }
        if let Some(pos) = utilities.iter().position(|u| !(0.0..=1.0).contains(u)) {
            return Err(Error::Domain(format!(
                "utility of agent {} for item {} is {}, outside [0, 1]",
                pos / m.max(1),
                pos % m.max(1),
                utilities[pos]
            )));
        }
        Ok(Self { n, m, utilities })
    }

    /// Builds an instance from per-agent rows.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::Precondition("utility rows differ in length".into()));
        }
        Self::new(n, m, rows.into_iter().flatten().collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn utility(&self, agent: usize, item: usize) -> f64 {
        self.utilities[agent * self.m + item]
    }

    #[inline]
    pub fn row(&self, agent: usize) -> &[f64] {
        &self.utilities[agent * self.m..(agent + 1) * self.m]
    }

    pub fn utilities(&self) -> &[f64] {
        &self.utilities
    }

    /// Additive value of `bundle` to `agent`; errors on out-of-range items.
    pub fn bundle_utility(&self, agent: usize, bundle: &[usize]) -> Result<f64> {
        if agent >= self.n {
            return Err(Error::Domain(format!("agent {agent} out of range")));
        }
        if let Some(&j) = bundle.iter().find(|&&j| j >= self.m) {
            return Err(Error::Domain(format!(
                "item {j} out of range (m = {})",
                self.m
            )));
        }
        Ok(self.value_of(agent, bundle))
    }

    #[inline]
    pub(crate) fn value_of(&self, agent: usize, bundle: &[usize]) -> f64 {
        let row = self.row(agent);
        bundle.iter().map(|&j| row[j]).sum()
    }

    /// Value of `bundle` without the item at position `skip`.
    fn value_without(&self, agent: usize, bundle: &[usize], skip: usize) -> f64 {
        let row = self.row(agent);
        bundle
            .iter()
            .enumerate()
            .filter(|&(p, _)| p != skip)
            .map(|(_, &j)| row[j])
            .sum()
    }

    /// Value of all `m` items to `agent`.
    pub fn total_value(&self, agent: usize) -> f64 {
        self.row(agent).iter().sum()
    }
}

/// `n * m` i.i.d. draws from `spec`, filled row-major.
pub fn sample_instance(
    n: usize,
    m: usize,
    spec: &DistributionSpec,
    rng: &mut RngStream,
) -> Result<Instance> {
    if n == 0 {
        return Err(Error::Precondition("n must be at least 1".into()));
    }
    let utilities = (0..n * m).map(|_| spec.sample(rng)).collect();
    Instance::new(n, m, utilities)
}

/// A possibly partial allocation: disjoint bundles plus the unallocated rest.
/// Bundles are kept sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    bundles: Vec<Vec<usize>>,
    unallocated: Vec<usize>,
}

impl Allocation {
    /// Validates disjointness against `m` items; items not in any bundle
    /// become unallocated.
    pub fn from_bundles(m: usize, mut bundles: Vec<Vec<usize>>) -> Result<Self> {
        let mut owner = vec![false; m];
        for (i, b) in bundles.iter_mut().enumerate() {
            b.sort_unstable();
            for &j in b.iter() {
                if j >= m {
                    return Err(Error::Domain(format!(
                        "bundle {i} holds item {j} >= m = {m}"
                    )));
                }
                if std::mem::replace(&mut owner[j], true) {
                    return Err(Error::Precondition(format!(
                        "item {j} appears in two bundles"
                    )));
                }
            }
        }
        let unallocated = (0..m).filter(|&j| !owner[j]).collect();
        Ok(Self {
            bundles,
            unallocated,
        })
    }

    /// Re-checks the partition invariant against an instance.
    pub fn validate(&self, inst: &Instance) -> Result<()> {
        if self.bundles.len() != inst.n() {
            return Err(Error::Precondition(format!(
                "{} bundles for {} agents",
                self.bundles.len(),
                inst.n()
            )));
        }
        let mut seen = vec![false; inst.m()];
        for &j in self.bundles.iter().flatten().chain(&self.unallocated) {
            if j >= inst.m() || std::mem::replace(&mut seen[j], true) {
                return Err(Error::Precondition(format!(
                    "item {j} duplicated or out of range"
                )));
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Precondition(
                "some item is neither allocated nor unallocated".into(),
            ));
        }
        Ok(())
    }

    pub fn bundles(&self) -> &[Vec<usize>] {
        &self.bundles
    }

    pub fn bundle(&self, agent: usize) -> &[usize] {
        &self.bundles[agent]
    }

    pub fn unallocated(&self) -> &[usize] {
        &self.unallocated
    }

    pub fn is_complete(&self) -> bool {
        self.unallocated.is_empty()
    }
}

/// Injection from agents to items; `None` is the unassigned sentinel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    assigned: Vec<Option<usize>>,
}

impl Assignment {
    pub fn new(assigned: Vec<Option<usize>>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for j in assigned.iter().flatten() {
            if !seen.insert(*j) {
                return Err(Error::Precondition(format!(
                    "item {j} assigned to two agents"
                )));
            }
        }
        Ok(Self { assigned })
    }

    pub fn item_of(&self, agent: usize) -> Option<usize> {
        self.assigned[agent]
    }

    pub fn as_slice(&self) -> &[Option<usize>] {
        &self.assigned
    }

    pub fn is_complete(&self) -> bool {
        self.assigned.iter().all(Option::is_some)
    }
}

/// One strict ranking (a permutation of all items, best first) per agent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankingProfile {
    m: usize,
    rankings: Vec<Vec<usize>>,
    /// `position[i][j]` = rank of item `j` for agent `i` (0 = favourite)
    position: Vec<Vec<usize>>,
}

impl RankingProfile {
    pub fn new(m: usize, rankings: Vec<Vec<usize>>) -> Result<Self> {
        let mut position = Vec::with_capacity(rankings.len());
        for (i, r) in rankings.iter().enumerate() {
            if r.len() != m {
                return Err(Error::Precondition(format!(
                    "ranking {i} has {} items, expected {m}",
                    r.len()
                )));
            }
            let mut pos = vec![usize::MAX; m];
            for (p, &j) in r.iter().enumerate() {
                if j >= m || pos[j] != usize::MAX {
                    return Err(Error::Precondition(format!(
                        "ranking {i} is not a permutation"
                    )));
                }
                pos[j] = p;
            }
            position.push(pos);
        }
        Ok(Self {
            m,
            rankings,
            position,
        })
    }

    /// Independent uniformly random rankings (Fisher–Yates per agent).
    pub fn uniform_random(n: usize, m: usize, rng: &mut RngStream) -> Self {
        let rankings = (0..n)
            .map(|_| {
                let mut r: Vec<usize> = (0..m).collect();
                for k in (1..m).rev() {
                    r.swap(k, rng.below(k + 1));
                }
                r
            })
            .collect();
        Self::new(m, rankings).expect("Fisher-Yates yields permutations")
    }

    pub fn n(&self) -> usize {
        self.rankings.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn ranking(&self, agent: usize) -> &[usize] {
        &self.rankings[agent]
    }

    pub fn rank_of(&self, agent: usize, item: usize) -> usize {
        self.position[agent][item]
    }
}

/// Sorts each agent's items by utility descending, lower index first on ties.
pub fn rankings_from_instance(inst: &Instance) -> RankingProfile {
    let rankings = (0..inst.n())
        .map(|i| {
            let row = inst.row(i);
            let mut r: Vec<usize> = (0..inst.m()).collect();
            r.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
            r
        })
        .collect();
    RankingProfile::new(inst.m(), rankings).expect("sorting yields permutations")
}

/// Strict single-item preferences, from a ranking or a utility row.
pub trait ItemPreference {
    fn agents(&self) -> usize;
    fn items(&self) -> usize;
    /// `true` iff `agent` strictly prefers item `a` to item `b`.
    fn prefers(&self, agent: usize, a: usize, b: usize) -> bool;
}

impl ItemPreference for RankingProfile {
    fn agents(&self) -> usize {
        self.n()
    }
    fn items(&self) -> usize {
        self.m
    }
    fn prefers(&self, agent: usize, a: usize, b: usize) -> bool {
        self.position[agent][a] < self.position[agent][b]
    }
}

impl ItemPreference for Instance {
    fn agents(&self) -> usize {
        self.n
    }
    fn items(&self) -> usize {
        self.m
    }
    fn prefers(&self, agent: usize, a: usize, b: usize) -> bool {
        self.utility(agent, a) > self.utility(agent, b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentVerdict {
    pub envy_free: bool,
    /// First `(agent, envied_agent)` pair in lexicographic order.
    pub witness: Option<(usize, usize)>,
}

/// Whether no agent strictly prefers another agent's item to her own.
pub fn is_ef_assignment<P: ItemPreference + ?Sized>(
    prefs: &P,
    assignment: &Assignment,
) -> Result<AssignmentVerdict> {
    let items = assignment.as_slice();
    if items.len() != prefs.agents() {
        return Err(Error::Precondition(format!(
            "assignment covers {} agents, profile has {}",
            items.len(),
            prefs.agents()
        )));
    }
    let items: Vec<usize> = items
        .iter()
        .enumerate()
        .map(|(i, j)| j.ok_or_else(|| Error::Precondition(format!("agent {i} is unassigned"))))
        .collect::<Result<_>>()?;
    if let Some(&j) = items.iter().find(|&&j| j >= prefs.items()) {
        return Err(Error::Domain(format!("item {j} out of range")));
    }
    for (i, &own) in items.iter().enumerate() {
        for (k, &other) in items.iter().enumerate() {
            if k != i && prefs.prefers(i, other, own) {
                return Ok(AssignmentVerdict {
                    envy_free: false,
                    witness: Some((i, k)),
                });
            }
        }
    }
    Ok(AssignmentVerdict {
        envy_free: true,
        witness: None,
    })
}

/// First violation found by [`fairness_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// `agent` envies `envied`; `item` is the first item of the envied
    /// bundle whose removal leaves the envy in place (`None` if every
    /// single removal kills it).
    Envy {
        agent: usize,
        envied: usize,
        item: Option<usize>,
    },
    /// `agent` gets less than a `1/n` share of her value for all items.
    Disproportional { agent: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FairnessFlags {
    pub envy_free: bool,
    pub ef1: bool,
    pub efx: bool,
    pub proportional: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FairnessReport {
    #[serde(flatten)]
    pub flags: FairnessFlags,
    pub witness: Option<Witness>,
}

/// Evaluates EF, EF1, EFX and proportionality with exact comparisons.
///
/// A pair that is not envious satisfies EF1 and EFX automatically: bundle
/// values are sums of nonnegative terms in a fixed order, and dropping a
/// term can never increase a rounded partial sum. Only envious pairs pay
/// for the per-item removal scan.
pub fn fairness_report(inst: &Instance, alloc: &Allocation) -> FairnessReport {
    let n = inst.n();
    let mut flags = FairnessFlags {
        envy_free: true,
        ef1: true,
        efx: true,
        proportional: true,
    };
    let mut envy_witness = None;
    let mut share_witness = None;
    for i in 0..n {
        let own = inst.value_of(i, alloc.bundle(i));
        for k in 0..n {
            if k == i {
                continue;
            }
            let theirs = alloc.bundle(k);
            if own >= inst.value_of(i, theirs) {
                continue;
            }
            flags.envy_free = false;
            let mut some_removal = false;
            let mut first_bad = None;
            for p in 0..theirs.len() {
                if own >= inst.value_without(i, theirs, p) {
                    some_removal = true;
                } else if first_bad.is_none() {
                    first_bad = Some(theirs[p]);
                }
            }
            flags.ef1 &= some_removal;
            flags.efx &= first_bad.is_none();
            envy_witness.get_or_insert(Witness::Envy {
                agent: i,
                envied: k,
                item: first_bad,
            });
        }
        if own < inst.total_value(i) / n as f64 {
            flags.proportional = false;
            share_witness.get_or_insert(Witness::Disproportional { agent: i });
        }
    }
    let witness = envy_witness.or(share_witness);
    FairnessReport { flags, witness }
}

/// Serialized form of one allocation run: the instance, the allocation and
/// its fairness verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationDocument {
    pub n: usize,
    pub m: usize,
    pub utilities: Vec<f64>,
    pub algorithm: String,
    pub fallback_used: bool,
    /// `None` when the algorithm returned NULL.
    pub bundles: Option<Vec<Vec<usize>>>,
    pub flags: Option<FairnessFlags>,
    pub witness: Option<Witness>,
}

impl AllocationDocument {
    /// Decodes and re-validates a document: the instance must be well formed
    /// and the bundles must partition a subset of its items.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Self = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let inst = Instance::new(doc.n, doc.m, doc.utilities.clone())?;
        if let Some(bundles) = &doc.bundles {
            let alloc = Allocation::from_bundles(doc.m, bundles.clone())?;
            alloc.validate(&inst)?;
        }
        Ok(doc)
    }

    pub fn instance(&self) -> Result<Instance> {
        Instance::new(self.n, self.m, self.utilities.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alloc(m: usize, bundles: Vec<Vec<usize>>) -> Allocation {
        Allocation::from_bundles(m, bundles).unwrap()
    }

    #[test]
    fn sample_instance_examples() {
        let spec = DistributionSpec::uniform();
        let empty = sample_instance(1, 0, &spec, &mut RngStream::from_seed(1)).unwrap();
        assert_eq!((empty.n(), empty.m(), empty.utilities().len()), (1, 0, 0));
        let a = sample_instance(5, 7, &spec, &mut RngStream::from_seed(1)).unwrap();
        assert!(a.utilities().iter().all(|u| (0.0..=1.0).contains(u)));
        let b = sample_instance(5, 7, &spec, &mut RngStream::from_seed(1)).unwrap();
        assert_eq!(a, b);
        assert!(sample_instance(0, 3, &spec, &mut RngStream::from_seed(1)).is_err());
    }

    #[test]
    fn bundle_utility_examples() {
        let inst = Instance::from_rows(vec![vec![0.2, 0.3, 0.5]]).unwrap();
        assert_eq!(inst.bundle_utility(0, &[]).unwrap(), 0.0);
        assert!((inst.bundle_utility(0, &[0, 2]).unwrap() - 0.7).abs() < 1e-15);
        assert!((inst.bundle_utility(0, &[0, 1, 2]).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            inst.bundle_utility(0, &[3]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn instance_validation() {
        assert!(Instance::new(2, 2, vec![0.1, 0.2, 0.3]).is_err());
        assert!(Instance::new(1, 2, vec![0.1, 1.2]).is_err());
        assert!(Instance::new(1, 1, vec![f64::NAN]).is_err());
        assert!(Instance::new(0, 0, vec![]).is_err());
    }

    #[test]
    fn allocation_partition() {
        let a = alloc(4, vec![vec![2, 0], vec![3]]);
        assert_eq!(a.bundle(0), &[0, 2]);
        assert_eq!(a.unallocated(), &[1]);
        assert!(!a.is_complete());
        assert!(Allocation::from_bundles(3, vec![vec![0], vec![0]]).is_err());
        assert!(Allocation::from_bundles(3, vec![vec![5]]).is_err());
    }

    #[test]
    fn report_shared_favourite() {
        let inst = Instance::from_rows(vec![vec![0.9, 0.1], vec![0.9, 0.1]]).unwrap();
        let r = fairness_report(&inst, &alloc(2, vec![vec![0], vec![1]]));
        assert_eq!(
            r.flags,
            FairnessFlags {
                envy_free: false,
                ef1: true,
                efx: true,
                proportional: false
            }
        );
        assert_eq!(
            r.witness,
            Some(Witness::Envy {
                agent: 1,
                envied: 0,
                item: None
            })
        );
    }

    #[test]
    fn report_ef1_but_not_efx() {
        let inst = Instance::from_rows(vec![vec![0.5, 0.6, 0.3], vec![0.2, 0.2, 0.2]]).unwrap();
        let r = fairness_report(&inst, &alloc(3, vec![vec![0], vec![1, 2]]));
        assert!(!r.flags.envy_free);
        assert!(r.flags.ef1);
        assert!(!r.flags.efx);
        assert_eq!(
            r.witness,
            Some(Witness::Envy {
                agent: 0,
                envied: 1,
                item: Some(2)
            })
        );
    }

    #[test]
    fn single_agent_is_fair() {
        let inst = Instance::from_rows(vec![vec![0.3, 0.9, 0.0]]).unwrap();
        let r = fairness_report(&inst, &alloc(3, vec![vec![0, 1, 2]]));
        assert!(r.flags.envy_free && r.flags.ef1 && r.flags.efx && r.flags.proportional);
        assert_eq!(r.witness, None);
    }

    #[test]
    fn partial_allocation_proportionality_uses_all_items() {
        let inst = Instance::from_rows(vec![vec![0.5, 0.4, 0.5], vec![0.4, 0.5, 0.5]]).unwrap();
        // agent 0 gets 0.5 < 1.4 / 2 and envies nobody
        let r = fairness_report(&inst, &alloc(3, vec![vec![0], vec![1]]));
        assert!(r.flags.envy_free);
        assert!(!r.flags.proportional);
        assert_eq!(r.witness, Some(Witness::Disproportional { agent: 0 }));
    }

    #[test]
    fn ef_assignment_examples() {
        let one = RankingProfile::new(2, vec![vec![1, 0]]).unwrap();
        assert!(
            is_ef_assignment(&one, &Assignment::new(vec![Some(0)]).unwrap())
                .unwrap()
                .envy_free
        );

        let shared = RankingProfile::new(2, vec![vec![0, 1], vec![0, 1]]).unwrap();
        let v =
            is_ef_assignment(&shared, &Assignment::new(vec![Some(0), Some(1)]).unwrap()).unwrap();
        assert_eq!(v.witness, Some((1, 0)));

        // a > b > c and b > a > c with items a = 0, b = 1, c = 2
        let p = RankingProfile::new(3, vec![vec![0, 1, 2], vec![1, 0, 2]]).unwrap();
        assert!(
            is_ef_assignment(&p, &Assignment::new(vec![Some(0), Some(1)]).unwrap())
                .unwrap()
                .envy_free
        );

        let err = is_ef_assignment(&p, &Assignment::new(vec![Some(0), None]).unwrap());
        assert!(matches!(err, Err(Error::Precondition(_))));
    }

    #[test]
    fn ef_assignment_on_utilities() {
        let inst = Instance::from_rows(vec![vec![0.9, 0.2], vec![0.3, 0.8]]).unwrap();
        assert!(
            is_ef_assignment(&inst, &Assignment::new(vec![Some(0), Some(1)]).unwrap())
                .unwrap()
                .envy_free
        );
        assert!(
            !is_ef_assignment(&inst, &Assignment::new(vec![Some(1), Some(0)]).unwrap())
                .unwrap()
                .envy_free
        );
    }

    #[test]
    fn rankings_examples() {
        let inst = Instance::from_rows(vec![vec![0.1, 0.9, 0.5], vec![0.5, 0.5, 0.2]]).unwrap();
        let p = rankings_from_instance(&inst);
        assert_eq!(p.ranking(0), &[1, 2, 0]);
        assert_eq!(p.ranking(1), &[0, 1, 2]);
        assert_eq!(p.rank_of(0, 0), 2);
    }

    #[test]
    fn ranking_validation() {
        assert!(RankingProfile::new(2, vec![vec![0, 0]]).is_err());
        assert!(RankingProfile::new(2, vec![vec![0]]).is_err());
        let p = RankingProfile::uniform_random(4, 9, &mut RngStream::from_seed(2));
        assert_eq!(p.n(), 4);
    }

    #[test]
    fn assignment_injectivity() {
        assert!(Assignment::new(vec![Some(1), Some(1)]).is_err());
        assert!(Assignment::new(vec![None, None, Some(0)]).is_ok());
    }

    #[test]
    fn document_roundtrip_and_validation() {
        let doc = AllocationDocument {
            n: 2,
            m: 2,
            utilities: vec![0.6, 0.4, 0.4, 0.6],
            algorithm: "rr".into(),
            fallback_used: false,
            bundles: Some(vec![vec![0], vec![1]]),
            flags: None,
            witness: None,
        };
        let text = serde_json::to_string(&doc).unwrap();
        assert_eq!(AllocationDocument::from_json(&text).unwrap(), doc);
        let bad = text.replace("[[0],[1]]", "[[0],[0]]");
        assert!(AllocationDocument::from_json(&bad).is_err());
        let inst: Instance =
            serde_json::from_str(r#"{"n":1,"m":2,"utilities":[0.5,0.25]}"#).unwrap();
        assert_eq!(inst.m(), 2);
        assert!(serde_json::from_str::<Instance>(r#"{"n":1,"m":2,"utilities":[0.5]}"#).is_err());
        assert!(
            serde_json::from_str::<Instance>(r#"{"n":1,"m":1,"utilities":[0.5],"x":1}"#).is_err()
        );
    }
}
