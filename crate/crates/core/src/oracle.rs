//! Exhaustive existence checks for tiny instances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::WeightedAssignmentProblem;
use crate::model::{
    fairness_report, is_ef_assignment, Allocation, Assignment, Instance, RankingProfile,
};

const ALLOCATION_LIMIT: u64 = 10_000_000;
const INJECTION_LIMIT: u64 = 1_000_000;
const WEIGHT_ROWS_LIMIT: usize = 8;
const WEIGHT_INJECTION_LIMIT: u64 = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Criterion {
    EnvyFree,
    Efx,
    Ef1,
    Proportional,
}

/// `n^m`, or `None` past `limit`.
fn power_within(n: usize, m: usize, limit: u64) -> Option<u64> {
    let mut acc = 1u64;
    for _ in 0..m {
        acc = acc.checked_mul(n as u64).filter(|&v| v <= limit)?;
    }
    Some(acc)
}

/// `m! / (m - n)!`, or `None` past `limit`.
fn falling_within(m: usize, n: usize, limit: u64) -> Option<u64> {
    (0..n.min(m)).try_fold(1u64, |acc, k| {
        acc.checked_mul((m - k) as u64).filter(|&v| v <= limit)
    })
}

/// Tries every complete allocation, in lexicographic order of the owner
/// vector `(owner of item 0, owner of item 1, ...)`, and returns the first
/// that meets `criterion`.
pub fn exists_fair_allocation(inst: &Instance, criterion: Criterion) -> Result<Option<Allocation>> {
    let (n, m) = (inst.n(), inst.m());
    if power_within(n, m, ALLOCATION_LIMIT).is_none() {
        return Err(Error::TooLarge(format!(
            "{n}^{m} allocations exceeds {ALLOCATION_LIMIT}"
        )));
    }
    let mut owner = vec![0usize; m];
    loop {
        let mut bundles = vec![Vec::new(); n];
        for (j, &i) in owner.iter().enumerate() {
            bundles[i].push(j);
        }
        let alloc = Allocation::from_bundles(m, bundles)?;
        let flags = fairness_report(inst, &alloc).flags;
        let ok = match criterion {
            Criterion::EnvyFree => flags.envy_free,
            Criterion::Efx => flags.efx,
            Criterion::Ef1 => flags.ef1,
            Criterion::Proportional => flags.proportional,
        };
        if ok {
            return Ok(Some(alloc));
        }
        // odometer with item m-1 as the fastest digit
        let Some(pos) = (0..m).rev().find(|&j| owner[j] + 1 < n) else {
            return Ok(None);
        };
        owner[pos] += 1;
        owner[pos + 1..].iter_mut().for_each(|o| *o = 0);
    }
}

/// Visits injections `agent -> item` in lexicographic order until `visit`
/// returns true.
fn for_each_injection(
    n: usize,
    m: usize,
    mut visit: impl FnMut(&[usize]) -> bool,
) -> Option<Vec<usize>> {
    fn go(
        depth: usize,
        n: usize,
        m: usize,
        current: &mut Vec<usize>,
        used: &mut [bool],
        visit: &mut dyn FnMut(&[usize]) -> bool,
    ) -> bool {
        if depth == n {
            return visit(current);
        }
        for j in 0..m {
            if used[j] {
                continue;
            }
            used[j] = true;
            current.push(j);
            if go(depth + 1, n, m, current, used, visit) {
                return true;
            }
            current.pop();
            used[j] = false;
        }
        false
    }
    let mut current = Vec::with_capacity(n);
    let mut used = vec![false; m];
    go(0, n, m, &mut current, &mut used, &mut visit).then_some(current)
}

/// First envy-free injection of agents into items, if any.
pub fn exists_ef_assignment_bruteforce(profile: &RankingProfile) -> Result<Option<Assignment>> {
    let (n, m) = (profile.n(), profile.m());
    if falling_within(m, n, INJECTION_LIMIT).is_none() {
        return Err(Error::TooLarge(format!(
            "{m}!/({m}-{n})! injections exceeds {INJECTION_LIMIT}"
        )));
    }
    if n > m {
        return Ok(None);
    }
    let found = for_each_injection(n, m, |items| {
        let a = Assignment::new(items.iter().map(|&j| Some(j)).collect()).expect("injective");
        is_ef_assignment(profile, &a).expect("complete").envy_free
    });
    Ok(found
        .map(|items| Assignment::new(items.into_iter().map(Some).collect()).expect("injective")))
}

/// Best total weight over all allowed injections of rows into columns;
/// `None` when no injection uses only allowed pairs.
pub fn brute_max_weight(p: &WeightedAssignmentProblem) -> Result<Option<f64>> {
    let (n, m) = (p.rows(), p.cols());
    if n > WEIGHT_ROWS_LIMIT || falling_within(m, n, WEIGHT_INJECTION_LIMIT).is_none() {
        return Err(Error::TooLarge(format!(
            "{n} x {m} is beyond exhaustive search"
        )));
    }
    let mut best: Option<f64> = None;
    for_each_injection(n, m, |cols| {
        if cols.iter().enumerate().all(|(i, &j)| p.is_allowed(i, j)) {
            let w: f64 = cols.iter().enumerate().map(|(i, &j)| p.weight(i, j)).sum();
            best = Some(best.map_or(w, |b| b.max(w)));
        }
        false
    });
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(rows: Vec<Vec<f64>>) -> Instance {
        Instance::from_rows(rows).unwrap()
    }

    #[test]
    fn fair_allocation_examples() {
        let one = inst(vec![vec![0.5], vec![0.7]]);
        assert!(exists_fair_allocation(&one, Criterion::EnvyFree)
            .unwrap()
            .is_none());
        let efx = exists_fair_allocation(&one, Criterion::Efx)
            .unwrap()
            .unwrap();
        assert_eq!(efx.bundles(), &[vec![0], vec![]]);

        let two = inst(vec![vec![0.6, 0.4], vec![0.4, 0.6]]);
        let ef = exists_fair_allocation(&two, Criterion::EnvyFree)
            .unwrap()
            .unwrap();
        assert_eq!(ef.bundles(), &[vec![0], vec![1]]);
        assert!(exists_fair_allocation(&two, Criterion::Proportional)
            .unwrap()
            .is_some());

        let wide = Instance::new(10, 8, vec![0.5; 80]).unwrap();
        assert!(matches!(
            exists_fair_allocation(&wide, Criterion::Ef1),
            Err(Error::TooLarge(_))
        ));
    }

    #[test]
    fn assignment_examples() {
        let shared = RankingProfile::new(2, vec![vec![0, 1], vec![0, 1]]).unwrap();
        assert!(exists_ef_assignment_bruteforce(&shared).unwrap().is_none());
        let split = RankingProfile::new(3, vec![vec![0, 1, 2], vec![1, 0, 2]]).unwrap();
        let a = exists_ef_assignment_bruteforce(&split).unwrap().unwrap();
        assert_eq!(a.as_slice(), &[Some(0), Some(1)]);
        let solo = RankingProfile::new(3, vec![vec![2, 1, 0]]).unwrap();
        assert!(exists_ef_assignment_bruteforce(&solo).unwrap().is_some());
        let crowded = RankingProfile::new(1, vec![vec![0], vec![0]]).unwrap();
        assert!(exists_ef_assignment_bruteforce(&crowded).unwrap().is_none());
    }

    #[test]
    fn weight_examples() {
        let id = WeightedAssignmentProblem::dense(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(brute_max_weight(&id).unwrap(), Some(2.0));
        let p = WeightedAssignmentProblem::dense(2, 2, vec![0.9, 0.7, 0.8, 0.1]).unwrap();
        assert!((brute_max_weight(&p).unwrap().unwrap() - 1.5).abs() < 1e-15);
        let none = WeightedAssignmentProblem::new(2, 2, vec![0.5; 4], vec![false; 4]).unwrap();
        assert_eq!(brute_max_weight(&none).unwrap(), None);
        let big = WeightedAssignmentProblem::dense(9, 9, vec![0.5; 81]).unwrap();
        assert!(brute_max_weight(&big).is_err());
    }
}
