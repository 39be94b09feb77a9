//! Bipartite matching, maximum-weight assignment and topological ordering.
//!
//! Everything here is deterministic: adjacency lists are sorted, scans run
//! in increasing index order and the first minimum wins.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use crate::error::{Error, Result};

/// Bipartite graph with sorted, deduplicated adjacency lists on the left.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BipartiteGraph {
    right_size: usize,
    adj: Vec<Vec<usize>>,
}

impl BipartiteGraph {
    pub fn new(
        left_size: usize,
        right_size: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut adj = vec![Vec::new(); left_size];
        for (l, r) in edges {
            if l >= left_size || r >= right_size {
                return Err(Error::Domain(format!(
                    "edge ({l}, {r}) outside {left_size} x {right_size}"
                )));
            }
            adj[l].push(r);
        }
        for a in &mut adj {
            a.sort_unstable();
            a.dedup();
        }
        Ok(Self { right_size, adj })
    }

    pub fn left_size(&self) -> usize {
        self.adj.len()
    }

    pub fn right_size(&self) -> usize {
        self.right_size
    }

    pub fn neighbors(&self, left: usize) -> &[usize] {
        &self.adj[left]
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum()
    }
}

/// A matching stored from both sides.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matching {
    pub left_to_right: Vec<Option<usize>>,
    pub right_to_left: Vec<Option<usize>>,
}

impl Matching {
    fn empty(left: usize, right: usize) -> Self {
        Self {
            left_to_right: vec![None; left],
            right_to_left: vec![None; right],
        }
    }

    pub fn size(&self) -> usize {
        self.left_to_right.iter().flatten().count()
    }

    /// Matched pairs in increasing left order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.left_to_right
            .iter()
            .enumerate()
            .filter_map(|(l, r)| r.map(|r| (l, r)))
            .collect()
    }

    /// Checks that both sides agree and every pair is an edge of `g`.
    pub fn is_valid_in(&self, g: &BipartiteGraph) -> bool {
        let mut used = vec![false; g.right_size()];
        for (l, r) in self.pairs() {
            if g.neighbors(l).binary_search(&r).is_err() || std::mem::replace(&mut used[r], true) {
                return false;
            }
            if self.right_to_left[r] != Some(l) {
                return false;
            }
        }
        self.right_to_left.iter().flatten().count() == self.size()
    }
}

/// Hopcroft–Karp on the left vertices listed in `active` (all if `None`).
fn hopcroft_karp(g: &BipartiteGraph, active: Option<&[usize]>) -> Matching {
    let left = g.left_size();
    let mut m = Matching::empty(left, g.right_size());
    let lefts: Vec<usize> = match active {
        Some(a) => a.to_vec(),
        None => (0..left).collect(),
    };
    let mut dist = vec![u32::MAX; left];
    let mut queue = VecDeque::new();
    loop {
        // BFS layers from free left vertices
        queue.clear();
        for &l in &lefts {
            if m.left_to_right[l].is_none() {
                dist[l] = 0;
                queue.push_back(l);
            } else {
                dist[l] = u32::MAX;
            }
        }
        let mut found = false;
        while let Some(l) = queue.pop_front() {
            for &r in g.neighbors(l) {
                match m.right_to_left[r] {
                    None => found = true,
                    Some(next) if dist[next] == u32::MAX => {
                        dist[next] = dist[l] + 1;
                        queue.push_back(next);
                    }
                    Some(_) => {}
                }
            }
        }
        if !found {
            break;
        }
        let mut cursor = vec![0usize; left];
        for &l in &lefts {
            if m.left_to_right[l].is_none() {
                augment(g, &mut m, &mut dist, &mut cursor, l);
            }
        }
    }
    m
}

/// Iterative layered DFS for one augmenting path from `root`.
fn augment(
    g: &BipartiteGraph,
    m: &mut Matching,
    dist: &mut [u32],
    cursor: &mut [usize],
    root: usize,
) -> bool {
    let mut stack = vec![root];
    while let Some(&l) = stack.last() {
        let adj = g.neighbors(l);
        if cursor[l] == adj.len() {
            dist[l] = u32::MAX;
            stack.pop();
            continue;
        }
        let r = adj[cursor[l]];
        cursor[l] += 1;
        match m.right_to_left[r] {
            None => {
                // flip the path: each stacked left vertex takes the right
                // vertex it was exploring when it pushed its successor
                let mut r = r;
                while let Some(l) = stack.pop() {
                    let prev = m.left_to_right[l];
                    m.left_to_right[l] = Some(r);
                    m.right_to_left[r] = Some(l);
                    match prev {
                        Some(p) => r = p,
                        None => break,
                    }
                }
                return true;
            }
            Some(next) if dist[next] != u32::MAX && dist[next] == dist[l] + 1 => stack.push(next),
            Some(_) => {}
        }
    }
    false
}

/// Maximum-cardinality matching, O(E sqrt(V)).
pub fn max_cardinality_matching(g: &BipartiteGraph) -> Matching {
    hopcroft_karp(g, None)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SaturationOutcome {
    /// Matching covering every vertex of the requested subset.
    Saturating(Matching),
    /// `S` within the subset whose neighborhood is smaller than `S`.
    HallViolation(Vec<usize>),
}

/// Matches every vertex of `subset` or returns a Hall-violating set.
pub fn saturating_matching(g: &BipartiteGraph, subset: &[usize]) -> Result<SaturationOutcome> {
    if let Some(&l) = subset.iter().find(|&&l| l >= g.left_size()) {
        return Err(Error::Domain(format!("left vertex {l} out of range")));
    }
    let mut active = subset.to_vec();
    active.sort_unstable();
    active.dedup();
    let m = hopcroft_karp(g, Some(&active));
    let Some(&root) = active.iter().find(|&&l| m.left_to_right[l].is_none()) else {
        return Ok(SaturationOutcome::Saturating(m));
    };
    // left vertices reachable from the unmatched root by alternating paths;
    // their neighborhood is exactly the matched partners of all but the root
    let mut seen = vec![false; g.left_size()];
    seen[root] = true;
    let mut queue = VecDeque::from([root]);
    while let Some(l) = queue.pop_front() {
        for &r in g.neighbors(l) {
            if let Some(next) = m.right_to_left[r] {
                if !seen[next] {
                    seen[next] = true;
                    queue.push_back(next);
                }
            }
        }
    }
    Ok(SaturationOutcome::HallViolation(
        (0..g.left_size()).filter(|&l| seen[l]).collect(),
    ))
}

/// `n x m` weights with an allowed-edge mask, `n <= m`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedAssignmentProblem {
    n: usize,
    m: usize,
    weights: Vec<f64>,
    allowed: Vec<bool>,
}

impl WeightedAssignmentProblem {
    pub fn new(n: usize, m: usize, weights: Vec<f64>, allowed: Vec<bool>) -> Result<Self> {
        if weights.len() != n * m || allowed.len() != n * m {
            return Err(Error::Precondition(format!(
                "weights and mask must be {n} x {m}"
            )));
        }
        if n > m {
            return Err(Error::Precondition(format!(
                "{n} rows cannot be assigned to {m} columns"
            )));
        }
        if weights
            .iter()
            .zip(&allowed)
            .any(|(w, &a)| a && !w.is_finite())
        {
            return Err(Error::Domain("allowed weights must be finite".into()));
        }
        Ok(Self {
            n,
            m,
            weights,
            allowed,
        })
    }

    /// All edges allowed.
    pub fn dense(n: usize, m: usize, weights: Vec<f64>) -> Result<Self> {
        Self::new(n, m, weights, vec![true; n * m])
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn cols(&self) -> usize {
        self.m
    }

    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.m + col]
    }

    pub fn is_allowed(&self, row: usize, col: usize) -> bool {
        self.allowed[row * self.m + col]
    }

    fn allowed_graph(&self) -> BipartiteGraph {
        let edges = (0..self.n).flat_map(|i| {
            (0..self.m)
                .filter(move |&j| self.is_allowed(i, j))
                .map(move |j| (i, j))
        });
        BipartiteGraph::new(self.n, self.m, edges).expect("indices in range")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentSolution {
    pub row_to_col: Vec<usize>,
    pub total_weight: f64,
}

/// Maximum-weight assignment of every row to a distinct allowed column.
///
/// Returns `None` when the allowed edges admit no row-saturating matching.
/// Feasibility is settled by Hopcroft–Karp first; the optimization is the
/// shortest-augmenting-path Hungarian method with potentials, O(n^2 m),
/// which never relaxes a forbidden edge.
pub fn max_weight_assignment(p: &WeightedAssignmentProblem) -> Option<AssignmentSolution> {
    let (n, m) = (p.n, p.m);
    if max_cardinality_matching(&p.allowed_graph()).size() < n {
        return None;
    }
    const INF: f64 = f64::INFINITY;
    // 1-based columns; column 0 is the virtual root of each search
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    let mut minv = vec![INF; m + 1];
    let mut used = vec![false; m + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0;
        minv.fill(INF);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let base = (i0 - 1) * m;
            let mut delta = INF;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                if p.allowed[base + j - 1] {
                    let cur = -p.weights[base + j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            if j1 == 0 {
                return None;
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0; n];
    for j in 1..=m {
        if owner[j] != 0 {
            row_to_col[owner[j] - 1] = j - 1;
        }
    }
    let total_weight = row_to_col
        .iter()
        .enumerate()
        .map(|(i, &j)| p.weight(i, j))
        .sum();
    Some(AssignmentSolution {
        row_to_col,
        total_weight,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digraph {
    n: usize,
    out: Vec<Vec<usize>>,
}

impl Digraph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut out = vec![Vec::new(); n];
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::Domain(format!(
                    "edge {a} -> {b} outside {n} vertices"
                )));
            }
            out[a].push(b);
        }
        for o in &mut out {
            o.sort_unstable();
            o.dedup();
        }
        Ok(Self { n, out })
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.out
            .iter()
            .enumerate()
            .flat_map(|(a, o)| o.iter().map(move |&b| (a, b)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TopologicalOutcome {
    /// Vertices in order; vertex `order[k]` has rank `k + 1`.
    Order(Vec<usize>),
    /// A directed cycle, rotated to start at its smallest vertex.
    Cycle(Vec<usize>),
}

/// Kahn's algorithm, always dequeuing the smallest available vertex.
pub fn topological_order(d: &Digraph) -> TopologicalOutcome {
    let mut indeg = vec![0usize; d.n];
    for (_, b) in d.edges() {
        indeg[b] += 1;
    }
    let mut ready: BinaryHeap<Reverse<usize>> =
        (0..d.n).filter(|&v| indeg[v] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(d.n);
    while let Some(Reverse(v)) = ready.pop() {
        order.push(v);
        for &w in &d.out[v] {
            indeg[w] -= 1;
            if indeg[w] == 0 {
                ready.push(Reverse(w));
            }
        }
    }
    if order.len() == d.n {
        return TopologicalOutcome::Order(order);
    }
    // every leftover vertex keeps an in-edge from another leftover vertex;
    // walk those backwards until a vertex repeats
    let mut pred = vec![usize::MAX; d.n];
    for (a, b) in d.edges() {
        if indeg[a] > 0 && indeg[b] > 0 && pred[b] == usize::MAX {
            pred[b] = a;
        }
    }
    let start = (0..d.n).find(|&v| indeg[v] > 0).expect("leftover vertex");
    let mut pos = vec![usize::MAX; d.n];
    let mut walk = Vec::new();
    let mut v = start;
    while pos[v] == usize::MAX {
        pos[v] = walk.len();
        walk.push(v);
        v = pred[v];
    }
    let mut cycle: Vec<usize> = walk[pos[v]..].to_vec();
    cycle.reverse();
    let min_at = (0..cycle.len()).min_by_key(|&k| cycle[k]).unwrap_or(0);
    cycle.rotate_left(min_at);
    TopologicalOutcome::Cycle(cycle)
}
