//! Minor embedding of logical problems into hardware graphs.
//!
//! [`find_embedding`] grows one chain per logical variable from weighted
//! shortest-path trees, reroutes chains with growing overlap penalties until
//! the chains are disjoint, then reroutes the longest chains over free qubits
//! while that shortens them. [`embed_ising`] spreads the logical problem over
//! the chains and ties each chain together with the chain coupling `j_f`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubo::{IsingProblem, Spin};
use crate::seed;
use crate::topology::{HardwareGraph, HardwareProfile, QubitId};

/// Overlap-resolution passes per try.
const MAX_ROUNDS: usize = 512;
/// Per-round growth of the reuse penalty base.
const GROWTH: f64 = 1.02;
const MAX_BASE: f64 = 1e30;
/// Rounds without fewer shared qubits before a try is abandoned.
const STALL_ROUNDS: usize = 96;
/// Shortening passes once chains are disjoint.
const REFINE_PASSES: usize = 6;
/// Overlap-free embeddings collected before keeping the shortest.
const CANDIDATES: usize = 3;
/// Grid used for splitting coefficients, so shares add up exactly.
const SPLIT_GRID: f64 = 4_294_967_296.0;

/// Chains of hardware qubits, one per logical variable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Embedding {
    #[serde(with = "chain_map")]
    pub chains: Vec<Vec<QubitId>>,
    pub source_hash: String,
    pub target_hash: String,
}

mod chain_map {
    use super::QubitId;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    pub fn serialize<S: Serializer>(chains: &[Vec<QubitId>], s: S) -> Result<S::Ok, S::Error> {
        let map: BTreeMap<usize, &Vec<QubitId>> = chains.iter().enumerate().collect();
        map.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<QubitId>>, D::Error> {
        let map = BTreeMap::<usize, Vec<QubitId>>::deserialize(d)?;
        let mut out = Vec::with_capacity(map.len());
        for (expected, (var, chain)) in map.into_iter().enumerate() {
            if var != expected {
                return Err(serde::de::Error::custom(format!(
                    "chains must cover variables 0..n, missing {expected}"
                )));
            }
            out.push(chain);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainStats {
    pub max: usize,
    pub mean: f64,
    pub total_qubits: usize,
    /// Chain length to number of chains.
    pub histogram: BTreeMap<usize, usize>,
}

impl Embedding {
    pub fn num_vars(&self) -> usize {
        self.chains.len()
    }

    pub fn chain_stats(&self) -> ChainStats {
        let mut histogram = BTreeMap::new();
        for chain in &self.chains {
            *histogram.entry(chain.len()).or_insert(0) += 1;
        }
        let total_qubits: usize = self.chains.iter().map(Vec::len).sum();
        ChainStats {
            max: self.chains.iter().map(Vec::len).max().unwrap_or(0),
            mean: if self.chains.is_empty() {
                0.0
            } else {
                total_qubits as f64 / self.chains.len() as f64
            },
            total_qubits,
            histogram,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?).map_err(|e| Error::io(path, e))
    }
}

/// A reason an embedding is not a valid minor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EmbeddingDefect {
    ChainCount { expected: usize, got: usize },
    EmptyChain { var: usize },
    UnusableQubit { var: usize, qubit: QubitId },
    SharedQubit { qubit: QubitId, a: usize, b: usize },
    Disconnected { var: usize },
    MissingCoupler { u: usize, v: usize },
}

/// Checks disjointness, connectivity and edge coverage directly against the
/// hardware graph. Returns every defect found.
pub fn validate_embedding(
    num_vars: usize,
    edges: &[(usize, usize)],
    chains: &[Vec<QubitId>],
    hardware: &HardwareGraph,
) -> Vec<EmbeddingDefect> {
    let mut defects = Vec::new();
    if chains.len() != num_vars {
        defects.push(EmbeddingDefect::ChainCount {
            expected: num_vars,
            got: chains.len(),
        });
        return defects;
    }
    let mut owner: BTreeMap<QubitId, usize> = BTreeMap::new();
    for (var, chain) in chains.iter().enumerate() {
        if chain.is_empty() {
            defects.push(EmbeddingDefect::EmptyChain { var });
        }
        for &q in chain {
            if !hardware.is_usable(q) {
                defects.push(EmbeddingDefect::UnusableQubit { var, qubit: q });
            }
            if let Some(&a) = owner.get(&q) {
                defects.push(EmbeddingDefect::SharedQubit { qubit: q, a, b: var });
            } else {
                owner.insert(q, var);
            }
        }
        if !chain.is_empty() && !chain_connected(chain, hardware) {
            defects.push(EmbeddingDefect::Disconnected { var });
        }
    }
    for &(u, v) in edges {
        let touching = chains[u]
            .iter()
            .any(|&p| chains[v].iter().any(|&q| hardware.has_coupler(p, q)));
        if !touching {
            defects.push(EmbeddingDefect::MissingCoupler { u, v });
        }
    }
    defects
}

fn chain_connected(chain: &[QubitId], hardware: &HardwareGraph) -> bool {
    let mut seen = vec![false; chain.len()];
    seen[0] = true;
    let mut queue = VecDeque::from([0]);
    while let Some(i) = queue.pop_front() {
        for j in 0..chain.len() {
            if !seen[j] && hardware.has_coupler(chain[i], chain[j]) {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    seen.iter().all(|&s| s)
}

#[derive(Clone, Copy, PartialEq)]
struct Frontier {
    dist: f64,
    node: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Working state of the heuristic over a compact copy of the usable graph.
struct Search<'a> {
    adjacency: Vec<Vec<usize>>,
    logical: &'a [Vec<usize>],
    chains: Vec<Vec<usize>>,
    usage: Vec<u32>,
    rng: seed::Rng,
}

impl Search<'_> {
    /// Exponential reuse penalty. Occupied qubits get a random factor in
    /// `[1, 2)` so that two chains stuck on one qubit do not block each other
    /// forever.
    fn weights(&mut self, base: f64) -> Vec<f64> {
        let usage = &self.usage;
        let rng = &mut self.rng;
        usage
            .iter()
            .map(|&u| {
                if u == 0 {
                    1.0
                } else {
                    base.powi(u.min(8) as i32) * rng.gen_range(1.0..2.0)
                }
            })
            .collect()
    }

    /// Distance from `chain` to every qubit, paying each qubit's weight on
    /// entry. Qubits of the chain itself cost their own weight.
    fn distances(&self, chain: &[usize], weights: &[f64]) -> (Vec<f64>, Vec<usize>) {
        let n = self.adjacency.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut parent = vec![usize::MAX; n];
        let mut heap = BinaryHeap::new();
        for &q in chain {
            dist[q] = 0.0;
            heap.push(Frontier { dist: 0.0, node: q });
        }
        while let Some(Frontier { dist: d, node }) = heap.pop() {
            if d > dist[node] {
                continue;
            }
            for &next in &self.adjacency[node] {
                let nd = d + weights[next];
                if nd < dist[next] {
                    dist[next] = nd;
                    parent[next] = node;
                    heap.push(Frontier { dist: nd, node: next });
                }
            }
        }
        for &q in chain {
            dist[q] = weights[q];
        }
        (dist, parent)
    }

    fn remove_chain(&mut self, var: usize) {
        for &q in &self.chains[var] {
            self.usage[q] -= 1;
        }
        self.chains[var].clear();
    }

    fn set_chain(&mut self, var: usize, chain: Vec<usize>) {
        for &q in &chain {
            self.usage[q] += 1;
        }
        self.chains[var] = chain;
    }

    /// Builds a chain for `var` against its currently placed neighbours.
    /// Returns `None` if some neighbour cannot be reached.
    fn route(&mut self, var: usize, weights: &[f64]) -> Option<Vec<usize>> {
        let placed: Vec<usize> = self.logical[var]
            .iter()
            .copied()
            .filter(|&u| !self.chains[u].is_empty())
            .collect();
        let n = self.adjacency.len();
        if placed.is_empty() {
            let best = weights.iter().copied().fold(f64::INFINITY, f64::min);
            let candidates: Vec<usize> = (0..n).filter(|&q| weights[q] == best).collect();
            return candidates.choose(&mut self.rng).map(|&q| vec![q]);
        }
        let trees: Vec<(Vec<f64>, Vec<usize>)> = placed
            .iter()
            .map(|&u| self.distances(&self.chains[u], weights))
            .collect();
        let mut best = f64::INFINITY;
        let mut roots = Vec::new();
        let taken: Vec<bool> = {
            let mut taken = vec![false; n];
            for &u in &placed {
                for &q in &self.chains[u] {
                    taken[q] = true;
                }
            }
            taken
        };
        for q in 0..n {
            if taken[q] {
                continue;
            }
            let mut cost = weights[q];
            for (dist, _) in &trees {
                cost += dist[q] - weights[q];
            }
            if !cost.is_finite() {
                continue;
            }
            match cost.total_cmp(&best) {
                Ordering::Less => {
                    best = cost;
                    roots.clear();
                    roots.push(q);
                }
                Ordering::Equal => roots.push(q),
                Ordering::Greater => {}
            }
        }
        let &root = roots.choose(&mut self.rng)?;
        let mut members = vec![root];
        let mut in_chain = vec![false; n];
        in_chain[root] = true;
        let mut grown = Vec::new();
        for (&u, (_, parent)) in placed.iter().zip(&trees) {
            let mut path = Vec::new();
            let mut q = root;
            while !self.chains[u].contains(&q) {
                path.push(q);
                q = parent[q];
                if q == usize::MAX {
                    return None;
                }
            }
            // A held qubit next to the target chain is handed to that chain,
            // which lets a boxed-in chain grow out of its corner.
            if path.len() > 1 {
                let last = path[path.len() - 1];
                if self.usage[last] > 0 && !in_chain[last] {
                    path.pop();
                    grown.push((u, last));
                }
            }
            for q in path {
                if !in_chain[q] {
                    in_chain[q] = true;
                    members.push(q);
                }
            }
        }
        for (u, q) in grown {
            if !in_chain[q] && !self.chains[u].contains(&q) {
                self.chains[u].push(q);
                self.usage[q] += 1;
            }
        }
        Some(self.prune(members, &placed))
    }

    /// Drops leaf qubits that are not the only contact with some neighbour.
    fn prune(&self, mut chain: Vec<usize>, placed: &[usize]) -> Vec<usize> {
        loop {
            if chain.len() <= 1 {
                return chain;
            }
            let mut removed = false;
            for i in (0..chain.len()).rev() {
                let q = chain[i];
                let inner = self.adjacency[q]
                    .iter()
                    .filter(|n| chain.contains(n))
                    .count();
                if inner != 1 {
                    continue;
                }
                let needed = placed.iter().any(|&u| {
                    let touches = |p: usize| {
                        self.adjacency[p]
                            .iter()
                            .any(|n| self.chains[u].contains(n))
                    };
                    touches(q) && !chain.iter().any(|&p| p != q && touches(p))
                });
                if !needed {
                    chain.swap_remove(i);
                    removed = true;
                    break;
                }
            }
            if !removed {
                return chain;
            }
        }
    }

    fn overlap(&self) -> usize {
        self.usage.iter().filter(|&&u| u > 1).count()
    }

    fn covered(&self) -> bool {
        (0..self.logical.len()).all(|v| {
            !self.chains[v].is_empty()
                && self.logical[v].iter().all(|&u| {
                    self.chains[v]
                        .iter()
                        .any(|&p| self.adjacency[p].iter().any(|n| self.chains[u].contains(n)))
                })
        })
    }

    fn attempt(&mut self) -> bool {
        let vars = self.logical.len();
        let mut order: Vec<usize> = (0..vars).collect();
        order.shuffle(&mut self.rng);
        let order = bfs_order(self.logical, order[0]);
        for &v in &order {
            let w = self.weights(2.0);
            match self.route(v, &w) {
                Some(chain) => self.set_chain(v, chain),
                None => return false,
            }
        }
        let mut disjoint = false;
        let mut best = usize::MAX;
        let mut stalled = 0;
        for round in 0..MAX_ROUNDS {
            let overlap = self.overlap();
            if overlap == 0 && self.covered() {
                disjoint = true;
                break;
            }
            if overlap < best {
                best = overlap;
                stalled = 0;
            } else {
                stalled += 1;
                if stalled > STALL_ROUNDS {
                    break;
                }
            }
            let base = (2.0 * GROWTH.powi(round as i32)).min(MAX_BASE);
            let mut order: Vec<usize> = (0..vars).collect();
            order.shuffle(&mut self.rng);
            for v in order {
                let old = self.chains[v].clone();
                self.remove_chain(v);
                let mut weights = self.weights(base);
                // Taking back a qubit this chain was sharing costs extra, so
                // two chains stuck on each other move apart.
                for &q in &old {
                    if self.usage[q] > 0 {
                        weights[q] *= base;
                    }
                }
                match self.route(v, &weights) {
                    Some(chain) => self.set_chain(v, chain),
                    None => self.set_chain(v, old),
                }
            }
        }
        if !disjoint {
            return false;
        }
        self.refine();
        true
    }

    /// Reroutes chains, longest first, over free qubits only; keeps a new
    /// chain when it is no longer than the old one.
    fn refine(&mut self) {
        for _ in 0..REFINE_PASSES {
            let before: usize = self.chains.iter().map(Vec::len).sum();
            let mut order: Vec<usize> = (0..self.logical.len()).collect();
            order.shuffle(&mut self.rng);
            order.sort_by_key(|&v| std::cmp::Reverse(self.chains[v].len()));
            for v in order {
                let old = self.chains[v].clone();
                self.remove_chain(v);
                let weights: Vec<f64> = self
                    .usage
                    .iter()
                    .map(|&u| if u == 0 { 1.0 } else { f64::INFINITY })
                    .collect();
                let keep = match self.route(v, &weights) {
                    Some(chain) if chain.len() <= old.len() && chain.iter().all(|&q| self.usage[q] == 0) => {
                        Some(chain)
                    }
                    _ => None,
                };
                self.set_chain(v, keep.unwrap_or(old));
            }
            let after: usize = self.chains.iter().map(Vec::len).sum();
            if after >= before {
                break;
            }
        }
    }
}

fn bfs_order(logical: &[Vec<usize>], start: usize) -> Vec<usize> {
    let mut seen = vec![false; logical.len()];
    let mut order = Vec::with_capacity(logical.len());
    for s in std::iter::once(start).chain(0..logical.len()) {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &u in &logical[v] {
                if !seen[u] {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
    }
    order
}

/// Finds chains for the logical graph given by `adjacency`.
///
/// Deterministic in `seed`. Each of the `tries` restarts uses its own derived
/// seed. Up to three overlap-free embeddings are collected and the one with
/// the shortest longest chain, then fewest qubits, is returned.
pub fn find_embedding(
    adjacency: &[Vec<usize>],
    hardware: &HardwareGraph,
    seed: u64,
    tries: usize,
) -> Result<Embedding> {
    let usable = hardware.usable_nodes();
    let mut compact = vec![usize::MAX; hardware.id_bound()];
    for (i, &q) in usable.iter().enumerate() {
        compact[q] = i;
    }
    let hw_adjacency: Vec<Vec<usize>> = usable
        .iter()
        .map(|&q| hardware.neighbors(q).iter().map(|&n| compact[n]).collect())
        .collect();
    let logical: Vec<Vec<usize>> = adjacency
        .iter()
        .map(|list| {
            let mut list = list.clone();
            list.sort_unstable();
            list.dedup();
            list
        })
        .collect();
    let source_hash = adjacency_hash(&logical);
    let target_hash = hardware.structure_hash();
    if logical.is_empty() {
        return Ok(Embedding {
            chains: Vec::new(),
            source_hash,
            target_hash,
        });
    }
    let mut best: Option<(usize, usize, Vec<Vec<usize>>)> = None;
    let mut found = 0;
    if usable.len() >= logical.len() {
        for t in 0..tries {
            let mut search = Search {
                adjacency: hw_adjacency.clone(),
                logical: &logical,
                chains: vec![Vec::new(); logical.len()],
                usage: vec![0; usable.len()],
                rng: seed::rng_from(seed, &[seed::stream::EMBED, t as u64]),
            };
            if !search.attempt() {
                continue;
            }
            let longest = search.chains.iter().map(Vec::len).max().unwrap_or(0);
            let total = search.chains.iter().map(Vec::len).sum();
            if best
                .as_ref()
                .is_none_or(|&(l, tot, _)| (longest, total) < (l, tot))
            {
                best = Some((longest, total, search.chains));
            }
            found += 1;
            if found == CANDIDATES {
                break;
            }
        }
    }
    if let Some((_, _, chains)) = best {
        let chains = chains
            .into_iter()
            .map(|chain| {
                let mut ids: Vec<QubitId> = chain.into_iter().map(|i| usable[i]).collect();
                ids.sort_unstable();
                ids
            })
            .collect();
        return Ok(Embedding {
            chains,
            source_hash,
            target_hash,
        });
    }
    Err(Error::EmbeddingNotFound { tries })
}

pub fn adjacency_hash(adjacency: &[Vec<usize>]) -> String {
    crate::qubo::sha256_hex(serde_json::to_string(adjacency).expect("serializable").as_bytes())
}

/// Edge list `(u, v)` with `u < v` of an adjacency list.
pub fn adjacency_edges(adjacency: &[Vec<usize>]) -> Vec<(usize, usize)> {
    let mut edges: Vec<(usize, usize)> = adjacency
        .iter()
        .enumerate()
        .flat_map(|(u, list)| list.iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
        .collect();
    edges.sort_unstable();
    edges.dedup();
    edges
}

/// A logical Ising problem spread over hardware chains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedIsing {
    /// Problem over compact physical indices `0..qubits.len()`.
    pub ising: IsingProblem,
    /// Hardware qubit of each compact index.
    pub qubits: Vec<QubitId>,
    /// Compact indices of each logical variable's chain.
    pub chains: Vec<Vec<usize>>,
    /// Intra-chain couplers, all set to `j_f`.
    pub chain_couplers: Vec<(usize, usize)>,
    pub j_f: f64,
    /// Power of two applied to every logical coefficient.
    pub scale: f64,
    pub logical_hash: String,
}

impl EmbeddedIsing {
    pub fn num_physical(&self) -> usize {
        self.qubits.len()
    }

    /// Copies each logical spin onto its whole chain.
    pub fn extend_sample(&self, logical: &[Spin]) -> Result<Vec<Spin>> {
        if logical.len() != self.chains.len() {
            return Err(Error::LengthMismatch {
                expected: self.chains.len(),
                got: logical.len(),
            });
        }
        let mut physical = vec![0; self.qubits.len()];
        for (chain, &s) in self.chains.iter().zip(logical) {
            for &p in chain {
                physical[p] = s;
            }
        }
        Ok(physical)
    }
}

/// Splits `value` into `parts` shares on a dyadic grid; the shares sum to
/// `value` exactly.
fn split(value: f64, parts: usize) -> Vec<f64> {
    if parts == 1 {
        return vec![value];
    }
    let share = (value / parts as f64 * SPLIT_GRID).round() / SPLIT_GRID;
    let mut out = vec![share; parts - 1];
    out.push(value - share * (parts - 1) as f64);
    out
}

/// Largest power of two `s <= 1` with `s * max <= 1`.
fn power_of_two_scale(max: f64) -> f64 {
    if max <= 1.0 {
        return 1.0;
    }
    let mut scale = 1.0;
    while max * scale > 1.0 {
        scale /= 2.0;
    }
    scale
}

/// Builds the physical problem for `e`.
///
/// Fields are split evenly over chain qubits and couplings evenly over the
/// couplers joining two chains. The split coefficients are scaled by a power
/// of two so that all of them lie in `[-1, 1]`; chain couplers are set to
/// `j_f` without scaling.
pub fn embed_ising(
    i: &IsingProblem,
    e: &Embedding,
    hardware: &HardwareGraph,
    j_f: f64,
    profile: &HardwareProfile,
) -> Result<EmbeddedIsing> {
    if !(j_f < 0.0) || !profile.j_in_range(j_f) {
        return Err(Error::RangeViolation {
            value: j_f,
            min: profile.j_range.0,
            max: profile.j_range.1.min(0.0),
        });
    }
    if e.chains.len() != i.num_spins {
        return Err(Error::LengthMismatch {
            expected: i.num_spins,
            got: e.chains.len(),
        });
    }
    let defects = validate_embedding(i.num_spins, &i.interaction_edges(), &e.chains, hardware);
    if !defects.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "embedding does not fit the problem: {defects:?}"
        )));
    }
    let mut qubits: Vec<QubitId> = e.chains.iter().flatten().copied().collect();
    qubits.sort_unstable();
    let index: BTreeMap<QubitId, usize> = qubits.iter().enumerate().map(|(i, &q)| (q, i)).collect();
    let chains: Vec<Vec<usize>> = e
        .chains
        .iter()
        .map(|chain| chain.iter().map(|q| index[q]).collect())
        .collect();

    let mut h = vec![0.0; qubits.len()];
    for (var, chain) in chains.iter().enumerate() {
        for (&p, share) in chain.iter().zip(split(i.h[var], chain.len())) {
            h[p] = share;
        }
    }
    let mut j: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (&(u, v), &value) in &i.j {
        if value == 0.0 {
            continue;
        }
        let mut couplers = Vec::new();
        for &a in &chains[u] {
            for &b in &chains[v] {
                if hardware.has_coupler(qubits[a], qubits[b]) {
                    couplers.push((a.min(b), a.max(b)));
                }
            }
        }
        couplers.sort_unstable();
        for (pair, share) in couplers.iter().zip(split(value, couplers.len())) {
            j.insert(*pair, share);
        }
    }
    let max = h
        .iter()
        .chain(j.values())
        .fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let scale = power_of_two_scale(max);
    for v in h.iter_mut().chain(j.values_mut()) {
        *v *= scale;
    }
    let mut chain_couplers = Vec::new();
    for chain in &chains {
        for (x, &a) in chain.iter().enumerate() {
            for &b in &chain[x + 1..] {
                if hardware.has_coupler(qubits[a], qubits[b]) {
                    chain_couplers.push((a.min(b), a.max(b)));
                }
            }
        }
    }
    chain_couplers.sort_unstable();
    for &pair in &chain_couplers {
        j.insert(pair, j_f);
    }
    let problem = IsingProblem {
        num_spins: qubits.len(),
        h,
        j,
        offset: i.offset * scale,
    };
    for &v in &problem.h {
        if !profile.h_in_range(v) {
            return Err(Error::RangeViolation {
                value: v,
                min: profile.h_range.0,
                max: profile.h_range.1,
            });
        }
    }
    for &v in problem.j.values() {
        if !profile.j_in_range(v) {
            return Err(Error::RangeViolation {
                value: v,
                min: profile.j_range.0,
                max: profile.j_range.1,
            });
        }
    }
    Ok(EmbeddedIsing {
        ising: problem,
        qubits,
        chains,
        chain_couplers,
        j_f,
        scale,
        logical_hash: i.problem_hash(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ChainBreakPolicy {
    #[default]
    MajorityVote,
    Discard,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedSample {
    /// `None` when the policy discards the sample.
    pub spins: Option<Vec<Spin>>,
    pub broken_chains: Vec<usize>,
    pub break_fraction: f64,
}

/// Collapses each chain to one logical spin.
///
/// Majority-vote ties are settled by a coin derived from `coin_seed` and the
/// variable index.
pub fn decode_embedded_sample(
    s: &[Spin],
    chains: &[Vec<usize>],
    policy: ChainBreakPolicy,
    coin_seed: u64,
) -> DecodedSample {
    let mut spins = Vec::with_capacity(chains.len());
    let mut broken_chains = Vec::new();
    for (var, chain) in chains.iter().enumerate() {
        let up = chain.iter().filter(|&&p| s[p] > 0).count();
        let down = chain.len() - up;
        if up > 0 && down > 0 {
            broken_chains.push(var);
        }
        spins.push(match up.cmp(&down) {
            Ordering::Greater => 1,
            Ordering::Less => -1,
            Ordering::Equal => {
                let coin = seed::derive_seed(coin_seed, &[seed::stream::CHAIN_BREAK, var as u64]);
                if coin & 1 == 1 {
                    1
                } else {
                    -1
                }
            }
        });
    }
    let break_fraction = if chains.is_empty() {
        0.0
    } else {
        broken_chains.len() as f64 / chains.len() as f64
    };
    let discard = policy == ChainBreakPolicy::Discard && !broken_chains.is_empty();
    DecodedSample {
        spins: (!discard).then_some(spins),
        broken_chains,
        break_fraction,
    }
}

/// Draws a uniformly random logical spin vector.
pub fn random_spins(n: usize, rng: &mut impl Rng) -> Vec<Spin> {
    (0..n).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect()
}
