//! Chimera and Pegasus hardware graphs, defect masks and machine profiles.
//!
//! Qubit ids follow the usual linear labelling of the coordinate systems:
//!
//! * Chimera `(row, col, side, index)` with `side` 0 for the vertical shore
//!   and 1 for the horizontal shore maps to `((row * m + col) * 2 + side) * 4 + index`.
//! * Pegasus `(u, w, k, z)` maps to `((u * m + w) * 12 + k) * (m - 1) + z`.
//!   Qubits on the incomplete boundary are trimmed, so ids are sparse.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub type QubitId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    Chimera,
    Pegasus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Coordinate {
    Chimera {
        row: usize,
        col: usize,
        side: usize,
        index: usize,
    },
    Pegasus {
        u: usize,
        w: usize,
        k: usize,
        z: usize,
    },
}

/// Pegasus offsets of the standard (index 0) layout: vertical then
/// horizontal, one entry per `k`.
const PEGASUS_VERTICAL_OFFSETS: [usize; 12] = [2, 2, 2, 2, 10, 10, 10, 10, 6, 6, 6, 6];
const PEGASUS_HORIZONTAL_OFFSETS: [usize; 12] = [6, 6, 6, 6, 2, 2, 2, 2, 10, 10, 10, 10];

/// A qubit/coupler graph with a mask of unusable components.
#[derive(Debug, Clone)]
pub struct HardwareGraph {
    family: Family,
    m: usize,
    nodes: Vec<QubitId>,
    couplers: Vec<(QubitId, QubitId)>,
    coordinates: BTreeMap<QubitId, Coordinate>,
    dead_nodes: BTreeSet<QubitId>,
    dead_couplers: BTreeSet<(QubitId, QubitId)>,
    adjacency: Vec<Vec<QubitId>>,
}

fn ordered(a: QubitId, b: QubitId) -> (QubitId, QubitId) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl HardwareGraph {
    fn assemble(
        family: Family,
        m: usize,
        coordinates: BTreeMap<QubitId, Coordinate>,
        couplers: BTreeSet<(QubitId, QubitId)>,
    ) -> Self {
        let nodes: Vec<QubitId> = coordinates.keys().copied().collect();
        let mut graph = HardwareGraph {
            family,
            m,
            nodes,
            couplers: couplers.into_iter().collect(),
            coordinates,
            dead_nodes: BTreeSet::new(),
            dead_couplers: BTreeSet::new(),
            adjacency: Vec::new(),
        };
        graph.rebuild_adjacency();
        graph
    }

    fn rebuild_adjacency(&mut self) {
        let bound = self.id_bound();
        let mut adjacency = vec![Vec::new(); bound];
        for &(a, b) in &self.couplers {
            if self.coupler_usable(a, b) {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        self.adjacency = adjacency;
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// One past the largest qubit id.
    pub fn id_bound(&self) -> usize {
        self.nodes.last().map_or(0, |&q| q + 1)
    }

    /// All fabricated qubits, including defective ones.
    pub fn nodes(&self) -> &[QubitId] {
        &self.nodes
    }

    /// All fabricated couplers, including defective ones.
    pub fn couplers(&self) -> &[(QubitId, QubitId)] {
        &self.couplers
    }

    pub fn contains(&self, q: QubitId) -> bool {
        self.coordinates.contains_key(&q)
    }

    pub fn is_usable(&self, q: QubitId) -> bool {
        self.contains(q) && !self.dead_nodes.contains(&q)
    }

    fn coupler_usable(&self, a: QubitId, b: QubitId) -> bool {
        self.is_usable(a) && self.is_usable(b) && !self.dead_couplers.contains(&ordered(a, b))
    }

    pub fn has_coupler(&self, a: QubitId, b: QubitId) -> bool {
        a < self.adjacency.len() && self.adjacency[a].binary_search(&b).is_ok()
    }

    pub fn usable_nodes(&self) -> Vec<QubitId> {
        self.nodes
            .iter()
            .copied()
            .filter(|&q| self.is_usable(q))
            .collect()
    }

    pub fn usable_couplers(&self) -> Vec<(QubitId, QubitId)> {
        self.couplers
            .iter()
            .copied()
            .filter(|&(a, b)| self.coupler_usable(a, b))
            .collect()
    }

    /// Usable neighbours of a usable qubit.
    pub fn neighbors(&self, q: QubitId) -> &[QubitId] {
        self.adjacency.get(q).map_or(&[], Vec::as_slice)
    }

    pub fn degree(&self, q: QubitId) -> usize {
        self.neighbors(q).len()
    }

    pub fn max_degree(&self) -> usize {
        self.nodes.iter().map(|&q| self.degree(q)).max().unwrap_or(0)
    }

    pub fn coordinate(&self, q: QubitId) -> Option<Coordinate> {
        self.coordinates.get(&q).copied()
    }

    pub fn qubit_at(&self, coordinate: Coordinate) -> Option<QubitId> {
        let id = match coordinate {
            Coordinate::Chimera {
                row,
                col,
                side,
                index,
            } => chimera_id(self.m, row, col, side, index),
            Coordinate::Pegasus { u, w, k, z } => pegasus_id(self.m, u, w, k, z),
        };
        self.contains(id).then_some(id)
    }

    pub fn dead_nodes(&self) -> &BTreeSet<QubitId> {
        &self.dead_nodes
    }

    pub fn dead_couplers(&self) -> &BTreeSet<(QubitId, QubitId)> {
        &self.dead_couplers
    }

    /// Size of the largest connected component of the usable graph.
    pub fn largest_component_size(&self) -> usize {
        let mut seen = vec![false; self.id_bound()];
        let mut best = 0;
        for &start in &self.nodes {
            if seen[start] || !self.is_usable(start) {
                continue;
            }
            seen[start] = true;
            let mut size = 0;
            let mut queue = VecDeque::from([start]);
            while let Some(q) = queue.pop_front() {
                size += 1;
                for &n in self.neighbors(q) {
                    if !seen[n] {
                        seen[n] = true;
                        queue.push_back(n);
                    }
                }
            }
            best = best.max(size);
        }
        best
    }

    /// Marks `|nodes| - working` uniformly random qubits, and their couplers,
    /// unusable. The choice is a deterministic function of `seed`.
    pub fn apply_defects(&self, working: usize, seed: u64) -> Result<HardwareGraph> {
        let healthy = self.usable_nodes();
        if working > healthy.len() {
            return Err(Error::InvalidParameter(format!(
                "{working} working qubits requested from {} usable",
                healthy.len()
            )));
        }
        let mut rng = seed::rng_from(seed, &[seed::stream::DEFECTS]);
        let mut order = healthy;
        order.shuffle(&mut rng);
        let dead = order[working..].iter().copied();
        Ok(self.with_defects(dead, std::iter::empty()))
    }

    /// Applies an explicit defect list, for example one loaded from a file.
    pub fn with_defects(
        &self,
        nodes: impl IntoIterator<Item = QubitId>,
        couplers: impl IntoIterator<Item = (QubitId, QubitId)>,
    ) -> HardwareGraph {
        let mut out = self.clone();
        out.dead_nodes
            .extend(nodes.into_iter().filter(|q| self.contains(*q)));
        out.dead_couplers
            .extend(couplers.into_iter().map(|(a, b)| ordered(a, b)));
        out.rebuild_adjacency();
        out
    }

    /// SHA-256 over the usable structure, used to tie embeddings to graphs.
    pub fn structure_hash(&self) -> String {
        let mut text = format!("{:?}:{}\n", self.family, self.m);
        for q in self.usable_nodes() {
            text.push_str(&format!("{q} "));
        }
        text.push('\n');
        for (a, b) in self.usable_couplers() {
            text.push_str(&format!("{a}-{b} "));
        }
        crate::qubo::sha256_hex(text.as_bytes())
    }

    /// Usable couplers as `a b` lines.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for (a, b) in self.usable_couplers() {
            out.push_str(&format!("{a} {b}\n"));
        }
        out
    }

    pub fn to_export(&self) -> GraphExport {
        GraphExport {
            family: self.family,
            m: self.m,
            nodes: self
                .nodes
                .iter()
                .map(|&q| ExportedQubit {
                    id: q,
                    coordinate: self.coordinates[&q],
                    usable: self.is_usable(q),
                })
                .collect(),
            couplers: self.usable_couplers(),
            dead_nodes: self.dead_nodes.iter().copied().collect(),
            dead_couplers: self.dead_couplers.iter().copied().collect(),
        }
    }
}

/// JSON form of a [`HardwareGraph`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphExport {
    pub family: Family,
    pub m: usize,
    pub nodes: Vec<ExportedQubit>,
    pub couplers: Vec<(QubitId, QubitId)>,
    pub dead_nodes: Vec<QubitId>,
    pub dead_couplers: Vec<(QubitId, QubitId)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExportedQubit {
    pub id: QubitId,
    pub coordinate: Coordinate,
    pub usable: bool,
}

/// Explicit defect list as stored on disk.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DefectList {
    pub nodes: Vec<QubitId>,
    #[serde(default)]
    pub couplers: Vec<(QubitId, QubitId)>,
}

impl DefectList {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn chimera_id(m: usize, row: usize, col: usize, side: usize, index: usize) -> QubitId {
    ((row * m + col) * 2 + side) * 4 + index
}

fn pegasus_id(m: usize, u: usize, w: usize, k: usize, z: usize) -> QubitId {
    ((u * m + w) * 12 + k) * (m - 1) + z
}

/// Chimera `C_m`: an `m x m` grid of `K_{4,4}` unit cells.
pub fn build_chimera(m: usize) -> Result<HardwareGraph> {
    if m == 0 {
        return Err(Error::InvalidParameter("Chimera size must be >= 1".into()));
    }
    let mut coordinates = BTreeMap::new();
    let mut couplers = BTreeSet::new();
    for row in 0..m {
        for col in 0..m {
            for side in 0..2 {
                for index in 0..4 {
                    coordinates.insert(
                        chimera_id(m, row, col, side, index),
                        Coordinate::Chimera {
                            row,
                            col,
                            side,
                            index,
                        },
                    );
                }
            }
            for a in 0..4 {
                for b in 0..4 {
                    couplers.insert(ordered(
                        chimera_id(m, row, col, 0, a),
                        chimera_id(m, row, col, 1, b),
                    ));
                }
            }
            for index in 0..4 {
                if row + 1 < m {
                    couplers.insert(ordered(
                        chimera_id(m, row, col, 0, index),
                        chimera_id(m, row + 1, col, 0, index),
                    ));
                }
                if col + 1 < m {
                    couplers.insert(ordered(
                        chimera_id(m, row, col, 1, index),
                        chimera_id(m, row, col + 1, 1, index),
                    ));
                }
            }
        }
    }
    Ok(HardwareGraph::assemble(
        Family::Chimera,
        m,
        coordinates,
        couplers,
    ))
}

/// Pegasus `P_m` in the standard coordinate layout with the incomplete
/// boundary qubits trimmed (the "fabric only" graph).
pub fn build_pegasus(m: usize) -> Result<HardwareGraph> {
    if m < 2 {
        return Err(Error::InvalidParameter("Pegasus size must be >= 2".into()));
    }
    let m1 = m - 1;
    let vertical = PEGASUS_VERTICAL_OFFSETS;
    let horizontal = PEGASUS_HORIZONTAL_OFFSETS;
    // Per orientation u: qubits with k below `start[u]` on the first line and
    // k at or above `12 - end[u]` on the last line never reach the fabric.
    let start = [
        *horizontal.iter().min().unwrap(),
        *vertical.iter().min().unwrap(),
    ];
    let end = [
        12 - *horizontal.iter().max().unwrap(),
        12 - *vertical.iter().max().unwrap(),
    ];
    let present = |u: usize, w: usize, k: usize| -> bool {
        if w == 0 && k < start[u] {
            return false;
        }
        if w == m1 && k >= 12 - end[u] {
            return false;
        }
        true
    };

    let mut coordinates = BTreeMap::new();
    for u in 0..2 {
        for w in 0..m {
            for k in 0..12 {
                if !present(u, w, k) {
                    continue;
                }
                for z in 0..m1 {
                    coordinates.insert(pegasus_id(m, u, w, k, z), Coordinate::Pegasus { u, w, k, z });
                }
            }
        }
    }

    let mut couplers = BTreeSet::new();
    let mut add = |a: (usize, usize, usize, usize), b: (usize, usize, usize, usize)| {
        if present(a.0, a.1, a.2) && present(b.0, b.1, b.2) {
            couplers.insert(ordered(
                pegasus_id(m, a.0, a.1, a.2, a.3),
                pegasus_id(m, b.0, b.1, b.2, b.3),
            ));
        }
    };
    for u in 0..2 {
        for w in 0..m {
            for k in 0..12 {
                // External couplers along a qubit line.
                for z in 0..m1.saturating_sub(1) {
                    add((u, w, k, z), (u, w, k, z + 1));
                }
                // Odd couplers pair k with k + 1.
                if k % 2 == 0 {
                    for z in 0..m1 {
                        add((u, w, k, z), (u, w, k + 1, z));
                    }
                }
            }
        }
    }
    // Internal couplers between vertical (u = 0) and horizontal (u = 1) qubits.
    for w in 0..m {
        for kk in 0..12 {
            let k_lo = if w == 0 { horizontal[kk] } else { 0 };
            let k_hi = if w < m1 { 12 } else { horizontal[kk] };
            for k in k_lo..k_hi {
                for z in 0..m1 {
                    let w2 = z + usize::from(kk < vertical[k]);
                    let z2 = w - usize::from(k < horizontal[kk]);
                    add((0, w, k, z), (1, w2, kk, z2));
                }
            }
        }
    }
    Ok(HardwareGraph::assemble(
        Family::Pegasus,
        m,
        coordinates,
        couplers,
    ))
}

/// Identity-chain placement of Chimera `C_{m-1}` inside Pegasus `P_m`.
///
/// Cell `(row, col)` uses vertical qubits `k in {2, 3}` on line `w = col`
/// and `k in {0, 1}` on line `w = col + 1` at position `z = row`, and
/// horizontal qubits `k in 4..8` on line `w = row` at position `z = col`.
/// Returns the Chimera graph and the qubit map Chimera id -> Pegasus id.
pub fn chimera_in_pegasus(m: usize) -> Result<(HardwareGraph, BTreeMap<QubitId, QubitId>)> {
    if m < 2 {
        return Err(Error::InvalidParameter("Pegasus size must be >= 2".into()));
    }
    let chimera = build_chimera(m - 1)?;
    let mut map = BTreeMap::new();
    for &q in chimera.nodes() {
        let Some(Coordinate::Chimera {
            row,
            col,
            side,
            index,
        }) = chimera.coordinate(q)
        else {
            unreachable!("chimera graph carries chimera coordinates");
        };
        let target = match (side, index) {
            (0, i) if i < 2 => pegasus_id(m, 0, col, 2 + i, row),
            (0, i) => pegasus_id(m, 0, col + 1, i - 2, row),
            (_, i) => pegasus_id(m, 1, row, 4 + i, col),
        };
        map.insert(q, target);
    }
    Ok((chimera, map))
}

/// The four annealer generations compared by the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Machine {
    #[serde(rename = "Two")]
    Two,
    #[serde(rename = "2X")]
    TwoX,
    #[serde(rename = "2000Q")]
    D2000Q,
    #[serde(rename = "Advantage")]
    Advantage,
}

impl Machine {
    pub const ALL: [Machine; 4] = [
        Machine::Two,
        Machine::TwoX,
        Machine::D2000Q,
        Machine::Advantage,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Machine::Two => "Two",
            Machine::TwoX => "2X",
            Machine::D2000Q => "2000Q",
            Machine::Advantage => "Advantage",
        }
    }

    pub fn parse(name: &str) -> Option<Machine> {
        let lower = name.to_ascii_lowercase();
        Machine::ALL
            .into_iter()
            .find(|m| m.name().to_ascii_lowercase() == lower)
    }
}

impl fmt::Display for Machine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Gauge-count rule for a profile. Sizes not listed use `default`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeRule {
    pub default: usize,
    #[serde(default)]
    pub by_size: Vec<(usize, usize)>,
}

impl GaugeRule {
    pub fn gauges_for(&self, n: usize) -> usize {
        self.by_size
            .iter()
            .find(|(size, _)| *size == n)
            .map_or(self.default, |(_, g)| *g)
    }
}

/// Characteristics of one annealer generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardwareProfile {
    pub name: Machine,
    pub family: Family,
    pub m: usize,
    pub total_qubits: usize,
    pub working_qubits: usize,
    pub min_anneal_time_us: f64,
    pub temperature_mk: f64,
    pub default_anneals_per_gauge: usize,
    pub gauges: GaugeRule,
    /// Inclusive problem-size range run on the device.
    pub problem_sizes: (usize, usize),
    pub h_range: (f64, f64),
    pub j_range: (f64, f64),
    pub default_j_f: f64,
    pub default_jf_grid: Vec<f64>,
    pub default_anneal_times_us: Vec<f64>,
}

fn jf_grid(from: f64, to: f64, step: f64) -> Vec<f64> {
    let count = ((from - to).abs() / step).round() as usize;
    (0..=count).map(|i| from - step * i as f64).collect()
}

impl HardwareProfile {
    pub fn builtin(machine: Machine) -> HardwareProfile {
        match machine {
            Machine::Two => HardwareProfile {
                name: machine,
                family: Family::Chimera,
                m: 8,
                total_qubits: 512,
                working_qubits: 509,
                min_anneal_time_us: 20.0,
                temperature_mk: 13.2,
                default_anneals_per_gauge: 45_000,
                gauges: GaugeRule {
                    default: 10,
                    by_size: vec![],
                },
                problem_sizes: (8, 16),
                h_range: (-2.0, 2.0),
                j_range: (-1.0, 1.0),
                default_j_f: -1.0,
                default_jf_grid: vec![-1.0],
                default_anneal_times_us: vec![20.0],
            },
            Machine::TwoX => HardwareProfile {
                name: machine,
                family: Family::Chimera,
                m: 12,
                total_qubits: 1152,
                working_qubits: 1097,
                min_anneal_time_us: 5.0,
                temperature_mk: 12.0,
                default_anneals_per_gauge: 10_000,
                gauges: GaugeRule {
                    default: 10,
                    by_size: vec![],
                },
                problem_sizes: (8, 20),
                h_range: (-2.0, 2.0),
                j_range: (-2.0, 1.0),
                default_j_f: -1.0,
                default_jf_grid: jf_grid(-0.5, -2.0, 0.125),
                default_anneal_times_us: vec![5.0, 20.0],
            },
            Machine::D2000Q => HardwareProfile {
                name: machine,
                family: Family::Chimera,
                m: 16,
                total_qubits: 2048,
                working_qubits: 2031,
                min_anneal_time_us: 1.0,
                temperature_mk: 12.1,
                default_anneals_per_gauge: 10_000,
                gauges: GaugeRule {
                    default: 10,
                    by_size: vec![(18, 50), (20, 100), (22, 100), (24, 100)],
                },
                problem_sizes: (8, 24),
                h_range: (-2.0, 2.0),
                j_range: (-2.0, 1.0),
                default_j_f: -1.0,
                default_jf_grid: jf_grid(-0.625, -1.375, 0.125),
                default_anneal_times_us: vec![1.0, 5.0, 20.0],
            },
            Machine::Advantage => HardwareProfile {
                name: machine,
                family: Family::Pegasus,
                m: 16,
                total_qubits: 5640,
                working_qubits: 5436,
                min_anneal_time_us: 1.0,
                temperature_mk: 15.8,
                default_anneals_per_gauge: 500,
                gauges: GaugeRule {
                    default: 20,
                    by_size: vec![],
                },
                problem_sizes: (8, 40),
                h_range: (-4.0, 4.0),
                j_range: (-2.0, 1.0),
                default_j_f: -1.0,
                default_jf_grid: vec![-0.4, -0.55, -0.7, -0.85, -1.0],
                default_anneal_times_us: vec![1.0, 5.0, 20.0],
            },
        }
    }

    /// Full hardware graph without defects.
    pub fn ideal_graph(&self) -> Result<HardwareGraph> {
        match self.family {
            Family::Chimera => build_chimera(self.m),
            Family::Pegasus => build_pegasus(self.m),
        }
    }

    /// Hardware graph with `total - working` random defects.
    pub fn graph(&self, seed: u64) -> Result<HardwareGraph> {
        self.ideal_graph()?.apply_defects(self.working_qubits, seed)
    }

    pub fn j_in_range(&self, j: f64) -> bool {
        j >= self.j_range.0 && j <= self.j_range.1
    }

    pub fn h_in_range(&self, h: f64) -> bool {
        h >= self.h_range.0 && h <= self.h_range.1
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Coupler predicate written directly from the cell description, used to
    /// audit the constructed coupler set pair by pair.
    fn chimera_pair_coupled(a: Coordinate, b: Coordinate) -> bool {
        let (
            Coordinate::Chimera {
                row: r1,
                col: c1,
                side: s1,
                index: i1,
            },
            Coordinate::Chimera {
                row: r2,
                col: c2,
                side: s2,
                index: i2,
            },
        ) = (a, b)
        else {
            return false;
        };
        if (r1, c1) == (r2, c2) {
            return s1 != s2;
        }
        if s1 != s2 || i1 != i2 {
            return false;
        }
        match s1 {
            0 => c1 == c2 && r1.abs_diff(r2) == 1,
            _ => r1 == r2 && c1.abs_diff(c2) == 1,
        }
    }

    #[test]
    fn chimera_coupler_audit() {
        for m in 1..=3 {
            let g = build_chimera(m).unwrap();
            let coords: Vec<_> = g.nodes().iter().map(|&q| (q, g.coordinate(q).unwrap())).collect();
            let mut audited = 0;
            for (i, &(a, ca)) in coords.iter().enumerate() {
                for &(b, cb) in &coords[i + 1..] {
                    let expected = chimera_pair_coupled(ca, cb);
                    assert_eq!(g.has_coupler(a, b), expected, "{ca:?} {cb:?}");
                    audited += usize::from(expected);
                }
            }
            assert_eq!(audited, g.couplers().len());
            assert_eq!(audited, 16 * m * m + 8 * m * (m - 1));
        }
    }

    #[test]
    fn chimera_sizes() {
        for (m, n) in [(3, 72), (8, 512), (12, 1152), (16, 2048)] {
            let g = build_chimera(m).unwrap();
            assert_eq!(g.nodes().len(), n);
            assert_eq!(g.max_degree(), 6);
        }
        assert!(build_chimera(0).is_err());
    }

    #[test]
    fn pegasus_p16() {
        let g = build_pegasus(16).unwrap();
        assert_eq!(g.nodes().len(), 5640);
        assert_eq!(g.max_degree(), 15);
        assert_eq!(g.couplers().len(), 40484);
        assert_eq!(g.largest_component_size(), 5640);
    }

    #[test]
    fn pegasus_small_sizes() {
        for m in 2..=6 {
            let g = build_pegasus(m).unwrap();
            assert_eq!(g.nodes().len(), 24 * m * (m - 1) - 8 * (m - 1));
            assert!(g.max_degree() <= 15);
            for &(a, b) in g.couplers() {
                assert!(g.contains(a) && g.contains(b));
            }
        }
        assert!(build_pegasus(1).is_err());
    }

    #[test]
    fn coordinates_are_bijective() {
        for g in [build_chimera(4).unwrap(), build_pegasus(4).unwrap()] {
            for &q in g.nodes() {
                assert_eq!(g.qubit_at(g.coordinate(q).unwrap()), Some(q));
            }
        }
    }

    #[test]
    fn defects() {
        let g = build_chimera(16).unwrap();
        let d = g.apply_defects(2031, 11).unwrap();
        assert_eq!(d.usable_nodes().len(), 2031);
        assert_eq!(d.dead_nodes().len(), 17);
        for (a, b) in d.usable_couplers() {
            assert!(d.is_usable(a) && d.is_usable(b));
        }
        assert!(d.largest_component_size() <= 2031);
        let again = g.apply_defects(2031, 11).unwrap();
        assert_eq!(d.dead_nodes(), again.dead_nodes());
        let other = g.apply_defects(2031, 12).unwrap();
        assert_ne!(d.dead_nodes(), other.dead_nodes());

        let same = g.apply_defects(2048, 5).unwrap();
        assert_eq!(same.usable_couplers(), g.usable_couplers());
        assert!(g.apply_defects(2049, 5).is_err());
    }

    #[test]
    fn profiles_match_machine_specs() {
        let expect = [
            (Machine::Two, 512, 509, 20.0, 45_000),
            (Machine::TwoX, 1152, 1097, 5.0, 10_000),
            (Machine::D2000Q, 2048, 2031, 1.0, 10_000),
            (Machine::Advantage, 5640, 5436, 1.0, 500),
        ];
        for (machine, total, working, tmin, reads) in expect {
            let p = HardwareProfile::builtin(machine);
            assert_eq!(p.total_qubits, total);
            assert_eq!(p.working_qubits, working);
            assert_eq!(p.min_anneal_time_us, tmin);
            assert_eq!(p.default_anneals_per_gauge, reads);
            assert_eq!(p.ideal_graph().unwrap().nodes().len(), total);
            assert!(p.working_qubits <= p.total_qubits);
            for &jf in &p.default_jf_grid {
                assert!(p.j_in_range(jf));
            }
        }
        let q = HardwareProfile::builtin(Machine::D2000Q);
        assert_eq!(q.gauges.gauges_for(22), 100);
        assert_eq!(q.gauges.gauges_for(18), 50);
        assert_eq!(q.gauges.gauges_for(12), 10);
        assert_eq!(HardwareProfile::builtin(Machine::TwoX).default_jf_grid.len(), 13);
        assert_eq!(q.default_jf_grid.len(), 7);
        assert_eq!(Machine::parse("2000q"), Some(Machine::D2000Q));
    }

    #[test]
    fn chimera_layer_inside_pegasus() {
        for m in [2, 3, 5, 16] {
            let pegasus = build_pegasus(m).unwrap();
            let (chimera, map) = chimera_in_pegasus(m).unwrap();
            assert_eq!(chimera.nodes().len(), 8 * (m - 1) * (m - 1));
            let images: BTreeSet<_> = map.values().copied().collect();
            assert_eq!(images.len(), map.len());
            assert!(images.iter().all(|&q| pegasus.contains(q)));
            for &(a, b) in chimera.couplers() {
                assert!(pegasus.has_coupler(map[&a], map[&b]));
            }
        }
    }
}
