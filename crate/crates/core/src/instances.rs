//! Scheduling instances: random graphs with a hidden proper 3-coloring.
//!
//! Vertices are tasks and edges are conflicts between tasks. Each graph is
//! built by splitting the vertices into three near-balanced hidden color
//! classes and drawing exactly `round(d * n)` distinct edges uniformly from
//! the pairs that cross classes, so every instance has at least one valid
//! schedule by construction.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Edges per vertex used for the benchmark ensembles.
pub const DEFAULT_DENSITY: f64 = 4.5;
pub const HIDDEN_COLORS: usize = 3;
pub const FORMAT_VERSION: u32 = 1;
/// Largest vertex count accepted by the exhaustive coloring search.
pub const EXHAUSTIVE_LIMIT: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulingGraph {
    pub n: usize,
    /// Target edges per vertex.
    pub d: f64,
    pub seed: u64,
    pub edges: Vec<(usize, usize)>,
    pub hidden_coloring: Vec<u8>,
    pub format_version: u32,
}

impl SchedulingGraph {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let graph: SchedulingGraph = serde_json::from_str(&text)?;
        graph.check()?;
        Ok(graph)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Structural checks on a graph read from outside.
    pub fn check(&self) -> Result<()> {
        if self.hidden_coloring.len() != self.n {
            return Err(Error::Format(format!(
                "hidden coloring has {} entries for {} vertices",
                self.hidden_coloring.len(),
                self.n
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for &(a, b) in &self.edges {
            if a >= self.n || b >= self.n || a == b {
                return Err(Error::Format(format!("bad edge ({a}, {b})")));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(Error::Format(format!("duplicate edge ({a}, {b})")));
            }
        }
        Ok(())
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        adjacency(self.n, &self.edges)
    }
}

pub fn adjacency(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    adj
}

/// Number of edges requested for `n` vertices at density `d`.
pub fn edge_target(n: usize, d: f64) -> usize {
    (d * n as f64).round() as usize
}

/// Class sizes of the near-balanced partition: `ceil(n/3)` or `floor(n/3)`.
pub fn class_sizes(n: usize) -> [usize; HIDDEN_COLORS] {
    let mut sizes = [n / 3; HIDDEN_COLORS];
    for size in sizes.iter_mut().take(n % 3) {
        *size += 1;
    }
    sizes
}

/// Number of vertex pairs that join different hidden classes.
pub fn cross_class_pairs(n: usize) -> usize {
    let s = class_sizes(n);
    s[0] * s[1] + s[0] * s[2] + s[1] * s[2]
}

pub fn generate_instance(n: usize, d: f64, seed: u64) -> Result<SchedulingGraph> {
    if !d.is_finite() || d < 0.0 {
        return Err(Error::InvalidParameter(format!("density {d} must be >= 0")));
    }
    let requested = edge_target(n, d);
    let available = cross_class_pairs(n);
    if requested > available {
        return Err(Error::InstanceInfeasible {
            requested,
            available,
        });
    }
    if n < HIDDEN_COLORS {
        return Err(Error::InvalidParameter(format!(
            "need at least {HIDDEN_COLORS} vertices, got {n}"
        )));
    }

    let mut rng = seed::rng_from(seed, &[seed::stream::INSTANCE]);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut hidden_coloring = vec![0u8; n];
    for (position, &vertex) in order.iter().enumerate() {
        hidden_coloring[vertex] = (position % HIDDEN_COLORS) as u8;
    }

    let mut allowed = Vec::with_capacity(available);
    for a in 0..n {
        for b in a + 1..n {
            if hidden_coloring[a] != hidden_coloring[b] {
                allowed.push((a, b));
            }
        }
    }
    let mut edges: Vec<(usize, usize)> = rand::seq::index::sample(&mut rng, allowed.len(), requested)
        .into_iter()
        .map(|i| allowed[i])
        .collect();
    edges.sort_unstable();

    Ok(SchedulingGraph {
        n,
        d,
        seed,
        edges,
        hidden_coloring,
        format_version: FORMAT_VERSION,
    })
}

/// Per-instance seed for member `index` of size `n` in an ensemble.
pub fn instance_seed(master_seed: u64, n: usize, index: usize) -> u64 {
    seed::derive_seed(
        master_seed,
        &[seed::stream::INSTANCE, n as u64, index as u64],
    )
}

pub fn instance_id(n: usize, index: usize) -> String {
    format!("n{n:03}_i{index:04}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMember {
    pub id: String,
    pub index: usize,
    pub graph: SchedulingGraph,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub master_seed: u64,
    pub d: f64,
    pub count_per_size: usize,
    pub sizes: Vec<usize>,
    pub members: Vec<EnsembleMember>,
}

pub fn generate_ensemble(
    sizes: &[usize],
    count_per_size: usize,
    d: f64,
    master_seed: u64,
) -> Result<Ensemble> {
    if count_per_size == 0 {
        return Err(Error::InvalidParameter("count_per_size must be >= 1".into()));
    }
    let jobs: Vec<(usize, usize)> = sizes
        .iter()
        .flat_map(|&n| (0..count_per_size).map(move |i| (n, i)))
        .collect();
    let members = jobs
        .par_iter()
        .map(|&(n, index)| {
            let graph = generate_instance(n, d, instance_seed(master_seed, n, index))?;
            Ok(EnsembleMember {
                id: instance_id(n, index),
                index,
                graph,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Ensemble {
        master_seed,
        d,
        count_per_size,
        sizes: sizes.to_vec(),
        members,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub n: usize,
    pub index: usize,
    pub path: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub master_seed: u64,
    pub d: f64,
    pub count_per_size: usize,
    pub sizes: Vec<usize>,
    pub instances: Vec<ManifestEntry>,
    pub format_version: u32,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl Ensemble {
    /// Writes `dir/manifest.json` and one `dir/instances/<id>.json` per member.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let instance_dir = dir.join("instances");
        std::fs::create_dir_all(&instance_dir).map_err(|e| Error::io(&instance_dir, e))?;
        let mut entries = Vec::with_capacity(self.members.len());
        for member in &self.members {
            let relative = PathBuf::from("instances").join(format!("{}.json", member.id));
            member.graph.save(&dir.join(&relative))?;
            entries.push(ManifestEntry {
                id: member.id.clone(),
                n: member.graph.n,
                index: member.index,
                path: relative,
            });
        }
        let manifest = Manifest {
            master_seed: self.master_seed,
            d: self.d,
            count_per_size: self.count_per_size,
            sizes: self.sizes.clone(),
            instances: entries,
            format_version: FORMAT_VERSION,
        };
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)
            .map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        let members = manifest
            .instances
            .iter()
            .map(|entry| {
                Ok(EnsembleMember {
                    id: entry.id.clone(),
                    index: entry.index,
                    graph: SchedulingGraph::load(&dir.join(&entry.path))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Ensemble {
            master_seed: manifest.master_seed,
            d: manifest.d,
            count_per_size: manifest.count_per_size,
            sizes: manifest.sizes,
            members,
        })
    }
}

pub fn is_proper_coloring(edges: &[(usize, usize)], coloring: &[u8]) -> bool {
    edges.iter().all(|&(a, b)| coloring[a] != coloring[b])
}

/// Exhaustive check for a proper `k`-coloring. Returns a witness if one
/// exists.
pub fn verify_colorable(g: &SchedulingGraph, k: usize) -> Result<Option<Vec<u8>>> {
    find_coloring(g.n, &g.edges, k)
}

/// Backtracking search, always branching on the most saturated vertex and
/// opening at most one new color per branch.
pub fn find_coloring(n: usize, edges: &[(usize, usize)], k: usize) -> Result<Option<Vec<u8>>> {
    if n > EXHAUSTIVE_LIMIT {
        return Err(Error::SizeTooLarge {
            size: n,
            limit: EXHAUSTIVE_LIMIT,
        });
    }
    if n == 0 {
        return Ok(Some(Vec::new()));
    }
    if k == 0 {
        return Ok(None);
    }
    let adj = adjacency(n, edges);
    let mut colors: Vec<Option<u8>> = vec![None; n];
    if backtrack(&adj, k, &mut colors, 0) {
        Ok(Some(colors.into_iter().map(|c| c.unwrap()).collect()))
    } else {
        Ok(None)
    }
}

fn backtrack(adj: &[Vec<usize>], k: usize, colors: &mut [Option<u8>], used: usize) -> bool {
    let mut pick: Option<(usize, usize, usize)> = None;
    for v in 0..adj.len() {
        if colors[v].is_some() {
            continue;
        }
        let mut seen = 0u32;
        for &u in &adj[v] {
            if let Some(c) = colors[u] {
                seen |= 1 << c;
            }
        }
        let key = (seen.count_ones() as usize, adj[v].len(), v);
        if pick.is_none_or(|p| (key.0, key.1) > (p.0, p.1)) {
            pick = Some(key);
        }
    }
    let Some((_, _, v)) = pick else {
        return true;
    };
    let limit = (used + 1).min(k);
    for c in 0..limit {
        let c = c as u8;
        if adj[v].iter().any(|&u| colors[u] == Some(c)) {
            continue;
        }
        colors[v] = Some(c);
        let next_used = used.max(c as usize + 1);
        if backtrack(adj, k, colors, next_used) {
            return true;
        }
        colors[v] = None;
    }
    false
}
