//! Experiment orchestration: plans, checkpointed cell execution, J_F
//! optimisation and report files.
//!
//! A plan expands into cells `(instance, anneal time, J_F)`. Every cell owns
//! a seed derived from the master seed and its key, so cells can run in any
//! order and on any number of threads. Finished cells are appended to
//! `cells.jsonl` in the output directory; a rerun skips them.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};

use crate::embedding::{
    adjacency_hash, decode_embedded_sample, embed_ising, find_embedding, ChainBreakPolicy,
    Embedding,
};
use crate::instances::{self, Ensemble, SchedulingGraph};
use crate::numeric::exact_sum;
use crate::qubo::{self, decode_coloring, spins_to_bits, QuboProblem};
use crate::samplers::{sa_map, SamplerConfig, SamplerKind};
use crate::seed::{derive_seed, stream};
use crate::stats::{
    bootstrap_median, compute_pgs, compute_tts, fit_scaling, write_summary_csv, MedianSummary,
    ScalingFit, SummaryRow, Tts,
};
use crate::topology::{GaugeRule, HardwareGraph, HardwareProfile, Machine};
use crate::{Error, Result};

pub const CELLS_FILE: &str = "cells.jsonl";
pub const PLAN_FILE: &str = "plan.json";
pub const RESULT_FILE: &str = "result.json";
pub const EMBEDDING_DIR: &str = "embeddings";
pub const DEFAULT_EMBEDDING_TRIES: usize = 16;

fn default_density() -> f64 {
    instances::DEFAULT_DENSITY
}
fn default_tries() -> usize {
    DEFAULT_EMBEDDING_TRIES
}
fn default_resamples() -> usize {
    crate::stats::DEFAULT_RESAMPLES
}
fn default_confidence() -> f64 {
    crate::stats::DEFAULT_CONFIDENCE
}

/// Accepts either a full profile object or a machine name.
fn profile_or_name<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<HardwareProfile, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Name(Machine),
        Full(Box<HardwareProfile>),
    }
    Ok(match Raw::deserialize(d)? {
        Raw::Name(m) => HardwareProfile::builtin(m),
        Raw::Full(p) => *p,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    #[serde(deserialize_with = "profile_or_name")]
    pub profile: HardwareProfile,
    pub sizes: Vec<usize>,
    pub instances_per_size: usize,
    /// Edges per vertex for generated instances.
    #[serde(default = "default_density")]
    pub density: f64,
    /// Load instances from a saved ensemble instead of generating them.
    #[serde(default)]
    pub instances_dir: Option<PathBuf>,
    pub anneal_times_us: Vec<f64>,
    pub j_f_grid: Vec<f64>,
    /// Base sampler settings. Anneal time and seed are replaced per cell.
    pub sampler: SamplerConfig,
    /// Gauge count per size. Falls back to `sampler.num_gauges`.
    #[serde(default)]
    pub gauges: Option<GaugeRule>,
    pub master_seed: u64,
    /// Skip the random defect mask.
    #[serde(default)]
    pub ideal_hardware: bool,
    #[serde(default = "default_tries")]
    pub embedding_tries: usize,
    #[serde(default)]
    pub chain_break: ChainBreakPolicy,
    #[serde(default = "default_resamples")]
    pub bootstrap_resamples: usize,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    pub output_dir: PathBuf,
}

impl ExperimentPlan {
    /// Defaults for `machine`: every even size in its range, the
    /// default J_F grid and anneal times, and the per-size gauge rule.
    pub fn defaults(machine: Machine, output_dir: PathBuf) -> Self {
        let profile = HardwareProfile::builtin(machine);
        let (lo, hi) = profile.problem_sizes;
        ExperimentPlan {
            sizes: (lo..=hi).step_by(2).collect(),
            instances_per_size: 100,
            density: instances::DEFAULT_DENSITY,
            instances_dir: None,
            anneal_times_us: profile.default_anneal_times_us.clone(),
            j_f_grid: profile.default_jf_grid.clone(),
            sampler: SamplerConfig {
                num_reads: profile.default_anneals_per_gauge,
                num_gauges: profile.gauges.default,
                ..SamplerConfig::default()
            },
            gauges: Some(profile.gauges.clone()),
            master_seed: 0,
            ideal_hardware: false,
            embedding_tries: DEFAULT_EMBEDDING_TRIES,
            chain_break: ChainBreakPolicy::MajorityVote,
            bootstrap_resamples: crate::stats::DEFAULT_RESAMPLES,
            confidence: crate::stats::DEFAULT_CONFIDENCE,
            output_dir,
            profile,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidPlan(msg));
        if self.sizes.is_empty() {
            return bad("no problem sizes".into());
        }
        if self.instances_per_size == 0 {
            return bad("instances_per_size must be at least 1".into());
        }
        if self.anneal_times_us.is_empty() {
            return bad("no anneal times".into());
        }
        if self.j_f_grid.is_empty() {
            return bad("empty J_F grid".into());
        }
        let min_t = self.profile.min_anneal_time_us;
        for &t in &self.anneal_times_us {
            if !(t >= min_t) || !t.is_finite() {
                return bad(format!(
                    "anneal time {t} us is below the {} minimum of {min_t} us",
                    self.profile.name
                ));
            }
        }
        for &j in &self.j_f_grid {
            if !(j < 0.0) || !self.profile.j_in_range(j) {
                return bad(format!(
                    "J_F {j} must be negative and inside {:?}",
                    self.profile.j_range
                ));
            }
        }
        if has_duplicates(&self.anneal_times_us) || has_duplicates(&self.j_f_grid) {
            return bad("anneal times and J_F values must be distinct".into());
        }
        if self.sampler.kind != SamplerKind::SimulatedAnnealing {
            return bad(format!("sampler {:?} cannot run a sweep", self.sampler.kind));
        }
        self.sampler
            .check()
            .or_else(|e| bad(format!("sampler: {e}")))?;
        if self.gauges.as_ref().is_some_and(|g| {
            g.default == 0 || g.by_size.iter().any(|&(_, c)| c == 0)
        }) {
            return bad("gauge counts must be at least 1".into());
        }
        if self.embedding_tries == 0 || self.bootstrap_resamples == 0 {
            return bad("embedding_tries and bootstrap_resamples must be at least 1".into());
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return bad(format!("confidence {} outside (0, 1)", self.confidence));
        }
        if self.instances_dir.is_none() {
            for &n in &self.sizes {
                let requested = instances::edge_target(n, self.density);
                let available = instances::cross_class_pairs(n);
                if n < instances::HIDDEN_COLORS || requested > available {
                    return bad(format!(
                        "density {} needs {requested} edges at n = {n}, only {available} are possible",
                        self.density
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn gauges_for(&self, n: usize) -> usize {
        self.gauges
            .as_ref()
            .map_or(self.sampler.num_gauges, |rule| rule.gauges_for(n))
    }

    /// Hash of everything that affects results (the output directory is
    /// excluded).
    pub fn fingerprint(&self) -> Result<String> {
        let mut copy = self.clone();
        copy.output_dir = PathBuf::new();
        Ok(qubo::sha256_hex(serde_json::to_string(&copy)?.as_bytes()))
    }

    fn hardware(&self) -> Result<HardwareGraph> {
        if self.ideal_hardware {
            self.profile.ideal_graph()
        } else {
            self.profile
                .graph(derive_seed(self.master_seed, &[stream::DEFECTS]))
        }
    }

    fn instances(&self) -> Result<Vec<Instance>> {
        let members = match &self.instances_dir {
            Some(dir) => Ensemble::load(dir)?.members,
            None => {
                instances::generate_ensemble(
                    &self.sizes,
                    self.instances_per_size,
                    self.density,
                    self.master_seed,
                )?
                .members
            }
        };
        let mut out = Vec::new();
        for &n in &self.sizes {
            let mut of_size: Vec<_> = members.iter().filter(|m| m.graph.n == n).collect();
            of_size.sort_by_key(|m| m.index);
            if of_size.len() < self.instances_per_size {
                return Err(Error::InvalidPlan(format!(
                    "{} instances of size {n} requested, {} available",
                    self.instances_per_size,
                    of_size.len()
                )));
            }
            for m in of_size.into_iter().take(self.instances_per_size) {
                out.push(Instance {
                    id: m.id.clone(),
                    index: m.index,
                    graph: m.graph.clone(),
                });
            }
        }
        Ok(out)
    }
}

fn has_duplicates(values: &[f64]) -> bool {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.windows(2).any(|w| w[0] == w[1])
}

struct Instance {
    id: String,
    index: usize,
    graph: SchedulingGraph,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellStatus {
    Sampled,
    EmbeddingFailed,
}

/// Outcome of one `(instance, t, J_F)` cell, pooled over gauges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub instance_id: String,
    pub n: usize,
    pub index: usize,
    pub t_us: f64,
    pub j_f: f64,
    pub status: CellStatus,
    pub total_anneals: u64,
    pub ground_hits: u64,
    pub mean_break_fraction: f64,
    pub tts: Tts,
}

type CellKey = (String, u64, u64);

fn cell_key(id: &str, t_us: f64, j_f: f64) -> CellKey {
    (id.to_string(), t_us.to_bits(), j_f.to_bits())
}

/// Append-only cell log. A torn final line is dropped on open.
struct CheckpointStore {
    file: Mutex<File>,
}

impl CheckpointStore {
    fn open(path: &Path) -> Result<(Self, Vec<CellResult>)> {
        let cells = read_cells(path)?;
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok((
            CheckpointStore {
                file: Mutex::new(file),
            },
            cells,
        ))
    }

    fn append(&self, cell: &CellResult, path: &Path) -> Result<()> {
        let mut line = serde_json::to_string(cell)?;
        line.push('\n');
        let mut file = self.file.lock().expect("checkpoint lock poisoned");
        file.write_all(line.as_bytes())
            .and_then(|()| file.flush())
            .map_err(|e| Error::io(path, e))
    }
}

fn read_cells(path: &Path) -> Result<Vec<CellResult>> {
    let text = match std::fs::read_to_string(path) {
        Ok(text) => text,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    let complete = text.rfind('\n').map_or(0, |i| i + 1);
    if complete < text.len() {
        let file = OpenOptions::new()
            .write(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        file.set_len(complete as u64)
            .map_err(|e| Error::io(path, e))?;
    }
    text[..complete]
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| {
                Error::Format(format!("{} line {}: {e}", path.display(), i + 1))
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingSummary {
    pub n: usize,
    pub t_us: f64,
    pub j_f: f64,
    pub summary: MedianSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformOptimum {
    pub n: usize,
    pub t_us: f64,
    pub j_f: f64,
    pub summary: MedianSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceChoice {
    pub instance_id: String,
    pub j_f: f64,
    pub tts: Tts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndividualOptimum {
    pub n: usize,
    pub t_us: f64,
    pub choices: Vec<InstanceChoice>,
    pub summary: MedianSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub machine: Machine,
    pub master_seed: u64,
    pub sizes: Vec<usize>,
    pub anneal_times_us: Vec<f64>,
    pub j_f_grid: Vec<f64>,
    pub default_j_f: f64,
    pub bootstrap_resamples: usize,
    pub confidence: f64,
    /// Sorted by size, instance index, anneal time, then grid order.
    pub cells: Vec<CellResult>,
    pub settings: Vec<SettingSummary>,
    pub u_opt: Vec<UniformOptimum>,
    pub i_opt: Vec<IndividualOptimum>,
    pub embedding_failures: Vec<String>,
}

impl SweepResult {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// True when some cell has infinite TTS or failed to embed.
    pub fn has_failures(&self) -> bool {
        self.cells.iter().any(|c| !c.tts.is_finite())
    }

    pub fn setting(&self, n: usize, t_us: f64, j_f: f64) -> Option<&SettingSummary> {
        self.settings
            .iter()
            .find(|s| s.n == n && s.t_us == t_us && s.j_f == j_f)
    }

    /// TTS per instance id for one `(n, t, J_F)` column, in index order.
    fn column(&self, n: usize, t_us: f64, j_f: f64) -> Vec<(&str, Tts)> {
        self.cells
            .iter()
            .filter(|c| c.n == n && c.t_us == t_us && c.j_f == j_f)
            .map(|c| (c.instance_id.as_str(), c.tts))
            .collect()
    }

    fn bootstrap_seed(&self, n: usize, t_us: f64) -> u64 {
        derive_seed(
            self.master_seed,
            &[stream::BOOTSTRAP, n as u64, t_us.to_bits()],
        )
    }

    fn summarize(&self, n: usize, t_us: f64, values: &[Tts]) -> Result<MedianSummary> {
        bootstrap_median(
            values,
            self.bootstrap_resamples,
            self.confidence,
            self.bootstrap_seed(n, t_us),
        )
    }
}

/// Orders candidate `(tts, j_f)` pairs: lower TTS first, then weaker coupling.
fn better(a: (Tts, f64), b: (Tts, f64)) -> bool {
    match a.0.total_cmp(&b.0) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => a.1.abs() < b.1.abs(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptMode {
    /// One J_F per size.
    UOpt,
    /// One J_F per instance.
    IOpt,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Optimum {
    Uniform(Vec<UniformOptimum>),
    Individual(Vec<IndividualOptimum>),
}

pub fn optimize_jf(result: &SweepResult, mode: OptMode) -> Result<Optimum> {
    match mode {
        OptMode::UOpt => uniform_optimum(result).map(Optimum::Uniform),
        OptMode::IOpt => individual_optimum(result).map(Optimum::Individual),
    }
}

fn uniform_optimum(result: &SweepResult) -> Result<Vec<UniformOptimum>> {
    let mut out = Vec::new();
    for &n in &result.sizes {
        for &t in &result.anneal_times_us {
            let mut best: Option<&SettingSummary> = None;
            for &j in &result.j_f_grid {
                let Some(s) = result.setting(n, t, j) else {
                    continue;
                };
                if best.is_none_or(|b| better((s.summary.median, j), (b.summary.median, b.j_f))) {
                    best = Some(s);
                }
            }
            if let Some(b) = best {
                out.push(UniformOptimum {
                    n,
                    t_us: t,
                    j_f: b.j_f,
                    summary: b.summary.clone(),
                });
            }
        }
    }
    Ok(out)
}

fn individual_optimum(result: &SweepResult) -> Result<Vec<IndividualOptimum>> {
    let mut out = Vec::new();
    for &n in &result.sizes {
        for &t in &result.anneal_times_us {
            let mut choice: BTreeMap<&str, InstanceChoice> = BTreeMap::new();
            let mut order: Vec<&str> = Vec::new();
            for &j in &result.j_f_grid {
                for (id, tts) in result.column(n, t, j) {
                    match choice.get_mut(id) {
                        None => {
                            order.push(id);
                            choice.insert(
                                id,
                                InstanceChoice {
                                    instance_id: id.to_string(),
                                    j_f: j,
                                    tts,
                                },
                            );
                        }
                        Some(c) => {
                            if better((tts, j), (c.tts, c.j_f)) {
                                c.j_f = j;
                                c.tts = tts;
                            }
                        }
                    }
                }
            }
            if order.is_empty() {
                continue;
            }
            let choices: Vec<InstanceChoice> =
                order.iter().map(|id| choice[id].clone()).collect();
            let values: Vec<Tts> = choices.iter().map(|c| c.tts).collect();
            out.push(IndividualOptimum {
                n,
                t_us: t,
                summary: result.summarize(n, t, &values)?,
                choices,
            });
        }
    }
    Ok(out)
}

/// Assembles the result tables from finished cells.
pub fn assemble_result(plan: &ExperimentPlan, mut cells: Vec<CellResult>) -> Result<SweepResult> {
    let t_pos = |t: f64| plan.anneal_times_us.iter().position(|&x| x == t);
    let j_pos = |j: f64| plan.j_f_grid.iter().position(|&x| x == j);
    cells.sort_by_key(|c| (c.n, c.index, t_pos(c.t_us), j_pos(c.j_f)));
    let mut embedding_failures: Vec<String> = cells
        .iter()
        .filter(|c| c.status == CellStatus::EmbeddingFailed)
        .map(|c| c.instance_id.clone())
        .collect();
    embedding_failures.dedup();
    let mut result = SweepResult {
        machine: plan.profile.name,
        master_seed: plan.master_seed,
        sizes: plan.sizes.clone(),
        anneal_times_us: plan.anneal_times_us.clone(),
        j_f_grid: plan.j_f_grid.clone(),
        default_j_f: plan.profile.default_j_f,
        bootstrap_resamples: plan.bootstrap_resamples,
        confidence: plan.confidence,
        cells,
        settings: Vec::new(),
        u_opt: Vec::new(),
        i_opt: Vec::new(),
        embedding_failures,
    };
    let keys: Vec<(usize, f64, f64)> = plan
        .sizes
        .iter()
        .flat_map(|&n| {
            plan.anneal_times_us
                .iter()
                .flat_map(move |&t| plan.j_f_grid.iter().map(move |&j| (n, t, j)))
        })
        .collect();
    let settings = keys
        .par_iter()
        .map(|&(n, t, j)| {
            let values: Vec<Tts> = result.column(n, t, j).into_iter().map(|(_, v)| v).collect();
            Ok(SettingSummary {
                n,
                t_us: t,
                j_f: j,
                summary: result.summarize(n, t, &values)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    result.settings = settings;
    result.u_opt = uniform_optimum(&result)?;
    result.i_opt = individual_optimum(&result)?;
    Ok(result)
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Stop after sampling this many new cells.
    pub max_new_cells: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// Present once every cell is finished.
    pub result: Option<SweepResult>,
    pub new_cells: usize,
    pub pending_cells: usize,
}

pub fn run_experiment(plan: &ExperimentPlan) -> Result<SweepResult> {
    let outcome = run_experiment_with(plan, &RunOptions::default())?;
    Ok(outcome.result.expect("unlimited run completes"))
}

pub fn run_experiment_with(plan: &ExperimentPlan, options: &RunOptions) -> Result<RunOutcome> {
    plan.validate()?;
    let dir = &plan.output_dir;
    let embed_dir = dir.join(EMBEDDING_DIR);
    std::fs::create_dir_all(&embed_dir).map_err(|e| Error::io(&embed_dir, e))?;
    check_plan_file(plan)?;

    let instances = plan.instances()?;
    let cells_path = dir.join(CELLS_FILE);
    let (store, done) = CheckpointStore::open(&cells_path)?;
    let done: HashMap<CellKey, CellResult> = done
        .into_iter()
        .map(|c| (cell_key(&c.instance_id, c.t_us, c.j_f), c))
        .collect();

    let mut pending: Vec<(usize, f64, f64)> = Vec::new();
    for (i, inst) in instances.iter().enumerate() {
        for &t in &plan.anneal_times_us {
            for &j in &plan.j_f_grid {
                if !done.contains_key(&cell_key(&inst.id, t, j)) {
                    pending.push((i, t, j));
                }
            }
        }
    }
    let total_pending = pending.len();
    if let Some(limit) = options.max_new_cells {
        pending.truncate(limit);
    }
    let new_cells = pending.len();

    if !pending.is_empty() {
        let hardware = plan.hardware()?;
        let mut by_instance: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
        for &(i, t, j) in &pending {
            by_instance.entry(i).or_default().push((t, j));
        }
        by_instance
            .into_par_iter()
            .map(|(i, cells)| {
                run_instance(plan, &instances[i], &cells, &hardware, &store, &cells_path)
            })
            .collect::<Result<Vec<()>>>()?;
    }

    let remaining = total_pending - new_cells;
    if remaining > 0 {
        return Ok(RunOutcome {
            result: None,
            new_cells,
            pending_cells: remaining,
        });
    }
    let cells = read_cells(&cells_path)?;
    let wanted: std::collections::HashSet<CellKey> = instances
        .iter()
        .flat_map(|inst| {
            plan.anneal_times_us.iter().flat_map(move |&t| {
                plan.j_f_grid.iter().map(move |&j| cell_key(&inst.id, t, j))
            })
        })
        .collect();
    let mut seen = std::collections::HashSet::new();
    let cells: Vec<CellResult> = cells
        .into_iter()
        .filter(|c| {
            let key = cell_key(&c.instance_id, c.t_us, c.j_f);
            wanted.contains(&key) && seen.insert(key)
        })
        .collect();
    let result = assemble_result(plan, cells)?;
    result.save(&dir.join(RESULT_FILE))?;
    Ok(RunOutcome {
        result: Some(result),
        new_cells,
        pending_cells: 0,
    })
}

/// Writes the plan on first use and refuses to mix results of different
/// plans in one directory.
fn check_plan_file(plan: &ExperimentPlan) -> Result<()> {
    let path = plan.output_dir.join(PLAN_FILE);
    if path.exists() {
        let existing = ExperimentPlan::load(&path)?;
        if existing.fingerprint()? != plan.fingerprint()? {
            return Err(Error::InvalidPlan(format!(
                "{} holds results of a different plan",
                plan.output_dir.display()
            )));
        }
        return Ok(());
    }
    plan.save(&path)
}

/// Loads the cached embedding for `inst` or searches for one. `None` means
/// the search failed (also cached).
fn instance_embedding(
    plan: &ExperimentPlan,
    inst: &Instance,
    adjacency: &[Vec<usize>],
    hardware: &HardwareGraph,
) -> Result<Option<Embedding>> {
    let dir = plan.output_dir.join(EMBEDDING_DIR);
    let path = dir.join(format!("{}.json", inst.id));
    let failed = dir.join(format!("{}.failed", inst.id));
    let source = adjacency_hash(adjacency);
    let target = hardware.structure_hash();
    if failed.exists() {
        return Ok(None);
    }
    if path.exists() {
        let e = Embedding::load(&path)?;
        if e.source_hash == source && e.target_hash == target {
            return Ok(Some(e));
        }
    }
    let seed = derive_seed(
        plan.master_seed,
        &[stream::EMBED, inst.graph.n as u64, inst.index as u64],
    );
    match find_embedding(adjacency, hardware, seed, plan.embedding_tries) {
        Ok(e) => {
            e.save(&path)?;
            Ok(Some(e))
        }
        Err(Error::EmbeddingNotFound { tries }) => {
            std::fs::write(&failed, format!("{tries}\n")).map_err(|e| Error::io(&failed, e))?;
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

fn run_instance(
    plan: &ExperimentPlan,
    inst: &Instance,
    cells: &[(f64, f64)],
    hardware: &HardwareGraph,
    store: &CheckpointStore,
    store_path: &Path,
) -> Result<()> {
    let q = qubo::build_coloring_qubo(&inst.graph, instances::HIDDEN_COLORS)?;
    let logical = q.to_ising();
    let adjacency = logical.adjacency();
    let embedding = instance_embedding(plan, inst, &adjacency, hardware)?;
    cells
        .par_iter()
        .map(|&(t, j)| {
            let cell = match &embedding {
                Some(e) => sample_cell(plan, inst, &q, e, hardware, t, j)?,
                None => CellResult {
                    instance_id: inst.id.clone(),
                    n: inst.graph.n,
                    index: inst.index,
                    t_us: t,
                    j_f: j,
                    status: CellStatus::EmbeddingFailed,
                    total_anneals: 0,
                    ground_hits: 0,
                    mean_break_fraction: 0.0,
                    tts: Tts::Infinite,
                },
            };
            store.append(&cell, store_path)
        })
        .collect()
}

/// Seed of one cell; keyed by values so that editing a grid keeps the
/// remaining cells' streams.
pub fn cell_seed(master_seed: u64, n: usize, index: usize, t_us: f64, j_f: f64) -> u64 {
    derive_seed(
        master_seed,
        &[stream::CELL, n as u64, index as u64, t_us.to_bits(), j_f.to_bits()],
    )
}

fn sample_cell(
    plan: &ExperimentPlan,
    inst: &Instance,
    q: &QuboProblem,
    embedding: &Embedding,
    hardware: &HardwareGraph,
    t_us: f64,
    j_f: f64,
) -> Result<CellResult> {
    let n = inst.graph.n;
    let embedded = embed_ising(&q.to_ising(), embedding, hardware, j_f, &plan.profile)?;
    let seed = cell_seed(plan.master_seed, n, inst.index, t_us, j_f);
    let cfg = SamplerConfig {
        anneal_time_us: t_us,
        seed,
        num_gauges: plan.gauges_for(n),
        ..plan.sampler.clone()
    };
    let outcomes = sa_map(&embedded.ising, &cfg, |g, r, s| {
        let coin = derive_seed(seed, &[stream::CHAIN_BREAK, g as u64, r as u64]);
        let d = decode_embedded_sample(s, &embedded.chains, plan.chain_break, coin);
        let valid = d.spins.is_some_and(|spins| {
            decode_coloring(q, &spins_to_bits(&spins)).is_ok_and(|x| x.is_valid())
        });
        (valid, d.break_fraction)
    })?;
    let total = outcomes.len() as u64;
    let hits = outcomes.iter().filter(|o| o.0).count() as u64;
    let p = compute_pgs(hits, total)?;
    Ok(CellResult {
        instance_id: inst.id.clone(),
        n,
        index: inst.index,
        t_us,
        j_f,
        status: CellStatus::Sampled,
        total_anneals: total,
        ground_hits: hits,
        mean_break_fraction: exact_sum(outcomes.iter().map(|o| o.1)) / total as f64,
        tts: compute_tts(p, t_us)?.tts,
    })
}

/// Setting name used in tables: a coupling value or an optimisation mode.
pub fn setting_name(j_f: Option<f64>, mode: Option<OptMode>) -> String {
    match (j_f, mode) {
        (_, Some(OptMode::UOpt)) => "u.opt".into(),
        (_, Some(OptMode::IOpt)) => "i.opt".into(),
        (Some(j), None) => format!("{j}"),
        (None, None) => String::new(),
    }
}

/// Plot label `α_{machine, t, setting}`.
pub fn alpha_label(machine: Machine, t_us: f64, setting: &str) -> String {
    format!("α_{{{machine}, {t_us}µs, {setting}}}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledFit {
    pub machine: Machine,
    pub t_us: f64,
    pub setting: String,
    pub label: String,
    pub fit: Option<ScalingFit>,
    /// Why no fit was possible.
    pub note: Option<String>,
}

/// Median-TTS series of one result, keyed by `(t, setting)`.
fn series_points(result: &SweepResult) -> Vec<(f64, String, Vec<(usize, MedianSummary)>)> {
    let mut out = Vec::new();
    for &t in &result.anneal_times_us {
        for &j in &result.j_f_grid {
            let points = result
                .settings
                .iter()
                .filter(|s| s.t_us == t && s.j_f == j)
                .map(|s| (s.n, s.summary.clone()))
                .collect();
            out.push((t, setting_name(Some(j), None), points));
        }
        let u = result
            .u_opt
            .iter()
            .filter(|o| o.t_us == t)
            .map(|o| (o.n, o.summary.clone()))
            .collect();
        out.push((t, setting_name(None, Some(OptMode::UOpt)), u));
        let i = result
            .i_opt
            .iter()
            .filter(|o| o.t_us == t)
            .map(|o| (o.n, o.summary.clone()))
            .collect();
        out.push((t, setting_name(None, Some(OptMode::IOpt)), i));
    }
    out
}

/// Exponential fits of median TTS against size for every series.
pub fn analyze(result: &SweepResult) -> Vec<LabeledFit> {
    series_points(result)
        .into_iter()
        .map(|(t, setting, points)| {
            let pts: Vec<(usize, Tts)> = points.iter().map(|(n, s)| (*n, s.median)).collect();
            let (fit, note) = match fit_scaling(&pts) {
                Ok(f) => (Some(f), None),
                Err(e) => (None, Some(e.to_string())),
            };
            LabeledFit {
                machine: result.machine,
                t_us: t,
                label: alpha_label(result.machine, t, &setting),
                setting,
                fit,
                note,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub n: usize,
    pub median: Tts,
    pub bootstrap_mean: Tts,
    pub ci_low: Tts,
    pub ci_high: Tts,
    pub count: usize,
    pub infinite_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub machine: Machine,
    pub t_us: f64,
    pub setting: String,
    pub label: Option<String>,
    pub alpha: Option<f64>,
    pub alpha_stderr: Option<f64>,
    pub points: Vec<SeriesPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatMap {
    pub machine: Machine,
    pub t_us: f64,
    pub sizes: Vec<usize>,
    pub j_f_grid: Vec<f64>,
    /// `median[size][j_f]`.
    pub median: Vec<Vec<Option<Tts>>>,
    pub u_opt_j_f: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub machine: Machine,
    pub n: usize,
    pub t_us: f64,
    pub default_j_f: f64,
    pub default_median: Option<Tts>,
    pub u_opt_j_f: Option<f64>,
    pub u_opt_median: Option<Tts>,
    pub i_opt_median: Option<Tts>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub summary_csv: PathBuf,
    pub series_json: PathBuf,
    pub heatmap_json: PathBuf,
    pub comparison_csv: PathBuf,
    pub fits_json: PathBuf,
}

pub fn build_series(results: &[SweepResult], fits: &[LabeledFit]) -> Vec<Series> {
    let mut out = Vec::new();
    for result in results {
        for (t, setting, points) in series_points(result) {
            let fit = fits
                .iter()
                .find(|f| f.machine == result.machine && f.t_us == t && f.setting == setting);
            let fitted = fit.and_then(|f| f.fit.as_ref());
            out.push(Series {
                machine: result.machine,
                t_us: t,
                label: fitted.and(fit.map(|f| f.label.clone())),
                alpha: fitted.map(|f| f.alpha),
                alpha_stderr: fitted.and_then(|f| f.stderr),
                setting,
                points: points
                    .into_iter()
                    .map(|(n, s)| SeriesPoint {
                        n,
                        median: s.median,
                        bootstrap_mean: s.bootstrap_mean,
                        ci_low: s.ci_low,
                        ci_high: s.ci_high,
                        count: s.count,
                        infinite_count: s.infinite_count,
                    })
                    .collect(),
            });
        }
    }
    out
}

pub fn build_heatmaps(results: &[SweepResult]) -> Vec<HeatMap> {
    let mut out = Vec::new();
    for r in results {
        for &t in &r.anneal_times_us {
            out.push(HeatMap {
                machine: r.machine,
                t_us: t,
                sizes: r.sizes.clone(),
                j_f_grid: r.j_f_grid.clone(),
                median: r
                    .sizes
                    .iter()
                    .map(|&n| {
                        r.j_f_grid
                            .iter()
                            .map(|&j| r.setting(n, t, j).map(|s| s.summary.median))
                            .collect()
                    })
                    .collect(),
                u_opt_j_f: r
                    .sizes
                    .iter()
                    .map(|&n| {
                        r.u_opt
                            .iter()
                            .find(|o| o.n == n && o.t_us == t)
                            .map(|o| o.j_f)
                    })
                    .collect(),
            });
        }
    }
    out
}

/// Default setting (profile J_F at the shortest anneal time) next to the
/// optimised settings at the same time.
pub fn build_comparison(results: &[SweepResult]) -> Vec<ComparisonRow> {
    let mut out = Vec::new();
    for r in results {
        let Some(t) = r.anneal_times_us.iter().copied().min_by(f64::total_cmp) else {
            continue;
        };
        for &n in &r.sizes {
            let u = r.u_opt.iter().find(|o| o.n == n && o.t_us == t);
            out.push(ComparisonRow {
                machine: r.machine,
                n,
                t_us: t,
                default_j_f: r.default_j_f,
                default_median: r.setting(n, t, r.default_j_f).map(|s| s.summary.median),
                u_opt_j_f: u.map(|o| o.j_f),
                u_opt_median: u.map(|o| o.summary.median),
                i_opt_median: r
                    .i_opt
                    .iter()
                    .find(|o| o.n == n && o.t_us == t)
                    .map(|o| o.summary.median),
            });
        }
    }
    out
}

pub fn summary_rows(results: &[SweepResult]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for r in results {
        let machine = r.machine.name();
        for s in &r.settings {
            rows.push(SummaryRow::new(
                machine,
                s.n,
                s.t_us,
                setting_name(Some(s.j_f), None),
                &s.summary,
            ));
        }
        for o in &r.u_opt {
            rows.push(SummaryRow::new(
                machine,
                o.n,
                o.t_us,
                setting_name(None, Some(OptMode::UOpt)),
                &o.summary,
            ));
        }
        for o in &r.i_opt {
            rows.push(SummaryRow::new(
                machine,
                o.n,
                o.t_us,
                setting_name(None, Some(OptMode::IOpt)),
                &o.summary,
            ));
        }
    }
    rows
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Writes the report tables into `dir`.
pub fn emit_report(results: &[SweepResult], fits: &[LabeledFit], dir: &Path) -> Result<ReportBundle> {
    if results.is_empty() {
        return Err(Error::InvalidParameter("report needs at least one result".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let bundle = ReportBundle {
        summary_csv: dir.join("summary.csv"),
        series_json: dir.join("series.json"),
        heatmap_json: dir.join("heatmap.json"),
        comparison_csv: dir.join("comparison.csv"),
        fits_json: dir.join("fits.json"),
    };
    write_summary_csv(&bundle.summary_csv, &summary_rows(results))?;
    write_json(&bundle.series_json, &build_series(results, fits))?;
    write_json(&bundle.heatmap_json, &build_heatmaps(results))?;
    write_json(&bundle.fits_json, fits)?;
    let mut w = csv::Writer::from_path(&bundle.comparison_csv)
        .map_err(|e| Error::Format(format!("{}: {e}", bundle.comparison_csv.display())))?;
    for row in build_comparison(results) {
        w.serialize(row)
            .map_err(|e| Error::Format(format!("{}: {e}", bundle.comparison_csv.display())))?;
    }
    w.flush().map_err(|e| Error::io(&bundle.comparison_csv, e))?;
    Ok(bundle)
}
