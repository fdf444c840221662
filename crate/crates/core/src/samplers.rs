//! Sample sources over Ising problems.
//!
//! * [`sample_exact`] enumerates every spin vector in Gray-code order.
//! * [`sample_sa`] runs single-spin-flip Metropolis annealing, one fresh
//!   random gauge per gauge index, and records samples in the original gauge.
//! * [`sample_replay`] reads a sample file written by [`SampleSet::save`] or
//!   produced elsewhere in the same format.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubo::{apply_gauge, ising_energy, Gauge, IsingProblem, Spin};
use crate::seed;

/// Largest problem [`sample_exact`] accepts.
pub const EXACT_LIMIT: usize = 30;
/// Ground states kept by [`sample_exact`]; the count is still exact.
pub const MAX_STORED_GROUND_STATES: usize = 4096;
pub const SAMPLE_FORMAT: &str = "schedbench-samples";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SamplerKind {
    Exact,
    SimulatedAnnealing,
    Replay,
}

/// Geometric inverse-temperature schedule, one value per sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub beta_start: f64,
    pub beta_end: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            beta_start: 0.1,
            beta_end: 10.0,
        }
    }
}

impl Schedule {
    pub fn betas(&self, sweeps: usize) -> Vec<f64> {
        if sweeps == 1 {
            return vec![self.beta_end];
        }
        let ratio = self.beta_end / self.beta_start;
        (0..sweeps)
            .map(|k| self.beta_start * ratio.powf(k as f64 / (sweeps - 1) as f64))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    pub anneal_time_us: f64,
    /// Sweeps per microsecond of nominal anneal time.
    pub sweeps_per_us: f64,
    pub num_reads: usize,
    pub num_gauges: usize,
    pub seed: u64,
    pub schedule: Schedule,
    /// When false every gauge index uses the identity gauge.
    #[serde(default = "yes")]
    pub gauges_enabled: bool,
}

fn yes() -> bool {
    true
}

pub const DEFAULT_SWEEPS_PER_US: f64 = 100.0;

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            kind: SamplerKind::SimulatedAnnealing,
            anneal_time_us: 1.0,
            sweeps_per_us: DEFAULT_SWEEPS_PER_US,
            num_reads: 100,
            num_gauges: 1,
            seed: 0,
            schedule: Schedule::default(),
            gauges_enabled: true,
        }
    }
}

impl SamplerConfig {
    /// `round(t * kappa)`, at least one.
    pub fn sweeps(&self) -> usize {
        ((self.anneal_time_us * self.sweeps_per_us).round() as usize).max(1)
    }

    pub fn check(&self) -> Result<()> {
        if self.num_reads == 0 || self.num_gauges == 0 {
            return Err(Error::InvalidParameter(
                "need at least one read and one gauge".into(),
            ));
        }
        if !(self.anneal_time_us > 0.0) || !(self.sweeps_per_us > 0.0) {
            return Err(Error::InvalidParameter(
                "anneal time and sweep rate must be positive".into(),
            ));
        }
        if !(self.schedule.beta_start > 0.0) || !(self.schedule.beta_end > 0.0) {
            return Err(Error::InvalidParameter("inverse temperatures must be positive".into()));
        }
        Ok(())
    }

    pub fn total_anneals(&self) -> usize {
        self.num_reads * self.num_gauges
    }

    pub fn gauge(&self, num_spins: usize, gauge_index: usize) -> Gauge {
        if self.gauges_enabled {
            Gauge::random(
                num_spins,
                seed::derive_seed(self.seed, &[seed::stream::GAUGE, gauge_index as u64]),
            )
        } else {
            Gauge::identity(num_spins)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub gauge: usize,
    pub read: usize,
    pub gauge_seed: u64,
    pub spins: Vec<Spin>,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleHeader {
    pub format: String,
    pub problem_hash: String,
    pub num_spins: usize,
    pub num_records: usize,
    pub config: SamplerConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub header: SampleHeader,
    pub records: Vec<SampleRecord>,
}

impl SampleSet {
    pub fn lowest_energy(&self) -> Option<f64> {
        self.records.iter().map(|r| r.energy).min_by(f64::total_cmp)
    }

    /// Records whose energy equals `energy` exactly.
    pub fn count_at(&self, energy: f64) -> usize {
        self.records.iter().filter(|r| r.energy == energy).count()
    }

    /// Header line followed by one JSON record per line.
    pub fn save(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let mut out = BufWriter::new(File::create(path).map_err(io)?);
        writeln!(out, "{}", serde_json::to_string(&self.header)?).map_err(io)?;
        for record in &self.records {
            writeln!(out, "{}", serde_json::to_string(record)?).map_err(io)?;
        }
        out.flush().map_err(io)
    }
}

/// Exact ground energy and ground states.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactResult {
    pub ground_energy: f64,
    pub ground_states: Vec<Vec<Spin>>,
    /// Number of ground states, including any not stored.
    pub degeneracy: u64,
}

fn local_fields(p: &IsingProblem, adjacency: &[Vec<(usize, f64)>], s: &[Spin]) -> Vec<f64> {
    (0..p.num_spins)
        .map(|i| {
            p.h[i]
                + adjacency[i]
                    .iter()
                    .map(|&(j, v)| v * f64::from(s[j]))
                    .sum::<f64>()
        })
        .collect()
}

fn weighted_adjacency(p: &IsingProblem) -> Vec<Vec<(usize, f64)>> {
    let mut adjacency = vec![Vec::new(); p.num_spins];
    for (&(a, b), &v) in &p.j {
        if v != 0.0 {
            adjacency[a].push((b, v));
            adjacency[b].push((a, v));
        }
    }
    adjacency
}

fn spins_of(mask: u32, n: usize) -> Vec<Spin> {
    (0..n).map(|i| if mask >> i & 1 == 1 { 1 } else { -1 }).collect()
}

/// Enumerates all `2^n` states.
///
/// Energies are tracked incrementally; every state within a small window of
/// the running minimum is re-evaluated exactly, so the reported ground energy
/// and ground states are exact.
pub fn sample_exact(p: &IsingProblem) -> Result<ExactResult> {
    let n = p.num_spins;
    if n > EXACT_LIMIT {
        return Err(Error::SizeTooLarge {
            size: n,
            limit: EXACT_LIMIT,
        });
    }
    let adjacency = weighted_adjacency(p);
    let magnitude: f64 = 1.0
        + p.h.iter().map(|v| v.abs()).sum::<f64>()
        + p.j.values().map(|v| v.abs()).sum::<f64>()
        + p.offset.abs();
    let window = magnitude * 1e-9;

    // Start from all spins down (mask 0).
    let mut s: Vec<Spin> = vec![-1; n];
    let mut field = local_fields(p, &adjacency, &s);
    let mut energy = ising_energy(p, &s)?;
    let mut best = energy;
    let mut candidates: Vec<u32> = vec![0];
    let mut overflow = false;
    let mut mask: u32 = 0;
    for step in 1u64..1u64 << n {
        let i = step.trailing_zeros() as usize;
        energy -= 2.0 * f64::from(s[i]) * field[i];
        s[i] = -s[i];
        mask ^= 1 << i;
        let si = f64::from(s[i]);
        for &(j, v) in &adjacency[i] {
            field[j] += 2.0 * v * si;
        }
        if energy < best - window {
            best = energy;
            candidates.clear();
            overflow = false;
        }
        if energy <= best + window {
            if candidates.len() < 4 * MAX_STORED_GROUND_STATES {
                candidates.push(mask);
            } else {
                overflow = true;
            }
        }
    }
    if overflow {
        return exact_pass(p);
    }
    let exact: Vec<(u32, f64)> = candidates
        .iter()
        .map(|&m| (m, ising_energy(p, &spins_of(m, n)).expect("length matches")))
        .collect();
    let ground_energy = exact
        .iter()
        .map(|&(_, e)| e)
        .min_by(f64::total_cmp)
        .expect("at least one state");
    let mut ground: Vec<u32> = exact
        .iter()
        .filter(|&&(_, e)| e == ground_energy)
        .map(|&(m, _)| m)
        .collect();
    ground.sort_unstable();
    let degeneracy = ground.len() as u64;
    ground.truncate(MAX_STORED_GROUND_STATES);
    Ok(ExactResult {
        ground_energy,
        ground_states: ground.into_iter().map(|m| spins_of(m, n)).collect(),
        degeneracy,
    })
}

/// Exact evaluation of every state, used when the near-minimum set is too
/// large to buffer.
fn exact_pass(p: &IsingProblem) -> Result<ExactResult> {
    let n = p.num_spins;
    let mut ground_energy = f64::INFINITY;
    let mut ground = Vec::new();
    let mut degeneracy = 0;
    for mask in 0..1u64 << n {
        let s = spins_of(mask as u32, n);
        let e = ising_energy(p, &s)?;
        if e < ground_energy {
            ground_energy = e;
            ground.clear();
            degeneracy = 0;
        }
        if e == ground_energy {
            degeneracy += 1;
            if ground.len() < MAX_STORED_GROUND_STATES {
                ground.push(s);
            }
        }
    }
    Ok(ExactResult {
        ground_energy,
        ground_states: ground,
        degeneracy,
    })
}

/// Uphill moves with `beta * delta` above this are rejected without a draw;
/// their acceptance probability is below the resolution of a uniform `f64`.
const MAX_EXPONENT: f64 = 37.0;

/// Compressed adjacency for the annealing inner loop.
struct Csr {
    h: Vec<f64>,
    start: Vec<usize>,
    neighbor: Vec<u32>,
    coupling: Vec<f64>,
}

impl Csr {
    fn new(p: &IsingProblem) -> Self {
        let adjacency = weighted_adjacency(p);
        let mut start = Vec::with_capacity(p.num_spins + 1);
        let mut neighbor = Vec::new();
        let mut coupling = Vec::new();
        start.push(0);
        for list in &adjacency {
            for &(j, v) in list {
                neighbor.push(j as u32);
                coupling.push(v);
            }
            start.push(neighbor.len());
        }
        Csr {
            h: p.h.clone(),
            start,
            neighbor,
            coupling,
        }
    }

    fn anneal(&self, betas: &[f64], rng: &mut seed::Rng) -> Vec<Spin> {
        let n = self.h.len();
        let mut s: Vec<Spin> = (0..n)
            .map(|_| if rng.gen::<bool>() { 1 } else { -1 })
            .collect();
        // field[i] = h_i + sum_j J_ij s_j, kept up to date after every flip.
        let mut field: Vec<f64> = (0..n)
            .map(|i| {
                let mut f = self.h[i];
                for k in self.start[i]..self.start[i + 1] {
                    f += self.coupling[k] * f64::from(s[self.neighbor[k] as usize]);
                }
                f
            })
            .collect();
        for &beta in betas {
            for i in 0..n {
                let delta = -2.0 * f64::from(s[i]) * field[i];
                let accept = delta <= 0.0
                    || (beta * delta < MAX_EXPONENT && rng.gen::<f64>() < (-beta * delta).exp());
                if accept {
                    s[i] = -s[i];
                    let twice = 2.0 * f64::from(s[i]);
                    for k in self.start[i]..self.start[i + 1] {
                        field[self.neighbor[k] as usize] += twice * self.coupling[k];
                    }
                }
            }
        }
        s
    }
}

/// Runs every `(gauge, read)` anneal and maps the ungauged spins through `f`.
///
/// Results are ordered by gauge, then read. Each anneal draws from its own
/// stream derived from `(seed, gauge, read)`, so the output does not depend on
/// thread scheduling.
pub fn sa_map<T, F>(p: &IsingProblem, cfg: &SamplerConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, usize, &[Spin]) -> T + Sync,
{
    cfg.check()?;
    let betas = cfg.schedule.betas(cfg.sweeps());
    let n = p.num_spins;
    let per_gauge: Vec<Vec<T>> = (0..cfg.num_gauges)
        .map(|g| -> Result<Vec<T>> {
            let gauge = cfg.gauge(n, g);
            let csr = Csr::new(&apply_gauge(p, &gauge)?);
            Ok((0..cfg.num_reads)
                .into_par_iter()
                .map(|r| {
                    let mut rng = seed::rng_from(cfg.seed, &[seed::stream::READ, g as u64, r as u64]);
                    let mut s = csr.anneal(&betas, &mut rng);
                    for (v, &sign) in s.iter_mut().zip(&gauge.signs) {
                        *v *= sign;
                    }
                    f(g, r, &s)
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(per_gauge.into_iter().flatten().collect())
}

/// Simulated annealing with exact energies recorded for every read.
pub fn sample_sa(p: &IsingProblem, cfg: &SamplerConfig) -> Result<SampleSet> {
    if cfg.kind != SamplerKind::SimulatedAnnealing {
        return Err(Error::InvalidParameter(format!(
            "sample_sa called with {:?} config",
            cfg.kind
        )));
    }
    let records = sa_map(p, cfg, |g, r, s| -> Result<SampleRecord> {
        Ok(SampleRecord {
            gauge: g,
            read: r,
            gauge_seed: cfg.gauge(0, g).seed,
            spins: s.to_vec(),
            energy: ising_energy(p, s)?,
        })
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(SampleSet {
        header: SampleHeader {
            format: SAMPLE_FORMAT.into(),
            problem_hash: p.problem_hash(),
            num_spins: p.num_spins,
            num_records: records.len(),
            config: cfg.clone(),
        },
        records,
    })
}

/// Loads recorded samples for `p`.
///
/// The header must carry `p`'s hash, every record must parse, have the right
/// length and spin values, and its stored energy must equal the recomputed
/// one. A file with fewer records than its header announces is rejected.
pub fn sample_replay(path: &Path, p: &IsingProblem) -> Result<SampleSet> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::Format("empty sample file".into()))?
        .map_err(|e| Error::io(path, e))?;
    let header: SampleHeader = serde_json::from_str(&header_line)
        .map_err(|e| Error::Format(format!("bad header: {e}")))?;
    if header.format != SAMPLE_FORMAT {
        return Err(Error::Format(format!("unknown format {:?}", header.format)));
    }
    let expected = p.problem_hash();
    if header.problem_hash != expected {
        return Err(Error::HashMismatch {
            expected,
            found: header.problem_hash,
        });
    }
    let mut records = Vec::with_capacity(header.num_records);
    for (number, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let record: SampleRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Format(format!("record {number}: {e}")))?;
        if record.spins.len() != p.num_spins || record.spins.iter().any(|&v| v != 1 && v != -1) {
            return Err(Error::Format(format!("record {number}: bad spin vector")));
        }
        let energy = ising_energy(p, &record.spins)?;
        if energy != record.energy {
            return Err(Error::Format(format!(
                "record {number}: stored energy {} differs from {energy}",
                record.energy
            )));
        }
        records.push(record);
    }
    if records.len() != header.num_records {
        return Err(Error::Format(format!(
            "expected {} records, found {}",
            header.num_records,
            records.len()
        )));
    }
    Ok(SampleSet { header, records })
}
