//! Binary and spin quadratic models, the one-hot coloring QUBO, and
//! spin-reversal gauges.
//!
//! Coloring variables `x_{ic}` (vertex `i` takes color `c`) live at index
//! `i * k + c`. The coloring energy is
//!
//! ```text
//! H(x) = sum_i (1 - sum_c x_ic)^2 + sum_{(i,j) in E} sum_c x_ic x_jc
//! ```
//!
//! which is zero exactly on encodings of proper colorings. All energies are
//! summed with [`exact_sum`], and conversions keep integer/dyadic inputs exact,
//! so QUBO and Ising energies of corresponding assignments compare equal bit
//! for bit.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::instances::SchedulingGraph;
use crate::numeric::exact_sum;
use crate::seed;

pub type Spin = i8;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `(vertex, color)` label of a coloring variable.
pub type VarLabel = (usize, usize);

/// Quadratic objective over `{0, 1}` variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ProblemFile", try_from = "ProblemFile")]
pub struct QuboProblem {
    pub num_vars: usize,
    pub linear: Vec<f64>,
    /// Keys are `(a, b)` with `a < b`.
    pub quadratic: BTreeMap<(usize, usize), f64>,
    pub offset: f64,
    pub var_labels: Option<Vec<VarLabel>>,
}

/// Quadratic objective over `{-1, +1}` spins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ProblemFile", try_from = "ProblemFile")]
pub struct IsingProblem {
    pub num_spins: usize,
    pub h: Vec<f64>,
    /// Keys are `(a, b)` with `a < b`.
    pub j: BTreeMap<(usize, usize), f64>,
    pub offset: f64,
}

fn pair(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl QuboProblem {
    pub fn empty(num_vars: usize) -> Self {
        QuboProblem {
            num_vars,
            linear: vec![0.0; num_vars],
            quadratic: BTreeMap::new(),
            offset: 0.0,
            var_labels: None,
        }
    }

    /// Adds `value * x_a * x_b`; diagonal terms fold into the linear part.
    pub fn add_quadratic(&mut self, a: usize, b: usize, value: f64) {
        if a == b {
            self.linear[a] += value;
        } else {
            *self.quadratic.entry(pair(a, b)).or_insert(0.0) += value;
        }
    }

    pub fn energy(&self, x: &[u8]) -> Result<f64> {
        qubo_energy(self, x)
    }

    pub fn to_ising(&self) -> IsingProblem {
        qubo_to_ising(self)
    }
}

impl IsingProblem {
    pub fn empty(num_spins: usize) -> Self {
        IsingProblem {
            num_spins,
            h: vec![0.0; num_spins],
            j: BTreeMap::new(),
            offset: 0.0,
        }
    }

    pub fn add_coupling(&mut self, a: usize, b: usize, value: f64) {
        assert_ne!(a, b, "self-coupling on spin {a}");
        *self.j.entry(pair(a, b)).or_insert(0.0) += value;
    }

    pub fn energy(&self, s: &[Spin]) -> Result<f64> {
        ising_energy(self, s)
    }

    /// Pairs with a nonzero coupling.
    pub fn interaction_edges(&self) -> Vec<(usize, usize)> {
        self.j
            .iter()
            .filter(|(_, &v)| v != 0.0)
            .map(|(&k, _)| k)
            .collect()
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        crate::instances::adjacency(self.num_spins, &self.interaction_edges())
    }

    /// Largest coefficient magnitude over `h` and `J`.
    pub fn max_abs_coefficient(&self) -> f64 {
        self.h
            .iter()
            .chain(self.j.values())
            .fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn problem_hash(&self) -> String {
        let file = ProblemFile::from_ising(self);
        sha256_hex(serde_json::to_string(&file).expect("serializable").as_bytes())
    }

    pub fn to_qubo(&self) -> QuboProblem {
        ising_to_qubo(self)
    }
}

/// Builds the one-hot coloring QUBO of `g` with `k` colors.
pub fn build_coloring_qubo(g: &SchedulingGraph, k: usize) -> Result<QuboProblem> {
    coloring_qubo(g.n, &g.edges, k)
}

pub fn coloring_qubo(n: usize, edges: &[(usize, usize)], k: usize) -> Result<QuboProblem> {
    if k == 0 {
        return Err(Error::InvalidParameter("need at least one color".into()));
    }
    let index = |vertex: usize, color: usize| vertex * k + color;
    let mut q = QuboProblem::empty(n * k);
    // (1 - sum_c x_c)^2 = 1 - sum_c x_c + 2 sum_{c < c'} x_c x_c' on binaries.
    q.offset = n as f64;
    for vertex in 0..n {
        for c in 0..k {
            q.linear[index(vertex, c)] -= 1.0;
            for c2 in c + 1..k {
                q.add_quadratic(index(vertex, c), index(vertex, c2), 2.0);
            }
        }
    }
    for &(a, b) in edges {
        if a >= n || b >= n || a == b {
            return Err(Error::InvalidParameter(format!("bad edge ({a}, {b})")));
        }
        for c in 0..k {
            q.add_quadratic(index(a, c), index(b, c), 1.0);
        }
    }
    q.var_labels = Some(
        (0..n)
            .flat_map(|vertex| (0..k).map(move |c| (vertex, c)))
            .collect(),
    );
    Ok(q)
}

/// Bit vector encoding a coloring, one set bit per vertex.
pub fn encode_coloring(coloring: &[u8], k: usize) -> Vec<u8> {
    let mut x = vec![0u8; coloring.len() * k];
    for (vertex, &c) in coloring.iter().enumerate() {
        x[vertex * k + c as usize] = 1;
    }
    x
}

pub fn qubo_energy(q: &QuboProblem, x: &[u8]) -> Result<f64> {
    if x.len() != q.num_vars {
        return Err(Error::LengthMismatch {
            expected: q.num_vars,
            got: x.len(),
        });
    }
    let linear = q
        .linear
        .iter()
        .zip(x)
        .filter(|(_, &bit)| bit != 0)
        .map(|(&v, _)| v);
    let quadratic = q
        .quadratic
        .iter()
        .filter(|(&(a, b), _)| x[a] != 0 && x[b] != 0)
        .map(|(_, &v)| v);
    Ok(exact_sum(
        linear.chain(quadratic).chain(std::iter::once(q.offset)),
    ))
}

pub fn ising_energy(i: &IsingProblem, s: &[Spin]) -> Result<f64> {
    if s.len() != i.num_spins {
        return Err(Error::LengthMismatch {
            expected: i.num_spins,
            got: s.len(),
        });
    }
    let field = i.h.iter().zip(s).map(|(&h, &si)| h * f64::from(si));
    let coupling = i
        .j
        .iter()
        .map(|(&(a, b), &v)| v * f64::from(s[a] * s[b]));
    Ok(exact_sum(
        field.chain(coupling).chain(std::iter::once(i.offset)),
    ))
}

/// Substitutes `x = (1 + s) / 2`.
pub fn qubo_to_ising(q: &QuboProblem) -> IsingProblem {
    let mut field_terms: Vec<Vec<f64>> = q.linear.iter().map(|&a| vec![a / 2.0]).collect();
    let mut j = BTreeMap::new();
    let mut offset_terms = vec![q.offset];
    offset_terms.extend(q.linear.iter().map(|&a| a / 2.0));
    for (&(a, b), &v) in &q.quadratic {
        let quarter = v / 4.0;
        j.insert((a, b), quarter);
        field_terms[a].push(quarter);
        field_terms[b].push(quarter);
        offset_terms.push(quarter);
    }
    IsingProblem {
        num_spins: q.num_vars,
        h: field_terms.into_iter().map(exact_sum).collect(),
        j,
        offset: exact_sum(offset_terms),
    }
}

/// Substitutes `s = 2x - 1`.
pub fn ising_to_qubo(i: &IsingProblem) -> QuboProblem {
    let mut linear_terms: Vec<Vec<f64>> = i.h.iter().map(|&h| vec![2.0 * h]).collect();
    let mut quadratic = BTreeMap::new();
    let mut offset_terms = vec![i.offset];
    offset_terms.extend(i.h.iter().map(|&h| -h));
    for (&(a, b), &v) in &i.j {
        quadratic.insert((a, b), 4.0 * v);
        linear_terms[a].push(-2.0 * v);
        linear_terms[b].push(-2.0 * v);
        offset_terms.push(v);
    }
    QuboProblem {
        num_vars: i.num_spins,
        linear: linear_terms.into_iter().map(exact_sum).collect(),
        quadratic,
        offset: exact_sum(offset_terms),
        var_labels: None,
    }
}

pub fn bits_to_spins(x: &[u8]) -> Vec<Spin> {
    x.iter().map(|&b| if b != 0 { 1 } else { -1 }).collect()
}

pub fn spins_to_bits(s: &[Spin]) -> Vec<u8> {
    s.iter().map(|&v| u8::from(v > 0)).collect()
}

/// Spin-reversal transform: spin `i` is flipped when `signs[i] == -1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gauge {
    pub signs: Vec<Spin>,
    pub seed: u64,
}

impl Gauge {
    pub fn identity(num_spins: usize) -> Self {
        Gauge {
            signs: vec![1; num_spins],
            seed: 0,
        }
    }

    pub fn random(num_spins: usize, seed: u64) -> Self {
        let mut rng = seed::rng_from(seed, &[seed::stream::GAUGE]);
        Gauge {
            signs: (0..num_spins)
                .map(|_| if rng.gen::<bool>() { 1 } else { -1 })
                .collect(),
            seed,
        }
    }
}

/// `h'_i = g_i h_i`, `J'_ij = g_i g_j J_ij`, so that
/// `E'(s) = E(g * s)` for every spin vector `s`.
pub fn apply_gauge(i: &IsingProblem, g: &Gauge) -> Result<IsingProblem> {
    if g.signs.len() != i.num_spins {
        return Err(Error::LengthMismatch {
            expected: i.num_spins,
            got: g.signs.len(),
        });
    }
    Ok(IsingProblem {
        num_spins: i.num_spins,
        h: i.h
            .iter()
            .zip(&g.signs)
            .map(|(&h, &sign)| h * f64::from(sign))
            .collect(),
        j: i.j
            .iter()
            .map(|(&(a, b), &v)| ((a, b), v * f64::from(g.signs[a] * g.signs[b])))
            .collect(),
        offset: i.offset,
    })
}

/// Maps a sample of the gauged problem back to the original problem.
pub fn ungauge_sample(s: &[Spin], g: &Gauge) -> Result<Vec<Spin>> {
    if g.signs.len() != s.len() {
        return Err(Error::LengthMismatch {
            expected: s.len(),
            got: g.signs.len(),
        });
    }
    Ok(s.iter().zip(&g.signs).map(|(&v, &sign)| v * sign).collect())
}

/// Why a bit vector is not a valid coloring.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Invalid {
    Uncolored { vertex: usize },
    MultiColored { vertex: usize, colors: Vec<usize> },
    Conflict { a: usize, b: usize, color: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decoded {
    Coloring(Vec<u8>),
    Invalid(Invalid),
}

impl Decoded {
    pub fn is_valid(&self) -> bool {
        matches!(self, Decoded::Coloring(_))
    }
}

/// Reads a coloring out of a coloring-QUBO assignment.
///
/// Conflicts are found from the QUBO itself: a quadratic term between two
/// vertices on the same color marks an edge.
pub fn decode_coloring(q: &QuboProblem, x: &[u8]) -> Result<Decoded> {
    let labels = q
        .var_labels
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("QUBO has no coloring labels".into()))?;
    if x.len() != q.num_vars {
        return Err(Error::LengthMismatch {
            expected: q.num_vars,
            got: x.len(),
        });
    }
    let n = labels.iter().map(|&(v, _)| v + 1).max().unwrap_or(0);
    let mut chosen: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (var, &(vertex, color)) in labels.iter().enumerate() {
        if x[var] != 0 {
            chosen[vertex].push(color);
        }
    }
    for (vertex, colors) in chosen.iter().enumerate() {
        match colors.len() {
            0 => return Ok(Decoded::Invalid(Invalid::Uncolored { vertex })),
            1 => {}
            _ => {
                return Ok(Decoded::Invalid(Invalid::MultiColored {
                    vertex,
                    colors: colors.clone(),
                }))
            }
        }
    }
    for &(a, b) in q.quadratic.keys() {
        let (va, ca) = labels[a];
        let (vb, cb) = labels[b];
        if va != vb && ca == cb && x[a] != 0 && x[b] != 0 {
            return Ok(Decoded::Invalid(Invalid::Conflict {
                a: va.min(vb),
                b: va.max(vb),
                color: ca,
            }));
        }
    }
    Ok(Decoded::Coloring(
        chosen.iter().map(|colors| colors[0] as u8).collect(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarType {
    #[serde(rename = "BINARY")]
    Binary,
    #[serde(rename = "SPIN")]
    Spin,
}

/// On-disk form shared by QUBO and Ising problems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    pub vartype: VarType,
    pub num_vars: usize,
    pub linear: Vec<(usize, f64)>,
    pub quadratic: Vec<(usize, usize, f64)>,
    pub offset: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub var_labels: Option<Vec<VarLabel>>,
}

impl ProblemFile {
    pub fn from_qubo(q: &QuboProblem) -> Self {
        ProblemFile {
            vartype: VarType::Binary,
            num_vars: q.num_vars,
            linear: sparse(&q.linear),
            quadratic: q.quadratic.iter().map(|(&(a, b), &v)| (a, b, v)).collect(),
            offset: q.offset,
            var_labels: q.var_labels.clone(),
        }
    }

    pub fn from_ising(i: &IsingProblem) -> Self {
        ProblemFile {
            vartype: VarType::Spin,
            num_vars: i.num_spins,
            linear: sparse(&i.h),
            quadratic: i.j.iter().map(|(&(a, b), &v)| (a, b, v)).collect(),
            offset: i.offset,
            var_labels: None,
        }
    }

    fn dense_linear(&self) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.num_vars];
        for &(i, v) in &self.linear {
            *out.get_mut(i)
                .ok_or_else(|| Error::Format(format!("variable {i} out of range")))? += v;
        }
        Ok(out)
    }

    fn pairs(&self) -> Result<BTreeMap<(usize, usize), f64>> {
        let mut out = BTreeMap::new();
        for &(a, b, v) in &self.quadratic {
            if a == b || a >= self.num_vars || b >= self.num_vars {
                return Err(Error::Format(format!("bad quadratic key ({a}, {b})")));
            }
            *out.entry(pair(a, b)).or_insert(0.0) += v;
        }
        Ok(out)
    }

    pub fn into_qubo(self) -> Result<QuboProblem> {
        if self.vartype != VarType::Binary {
            return Err(Error::Format("expected a BINARY problem".into()));
        }
        Ok(QuboProblem {
            num_vars: self.num_vars,
            linear: self.dense_linear()?,
            quadratic: self.pairs()?,
            offset: self.offset,
            var_labels: self.var_labels,
        })
    }

    pub fn into_ising(self) -> Result<IsingProblem> {
        if self.vartype != VarType::Spin {
            return Err(Error::Format("expected a SPIN problem".into()));
        }
        Ok(IsingProblem {
            num_spins: self.num_vars,
            h: self.dense_linear()?,
            j: self.pairs()?,
            offset: self.offset,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?).map_err(|e| Error::io(path, e))
    }
}

impl From<QuboProblem> for ProblemFile {
    fn from(q: QuboProblem) -> Self {
        ProblemFile::from_qubo(&q)
    }
}

impl From<IsingProblem> for ProblemFile {
    fn from(i: IsingProblem) -> Self {
        ProblemFile::from_ising(&i)
    }
}

impl TryFrom<ProblemFile> for QuboProblem {
    type Error = Error;
    fn try_from(file: ProblemFile) -> Result<Self> {
        file.into_qubo()
    }
}

impl TryFrom<ProblemFile> for IsingProblem {
    type Error = Error;
    fn try_from(file: ProblemFile) -> Result<Self> {
        file.into_ising()
    }
}

fn sparse(values: &[f64]) -> Vec<(usize, f64)> {
    values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v != 0.0)
        .map(|(i, &v)| (i, v))
        .collect()
}

/// Iterates over all `2^n` spin vectors in lexicographic order.
pub fn all_spin_vectors(n: usize) -> impl Iterator<Item = Vec<Spin>> {
    (0u64..1 << n).map(move |bits| {
        (0..n)
            .map(|i| if bits >> i & 1 == 1 { 1 } else { -1 })
            .collect()
    })
}
