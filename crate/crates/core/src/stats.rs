//! Success probability, time-to-solution, bootstrap medians and scaling fits.

use std::fmt;
use std::path::Path;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::samplers::SamplerKind;
use crate::seed::{rng_from, stream};
use crate::{Error, Result};

/// Target success probability for time-to-solution.
pub const TARGET_SUCCESS: f64 = 0.99;
pub const DEFAULT_RESAMPLES: usize = 5000;
pub const DEFAULT_CONFIDENCE: f64 = 0.95;

/// Outcome tally of one (instance, setting) cell, pooled over gauges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance_id: String,
    pub n: usize,
    pub t_us: f64,
    pub j_f: f64,
    pub sampler: SamplerKind,
    pub total_anneals: u64,
    pub ground_hits: u64,
}

impl RunRecord {
    pub fn p_gs(&self) -> Result<f64> {
        compute_pgs(self.ground_hits, self.total_anneals)
    }

    pub fn tts(&self) -> Result<TtsEstimate> {
        compute_tts(self.p_gs()?, self.t_us)
    }
}

pub fn compute_pgs(ground_hits: u64, total_anneals: u64) -> Result<f64> {
    if total_anneals == 0 {
        return Err(Error::InvalidParameter("total_anneals must be at least 1".into()));
    }
    if ground_hits > total_anneals {
        return Err(Error::InvalidParameter(format!(
            "ground_hits {ground_hits} exceeds total_anneals {total_anneals}"
        )));
    }
    Ok(ground_hits as f64 / total_anneals as f64)
}

/// A time-to-solution in microseconds, possibly infinite.
///
/// `Finite` orders below `Infinite`. Serialized as a number, or the string
/// `"Infinity"`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub enum Tts {
    Finite(f64),
    Infinite,
}

impl Tts {
    pub fn from_f64(v: f64) -> Tts {
        if v.is_finite() {
            Tts::Finite(v)
        } else {
            Tts::Infinite
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Tts::Finite(v) => v,
            Tts::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Tts::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Tts::Finite(v) => Some(v),
            Tts::Infinite => None,
        }
    }

    pub fn total_cmp(&self, other: &Tts) -> std::cmp::Ordering {
        self.value().total_cmp(&other.value())
    }
}

impl fmt::Display for Tts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tts::Finite(v) => write!(f, "{v}"),
            Tts::Infinite => f.write_str("Infinity"),
        }
    }
}

impl Serialize for Tts {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Tts::Finite(v) => s.serialize_f64(*v),
            Tts::Infinite => s.serialize_str("Infinity"),
        }
    }
}

impl<'de> Deserialize<'de> for Tts {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(v) => Ok(Tts::from_f64(v)),
            Raw::Text(t) => match t.as_str() {
                "Infinity" | "inf" | "Inf" => Ok(Tts::Infinite),
                other => other
                    .parse::<f64>()
                    .map(Tts::from_f64)
                    .map_err(|_| serde::de::Error::custom(format!("invalid TTS value {other:?}"))),
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TtsEstimate {
    pub p_gs: f64,
    pub tts: Tts,
    pub t_us: f64,
}

/// Time to reach a valid solution with probability 0.99.
///
/// The raw formula is used for `p_gs < 1`, so values above 0.99 give a TTS
/// below `t`. At `p_gs == 1` the result is exactly `t`.
pub fn compute_tts(p_gs: f64, t_us: f64) -> Result<TtsEstimate> {
    if !(0.0..=1.0).contains(&p_gs) {
        return Err(Error::RangeViolation {
            value: p_gs,
            min: 0.0,
            max: 1.0,
        });
    }
    if !(t_us > 0.0 && t_us.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "anneal time must be positive, got {t_us}"
        )));
    }
    let tts = if p_gs == 0.0 {
        Tts::Infinite
    } else if p_gs == 1.0 {
        Tts::Finite(t_us)
    } else {
        Tts::Finite((-TARGET_SUCCESS).ln_1p() / (-p_gs).ln_1p() * t_us)
    };
    Ok(TtsEstimate { p_gs, tts, t_us })
}

/// Median of `values`; sorts in place. Infinities follow ordinary ordering,
/// so the median is infinite once at least half the values are.
fn median_in_place(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        let (a, b) = (values[n / 2 - 1], values[n / 2]);
        if b.is_infinite() {
            f64::INFINITY
        } else {
            a + (b - a) / 2.0
        }
    }
}

pub fn median(values: &[Tts]) -> Result<Tts> {
    if values.is_empty() {
        return Err(Error::InsufficientData("median of an empty list".into()));
    }
    let mut v: Vec<f64> = values.iter().map(|t| t.value()).collect();
    Ok(Tts::from_f64(median_in_place(&mut v)))
}

/// Sample quantile by linear interpolation between order statistics
/// (Hyndman and Fan type 7). `sorted` must be ascending.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty list");
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if frac == 0.0 || lo + 1 >= sorted.len() {
        return sorted[lo];
    }
    let (a, b) = (sorted[lo], sorted[lo + 1]);
    if b.is_infinite() {
        return f64::INFINITY;
    }
    a + frac * (b - a)
}

/// Medians of `resamples` bootstrap draws, in resample order.
pub fn bootstrap_medians(values: &[Tts], resamples: usize, seed: u64) -> Vec<f64> {
    let base: Vec<f64> = values.iter().map(|t| t.value()).collect();
    let n = base.len();
    (0..resamples)
        .into_par_iter()
        .map_init(
            || vec![0.0; n],
            |draw, b| {
                let mut rng = rng_from(seed, &[stream::BOOTSTRAP, b as u64]);
                for slot in draw.iter_mut() {
                    *slot = base[rng.gen_range(0..n)];
                }
                median_in_place(draw)
            },
        )
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MedianSummary {
    /// Median of the observed values.
    pub median: Tts,
    /// Mean of the bootstrap medians.
    pub bootstrap_mean: Tts,
    pub ci_low: Tts,
    pub ci_high: Tts,
    pub confidence: f64,
    pub resamples: usize,
    pub count: usize,
    pub infinite_count: usize,
}

/// Percentile bootstrap of the median.
pub fn bootstrap_median(
    values: &[Tts],
    resamples: usize,
    confidence: f64,
    seed: u64,
) -> Result<MedianSummary> {
    if values.is_empty() {
        return Err(Error::InsufficientData("bootstrap of an empty list".into()));
    }
    if resamples == 0 {
        return Err(Error::InvalidParameter("resamples must be at least 1".into()));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::RangeViolation {
            value: confidence,
            min: 0.0,
            max: 1.0,
        });
    }
    let mut medians = bootstrap_medians(values, resamples, seed);
    let mean = if medians.iter().any(|m| m.is_infinite()) {
        f64::INFINITY
    } else {
        crate::numeric::exact_sum(medians.iter().copied()) / resamples as f64
    };
    medians.sort_unstable_by(f64::total_cmp);
    let tail = (1.0 - confidence) / 2.0;
    Ok(MedianSummary {
        median: median(values)?,
        bootstrap_mean: Tts::from_f64(mean),
        ci_low: Tts::from_f64(percentile(&medians, tail)),
        ci_high: Tts::from_f64(percentile(&medians, 1.0 - tail)),
        confidence,
        resamples,
        count: values.len(),
        infinite_count: values.iter().filter(|t| !t.is_finite()).count(),
    })
}

/// Exponential fit `TTS = t0 * exp(alpha * n)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub alpha: f64,
    /// `None` when only two sizes were fitted.
    pub stderr: Option<f64>,
    pub t0: f64,
    pub sizes: Vec<usize>,
    pub excluded: Vec<usize>,
}

impl ScalingFit {
    pub fn predict(&self, n: usize) -> f64 {
        self.t0 * (self.alpha * n as f64).exp()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Ordinary least squares of `ln(TTS)` on `n` over the finite points.
pub fn fit_scaling(points: &[(usize, Tts)]) -> Result<ScalingFit> {
    let mut used: Vec<(usize, f64)> = Vec::new();
    let mut excluded = Vec::new();
    for &(n, tts) in points {
        match tts {
            Tts::Finite(v) if v > 0.0 => used.push((n, v)),
            _ => excluded.push(n),
        }
    }
    used.sort_by_key(|&(n, _)| n);
    excluded.sort_unstable();
    let m = used.len();
    if m < 2 {
        return Err(Error::InsufficientData(format!(
            "{m} finite point(s); a fit needs at least 2"
        )));
    }
    let xs: Vec<f64> = used.iter().map(|&(n, _)| n as f64).collect();
    let ys: Vec<f64> = used.iter().map(|&(_, v)| v.ln()).collect();
    let x_mean = xs.iter().sum::<f64>() / m as f64;
    let y_mean = ys.iter().sum::<f64>() / m as f64;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all points share one size".into()));
    }
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - x_mean) * (y - y_mean))
        .sum();
    let alpha = sxy / sxx;
    let intercept = y_mean - alpha * x_mean;
    let stderr = (m > 2).then(|| {
        let rss: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (y - intercept - alpha * x).powi(2))
            .sum();
        (rss / (m - 2) as f64 / sxx).sqrt()
    });
    Ok(ScalingFit {
        alpha,
        stderr,
        t0: intercept.exp(),
        sizes: used.iter().map(|&(n, _)| n).collect(),
        excluded,
    })
}

/// One line of an analysis table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub machine: String,
    pub n: usize,
    pub t_us: f64,
    /// Coupling value, or the optimisation mode (`u_opt`, `i_opt`).
    pub j_f: String,
    pub median: Tts,
    pub bootstrap_mean: Tts,
    pub ci_low: Tts,
    pub ci_high: Tts,
    pub count: usize,
    pub infinite_count: usize,
}

impl SummaryRow {
    pub fn new(machine: &str, n: usize, t_us: f64, j_f: String, s: &MedianSummary) -> Self {
        SummaryRow {
            machine: machine.to_string(),
            n,
            t_us,
            j_f,
            median: s.median,
            bootstrap_mean: s.bootstrap_mean,
            ci_low: s.ci_low,
            ci_high: s.ci_high,
            count: s.count,
            infinite_count: s.infinite_count,
        }
    }
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_summary_csv(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize()
        .map(|row| row.map_err(|e| csv_error(path, e)))
        .collect()
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Format(format!("{}: {other:?}", path.display())),
        }
    } else {
        Error::Format(format!("{}: {e}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgs_ratios() {
        assert_eq!(compute_pgs(0, 100).unwrap(), 0.0);
        assert_eq!(compute_pgs(100, 100).unwrap(), 1.0);
        assert_eq!(compute_pgs(37, 100).unwrap(), 0.37);
        assert!(compute_pgs(0, 0).is_err());
        assert!(compute_pgs(5, 4).is_err());
    }

    #[test]
    fn tts_values() {
        assert_eq!(compute_tts(0.99, 1.0).unwrap().tts, Tts::Finite(1.0));
        assert_eq!(compute_tts(0.99, 7.5).unwrap().tts, Tts::Finite(7.5));
        assert_eq!(compute_tts(0.0, 20.0).unwrap().tts, Tts::Infinite);
        assert_eq!(compute_tts(1.0, 20.0).unwrap().tts, Tts::Finite(20.0));
        // ln(0.01)/ln(0.5) = log2(100).
        let oracle = 20.0 * 100f64.log2();
        let got = compute_tts(0.5, 20.0).unwrap().tts.value();
        assert!(((got - oracle) / oracle).abs() < 1e-12);
        assert!(compute_tts(1.5, 1.0).is_err());
        assert!(compute_tts(0.5, 0.0).is_err());
    }

    #[test]
    fn tts_serde() {
        let v = vec![Tts::Finite(2.5), Tts::Infinite];
        let text = serde_json::to_string(&v).unwrap();
        assert_eq!(text, r#"[2.5,"Infinity"]"#);
        let back: Vec<Tts> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, v);
        assert!(Tts::Finite(1e300) < Tts::Infinite);
    }

    #[test]
    fn median_rules() {
        let f = |v: &[f64]| median(&v.iter().map(|&x| Tts::from_f64(x)).collect::<Vec<_>>()).unwrap();
        assert_eq!(f(&[3.0, 1.0, 2.0]), Tts::Finite(2.0));
        assert_eq!(f(&[4.0, 1.0, 2.0, 3.0]), Tts::Finite(2.5));
        assert_eq!(f(&[1.0, f64::INFINITY, f64::INFINITY]), Tts::Infinite);
        assert_eq!(f(&[1.0, 2.0, f64::INFINITY]), Tts::Finite(2.0));
        assert_eq!(f(&[1.0, 2.0, f64::INFINITY, f64::INFINITY]), Tts::Infinite);
    }

    #[test]
    fn percentile_type7() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert_eq!(percentile(&v, 1.0), 4.0);
        assert_eq!(percentile(&v, 0.5), 2.5);
        assert!((percentile(&v, 0.25) - 1.75).abs() < 1e-15);
        assert_eq!(percentile(&[1.0, f64::INFINITY], 0.5), f64::INFINITY);
        assert_eq!(percentile(&[1.0, f64::INFINITY], 0.0), 1.0);
    }

    #[test]
    fn bootstrap_degenerate_and_infinite() {
        let s = bootstrap_median(&[Tts::Finite(5.0); 4], 200, 0.95, 1).unwrap();
        assert_eq!(
            (s.bootstrap_mean, s.ci_low, s.ci_high),
            (Tts::Finite(5.0), Tts::Finite(5.0), Tts::Finite(5.0))
        );
        let mut v = vec![Tts::Infinite; 51];
        v.extend((0..49).map(|i| Tts::Finite(i as f64 + 1.0)));
        let s = bootstrap_median(&v, 500, 0.95, 2).unwrap();
        assert_eq!(s.median, Tts::Infinite);
        assert_eq!(s.infinite_count, 51);
    }

    #[test]
    fn bootstrap_is_seeded() {
        let v: Vec<Tts> = (0..30).map(|i| Tts::Finite((i * i) as f64)).collect();
        let a = bootstrap_median(&v, 300, 0.9, 11).unwrap();
        let b = bootstrap_median(&v, 300, 0.9, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.ci_low <= a.median && a.median <= a.ci_high);
    }

    #[test]
    fn fit_two_points_and_exact() {
        let fit = fit_scaling(&[(8, Tts::Finite(10.0)), (16, Tts::Finite(100.0))]).unwrap();
        assert!((fit.alpha - 10f64.ln() / 8.0).abs() < 1e-14);
        assert_eq!(fit.stderr, None);

        let pts: Vec<_> = (8..=16)
            .step_by(2)
            .map(|n| (n, Tts::Finite((0.5 * n as f64).exp())))
            .collect();
        let fit = fit_scaling(&pts).unwrap();
        assert!(((fit.alpha - 0.5) / 0.5).abs() < 1e-9);
        assert!((fit.t0 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fit_excludes_infinite() {
        let pts = [
            (8, Tts::Finite(10.0)),
            (10, Tts::Infinite),
            (12, Tts::Finite(40.0)),
        ];
        let fit = fit_scaling(&pts).unwrap();
        assert_eq!(fit.sizes, vec![8, 12]);
        assert_eq!(fit.excluded, vec![10]);
        assert!(matches!(
            fit_scaling(&[(8, Tts::Finite(1.0)), (10, Tts::Infinite)]),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn summary_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("summary.csv");
        let s = bootstrap_median(&[Tts::Finite(1.0), Tts::Infinite, Tts::Infinite], 50, 0.95, 3)
            .unwrap();
        let rows = vec![SummaryRow::new("2000Q", 8, 1.0, "-0.5".into(), &s)];
        write_summary_csv(&path, &rows).unwrap();
        assert_eq!(read_summary_csv(&path).unwrap(), rows);
    }
}
