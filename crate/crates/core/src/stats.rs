//! Statistics of SCIR tracks: power delay profile, per-path autocorrelation
//! and coherence time, accumulated SI power and dominant-path selection.
//!
//! Every function takes a [`Track`], so FD estimates (one column per
//! block), TD estimates (one column per stride) and simulator ground truth
//! are handled the same way. Lags are counted in track columns and converted
//! to samples through [`Track::step_samples`].

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::channel::Scir;
use crate::error::{invalid, Error, Result};
use crate::fd::FdEstimate;
use crate::matrix::TapMatrix;
use crate::signal::C64;
use crate::td::TdEstimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackSource {
    Fd,
    Td,
    Truth,
}

impl TrackSource {
    pub fn label(self) -> &'static str {
        match self {
            TrackSource::Fd => "fd",
            TrackSource::Td => "td",
            TrackSource::Truth => "truth",
        }
    }
}

/// A run of uniformly spaced impulse-response snapshots.
#[derive(Debug, Clone)]
pub struct Track<'a> {
    taps: &'a TapMatrix,
    cols: Range<usize>,
    step_samples: usize,
    source: TrackSource,
}

impl<'a> Track<'a> {
    pub fn new(taps: &'a TapMatrix, step_samples: usize, source: TrackSource) -> Self {
        Self { taps, cols: 0..taps.cols(), step_samples, source }
    }

    /// Restricts to columns `range` (relative to the current view).
    pub fn slice(&self, range: Range<usize>) -> Self {
        let start = self.cols.start + range.start;
        let end = (self.cols.start + range.end).min(self.cols.end);
        Self { cols: start..end.max(start), ..self.clone() }
    }

    pub fn len(&self) -> usize {
        self.cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cols.is_empty()
    }

    pub fn delays(&self) -> usize {
        self.taps.rows()
    }

    pub fn step_samples(&self) -> usize {
        self.step_samples
    }

    pub fn source(&self) -> TrackSource {
        self.source
    }

    pub fn column(&self, j: usize) -> &'a [C64] {
        self.taps.column(self.cols.start + j)
    }

    pub fn tap_series(&self, m: usize) -> Vec<C64> {
        self.cols.clone().map(|j| self.taps.get(m, j)).collect()
    }
}

impl FdEstimate {
    pub fn track(&self) -> Track<'_> {
        Track::new(&self.taps, self.block_len, TrackSource::Fd)
    }
}

impl TdEstimate {
    /// Columns whose windows lie fully inside the signal.
    pub fn track(&self) -> Track<'_> {
        let all = Track::new(&self.taps, self.options.stride, TrackSource::Td);
        all.slice(self.first_full_column()..self.taps.cols())
    }
}

impl Scir {
    pub fn track(&self) -> Track<'_> {
        Track::new(&self.taps, self.geotime_stride, TrackSource::Truth)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdpEstimate {
    pub values: Vec<f64>,
    pub source: TrackSource,
    pub sample_count: usize,
}

/// Mean of `|h[m, n]|^2` over the columns of the track.
pub fn pdp(track: &Track<'_>) -> Result<PdpEstimate> {
    if track.is_empty() || track.delays() == 0 {
        return Err(invalid("pdp of an empty track"));
    }
    let mut values = vec![0.0; track.delays()];
    for j in 0..track.len() {
        for (v, h) in values.iter_mut().zip(track.column(j)) {
            *v += h.norm_sqr();
        }
    }
    let n = track.len() as f64;
    values.iter_mut().for_each(|v| *v /= n);
    Ok(PdpEstimate { values, source: track.source(), sample_count: track.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcfResult {
    pub path_delay: usize,
    /// Lags in track columns.
    pub lags: Vec<usize>,
    /// Samples per lag step.
    pub lag_step_samples: usize,
    pub values: Vec<C64>,
    pub normalized: Vec<f64>,
}

/// Autocorrelation of one tap, averaged over the valid pairs at each lag.
pub fn acf(track: &Track<'_>, m: usize, max_lag: usize) -> Result<AcfResult> {
    if m >= track.delays() {
        return Err(invalid(format!("path {m} is outside {} delay bins", track.delays())));
    }
    if max_lag >= track.len() {
        return Err(invalid(format!(
            "max_lag {max_lag} needs more than {} columns",
            track.len()
        )));
    }
    let h = track.tap_series(m);
    let n = h.len();
    let values: Vec<C64> = (0..=max_lag)
        .map(|lag| {
            let s: C64 = h[lag..].iter().zip(&h[..n - lag]).map(|(a, b)| a * b.conj()).sum();
            s / (n - lag) as f64
        })
        .collect();
    let q0 = values[0].re;
    if !(q0 > 0.0) {
        return Err(Error::Degenerate(format!("path {m} has zero energy")));
    }
    let normalized = values.iter().map(|q| q.norm() / q0).collect();
    Ok(AcfResult {
        path_delay: m,
        lags: (0..=max_lag).collect(),
        lag_step_samples: track.step_samples(),
        values,
        normalized,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CotResult {
    pub path_delay: usize,
    /// Coherence time in samples; a lower bound when `censored`.
    pub cot_samples: f64,
    pub threshold: f64,
    pub resolution_samples: f64,
    /// No crossing within the computed lags.
    pub censored: bool,
}

impl CotResult {
    pub fn cot_seconds(&self, bandwidth_hz: f64) -> f64 {
        self.cot_samples / bandwidth_hz
    }
}

/// Twice the first lag at which the normalized ACF falls to `mu`, linearly
/// interpolated between lag samples.
pub fn coherence_time(acf: &AcfResult, mu: f64) -> Result<CotResult> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(invalid(format!("threshold must be in (0, 1), got {mu}")));
    }
    let q = &acf.normalized;
    let step = acf.lag_step_samples as f64;
    let crossing = (1..q.len()).find(|&i| q[i] <= mu).map(|i| {
        let (a, b) = (q[i - 1], q[i]);
        let frac = if a > b { (a - mu) / (a - b) } else { 0.0 };
        (i - 1) as f64 + frac.clamp(0.0, 1.0)
    });
    let (eta, censored) = match crossing {
        Some(eta) => (eta, false),
        None => ((q.len() - 1) as f64, true),
    };
    Ok(CotResult {
        path_delay: acf.path_delay,
        cot_samples: 2.0 * eta * step,
        threshold: mu,
        resolution_samples: step,
        censored,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccumulatedPower {
    /// `p_acc[j] = (1/M) sum_{m<j} p[m]`, length `M + 1`.
    pub p_acc: Vec<f64>,
    pub total: f64,
    pub fractions: Vec<f64>,
}

impl AccumulatedPower {
    /// Share of power in delay bins `0..=delay`.
    pub fn fraction_through(&self, delay: usize) -> f64 {
        self.fractions[(delay + 1).min(self.fractions.len() - 1)]
    }
}

pub fn accumulated_power(pdp: &PdpEstimate) -> Result<AccumulatedPower> {
    let m = pdp.values.len();
    if m == 0 {
        return Err(invalid("empty power delay profile"));
    }
    let mut p_acc = Vec::with_capacity(m + 1);
    let mut running = 0.0;
    p_acc.push(0.0);
    for v in &pdp.values {
        running += v;
        p_acc.push(running / m as f64);
    }
    let total = p_acc[m];
    if !(total > 0.0) {
        return Err(Error::Degenerate("power delay profile is all zero".into()));
    }
    let fractions = p_acc.iter().map(|p| p / total).collect();
    Ok(AccumulatedPower { p_acc, total, fractions })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSelection {
    /// Sorted by delay.
    pub delays: Vec<usize>,
    /// Fewer peaks than requested were available.
    pub shortfall: bool,
}

/// Greedy pick of the strongest bins at least `min_separation` apart. Ties
/// go to the smaller delay.
pub fn find_paths(pdp: &PdpEstimate, count: usize, min_separation: usize) -> Result<PathSelection> {
    if count == 0 {
        return Err(invalid("path count must be at least 1"));
    }
    let mut order: Vec<usize> = (0..pdp.values.len()).filter(|&m| pdp.values[m] > 0.0).collect();
    order.sort_by(|&a, &b| pdp.values[b].total_cmp(&pdp.values[a]).then(a.cmp(&b)));
    let mut delays: Vec<usize> = Vec::with_capacity(count);
    for m in order {
        if delays.len() == count {
            break;
        }
        if delays.iter().all(|&d| d.abs_diff(m) >= min_separation) {
            delays.push(m);
        }
    }
    let shortfall = delays.len() < count;
    delays.sort_unstable();
    Ok(PathSelection { delays, shortfall })
}
