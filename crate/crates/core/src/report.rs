//! Bundled statistics for one track, and CSV tables for plotting.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::stats::{
    accumulated_power, acf, coherence_time, find_paths, pdp, AccumulatedPower, AcfResult, CotResult, Track,
    TrackSource,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StatsOptions {
    /// Paths to analyze; picked from the PDP when empty.
    pub paths: Vec<usize>,
    pub path_count: usize,
    pub min_separation: usize,
    pub max_lag_ms: f64,
    pub mu: f64,
    /// Length of the exported complex tap tracks.
    pub tap_track_ms: f64,
}

impl Default for StatsOptions {
    fn default() -> Self {
        Self { paths: Vec::new(), path_count: 2, min_separation: 5, max_lag_ms: 1000.0, mu: 0.8, tap_track_ms: 2000.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TapTrack {
    pub path_delay: usize,
    pub step_samples: usize,
    /// `[re, im]` per column.
    pub values: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatReport {
    pub source: TrackSource,
    pub bandwidth_hz: f64,
    /// Samples between track columns.
    pub resolution_samples: usize,
    pub column_count: usize,
    pub pdp: Vec<f64>,
    pub paths: Vec<usize>,
    pub path_shortfall: bool,
    pub acf: Vec<AcfResult>,
    pub cot: Vec<CotResult>,
    pub accumulated: AccumulatedPower,
    pub tap_tracks: Vec<TapTrack>,
}

impl StatReport {
    pub fn cot_for(&self, path: usize) -> Option<&CotResult> {
        self.cot.iter().find(|c| c.path_delay == path)
    }

    pub fn acf_for(&self, path: usize) -> Option<&AcfResult> {
        self.acf.iter().find(|a| a.path_delay == path)
    }

    pub fn cot_ms(&self, path: usize) -> Option<f64> {
        self.cot_for(path).map(|c| c.cot_seconds(self.bandwidth_hz) * 1e3)
    }
}

/// PDP, path selection, per-path ACF and COT, accumulated power and tap
/// tracks for one track.
pub fn analyze(track: &Track<'_>, opts: &StatsOptions, bandwidth_hz: f64) -> Result<StatReport> {
    if !(bandwidth_hz > 0.0) {
        return Err(invalid("bandwidth must be positive"));
    }
    let p = pdp(track)?;
    let (paths, path_shortfall) = if opts.paths.is_empty() {
        let sel = find_paths(&p, opts.path_count, opts.min_separation)?;
        (sel.delays, sel.shortfall)
    } else {
        (opts.paths.clone(), false)
    };
    let step = track.step_samples();
    let lag_cols = |ms: f64| ((ms * 1e-3 * bandwidth_hz / step as f64).round() as usize).max(1);
    let max_lag = lag_cols(opts.max_lag_ms).min(track.len().saturating_sub(1));
    if max_lag == 0 {
        return Err(invalid("track too short for an ACF"));
    }
    let acfs: Vec<AcfResult> = paths.par_iter().map(|&m| acf(track, m, max_lag)).collect::<Result<_>>()?;
    let cot = acfs.iter().map(|a| coherence_time(a, opts.mu)).collect::<Result<_>>()?;
    let accumulated = accumulated_power(&p)?;
    let track_cols = lag_cols(opts.tap_track_ms).min(track.len());
    let tap_tracks = paths
        .iter()
        .map(|&m| TapTrack {
            path_delay: m,
            step_samples: step,
            values: (0..track_cols).map(|j| track.column(j)[m]).map(|v| [v.re, v.im]).collect(),
        })
        .collect();
    Ok(StatReport {
        source: track.source(),
        bandwidth_hz,
        resolution_samples: step,
        column_count: track.len(),
        pdp: p.values,
        paths,
        path_shortfall,
        acf: acfs,
        cot,
        accumulated,
        tap_tracks,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotSeries {
    Pdp,
    Acf(usize),
    Accumulated,
    TapTrack(usize),
}

impl PlotSeries {
    pub fn file_stem(&self) -> String {
        match self {
            PlotSeries::Pdp => "pdp".into(),
            PlotSeries::Acf(m) => format!("acf_path{m}"),
            PlotSeries::Accumulated => "accumulated".into(),
            PlotSeries::TapTrack(m) => format!("tap_track_path{m}"),
        }
    }
}

fn db(v: f64) -> f64 {
    if v > 0.0 {
        10.0 * v.log10()
    } else {
        f64::NEG_INFINITY
    }
}

/// CSV table with axis columns in ms and dB.
pub fn plot_csv(report: &StatReport, series: PlotSeries) -> Result<String> {
    let ms = |samples: f64| samples / report.bandwidth_hz * 1e3;
    let mut out = String::new();
    match series {
        PlotSeries::Pdp => {
            out.push_str("delay_ms,power_db\n");
            for (m, v) in report.pdp.iter().enumerate() {
                writeln!(out, "{},{}", ms(m as f64), db(*v)).unwrap();
            }
        }
        PlotSeries::Acf(path) => {
            let a = report.acf_for(path).ok_or_else(|| Error::NotFound(format!("acf for path {path}")))?;
            out.push_str("lag_ms,normalized_acf\n");
            for (lag, v) in a.lags.iter().zip(&a.normalized) {
                writeln!(out, "{},{}", ms((lag * a.lag_step_samples) as f64), v).unwrap();
            }
        }
        PlotSeries::Accumulated => {
            out.push_str("delay_ms,fraction\n");
            for (j, f) in report.accumulated.fractions.iter().enumerate() {
                writeln!(out, "{},{}", ms(j as f64), f).unwrap();
            }
        }
        PlotSeries::TapTrack(path) => {
            let t = report
                .tap_tracks
                .iter()
                .find(|t| t.path_delay == path)
                .ok_or_else(|| Error::NotFound(format!("tap track for path {path}")))?;
            out.push_str("time_ms,re,im,magnitude\n");
            for (j, [re, im]) in t.values.iter().enumerate() {
                writeln!(out, "{},{},{},{}", ms((j * t.step_samples) as f64), re, im, re.hypot(*im)).unwrap();
            }
        }
    }
    Ok(out)
}
