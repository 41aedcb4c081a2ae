//! Sliding-window least-squares SCIR estimation in the time domain.
//!
//! The window ending at sample `n` observes `y[n], ..., y[n - L + 1]` and
//! models them as `X[n] h` with `X[n][r][c] = x[n - r - c]` (zero before the
//! first sample). The estimate is the solution of the normal equations
//! `X^H X h = X^H y`.
//!
//! Windows are processed in segments of `refresh_interval` positions, with
//! one extra boundary where full support begins. The first window of a
//! segment is solved directly (Cholesky); the rest follow by the exact
//! rank-two update in [`sliding`]. Segment boundaries sit at fixed sample
//! positions, so every window's result is independent of the output stride
//! and of how segments are scheduled across threads.
//!
//! Partial-support windows (ending before `L + M - 2`) are often badly
//! conditioned; their estimates are only as accurate as that allows.

mod dense;
mod sliding;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::matrix::TapMatrix;
use crate::signal::{SampleBuffer, C64};

use sliding::SlidingState;

/// Condition estimate above which a window is flagged singular.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TdOptions {
    pub window_len: usize,
    pub channel_len: usize,
    #[serde(default = "one")]
    pub stride: usize,
    #[serde(default)]
    pub ridge: f64,
    #[serde(default = "default_refresh")]
    pub refresh_interval: usize,
}

fn one() -> usize {
    1
}

fn default_refresh() -> usize {
    256
}

impl TdOptions {
    /// Window twice the channel length, per-sample output.
    pub fn for_channel_len(channel_len: usize) -> Self {
        Self {
            window_len: 2 * channel_len,
            channel_len,
            stride: 1,
            ridge: 0.0,
            refresh_interval: default_refresh(),
        }
    }

    /// M = 256 with a 512-sample window (one OFDM block).
    pub fn reference() -> Self {
        Self::for_channel_len(256)
    }

    /// M = 90 with a 180-sample (36 ms) window.
    pub fn short_window() -> Self {
        Self::for_channel_len(90)
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.channel_len == 0 {
            return Err(invalid("estimator-td: channel_len must be positive"));
        }
        if self.window_len < self.channel_len {
            return Err(invalid(format!(
                "estimator-td: window_len ({}) must be >= channel_len ({})",
                self.window_len, self.channel_len
            )));
        }
        if self.stride == 0 {
            return Err(invalid("estimator-td: stride must be positive"));
        }
        if self.refresh_interval == 0 {
            return Err(invalid("estimator-td: refresh_interval must be positive"));
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(invalid("estimator-td: ridge must be nonnegative"));
        }
        Ok(())
    }

    /// Windows ending before this position reach back before sample 0.
    pub fn partial_support_end(&self) -> usize {
        self.window_len + self.channel_len - 2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TdEstimate {
    /// `channel_len x columns`; column `j` is the window ending at `j * stride`.
    pub taps: TapMatrix,
    pub options: TdOptions,
    /// Columns whose Gram matrix was singular or too ill-conditioned. These
    /// hold the minimum-norm solution and should not be treated as estimates.
    pub singular_columns: Vec<usize>,
}

impl TdEstimate {
    pub fn geotime_of_column(&self, j: usize) -> usize {
        j * self.options.stride
    }

    /// First column whose window lies entirely inside the signal.
    pub fn first_full_column(&self) -> usize {
        self.options.partial_support_end().div_ceil(self.options.stride).min(self.taps.cols())
    }

    pub fn meta(&self, bandwidth_hz: f64) -> TdMeta {
        TdMeta {
            channel_len: self.options.channel_len,
            window_len: self.options.window_len,
            stride: self.options.stride,
            ridge: self.options.ridge,
            refresh_interval: self.options.refresh_interval,
            partial_support_end: self.options.partial_support_end(),
            first_full_column: self.first_full_column(),
            singular_columns: self.singular_columns.clone(),
            bandwidth_hz,
            geotime: "column j is the window ending at sample j * stride".into(),
        }
    }
}

/// Sidecar metadata for an exported TD estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TdMeta {
    pub channel_len: usize,
    pub window_len: usize,
    pub stride: usize,
    pub ridge: f64,
    pub refresh_interval: usize,
    pub partial_support_end: usize,
    pub first_full_column: usize,
    pub singular_columns: Vec<usize>,
    pub bandwidth_hz: f64,
    pub geotime: String,
}

/// `X[n]` with `X[r][c] = x[n - r - c]`, zero where the index is negative.
pub fn build_design_matrix(x: &[C64], n: usize, window_len: usize, channel_len: usize) -> Result<DMatrix<C64>> {
    if channel_len == 0 || window_len < channel_len {
        return Err(invalid(format!(
            "design matrix needs window_len >= channel_len >= 1, got {window_len} and {channel_len}"
        )));
    }
    if n >= x.len() {
        return Err(invalid(format!("window end {n} is outside a signal of {} samples", x.len())));
    }
    Ok(DMatrix::from_fn(window_len, channel_len, |r, c| {
        n.checked_sub(r + c).map_or(C64::new(0.0, 0.0), |i| x[i])
    }))
}

/// Result of solving one window on its own.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSolution {
    pub h: Vec<C64>,
    pub condition: f64,
    pub singular: bool,
}

/// The per-window solver used by [`estimate_td`], applied to an explicit
/// design matrix: normal equations through Cholesky, falling back to an
/// eigen pseudo-inverse when the condition estimate exceeds [`MAX_CONDITION`].
pub fn solve_normal_equations(design: &DMatrix<C64>, y: &DVector<C64>, ridge: f64) -> Result<WindowSolution> {
    let (rows, m) = design.shape();
    if y.len() != rows {
        return Err(Error::LengthMismatch { what: "observation vector", required: rows, actual: y.len() });
    }
    let mut gram = vec![C64::new(0.0, 0.0); m * m];
    let mut b = vec![C64::new(0.0, 0.0); m];
    for i in 0..m {
        for j in i..m {
            let v: C64 = (0..rows).map(|r| design[(r, i)].conj() * design[(r, j)]).sum();
            gram[i * m + j] = v;
            gram[j * m + i] = v.conj();
        }
        gram[i * m + i] += C64::new(ridge, 0.0);
        b[i] = (0..rows).map(|r| design[(r, i)].conj() * y[r]).sum();
    }
    let s = dense::solve_gram(&gram, &b, m);
    Ok(WindowSolution { h: s.h, condition: s.condition, singular: s.singular })
}

/// Least squares through the SVD pseudo-inverse of the design matrix. An
/// independent route to the same answer as [`solve_normal_equations`], for
/// verification.
pub fn solve_ls_oracle(design: &DMatrix<C64>, y: &DVector<C64>) -> Result<DVector<C64>> {
    let (rows, cols) = design.shape();
    if y.len() != rows {
        return Err(Error::LengthMismatch { what: "observation vector", required: rows, actual: y.len() });
    }
    let svd = design.clone().svd(true, true);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = sigma_max * rows.max(cols) as f64 * f64::EPSILON;
    let pinv = svd.pseudo_inverse(eps).map_err(|e| Error::Degenerate(e.to_string()))?;
    Ok(pinv * y)
}

/// Gram matrix and right-hand side of the window ending at `n`.
///
/// Entries along each diagonal are the same windowed correlation slid by
/// one sample, so the whole matrix costs `O(L M + M^2)`.
fn window_system(x: &[C64], y: &[C64], n: usize, opts: &TdOptions) -> (Vec<C64>, Vec<C64>) {
    let (l, m) = (opts.window_len, opts.channel_len);
    let at = |i: isize| if i >= 0 { x[i as usize] } else { C64::new(0.0, 0.0) };
    let n = n as isize;
    let (li, mi) = (l as isize, m as isize);
    let mut gram = vec![C64::new(0.0, 0.0); m * m];
    for d in 0..mi {
        // G[0][d] = sum_{k = n-L+1}^{n} conj(x[k]) x[k-d]
        let mut acc: C64 = ((n - li + 1).max(0)..=n).map(|k| at(k).conj() * at(k - d)).sum();
        gram[d as usize] = acc;
        for c in 0..mi - d - 1 {
            // slide to G[c+1][c+1+d]
            acc -= at(n - c).conj() * at(n - c - d);
            acc += at(n - li - c).conj() * at(n - li - c - d);
            let (i, j) = ((c + 1) as usize, (c + 1 + d) as usize);
            gram[i * m + j] = acc;
        }
    }
    for i in 0..m {
        for j in 0..i {
            gram[i * m + j] = gram[j * m + i].conj();
        }
        gram[i * m + i] = C64::new(gram[i * m + i].re + opts.ridge, 0.0);
    }
    let b = (0..mi)
        .map(|c| ((n - li + 1).max(0)..=n).map(|k| at(k - c).conj() * y[k as usize]).sum())
        .collect();
    (gram, b)
}

/// Trace of the window Gram matrix (plus ridge), from `|x|^2` weighted by
/// how many window entries each sample occupies.
fn window_trace(x: &[C64], n: usize, opts: &TdOptions) -> f64 {
    let (l, m) = (opts.window_len as isize, opts.channel_len as isize);
    let n = n as isize;
    let lo = (n - l - m + 2).max(0);
    let mut t = 0.0;
    for i in lo..=n {
        let hi_c = (m - 1).min(n - i);
        let lo_c = (n - l + 1 - i).max(0);
        t += x[i as usize].norm_sqr() * (hi_c - lo_c + 1) as f64;
    }
    t + opts.ridge * m as f64
}

struct SegmentOutput {
    columns: Vec<C64>,
    singular: Vec<usize>,
}

fn solve_segment(x: &[C64], y: &[C64], opts: &TdOptions, start: usize, last: usize) -> SegmentOutput {
    let m = opts.channel_len;
    let mut out = SegmentOutput { columns: Vec::new(), singular: Vec::new() };
    let mut state: Option<SlidingState> = None;
    for n in start..=last {
        let stepped = match state.as_mut() {
            Some(s) => s.step(x, y, n, opts.window_len, window_trace(x, n, opts)).is_ok(),
            None => false,
        };
        let singular = if stepped {
            false
        } else {
            let (gram, b) = window_system(x, y, n, opts);
            let solved = dense::solve_gram(&gram, &b, m);
            state = solved.inverse.as_ref().map(|p| SlidingState::new(m, p, solved.h.clone()));
            if state.is_none() {
                // keep the answer for output, reseed on the next window
                if n % opts.stride == 0 {
                    out.columns.extend_from_slice(&solved.h);
                    out.singular.push(n / opts.stride);
                }
                continue;
            }
            solved.singular
        };
        if n % opts.stride == 0 {
            out.columns.extend_from_slice(&state.as_ref().unwrap().h);
            if singular {
                out.singular.push(n / opts.stride);
            }
        }
    }
    out
}

/// Per-window LS estimates for every `stride`-th window end position.
pub fn estimate_td(received: &SampleBuffer, x: &SampleBuffer, opts: &TdOptions) -> Result<TdEstimate> {
    opts.validate()?;
    if received.len() != x.len() {
        return Err(invalid(format!(
            "estimator-td: received has {} samples, transmit has {}",
            received.len(),
            x.len()
        )));
    }
    let len = x.len();
    let cols = len.div_ceil(opts.stride);
    // Direct solves at every multiple of the refresh interval and at the
    // first full-support window, so full-support results never inherit
    // rounding from the ill-conditioned partial windows.
    let mut anchors: Vec<usize> = (0..len).step_by(opts.refresh_interval).collect();
    if opts.partial_support_end() < len {
        anchors.push(opts.partial_support_end());
    }
    anchors.sort_unstable();
    anchors.dedup();
    // segments that hold at least one output position, with their last output
    let segments: Vec<(usize, usize)> = anchors
        .iter()
        .enumerate()
        .filter_map(|(i, &start)| {
            let end = anchors.get(i + 1).copied().unwrap_or(len);
            let last = (end - 1) / opts.stride * opts.stride;
            (last >= start).then_some((start, last))
        })
        .collect();
    let (xs, ys) = (x.samples(), received.samples());
    let outputs: Vec<SegmentOutput> = segments
        .par_iter()
        .map(|&(start, last)| solve_segment(xs, ys, opts, start, last))
        .collect();
    let mut data = Vec::with_capacity(cols * opts.channel_len);
    let mut singular_columns = Vec::new();
    for o in outputs {
        data.extend(o.columns);
        singular_columns.extend(o.singular);
    }
    let taps = if cols == 0 {
        TapMatrix::zeros(opts.channel_len, 0)
    } else {
        TapMatrix::from_columns(opts.channel_len, data)?
    };
    debug_assert_eq!(taps.cols(), cols);
    Ok(TdEstimate { taps, options: *opts, singular_columns })
}
