//! Digital SI cancellation: rebuild the SI from an SCIR track, subtract it
//! and report how far the residual sits above the noise floor.

use std::ops::Range;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::channel::time_varying_convolve;
use crate::error::{invalid, Error, Result};
use crate::matrix::TapMatrix;
use crate::signal::{mean_power, SampleBuffer};

/// `s_hat[n] = sum_m h[m, n] x[n - m]`, holding each track column for
/// `stride` samples.
pub fn reconstruct_si(x: &SampleBuffer, track: &TapMatrix, stride: usize) -> Result<SampleBuffer> {
    let s = time_varying_convolve(x.samples(), track, stride)?;
    x.with_samples(s)
}

/// Zeroes every delay row outside `keep` (partial-path cancellation).
pub fn mask_paths(track: &TapMatrix, keep: &[usize]) -> Result<TapMatrix> {
    if let Some(&bad) = keep.iter().find(|&&m| m >= track.rows()) {
        return Err(invalid(format!("path delay {bad} is outside {} delay bins", track.rows())));
    }
    Ok(track.keep_rows(keep))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CancellationReport {
    pub residual_power: f64,
    pub received_power: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub noise_power: Option<f64>,
    /// `+inf` for a zero residual; serialized as the string `"inf"`.
    #[serde(with = "db_value")]
    pub depth_db: f64,
    #[serde(skip_serializing_if = "Option::is_none", default, with = "opt_db_value")]
    pub excess_over_noise_db: Option<f64>,
    /// Evaluated sample positions, half-open.
    pub eval_start: usize,
    pub eval_end: usize,
}

impl CancellationReport {
    pub fn has_zero_residual(&self) -> bool {
        self.residual_power == 0.0
    }
}

/// Default evaluation span: skip the first `channel_len + window_len`
/// samples, where estimators are still warming up.
pub fn default_eval_span(len: usize, channel_len: usize, window_len: usize) -> Range<usize> {
    (channel_len + window_len).min(len)..len
}

/// `e = y - s_hat`, with powers measured over `span`.
pub fn cancel(
    y: &SampleBuffer,
    s_hat: &SampleBuffer,
    noise_power: Option<f64>,
    span: Range<usize>,
) -> Result<(SampleBuffer, CancellationReport)> {
    if y.len() != s_hat.len() {
        return Err(Error::LengthMismatch { what: "reconstructed SI", required: y.len(), actual: s_hat.len() });
    }
    if span.start >= span.end || span.end > y.len() {
        return Err(invalid(format!("evaluation span {span:?} is empty or outside {} samples", y.len())));
    }
    if let Some(p) = noise_power {
        if !(p > 0.0 && p.is_finite()) {
            return Err(invalid(format!("noise power must be positive, got {p}")));
        }
    }
    let residual: Vec<_> = y.samples().iter().zip(s_hat.samples()).map(|(a, b)| a - b).collect();
    let residual_power = mean_power(&residual[span.clone()]);
    let received_power = mean_power(&y.samples()[span.clone()]);
    let depth_db = ratio_db(received_power, residual_power);
    let excess_over_noise_db = noise_power.map(|p| ratio_db(residual_power, p));
    let report = CancellationReport {
        residual_power,
        received_power,
        noise_power,
        depth_db,
        excess_over_noise_db,
        eval_start: span.start,
        eval_end: span.end,
    };
    Ok((y.with_samples(residual)?, report))
}

fn ratio_db(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else if num == 0.0 {
        f64::NEG_INFINITY
    } else {
        10.0 * (num / den).log10()
    }
}

mod db_value {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) if t == "-inf" => Ok(f64::NEG_INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("expected a number, got {t:?}"))),
        }
    }
}

mod opt_db_value {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
        match v {
            Some(v) => db_value::serialize(v, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<f64>, D::Error> {
        db_value::deserialize(d).map(Some)
    }
}
