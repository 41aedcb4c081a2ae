//! Complex baseband buffers, DFT conventions and small numeric helpers.
//!
//! The forward transform is unnormalized and the inverse carries `1/K`, so a
//! channel frequency response computed with [`dft`] inverts to the taps
//! exactly under [`idft`].

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{invalid, Result};

pub type C64 = Complex64;

/// Contiguous complex baseband samples with their sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBuffer {
    samples: Vec<C64>,
    sample_rate_hz: f64,
}

impl SampleBuffer {
    pub fn new(samples: Vec<C64>, sample_rate_hz: f64) -> Result<Self> {
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(invalid(format!("sample rate must be positive, got {sample_rate_hz}")));
        }
        if let Some(i) = samples.iter().position(|s| !(s.re.is_finite() && s.im.is_finite())) {
            return Err(invalid(format!("sample {i} is not finite")));
        }
        Ok(Self { samples, sample_rate_hz })
    }

    pub fn zeros(len: usize, sample_rate_hz: f64) -> Result<Self> {
        Self::new(vec![C64::new(0.0, 0.0); len], sample_rate_hz)
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<C64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    /// Mean of `|x|^2` over the buffer, 0 for an empty buffer.
    pub fn mean_power(&self) -> f64 {
        mean_power(&self.samples)
    }

    /// Same sample rate, new contents. Used by stages that transform a buffer.
    pub(crate) fn with_samples(&self, samples: Vec<C64>) -> Result<Self> {
        Self::new(samples, self.sample_rate_hz)
    }
}

/// Frequency-domain vector of `K` bins, bin 0 is DC.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum(pub Vec<C64>);

impl Spectrum {
    pub fn bins(&self) -> &[C64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft(len, direction))
}

/// `X[k] = sum_m x[m] e^{-j 2 pi k m / K}`, no scaling.
pub fn dft(block: &[C64]) -> Result<Spectrum> {
    if block.is_empty() {
        return Err(invalid("dft of an empty block"));
    }
    let mut buf = block.to_vec();
    plan(buf.len(), FftDirection::Forward).process(&mut buf);
    Ok(Spectrum(buf))
}

/// `x[m] = (1/K) sum_k X[k] e^{j 2 pi k m / K}`.
pub fn idft(spectrum: &Spectrum) -> Result<Vec<C64>> {
    if spectrum.is_empty() {
        return Err(invalid("idft of an empty spectrum"));
    }
    let mut buf = spectrum.0.clone();
    let k = buf.len();
    plan(k, FftDirection::Inverse).process(&mut buf);
    let scale = 1.0 / k as f64;
    buf.iter_mut().for_each(|v| *v *= scale);
    Ok(buf)
}

/// Causal linear convolution truncated to the input length; samples before
/// index 0 are zero.
pub fn convolve_linear(signal: &SampleBuffer, taps: &[C64]) -> Result<SampleBuffer> {
    if taps.is_empty() {
        return Err(invalid("convolution needs at least one tap"));
    }
    let x = signal.samples();
    let mut out = vec![C64::new(0.0, 0.0); x.len()];
    for (n, o) in out.iter_mut().enumerate() {
        let span = taps.len().min(n + 1);
        let mut acc = C64::new(0.0, 0.0);
        for (m, t) in taps[..span].iter().enumerate() {
            acc += t * x[n - m];
        }
        *o = acc;
    }
    signal.with_samples(out)
}

/// `10 log10(value)`; `-inf` for zero.
pub fn power_db(value: f64) -> Result<f64> {
    if value.is_nan() || value < 0.0 {
        return Err(invalid(format!("power must be nonnegative, got {value}")));
    }
    if value == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(10.0 * value.log10())
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn mean_power(samples: &[C64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / samples.len() as f64
}
