//! BPSK OFDM sounding waveform.
//!
//! Each block is `b_i = [d_i[K-cp..K] | d_i]` with `d_i = idft(D_i)`, and the
//! transmit stream is the blocks laid end to end. With `cp_len == K` the
//! prefix is a full copy of the data part.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::seed;
use crate::signal::{idft, SampleBuffer, Spectrum, C64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfdmConfig {
    pub subcarriers: usize,
    pub cp_len: usize,
    pub num_blocks: usize,
    pub bandwidth_hz: f64,
    #[serde(default)]
    pub seed: u64,
}

impl OfdmConfig {
    /// The lake-trial waveform: K = 256, full-length CP, 720 blocks at 5 kHz.
    pub fn reference() -> Self {
        Self {
            subcarriers: 256,
            cp_len: 256,
            num_blocks: 720,
            bandwidth_hz: 5000.0,
            seed: 0,
        }
    }

    pub fn with_blocks(mut self, num_blocks: usize) -> Self {
        self.num_blocks = num_blocks;
        self
    }

    pub fn block_len(&self) -> usize {
        self.subcarriers + self.cp_len
    }

    pub fn total_len(&self) -> usize {
        self.block_len() * self.num_blocks
    }

    pub fn block_duration_s(&self) -> f64 {
        self.block_len() as f64 / self.bandwidth_hz
    }

    pub fn validate(&self) -> Result<()> {
        if self.subcarriers == 0 {
            return Err(invalid("ofdm: subcarriers must be positive"));
        }
        if self.cp_len == 0 || self.cp_len > self.subcarriers {
            return Err(invalid(format!(
                "ofdm: cp_len must be in 1..={}, got {}",
                self.subcarriers, self.cp_len
            )));
        }
        if self.num_blocks == 0 {
            return Err(invalid("ofdm: num_blocks must be positive"));
        }
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            return Err(invalid("ofdm: bandwidth_hz must be positive"));
        }
        Ok(())
    }
}

/// Known symbols plus the serialized transmit signal.
#[derive(Debug, Clone, PartialEq)]
pub struct OfdmFrame {
    config: OfdmConfig,
    /// Row-major `num_blocks x subcarriers`.
    symbols: Vec<C64>,
    time_signal: SampleBuffer,
}

impl OfdmFrame {
    pub fn config(&self) -> &OfdmConfig {
        &self.config
    }

    pub fn symbols(&self, block: usize) -> &[C64] {
        let k = self.config.subcarriers;
        &self.symbols[block * k..(block + 1) * k]
    }

    pub fn time_signal(&self) -> &SampleBuffer {
        &self.time_signal
    }

    pub fn block(&self, i: usize) -> &[C64] {
        let l = self.config.block_len();
        &self.time_signal.samples()[i * l..(i + 1) * l]
    }

    /// Builds a frame from caller-supplied symbols (row-major, one row per block).
    pub fn from_symbols(config: OfdmConfig, symbols: Vec<C64>) -> Result<Self> {
        config.validate()?;
        let k = config.subcarriers;
        if symbols.len() != k * config.num_blocks {
            return Err(invalid(format!(
                "expected {} symbols ({} blocks x {k}), got {}",
                k * config.num_blocks,
                config.num_blocks,
                symbols.len()
            )));
        }
        let mut signal = Vec::with_capacity(config.total_len());
        for row in symbols.chunks_exact(k) {
            let d = idft(&Spectrum(row.to_vec()))?;
            signal.extend_from_slice(&d[k - config.cp_len..]);
            signal.extend_from_slice(&d);
        }
        let time_signal = SampleBuffer::new(signal, config.bandwidth_hz)?;
        Ok(Self { config, symbols, time_signal })
    }

    /// Symbol matrix as CSV, one row per block, entries printed as real values.
    pub fn symbols_csv(&self) -> String {
        let mut out = String::new();
        for row in self.symbols.chunks_exact(self.config.subcarriers) {
            let line: Vec<String> = row.iter().map(|s| format!("{}", s.re)).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

/// Reads the CSV written by [`OfdmFrame::symbols_csv`].
pub fn parse_symbols_csv(text: &str) -> Result<Vec<C64>> {
    let mut out = Vec::new();
    for (line_no, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Format(format!("symbols line {}: bad value {field:?}", line_no + 1))
            })?;
            out.push(C64::new(v, 0.0));
        }
    }
    Ok(out)
}

/// BPSK symbols in {+1, -1} from the seeded generator, then modulation.
pub fn generate_frame(config: &OfdmConfig) -> Result<OfdmFrame> {
    config.validate()?;
    let mut rng = seed::rng(config.seed);
    let symbols = (0..config.subcarriers * config.num_blocks)
        .map(|_| C64::new(if rng.random::<bool>() { 1.0 } else { -1.0 }, 0.0))
        .collect();
    OfdmFrame::from_symbols(config.clone(), symbols)
}

/// Splits a received stream into `num_blocks` rows of `block_len` samples.
/// Trailing samples beyond the frame are dropped.
pub fn parse_blocks(received: &SampleBuffer, config: &OfdmConfig) -> Result<Vec<Vec<C64>>> {
    config.validate()?;
    let need = config.total_len();
    if received.len() < need {
        return Err(Error::LengthMismatch {
            what: "received frame",
            required: need,
            actual: received.len(),
        });
    }
    Ok(received.samples()[..need]
        .chunks_exact(config.block_len())
        .map(<[C64]>::to_vec)
        .collect())
}

pub fn strip_cp<'a>(block: &'a [C64], config: &OfdmConfig) -> Result<&'a [C64]> {
    if block.len() != config.block_len() {
        return Err(invalid(format!(
            "block has {} samples, expected {}",
            block.len(),
            config.block_len()
        )));
    }
    Ok(&block[config.cp_len..])
}
