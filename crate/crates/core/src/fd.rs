//! Per-block frequency-domain SCIR estimation.
//!
//! For block `i`: drop the CP, take the DFT, divide bin-wise by the known
//! symbols and transform back. Column `i` of the result is the estimate at
//! geotime `i * block_len`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::TapMatrix;
use crate::ofdm::{parse_blocks, strip_cp, OfdmFrame};
use crate::signal::{dft, idft, SampleBuffer, Spectrum};

const MIN_SYMBOL_MAGNITUDE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct FdEstimate {
    /// `subcarriers x num_blocks`.
    pub taps: TapMatrix,
    pub block_len: usize,
}

impl FdEstimate {
    pub fn geotime_of_block(&self, i: usize) -> usize {
        i * self.block_len
    }

    pub fn meta(&self, bandwidth_hz: f64) -> FdMeta {
        FdMeta {
            subcarriers: self.taps.rows(),
            num_blocks: self.taps.cols(),
            block_len: self.block_len,
            bandwidth_hz,
            geotime: "column i is block i, geotime i * block_len (block start)".into(),
        }
    }
}

/// Sidecar metadata for an exported FD estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdMeta {
    pub subcarriers: usize,
    pub num_blocks: usize,
    pub block_len: usize,
    pub bandwidth_hz: f64,
    pub geotime: String,
}

pub fn estimate_fd(received: &SampleBuffer, frame: &OfdmFrame) -> Result<FdEstimate> {
    let config = frame.config();
    let blocks = parse_blocks(received, config)?;
    let k = config.subcarriers;
    let columns: Vec<Vec<_>> = blocks
        .par_iter()
        .enumerate()
        .map(|(i, block)| {
            let data = strip_cp(block, config)?;
            let received_bins = dft(data)?;
            let known = frame.symbols(i);
            let mut ratio = Vec::with_capacity(k);
            for (bin, (r, d)) in received_bins.bins().iter().zip(known).enumerate() {
                let magnitude = d.norm();
                if magnitude < MIN_SYMBOL_MAGNITUDE {
                    return Err(Error::DegenerateSymbol { block: i, bin, magnitude });
                }
                ratio.push(r / d);
            }
            idft(&Spectrum(ratio))
        })
        .collect::<Result<_>>()?;
    let data = columns.into_iter().flatten().collect();
    Ok(FdEstimate {
        taps: TapMatrix::from_columns(k, data)?,
        block_len: config.block_len(),
    })
}
