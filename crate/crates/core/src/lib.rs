//! Simulation, estimation and statistics for time-varying self-interference
//! channels of full-duplex underwater acoustic links.
//!
//! A typical run generates an OFDM sounding frame ([`ofdm`]), passes it
//! through a tapped-delay-line channel ([`channel`]), estimates the channel
//! impulse response per block ([`fd`]) or per sliding window ([`td`]),
//! characterizes the estimate ([`stats`], [`report`]) and measures how much
//! SI a reconstruction removes ([`cancel`]).

pub mod cancel;
pub mod channel;
pub mod error;
pub mod fd;
pub mod io;
pub mod matrix;
pub mod ofdm;
pub mod report;
pub mod seed;
pub mod signal;
pub mod stats;
pub mod td;

pub use cancel::{cancel, reconstruct_si, CancellationReport};
pub use channel::{realize_scir, simulate, ChannelSpec, Fading, Impairments, PathSpec, Scir, Simulation};
pub use error::{Error, Result};
pub use fd::{estimate_fd, FdEstimate};
pub use matrix::TapMatrix;
pub use ofdm::{generate_frame, OfdmConfig, OfdmFrame};
pub use report::{analyze, plot_csv, PlotSeries, StatReport, StatsOptions};
pub use signal::{SampleBuffer, Spectrum, C64};
pub use stats::{Track, TrackSource};
pub use td::{estimate_td, TdEstimate, TdOptions};
