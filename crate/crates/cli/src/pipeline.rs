//! Pipeline stages and the on-disk layout of a run.
//!
//! ```text
//! <out>/config.json              resolved config (seeds, inline scenario)
//! <out>/frame/symbols.csv        BPSK symbols, one row per block
//! <out>/frame/tx.cf64            transmitted signal (+ .json sidecar)
//! <out>/truth/scir.cf64          simulated SCIR (+ .json sidecar)
//! <out>/rx/received.cf64         received signal (+ .json sidecar)
//! <out>/estimates/{fd,td}.cf64   SCIR estimates (+ .json sidecar)
//! <out>/stats/<src>.json         StatReport per track
//! <out>/stats/<src>/*.csv        plot tables
//! <out>/cancel/<src>.json        CancellationReport per track
//! <out>/cancel/<src>_residual.cf64
//! <out>/manifest.json            SHA-256 of every file above
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sichan::cancel::{cancel, default_eval_span, mask_paths, reconstruct_si};
use sichan::channel::{compensate, simulate, ChannelSpec, Simulation};
use sichan::fd::FdMeta;
use sichan::io::{read_json, read_matrix, read_samples, sidecar_path, write_atomic, write_json, write_matrix, write_samples};
use sichan::ofdm::parse_symbols_csv;
use sichan::seed::{derive_seed, CHANNEL, NOISE, SYMBOLS};
use sichan::td::TdMeta;
use sichan::{
    analyze, estimate_fd, estimate_td, generate_frame, plot_csv, CancellationReport, Error, FdEstimate, OfdmFrame,
    PlotSeries, Result, SampleBuffer, Scir, StatReport, TdEstimate, TdOptions, TrackSource,
};

use crate::config::{CancelMode, PipelineConfig};

/// A module error tagged with the pipeline stage that raised it.
#[derive(Debug, thiserror::Error)]
#[error("stage {stage}: {source}")]
pub struct StageError {
    pub stage: &'static str,
    #[source]
    pub source: Error,
}

pub trait StageContext<T> {
    fn stage(self, stage: &'static str) -> std::result::Result<T, StageError>;
}

impl<T> StageContext<T> for Result<T> {
    fn stage(self, stage: &'static str) -> std::result::Result<T, StageError> {
        self.map_err(|source| StageError { stage, source })
    }
}

/// Per-stage seeds fanned out from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub symbols: u64,
    pub channel: u64,
    pub noise: u64,
}

impl Seeds {
    pub fn from_master(master: u64) -> Self {
        Self {
            symbols: derive_seed(master, SYMBOLS),
            channel: derive_seed(master, CHANNEL),
            noise: derive_seed(master, NOISE),
        }
    }
}

/// Paths inside an output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("config.json")
    }

    pub fn symbols(&self) -> PathBuf {
        self.root.join("frame/symbols.csv")
    }

    pub fn tx(&self) -> PathBuf {
        self.root.join("frame/tx.cf64")
    }

    pub fn truth(&self) -> PathBuf {
        self.root.join("truth/scir.cf64")
    }

    pub fn received(&self) -> PathBuf {
        self.root.join("rx/received.cf64")
    }

    pub fn estimate(&self, source: TrackSource) -> PathBuf {
        self.root.join(format!("estimates/{}.cf64", source.label()))
    }

    pub fn stats(&self, source: TrackSource) -> PathBuf {
        self.root.join(format!("stats/{}.json", source.label()))
    }

    pub fn plot(&self, source: TrackSource, series: PlotSeries) -> PathBuf {
        self.root.join(format!("stats/{}/{}.csv", source.label(), series.file_stem()))
    }

    pub fn cancel_report(&self, source: TrackSource) -> PathBuf {
        self.root.join(format!("cancel/{}.json", source.label()))
    }

    pub fn residual(&self, source: TrackSource) -> PathBuf {
        self.root.join(format!("cancel/{}_residual.cf64", source.label()))
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub sha256: String,
    pub bytes: u64,
}

/// Content hashes keyed by path relative to the output directory.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub files: BTreeMap<String, ManifestEntry>,
}

/// Files written by one invocation, folded into the manifest at the end.
#[derive(Debug)]
pub struct Artifacts {
    layout: Layout,
    written: Vec<PathBuf>,
}

impl Artifacts {
    pub fn new(layout: Layout) -> Self {
        Self { layout, written: Vec::new() }
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    fn record(&mut self, path: PathBuf) {
        if !self.written.contains(&path) {
            self.written.push(path);
        }
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, path: PathBuf, value: &T) -> Result<()> {
        write_json(&path, value)?;
        self.record(path);
        Ok(())
    }

    pub fn text(&mut self, path: PathBuf, text: &str) -> Result<()> {
        write_atomic(&path, text.as_bytes())?;
        self.record(path);
        Ok(())
    }

    pub fn samples(&mut self, path: PathBuf, buffer: &SampleBuffer, description: &str) -> Result<()> {
        write_samples(&path, buffer, description)?;
        self.record(sidecar_path(&path));
        self.record(path);
        Ok(())
    }

    pub fn matrix<M: Serialize>(&mut self, path: PathBuf, matrix: &sichan::TapMatrix, meta: &M) -> Result<()> {
        write_matrix(&path, matrix, meta)?;
        self.record(sidecar_path(&path));
        self.record(path);
        Ok(())
    }

    /// Hashes the written files and merges them into `manifest.json`.
    pub fn finish(self) -> Result<Manifest> {
        let path = self.layout.manifest();
        let mut manifest: Manifest = if path.exists() { read_json(&path)? } else { Manifest::default() };
        for file in &self.written {
            let bytes = fs::read(file)?;
            let rel = file
                .strip_prefix(&self.layout.root)
                .map_err(|_| Error::InvalidArgument(format!("{} is outside the output directory", file.display())))?;
            let key = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
            manifest.files.insert(
                key,
                ManifestEntry { sha256: hex::encode(Sha256::digest(&bytes)), bytes: bytes.len() as u64 },
            );
        }
        write_json(&path, &manifest)?;
        Ok(manifest)
    }
}

/// Config as recorded in the output: scenario inlined and seeds resolved.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub config: PipelineConfig,
    pub seeds: Seeds,
}

/// OFDM config and scenario with the fanned-out seeds applied.
pub fn with_seeds(config: &PipelineConfig) -> Result<(sichan::OfdmConfig, ChannelSpec, Seeds)> {
    let seeds = Seeds::from_master(config.master_seed);
    let ofdm = sichan::OfdmConfig { seed: seeds.symbols, ..config.ofdm.clone() };
    let spec = ChannelSpec { seed: seeds.channel, ..config.channel_spec()?.clone() };
    Ok((ofdm, spec, seeds))
}

pub fn stage_generate(config: &PipelineConfig, out: &mut Artifacts) -> Result<OfdmFrame> {
    let (ofdm, _, seeds) = with_seeds(config)?;
    let frame = generate_frame(&ofdm)?;
    let layout = out.layout().clone();
    out.json(layout.config(), &ResolvedConfig { config: config.clone(), seeds })?;
    out.text(layout.symbols(), &frame.symbols_csv())?;
    out.samples(layout.tx(), frame.time_signal(), "transmitted OFDM frame")?;
    info!("generate: {} blocks, {} samples", ofdm.num_blocks, frame.time_signal().len());
    Ok(frame)
}

pub fn load_frame(config: &PipelineConfig, layout: &Layout) -> Result<OfdmFrame> {
    let (ofdm, _, _) = with_seeds(config)?;
    let text = fs::read_to_string(layout.symbols())
        .map_err(|e| Error::NotFound(format!("{}: {e}", layout.symbols().display())))?;
    OfdmFrame::from_symbols(ofdm, parse_symbols_csv(&text)?)
}

/// SCIR sidecar metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthMeta {
    pub channel_len: usize,
    pub geotime_stride: usize,
    pub num_samples: usize,
    /// Absolute noise power added to the SI.
    pub noise_power: f64,
    pub scenario: ChannelSpec,
}

pub fn stage_simulate(config: &PipelineConfig, frame: &OfdmFrame, out: &mut Artifacts) -> Result<Simulation> {
    let (_, spec, seeds) = with_seeds(config)?;
    let x = frame.time_signal();
    let sim = simulate(x, &spec, seeds.noise)?;
    let layout = out.layout().clone();
    let meta = TruthMeta {
        channel_len: sim.scir.channel_len(),
        geotime_stride: sim.scir.geotime_stride,
        num_samples: x.len(),
        noise_power: sim.noise_power,
        scenario: spec,
    };
    out.matrix(layout.truth(), &sim.scir.taps, &meta)?;
    out.samples(layout.received(), &sim.received, "received signal: SI plus noise")?;
    info!("simulate: {} paths, noise power {:.3e}", meta.scenario.paths.len(), sim.noise_power);
    Ok(sim)
}

pub fn load_truth(layout: &Layout) -> Result<(Scir, TruthMeta)> {
    let (taps, meta): (_, TruthMeta) = read_matrix(&layout.truth())?;
    Ok((Scir { taps, geotime_stride: meta.geotime_stride }, meta))
}

pub fn load_received(layout: &Layout) -> Result<SampleBuffer> {
    Ok(read_samples(&layout.received())?.0)
}

pub fn load_tx(layout: &Layout) -> Result<SampleBuffer> {
    Ok(read_samples(&layout.tx())?.0)
}

/// Received signal with the scenario's known CFO/SRO removed.
pub fn compensated(config: &PipelineConfig, received: &SampleBuffer) -> Result<SampleBuffer> {
    compensate(received, config.channel_spec()?.impairments)
}

pub fn stage_estimate_fd(
    config: &PipelineConfig,
    frame: &OfdmFrame,
    received: &SampleBuffer,
    out: &mut Artifacts,
) -> Result<FdEstimate> {
    let est = estimate_fd(&compensated(config, received)?, frame)?;
    let path = out.layout().estimate(TrackSource::Fd);
    out.matrix(path, &est.taps, &est.meta(config.ofdm.bandwidth_hz))?;
    info!("estimate-fd: {} x {}", est.taps.rows(), est.taps.cols());
    Ok(est)
}

pub fn load_fd(layout: &Layout) -> Result<FdEstimate> {
    let (taps, meta): (_, FdMeta) = read_matrix(&layout.estimate(TrackSource::Fd))?;
    Ok(FdEstimate { taps, block_len: meta.block_len })
}

pub fn stage_estimate_td(
    config: &PipelineConfig,
    tx: &SampleBuffer,
    received: &SampleBuffer,
    out: &mut Artifacts,
) -> Result<TdEstimate> {
    let est = estimate_td(&compensated(config, received)?, tx, &config.estimator.td)?;
    let path = out.layout().estimate(TrackSource::Td);
    out.matrix(path, &est.taps, &est.meta(config.ofdm.bandwidth_hz))?;
    info!(
        "estimate-td: {} x {}, {} singular windows",
        est.taps.rows(),
        est.taps.cols(),
        est.singular_columns.len()
    );
    Ok(est)
}

pub fn load_td(layout: &Layout) -> Result<TdEstimate> {
    let (taps, meta): (_, TdMeta) = read_matrix(&layout.estimate(TrackSource::Td))?;
    let options = TdOptions {
        window_len: meta.window_len,
        channel_len: meta.channel_len,
        stride: meta.stride,
        ridge: meta.ridge,
        refresh_interval: meta.refresh_interval,
    };
    Ok(TdEstimate { taps, options, singular_columns: meta.singular_columns })
}

/// Every track the config asks for, with its native column step.
pub struct Tracks<'a> {
    pub truth: Option<&'a Scir>,
    pub fd: Option<&'a FdEstimate>,
    pub td: Option<&'a TdEstimate>,
}

impl Tracks<'_> {
    fn each(&self) -> Vec<(TrackSource, sichan::Track<'_>, &sichan::TapMatrix, usize)> {
        let mut v = Vec::new();
        if let Some(s) = self.truth {
            v.push((TrackSource::Truth, s.track(), &s.taps, s.geotime_stride));
        }
        if let Some(f) = self.fd {
            v.push((TrackSource::Fd, f.track(), &f.taps, f.block_len));
        }
        if let Some(t) = self.td {
            v.push((TrackSource::Td, t.track(), &t.taps, t.options.stride));
        }
        v
    }
}

/// Writes a CSV table for one series of a report.
pub fn export_plot_data(report: &StatReport, series: PlotSeries, path: &Path) -> Result<()> {
    write_atomic(path, plot_csv(report, series)?.as_bytes())
}

pub fn stage_stats(
    config: &PipelineConfig,
    tracks: &Tracks<'_>,
    out: &mut Artifacts,
) -> Result<Vec<(TrackSource, StatReport)>> {
    let mut reports = Vec::new();
    for (source, track, _, _) in tracks.each() {
        let report = analyze(&track, &config.stats, config.ofdm.bandwidth_hz)?;
        let layout = out.layout().clone();
        out.json(layout.stats(source), &report)?;
        let mut series = vec![PlotSeries::Pdp, PlotSeries::Accumulated];
        for &m in &report.paths {
            series.push(PlotSeries::Acf(m));
            series.push(PlotSeries::TapTrack(m));
        }
        for s in series {
            out.text(layout.plot(source, s), &plot_csv(&report, s)?)?;
        }
        for c in &report.cot {
            info!(
                "stats {}: path {} COT {:.1} ms{}",
                source.label(),
                c.path_delay,
                c.cot_seconds(config.ofdm.bandwidth_hz) * 1e3,
                if c.censored { " (censored)" } else { "" }
            );
        }
        reports.push((source, report));
    }
    Ok(reports)
}

pub fn stage_cancel(
    config: &PipelineConfig,
    tx: &SampleBuffer,
    received: &SampleBuffer,
    noise_power: Option<f64>,
    tracks: &Tracks<'_>,
    out: &mut Artifacts,
) -> Result<Vec<(TrackSource, CancellationReport)>> {
    if config.cancel.mode == CancelMode::Off {
        return Ok(Vec::new());
    }
    let y = compensated(config, received)?;
    let td = &config.estimator.td;
    let mut span = default_eval_span(y.len(), td.channel_len, td.window_len);
    if let Some(start) = config.cancel.eval_start {
        span.start = start.min(y.len());
    }
    let mut reports = Vec::new();
    for (source, _, taps, stride) in tracks.each() {
        let masked;
        let taps = match config.cancel.mode {
            CancelMode::Paths => {
                masked = mask_paths(taps, &config.cancel.delays)?;
                &masked
            }
            _ => taps,
        };
        let s_hat = reconstruct_si(tx, taps, stride)?;
        let (residual, report) = cancel(&y, &s_hat, noise_power, span.clone())?;
        let layout = out.layout().clone();
        out.json(layout.cancel_report(source), &report)?;
        out.samples(layout.residual(source), &residual, "residual after SI cancellation")?;
        info!("cancel {}: depth {:.2} dB", source.label(), report.depth_db);
        reports.push((source, report));
    }
    Ok(reports)
}

#[derive(Debug)]
pub struct PipelineOutcome {
    pub stats: Vec<(TrackSource, StatReport)>,
    pub cancel: Vec<(TrackSource, CancellationReport)>,
    pub manifest: Manifest,
}

/// generate, simulate, estimate, stats, cancel; every artifact lands in
/// `config.output_dir` and in its manifest.
pub fn run_pipeline(config: &PipelineConfig) -> std::result::Result<PipelineOutcome, StageError> {
    config.validate().stage("config")?;
    fs::create_dir_all(&config.output_dir).map_err(Error::from).stage("config")?;
    let layout = Layout::new(&config.output_dir);
    // start from an empty manifest: this run rewrites everything
    let _ = fs::remove_file(layout.manifest());
    let mut out = Artifacts::new(layout);

    let frame = stage_generate(config, &mut out).stage("generate")?;
    let sim = stage_simulate(config, &frame, &mut out).stage("simulate")?;
    let method = config.estimator.method;
    let fd = if method.fd() {
        Some(stage_estimate_fd(config, &frame, &sim.received, &mut out).stage("estimate-fd")?)
    } else {
        None
    };
    let td = if method.td() {
        Some(stage_estimate_td(config, frame.time_signal(), &sim.received, &mut out).stage("estimate-td")?)
    } else {
        None
    };
    let tracks = Tracks { truth: Some(&sim.scir), fd: fd.as_ref(), td: td.as_ref() };
    let stats = stage_stats(config, &tracks, &mut out).stage("stats")?;
    let cancel = stage_cancel(config, frame.time_signal(), &sim.received, Some(sim.noise_power), &tracks, &mut out)
        .stage("cancel")?;
    let manifest = out.finish().stage("manifest")?;
    Ok(PipelineOutcome { stats, cancel, manifest })
}
