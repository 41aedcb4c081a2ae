use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;
use sichan::channel::ChannelSpec;
use sichan_cli::pipeline::{
    load_fd, load_frame, load_received, load_td, load_truth, load_tx, stage_cancel, stage_estimate_fd,
    stage_estimate_td, stage_generate, stage_simulate, stage_stats, Artifacts, StageContext, Tracks,
};
use sichan_cli::{run_pipeline, Layout, Method, PipelineConfig, StageError};

/// Self-interference channel simulation, estimation and statistics.
#[derive(Debug, Parser)]
#[command(name = "sichan", version)]
struct Cli {
    /// Pipeline config, or a bare scenario file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// TD output stride in samples; overrides the config.
    #[arg(long, global = true)]
    stride: Option<usize>,
    /// Estimators to run; overrides the config.
    #[arg(long, global = true, value_enum)]
    estimator: Option<Method>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "SICHAN_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the OFDM sounding frame.
    Generate,
    /// Pass the frame through the scenario channel.
    Simulate,
    /// Frequency-domain SCIR estimate from the received signal.
    EstimateFd,
    /// Time-domain sliding-window SCIR estimate.
    EstimateTd,
    /// PDP, ACF, coherence time and accumulated power for each track.
    Stats,
    /// Reconstruct and subtract the SI for each track.
    Cancel,
    /// All stages in order.
    Pipeline,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, StageError> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path).stage("config")?,
        None => PipelineConfig::for_scenario(ChannelSpec::lake_hyd1()),
    };
    if let Some(seed) = cli.seed {
        config.master_seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    if let Some(stride) = cli.stride {
        config.estimator.td.stride = stride;
    }
    if let Some(method) = cli.estimator {
        config.estimator.method = method;
    }
    config.validate().stage("config")?;
    Ok(config)
}

fn run(cli: &Cli) -> Result<(), StageError> {
    let config = load_config(cli)?;
    if let Command::Pipeline = cli.command {
        let outcome = run_pipeline(&config)?;
        for (source, report) in &outcome.stats {
            let sep = 10.0 * (report.pdp[report.paths[0]] / report.pdp[*report.paths.last().unwrap()]).log10();
            println!(
                "{:>5}: paths {:?}, peak separation {:.2} dB, direct fraction {:.3}",
                source.label(),
                report.paths,
                sep,
                report.accumulated.fraction_through(report.paths[0])
            );
            for c in &report.cot {
                let tag = if c.censored { " (censored)" } else { "" };
                println!("       path {} COT {:.1} ms{tag}", c.path_delay, c.cot_seconds(report.bandwidth_hz) * 1e3);
            }
        }
        for (source, report) in &outcome.cancel {
            println!("{:>5}: cancellation depth {:.2} dB", source.label(), report.depth_db);
        }
        println!("{} files in {}", outcome.manifest.files.len(), config.output_dir.join("manifest.json").display());
        return Ok(());
    }

    std::fs::create_dir_all(&config.output_dir).map_err(sichan::Error::from).stage("config")?;
    let layout = Layout::new(&config.output_dir);
    let mut out = Artifacts::new(layout.clone());
    match cli.command {
        Command::Generate => {
            stage_generate(&config, &mut out).stage("generate")?;
        }
        Command::Simulate => {
            let frame = load_frame(&config, &layout).stage("simulate")?;
            stage_simulate(&config, &frame, &mut out).stage("simulate")?;
        }
        Command::EstimateFd => {
            let frame = load_frame(&config, &layout).stage("estimate-fd")?;
            let received = load_received(&layout).stage("estimate-fd")?;
            stage_estimate_fd(&config, &frame, &received, &mut out).stage("estimate-fd")?;
        }
        Command::EstimateTd => {
            let tx = load_tx(&layout).stage("estimate-td")?;
            let received = load_received(&layout).stage("estimate-td")?;
            stage_estimate_td(&config, &tx, &received, &mut out).stage("estimate-td")?;
        }
        Command::Stats | Command::Cancel => {
            let stage = if let Command::Stats = cli.command { "stats" } else { "cancel" };
            let (truth, meta) = load_truth(&layout).stage(stage)?;
            let method = config.estimator.method;
            let fd = method.fd().then(|| load_fd(&layout)).transpose().stage(stage)?;
            let td = method.td().then(|| load_td(&layout)).transpose().stage(stage)?;
            let tracks = Tracks { truth: Some(&truth), fd: fd.as_ref(), td: td.as_ref() };
            if stage == "stats" {
                for (source, report) in stage_stats(&config, &tracks, &mut out).stage(stage)? {
                    let cots: Vec<String> = report.cot.iter().map(|c| format!("{:.1}", c.cot_seconds(report.bandwidth_hz) * 1e3)).collect();
                    println!("{:>5}: paths {:?}, COT ms {:?}", source.label(), report.paths, cots);
                }
            } else {
                let tx = load_tx(&layout).stage(stage)?;
                let received = load_received(&layout).stage(stage)?;
                for (source, report) in stage_cancel(&config, &tx, &received, Some(meta.noise_power), &tracks, &mut out).stage(stage)? {
                    println!("{:>5}: cancellation depth {:.2} dB", source.label(), report.depth_db);
                }
            }
        }
        Command::Pipeline => unreachable!(),
    }
    out.finish().stage("manifest")?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            error!("thread pool: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::FAILURE
        }
    }
}
