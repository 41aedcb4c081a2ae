//! Pipeline configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sichan::channel::ChannelSpec;
use sichan::io::read_json;
use sichan::{Error, OfdmConfig, Result, StatsOptions, TdOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Fd,
    Td,
    Both,
}

impl Method {
    pub fn fd(self) -> bool {
        matches!(self, Method::Fd | Method::Both)
    }

    pub fn td(self) -> bool {
        matches!(self, Method::Td | Method::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    pub method: Method,
    #[serde(default = "TdOptions::reference")]
    pub td: TdOptions,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self { method: Method::Both, td: TdOptions::reference() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CancelMode {
    Off,
    Full,
    Paths,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CancelConfig {
    pub mode: CancelMode,
    /// Delay bins kept in `paths` mode.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub delays: Vec<usize>,
    /// First evaluated sample; defaults to `M + L_win` of the TD options.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_start: Option<usize>,
}

impl Default for CancelConfig {
    fn default() -> Self {
        Self { mode: CancelMode::Full, delays: Vec::new(), eval_start: None }
    }
}

/// A scenario given inline or as a path to a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChannelRef {
    File(PathBuf),
    Inline(ChannelSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "OfdmConfig::reference")]
    pub ofdm: OfdmConfig,
    pub channel: ChannelRef,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub stats: StatsOptions,
    #[serde(default)]
    pub cancel: CancelConfig,
    #[serde(default = "default_output_dir", skip_serializing)]
    pub output_dir: PathBuf,
    #[serde(default = "default_seed")]
    pub master_seed: u64,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("sichan-out")
}

fn default_seed() -> u64 {
    1
}

impl PipelineConfig {
    /// Reference OFDM frame and default stages around `channel`.
    pub fn for_scenario(channel: ChannelSpec) -> Self {
        Self {
            ofdm: OfdmConfig::reference(),
            channel: ChannelRef::Inline(channel),
            estimator: EstimatorConfig::default(),
            stats: StatsOptions::default(),
            cancel: CancelConfig::default(),
            output_dir: default_output_dir(),
            master_seed: default_seed(),
        }
    }

    /// Reads a pipeline config, or a bare scenario file wrapped with
    /// defaults. Channel file paths are resolved against the config's
    /// directory and inlined.
    pub fn load(path: &Path) -> Result<Self> {
        let value: serde_json::Value = read_json(path)?;
        let mut config = if value.get("paths").is_some() && value.get("channel").is_none() {
            Self::for_scenario(serde_json::from_value(value)?)
        } else {
            serde_json::from_value(value)?
        };
        if let ChannelRef::File(file) = &config.channel {
            let full = path.parent().unwrap_or(Path::new(".")).join(file);
            let spec: ChannelSpec = read_json(&full)
                .map_err(|e| Error::NotFound(format!("scenario {}: {e}", full.display())))?;
            config.channel = ChannelRef::Inline(spec);
        }
        Ok(config)
    }

    pub fn channel_spec(&self) -> Result<&ChannelSpec> {
        match &self.channel {
            ChannelRef::Inline(spec) => Ok(spec),
            ChannelRef::File(p) => Err(Error::InvalidArgument(format!(
                "scenario file {} was not resolved; load the config with PipelineConfig::load",
                p.display()
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.ofdm.validate()?;
        self.channel_spec()?.validate()?;
        if self.estimator.method.td() {
            self.estimator.td.validate()?;
        }
        if self.cancel.mode == CancelMode::Paths && self.cancel.delays.is_empty() {
            return Err(Error::InvalidArgument("cancel mode \"paths\" needs at least one delay".into()));
        }
        Ok(())
    }
}
