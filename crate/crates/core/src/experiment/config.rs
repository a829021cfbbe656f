//! Experiment configuration (TOML, versioned by `schema`).
//!
//! ```toml
//! schema = 1
//!
//! [constellation]
//! n_rings = 32
//! n_phases = [64, 128]
//! ptx_dbm = [-2.0, 0.0, 2.0]
//!
//! [channel]
//! mode = "cpan"
//! [channel.cpan]
//! mu_delta = 0.97
//! sigma_theta_sq = 0.01
//! snr_db = 20.0
//!
//! [training]
//! n_train_seqs = 4
//! n_test_seqs = 20
//! seq_len = 8192
//! seed = 1
//!
//! [sic]
//! stages = [1, 2]
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::channels::channel_models;
use crate::constellation::DEFAULT_TRUNCATION;
use crate::cpan::CpanParams;
use crate::error::{Error, Result};
use crate::fiber::LinkConfig;
use crate::registry::placements;
use crate::sic::BeliefMode;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub constellation: ConstellationBlock,
    pub channel: ChannelBlock,
    pub training: TrainingBlock,
    pub sic: SicBlock,
    #[serde(default)]
    pub output: OutputBlock,
    pub awgn: Option<AwgnBlock>,
    /// Worker threads; defaults to the number of CPUs.
    pub workers: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstellationBlock {
    pub n_rings: usize,
    pub n_phases: Vec<usize>,
    pub ptx_dbm: Vec<f64>,
    #[serde(default = "default_truncation")]
    pub truncation: f64,
    #[serde(default = "default_placement")]
    pub placement: String,
}

fn default_truncation() -> f64 {
    DEFAULT_TRUNCATION
}

fn default_placement() -> String {
    "uniform".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelBlock {
    /// Registered channel model name: `cpan` or `fiber`.
    pub mode: String,
    pub cpan: Option<CpanBlock>,
    pub fiber: Option<LinkConfig>,
}

/// CPAN surrogate parameters. The phase-noise variance may grow with launch
/// power as `sigma_theta_sq * (ptx / ref_ptx) ^ phase_noise_power_exponent`,
/// mimicking nonlinear interference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CpanBlock {
    pub mu_delta: f64,
    pub sigma_theta_sq: f64,
    /// Absolute noise power in W; exclusive with `snr_db`.
    pub sigma_n_sq: Option<f64>,
    /// Noise power relative to each launch power.
    pub snr_db: Option<f64>,
    #[serde(default)]
    pub phase_noise_power_exponent: f64,
    pub ref_ptx_dbm: Option<f64>,
    /// Fit the receiver parameters from training data instead of using
    /// the true ones.
    #[serde(default)]
    pub fit: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingBlock {
    pub n_train_seqs: usize,
    pub n_test_seqs: usize,
    pub seq_len: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SicBlock {
    pub stages: Vec<usize>,
    #[serde(default)]
    pub belief: BeliefMode,
    #[serde(default)]
    pub memoryless_baseline: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub directory: PathBuf,
    pub write_datasets: bool,
    pub write_posteriors: bool,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock {
            directory: PathBuf::from("results"),
            write_datasets: false,
            write_posteriors: false,
        }
    }
}

/// Memoryless AWGN sweep over the constellation block's ring and phase
/// counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AwgnBlock {
    pub snr_db: Vec<f64>,
    #[serde(default = "default_n_mc")]
    pub n_mc: usize,
    pub seed: u64,
}

fn default_n_mc() -> usize {
    1_000_000
}

/// Named training/test sizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// 4 training and 20 test sequences of 8192 symbols.
    Desk,
    /// 24 training and 120 test sequences of 8192 symbols.
    Paper,
}

impl Preset {
    pub fn sizes(self) -> (usize, usize, usize) {
        match self {
            Preset::Desk => (4, 20, 8192),
            Preset::Paper => (24, 120, 8192),
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Preset::Desk),
            "paper" => Ok(Preset::Paper),
            _ => Err(Error::Config(format!("unknown preset `{s}` (available: desk, paper)"))),
        }
    }
}

/// One validation finding, located in the source text when possible.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: Option<usize>,
    pub field: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}: {}", self.field, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// 1-based line of `key` inside `[section]` (dotted section names), if the
/// key appears literally in `text`.
fn locate(text: &str, field: &str) -> Option<usize> {
    let (section, key) = match field.rsplit_once('.') {
        Some((s, k)) => (s, k),
        None => ("", field),
    };
    let mut current = String::new();
    let mut section_line = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.split(']').next()) {
            current = name.trim().to_owned();
            if current == section {
                section_line = Some(i + 1);
            }
            continue;
        }
        if current == section {
            if let Some(rest) = line.strip_prefix(key) {
                if rest.trim_start().starts_with('=') {
                    return Some(i + 1);
                }
            }
        }
    }
    section_line
}

impl ExperimentConfig {
    /// Parses and fully validates a config. Errors list every finding.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_owned()))?;
        let diags = cfg.diagnostics(Some(text));
        if diags.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Config(
                diags.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n"),
            ))
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}:\n{msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let diags = self.diagnostics(None);
        if diags.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(
                diags.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n"),
            ))
        }
    }

    /// Structural and invariant checks. `text` is used to attach line numbers.
    pub fn diagnostics(&self, text: Option<&str>) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut push = |field: &str, message: String| {
            out.push(Diagnostic {
                line: text.and_then(|t| locate(t, field)),
                field: field.to_owned(),
                message,
            })
        };

        if self.schema != SCHEMA_VERSION {
            push("schema", format!("unsupported schema {} (expected {SCHEMA_VERSION})", self.schema));
        }

        let k = &self.constellation;
        if k.n_rings == 0 {
            push("constellation.n_rings", "must be at least 1".into());
        }
        if k.n_phases.is_empty() {
            push("constellation.n_phases", "sweep must not be empty".into());
        }
        if k.n_phases.contains(&0) {
            push("constellation.n_phases", "entries must be at least 1".into());
        }
        if k.ptx_dbm.is_empty() {
            push("constellation.ptx_dbm", "sweep must not be empty".into());
        }
        if k.ptx_dbm.iter().any(|p| !p.is_finite()) {
            push("constellation.ptx_dbm", "entries must be finite".into());
        }
        if !(k.truncation > 0.0 && k.truncation.is_finite()) {
            push("constellation.truncation", "must be positive".into());
        }
        if !placements().contains(&k.placement) {
            push(
                "constellation.placement",
                format!("unknown placement `{}` (available: {})", k.placement, placements().names().join(", ")),
            );
        }

        let models = channel_models();
        match models.get(&self.channel.mode) {
            Ok(model) => {
                for (field, message) in model.diagnostics(self) {
                    push(&field, message);
                }
            }
            Err(e) => push("channel.mode", e.to_string()),
        }

        let t = &self.training;
        if t.seq_len < 2 {
            push("training.seq_len", format!("must be at least 2, got {}", t.seq_len));
        }
        if t.n_test_seqs == 0 {
            push("training.n_test_seqs", "must be at least 1".into());
        }
        if self.sic.memoryless_baseline && t.n_train_seqs == 0 {
            push("training.n_train_seqs", "the memoryless baseline needs training data".into());
        }

        if self.sic.stages.is_empty() {
            push("sic.stages", "sweep must not be empty".into());
        }
        if self.sic.stages.contains(&0) {
            push("sic.stages", "stage counts must be at least 1".into());
        }
        if let Some(a) = &self.awgn {
            if a.snr_db.is_empty() || a.snr_db.iter().any(|s| !s.is_finite()) {
                push("awgn.snr_db", "sweep must be nonempty and finite".into());
            }
            if a.n_mc < 10_000 {
                push("awgn.n_mc", format!("must be at least 10000, got {}", a.n_mc));
            }
        }
        if self.workers == Some(0) {
            push("workers", "must be at least 1".into());
        }
        out
    }

    /// Overrides the training sizes (seed is kept).
    pub fn apply_preset(&mut self, preset: Preset) {
        let (train, test, len) = preset.sizes();
        self.training.n_train_seqs = train;
        self.training.n_test_seqs = test;
        self.training.seq_len = len;
    }

    /// Hex SHA-256 prefix of the canonical serialization of everything that
    /// affects results (output location and worker count excluded).
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output = OutputBlock::default();
        canonical.workers = None;
        let text = toml::to_string(&canonical).expect("config is serializable");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

impl CpanBlock {
    /// True channel parameters at launch power `ptx_w`.
    pub fn params_at(&self, ptx_w: f64) -> Result<CpanParams> {
        let sigma_theta_sq = match self.ref_ptx_dbm {
            Some(r) if self.phase_noise_power_exponent != 0.0 => {
                self.sigma_theta_sq * (ptx_w / dbm_to_watts(r)).powf(self.phase_noise_power_exponent)
            }
            _ => self.sigma_theta_sq,
        };
        let sigma_n_sq = match (self.sigma_n_sq, self.snr_db) {
            (Some(s), None) => s,
            (None, Some(snr)) => ptx_w / 10f64.powf(snr / 10.0),
            _ => return Err(Error::Config("exactly one of sigma_n_sq and snr_db must be set".into())),
        };
        CpanParams::from_steady_state(self.mu_delta, sigma_theta_sq, sigma_n_sq)
    }

    pub(crate) fn diagnostics(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let f = |k: &str| format!("channel.cpan.{k}");
        if !(self.mu_delta.abs() < 1.0) {
            out.push((f("mu_delta"), "must satisfy |mu_delta| < 1".into()));
        }
        if !(self.sigma_theta_sq >= 0.0 && self.sigma_theta_sq.is_finite()) {
            out.push((f("sigma_theta_sq"), "must be nonnegative".into()));
        }
        match (self.sigma_n_sq, self.snr_db) {
            (Some(s), None) if !(s > 0.0 && s.is_finite()) => {
                out.push((f("sigma_n_sq"), "must be positive".into()))
            }
            (None, Some(s)) if !s.is_finite() => out.push((f("snr_db"), "must be finite".into())),
            (Some(_), Some(_)) | (None, None) => out.push((
                "channel.cpan".into(),
                "exactly one of sigma_n_sq and snr_db must be set".into(),
            )),
            _ => {}
        }
        if !self.phase_noise_power_exponent.is_finite() {
            out.push((f("phase_noise_power_exponent"), "must be finite".into()));
        }
        if self.phase_noise_power_exponent != 0.0 && self.ref_ptx_dbm.is_none() {
            out.push((f("ref_ptx_dbm"), "required when phase_noise_power_exponent is set".into()));
        }
        out
    }
}
