//! Experiment configuration. Every key has a default, so an empty file is a
//! valid configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "amp-soft")]
    AmpSoft,
    #[serde(rename = "amp-cauchy")]
    AmpCauchy,
    /// Unfolded network with a frozen random sampling matrix.
    #[serde(rename = "unfolded")]
    Unfolded,
    /// Unfolded network with a trainable sampling matrix and deblocking stages.
    #[serde(rename = "unfolded-trainedA")]
    UnfoldedTrainedA,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::AmpSoft,
        Method::AmpCauchy,
        Method::Unfolded,
        Method::UnfoldedTrainedA,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Method::AmpSoft => "amp-soft",
            Method::AmpCauchy => "amp-cauchy",
            Method::Unfolded => "unfolded",
            Method::UnfoldedTrainedA => "unfolded-trainedA",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.label() == s)
    }

    pub fn is_unfolded(self) -> bool {
        matches!(self, Method::Unfolded | Method::UnfoldedTrainedA)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingKind {
    /// Block matrix with orthonormalised Gaussian rows.
    Gaussian,
    Spiral,
    Random,
    Raster,
}

impl SamplingKind {
    pub fn label(self) -> &'static str {
        match self {
            SamplingKind::Gaussian => "gaussian",
            SamplingKind::Spiral => "spiral",
            SamplingKind::Random => "random",
            SamplingKind::Raster => "raster",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub methods: Vec<Method>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub freq_label: String,
    /// Fill the `seconds` column with wall-clock times (non-deterministic).
    pub record_timing: bool,
    /// Reconstruct blocks concurrently.
    pub parallel: bool,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            out_dir: PathBuf::from("qamcs-out"),
            seed: 0,
            freq_label: "500MHz".into(),
            record_timing: false,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomSection {
    pub rows: usize,
    pub cols: usize,
    pub train_count: usize,
    pub test_count: usize,
    pub n_inclusions: usize,
    pub value_min: f64,
    pub value_max: f64,
}

impl Default for PhantomSection {
    fn default() -> Self {
        Self {
            rows: 64,
            cols: 64,
            train_count: 24,
            test_count: 8,
            n_inclusions: 4,
            value_min: 1560.0,
            value_max: 1650.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquisitionSection {
    /// Pass phantoms through the simulated raster scan to obtain the
    /// reference maps; otherwise the phantoms are used directly.
    pub enabled: bool,
    pub f0: f64,
    pub fractional_bandwidth: f64,
    pub fs: f64,
    pub duration: f64,
    pub a1: f64,
    pub a2: f64,
    pub t1: f64,
    pub attenuation: f64,
    pub noise_std: f64,
    /// Also write the raw RF cube of the first phantom.
    pub export_rf: bool,
}

impl Default for AcquisitionSection {
    fn default() -> Self {
        let d = qamcs::qamsim::AcquisitionSettings::default();
        Self {
            enabled: false,
            f0: d.f0,
            fractional_bandwidth: d.fractional_bandwidth,
            fs: d.fs,
            duration: d.duration,
            a1: d.a1,
            a2: d.a2,
            t1: d.t1,
            attenuation: d.attenuation,
            noise_std: d.noise_std,
            export_rf: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingSection {
    pub kind: SamplingKind,
    pub ratio: f64,
    pub block_size: usize,
    pub noise_std: f64,
}

impl Default for SamplingSection {
    fn default() -> Self {
        Self {
            kind: SamplingKind::Gaussian,
            ratio: 0.25,
            block_size: 16,
            noise_std: 0.0,
        }
    }
}

/// Affine map applied before reconstruction, `(v - offset) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormalizeSection {
    pub offset: f64,
    pub scale: f64,
}

impl Default for NormalizeSection {
    fn default() -> Self {
        Self {
            offset: 1500.0,
            scale: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmpSection {
    pub max_iters: usize,
    /// Threshold multiplier on the residual noise estimate.
    pub tau: f64,
    pub levels: usize,
    pub onsager: bool,
    pub tol: f64,
}

impl Default for AmpSection {
    fn default() -> Self {
        Self {
            max_iters: 30,
            tau: 1.0,
            levels: 2,
            onsager: false,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnfoldedSection {
    pub iterations: usize,
    pub channels: usize,
}

impl Default for UnfoldedSection {
    fn default() -> Self {
        Self {
            iterations: 6,
            channels: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            batch_size: 32,
            learning_rate: 1e-4,
            epochs: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub phantom: PhantomSection,
    pub acquisition: AcquisitionSection,
    pub sampling: SamplingSection,
    pub normalize: NormalizeSection,
    pub amp: AmpSection,
    pub unfolded: UnfoldedSection,
    pub train: TrainSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let config: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CliError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serialisable")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        let s = &self.sampling;
        if !(s.ratio > 0.0 && s.ratio <= 1.0) {
            return bad(format!("sampling.ratio {} outside (0, 1]", s.ratio));
        }
        if s.block_size == 0 {
            return bad("sampling.block_size must be >= 1".into());
        }
        if !(s.noise_std >= 0.0) {
            return bad("sampling.noise_std must be >= 0".into());
        }
        if self.experiment.methods.is_empty() {
            return bad("experiment.methods must not be empty".into());
        }
        let p = &self.phantom;
        if p.rows < 8 || p.cols < 8 {
            return bad("phantom maps must be at least 8x8".into());
        }
        if p.test_count == 0 {
            return bad("phantom.test_count must be >= 1".into());
        }
        if !(p.value_min <= p.value_max) {
            return bad("phantom.value_min must not exceed value_max".into());
        }
        if !(self.normalize.scale > 0.0) || !self.normalize.offset.is_finite() {
            return bad("normalize.scale must be > 0 and offset finite".into());
        }
        if self.amp.max_iters == 0 {
            return bad("amp.max_iters must be >= 1".into());
        }
        if !(self.amp.tau >= 0.0) {
            return bad("amp.tau must be >= 0".into());
        }
        if self.unfolded.channels == 0 {
            return bad("unfolded.channels must be >= 1".into());
        }
        let t = &self.train;
        if t.batch_size == 0 || t.epochs == 0 || !(t.learning_rate >= 0.0) {
            return bad("train.batch_size and train.epochs must be >= 1, learning_rate >= 0".into());
        }
        if self.experiment.methods.iter().any(|m| m.is_unfolded()) && p.train_count == 0 {
            return bad("unfolded methods need phantom.train_count >= 1".into());
        }
        Ok(())
    }
}
