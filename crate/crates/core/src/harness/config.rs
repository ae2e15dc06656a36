//! Sweep configuration.
//!
//! Config files are TOML key/value documents; every key is optional except
//! `experiment`, and unknown keys are rejected. Example:
//!
//! ```toml
//! experiment = "exp1"          # exp1 | exp2 | exp3-healthy | exp3-anomalous | exp1-histeq
//! test_manifest = "data/test/manifest.txt"
//! train_manifest = "data/train/manifest.txt"   # exp3 with subspace_ks only
//! intensities = [0.0, 0.25, 0.5, 0.75, 1.0]    # default: 0 to 1 in steps of 0.05
//! sigmas = [0.0, 0.25, 0.5, 1.0, 2.0, 3.0, 5.0]
//! kinds = ["sink", "source", "shuffle", "intensity"]   # exp2
//! reference_intensity = 0.44   # intensity used by exp2's intensity kind
//! radius = 20.0
//! subspace_ks = [4, 16, 64, 256]      # exp3: fit on the train manifest
//! subspace_models = ["model.subspace"] # exp3: pre-fitted models
//! external = [{ name = "vqvae", dir = "recon/vqvae" }]
//! identity = false
//! seed = 0
//! eval_mask = "full"           # full | object
//! output_dir = "out"
//! blur_reference = "out/exp1.csv"   # exp3: match against these blur curves
//! histeq_bins = 256
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::recon::Mode;
use crate::scoring::EvalPolicy;
use crate::synth::AnomalyKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExperimentId {
    #[serde(rename = "exp1")]
    Exp1,
    #[serde(rename = "exp2")]
    Exp2,
    #[serde(rename = "exp3-healthy")]
    Exp3Healthy,
    #[serde(rename = "exp3-anomalous")]
    Exp3Anomalous,
    #[serde(rename = "exp1-histeq")]
    Exp1Histeq,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 5] = [
        ExperimentId::Exp1,
        ExperimentId::Exp2,
        ExperimentId::Exp3Healthy,
        ExperimentId::Exp3Anomalous,
        ExperimentId::Exp1Histeq,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentId::Exp1 => "exp1",
            ExperimentId::Exp2 => "exp2",
            ExperimentId::Exp3Healthy => "exp3-healthy",
            ExperimentId::Exp3Anomalous => "exp3-anomalous",
            ExperimentId::Exp1Histeq => "exp1-histeq",
        }
    }

    pub fn exp3_mode(&self) -> Option<Mode> {
        match self {
            ExperimentId::Exp3Healthy => Some(Mode::Healthy),
            ExperimentId::Exp3Anomalous => Some(Mode::Anomalous),
            _ => None,
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentId::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalSpec {
    pub name: String,
    pub dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub experiment: ExperimentId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_manifest: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_manifest: Option<PathBuf>,
    #[serde(default = "default_intensities")]
    pub intensities: Vec<f64>,
    #[serde(default = "default_sigmas")]
    pub sigmas: Vec<f64>,
    #[serde(default = "default_kinds")]
    pub kinds: Vec<AnomalyKind>,
    #[serde(default = "default_reference_intensity")]
    pub reference_intensity: f64,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default)]
    pub subspace_ks: Vec<usize>,
    #[serde(default)]
    pub subspace_models: Vec<PathBuf>,
    #[serde(default)]
    pub external: Vec<ExternalSpec>,
    #[serde(default)]
    pub identity: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_eval_mask")]
    pub eval_mask: String,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blur_reference: Option<PathBuf>,
    #[serde(default = "default_histeq_bins")]
    pub histeq_bins: usize,
}

/// `0, 0.05, ..., 1`.
pub fn default_intensities() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 20.0).collect()
}

pub fn default_sigmas() -> Vec<f64> {
    vec![0.0, 0.25, 0.5, 1.0, 2.0, 3.0, 5.0]
}

fn default_kinds() -> Vec<AnomalyKind> {
    vec![
        AnomalyKind::Sink,
        AnomalyKind::Source,
        AnomalyKind::Shuffle,
        AnomalyKind::Intensity,
    ]
}

fn default_reference_intensity() -> f64 {
    0.44
}

fn default_radius() -> f64 {
    20.0
}

fn default_eval_mask() -> String {
    "full".into()
}

fn default_output_dir() -> PathBuf {
    "out".into()
}

fn default_histeq_bins() -> usize {
    256
}

impl SweepConfig {
    /// Defaults for every optional field.
    pub fn new(experiment: ExperimentId) -> Self {
        Self {
            experiment,
            test_manifest: None,
            train_manifest: None,
            intensities: default_intensities(),
            sigmas: default_sigmas(),
            kinds: default_kinds(),
            reference_intensity: default_reference_intensity(),
            radius: default_radius(),
            subspace_ks: Vec::new(),
            subspace_models: Vec::new(),
            external: Vec::new(),
            identity: false,
            seed: 0,
            eval_mask: default_eval_mask(),
            output_dir: default_output_dir(),
            blur_reference: None,
            histeq_bins: default_histeq_bins(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn eval_policy(&self) -> Result<EvalPolicy> {
        self.eval_mask.parse().map_err(|_| {
            Error::Config(format!("eval_mask must be \"full\" or \"object\", got {:?}", self.eval_mask))
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        check_grid("intensities", &self.intensities, 0.0, 1.0)?;
        check_grid("sigmas", &self.sigmas, 0.0, f64::INFINITY)?;
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return bad(format!("radius must be positive, got {}", self.radius));
        }
        if !(0.0..=1.0).contains(&self.reference_intensity) {
            return bad(format!(
                "reference_intensity must lie in [0, 1], got {}",
                self.reference_intensity
            ));
        }
        if self.histeq_bins < 2 {
            return bad("histeq_bins must be at least 2".into());
        }
        self.eval_policy()?;
        if self.experiment == ExperimentId::Exp2 && self.kinds.is_empty() {
            return bad("exp2 needs at least one anomaly kind".into());
        }
        if self.experiment.exp3_mode().is_some() {
            let models = self.subspace_ks.len()
                + self.subspace_models.len()
                + self.external.len()
                + self.identity as usize;
            if models == 0 {
                return bad("exp3 needs at least one model (subspace_ks, subspace_models, external or identity)".into());
            }
            if !self.subspace_ks.is_empty() && self.train_manifest.is_none() {
                return bad("subspace_ks needs train_manifest".into());
            }
            let mut ks = self.subspace_ks.clone();
            ks.sort_unstable();
            ks.dedup();
            if ks.len() != self.subspace_ks.len() {
                return bad("subspace_ks contains duplicates".into());
            }
        }
        Ok(())
    }
}

fn check_grid(name: &str, values: &[f64], lo: f64, hi: f64) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Config(format!("{name} must not be empty")));
    }
    if values.iter().any(|v| !v.is_finite() || *v < lo || *v > hi) {
        return Err(Error::Config(format!("{name} values must lie in [{lo}, {hi}]")));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!("{name} must be strictly ascending")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_missing_keys() {
        let c = SweepConfig::from_toml("experiment = \"exp1\"\n").unwrap();
        assert_eq!(c, SweepConfig::new(ExperimentId::Exp1));
        assert_eq!(c.intensities.len(), 21);
        assert_eq!(c.intensities[3], 0.15);
        assert_eq!(c.sigmas, vec![0.0, 0.25, 0.5, 1.0, 2.0, 3.0, 5.0]);
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(SweepConfig::from_toml("experiment = \"exp1\"\nsigma_grid = [1.0]\n").is_err());
        assert!(SweepConfig::from_toml("experiment = \"exp9\"\n").is_err());
    }

    #[test]
    fn snapshot_round_trips() {
        let mut c = SweepConfig::new(ExperimentId::Exp3Anomalous);
        c.subspace_ks = vec![4, 16];
        c.train_manifest = Some("t.txt".into());
        c.external.push(ExternalSpec {
            name: "ae".into(),
            dir: "r".into(),
        });
        assert_eq!(SweepConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn validation_catches_bad_grids_and_missing_models() {
        let mut c = SweepConfig::new(ExperimentId::Exp1);
        c.sigmas = vec![1.0, 0.5];
        assert!(c.validate().is_err());
        c.sigmas = vec![];
        assert!(c.validate().is_err());
        let mut c = SweepConfig::new(ExperimentId::Exp1);
        c.intensities = vec![0.5, 1.2];
        assert!(c.validate().is_err());
        let mut c = SweepConfig::new(ExperimentId::Exp1);
        c.eval_mask = "brain".into();
        assert!(c.validate().is_err());
        let c = SweepConfig::new(ExperimentId::Exp3Healthy);
        assert!(c.validate().is_err());
        let mut c = SweepConfig::new(ExperimentId::Exp3Healthy);
        c.subspace_ks = vec![4];
        assert!(c.validate().is_err());
        c.train_manifest = Some("train.txt".into());
        c.validate().unwrap();
    }
}
