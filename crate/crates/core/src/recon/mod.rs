//! Reconstruction sources: Gaussian-blur oracle, linear subspace models,
//! reconstructions produced elsewhere and loaded from disk, and identity.

mod blur;
mod subspace;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use blur::{gaussian_blur, gaussian_kernel};
pub use subspace::{fit_subspace, fit_subspace_manifest, training_fingerprint, SubspaceModel};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::manifest::Sample;

/// Which image the generator is given.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// The ground-truth healthy image.
    Healthy,
    /// The image containing the anomaly.
    Anomalous,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Healthy => "healthy",
            Mode::Anomalous => "anomalous",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "healthy" => Ok(Mode::Healthy),
            "anomalous" => Ok(Mode::Anomalous),
            other => Err(Error::invalid(format!("unknown mode {other:?}"))),
        }
    }
}

/// Simulated imperfect generator: blurs whatever it is given.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlurOracle {
    sigma: f64,
}

impl BlurOracle {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("sigma must be finite and >= 0, got {sigma}")));
        }
        Ok(Self { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// Directory of reconstructions named `<key>.<mode>.f32g`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExternalReconSource {
    pub name: String,
    pub dir: PathBuf,
}

impl ExternalReconSource {
    pub fn new(name: impl Into<String>, dir: impl Into<PathBuf>) -> Self {
        Self {
            name: name.into(),
            dir: dir.into(),
        }
    }

    pub fn path_for(&self, key: &str, mode: Mode) -> PathBuf {
        self.dir.join(format!("{key}.{mode}.f32g"))
    }

    pub fn load(&self, key: &str, mode: Mode) -> Result<Grid> {
        let path = self.path_for(key, mode);
        if !path.exists() {
            return Err(Error::MissingReconstruction(vec![format!("{key}.{mode}")]));
        }
        Grid::read(path)
    }

    /// Lists every `(key, mode)` pair without a reconstruction file.
    pub fn check_complete<'a>(&self, keys: impl IntoIterator<Item = (&'a str, Mode)>) -> Result<()> {
        let missing: Vec<String> = keys
            .into_iter()
            .filter(|(k, m)| !self.path_for(k, *m).exists())
            .map(|(k, m)| format!("{k}.{m}"))
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::MissingReconstruction(missing))
        }
    }

    /// Writes one reconstruction in this source's layout.
    pub fn store(dir: &Path, key: &str, mode: Mode, grid: &Grid) -> Result<()> {
        grid.write(dir.join(format!("{key}.{mode}.f32g")))
    }
}

#[derive(Clone, Debug)]
pub enum Reconstructor {
    Identity,
    Blur(BlurOracle),
    Subspace(Arc<SubspaceModel>),
    External(ExternalReconSource),
}

impl Reconstructor {
    /// Produces `x_hat` for `input`. `key` and `mode` only matter for
    /// external sources, which look up a stored file.
    pub fn reconstruct(&self, input: &Grid, key: &str, mode: Mode) -> Result<Grid> {
        match self {
            Reconstructor::Identity => Ok(input.clone()),
            Reconstructor::Blur(b) => gaussian_blur(input, b.sigma),
            Reconstructor::Subspace(m) => m.reconstruct(input),
            Reconstructor::External(src) => {
                let g = src.load(key, mode)?;
                g.ensure_same_shape(input.shape())?;
                Ok(g)
            }
        }
    }

    /// Short model name used in result tables.
    pub fn model_name(&self) -> String {
        match self {
            Reconstructor::Identity => "identity".into(),
            Reconstructor::Blur(_) => "blur".into(),
            Reconstructor::Subspace(_) => "subspace".into(),
            Reconstructor::External(src) => format!("external:{}", src.name),
        }
    }

    pub fn sigma(&self) -> Option<f64> {
        match self {
            Reconstructor::Blur(b) => Some(b.sigma),
            _ => None,
        }
    }

    pub fn latent_dim(&self) -> Option<usize> {
        match self {
            Reconstructor::Subspace(m) => Some(m.latent_dim()),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReconstructionErrorStats {
    pub per_image: Vec<f64>,
    pub mean: f64,
}

/// Mean absolute residual over object pixels of `x - reconstruct(x)` for
/// one healthy image.
pub fn image_recon_error(image: &Grid, recon: &Grid, object: &crate::grid::BinaryMask) -> Result<f64> {
    image.ensure_same_shape(recon.shape())?;
    object.ensure_same_shape(image.shape())?;
    let count = object.count();
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    let (a, b) = (image.pixels(), recon.pixels());
    Ok(object
        .indices()
        .map(|i| (a[i] as f64 - b[i] as f64).abs())
        .sum::<f64>()
        / count as f64)
}

/// Healthy-input reconstruction error of `model` over a test set.
pub fn healthy_recon_error(model: &Reconstructor, test: &[Sample]) -> Result<ReconstructionErrorStats> {
    if test.is_empty() {
        return Err(Error::invalid("reconstruction error needs a nonempty test set"));
    }
    let per_image = test
        .iter()
        .map(|s| {
            let recon = model.reconstruct(&s.image, &s.id, Mode::Healthy)?;
            image_recon_error(&s.image, &recon, &s.object_mask())
        })
        .enumerate()
        .map(|(i, r)| r.map_err(|e| e.for_image(test[i].id.clone())))
        .collect::<Result<Vec<f64>>>()?;
    let mean = per_image.iter().sum::<f64>() / per_image.len() as f64;
    Ok(ReconstructionErrorStats { per_image, mean })
}
