//! Linear-subspace (PCA) reconstructor.
//!
//! Principal directions come from an exact eigendecomposition of the Gram
//! matrix of the centered training images, which is much smaller than the
//! pixel covariance when there are fewer images than pixels. The result is
//! bit-reproducible for a given training set.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::manifest::DatasetManifest;

/// Relative eigenvalue floor below which a direction counts as null.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceModel {
    height: usize,
    width: usize,
    latent_dim: usize,
    mean: Vec<f32>,
    /// `components` rows of `height * width` values, orthonormal.
    basis: Vec<f32>,
    components: usize,
    fingerprint: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    k: usize,
    components: usize,
    shape: [usize; 2],
    fingerprint: String,
}

/// SHA-256 over the serialized training images, in order.
pub fn training_fingerprint(images: &[Grid]) -> String {
    let mut hasher = Sha256::new();
    for g in images {
        hasher.update(g.to_bytes());
    }
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Fits the mean image and the top-`k` principal directions.
///
/// If the centered training set has rank below `k` the model keeps only the
/// non-null directions; [`SubspaceModel::latent_dim`] still reports `k`.
pub fn fit_subspace(images: &[Grid], k: usize) -> Result<SubspaceModel> {
    let first = images
        .first()
        .ok_or_else(|| Error::invalid("subspace fit needs at least one training image"))?;
    let (h, w) = first.shape();
    for (i, g) in images.iter().enumerate() {
        g.ensure_same_shape((h, w))
            .map_err(|e| e.for_image(format!("training image {i}")))?;
    }
    let m = images.len();
    if k > m {
        return Err(Error::invalid(format!(
            "latent dimension {k} exceeds the {m} training images"
        )));
    }
    let n = h * w;
    let mut mean = vec![0.0f64; n];
    for g in images {
        for (acc, &v) in mean.iter_mut().zip(g.pixels()) {
            *acc += v as f64;
        }
    }
    mean.iter_mut().for_each(|v| *v /= m as f64);

    let mut basis = Vec::new();
    let mut components = 0;
    if k > 0 {
        let centered = DMatrix::from_fn(m, n, |r, c| images[r].pixels()[c] as f64 - mean[c]);
        let gram = &centered * centered.transpose();
        let eig = SymmetricEigen::new(gram);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .total_cmp(&eig.eigenvalues[a])
                .then(a.cmp(&b))
        });
        let top = eig.eigenvalues[order[0]].max(0.0);
        let keep: Vec<usize> = order
            .into_iter()
            .take(k)
            .filter(|&i| top > 0.0 && eig.eigenvalues[i] > top * RANK_TOLERANCE)
            .collect();
        components = keep.len();
        if components > 0 {
            let selected = DMatrix::from_fn(m, components, |r, c| eig.eigenvectors[(r, keep[c])]);
            let directions = centered.transpose() * selected;
            basis.reserve(components * n);
            for c in 0..components {
                let col = directions.column(c);
                let norm = col.norm();
                if !(norm > 0.0 && norm.is_finite()) {
                    return Err(Error::Numerical(format!("degenerate principal direction {c}")));
                }
                // sign convention: largest-magnitude entry positive
                let mut pivot = 0;
                for i in 1..n {
                    if col[i].abs() > col[pivot].abs() {
                        pivot = i;
                    }
                }
                let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
                basis.extend(col.iter().map(|v| (sign * v / norm) as f32));
            }
        }
    }
    Ok(SubspaceModel {
        height: h,
        width: w,
        latent_dim: k,
        mean: mean.into_iter().map(|v| v as f32).collect(),
        basis,
        components,
        fingerprint: training_fingerprint(images),
    })
}

/// Loads the manifest's images and fits on them.
pub fn fit_subspace_manifest(train: &DatasetManifest, k: usize) -> Result<SubspaceModel> {
    let images: Vec<Grid> = train.load()?.into_iter().map(|s| s.image).collect();
    fit_subspace(&images, k)
}

impl SubspaceModel {
    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    /// Requested latent dimension `k`.
    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    /// Number of stored basis directions (`<= k`).
    pub fn components(&self) -> usize {
        self.components
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn mean(&self) -> Grid {
        Grid::from_raw(self.height, self.width, self.mean.clone())
    }

    pub fn basis_row(&self, j: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.basis[j * n..(j + 1) * n]
    }

    /// The nested model that keeps only the leading `k` directions.
    pub fn truncated(&self, k: usize) -> Result<SubspaceModel> {
        if k > self.latent_dim {
            return Err(Error::invalid(format!(
                "cannot truncate a k={} model to k={k}",
                self.latent_dim
            )));
        }
        let components = self.components.min(k);
        let n = self.height * self.width;
        Ok(SubspaceModel {
            latent_dim: k,
            components,
            basis: self.basis[..components * n].to_vec(),
            ..self.clone()
        })
    }

    /// Latent code: projection coefficients of `input - mean`.
    pub fn encode(&self, input: &Grid) -> Result<Vec<f64>> {
        input.ensure_same_shape(self.shape())?;
        let px = input.pixels();
        let centered: Vec<f64> = px
            .iter()
            .zip(&self.mean)
            .map(|(&x, &m)| x as f64 - m as f64)
            .collect();
        Ok((0..self.components)
            .map(|j| {
                self.basis_row(j)
                    .iter()
                    .zip(&centered)
                    .map(|(&b, &c)| b as f64 * c)
                    .sum()
            })
            .collect())
    }

    /// `mean + U U^T (input - mean)` without clamping.
    pub fn project(&self, input: &Grid) -> Result<Vec<f64>> {
        let code = self.encode(input)?;
        let mut out: Vec<f64> = self.mean.iter().map(|&m| m as f64).collect();
        for (j, &a) in code.iter().enumerate() {
            for (o, &b) in out.iter_mut().zip(self.basis_row(j)) {
                *o += a * b as f64;
            }
        }
        Ok(out)
    }

    /// Projection clamped to `[0, 1]`.
    pub fn reconstruct(&self, input: &Grid) -> Result<Grid> {
        let out = self.project(input)?;
        Ok(Grid::from_raw(
            self.height,
            self.width,
            out.into_iter().map(|v| v.clamp(0.0, 1.0) as f32).collect(),
        ))
    }

    /// JSON header line followed by the mean and each basis row as `.f32g`
    /// payloads.
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            k: self.latent_dim,
            components: self.components,
            shape: [self.height, self.width],
            fingerprint: self.fingerprint.clone(),
        };
        let mut out = serde_json::to_vec(&header).expect("header serializes");
        out.push(b'\n');
        out.extend(self.mean().to_bytes());
        let n = self.height * self.width;
        for j in 0..self.components {
            out.extend(Grid::from_raw(self.height, self.width, self.basis[j * n..(j + 1) * n].to_vec()).to_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let malformed = |message: String| Error::Malformed {
            path: "<subspace model>".into(),
            message,
        };
        let split = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| malformed("missing header line".into()))?;
        let header: Header =
            serde_json::from_slice(&bytes[..split]).map_err(|e| malformed(e.to_string()))?;
        if header.components > header.k {
            return Err(malformed(format!(
                "{} components exceed k={}",
                header.components, header.k
            )));
        }
        let shape = (header.shape[0], header.shape[1]);
        let mut rest = &bytes[split + 1..];
        let (mean, used) = Grid::decode_prefix(rest)?;
        mean.ensure_same_shape(shape)?;
        rest = &rest[used..];
        let mut basis = Vec::with_capacity(header.components * mean.len());
        for _ in 0..header.components {
            let (row, used) = Grid::decode_prefix(rest)?;
            row.ensure_same_shape(shape)?;
            basis.extend_from_slice(row.pixels());
            rest = &rest[used..];
        }
        if !rest.is_empty() {
            return Err(Error::TrailingBytes(rest.len()));
        }
        Ok(Self {
            height: shape.0,
            width: shape.1,
            latent_dim: header.k,
            mean: mean.into_pixels(),
            basis,
            components: header.components,
            fingerprint: header.fingerprint,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Malformed { message, .. } => Error::Malformed {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }
}
