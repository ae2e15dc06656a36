//! Dataset manifests: UTF-8 text, one image path per line, optionally
//! followed by a tab and an object-mask path. Blank lines and lines starting
//! with `#` are ignored, except a `# role: train|test` directive. Relative
//! paths resolve against the manifest's directory.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::{BinaryMask, Grid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Role {
    Train,
    #[default]
    Test,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Train => "train",
            Role::Test => "test",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub image: PathBuf,
    pub mask: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetManifest {
    pub role: Role,
    /// Directory that relative entries resolve against.
    pub base: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

/// One loaded image with its identity and optional object mask.
#[derive(Clone, Debug)]
pub struct Sample {
    pub id: String,
    pub image: Grid,
    pub mask: Option<BinaryMask>,
}

impl Sample {
    /// The explicit object mask, or the non-zero pixels when none was given.
    pub fn object_mask(&self) -> BinaryMask {
        self.mask
            .clone()
            .unwrap_or_else(|| BinaryMask::nonzero(&self.image))
    }
}

impl DatasetManifest {
    pub fn parse(text: &str, base: impl Into<PathBuf>) -> Result<Self> {
        let base = base.into();
        let mut role = Role::default();
        let mut entries = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(comment) = trimmed.strip_prefix('#') {
                if let Some(value) = comment.trim().strip_prefix("role:") {
                    role = match value.trim() {
                        "train" => Role::Train,
                        "test" => Role::Test,
                        other => {
                            return Err(Error::Manifest {
                                path: base.clone(),
                                message: format!("line {}: unknown role {other:?}", lineno + 1),
                            })
                        }
                    };
                }
                continue;
            }
            let mut parts = line.split('\t');
            let image = parts.next().unwrap_or_default().trim();
            let mask = parts.next().map(str::trim).filter(|m| !m.is_empty());
            if parts.next().is_some() {
                return Err(Error::Manifest {
                    path: base.clone(),
                    message: format!("line {}: expected at most two tab-separated paths", lineno + 1),
                });
            }
            entries.push(ManifestEntry {
                image: PathBuf::from(image),
                mask: mask.map(PathBuf::from),
            });
        }
        Ok(Self {
            role,
            base,
            entries,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base).map_err(|e| match e {
            Error::Manifest { message, .. } => Error::Manifest {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    pub fn render(&self) -> String {
        let mut out = format!("# role: {}\n", self.role);
        for e in &self.entries {
            out.push_str(&e.image.to_string_lossy());
            if let Some(m) = &e.mask {
                out.push('\t');
                out.push_str(&m.to_string_lossy());
            }
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.render()).map_err(|e| Error::io(path, e))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    /// Loads every entry in manifest order. All images must share a shape.
    pub fn load(&self) -> Result<Vec<Sample>> {
        let mut samples: Vec<Sample> = Vec::with_capacity(self.entries.len());
        for entry in &self.entries {
            let id = stem_of(&entry.image);
            let load = || -> Result<Sample> {
                let image = Grid::read(self.resolve(&entry.image))?;
                let mask = match &entry.mask {
                    Some(m) => {
                        let mask = BinaryMask::read(self.resolve(m))?;
                        mask.ensure_same_shape(image.shape())?;
                        Some(mask)
                    }
                    None => None,
                };
                if let Some(first) = samples.first() {
                    image.ensure_same_shape(first.image.shape())?;
                }
                Ok(Sample {
                    id: id.clone(),
                    image,
                    mask,
                })
            };
            samples.push(load().map_err(|e| e.for_image(id.clone()))?);
        }
        Ok(samples)
    }
}

/// File name without the directory and without a trailing `.f32g`.
pub fn stem_of(path: &Path) -> String {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    name.strip_suffix(".f32g").map(str::to_owned).unwrap_or(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_pairs_and_role() {
        let text = "# role: train\n# a comment\n\na.f32g\tma.maskg\nsub/b.f32g\n";
        let m = DatasetManifest::parse(text, "/data").unwrap();
        assert_eq!(m.role, Role::Train);
        assert_eq!(m.entries.len(), 2);
        assert_eq!(m.entries[0].mask.as_deref(), Some(Path::new("ma.maskg")));
        assert_eq!(m.entries[1].mask, None);
        assert_eq!(m.resolve(&m.entries[1].image), PathBuf::from("/data/sub/b.f32g"));
        let again = DatasetManifest::parse(&m.render(), "/data").unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn rejects_unknown_role_and_extra_columns() {
        assert!(DatasetManifest::parse("# role: val\n", ".").is_err());
        assert!(DatasetManifest::parse("a\tb\tc\n", ".").is_err());
    }

    #[test]
    fn load_reports_image_identity() {
        let dir = tempfile::tempdir().unwrap();
        let m = DatasetManifest::parse("missing.f32g\n", dir.path()).unwrap();
        let err = m.load().unwrap_err();
        assert!(err.to_string().contains("missing"), "{err}");
    }

    #[test]
    fn stems_strip_grid_extension() {
        assert_eq!(stem_of(Path::new("x/img_003.f32g")), "img_003");
        assert_eq!(stem_of(Path::new("x/plain")), "plain");
    }
}
