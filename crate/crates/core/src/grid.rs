//! Image grids, binary masks and their portable on-disk formats.
//!
//! Both formats share one layout: a 4-byte magic, a little-endian `u32`
//! version (always 1), little-endian `u32` height and width, then
//! `height * width` little-endian `f32` values in row-major order. Grids use
//! the magic `F32G`, masks use `MSKG` and may only hold `0.0` or `1.0`.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const GRID_MAGIC: &[u8; 4] = b"F32G";
pub const MASK_MAGIC: &[u8; 4] = b"MSKG";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

/// A row-major 2D image of finite `f32` values, nominally in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    height: usize,
    width: usize,
    pixels: Vec<f32>,
}

impl Grid {
    pub fn new(height: usize, width: usize, pixels: Vec<f32>) -> Result<Self> {
        check_dims(height, width)?;
        if pixels.len() != height * width {
            return Err(Error::invalid(format!(
                "{height}x{width} grid needs {} pixels, got {}",
                height * width,
                pixels.len()
            )));
        }
        if let Some(i) = pixels.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self {
            height,
            width,
            pixels,
        })
    }

    pub fn filled(height: usize, width: usize, value: f32) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> f32,
    ) -> Result<Self> {
        check_dims(height, width)?;
        let mut pixels = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                pixels.push(f(r, c));
            }
        }
        Self::new(height, width, pixels)
    }

    /// Builds a grid without re-validating; callers guarantee the invariants.
    pub(crate) fn from_raw(height: usize, width: usize, pixels: Vec<f32>) -> Self {
        debug_assert_eq!(pixels.len(), height * width);
        debug_assert!(pixels.iter().all(|v| v.is_finite()));
        Self {
            height,
            width,
            pixels,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f32> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.pixels[row * self.width + col]
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.pixels
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn ensure_same_shape(&self, other: (usize, usize)) -> Result<()> {
        if self.shape() != other {
            return Err(Error::ShapeMismatch {
                left: self.shape(),
                right: other,
            });
        }
        Ok(())
    }

    /// Serializes to the `.f32g` byte layout.
    pub fn to_bytes(&self) -> Vec<u8> {
        encode(GRID_MAGIC, self.height, self.width, &self.pixels)
    }

    /// Parses one `.f32g` payload that must span the whole buffer.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (grid, used) = Self::decode_prefix(bytes)?;
        if used != bytes.len() {
            return Err(Error::TrailingBytes(bytes.len() - used));
        }
        Ok(grid)
    }

    /// Parses a `.f32g` payload at the start of `bytes`, returning the grid
    /// and the number of bytes consumed.
    pub fn decode_prefix(bytes: &[u8]) -> Result<(Self, usize)> {
        let (height, width, pixels, used) = decode(GRID_MAGIC, bytes)?;
        Ok((Self::new(height, width, pixels)?, used))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// A per-pixel `{0, 1}` label image.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    values: Vec<bool>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, values: Vec<bool>) -> Result<Self> {
        check_dims(height, width)?;
        if values.len() != height * width {
            return Err(Error::invalid(format!(
                "{height}x{width} mask needs {} values, got {}",
                height * width,
                values.len()
            )));
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    pub fn filled(height: usize, width: usize, value: bool) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self> {
        check_dims(height, width)?;
        let mut values = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                values.push(f(r, c));
            }
        }
        Self::new(height, width, values)
    }

    /// Marks every pixel that is not exactly zero, the usual object-mask
    /// convention for skull-stripped scans.
    pub fn nonzero(grid: &Grid) -> Self {
        Self {
            height: grid.height(),
            width: grid.width(),
            values: grid.pixels().iter().map(|&v| v != 0.0).collect(),
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.values[row * self.width + col]
    }

    pub fn count(&self) -> usize {
        self.values.iter().filter(|&&v| v).count()
    }

    pub fn is_empty_selection(&self) -> bool {
        !self.values.iter().any(|&v| v)
    }

    /// Row-major indices of the set pixels.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, &v)| v.then_some(i))
    }

    pub fn ensure_same_shape(&self, other: (usize, usize)) -> Result<()> {
        if self.shape() != other {
            return Err(Error::ShapeMismatch {
                left: self.shape(),
                right: other,
            });
        }
        Ok(())
    }

    pub fn to_grid(&self) -> Grid {
        Grid::from_raw(
            self.height,
            self.width,
            self.values.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect(),
        )
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        encode(
            MASK_MAGIC,
            self.height,
            self.width,
            &self.to_grid().into_pixels(),
        )
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (height, width, pixels, used) = decode(MASK_MAGIC, bytes)?;
        if used != bytes.len() {
            return Err(Error::TrailingBytes(bytes.len() - used));
        }
        let mut values = Vec::with_capacity(pixels.len());
        for (index, value) in pixels.into_iter().enumerate() {
            if value == 0.0 {
                values.push(false);
            } else if value == 1.0 {
                values.push(true);
            } else if !value.is_finite() {
                return Err(Error::NonFinite(index));
            } else {
                return Err(Error::InvalidMaskValue { index, value });
            }
        }
        Self::new(height, width, values)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }
}

pub fn read_grid(path: impl AsRef<Path>) -> Result<Grid> {
    Grid::read(path)
}

pub fn write_grid(grid: &Grid, path: impl AsRef<Path>) -> Result<()> {
    grid.write(path)
}

fn check_dims(height: usize, width: usize) -> Result<()> {
    if height == 0 || width == 0 || height > u32::MAX as usize || width > u32::MAX as usize {
        return Err(Error::InvalidDimensions { height, width });
    }
    Ok(())
}

fn encode(magic: &[u8; 4], height: usize, width: usize, pixels: &[f32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * pixels.len());
    out.extend_from_slice(magic);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(height as u32).to_le_bytes());
    out.extend_from_slice(&(width as u32).to_le_bytes());
    for v in pixels {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn decode(magic: &[u8; 4], bytes: &[u8]) -> Result<(usize, usize, Vec<f32>, usize)> {
    if bytes.len() < 4 || &bytes[..4] != magic {
        let found = String::from_utf8_lossy(&bytes[..bytes.len().min(4)]).into_owned();
        return Err(Error::BadMagic {
            expected: String::from_utf8_lossy(magic).into_owned(),
            found,
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let version = word(4);
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let height = word(8) as usize;
    let width = word(12) as usize;
    check_dims(height, width)?;
    let expected = HEADER_LEN + 4 * height * width;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    let pixels = bytes[HEADER_LEN..expected]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Ok((height, width, pixels, expected))
}
