//! Synthetic anomalies: circular regions inside the object, filled with a
//! constant intensity, warped radially (sink/source), or pixel-shuffled.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BinaryMask, Grid};
use crate::rng;

/// Center `(row, col)` and radius of a circular anomaly, in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub center: (f64, f64),
    pub radius: f64,
}

impl RegionSpec {
    pub fn new(row: f64, col: f64, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite() && row.is_finite() && col.is_finite()) {
            return Err(Error::invalid(format!(
                "region needs a positive radius and finite center, got ({row}, {col}) r={radius}"
            )));
        }
        Ok(Self {
            center: (row, col),
            radius,
        })
    }

    #[inline]
    pub fn contains(&self, row: usize, col: usize) -> bool {
        let dr = row as f64 - self.center.0;
        let dc = col as f64 - self.center.1;
        dr * dr + dc * dc <= self.radius * self.radius
    }

    pub fn check_bounds(&self, height: usize, width: usize) -> Result<()> {
        let (r, c) = self.center;
        let ok = (r - self.radius).ceil() >= 0.0
            && (c - self.radius).ceil() >= 0.0
            && (r + self.radius).floor() <= (height - 1) as f64
            && (c + self.radius).floor() <= (width - 1) as f64;
        if ok {
            Ok(())
        } else {
            Err(Error::RegionOutOfBounds {
                row: r,
                col: c,
                radius: self.radius,
                height,
                width,
            })
        }
    }

    /// Row-major indices of the pixels inside the closed disk.
    fn pixel_indices(&self, height: usize, width: usize) -> Vec<usize> {
        let (r, c) = self.center;
        let r0 = (r - self.radius).ceil().max(0.0) as usize;
        let r1 = ((r + self.radius).floor() as usize).min(height - 1);
        let c0 = (c - self.radius).ceil().max(0.0) as usize;
        let c1 = ((c + self.radius).floor() as usize).min(width - 1);
        let mut out = Vec::new();
        for row in r0..=r1 {
            for col in c0..=c1 {
                if self.contains(row, col) {
                    out.push(row * width + col);
                }
            }
        }
        out
    }
}

/// Draws a disk center uniformly among the pixels whose square neighbourhood
/// of half-width `ceil(radius)` lies entirely inside `object`, so the whole
/// disk sits inside the object.
pub fn sample_region(object: &BinaryMask, radius: f64, seed: u64) -> Result<RegionSpec> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::invalid(format!("radius must be positive, got {radius}")));
    }
    let (h, w) = object.shape();
    let reach = radius.ceil() as usize;
    if 2 * reach + 1 > h || 2 * reach + 1 > w {
        return Err(Error::NoAdmissibleCenter { radius });
    }
    // summed-area table of the mask
    let mut sat = vec![0u32; (h + 1) * (w + 1)];
    for r in 0..h {
        let mut row_sum = 0u32;
        for c in 0..w {
            row_sum += object.get(r, c) as u32;
            sat[(r + 1) * (w + 1) + c + 1] = sat[r * (w + 1) + c + 1] + row_sum;
        }
    }
    let window = |r0: usize, c0: usize, r1: usize, c1: usize| {
        sat[r1 * (w + 1) + c1] + sat[r0 * (w + 1) + c0]
            - sat[r0 * (w + 1) + c1]
            - sat[r1 * (w + 1) + c0]
    };
    let full = ((2 * reach + 1) * (2 * reach + 1)) as u32;
    let mut admissible = Vec::new();
    for r in reach..h - reach {
        for c in reach..w - reach {
            if window(r - reach, c - reach, r + reach + 1, c + reach + 1) == full {
                admissible.push((r, c));
            }
        }
    }
    if admissible.is_empty() {
        return Err(Error::NoAdmissibleCenter { radius });
    }
    let mut rng = rng::stream(seed);
    let (r, c) = admissible[rng.random_range(0..admissible.len())];
    RegionSpec::new(r as f64, c as f64, radius)
}

/// Pixel `(i, j)` is set iff its Euclidean distance to the center is at most
/// the radius.
pub fn rasterize_disk(region: &RegionSpec, height: usize, width: usize) -> Result<BinaryMask> {
    region.check_bounds(height, width)?;
    let mut values = vec![false; height * width];
    for i in region.pixel_indices(height, width) {
        values[i] = true;
    }
    BinaryMask::new(height, width, values)
}

/// Bilinear interpolation at a fractional `(row, col)`, clamped into the
/// image first.
pub fn bilinear_sample(grid: &Grid, row: f64, col: f64) -> f64 {
    let (h, w) = grid.shape();
    let r = row.clamp(0.0, (h - 1) as f64);
    let c = col.clamp(0.0, (w - 1) as f64);
    let r0 = r.floor() as usize;
    let c0 = c.floor() as usize;
    let r1 = (r0 + 1).min(h - 1);
    let c1 = (c0 + 1).min(w - 1);
    let fr = r - r0 as f64;
    let fc = c - c0 as f64;
    let p = |rr, cc| grid.get(rr, cc) as f64;
    if fr == 0.0 && fc == 0.0 {
        return p(r0, c0);
    }
    let top = p(r0, c0) * (1.0 - fc) + p(r0, c1) * fc;
    let bottom = p(r1, c0) * (1.0 - fc) + p(r1, c1) * fc;
    top * (1.0 - fr) + bottom * fr
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnomalyKind {
    Intensity,
    Sink,
    Source,
    Shuffle,
}

impl AnomalyKind {
    pub const ALL: [AnomalyKind; 4] = [
        AnomalyKind::Intensity,
        AnomalyKind::Sink,
        AnomalyKind::Source,
        AnomalyKind::Shuffle,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            AnomalyKind::Intensity => "intensity",
            AnomalyKind::Sink => "sink",
            AnomalyKind::Source => "source",
            AnomalyKind::Shuffle => "shuffle",
        }
    }
}

impl fmt::Display for AnomalyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AnomalyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AnomalyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown anomaly kind {s:?}")))
    }
}

/// A fully parameterized anomaly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Anomaly {
    Intensity(f64),
    Sink,
    Source,
    Shuffle,
}

impl Anomaly {
    pub fn kind(&self) -> AnomalyKind {
        match self {
            Anomaly::Intensity(_) => AnomalyKind::Intensity,
            Anomaly::Sink => AnomalyKind::Sink,
            Anomaly::Source => AnomalyKind::Source,
            Anomaly::Shuffle => AnomalyKind::Shuffle,
        }
    }

    pub fn from_kind(kind: AnomalyKind, intensity: Option<f64>) -> Result<Self> {
        Ok(match kind {
            AnomalyKind::Intensity => {
                let i = intensity.ok_or_else(|| Error::invalid("intensity anomaly needs an intensity value"))?;
                if !(0.0..=1.0).contains(&i) {
                    return Err(Error::invalid(format!("intensity {i} outside [0, 1]")));
                }
                Anomaly::Intensity(i)
            }
            AnomalyKind::Sink => Anomaly::Sink,
            AnomalyKind::Source => Anomaly::Source,
            AnomalyKind::Shuffle => Anomaly::Shuffle,
        })
    }
}

/// An anomalous image with its ground truth and the parameters that made it.
#[derive(Clone, Debug, PartialEq)]
pub struct InjectionRecord {
    pub image: Grid,
    pub truth: BinaryMask,
    pub kind: AnomalyKind,
    pub intensity: Option<f64>,
    pub region: RegionSpec,
    pub seed: u64,
}

/// JSON sidecar written next to an injected image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InjectionSidecar {
    pub kind: AnomalyKind,
    #[serde(rename = "I")]
    pub intensity: Option<f64>,
    pub center: [f64; 2],
    pub radius: f64,
    pub seed: u64,
}

impl InjectionRecord {
    pub fn sidecar(&self) -> InjectionSidecar {
        InjectionSidecar {
            kind: self.kind,
            intensity: self.intensity,
            center: [self.region.center.0, self.region.center.1],
            radius: self.region.radius,
            seed: self.seed,
        }
    }

    /// Writes `<key>.f32g`, `<key>.maskg` and `<key>.json` into `dir`.
    pub fn save(&self, dir: &Path, key: &str) -> Result<()> {
        self.image.write(dir.join(format!("{key}.f32g")))?;
        self.truth.write(dir.join(format!("{key}.maskg")))?;
        let path = dir.join(format!("{key}.json"));
        let json = serde_json::to_string_pretty(&self.sidecar())
            .map_err(|e| Error::Numerical(e.to_string()))?;
        fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path, key: &str) -> Result<Self> {
        let image = Grid::read(dir.join(format!("{key}.f32g")))?;
        let truth = BinaryMask::read(dir.join(format!("{key}.maskg")))?;
        let path = dir.join(format!("{key}.json"));
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let side: InjectionSidecar = serde_json::from_str(&text).map_err(|e| Error::Malformed {
            path: path.clone(),
            message: e.to_string(),
        })?;
        truth.ensure_same_shape(image.shape())?;
        Ok(Self {
            image,
            truth,
            kind: side.kind,
            intensity: side.intensity,
            region: RegionSpec::new(side.center[0], side.center[1], side.radius)?,
            seed: side.seed,
        })
    }
}

fn record(
    image: Grid,
    region: RegionSpec,
    kind: AnomalyKind,
    intensity: Option<f64>,
    seed: u64,
) -> Result<InjectionRecord> {
    let truth = rasterize_disk(&region, image.height(), image.width())?;
    Ok(InjectionRecord {
        image,
        truth,
        kind,
        intensity,
        region,
        seed,
    })
}

/// Replaces every disk pixel with the constant `intensity`.
pub fn inject_intensity(source: &Grid, region: &RegionSpec, intensity: f64) -> Result<InjectionRecord> {
    if !(0.0..=1.0).contains(&intensity) {
        return Err(Error::invalid(format!("intensity {intensity} outside [0, 1]")));
    }
    region.check_bounds(source.height(), source.width())?;
    let mut px = source.pixels().to_vec();
    for i in region.pixel_indices(source.height(), source.width()) {
        px[i] = intensity as f32;
    }
    let image = Grid::from_raw(source.height(), source.width(), px);
    record(image, *region, AnomalyKind::Intensity, Some(intensity), 0)
}

/// Radial warp: each disk pixel `J` takes the bilinear sample of the source at
/// `warp(J, s)` where `s = |J - center| / radius`.
fn warp(
    source: &Grid,
    region: &RegionSpec,
    kind: AnomalyKind,
    target: impl Fn((f64, f64), (f64, f64), f64) -> (f64, f64),
) -> Result<InjectionRecord> {
    let (h, w) = source.shape();
    region.check_bounds(h, w)?;
    let mut px = source.pixels().to_vec();
    for i in region.pixel_indices(h, w) {
        let j = ((i / w) as f64, (i % w) as f64);
        let d = ((j.0 - region.center.0).powi(2) + (j.1 - region.center.1).powi(2)).sqrt();
        let s = d / region.radius;
        let v = target(j, region.center, s);
        px[i] = bilinear_sample(source, v.0, v.1) as f32;
    }
    record(Grid::from_raw(h, w, px), *region, kind, None, 0)
}

/// Sink deformation: content is pushed away from the center,
/// `V = J + (1 - s)(J - center)`.
pub fn inject_sink(source: &Grid, region: &RegionSpec) -> Result<InjectionRecord> {
    warp(source, region, AnomalyKind::Sink, |j, hc, s| {
        (j.0 + (1.0 - s) * (j.0 - hc.0), j.1 + (1.0 - s) * (j.1 - hc.1))
    })
}

/// Source deformation: content is pulled toward the center,
/// `V = center + s(J - center)`.
pub fn inject_source(source: &Grid, region: &RegionSpec) -> Result<InjectionRecord> {
    warp(source, region, AnomalyKind::Source, |j, hc, s| {
        (hc.0 + s * (j.0 - hc.0), hc.1 + s * (j.1 - hc.1))
    })
}

/// Seeded Fisher-Yates permutation of the disk pixel values.
pub fn inject_shuffle(source: &Grid, region: &RegionSpec, seed: u64) -> Result<InjectionRecord> {
    let (h, w) = source.shape();
    region.check_bounds(h, w)?;
    let idx = region.pixel_indices(h, w);
    let mut values: Vec<f32> = idx.iter().map(|&i| source.pixels()[i]).collect();
    values.shuffle(&mut rng::stream(seed));
    let mut px = source.pixels().to_vec();
    for (&i, v) in idx.iter().zip(values) {
        px[i] = v;
    }
    record(Grid::from_raw(h, w, px), *region, AnomalyKind::Shuffle, None, seed)
}

/// Dispatches to the injector for `anomaly`. `seed` is only consumed by
/// shuffles but is recorded for every kind.
pub fn inject(source: &Grid, region: &RegionSpec, anomaly: Anomaly, seed: u64) -> Result<InjectionRecord> {
    let mut rec = match anomaly {
        Anomaly::Intensity(i) => inject_intensity(source, region, i)?,
        Anomaly::Sink => inject_sink(source, region)?,
        Anomaly::Source => inject_source(source, region)?,
        Anomaly::Shuffle => inject_shuffle(source, region, seed)?,
    };
    rec.seed = seed;
    Ok(rec)
}
