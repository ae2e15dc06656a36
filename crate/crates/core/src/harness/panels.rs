//! Qualitative sample panels: anomalous input, reconstruction and residual
//! for selected cells, stored as grids and as an 8-bit PNG montage.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use image::codecs::png::PngEncoder;
use image::{ExtendedColorType, ImageEncoder};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::harness::{cell_seed, region_seed, ExperimentId};
use crate::manifest::Sample;
use crate::recon::gaussian_blur;
use crate::scoring::residual_map;
use crate::synth::{inject, sample_region, Anomaly, AnomalyKind};

/// One panel: which image, which anomaly, and which blur sigma. The blurred
/// healthy image serves as the reconstruction.
///
/// Text form: `IMAGE:KIND[@INTENSITY]:SIGMA`, e.g. `3:intensity@0.5:2`
/// or `0:shuffle:1`.
#[derive(Clone, Debug, PartialEq)]
pub struct PanelCell {
    pub image: usize,
    pub anomaly: Anomaly,
    pub sigma: f64,
}

impl FromStr for PanelCell {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("bad panel cell {s:?}, expected IMAGE:KIND[@I]:SIGMA"));
        let parts: Vec<&str> = s.split(':').collect();
        let [image, kind, sigma] = parts[..] else {
            return Err(bad());
        };
        let (kind, intensity) = match kind.split_once('@') {
            Some((k, i)) => (k, Some(i.parse::<f64>().map_err(|_| bad())?)),
            None => (kind, None),
        };
        let kind: AnomalyKind = kind.parse().map_err(|_| bad())?;
        Ok(PanelCell {
            image: image.parse().map_err(|_| bad())?,
            anomaly: Anomaly::from_kind(kind, intensity)?,
            sigma: sigma.parse().map_err(|_| bad())?,
        })
    }
}

/// `round(v * 255)` after clamping to `[0, 1]`.
pub fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Side-by-side 8-bit montage of equally shaped grids.
pub fn montage(grids: &[&Grid]) -> Result<(u32, u32, Vec<u8>)> {
    let first = grids.first().ok_or_else(|| Error::invalid("montage needs at least one grid"))?;
    let (h, w) = first.shape();
    for g in grids {
        g.ensure_same_shape((h, w))?;
    }
    let total_w = w * grids.len();
    let mut px = vec![0u8; h * total_w];
    for (gi, g) in grids.iter().enumerate() {
        for r in 0..h {
            for c in 0..w {
                px[r * total_w + gi * w + c] = quantize(g.get(r, c));
            }
        }
    }
    Ok((total_w as u32, h as u32, px))
}

pub fn encode_png(width: u32, height: u32, gray: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    PngEncoder::new(&mut out)
        .write_image(gray, width, height, ExtendedColorType::L8)
        .map_err(|e| Error::Numerical(format!("png encoding: {e}")))?;
    Ok(out)
}

/// Writes `panel_NNN.{input,recon,residual}.f32g` and `panel_NNN.png` for
/// every cell. Regions and shuffle orders follow the sweep seeds, so a panel
/// shows exactly what the sweep scored.
pub fn emit_panels(
    samples: &[Sample],
    cells: &[PanelCell],
    radius: f64,
    master: u64,
    dir: &Path,
) -> Result<Vec<String>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for (n, cell) in cells.iter().enumerate() {
        let sample = samples.get(cell.image).ok_or_else(|| {
            Error::invalid(format!(
                "panel cell {n} refers to image {} but the dataset has {}",
                cell.image,
                samples.len()
            ))
        })?;
        let panel = || -> Result<()> {
            let region = sample_region(&sample.object_mask(), radius, region_seed(master, cell.image))?;
            let experiment = match cell.anomaly {
                Anomaly::Intensity(_) => ExperimentId::Exp1,
                _ => ExperimentId::Exp2,
            };
            let seed = cell_seed(master, experiment, cell.image, cell.anomaly.kind());
            let rec = inject(&sample.image, &region, cell.anomaly, seed)?;
            let recon = gaussian_blur(&sample.image, cell.sigma)?;
            let residual = residual_map(&rec.image, &recon)?.into_grid();
            let stem = format!("panel_{n:03}");
            rec.image.write(dir.join(format!("{stem}.input.f32g")))?;
            recon.write(dir.join(format!("{stem}.recon.f32g")))?;
            residual.write(dir.join(format!("{stem}.residual.f32g")))?;
            let (w, h, px) = montage(&[&rec.image, &recon, &residual])?;
            let png = dir.join(format!("{stem}.png"));
            fs::write(&png, encode_png(w, h, &px)?).map_err(|e| Error::io(&png, e))?;
            Ok(())
        };
        panel().map_err(|e| e.for_image(sample.id.clone()))?;
        written.push(format!("panel_{n:03}"));
    }
    Ok(written)
}
