//! Browser demo: inject an anomaly into a phantom, reconstruct it with a
//! Gaussian blur and score the residual; plot AP against intensity; show
//! what histogram equalization does to a phantom.
//!
//! The exported functions are thin wrappers over plain Rust so the logic
//! is testable natively.

use residual_lab_core::harness::panels::montage;
use residual_lab_core::harness::plot::{emit_plot, PlotKind};
use residual_lab_core::harness::{run_on, ExperimentId, SweepConfig};
use residual_lab_core::phantom::{make_phantom, phantom_set};
use residual_lab_core::recon::gaussian_blur;
use residual_lab_core::scoring::{average_precision, residual_map};
use residual_lab_core::stats::equalize_masked;
use residual_lab_core::synth::{inject, sample_region, Anomaly, AnomalyKind};
use residual_lab_core::{BinaryMask, Grid, Result, Sample};
use wasm_bindgen::prelude::*;

const BINS: usize = 256;

/// Grayscale strip rendered as RGBA, ready for `ImageData`.
#[wasm_bindgen]
pub struct Strip {
    width: u32,
    height: u32,
    rgba: Vec<u8>,
    ap: f64,
}

#[wasm_bindgen]
impl Strip {
    #[wasm_bindgen(getter)]
    pub fn width(&self) -> u32 {
        self.width
    }

    #[wasm_bindgen(getter)]
    pub fn height(&self) -> u32 {
        self.height
    }

    /// NaN when the strip is not a scored cell.
    #[wasm_bindgen(getter)]
    pub fn ap(&self) -> f64 {
        self.ap
    }

    pub fn rgba(&self) -> Vec<u8> {
        self.rgba.clone()
    }
}

fn strip(grids: &[&Grid], ap: f64) -> Result<Strip> {
    let (width, height, gray) = montage(grids)?;
    let rgba = gray.iter().flat_map(|&v| [v, v, v, 255]).collect();
    Ok(Strip {
        width,
        height,
        rgba,
        ap,
    })
}

fn phantom(seed: u32, size: usize, equalize: bool) -> Result<(Grid, BinaryMask)> {
    let (image, mask) = make_phantom(seed as u64, size, size)?;
    if equalize {
        Ok((equalize_masked(&image, &mask, BINS)?, mask))
    } else {
        Ok((image, mask))
    }
}

/// Input, blurred reconstruction and residual side by side, plus the AP of
/// the residual against the injected disk.
#[allow(clippy::too_many_arguments)]
pub fn score_cell(
    seed: u32,
    size: usize,
    kind: &str,
    intensity: f64,
    radius: f64,
    sigma: f64,
    equalize: bool,
) -> Result<Strip> {
    let (image, mask) = phantom(seed, size, equalize)?;
    let kind: AnomalyKind = kind.parse()?;
    let anomaly = Anomaly::from_kind(kind, (kind == AnomalyKind::Intensity).then_some(intensity))?;
    let region = sample_region(&mask, radius, seed as u64 ^ 0x5eed)?;
    let rec = inject(&image, &region, anomaly, seed as u64)?;
    let recon = gaussian_blur(&image, sigma)?;
    let residual = residual_map(&rec.image, &recon)?;
    let ap = average_precision(&residual, &rec.truth, None)?;
    strip(&[&rec.image, &recon, residual.grid()], ap)
}

/// Mean AP against fill intensity for a few blur widths, as an SVG line chart.
pub fn intensity_curve(seed: u32, n_images: usize, size: usize, radius: f64, sigmas: &[f64]) -> Result<String> {
    let test: Vec<Sample> = phantom_set(seed as u64, n_images, size)?
        .into_iter()
        .enumerate()
        .map(|(i, (image, mask))| Sample {
            id: format!("phantom_{i}"),
            image,
            mask: Some(mask),
        })
        .collect();
    let mut cfg = SweepConfig::new(ExperimentId::Exp1);
    cfg.seed = seed as u64;
    cfg.radius = radius;
    cfg.sigmas = sigmas.to_vec();
    cfg.intensities = (0..=10).map(|i| i as f64 / 10.0).collect();
    let out = run_on(&cfg, &test, None, None, 1)?;
    emit_plot(&out.rows, PlotKind::Line)
}

/// A phantom before and after equalization inside its object mask.
pub fn equalization(seed: u32, size: usize) -> Result<Strip> {
    let (image, mask) = phantom(seed, size, false)?;
    let eq = equalize_masked(&image, &mask, BINS)?;
    strip(&[&image, &eq], f64::NAN)
}

fn js(e: residual_lab_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = scoreCell)]
pub fn score_cell_js(
    seed: u32,
    size: usize,
    kind: &str,
    intensity: f64,
    radius: f64,
    sigma: f64,
    equalize: bool,
) -> std::result::Result<Strip, JsError> {
    score_cell(seed, size, kind, intensity, radius, sigma, equalize).map_err(js)
}

#[wasm_bindgen(js_name = intensityCurve)]
pub fn intensity_curve_js(
    seed: u32,
    n_images: usize,
    size: usize,
    radius: f64,
    sigmas: Vec<f64>,
) -> std::result::Result<String, JsError> {
    intensity_curve(seed, n_images, size, radius, &sigmas).map_err(js)
}

#[wasm_bindgen(js_name = equalization)]
pub fn equalization_js(seed: u32, size: usize) -> std::result::Result<Strip, JsError> {
    equalization(seed, size).map_err(js)
}
