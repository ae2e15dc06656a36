//! Procedural brain-like slice phantoms.
//!
//! A phantom is a skull-stripped axial slice stand-in: an elliptical object
//! with a wobbly outline, a dark fluid rim, a folded gray-matter band with
//! bright sulci, darker white matter with deep-gray islands and bright
//! nuclei, and two dark ventricles. Fine grain and a smooth bias modulate
//! the tissue multiplicatively, and a smooth shading field varies the
//! intensity from subject to subject. The background is exactly zero and
//! the returned mask marks the object.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{BinaryMask, Grid};
use crate::manifest::{DatasetManifest, ManifestEntry, Role};
use crate::rng;

pub const MIN_PHANTOM_SIZE: usize = 64;

// Tissue intensities before bias.
const RIM: f64 = 0.22;
const GRAY: f64 = 0.50;
const SULCUS: f64 = 0.78;
const WHITE: f64 = 0.34;
const DEEP_GRAY: f64 = 0.44;
const VENTRICLE: f64 = 0.17;
const NUCLEUS: f64 = 0.64;

/// Amplitude of the smooth additive shading that varies between subjects.
const SHADING: f64 = 0.15;

/// Sum of random plane waves, scaled to roughly `[-1, 1]`.
struct WaveField {
    waves: Vec<(f64, f64, f64, f64)>,
    norm: f64,
}

impl WaveField {
    /// `wavelengths` are in pixels.
    fn new(rng: &mut ChaCha8Rng, count: usize, wavelengths: (f64, f64)) -> Self {
        let waves: Vec<_> = (0..count)
            .map(|_| {
                let lambda = rng.random_range(wavelengths.0..wavelengths.1);
                let angle = rng.random_range(0.0..PI);
                let k = 2.0 * PI / lambda;
                let phase = rng.random_range(0.0..2.0 * PI);
                let amp = rng.random_range(0.5..1.0);
                (k * angle.cos(), k * angle.sin(), phase, amp)
            })
            .collect();
        let energy: f64 = waves.iter().map(|w| w.3 * w.3 / 2.0).sum();
        Self {
            waves,
            norm: 1.0 / (2.0 * energy.sqrt()).max(1e-12),
        }
    }

    fn at(&self, y: f64, x: f64) -> f64 {
        self.waves
            .iter()
            .map(|&(ky, kx, p, a)| a * (ky * y + kx * x + p).cos())
            .sum::<f64>()
            * self.norm
    }
}

struct Ventricle {
    cy: f64,
    cx: f64,
    ry: f64,
    rx: f64,
    cos: f64,
    sin: f64,
}

impl Ventricle {
    fn contains(&self, y: f64, x: f64) -> bool {
        let dy = y - self.cy;
        let dx = x - self.cx;
        let u = self.cos * dx + self.sin * dy;
        let v = -self.sin * dx + self.cos * dy;
        (u / self.rx).powi(2) + (v / self.ry).powi(2) <= 1.0
    }
}

/// Generates one phantom. Pure function of `(seed, height, width)`.
pub fn make_phantom(seed: u64, height: usize, width: usize) -> Result<(Grid, BinaryMask)> {
    if height < MIN_PHANTOM_SIZE || width < MIN_PHANTOM_SIZE {
        return Err(Error::invalid(format!(
            "phantom needs at least {MIN_PHANTOM_SIZE}x{MIN_PHANTOM_SIZE}, got {height}x{width}"
        )));
    }
    let mut rng = rng::stream(rng::mix_label(seed, "phantom"));
    // lengths below are fractions of the half-size of the shorter side
    let scale = height.min(width) as f64 / 2.0;
    let cy = height as f64 / 2.0 - 0.5 + rng.random_range(-0.03..0.03) * scale;
    let cx = width as f64 / 2.0 - 0.5 + rng.random_range(-0.03..0.03) * scale;
    let semi_x = rng.random_range(0.66..0.76) * scale;
    let semi_y = rng.random_range(0.80..0.90) * scale;
    let tilt: f64 = rng.random_range(-0.12..0.12);
    let (tc, ts) = (tilt.cos(), tilt.sin());
    let wobble: Vec<(f64, f64, f64)> = [(3.0, 0.025), (5.0, 0.015), (8.0, 0.01)]
        .iter()
        .map(|&(k, a)| (k, a, rng.random_range(0.0..2.0 * PI)))
        .collect();

    // anatomy shared by the population, varied per subject
    let folds = WaveField::new(&mut rng, 10, (0.10 * scale, 0.22 * scale));
    let sulci = WaveField::new(&mut rng, 8, (0.12 * scale, 0.25 * scale));
    let islands = WaveField::new(&mut rng, 8, (0.18 * scale, 0.35 * scale));
    let nuclei = WaveField::new(&mut rng, 8, (0.18 * scale, 0.35 * scale));
    let shading = WaveField::new(&mut rng, 24, (0.35 * scale, 2.0 * scale));
    let grain = WaveField::new(&mut rng, 12, (0.06 * scale, 0.12 * scale));
    let bias = WaveField::new(&mut rng, 4, (1.2 * scale, 2.5 * scale));

    let vent_size = rng.random_range(0.85..1.2);
    let vent_sep = rng.random_range(0.09..0.14) * scale;
    let vent_shift = rng.random_range(-0.12..0.0) * scale;
    let ventricles: Vec<Ventricle> = [-1.0, 1.0]
        .iter()
        .map(|&side: &f64| {
            let angle = side * rng.random_range(0.2..0.45) + tilt;
            Ventricle {
                cy: cy + vent_shift,
                cx: cx + side * vent_sep,
                ry: 0.26 * vent_size * scale,
                rx: 0.065 * vent_size * scale,
                cos: angle.cos(),
                sin: angle.sin(),
            }
        })
        .collect();

    let mut pixels = vec![0.0f32; height * width];
    let mut mask = vec![false; height * width];
    for r in 0..height {
        for c in 0..width {
            let dy = r as f64 - cy;
            let dx = c as f64 - cx;
            let u = tc * dx + ts * dy;
            let v = -ts * dx + tc * dy;
            let theta = v.atan2(u);
            let outline: f64 = 1.0
                + wobble
                    .iter()
                    .map(|&(k, a, p)| a * (k * theta + p).sin())
                    .sum::<f64>();
            let rho = ((u / semi_x).powi(2) + (v / semi_y).powi(2)).sqrt() / outline;
            if rho > 1.0 {
                continue;
            }
            let y = r as f64;
            let x = c as f64;
            let fold = folds.at(y, x);
            let tissue = if rho > 0.91 + 0.03 * fold {
                RIM
            } else if rho > 0.60 + 0.12 * fold {
                if sulci.at(y, x) > 0.45 {
                    SULCUS
                } else {
                    GRAY
                }
            } else if ventricles.iter().any(|vt| vt.contains(y, x)) {
                VENTRICLE
            } else if nuclei.at(y, x) > 0.25 {
                NUCLEUS
            } else if islands.at(y, x) > 0.4 {
                DEEP_GRAY
            } else {
                WHITE
            };
            let gain = 1.0 + 0.07 * bias.at(y, x) + 0.08 * grain.at(y, x);
            let i = r * width + c;
            pixels[i] = (tissue * gain + SHADING * shading.at(y, x)).clamp(0.05, 0.95) as f32;
            mask[i] = true;
        }
    }
    Ok((
        Grid::from_raw(height, width, pixels),
        BinaryMask::new(height, width, mask)?,
    ))
}

/// Seed of the `index`-th phantom in a dataset with the given master seed.
pub fn phantom_seed(master: u64, index: usize) -> u64 {
    rng::mix(master, index as u64)
}

/// Generates `count` phantoms in memory, in dataset order.
pub fn phantom_set(master: u64, count: usize, size: usize) -> Result<Vec<(Grid, BinaryMask)>> {
    (0..count)
        .map(|i| make_phantom(phantom_seed(master, i), size, size))
        .collect()
}

/// Writes `count` phantom image/mask pairs plus `manifest.txt` into `dir`.
pub fn write_phantom_dataset(
    dir: &Path,
    master: u64,
    count: usize,
    size: usize,
    role: Role,
) -> Result<DatasetManifest> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(count);
    for i in 0..count {
        let (g, m) = make_phantom(phantom_seed(master, i), size, size)?;
        let image = format!("{role}_{i:04}.f32g");
        let mask = format!("{role}_{i:04}.maskg");
        g.write(dir.join(&image))?;
        m.write(dir.join(&mask))?;
        entries.push(ManifestEntry {
            image: image.into(),
            mask: Some(mask.into()),
        });
    }
    let manifest = DatasetManifest {
        role,
        base: dir.to_path_buf(),
        entries,
    };
    manifest.write(dir.join("manifest.txt"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let a = make_phantom(3, 96, 80).unwrap();
        let b = make_phantom(3, 96, 80).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.0, make_phantom(4, 96, 80).unwrap().0);
    }

    #[test]
    fn background_is_exactly_zero_and_mask_matches() {
        let (g, m) = make_phantom(1, 128, 128).unwrap();
        for (v, &inside) in g.pixels().iter().zip(m.values()) {
            if inside {
                assert!(*v > 0.0 && *v <= 1.0);
            } else {
                assert_eq!(*v, 0.0);
            }
        }
        assert_eq!(BinaryMask::nonzero(&g), m);
        let frac = m.count() as f64 / (128.0 * 128.0);
        assert!(frac > 0.3 && frac < 0.75, "object fraction {frac}");
    }

    #[test]
    fn too_small_rejected() {
        assert!(make_phantom(0, 63, 128).is_err());
    }

    #[test]
    fn population_object_mean_near_target() {
        // reference scalar loop over object pixels, seeds 0..99
        let mut total = 0.0;
        for seed in 0..100u64 {
            let (g, m) = make_phantom(seed, 128, 128).unwrap();
            let mut sum = 0.0f64;
            let mut n = 0usize;
            for i in 0..g.len() {
                if m.values()[i] {
                    sum += g.pixels()[i] as f64;
                    n += 1;
                }
            }
            total += sum / n as f64;
        }
        let mean = total / 100.0;
        assert!((mean - 0.45).abs() <= 0.05, "population mean {mean}");
    }

    #[test]
    fn several_intensity_bands_present() {
        let (g, m) = make_phantom(5, 128, 128).unwrap();
        let h = crate::stats::masked_histogram(&g, &m, 10, None).unwrap();
        let occupied = h.counts.iter().filter(|&&c| c > 50).count();
        assert!(occupied >= 3, "{:?}", h.counts);
    }
}
