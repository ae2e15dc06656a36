//! Masked intensity statistics, histograms and histogram equalization.

use crate::error::{Error, Result};
use crate::grid::{BinaryMask, Grid};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectStats {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

/// Mean, population std, min and max of the masked pixels.
pub fn object_stats(grid: &Grid, mask: &BinaryMask) -> Result<ObjectStats> {
    mask.ensure_same_shape(grid.shape())?;
    let px = grid.pixels();
    let count = mask.count();
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    let mut sum = 0.0f64;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for i in mask.indices() {
        let v = px[i] as f64;
        sum += v;
        min = min.min(v);
        max = max.max(v);
    }
    let mean = sum / count as f64;
    let var = mask
        .indices()
        .map(|i| {
            let d = px[i] as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / count as f64;
    Ok(ObjectStats {
        mean,
        std: var.sqrt(),
        min,
        max,
        count,
    })
}

/// Counts of masked pixels over uniform bins on `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct HistogramReport {
    /// `bins + 1` edges from 0 to 1.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Per-bin counts inside and outside the split mask, when one was given.
    pub split: Option<SplitCounts>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitCounts {
    pub inside: Vec<u64>,
    pub outside: Vec<u64>,
}

impl HistogramReport {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }
}

/// Bin of `v` among `bins` uniform bins on `[0, 1]`: bin `b` holds
/// `b/bins <= v < (b+1)/bins`, the last bin is closed on the right, and
/// values outside `[0, 1]` land in the end bins.
pub fn bin_index(v: f64, bins: usize) -> usize {
    let n = bins as f64;
    let edge = |b: usize| b as f64 / n;
    let mut b = (v * n).floor().clamp(0.0, n - 1.0) as usize;
    while b > 0 && v < edge(b) {
        b -= 1;
    }
    while b + 1 < bins && v >= edge(b + 1) {
        b += 1;
    }
    b
}

pub fn masked_histogram(
    grid: &Grid,
    mask: &BinaryMask,
    bins: usize,
    split_mask: Option<&BinaryMask>,
) -> Result<HistogramReport> {
    if bins < 2 {
        return Err(Error::invalid(format!("histogram needs at least 2 bins, got {bins}")));
    }
    mask.ensure_same_shape(grid.shape())?;
    if let Some(s) = split_mask {
        s.ensure_same_shape(grid.shape())?;
    }
    if mask.is_empty_selection() {
        return Err(Error::EmptyMask);
    }
    let mut counts = vec![0u64; bins];
    let mut split = split_mask.map(|_| SplitCounts {
        inside: vec![0; bins],
        outside: vec![0; bins],
    });
    let px = grid.pixels();
    for i in mask.indices() {
        let b = bin_index(px[i] as f64, bins);
        counts[b] += 1;
        if let (Some(sc), Some(sm)) = (split.as_mut(), split_mask) {
            if sm.values()[i] {
                sc.inside[b] += 1;
            } else {
                sc.outside[b] += 1;
            }
        }
    }
    Ok(HistogramReport {
        edges: (0..=bins).map(|b| b as f64 / bins as f64).collect(),
        counts,
        split,
    })
}

/// Histogram-equalizes the masked pixels only.
///
/// Each masked value is replaced by the fraction of masked pixels whose bin
/// is at or below its own bin, so the brightest bin always maps to 1.0.
/// Unmasked pixels are copied through unchanged.
pub fn equalize_masked(grid: &Grid, mask: &BinaryMask, bins: usize) -> Result<Grid> {
    let hist = masked_histogram(grid, mask, bins, None)?;
    let total = hist.total() as f64;
    let mut running = 0u64;
    let cdf: Vec<f32> = hist
        .counts
        .iter()
        .map(|&c| {
            running += c;
            (running as f64 / total) as f32
        })
        .collect();
    let mut out = grid.pixels().to_vec();
    for i in mask.indices() {
        out[i] = cdf[bin_index(out[i] as f64, bins)];
    }
    Ok(Grid::from_raw(grid.height(), grid.width(), out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_grid(h: usize, w: usize, seed: u64) -> Grid {
        let mut r = rng::stream(seed);
        Grid::from_fn(h, w, |_, _| r.random::<f32>()).unwrap()
    }

    #[test]
    fn constant_object_has_zero_std() {
        let g = Grid::filled(4, 4, 0.5).unwrap();
        let m = BinaryMask::filled(4, 4, true).unwrap();
        let s = object_stats(&g, &m).unwrap();
        assert_eq!(s.mean, 0.5);
        assert_eq!(s.std, 0.0);
    }

    #[test]
    fn two_pixel_population_std() {
        let g = Grid::new(1, 3, vec![0.2, 0.6, 0.9]).unwrap();
        let m = BinaryMask::new(1, 3, vec![true, true, false]).unwrap();
        let s = object_stats(&g, &m).unwrap();
        assert!((s.mean - 0.4).abs() < 1e-7);
        assert!((s.std - 0.2).abs() < 1e-7);
        assert!((s.min - 0.2).abs() < 1e-7 && (s.max - 0.6).abs() < 1e-7);
    }

    #[test]
    fn empty_mask_errors() {
        let g = Grid::filled(2, 2, 0.5).unwrap();
        let m = BinaryMask::filled(2, 2, false).unwrap();
        assert!(matches!(object_stats(&g, &m), Err(Error::EmptyMask)));
        assert!(matches!(masked_histogram(&g, &m, 4, None), Err(Error::EmptyMask)));
        assert!(matches!(equalize_masked(&g, &m, 4), Err(Error::EmptyMask)));
    }

    #[test]
    fn histogram_small_cases() {
        let g = Grid::filled(3, 3, 0.5).unwrap();
        let m = BinaryMask::filled(3, 3, true).unwrap();
        assert_eq!(masked_histogram(&g, &m, 2, None).unwrap().counts, vec![0, 9]);
        let g = Grid::new(1, 2, vec![0.1, 0.9]).unwrap();
        let m = BinaryMask::filled(1, 2, true).unwrap();
        assert_eq!(masked_histogram(&g, &m, 2, None).unwrap().counts, vec![1, 1]);
        assert!(masked_histogram(&g, &m, 1, None).is_err());
    }

    #[test]
    fn last_bin_is_right_inclusive() {
        let g = Grid::new(1, 3, vec![0.0, 1.0, 0.999]).unwrap();
        let m = BinaryMask::filled(1, 3, true).unwrap();
        assert_eq!(masked_histogram(&g, &m, 4, None).unwrap().counts, vec![1, 0, 0, 2]);
    }

    #[test]
    fn histogram_matches_per_pixel_counting_oracle() {
        let g = random_grid(16, 16, 42);
        let m = BinaryMask::filled(16, 16, true).unwrap();
        let bins = 10;
        // oracle: linear scan over explicit edges
        let edges: Vec<f64> = (0..=bins).map(|b| b as f64 / bins as f64).collect();
        let mut expected = vec![0u64; bins];
        for &v in g.pixels() {
            let v = v as f64;
            let mut hit = None;
            for b in 0..bins {
                let upper_ok = if b == bins - 1 { v <= edges[b + 1] } else { v < edges[b + 1] };
                if v >= edges[b] && upper_ok {
                    hit = Some(b);
                    break;
                }
            }
            expected[hit.unwrap()] += 1;
        }
        assert_eq!(masked_histogram(&g, &m, bins, None).unwrap().counts, expected);
    }

    #[test]
    fn equalize_constant_region_maps_to_one() {
        let g = Grid::new(1, 4, vec![0.0, 0.3, 0.3, 0.3]).unwrap();
        let m = BinaryMask::new(1, 4, vec![false, true, true, true]).unwrap();
        let e = equalize_masked(&g, &m, 256).unwrap();
        assert_eq!(e.pixels(), &[0.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn equalize_two_levels() {
        let g = Grid::new(1, 5, vec![0.2, 0.8, 0.2, 0.8, 0.05]).unwrap();
        let m = BinaryMask::new(1, 5, vec![true, true, true, true, false]).unwrap();
        let e = equalize_masked(&g, &m, 256).unwrap();
        assert_eq!(e.pixels(), &[0.5, 1.0, 0.5, 1.0, 0.05]);
    }

    #[test]
    fn equalized_histogram_is_roughly_uniform() {
        let g = random_grid(64, 64, 9);
        let g = Grid::new(64, 64, g.pixels().iter().map(|v| v * v).collect()).unwrap();
        let m = BinaryMask::filled(64, 64, true).unwrap();
        let e = equalize_masked(&g, &m, 256).unwrap();
        let h = masked_histogram(&e, &m, 4, None).unwrap();
        for &c in &h.counts {
            assert!((c as f64 - 1024.0).abs() < 80.0, "{:?}", h.counts);
        }
    }

    proptest! {
        #[test]
        fn split_preserves_total(seed in any::<u64>(), bins in 2usize..40) {
            let g = random_grid(12, 9, seed);
            let m = BinaryMask::from_fn(12, 9, |r, c| (r + c + seed as usize) % 3 != 0).unwrap();
            let s = BinaryMask::from_fn(12, 9, |r, _| r < 5).unwrap();
            let h = masked_histogram(&g, &m, bins, Some(&s)).unwrap();
            prop_assert_eq!(h.total() as usize, m.count());
            let sc = h.split.unwrap();
            for b in 0..bins {
                prop_assert_eq!(sc.inside[b] + sc.outside[b], h.counts[b]);
            }
        }

        #[test]
        fn equalize_is_monotone_and_masked_only(seed in any::<u64>()) {
            let g = random_grid(10, 10, seed);
            let m = BinaryMask::from_fn(10, 10, |r, c| (r * 7 + c) % 4 != 0).unwrap();
            let e = equalize_masked(&g, &m, 256).unwrap();
            let idx: Vec<usize> = m.indices().collect();
            for &i in &idx {
                for &j in &idx {
                    if g.pixels()[i] <= g.pixels()[j] {
                        prop_assert!(e.pixels()[i] <= e.pixels()[j]);
                    }
                }
            }
            for i in 0..100 {
                if !m.values()[i] {
                    prop_assert_eq!(e.pixels()[i].to_bits(), g.pixels()[i].to_bits());
                }
            }
        }
    }
}
