use crate::error::{Error, Result};
use crate::grid::Grid;

/// Normalized Gaussian taps at integer offsets `-radius..=radius` with
/// `radius = max(1, ceil(4 sigma))`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = ((4.0 * sigma).ceil() as usize).max(1);
    let mut taps: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// Half-sample symmetric reflection (`d c b a | a b c d | d c b a`),
/// repeated as often as needed.
#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let j = i.rem_euclid(period);
    if j < n as isize {
        j as usize
    } else {
        (period - 1 - j) as usize
    }
}

/// Separable Gaussian blur with symmetric-reflect borders. `sigma == 0` is
/// the identity.
pub fn gaussian_blur(grid: &Grid, sigma: f64) -> Result<Grid> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("sigma must be finite and >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(grid.clone());
    }
    let taps = gaussian_kernel(sigma);
    let radius = (taps.len() / 2) as isize;
    let (h, w) = grid.shape();
    let src = grid.pixels();

    let mut horizontal = vec![0.0f64; h * w];
    for r in 0..h {
        let row = &src[r * w..(r + 1) * w];
        for c in 0..w {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                acc += t * row[reflect(c as isize + k as isize - radius, w)] as f64;
            }
            horizontal[r * w + c] = acc;
        }
    }
    let mut out = Vec::with_capacity(h * w);
    let mut acc = vec![0.0f64; w];
    for r in 0..h {
        acc.iter_mut().for_each(|a| *a = 0.0);
        for (k, t) in taps.iter().enumerate() {
            let rr = reflect(r as isize + k as isize - radius, h);
            let line = &horizontal[rr * w..(rr + 1) * w];
            for (a, v) in acc.iter_mut().zip(line) {
                *a += t * v;
            }
        }
        out.extend(acc.iter().map(|&v| v as f32));
    }
    Ok(Grid::from_raw(h, w, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn noise(h: usize, w: usize, seed: u64) -> Grid {
        let mut r = rng::stream(seed);
        Grid::from_fn(h, w, |_, _| r.random::<f32>()).unwrap()
    }

    /// Dense 2D convolution with an explicitly built reflected image.
    fn dense_oracle(g: &Grid, sigma: f64) -> Vec<f64> {
        let (h, w) = g.shape();
        let rad = ((4.0 * sigma).ceil() as isize).max(1);
        let mirror = |i: isize, n: isize| -> usize {
            let mut i = i;
            loop {
                if i < 0 {
                    i = -i - 1;
                } else if i >= n {
                    i = 2 * n - 1 - i;
                } else {
                    return i as usize;
                }
            }
        };
        let mut weights = Vec::new();
        let mut total = 0.0;
        for dy in -rad..=rad {
            for dx in -rad..=rad {
                let wgt = (-((dy * dy + dx * dx) as f64) / (2.0 * sigma * sigma)).exp();
                weights.push((dy, dx, wgt));
                total += wgt;
            }
        }
        let mut out = vec![0.0; h * w];
        for r in 0..h as isize {
            for c in 0..w as isize {
                let mut acc = 0.0;
                for &(dy, dx, wgt) in &weights {
                    acc += wgt * g.get(mirror(r + dy, h as isize), mirror(c + dx, w as isize)) as f64;
                }
                out[r as usize * w + c as usize] = acc / total;
            }
        }
        out
    }

    #[test]
    fn zero_sigma_is_bit_identical() {
        let g = noise(9, 7, 1);
        assert_eq!(gaussian_blur(&g, 0.0).unwrap(), g);
    }

    #[test]
    fn negative_or_nan_sigma_rejected() {
        let g = noise(4, 4, 1);
        assert!(gaussian_blur(&g, -0.1).is_err());
        assert!(gaussian_blur(&g, f64::NAN).is_err());
    }

    #[test]
    fn constant_grid_unchanged() {
        let g = Grid::filled(20, 13, 0.37).unwrap();
        for sigma in [0.25, 1.0, 3.0, 5.0, 12.0] {
            let b = gaussian_blur(&g, sigma).unwrap();
            for &v in b.pixels() {
                assert!((v - 0.37).abs() <= 1e-7, "sigma {sigma}: {v}");
            }
        }
    }

    #[test]
    fn kernel_shape() {
        assert_eq!(gaussian_kernel(0.25).len(), 3);
        assert_eq!(gaussian_kernel(2.0).len(), 17);
        assert!(gaussian_kernel(0.25)[1] >= 0.999);
        assert!((gaussian_kernel(1.7).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn matches_dense_oracle() {
        for (seed, sigma) in [(1u64, 0.25), (2, 0.7), (3, 2.0), (4, 5.0)] {
            let g = noise(23, 17, seed);
            let fast = gaussian_blur(&g, sigma).unwrap();
            let slow = dense_oracle(&g, sigma);
            for (a, b) in fast.pixels().iter().zip(&slow) {
                assert!((*a as f64 - b).abs() < 1e-6, "sigma {sigma}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn quarter_sigma_is_near_identity() {
        // worst case is a 0/1 checkerboard
        let g = Grid::from_fn(32, 32, |r, c| ((r + c) % 2) as f32).unwrap();
        let b = gaussian_blur(&g, 0.25).unwrap();
        let slow = dense_oracle(&g, 0.25);
        let mut worst = 0.0f64;
        for ((a, o), s) in g.pixels().iter().zip(b.pixels()).zip(&slow) {
            worst = worst.max((*a as f64 - *o as f64).abs());
            assert!((*o as f64 - s).abs() < 1e-6);
        }
        assert!(worst <= 5e-3, "max change {worst}");
    }

    proptest! {
        #[test]
        fn preserves_mean_and_range(seed in any::<u64>(), sigma in 0.1f64..6.0, h in 3usize..30, w in 3usize..30) {
            let g = noise(h, w, seed);
            let b = gaussian_blur(&g, sigma).unwrap();
            let mean = |x: &Grid| x.pixels().iter().map(|&v| v as f64).sum::<f64>() / x.len() as f64;
            prop_assert!((mean(&g) - mean(&b)).abs() < 1e-6);
            let (lo, hi) = g.min_max();
            for &v in b.pixels() {
                prop_assert!(v >= lo - 1e-6 && v <= hi + 1e-6);
            }
        }
    }
}
