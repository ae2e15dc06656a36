//! Residual anomaly maps and exact pixel-wise average precision.

use std::io::Write;

use crate::error::{Error, Result};
use crate::grid::{BinaryMask, Grid};

/// Per-pixel anomaly scores (non-negative, finite).
#[derive(Clone, Debug, PartialEq)]
pub struct AnomalyMap(Grid);

impl AnomalyMap {
    pub fn new(scores: Grid) -> Result<Self> {
        if let Some(i) = scores.pixels().iter().position(|&v| v < 0.0) {
            return Err(Error::invalid(format!("negative anomaly score at index {i}")));
        }
        Ok(Self(scores))
    }

    pub fn grid(&self) -> &Grid {
        &self.0
    }

    pub fn into_grid(self) -> Grid {
        self.0
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }
}

/// `a_i = |x_i - x_hat_i|`.
pub fn residual_map(x: &Grid, x_hat: &Grid) -> Result<AnomalyMap> {
    x.ensure_same_shape(x_hat.shape())?;
    let px = x
        .pixels()
        .iter()
        .zip(x_hat.pixels())
        .map(|(&a, &b)| (a - b).abs())
        .collect();
    Ok(AnomalyMap(Grid::from_raw(x.height(), x.width(), px)))
}

/// Average precision of `scores` against `truth`, optionally restricted to
/// `eval_mask`.
///
/// Pixels are ranked by descending score and every run of equal scores is
/// treated as a single threshold, so AP = sum over groups of
/// `(R_g - R_{g-1}) * P_g`. The result does not depend on pixel order and a
/// constant map scores exactly the positive prevalence.
pub fn average_precision(
    scores: &AnomalyMap,
    truth: &BinaryMask,
    eval_mask: Option<&BinaryMask>,
) -> Result<f64> {
    truth.ensure_same_shape(scores.shape())?;
    if let Some(m) = eval_mask {
        m.ensure_same_shape(scores.shape())?;
    }
    let s = scores.grid().pixels();
    let t = truth.values();
    let mut ranked: Vec<(f32, bool)> = match eval_mask {
        Some(m) => m.indices().map(|i| (s[i], t[i])).collect(),
        None => s.iter().copied().zip(t.iter().copied()).collect(),
    };
    ranked_average_precision(&mut ranked)
}

/// AP over `(score, is_positive)` pairs; reorders the slice.
pub fn ranked_average_precision(ranked: &mut [(f32, bool)]) -> Result<f64> {
    let positives = ranked.iter().filter(|p| p.1).count();
    if positives == 0 {
        return Err(Error::NoPositives);
    }
    ranked.sort_unstable_by(|a, b| b.0.total_cmp(&a.0));
    let total_pos = positives as f64;
    let mut tp = 0usize;
    let mut seen = 0usize;
    let mut ap = 0.0f64;
    let mut i = 0;
    while i < ranked.len() {
        let score = ranked[i].0;
        let group_tp = ranked[i..]
            .iter()
            .take_while(|p| p.0 == score)
            .fold((0usize, 0usize), |(n, pos), p| (n + 1, pos + p.1 as usize));
        seen += group_tp.0;
        i += group_tp.0;
        if group_tp.1 > 0 {
            tp += group_tp.1;
            ap += group_tp.1 as f64 * (tp as f64 / seen as f64);
        }
    }
    // dividing once keeps a perfect ranking at exactly 1
    Ok(ap / total_pos)
}

/// Which pixels enter the AP computation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EvalPolicy {
    /// Every pixel of the image.
    #[default]
    Full,
    /// Only pixels inside the object mask.
    Object,
}

impl EvalPolicy {
    pub fn as_str(&self) -> &'static str {
        match self {
            EvalPolicy::Full => "full",
            EvalPolicy::Object => "object",
        }
    }
}

impl std::str::FromStr for EvalPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(EvalPolicy::Full),
            "object" => Ok(EvalPolicy::Object),
            other => Err(Error::invalid(format!("unknown eval-mask policy {other:?}"))),
        }
    }
}

/// One image's contribution to a dataset score.
#[derive(Clone, Debug)]
pub struct ScoredImage<'a> {
    pub id: &'a str,
    pub map: &'a AnomalyMap,
    pub truth: &'a BinaryMask,
    /// Used when the policy is [`EvalPolicy::Object`].
    pub object: Option<&'a BinaryMask>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ApResult {
    pub ids: Vec<String>,
    pub per_image: Vec<f64>,
    pub mean: f64,
}

impl ApResult {
    pub fn from_values(ids: Vec<String>, per_image: Vec<f64>) -> Result<Self> {
        if per_image.is_empty() || ids.len() != per_image.len() {
            return Err(Error::invalid("AP result needs one value per image and at least one image"));
        }
        let mean = per_image.iter().sum::<f64>() / per_image.len() as f64;
        Ok(Self {
            ids,
            per_image,
            mean,
        })
    }

    pub fn count(&self) -> usize {
        self.per_image.len()
    }

    /// Population standard deviation of the per-image values.
    pub fn std(&self) -> f64 {
        population_std(&self.per_image)
    }

    /// `image_id,ap` rows followed by a `__mean__` row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Numerical(e.to_string());
        w.write_record(["image_id", "ap"]).map_err(io)?;
        for (id, ap) in self.ids.iter().zip(&self.per_image) {
            w.write_record([id.as_str(), &format!("{ap}")]).map_err(io)?;
        }
        w.write_record(["__mean__", &format!("{}", self.mean)]).map_err(io)?;
        w.flush().map_err(|e| Error::Numerical(e.to_string()))?;
        Ok(())
    }
}

pub fn population_std(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64).sqrt()
}

/// Macro-averaged AP over images; errors carry the failing image's id.
pub fn dataset_ap(images: &[ScoredImage<'_>], policy: EvalPolicy) -> Result<ApResult> {
    let per_image = images
        .iter()
        .map(|img| {
            let eval = match policy {
                EvalPolicy::Full => None,
                EvalPolicy::Object => Some(img.object.ok_or_else(|| {
                    Error::invalid("object evaluation policy needs an object mask")
                })?),
            };
            average_precision(img.map, img.truth, eval).map_err(|e| e.for_image(img.id))
        })
        .collect::<Result<Vec<f64>>>()?;
    ApResult::from_values(images.iter().map(|i| i.id.to_string()).collect(), per_image)
}

/// Result of matching a model's AP-vs-intensity curve against blur curves.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveMatch {
    pub sigmas: Vec<f64>,
    /// L1 distance to the model curve, one per sigma.
    pub distances: Vec<f64>,
    pub best_sigma: f64,
    pub best_distance: f64,
}

/// Picks the blur strength whose curve has the least summed absolute
/// difference to `model_curve`; ties go to the smaller sigma.
pub fn best_matching_sigma(model_curve: &[f64], blur_curves: &[(f64, Vec<f64>)]) -> Result<CurveMatch> {
    if blur_curves.is_empty() || model_curve.is_empty() {
        return Err(Error::invalid("curve matching needs a model curve and at least one blur curve"));
    }
    let mut order: Vec<usize> = (0..blur_curves.len()).collect();
    order.sort_by(|&a, &b| blur_curves[a].0.total_cmp(&blur_curves[b].0));
    let mut sigmas = Vec::with_capacity(order.len());
    let mut distances = Vec::with_capacity(order.len());
    let mut best: Option<(f64, f64)> = None;
    for i in order {
        let (sigma, curve) = &blur_curves[i];
        if curve.len() != model_curve.len() {
            return Err(Error::invalid(format!(
                "blur curve for sigma {sigma} has {} points, model curve has {}",
                curve.len(),
                model_curve.len()
            )));
        }
        let d: f64 = curve.iter().zip(model_curve).map(|(a, b)| (a - b).abs()).sum();
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((*sigma, d));
        }
        sigmas.push(*sigma);
        distances.push(d);
    }
    let (best_sigma, best_distance) = best.expect("at least one curve");
    Ok(CurveMatch {
        sigmas,
        distances,
        best_sigma,
        best_distance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn map(h: usize, w: usize, v: Vec<f32>) -> AnomalyMap {
        AnomalyMap::new(Grid::new(h, w, v).unwrap()).unwrap()
    }

    fn mask(h: usize, w: usize, v: &[u8]) -> BinaryMask {
        BinaryMask::new(h, w, v.iter().map(|&b| b == 1).collect()).unwrap()
    }

    /// Threshold enumeration: for each distinct score t, classify `>= t`.
    fn brute_force_ap(scores: &[f32], labels: &[bool]) -> f64 {
        let mut thresholds: Vec<f32> = scores.to_vec();
        thresholds.sort_by(|a, b| b.total_cmp(a));
        thresholds.dedup();
        let pos = labels.iter().filter(|&&l| l).count() as f64;
        let mut prev_recall = 0.0;
        let mut ap = 0.0;
        for t in thresholds {
            let mut tp = 0.0;
            let mut fp = 0.0;
            for (s, l) in scores.iter().zip(labels) {
                if *s >= t {
                    if *l {
                        tp += 1.0;
                    } else {
                        fp += 1.0;
                    }
                }
            }
            let recall = tp / pos;
            ap += (recall - prev_recall) * (tp / (tp + fp));
            prev_recall = recall;
        }
        ap
    }

    #[test]
    fn residual_basics() {
        let x = Grid::new(1, 2, vec![0.8, 0.2]).unwrap();
        let y = Grid::new(1, 2, vec![0.3, 0.2]).unwrap();
        let a = residual_map(&x, &y).unwrap();
        assert!((a.grid().pixels()[0] - 0.5).abs() < 1e-7);
        assert_eq!(a.grid().pixels()[1], 0.0);
        assert_eq!(residual_map(&y, &x).unwrap(), a);
        assert!(residual_map(&x, &x).unwrap().grid().pixels().iter().all(|&v| v == 0.0));
        assert!(residual_map(&x, &Grid::filled(2, 1, 0.0).unwrap()).is_err());
    }

    #[test]
    fn perfect_scores_give_one() {
        let t = mask(2, 3, &[1, 0, 0, 1, 0, 0]);
        let s = map(2, 3, vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(average_precision(&s, &t, None).unwrap(), 1.0);
    }

    #[test]
    fn constant_scores_give_prevalence() {
        let t = mask(2, 4, &[1, 0, 0, 1, 0, 0, 1, 0]);
        let s = map(2, 4, vec![0.3; 8]);
        assert_eq!(average_precision(&s, &t, None).unwrap(), 3.0 / 8.0);
        let zeros = map(2, 4, vec![0.0; 8]);
        assert_eq!(average_precision(&zeros, &t, None).unwrap(), 3.0 / 8.0);
    }

    #[test]
    fn worked_example() {
        let t = mask(1, 4, &[1, 0, 1, 0]);
        let s = map(1, 4, vec![0.9, 0.8, 0.7, 0.1]);
        let expected = brute_force_ap(&[0.9, 0.8, 0.7, 0.1], &[true, false, true, false]);
        assert!((expected - (0.5 + 2.0 / 3.0 * 0.5)).abs() < 1e-12);
        assert!((average_precision(&s, &t, None).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn no_positives_is_an_error() {
        let t = mask(1, 3, &[0, 0, 0]);
        let s = map(1, 3, vec![0.1, 0.2, 0.3]);
        assert!(matches!(average_precision(&s, &t, None), Err(Error::NoPositives)));
        // positives exist but fall outside the evaluation region
        let t = mask(1, 3, &[1, 0, 0]);
        let e = mask(1, 3, &[0, 1, 1]);
        assert!(matches!(average_precision(&s, &t, Some(&e)), Err(Error::NoPositives)));
    }

    #[test]
    fn eval_mask_excludes_outside_pixels() {
        let t = mask(1, 5, &[1, 0, 1, 0, 0]);
        let e = mask(1, 5, &[1, 1, 1, 0, 0]);
        let base = map(1, 5, vec![0.9, 0.1, 0.7, 0.0, 0.0]);
        let loud = map(1, 5, vec![0.9, 0.1, 0.7, 1e30, 5e29]);
        let a = average_precision(&base, &t, Some(&e)).unwrap();
        assert_eq!(a, 1.0);
        assert_eq!(average_precision(&loud, &t, Some(&e)).unwrap(), a);
        assert!(average_precision(&loud, &t, None).unwrap() < a);
    }

    #[test]
    fn dataset_mean_and_order_invariance() {
        let t1 = mask(1, 2, &[1, 0]);
        let m1 = map(1, 2, vec![1.0, 0.0]);
        let t2 = mask(1, 2, &[1, 0]);
        let m2 = map(1, 2, vec![0.5, 0.5]);
        let a = ScoredImage { id: "a", map: &m1, truth: &t1, object: None };
        let b = ScoredImage { id: "b", map: &m2, truth: &t2, object: None };
        let r = dataset_ap(&[a.clone(), b.clone()], EvalPolicy::Full).unwrap();
        assert_eq!(r.per_image, vec![1.0, 0.5]);
        assert_eq!(r.mean, 0.75);
        let r2 = dataset_ap(&[b.clone(), a.clone()], EvalPolicy::Full).unwrap();
        assert_eq!(r2.mean, r.mean);
        let single = dataset_ap(&[b], EvalPolicy::Full).unwrap();
        assert_eq!(single.mean, 0.5);
    }

    #[test]
    fn dataset_errors_name_the_image() {
        let t = mask(1, 2, &[0, 0]);
        let m = map(1, 2, vec![1.0, 0.0]);
        let err = dataset_ap(&[ScoredImage { id: "img_7", map: &m, truth: &t, object: None }], EvalPolicy::Full)
            .unwrap_err();
        assert!(err.to_string().contains("img_7"));
    }

    #[test]
    fn ap_csv_layout() {
        let r = ApResult::from_values(vec!["x".into(), "y".into()], vec![1.0, 0.5]).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "image_id,ap\nx,1\ny,0.5\n__mean__,0.75\n");
    }

    #[test]
    fn curve_match_identity_and_ties() {
        let curves = vec![
            (0.25, vec![0.9, 0.5, 0.8]),
            (0.61, vec![0.85, 0.4, 0.7]),
            (2.0, vec![0.6, 0.2, 0.5]),
        ];
        let m = best_matching_sigma(&[0.85, 0.4, 0.7], &curves).unwrap();
        assert_eq!(m.best_sigma, 0.61);
        assert_eq!(m.best_distance, 0.0);
        // equidistant from 1.0 and 3.0
        let tie = vec![(3.0, vec![0.25]), (1.0, vec![0.75])];
        assert_eq!(best_matching_sigma(&[0.5], &tie).unwrap().best_sigma, 1.0);
        assert!(best_matching_sigma(&[0.5, 0.1], &tie).is_err());
    }

    #[test]
    fn curve_match_agrees_with_reverse_scan() {
        let mut r = rng::stream(5);
        for _ in 0..50 {
            let n = r.random_range(1..8);
            let model: Vec<f64> = (0..n).map(|_| (r.random_range(0..5) as f64) / 4.0).collect();
            let curves: Vec<(f64, Vec<f64>)> = (0..r.random_range(1..9))
                .map(|i| (i as f64 * 0.5, (0..n).map(|_| (r.random_range(0..5) as f64) / 4.0).collect()))
                .collect();
            // independent scan from the largest sigma down, keeping ties
            let mut best = (f64::INFINITY, f64::INFINITY);
            for (s, c) in curves.iter().rev() {
                let d: f64 = c.iter().zip(&model).map(|(a, b)| (a - b).abs()).sum();
                if d <= best.1 {
                    best = (*s, d);
                }
            }
            let m = best_matching_sigma(&model, &curves).unwrap();
            assert_eq!(m.best_sigma, best.0);
            assert_eq!(m.best_distance, best.1);
        }
    }

    proptest! {
        #[test]
        fn matches_brute_force(seed in any::<u64>(), n in 2usize..200, levels in 1u32..50) {
            let mut r = rng::stream(seed);
            let scores: Vec<f32> = (0..n).map(|_| r.random_range(0..levels) as f32 / levels as f32).collect();
            let mut labels: Vec<bool> = (0..n).map(|_| r.random_bool(0.3)).collect();
            labels[0] = true;
            let ap = average_precision(&map(1, n, scores.clone()), &BinaryMask::new(1, n, labels.clone()).unwrap(), None).unwrap();
            prop_assert!((ap - brute_force_ap(&scores, &labels)).abs() < 1e-9);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&ap));
        }

        #[test]
        fn invariant_under_increasing_transform(seed in any::<u64>(), n in 2usize..100) {
            let mut r = rng::stream(seed);
            let scores: Vec<f32> = (0..n).map(|_| r.random_range(0..20) as f32 / 20.0).collect();
            let mut labels: Vec<bool> = (0..n).map(|_| r.random_bool(0.4)).collect();
            labels[n - 1] = true;
            let t = BinaryMask::new(1, n, labels).unwrap();
            let transformed: Vec<f32> = scores.iter().map(|s| (3.0 * s + 0.5).powi(3)).collect();
            let a = average_precision(&map(1, n, scores), &t, None).unwrap();
            let b = average_precision(&map(1, n, transformed), &t, None).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn perfect_separation_is_exactly_one(seed in any::<u64>(), n in 2usize..100) {
            let mut r = rng::stream(seed);
            let labels: Vec<bool> = (0..n).map(|i| i == 0 || r.random_bool(0.5)).collect();
            let scores: Vec<f32> = labels.iter().map(|&l| if l { 0.6 + r.random::<f32>() * 0.4 } else { r.random::<f32>() * 0.5 }).collect();
            let ap = average_precision(&map(1, n, scores), &BinaryMask::new(1, n, labels).unwrap(), None).unwrap();
            prop_assert_eq!(ap, 1.0);
        }

        #[test]
        fn residual_bounded_for_unit_inputs(seed in any::<u64>()) {
            let mut r = rng::stream(seed);
            let a = Grid::from_fn(6, 6, |_, _| r.random::<f32>()).unwrap();
            let b = Grid::from_fn(6, 6, |_, _| r.random::<f32>()).unwrap();
            for &v in residual_map(&a, &b).unwrap().grid().pixels() {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
