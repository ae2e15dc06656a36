//! Seeded experiment sweeps.
//!
//! Every runner works image by image: the image's region is drawn once from
//! the master seed and reused for all cells, then each cell injects an
//! anomaly, reconstructs, and scores the residual. Per-image results are
//! collected in index order, so outputs do not depend on the thread count.

pub mod config;
pub mod panels;
pub mod plot;
pub mod report;

use std::fs;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{BinaryMask, Grid};
use crate::manifest::{DatasetManifest, Sample};
use crate::parallel::map_indexed;
use crate::recon::{
    fit_subspace, gaussian_blur, image_recon_error, ExternalReconSource, Mode, Reconstructor,
    SubspaceModel,
};
use crate::rng::{mix, mix_label};
use crate::scoring::{average_precision, best_matching_sigma, population_std, residual_map, EvalPolicy};
use crate::stats::equalize_masked;
use crate::synth::{inject, sample_region, Anomaly, AnomalyKind, InjectionRecord, RegionSpec};

pub use config::{ExperimentId, ExternalSpec, SweepConfig};
pub use report::{ErrorApRow, ScoreRow, SigmaMatchRow};

/// Intensity band where residual scoring is weakest.
pub const BAND: (f64, f64) = (0.2, 0.6);

/// Region seed for image `index`. It ignores the experiment so that every
/// sweep places the anomaly of a given image at the same spot.
pub fn region_seed(master: u64, index: usize) -> u64 {
    mix(mix_label(master, "region"), index as u64)
}

/// Seed for the random parts of one cell (currently the shuffle order).
pub fn cell_seed(master: u64, experiment: ExperimentId, index: usize, kind: AnomalyKind) -> u64 {
    mix(
        mix_label(mix_label(master, experiment.as_str()), kind.as_str()),
        index as u64,
    )
}

/// Key of an anomalous-mode input in an external reconstruction directory.
pub fn anomalous_key(stem: &str, intensity: f64) -> String {
    format!("{stem}_I{intensity:.3}")
}

fn in_band(i: f64) -> bool {
    i >= BAND.0 - 1e-9 && i <= BAND.1 + 1e-9
}

/// Everything a sweep produced.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub config: SweepConfig,
    pub rows: Vec<ScoreRow>,
    pub error_vs_ap: Vec<ErrorApRow>,
    pub sigma_matches: Vec<SigmaMatchRow>,
}

/// Loads the test set and, when configured, the training set.
pub fn load_samples(cfg: &SweepConfig) -> Result<(Vec<Sample>, Option<Vec<Sample>>)> {
    let test_path = cfg
        .test_manifest
        .as_ref()
        .ok_or_else(|| Error::Config("test_manifest is required".into()))?;
    let test = DatasetManifest::read(test_path)?.load()?;
    if test.is_empty() {
        return Err(Error::Manifest {
            path: test_path.clone(),
            message: "no images".into(),
        });
    }
    let train = match &cfg.train_manifest {
        Some(p) if cfg.experiment.exp3_mode().is_some() => Some(DatasetManifest::read(p)?.load()?),
        _ => None,
    };
    Ok((test, train))
}

/// Loads the data named in `cfg` and runs its experiment.
pub fn run(cfg: &SweepConfig, threads: usize) -> Result<RunOutput> {
    cfg.validate()?;
    let (test, train) = load_samples(cfg)?;
    let blur_rows = match &cfg.blur_reference {
        Some(p) if cfg.experiment.exp3_mode().is_some() => Some(report::read_score_csv_file(p)?),
        _ => None,
    };
    run_on(cfg, &test, train.as_deref(), blur_rows.as_deref(), threads)
}

/// Runs the configured experiment on in-memory samples.
pub fn run_on(
    cfg: &SweepConfig,
    test: &[Sample],
    train: Option<&[Sample]>,
    blur_rows: Option<&[ScoreRow]>,
    threads: usize,
) -> Result<RunOutput> {
    cfg.validate()?;
    if test.is_empty() {
        return Err(Error::invalid("the test set has no images"));
    }
    let (rows, error_vs_ap, sigma_matches) = match cfg.experiment {
        ExperimentId::Exp1 => (run_exp1(cfg, test, threads)?, vec![], vec![]),
        ExperimentId::Exp2 => (run_exp2(cfg, test, threads)?, vec![], vec![]),
        ExperimentId::Exp1Histeq => (run_histeq_variant(cfg, test, threads)?, vec![], vec![]),
        ExperimentId::Exp3Healthy | ExperimentId::Exp3Anomalous => {
            let models = build_models(cfg, train)?;
            let out = run_exp3(cfg, test, &models, threads)?;
            let errs = error_vs_ap(&out);
            let matches = match blur_rows {
                Some(b) => match_blur_curves(&out, b, &cfg.intensities)?,
                None => vec![],
            };
            (out, errs, matches)
        }
    };
    Ok(RunOutput {
        config: cfg.clone(),
        rows,
        error_vs_ap,
        sigma_matches,
    })
}

fn regions(cfg: &SweepConfig, test: &[Sample], threads: usize) -> Result<Vec<RegionSpec>> {
    map_indexed(threads, test.len(), |i| {
        sample_region(&test[i].object_mask(), cfg.radius, region_seed(cfg.seed, i))
            .map_err(|e| e.for_image(test[i].id.clone()))
    })
}

/// Maps `f` over the samples, tagging failures with the image id.
fn per_sample<T, F>(threads: usize, test: &[Sample], f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &Sample) -> Result<T> + Sync + Send,
{
    map_indexed(threads, test.len(), |i| f(i, &test[i]).map_err(|e| e.for_image(test[i].id.clone())))
}

fn eval_mask(policy: EvalPolicy, object: &BinaryMask) -> Option<&BinaryMask> {
    match policy {
        EvalPolicy::Full => None,
        EvalPolicy::Object => Some(object),
    }
}

/// Per-cell mean and population std over images. `per_image[i][c]` is the
/// value of cell `c` for image `i`.
fn aggregate(per_image: &[Vec<f64>], cells: usize) -> Vec<(f64, f64)> {
    (0..cells)
        .map(|c| {
            let v: Vec<f64> = per_image.iter().map(|img| img[c]).collect();
            (v.iter().sum::<f64>() / v.len() as f64, population_std(&v))
        })
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Intensity sweep against the blur oracle.
pub fn run_exp1(cfg: &SweepConfig, test: &[Sample], threads: usize) -> Result<Vec<ScoreRow>> {
    intensity_blur_sweep(cfg, test, threads, ExperimentId::Exp1)
}

/// Exp1 on images equalized inside their object masks.
pub fn run_histeq_variant(cfg: &SweepConfig, test: &[Sample], threads: usize) -> Result<Vec<ScoreRow>> {
    let equalized = map_indexed(threads, test.len(), |i| {
        let s = &test[i];
        let mask = s.mask.as_ref().ok_or_else(|| {
            Error::invalid("histogram equalization needs an explicit object mask").for_image(s.id.clone())
        })?;
        Ok(Sample {
            id: s.id.clone(),
            image: equalize_masked(&s.image, mask, cfg.histeq_bins)?,
            mask: Some(mask.clone()),
        })
    })?;
    intensity_blur_sweep(cfg, &equalized, threads, ExperimentId::Exp1Histeq)
}

fn intensity_blur_sweep(
    cfg: &SweepConfig,
    test: &[Sample],
    threads: usize,
    experiment: ExperimentId,
) -> Result<Vec<ScoreRow>> {
    let policy = cfg.eval_policy()?;
    let regions = regions(cfg, test, threads)?;
    let (ni, ns) = (cfg.intensities.len(), cfg.sigmas.len());
    // per image: [AP for each (I, sigma)], [healthy error for each sigma]
    let per_image = per_sample(threads, test, |idx, s| {
        let object = s.object_mask();
        let recons = cfg
            .sigmas
            .iter()
            .map(|&sigma| gaussian_blur(&s.image, sigma))
            .collect::<Result<Vec<Grid>>>()?;
        let errors = recons
            .iter()
            .map(|r| image_recon_error(&s.image, r, &object))
            .collect::<Result<Vec<f64>>>()?;
        let mut aps = Vec::with_capacity(ni * ns);
        for &intensity in &cfg.intensities {
            let rec = inject(&s.image, &regions[idx], Anomaly::Intensity(intensity), 0)?;
            for recon in &recons {
                let map = residual_map(&rec.image, recon)?;
                aps.push(average_precision(&map, &rec.truth, eval_mask(policy, &object))?);
            }
        }
        Ok((aps, errors))
    })?;
    let aps: Vec<Vec<f64>> = per_image.iter().map(|p| p.0.clone()).collect();
    let errs: Vec<Vec<f64>> = per_image.iter().map(|p| p.1.clone()).collect();
    let cells = aggregate(&aps, ni * ns);
    let err_means = aggregate(&errs, ns);
    let mut rows = Vec::with_capacity(ni * ns);
    for (ii, &intensity) in cfg.intensities.iter().enumerate() {
        for (si, &sigma) in cfg.sigmas.iter().enumerate() {
            let (mean_ap, ap_std) = cells[ii * ns + si];
            rows.push(ScoreRow {
                experiment: experiment.as_str().into(),
                kind: AnomalyKind::Intensity,
                intensity: Some(intensity),
                sigma: Some(sigma),
                model: "blur".into(),
                mode: Mode::Healthy,
                k: None,
                mean_ap,
                ap_std,
                mean_recon_err: Some(err_means[si].0),
                n_images: test.len(),
                seed: cfg.seed,
            });
        }
    }
    Ok(rows)
}

/// Anomaly-kind sweep against the blur oracle at a fixed radius.
pub fn run_exp2(cfg: &SweepConfig, test: &[Sample], threads: usize) -> Result<Vec<ScoreRow>> {
    let policy = cfg.eval_policy()?;
    let regions = regions(cfg, test, threads)?;
    let (nk, ns) = (cfg.kinds.len(), cfg.sigmas.len());
    let per_image = per_sample(threads, test, |idx, s| {
        let object = s.object_mask();
        let recons = cfg
            .sigmas
            .iter()
            .map(|&sigma| gaussian_blur(&s.image, sigma))
            .collect::<Result<Vec<Grid>>>()?;
        let mut aps = Vec::with_capacity(nk * ns);
        for &kind in &cfg.kinds {
            let anomaly = Anomaly::from_kind(kind, Some(cfg.reference_intensity))?;
            let seed = cell_seed(cfg.seed, ExperimentId::Exp2, idx, kind);
            let rec = inject(&s.image, &regions[idx], anomaly, seed)?;
            for recon in &recons {
                let map = residual_map(&rec.image, recon)?;
                aps.push(average_precision(&map, &rec.truth, eval_mask(policy, &object))?);
            }
        }
        Ok(aps)
    })?;
    let cells = aggregate(&per_image, nk * ns);
    let mut rows = Vec::with_capacity(nk * ns);
    for (ki, &kind) in cfg.kinds.iter().enumerate() {
        for (si, &sigma) in cfg.sigmas.iter().enumerate() {
            let (mean_ap, ap_std) = cells[ki * ns + si];
            rows.push(ScoreRow {
                experiment: ExperimentId::Exp2.as_str().into(),
                kind,
                intensity: (kind == AnomalyKind::Intensity).then_some(cfg.reference_intensity),
                sigma: Some(sigma),
                model: "blur".into(),
                mode: Mode::Healthy,
                k: None,
                mean_ap,
                ap_std,
                mean_recon_err: None,
                n_images: test.len(),
                seed: cfg.seed,
            });
        }
    }
    Ok(rows)
}

/// Builds the exp3 model list in a fixed order: fitted subspaces by
/// ascending k, loaded subspace files, external sources, identity.
pub fn build_models(cfg: &SweepConfig, train: Option<&[Sample]>) -> Result<Vec<Reconstructor>> {
    let mut models = Vec::new();
    if !cfg.subspace_ks.is_empty() {
        let train = train.ok_or_else(|| Error::Config("subspace_ks needs train_manifest".into()))?;
        let images: Vec<Grid> = train.iter().map(|s| s.image.clone()).collect();
        let mut ks = cfg.subspace_ks.clone();
        ks.sort_unstable();
        let full = fit_subspace(&images, *ks.last().expect("nonempty"))?;
        for k in ks {
            models.push(Reconstructor::Subspace(Arc::new(full.truncated(k)?)));
        }
    }
    for path in &cfg.subspace_models {
        models.push(Reconstructor::Subspace(Arc::new(SubspaceModel::load(path)?)));
    }
    for ext in &cfg.external {
        models.push(Reconstructor::External(ExternalReconSource::new(
            ext.name.clone(),
            ext.dir.clone(),
        )));
    }
    if cfg.identity {
        models.push(Reconstructor::Identity);
    }
    Ok(models)
}

/// Learned-model sweep: every model reconstructs either the healthy image or
/// the anomalous one, and the residual is scored against the anomalous image.
pub fn run_exp3(
    cfg: &SweepConfig,
    test: &[Sample],
    models: &[Reconstructor],
    threads: usize,
) -> Result<Vec<ScoreRow>> {
    let mode = cfg
        .experiment
        .exp3_mode()
        .ok_or_else(|| Error::Config(format!("{} is not an exp3 experiment", cfg.experiment)))?;
    if models.is_empty() {
        return Err(Error::Config("exp3 needs at least one model".into()));
    }
    for m in models {
        if let Reconstructor::External(src) = m {
            let mut keys: Vec<(String, Mode)> = test.iter().map(|s| (s.id.clone(), Mode::Healthy)).collect();
            if mode == Mode::Anomalous {
                for s in test {
                    for &i in &cfg.intensities {
                        keys.push((anomalous_key(&s.id, i), Mode::Anomalous));
                    }
                }
            }
            src.check_complete(keys.iter().map(|(k, m)| (k.as_str(), *m)))?;
        }
    }
    let policy = cfg.eval_policy()?;
    let regions = regions(cfg, test, threads)?;
    let (nm, ni) = (models.len(), cfg.intensities.len());
    let per_image = per_sample(threads, test, |idx, s| {
        let object = s.object_mask();
        let mut aps = Vec::with_capacity(nm * ni);
        let mut errors = Vec::with_capacity(nm);
        for model in models {
            let healthy = model.reconstruct(&s.image, &s.id, Mode::Healthy)?;
            errors.push(image_recon_error(&s.image, &healthy, &object)?);
            for &intensity in &cfg.intensities {
                let rec = inject(&s.image, &regions[idx], Anomaly::Intensity(intensity), 0)?;
                let recon = match mode {
                    Mode::Healthy => healthy.clone(),
                    Mode::Anomalous => {
                        model.reconstruct(&rec.image, &anomalous_key(&s.id, intensity), Mode::Anomalous)?
                    }
                };
                let map = residual_map(&rec.image, &recon)?;
                aps.push(average_precision(&map, &rec.truth, eval_mask(policy, &object))?);
            }
        }
        Ok((aps, errors))
    })?;
    let aps: Vec<Vec<f64>> = per_image.iter().map(|p| p.0.clone()).collect();
    let errs: Vec<Vec<f64>> = per_image.iter().map(|p| p.1.clone()).collect();
    let cells = aggregate(&aps, nm * ni);
    let err_means = aggregate(&errs, nm);
    let mut rows = Vec::with_capacity(nm * ni);
    for (mi, model) in models.iter().enumerate() {
        for (ii, &intensity) in cfg.intensities.iter().enumerate() {
            let (mean_ap, ap_std) = cells[mi * ni + ii];
            rows.push(ScoreRow {
                experiment: cfg.experiment.as_str().into(),
                kind: AnomalyKind::Intensity,
                intensity: Some(intensity),
                sigma: model.sigma(),
                model: model.model_name(),
                mode,
                k: model.latent_dim(),
                mean_ap,
                ap_std,
                mean_recon_err: Some(err_means[mi].0),
                n_images: test.len(),
                seed: cfg.seed,
            });
        }
    }
    Ok(rows)
}

/// Groups exp3 rows by model, keeping first-seen order.
fn by_model(rows: &[ScoreRow]) -> Vec<(String, Option<usize>, Vec<&ScoreRow>)> {
    let mut groups: Vec<(String, Option<usize>, Vec<&ScoreRow>)> = Vec::new();
    for r in rows {
        match groups.iter_mut().find(|g| g.0 == r.model && g.1 == r.k) {
            Some(g) => g.2.push(r),
            None => groups.push((r.model.clone(), r.k, vec![r])),
        }
    }
    groups
}

/// One point per model: healthy reconstruction error against mean AP inside
/// the intensity band (whole grid when the band holds no intensity).
pub fn error_vs_ap(rows: &[ScoreRow]) -> Vec<ErrorApRow> {
    by_model(rows)
        .into_iter()
        .map(|(model, k, rs)| {
            let all: Vec<f64> = rs.iter().map(|r| r.mean_ap).collect();
            let band: Vec<f64> = rs
                .iter()
                .filter(|r| r.intensity.is_some_and(in_band))
                .map(|r| r.mean_ap)
                .collect();
            ErrorApRow {
                model,
                k,
                mean_recon_err: rs[0].mean_recon_err.unwrap_or(f64::NAN),
                band_mean_ap: if band.is_empty() { mean(&all) } else { mean(&band) },
                mean_ap: mean(&all),
            }
        })
        .collect()
}

/// Blur curves (AP against intensity, one per sigma) from an exp1 table.
pub fn blur_curves(blur_rows: &[ScoreRow], intensities: &[f64]) -> Result<Vec<(f64, Vec<f64>)>> {
    let mut curves: Vec<(f64, Vec<(f64, f64)>)> = Vec::new();
    for r in blur_rows.iter().filter(|r| r.experiment == "exp1" && r.model == "blur") {
        let (Some(sigma), Some(i)) = (r.sigma, r.intensity) else {
            continue;
        };
        match curves.iter_mut().find(|c| c.0 == sigma) {
            Some(c) => c.1.push((i, r.mean_ap)),
            None => curves.push((sigma, vec![(i, r.mean_ap)])),
        }
    }
    if curves.is_empty() {
        return Err(Error::Config("blur reference holds no exp1 blur rows".into()));
    }
    curves
        .into_iter()
        .map(|(sigma, mut pts)| {
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let same = xs.len() == intensities.len()
                && xs.iter().zip(intensities).all(|(a, b)| (a - b).abs() < 1e-9);
            if !same {
                return Err(Error::Config(format!(
                    "blur reference curve for sigma {sigma} does not cover the same intensities"
                )));
            }
            Ok((sigma, pts.into_iter().map(|p| p.1).collect()))
        })
        .collect()
}

/// Best-matching blur sigma for every model in an exp3 table.
pub fn match_blur_curves(
    rows: &[ScoreRow],
    blur_rows: &[ScoreRow],
    intensities: &[f64],
) -> Result<Vec<SigmaMatchRow>> {
    let curves = blur_curves(blur_rows, intensities)?;
    by_model(rows)
        .into_iter()
        .map(|(model, k, mut rs)| {
            rs.sort_by(|a, b| a.intensity.unwrap_or(0.0).total_cmp(&b.intensity.unwrap_or(0.0)));
            let curve: Vec<f64> = rs.iter().map(|r| r.mean_ap).collect();
            let m = best_matching_sigma(&curve, &curves)?;
            Ok(SigmaMatchRow {
                model,
                k,
                best_sigma: m.best_sigma,
                distance: m.best_distance,
            })
        })
        .collect()
}

/// Writes the anomalous exp3 inputs as injection records keyed the way
/// external reconstruction directories expect, so an outside model can
/// reconstruct exactly the images the harness will score.
pub fn export_anomalous_inputs(cfg: &SweepConfig, test: &[Sample], dir: &Path, threads: usize) -> Result<usize> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let regions = regions(cfg, test, threads)?;
    let counts = per_sample(threads, test, |idx, s| {
        for &intensity in &cfg.intensities {
            let rec: InjectionRecord = inject(&s.image, &regions[idx], Anomaly::Intensity(intensity), 0)?;
            rec.save(dir, &anomalous_key(&s.id, intensity))?;
        }
        Ok(cfg.intensities.len())
    })?;
    Ok(counts.into_iter().sum())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn csv_bytes<F: FnOnce(&mut Vec<u8>) -> Result<()>>(f: F) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

/// Writes the result table, its plots and the resolved configuration into
/// `dir`. Returns the written file names in order.
pub fn write_outputs(out: &RunOutput, dir: &Path) -> Result<Vec<String>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let exp = out.config.experiment.as_str();
    let mut written = Vec::new();
    let mut put = |name: String, bytes: &[u8]| -> Result<()> {
        let path = dir.join(&name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        written.push(name);
        Ok(())
    };
    put(format!("{exp}.csv"), &csv_bytes(|b| report::write_score_csv(&out.rows, b))?)?;
    put(
        format!("{exp}_line.svg"),
        plot::emit_plot(&out.rows, plot::PlotKind::Line)?.as_bytes(),
    )?;
    put(
        format!("{exp}_heatmap.svg"),
        plot::emit_plot(&out.rows, plot::PlotKind::Heatmap)?.as_bytes(),
    )?;
    if !out.error_vs_ap.is_empty() {
        put(
            format!("{exp}_error_vs_ap.csv"),
            &csv_bytes(|b| report::write_error_ap_csv(&out.error_vs_ap, b))?,
        )?;
        put(
            format!("{exp}_error_vs_ap.svg"),
            plot::emit_error_scatter(&out.error_vs_ap, &format!("{exp}: error vs AP"))?.as_bytes(),
        )?;
    }
    if !out.sigma_matches.is_empty() {
        put(
            format!("{exp}_sigma_match.csv"),
            &csv_bytes(|b| report::write_sigma_match_csv(&out.sigma_matches, b))?,
        )?;
    }
    write_text(&dir.join("resolved_config.toml"), &out.config.to_toml())?;
    written.push("resolved_config.toml".into());
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::make_phantom;

    fn samples(n: usize, size: usize) -> Vec<Sample> {
        (0..n)
            .map(|i| {
                let (image, mask) = make_phantom(40 + i as u64, size, size).unwrap();
                Sample {
                    id: format!("img{i}"),
                    image,
                    mask: Some(mask),
                }
            })
            .collect()
    }

    fn small(exp: ExperimentId) -> SweepConfig {
        let mut c = SweepConfig::new(exp);
        c.radius = 6.0;
        c.intensities = vec![0.0, 0.5, 1.0];
        c.sigmas = vec![0.0, 1.0, 3.0];
        c.seed = 3;
        c
    }

    #[test]
    fn exp1_rows_cover_the_grid_and_sigma_zero_is_perfect_at_full_intensity() {
        let test = samples(3, 64);
        let rows = run_exp1(&small(ExperimentId::Exp1), &test, 2).unwrap();
        assert_eq!(rows.len(), 9);
        let top = rows
            .iter()
            .find(|r| r.intensity == Some(1.0) && r.sigma == Some(0.0))
            .unwrap();
        assert_eq!(top.mean_ap, 1.0);
        assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r.mean_ap) && r.n_images == 3));
    }

    #[test]
    fn exp2_row_count_and_reference_column() {
        let test = samples(2, 64);
        let rows = run_exp2(&small(ExperimentId::Exp2), &test, 1).unwrap();
        assert_eq!(rows.len(), 4 * 3);
        for r in &rows {
            assert_eq!(r.intensity.is_some(), r.kind == AnomalyKind::Intensity);
        }
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let test = samples(4, 64);
        let cfg = small(ExperimentId::Exp2);
        assert_eq!(run_exp2(&cfg, &test, 1).unwrap(), run_exp2(&cfg, &test, 4).unwrap());
    }

    #[test]
    fn identity_in_anomalous_mode_scores_prevalence() {
        let test = samples(2, 64);
        let mut cfg = small(ExperimentId::Exp3Anomalous);
        cfg.identity = true;
        let rows = run_on(&cfg, &test, None, None, 1).unwrap().rows;
        let regions = regions(&cfg, &test, 1).unwrap();
        let prevalence: f64 = regions
            .iter()
            .map(|r| crate::synth::rasterize_disk(r, 64, 64).unwrap().count() as f64 / 4096.0)
            .sum::<f64>()
            / 2.0;
        for r in rows {
            assert!((r.mean_ap - prevalence).abs() < 1e-12);
            assert_eq!(r.model, "identity");
        }
    }

    #[test]
    fn mean_only_subspace_is_mode_independent() {
        let test = samples(2, 64);
        let train = samples(6, 64);
        let mut cfg = small(ExperimentId::Exp3Healthy);
        cfg.subspace_ks = vec![0];
        cfg.train_manifest = Some("unused".into());
        let healthy = run_on(&cfg, &test, Some(&train), None, 1).unwrap();
        cfg.experiment = ExperimentId::Exp3Anomalous;
        let anomalous = run_on(&cfg, &test, Some(&train), None, 1).unwrap();
        for (a, b) in healthy.rows.iter().zip(&anomalous.rows) {
            assert_eq!(a.mean_ap, b.mean_ap);
        }
        assert_eq!(healthy.error_vs_ap.len(), 1);
    }

    #[test]
    fn histeq_needs_masks() {
        let mut test = samples(1, 64);
        test[0].mask = None;
        let err = run_histeq_variant(&small(ExperimentId::Exp1Histeq), &test, 1).unwrap_err();
        assert!(err.to_string().contains("img0"), "{err}");
    }

    #[test]
    fn blur_matching_recovers_the_generating_sigma() {
        let test = samples(3, 64);
        let exp1 = run_exp1(&small(ExperimentId::Exp1), &test, 1).unwrap();
        // a "model" that is just blur with sigma 1 reported as an exp3 row set
        let mut fake: Vec<ScoreRow> = exp1.iter().filter(|r| r.sigma == Some(1.0)).cloned().collect();
        for r in &mut fake {
            r.model = "subspace".into();
            r.sigma = None;
            r.k = Some(3);
        }
        let m = match_blur_curves(&fake, &exp1, &[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(m[0].best_sigma, 1.0);
        assert_eq!(m[0].distance, 0.0);
        assert!(match_blur_curves(&fake, &exp1, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn missing_external_files_are_listed() {
        let dir = tempfile::tempdir().unwrap();
        let test = samples(2, 64);
        let mut cfg = small(ExperimentId::Exp3Anomalous);
        cfg.external.push(ExternalSpec {
            name: "ae".into(),
            dir: dir.path().to_path_buf(),
        });
        let err = run_on(&cfg, &test, None, None, 1).unwrap_err();
        let text = err.to_string();
        assert!(text.contains("img0") && text.contains("img1_I0.500"), "{text}");
    }

    #[test]
    fn exported_inputs_match_scored_images() {
        let dir = tempfile::tempdir().unwrap();
        let test = samples(1, 64);
        let cfg = small(ExperimentId::Exp3Anomalous);
        assert_eq!(export_anomalous_inputs(&cfg, &test, dir.path(), 1).unwrap(), 3);
        let rec = InjectionRecord::load(dir.path(), "img0_I0.500").unwrap();
        let region = regions(&cfg, &test, 1).unwrap()[0];
        assert_eq!(rec.region, region);
        assert_eq!(rec.intensity, Some(0.5));
    }

    #[test]
    fn outputs_written_with_snapshot() {
        let dir = tempfile::tempdir().unwrap();
        let test = samples(2, 64);
        let out = run_on(&small(ExperimentId::Exp1), &test, None, None, 1).unwrap();
        let names = write_outputs(&out, dir.path()).unwrap();
        assert_eq!(names, ["exp1.csv", "exp1_line.svg", "exp1_heatmap.svg", "resolved_config.toml"]);
        let back = SweepConfig::read(dir.path().join("resolved_config.toml")).unwrap();
        assert_eq!(back, out.config);
        let rows = report::read_score_csv_file(dir.path().join("exp1.csv")).unwrap();
        assert_eq!(rows, out.rows);
    }
}
