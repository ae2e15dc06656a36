use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};

use residual_lab_core::harness::panels::{emit_panels, PanelCell};
use residual_lab_core::harness::plot::{emit_plot, PlotKind};
use residual_lab_core::harness::{self, report, ExperimentId, ExternalSpec, SweepConfig};
use residual_lab_core::manifest::{stem_of, DatasetManifest};
use residual_lab_core::phantom::write_phantom_dataset;
use residual_lab_core::recon::{fit_subspace_manifest, BlurOracle, Mode, Reconstructor, SubspaceModel};
use residual_lab_core::scoring::{average_precision, residual_map, EvalPolicy};
use residual_lab_core::synth::{inject, sample_region, Anomaly, AnomalyKind, RegionSpec};
use residual_lab_core::{BinaryMask, Error, Grid, Role};

const THREADS_ENV: &str = "RESIDUAL_LAB_THREADS";

/// Residual anomaly-localization experiments: synthetic anomalies,
/// reconstructions, pixel-wise average precision and sweeps.
#[derive(Parser, Debug)]
#[command(name = "residual-lab", version)]
struct Cli {
    /// Worker threads for sweeps (0 = all cores). Falls back to RESIDUAL_LAB_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Only print errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a phantom dataset with masks and a manifest
    Phantom(PhantomArgs),
    /// Inject one synthetic anomaly into an image
    Inject(InjectArgs),
    /// Fit a PCA subspace model on a training manifest
    FitSubspace(FitArgs),
    /// Reconstruct one image with blur, a subspace model or identity
    Reconstruct(ReconArgs),
    /// Average precision of the residual between an image and its reconstruction
    Score(ScoreArgs),
    /// Intensity sweep against the blur oracle
    Exp1(SweepArgs),
    /// Anomaly-kind sweep against the blur oracle
    Exp2(SweepArgs),
    /// Capacity sweep with learned or external reconstructors
    Exp3(Exp3Args),
    /// Intensity sweep on histogram-equalized images
    Histeq(SweepArgs),
    /// Write input / reconstruction / residual panels for selected cells
    Panels(PanelArgs),
    /// Render a result table as SVG
    Plot(PlotArgs),
}

#[derive(Args, Debug)]
struct PhantomArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of images
    #[arg(long)]
    n: usize,
    /// Side length in pixels
    #[arg(long, default_value_t = 128)]
    size: usize,
    #[arg(long, default_value = "test", value_parser = parse_role)]
    role: Role,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct InjectArgs {
    #[arg(long)]
    image: PathBuf,
    /// Object mask for placing the region (default: non-zero pixels)
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long)]
    kind: AnomalyKind,
    /// Fill value for intensity anomalies
    #[arg(long)]
    intensity: Option<f64>,
    #[arg(long, default_value_t = 20.0)]
    radius: f64,
    /// Explicit center as ROW,COL instead of sampling one
    #[arg(long, value_parser = parse_center)]
    center: Option<(f64, f64)>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for <key>.f32g, <key>.maskg and <key>.json
    #[arg(long)]
    out: PathBuf,
    /// Output file stem (default: <image stem>_<kind>)
    #[arg(long)]
    key: Option<String>,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
#[group(skip)]
#[command(group(ArgGroup::new("source").required(true).args(["sigma", "model", "identity"])))]
struct ReconArgs {
    #[arg(long)]
    input: PathBuf,
    /// Gaussian blur sigma in pixels
    #[arg(long)]
    sigma: Option<f64>,
    /// Subspace model file
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    identity: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    /// Anomalous image
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    recon: PathBuf,
    /// Ground-truth anomaly mask
    #[arg(long)]
    truth: PathBuf,
    /// Restrict scoring to this mask
    #[arg(long)]
    eval_mask: Option<PathBuf>,
    /// Also write the residual map
    #[arg(long)]
    residual: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct SweepArgs {
    /// TOML sweep configuration
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    test_manifest: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    radius: Option<f64>,
    /// Comma-separated intensity grid
    #[arg(long, value_delimiter = ',')]
    intensities: Option<Vec<f64>>,
    /// Comma-separated sigma grid
    #[arg(long, value_delimiter = ',')]
    sigmas: Option<Vec<f64>>,
    /// Comma-separated anomaly kinds (exp2)
    #[arg(long, value_delimiter = ',')]
    kinds: Option<Vec<AnomalyKind>>,
    /// Intensity of the reference intensity anomaly (exp2)
    #[arg(long)]
    reference_intensity: Option<f64>,
    /// Pixels entering AP: full or object
    #[arg(long)]
    eval_mask: Option<EvalPolicy>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct Exp3Args {
    #[command(flatten)]
    sweep: SweepArgs,
    /// healthy or anomalous (default: taken from the config)
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    train_manifest: Option<PathBuf>,
    /// Comma-separated latent dimensions to fit
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    /// Pre-fitted subspace model (repeatable)
    #[arg(long = "subspace-model")]
    subspace_models: Vec<PathBuf>,
    /// External reconstructions as NAME=DIR (repeatable)
    #[arg(long, value_parser = parse_external)]
    external: Vec<ExternalSpec>,
    /// Include the identity reconstructor
    #[arg(long)]
    identity: bool,
    /// exp1 result table to match blur curves against
    #[arg(long)]
    blur_reference: Option<PathBuf>,
    /// Write the anomalous inputs for external models into DIR and exit
    #[arg(long)]
    export_inputs: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PanelArgs {
    #[command(flatten)]
    sweep: SweepArgs,
    /// IMAGE:KIND[@INTENSITY]:SIGMA, e.g. 0:intensity@0.5:2 (repeatable)
    #[arg(long, required = true)]
    cell: Vec<PanelCell>,
}

#[derive(Args, Debug)]
struct PlotArgs {
    /// Result table written by a sweep
    #[arg(long)]
    csv: PathBuf,
    #[arg(long, default_value = "line")]
    kind: PlotKind,
    #[arg(long)]
    out: PathBuf,
}

fn parse_role(s: &str) -> Result<Role, String> {
    match s {
        "train" => Ok(Role::Train),
        "test" => Ok(Role::Test),
        _ => Err(format!("expected train or test, got {s:?}")),
    }
}

fn parse_center(s: &str) -> Result<(f64, f64), String> {
    let (r, c) = s.split_once(',').ok_or("expected ROW,COL")?;
    Ok((
        r.trim().parse().map_err(|_| "bad row")?,
        c.trim().parse().map_err(|_| "bad column")?,
    ))
}

fn parse_external(s: &str) -> Result<ExternalSpec, String> {
    let (name, dir) = s.split_once('=').ok_or("expected NAME=DIR")?;
    if name.is_empty() || dir.is_empty() {
        return Err("expected NAME=DIR".into());
    }
    Ok(ExternalSpec {
        name: name.into(),
        dir: dir.into(),
    })
}

struct Ctx {
    threads: usize,
    quiet: bool,
}

impl Ctx {
    fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn threads(flag: Option<usize>) -> Result<usize, Error> {
    if let Some(n) = flag {
        return Ok(n);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("{THREADS_ENV} must be a non-negative integer, got {v:?}"))),
        Err(_) => Ok(0),
    }
}

/// Config file (or defaults) with the command-line flags applied on top.
fn resolve(experiment: ExperimentId, args: &SweepArgs) -> Result<SweepConfig, Error> {
    let mut cfg = match &args.config {
        Some(p) => SweepConfig::read(p)?,
        None => SweepConfig::new(experiment),
    };
    if cfg.experiment != experiment && !(cfg.experiment.exp3_mode().is_some() && experiment.exp3_mode().is_some()) {
        cfg.experiment = experiment;
    }
    if let Some(v) = &args.test_manifest {
        cfg.test_manifest = Some(v.clone());
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.radius {
        cfg.radius = v;
    }
    if let Some(v) = &args.intensities {
        cfg.intensities = v.clone();
    }
    if let Some(v) = &args.sigmas {
        cfg.sigmas = v.clone();
    }
    if let Some(v) = &args.kinds {
        cfg.kinds = v.clone();
    }
    if let Some(v) = args.reference_intensity {
        cfg.reference_intensity = v;
    }
    if let Some(v) = args.eval_mask {
        cfg.eval_mask = v.as_str().into();
    }
    if let Some(v) = &args.out {
        cfg.output_dir = v.clone();
    }
    Ok(cfg)
}

fn sweep(ctx: &Ctx, cfg: SweepConfig) -> Result<(), Error> {
    cfg.validate()?;
    let out = harness::run(&cfg, ctx.threads)?;
    let files = harness::write_outputs(&out, &cfg.output_dir)?;
    for f in files {
        ctx.note(format!("wrote {}", cfg.output_dir.join(f).display()));
    }
    Ok(())
}

fn exp3(ctx: &Ctx, args: &Exp3Args) -> Result<(), Error> {
    let mut cfg = resolve(ExperimentId::Exp3Healthy, &args.sweep)?;
    match args.mode {
        Some(Mode::Healthy) => cfg.experiment = ExperimentId::Exp3Healthy,
        Some(Mode::Anomalous) => cfg.experiment = ExperimentId::Exp3Anomalous,
        None if args.sweep.config.is_none() => {
            return Err(Error::invalid("exp3 needs --mode or a config naming exp3-healthy / exp3-anomalous"))
        }
        None => {}
    }
    if let Some(v) = &args.train_manifest {
        cfg.train_manifest = Some(v.clone());
    }
    if let Some(v) = &args.k {
        cfg.subspace_ks = v.clone();
    }
    cfg.subspace_models.extend(args.subspace_models.iter().cloned());
    cfg.external.extend(args.external.iter().cloned());
    cfg.identity |= args.identity;
    if let Some(v) = &args.blur_reference {
        cfg.blur_reference = Some(v.clone());
    }
    if let Some(dir) = &args.export_inputs {
        let test_path = cfg
            .test_manifest
            .as_ref()
            .ok_or_else(|| Error::Config("test_manifest is required".into()))?;
        let test = DatasetManifest::read(test_path)?.load()?;
        let n = harness::export_anomalous_inputs(&cfg, &test, dir, ctx.threads)?;
        ctx.note(format!("wrote {n} anomalous inputs to {}", dir.display()));
        return Ok(());
    }
    sweep(ctx, cfg)
}

fn phantom(ctx: &Ctx, a: &PhantomArgs) -> Result<(), Error> {
    let m = write_phantom_dataset(&a.out, a.seed, a.n, a.size, a.role)?;
    ctx.note(format!("wrote {} phantoms and {}", m.len(), a.out.join("manifest.txt").display()));
    Ok(())
}

fn inject_cmd(ctx: &Ctx, a: &InjectArgs) -> Result<(), Error> {
    let image = Grid::read(&a.image)?;
    let object = match &a.mask {
        Some(p) => BinaryMask::read(p)?,
        None => BinaryMask::nonzero(&image),
    };
    object.ensure_same_shape(image.shape())?;
    let region = match a.center {
        Some((r, c)) => RegionSpec::new(r, c, a.radius)?,
        None => sample_region(&object, a.radius, a.seed)?,
    };
    let anomaly = Anomaly::from_kind(a.kind, a.intensity)?;
    let rec = inject(&image, &region, anomaly, a.seed)?;
    let key = a
        .key
        .clone()
        .unwrap_or_else(|| format!("{}_{}", stem_of(&a.image), a.kind));
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    rec.save(&a.out, &key)?;
    ctx.note(format!(
        "wrote {} ({} pixels at {:?})",
        a.out.join(format!("{key}.f32g")).display(),
        rec.truth.count(),
        region.center
    ));
    Ok(())
}

fn fit(ctx: &Ctx, a: &FitArgs) -> Result<(), Error> {
    let manifest = DatasetManifest::read(&a.train)?;
    let model = fit_subspace_manifest(&manifest, a.k)?;
    ensure_parent(&a.out)?;
    model.save(&a.out)?;
    ctx.note(format!(
        "wrote {} (k={}, {} components, training set {})",
        a.out.display(),
        model.latent_dim(),
        model.components(),
        &model.fingerprint()[..12]
    ));
    Ok(())
}

fn ensure_parent(path: &Path) -> Result<(), Error> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => std::fs::create_dir_all(p).map_err(|e| Error::io(p, e)),
        _ => Ok(()),
    }
}

fn reconstruct(ctx: &Ctx, a: &ReconArgs) -> Result<(), Error> {
    let input = Grid::read(&a.input)?;
    let model = match (a.sigma, &a.model) {
        (Some(s), _) => Reconstructor::Blur(BlurOracle::new(s)?),
        (None, Some(p)) => Reconstructor::Subspace(SubspaceModel::load(p)?.into()),
        (None, None) => Reconstructor::Identity,
    };
    let out = model.reconstruct(&input, &stem_of(&a.input), Mode::Healthy)?;
    ensure_parent(&a.out)?;
    out.write(&a.out)?;
    ctx.note(format!("wrote {}", a.out.display()));
    Ok(())
}

fn score(a: &ScoreArgs) -> Result<(), Error> {
    let input = Grid::read(&a.input)?;
    let recon = Grid::read(&a.recon)?;
    let truth = BinaryMask::read(&a.truth)?;
    let eval = a.eval_mask.as_ref().map(BinaryMask::read).transpose()?;
    let map = residual_map(&input, &recon)?;
    let ap = average_precision(&map, &truth, eval.as_ref())?;
    if let Some(p) = &a.residual {
        ensure_parent(p)?;
        map.grid().write(p)?;
    }
    println!("{ap}");
    Ok(())
}

fn panels(ctx: &Ctx, a: &PanelArgs) -> Result<(), Error> {
    let cfg = resolve(ExperimentId::Exp1, &a.sweep)?;
    let test_path = cfg
        .test_manifest
        .as_ref()
        .ok_or_else(|| Error::Config("test_manifest is required".into()))?;
    let samples = DatasetManifest::read(test_path)?.load()?;
    let names = emit_panels(&samples, &a.cell, cfg.radius, cfg.seed, &cfg.output_dir)?;
    std::fs::write(cfg.output_dir.join("resolved_config.toml"), cfg.to_toml())
        .map_err(|e| Error::io(&cfg.output_dir, e))?;
    ctx.note(format!("wrote {} panels to {}", names.len(), cfg.output_dir.display()));
    Ok(())
}

fn plot(ctx: &Ctx, a: &PlotArgs) -> Result<(), Error> {
    let rows = report::read_score_csv_file(&a.csv)?;
    let svg = emit_plot(&rows, a.kind)?;
    ensure_parent(&a.out)?;
    std::fs::write(&a.out, svg).map_err(|e| Error::io(&a.out, e))?;
    ctx.note(format!("wrote {}", a.out.display()));
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    let ctx = Ctx {
        threads: threads(cli.threads)?,
        quiet: cli.quiet,
    };
    match &cli.command {
        Command::Phantom(a) => phantom(&ctx, a),
        Command::Inject(a) => inject_cmd(&ctx, a),
        Command::FitSubspace(a) => fit(&ctx, a),
        Command::Reconstruct(a) => reconstruct(&ctx, a),
        Command::Score(a) => score(a),
        Command::Exp1(a) => sweep(&ctx, resolve(ExperimentId::Exp1, a)?),
        Command::Exp2(a) => sweep(&ctx, resolve(ExperimentId::Exp2, a)?),
        Command::Histeq(a) => sweep(&ctx, resolve(ExperimentId::Exp1Histeq, a)?),
        Command::Exp3(a) => exp3(&ctx, a),
        Command::Panels(a) => panels(&ctx, a),
        Command::Plot(a) => plot(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            eprint!("{}", e.render());
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(if e.is_usage() {
                1
            } else if e.is_internal() {
                3
            } else {
                2
            })
        }
        Err(_) => ExitCode::from(3),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_override_config() {
        let args = SweepArgs::try_parse_from_sweep(&["--seed", "9", "--sigmas", "0,1.5", "--eval-mask", "object"]);
        let cfg = resolve(ExperimentId::Exp2, &args).unwrap();
        assert_eq!(cfg.experiment, ExperimentId::Exp2);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.sigmas, vec![0.0, 1.5]);
        assert_eq!(cfg.eval_mask, "object");
    }

    #[test]
    fn external_spec_parsing() {
        let e = parse_external("ae=/tmp/recons").unwrap();
        assert_eq!((e.name.as_str(), e.dir.to_str().unwrap()), ("ae", "/tmp/recons"));
        assert!(parse_external("ae").is_err());
        assert!(parse_external("=x").is_err());
        assert_eq!(parse_center("3, 4.5").unwrap(), (3.0, 4.5));
    }

    impl SweepArgs {
        fn try_parse_from_sweep(flags: &[&str]) -> SweepArgs {
            let mut argv = vec!["residual-lab", "exp2"];
            argv.extend_from_slice(flags);
            match Cli::try_parse_from(argv).unwrap().command {
                Command::Exp2(a) => a,
                other => panic!("{other:?}"),
            }
        }
    }
}
