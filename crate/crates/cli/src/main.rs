//! `splatlab` command-line front end.

mod overrides;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use splatlab::camera::{load_cameras, Camera};
use splatlab::harness::{self, ExperimentOptions, GridAxis, NoiseSpec, SamplingReport};
use splatlab::raster::{render, RenderOptions};
use splatlab::scene::{self, NoiseTarget, SceneBundle, SceneSpec};
use splatlab::train::{self, write_log_csv, TrainConfig};
use splatlab::{Cloud32, Error};

use overrides::ConfigOverrides;

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "splatlab", version, about = "CPU Gaussian splatting with frequency-aware densification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic scene: manifest, cameras, PNG targets and init points.
    GenScene(GenSceneArgs),
    /// Train on a scene and write the final PLY and the iteration log.
    Train(TrainArgs),
    /// Render a PLY from a scene's or camera file's viewpoints.
    Render(RenderArgs),
    /// Score a PLY against a scene's train and test images.
    Eval(EvalArgs),
    /// Per-Gaussian sampling rate, interval and optimization class.
    AnalyzeSampling(AnalyzeArgs),
    /// Clean/noisy by baseline/EFA-GS comparison table.
    Compare(CompareArgs),
    /// Train a grid of configurations.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct GenSceneArgs {
    /// Scene spec file (flat key = value).
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Also write the ground-truth cloud as gt.ply.
    #[arg(long)]
    write_gt: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    Coordinates,
    Scales,
    Both,
}

impl From<TargetArg> for NoiseTarget {
    fn from(t: TargetArg) -> Self {
        match t {
            TargetArg::Coordinates => NoiseTarget::Coordinates,
            TargetArg::Scales => NoiseTarget::Scales,
            TargetArg::Both => NoiseTarget::Both,
        }
    }
}

#[derive(Args, Clone)]
struct NoiseArgs {
    /// Noise intensity k applied to the init cloud.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, value_enum, default_value = "scales")]
    noise_target: TargetArg,
    /// Seed of the noise draw (defaults to the training seed).
    #[arg(long)]
    noise_seed: Option<u64>,
}

impl NoiseArgs {
    fn spec(&self, seed: u64) -> Result<NoiseSpec> {
        if !(self.noise >= 0.0) || !self.noise.is_finite() {
            bail!(UsageError(format!("--noise must be finite and non-negative, got {}", self.noise)));
        }
        Ok(NoiseSpec {
            target: self.noise_target.into(),
            k: self.noise,
            seed: self.noise_seed.unwrap_or(seed),
        })
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Scene directory or manifest.
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Start from this cloud instead of the scene's init points.
    #[arg(long)]
    init_ply: Option<PathBuf>,
    #[command(flatten)]
    noise: NoiseArgs,
    /// Duplicate init points this many times with small jitter.
    #[arg(long, default_value_t = 1)]
    resample: usize,
    /// Leave the `ms` column empty so repeated runs give identical files.
    #[arg(long)]
    no_timing: bool,
    #[command(flatten)]
    overrides: ConfigOverrides,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Test,
    All,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    ply: PathBuf,
    /// Scene directory or manifest supplying cameras and background.
    #[arg(long, conflicts_with = "cameras", required_unless_present = "cameras")]
    scene: Option<PathBuf>,
    /// Camera JSON file; renders on a black background.
    #[arg(long)]
    cameras: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "test")]
    split: SplitArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    ply: PathBuf,
    #[arg(long)]
    scene: PathBuf,
    #[arg(long, default_value = "model")]
    variant: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    ply: PathBuf,
    /// Camera JSON file.
    #[arg(long, conflicts_with = "scene", required_unless_present = "scene")]
    cameras: Option<PathBuf>,
    /// Scene directory; its training cameras are used.
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BatchArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Variants trained concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    no_timing: bool,
    #[command(flatten)]
    noise: NoiseArgs,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    batch: BatchArgs,
    #[arg(long)]
    baseline_config: Option<PathBuf>,
    #[arg(long)]
    efa_config: Option<PathBuf>,
    /// Applied to both configurations.
    #[command(flatten)]
    overrides: ConfigOverrides,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    batch: BatchArgs,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Grid axis `key=v1,v2,...`; repeat for more axes.
    #[arg(long = "grid", required = true)]
    grid: Vec<String>,
    #[command(flatten)]
    overrides: ConfigOverrides,
}

#[derive(Serialize)]
struct Stamp<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seed: Option<u64>,
}

fn stamp(out: &Path, command: &str, seed: Option<u64>) -> Result<()> {
    let s = Stamp {
        tool: "splatlab",
        version: VERSION,
        command,
        seed,
    };
    write(out.join("run.json"), serde_json::to_string_pretty(&s)? + "\n")
}

fn write(path: impl AsRef<Path>, contents: impl AsRef<[u8]>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn create_out(out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}

/// An invalid command line or config; exits with status 2.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage<T>(r: splatlab::Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Io { .. } => anyhow::Error::new(e),
        e => UsageError(e.to_string()).into(),
    })
}

fn load_config(path: Option<&Path>, overrides: &ConfigOverrides) -> Result<TrainConfig> {
    let mut cfg = match path {
        Some(p) => usage(TrainConfig::load(p))?,
        None => TrainConfig::default(),
    };
    usage(cfg.apply_overrides(overrides.pairs()))?;
    usage(cfg.validate())?;
    Ok(cfg)
}

fn load_scene(path: &Path) -> Result<SceneBundle<f32>> {
    scene::load_scene(path).with_context(|| format!("loading scene {}", path.display()))
}

fn gen_scene(a: &GenSceneArgs) -> Result<()> {
    let mut spec = match &a.spec {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            usage(SceneSpec::from_toml_str(&text))?
        }
        None => SceneSpec::default(),
    };
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    usage(spec.validate())?;
    let (bundle, gt) = scene::generate_synthetic_scene::<f32>(&spec)?;
    create_out(&a.out)?;
    scene::save_scene(&bundle, &a.out)?;
    if a.write_gt {
        scene::save_ply(&gt, &a.out.join("gt.ply"))?;
    }
    write(a.out.join("spec.toml"), toml::to_string(&spec)?)?;
    stamp(&a.out, "gen-scene", Some(spec.seed))?;
    println!(
        "wrote {} train / {} test views and {} init points to {}",
        bundle.train.len(),
        bundle.test.len(),
        bundle.init_points.len(),
        a.out.display()
    );
    Ok(())
}

fn train_cmd(a: &TrainArgs) -> Result<()> {
    let cfg = load_config(a.config.as_deref(), &a.overrides)?;
    let scene = load_scene(&a.scene)?;
    let noise = a.noise.spec(cfg.seed)?;
    if a.init_ply.is_some() && noise.k > 0.0 {
        bail!(UsageError("--noise cannot be combined with --init-ply".into()));
    }
    let init: Cloud32 = match &a.init_ply {
        Some(p) => scene::load_ply(p)?,
        None => {
            let mut v = harness::Variant::new("train", cfg.clone()).with_resample(a.resample);
            v = v.with_noise(noise.target, noise.k, noise.seed);
            v.prepare(&scene)?.1
        }
    };
    create_out(&a.out)?;
    scene::save_ply(&init, &a.out.join("init.ply"))?;
    let out = train::train_from(&scene, init, &cfg)?;
    scene::save_ply(&out.cloud, &a.out.join("final.ply"))?;
    let mut log = Vec::new();
    write_log_csv(&out.logs, &mut log, !a.no_timing)?;
    write(a.out.join("log.csv"), log)?;
    write(a.out.join("config.toml"), cfg.to_toml_string())?;
    stamp(&a.out, "train", Some(cfg.seed))?;
    println!(
        "trained {} iterations: {} Gaussians, config {}",
        cfg.iterations,
        out.cloud.len(),
        &cfg.hash()[..12]
    );
    Ok(())
}

fn render_cmd(a: &RenderArgs) -> Result<()> {
    let cloud: Cloud32 = scene::load_ply(&a.ply)?;
    let (cams, bg): (Vec<Camera<f32>>, _) = match (&a.scene, &a.cameras) {
        (Some(s), _) => {
            let sc = load_scene(s)?;
            let pick = |v: &[scene::View<f32>]| v.iter().map(|v| v.camera.clone()).collect::<Vec<_>>();
            let cams = match a.split {
                SplitArg::Train => pick(&sc.train),
                SplitArg::Test => pick(&sc.test),
                SplitArg::All => [pick(&sc.train), pick(&sc.test)].concat(),
            };
            (cams, sc.background)
        }
        (None, Some(c)) => (read_cameras(c)?, splatlab::math::Vec3::zero()),
        (None, None) => unreachable!("clap requires --scene or --cameras"),
    };
    create_out(&a.out)?;
    let opts = RenderOptions::new(bg);
    for cam in &cams {
        render(&cloud, cam, &opts).color.save_png(&a.out.join(format!("{}.png", cam.id)))?;
    }
    stamp(&a.out, "render", None)?;
    println!("rendered {} views to {}", cams.len(), a.out.display());
    Ok(())
}

fn read_cameras(path: &Path) -> Result<Vec<Camera<f32>>> {
    load_cameras(path)?
        .iter()
        .map(|r| Camera::<f64>::from_record(r).map(|c| c.cast()))
        .collect::<splatlab::Result<_>>()
        .map_err(Into::into)
}

fn eval_cmd(a: &EvalArgs) -> Result<()> {
    let cloud: Cloud32 = scene::load_ply(&a.ply)?;
    let sc = load_scene(&a.scene)?;
    let scores = harness::score_views(&cloud, &sc)?;
    let report = harness::EvalReport::from_scores(&a.variant, scores, String::new(), 0);
    create_out(&a.out)?;
    let mut csv = format!("{}\n", harness::REPORT_CSV_HEADER);
    for r in report.csv_rows() {
        csv.push_str(&r);
        csv.push('\n');
    }
    write(a.out.join("report.csv"), csv)?;
    write(a.out.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    stamp(&a.out, "eval", None)?;
    println!(
        "train PSNR {:.3} / test PSNR {:.3} (gap {:.3})",
        report.train_mean.psnr, report.test_mean.psnr, report.gap.psnr
    );
    Ok(())
}

fn analyze_cmd(a: &AnalyzeArgs) -> Result<()> {
    let cloud: Cloud32 = scene::load_ply(&a.ply)?;
    let cams = match (&a.cameras, &a.scene) {
        (Some(c), _) => read_cameras(c)?,
        (None, Some(s)) => load_scene(s)?.train_cameras(),
        (None, None) => unreachable!("clap requires --cameras or --scene"),
    };
    let cloud64 = cloud.cast::<f64>();
    let cams64: Vec<Camera<f64>> = cams.iter().map(Camera::cast).collect();
    let report = SamplingReport::compute(&cloud64, &cams64)?;
    create_out(&a.out)?;
    write(a.out.join("sampling.csv"), report.to_csv())?;
    write(a.out.join("summary.txt"), report.summary())?;
    stamp(&a.out, "analyze-sampling", None)?;
    print!("{}", report.summary());
    Ok(())
}

fn experiment_options(b: &BatchArgs) -> ExperimentOptions {
    ExperimentOptions {
        jobs: b.jobs.max(1),
        out_dir: Some(b.out.clone()),
        timing: !b.no_timing,
        render_test_views: true,
    }
}

fn report_failures<T>(outcomes: &[harness::VariantOutcome<T>]) -> bool {
    let mut failed = false;
    for o in outcomes {
        if let Err(e) = &o.result {
            eprintln!("variant {} failed: {e}", o.name);
            failed = true;
        }
    }
    failed
}

fn compare_cmd(a: &CompareArgs) -> Result<()> {
    let base = load_config(a.baseline_config.as_deref(), &a.overrides)?;
    let efa = load_config(a.efa_config.as_deref(), &a.overrides)?;
    let sc = load_scene(&a.batch.scene)?;
    let noise = a.batch.noise.spec(base.seed)?;
    create_out(&a.batch.out)?;
    let outcome = harness::compare(&sc, &base, &efa, noise, &experiment_options(&a.batch))?;
    stamp(&a.batch.out, "compare", Some(base.seed))?;
    let failed = report_failures(&outcome.outcomes);
    match outcome.table {
        Some(t) => print!("{}", t.to_markdown()),
        None => bail!("comparison incomplete: at least one variant failed"),
    }
    if failed {
        bail!("some variants failed");
    }
    Ok(())
}

fn sweep_cmd(a: &SweepArgs) -> Result<()> {
    let base = load_config(a.config.as_deref(), &a.overrides)?;
    let grid: Vec<GridAxis> = usage(a.grid.iter().map(|g| GridAxis::parse(g)).collect::<splatlab::Result<_>>())?;
    let sc = load_scene(&a.batch.scene)?;
    let noise = a.batch.noise.spec(base.seed)?;
    create_out(&a.batch.out)?;
    let noise = (noise.k > 0.0).then_some(noise);
    let rows = harness::sweep(&sc, &base, &grid, noise, &experiment_options(&a.batch))?;
    stamp(&a.batch.out, "sweep", Some(base.seed))?;
    print!("{}", harness::sweep_csv(&grid, &rows));
    if rows.iter().any(|r| r.report.is_err()) {
        bail!("some sweep variants failed");
    }
    Ok(())
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("SPLATLAB_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| UsageError(format!("SPLATLAB_THREADS must be a positive integer, got `{v}`")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    configure_threads()?;
    match &cli.command {
        Command::GenScene(a) => gen_scene(a),
        Command::Train(a) => train_cmd(a),
        Command::Render(a) => render_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::AnalyzeSampling(a) => analyze_cmd(a),
        Command::Compare(a) => compare_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
    }
}

/// Config and argument problems are usage errors (2); everything else is a
/// runtime failure (1).
fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::UnknownKeys(_) | Error::ConfigType { .. }) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
