use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::GaussianCloud;
use crate::raster::{render, RenderOptions};
use crate::scalar::Real;
use crate::scene::{initialize_cloud, inject_noise, resample_init, save_ply, NoiseTarget, SceneBundle};
use crate::train::{train_from, write_log_csv, IterationLog, TrainConfig};

use super::report::{score_views, EvalReport, REPORT_CSV_HEADER};
use super::svg::{line_chart, Series};

/// Perturbation of the init cloud.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub target: NoiseTarget,
    pub k: f64,
    pub seed: u64,
}

/// One training configuration plus the init and view-set it runs on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub name: String,
    pub config: TrainConfig,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
    /// Duplicate every init point this many times (1 keeps the init as is).
    #[serde(default = "one")]
    pub resample_factor: usize,
    /// Indices of the training views to keep; all views when absent.
    #[serde(default)]
    pub train_views: Option<Vec<usize>>,
}

fn one() -> usize {
    1
}

impl Variant {
    pub fn new(name: impl Into<String>, config: TrainConfig) -> Self {
        Self {
            name: name.into(),
            config,
            noise: None,
            resample_factor: 1,
            train_views: None,
        }
    }

    pub fn with_noise(mut self, target: NoiseTarget, k: f64, seed: u64) -> Self {
        self.noise = (k > 0.0).then_some(NoiseSpec { target, k, seed });
        self
    }

    pub fn with_train_views(mut self, views: Vec<usize>) -> Self {
        self.train_views = Some(views);
        self
    }

    pub fn with_resample(mut self, factor: usize) -> Self {
        self.resample_factor = factor;
        self
    }

    /// Scene and init cloud this variant trains on.
    pub fn prepare<T: Real>(&self, scene: &SceneBundle<T>) -> Result<(SceneBundle<T>, GaussianCloud<T>)> {
        let scene = match &self.train_views {
            Some(idx) => scene.with_train_subset(idx)?,
            None => scene.clone(),
        };
        let points = resample_init(&scene.init_points, self.resample_factor, scene.extent, self.config.seed)?;
        let mut init = initialize_cloud(&points, T::lit(self.config.init_opacity), self.config.sh_degree);
        if let Some(n) = &self.noise {
            init = inject_noise(&init, n.target, T::lit(n.k), scene.extent, n.seed)?;
        }
        Ok((scene, init))
    }
}

/// Output of one successful variant.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord<T> {
    pub report: EvalReport,
    pub logs: Vec<IterationLog>,
    pub cloud: GaussianCloud<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariantOutcome<T> {
    pub name: String,
    /// Failures are kept as messages so one bad variant does not stop the batch.
    pub result: std::result::Result<RunRecord<T>, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOptions {
    /// Variants trained concurrently.
    pub jobs: usize,
    /// Artifact directory; nothing is written when absent.
    pub out_dir: Option<PathBuf>,
    /// Record wall times. Off makes every artifact byte-reproducible.
    pub timing: bool,
    /// Save PNG renders of the held-out views.
    pub render_test_views: bool,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            jobs: 1,
            out_dir: None,
            timing: true,
            render_test_views: true,
        }
    }
}

/// Trains and evaluates one variant against the full scene's test views.
pub fn run_variant<T: Real>(scene: &SceneBundle<T>, variant: &Variant, timing: bool) -> Result<RunRecord<T>> {
    let start = Instant::now();
    let (train_scene, init) = variant.prepare(scene)?;
    let out = train_from(&train_scene, init, &variant.config)?;
    let mut eval_scene = scene.clone();
    eval_scene.train = train_scene.train;
    let scores = score_views(&out.cloud, &eval_scene)?;
    let mut report = EvalReport::from_scores(&variant.name, scores, variant.config.hash(), variant.config.seed);
    report.wall_ms = if timing { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
    report.final_count = out.cloud.len();
    report.final_mean_scale = out.cloud.mean_scale().as_f64();
    Ok(RunRecord {
        report,
        logs: out.logs,
        cloud: out.cloud,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' || c == '=' { c } else { '_' })
        .collect()
}

/// Trains every variant, evaluates it, and writes per-variant and merged
/// artifacts under `opts.out_dir`.
pub fn run_experiment<T: Real>(
    name: &str,
    scene: &SceneBundle<T>,
    variants: &[Variant],
    opts: &ExperimentOptions,
) -> Result<Vec<VariantOutcome<T>>> {
    if variants.is_empty() {
        return Err(Error::param("experiment needs at least one variant"));
    }
    let mut names = std::collections::HashSet::new();
    if let Some(dup) = variants.iter().find(|v| !names.insert(v.name.as_str())) {
        return Err(Error::param(format!("duplicate variant name `{}`", dup.name)));
    }
    let run = || -> Vec<VariantOutcome<T>> {
        variants
            .par_iter()
            .map(|v| VariantOutcome {
                name: v.name.clone(),
                result: run_variant(scene, v, opts.timing).map_err(|e| e.to_string()),
            })
            .collect()
    };
    let outcomes = if opts.jobs > 1 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(opts.jobs)
            .build()
            .map_err(|e| Error::param(format!("thread pool: {e}")))?
            .install(run)
    } else {
        variants
            .iter()
            .map(|v| VariantOutcome {
                name: v.name.clone(),
                result: run_variant(scene, v, opts.timing).map_err(|e| e.to_string()),
            })
            .collect()
    };
    if let Some(dir) = &opts.out_dir {
        write_artifacts(name, scene, variants, &outcomes, dir, opts)?;
    }
    Ok(outcomes)
}

#[derive(Serialize)]
struct ManifestVariant<'a> {
    name: &'a str,
    config_hash: String,
    seed: u64,
    noise: Option<NoiseSpec>,
    resample_factor: usize,
    train_views: Option<&'a [usize]>,
    error: Option<&'a str>,
}

#[derive(Serialize)]
struct ExperimentManifest<'a> {
    name: &'a str,
    variants: Vec<ManifestVariant<'a>>,
}

fn write_artifacts<T: Real>(
    name: &str,
    scene: &SceneBundle<T>,
    variants: &[Variant],
    outcomes: &[VariantOutcome<T>],
    dir: &Path,
    opts: &ExperimentOptions,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut report_csv = format!("{REPORT_CSV_HEADER}\n");
    let mut loss_series = Vec::new();
    let mut scale_series = Vec::new();
    let mut count_series = Vec::new();
    for (v, o) in variants.iter().zip(outcomes) {
        let vdir = dir.join(sanitize(&v.name));
        fs::create_dir_all(&vdir).map_err(|e| Error::io(&vdir, e))?;
        write_file(&vdir.join("config.toml"), v.config.to_toml_string().as_bytes())?;
        let rec = match &o.result {
            Ok(r) => r,
            Err(msg) => {
                write_file(&vdir.join("error.txt"), format!("{msg}\n").as_bytes())?;
                continue;
            }
        };
        for row in rec.report.csv_rows() {
            report_csv.push_str(&row);
            report_csv.push('\n');
        }
        let mut log = Vec::new();
        write_log_csv(&rec.logs, &mut log, opts.timing).map_err(|e| Error::io(vdir.join("log.csv"), e))?;
        write_file(&vdir.join("log.csv"), &log)?;
        write_file(&vdir.join("report.json"), serde_json::to_string_pretty(&rec.report)?.as_bytes())?;
        save_ply(&rec.cloud, &vdir.join("final.ply"))?;
        if opts.render_test_views {
            let rdir = vdir.join("renders");
            fs::create_dir_all(&rdir).map_err(|e| Error::io(&rdir, e))?;
            let ropts = RenderOptions::new(scene.background);
            for view in &scene.test {
                render(&rec.cloud, &view.camera, &ropts)
                    .color
                    .save_png(&rdir.join(format!("{}.png", sanitize(&view.camera.id))))?;
            }
        }
        let pts = |f: fn(&IterationLog) -> f64| rec.logs.iter().map(|l| (l.iteration as f64, f(l))).collect();
        loss_series.push(Series::new(&v.name, pts(|l| l.loss)));
        scale_series.push(Series::new(&v.name, pts(|l| l.mean_scale)));
        count_series.push(Series::new(&v.name, pts(|l| l.count as f64)));
    }
    write_file(&dir.join("report.csv"), report_csv.as_bytes())?;
    write_file(&dir.join("loss.svg"), line_chart("loss", "iteration", &loss_series).as_bytes())?;
    write_file(&dir.join("mean_scale.svg"), line_chart("mean scale", "iteration", &scale_series).as_bytes())?;
    write_file(&dir.join("count.svg"), line_chart("Gaussian count", "iteration", &count_series).as_bytes())?;

    let manifest = ExperimentManifest {
        name,
        variants: variants
            .iter()
            .zip(outcomes)
            .map(|(v, o)| ManifestVariant {
                name: &v.name,
                config_hash: v.config.hash(),
                seed: v.config.seed,
                noise: v.noise,
                resample_factor: v.resample_factor,
                train_views: v.train_views.as_deref(),
                error: o.result.as_ref().err().map(String::as_str),
            })
            .collect(),
    };
    let path = dir.join("experiment.json");
    let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    f.write_all(serde_json::to_string_pretty(&manifest)?.as_bytes())
        .map_err(|e| Error::io(&path, e))
}
