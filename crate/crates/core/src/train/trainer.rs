use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::camera::SamplingProfile;
use crate::error::{Error, Result};
use crate::gaussian::{GaussianCloud, PARAM_COUNT};
use crate::lfcf::{lfcf_step, LfcfState, WindowPosition};
use crate::raster::{rasterize, render_backward_with_state, LowpassFilter, RasterState, RenderOptions};
use crate::scalar::Real;
use crate::scene::{initialize_cloud, SceneBundle};

use super::adam::{adam_step, AdamState};
use super::config::TrainConfig;
use super::densify::{densify_and_prune, DensifyParams};
use super::loss::loss;

pub const LOG_CSV_HEADER: &str = "iteration,loss,count,mean_scale,clones,splits,prunes,lfcf_expand,lfcf_shrinksplit,ms";

/// Learning rate divisor for the degree-1 color coefficients.
const SH_REST_LR_DIVISOR: f64 = 20.0;

// Independent ChaCha streams keyed off the run seed.
const STREAM_ORDER: u64 = 1;
const STREAM_DENSIFY: u64 = 2;
const STREAM_LFCF: u64 = 3;

/// One row of the training log, recorded after the optimizer step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IterationLog {
    pub iteration: u64,
    pub loss: f64,
    pub count: usize,
    pub mean_scale: f64,
    pub clones: usize,
    pub splits: usize,
    /// Gaussians removed by densification pruning and by LFCF.
    pub prunes: usize,
    pub lfcf_expand: usize,
    pub lfcf_shrinksplit: usize,
    /// Wall time of the iteration in milliseconds.
    pub ms: f64,
}

impl IterationLog {
    pub fn csv_row(&self, with_timing: bool) -> String {
        let ms = if with_timing { format!("{:.3}", self.ms) } else { String::new() };
        format!(
            "{},{:.9e},{},{:.9e},{},{},{},{},{},{}",
            self.iteration,
            self.loss,
            self.count,
            self.mean_scale,
            self.clones,
            self.splits,
            self.prunes,
            self.lfcf_expand,
            self.lfcf_shrinksplit,
            ms
        )
    }
}

/// Writes the log as CSV. With `with_timing` false the `ms` column is left
/// empty so that repeated runs produce identical bytes.
pub fn write_log_csv<W: Write>(logs: &[IterationLog], mut out: W, with_timing: bool) -> std::io::Result<()> {
    writeln!(out, "{LOG_CSV_HEADER}")?;
    for l in logs {
        writeln!(out, "{}", l.csv_row(with_timing))?;
    }
    out.flush()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutput<T> {
    pub cloud: GaussianCloud<T>,
    pub logs: Vec<IterationLog>,
    pub wall_ms: f64,
}

/// Position learning rate at `it`: log-linear from `lr_position` to
/// `lr_position_final`, both scaled by the scene extent.
pub fn position_lr(cfg: &TrainConfig, extent: f64, it: u64) -> f64 {
    let t = if cfg.iterations <= 1 {
        0.0
    } else {
        (it as f64 / (cfg.iterations - 1) as f64).clamp(0.0, 1.0)
    };
    let (a, b) = (cfg.lr_position.max(1e-300).ln(), cfg.lr_position_final.max(1e-300).ln());
    (a + (b - a) * t).exp() * extent
}

fn learning_rates<T: Real>(cfg: &TrainConfig, extent: f64, it: u64) -> [T; PARAM_COUNT] {
    let mut lr = [T::zero(); PARAM_COUNT];
    let p = T::lit(position_lr(cfg, extent, it));
    lr[0..3].fill(p);
    lr[3..6].fill(T::lit(cfg.lr_scale));
    lr[6..10].fill(T::lit(cfg.lr_rotation));
    lr[10] = T::lit(cfg.lr_opacity);
    lr[11..14].fill(T::lit(cfg.lr_sh));
    lr[14..23].fill(T::lit(cfg.lr_sh / SH_REST_LR_DIVISOR));
    lr
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Trains from the scene's init points.
pub fn train<T: Real>(scene: &SceneBundle<T>, cfg: &TrainConfig) -> Result<TrainOutput<T>> {
    let init = initialize_cloud(&scene.init_points, T::lit(cfg.init_opacity), cfg.sh_degree);
    train_from(scene, init, cfg)
}

/// Trains starting from an explicit cloud.
pub fn train_from<T: Real>(scene: &SceneBundle<T>, init: GaussianCloud<T>, cfg: &TrainConfig) -> Result<TrainOutput<T>> {
    let start = Instant::now();
    if scene.train.is_empty() {
        return Err(Error::param("training set is empty"));
    }
    cfg.validate()?;
    scene.validate()?;
    init.check_aligned()?;
    let mut cloud = init;
    cloud.sh_degree = cfg.sh_degree;
    if cfg.iterations == 0 {
        return Ok(TrainOutput {
            cloud,
            logs: Vec::new(),
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
    }

    let extent = scene.extent.as_f64();
    let from = cfg.densify_from;
    let until = cfg.densify_until();
    let params = DensifyParams {
        grad_threshold: T::lit(cfg.densify_grad_threshold),
        size_threshold: T::lit(cfg.densify_size_fraction * extent),
        opacity_prune: T::lit(cfg.opacity_prune),
        max_gaussians: cfg.max_gaussians,
    };
    let cams = scene.train_cameras();
    let kappa = T::lit(cfg.lowpass_kappa);
    let mut lowpass: Option<LowpassFilter<T>> = if cfg.lowpass_baseline {
        Some(LowpassFilter::from_cameras(&cloud, &cams, kappa)?)
    } else {
        None
    };

    let mut order_rng = stream_rng(cfg.seed, STREAM_ORDER);
    let mut densify_rng = stream_rng(cfg.seed, STREAM_DENSIFY);
    let mut lfcf_rng = stream_rng(cfg.lfcf.seed, STREAM_LFCF);
    let mut adam = AdamState::new(cloud.len());
    let mut lfcf_state = LfcfState::new(cloud.len());
    let mut order: Vec<usize> = Vec::new();
    let mut cursor = 0;
    let mut round = 0u64;
    let ssim_weight = T::lit(cfg.ssim_weight);
    let mut logs = Vec::with_capacity(cfg.iterations as usize);

    for it in 0..cfg.iterations {
        let t0 = Instant::now();
        if cursor == order.len() {
            order = (0..scene.train.len()).collect();
            order.shuffle(&mut order_rng);
            cursor = 0;
        }
        let view = &scene.train[order[cursor]];
        cursor += 1;

        let opts = RenderOptions::new(scene.background).with_lowpass(lowpass.as_ref());
        let state = RasterState::build(&cloud, &view.camera, &opts);
        let rendered = rasterize(&state, &opts);
        let (value, d_rgb) = loss(&rendered.color, &view.image, ssim_weight)?;
        let back = render_backward_with_state(&cloud, &view.camera, &opts, &state, &d_rgb)?;
        drop(state);

        if it < until {
            for (i, (&norm, &seen)) in back.screen_grad_norm.iter().zip(&back.observed).enumerate() {
                if seen {
                    cloud.grad_accum[i] += norm;
                    cloud.grad_count[i] += 1;
                }
            }
        }
        adam_step(&mut cloud.gaussians, &back.grads, &mut adam, &learning_rates(cfg, extent, it));

        let mut log = IterationLog {
            iteration: it,
            loss: value.as_f64(),
            ..Default::default()
        };
        if it > 0 && it >= from && it < until && it % cfg.densify_interval == 0 {
            let grads = cloud.average_grads();
            let lfcf_round = cfg.lfcf.fires_on_round(round);
            let grad_now = if lfcf_round && cfg.lfcf.replaces_densify {
                grads
            } else {
                let d = densify_and_prune(&mut cloud, &params, &mut densify_rng)?;
                adam.remap(&d.origin);
                lfcf_state.remap(&d.origin);
                log.clones = d.stats.cloned;
                log.splits = d.stats.split;
                log.prunes = d.stats.pruned;
                d.origin.iter().map(|o| grads[o.source]).collect()
            };
            if lfcf_round {
                let profile = SamplingProfile::compute(&cloud, &cams)?;
                let pos = WindowPosition { iteration: it, from, until };
                let out = lfcf_step(
                    &mut cloud,
                    &grad_now,
                    &mut lfcf_state,
                    &profile,
                    &cfg.lfcf,
                    &pos,
                    cfg.max_gaussians,
                    &mut lfcf_rng,
                )?;
                adam.remap(&out.origin);
                log.lfcf_expand = out.stats.expanded;
                log.lfcf_shrinksplit = out.stats.shrunk;
                log.prunes += out.stats.removed;
                cloud.reset_grad_stats();
            }
            round += 1;
            if let Some(i) = cloud.first_non_finite() {
                return Err(Error::param(format!("non-finite parameters in Gaussian {i} at iteration {it}")));
            }
            if lowpass.is_some() {
                lowpass = Some(LowpassFilter::from_cameras(&cloud, &cams, kappa)?);
            }
        }
        log.count = cloud.len();
        log.mean_scale = cloud.mean_scale().as_f64();
        log.ms = t0.elapsed().as_secs_f64() * 1e3;
        logs.push(log);
    }
    if let Some(i) = cloud.first_non_finite() {
        return Err(Error::param(format!("non-finite parameters in Gaussian {i} after training")));
    }
    Ok(TrainOutput {
        cloud,
        logs,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}
