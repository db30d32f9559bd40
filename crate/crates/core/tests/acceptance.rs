//! Acceptance criteria 1 to 12.
//!
//! Every criterion prints one `criterion NN PASS|FAIL ...` line to stderr
//! (bypassing output capture) and to `acceptance.txt` in the cargo target
//! tmp dir. The test fails when any line is FAIL. Training runs share one
//! reference scene and are cached, so the whole suite trains each variant
//! once.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use splatlab::camera::{sampling_rate, Camera, SamplingProfile};
use splatlab::gaussian::{apply_scale_factor, build_covariance, frequency_weight, Gaussian, GaussianCloud, PARAM_COUNT};
use splatlab::harness::{run_variant, RunRecord, Variant};
use splatlab::image::Image;
use splatlab::lfcf::{anneal_at, enlarging_factor, lfcf_step, scale_based_factors, split_probability, LfcfConfig, LfcfState, WindowPosition};
use splatlab::math::{Quat, Vec3};
use splatlab::raster::{render, render_backward, RenderOptions};
use splatlab::scene::{generate_synthetic_scene, NoiseTarget, SceneBundle, SceneSpec};
use splatlab::train::{write_log_csv, TrainConfig};

// ---- pinned tolerances -------------------------------------------------

const GRAD_SCENES: u64 = 25;
const GRAD_MAX_GAUSSIANS: usize = 20;
const GRAD_REL_TOL: f64 = 1e-3;
const GRAD_ABS_FLOOR: f64 = 1e-6;
const GRAD_FD_STEP: f64 = 1e-5;
const GRAD_BUDGET_S: f64 = 120.0;

const IDENTITY_TOL: f64 = 1e-12;
const IDENTITY_CASES: usize = 1000;

const GAP_RATIO_MIN: f64 = 2.0;
const GAP_BUDGET_S: f64 = 20.0 * 60.0;
const EFA_GAIN_MIN_DB: f64 = 0.3;
const NO_HARM_DB: f64 = 0.2;
const EARLY_DROP_FRACTION: f64 = 0.5;
const ABLATION_DROP_MIN_DB: f64 = 0.05;
const OVERHEAD_MAX: f64 = 1.15;

// ---- reference setup ---------------------------------------------------

/// Reference synthetic scene: seed 0, 128x128, 9 train and 3 test views.
const REFERENCE_SCENE: &str = "seed = 0\nresolution = 128\nn_train = 9\nn_test = 3\n";

/// Densification threshold calibrated for 128x128 views (see README).
const REFERENCE_GRAD_THRESHOLD: f64 = 1e-3;
const REFERENCE_NOISE_K: f64 = 2.0;
const SEEDS: [u64; 2] = [0, 1];
const SPARSE_VIEWS: [usize; 3] = [4, 6, 8];
const NOISE_LEVELS: [f64; 3] = [1.0, 2.0, 3.0];

/// Short schedule used to repeat every variant for the determinism check.
const REPEAT_ITERATIONS: u64 = 600;

fn reference_config(seed: u64, lfcf: bool) -> TrainConfig {
    let mut cfg = TrainConfig {
        seed,
        densify_grad_threshold: REFERENCE_GRAD_THRESHOLD,
        ..TrainConfig::default()
    };
    cfg.lfcf.tau = REFERENCE_GRAD_THRESHOLD;
    cfg.lfcf.enabled = lfcf;
    cfg.lfcf.seed = seed;
    cfg
}

// ---- reporting ---------------------------------------------------------

struct Ledger {
    lines: Vec<String>,
    failed: Vec<u32>,
}

impl Ledger {
    fn record(&mut self, id: u32, pass: bool, detail: String) {
        let line = format!("criterion {id:02} {} {detail}", if pass { "PASS" } else { "FAIL" });
        let _ = writeln!(std::io::stderr(), "{line}");
        self.lines.push(line);
        if !pass {
            self.failed.push(id);
        }
    }
}

// ---- shared training runs ----------------------------------------------

struct Lab {
    scene: SceneBundle<f32>,
    runs: BTreeMap<String, (Variant, RunRecord<f32>)>,
}

impl Lab {
    fn new() -> Self {
        let spec = SceneSpec::from_toml_str(REFERENCE_SCENE).unwrap();
        let (scene, _) = generate_synthetic_scene::<f32>(&spec).unwrap();
        Self {
            scene,
            runs: BTreeMap::new(),
        }
    }

    fn run(&mut self, v: Variant) -> &RunRecord<f32> {
        if !self.runs.contains_key(&v.name) {
            let t = Instant::now();
            let rec = run_variant(&self.scene, &v, true).unwrap_or_else(|e| panic!("variant {} failed: {e}", v.name));
            let _ = writeln!(
                std::io::stderr(),
                "  run {:<28} train {:.3} test {:.3} count {:>6} ({:.0} s)",
                v.name,
                rec.report.train_mean.psnr,
                rec.report.test_mean.psnr,
                rec.report.final_count,
                t.elapsed().as_secs_f64()
            );
            self.runs.insert(v.name.clone(), (v.clone(), rec));
        }
        &self.runs[&v.name].1
    }

    fn test_psnr(&mut self, v: Variant) -> f64 {
        self.run(v).report.test_mean.psnr
    }
}

fn variant(seed: u64, lfcf: bool, k: f64) -> Variant {
    let name = format!("{}_k{k}_s{seed}", if lfcf { "efa" } else { "base" });
    Variant::new(name, reference_config(seed, lfcf)).with_noise(NoiseTarget::Scales, k, seed)
}

/// Byte image of the CSV artifacts of one run, timing excluded.
fn csv_bytes(rec: &RunRecord<f32>) -> Vec<u8> {
    let mut out = Vec::new();
    write_log_csv(&rec.logs, &mut out, false).unwrap();
    for row in rec.report.csv_rows() {
        out.extend_from_slice(row.as_bytes());
        out.push(b'\n');
    }
    out
}

/// `n` of the 9 training views, spread evenly around the orbit.
fn spread_views(n: usize, total: usize) -> Vec<usize> {
    (0..n).map(|i| i * total / n).collect()
}

// ---- criterion 1 -------------------------------------------------------

fn random_camera(rng: &mut ChaCha8Rng, size: u32) -> Camera<f64> {
    let az: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let el: f64 = rng.gen_range(-0.6..0.6);
    let r = rng.gen_range(3.0..5.0);
    let eye = Vec3::new(r * el.cos() * az.cos(), r * el.cos() * az.sin(), r * el.sin());
    let target = Vec3::new(rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2));
    Camera::look_at("c", eye, target, Vec3::new(0.0, 0.0, 1.0), size, size, rng.gen_range(0.6..1.1), 0.1, 100.0)
}

fn random_gaussian(rng: &mut ChaCha8Rng, sh: bool) -> Gaussian<f64> {
    let mut v = |lo: f64, hi: f64| rng.gen_range(lo..hi);
    Gaussian {
        position: Vec3::new(v(-0.8, 0.8), v(-0.8, 0.8), v(-0.8, 0.8)),
        log_scale: Vec3::new(v(-2.6, -1.2), v(-2.6, -1.2), v(-2.6, -1.2)),
        rotation: Quat::new(v(0.2, 1.0), v(-1.0, 1.0), v(-1.0, 1.0), v(-1.0, 1.0)),
        opacity_logit: v(-2.0, 2.0),
        sh_dc: Vec3::new(v(-1.2, 1.2), v(-1.2, 1.2), v(-1.2, 1.2)),
        sh_rest: if sh {
            [Vec3::new(v(-0.3, 0.3), v(-0.3, 0.3), v(-0.3, 0.3)); 3]
        } else {
            [Vec3::zero(); 3]
        },
    }
}

fn criterion_gradients(ledger: &mut Ledger) {
    let start = Instant::now();
    let size = 32;
    let mut checked = 0usize;
    let mut worst = 0.0f64;
    let mut failure = None;
    for seed in 0..GRAD_SCENES {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let sh = seed % 2 == 1;
        let n = rng.gen_range(1..=GRAD_MAX_GAUSSIANS);
        let cloud = GaussianCloud::from_gaussians((0..n).map(|_| random_gaussian(&mut rng, sh)).collect(), u8::from(sh));
        let cam = random_camera(&mut rng, size);
        let w: Vec<[f64; 3]> = (0..size * size).map(|_| [0, 1, 2].map(|_| rng.gen_range(-1.0..1.0))).collect();
        let w = Image::from_pixels(size, size, w).unwrap();
        let bg = Vec3::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
        let opts = RenderOptions::new(bg).with_cutoff(f64::INFINITY);
        let objective = |c: &GaussianCloud<f64>| -> f64 {
            let img = render(c, &cam, &opts).color;
            img.pixels.iter().zip(&w.pixels).map(|(a, b)| a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).sum()
        };
        let grads = render_backward(&cloud, &cam, &opts, &w).unwrap().grads;
        let params = if sh { PARAM_COUNT } else { 14 };
        for i in 0..n {
            let analytic = grads[i].to_params();
            for j in 0..params {
                let mut p = cloud.gaussians[i].to_params();
                let mut eval = |delta: f64| {
                    p[j] = cloud.gaussians[i].to_params()[j] + delta;
                    let mut c = cloud.clone();
                    c.gaussians[i] = Gaussian::from_params(&p);
                    objective(&c)
                };
                let fd = (eval(GRAD_FD_STEP) - eval(-GRAD_FD_STEP)) / (2.0 * GRAD_FD_STEP);
                let err = (analytic[j] - fd).abs();
                let allowed = (GRAD_REL_TOL * fd.abs().max(analytic[j].abs())).max(GRAD_ABS_FLOOR);
                worst = worst.max(err / allowed);
                checked += 1;
                if err > allowed && failure.is_none() {
                    failure = Some(format!("scene {seed} gaussian {i} param {j}: analytic {:.6e} fd {fd:.6e}", analytic[j]));
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = failure.is_none() && secs <= GRAD_BUDGET_S;
    ledger.record(
        1,
        pass,
        format!(
            "{checked} partials over {GRAD_SCENES} scenes, worst error/allowance {worst:.3}, {secs:.1} s{}",
            failure.map(|f| format!(", first mismatch {f}")).unwrap_or_default()
        ),
    );
}

// ---- criterion 2 -------------------------------------------------------

fn criterion_identities(ledger: &mut Ledger) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cfg = LfcfConfig {
        enabled: true,
        ..LfcfConfig::default()
    };
    let mut problems = Vec::new();
    let mut check = |ok: bool, what: &str| {
        if !ok && !problems.iter().any(|p: &String| p == what) {
            problems.push(what.to_string());
        }
    };

    check(enlarging_factor(1.0, &cfg) == 1.5, "c(theta=1) = 1.5");
    check(enlarging_factor(0.0, &cfg) == 1.0, "c(theta=0) = 1");
    for _ in 0..IDENTITY_CASES {
        let c: f64 = rng.gen_range(1.0..3.0);
        let end: f64 = rng.gen_range(0.5..1.0);
        let n = rng.gen_range(0.25..4.0);
        let acfg = LfcfConfig {
            c_end: end,
            anneal_n: n,
            ..cfg.clone()
        };
        check((anneal_at(c, 0.0, &acfg) - c).abs() <= IDENTITY_TOL, "anneal f(0) = c_i");
        check((anneal_at(c, 1.0, &acfg) - end).abs() <= IDENTITY_TOL, "anneal f(1) = c_end");

        let theta: f64 = rng.gen_range(0.0..1.0);
        check(split_probability(theta) == 1.0 - theta, "eta = 1 - theta");

        let mut g = random_gaussian(&mut rng, false);
        g.log_scale = Vec3::new(rng.gen_range(-4.0..1.0), rng.gen_range(-4.0..1.0), rng.gen_range(-4.0..1.0));
        // det(R S² Rᵀ) = (s_x s_y s_z)²; the cofactor form loses digits on
        // strongly anisotropic Σ.
        let det = |g: &Gaussian<f64>| g.scale().to_array().iter().product::<f64>().powi(2);
        let after = apply_scale_factor(&g, scale_based_factors(&g, c, true)).unwrap();
        check(((det(&after) - det(&g)) / det(&g)).abs() <= IDENTITY_TOL, "det preserved by scale strategy");

        let cams: Vec<Camera<f64>> = (0..rng.gen_range(1..6)).map(|_| random_camera(&mut rng, 64)).collect();
        let p = Vec3::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        check(sampling_rate(p, &cams).unwrap() == brute_force_rate(p, &cams), "sampling rate = brute-force max");

        let cov = build_covariance(&g).unwrap();
        let omega = Vec3::new(rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0));
        let t: f64 = rng.gen_range(0.0..1.0);
        let dt: f64 = rng.gen_range(1e-3..1.0);
        check(frequency_weight(&cov, Vec3::zero()) == 1.0, "frequency weight at omega=0 is 1");
        check(frequency_weight(&cov, omega * (t + dt)) <= frequency_weight(&cov, omega * t), "frequency weight decays along rays");
    }
    let pass = problems.is_empty();
    ledger.record(
        2,
        pass,
        if pass {
            format!("interpolation, annealing, eta, volume, sampling-rate and frequency identities hold on {IDENTITY_CASES} cases")
        } else {
            format!("violated: {}", problems.join("; "))
        },
    );
}

/// `max_k f_k / z_k` over cameras whose image rectangle, grown by 20% on
/// every side, contains the projection of `p` at a depth in `[near, far]`.
fn brute_force_rate(p: Vec3<f64>, cams: &[Camera<f64>]) -> f64 {
    let mut best = 0.0f64;
    for c in cams {
        let r = c.rotation.to_row_vec();
        let q = [0, 1, 2].map(|i| r[3 * i] * p.x + r[3 * i + 1] * p.y + r[3 * i + 2] * p.z + c.translation[i]);
        let z = q[2];
        if !(z > 0.0) || z < c.near || z > c.far {
            continue;
        }
        let (u, v) = (c.fx * q[0] / z + c.cx, c.fy * q[1] / z + c.cy);
        let (w, h) = (c.width as f64, c.height as f64);
        if u >= -0.2 * w && u <= 1.2 * w && v >= -0.2 * h && v <= 1.2 * h {
            best = best.max(c.fx.max(c.fy) / z);
        }
    }
    best
}

// ---- criterion 3 -------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
enum Outcome {
    Expand,
    ShrinkSplit,
    Untouched,
    Removed,
}

fn criterion_branches(ledger: &mut Ledger) {
    let cfg = LfcfConfig {
        enabled: true,
        probabilistic_strategy: false,
        ..LfcfConfig::default()
    };
    let tau = cfg.tau;
    let pos = WindowPosition {
        iteration: 1000,
        from: 500,
        until: 4200,
    };
    let grads = [("grad<tau", 0.5 * tau), ("grad=tau", tau), ("grad>tau", 1.5 * tau)];
    let pgrads = [("grad>pgrad", 0.5), ("grad=pgrad", 1.0), ("grad<pgrad", 2.0)];
    let alphas = [("alpha>=eps", 0.5), ("alpha<eps", 0.5 * cfg.epsilon)];

    let mut rows = 0;
    let mut mismatches = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (gl, grad) in grads {
        for (pl, pmul) in pgrads {
            for (al, alpha) in alphas {
                rows += 1;
                let pgrad = grad * pmul;
                let expected = if alpha < cfg.epsilon {
                    Outcome::Removed
                } else if grad > tau && grad > pgrad {
                    Outcome::Expand
                } else if grad > tau {
                    Outcome::ShrinkSplit
                } else {
                    Outcome::Untouched
                };
                let mut g = Gaussian::new(Vec3::zero(), Vec3::new(0.02, 0.05, 0.1), alpha, Vec3::splat(0.5));
                g.rotation = Quat::new(0.9, 0.1, -0.2, 0.3);
                let mut cloud = GaussianCloud::from_gaussians(vec![g], 0);
                let mut state = LfcfState { pgrad: vec![pgrad] };
                let profile = SamplingProfile::from_rates(vec![100.0]);
                let out = lfcf_step(&mut cloud, &[grad], &mut state, &profile, &cfg, &pos, usize::MAX, &mut rng).unwrap();
                let s = out.stats;
                let branch_sum = s.expanded + s.shrunk + s.untouched;
                let got = if cloud.is_empty() {
                    Outcome::Removed
                } else if s.expanded == 1 && cloud.len() == 1 {
                    Outcome::Expand
                } else if s.shrunk == 1 && s.split == 1 && cloud.len() == 2 {
                    Outcome::ShrinkSplit
                } else if s.untouched == 1 && cloud.len() == 1 && cloud.gaussians[0] == g {
                    Outcome::Untouched
                } else {
                    Outcome::Removed
                };
                let scale_ok = match got {
                    Outcome::Expand => (cloud.gaussians[0].scale().x - 0.02 * expected_factor(&cfg, &pos)).abs() < 1e-9,
                    Outcome::ShrinkSplit => cloud
                        .gaussians
                        .iter()
                        .all(|c| (c.scale().x - 0.02 / expected_factor(&cfg, &pos) / 1.6).abs() < 1e-9),
                    _ => true,
                };
                let pgrad_ok = state.pgrad.len() == cloud.len() && state.pgrad.iter().all(|&p| p == grad);
                if got != expected || branch_sum != 1 || !scale_ok || !pgrad_ok {
                    mismatches.push(format!("[{gl}, {pl}, {al}] expected {expected:?} got {got:?}"));
                }
            }
        }
    }
    let pass = mismatches.is_empty();
    ledger.record(
        3,
        pass,
        if pass {
            format!("{rows} branch cases match, PGrad refreshed on every survivor")
        } else {
            mismatches.join("; ")
        },
    );
}

/// Annealed enlarging factor for a lone Gaussian (theta = 0.5).
fn expected_factor(cfg: &LfcfConfig, pos: &WindowPosition) -> f64 {
    anneal_at(enlarging_factor(0.5, cfg), pos.progress().unwrap(), cfg)
}

// ---- criteria 4 to 12 --------------------------------------------------

fn criterion_noisy_gap(ledger: &mut Ledger, lab: &mut Lab) {
    let t = Instant::now();
    let clean = lab.run(variant(0, false, 0.0)).report.clone();
    let noisy = lab.run(variant(0, false, REFERENCE_NOISE_K)).report.clone();
    let secs = t.elapsed().as_secs_f64();
    let train_drop = clean.train_mean.psnr - noisy.train_mean.psnr;
    let test_drop = clean.test_mean.psnr - noisy.test_mean.psnr;
    let pass = test_drop > 0.0 && test_drop >= GAP_RATIO_MIN * train_drop.max(0.0) && secs <= GAP_BUDGET_S;
    ledger.record(
        4,
        pass,
        format!(
            "baseline clean->noisy(k={REFERENCE_NOISE_K}) drop: train {train_drop:+.3} dB, test {test_drop:+.3} dB, ratio {:.2} (need >= {GAP_RATIO_MIN}), {secs:.0} s",
            test_drop / train_drop
        ),
    );
}

fn criterion_efa_gain(ledger: &mut Ledger, lab: &mut Lab) {
    let mut pass = true;
    let mut parts = Vec::new();
    for seed in SEEDS {
        let bc = lab.test_psnr(variant(seed, false, 0.0));
        let bn = lab.test_psnr(variant(seed, false, REFERENCE_NOISE_K));
        let ec = lab.test_psnr(variant(seed, true, 0.0));
        let en = lab.test_psnr(variant(seed, true, REFERENCE_NOISE_K));
        let gain = en - bn;
        let (gap_b, gap_e) = ((bc - bn).abs(), (ec - en).abs());
        pass &= gain >= EFA_GAIN_MIN_DB && gap_e < gap_b;
        parts.push(format!("seed {seed}: noisy test gain {gain:+.3} dB, /clean-noisy/ {gap_b:.3} -> {gap_e:.3}"));
    }
    ledger.record(5, pass, format!("{} (need gain >= {EFA_GAIN_MIN_DB} dB and smaller gap)", parts.join("; ")));
}

fn criterion_no_harm(ledger: &mut Ledger, lab: &mut Lab) {
    let b = lab.test_psnr(variant(0, false, 0.0));
    let e = lab.test_psnr(variant(0, true, 0.0));
    ledger.record(
        6,
        e >= b - NO_HARM_DB,
        format!("clean-init test PSNR baseline {b:.3}, EFA-GS {e:.3}, difference {:+.3} dB (need >= -{NO_HARM_DB})", e - b),
    );
}

fn criterion_scale_dynamics(ledger: &mut Ledger, lab: &mut Lab) {
    let clean_v = variant(0, false, 0.0);
    let (from, until) = (clean_v.config.densify_from, clean_v.config.densify_until());
    let clean = lab.run(clean_v).clone();
    let noisy_final = lab.run(variant(0, false, REFERENCE_NOISE_K)).report.final_mean_scale;
    let s0 = clean.logs[0].mean_scale;
    let third = from + (until - from) / 3;
    let s_third = clean.logs[third as usize].mean_scale;
    let s_end = clean.logs.last().unwrap().mean_scale;
    let total = s0 - s_end;
    let early = s0 - s_third;
    let clean_final = clean.report.final_mean_scale;
    let pass = total > 0.0 && early >= EARLY_DROP_FRACTION * total && noisy_final < clean_final;
    ledger.record(
        7,
        pass,
        format!(
            "mean scale {s0:.5} -> {s_third:.5} at iteration {third} -> {s_end:.5}: {:.0}% of the drop in the first third; final noisy {noisy_final:.5} vs clean {clean_final:.5}",
            100.0 * early / total
        ),
    );
}

fn criterion_sparse_views(ledger: &mut Ledger, lab: &mut Lab) {
    let total = lab.scene.train.len();
    let psnr: Vec<f64> = SPARSE_VIEWS
        .iter()
        .map(|&n| {
            let v = Variant::new(format!("base_views{n}_s0"), reference_config(0, false)).with_train_views(spread_views(n, total));
            lab.test_psnr(v)
        })
        .collect();
    let pass = psnr.windows(2).all(|w| w[1] >= w[0]);
    let cells: Vec<String> = SPARSE_VIEWS.iter().zip(&psnr).map(|(n, p)| format!("{n} views {p:.3}")).collect();
    ledger.record(8, pass, format!("baseline test PSNR: {}", cells.join(", ")));
}

fn criterion_noise_levels(ledger: &mut Ledger, lab: &mut Lab) {
    let base: Vec<f64> = NOISE_LEVELS.iter().map(|&k| lab.test_psnr(variant(0, false, k))).collect();
    let efa: Vec<f64> = NOISE_LEVELS.iter().map(|&k| lab.test_psnr(variant(0, true, k))).collect();
    let monotone = base.windows(2).all(|w| w[1] <= w[0]);
    let dominates = base.iter().zip(&efa).all(|(b, e)| e >= b);
    let cells: Vec<String> = NOISE_LEVELS
        .iter()
        .zip(base.iter().zip(&efa))
        .map(|(k, (b, e))| format!("k={k}: {b:.3}/{e:.3}"))
        .collect();
    ledger.record(
        9,
        monotone && dominates,
        format!("test PSNR baseline/EFA-GS {}; baseline non-increasing {monotone}, EFA-GS >= baseline {dominates}", cells.join(", ")),
    );
}

fn criterion_ablation(ledger: &mut Ledger, lab: &mut Lab) {
    let full = lab.test_psnr(variant(0, true, REFERENCE_NOISE_K));
    let mut no_depth = variant(0, true, REFERENCE_NOISE_K);
    no_depth.name = "efa_nodepth_k2_s0".into();
    no_depth.config.lfcf.depth_strategy = false;
    let no_depth = lab.test_psnr(no_depth);
    let mut none = variant(0, true, REFERENCE_NOISE_K);
    none.name = "efa_nostrategy_k2_s0".into();
    none.config.lfcf = none.config.lfcf.clone().without_strategies();
    let none = lab.test_psnr(none);
    let (d1, d2) = (full - no_depth, full - none);
    ledger.record(
        10,
        d1 >= ABLATION_DROP_MIN_DB && d2 >= d1,
        format!("noisy test PSNR full {full:.3}, depth off {no_depth:.3} (drop {d1:+.3}), all off {none:.3} (drop {d2:+.3})"),
    );
}

fn criterion_overhead(ledger: &mut Ledger, lab: &mut Lab) {
    let wall = |lab: &mut Lab, lfcf: bool| -> f64 {
        [0.0, REFERENCE_NOISE_K].iter().map(|&k| lab.run(variant(0, lfcf, k)).report.wall_ms).sum::<f64>()
    };
    let b = wall(lab, false);
    let e = wall(lab, true);
    ledger.record(
        11,
        e <= OVERHEAD_MAX * b,
        format!("reference clean+noisy wall time baseline {:.1} s, EFA-GS {:.1} s, ratio {:.3} (need <= {OVERHEAD_MAX})", b / 1e3, e / 1e3, e / b),
    );
}

fn criterion_determinism(ledger: &mut Ledger, lab: &mut Lab) {
    let mut diverged = Vec::new();
    // The noisy EFA-GS reference run touches every random stream; repeat it in full.
    let full_name = variant(0, true, REFERENCE_NOISE_K).name;
    let (v, rec) = &lab.runs[&full_name];
    let again = run_variant(&lab.scene, v, false).unwrap();
    if csv_bytes(rec) != csv_bytes(&again) {
        diverged.push(full_name.clone());
    }
    // Every other acceptance variant is repeated on a short schedule that
    // still spans densification and LFCF rounds.
    let variants: Vec<Variant> = lab.runs.values().map(|(v, _)| v.clone()).collect();
    for mut v in variants {
        v.config.iterations = REPEAT_ITERATIONS;
        v.config.densify_from = 100;
        v.config.densify_until = Some(500);
        v.config.densify_interval = 50;
        let a = run_variant(&lab.scene, &v, false).unwrap();
        let b = run_variant(&lab.scene, &v, false).unwrap();
        if csv_bytes(&a) != csv_bytes(&b) {
            diverged.push(format!("{} (short)", v.name));
        }
    }
    let n = lab.runs.len();
    ledger.record(
        12,
        diverged.is_empty(),
        if diverged.is_empty() {
            format!("log and report CSVs byte-identical on repeat: {full_name} in full, all {n} variants on a {REPEAT_ITERATIONS}-iteration schedule")
        } else {
            format!("CSV bytes differ for {}", diverged.join(", "))
        },
    );
}

#[test]
fn acceptance() {
    let mut ledger = Ledger {
        lines: Vec::new(),
        failed: Vec::new(),
    };
    criterion_gradients(&mut ledger);
    criterion_identities(&mut ledger);
    criterion_branches(&mut ledger);

    let mut lab = Lab::new();
    criterion_noisy_gap(&mut ledger, &mut lab);
    criterion_efa_gain(&mut ledger, &mut lab);
    criterion_no_harm(&mut ledger, &mut lab);
    criterion_scale_dynamics(&mut ledger, &mut lab);
    criterion_sparse_views(&mut ledger, &mut lab);
    criterion_noise_levels(&mut ledger, &mut lab);
    criterion_ablation(&mut ledger, &mut lab);
    criterion_overhead(&mut ledger, &mut lab);
    criterion_determinism(&mut ledger, &mut lab);

    let mut text = String::new();
    for l in &ledger.lines {
        let _ = writeln!(text, "{l}");
    }
    let path = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance.txt");
    std::fs::write(&path, &text).unwrap();
    assert!(ledger.failed.is_empty(), "failed criteria {:?}\n{text}", ledger.failed);
}
