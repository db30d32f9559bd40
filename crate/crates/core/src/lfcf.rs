//! Low-frequency-come-first densification.
//!
//! A Gaussian whose averaged screen-space gradient exceeds `tau` is
//! expanded when that gradient grew since the previous LFCF round and
//! shrunk (and possibly split) when it did not. Expansion factors are
//! interpolated from the normalized sampling rate, annealed over the
//! densification window, and distributed over the axes so that volume is
//! preserved.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::camera::SamplingProfile;
use crate::error::{Error, Result};
use crate::gaussian::{apply_scale_factor, Gaussian, GaussianCloud};
use crate::math::Vec3;
use crate::scalar::Real;
use crate::train::densify::{split_gaussian, Provenance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LfcfConfig {
    pub enabled: bool,
    /// Gradient threshold.
    pub tau: f64,
    /// Opacity below which Gaussians are removed after each step.
    pub epsilon: f64,
    pub c_max: f64,
    pub c_min: f64,
    /// Value the annealed factor reaches at the end of the window.
    pub c_end: f64,
    /// Run every `r` densification rounds.
    pub r: u32,
    /// Annealing decay exponent.
    pub anneal_n: f64,
    pub depth_strategy: bool,
    pub scale_strategy: bool,
    pub cadence_strategy: bool,
    pub anneal_strategy: bool,
    pub probabilistic_strategy: bool,
    /// Use `exp(ln(c) · xⁿ)` (rising from 1 to `c`) instead of the
    /// default decay from `c` to `c_end`.
    pub anneal_literal: bool,
    /// On LFCF rounds, skip the standard clone/split and let LFCF make
    /// every structural change; off runs both, densification first.
    pub replaces_densify: bool,
    pub seed: u64,
}

impl Default for LfcfConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            tau: 2e-4,
            epsilon: 0.005,
            c_max: 1.5,
            c_min: 1.0,
            c_end: 1.0,
            r: 2,
            anneal_n: 1.0,
            depth_strategy: true,
            scale_strategy: true,
            cadence_strategy: true,
            anneal_strategy: true,
            probabilistic_strategy: true,
            anneal_literal: false,
            replaces_densify: true,
            seed: 0,
        }
    }
}

impl LfcfConfig {
    /// Enabled with every strategy switched off.
    pub fn without_strategies(mut self) -> Self {
        self.depth_strategy = false;
        self.scale_strategy = false;
        self.cadence_strategy = false;
        self.anneal_strategy = false;
        self.probabilistic_strategy = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::param(m));
        if !(self.c_end > 0.0) || !(self.c_min >= self.c_end) || !(self.c_max >= self.c_min) || !self.c_max.is_finite() {
            return bad(format!(
                "LFCF factors need c_max >= c_min >= c_end > 0, got {}, {}, {}",
                self.c_max, self.c_min, self.c_end
            ));
        }
        if !(self.tau >= 0.0) {
            return bad(format!("tau must be non-negative, got {}", self.tau));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon must lie in (0, 1), got {}", self.epsilon));
        }
        if self.r < 1 {
            return bad("r must be at least 1".into());
        }
        if !(self.anneal_n > 0.0) || !self.anneal_n.is_finite() {
            return bad(format!("anneal_n must be positive, got {}", self.anneal_n));
        }
        Ok(())
    }

    /// Cadence actually used: `r`, or every round when cadence is off.
    pub fn effective_r(&self) -> u32 {
        if self.cadence_strategy {
            self.r
        } else {
            1
        }
    }

    /// Whether the densification round with zero-based index `round` runs LFCF.
    pub fn fires_on_round(&self, round: u64) -> bool {
        let r = u64::from(self.effective_r());
        self.enabled && round % r == r - 1
    }
}

/// Position of an iteration inside the densification window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowPosition {
    pub iteration: u64,
    pub from: u64,
    pub until: u64,
}

impl WindowPosition {
    /// Normalized progress `x ∈ [0, 1]`, or `None` outside the window.
    pub fn progress(&self) -> Option<f64> {
        if self.until <= self.from || self.iteration < self.from || self.iteration > self.until {
            return None;
        }
        Some((self.iteration - self.from) as f64 / (self.until - self.from) as f64)
    }
}

/// Per-Gaussian previous-gradient memory, index-aligned with the cloud.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LfcfState<T> {
    pub pgrad: Vec<T>,
}

impl<T: Real> LfcfState<T> {
    pub fn new(len: usize) -> Self {
        Self {
            pgrad: vec![T::zero(); len],
        }
    }

    /// Re-indexes after a structural change; new entries copy their source.
    pub fn remap(&mut self, origin: &[Provenance]) {
        self.pgrad = origin.iter().map(|o| self.pgrad[o.source]).collect();
    }
}

/// Counts from one [`lfcf_step`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LfcfStats {
    pub expanded: usize,
    /// Shrunk Gaussians, split or not.
    pub shrunk: usize,
    /// Subset of `shrunk` that was also split.
    pub split: usize,
    pub untouched: usize,
    pub removed: usize,
}

/// Result of [`lfcf_step`].
#[derive(Debug, Clone, PartialEq)]
pub struct LfcfOutcome {
    pub stats: LfcfStats,
    /// For each output Gaussian, the input index it came from.
    pub origin: Vec<Provenance>,
}

/// `c = θ c_max + (1 − θ) c_min`.
pub fn enlarging_factor<T: Real>(theta: T, cfg: &LfcfConfig) -> T {
    theta * T::lit(cfg.c_max) + (T::one() - theta) * T::lit(cfg.c_min)
}

/// Depth-strategy factors, or `c_max` everywhere when it is off.
pub fn enlarging_factors<T: Real>(theta: &[T], cfg: &LfcfConfig) -> Vec<T> {
    if cfg.depth_strategy {
        theta.iter().map(|&t| enlarging_factor(t, cfg)).collect()
    } else {
        vec![T::lit(cfg.c_max); theta.len()]
    }
}

/// Annealed factor at window position `pos`. Returns 1 outside the window
/// and `c` unchanged when annealing is off.
pub fn anneal_factor<T: Real>(c: T, pos: &WindowPosition, cfg: &LfcfConfig) -> T {
    let Some(x) = pos.progress() else {
        return T::one();
    };
    anneal_at(c, T::lit(x), cfg)
}

/// Annealed factor at normalized progress `x`.
pub fn anneal_at<T: Real>(c: T, x: T, cfg: &LfcfConfig) -> T {
    if !cfg.anneal_strategy {
        return c;
    }
    let n = T::lit(cfg.anneal_n);
    if cfg.anneal_literal {
        (c.ln() * x.powf(n)).exp()
    } else {
        let end = T::lit(cfg.c_end);
        end * ((c / end).ln() * (T::one() - x).powf(n)).exp()
    }
}

/// Per-axis factors for magnitude `c`: the shortest axis gets `c`, the
/// longest `1/c`, the middle one 1 (ties by axis index). When `enabled` is
/// false every axis gets `c`.
pub fn scale_based_factors<T: Real>(g: &Gaussian<T>, c: T, enabled: bool) -> Vec3<T> {
    if !enabled {
        return Vec3::splat(c);
    }
    let s = g.log_scale;
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| s[a].partial_cmp(&s[b]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    let mut f = Vec3::splat(T::one());
    f[order[0]] = c;
    f[order[2]] = T::one() / c;
    f
}

/// Probability of splitting a shrunk Gaussian: `1 − θ`.
pub fn split_probability<T: Real>(theta: T) -> T {
    T::one() - theta
}

/// Branch taken by one Gaussian.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Expand,
    Shrink,
    Untouched,
}

pub fn classify_branch<T: Real>(grad: T, pgrad: T, tau: T) -> Branch {
    if grad > tau {
        if grad > pgrad {
            Branch::Expand
        } else {
            Branch::Shrink
        }
    } else {
        Branch::Untouched
    }
}

/// One LFCF pass over `cloud`.
///
/// `grad` is the averaged screen-space gradient per Gaussian. Split
/// children are appended after the surviving originals; removal of
/// low-opacity Gaussians happens last. A shrunk Gaussian is kept whole
/// instead of split once the count would pass `max_gaussians`. `cloud` statistics and `state` stay
/// index-aligned.
pub fn lfcf_step<T: Real, R: Rng>(
    cloud: &mut GaussianCloud<T>,
    grad: &[T],
    state: &mut LfcfState<T>,
    profile: &SamplingProfile<T>,
    cfg: &LfcfConfig,
    pos: &WindowPosition,
    max_gaussians: usize,
    rng: &mut R,
) -> Result<LfcfOutcome> {
    let n = cloud.len();
    if grad.len() != n || state.pgrad.len() != n || profile.theta.len() != n {
        return Err(Error::param(format!(
            "LFCF inputs misaligned: cloud {n}, grad {}, pgrad {}, profile {}",
            grad.len(),
            state.pgrad.len(),
            profile.theta.len()
        )));
    }
    cloud.check_aligned()?;
    let tau = T::lit(cfg.tau);
    let base = enlarging_factors(&profile.theta, cfg);

    let mut stats = LfcfStats::default();
    let mut kept = Vec::with_capacity(n);
    let mut origin = Vec::with_capacity(n);
    let mut children = Vec::new();
    let mut child_origin = Vec::new();
    for i in 0..n {
        let g = cloud.gaussians[i];
        match classify_branch(grad[i], state.pgrad[i], tau) {
            Branch::Untouched => {
                stats.untouched += 1;
                kept.push(g);
                origin.push(Provenance::kept(i));
            }
            Branch::Expand => {
                stats.expanded += 1;
                let c = anneal_factor(base[i], pos, cfg);
                kept.push(apply_scale_factor(&g, scale_based_factors(&g, c, cfg.scale_strategy))?);
                origin.push(Provenance::kept(i));
            }
            Branch::Shrink => {
                stats.shrunk += 1;
                let c = anneal_factor(base[i], pos, cfg);
                let f = scale_based_factors(&g, c, cfg.scale_strategy).map(|v| T::one() / v);
                let shrunk = apply_scale_factor(&g, f)?;
                let split = if cfg.probabilistic_strategy {
                    let eta = split_probability(profile.theta[i]).as_f64().clamp(0.0, 1.0);
                    rng.gen_bool(eta)
                } else {
                    true
                };
                if split && n + stats.split < max_gaussians {
                    stats.split += 1;
                    for child in split_gaussian(&shrunk, rng)? {
                        children.push(child);
                        child_origin.push(Provenance::fresh(i));
                    }
                } else {
                    kept.push(shrunk);
                    origin.push(Provenance::kept(i));
                }
            }
        }
    }
    state.pgrad = grad.to_vec();

    kept.extend(children);
    origin.extend(child_origin);
    let eps = T::lit(cfg.epsilon);
    let keep: Vec<bool> = kept.iter().map(|g| g.opacity() >= eps).collect();
    stats.removed = keep.iter().filter(|k| !**k).count();

    let accum: Vec<T> = origin
        .iter()
        .map(|o| if o.fresh { T::zero() } else { cloud.grad_accum[o.source] })
        .collect();
    let count: Vec<u32> = origin.iter().map(|o| if o.fresh { 0 } else { cloud.grad_count[o.source] }).collect();
    cloud.gaussians = kept;
    cloud.grad_accum = accum;
    cloud.grad_count = count;
    state.remap(&origin);
    cloud.retain_mask(&keep);
    let origin: Vec<Provenance> = origin.into_iter().zip(&keep).filter(|(_, k)| **k).map(|(o, _)| o).collect();
    state.pgrad = state.pgrad.iter().zip(&keep).filter(|(_, k)| **k).map(|(p, _)| *p).collect();
    Ok(LfcfOutcome { stats, origin })
}
