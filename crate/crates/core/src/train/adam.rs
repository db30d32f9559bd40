use crate::gaussian::{Gaussian, PARAM_COUNT};
use crate::scalar::Real;

use super::densify::Provenance;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-15;

/// First and second moments per Gaussian parameter plus the shared step count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<[T; PARAM_COUNT]>,
    pub v: Vec<[T; PARAM_COUNT]>,
    pub step: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![[T::zero(); PARAM_COUNT]; len],
            v: vec![[T::zero(); PARAM_COUNT]; len],
            step: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// Re-indexes after densification. Kept entries carry their moments;
    /// fresh ones start from zero.
    pub fn remap(&mut self, origin: &[Provenance]) {
        let zero = [T::zero(); PARAM_COUNT];
        self.m = origin.iter().map(|o| if o.fresh { zero } else { self.m[o.source] }).collect();
        self.v = origin.iter().map(|o| if o.fresh { zero } else { self.v[o.source] }).collect();
    }
}

/// One bias-corrected Adam update with a per-slot learning rate.
/// Parameters whose gradient is exactly zero and whose moments are zero
/// stay bitwise unchanged.
pub fn adam_step<T: Real>(
    params: &mut [Gaussian<T>],
    grads: &[Gaussian<T>],
    state: &mut AdamState<T>,
    lr: &[T; PARAM_COUNT],
) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.len());
    state.step += 1;
    let b1 = T::lit(ADAM_BETA1);
    let b2 = T::lit(ADAM_BETA2);
    let eps = T::lit(ADAM_EPS);
    let t = state.step as i32;
    let bc1 = T::one() - b1.powi(t);
    let bc2 = T::one() - b2.powi(t);
    let bc2_sqrt = bc2.sqrt();
    for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(state.m.iter_mut().zip(state.v.iter_mut())) {
        let mut flat = p.to_params();
        let gf = g.to_params();
        for k in 0..PARAM_COUNT {
            let gk = gf[k];
            m[k] = b1 * m[k] + (T::one() - b1) * gk;
            v[k] = b2 * v[k] + (T::one() - b2) * gk * gk;
            if m[k] == T::zero() {
                continue;
            }
            let step = lr[k] * (m[k] / bc1) / ((v[k].sqrt() / bc2_sqrt) + eps);
            flat[k] -= step;
        }
        *p = Gaussian::from_params(&flat);
    }
}
