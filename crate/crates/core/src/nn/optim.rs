//! Parameter updates.

use alloc::vec::Vec;

use super::params::{Gradients, ParamStore};
use crate::error::{check_len, Error, Result};

/// Plain SGD: `p <- p - lr * g`. The step is refused (nothing is modified)
/// if any gradient is non-finite.
pub fn sgd_step(params: &mut ParamStore, grads: &Gradients, lr: f64) -> Result<()> {
    if !(lr > 0.0) || !lr.is_finite() {
        return Err(Error::Usage("learning rate must be positive".into()));
    }
    check_len("gradient tensors", params.len(), grads.len())?;
    if !grads.is_finite() {
        return Err(Error::NonFinite("gradient"));
    }
    for id in params.ids().collect::<Vec<_>>() {
        let g = grads.get(id);
        let t = params.get_mut(id);
        check_len("gradient", t.len(), g.len())?;
        for (p, gv) in t.data_mut().iter_mut().zip(g) {
            *p -= lr * gv;
        }
    }
    Ok(())
}

/// Adam with the usual bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Gradients,
    v: Gradients,
    t: i32,
}

impl Adam {
    pub fn new(params: &ParamStore) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: Gradients::zeros_like(params),
            v: Gradients::zeros_like(params),
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut ParamStore, grads: &Gradients, lr: f64) -> Result<()> {
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradient"));
        }
        self.t += 1;
        let bc1 = 1.0 - libm::pow(self.beta1, self.t as f64);
        let bc2 = 1.0 - libm::pow(self.beta2, self.t as f64);
        for id in params.ids().collect::<Vec<_>>() {
            let g = grads.get(id);
            let m = self.m.get_mut(id);
            for (mv, gv) in m.iter_mut().zip(g) {
                *mv = self.beta1 * *mv + (1.0 - self.beta1) * gv;
            }
            let v = self.v.get_mut(id);
            for (vv, gv) in v.iter_mut().zip(g) {
                *vv = self.beta2 * *vv + (1.0 - self.beta2) * gv * gv;
            }
            let (m, v) = (self.m.get(id), self.v.get(id));
            for ((p, mv), vv) in params.get_mut(id).data_mut().iter_mut().zip(m).zip(v) {
                *p -= lr * (mv / bc1) / (libm::sqrt(vv / bc2) + self.eps);
            }
        }
        Ok(())
    }
}
