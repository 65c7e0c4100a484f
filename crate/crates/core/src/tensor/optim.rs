use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Element, ParamStore, Tensor};

/// Step-decay learning-rate schedule: `initial · factor^⌊epoch / interval⌋`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepDecay {
    pub initial: f64,
    pub factor: f64,
    pub interval: usize,
}

impl Default for StepDecay {
    fn default() -> Self {
        Self {
            initial: 2e-4,
            factor: 0.5,
            interval: 15,
        }
    }
}

impl StepDecay {
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let drops = epoch.checked_div(self.interval).unwrap_or(0);
        self.initial * self.factor.powi(drops as i32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub schedule: StepDecay,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            schedule: StepDecay::default(),
        }
    }
}

/// Adam with bias correction over every unfrozen parameter of a store.
#[derive(Debug, Clone)]
pub struct Adam<T: Element> {
    config: AdamConfig,
    step: u64,
    lr: f64,
    first: Vec<Tensor<T>>,
    second: Vec<Tensor<T>>,
}

impl<T: Element> Adam<T> {
    pub fn new(config: AdamConfig, store: &ParamStore<T>) -> Self {
        let zeros = || store.iter().map(|p| Tensor::zeros(p.value.shape().to_vec())).collect();
        Self {
            config,
            step: 0,
            lr: config.schedule.lr_at(0),
            first: zeros(),
            second: zeros(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    /// Step count and first/second moment estimates, in store order.
    pub fn state(&self) -> (u64, &[Tensor<T>], &[Tensor<T>]) {
        (self.step, &self.first, &self.second)
    }

    /// Restores state captured by [`Adam::state`].
    pub fn restore(&mut self, step: u64, first: Vec<Tensor<T>>, second: Vec<Tensor<T>>) -> Result<()> {
        let same = |a: &[Tensor<T>], b: &[Tensor<T>]| {
            a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.shape() == y.shape())
        };
        if !same(&first, &self.first) || !same(&second, &self.second) {
            return Err(Error::Checkpoint(
                "optimizer state does not match the parameters".into(),
            ));
        }
        self.step = step;
        self.first = first;
        self.second = second;
        Ok(())
    }

    /// Applies one update using the gradients stored on `store`, then clears them.
    pub fn step(&mut self, store: &mut ParamStore<T>, epoch: usize) -> Result<()> {
        if store.len() != self.first.len() {
            return Err(Error::Contract(format!(
                "optimizer tracks {} parameters, store has {}",
                self.first.len(),
                store.len()
            )));
        }
        self.lr = self.config.schedule.lr_at(epoch);
        self.step += 1;
        let AdamConfig { beta1, beta2, eps, .. } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        let (b1, b2) = (T::from_f64(beta1), T::from_f64(beta2));
        let (one_b1, one_b2) = (T::from_f64(1.0 - beta1), T::from_f64(1.0 - beta2));
        let step_size = T::from_f64(self.lr / c1);
        let inv_sqrt_c2 = T::from_f64(1.0 / c2.sqrt());
        let eps = T::from_f64(eps);

        for ((p, m), v) in store.iter_mut().zip(&mut self.first).zip(&mut self.second) {
            if p.frozen {
                p.grad = None;
                continue;
            }
            let g = p
                .grad
                .take()
                .ok_or_else(|| Error::Contract(format!("parameter {} has no gradient for this step", p.name)))?;
            if g.shape() != p.value.shape() || m.shape() != p.value.shape() {
                return Err(Error::Contract(format!(
                    "shape mismatch in optimizer state for {}",
                    p.name
                )));
            }
            for (((w, &gv), mv), vv) in p
                .value
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mv = b1 * *mv + one_b1 * gv;
                *vv = b2 * *vv + one_b2 * gv * gv;
                let denom = vv.sqrt() * inv_sqrt_c2 + eps;
                *w = *w - step_size * *mv / denom;
            }
        }
        Ok(())
    }
}
