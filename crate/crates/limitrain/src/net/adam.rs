//! Adam optimizer with bias correction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Gradients, Mlp};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Per-parameter first/second moment accumulators plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    m: Gradients,
    v: Gradients,
    t: u64,
}

impl AdamState {
    pub fn new(net: &Mlp, config: AdamConfig) -> Self {
        AdamState {
            config,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One update; `grads` must mirror the network's shape.
    pub fn update(&mut self, net: &mut Mlp, grads: &Gradients) -> Result<()> {
        if grads.layers.len() != net.layers().len() {
            return Err(Error::Dimension("gradient/network layer count mismatch".into()));
        }
        self.t += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(self.t as i32);
        let bc2 = 1.0 - c.beta2.powi(self.t as i32);
        for (l, layer) in net.layers_mut().iter_mut().enumerate() {
            let (gw, gb) = &grads.layers[l];
            if gw.len() != layer.weights.len() || gb.len() != layer.biases.len() {
                return Err(Error::Dimension(format!("gradient shape mismatch at layer {l}")));
            }
            let (mw, mb) = &mut self.m.layers[l];
            let (vw, vb) = &mut self.v.layers[l];
            let apply = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
                *m = c.beta1 * *m + (1.0 - c.beta1) * g;
                *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= c.learning_rate * m_hat / (v_hat.sqrt() + c.epsilon);
            };
            for ((p, &g), (m, v)) in layer
                .weights
                .iter_mut()
                .zip(gw)
                .zip(mw.iter_mut().zip(vw.iter_mut()))
            {
                apply(p, g, m, v);
            }
            for ((p, &g), (m, v)) in layer
                .biases
                .iter_mut()
                .zip(gb)
                .zip(mb.iter_mut().zip(vb.iter_mut()))
            {
                apply(p, g, m, v);
            }
        }
        Ok(())
    }
}
