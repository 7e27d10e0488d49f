//! Adam with bias correction and a learning rate chosen per parameter group.

use crate::model::{ParamGroup, VitAttParams};

#[derive(Debug, Clone)]
pub struct AdamConfig {
    /// Rate for the transformer encoder group.
    pub lr_encoder: f64,
    /// Rate for everything else (metadata embedder, fusion, head).
    pub lr_other: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// L2 penalty folded into the gradient; 0 disables it.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr_encoder: 3e-5,
            lr_other: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

#[derive(Debug)]
pub struct Adam {
    config: AdamConfig,
    t: u64,
    state: Vec<Moments>,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &VitAttParams) -> Self {
        let state = params
            .visit()
            .iter()
            .map(|(_, _, t)| Moments {
                m: vec![0.0; t.numel()],
                v: vec![0.0; t.numel()],
            })
            .collect();
        Self {
            config,
            t: 0,
            state,
        }
    }

    /// Apply one update from the gradients stored on the parameters, then
    /// clear them. Parameters without a gradient are left untouched.
    pub fn step(&mut self, params: &mut VitAttParams) {
        self.t += 1;
        let t = self.t as i32;
        let c = &self.config;
        let bias1 = 1.0 - c.beta1.powi(t);
        let bias2 = 1.0 - c.beta2.powi(t);
        for ((_, group, tensor), moments) in params.visit_mut().into_iter().zip(&mut self.state) {
            let Some(grad) = tensor.grad.take() else {
                continue;
            };
            let lr = match group {
                ParamGroup::Encoder => c.lr_encoder,
                ParamGroup::Other => c.lr_other,
            };
            let data = tensor.data_mut();
            for i in 0..data.len() {
                let mut g = grad[i];
                if c.weight_decay != 0.0 {
                    g += c.weight_decay * data[i];
                }
                moments.m[i] = c.beta1 * moments.m[i] + (1.0 - c.beta1) * g;
                moments.v[i] = c.beta2 * moments.v[i] + (1.0 - c.beta2) * g * g;
                let m_hat = moments.m[i] / bias1;
                let v_hat = moments.v[i] / bias2;
                data[i] -= lr * m_hat / (v_hat.sqrt() + c.eps);
            }
        }
    }
}
