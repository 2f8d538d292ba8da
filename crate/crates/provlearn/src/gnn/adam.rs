//! Adam with L2 regularization folded into the gradients, the scheme the
//! published learning rates and weight decay assume.

use ndarray::Array2;

use super::{GradientTape, RGCNModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    /// L2 coefficient; `weight_decay · θ` is added to each gradient before
    /// the moment updates, so decay passes through the adaptive scaling.
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, weight_decay: 0.0, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// First/second moment estimates, shape-congruent with the model.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new(model: &RGCNModel) -> Self {
        let shapes: Vec<_> =
            model.parameters().iter().map(|p| Array2::zeros(p.raw_dim())).collect();
        AdamState { m: shapes.clone(), v: shapes, step: 0 }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One Adam update over every parameter; deterministic.
pub fn adam_step(
    model: &mut RGCNModel,
    state: &mut AdamState,
    tape: &GradientTape,
    cfg: &AdamConfig,
) {
    state.step += 1;
    let t = state.step as i32;
    let bias1 = 1.0 - cfg.beta1.powi(t);
    let bias2 = 1.0 - cfg.beta2.powi(t);
    let params = model.parameters_mut();
    let grads = tape.parameters();
    assert_eq!(params.len(), grads.len(), "tape must mirror the model");
    for (i, (param, grad)) in params.into_iter().zip(grads).enumerate() {
        assert_eq!(param.raw_dim(), grad.raw_dim(), "tape must mirror the model");
        let m = &mut state.m[i];
        let v = &mut state.v[i];
        ndarray::Zip::from(param).and(grad).and(m).and(v).for_each(|p, &g, m, v| {
            let g = g + cfg.weight_decay * *p;
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            *p -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
        });
    }
}
