//! Adam optimizer.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct AdamConfig {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
}

impl Default for AdamConfig {
    fn default() -> Self {
        // Standard small-scale GAN settings.
        AdamConfig {
            lr: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Per-parameter first/second moment estimates plus a shared timestep.
#[derive(Clone, Debug, Default)]
pub struct AdamState {
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
    t: u32,
}

impl AdamState {
    pub fn timestep(&self) -> u32 {
        self.t
    }
}

/// One Adam update over a parameter list. State is lazily initialized to
/// zeros on first use and must keep matching shapes afterwards.
pub fn adam_step(
    params: &mut [Tensor],
    grads: &[Vec<f32>],
    state: &mut AdamState,
    cfg: &AdamConfig,
) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::invalid(
            "adam_step",
            format!("{} params vs {} grads", params.len(), grads.len()),
        ));
    }
    if state.m.is_empty() {
        state.m = params.iter().map(|p| vec![0.0; p.numel()]).collect();
        state.v = params.iter().map(|p| vec![0.0; p.numel()]).collect();
    }
    if state.m.len() != params.len() {
        return Err(Error::invalid(
            "adam_step",
            format!("state holds {} params, got {}", state.m.len(), params.len()),
        ));
    }
    state.t += 1;
    let bias1 = 1.0 - cfg.beta1.powi(state.t as i32);
    let bias2 = 1.0 - cfg.beta2.powi(state.t as i32);

    for ((param, grad), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        if param.numel() != grad.len() {
            return Err(Error::invalid(
                "adam_step",
                format!("param numel {} vs grad len {}", param.numel(), grad.len()),
            ));
        }
        param.update_data(|data| {
            for i in 0..data.len() {
                let g = grad[i];
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                data[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
            }
        });
    }
    Ok(())
}
