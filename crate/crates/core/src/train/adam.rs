use crate::error::Result;
use crate::head::GatedHeadParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates, shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: GatedHeadParams,
    pub v: GatedHeadParams,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &GatedHeadParams) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(
    params: &mut GatedHeadParams,
    grads: &GatedHeadParams,
    state: &mut AdamState,
    hp: &AdamHyper,
) -> Result<()> {
    params.check_same_shape(grads)?;
    params.check_same_shape(&state.m)?;
    params.check_same_shape(&state.v)?;
    state.t += 1;
    let t = state.t.min(i32::MAX as u64) as i32;
    let bc1 = 1.0 - hp.beta1.powi(t);
    let bc2 = 1.0 - hp.beta2.powi(t);
    let g = grads.tensors();
    let m = state.m.tensors_mut();
    let v = state.v.tensors_mut();
    for (((p, g), m), v) in params.tensors_mut().into_iter().zip(g).zip(m).zip(v) {
        for i in 0..p.len() {
            m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * g[i];
            v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= hp.learning_rate * m_hat / (v_hat.sqrt() + hp.eps);
        }
    }
    Ok(())
}

/// Plain gradient descent.
pub fn sgd_step(params: &mut GatedHeadParams, grads: &GatedHeadParams, learning_rate: f64) -> Result<()> {
    params.check_same_shape(grads)?;
    params.add_scaled(grads, -learning_rate);
    Ok(())
}
