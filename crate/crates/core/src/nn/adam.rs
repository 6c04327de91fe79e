use serde::{Deserialize, Serialize};

use super::network::{DenseNetwork, Gradients};
use crate::error::{Error, Result};

/// Adam optimizer state with L2 weight decay folded into the gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
    pub step: u64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(net: &DenseNetwork, learning_rate: f64, weight_decay: f64) -> Self {
        let zeros: Vec<Vec<f64>> = net.parameters().iter().map(|p| vec![0.0; p.len()]).collect();
        AdamState {
            first_moment: zeros.clone(),
            second_moment: zeros,
            step: 0,
            learning_rate,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One Adam update: `g += wd * theta`, then bias-corrected moment step.
pub fn adam_step(net: &mut DenseNetwork, state: &mut AdamState, gradients: &Gradients) -> Result<()> {
    let mut params = net.parameters_mut();
    if params.len() != gradients.0.len() || params.len() != state.first_moment.len() {
        return Err(Error::LengthMismatch {
            expected: params.len(),
            got: gradients.0.len(),
        });
    }
    for ((p, g), m) in params.iter().zip(&gradients.0).zip(&state.first_moment) {
        if p.len() != g.len() || p.len() != m.len() {
            return Err(Error::LengthMismatch {
                expected: p.len(),
                got: g.len(),
            });
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let (b1, b2) = (state.beta1, state.beta2);

    for (((theta, grad), m), v) in params
        .iter_mut()
        .zip(&gradients.0)
        .zip(&mut state.first_moment)
        .zip(&mut state.second_moment)
    {
        for i in 0..theta.len() {
            let g = grad[i] + state.weight_decay * theta[i];
            m[i] = b1 * m[i] + (1.0 - b1) * g;
            v[i] = b2 * v[i] + (1.0 - b2) * g * g;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            theta[i] -= state.learning_rate * m_hat / (v_hat.sqrt() + state.eps);
        }
    }
    Ok(())
}
