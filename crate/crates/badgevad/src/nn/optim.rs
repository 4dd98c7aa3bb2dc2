//! Adaptive-moment optimizer.

use crate::error::{Error, Result};
use crate::nn::tensor::Parameter;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// One bias-corrected adaptive-moment update, applied in place.
///
/// `step` is the 1-based global step index; gradients are zeroed afterwards.
pub fn adam_step(params: &mut [&mut Parameter], lr: f64, step: u64) -> Result<()> {
    if step < 1 {
        return Err(Error::InvalidInput("optimizer step index must be >= 1".into()));
    }
    let bc1 = 1.0 - ADAM_BETA1.powi(step as i32);
    let bc2 = 1.0 - ADAM_BETA2.powi(step as i32);
    for p in params.iter_mut() {
        let n = p.value.len();
        for i in 0..n {
            let g = p.grad.data()[i];
            let m = ADAM_BETA1 * p.moment1.data()[i] + (1.0 - ADAM_BETA1) * g;
            let v = ADAM_BETA2 * p.moment2.data()[i] + (1.0 - ADAM_BETA2) * g * g;
            p.moment1.data_mut()[i] = m;
            p.moment2.data_mut()[i] = v;
            let m_hat = m / bc1;
            let v_hat = v / bc2;
            p.value.data_mut()[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
        p.zero_grad();
    }
    Ok(())
}
