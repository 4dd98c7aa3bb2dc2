//! Central finite-difference gradient verification.

use crate::nn::tensor::Tensor;

/// Step size for central differences.
pub const FD_STEP: f64 = 1e-5;

/// Compares analytic gradients against central finite differences.
///
/// `loss` maps the inputs to a scalar; `analytic` returns one gradient tensor
/// per input (same shapes). Every element of every input is perturbed by
/// ±`FD_STEP`. Returns `max |analytic - numeric| / max(1, |numeric|)`.
pub fn grad_check(
    inputs: &[Tensor],
    loss: &mut dyn FnMut(&[Tensor]) -> f64,
    analytic: &mut dyn FnMut(&[Tensor]) -> Vec<Tensor>,
) -> f64 {
    let grads = analytic(inputs);
    assert_eq!(grads.len(), inputs.len(), "one gradient tensor per input");
    let mut work: Vec<Tensor> = inputs.to_vec();
    let mut max_rel = 0.0f64;
    for (slot, grad) in grads.iter().enumerate() {
        assert_eq!(grad.shape(), inputs[slot].shape());
        for idx in 0..inputs[slot].len() {
            let original = work[slot].data()[idx];
            work[slot].data_mut()[idx] = original + FD_STEP;
            let plus = loss(&work);
            work[slot].data_mut()[idx] = original - FD_STEP;
            let minus = loss(&work);
            work[slot].data_mut()[idx] = original;
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            let rel = (grad.data()[idx] - numeric).abs() / numeric.abs().max(1.0);
            if rel > max_rel {
                max_rel = rel;
            }
        }
    }
    max_rel
}
