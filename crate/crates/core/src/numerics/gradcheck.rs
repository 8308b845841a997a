use crate::error::{Error, Result};

/// Compares an analytic gradient against central finite differences.
///
/// Returns `max_i |a_i - n_i| / max(1, |a_i| + |n_i|)` where `n_i` is the
/// central difference of `loss` in coordinate `i`. `params` is perturbed in
/// place and restored before returning.
pub fn grad_check<F>(mut loss: F, params: &mut [f64], analytic: &[f64], epsilon: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(1e-6..=1e-3).contains(&epsilon) {
        return Err(Error::InvalidInput(format!(
            "gradient-check epsilon {epsilon} outside [1e-6, 1e-3]"
        )));
    }
    if params.len() != analytic.len() {
        return Err(Error::shape("grad_check", params.len(), analytic.len()));
    }
    let mut worst = 0.0f64;
    for i in 0..params.len() {
        let orig = params[i];
        params[i] = orig + epsilon;
        let plus = loss(params);
        params[i] = orig - epsilon;
        let minus = loss(params);
        params[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite(format!(
                "loss at parameter {i} (+eps: {plus}, -eps: {minus})"
            )));
        }
        let numeric = (plus - minus) / (2.0 * epsilon);
        let a = analytic[i];
        let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1.0);
        worst = worst.max(rel);
    }
    Ok(worst)
}
