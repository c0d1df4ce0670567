use crate::error::{Error, Result};

/// Classical momentum: v′ = βv + g, θ′ = θ − ηv′. Updates in place.
pub fn sgd_step(theta: &mut [f64], grad: &[f64], lr: f64, velocity: &mut [f64], beta: f64) {
    assert!(theta.len() == grad.len() && grad.len() == velocity.len(), "sgd_step length mismatch");
    for ((t, g), v) in theta.iter_mut().zip(grad).zip(velocity.iter_mut()) {
        *v = beta * *v + g;
        *t -= lr * *v;
    }
}

/// η₀ · factor^⌊t / period⌋.
pub fn lr_schedule(lr0: f64, decay_factor: f64, period: usize, round: usize) -> f64 {
    let exponent = i32::try_from(round / period.max(1)).unwrap_or(i32::MAX);
    lr0 * decay_factor.powi(exponent)
}

/// Unweighted componentwise mean of the node parameter vectors. Each
/// component is summed in ascending order of value, which makes the result
/// bit-identical under any permutation of the inputs.
pub fn synchronize(params: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = params.first().ok_or(Error::Empty("no parameter vectors to synchronize"))?;
    let d = first.len();
    if let Some(bad) = params.iter().find(|p| p.len() != d) {
        return Err(Error::ParamLength { expected: d, got: bad.len() });
    }
    let q = params.len() as f64;
    let mut column = Vec::with_capacity(params.len());
    Ok((0..d)
        .map(|j| {
            column.clear();
            column.extend(params.iter().map(|p| p[j]));
            column.sort_by(f64::total_cmp);
            column.iter().sum::<f64>() / q
        })
        .collect())
}
