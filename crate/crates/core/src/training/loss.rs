use crate::error::{dim_err, Result};
use crate::sensing::VideoCube;

/// Mean squared error over every element (channels, frames, pixels).
pub fn mse_loss(pred: &VideoCube, truth: &VideoCube) -> Result<f64> {
    mse_loss_batch(std::slice::from_ref(pred), std::slice::from_ref(truth))
}

/// Mean squared error over a batch of cubes with equal shapes.
pub fn mse_loss_batch(pred: &[VideoCube], truth: &[VideoCube]) -> Result<f64> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(dim_err!("loss batches differ: {} vs {} cubes", pred.len(), truth.len()));
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for (p, t) in pred.iter().zip(truth) {
        if !p.same_dims(t) || !p.same_dims(&pred[0]) {
            return Err(dim_err!(
                "loss needs equal shapes, got {}×{}×{}×{} and {}×{}×{}×{}",
                p.width(),
                p.height(),
                p.frames(),
                p.channels(),
                t.width(),
                t.height(),
                t.frames(),
                t.channels()
            ));
        }
        sum += p.data().iter().zip(t.data()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        n += p.data().len();
    }
    Ok(sum / n as f64)
}

/// `0.5·mse(v1) + mse(v2)`.
pub fn stage_wise_loss(v1: &VideoCube, v2: &VideoCube, truth: &VideoCube) -> Result<f64> {
    Ok(0.5 * mse_loss(v1, truth)? + mse_loss(v2, truth)?)
}

/// Per-stage weights of the end-to-end loss: `0.5` for every stage but the last, `1` for the last.
pub fn stage_weights(stages: usize) -> Vec<f64> {
    (0..stages).map(|j| if j + 1 == stages { 1.0 } else { 0.5 }).collect()
}
