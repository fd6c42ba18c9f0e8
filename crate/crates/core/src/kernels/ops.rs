//! Pointwise and resampling kernels with their vector-Jacobian products.

use crate::error::{dim_err, Result};

use super::real::Real;
use super::tensor::Tensor;

pub const DEFAULT_SLOPE: f64 = 0.01;

/// `max(x, slope·x)` for `0 < slope < 1`.
pub fn leaky_relu<T: Real>(x: &Tensor<T>, slope: T) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { v * slope })
}

pub fn leaky_relu_backward<T: Real>(x: &Tensor<T>, slope: T, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    x.zip_map(grad_out, |v, g| if v > T::zero() { g } else { g * slope })
}

/// Nearest-neighbour ×2 along height and width of a 5-D tensor.
pub fn upsample2x<T: Real>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let [b, c, t, h, w] = x.dims5()?;
    let (h2, w2) = (2 * h, 2 * w);
    let mut out = Vec::with_capacity(x.len() * 4);
    for plane in x.data().chunks(h * w) {
        for r in 0..h2 {
            let src = &plane[(r / 2) * w..(r / 2 + 1) * w];
            for &v in src {
                out.push(v);
                out.push(v);
            }
        }
    }
    Tensor::from_vec(vec![b, c, t, h2, w2], out)
}

/// Adjoint of [`upsample2x`]: 2×2 sum-pooling of the incoming gradient.
pub fn upsample2x_backward<T: Real>(grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    let [b, c, t, h2, w2] = grad_out.dims5()?;
    if h2 % 2 != 0 || w2 % 2 != 0 {
        return Err(dim_err!("upsample gradient has odd spatial extent {h2}×{w2}"));
    }
    let (h, w) = (h2 / 2, w2 / 2);
    let mut out = vec![T::zero(); b * c * t * h * w];
    for (plane, dst) in grad_out.data().chunks(h2 * w2).zip(out.chunks_mut(h * w)) {
        for r in 0..h2 {
            for col in 0..w2 {
                let d = &mut dst[(r / 2) * w + col / 2];
                *d = *d + plane[r * w2 + col];
            }
        }
    }
    Tensor::from_vec(vec![b, c, t, h, w], out)
}
