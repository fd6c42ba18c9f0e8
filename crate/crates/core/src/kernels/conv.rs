//! 3-D convolution (cross-correlation) over `(time, height, width)` with zero padding.
//!
//! Both passes lower each batch item to an im2col matrix and hand the contraction to
//! a blocked GEMM; batch items run in parallel and per-item weight gradients are
//! reduced in batch order, so results do not depend on the thread count.

use rayon::prelude::*;

use crate::error::{dim_err, Result};

use super::real::Real;
use super::tensor::Tensor;

/// Stride and zero padding along `(time, height, width)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvSpec {
    pub stride: [usize; 3],
    pub pad: [usize; 3],
}

impl ConvSpec {
    /// Unit stride, padding 1: "same" output for 3×3×3 kernels.
    pub const SAME3: ConvSpec = ConvSpec { stride: [1, 1, 1], pad: [1, 1, 1] };

    /// Halves height and width, keeps time.
    pub const DOWN2: ConvSpec = ConvSpec { stride: [1, 2, 2], pad: [1, 1, 1] };
}

#[derive(Clone, Copy, Debug)]
struct Geometry {
    batch: usize,
    cin: usize,
    cout: usize,
    kernel: [usize; 3],
    input: [usize; 3],
    output: [usize; 3],
    spec: ConvSpec,
}

impl Geometry {
    fn new(x: &[usize], w: &[usize], spec: ConvSpec) -> Result<Self> {
        let (b, cin, input) = match *x {
            [b, c, t, h, w] => (b, c, [t, h, w]),
            _ => return Err(dim_err!("conv3d input must be 5-D, got {x:?}")),
        };
        let (cout, wcin, kernel) = match *w {
            [o, i, kt, kh, kw] => (o, i, [kt, kh, kw]),
            _ => return Err(dim_err!("conv3d weight must be 5-D, got {w:?}")),
        };
        if wcin != cin {
            return Err(dim_err!("conv3d weight expects {wcin} input channels, input has {cin}"));
        }
        if spec.stride.contains(&0) {
            return Err(dim_err!("conv3d stride must be positive: {:?}", spec.stride));
        }
        let mut output = [0; 3];
        for a in 0..3 {
            let padded = input[a] + 2 * spec.pad[a];
            if kernel[a] > padded {
                return Err(dim_err!("conv3d kernel {:?} exceeds padded input {:?}", kernel, input));
            }
            output[a] = (padded - kernel[a]) / spec.stride[a] + 1;
        }
        Ok(Geometry { batch: b, cin, cout, kernel, input, output, spec })
    }

    fn k(&self) -> usize {
        self.cin * self.kernel.iter().product::<usize>()
    }

    fn p(&self) -> usize {
        self.output.iter().product()
    }

    fn in_len(&self) -> usize {
        self.cin * self.input.iter().product::<usize>()
    }

    /// Output positions `o` along axis `a` whose input index `o*s + d - p` is in range.
    fn valid(&self, a: usize, d: usize) -> std::ops::Range<usize> {
        let s = self.spec.stride[a];
        let p = self.spec.pad[a];
        let n = self.input[a];
        let lo = if d >= p { 0 } else { (p - d).div_ceil(s) };
        // o*s + d - p <= n - 1  <=>  o <= (n - 1 + p - d) / s
        let hi = if n + p > d { ((n - 1 + p - d) / s + 1).min(self.output[a]) } else { 0 };
        lo..hi.max(lo)
    }
}

fn im2col<T: Real>(g: &Geometry, x: &[T], col: &mut [T]) {
    let [kt, kh, kw] = g.kernel;
    let [it, ih, iw] = g.input;
    let [_, oh, ow] = g.output;
    let [st, sh, sw] = g.spec.stride;
    let [pt, ph, pw] = g.spec.pad;
    let p = g.p();
    col.iter_mut().for_each(|v| *v = T::zero());
    let mut row = 0;
    for ci in 0..g.cin {
        let xc = &x[ci * it * ih * iw..(ci + 1) * it * ih * iw];
        for dt in 0..kt {
            let rt = g.valid(0, dt);
            for dh in 0..kh {
                let rh = g.valid(1, dh);
                for dw in 0..kw {
                    let rw = g.valid(2, dw);
                    let dst = &mut col[row * p..(row + 1) * p];
                    for o_t in rt.clone() {
                        let i_t = o_t * st + dt - pt;
                        for o_h in rh.clone() {
                            let i_h = o_h * sh + dh - ph;
                            let src = &xc[(i_t * ih + i_h) * iw..(i_t * ih + i_h + 1) * iw];
                            let drow = &mut dst[(o_t * oh + o_h) * ow..(o_t * oh + o_h + 1) * ow];
                            if sw == 1 {
                                let i0 = rw.start + dw - pw;
                                drow[rw.clone()].copy_from_slice(&src[i0..i0 + rw.len()]);
                            } else {
                                for o_w in rw.clone() {
                                    drow[o_w] = src[o_w * sw + dw - pw];
                                }
                            }
                        }
                    }
                    row += 1;
                }
            }
        }
    }
}

fn col2im<T: Real>(g: &Geometry, col: &[T], x: &mut [T]) {
    let [kt, kh, kw] = g.kernel;
    let [it, ih, iw] = g.input;
    let [_, oh, ow] = g.output;
    let [st, sh, sw] = g.spec.stride;
    let [pt, ph, pw] = g.spec.pad;
    let p = g.p();
    let mut row = 0;
    for ci in 0..g.cin {
        let xc = &mut x[ci * it * ih * iw..(ci + 1) * it * ih * iw];
        for dt in 0..kt {
            let rt = g.valid(0, dt);
            for dh in 0..kh {
                let rh = g.valid(1, dh);
                for dw in 0..kw {
                    let rw = g.valid(2, dw);
                    let src = &col[row * p..(row + 1) * p];
                    for o_t in rt.clone() {
                        let i_t = o_t * st + dt - pt;
                        for o_h in rh.clone() {
                            let i_h = o_h * sh + dh - ph;
                            let dst = &mut xc[(i_t * ih + i_h) * iw..(i_t * ih + i_h + 1) * iw];
                            let srow = &src[(o_t * oh + o_h) * ow..(o_t * oh + o_h + 1) * ow];
                            for o_w in rw.clone() {
                                let i_w = o_w * sw + dw - pw;
                                dst[i_w] = dst[i_w] + srow[o_w];
                            }
                        }
                    }
                    row += 1;
                }
            }
        }
    }
}

/// Output shape of [`conv3d_forward`] without running it.
pub fn conv3d_output_shape(x: &[usize], w: &[usize], spec: ConvSpec) -> Result<Vec<usize>> {
    let g = Geometry::new(x, w, spec)?;
    Ok(vec![g.batch, g.cout, g.output[0], g.output[1], g.output[2]])
}

/// `y[b,o] = bias[o] + Σ_i x[b,i] ⋆ w[o,i]` with output extent `⌊(n + 2p − k)/s⌋ + 1`.
pub fn conv3d_forward<T: Real>(x: &Tensor<T>, w: &Tensor<T>, bias: &Tensor<T>, spec: ConvSpec) -> Result<Tensor<T>> {
    let g = Geometry::new(x.shape(), w.shape(), spec)?;
    if bias.len() != g.cout {
        return Err(dim_err!("conv3d bias has {} entries, expected {}", bias.len(), g.cout));
    }
    let (k, p) = (g.k(), g.p());
    let mut out = Tensor::zeros(vec![g.batch, g.cout, g.output[0], g.output[1], g.output[2]]);
    out.data_mut().par_chunks_mut(g.cout * p).zip(x.data().par_chunks(g.in_len())).for_each_init(
        || vec![T::zero(); k * p],
        |col, (y, xb)| {
            im2col(&g, xb, col);
            T::gemm(g.cout, k, p, w.data(), false, col, false, y, false);
            for (o, row) in y.chunks_mut(p).enumerate() {
                let b = bias.data()[o];
                row.iter_mut().for_each(|v| *v = *v + b);
            }
        },
    );
    Ok(out)
}

/// Gradients of [`conv3d_forward`]; `None` where the caller did not ask for one.
#[derive(Clone, Debug)]
pub struct ConvGrads<T> {
    pub x: Option<Tensor<T>>,
    pub w: Option<Tensor<T>>,
    pub b: Option<Tensor<T>>,
}

/// Exact vector-Jacobian product of [`conv3d_forward`] at `(x, w)`.
pub fn conv3d_backward<T: Real>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    spec: ConvSpec,
    grad_out: &Tensor<T>,
    need_x: bool,
    need_params: bool,
) -> Result<ConvGrads<T>> {
    let g = Geometry::new(x.shape(), w.shape(), spec)?;
    let expected = [g.batch, g.cout, g.output[0], g.output[1], g.output[2]];
    if grad_out.shape() != expected {
        return Err(dim_err!("conv3d grad_out shape {:?}, forward produced {:?}", grad_out.shape(), expected));
    }
    let (k, p) = (g.k(), g.p());

    let per_item: Vec<(Option<Vec<T>>, Option<Vec<T>>)> = grad_out
        .data()
        .par_chunks(g.cout * p)
        .zip(x.data().par_chunks(g.in_len()))
        .map(|(gy, xb)| {
            let mut col = vec![T::zero(); k * p];
            let gw = need_params.then(|| {
                im2col(&g, xb, &mut col);
                let mut gw = vec![T::zero(); g.cout * k];
                T::gemm(g.cout, p, k, gy, false, &col, true, &mut gw, false);
                gw
            });
            let gx = need_x.then(|| {
                T::gemm(k, g.cout, p, w.data(), true, gy, false, &mut col, false);
                let mut gx = vec![T::zero(); g.in_len()];
                col2im(&g, &col, &mut gx);
                gx
            });
            (gx, gw)
        })
        .collect();

    let grad_x = if need_x {
        let mut data = Vec::with_capacity(x.len());
        for (gx, _) in &per_item {
            data.extend_from_slice(gx.as_deref().unwrap_or_default());
        }
        Some(Tensor::from_vec(x.shape().to_vec(), data)?)
    } else {
        None
    };

    let (grad_w, grad_b) = if need_params {
        let mut gw = vec![T::zero(); g.cout * k];
        for (_, item) in &per_item {
            if let Some(item) = item {
                for (a, &b) in gw.iter_mut().zip(item) {
                    *a = *a + b;
                }
            }
        }
        let mut gb = vec![T::zero(); g.cout];
        for gy in grad_out.data().chunks(g.cout * p) {
            for (o, row) in gy.chunks(p).enumerate() {
                gb[o] = gb[o] + row.iter().copied().sum::<T>();
            }
        }
        (Some(Tensor::from_vec(w.shape().to_vec(), gw)?), Some(Tensor::from_vec(vec![g.cout], gb)?))
    } else {
        (None, None)
    };

    Ok(ConvGrads { x: grad_x, w: grad_w, b: grad_b })
}
