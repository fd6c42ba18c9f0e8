use crate::error::{dim_err, Result};

use super::real::{DType, Real};

/// Dense row-major array.
///
/// Network feature maps use the layout `[batch, channel, time, height, width]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T = f32> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn from_vec(shape: impl Into<Vec<usize>>, data: Vec<T>) -> Result<Self> {
        let shape = shape.into();
        if shape.contains(&0) {
            return Err(dim_err!("tensor shape {shape:?} has a zero extent"));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(dim_err!("tensor shape {shape:?} needs {n} elements, got {}", data.len()));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: impl Into<Vec<usize>>) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn full(shape: impl Into<Vec<usize>>, value: T) -> Self {
        let shape = shape.into();
        assert!(shape.iter().all(|&d| d > 0), "zero extent in {shape:?}");
        let n = shape.iter().product();
        Tensor { shape, data: vec![value; n] }
    }

    pub fn scalar(value: T) -> Self {
        Tensor { shape: vec![1], data: vec![value] }
    }

    pub fn from_fn(shape: impl Into<Vec<usize>>, mut f: impl FnMut(usize) -> T) -> Self {
        let shape = shape.into();
        let n: usize = shape.iter().product();
        Tensor { shape, data: (0..n).map(&mut f).collect() }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dtype(&self) -> DType {
        T::DTYPE
    }

    pub fn nbytes(&self) -> usize {
        self.data.len() * std::mem::size_of::<T>()
    }

    pub fn reshape(mut self, shape: impl Into<Vec<usize>>) -> Result<Self> {
        let shape = shape.into();
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(dim_err!("cannot reshape {:?} into {:?}", self.shape, shape));
        }
        self.shape = shape;
        Ok(self)
    }

    /// `(batch, channels, time, height, width)` of a 5-D feature map.
    pub fn dims5(&self) -> Result<[usize; 5]> {
        match self.shape[..] {
            [b, c, t, h, w] => Ok([b, c, t, h, w]),
            _ => Err(dim_err!("expected a 5-D tensor, got shape {:?}", self.shape)),
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, k: T) -> Self {
        self.map(|v| v * k)
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.check_same_shape(other)?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + b;
        }
        Ok(())
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn sq_norm(&self) -> T {
        self.data.iter().map(|&v| v * v).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        self.check_same_shape(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(&a, &b)| (a - b).abs()).fold(T::zero(), T::max))
    }

    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|v| U::from_f64_lossy(v.as_f64())).collect() }
    }

    pub fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(dim_err!("shape {:?} does not match {:?}", self.shape, other.shape));
        }
        Ok(())
    }

    /// Channel range `[start, start+len)` of a 5-D tensor.
    pub fn slice_channels(&self, start: usize, len: usize) -> Result<Self> {
        let [b, c, t, h, w] = self.dims5()?;
        if len == 0 || start + len > c {
            return Err(dim_err!("channel slice {start}..{} out of range for {c} channels", start + len));
        }
        let plane = t * h * w;
        let mut data = Vec::with_capacity(b * len * plane);
        for bi in 0..b {
            let base = (bi * c + start) * plane;
            data.extend_from_slice(&self.data[base..base + len * plane]);
        }
        Ok(Tensor { shape: vec![b, len, t, h, w], data })
    }

    /// Batch item `index` of a 5-D tensor, keeping a unit batch axis.
    pub fn batch_item(&self, index: usize) -> Result<Self> {
        let [b, c, t, h, w] = self.dims5()?;
        if index >= b {
            return Err(dim_err!("batch index {index} out of range for {b}"));
        }
        let n = c * t * h * w;
        Ok(Tensor { shape: vec![1, c, t, h, w], data: self.data[index * n..(index + 1) * n].to_vec() })
    }

    /// Stacks unit-batch 5-D tensors along the batch axis.
    pub fn stack_batch(items: &[Self]) -> Result<Self> {
        let first = items.first().ok_or_else(|| dim_err!("cannot stack an empty batch"))?;
        let [_, c, t, h, w] = first.dims5()?;
        let mut data = Vec::with_capacity(items.len() * first.len());
        let mut b = 0;
        for item in items {
            let [ib, ic, it, ih, iw] = item.dims5()?;
            if (ic, it, ih, iw) != (c, t, h, w) {
                return Err(dim_err!("cannot stack {:?} with {:?}", item.shape, first.shape));
            }
            b += ib;
            data.extend_from_slice(&item.data);
        }
        Ok(Tensor { shape: vec![b, c, t, h, w], data })
    }
}

/// Channel-axis concatenation of 5-D tensors in argument order.
pub fn concat_channels<T: Real>(xs: &[&Tensor<T>]) -> Result<Tensor<T>> {
    let first = xs.first().ok_or_else(|| dim_err!("concat of zero tensors"))?;
    let [b, _, t, h, w] = first.dims5()?;
    let mut channels = Vec::with_capacity(xs.len());
    for x in xs {
        let [xb, xc, xt, xh, xw] = x.dims5()?;
        if (xb, xt, xh, xw) != (b, t, h, w) {
            return Err(dim_err!(
                "concat: {:?} does not match {:?} outside the channel axis",
                x.shape(),
                first.shape()
            ));
        }
        channels.push(xc);
    }
    let total: usize = channels.iter().sum();
    let plane = t * h * w;
    let mut data = Vec::with_capacity(b * total * plane);
    for bi in 0..b {
        for (x, &c) in xs.iter().zip(&channels) {
            let base = bi * c * plane;
            data.extend_from_slice(&x.data()[base..base + c * plane]);
        }
    }
    Tensor::from_vec(vec![b, total, t, h, w], data)
}

/// Inverse of [`concat_channels`]: splits into pieces of the given channel counts.
pub fn split_channels<T: Real>(x: &Tensor<T>, sizes: &[usize]) -> Result<Vec<Tensor<T>>> {
    let [_, c, ..] = x.dims5()?;
    if sizes.iter().sum::<usize>() != c {
        return Err(dim_err!("split sizes {sizes:?} do not sum to {c} channels"));
    }
    let mut start = 0;
    let mut out = Vec::with_capacity(sizes.len());
    for &s in sizes {
        out.push(x.slice_channels(start, s)?);
        start += s;
    }
    Ok(out)
}
