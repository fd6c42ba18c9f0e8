use rand::Rng;

use crate::error::Result;

use super::conv::{conv3d_forward, ConvSpec};
use super::real::Real;
use super::tape::{Tape, Var};
use super::tensor::Tensor;

/// 3-D convolution layer with bias.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv3d<T: Real> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    pub spec: ConvSpec,
}

/// A [`Conv3d`] whose parameters live on a tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundConv {
    pub w: Var,
    pub b: Var,
    pub spec: ConvSpec,
}

impl<T: Real> Conv3d<T> {
    /// He-uniform weights for a leaky-ReLU network, zero bias.
    pub fn kaiming(
        cin: usize,
        cout: usize,
        kernel: usize,
        spec: ConvSpec,
        slope: f64,
        gain: f64,
        rng: &mut impl Rng,
    ) -> Self {
        let fan_in = (cin * kernel * kernel * kernel) as f64;
        let bound = gain * (6.0 / ((1.0 + slope * slope) * fan_in)).sqrt();
        let weight = Tensor::from_fn(vec![cout, cin, kernel, kernel, kernel], |_| {
            T::from_f64_lossy(rng.random_range(-bound..bound))
        });
        Conv3d { weight, bias: Tensor::zeros(vec![cout]), spec }
    }

    pub fn zeros(cin: usize, cout: usize, kernel: usize, spec: ConvSpec) -> Self {
        Conv3d { weight: Tensor::zeros(vec![cout, cin, kernel, kernel, kernel]), bias: Tensor::zeros(vec![cout]), spec }
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        conv3d_forward(x, &self.weight, &self.bias, self.spec)
    }

    pub fn bind(&self, tape: &mut Tape<T>, trainable: bool) -> BoundConv {
        BoundConv {
            w: tape.param(self.weight.clone(), trainable),
            b: tape.param(self.bias.clone(), trainable),
            spec: self.spec,
        }
    }

    pub fn params(&self) -> [&Tensor<T>; 2] {
        [&self.weight, &self.bias]
    }

    pub fn params_mut(&mut self) -> [&mut Tensor<T>; 2] {
        [&mut self.weight, &mut self.bias]
    }
}

impl BoundConv {
    pub fn apply<T: Real>(&self, tape: &mut Tape<T>, x: Var) -> Result<Var> {
        tape.conv3d(x, self.w, self.b, self.spec)
    }

    pub fn vars(&self) -> [Var; 2] {
        [self.w, self.b]
    }

    pub fn materialize<T: Real>(&self, tape: &Tape<T>) -> Conv3d<T> {
        Conv3d { weight: tape.value(self.w).clone(), bias: tape.value(self.b).clone(), spec: self.spec }
    }
}
