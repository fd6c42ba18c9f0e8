//! Reverse-mode tape.
//!
//! Nodes are appended in evaluation order, so the node index is a topological order
//! and `backward` walks it once in reverse. Every node keeps its forward value; an
//! op's backward reads the values of its inputs. Invertible block chains are a single
//! node that keeps only the chain output and recomputes the rest on the way back.

use std::sync::Arc;

use crate::error::{dim_err, Result, VcsError};
use crate::projection::BatchSensing;
use crate::sensing::{mosaic_adjoint, mosaic_planes};

use super::conv::{conv3d_backward, conv3d_forward, ConvSpec};
use super::ops::{leaky_relu, leaky_relu_backward, upsample2x, upsample2x_backward};
use super::real::Real;
use super::reversible::{reversible_backward, BoundBlock, MemoryMeter};
use super::tensor::{concat_channels, split_channels, Tensor};

/// Handle to a tape node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<T: Real> {
    Leaf,
    Conv { x: Var, w: Var, b: Var, spec: ConvSpec },
    LeakyRelu { x: Var, slope: T },
    Upsample { x: Var },
    Concat { xs: Vec<Var>, sizes: Vec<usize> },
    Slice { x: Var, start: usize, channels: usize },
    Add { a: Var, b: Var },
    Sub { a: Var, b: Var },
    Scale { x: Var, k: T },
    Project { v: Var, sensing: Arc<BatchSensing<T>> },
    Mosaic { x: Var },
    Mse { pred: Var, target: Var },
    RevChain { input: Var, blocks: Vec<BoundBlock> },
}

#[derive(Debug)]
struct Node<T: Real> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
    is_param: bool,
}

#[derive(Debug, Default)]
pub struct Tape<T: Real> {
    nodes: Vec<Node<T>>,
    meter: MemoryMeter,
}

/// Gradients indexed by [`Var`]; only leaves that require grad are kept.
#[derive(Debug)]
pub struct Grads<T: Real> {
    slots: Vec<Option<Tensor<T>>>,
}

impl<T: Real> Grads<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.slots.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        self.slots.get_mut(v.0).and_then(Option::take)
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new(), meter: MemoryMeter::default() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad, is_param: false });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Data leaf (input, target, reference frames).
    pub fn input(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    /// Parameter leaf; not counted as activation storage.
    pub fn param(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        let v = self.push(value, Op::Leaf, requires_grad);
        self.nodes[v.0].is_param = true;
        v
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.rg(v)
    }

    /// Bytes of stored non-parameter node values.
    pub fn activation_bytes(&self) -> usize {
        self.nodes.iter().filter(|n| !n.is_param).map(|n| n.value.nbytes()).sum()
    }

    /// Peak activation bytes held by reversible backward passes run from this tape.
    pub fn meter(&self) -> &MemoryMeter {
        &self.meter
    }

    pub fn conv3d(&mut self, x: Var, w: Var, b: Var, spec: ConvSpec) -> Result<Var> {
        let value = conv3d_forward(self.value(x), self.value(w), self.value(b), spec)?;
        let rg = self.rg(x) || self.rg(w) || self.rg(b);
        Ok(self.push(value, Op::Conv { x, w, b, spec }, rg))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        let slope = T::from_f64_lossy(slope);
        let value = leaky_relu(self.value(x), slope);
        let rg = self.rg(x);
        self.push(value, Op::LeakyRelu { x, slope }, rg)
    }

    pub fn upsample2x(&mut self, x: Var) -> Result<Var> {
        let value = upsample2x(self.value(x))?;
        let rg = self.rg(x);
        Ok(self.push(value, Op::Upsample { x }, rg))
    }

    pub fn concat(&mut self, xs: &[Var]) -> Result<Var> {
        let values: Vec<&Tensor<T>> = xs.iter().map(|&v| self.value(v)).collect();
        let value = concat_channels(&values)?;
        let sizes = values.iter().map(|t| t.shape()[1]).collect();
        let rg = xs.iter().any(|&v| self.rg(v));
        Ok(self.push(value, Op::Concat { xs: xs.to_vec(), sizes }, rg))
    }

    pub fn slice_channels(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let value = self.value(x).slice_channels(start, len)?;
        let channels = self.value(x).shape()[1];
        let rg = self.rg(x);
        Ok(self.push(value, Op::Slice { x, start, channels }, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).add(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Add { a, b }, rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).sub(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Sub { a, b }, rg))
    }

    pub fn scale(&mut self, x: Var, k: f64) -> Var {
        let k = T::from_f64_lossy(k);
        let value = self.value(x).scale(k);
        let rg = self.rg(x);
        self.push(value, Op::Scale { x, k }, rg)
    }

    /// GAP projection of a `[B, 1, T, H, W]` estimate.
    pub fn project(&mut self, v: Var, sensing: Arc<BatchSensing<T>>) -> Result<Var> {
        let value = sensing.project(self.value(v))?;
        let rg = self.rg(v);
        Ok(self.push(value, Op::Project { v, sensing }, rg))
    }

    /// RGGB mosaic `[B, 3, T, H, W] → [B, 1, T, H, W]`.
    pub fn mosaic(&mut self, x: Var) -> Result<Var> {
        let [b, c, t, h, w] = self.value(x).dims5()?;
        if c != 3 || h % 2 != 0 || w % 2 != 0 {
            return Err(dim_err!("mosaic needs 3 channels and even extent, got {:?}", self.value(x).shape()));
        }
        let n = 3 * t * h * w;
        let mut data = Vec::with_capacity(b * t * h * w);
        for item in self.value(x).data().chunks(n) {
            data.extend(mosaic_planes(item, t, h, w));
        }
        let value = Tensor::from_vec(vec![b, 1, t, h, w], data)?;
        let rg = self.rg(x);
        Ok(self.push(value, Op::Mosaic { x }, rg))
    }

    /// Mean squared error over every element, as a 1-element tensor.
    pub fn mse(&mut self, pred: Var, target: Var) -> Result<Var> {
        let p = self.value(pred);
        let t = self.value(target);
        p.check_same_shape(t)?;
        let n = T::from_usize(p.len()).unwrap_or_else(T::one);
        let sum: T = p.data().iter().zip(t.data()).map(|(&a, &b)| (a - b) * (a - b)).sum();
        let rg = self.rg(pred) || self.rg(target);
        Ok(self.push(Tensor::scalar(sum / n), Op::Mse { pred, target }, rg))
    }

    /// Runs a chain of invertible blocks on `input = [s₁ | s₂]` storing only the output.
    pub fn rev_chain(&mut self, input: Var, blocks: &[BoundBlock]) -> Result<Var> {
        let c = self.value(input).dims5()?[1];
        if c % 2 != 0 {
            return Err(dim_err!("invertible chain needs an even channel count, got {c}"));
        }
        let mut halves = split_channels(self.value(input), &[c / 2, c / 2])?;
        let (mut s1, mut s2) = (halves.remove(0), halves.remove(0));
        for b in blocks {
            let block = b.materialize(self)?;
            (s1, s2) = block.forward(&s1, &s2)?;
        }
        let value = concat_channels(&[&s1, &s2])?;
        let rg = self.rg(input) || blocks.iter().flat_map(|b| b.vars()).any(|v| self.rg(v));
        Ok(self.push(value, Op::RevChain { input, blocks: blocks.to_vec() }, rg))
    }

    /// Backward pass for a scalar output, seeded with 1.
    pub fn backward_scalar(&self, loss: Var) -> Result<Grads<T>> {
        let seed = Tensor::full(self.value(loss).shape().to_vec(), T::one());
        self.backward(vec![(loss, seed)])
    }

    /// Backward pass from arbitrary seed gradients.
    pub fn backward(&self, seeds: Vec<(Var, Tensor<T>)>) -> Result<Grads<T>> {
        let mut slots: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        let mut top = 0;
        for (v, g) in seeds {
            self.value(v).check_same_shape(&g)?;
            top = top.max(v.0);
            self.accumulate(&mut slots, v, g)?;
        }
        for i in (0..=top).rev() {
            let node = &self.nodes[i];
            if matches!(node.op, Op::Leaf) || !node.requires_grad {
                continue;
            }
            let Some(g) = slots[i].take() else { continue };
            self.backward_node(&node.op, &node.value, g, &mut slots)?;
        }
        Ok(Grads { slots })
    }

    fn accumulate(&self, slots: &mut [Option<Tensor<T>>], v: Var, g: Tensor<T>) -> Result<()> {
        if !self.rg(v) {
            return Ok(());
        }
        match &mut slots[v.0] {
            Some(acc) => acc.add_assign(&g)?,
            slot @ None => *slot = Some(g),
        }
        Ok(())
    }

    fn backward_node(&self, op: &Op<T>, out: &Tensor<T>, g: Tensor<T>, slots: &mut [Option<Tensor<T>>]) -> Result<()> {
        match op {
            Op::Leaf => {}
            Op::Conv { x, w, b, spec } => {
                let need_params = self.rg(*w) || self.rg(*b);
                let grads = conv3d_backward(self.value(*x), self.value(*w), *spec, &g, self.rg(*x), need_params)?;
                if let Some(gx) = grads.x {
                    self.accumulate(slots, *x, gx)?;
                }
                if let Some(gw) = grads.w {
                    self.accumulate(slots, *w, gw)?;
                }
                if let Some(gb) = grads.b {
                    self.accumulate(slots, *b, gb)?;
                }
            }
            Op::LeakyRelu { x, slope } => {
                let gx = leaky_relu_backward(self.value(*x), *slope, &g)?;
                self.accumulate(slots, *x, gx)?;
            }
            Op::Upsample { x } => {
                self.accumulate(slots, *x, upsample2x_backward(&g)?)?;
            }
            Op::Concat { xs, sizes } => {
                for (x, part) in xs.iter().zip(split_channels(&g, sizes)?) {
                    self.accumulate(slots, *x, part)?;
                }
            }
            Op::Slice { x, start, channels } => {
                let [b, c, t, h, w] = g.dims5()?;
                let plane = t * h * w;
                let mut full = Tensor::zeros(vec![b, *channels, t, h, w]);
                for bi in 0..b {
                    let dst = (bi * channels + start) * plane;
                    full.data_mut()[dst..dst + c * plane]
                        .copy_from_slice(&g.data()[bi * c * plane..(bi + 1) * c * plane]);
                }
                self.accumulate(slots, *x, full)?;
            }
            Op::Add { a, b } => {
                self.accumulate(slots, *a, g.clone())?;
                self.accumulate(slots, *b, g)?;
            }
            Op::Sub { a, b } => {
                self.accumulate(slots, *b, g.scale(-T::one()))?;
                self.accumulate(slots, *a, g)?;
            }
            Op::Scale { x, k } => {
                self.accumulate(slots, *x, g.scale(*k))?;
            }
            Op::Project { v, sensing } => {
                self.accumulate(slots, *v, sensing.project_vjp(&g)?)?;
            }
            Op::Mosaic { x } => {
                let [b, _, t, h, w] = g.dims5()?;
                let n = t * h * w;
                let mut data = Vec::with_capacity(3 * b * n);
                for item in g.data().chunks(n) {
                    data.extend(mosaic_adjoint(item, t, h, w));
                }
                self.accumulate(slots, *x, Tensor::from_vec(vec![b, 3, t, h, w], data)?)?;
            }
            Op::Mse { pred, target } => {
                let p = self.value(*pred);
                let t = self.value(*target);
                let n = T::from_usize(p.len()).unwrap_or_else(T::one);
                let k = (T::one() + T::one()) * g.data()[0] / n;
                let diff = p.zip_map(t, |a, b| (a - b) * k)?;
                if self.rg(*target) {
                    self.accumulate(slots, *target, diff.scale(-T::one()))?;
                }
                self.accumulate(slots, *pred, diff)?;
            }
            Op::RevChain { input, blocks } => {
                let c = out.dims5()?[1];
                let mut o = split_channels(out, &[c / 2, c / 2])?;
                let mut go = split_channels(&g, &[c / 2, c / 2])?;
                let materialized = blocks.iter().map(|b| b.materialize(self)).collect::<Result<Vec<_>>>()?;
                let grads = reversible_backward(
                    &materialized,
                    (o.remove(0), o.remove(0)),
                    (go.remove(0), go.remove(0)),
                    &self.meter,
                )?;
                let gin = concat_channels(&[&grads.grad_in.0, &grads.grad_in.1])?;
                self.accumulate(slots, *input, gin)?;
                for (bound, bg) in blocks.iter().zip(grads.blocks) {
                    for (v, t) in bound.vars().into_iter().zip(bg.into_vec()) {
                        self.accumulate(slots, v, t)?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Fails with a numeric error naming `what` if `t` holds NaN or ±∞.
pub(crate) fn ensure_finite<T: Real>(t: &Tensor<T>, what: &str) -> Result<()> {
    if t.all_finite() {
        Ok(())
    } else {
        Err(VcsError::Numeric(format!("{what} contains non-finite values")))
    }
}
