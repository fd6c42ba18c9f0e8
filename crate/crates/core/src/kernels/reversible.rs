//! Additive-coupling invertible blocks and the recompute-based backward pass.
//!
//! A block maps `(s₁, s₂)` to `(s₁ + F(s₂), s₂ + G(s₁'))`; its input is recovered
//! from its output as `s₂ = s₂' − G(s₁')`, `s₁ = s₁' − F(s₂)`. During backward the
//! chain is walked last-to-first: recover a block's input, rebuild that one block on
//! a local tape, push the gradient through it, and drop the tape before moving on.

use std::cell::Cell;

use rand::Rng;

use crate::error::{dim_err, Result, VcsError};

use super::conv::ConvSpec;
use super::layers::{BoundConv, Conv3d};
use super::ops::leaky_relu;
use super::real::Real;
use super::tape::{ensure_finite, Tape, Var};
use super::tensor::Tensor;

/// Residual function of a coupling: conv → leaky ReLU → conv, channel count preserved.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingNet<T: Real> {
    pub conv1: Conv3d<T>,
    pub conv2: Conv3d<T>,
    pub slope: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundCoupling {
    pub conv1: BoundConv,
    pub conv2: BoundConv,
    pub slope: f64,
}

impl<T: Real> CouplingNet<T> {
    pub fn random(channels: usize, slope: f64, rng: &mut impl Rng) -> Self {
        CouplingNet {
            conv1: Conv3d::kaiming(channels, channels, 3, ConvSpec::SAME3, slope, 1.0, rng),
            conv2: Conv3d::kaiming(channels, channels, 3, ConvSpec::SAME3, slope, 1.0, rng),
            slope,
        }
    }

    /// `F ≡ 0`.
    pub fn zeros(channels: usize, slope: f64) -> Self {
        CouplingNet {
            conv1: Conv3d::zeros(channels, channels, 3, ConvSpec::SAME3),
            conv2: Conv3d::zeros(channels, channels, 3, ConvSpec::SAME3),
            slope,
        }
    }

    pub fn channels(&self) -> usize {
        self.conv1.in_channels()
    }

    pub fn apply(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let h = leaky_relu(&self.conv1.forward(x)?, T::from_f64_lossy(self.slope));
        self.conv2.forward(&h)
    }

    pub fn bind(&self, tape: &mut Tape<T>, trainable: bool) -> BoundCoupling {
        BoundCoupling {
            conv1: self.conv1.bind(tape, trainable),
            conv2: self.conv2.bind(tape, trainable),
            slope: self.slope,
        }
    }

    pub fn params(&self) -> Vec<&Tensor<T>> {
        let [a, b] = self.conv1.params();
        let [c, d] = self.conv2.params();
        vec![a, b, c, d]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let [a, b] = self.conv1.params_mut();
        let [c, d] = self.conv2.params_mut();
        vec![a, b, c, d]
    }
}

impl BoundCoupling {
    pub fn apply<T: Real>(&self, tape: &mut Tape<T>, x: Var) -> Result<Var> {
        let h = self.conv1.apply(tape, x)?;
        let h = tape.leaky_relu(h, self.slope);
        self.conv2.apply(tape, h)
    }

    pub fn vars(&self) -> [Var; 4] {
        let [a, b] = self.conv1.vars();
        let [c, d] = self.conv2.vars();
        [a, b, c, d]
    }

    fn materialize<T: Real>(&self, tape: &Tape<T>) -> CouplingNet<T> {
        CouplingNet { conv1: self.conv1.materialize(tape), conv2: self.conv2.materialize(tape), slope: self.slope }
    }
}

/// Invertible block over a feature map split by channel into halves `s₁`, `s₂`.
#[derive(Clone, Debug, PartialEq)]
pub struct InvertibleBlock<T: Real> {
    pub f: CouplingNet<T>,
    pub g: CouplingNet<T>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundBlock {
    pub f: BoundCoupling,
    pub g: BoundCoupling,
}

fn check_pair<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(dim_err!("coupling halves differ in shape: {:?} vs {:?}", a.shape(), b.shape()));
    }
    Ok(())
}

impl<T: Real> InvertibleBlock<T> {
    /// Block acting on `2 · half_channels` channels.
    pub fn random(half_channels: usize, slope: f64, rng: &mut impl Rng) -> Self {
        InvertibleBlock {
            f: CouplingNet::random(half_channels, slope, rng),
            g: CouplingNet::random(half_channels, slope, rng),
        }
    }

    pub fn zeros(half_channels: usize, slope: f64) -> Self {
        InvertibleBlock { f: CouplingNet::zeros(half_channels, slope), g: CouplingNet::zeros(half_channels, slope) }
    }

    /// `s₁' = s₁ + F(s₂)`, `s₂' = s₂ + G(s₁')`.
    pub fn forward(&self, s1: &Tensor<T>, s2: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
        check_pair(s1, s2)?;
        let y1 = s1.add(&self.f.apply(s2)?)?;
        let y2 = s2.add(&self.g.apply(&y1)?)?;
        Ok((y1, y2))
    }

    /// `s₂ = s₂' − G(s₁')`, `s₁ = s₁' − F(s₂)`.
    pub fn inverse(&self, y1: &Tensor<T>, y2: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
        check_pair(y1, y2)?;
        let s2 = y2.sub(&self.g.apply(y1)?)?;
        let s1 = y1.sub(&self.f.apply(&s2)?)?;
        Ok((s1, s2))
    }

    pub fn bind(&self, tape: &mut Tape<T>, trainable: bool) -> BoundBlock {
        BoundBlock { f: self.f.bind(tape, trainable), g: self.g.bind(tape, trainable) }
    }

    pub fn params(&self) -> Vec<&Tensor<T>> {
        let mut p = self.f.params();
        p.extend(self.g.params());
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut p = self.f.params_mut();
        p.extend(self.g.params_mut());
        p
    }
}

impl BoundBlock {
    /// Records the block on the tape (every intermediate activation is kept).
    pub fn forward_tape<T: Real>(&self, tape: &mut Tape<T>, s1: Var, s2: Var) -> Result<(Var, Var)> {
        let f = self.f.apply(tape, s2)?;
        let y1 = tape.add(s1, f)?;
        let g = self.g.apply(tape, y1)?;
        let y2 = tape.add(s2, g)?;
        Ok((y1, y2))
    }

    /// Parameter handles in [`InvertibleBlock::params`] order.
    pub fn vars(&self) -> Vec<Var> {
        let mut v = self.f.vars().to_vec();
        v.extend(self.g.vars());
        v
    }

    pub fn materialize<T: Real>(&self, tape: &Tape<T>) -> Result<InvertibleBlock<T>> {
        Ok(InvertibleBlock { f: self.f.materialize(tape), g: self.g.materialize(tape) })
    }
}

/// Current and peak byte counts of activations held during a backward pass.
#[derive(Debug, Default)]
pub struct MemoryMeter {
    current: Cell<usize>,
    peak: Cell<usize>,
}

impl MemoryMeter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn alloc(&self, bytes: usize) {
        let c = self.current.get() + bytes;
        self.current.set(c);
        self.peak.set(self.peak.get().max(c));
    }

    pub fn free(&self, bytes: usize) {
        self.current.set(self.current.get().saturating_sub(bytes));
    }

    pub fn current(&self) -> usize {
        self.current.get()
    }

    pub fn peak(&self) -> usize {
        self.peak.get()
    }
}

/// Gradients of one block's parameters, in [`InvertibleBlock::params`] order.
#[derive(Clone, Debug)]
pub struct BlockGrads<T: Real> {
    pub f: [Tensor<T>; 4],
    pub g: [Tensor<T>; 4],
}

impl<T: Real> BlockGrads<T> {
    pub fn into_vec(self) -> Vec<Tensor<T>> {
        self.f.into_iter().chain(self.g).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Tensor<T>> {
        self.f.iter().chain(self.g.iter())
    }
}

#[derive(Clone, Debug)]
pub struct ChainGrads<T: Real> {
    pub grad_in: (Tensor<T>, Tensor<T>),
    pub blocks: Vec<BlockGrads<T>>,
}

fn block_grads_from<T: Real>(grads: &mut super::tape::Grads<T>, vars: &[Var]) -> Result<BlockGrads<T>> {
    let mut out = Vec::with_capacity(8);
    for &v in vars {
        out.push(grads.take(v).ok_or_else(|| VcsError::Numeric("missing block parameter gradient".into()))?);
    }
    let mut it = out.into_iter();
    let mut next4 = || -> [Tensor<T>; 4] { std::array::from_fn(|_| it.next().expect("eight gradients")) };
    let f = next4();
    let g = next4();
    Ok(BlockGrads { f, g })
}

/// Backward through a block chain given only its output.
///
/// Peak stored activations stay at one block's worth regardless of chain length.
pub fn reversible_backward<T: Real>(
    blocks: &[InvertibleBlock<T>],
    s_out: (Tensor<T>, Tensor<T>),
    grad_out: (Tensor<T>, Tensor<T>),
    meter: &MemoryMeter,
) -> Result<ChainGrads<T>> {
    check_pair(&s_out.0, &s_out.1)?;
    check_pair(&grad_out.0, &grad_out.1)?;
    check_pair(&s_out.0, &grad_out.0)?;
    let held = 2 * (s_out.0.nbytes() + grad_out.0.nbytes());
    meter.alloc(held);

    let (mut y1, mut y2) = s_out;
    let (mut g1, mut g2) = grad_out;
    let mut per_block = Vec::with_capacity(blocks.len());
    for block in blocks.iter().rev() {
        let (s1, s2) = block.inverse(&y1, &y2)?;
        ensure_finite(&s1, "recomputed block input")?;
        ensure_finite(&s2, "recomputed block input")?;

        let mut tape = Tape::new();
        let v1 = tape.input(s1, true);
        let v2 = tape.input(s2, true);
        let bound = block.bind(&mut tape, true);
        let (o1, o2) = bound.forward_tape(&mut tape, v1, v2)?;
        let local = tape.activation_bytes();
        meter.alloc(local);
        let mut grads = tape.backward(vec![(o1, g1), (o2, g2)])?;
        per_block.push(block_grads_from(&mut grads, &bound.vars())?);
        g1 = grads.take(v1).expect("input requires grad");
        g2 = grads.take(v2).expect("input requires grad");
        meter.free(local);

        // the recovered input becomes the next block's output
        y1 = tape.value(v1).clone();
        y2 = tape.value(v2).clone();
    }
    meter.free(held);
    per_block.reverse();
    Ok(ChainGrads { grad_in: (g1, g2), blocks: per_block })
}

/// Reference backward that records the whole chain on one tape.
pub fn stored_activation_backward<T: Real>(
    blocks: &[InvertibleBlock<T>],
    s_in: (Tensor<T>, Tensor<T>),
    grad_out: (Tensor<T>, Tensor<T>),
    meter: &MemoryMeter,
) -> Result<ChainGrads<T>> {
    let mut tape = Tape::new();
    let v1 = tape.input(s_in.0, true);
    let v2 = tape.input(s_in.1, true);
    let bound: Vec<BoundBlock> = blocks.iter().map(|b| b.bind(&mut tape, true)).collect();
    let (mut o1, mut o2) = (v1, v2);
    for b in &bound {
        (o1, o2) = b.forward_tape(&mut tape, o1, o2)?;
    }
    let held = tape.activation_bytes() + 2 * grad_out.0.nbytes();
    meter.alloc(held);
    let mut grads = tape.backward(vec![(o1, grad_out.0), (o2, grad_out.1)])?;
    let per_block = bound.iter().map(|b| block_grads_from(&mut grads, &b.vars())).collect::<Result<Vec<_>>>()?;
    let out = ChainGrads {
        grad_in: (grads.take(v1).expect("input grad"), grads.take(v2).expect("input grad")),
        blocks: per_block,
    };
    meter.free(held);
    Ok(out)
}

/// Forward through a whole chain without storing intermediates.
pub fn chain_forward<T: Real>(
    blocks: &[InvertibleBlock<T>],
    s1: &Tensor<T>,
    s2: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let (mut a, mut b) = (s1.clone(), s2.clone());
    for block in blocks {
        (a, b) = block.forward(&a, &b)?;
    }
    Ok((a, b))
}
