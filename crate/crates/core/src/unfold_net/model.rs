use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Result, VcsError};
use crate::kernels::{
    chain_forward, concat_channels, leaky_relu, split_channels, upsample2x, BoundBlock, BoundConv, Conv3d, ConvSpec,
    InvertibleBlock, Real, Tape, Tensor, Var, DEFAULT_SLOPE,
};
use crate::projection::BatchSensing;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Gray,
    Color,
}

impl Mode {
    pub fn in_channels(self) -> usize {
        match self {
            Mode::Gray => 2,
            Mode::Color => 1,
        }
    }

    pub fn out_channels(self) -> usize {
        match self {
            Mode::Gray => 1,
            Mode::Color => 3,
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = VcsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gray" => Ok(Mode::Gray),
            "color" => Ok(Mode::Color),
            other => Err(VcsError::InvalidArgument(format!("unknown mode `{other}` (expected gray or color)"))),
        }
    }
}

/// Architecture hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchConfig {
    /// Number of projection + network stages.
    pub stages: usize,
    /// Feature width `C` at full resolution (the block chain runs at `2C`).
    pub channels: usize,
    /// Invertible blocks per stage.
    pub blocks: usize,
    pub mode: Mode,
    pub slope: f64,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig { stages: 2, channels: 16, blocks: 4, mode: Mode::Gray, slope: DEFAULT_SLOPE }
    }
}

impl ArchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stages == 0 {
            return Err(VcsError::Config("model.stages must be ≥ 1".into()));
        }
        if self.channels == 0 {
            return Err(VcsError::Config("model.channels must be ≥ 1".into()));
        }
        if !(0.0..1.0).contains(&self.slope) {
            return Err(VcsError::Config(format!("model.slope must lie in [0, 1), got {}", self.slope)));
        }
        Ok(())
    }
}

/// One stage's denoiser: stem, strided encoder, invertible chain, upsampling decoder, head.
#[derive(Clone, Debug, PartialEq)]
pub struct StageNet<T: Real> {
    pub stem: Conv3d<T>,
    pub down: Conv3d<T>,
    pub blocks: Vec<InvertibleBlock<T>>,
    pub up: Conv3d<T>,
    pub head: Conv3d<T>,
    pub slope: f64,
}

/// A [`StageNet`] bound to a tape.
#[derive(Clone, Debug)]
pub struct BoundStage {
    pub stem: BoundConv,
    pub down: BoundConv,
    pub blocks: Vec<BoundBlock>,
    pub up: BoundConv,
    pub head: BoundConv,
    pub slope: f64,
}

impl<T: Real> StageNet<T> {
    pub fn random(arch: &ArchConfig, rng: &mut ChaCha8Rng) -> Self {
        let (c, s) = (arch.channels, arch.slope);
        StageNet {
            stem: Conv3d::kaiming(arch.mode.in_channels(), c, 3, ConvSpec::SAME3, s, 1.0, rng),
            down: Conv3d::kaiming(c, 2 * c, 3, ConvSpec::DOWN2, s, 1.0, rng),
            blocks: (0..arch.blocks).map(|_| InvertibleBlock::random(c, s, rng)).collect(),
            up: Conv3d::kaiming(2 * c, c, 3, ConvSpec::SAME3, s, 1.0, rng),
            head: Conv3d::kaiming(c, arch.mode.out_channels(), 3, ConvSpec::SAME3, 0.0, 1.0, rng),
            slope: s,
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let slope = T::from_f64_lossy(self.slope);
        let h = leaky_relu(&self.stem.forward(x)?, slope);
        let h = leaky_relu(&self.down.forward(&h)?, slope);
        let c = h.shape()[1];
        let mut halves = split_channels(&h, &[c / 2, c / 2])?;
        let s2 = halves.pop().expect("two halves");
        let s1 = halves.pop().expect("two halves");
        let (s1, s2) = chain_forward(&self.blocks, &s1, &s2)?;
        let h = upsample2x(&concat_channels(&[&s1, &s2])?)?;
        let h = leaky_relu(&self.up.forward(&h)?, slope);
        self.head.forward(&h)
    }

    pub fn bind(&self, tape: &mut Tape<T>, trainable: bool) -> BoundStage {
        BoundStage {
            stem: self.stem.bind(tape, trainable),
            down: self.down.bind(tape, trainable),
            blocks: self.blocks.iter().map(|b| b.bind(tape, trainable)).collect(),
            up: self.up.bind(tape, trainable),
            head: self.head.bind(tape, trainable),
            slope: self.slope,
        }
    }

    /// Parameters in a fixed order shared with [`BoundStage::vars`] and [`StageNet::param_names`].
    pub fn params(&self) -> Vec<&Tensor<T>> {
        let mut p: Vec<&Tensor<T>> = self.stem.params().into();
        p.extend(self.down.params());
        for b in &self.blocks {
            p.extend(b.params());
        }
        p.extend(self.up.params());
        p.extend(self.head.params());
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut p: Vec<&mut Tensor<T>> = self.stem.params_mut().into();
        p.extend(self.down.params_mut());
        for b in &mut self.blocks {
            p.extend(b.params_mut());
        }
        p.extend(self.up.params_mut());
        p.extend(self.head.params_mut());
        p
    }

    pub fn param_names(&self) -> Vec<String> {
        let conv = |n: &str| [format!("{n}.weight"), format!("{n}.bias")];
        let mut names: Vec<String> = conv("stem").into();
        names.extend(conv("down"));
        for k in 0..self.blocks.len() {
            for f in ["f", "g"] {
                for l in ["conv1", "conv2"] {
                    names.extend(conv(&format!("block{k}.{f}.{l}")));
                }
            }
        }
        names.extend(conv("up"));
        names.extend(conv("head"));
        names
    }
}

impl BoundStage {
    /// Records the stage; with `reversible` the block chain is a single recompute node.
    pub fn apply<T: Real>(&self, tape: &mut Tape<T>, x: Var, reversible: bool) -> Result<Var> {
        let h = self.stem.apply(tape, x)?;
        let h = tape.leaky_relu(h, self.slope);
        let h = self.down.apply(tape, h)?;
        let h = tape.leaky_relu(h, self.slope);
        let h = if self.blocks.is_empty() {
            h
        } else if reversible {
            tape.rev_chain(h, &self.blocks)?
        } else {
            let c = tape.value(h).shape()[1];
            let mut s1 = tape.slice_channels(h, 0, c / 2)?;
            let mut s2 = tape.slice_channels(h, c / 2, c / 2)?;
            for b in &self.blocks {
                (s1, s2) = b.forward_tape(tape, s1, s2)?;
            }
            tape.concat(&[s1, s2])?
        };
        let h = tape.upsample2x(h)?;
        let h = self.up.apply(tape, h)?;
        let h = tape.leaky_relu(h, self.slope);
        self.head.apply(tape, h)
    }

    pub fn vars(&self) -> Vec<Var> {
        let mut v: Vec<Var> = self.stem.vars().into();
        v.extend(self.down.vars());
        for b in &self.blocks {
            v.extend(b.vars());
        }
        v.extend(self.up.vars());
        v.extend(self.head.vars());
        v
    }
}

/// The multi-stage unfolding reconstructor.
#[derive(Clone, Debug, PartialEq)]
pub struct UnfoldModel<T: Real = f32> {
    pub arch: ArchConfig,
    pub stages: Vec<StageNet<T>>,
}

/// Tape handles produced by [`UnfoldModel::forward_tape`].
#[derive(Clone, Debug)]
pub struct TapeForward {
    /// Unclipped output of every stage.
    pub stage_outputs: Vec<Var>,
    pub stages: Vec<BoundStage>,
}

impl<T: Real> UnfoldModel<T> {
    pub fn new(arch: ArchConfig, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let stages = (0..arch.stages).map(|_| StageNet::random(&arch, &mut rng)).collect();
        Ok(UnfoldModel { arch, stages })
    }

    pub fn mode(&self) -> Mode {
        self.arch.mode
    }

    pub fn num_params(&self) -> usize {
        self.stages.iter().flat_map(|s| s.params()).map(Tensor::len).sum()
    }

    /// `(name, tensor)` pairs, names prefixed `stage<j>.`.
    pub fn named_params(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        for (j, s) in self.stages.iter().enumerate() {
            for (n, p) in s.param_names().into_iter().zip(s.params()) {
                out.push((format!("stage{j}.{n}"), p));
            }
        }
        out
    }

    pub fn cast<U: Real>(&self) -> UnfoldModel<U> {
        let mut out = UnfoldModel::<U>::new(self.arch.clone(), 0).expect("arch already validated");
        for (dst, src) in out.stages.iter_mut().zip(&self.stages) {
            for (d, s) in dst.params_mut().into_iter().zip(src.params()) {
                *d = s.cast();
            }
        }
        out
    }

    fn check_input(&self, sensing: &BatchSensing<T>) -> Result<()> {
        let [_, _, _, h, w] = sensing.masks.dims5()?;
        if h % 2 != 0 || w % 2 != 0 {
            return Err(dim_err!("network input needs even width and height, got {w}×{h}"));
        }
        Ok(())
    }

    /// Stage-by-stage inference, returning the unclipped output of every stage.
    pub fn infer(&self, sensing: &BatchSensing<T>) -> Result<Vec<Tensor<T>>> {
        self.check_input(sensing)?;
        let v0 = sensing.reference_frames();
        let mut outs: Vec<Tensor<T>> = Vec::with_capacity(self.stages.len());
        for stage in &self.stages {
            let x = match (self.arch.mode, outs.last()) {
                (Mode::Gray, prev) => {
                    let x = sensing.project(prev.unwrap_or(&v0))?;
                    concat_channels(&[&x, &v0])?
                }
                (Mode::Color, None) => sensing.project(&v0)?,
                (Mode::Color, Some(prev)) => sensing.project(&mosaic_tensor(prev)?)?,
            };
            outs.push(stage.forward(&x)?);
        }
        Ok(outs)
    }

    /// Records the forward pass of the first `trainable.len()` stages on `tape`.
    pub fn forward_tape(
        &self,
        tape: &mut Tape<T>,
        sensing: &Arc<BatchSensing<T>>,
        trainable: &[bool],
        reversible: bool,
    ) -> Result<TapeForward> {
        self.check_input(sensing)?;
        if trainable.is_empty() || trainable.len() > self.stages.len() {
            return Err(dim_err!("{} trainable flags for {} stages", trainable.len(), self.stages.len()));
        }
        let v0 = tape.input(sensing.reference_frames(), false);
        let mut outs: Vec<Var> = Vec::with_capacity(self.stages.len());
        let mut bound = Vec::with_capacity(self.stages.len());
        for (stage, &train) in self.stages.iter().zip(trainable) {
            let b = stage.bind(tape, train);
            let x = match (self.arch.mode, outs.last().copied()) {
                (Mode::Gray, prev) => {
                    let x = tape.project(prev.unwrap_or(v0), sensing.clone())?;
                    tape.concat(&[x, v0])?
                }
                (Mode::Color, None) => tape.project(v0, sensing.clone())?,
                (Mode::Color, Some(prev)) => {
                    let m = tape.mosaic(prev)?;
                    tape.project(m, sensing.clone())?
                }
            };
            outs.push(b.apply(tape, x, reversible)?);
            bound.push(b);
        }
        Ok(TapeForward { stage_outputs: outs, stages: bound })
    }
}

/// RGGB sampling of a `[B, 3, T, H, W]` tensor into `[B, 1, T, H, W]`.
pub fn mosaic_tensor<T: Real>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let [b, c, t, h, w] = x.dims5()?;
    if c != 3 || h % 2 != 0 || w % 2 != 0 {
        return Err(dim_err!("mosaic needs 3 channels and even extent, got {:?}", x.shape()));
    }
    let mut data = Vec::with_capacity(b * t * h * w);
    for item in x.data().chunks(3 * t * h * w) {
        data.extend(crate::sensing::mosaic_planes(item, t, h, w));
    }
    Tensor::from_vec(vec![b, 1, t, h, w], data)
}
