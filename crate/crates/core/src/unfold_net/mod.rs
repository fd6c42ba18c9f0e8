//! Unfolding reconstructor: per stage a GAP projection followed by a 3-D CNN denoiser
//! built around a chain of invertible blocks.

mod model;

pub use model::{mosaic_tensor, ArchConfig, BoundStage, Mode, StageNet, TapeForward, UnfoldModel};

use crate::error::{dim_err, Result};
use crate::kernels::{concat_channels, InvertibleBlock, Real, Tensor};
use crate::projection::BatchSensing;
use crate::sensing::{ColorSpace, MaskCube, Measurement, RefFrames, VideoCube};

/// Final clipped reconstruction and the unclipped output of every stage.
#[derive(Clone, Debug, PartialEq)]
pub struct Reconstruction {
    pub output: VideoCube,
    pub stages: Vec<VideoCube>,
}

pub fn invertible_forward<T: Real>(
    block: &InvertibleBlock<T>,
    s1: &Tensor<T>,
    s2: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    block.forward(s1, s2)
}

pub fn invertible_inverse<T: Real>(
    block: &InvertibleBlock<T>,
    s1: &Tensor<T>,
    s2: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    block.inverse(s1, s2)
}

/// One grayscale stage: project `v_prev`, append the reference frames, denoise.
pub fn stage_forward_gray<T: Real>(
    stage: &StageNet<T>,
    v_prev: &VideoCube,
    y: &Measurement,
    m: &MaskCube,
    xr: &RefFrames,
) -> Result<VideoCube> {
    if v_prev.colorspace() != ColorSpace::Gray || !v_prev.same_dims(&xr.rmf) {
        return Err(dim_err!("stage input and reference frames must be matching grayscale cubes"));
    }
    if !v_prev.width().is_multiple_of(2) || !v_prev.height().is_multiple_of(2) {
        return Err(dim_err!("network input needs even width and height, got {}×{}", v_prev.width(), v_prev.height()));
    }
    let sensing = BatchSensing::<T>::new(&[(y, m)])?;
    let x = sensing.project(&v_prev.to_tensor())?;
    let input = concat_channels(&[&x, &xr.rmf.to_tensor()])?;
    VideoCube::from_tensor(&stage.forward(&input)?)
}

fn reconstruct_with<T: Real>(model: &UnfoldModel<T>, y: &Measurement, m: &MaskCube) -> Result<Reconstruction> {
    let sensing = BatchSensing::<T>::new(&[(y, m)])?;
    let outs = model.infer(&sensing)?;
    let stages = outs.iter().map(VideoCube::from_tensor).collect::<Result<Vec<_>>>()?;
    let output = stages.last().expect("at least one stage").clipped();
    Ok(Reconstruction { output, stages })
}

/// Grayscale reconstruction started at the reference frames.
pub fn reconstruct_gray<T: Real>(model: &UnfoldModel<T>, y: &Measurement, m: &MaskCube) -> Result<Reconstruction> {
    if model.mode() != Mode::Gray {
        return Err(dim_err!("reconstruct_gray needs a grayscale model"));
    }
    reconstruct_with(model, y, m)
}

/// Colour reconstruction from a Bayer snapshot; stages after the first re-mosaic
/// the previous RGB estimate before projecting.
pub fn reconstruct_color<T: Real>(model: &UnfoldModel<T>, y: &Measurement, m: &MaskCube) -> Result<Reconstruction> {
    if model.mode() != Mode::Color {
        return Err(dim_err!("reconstruct_color needs a colour model"));
    }
    reconstruct_with(model, y, m)
}

/// Dispatches on the model mode.
pub fn reconstruct<T: Real>(model: &UnfoldModel<T>, y: &Measurement, m: &MaskCube) -> Result<Reconstruction> {
    reconstruct_with(model, y, m)
}
