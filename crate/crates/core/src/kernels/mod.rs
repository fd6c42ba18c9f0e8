//! Numeric kernels: tensors, convolutions, reverse-mode tape, invertible blocks, optimizer.

mod adam;
mod conv;
mod layers;
mod ops;
mod real;
mod reversible;
mod tape;
mod tensor;

pub use adam::Adam;
pub use conv::{conv3d_backward, conv3d_forward, conv3d_output_shape, ConvGrads, ConvSpec};
pub use layers::{BoundConv, Conv3d};
pub use ops::{leaky_relu, leaky_relu_backward, upsample2x, upsample2x_backward, DEFAULT_SLOPE};
pub use real::{DType, Real};
pub use reversible::{
    chain_forward, reversible_backward, stored_activation_backward, BlockGrads, BoundBlock, BoundCoupling, ChainGrads,
    CouplingNet, InvertibleBlock, MemoryMeter,
};
pub use tape::{Grads, Tape, Var};
pub use tensor::{concat_channels, split_channels, Tensor};
