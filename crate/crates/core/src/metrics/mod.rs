//! Reconstruction quality metrics and the flexibility evaluation harness.

mod eval;
mod quality;

pub use eval::{
    eval_flexibility_masks, eval_flexibility_scale, evaluate, mosaic_rmf_baseline, rmf_baseline, simulate,
    tiled_reconstruct, ConditionSummary, EvalReport, EvalRow, Method,
};
pub use quality::{psnr, psnr_from_mse, ssim, ssim_frame, SSIM_SIGMA, SSIM_WINDOW};
