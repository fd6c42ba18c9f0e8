//! GAP-TV: alternate the measurement projection with per-frame 2-D TV denoising.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Result, VcsError};
use crate::projection::{project_planes, q_diagonal};
use crate::sensing::{check_mask_dims, reference_frames, ColorSpace, MaskCube, Measurement, VideoCube};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TvMode {
    /// `Σ |∂ₓz| + |∂ᵧz|`
    #[default]
    Anisotropic,
    /// `Σ √(∂ₓz² + ∂ᵧz²)`
    Isotropic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapTvConfig {
    pub iters: usize,
    pub tv_weight: f64,
    pub tv_inner_iters: usize,
    pub tv_mode: TvMode,
}

impl Default for GapTvConfig {
    fn default() -> Self {
        GapTvConfig { iters: 60, tv_weight: 0.07, tv_inner_iters: 5, tv_mode: TvMode::Anisotropic }
    }
}

impl GapTvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iters == 0 {
            return Err(VcsError::Config("gap_tv.iters must be ≥ 1".into()));
        }
        if !(self.tv_weight > 0.0 && self.tv_weight.is_finite()) {
            return Err(VcsError::Config(format!("gap_tv.tv_weight must be > 0, got {}", self.tv_weight)));
        }
        if self.tv_inner_iters == 0 {
            return Err(VcsError::Config("gap_tv.tv_inner_iters must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// Forward differences with a zero last row/column.
fn gradient(z: &[f64], h: usize, w: usize, gx: &mut [f64], gy: &mut [f64]) {
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            gx[i] = if c + 1 < w { z[i + 1] - z[i] } else { 0.0 };
            gy[i] = if r + 1 < h { z[i + w] - z[i] } else { 0.0 };
        }
    }
}

/// Negative adjoint of [`gradient`].
fn divergence(px: &[f64], py: &[f64], h: usize, w: usize, out: &mut [f64]) {
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            let dx = match c {
                _ if w == 1 => 0.0,
                0 => px[i],
                _ if c + 1 == w => -px[i - 1],
                _ => px[i] - px[i - 1],
            };
            let dy = match r {
                _ if h == 1 => 0.0,
                0 => py[i],
                _ if r + 1 == h => -py[i - w],
                _ => py[i] - py[i - w],
            };
            out[i] = dx + dy;
        }
    }
}

/// Total variation of one `h×w` frame.
pub fn total_variation(z: &[f64], h: usize, w: usize, mode: TvMode) -> f64 {
    let mut gx = vec![0.0; z.len()];
    let mut gy = vec![0.0; z.len()];
    gradient(z, h, w, &mut gx, &mut gy);
    match mode {
        TvMode::Anisotropic => gx.iter().zip(&gy).map(|(a, b)| a.abs() + b.abs()).sum(),
        TvMode::Isotropic => gx.iter().zip(&gy).map(|(a, b)| a.hypot(*b)).sum(),
    }
}

/// `½‖z − x‖² + λ·TV(z)` summed over frames.
pub fn tv_objective(z: &VideoCube, x: &VideoCube, tv_weight: f64, mode: TvMode) -> Result<f64> {
    if !z.same_dims(x) {
        return Err(dim_err!("objective needs equal cube shapes"));
    }
    let fid: f64 = z.data().iter().zip(x.data()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() * 0.5;
    let (h, w) = (z.height(), z.width());
    let tv: f64 = z.data().chunks(h * w).map(|f| total_variation(f, h, w, mode)).sum();
    Ok(fid + tv_weight * tv)
}

fn denoise_frame(x: &[f64], h: usize, w: usize, cfg: &GapTvConfig) -> Vec<f64> {
    let n = x.len();
    let lambda = cfg.tv_weight;
    let tau = 0.125;
    let mut px = vec![0.0; n];
    let mut py = vec![0.0; n];
    let mut div = vec![0.0; n];
    let mut gx = vec![0.0; n];
    let mut gy = vec![0.0; n];
    let mut u = vec![0.0; n];
    for _ in 0..cfg.tv_inner_iters {
        divergence(&px, &py, h, w, &mut div);
        for i in 0..n {
            u[i] = div[i] - x[i] / lambda;
        }
        gradient(&u, h, w, &mut gx, &mut gy);
        match cfg.tv_mode {
            TvMode::Anisotropic => {
                for i in 0..n {
                    px[i] = (px[i] + tau * gx[i]).clamp(-1.0, 1.0);
                    py[i] = (py[i] + tau * gy[i]).clamp(-1.0, 1.0);
                }
            }
            TvMode::Isotropic => {
                for i in 0..n {
                    let a = px[i] + tau * gx[i];
                    let b = py[i] + tau * gy[i];
                    let s = a.hypot(b).max(1.0);
                    px[i] = a / s;
                    py[i] = b / s;
                }
            }
        }
    }
    divergence(&px, &py, h, w, &mut div);
    x.iter().zip(&div).map(|(&xi, &d)| xi - lambda * d).collect()
}

/// Per-frame TV denoising by projected gradient on the dual (step 1/8).
pub fn tv_denoise(x: &VideoCube, cfg: &GapTvConfig) -> Result<VideoCube> {
    cfg.validate()?;
    let (h, w) = (x.height(), x.width());
    let mut out = x.clone();
    out.data_mut().par_chunks_mut(h * w).for_each(|frame| {
        let z = denoise_frame(frame, h, w, cfg);
        frame.copy_from_slice(&z);
    });
    Ok(out)
}

/// GAP-TV reconstruction from a grayscale snapshot, started at the reference frames.
pub fn gap_tv_reconstruct(y: &Measurement, m: &MaskCube, cfg: &GapTvConfig) -> Result<VideoCube> {
    cfg.validate()?;
    check_mask_dims("measurement", y.width(), y.height(), None, m)?;
    let q = q_diagonal(m);
    let mut v = reference_frames(y, m)?.rmf;
    for _ in 0..cfg.iters {
        project_planes(v.data_mut(), y.data(), m.data(), &q.q);
        v = tv_denoise(&v, cfg)?;
    }
    debug_assert_eq!(v.colorspace(), ColorSpace::Gray);
    Ok(v.clipped())
}
