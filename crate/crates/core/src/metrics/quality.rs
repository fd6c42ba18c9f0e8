use crate::error::{dim_err, Result};
use crate::sensing::VideoCube;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

fn check_same(x: &VideoCube, r: &VideoCube) -> Result<()> {
    if !x.same_dims(r) {
        return Err(dim_err!(
            "cubes differ: {}×{}×{}×{} vs {}×{}×{}×{}",
            x.width(),
            x.height(),
            x.frames(),
            x.channels(),
            r.width(),
            r.height(),
            r.frames(),
            r.channels()
        ));
    }
    Ok(())
}

/// PSNR in dB with peak 1 over the whole cube; `+∞` for identical inputs.
pub fn psnr(x: &VideoCube, reference: &VideoCube) -> Result<f64> {
    check_same(x, reference)?;
    let mse = mse(x.data(), reference.data());
    Ok(psnr_from_mse(mse))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    }
}

pub(crate) fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// Normalized 1-D Gaussian taps.
fn gaussian_taps() -> [f64; SSIM_WINDOW] {
    let half = (SSIM_WINDOW / 2) as f64;
    let mut g = [0.0; SSIM_WINDOW];
    for (i, v) in g.iter_mut().enumerate() {
        let d = i as f64 - half;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = g.iter().sum();
    g.map(|v| v / s)
}

/// Valid-mode separable filtering, output `(h−10)×(w−10)`.
fn filter_valid(img: &[f64], h: usize, w: usize, g: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut rows = vec![0.0; h * ow];
    for r in 0..h {
        for c in 0..ow {
            rows[r * ow + c] = (0..SSIM_WINDOW).map(|k| g[k] * img[r * w + c + k]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = (0..SSIM_WINDOW).map(|k| g[k] * rows[(r + k) * ow + c]).sum();
        }
    }
    out
}

/// Mean SSIM of two `h×w` frames over valid window positions.
pub fn ssim_frame(x: &[f64], y: &[f64], h: usize, w: usize) -> Result<f64> {
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(dim_err!("SSIM needs frames of at least {SSIM_WINDOW}×{SSIM_WINDOW}, got {w}×{h}"));
    }
    if x.len() != h * w || y.len() != h * w {
        return Err(dim_err!("SSIM frames must both hold {}×{} values", w, h));
    }
    let g = gaussian_taps();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let mx = filter_valid(x, h, w, &g);
    let my = filter_valid(y, h, w, &g);
    let sxx = filter_valid(&xx, h, w, &g);
    let syy = filter_valid(&yy, h, w, &g);
    let sxy = filter_valid(&xy, h, w, &g);
    let c1 = K1 * K1;
    let c2 = K2 * K2;
    let mut total = 0.0;
    for i in 0..mx.len() {
        let (a, b) = (mx[i], my[i]);
        let va = sxx[i] - a * a;
        let vb = syy[i] - b * b;
        let cov = sxy[i] - a * b;
        total += ((2.0 * a * b + c1) * (2.0 * cov + c2)) / ((a * a + b * b + c1) * (va + vb + c2));
    }
    Ok(total / mx.len() as f64)
}

/// SSIM averaged over frames and channels.
pub fn ssim(x: &VideoCube, reference: &VideoCube) -> Result<f64> {
    check_same(x, reference)?;
    let (h, w) = (x.height(), x.width());
    let mut total = 0.0;
    let planes = x.channels() * x.frames();
    for p in 0..planes {
        let a = &x.data()[p * h * w..(p + 1) * h * w];
        let b = &reference.data()[p * h * w..(p + 1) * h * w];
        total += ssim_frame(a, b, h, w)?;
    }
    Ok(total / planes as f64)
}
