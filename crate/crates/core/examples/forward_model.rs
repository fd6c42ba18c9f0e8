//! Simulates a grayscale and a Bayer snapshot and prints reference-frame quality.

use snapvcs::metrics::{mosaic_rmf_baseline, psnr, rmf_baseline};
use snapvcs::sensing::{
    forward_measure, forward_measure_color, generate_masks, reference_frames, ColorSpace, MaskKind,
};
use snapvcs::training::{synth_scenes, SceneSpec};

fn main() -> snapvcs::Result<()> {
    let (w, h, t) = (32, 32, 8);
    let m = generate_masks(w, h, t, 7, MaskKind::Binary)?;
    let cov = m.coverage();
    let unsensed = cov.iter().filter(|&&c| c <= 1e-6).count();
    println!(
        "masks {w}×{h}×{t}, mean coverage {:.2}, unsensed pixels {unsensed}",
        cov.iter().sum::<f64>() / cov.len() as f64
    );

    let gray = SceneSpec { width: w, height: h, frames: t, colorspace: ColorSpace::Gray };
    let x = synth_scenes(gray, 1, 3)?.remove(0);
    let y = forward_measure(&x, &m, 0.01, 42)?;
    let refs = reference_frames(&y, &m)?;
    let peak = y.data().iter().copied().fold(0.0, f64::max);
    println!(
        "snapshot peak {peak:.3}; normalized snapshot peak {:.3}",
        refs.normalized.iter().copied().fold(0.0, f64::max)
    );
    println!("gray reference frames: {:.2} dB", psnr(&rmf_baseline(&y, &m)?, &x)?);

    let rgb = SceneSpec { colorspace: ColorSpace::Rgb, ..gray };
    let xc = synth_scenes(rgb, 1, 3)?.remove(0);
    let yc = forward_measure_color(&xc, &m, 0.0, 0)?;
    println!("bayer reference frames, 2×2 demosaic: {:.2} dB", psnr(&mosaic_rmf_baseline(&yc, &m)?, &xc)?);
    Ok(())
}
