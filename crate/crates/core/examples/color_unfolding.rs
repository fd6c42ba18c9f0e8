//! Bayer snapshot reconstruction with a colour unfolding model.

use snapvcs::metrics::{mosaic_rmf_baseline, psnr};
use snapvcs::sensing::{forward_measure_color, generate_masks, ColorSpace};
use snapvcs::training::{synth_scenes, train, SceneSpec, TrainConfig};
use snapvcs::unfold_net::{reconstruct_color, ArchConfig, Mode, UnfoldModel};

fn main() -> snapvcs::Result<()> {
    let cfg = TrainConfig {
        epochs_per_phase: [3, 3, 2],
        samples: 64,
        lr0: 1e-3,
        mode: Mode::Color,
        ..TrainConfig::default()
    };
    let arch = ArchConfig { channels: 8, blocks: 2, mode: Mode::Color, ..ArchConfig::default() };
    let mut model = UnfoldModel::<f32>::new(arch, 0)?;
    train(&mut model, &cfg, &mut ())?;

    let spec = SceneSpec { width: 32, height: 32, frames: 4, colorspace: ColorSpace::Rgb };
    let m = generate_masks(32, 32, 4, cfg.mask_seed, cfg.mask_kind)?;
    for (i, x) in synth_scenes(spec, 4, 99)?.iter().enumerate() {
        let y = forward_measure_color(x, &m, 0.0, 0)?;
        let r = reconstruct_color(&model, &y, &m)?;
        println!(
            "scene {i}: demosaicked reference {:.2} dB, stage 1 {:.2} dB, stage 2 {:.2} dB",
            psnr(&mosaic_rmf_baseline(&y, &m)?, x)?,
            psnr(&r.stages[0].clipped(), x)?,
            psnr(&r.output, x)?
        );
    }
    Ok(())
}
