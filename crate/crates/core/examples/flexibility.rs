//! Mask and scale flexibility of a trained model: unseen masks, larger frames, tiled inference.
//!
//! `cargo run --release --example flexibility -- model.vcub`
//! (trains a small model first when no checkpoint is given)

use snapvcs::io::load_checkpoint;
use snapvcs::metrics::{eval_flexibility_masks, eval_flexibility_scale, tiled_reconstruct, Method};
use snapvcs::sensing::{forward_measure, generate_masks, ColorSpace, MaskKind};
use snapvcs::training::{synth_scenes, train, SceneSpec, TrainConfig};
use snapvcs::unfold_net::{ArchConfig, UnfoldModel};

fn main() -> snapvcs::Result<()> {
    let model: UnfoldModel<f32> = match std::env::args().nth(1) {
        Some(path) => load_checkpoint(path)?,
        None => {
            let cfg = TrainConfig { epochs_per_phase: [3, 3, 2], samples: 64, lr0: 1e-3, ..TrainConfig::default() };
            let mut m = UnfoldModel::new(ArchConfig { channels: 8, blocks: 2, ..ArchConfig::default() }, 0)?;
            train(&mut m, &cfg, &mut ())?;
            m
        }
    };
    let method = Method::Unfold(&model);

    let spec = SceneSpec { width: 32, height: 32, frames: 4, colorspace: ColorSpace::Gray };
    let scenes = synth_scenes(spec, 8, 77)?;
    let trained = generate_masks(32, 32, 4, 1, MaskKind::Binary)?;
    print!("{}", eval_flexibility_masks(&method, &scenes, &trained, 3, 500)?.to_table());

    let big = synth_scenes(SceneSpec { width: 64, height: 64, ..spec }, 4, 78)?;
    let m64 = generate_masks(64, 64, 4, 2, MaskKind::Binary)?;
    print!("{}", eval_flexibility_scale(&method, &big, &m64)?.to_table());

    let y = forward_measure(&big[0], &m64, 0.0, 0)?;
    let full = method.reconstruct(&y, &m64, ColorSpace::Gray)?;
    let tiled = tiled_reconstruct(&method, &y, &m64, ColorSpace::Gray, (2, 2))?;
    let gap = full.data().iter().zip(tiled.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("2×2 tiled vs whole-frame inference: max difference {gap:.3e}");
    Ok(())
}
