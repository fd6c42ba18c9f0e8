//! Phased training of a small grayscale unfolding model, then a checkpoint roundtrip.
//!
//! `cargo run --release --example train_unfolding -- [epochs_per_phase] [out.vcub]`

use snapvcs::io::{load_checkpoint, save_checkpoint};
use snapvcs::metrics::{evaluate, Method};
use snapvcs::sensing::{generate_masks, ColorSpace};
use snapvcs::training::{synth_scenes, train, EpochRecord, SceneSpec, TrainConfig, TrainObserver};
use snapvcs::unfold_net::{ArchConfig, Mode, UnfoldModel};

struct Progress;

impl TrainObserver<f32> for Progress {
    fn epoch_end(&mut self, r: &EpochRecord) -> snapvcs::Result<()> {
        println!("epoch {:>2}  phase {}  lr {:.1e}  loss {:.5}", r.epoch, r.phase, r.lr, r.loss);
        Ok(())
    }
}

fn main() -> snapvcs::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs: usize = args.next().map_or(Ok(3), |s| s.parse()).expect("epochs_per_phase");
    let out = args.next().unwrap_or_else(|| std::env::temp_dir().join("unfold.vcub").display().to_string());

    let cfg = TrainConfig { epochs_per_phase: [epochs; 3], samples: 64, lr0: 1e-3, ..TrainConfig::default() };
    let arch = ArchConfig { channels: 8, blocks: 2, mode: Mode::Gray, ..ArchConfig::default() };
    let mut model = UnfoldModel::<f32>::new(arch, 0)?;
    println!("{} parameters", model.num_params());
    train(&mut model, &cfg, &mut Progress)?;

    save_checkpoint(&out, &model)?;
    let model: UnfoldModel<f32> = load_checkpoint(&out)?;
    println!("checkpoint {out}");

    let spec = SceneSpec { width: cfg.width, height: cfg.height, frames: cfg.frames, colorspace: ColorSpace::Gray };
    let held = synth_scenes(spec, 8, 1234)?;
    let m = generate_masks(cfg.width, cfg.height, cfg.frames, cfg.mask_seed, cfg.mask_kind)?;
    let mut report = evaluate(&Method::Unfold(&model), &held, &m, "unfolding", 0.0, 0)?;
    report.merge(evaluate(&Method::<f32>::Rmf, &held, &m, "reference-frames", 0.0, 0)?);
    print!("{}", report.to_table());
    Ok(())
}
