//! GAP-TV against the reference-frame baseline on moving synthetic scenes.
//!
//! `cargo run --release --example gap_tv_baseline -- [iters] [tv_weight]`

use snapvcs::gap_tv::{GapTvConfig, TvMode};
use snapvcs::metrics::{evaluate, Method};
use snapvcs::sensing::{generate_masks, ColorSpace, MaskKind};
use snapvcs::training::{synth_scenes, SceneSpec};

fn main() -> snapvcs::Result<()> {
    let mut args = std::env::args().skip(1);
    let iters = args.next().map_or(Ok(60), |s| s.parse()).expect("iters");
    let tv_weight = args.next().map_or(Ok(0.07), |s| s.parse()).expect("tv_weight");

    let spec = SceneSpec { width: 48, height: 48, frames: 8, colorspace: ColorSpace::Gray };
    let scenes = synth_scenes(spec, 6, 11)?;
    let m = generate_masks(48, 48, 8, 1, MaskKind::Binary)?;

    let mut report = evaluate(&Method::<f32>::Rmf, &scenes, &m, "reference-frames", 0.0, 0)?;
    for (mode, label) in [(TvMode::Anisotropic, "gap-tv-anisotropic"), (TvMode::Isotropic, "gap-tv-isotropic")] {
        let cfg = GapTvConfig { iters, tv_weight, tv_mode: mode, ..GapTvConfig::default() };
        report.merge(evaluate(&Method::<f32>::GapTv(&cfg), &scenes, &m, label, 0.0, 0)?);
        report.merge(evaluate(&Method::<f32>::GapTv(&cfg), &scenes, &m, &format!("{label}-noisy"), 0.02, 5)?);
    }
    print!("{}", report.to_table());
    Ok(())
}
