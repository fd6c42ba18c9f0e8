//! Writes cubes to a VCUB container, reads them back, and exports frames as PGM/PPM.

use snapvcs::io::{export_pgm_ppm, mask_record, video_from_record, video_record, VcubFile};
use snapvcs::sensing::{generate_masks, ColorSpace, MaskKind};
use snapvcs::training::{synth_scenes, SceneSpec};

fn main() -> snapvcs::Result<()> {
    let dir = std::env::temp_dir().join("snapvcs-vcub-example");
    let spec = SceneSpec { width: 24, height: 16, frames: 3, colorspace: ColorSpace::Rgb };
    let x = synth_scenes(spec, 1, 5)?.remove(0);
    let m = generate_masks(24, 16, 3, 5, MaskKind::Continuous)?;

    let mut f = VcubFile::new();
    f.push(video_record("video", &x)?)?;
    f.push(mask_record("mask", &m)?)?;
    let path = dir.join("bundle.vcub");
    std::fs::create_dir_all(&dir).map_err(|e| snapvcs::VcsError::Io { path: dir.clone(), source: e })?;
    f.write(&path)?;

    let back = VcubFile::read(&path)?;
    for r in &back.records {
        println!("{:<6} dims {:?}", r.name, r.dims);
    }
    let x2 = video_from_record(back.require("video", &path)?, &path)?;
    println!("video roundtrip exact: {}", x2 == x);
    for p in export_pgm_ppm(&x2, &dir, "frame")? {
        println!("{}", p.display());
    }
    Ok(())
}
