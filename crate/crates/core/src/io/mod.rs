//! File formats: the `VCUB` tensor container, checkpoints, JSON run configuration,
//! and PGM/PPM frame export.

mod checkpoint;
mod config;
mod image;
mod vcub;

pub use checkpoint::{checkpoint_file, load_checkpoint, model_from_file, save_checkpoint, ARCH_RECORD};
pub use config::RunConfig;
pub use image::{export_pgm_ppm, import_pgm_ppm, quantize};
pub use vcub::{
    load_mask, load_measurement, load_video, mask_from_record, mask_record, measurement_from_record,
    measurement_record, save_mask, save_measurement, save_video, video_from_record, video_record, write_atomic, Record,
    RecordData, VcubFile, MAGIC, VERSION,
};
