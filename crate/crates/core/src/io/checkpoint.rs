use std::path::Path;

use crate::error::{Result, VcsError};
use crate::kernels::Real;
use crate::unfold_net::{ArchConfig, UnfoldModel};

use super::vcub::{Record, RecordData, VcubFile};

/// Record holding the architecture as UTF-8 JSON.
pub const ARCH_RECORD: &str = "arch";

pub fn checkpoint_file<T: Real>(model: &UnfoldModel<T>) -> Result<VcubFile> {
    let mut f = VcubFile::new();
    let arch = serde_json::to_vec(&model.arch).map_err(|e| VcsError::Config(e.to_string()))?;
    f.push(Record::new(ARCH_RECORD, vec![arch.len()], RecordData::U8(arch))?)?;
    for (name, t) in model.named_params() {
        f.push(Record::from_tensor(name, t)?)?;
    }
    Ok(f)
}

pub fn save_checkpoint<T: Real>(path: impl AsRef<Path>, model: &UnfoldModel<T>) -> Result<()> {
    checkpoint_file(model)?.write(path)
}

/// Loads a checkpoint, converting stored parameters to `T`.
pub fn load_checkpoint<T: Real>(path: impl AsRef<Path>) -> Result<UnfoldModel<T>> {
    let path = path.as_ref();
    model_from_file(&VcubFile::read(path)?, path)
}

pub fn model_from_file<T: Real>(f: &VcubFile, path: &Path) -> Result<UnfoldModel<T>> {
    let bad = |reason: String| VcsError::Format { path: path.to_path_buf(), reason };
    let RecordData::U8(json) = &f.require(ARCH_RECORD, path)?.data else {
        return Err(bad("`arch` record must be u8 JSON".into()));
    };
    let arch: ArchConfig = serde_json::from_slice(json).map_err(|e| bad(format!("arch header: {e}")))?;
    let mut model = UnfoldModel::<T>::new(arch, 0).map_err(|e| bad(e.to_string()))?;
    let names: Vec<String> = model.named_params().into_iter().map(|(n, _)| n).collect();
    let params: Vec<_> = model.stages.iter_mut().flat_map(|s| s.params_mut()).collect();
    for (name, slot) in names.iter().zip(params) {
        let t = f.require(name, path)?.to_tensor::<T>()?;
        if t.shape() != slot.shape() {
            return Err(bad(format!("`{name}` has shape {:?}, architecture needs {:?}", t.shape(), slot.shape())));
        }
        *slot = t;
    }
    if f.records.len() != names.len() + 1 {
        return Err(bad(format!("{} records, expected {}", f.records.len(), names.len() + 1)));
    }
    Ok(model)
}
