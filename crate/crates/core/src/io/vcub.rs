//! `VCUB` container: named little-endian row-major tensors.
//!
//! ```text
//! "VCUB" | version u8 = 1 | count u16
//! per record: name_len u16 | name | dtype u8 (0 f32, 1 f64, 2 u8) | ndim u8 | dims u32… | payload
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Result, VcsError};
use crate::kernels::{DType, Real, Tensor};
use crate::sensing::{ColorSpace, MaskCube, Measurement, VideoCube};

pub const MAGIC: &[u8; 4] = b"VCUB";
pub const VERSION: u8 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum RecordData {
    F32(Vec<f32>),
    F64(Vec<f64>),
    U8(Vec<u8>),
}

impl RecordData {
    fn code(&self) -> u8 {
        match self {
            RecordData::F32(_) => 0,
            RecordData::F64(_) => 1,
            RecordData::U8(_) => 2,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            RecordData::F32(v) => v.len(),
            RecordData::F64(v) => v.len(),
            RecordData::U8(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Values widened to `f64`.
    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            RecordData::F32(v) => v.iter().map(|&x| f64::from(x)).collect(),
            RecordData::F64(v) => v.clone(),
            RecordData::U8(v) => v.iter().map(|&x| f64::from(x)).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: RecordData,
}

impl Record {
    pub fn new(name: impl Into<String>, dims: Vec<usize>, data: RecordData) -> Result<Self> {
        let name = name.into();
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(VcsError::InvalidArgument(format!(
                "record `{name}` has {} values but dims {dims:?} need {n}",
                data.len()
            )));
        }
        if name.len() > u16::MAX as usize || dims.len() > u8::MAX as usize {
            return Err(VcsError::InvalidArgument(format!("record `{name}` header does not fit")));
        }
        if dims.iter().any(|&d| d > u32::MAX as usize) {
            return Err(VcsError::InvalidArgument(format!("record `{name}` has a dimension above u32")));
        }
        Ok(Record { name, dims, data })
    }

    pub fn from_tensor<T: Real>(name: impl Into<String>, t: &Tensor<T>) -> Result<Self> {
        let data = match T::DTYPE {
            DType::F32 => RecordData::F32(t.data().iter().map(|v| v.as_f64() as f32).collect()),
            DType::F64 => RecordData::F64(t.data().iter().map(|v| v.as_f64()).collect()),
        };
        Record::new(name, t.shape().to_vec(), data)
    }

    pub fn to_tensor<T: Real>(&self) -> Result<Tensor<T>> {
        let data = match &self.data {
            RecordData::F32(v) => v.iter().map(|&x| T::from_f64_lossy(f64::from(x))).collect(),
            RecordData::F64(v) => v.iter().map(|&x| T::from_f64_lossy(x)).collect(),
            RecordData::U8(_) => {
                return Err(VcsError::InvalidArgument(format!("record `{}` is not floating point", self.name)))
            }
        };
        Tensor::from_vec(self.dims.clone(), data)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VcubFile {
    pub records: Vec<Record>,
}

fn format_err(path: &Path, reason: impl Into<String>) -> VcsError {
    VcsError::Format { path: path.to_path_buf(), reason: reason.into() }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| format_err(self.path, format!("truncated at byte {} (wanted {n} more)", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

impl VcubFile {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a record; names must be unique.
    pub fn push(&mut self, record: Record) -> Result<()> {
        if self.get(&record.name).is_some() {
            return Err(VcsError::InvalidArgument(format!("duplicate record name `{}`", record.name)));
        }
        if self.records.len() == u16::MAX as usize {
            return Err(VcsError::Capacity("a VCUB file holds at most 65535 records".into()));
        }
        self.records.push(record);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Record> {
        self.records.iter().find(|r| r.name == name)
    }

    pub fn require(&self, name: &str, path: &Path) -> Result<&Record> {
        self.get(name).ok_or_else(|| format_err(path, format!("missing record `{name}`")))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&(self.records.len() as u16).to_le_bytes());
        for r in &self.records {
            out.extend_from_slice(&(r.name.len() as u16).to_le_bytes());
            out.extend_from_slice(r.name.as_bytes());
            out.push(r.data.code());
            out.push(r.dims.len() as u8);
            for &d in &r.dims {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            match &r.data {
                RecordData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
                RecordData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
                RecordData::U8(v) => out.extend_from_slice(v),
            }
        }
        out
    }

    /// Parses `bytes`; `path` only labels errors.
    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut rd = Reader { bytes, pos: 0, path };
        if rd.take(4)? != MAGIC {
            return Err(format_err(path, "bad magic (not a VCUB file)"));
        }
        let version = rd.u8()?;
        if version != VERSION {
            return Err(format_err(path, format!("unsupported version {version}")));
        }
        let count = rd.u16()?;
        let mut file = VcubFile::new();
        for _ in 0..count {
            let len = rd.u16()? as usize;
            let name = std::str::from_utf8(rd.take(len)?)
                .map_err(|_| format_err(path, "record name is not UTF-8"))?
                .to_string();
            let code = rd.u8()?;
            let ndim = rd.u8()? as usize;
            let dims = (0..ndim).map(|_| rd.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let n = dims
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .ok_or_else(|| format_err(path, format!("record `{name}` is too large")))?;
            let size = match code {
                0 => 4,
                1 => 8,
                2 => 1,
                other => return Err(format_err(path, format!("record `{name}` has unknown dtype {other}"))),
            };
            let bytes_len =
                n.checked_mul(size).ok_or_else(|| format_err(path, format!("record `{name}` is too large")))?;
            let raw = rd.take(bytes_len)?;
            let data = match code {
                0 => {
                    RecordData::F32(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4"))).collect())
                }
                1 => {
                    RecordData::F64(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8"))).collect())
                }
                _ => RecordData::U8(raw.to_vec()),
            };
            file.push(Record { name, dims, data }).map_err(|e| format_err(path, e.to_string()))?;
        }
        if rd.pos != bytes.len() {
            return Err(format_err(path, format!("{} trailing bytes", bytes.len() - rd.pos)));
        }
        Ok(file)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| VcsError::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), &self.to_bytes())
    }
}

/// Writes `bytes` to a sibling temporary file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let file_name =
        path.file_name().ok_or_else(|| VcsError::InvalidArgument(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp: PathBuf = dir.join(tmp_name);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(VcsError::io(path, e));
    }
    Ok(())
}

/// `[c][t][row][col]` cube data to the on-disk `[W, H, T(, 3)]` order.
fn planes_to_disk(data: &[f64], w: usize, h: usize, t: usize, c: usize) -> Vec<f64> {
    let mut out = vec![0.0; data.len()];
    for ch in 0..c {
        for f in 0..t {
            for y in 0..h {
                for x in 0..w {
                    out[((x * h + y) * t + f) * c + ch] = data[((ch * t + f) * h + y) * w + x];
                }
            }
        }
    }
    out
}

fn disk_to_planes(data: &[f64], w: usize, h: usize, t: usize, c: usize) -> Vec<f64> {
    let mut out = vec![0.0; data.len()];
    for ch in 0..c {
        for f in 0..t {
            for y in 0..h {
                for x in 0..w {
                    out[((ch * t + f) * h + y) * w + x] = data[((x * h + y) * t + f) * c + ch];
                }
            }
        }
    }
    out
}

pub fn mask_record(name: &str, m: &MaskCube) -> Result<Record> {
    let (w, h, t) = (m.width(), m.height(), m.frames());
    Record::new(name, vec![w, h, t], RecordData::F64(planes_to_disk(m.data(), w, h, t, 1)))
}

pub fn mask_from_record(r: &Record, path: &Path) -> Result<MaskCube> {
    let [w, h, t] = r.dims[..] else {
        return Err(format_err(path, format!("mask record `{}` must be [W, H, T], got {:?}", r.name, r.dims)));
    };
    MaskCube::infer(w, h, t, disk_to_planes(&r.data.to_f64(), w, h, t, 1)).map_err(|e| format_err(path, e.to_string()))
}

pub fn video_record(name: &str, x: &VideoCube) -> Result<Record> {
    let (w, h, t, c) = (x.width(), x.height(), x.frames(), x.channels());
    let dims = match x.colorspace() {
        ColorSpace::Gray => vec![w, h, t],
        ColorSpace::Rgb => vec![w, h, t, 3],
    };
    Record::new(name, dims, RecordData::F64(planes_to_disk(x.data(), w, h, t, c)))
}

pub fn video_from_record(r: &Record, path: &Path) -> Result<VideoCube> {
    let (w, h, t, cs) = match r.dims[..] {
        [w, h, t] => (w, h, t, ColorSpace::Gray),
        [w, h, t, 3] => (w, h, t, ColorSpace::Rgb),
        _ => {
            return Err(format_err(
                path,
                format!("video record `{}` must be [W, H, T] or [W, H, T, 3], got {:?}", r.name, r.dims),
            ))
        }
    };
    VideoCube::new(w, h, t, cs, disk_to_planes(&r.data.to_f64(), w, h, t, cs.channels()))
        .map_err(|e| format_err(path, e.to_string()))
}

pub fn measurement_record(name: &str, y: &Measurement) -> Result<Record> {
    let (w, h) = (y.width(), y.height());
    Record::new(name, vec![w, h], RecordData::F64(planes_to_disk(y.data(), w, h, 1, 1)))
}

pub fn measurement_from_record(r: &Record, noise_sigma: f64, path: &Path) -> Result<Measurement> {
    let [w, h] = r.dims[..] else {
        return Err(format_err(path, format!("measurement record `{}` must be [W, H], got {:?}", r.name, r.dims)));
    };
    Measurement::new(w, h, noise_sigma, disk_to_planes(&r.data.to_f64(), w, h, 1, 1))
        .map_err(|e| format_err(path, e.to_string()))
}

pub fn save_mask(path: impl AsRef<Path>, m: &MaskCube) -> Result<()> {
    let mut f = VcubFile::new();
    f.push(mask_record("mask", m)?)?;
    f.write(path)
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<MaskCube> {
    let path = path.as_ref();
    let f = VcubFile::read(path)?;
    mask_from_record(f.require("mask", path)?, path)
}

/// Writes a video under record name `name` (`"video"` for scenes, `"x"` for reconstructions).
pub fn save_video(path: impl AsRef<Path>, name: &str, x: &VideoCube) -> Result<()> {
    let mut f = VcubFile::new();
    f.push(video_record(name, x)?)?;
    f.write(path)
}

/// Reads record `"video"`, falling back to `"x"`.
pub fn load_video(path: impl AsRef<Path>) -> Result<VideoCube> {
    let path = path.as_ref();
    let f = VcubFile::read(path)?;
    let r = f.get("video").or_else(|| f.get("x")).ok_or_else(|| format_err(path, "missing record `video` (or `x`)"))?;
    video_from_record(r, path)
}

pub fn save_measurement(path: impl AsRef<Path>, y: &Measurement) -> Result<()> {
    let mut f = VcubFile::new();
    f.push(measurement_record("y", y)?)?;
    f.push(Record::new("noise_sigma", vec![1], RecordData::F64(vec![y.noise_sigma()]))?)?;
    f.write(path)
}

pub fn load_measurement(path: impl AsRef<Path>) -> Result<Measurement> {
    let path = path.as_ref();
    let f = VcubFile::read(path)?;
    let sigma = f.get("noise_sigma").and_then(|r| r.data.to_f64().first().copied()).unwrap_or(0.0);
    measurement_from_record(f.require("y", path)?, sigma, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::{generate_masks, MaskKind};

    #[test]
    fn bytes_roundtrip_is_bitwise() {
        let mut f = VcubFile::new();
        f.push(
            Record::new("a", vec![2, 3], RecordData::F32(vec![1.5, -0.0, f32::MIN_POSITIVE, 3.0, 1e-30, 7.0])).unwrap(),
        )
        .unwrap();
        f.push(Record::new("b", vec![2], RecordData::F64(vec![std::f64::consts::PI, -1e300])).unwrap()).unwrap();
        f.push(Record::new("c", vec![3], RecordData::U8(b"abc".to_vec())).unwrap()).unwrap();
        let bytes = f.to_bytes();
        assert_eq!(&bytes[..5], b"VCUB\x01");
        let g = VcubFile::from_bytes(&bytes, Path::new("mem")).unwrap();
        assert_eq!(g.to_bytes(), bytes);
    }

    #[test]
    fn header_layout() {
        let mut f = VcubFile::new();
        f.push(Record::new("y", vec![1, 2], RecordData::U8(vec![9, 8])).unwrap()).unwrap();
        assert_eq!(f.to_bytes(), vec![b'V', b'C', b'U', b'B', 1, 1, 0, 1, 0, b'y', 2, 2, 1, 0, 0, 0, 2, 0, 0, 0, 9, 8]);
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let p = Path::new("mem");
        assert!(VcubFile::from_bytes(b"NOPE\x01\x00\x00", p).is_err());
        assert!(VcubFile::from_bytes(b"VCUB\x02\x00\x00", p).is_err());
        let mut f = VcubFile::new();
        f.push(Record::new("y", vec![4], RecordData::F64(vec![0.0; 4])).unwrap()).unwrap();
        let bytes = f.to_bytes();
        assert!(VcubFile::from_bytes(&bytes[..bytes.len() - 1], p).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(VcubFile::from_bytes(&extra, p).is_err());
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut f = VcubFile::new();
        f.push(Record::new("a", vec![1], RecordData::U8(vec![0])).unwrap()).unwrap();
        assert!(f.push(Record::new("a", vec![1], RecordData::U8(vec![0])).unwrap()).is_err());
    }

    #[test]
    fn cube_layout_is_width_major() {
        let m = generate_masks(3, 2, 2, 1, MaskKind::Continuous).unwrap();
        let r = mask_record("mask", &m).unwrap();
        assert_eq!(r.dims, vec![3, 2, 2]);
        let disk = r.data.to_f64();
        // disk index (x·H + y)·T + t
        let (x, y, t) = (2, 1, 1);
        assert_eq!(disk[(x * 2 + y) * 2 + t], m.frame(t)[y * 3 + x]);
        assert_eq!(mask_from_record(&r, Path::new("mem")).unwrap(), m);
    }
}
