//! Binary PGM (P5) / PPM (P6) frame export and import.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Result, VcsError};
use crate::sensing::{ColorSpace, VideoCube};

use super::vcub::write_atomic;

/// `round(255·clip(v, 0, 1))`, halves rounded up.
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

/// Writes `<prefix>_<t>.pgm` (gray) or `.ppm` (RGB) for every frame; returns the paths.
pub fn export_pgm_ppm(x: &VideoCube, dir: impl AsRef<Path>, prefix: &str) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| VcsError::io(dir, e))?;
    let (w, h) = (x.width(), x.height());
    let mut paths = Vec::with_capacity(x.frames());
    for t in 0..x.frames() {
        let (magic, ext) = match x.colorspace() {
            ColorSpace::Gray => ("P5", "pgm"),
            ColorSpace::Rgb => ("P6", "ppm"),
        };
        let mut bytes = format!("{magic}\n{w} {h}\n255\n").into_bytes();
        for i in 0..w * h {
            for c in 0..x.channels() {
                bytes.push(quantize(x.frame(c, t)[i]));
            }
        }
        let path = dir.join(format!("{prefix}_{t:03}.{ext}"));
        write_atomic(&path, &bytes)?;
        paths.push(path);
    }
    Ok(paths)
}

fn parse_header(bytes: &[u8], path: &Path) -> Result<(String, usize, usize, usize, usize)> {
    let bad = |reason: &str| VcsError::Format { path: path.to_path_buf(), reason: reason.into() };
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad("non-numeric header field"));
    let (w, h, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
    if maxval != 255 {
        return Err(bad("only 8-bit maxval 255 is supported"));
    }
    Ok((fields[0].clone(), w, h, maxval, pos))
}

/// Reads P5/P6 frames (all the same kind and size) into a cube with values `byte / 255`.
pub fn import_pgm_ppm(paths: &[PathBuf]) -> Result<VideoCube> {
    let first = paths.first().ok_or_else(|| VcsError::InvalidArgument("no frames to import".into()))?;
    let mut frames: Vec<Vec<u8>> = Vec::with_capacity(paths.len());
    let mut shape = None;
    for path in paths {
        let bytes = fs::read(path).map_err(|e| VcsError::io(path, e))?;
        let (magic, w, h, _, start) = parse_header(&bytes, path)?;
        let channels = match magic.as_str() {
            "P5" => 1,
            "P6" => 3,
            _ => return Err(VcsError::Format { path: path.clone(), reason: format!("unsupported magic {magic}") }),
        };
        if shape.is_some_and(|s| s != (w, h, channels)) {
            return Err(VcsError::Format {
                path: path.clone(),
                reason: format!("frame size differs from {}", first.display()),
            });
        }
        shape = Some((w, h, channels));
        let payload = bytes
            .get(start..start + w * h * channels)
            .ok_or_else(|| VcsError::Format { path: path.clone(), reason: "truncated pixel data".into() })?;
        frames.push(payload.to_vec());
    }
    let (w, h, channels) = shape.expect("at least one frame");
    let t = frames.len();
    let mut data = vec![0.0; channels * t * w * h];
    for (f, px) in frames.iter().enumerate() {
        for i in 0..w * h {
            for c in 0..channels {
                data[(c * t + f) * w * h + i] = f64::from(px[i * channels + c]) / 255.0;
            }
        }
    }
    let cs = if channels == 1 { ColorSpace::Gray } else { ColorSpace::Rgb };
    VideoCube::new(w, h, t, cs, data)
}
