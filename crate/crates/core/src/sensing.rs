//! Mask generation, snapshot measurement (grayscale and Bayer RGGB), the normalized
//! measurement, and the reference measurement frames.
//!
//! Cubes are stored frame-major: `data[(c·T + t)·H·W + row·W + col]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Result, VcsError};
use crate::kernels::Real;

/// Pixels whose summed mask is at or below this are treated as never sensed.
pub const COVERAGE_EPS: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskKind {
    Binary,
    Continuous,
}

impl std::str::FromStr for MaskKind {
    type Err = VcsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(MaskKind::Binary),
            "continuous" => Ok(MaskKind::Continuous),
            other => {
                Err(VcsError::InvalidArgument(format!("unknown mask kind `{other}` (expected binary or continuous)")))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorSpace {
    Gray,
    Rgb,
}

impl ColorSpace {
    pub fn channels(self) -> usize {
        match self {
            ColorSpace::Gray => 1,
            ColorSpace::Rgb => 3,
        }
    }
}

/// Per-frame modulation patterns, values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskCube {
    width: usize,
    height: usize,
    frames: usize,
    kind: MaskKind,
    data: Vec<f64>,
}

impl MaskCube {
    pub fn new(width: usize, height: usize, frames: usize, kind: MaskKind, data: Vec<f64>) -> Result<Self> {
        check_dims(width, height, frames)?;
        if data.len() != width * height * frames {
            return Err(dim_err!(
                "mask data has {} values, {}×{}×{} needs {}",
                data.len(),
                width,
                height,
                frames,
                width * height * frames
            ));
        }
        let valid = match kind {
            MaskKind::Binary => data.iter().all(|&v| v == 0.0 || v == 1.0),
            MaskKind::Continuous => data.iter().all(|&v| (0.0..=1.0).contains(&v)),
        };
        if !valid {
            return Err(VcsError::InvalidArgument(format!("mask values violate the {kind:?} range")));
        }
        Ok(MaskCube { width, height, frames, kind, data })
    }

    /// Builds a mask, classifying it as binary when every value is 0 or 1.
    pub fn infer(width: usize, height: usize, frames: usize, data: Vec<f64>) -> Result<Self> {
        let kind = if data.iter().all(|&v| v == 0.0 || v == 1.0) { MaskKind::Binary } else { MaskKind::Continuous };
        Self::new(width, height, frames, kind, data)
    }

    pub fn constant(width: usize, height: usize, frames: usize, value: f64) -> Result<Self> {
        Self::infer(width, height, frames, vec![value; width * height * frames])
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn frames(&self) -> usize {
        self.frames
    }
    pub fn kind(&self) -> MaskKind {
        self.kind
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn pixels(&self) -> usize {
        self.width * self.height
    }
    pub fn frame(&self, t: usize) -> &[f64] {
        let p = self.pixels();
        &self.data[t * p..(t + 1) * p]
    }

    /// `M' = Σ_t M(:,:,t)`.
    pub fn coverage(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.pixels()];
        for t in 0..self.frames {
            for (o, &m) in out.iter_mut().zip(self.frame(t)) {
                *o += m;
            }
        }
        out
    }

    /// Rectangular spatial crop, all frames.
    pub fn crop(&self, row0: usize, col0: usize, height: usize, width: usize) -> Result<MaskCube> {
        let data = crop_planes(&self.data, self.frames, self.height, self.width, row0, col0, height, width)?;
        MaskCube::new(width, height, self.frames, self.kind, data)
    }
}

/// Video frames: `W×H×T` grayscale or `W×H×T×3` colour.
///
/// Ground truth and final reconstructions lie in `[0, 1]`; intermediate estimates
/// (projections, reference frames under noise) may leave that range.
#[derive(Clone, Debug, PartialEq)]
pub struct VideoCube {
    width: usize,
    height: usize,
    frames: usize,
    colorspace: ColorSpace,
    data: Vec<f64>,
}

impl VideoCube {
    pub fn new(width: usize, height: usize, frames: usize, colorspace: ColorSpace, data: Vec<f64>) -> Result<Self> {
        check_dims(width, height, frames)?;
        let n = width * height * frames * colorspace.channels();
        if data.len() != n {
            return Err(dim_err!(
                "video data has {} values, {}×{}×{}×{} needs {n}",
                data.len(),
                width,
                height,
                frames,
                colorspace.channels()
            ));
        }
        Ok(VideoCube { width, height, frames, colorspace, data })
    }

    pub fn zeros(width: usize, height: usize, frames: usize, colorspace: ColorSpace) -> Result<Self> {
        Self::new(width, height, frames, colorspace, vec![0.0; width * height * frames * colorspace.channels()])
    }

    /// A scene holding the same image in every frame.
    pub fn static_scene(width: usize, height: usize, frames: usize, image: &[f64]) -> Result<Self> {
        if image.len() != width * height {
            return Err(dim_err!("static image has {} pixels, expected {}", image.len(), width * height));
        }
        let data = image.iter().copied().cycle().take(width * height * frames).collect();
        Self::new(width, height, frames, ColorSpace::Gray, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn frames(&self) -> usize {
        self.frames
    }
    pub fn colorspace(&self) -> ColorSpace {
        self.colorspace
    }
    pub fn channels(&self) -> usize {
        self.colorspace.channels()
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
    pub fn into_data(self) -> Vec<f64> {
        self.data
    }
    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    /// Frame `t` of channel `c`.
    pub fn frame(&self, c: usize, t: usize) -> &[f64] {
        let p = self.pixels();
        let i = c * self.frames + t;
        &self.data[i * p..(i + 1) * p]
    }

    pub fn frame_mut(&mut self, c: usize, t: usize) -> &mut [f64] {
        let p = self.pixels();
        let i = c * self.frames + t;
        &mut self.data[i * p..(i + 1) * p]
    }

    pub fn same_dims(&self, other: &VideoCube) -> bool {
        (self.width, self.height, self.frames, self.colorspace)
            == (other.width, other.height, other.frames, other.colorspace)
    }

    pub fn is_in_unit_range(&self) -> bool {
        self.data.iter().all(|&v| (0.0..=1.0).contains(&v))
    }

    pub fn clipped(&self) -> VideoCube {
        VideoCube { data: self.data.iter().map(|v| v.clamp(0.0, 1.0)).collect(), ..self.clone() }
    }

    pub fn crop(&self, row0: usize, col0: usize, height: usize, width: usize) -> Result<VideoCube> {
        let data =
            crop_planes(&self.data, self.frames * self.channels(), self.height, self.width, row0, col0, height, width)?;
        VideoCube::new(width, height, self.frames, self.colorspace, data)
    }

    /// Writes `tile` into this cube with its top-left corner at `(row0, col0)`.
    pub fn paste(&mut self, tile: &VideoCube, row0: usize, col0: usize) -> Result<()> {
        if tile.frames != self.frames
            || tile.colorspace != self.colorspace
            || row0 + tile.height > self.height
            || col0 + tile.width > self.width
        {
            return Err(dim_err!(
                "tile {}×{} at ({row0},{col0}) does not fit {}×{}",
                tile.width,
                tile.height,
                self.width,
                self.height
            ));
        }
        let (w, tw) = (self.width, tile.width);
        for plane in 0..self.frames * self.channels() {
            for r in 0..tile.height {
                let dst = plane * self.pixels() + (row0 + r) * w + col0;
                let src = plane * tile.pixels() + r * tw;
                self.data[dst..dst + tw].copy_from_slice(&tile.data[src..src + tw]);
            }
        }
        Ok(())
    }

    /// Network layout `[1, channels, T, H, W]`.
    pub fn to_tensor<T: Real>(&self) -> crate::kernels::Tensor<T> {
        crate::kernels::Tensor::from_vec(
            vec![1, self.channels(), self.frames, self.height, self.width],
            self.data.iter().map(|&v| T::from_f64_lossy(v)).collect(),
        )
        .expect("cube dims are non-zero")
    }

    /// Inverse of [`VideoCube::to_tensor`] for a unit-batch tensor.
    pub fn from_tensor<T: Real>(t: &crate::kernels::Tensor<T>) -> Result<VideoCube> {
        let [b, c, frames, h, w] = t.dims5()?;
        let colorspace = match (b, c) {
            (1, 1) => ColorSpace::Gray,
            (1, 3) => ColorSpace::Rgb,
            _ => return Err(dim_err!("cannot view tensor {:?} as a video cube", t.shape())),
        };
        VideoCube::new(w, h, frames, colorspace, t.data().iter().map(|v| v.as_f64()).collect())
    }
}

/// Snapshot `Y`, range `[0, T]` in the noiseless case.
#[derive(Clone, Debug, PartialEq)]
pub struct Measurement {
    width: usize,
    height: usize,
    noise_sigma: f64,
    data: Vec<f64>,
}

impl Measurement {
    pub fn new(width: usize, height: usize, noise_sigma: f64, data: Vec<f64>) -> Result<Self> {
        check_dims(width, height, 1)?;
        if data.len() != width * height {
            return Err(dim_err!(
                "measurement has {} values, {}×{} needs {}",
                data.len(),
                width,
                height,
                width * height
            ));
        }
        if !(noise_sigma >= 0.0) {
            return Err(VcsError::InvalidArgument(format!("noise sigma {noise_sigma} must be ≥ 0")));
        }
        Ok(Measurement { width, height, noise_sigma, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn crop(&self, row0: usize, col0: usize, height: usize, width: usize) -> Result<Measurement> {
        let data = crop_planes(&self.data, 1, self.height, self.width, row0, col0, height, width)?;
        Measurement::new(width, height, self.noise_sigma, data)
    }
}

/// Normalized measurement `Ȳ` and the reference frames `Ȳ ⊙ M(:,:,t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RefFrames {
    pub normalized: Vec<f64>,
    pub rmf: VideoCube,
}

fn check_dims(width: usize, height: usize, frames: usize) -> Result<()> {
    if width == 0 || height == 0 || frames == 0 {
        return Err(dim_err!("dimensions must be ≥ 1, got {width}×{height}×{frames}"));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn crop_planes(
    data: &[f64],
    planes: usize,
    height: usize,
    width: usize,
    row0: usize,
    col0: usize,
    h: usize,
    w: usize,
) -> Result<Vec<f64>> {
    if h == 0 || w == 0 || row0 + h > height || col0 + w > width {
        return Err(dim_err!("crop {w}×{h} at ({row0},{col0}) exceeds {width}×{height}"));
    }
    let mut out = Vec::with_capacity(planes * h * w);
    for p in 0..planes {
        for r in row0..row0 + h {
            let base = p * height * width + r * width;
            out.extend_from_slice(&data[base + col0..base + col0 + w]);
        }
    }
    Ok(out)
}

pub(crate) fn check_mask_dims(
    what: &str,
    width: usize,
    height: usize,
    frames: Option<usize>,
    m: &MaskCube,
) -> Result<()> {
    let frames_ok = frames.is_none_or(|t| t == m.frames);
    if width != m.width || height != m.height || !frames_ok {
        return Err(dim_err!(
            "{what} is {width}×{height}{} but mask is {}×{}×{}",
            frames.map(|t| format!("×{t}")).unwrap_or_default(),
            m.width,
            m.height,
            m.frames
        ));
    }
    Ok(())
}

/// Seeded i.i.d. masks: Bernoulli(0.5) for binary, Uniform[0,1) for continuous.
pub fn generate_masks(width: usize, height: usize, frames: usize, seed: u64, kind: MaskKind) -> Result<MaskCube> {
    check_dims(width, height, frames)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = width * height * frames;
    let data = match kind {
        MaskKind::Binary => (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect(),
        MaskKind::Continuous => (0..n).map(|_| rng.random::<f64>()).collect(),
    };
    MaskCube::new(width, height, frames, kind, data)
}

/// `Y = Σ_t X(:,:,t) ⊙ M(:,:,t) + N` with `N ~ Normal(0, σ²)` drawn from `noise_seed`.
pub fn forward_measure(x: &VideoCube, m: &MaskCube, noise_sigma: f64, noise_seed: u64) -> Result<Measurement> {
    if x.colorspace != ColorSpace::Gray {
        return Err(dim_err!("forward_measure needs a grayscale video; use forward_measure_color"));
    }
    check_mask_dims("video", x.width, x.height, Some(x.frames), m)?;
    if !(noise_sigma >= 0.0) {
        return Err(VcsError::InvalidArgument(format!("noise sigma {noise_sigma} must be ≥ 0")));
    }
    let mut y = vec![0.0; x.pixels()];
    for t in 0..x.frames {
        for ((acc, &v), &mv) in y.iter_mut().zip(x.frame(0, t)).zip(m.frame(t)) {
            *acc += v * mv;
        }
    }
    if noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
        let normal =
            Normal::new(0.0, noise_sigma).map_err(|e| VcsError::InvalidArgument(format!("noise model: {e}")))?;
        for v in &mut y {
            *v += normal.sample(&mut rng);
        }
    }
    Measurement::new(x.width, x.height, noise_sigma, y)
}

/// `Ȳ = Y ⊘ M'`, zero where `M' ≤ ε`.
pub fn normalized_measurement(y: &Measurement, m: &MaskCube) -> Result<Vec<f64>> {
    check_mask_dims("measurement", y.width, y.height, None, m)?;
    Ok(y.data.iter().zip(m.coverage()).map(|(&v, c)| if c > COVERAGE_EPS { v / c } else { 0.0 }).collect())
}

pub fn reference_frames(y: &Measurement, m: &MaskCube) -> Result<RefFrames> {
    let normalized = normalized_measurement(y, m)?;
    let mut rmf = Vec::with_capacity(m.data.len());
    for t in 0..m.frames {
        rmf.extend(normalized.iter().zip(m.frame(t)).map(|(&a, &b)| a * b));
    }
    let rmf = VideoCube::new(m.width, m.height, m.frames, ColorSpace::Gray, rmf)?;
    Ok(RefFrames { normalized, rmf })
}

/// Colour channel sampled by the RGGB filter at `(row, col)`: 0 = R, 1 = G, 2 = B.
pub fn bayer_channel(row: usize, col: usize) -> usize {
    (row & 1) + (col & 1)
}

fn check_even(width: usize, height: usize) -> Result<()> {
    if !width.is_multiple_of(2) || !height.is_multiple_of(2) {
        return Err(dim_err!("Bayer RGGB needs even width and height, got {width}×{height}"));
    }
    Ok(())
}

/// Samples `[3, T, H, W]` planes through the RGGB pattern into `[T, H, W]`.
pub(crate) fn mosaic_planes<T: Copy>(rgb: &[T], frames: usize, height: usize, width: usize) -> Vec<T> {
    let p = height * width;
    let mut out = Vec::with_capacity(frames * p);
    for t in 0..frames {
        for r in 0..height {
            for c in 0..width {
                let ch = bayer_channel(r, c);
                out.push(rgb[(ch * frames + t) * p + r * width + c]);
            }
        }
    }
    out
}

/// Adjoint of [`mosaic_planes`]: scatters mosaic values back into their channel.
pub(crate) fn mosaic_adjoint<T: Real>(mono: &[T], frames: usize, height: usize, width: usize) -> Vec<T> {
    let p = height * width;
    let mut out = vec![T::zero(); 3 * frames * p];
    for t in 0..frames {
        for r in 0..height {
            for c in 0..width {
                let ch = bayer_channel(r, c);
                out[(ch * frames + t) * p + r * width + c] = mono[t * p + r * width + c];
            }
        }
    }
    out
}

/// RGGB mosaic of every frame; `(even, even)` samples red.
pub fn bayer_mosaic(x: &VideoCube) -> Result<VideoCube> {
    if x.colorspace != ColorSpace::Rgb {
        return Err(dim_err!("bayer_mosaic needs an RGB video"));
    }
    check_even(x.width, x.height)?;
    let data = mosaic_planes(&x.data, x.frames, x.height, x.width);
    VideoCube::new(x.width, x.height, x.frames, ColorSpace::Gray, data)
}

pub fn forward_measure_color(x: &VideoCube, m: &MaskCube, noise_sigma: f64, noise_seed: u64) -> Result<Measurement> {
    check_mask_dims("video", x.width, x.height, Some(x.frames), m)?;
    forward_measure(&bayer_mosaic(x)?, m, noise_sigma, noise_seed)
}
