use std::fmt::Write as _;
use std::time::Instant;

use crate::error::{dim_err, Result};
use crate::gap_tv::{gap_tv_reconstruct, GapTvConfig};
use crate::kernels::Real;
use crate::sensing::{
    check_mask_dims, forward_measure, forward_measure_color, generate_masks, reference_frames, ColorSpace, MaskCube,
    Measurement, VideoCube,
};
use crate::unfold_net::{reconstruct, Mode, UnfoldModel};

use super::quality::{psnr, ssim};

/// A reconstruction method under evaluation.
#[derive(Clone, Copy, Debug)]
pub enum Method<'a, T: Real = f32> {
    Unfold(&'a UnfoldModel<T>),
    GapTv(&'a GapTvConfig),
    /// Reference frames, clipped (demosaicked by 2×2 superpixels for colour).
    Rmf,
}

impl<T: Real> Method<'_, T> {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Unfold(_) => "unfold",
            Method::GapTv(_) => "gap-tv",
            Method::Rmf => "rmf",
        }
    }

    /// Reconstructs a `colorspace` video from one snapshot.
    pub fn reconstruct(&self, y: &Measurement, m: &MaskCube, colorspace: ColorSpace) -> Result<VideoCube> {
        match (self, colorspace) {
            (Method::Unfold(model), _) => {
                let want = match colorspace {
                    ColorSpace::Gray => Mode::Gray,
                    ColorSpace::Rgb => Mode::Color,
                };
                if model.mode() != want {
                    return Err(dim_err!("{:?} model cannot reconstruct a {:?} video", model.mode(), colorspace));
                }
                Ok(reconstruct(*model, y, m)?.output)
            }
            (Method::GapTv(cfg), ColorSpace::Gray) => gap_tv_reconstruct(y, m, cfg),
            (Method::GapTv(_), ColorSpace::Rgb) => Err(dim_err!("GAP-TV reconstructs grayscale snapshots only")),
            (Method::Rmf, ColorSpace::Gray) => rmf_baseline(y, m),
            (Method::Rmf, ColorSpace::Rgb) => mosaic_rmf_baseline(y, m),
        }
    }
}

/// `clip(Ȳ ⊙ M)`.
pub fn rmf_baseline(y: &Measurement, m: &MaskCube) -> Result<VideoCube> {
    Ok(reference_frames(y, m)?.rmf.clipped())
}

/// Reference frames of a Bayer snapshot demosaicked per 2×2 tile: R from the top-left
/// sample, G the mean of the two off-diagonal samples, B from the bottom-right sample.
pub fn mosaic_rmf_baseline(y: &Measurement, m: &MaskCube) -> Result<VideoCube> {
    let rmf = reference_frames(y, m)?.rmf;
    let (w, h, t) = (rmf.width(), rmf.height(), rmf.frames());
    if w % 2 != 0 || h % 2 != 0 {
        return Err(dim_err!("Bayer snapshots need even width and height, got {w}×{h}"));
    }
    let mut out = VideoCube::zeros(w, h, t, ColorSpace::Rgb)?;
    for f in 0..t {
        let mono = rmf.frame(0, f).to_vec();
        for r in (0..h).step_by(2) {
            for c in (0..w).step_by(2) {
                let at = |dr: usize, dc: usize| mono[(r + dr) * w + c + dc];
                let rgb = [at(0, 0), 0.5 * (at(0, 1) + at(1, 0)), at(1, 1)];
                for (ch, v) in rgb.into_iter().enumerate() {
                    let plane = out.frame_mut(ch, f);
                    for (dr, dc) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                        plane[(r + dr) * w + c + dc] = v;
                    }
                }
            }
        }
    }
    Ok(out.clipped())
}

/// Snapshot of `x` under `m`, grayscale or Bayer by the video's colour space.
pub fn simulate(x: &VideoCube, m: &MaskCube, sigma: f64, noise_seed: u64) -> Result<Measurement> {
    match x.colorspace() {
        ColorSpace::Gray => forward_measure(x, m, sigma, noise_seed),
        ColorSpace::Rgb => forward_measure_color(x, m, sigma, noise_seed),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub condition: String,
    pub scene: usize,
    pub psnr: f64,
    pub ssim: f64,
    pub seconds: f64,
}

/// Per-scene metrics grouped by condition label.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalReport {
    pub method: String,
    pub rows: Vec<EvalRow>,
}

/// Condition means.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionSummary {
    pub condition: String,
    pub scenes: usize,
    pub psnr: f64,
    pub ssim: f64,
    pub seconds: f64,
}

impl EvalReport {
    pub fn new(method: impl Into<String>) -> Self {
        EvalReport { method: method.into(), rows: Vec::new() }
    }

    /// Condition labels in first-seen order.
    pub fn conditions(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.condition) {
                out.push(r.condition.clone());
            }
        }
        out
    }

    pub fn summary(&self, condition: &str) -> Option<ConditionSummary> {
        let rows: Vec<&EvalRow> = self.rows.iter().filter(|r| r.condition == condition).collect();
        if rows.is_empty() {
            return None;
        }
        let n = rows.len() as f64;
        Some(ConditionSummary {
            condition: condition.to_string(),
            scenes: rows.len(),
            psnr: rows.iter().map(|r| r.psnr).sum::<f64>() / n,
            ssim: rows.iter().map(|r| r.ssim).sum::<f64>() / n,
            seconds: rows.iter().map(|r| r.seconds).sum::<f64>() / n,
        })
    }

    pub fn summaries(&self) -> Vec<ConditionSummary> {
        self.conditions().iter().filter_map(|c| self.summary(c)).collect()
    }

    pub fn merge(&mut self, other: EvalReport) {
        self.rows.extend(other.rows);
    }

    /// One row per scene and condition, then one `mean` row per condition.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("method,condition,scene,psnr_db,ssim,seconds\n");
        for r in &self.rows {
            writeln!(s, "{},{},{},{:.6},{:.6},{:.6}", self.method, r.condition, r.scene, r.psnr, r.ssim, r.seconds)
                .expect("string write");
        }
        for c in self.summaries() {
            writeln!(s, "{},{},mean,{:.6},{:.6},{:.6}", self.method, c.condition, c.psnr, c.ssim, c.seconds)
                .expect("string write");
        }
        s
    }

    /// Aligned plain-text table of condition means.
    pub fn to_table(&self) -> String {
        let sums = self.summaries();
        let width = sums.iter().map(|c| c.condition.len()).max().unwrap_or(0).max("condition".len());
        let mut s =
            format!("{:<width$}  {:>6}  {:>9}  {:>7}  {:>9}\n", "condition", "scenes", "PSNR(dB)", "SSIM", "sec/meas");
        for c in sums {
            writeln!(
                s,
                "{:<width$}  {:>6}  {:>9.3}  {:>7.4}  {:>9.4}",
                c.condition, c.scenes, c.psnr, c.ssim, c.seconds
            )
            .expect("string write");
        }
        s
    }
}

/// Simulates, reconstructs and scores every scene under `m`.
pub fn evaluate<T: Real>(
    method: &Method<T>,
    scenes: &[VideoCube],
    m: &MaskCube,
    condition: &str,
    sigma: f64,
    noise_seed: u64,
) -> Result<EvalReport> {
    let mut report = EvalReport::new(method.name());
    for (i, x) in scenes.iter().enumerate() {
        let y = simulate(x, m, sigma, noise_seed.wrapping_add(i as u64))?;
        let start = Instant::now();
        let rec = method.reconstruct(&y, m, x.colorspace())?;
        let seconds = start.elapsed().as_secs_f64();
        report.rows.push(EvalRow {
            condition: condition.to_string(),
            scene: i,
            psnr: psnr(&rec, x)?,
            ssim: ssim(&rec, x)?,
            seconds,
        });
    }
    Ok(report)
}

/// Rows for the training mask (`seen-mask`) and for `n_new` fresh masks
/// (`new-mask-1`, …) drawn from `seed`, `seed + 1`, ….
pub fn eval_flexibility_masks<T: Real>(
    method: &Method<T>,
    scenes: &[VideoCube],
    trained_mask: &MaskCube,
    n_new: usize,
    seed: u64,
) -> Result<EvalReport> {
    let mut report = evaluate(method, scenes, trained_mask, "seen-mask", 0.0, 0)?;
    for i in 0..n_new {
        let m = generate_masks(
            trained_mask.width(),
            trained_mask.height(),
            trained_mask.frames(),
            seed.wrapping_add(i as u64),
            trained_mask.kind(),
        )?;
        report.merge(evaluate(method, scenes, &m, &format!("new-mask-{}", i + 1), 0.0, 0)?);
    }
    Ok(report)
}

/// Full-frame reconstruction of scenes larger than the training size, labelled `scale-<W>x<H>`.
pub fn eval_flexibility_scale<T: Real>(method: &Method<T>, scenes: &[VideoCube], m: &MaskCube) -> Result<EvalReport> {
    if !m.width().is_multiple_of(2) || !m.height().is_multiple_of(2) {
        return Err(dim_err!("scale evaluation needs even width and height, got {}×{}", m.width(), m.height()));
    }
    evaluate(method, scenes, m, &format!("scale-{}x{}", m.width(), m.height()), 0.0, 0)
}

/// Reconstructs `tiles = (rows, cols)` non-overlapping blocks independently and stitches them.
pub fn tiled_reconstruct<T: Real>(
    method: &Method<T>,
    y: &Measurement,
    m: &MaskCube,
    colorspace: ColorSpace,
    tiles: (usize, usize),
) -> Result<VideoCube> {
    let (rows, cols) = tiles;
    if rows == 0 || cols == 0 {
        return Err(dim_err!("tile grid must be at least 1x1, got {rows}x{cols}"));
    }
    check_mask_dims("measurement", y.width(), y.height(), None, m)?;
    let (w, h) = (m.width(), m.height());
    if w % (2 * cols) != 0 || h % (2 * rows) != 0 {
        return Err(dim_err!("{w}×{h} does not split into {rows}x{cols} tiles of even size"));
    }
    let (tw, th) = (w / cols, h / rows);
    let mut out = VideoCube::zeros(w, h, m.frames(), colorspace)?;
    for r in 0..rows {
        for c in 0..cols {
            let (r0, c0) = (r * th, c * tw);
            let tile = method.reconstruct(&y.crop(r0, c0, th, tw)?, &m.crop(r0, c0, th, tw)?, colorspace)?;
            out.paste(&tile, r0, c0)?;
        }
    }
    Ok(out)
}
