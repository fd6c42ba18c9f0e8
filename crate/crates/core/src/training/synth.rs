//! Synthetic moving-object scenes standing in for natural video.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::sensing::{ColorSpace, VideoCube};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub colorspace: ColorSpace,
}

#[derive(Clone, Copy, Debug)]
enum Texture {
    Flat,
    Stripes { period: usize, vertical: bool },
    Checker { size: usize },
    Ramp { len: f64 },
}

impl Texture {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        match rng.random_range(0..4) {
            0 => Texture::Flat,
            1 => Texture::Stripes { period: rng.random_range(2..7), vertical: rng.random_bool(0.5) },
            2 => Texture::Checker { size: rng.random_range(1..4) },
            _ => Texture::Ramp { len: rng.random_range(4.0..16.0) },
        }
    }

    /// Modulation in `[0.4, 1]` at object-relative position `(u, v)`.
    fn at(self, u: i64, v: i64) -> f64 {
        match self {
            Texture::Flat => 1.0,
            Texture::Stripes { period, vertical } => {
                let k = if vertical { u } else { v };
                if k.rem_euclid(period as i64) < (period as i64 + 1) / 2 {
                    1.0
                } else {
                    0.55
                }
            }
            Texture::Checker { size } => {
                let s = size as i64;
                if (u.div_euclid(s) + v.div_euclid(s)) % 2 == 0 {
                    1.0
                } else {
                    0.4
                }
            }
            Texture::Ramp { len } => 0.4 + 0.6 * ((u + v) as f64 / len).rem_euclid(1.0),
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Shape {
    Rect { w: i64, h: i64 },
    Disc { r: i64 },
}

#[derive(Clone, Debug)]
struct Object {
    shape: Shape,
    x0: i64,
    y0: i64,
    vx: i64,
    vy: i64,
    color: [f64; 3],
    texture: Texture,
}

impl Object {
    fn covers(&self, du: i64, dv: i64) -> bool {
        match self.shape {
            Shape::Rect { w, h } => (0..w).contains(&du) && (0..h).contains(&dv),
            Shape::Disc { r } => (du - r) * (du - r) + (dv - r) * (dv - r) <= r * r,
        }
    }
}

fn random_color(rng: &mut ChaCha8Rng, gray: bool) -> [f64; 3] {
    if gray {
        let v = rng.random_range(0.1..1.0);
        [v; 3]
    } else {
        [rng.random_range(0.05..1.0), rng.random_range(0.05..1.0), rng.random_range(0.05..1.0)]
    }
}

/// Renders a scene of `width × height` (before augmentation).
fn render(spec: SceneSpec, width: usize, height: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let gray = spec.colorspace == ColorSpace::Gray;
    let (w, h) = (width as i64, height as i64);
    let bg_color = random_color(rng, gray);
    let bg_fx = rng.random_range(0.5..2.5) * std::f64::consts::TAU / width as f64;
    let bg_fy = rng.random_range(0.5..2.5) * std::f64::consts::TAU / height as f64;
    let bg_phase = rng.random_range(0.0..std::f64::consts::TAU);
    let bg_amp = rng.random_range(0.1..0.35);

    let n_objects = rng.random_range(2..=4);
    let max_side = (width.min(height) / 2).max(3) as i64;
    let objects: Vec<Object> = (0..n_objects)
        .map(|i| {
            let shape = if rng.random_bool(0.5) {
                Shape::Rect { w: rng.random_range(3..=max_side), h: rng.random_range(3..=max_side) }
            } else {
                Shape::Disc { r: rng.random_range(2..=(max_side / 2).max(2)) }
            };
            let (mut vx, mut vy) = (rng.random_range(-2..=2), rng.random_range(-2..=2));
            if i == 0 && vx == 0 && vy == 0 {
                vx = if rng.random_bool(0.5) { 1 } else { -1 };
                vy = rng.random_range(-1..=1);
            }
            Object {
                shape,
                x0: rng.random_range(-2..(w - 2).max(-1)),
                y0: rng.random_range(-2..(h - 2).max(-1)),
                vx,
                vy,
                color: random_color(rng, gray),
                texture: Texture::random(rng),
            }
        })
        .collect();

    let channels = spec.colorspace.channels();
    let plane = width * height;
    let mut data = vec![0.0; channels * spec.frames * plane];
    for t in 0..spec.frames {
        for r in 0..h {
            for c in 0..w {
                let shade = 0.5 + bg_amp * (bg_fx * c as f64 + bg_fy * r as f64 + bg_phase).sin();
                let mut px = bg_color.map(|v| (v * shade).clamp(0.0, 1.0));
                for o in &objects {
                    let du = c - (o.x0 + o.vx * t as i64);
                    let dv = r - (o.y0 + o.vy * t as i64);
                    if o.covers(du, dv) {
                        let m = o.texture.at(du, dv);
                        px = o.color.map(|v| v * m);
                    }
                }
                for (ch, v) in px.iter().take(channels).enumerate() {
                    data[(ch * spec.frames + t) * plane + (r as usize) * width + c as usize] = *v;
                }
            }
        }
    }
    data
}

/// Clockwise quarter turn of every `h × w` plane; returns planes of `w × h`.
fn rotate90(data: &[f64], h: usize, w: usize) -> Vec<f64> {
    let plane = h * w;
    let mut out = vec![0.0; data.len()];
    for (src, dst) in data.chunks(plane).zip(out.chunks_mut(plane)) {
        for r in 0..w {
            for c in 0..h {
                dst[r * h + c] = src[(h - 1 - c) * w + r];
            }
        }
    }
    out
}

fn flip_horizontal(data: &mut [f64], w: usize) {
    for row in data.chunks_mut(w) {
        row.reverse();
    }
}

/// One scene, randomly rotated by a multiple of 90° and optionally mirrored.
pub fn synth_scene(spec: SceneSpec, rng: &mut ChaCha8Rng) -> Result<VideoCube> {
    let quarter_turns = rng.random_range(0..4);
    let flip = rng.random_bool(0.5);
    loop {
        let (mut w, mut h) = if quarter_turns % 2 == 1 { (spec.height, spec.width) } else { (spec.width, spec.height) };
        let mut data = render(spec, w, h, rng);
        for _ in 0..quarter_turns {
            data = rotate90(&data, h, w);
            (w, h) = (h, w);
        }
        if flip {
            flip_horizontal(&mut data, w);
        }
        let cube = VideoCube::new(w, h, spec.frames, spec.colorspace, data)?;
        if spec.frames < 2 || temporal_diff_energy(&cube) > 0.0 {
            return Ok(cube);
        }
    }
}

/// `k` scenes from `seed`.
pub fn synth_scenes(spec: SceneSpec, k: usize, seed: u64) -> Result<Vec<VideoCube>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..k).map(|_| synth_scene(spec, &mut rng)).collect()
}

/// `Σ_t ‖X_{t+1} − X_t‖²` over all channels.
pub fn temporal_diff_energy(x: &VideoCube) -> f64 {
    let mut e = 0.0;
    for c in 0..x.channels() {
        for t in 1..x.frames() {
            e += x.frame(c, t).iter().zip(x.frame(c, t - 1)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
    }
    e
}
