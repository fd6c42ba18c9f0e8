//! Independent oracles shared by the integration suites and the acceptance harness.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use snapvcs::kernels::{
    concat_channels, reversible_backward, stored_activation_backward, BoundBlock, BoundConv, BoundCoupling, ConvSpec,
    InvertibleBlock, MemoryMeter, Real, Tape, Tensor, Var,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_tensor(shape: &[usize], lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::from_fn(shape.to_vec(), |_| rng.random_range(lo..hi))
}

/// Sensing matrix built entry by entry: row `i` sums pixel `i` of every masked frame.
pub fn sensing_matrix(m: &MaskCube) -> DMatrix<f64> {
    let p = m.pixels();
    let mut phi = DMatrix::zeros(p, p * m.frames());
    for t in 0..m.frames() {
        for (i, &v) in m.frame(t).iter().enumerate() {
            phi[(i, t * p + i)] = v;
        }
    }
    phi
}

/// Pixels whose squared mask energy is at or below this count as unsensed.
pub const SENSED_EPS: f64 = 1e-6;

/// `v + Φᵀ(ΦΦᵀ)⁺(y − Φv)` with a dense pseudo-inverse that drops singular values ≤ [`SENSED_EPS`].
pub fn dense_projection(v: &VideoCube, y: &Measurement, m: &MaskCube) -> Vec<f64> {
    let phi = sensing_matrix(m);
    let vv = DVector::from_column_slice(v.data());
    let yy = DVector::from_column_slice(y.data());
    let gram = &phi * phi.transpose();
    let pinv = gram.pseudo_inverse(SENSED_EPS).expect("pseudo-inverse");
    let x = &vv + phi.transpose() * (pinv * (yy - &phi * &vv));
    x.as_slice().to_vec()
}

/// Per pixel: is the diagonal of `ΦΦᵀ` above [`SENSED_EPS`].
pub fn sensed_pixels(m: &MaskCube) -> Vec<bool> {
    let phi = sensing_matrix(m);
    (&phi * phi.transpose()).diagonal().iter().map(|&q| q > SENSED_EPS).collect()
}

pub fn apply_sensing(x: &[f64], m: &MaskCube) -> Vec<f64> {
    let phi = sensing_matrix(m);
    (phi * DVector::from_column_slice(x)).as_slice().to_vec()
}

/// Relative difference with a small absolute floor on the scale.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

pub fn max_rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| rel_err(x, y, floor)).fold(0.0, f64::max)
}

pub const FD_STEP: f64 = 1e-5;
pub const FD_FLOOR: f64 = 1e-3;

/// Central finite-difference check of `build` on `probes` random coordinates.
///
/// The scalar under test is `Σ out ⊙ r` for a fixed random `r`; returns the largest
/// relative error between the tape gradient and the difference quotient.
pub fn gradcheck<F>(inputs: &[Tensor<f64>], build: F, probes: usize, seed: u64) -> f64
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Var,
{
    let mut r = rng(seed);
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|x| tape.input(x.clone(), true)).collect();
    let out = build(&mut tape, &vars);
    let weights = uniform_tensor(tape.value(out).shape(), -1.0, 1.0, &mut r);
    let grads = tape.backward(vec![(out, weights.clone())]).expect("backward");

    let objective = |xs: &[Tensor<f64>]| -> f64 {
        let mut t = Tape::new();
        let vs: Vec<Var> = xs.iter().map(|x| t.input(x.clone(), false)).collect();
        let o = build(&mut t, &vs);
        t.value(o).data().iter().zip(weights.data()).map(|(a, b)| a * b).sum()
    };

    let total: usize = inputs.iter().map(Tensor::len).sum();
    let mut worst: f64 = 0.0;
    for _ in 0..probes {
        let mut flat = r.random_range(0..total);
        let mut which = 0;
        while flat >= inputs[which].len() {
            flat -= inputs[which].len();
            which += 1;
        }
        let analytic = grads.get(vars[which]).map_or(0.0, |g| g.data()[flat]);
        let mut xs = inputs.to_vec();
        xs[which].data_mut()[flat] += FD_STEP;
        let plus = objective(&xs);
        xs[which].data_mut()[flat] -= 2.0 * FD_STEP;
        let minus = objective(&xs);
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        worst = worst.max(rel_err(analytic, numeric, FD_FLOOR));
    }
    worst
}

/// SSIM evaluated window by window with a full 2-D Gaussian (11×11, σ 1.5, L = 1).
pub fn ssim_reference(x: &[f64], y: &[f64], h: usize, w: usize) -> f64 {
    const N: usize = 11;
    let sigma = 1.5f64;
    let mut kernel = [[0.0f64; N]; N];
    let mut total = 0.0;
    for (i, row) in kernel.iter_mut().enumerate() {
        for (j, k) in row.iter_mut().enumerate() {
            let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
            *k = (-(di * di + dj * dj) / (2.0 * sigma * sigma)).exp();
            total += *k;
        }
    }
    let c1 = (0.01f64).powi(2);
    let c2 = (0.03f64).powi(2);
    let mut acc = 0.0;
    let mut count = 0usize;
    for r0 in 0..=h - N {
        for c0 in 0..=w - N {
            let (mut mx, mut my) = (0.0, 0.0);
            for i in 0..N {
                for j in 0..N {
                    let k = kernel[i][j] / total;
                    mx += k * x[(r0 + i) * w + c0 + j];
                    my += k * y[(r0 + i) * w + c0 + j];
                }
            }
            let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
            for i in 0..N {
                for j in 0..N {
                    let k = kernel[i][j] / total;
                    let a = x[(r0 + i) * w + c0 + j] - mx;
                    let b = y[(r0 + i) * w + c0 + j] - my;
                    vx += k * a * a;
                    vy += k * b * b;
                    cxy += k * a * b;
                }
            }
            acc += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            count += 1;
        }
    }
    acc / count as f64
}

/// Binds a block whose eight parameters are the tape variables `v[0..8]`.
pub fn block_from_vars(v: &[Var], slope: f64) -> BoundBlock {
    let conv = |i: usize| BoundConv { w: v[i], b: v[i + 1], spec: ConvSpec::SAME3 };
    BoundBlock {
        f: BoundCoupling { conv1: conv(0), conv2: conv(2), slope },
        g: BoundCoupling { conv1: conv(4), conv2: conv(6), slope },
    }
}

pub struct ChainCheck {
    /// Largest relative gap between reversible and stored-activation gradients.
    pub vs_stored: f64,
    /// Largest relative gap between the reversible tape op and finite differences.
    pub vs_differences: f64,
    pub reversible_peak: usize,
    pub stored_peak: usize,
}

pub fn chain_check(n_blocks: usize, seed: u64, probes: usize) -> ChainCheck {
    let mut r = rng(seed);
    let half = 2;
    let blocks: Vec<InvertibleBlock<f64>> =
        (0..n_blocks).map(|_| InvertibleBlock::random(half, 0.01, &mut r)).collect();
    let shape = [1, half, 2, 6, 6];
    let s1 = uniform_tensor(&shape, -1.0, 1.0, &mut r);
    let s2 = uniform_tensor(&shape, -1.0, 1.0, &mut r);
    let g1 = uniform_tensor(&shape, -1.0, 1.0, &mut r);
    let g2 = uniform_tensor(&shape, -1.0, 1.0, &mut r);

    let (mut o1, mut o2) = (s1.clone(), s2.clone());
    for b in &blocks {
        (o1, o2) = b.forward(&o1, &o2).unwrap();
    }
    let rev_meter = MemoryMeter::new();
    let rev = reversible_backward(&blocks, (o1, o2), (g1.clone(), g2.clone()), &rev_meter).unwrap();
    let stored_meter = MemoryMeter::new();
    let stored = stored_activation_backward(&blocks, (s1.clone(), s2.clone()), (g1, g2), &stored_meter).unwrap();

    let mut vs_stored: f64 = 0.0;
    let mut cmp = |a: &Tensor<f64>, b: &Tensor<f64>| {
        vs_stored = vs_stored.max(max_rel_err(a.data(), b.data(), 1e-8));
    };
    cmp(&rev.grad_in.0, &stored.grad_in.0);
    cmp(&rev.grad_in.1, &stored.grad_in.1);
    for (a, b) in rev.blocks.iter().zip(&stored.blocks) {
        for (x, y) in a.iter().zip(b.iter()) {
            cmp(x, y);
        }
    }

    let x = concat_channels(&[&s1, &s2]).unwrap();
    let mut inputs = vec![x];
    for b in &blocks {
        inputs.extend(b.params().into_iter().cloned());
    }
    let vs_differences = gradcheck(
        &inputs,
        |t, v| {
            let bound: Vec<BoundBlock> = v[1..].chunks(8).map(|c| block_from_vars(c, 0.01)).collect();
            t.rev_chain(v[0], &bound).unwrap()
        },
        probes,
        seed ^ 0x5a5a,
    );
    ChainCheck { vs_stored, vs_differences, reversible_peak: rev_meter.peak(), stored_peak: stored_meter.peak() }
}

/// Largest roundtrip error of `n` random blocks on random inputs.
pub fn roundtrip_error<T: Real>(n: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let half = r.random_range(1..3);
        let shape = [1, half, r.random_range(1..3), r.random_range(2..5), r.random_range(2..5)];
        let block = InvertibleBlock::<T>::random(half, 0.01, &mut r);
        let s1 = uniform_tensor(&shape, -1.0, 1.0, &mut r).cast::<T>();
        let s2 = uniform_tensor(&shape, -1.0, 1.0, &mut r).cast::<T>();
        let (y1, y2) = block.forward(&s1, &s2).unwrap();
        let (b1, b2) = block.inverse(&y1, &y2).unwrap();
        worst = worst.max(b1.max_abs_diff(&s1).unwrap().as_f64()).max(b2.max_abs_diff(&s2).unwrap().as_f64());
    }
    worst
}

use std::sync::Arc;

use snapvcs::projection::BatchSensing;
use snapvcs::sensing::{forward_measure, generate_masks, ColorSpace, MaskCube, MaskKind, Measurement, VideoCube};

/// Every differentiable tape operation, by name.
pub const OPS: &[&str] = &[
    "conv3d",
    "conv3d-strided",
    "conv3d-pointwise",
    "leaky_relu",
    "upsample2x",
    "concat",
    "slice_channels",
    "add-sub-scale",
    "project-binary",
    "project-continuous",
    "mosaic",
    "mse",
    "rev_chain",
    "coupling-block",
];

fn batch_sensing(seed: u64, kind: MaskKind, b: usize) -> Arc<BatchSensing<f64>> {
    let (w, h, t) = (4, 6, 3);
    let masks: Vec<_> = (0..b).map(|i| generate_masks(w, h, t, seed.wrapping_add(i as u64), kind).unwrap()).collect();
    let ys: Vec<_> = masks
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let data = uniform_tensor(&[w * h * t], 0.0, 1.0, &mut rng(seed.wrapping_mul(31).wrapping_add(i as u64)))
                .into_data();
            let x = VideoCube::new(w, h, t, ColorSpace::Gray, data).unwrap();
            forward_measure(&x, m, 0.0, 0).unwrap()
        })
        .collect();
    let items: Vec<_> = ys.iter().zip(&masks).collect();
    Arc::new(BatchSensing::new(&items).unwrap())
}

fn conv_case(spec: ConvSpec, kernel: usize, probes: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let x = uniform_tensor(&[2, 2, 3, 6, 6], -1.0, 1.0, &mut r);
    let w = uniform_tensor(&[3, 2, kernel, kernel, kernel], -0.5, 0.5, &mut r);
    let b = uniform_tensor(&[3], -0.5, 0.5, &mut r);
    gradcheck(&[x, w, b], |t, v| t.conv3d(v[0], v[1], v[2], spec).unwrap(), probes, seed)
}

/// Finite-difference check of one entry of [`OPS`].
pub fn op_gradcheck(op: &str, probes: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut u = |shape: &[usize]| uniform_tensor(shape, -1.0, 1.0, &mut r);
    match op {
        "conv3d" => conv_case(ConvSpec::SAME3, 3, probes, seed),
        "conv3d-strided" => conv_case(ConvSpec::DOWN2, 3, probes, seed),
        "conv3d-pointwise" => conv_case(ConvSpec { stride: [1, 1, 1], pad: [0, 0, 0] }, 1, probes, seed),
        "leaky_relu" => gradcheck(&[u(&[2, 3, 2, 4, 4])], |t, v| t.leaky_relu(v[0], 0.01), probes, seed),
        "upsample2x" => gradcheck(&[u(&[1, 2, 2, 3, 3])], |t, v| t.upsample2x(v[0]).unwrap(), probes, seed),
        "concat" => gradcheck(
            &[u(&[2, 1, 2, 3, 3]), u(&[2, 3, 2, 3, 3])],
            |t, v| t.concat(&[v[0], v[1]]).unwrap(),
            probes,
            seed,
        ),
        "slice_channels" => {
            gradcheck(&[u(&[2, 4, 2, 3, 3])], |t, v| t.slice_channels(v[0], 1, 2).unwrap(), probes, seed)
        }
        "add-sub-scale" => gradcheck(
            &[u(&[1, 2, 2, 3, 3]), u(&[1, 2, 2, 3, 3])],
            |t, v| {
                let s = t.add(v[0], v[1]).unwrap();
                let d = t.sub(s, v[1]).unwrap();
                let d = t.sub(d, v[1]).unwrap();
                t.scale(d, -1.7)
            },
            probes,
            seed,
        ),
        "project-binary" | "project-continuous" => {
            let kind = if op == "project-binary" { MaskKind::Binary } else { MaskKind::Continuous };
            let s = batch_sensing(seed, kind, 2);
            gradcheck(&[u(&[2, 1, 3, 6, 4])], |t, x| t.project(x[0], s.clone()).unwrap(), probes, seed)
        }
        "mosaic" => gradcheck(&[u(&[2, 3, 2, 4, 6])], |t, v| t.mosaic(v[0]).unwrap(), probes, seed),
        "mse" => {
            gradcheck(&[u(&[2, 1, 2, 3, 3]), u(&[2, 1, 2, 3, 3])], |t, v| t.mse(v[0], v[1]).unwrap(), probes, seed)
        }
        "rev_chain" => {
            let blocks: Vec<InvertibleBlock<f64>> = (0..2).map(|_| InvertibleBlock::random(2, 0.01, &mut r)).collect();
            let mut inputs = vec![uniform_tensor(&[1, 4, 2, 4, 4], -1.0, 1.0, &mut r)];
            for b in &blocks {
                inputs.extend(b.params().into_iter().cloned());
            }
            gradcheck(
                &inputs,
                |t, v| {
                    let bound: Vec<BoundBlock> = v[1..].chunks(8).map(|c| block_from_vars(c, 0.01)).collect();
                    t.rev_chain(v[0], &bound).unwrap()
                },
                probes,
                seed,
            )
        }
        "coupling-block" => {
            let block = InvertibleBlock::<f64>::random(1, 0.01, &mut r);
            let mut inputs = vec![uniform_tensor(&[1, 2, 2, 4, 4], -1.0, 1.0, &mut r)];
            inputs.extend(block.params().into_iter().cloned());
            gradcheck(
                &inputs,
                |t, v| {
                    let b = block_from_vars(&v[1..], 0.01);
                    let s1 = t.slice_channels(v[0], 0, 1).unwrap();
                    let s2 = t.slice_channels(v[0], 1, 1).unwrap();
                    let (o1, o2) = b.forward_tape(t, s1, s2).unwrap();
                    t.concat(&[o1, o2]).unwrap()
                },
                probes,
                seed,
            )
        }
        other => panic!("unknown op {other}"),
    }
}
