//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Reports by default; with `ACCEPTANCE_STRICT=1` any failure makes the exit status nonzero.

mod common;

use std::process::Command;
use std::time::Instant;

use rand::Rng;

use snapvcs::gap_tv::{gap_tv_reconstruct, tv_denoise, tv_objective, GapTvConfig, TvMode};
use snapvcs::io::{Record, RecordData, VcubFile};
use snapvcs::kernels::{Real, Tensor};
use snapvcs::metrics::{
    eval_flexibility_masks, mosaic_rmf_baseline, psnr, rmf_baseline, ssim, ssim_frame, tiled_reconstruct, Method,
};
use snapvcs::projection::{gap_project, BatchSensing};
use snapvcs::sensing::{
    bayer_mosaic, forward_measure, generate_masks, ColorSpace, MaskCube, MaskKind, Measurement, VideoCube,
};
use snapvcs::training::{
    measure, mse_loss, stage_wise_loss, synth_scenes, train, EpochRecord, SceneSpec, TrainConfig, TrainObserver,
};
use snapvcs::unfold_net::{ArchConfig, Mode, UnfoldModel};

use common::{
    apply_sensing, chain_check, dense_projection, op_gradcheck, rng, roundtrip_error, sensed_pixels, ssim_reference,
    OPS,
};

struct Outcome {
    failures: usize,
}

impl Outcome {
    fn report(&mut self, id: u32, name: &str, pass: bool, detail: String) {
        if !pass {
            self.failures += 1;
        }
        println!("{} [{id:>2}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

fn random_cube(w: usize, h: usize, t: usize, r: &mut impl Rng) -> VideoCube {
    let data = (0..w * h * t).map(|_| r.random_range(0.0..1.0)).collect();
    VideoCube::new(w, h, t, ColorSpace::Gray, data).unwrap()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn projection_correctness(out: &mut Outcome) {
    let start = Instant::now();
    let mut r = rng(11);
    let (mut dense_gap, mut consistency, mut idem): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for i in 0..200 {
        let (w, h, t) = (r.random_range(1..=8), r.random_range(1..=8), r.random_range(1..=4));
        let kind = if i % 2 == 0 { MaskKind::Binary } else { MaskKind::Continuous };
        let m = generate_masks(w, h, t, r.random(), kind).unwrap();
        let y = forward_measure(&random_cube(w, h, t, &mut r), &m, 0.0, 0).unwrap();
        let v = random_cube(w, h, t, &mut r);
        let x = gap_project(&v, &y, &m).unwrap();
        for (a, b) in x.data().iter().zip(dense_projection(&v, &y, &m)) {
            dense_gap = dense_gap.max((a - b).abs());
        }
        for ((yy, py), c) in y.data().iter().zip(apply_sensing(x.data(), &m)).zip(sensed_pixels(&m)) {
            if c {
                consistency = consistency.max((yy - py).abs());
            }
        }
        let again = gap_project(&x, &y, &m).unwrap();
        idem = idem.max(again.data().iter().zip(x.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = dense_gap <= 1e-5 && consistency <= 1e-5 && idem <= 1e-6 && secs < 10.0;
    out.report(
        1,
        "projection correctness",
        pass,
        format!("200 instances, dense gap {dense_gap:.2e}, consistency {consistency:.2e}, idempotence {idem:.2e}, {secs:.2} s"),
    );
}

fn invertibility(out: &mut Outcome) {
    let e32 = roundtrip_error::<f32>(1000, 21);
    let e64 = roundtrip_error::<f64>(1000, 22);
    out.report(
        2,
        "invertibility",
        e32 <= 1e-5 && e64 <= 1e-10,
        format!("1000 roundtrips, max error f32 {e32:.2e}, f64 {e64:.2e}"),
    );
}

fn memory_free_backprop(out: &mut Outcome) {
    let start = Instant::now();
    let ns = [1usize, 2, 4, 8];
    let checks: Vec<_> = ns.iter().map(|&n| chain_check(n, 300 + n as u64, 100)).collect();
    let vs_stored = checks.iter().map(|c| c.vs_stored).fold(0.0, f64::max);
    let vs_fd = checks.iter().map(|c| c.vs_differences).fold(0.0, f64::max);
    let rev: Vec<usize> = checks.iter().map(|c| c.reversible_peak).collect();
    let naive: Vec<usize> = checks.iter().map(|c| c.stored_peak).collect();
    let flat = rev.iter().all(|&b| b == rev[0]);
    let step = naive[1] as i64 - naive[0] as i64;
    let linear = step > 0 && ns.iter().zip(&naive).all(|(&n, &b)| b as i64 == naive[0] as i64 + step * (n as i64 - 1));
    let secs = start.elapsed().as_secs_f64();
    out.report(
        3,
        "memory-free backprop equivalence",
        vs_stored <= 1e-5 && vs_fd <= 1e-4 && flat && linear && secs < 60.0,
        format!(
            "blocks {ns:?}: vs stored {vs_stored:.2e}, vs differences {vs_fd:.2e}, reversible bytes {rev:?}, stored bytes {naive:?}, {secs:.2} s"
        ),
    );
}

fn kernel_gradchecks(out: &mut Outcome) {
    let errs: Vec<(&str, f64)> =
        OPS.iter().enumerate().map(|(i, op)| (*op, op_gradcheck(op, 100, 400 + i as u64))).collect();
    let (worst_op, worst) = errs.iter().copied().fold(("", 0.0), |a, b| if b.1 > a.1 { b } else { a });
    out.report(
        4,
        "kernel gradchecks",
        errs.iter().all(|e| e.1 <= 1e-4),
        format!("{} ops × 100 probes, worst {worst_op} {worst:.2e}", errs.len()),
    );
}

fn loss_algebra(out: &mut Outcome) {
    let px = |v: f64| VideoCube::new(1, 1, 1, ColorSpace::Gray, vec![v]).unwrap();
    let truth = px(1.0);
    let hand = stage_wise_loss(&px(0.8), &px(0.9), &truth).unwrap();
    // binary-exact errors 0.5 / 0.25 → 0.5·0.25 + 0.0625
    let exact = stage_wise_loss(&px(0.5), &px(0.75), &truth).unwrap();
    let decomposed = 0.5 * mse_loss(&px(0.8), &truth).unwrap() + mse_loss(&px(0.9), &truth).unwrap();
    out.report(
        5,
        "loss algebra",
        (hand - 0.03).abs() <= 1e-15 && exact == 0.1875 && hand == decomposed,
        format!("errors 0.2/0.1 → {hand:.17}, errors 0.5/0.25 → {exact}"),
    );
}

/// Records parameter snapshots at phase boundaries.
#[derive(Default)]
struct Snapshots {
    after_phase: Vec<Vec<Vec<Tensor<f32>>>>,
}

impl TrainObserver<f32> for Snapshots {
    fn epoch_end(&mut self, r: &EpochRecord) -> snapvcs::Result<()> {
        eprintln!("  epoch {:>2} phase {} lr {:.2e} loss {:.6}", r.epoch, r.phase, r.lr, r.loss);
        Ok(())
    }

    fn phase_end(&mut self, _phase: usize, model: &UnfoldModel<f32>) -> snapvcs::Result<()> {
        self.after_phase.push(model.stages.iter().map(|s| s.params().into_iter().cloned().collect()).collect());
        Ok(())
    }
}

fn stage_params(model: &UnfoldModel<f32>, j: usize) -> Vec<Tensor<f32>> {
    model.stages[j].params().into_iter().cloned().collect()
}

struct StageScores {
    stage1: f64,
    stage2: f64,
}

fn stage_scores<T: Real>(model: &UnfoldModel<T>, scenes: &[VideoCube], m: &MaskCube) -> StageScores {
    let (mut s1, mut s2) = (Vec::new(), Vec::new());
    for x in scenes {
        let y = measure(model.mode(), x, m, 0.0, 0).unwrap();
        let sensing = BatchSensing::<T>::new(&[(&y, m)]).unwrap();
        let outs = model.infer(&sensing).unwrap();
        let clip = |t: &Tensor<T>| VideoCube::from_tensor(t).unwrap().clipped();
        s1.push(psnr(&clip(&outs[0]), x).unwrap());
        s2.push(psnr(&clip(&outs[1]), x).unwrap());
    }
    StageScores { stage1: mean(&s1), stage2: mean(&s2) }
}

fn baseline_score(
    scenes: &[VideoCube],
    m: &MaskCube,
    f: fn(&Measurement, &MaskCube) -> snapvcs::Result<VideoCube>,
) -> f64 {
    let v: Vec<f64> = scenes
        .iter()
        .map(|x| {
            let y = if x.colorspace() == ColorSpace::Rgb {
                snapvcs::sensing::forward_measure_color(x, m, 0.0, 0).unwrap()
            } else {
                forward_measure(x, m, 0.0, 0).unwrap()
            };
            psnr(&f(&y, m).unwrap(), x).unwrap()
        })
        .collect();
    mean(&v)
}

fn toy_config(mode: Mode) -> (TrainConfig, ArchConfig) {
    let cfg = TrainConfig { lr0: 1e-3, mode, ..TrainConfig::default() };
    let arch = ArchConfig { stages: 2, channels: 8, blocks: 2, mode, ..ArchConfig::default() };
    (cfg, arch)
}

fn training_sanity(out: &mut Outcome) -> (UnfoldModel<f32>, TrainConfig) {
    let start = Instant::now();
    let (cfg, arch) = toy_config(Mode::Gray);
    let mut model = UnfoldModel::<f32>::new(arch, 0).unwrap();
    let init2 = stage_params(&model, 1);
    let mut snaps = Snapshots::default();
    let log = train(&mut model, &cfg, &mut snaps).unwrap();
    let secs = start.elapsed().as_secs_f64();

    let p1: Vec<f64> = log.phase(1).map(|r| r.loss).collect();
    let (first, last) = (p1[0], *p1.last().unwrap());
    let first_batch = log.first_batch_loss[0].1;
    let halved = last < 0.5 * first;
    let stage2_untouched = snaps.after_phase[0][1] == init2;
    let stage1_frozen = snaps.after_phase[1][0] == snaps.after_phase[0][0];

    let spec = SceneSpec { width: 32, height: 32, frames: 4, colorspace: ColorSpace::Gray };
    let held = synth_scenes(spec, 20, 9001).unwrap();
    let m = generate_masks(32, 32, 4, cfg.mask_seed, cfg.mask_kind).unwrap();
    let s = stage_scores(&model, &held, &m);
    let rmf = baseline_score(&held, &m, rmf_baseline);
    let pass = halved
        && stage2_untouched
        && stage1_frozen
        && s.stage2 >= s.stage1 + 0.2
        && s.stage2 >= rmf + 3.0
        && secs < 1800.0;
    out.report(
        6,
        "training sanity",
        pass,
        format!(
            "phase-1 epoch loss {first:.4e} → {last:.4e} (first batch {first_batch:.4e}); stage-2 untouched in phase 1: {stage2_untouched}; \
             stage-1 frozen in phase 2: {stage1_frozen}; held-out PSNR stage 1 {:.2} dB, stage 2 {:.2} dB, reference frames {rmf:.2} dB; {secs:.0} s",
            s.stage1, s.stage2
        ),
    );
    (model, cfg)
}

fn mask_flexibility(out: &mut Outcome, model: &UnfoldModel<f32>, cfg: &TrainConfig) {
    let spec = SceneSpec { width: 32, height: 32, frames: 4, colorspace: ColorSpace::Gray };
    let held = synth_scenes(spec, 20, 9001).unwrap();
    let m = generate_masks(32, 32, 4, cfg.mask_seed, cfg.mask_kind).unwrap();
    let rep = eval_flexibility_masks(&Method::Unfold(model), &held, &m, 3, 5150).unwrap();
    let seen = rep.summary("seen-mask").unwrap().psnr;
    let new: Vec<f64> = (1..=3).map(|i| rep.summary(&format!("new-mask-{i}")).unwrap().psnr).collect();
    let drop = seen - mean(&new);
    out.report(
        7,
        "mask flexibility",
        drop <= 1.0,
        format!(
            "seen mask {seen:.2} dB, new masks {:.2}/{:.2}/{:.2} dB, average drop {drop:.2} dB",
            new[0], new[1], new[2]
        ),
    );
}

fn scale_flexibility(out: &mut Outcome, model: &UnfoldModel<f32>) {
    let spec = SceneSpec { width: 64, height: 64, frames: 4, colorspace: ColorSpace::Gray };
    let scenes = synth_scenes(spec, 10, 6464).unwrap();
    let m = generate_masks(64, 64, 4, 1, MaskKind::Binary).unwrap();
    let method = Method::Unfold(model);
    let mut ours = Vec::new();
    // worst difference by distance from the nearest seam, in pixels
    let mut by_distance = [0.0f64; 33];
    for x in &scenes {
        let y = forward_measure(x, &m, 0.0, 0).unwrap();
        let full = method.reconstruct(&y, &m, ColorSpace::Gray).unwrap();
        ours.push(psnr(&full, x).unwrap());
        let tiled = tiled_reconstruct(&method, &y, &m, ColorSpace::Gray, (2, 2)).unwrap();
        for t in 0..4 {
            for (i, (a, b)) in full.frame(0, t).iter().zip(tiled.frame(0, t)).enumerate() {
                let (r, c) = (i / 64, i % 64);
                let dist = |p: usize| if p < 32 { 32 - p } else { p - 31 };
                let d = dist(r).min(dist(c));
                by_distance[d] = by_distance[d].max((a - b).abs());
            }
        }
    }
    let rmf = baseline_score(&scenes, &m, rmf_baseline);
    let gain = mean(&ours) - rmf;
    let interior = by_distance[8..].iter().copied().fold(0.0, f64::max);
    let profile: Vec<String> =
        [1, 4, 8, 12, 16, 20, 24, 28, 32].iter().map(|&d| format!("{d}:{:.1e}", by_distance[d])).collect();
    out.report(
        8,
        "scale flexibility",
        gain >= 2.0 && interior <= 1e-4,
        format!(
            "64×64 PSNR {:.2} dB vs reference frames {rmf:.2} dB (+{gain:.2} dB); tiled 2×2 interior (≥8 px) max diff {interior:.2e}; by seam distance [{}]",
            mean(&ours),
            profile.join(" ")
        ),
    );
}

fn color_path(out: &mut Outcome) {
    let start = Instant::now();
    let (cfg, arch) = toy_config(Mode::Color);
    let mut model = UnfoldModel::<f32>::new(arch, 0).unwrap();
    train(&mut model, &cfg, &mut ()).unwrap();
    let spec = SceneSpec { width: 32, height: 32, frames: 4, colorspace: ColorSpace::Rgb };
    let held = synth_scenes(spec, 20, 9002).unwrap();
    let m = generate_masks(32, 32, 4, cfg.mask_seed, cfg.mask_kind).unwrap();
    let s = stage_scores(&model, &held, &m);
    let mosaic_rmf = baseline_score(&held, &m, mosaic_rmf_baseline);

    let rgb = |r: f64, g: f64, b: f64| {
        VideoCube::new(4, 4, 1, ColorSpace::Rgb, [vec![r; 16], vec![g; 16], vec![b; 16]].concat()).unwrap()
    };
    let red = bayer_mosaic(&rgb(1.0, 0.0, 0.0)).unwrap();
    let red_ok = red
        .frame(0, 0)
        .iter()
        .enumerate()
        .all(|(i, &v)| v == if (i / 4) % 2 == 0 && (i % 4) % 2 == 0 { 1.0 } else { 0.0 });
    let white_ok = bayer_mosaic(&rgb(1.0, 1.0, 1.0)).unwrap().data().iter().all(|&v| v == 1.0);
    let secs = start.elapsed().as_secs_f64();
    out.report(
        9,
        "color path",
        s.stage2 > s.stage1 && s.stage2 >= mosaic_rmf + 2.0 && red_ok && white_ok,
        format!(
            "held-out PSNR stage 1 {:.2} dB, stage 2 {:.2} dB (+{:.2}), mosaicked reference frames {mosaic_rmf:.2} dB (+{:.2}); \
             bayer red {red_ok}, white {white_ok}; {secs:.0} s",
            s.stage1,
            s.stage2,
            s.stage2 - s.stage1,
            s.stage2 - mosaic_rmf
        ),
    );
}

fn gap_tv_baseline(out: &mut Outcome) {
    let cfg = GapTvConfig::default();
    let (w, h, t) = (32, 32, 4);
    let m = generate_masks(w, h, t, 1, MaskKind::Binary).unwrap();

    let ramp: Vec<f64> =
        (0..w * h).map(|i| 0.2 + 0.3 * (i % w) as f64 / w as f64 + 0.3 * (i / w) as f64 / h as f64).collect();
    let statics = [
        VideoCube::static_scene(w, h, t, &vec![0.6; w * h]).unwrap(),
        VideoCube::static_scene(w, h, t, &ramp).unwrap(),
    ];
    let static_psnr: Vec<f64> = statics
        .iter()
        .map(|x| psnr(&gap_tv_reconstruct(&forward_measure(x, &m, 0.0, 0).unwrap(), &m, &cfg).unwrap(), x).unwrap())
        .collect();

    let spec = SceneSpec { width: w, height: h, frames: t, colorspace: ColorSpace::Gray };
    let moving = synth_scenes(spec, 10, 777).unwrap();
    let mut deterministic = true;
    let mut tv = Vec::new();
    for x in &moving {
        let y = forward_measure(x, &m, 0.0, 0).unwrap();
        let a = gap_tv_reconstruct(&y, &m, &cfg).unwrap();
        deterministic &= a == gap_tv_reconstruct(&y, &m, &cfg).unwrap();
        tv.push(psnr(&a, x).unwrap());
    }
    let rmf = baseline_score(&moving, &m, rmf_baseline);

    let mut r = rng(55);
    let mut monotone = true;
    for i in 0..50 {
        let x = random_cube(12, 10, 2, &mut r);
        let mode = if i % 2 == 0 { TvMode::Anisotropic } else { TvMode::Isotropic };
        let c = GapTvConfig { tv_weight: r.random_range(0.01..0.3), tv_mode: mode, ..cfg.clone() };
        let z = tv_denoise(&x, &c).unwrap();
        monotone &=
            tv_objective(&z, &x, c.tv_weight, mode).unwrap() <= tv_objective(&x, &x, c.tv_weight, mode).unwrap();
    }
    let static_min = static_psnr.iter().copied().fold(f64::INFINITY, f64::min);
    out.report(
        10,
        "GAP-TV baseline",
        deterministic && static_min >= 40.0 && mean(&tv) > rmf && monotone,
        format!(
            "deterministic {deterministic}; static scenes {} dB; moving scenes {:.2} dB vs reference frames {rmf:.2} dB; \
             objective non-increasing on 50 denoise calls: {monotone}; benchmark-cube comparison not run (optional, no data)",
            static_psnr.iter().map(|p| format!("{p:.1}")).collect::<Vec<_>>().join("/"),
            mean(&tv)
        ),
    );
}

fn metrics(out: &mut Outcome) {
    let a = VideoCube::new(4, 4, 1, ColorSpace::Gray, vec![0.5; 16]).unwrap();
    let b = VideoCube::new(4, 4, 1, ColorSpace::Gray, vec![0.6; 16]).unwrap();
    let p = psnr(&b, &a).unwrap();
    let mut r = rng(77);
    let x = random_cube(32, 32, 3, &mut r);
    let self_ssim = ssim(&x, &x).unwrap();
    let mut gap: f64 = 0.0;
    for k in 0..20 {
        let f = random_cube(32, 32, 1, &mut r);
        let mix = k as f64 / 20.0;
        let g: Vec<f64> = f.data().iter().map(|v| mix * v + (1.0 - mix) * r.random_range(0.0..1.0)).collect();
        gap = gap.max((ssim_frame(f.data(), &g, 32, 32).unwrap() - ssim_reference(f.data(), &g, 32, 32)).abs());
    }
    out.report(
        11,
        "metrics",
        (p - 20.0).abs() <= 1e-9 && self_ssim == 1.0 && gap <= 1e-4,
        format!("PSNR at MSE 0.01 = {p:.12} dB, ssim(x,x) = {self_ssim}, max gap to windowed reference on 20 frames {gap:.2e}"),
    );
}

fn io_reproducibility(out: &mut Outcome) {
    let mut r = rng(88);
    let mut f = VcubFile::new();
    f.push(Record::new("a", vec![3, 2], RecordData::F32((0..6).map(|_| r.random()).collect())).unwrap()).unwrap();
    f.push(Record::new("b", vec![5], RecordData::F64((0..5).map(|_| r.random::<f64>() - 0.5).collect())).unwrap())
        .unwrap();
    f.push(Record::new("c", vec![2, 2, 2], RecordData::U8((0..8).map(|_| r.random()).collect())).unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rt.vcub");
    f.write(&path).unwrap();
    let back = VcubFile::read(&path).unwrap();
    let roundtrip = back == f && back.to_bytes() == std::fs::read(&path).unwrap();

    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"train": {"epochs_per_phase": [1, 1, 1], "samples": 4, "batch_size": 2, "width": 16, "height": 16, "frames": 2, "lr0": 0.001},
            "model": {"channels": 4, "blocks": 1}}"#,
    )
    .unwrap();
    let run_pipeline = |tag: &str| -> Vec<Vec<u8>> {
        let d = dir.path().join(tag);
        std::fs::create_dir_all(&d).unwrap();
        let s = |p: &str| d.join(p).to_string_lossy().into_owned();
        let cfg = cfg.to_string_lossy().into_owned();
        let steps: Vec<Vec<String>> = vec![
            vec![
                "gen-masks".into(),
                "--w".into(),
                "16".into(),
                "--h".into(),
                "16".into(),
                "--t".into(),
                "2".into(),
                "--seed".into(),
                "1".into(),
                "--out".into(),
                s("m.vcub"),
            ],
            vec![
                "synth".into(),
                "--w".into(),
                "16".into(),
                "--h".into(),
                "16".into(),
                "--t".into(),
                "2".into(),
                "--seed".into(),
                "3".into(),
                "--out".into(),
                s("v.vcub"),
            ],
            vec![
                "simulate".into(),
                "--video".into(),
                s("v.vcub"),
                "--mask".into(),
                s("m.vcub"),
                "--sigma".into(),
                "0.01".into(),
                "--noise-seed".into(),
                "4".into(),
                "--out".into(),
                s("y.vcub"),
            ],
            vec![
                "reconstruct".into(),
                "--y".into(),
                s("y.vcub"),
                "--mask".into(),
                s("m.vcub"),
                "--iters".into(),
                "20".into(),
                "--out".into(),
                s("g.vcub"),
            ],
            vec!["train".into(), "--config".into(), cfg, "--out-dir".into(), s("run")],
            vec![
                "reconstruct".into(),
                "--y".into(),
                s("y.vcub"),
                "--mask".into(),
                s("m.vcub"),
                "--method".into(),
                "unfold".into(),
                "--model".into(),
                s("run/model.vcub"),
                "--out".into(),
                s("u.vcub"),
            ],
        ];
        for args in steps {
            let o = Command::new(env!("CARGO_BIN_EXE_snapvcs")).env("VCS_THREADS", "1").args(&args).output().unwrap();
            assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        }
        ["m.vcub", "v.vcub", "y.vcub", "g.vcub", "run/loss.csv", "run/model.vcub", "u.vcub"]
            .iter()
            .map(|p| std::fs::read(d.join(p)).unwrap())
            .collect()
    };
    let a = run_pipeline("a");
    let b = run_pipeline("b");
    let identical = a == b;
    out.report(
        12,
        "I/O",
        roundtrip && identical,
        format!("VCUB write→read bitwise {roundtrip}; single-thread CLI pipeline (masks, synth, simulate, GAP-TV, train, unfold) byte-identical {identical}"),
    );
}

fn main() {
    let mut out = Outcome { failures: 0 };
    projection_correctness(&mut out);
    invertibility(&mut out);
    memory_free_backprop(&mut out);
    kernel_gradchecks(&mut out);
    loss_algebra(&mut out);
    let (model, cfg) = training_sanity(&mut out);
    mask_flexibility(&mut out, &model, &cfg);
    scale_flexibility(&mut out, &model);
    color_path(&mut out);
    gap_tv_baseline(&mut out);
    metrics(&mut out);
    io_reproducibility(&mut out);
    println!("acceptance: {} of 12 criteria passed", 12 - out.failures);
    if out.failures > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some_and(|v| v == "1") {
        std::process::exit(1);
    }
}
