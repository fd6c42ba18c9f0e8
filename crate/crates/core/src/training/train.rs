use std::fmt::Write as _;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, VcsError};
use crate::kernels::{Adam, Real, Tape, Tensor, Var};
use crate::projection::BatchSensing;
use crate::sensing::{
    forward_measure, forward_measure_color, generate_masks, ColorSpace, MaskCube, Measurement, VideoCube,
};
use crate::unfold_net::{Mode, UnfoldModel};

use super::config::TrainConfig;
use super::loss::stage_weights;
use super::synth::{synth_scenes, SceneSpec};

/// One row of the loss log.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    /// Epoch index counted over the whole run.
    pub epoch: usize,
    /// 1, 2 or 3.
    pub phase: usize,
    pub lr: f64,
    /// Mean training loss over the epoch's batches.
    pub loss: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    /// Loss of the first batch of each phase that ran.
    pub first_batch_loss: Vec<(usize, f64)>,
}

impl TrainLog {
    pub fn phase(&self, phase: usize) -> impl Iterator<Item = &EpochRecord> {
        self.epochs.iter().filter(move |r| r.phase == phase)
    }

    pub fn csv_header() -> &'static str {
        "epoch,phase,lr,loss"
    }

    pub fn csv_row(r: &EpochRecord) -> String {
        format!("{},{},{:e},{:.9e}", r.epoch, r.phase, r.lr, r.loss)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{}", Self::csv_header()).expect("string write");
        for r in &self.epochs {
            writeln!(s, "{}", Self::csv_row(r)).expect("string write");
        }
        s
    }
}

/// Callbacks invoked during [`train`].
pub trait TrainObserver<T: Real> {
    fn epoch_end(&mut self, _record: &EpochRecord) -> Result<()> {
        Ok(())
    }

    fn phase_end(&mut self, _phase: usize, _model: &UnfoldModel<T>) -> Result<()> {
        Ok(())
    }
}

impl<T: Real> TrainObserver<T> for () {}

/// One phase of the schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasePlan {
    pub phase: usize,
    pub epochs: usize,
    /// Per-stage trainable flags for the stages that are evaluated.
    pub trainable: Vec<bool>,
    /// Loss weight of each evaluated stage's output.
    pub weights: Vec<f64>,
}

/// Stage-by-stage plan for two stages; any other depth trains end to end.
pub fn phase_plan(cfg: &TrainConfig, stages: usize) -> Vec<PhasePlan> {
    let [e1, e2, e3] = cfg.epochs_per_phase;
    if stages == 2 {
        vec![
            PhasePlan { phase: 1, epochs: e1, trainable: vec![true], weights: vec![1.0] },
            PhasePlan { phase: 2, epochs: e2, trainable: vec![false, true], weights: vec![0.0, 1.0] },
            PhasePlan { phase: 3, epochs: e3, trainable: vec![true, true], weights: vec![0.5, 1.0] },
        ]
    } else {
        vec![PhasePlan {
            phase: 3,
            epochs: e1 + e2 + e3,
            trainable: vec![true; stages],
            weights: stage_weights(stages),
        }]
    }
}

fn scene_spec(cfg: &TrainConfig) -> SceneSpec {
    SceneSpec {
        width: cfg.width,
        height: cfg.height,
        frames: cfg.frames,
        colorspace: match cfg.mode {
            Mode::Gray => ColorSpace::Gray,
            Mode::Color => ColorSpace::Rgb,
        },
    }
}

/// `cfg.samples` seeded, augmented training scenes.
pub fn synth_dataset(cfg: &TrainConfig) -> Result<Vec<VideoCube>> {
    synth_scenes(scene_spec(cfg), cfg.samples, cfg.seed)
}

/// Snapshot of `x` under `m` for the model's mode.
pub fn measure(mode: Mode, x: &VideoCube, m: &MaskCube, sigma: f64, noise_seed: u64) -> Result<Measurement> {
    match mode {
        Mode::Gray => forward_measure(x, m, sigma, noise_seed),
        Mode::Color => forward_measure_color(x, m, sigma, noise_seed),
    }
}

struct Batch<T: Real> {
    sensing: Arc<BatchSensing<T>>,
    truth: Tensor<T>,
}

fn make_batch<T: Real>(
    scenes: &[VideoCube],
    indices: &[usize],
    measurements: &[(Measurement, MaskCube)],
) -> Result<Batch<T>> {
    let items: Vec<(&Measurement, &MaskCube)> =
        indices.iter().map(|&i| (&measurements[i].0, &measurements[i].1)).collect();
    let truth = Tensor::stack_batch(&indices.iter().map(|&i| scenes[i].to_tensor::<T>()).collect::<Vec<_>>())?;
    Ok(Batch { sensing: Arc::new(BatchSensing::new(&items)?), truth })
}

/// Weighted per-stage MSE on a fresh tape; returns the tape, the loss node and the stage bindings.
fn batch_loss<T: Real>(
    model: &UnfoldModel<T>,
    sensing: &Arc<BatchSensing<T>>,
    truth: Tensor<T>,
    plan: &PhasePlan,
) -> Result<(Tape<T>, Var, Vec<Vec<Var>>)> {
    let mut tape = Tape::new();
    let fwd = model.forward_tape(&mut tape, sensing, &plan.trainable, true)?;
    let target = tape.input(truth, false);
    let mut loss: Option<Var> = None;
    for (&out, &w) in fwd.stage_outputs.iter().zip(&plan.weights) {
        if w == 0.0 {
            continue;
        }
        let mut l = tape.mse(out, target)?;
        if w != 1.0 {
            l = tape.scale(l, w);
        }
        loss = Some(match loss {
            Some(acc) => tape.add(acc, l)?,
            None => l,
        });
    }
    let loss = loss.ok_or_else(|| VcsError::Config("phase has no weighted stage".into()))?;
    let vars = fwd.stages.iter().map(|s| s.vars()).collect();
    Ok((tape, loss, vars))
}

/// Weighted loss of one batch under `plan` and the gradient of every model parameter,
/// in [`UnfoldModel::named_params`] order; frozen or unevaluated stages get `None`.
pub fn loss_and_grads<T: Real>(
    model: &UnfoldModel<T>,
    sensing: &Arc<BatchSensing<T>>,
    truth: Tensor<T>,
    plan: &PhasePlan,
) -> Result<(f64, Vec<Option<Tensor<T>>>)> {
    let (tape, loss, vars) = batch_loss(model, sensing, truth, plan)?;
    let value = tape.value(loss).data()[0].as_f64();
    if !value.is_finite() {
        return Ok((value, Vec::new()));
    }
    let mut grads = tape.backward_scalar(loss)?;
    let mut flat = Vec::new();
    for (j, stage) in model.stages.iter().enumerate() {
        match vars.get(j) {
            Some(vs) if plan.trainable[j] => flat.extend(vs.iter().map(|&v| grads.take(v))),
            _ => flat.extend(stage.params().iter().map(|_| None)),
        }
    }
    Ok((value, flat))
}

/// Phased training. On a non-finite loss or gradient the run stops with a numeric
/// error and `model` keeps the parameters of the last successful step.
pub fn train<T: Real>(
    model: &mut UnfoldModel<T>,
    cfg: &TrainConfig,
    observer: &mut dyn TrainObserver<T>,
) -> Result<TrainLog> {
    cfg.validate()?;
    if cfg.mode != model.mode() {
        return Err(VcsError::Config(format!(
            "train.mode {:?} does not match model mode {:?}",
            cfg.mode,
            model.mode()
        )));
    }
    let scenes = synth_dataset(cfg)?;
    let fixed_mask = generate_masks(cfg.width, cfg.height, cfg.frames, cfg.mask_seed, cfg.mask_kind)?;
    let mut measurements = scenes
        .iter()
        .enumerate()
        .map(|(i, x)| {
            Ok((measure(cfg.mode, x, &fixed_mask, cfg.noise_sigma, cfg.seed ^ i as u64)?, fixed_mask.clone()))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x9e37_79b9));
    let mut log = TrainLog::default();
    let mut global_epoch = 0;
    for plan in phase_plan(cfg, model.stages.len()) {
        let shapes: Vec<Vec<usize>> =
            model.stages.iter().flat_map(|s| s.params()).map(|p| p.shape().to_vec()).collect();
        let shape_refs: Vec<&[usize]> = shapes.iter().map(Vec::as_slice).collect();
        let mut adam = Adam::<T>::new(&shape_refs);
        for e in 0..plan.epochs {
            let lr = cfg.lr(e);
            let mut order: Vec<usize> = (0..scenes.len()).collect();
            order.shuffle(&mut rng);
            let mut total = 0.0;
            let mut batches = 0usize;
            for idx in order.chunks(cfg.batch_size) {
                if cfg.resample_masks_per_batch {
                    let m = generate_masks(cfg.width, cfg.height, cfg.frames, rng.random(), cfg.mask_kind)?;
                    for &i in idx {
                        let y = measure(cfg.mode, &scenes[i], &m, cfg.noise_sigma, rng.random())?;
                        measurements[i] = (y, m.clone());
                    }
                }
                let batch = make_batch::<T>(&scenes, idx, &measurements)?;
                let (value, mut flat) = loss_and_grads(model, &batch.sensing, batch.truth, &plan)?;
                if !value.is_finite() {
                    return Err(VcsError::Numeric(format!(
                        "non-finite training loss in phase {} epoch {e}",
                        plan.phase
                    )));
                }
                if batches == 0 && e == 0 {
                    log.first_batch_loss.push((plan.phase, value));
                }
                clip_global_norm(&mut flat, cfg.grad_clip)?;
                let grad_refs: Vec<Option<&Tensor<T>>> = flat.iter().map(Option::as_ref).collect();
                let mut params: Vec<&mut Tensor<T>> = model.stages.iter_mut().flat_map(|s| s.params_mut()).collect();
                adam.step(lr, &mut params, &grad_refs)?;
                total += value;
                batches += 1;
            }
            let record = EpochRecord { epoch: global_epoch, phase: plan.phase, lr, loss: total / batches as f64 };
            observer.epoch_end(&record)?;
            log.epochs.push(record);
            global_epoch += 1;
        }
        observer.phase_end(plan.phase, model)?;
    }
    Ok(log)
}

/// Rescales all gradients so their joint L2 norm is at most `max_norm`.
pub fn clip_global_norm<T: Real>(grads: &mut [Option<Tensor<T>>], max_norm: f64) -> Result<f64> {
    let norm = grads.iter().flatten().map(|g| g.sq_norm().as_f64()).sum::<f64>().sqrt();
    if !norm.is_finite() {
        return Err(VcsError::Numeric("non-finite gradient norm".into()));
    }
    if norm > max_norm {
        let k = T::from_f64_lossy(max_norm / norm);
        for g in grads.iter_mut().flatten() {
            *g = g.scale(k);
        }
    }
    Ok(norm)
}
