//! Command-line front end. Failures print one line `snapvcs-error[<kind>]: <message>`
//! and exit with 2 for usage errors, 1 otherwise.

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::{Result, VcsError};
use crate::gap_tv::{GapTvConfig, TvMode};
use crate::io::{
    export_pgm_ppm, load_checkpoint, load_mask, load_measurement, load_video, mask_from_record, save_checkpoint,
    save_mask, save_measurement, save_video, video_from_record, video_record, write_atomic, RunConfig, VcubFile,
};
use crate::metrics::{eval_flexibility_masks, tiled_reconstruct, EvalReport, Method};
use crate::sensing::{generate_masks, ColorSpace, MaskCube, MaskKind, VideoCube};
use crate::training::{synth_scenes, train, EpochRecord, SceneSpec, TrainLog, TrainObserver};
use crate::unfold_net::{Mode, UnfoldModel};

#[derive(Debug, Parser)]
#[command(name = "snapvcs", version, about = "Snapshot video compressive sensing toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    GapTv,
    Unfold,
    Rmf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SceneKind {
    /// Moving textured objects over a static background.
    Moving,
    /// A smooth static gradient.
    Static,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate seeded modulation masks.
    GenMasks {
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        w: u32,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        h: u32,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        t: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "binary")]
        kind: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate synthetic scenes (one `video` record, or `video0…` for --count > 1).
    Synth {
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        w: u32,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        h: u32,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        t: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
        count: u32,
        #[arg(long)]
        color: bool,
        #[arg(long, value_enum, default_value_t = SceneKind::Moving)]
        kind: SceneKind,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate a snapshot measurement from a video and masks.
    Simulate {
        #[arg(long)]
        video: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        noise_seed: u64,
        /// Sample an RGB video through the RGGB Bayer filter.
        #[arg(long)]
        color: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct a video from a snapshot.
    Reconstruct {
        #[arg(long)]
        y: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[arg(long, value_enum, default_value_t = MethodArg::GapTv)]
        method: MethodArg,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Block grid `RxC` reconstructed independently and stitched.
        #[arg(long, default_value = "1x1")]
        tiles: String,
        /// JSON run configuration supplying the `gap_tv` section.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        tv_weight: Option<f64>,
        #[arg(long)]
        tv_inner_iters: Option<usize>,
        #[arg(long)]
        isotropic: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train an unfolding model on synthetic scenes.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        init_seed: u64,
    },
    /// Evaluate on seen and fresh masks; writes an EvalReport CSV.
    Eval {
        #[arg(long)]
        model: Option<PathBuf>,
        /// VCUB file of scenes (records `video`, `video0`, `video1`, …).
        #[arg(long)]
        suite: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[arg(long, value_enum, default_value_t = MethodArg::Unfold)]
        method: MethodArg,
        /// Training mask; generated from --mask-seed when absent.
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        mask_seed: u64,
        #[arg(long, default_value_t = 3)]
        new_masks: usize,
        #[arg(long, default_value_t = 1000)]
        new_mask_seed: u64,
    },
    /// Export every frame of a video file as PGM/PPM.
    Export {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value = "frame")]
        prefix: String,
    },
}

fn usage(msg: impl Into<String>) -> VcsError {
    VcsError::InvalidArgument(msg.into())
}

fn parse_tiles(s: &str) -> Result<(usize, usize)> {
    let (r, c) = s.split_once(['x', 'X']).ok_or_else(|| usage(format!("--tiles expects RxC, got `{s}`")))?;
    let r: usize = r.trim().parse().map_err(|_| usage(format!("bad tile rows in `{s}`")))?;
    let c: usize = c.trim().parse().map_err(|_| usage(format!("bad tile columns in `{s}`")))?;
    if r == 0 || c == 0 {
        return Err(usage("--tiles needs at least 1x1"));
    }
    Ok((r, c))
}

/// Smooth static gradient, identical in every frame.
fn static_scene(w: usize, h: usize, t: usize, color: bool) -> Result<VideoCube> {
    let plane: Vec<f64> = (0..w * h)
        .map(|i| {
            let (r, c) = ((i / w) as f64, (i % w) as f64);
            0.2 + 0.3 * c / w.max(2) as f64 + 0.3 * r / h.max(2) as f64
        })
        .collect();
    let gray = VideoCube::static_scene(w, h, t, &plane)?;
    if !color {
        return Ok(gray);
    }
    let mut data = Vec::with_capacity(3 * w * h * t);
    for gain in [1.0, 0.8, 0.6] {
        data.extend(gray.data().iter().map(|v| v * gain));
    }
    VideoCube::new(w, h, t, ColorSpace::Rgb, data)
}

fn load_suite(path: &Path) -> Result<Vec<VideoCube>> {
    let f = VcubFile::read(path)?;
    let scenes = f
        .records
        .iter()
        .filter(|r| r.name.starts_with("video"))
        .map(|r| video_from_record(r, path))
        .collect::<Result<Vec<_>>>()?;
    if scenes.is_empty() {
        return Err(VcsError::Format { path: path.to_path_buf(), reason: "suite holds no `video*` records".into() });
    }
    Ok(scenes)
}

struct CliObserver {
    out_dir: PathBuf,
    csv: fs::File,
}

impl TrainObserver<f32> for CliObserver {
    fn epoch_end(&mut self, r: &EpochRecord) -> Result<()> {
        let path = self.out_dir.join("loss.csv");
        writeln!(self.csv, "{}", TrainLog::csv_row(r)).map_err(|e| VcsError::io(&path, e))?;
        println!("epoch {:>3}  phase {}  lr {:.3e}  loss {:.6e}", r.epoch, r.phase, r.lr, r.loss);
        Ok(())
    }

    fn phase_end(&mut self, phase: usize, model: &UnfoldModel<f32>) -> Result<()> {
        save_checkpoint(self.out_dir.join(format!("phase{phase}.vcub")), model)
    }
}

fn run_command(cmd: Command) -> Result<()> {
    match cmd {
        Command::GenMasks { w, h, t, seed, kind, out } => {
            let kind: MaskKind = kind.parse()?;
            let m = generate_masks(w as usize, h as usize, t as usize, seed, kind)?;
            save_mask(&out, &m)
        }
        Command::Synth { w, h, t, seed, count, color, kind, out } => {
            let (w, h, t) = (w as usize, h as usize, t as usize);
            let scenes = match kind {
                SceneKind::Moving => {
                    let cs = if color { ColorSpace::Rgb } else { ColorSpace::Gray };
                    synth_scenes(SceneSpec { width: w, height: h, frames: t, colorspace: cs }, count as usize, seed)?
                }
                SceneKind::Static => vec![static_scene(w, h, t, color)?; count as usize],
            };
            let mut f = VcubFile::new();
            for (i, x) in scenes.iter().enumerate() {
                let name = if count == 1 { "video".to_string() } else { format!("video{i}") };
                f.push(video_record(&name, x)?)?;
            }
            f.write(&out)
        }
        Command::Simulate { video, mask, sigma, noise_seed, color, out } => {
            let x = load_video(&video)?;
            let m = load_mask(&mask)?;
            let y = match (color, x.colorspace()) {
                (false, ColorSpace::Gray) => crate::sensing::forward_measure(&x, &m, sigma, noise_seed)?,
                (true, ColorSpace::Rgb) => crate::sensing::forward_measure_color(&x, &m, sigma, noise_seed)?,
                (false, ColorSpace::Rgb) => return Err(usage("RGB video needs --color")),
                (true, ColorSpace::Gray) => return Err(usage("--color needs an RGB video")),
            };
            save_measurement(&out, &y)
        }
        Command::Reconstruct {
            y,
            mask,
            method,
            model,
            tiles,
            config,
            iters,
            tv_weight,
            tv_inner_iters,
            isotropic,
            out,
        } => {
            let tiles = parse_tiles(&tiles)?;
            let mut gcfg = match &config {
                Some(p) => RunConfig::load(p)?.gap_tv,
                None => GapTvConfig::default(),
            };
            if let Some(v) = iters {
                gcfg.iters = v;
            }
            if let Some(v) = tv_weight {
                gcfg.tv_weight = v;
            }
            if let Some(v) = tv_inner_iters {
                gcfg.tv_inner_iters = v;
            }
            if isotropic {
                gcfg.tv_mode = TvMode::Isotropic;
            }
            let loaded: Option<UnfoldModel<f32>> = match (method, &model) {
                (MethodArg::Unfold, None) => return Err(usage("--method unfold requires --model")),
                (MethodArg::Unfold, Some(p)) => Some(load_checkpoint(p)?),
                _ => None,
            };
            let meas = load_measurement(&y)?;
            let m = load_mask(&mask)?;
            let (method, cs) = match (&loaded, method) {
                (Some(model), _) => (
                    Method::Unfold(model),
                    if model.mode() == Mode::Color { ColorSpace::Rgb } else { ColorSpace::Gray },
                ),
                (None, MethodArg::GapTv) => (Method::GapTv(&gcfg), ColorSpace::Gray),
                (None, _) => (Method::Rmf, ColorSpace::Gray),
            };
            let start = Instant::now();
            let x = tiled_reconstruct(&method, &meas, &m, cs, tiles)?;
            let secs = start.elapsed().as_secs_f64();
            save_video(&out, "x", &x)?;
            println!("seconds {secs:.6}");
            Ok(())
        }
        Command::Train { config, out_dir, init_seed } => {
            let cfg = RunConfig::load(&config)?;
            fs::create_dir_all(&out_dir).map_err(|e| VcsError::io(&out_dir, e))?;
            write_atomic(&out_dir.join("config.json"), cfg.to_json().as_bytes())?;
            let csv_path = out_dir.join("loss.csv");
            let mut csv = fs::File::create(&csv_path).map_err(|e| VcsError::io(&csv_path, e))?;
            writeln!(csv, "{}", TrainLog::csv_header()).map_err(|e| VcsError::io(&csv_path, e))?;
            let mut model = UnfoldModel::<f32>::new(cfg.model.clone(), init_seed)?;
            let mut obs = CliObserver { out_dir: out_dir.clone(), csv };
            match train(&mut model, &cfg.train, &mut obs) {
                Ok(_) => save_checkpoint(out_dir.join("model.vcub"), &model),
                Err(e) => {
                    save_checkpoint(out_dir.join("last_good.vcub"), &model)?;
                    Err(e)
                }
            }
        }
        Command::Eval { model, suite, report, method, mask, mask_seed, new_masks, new_mask_seed } => {
            let scenes = load_suite(&suite)?;
            let x0 = &scenes[0];
            let trained: MaskCube = match &mask {
                Some(p) => {
                    let f = VcubFile::read(p)?;
                    mask_from_record(f.require("mask", p)?, p)?
                }
                None => generate_masks(x0.width(), x0.height(), x0.frames(), mask_seed, MaskKind::Binary)?,
            };
            let loaded: Option<UnfoldModel<f32>> = match (method, &model) {
                (MethodArg::Unfold, None) => return Err(usage("--method unfold requires --model")),
                (MethodArg::Unfold, Some(p)) => Some(load_checkpoint(p)?),
                _ => None,
            };
            let gcfg = GapTvConfig::default();
            let m = match (&loaded, method) {
                (Some(model), _) => Method::Unfold(model),
                (None, MethodArg::GapTv) => Method::GapTv(&gcfg),
                (None, _) => Method::Rmf,
            };
            let rep: EvalReport = eval_flexibility_masks(&m, &scenes, &trained, new_masks, new_mask_seed)?;
            write_atomic(&report, rep.to_csv().as_bytes())?;
            print!("{}", rep.to_table());
            Ok(())
        }
        Command::Export { input, dir, prefix } => {
            let x = load_video(&input)?;
            let mut out = std::io::stdout().lock();
            for p in export_pgm_ppm(&x, &dir, &prefix)? {
                // a closed pipe on stdout is not a failure of the export
                if writeln!(out, "{}", p.display()).is_err() {
                    break;
                }
            }
            Ok(())
        }
    }
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("VCS_THREADS") else {
        return Ok(());
    };
    let n: usize =
        v.trim().parse().map_err(|_| usage(format!("VCS_THREADS must be a non-negative integer, got `{v}`")))?;
    if n > 0 {
        // a pool configured earlier in the process keeps its size
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn report_error(e: &VcsError) -> i32 {
    let msg = e.to_string().replace('\n', " ");
    eprintln!("snapvcs-error[{}]: {msg}", e.kind());
    if matches!(e, VcsError::InvalidArgument(_)) {
        2
    } else {
        1
    }
}

/// Parses `args` (including the program name) and runs the command; returns the exit code.
pub fn run<I, A>(args: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let text = e.to_string();
            let line = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            let line = line.trim_start_matches("error: ");
            eprintln!("snapvcs-error[usage]: {line}");
            return 2;
        }
    };
    if let Err(e) = init_threads() {
        return report_error(&e);
    }
    match run_command(cli.command) {
        Ok(()) => 0,
        Err(e) => report_error(&e),
    }
}
