//! `motionforge` command-line interface.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or format error, 3 numeric
//! failure. Failures print one JSON line on standard error.

use clap::{Parser, Subcommand};
use motionforge::gradcam::{gradcam, heatmap_stats};
use motionforge::motion::MotionClass;
use motionforge::nn::{
    load_checkpoint, prepare_slice, resolve, save_checkpoint, train, DatasetManifest, SliceOptions,
    Split,
};
use motionforge::pipeline::{
    aes_report, build_dataset, evaluate_predictions, generate_phantom, infer_volume,
    synthesize_class, thread_count, with_threads, PredictionFile, RunConfig,
};
use motionforge::rng::{derive_seed, stream};
use motionforge::volume::{
    crop_to_foreground_square, normalize_intensity, read_volume, slice_at, stack_slices,
    write_mrvol, write_pgm, write_ppm_overlay,
};
use motionforge::{Error, Result};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "motionforge", version, about = "Motion artifact synthesis, classification and quality metrics for 3D MRI")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate synthetic head phantoms.
    Phantom {
        #[arg(long)]
        n: usize,
        /// Comma-separated dims, e.g. 64,64,64.
        #[arg(long, value_parser = parse_dims)]
        dims: [usize; 3],
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 6)]
        ellipsoids: usize,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Corrupt one volume with motion of the given class.
    Synthesize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_parser = parse_class)]
        class: MotionClass,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a labelled, split dataset from a directory of clean volumes.
    Dataset {
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Manifest path; volumes are written next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the classifier on a manifest's train split.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Checkpoint path.
        #[arg(long)]
        out: PathBuf,
        /// Optional JSON file for per-epoch metrics.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Classify slices of one volume or of a manifest split.
    Infer {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, conflicts_with = "manifest", required_unless_present = "manifest")]
        volume: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, default_value = "test", value_parser = parse_split)]
        split: Split,
        #[arg(long)]
        crop: bool,
        #[arg(long, default_value_t = 2)]
        axis: usize,
        /// Centered block of slices to classify; all slices when omitted.
        #[arg(long)]
        slices: Option<usize>,
        /// Skip per-slice Grad-CAM statistics.
        #[arg(long)]
        no_gradcam: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Grad-CAM heatmap for one slice.
    Gradcam {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        volume: PathBuf,
        #[arg(long)]
        slice: usize,
        #[arg(long, value_parser = parse_class)]
        class: MotionClass,
        #[arg(long)]
        crop: bool,
        #[arg(long, default_value_t = 2)]
        axis: usize,
        /// Heatmap as PGM.
        #[arg(long)]
        out: PathBuf,
        /// Optional PPM overlay on the prepared slice.
        #[arg(long)]
        overlay: Option<PathBuf>,
    },
    /// Score predictions against manifest labels.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-slice average edge strength.
    Aes {
        #[arg(long)]
        volume: PathBuf,
        #[arg(long, default_value_t = 2)]
        axis: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Crop every slice to its foreground square and resample to N x N.
    Crop {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        size: usize,
        #[arg(long, default_value_t = 2)]
        axis: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_dims(s: &str) -> std::result::Result<[usize; 3], String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    parts
        .try_into()
        .map_err(|_| format!("expected three comma-separated sizes, got {s:?}"))
}

fn parse_class(s: &str) -> std::result::Result<MotionClass, String> {
    let v: usize = s.parse().map_err(|e| format!("{s:?}: {e}"))?;
    MotionClass::try_from(v).map_err(|e| e.to_string())
}

fn parse_split(s: &str) -> std::result::Result<Split, String> {
    s.parse::<Split>().map_err(|e| e.to_string())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn manifest_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Phantom {
            n,
            dims,
            seed,
            ellipsoids,
            out,
        } => {
            std::fs::create_dir_all(&out).map_err(|e| Error::Io {
                path: out.clone(),
                source: e,
            })?;
            for i in 0..n {
                let v = generate_phantom(dims, ellipsoids, derive_seed(seed, stream::PHANTOM, i as u64))?;
                write_mrvol(&v, out.join(format!("phantom_{i:03}.mrvol")))?;
            }
            println!("wrote {n} phantoms of {dims:?} to {}", out.display());
        }
        Command::Synthesize {
            input,
            class,
            seed,
            config,
            out,
        } => {
            let config = load_config(config.as_deref())?;
            let clean = normalize_intensity(&read_volume(&input)?);
            let (vol, curve) = synthesize_class(&clean, class, &config, seed)?;
            write_mrvol(&vol, &out)?;
            match curve {
                Some(c) => {
                    let curve_path = out.with_extension("curve.json");
                    c.write(&curve_path)?;
                    println!(
                        "class {} volume written to {} with curve {}",
                        class.index(),
                        out.display(),
                        curve_path.display()
                    );
                }
                None => println!("class 0: normalized copy written to {}", out.display()),
            }
        }
        Command::Dataset { src, config, out } => {
            let config = load_config(config.as_deref())?;
            let built = build_dataset(&src, &out, &config)?;
            let m = &built.manifest;
            println!(
                "{} volumes: train {}, val {}, test {}; manifest {}",
                m.entries.len(),
                m.count(Split::Train),
                m.count(Split::Val),
                m.count(Split::Test),
                out.display()
            );
        }
        Command::Train {
            manifest,
            config,
            out,
            history,
        } => {
            let config = load_config(config.as_deref())?;
            let m = DatasetManifest::read(&manifest)?;
            let outcome = train(&m, &manifest_dir(&manifest), &config.model_config(), &config.train_options())?;
            for e in &outcome.history {
                println!(
                    "epoch {:>3}  loss {:.4}  acc {:.4}  val_loss {:.4}  val_acc {:.4}",
                    e.epoch, e.train_loss, e.train_accuracy, e.val_loss, e.val_accuracy
                );
            }
            save_checkpoint(&out, &outcome.params, Some(&outcome.adam))?;
            if let Some(h) = history {
                write_json(&h, &outcome.history)?;
            }
            println!(
                "{} parameters saved to {}",
                outcome.params.param_count(),
                out.display()
            );
        }
        Command::Infer {
            model,
            volume,
            manifest,
            split,
            crop,
            axis,
            slices,
            no_gradcam,
            out,
        } => {
            let params = load_checkpoint(&model)?.params;
            let opts = SliceOptions {
                axis,
                count: slices,
                crop,
            };
            let mut reports = Vec::new();
            if let Some(v) = volume {
                let vol = read_volume(&v)?;
                reports.push(infer_volume(&params, &vol, &v.to_string_lossy(), &opts, !no_gradcam)?);
            } else if let Some(mpath) = manifest {
                let m = DatasetManifest::read(&mpath)?;
                let base = manifest_dir(&mpath);
                for (_, e) in m.in_split(split) {
                    let vol = read_volume(resolve(&base, &e.path))?;
                    reports.push(infer_volume(&params, &vol, &e.path, &opts, !no_gradcam)?);
                }
            }
            for r in &reports {
                println!(
                    "{}: {} slices, pct [{:.3}, {:.3}, {:.3}], majority {}",
                    r.id,
                    r.slices.len(),
                    r.pct[0],
                    r.pct[1],
                    r.pct[2],
                    r.majority
                );
            }
            write_json(&out, &PredictionFile::new(&opts, reports))?;
        }
        Command::Gradcam {
            model,
            volume,
            slice,
            class,
            crop,
            axis,
            out,
            overlay,
        } => {
            let params = load_checkpoint(&model)?.params;
            let vol = normalize_intensity(&read_volume(&volume)?);
            let prepared = prepare_slice(&slice_at(&vol, axis, slice)?, params.config().input_size, crop);
            let heat = gradcam(&params, &prepared, class.index())?;
            write_pgm(&heat.values, &out)?;
            if let Some(o) = overlay {
                write_ppm_overlay(&prepared, &heat.values, &o)?;
            }
            println!("{}", serde_json::to_string(&heatmap_stats(&heat))?);
        }
        Command::Evaluate { pred, truth, out } => {
            let p = PredictionFile::read(&pred)?;
            let m = DatasetManifest::read(&truth)?;
            let report = evaluate_predictions(&p, &m, &manifest_dir(&truth))?;
            write_json(&out, &report)?;
            println!(
                "accuracy {:.4}  macro precision {:.4}  macro recall {:.4}",
                report.accuracy, report.macro_precision, report.macro_recall
            );
        }
        Command::Aes { volume, axis, out } => {
            let report = aes_report(&read_volume(&volume)?, axis)?;
            write_json(&out, &report)?;
            println!("mean AES {:.6} over {} slices", report.mean, report.per_slice.len());
        }
        Command::Crop {
            input,
            size,
            axis,
            out,
        } => {
            if size < 2 {
                return Err(Error::Argument(format!("crop size must be at least 2, got {size}")));
            }
            let vol = normalize_intensity(&read_volume(&input)?);
            let n = *vol
                .dims()
                .get(axis)
                .ok_or_else(|| Error::Argument(format!("slice axis must be 0, 1 or 2, got {axis}")))?;
            let slices = (0..n)
                .map(|k| Ok(crop_to_foreground_square(&slice_at(&vol, axis, k)?, size).slice))
                .collect::<Result<Vec<_>>>()?;
            write_mrvol(&stack_slices(&slices, [1.0; 3])?, &out)?;
            println!("{n} slices cropped to {size}x{size}, written to {}", out.display());
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Argument(_) => 1,
        Error::Numeric(_) => 3,
        _ => 2,
    }
}

fn fail(code: u8, kind: &str, message: &str) -> ExitCode {
    let line = serde_json::json!({ "error": kind, "message": message });
    eprintln!("{line}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let message = text
                .lines()
                .map(str::trim)
                .take_while(|l| !l.starts_with("Usage:"))
                .filter(|l| !l.is_empty())
                .collect::<Vec<_>>()
                .join(" ");
            return fail(1, "usage", message.trim_start_matches("error: "));
        }
    };
    let result = thread_count().and_then(|n| with_threads(n, || run(cli.command))).and_then(|r| r);
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(exit_code(&e), e.kind(), &e.to_string()),
    }
}
