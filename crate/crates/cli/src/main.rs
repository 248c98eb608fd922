//! Command line front end: scene simulation, detection on stored bitmaps,
//! end-to-end pipeline runs, classifier training, model explanation and
//! operation-count benchmarks.
//!
//! Every subcommand is deterministic for a fixed seed; artifacts go to the
//! directory named by `--out` under fixed file names. Exit code 0 means
//! success, 2 means the inputs failed validation.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use serde_json::json;

use svspipe::dataset::{synth_dataset, LabeledDataset};
use svspipe::detect::{compare_detections, connected_components, detect, Blob};
use svspipe::explain::{ale_second_order, importance_csv, permutation_importance};
use svspipe::netpbm::{read_pbm_file, write_pbm_file, write_pgm_file};
use svspipe::pipeline::write_event_log;
use svspipe::svm::{accuracy, extract_features, FEATURE_NAMES};
use svspipe::synth::{all_scenes, scene_config, Scene};
use svspipe::{
    evaluate, load_sequence, run_pipeline, svm_train, Error, GrayFrame, GroundTruth,
    PipelineConfig, RunOutput, SensorState, SvmModel, TrainParams,
};

#[derive(Parser)]
#[command(name = "svspipe", version, about = "Motion-gated detection, classification and tracking pipeline")]
struct Cli {
    /// Pipeline configuration file (JSON); built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for dataset synthesis, training and shuffling.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,

    /// Directory artifacts are written to.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a scripted scene to a PGM frame sequence with ground truth.
    Simulate {
        /// Scene name; see --list.
        #[arg(long, required_unless_present = "list", conflicts_with = "list")]
        scene: Option<String>,
        /// Render full-size 640x480 frames instead of 160x120.
        #[arg(long)]
        vga: bool,
        /// Also write the sensor's motion bitmaps as PBM files.
        #[arg(long)]
        bitmaps: bool,
        /// List available scenes and exit.
        #[arg(long)]
        list: bool,
    },
    /// Propose regions on a stored motion bitmap and compare with labeling.
    Detect {
        /// P4 bitmap file.
        #[arg(long)]
        input: PathBuf,
    },
    /// Run the pipeline over a frame directory or a built-in scene.
    Run {
        /// Directory of PGM frames.
        #[arg(long, required_unless_present = "scene", conflicts_with = "scene")]
        input: Option<PathBuf>,
        /// Built-in scene name instead of stored frames.
        #[arg(long)]
        scene: Option<String>,
        /// Trained model file; a default classifier is trained when omitted.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Ground truth counts file for error reporting.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Deliver every frame, bypassing alarm gating.
        #[arg(long)]
        continuous: bool,
        /// Render the scene at full size (only with --scene).
        #[arg(long)]
        vga: bool,
    },
    /// Train the blob classifier and write it as JSON.
    Train {
        /// Feature CSV; a synthetic dataset is generated when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Rows per class for the synthetic dataset.
        #[arg(long, default_value_t = 132)]
        n_per_class: usize,
        /// Passes over the training rows.
        #[arg(long, default_value_t = 150)]
        epochs: u32,
        /// Regularization strength.
        #[arg(long, default_value_t = 1e-3)]
        lambda: f64,
        /// Fraction of rows trained on; the rest measure held-out accuracy.
        #[arg(long, default_value_t = 0.7)]
        train_frac: f64,
        /// Also write the dataset that was used to <out>/dataset.csv.
        #[arg(long)]
        dump_data: bool,
    },
    /// Permutation importance and a pairwise effect grid for a model.
    Explain {
        /// Trained model file.
        #[arg(long)]
        model: PathBuf,
        /// Feature CSV; a synthetic dataset is generated when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Rows per class for the synthetic dataset.
        #[arg(long, default_value_t = 132)]
        n_per_class: usize,
        /// Shuffles averaged per feature.
        #[arg(long, default_value_t = 20)]
        repeats: usize,
        /// Grid resolution per axis.
        #[arg(long, default_value_t = 10)]
        bins: usize,
        /// First grid feature.
        #[arg(long, default_value = "area")]
        f1: String,
        /// Second grid feature.
        #[arg(long, default_value = "var_y")]
        f2: String,
    },
    /// Report per-stage operation counts for a sequence or scene.
    Bench {
        /// Directory of PGM frames.
        #[arg(long, required_unless_present = "scene", conflicts_with = "scene")]
        input: Option<PathBuf>,
        /// Built-in scene name instead of stored frames.
        #[arg(long)]
        scene: Option<String>,
        /// Trained model file; a default classifier is trained when omitted.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Render the scene at full size (only with --scene).
        #[arg(long)]
        vga: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            // Domain failures mean the inputs need fixing, not the tool.
            if err.downcast_ref::<Error>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate {
            ref scene,
            vga,
            bitmaps,
            list,
        } => {
            if list {
                for s in all_scenes() {
                    println!(
                        "{}  ({} frames, cars {}, pedestrians {})",
                        s.name, s.n_frames, s.truth.car, s.truth.pedestrian
                    );
                }
                return Ok(());
            }
            cmd_simulate(&cli, scene.as_deref().unwrap(), vga, bitmaps)
        }
        Command::Detect { ref input } => cmd_detect(&cli, input),
        Command::Run {
            ref input,
            ref scene,
            ref model,
            ref truth,
            continuous,
            vga,
        } => cmd_run(&cli, input, scene, model, truth, continuous, vga),
        Command::Train {
            ref data,
            n_per_class,
            epochs,
            lambda,
            train_frac,
            dump_data,
        } => cmd_train(&cli, data, n_per_class, epochs, lambda, train_frac, dump_data),
        Command::Explain {
            ref model,
            ref data,
            n_per_class,
            repeats,
            bins,
            ref f1,
            ref f2,
        } => cmd_explain(&cli, model, data, n_per_class, repeats, bins, f1, f2),
        Command::Bench {
            ref input,
            ref scene,
            ref model,
            vga,
        } => cmd_bench(&cli, input, scene, model, vga),
    }
}

/// A CLI-level input mistake, reported with exit code 2.
fn invalid(msg: String) -> anyhow::Error {
    Error::InvalidConfig(msg).into()
}

fn find_scene(name: &str) -> anyhow::Result<Scene> {
    all_scenes().into_iter().find(|s| s.name == name).ok_or_else(|| {
        let known: Vec<String> = all_scenes().into_iter().map(|s| s.name).collect();
        invalid(format!(
            "unknown scene '{name}', expected one of: {}",
            known.join(", ")
        ))
    })
}

/// Scene runs default to the settings the scenes are tuned for; stored
/// sequences default to the stock configuration.
fn load_config(cli: &Cli, scene_input: bool) -> anyhow::Result<PipelineConfig> {
    match &cli.config {
        Some(path) => Ok(PipelineConfig::load(path)?),
        None if scene_input => Ok(scene_config()),
        None => Ok(PipelineConfig::default()),
    }
}

fn load_or_train_model(path: &Option<PathBuf>, seed: u64) -> anyhow::Result<SvmModel> {
    match path {
        Some(p) => Ok(SvmModel::load(p)?),
        None => {
            eprintln!("no --model given; training the built-in synthetic classifier (seed {seed})");
            let ds = synth_dataset(132, seed);
            Ok(svm_train(&ds, &TrainParams { seed, ..TrainParams::default() })?)
        }
    }
}

fn load_frames(
    input: &Option<PathBuf>,
    scene: &Option<String>,
    vga: bool,
) -> anyhow::Result<(Vec<GrayFrame>, Option<GroundTruth>, String)> {
    match (input, scene) {
        (Some(dir), None) => Ok((load_sequence(dir)?, None, dir.display().to_string())),
        (None, Some(name)) => {
            let scene = find_scene(name)?;
            let frames = if vga { scene.frames_vga() } else { scene.frames_qqvga() };
            Ok((frames, Some(scene.truth), format!("scene:{name}")))
        }
        _ => unreachable!("clap enforces exactly one input source"),
    }
}

fn load_dataset(
    data: &Option<PathBuf>,
    n_per_class: usize,
    seed: u64,
) -> anyhow::Result<LabeledDataset> {
    match data {
        Some(path) => Ok(LabeledDataset::load_csv(path)?),
        None => Ok(synth_dataset(n_per_class, seed)),
    }
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn cmd_simulate(cli: &Cli, name: &str, vga: bool, bitmaps: bool) -> anyhow::Result<()> {
    let scene = find_scene(name)?;
    let frame_dir = cli.out.join("frames");
    fs::create_dir_all(&frame_dir).with_context(|| format!("creating {}", frame_dir.display()))?;

    for t in 0..scene.n_frames {
        let frame = if vga { scene.render_vga(t) } else { scene.render_qqvga(t) };
        write_pgm_file(&frame, &frame_dir.join(format!("frame_{t:04}.pgm")))?;
    }

    let truth_path = cli.out.join("truth.json");
    write_text(&truth_path, &serde_json::to_string_pretty(&scene.truth)?)?;

    if bitmaps {
        let bm_dir = cli.out.join("bitmaps");
        fs::create_dir_all(&bm_dir).with_context(|| format!("creating {}", bm_dir.display()))?;
        // The bitmaps come from the small grid regardless of --vga; the
        // full-size render subsamples back to it exactly.
        let mut sensor = SensorState::new(scene_config().sensor)?;
        for t in 0..scene.n_frames {
            let sensed = sensor.observe(&scene.render_qqvga(t))?;
            write_pbm_file(&sensed.bitmap, &bm_dir.join(format!("frame_{t:04}.pbm")))?;
        }
    }

    println!(
        "wrote {} frames to {} (truth: {})",
        scene.n_frames,
        frame_dir.display(),
        truth_path.display()
    );
    Ok(())
}

fn blob_json(blob: &Blob) -> serde_json::Value {
    let features = extract_features(blob).ok();
    json!({
        "box": blob.bbox,
        "area": blob.moments.m00,
        "features": features.map(|f| f.as_array()),
    })
}

fn cmd_detect(cli: &Cli, input: &Path) -> anyhow::Result<()> {
    let config = load_config(cli, false)?;
    config.validate()?;
    let bm = read_pbm_file(input)?;

    let proposals = detect(&bm, &config.detector);
    let components = connected_components(&bm);
    let comparison = compare_detections(&proposals, &components);

    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let report = json!({
        "version": 1,
        "input": input.display().to_string(),
        "proposals": proposals.iter().map(blob_json).collect::<Vec<_>>(),
        "components": components.iter().map(blob_json).collect::<Vec<_>>(),
        "comparison": comparison,
    });
    let path = cli.out.join("detect.json");
    write_text(&path, &serde_json::to_string_pretty(&report)?)?;

    println!(
        "{}: {} proposals, {} components, mean iou {} -> {}",
        input.display(),
        proposals.len(),
        components.len(),
        comparison
            .mean_iou
            .map_or("n/a".into(), |v| format!("{v:.4}")),
        path.display()
    );
    Ok(())
}

fn execute_pipeline(
    cli: &Cli,
    input: &Option<PathBuf>,
    scene: &Option<String>,
    model: &Option<PathBuf>,
    continuous: bool,
    vga: bool,
) -> anyhow::Result<(RunOutput, Option<GroundTruth>, String)> {
    if vga && scene.is_none() {
        return Err(invalid("--vga only applies to --scene inputs".into()));
    }
    let (frames, scene_truth, source) = load_frames(input, scene, vga)?;
    let mut config = load_config(cli, scene.is_some())?;
    if continuous {
        config.continuous = true;
    }
    let model = load_or_train_model(model, cli.seed)?;
    let out = run_pipeline(&frames, &config, &model)?;
    Ok((out, scene_truth, source))
}

fn cmd_run(
    cli: &Cli,
    input: &Option<PathBuf>,
    scene: &Option<String>,
    model: &Option<PathBuf>,
    truth: &Option<PathBuf>,
    continuous: bool,
    vga: bool,
) -> anyhow::Result<()> {
    let (out, scene_truth, source) = execute_pipeline(cli, input, scene, model, continuous, vga)?;

    let truth = match truth {
        Some(path) => Some(GroundTruth::load(path)?),
        None => scene_truth,
    };
    let eval = truth.map(|gt| evaluate(&gt, &out.counts));

    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    write_event_log(&cli.out.join("events.jsonl"), &out.events)?;
    write_text(&cli.out.join("ops.json"), &serde_json::to_string_pretty(&out.ops)?)?;

    let report = json!({
        "version": 1,
        "source": source,
        "counts": out.counts,
        "alarms": out.alarms,
        "delivered_frames": out.delivered_frames,
        "comparison": out.comparison,
        "eval": eval,
    });
    write_text(&cli.out.join("report.json"), &serde_json::to_string_pretty(&report)?)?;

    println!(
        "{source}: cars {}, pedestrians {} ({} alarms, {} frames delivered)",
        out.counts.car, out.counts.pedestrian, out.alarms, out.delivered_frames
    );
    if let Some(eval) = &eval {
        for (name, class) in [("car", &eval.car), ("pedestrian", &eval.pedestrian)] {
            match class.error {
                Some(e) => println!("{name}: true {} tracked {} error {e:+.4}", class.n_true, class.n_tracked),
                None => println!("{name}: true 0 tracked {} error undefined", class.n_tracked),
            }
        }
    }
    println!("artifacts in {}", cli.out.display());
    Ok(())
}

fn cmd_train(
    cli: &Cli,
    data: &Option<PathBuf>,
    n_per_class: usize,
    epochs: u32,
    lambda: f64,
    train_frac: f64,
    dump_data: bool,
) -> anyhow::Result<()> {
    if !(0.0 < train_frac && train_frac <= 1.0) {
        return Err(invalid(format!("--train-frac {train_frac} outside (0, 1]")));
    }
    let ds = load_dataset(data, n_per_class, cli.seed)?;
    let (train, holdout) = ds.split(train_frac, cli.seed);

    let params = TrainParams { lambda, epochs, seed: cli.seed };
    let model = svm_train(&train, &params)?;

    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let model_path = cli.out.join("model.json");
    model.save(&model_path)?;
    if dump_data {
        ds.save_csv(&cli.out.join("dataset.csv"))?;
    }

    print!(
        "trained on {} rows: train accuracy {:.4}",
        train.rows.len(),
        accuracy(&model, &train.rows)
    );
    if holdout.rows.is_empty() {
        println!(" (no held-out rows)");
    } else {
        println!(
            ", held-out accuracy {:.4} on {} rows",
            accuracy(&model, &holdout.rows),
            holdout.rows.len()
        );
    }
    println!("wrote {}", model_path.display());
    Ok(())
}

fn feature_index(name: &str) -> anyhow::Result<usize> {
    FEATURE_NAMES
        .iter()
        .position(|n| *n == name)
        .ok_or_else(|| {
            invalid(format!(
                "unknown feature '{name}', expected one of: {}",
                FEATURE_NAMES.join(", ")
            ))
        })
}

#[allow(clippy::too_many_arguments)]
fn cmd_explain(
    cli: &Cli,
    model: &Path,
    data: &Option<PathBuf>,
    n_per_class: usize,
    repeats: usize,
    bins: usize,
    f1: &str,
    f2: &str,
) -> anyhow::Result<()> {
    let model = SvmModel::load(model)?;
    let ds = load_dataset(data, n_per_class, cli.seed)?;
    let i1 = feature_index(f1)?;
    let i2 = feature_index(f2)?;

    let importance = permutation_importance(&model, &ds, repeats, cli.seed)?;
    let grid = ale_second_order(&model, &ds, i1, i2, bins)?;

    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let imp_path = cli.out.join("importance.csv");
    write_text(&imp_path, &importance_csv(&importance))?;
    let ale_path = cli.out.join(format!("ale_{f1}_{f2}.csv"));
    grid.save_csv(&ale_path)?;

    let mut ranked = importance.clone();
    ranked.sort_by(|a, b| b.mean_drop.total_cmp(&a.mean_drop));
    for fi in &ranked {
        println!("{:<6} accuracy drop {:.4} (std {:.4})", fi.feature, fi.mean_drop, fi.std_drop);
    }
    println!("wrote {} and {}", imp_path.display(), ale_path.display());
    Ok(())
}

fn cmd_bench(
    cli: &Cli,
    input: &Option<PathBuf>,
    scene: &Option<String>,
    model: &Option<PathBuf>,
    vga: bool,
) -> anyhow::Result<()> {
    let (out, _, source) = execute_pipeline(cli, input, scene, model, false, vga)?;

    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let ops_path = cli.out.join("ops.json");
    write_text(&ops_path, &serde_json::to_string_pretty(&out.ops)?)?;

    let t = &out.ops.totals;
    println!("{source}: per-stage operation totals over {} delivered frames", out.delivered_frames);
    for (name, c) in [
        ("sensor", &t.sensor),
        ("detect", &t.detect),
        ("features", &t.features),
        ("classify", &t.classify),
        ("track", &t.track),
        ("labeling baseline", &t.cc_baseline),
    ] {
        println!(
            "  {name:<18} cmp {:>10}  arith {:>10}  mem {:>10}",
            c.comparisons, c.arithmetic, c.memory
        );
    }
    match out.ops.detect_share_of_baseline() {
        Some(share) => println!("detect runs at {:.1}% of the labeling baseline cost", 100.0 * share),
        None => println!("no labeling work recorded; share undefined"),
    }
    println!("wrote {}", ops_path.display());
    Ok(())
}
