//! `autopoly`: experiment harness around the solver library.
//!
//! Exit codes: 0 ok, 2 I/O, 3 config, 4 empty input set, 5 replay mismatch.

mod config;
mod frames;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use autopoly::dataset::{gen_dataset, initial_rect};
use autopoly::estimator::estimate;
use autopoly::image_io::SilhouetteImage;
use autopoly::planner::solve;
use autopoly::reward::compute_reward;
use autopoly::sequence::{ConstructionSequence, SequenceStep};
use autopoly::{Error, Mesh2D, RewardBreakdown};

use config::{parse_res, parse_weights, RunConfig};

const EXIT_IO: u8 = 2;
const EXIT_CONFIG: u8 = 3;
const EXIT_EMPTY: u8 = 4;
const EXIT_REPLAY: u8 = 5;

struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn new(code: u8, msg: impl Into<String>) -> Self {
        Failure { code, msg: msg.into() }
    }

    fn io(err: impl std::fmt::Display) -> Self {
        Failure::new(EXIT_IO, err.to_string())
    }

    fn config(err: impl std::fmt::Display) -> Self {
        Failure::new(EXIT_CONFIG, err.to_string())
    }
}

/// Library errors outside explicit I/O paths: I/O-flavored ones keep exit 2,
/// everything else is a configuration/usage problem.
fn lib_err(err: Error) -> Failure {
    match &err {
        Error::Io(_) | Error::Image(_) => Failure::io(err),
        _ => Failure::config(err),
    }
}

#[derive(Parser)]
#[command(name = "autopoly", version, about = "Silhouette-to-construction-sequence solver")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Raster resolution, e.g. 64x64.
    #[arg(long)]
    res: Option<String>,
    /// Reward weights as sm,sc,si.
    #[arg(long)]
    weights: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    Simple,
    Complex,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Svg,
    Png,
}

#[derive(Subcommand)]
enum Cmd {
    /// Recover a construction sequence for a target silhouette.
    Solve {
        target: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Pure differentiable-rendering baseline with fixed topology.
    BaselineDr {
        target: PathBuf,
        #[arg(long)]
        variant: Variant,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Score result sequences against their dataset targets.
    Eval {
        dataset_dir: PathBuf,
        results_dir: PathBuf,
        /// CSV output path (default: <results_dir>/eval.csv).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Export per-step frames of a construction sequence.
    Render {
        sequence: PathBuf,
        out_dir: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Svg)]
        format: Format,
        #[command(flatten)]
        common: Common,
    },
    /// Generate a synthetic dataset of silhouettes with ground truth.
    Gen {
        out_dir: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn load_run_config(common: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path).map_err(|e| Failure::config(e))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = Some(seed);
    }
    if let Some(res) = &common.res {
        parse_res(res).map_err(Failure::config)?;
        cfg.res = Some(res.clone());
    }
    if let Some(w) = &common.weights {
        let w = parse_weights(w).map_err(Failure::config)?;
        cfg.w_sm = Some(w.w_sm);
        cfg.w_sc = Some(w.w_sc);
        cfg.w_si = Some(w.w_si);
    }
    Ok(cfg)
}

fn summary_line(r: &RewardBreakdown) -> String {
    serde_json::json!({
        "r_sm": r.r_sm,
        "r_sc": r.r_sc,
        "r_si": r.r_si,
        "r_all": r.r_all,
    })
    .to_string()
}

fn write_sequence(seq: &ConstructionSequence, path: &Path) -> Result<(), Failure> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(Failure::io)?;
        }
    }
    let json = serde_json::to_string_pretty(seq).map_err(Failure::io)?;
    std::fs::write(path, json).map_err(Failure::io)
}

fn cmd_solve(target: &Path, out: &Path, common: &Common) -> Result<(), Failure> {
    let run = load_run_config(common)?;
    let planner = run.planner().map_err(Failure::config)?;
    let res = run.resolution().map_err(Failure::config)?;
    let target = SilhouetteImage::load_target(target).map_err(|e| Failure::io(e))?;
    if (target.width, target.height) != res {
        return Err(Failure::config(format!(
            "target is {}x{} but configured resolution is {}x{}",
            target.width, target.height, res.0, res.1
        )));
    }
    let initial = initial_rect(res);
    let seq = solve(&initial, &target, &planner).map_err(lib_err)?;
    let reward = compute_reward(&seq.final_mesh, &target, &planner.weights, res).map_err(lib_err)?;
    write_sequence(&seq, out)?;
    println!("{}", summary_line(&reward));
    Ok(())
}

fn cmd_baseline_dr(target: &Path, variant: Variant, out: &Path, common: &Common) -> Result<(), Failure> {
    let run = load_run_config(common)?;
    let res = run.resolution().map_err(Failure::config)?;
    let optim = run.optim();
    let weights = run.weights();
    let target = SilhouetteImage::load_target(target).map_err(|e| Failure::io(e))?;
    if (target.width, target.height) != res {
        return Err(Failure::config(format!(
            "target is {}x{} but configured resolution is {}x{}",
            target.width, target.height, res.0, res.1
        )));
    }
    let (w, h) = (res.0 as f64, res.1 as f64);
    let initial = match variant {
        Variant::Simple => initial_rect(res),
        Variant::Complex => {
            Mesh2D::new_subdivided_rect([w / 2.0, h / 2.0], w * 0.3125, h * 0.15625).map_err(lib_err)?
        }
    };
    let (geom, _) = estimate(&initial, &target, &optim).map_err(lib_err)?;
    let final_mesh = initial.apply_geom(&geom).map_err(lib_err)?;
    let reward = compute_reward(&final_mesh, &target, &weights, res).map_err(lib_err)?;
    let seq = ConstructionSequence {
        initial,
        steps: vec![SequenceStep { topo: None, geom, reward }],
        final_mesh,
        config_echo: serde_json::json!({
            "baseline": match variant { Variant::Simple => "simple", Variant::Complex => "complex" },
            "optim": optim,
            "weights": weights,
        }),
        seed: run.seed.unwrap_or(0),
    };
    write_sequence(&seq, out)?;
    println!("{}", summary_line(&reward));
    Ok(())
}

fn cmd_eval(dataset_dir: &Path, results_dir: &Path, out: Option<&Path>, common: &Common) -> Result<(), Failure> {
    let run = load_run_config(common)?;
    let weights = run.weights();
    let mut files: Vec<PathBuf> = std::fs::read_dir(results_dir)
        .map_err(Failure::io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|e| e == "json")
                && p.file_name().is_some_and(|n| n != "manifest.json")
                && !p.to_string_lossy().ends_with(".truth.json")
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Failure::new(EXIT_EMPTY, format!("no result sequences in {}", results_dir.display())));
    }

    let mut rows: Vec<(String, RewardBreakdown)> = Vec::new();
    for path in &files {
        let stem = path.file_stem().unwrap().to_string_lossy().to_string();
        let text = std::fs::read_to_string(path).map_err(Failure::io)?;
        let seq: ConstructionSequence = serde_json::from_str(&text).map_err(Failure::io)?;
        seq.verify_replay()
            .map_err(|e| Failure::new(EXIT_REPLAY, format!("{}: {e}", path.display())))?;
        let target_path = dataset_dir.join(format!("{stem}.png"));
        let target = SilhouetteImage::load_target(&target_path).map_err(|e| Failure::io(e))?;
        let res = (target.width, target.height);
        let r = compute_reward(&seq.final_mesh, &target, &weights, res).map_err(lib_err)?;
        rows.push((stem, r));
    }

    let n = rows.len() as f64;
    let mean = RewardBreakdown {
        r_sm: rows.iter().map(|r| r.1.r_sm).sum::<f64>() / n,
        r_sc: rows.iter().map(|r| r.1.r_sc).sum::<f64>() / n,
        r_si: rows.iter().map(|r| r.1.r_si).sum::<f64>() / n,
        r_all: rows.iter().map(|r| r.1.r_all).sum::<f64>() / n,
    };

    let mut csv = String::from("shape,r_sm,r_sc,r_si,r_all\n");
    for (name, r) in &rows {
        csv.push_str(&format!("{name},{},{},{},{}\n", r.r_sm, r.r_sc, r.r_si, r.r_all));
    }
    csv.push_str(&format!("mean,{},{},{},{}\n", mean.r_sm, mean.r_sc, mean.r_si, mean.r_all));
    let csv_path = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| results_dir.join("eval.csv"));
    std::fs::write(&csv_path, &csv).map_err(Failure::io)?;

    println!("{:<12} {:>10} {:>8} {:>6} {:>12}", "shape", "r_sm", "r_sc", "r_si", "r_all");
    for (name, r) in &rows {
        println!("{:<12} {:>10.4} {:>8.1} {:>6.1} {:>12.4}", name, r.r_sm, r.r_sc, r.r_si, r.r_all);
    }
    println!("{:<12} {:>10.4} {:>8.1} {:>6.1} {:>12.4}", "mean", mean.r_sm, mean.r_sc, mean.r_si, mean.r_all);
    Ok(())
}

fn cmd_render(sequence: &Path, out_dir: &Path, format: Format, common: &Common) -> Result<(), Failure> {
    let run = load_run_config(common)?;
    let res = run.resolution().map_err(Failure::config)?;
    let text = std::fs::read_to_string(sequence).map_err(Failure::io)?;
    let seq: ConstructionSequence = serde_json::from_str(&text).map_err(Failure::io)?;
    seq.verify_replay()
        .map_err(|e| Failure::new(EXIT_REPLAY, e.to_string()))?;
    std::fs::create_dir_all(out_dir).map_err(Failure::io)?;

    let mut mesh = seq.initial.clone();
    for i in 0..=seq.steps.len() {
        if i > 0 {
            let step = &seq.steps[i - 1];
            if let Some(topo) = &step.topo {
                mesh = mesh.apply_topo(topo).map_err(lib_err)?;
            }
            mesh = mesh.apply_geom(&step.geom).map_err(lib_err)?;
        }
        match format {
            Format::Svg => frames::write_svg(&mesh, res, &out_dir.join(format!("frame_{i:03}.svg"))),
            Format::Png => frames::write_png(&mesh, res, &out_dir.join(format!("frame_{i:03}.png"))),
        }
        .map_err(lib_err)?;
    }
    Ok(())
}

fn cmd_gen(out_dir: &Path, common: &Common) -> Result<(), Failure> {
    let run = load_run_config(common)?;
    let gen = run.gen().map_err(Failure::config)?;
    let manifest = gen_dataset(&gen, out_dir).map_err(lib_err)?;
    println!("{}", serde_json::json!({ "count": manifest.count, "seed": manifest.seed }));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Solve { target, out, common } => cmd_solve(target, out, common),
        Cmd::BaselineDr { target, variant, out, common } => cmd_baseline_dr(target, *variant, out, common),
        Cmd::Eval { dataset_dir, results_dir, out, common } => {
            cmd_eval(dataset_dir, results_dir, out.as_deref(), common)
        }
        Cmd::Render { sequence, out_dir, format, common } => cmd_render(sequence, out_dir, *format, common),
        Cmd::Gen { out_dir, common } => cmd_gen(out_dir, common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
