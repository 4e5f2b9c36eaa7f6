//! `hislr` command-line tool.
//!
//! Exit status is 0 on success, 2 for invalid input or parameters and 3
//! when the solver fails numerically.

mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hislr::data::{build_test_unit, build_training_unit, generate_synthetic, TestMode, TrainMode};
use hislr::experiment::{
    confusion_to_csv, emit_report, report_from_json, report_to_json, report_to_text,
    run_experiment_with, Execution, ExperimentReport, ReportFormat,
};
use hislr::io::{
    load_image_sequence, read_dictionary, read_matrix_csv, write_dictionary, write_matrix_csv,
    Manifest,
};
use hislr::{
    admm_solve, build_dictionary, classify, Dictionary, LabeledUnit, Matrix, SolverConfig,
};
use serde_json::json;

use config::{apply_taus, FileConfig, SolverArgs};

#[derive(Debug, Parser)]
#[command(
    name = "hislr",
    version,
    about = "Sparse + low-rank decomposition and classification of multichannel signals"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Split one signal into D X + L and write X, L, the multiplier and the iteration log.
    Decompose(DecomposeArgs),
    /// Assign one signal to the class with the smallest residual.
    Classify(ClassifyArgs),
    /// Run a repeated train/test experiment and write its report.
    Experiment(ExperimentArgs),
    /// Generate a synthetic dictionary and signal.
    Synth(SynthArgs),
    /// Re-render a JSON experiment report in another format.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Signal matrix as CSV, one column per frame.
    #[arg(long, conflicts_with = "video")]
    signal: Option<PathBuf>,
    /// Directory of PGM frames; the test unit is the first frame plus the last tau-tst - 1.
    #[arg(long)]
    video: Option<PathBuf>,
    #[arg(long = "tau-tst", requires = "video")]
    tau_tst: Option<usize>,
    /// Binary dictionary file, as written by `synth`.
    #[arg(long, conflicts_with = "manifest")]
    dictionary: Option<PathBuf>,
    /// Dataset manifest; every listed video contributes a neutral-subtracted training unit.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long = "tau-trn", requires = "manifest")]
    tau_trn: Option<usize>,
    /// JSON settings file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Debug, Args)]
struct DecomposeArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Directory receiving x.csv, l.csv, multiplier.csv and history.csv.
    #[arg(long = "out-dir")]
    out_dir: PathBuf,
    /// Summary format: text or json.
    #[arg(long, default_value = "text")]
    format: String,
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    #[command(flatten)]
    input: InputArgs,
    /// text, json or csv.
    #[arg(long, default_value = "text")]
    format: String,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long = "tau-trn")]
    tau_trn: Option<usize>,
    #[arg(long = "tau-tst")]
    tau_tst: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repeats: Option<usize>,
    /// csv, json or text.
    #[arg(long, default_value = "text")]
    format: ReportFormat,
    /// Report path without extension. Without it the report goes to stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Classify test units one at a time.
    #[arg(long)]
    serial: bool,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "out-dir")]
    out_dir: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    d: Option<usize>,
    /// Number of classes.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long = "atoms-per-class")]
    atoms_per_class: Option<usize>,
    #[arg(long)]
    tau: Option<usize>,
    /// 0-based class of the generated signal.
    #[arg(long = "active-class")]
    active_class: Option<usize>,
    #[arg(long = "coeff-sparsity")]
    coeff_sparsity: Option<f64>,
    #[arg(long = "neutral-scale")]
    neutral_scale: Option<f64>,
    #[arg(long = "noise-sigma")]
    noise_sigma: Option<f64>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// JSON report written by `experiment --format json`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "text")]
    format: ReportFormat,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Decompose(a) => decompose(a),
        Command::Classify(a) => classify_cmd(a),
        Command::Experiment(a) => experiment(a),
        Command::Synth(a) => synth(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let numeric = err
        .chain()
        .filter_map(|e| e.downcast_ref::<hislr::Error>())
        .any(hislr::Error::is_numeric);
    if numeric {
        3
    } else {
        2
    }
}

struct Problem {
    y: Matrix,
    dictionary: Dictionary,
    solver: SolverConfig,
}

fn load_problem(args: &InputArgs) -> Result<Problem> {
    let file = FileConfig::load(args.config.as_deref())?;
    let mut solver = file.solver();
    args.solver.apply(&mut solver);
    solver.validate()?;

    let y = match (&args.signal, &args.video) {
        (Some(path), _) => read_matrix_csv(path)?,
        (None, Some(dir)) => {
            let v = load_image_sequence(dir, None, "", &dir.display().to_string())?;
            build_test_unit(&v, args.tau_tst.unwrap_or(8), TestMode::FirstPlusLast)?
        }
        (None, None) => bail!(hislr::Error::InvalidInput(
            "give --signal or --video".into()
        )),
    };
    let dictionary = match (&args.dictionary, &args.manifest) {
        (Some(path), _) => read_dictionary(path)?,
        (None, Some(path)) => {
            let base = path.parent().unwrap_or(Path::new("."));
            let tau = args.tau_trn.unwrap_or(8);
            let mut units = Vec::new();
            for v in Manifest::read(path)?.load_videos(base)?.iter().flatten() {
                units.push(LabeledUnit {
                    label: v.label().to_string(),
                    id: v.id().to_string(),
                    matrix: build_training_unit(v, tau, TrainMode::NeutralSubtract)?,
                });
            }
            build_dictionary(&units, file.normalization.unwrap_or_default())?
        }
        (None, None) => bail!(hislr::Error::InvalidInput(
            "give --dictionary or --manifest".into()
        )),
    };
    Ok(Problem {
        y,
        dictionary,
        solver,
    })
}

fn decompose(args: DecomposeArgs) -> Result<()> {
    let p = load_problem(&args.input)?;
    let dec = admm_solve(&p.y, &p.dictionary, &p.solver)?;
    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("cannot create {}", args.out_dir.display()))?;
    write_matrix_csv(&args.out_dir.join("x.csv"), &dec.x)?;
    write_matrix_csv(&args.out_dir.join("l.csv"), &dec.l)?;
    write_matrix_csv(&args.out_dir.join("multiplier.csv"), &dec.multiplier)?;
    let mut history = String::from("iteration,objective,feasibility,rank\n");
    for r in &dec.history {
        let _ = writeln!(
            history,
            "{},{},{},{}",
            r.iteration, r.objective, r.feasibility, r.rank
        );
    }
    let path = args.out_dir.join("history.csv");
    fs::write(&path, history).with_context(|| format!("cannot write {}", path.display()))?;

    let feasibility = dec.final_feasibility().unwrap_or(0.0);
    let y_norm = p.y.norm();
    let relative = if y_norm > 0.0 {
        feasibility / y_norm
    } else {
        0.0
    };
    let rank = dec.final_rank().unwrap_or(0);
    match args.format.as_str() {
        "json" => println!(
            "{}",
            json!({
                "iterations": dec.iterations(),
                "beta": dec.beta,
                "feasibility": feasibility,
                "relative_feasibility": relative,
                "rank": rank,
            })
        ),
        "text" => {
            println!("iterations {}", dec.iterations());
            println!("beta {}", dec.beta);
            println!("feasibility {feasibility:.6e} (relative {relative:.3e})");
            println!("rank {rank}");
        }
        other => bail!(hislr::Error::InvalidParameter(format!(
            "unknown format {other:?}"
        ))),
    }
    Ok(())
}

fn classify_cmd(args: ClassifyArgs) -> Result<()> {
    let p = load_problem(&args.input)?;
    let res = classify(&p.y, &p.dictionary, &p.solver)?;
    let labels = p.dictionary.labels();
    match args.format.as_str() {
        "json" => println!(
            "{}",
            json!({
                "predicted": labels[res.predicted],
                "predicted_index": res.predicted,
                "margin": res.margin,
                "labels": labels,
                "residuals": res.residuals,
                "iterations": res.decomposition.iterations(),
            })
        ),
        "csv" => {
            println!("label,residual");
            for (l, r) in labels.iter().zip(&res.residuals) {
                println!("{l},{r}");
            }
        }
        "text" => {
            for (c, (l, r)) in labels.iter().zip(&res.residuals).enumerate() {
                let mark = if c == res.predicted { " *" } else { "" };
                println!("{l:>12} {r:.6e}{mark}");
            }
            println!("predicted {}", labels[res.predicted]);
        }
        other => bail!(hislr::Error::InvalidParameter(format!(
            "unknown format {other:?}"
        ))),
    }
    Ok(())
}

fn experiment(args: ExperimentArgs) -> Result<()> {
    let mut cfg = FileConfig::load(args.config.as_deref())?.into_experiment();
    args.solver.apply(&mut cfg.solver);
    apply_taus(&mut cfg.source, args.tau_trn, args.tau_tst)?;
    if let Some(seed) = args.seed {
        cfg.rng_seed = seed;
    }
    if let Some(repeats) = args.repeats {
        cfg.repeats = repeats;
    }
    if args.output.is_some() {
        cfg.output = args.output;
    }
    let execution = if args.serial {
        Execution::Serial
    } else {
        Execution::Parallel
    };
    let report = run_experiment_with(&cfg, execution)?;
    present(&report, args.format, cfg.output.as_deref())
}

fn present(report: &ExperimentReport, format: ReportFormat, output: Option<&Path>) -> Result<()> {
    match output {
        Some(stem) => {
            if let Some(dir) = stem.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)
                    .with_context(|| format!("cannot create {}", dir.display()))?;
            }
            for path in emit_report(report, format, stem)? {
                eprintln!("wrote {}", path.display());
            }
            println!(
                "recognition rate {:.4} (std {:.4})",
                report.accuracy_mean, report.accuracy_std
            );
        }
        None => match format {
            ReportFormat::Json => print!("{}", report_to_json(report)),
            ReportFormat::TextTable => print!("{}", report_to_text(report)),
            ReportFormat::Csv => print!("{}", confusion_to_csv(&report.labels, &report.confusion)),
        },
    }
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let mut spec = file.synthetic_spec();
    let set = |slot: &mut usize, v: Option<usize>| {
        if let Some(v) = v {
            *slot = v;
        }
    };
    set(&mut spec.d, args.d);
    set(&mut spec.k, args.k);
    set(&mut spec.atoms_per_class, args.atoms_per_class);
    set(&mut spec.tau, args.tau);
    set(&mut spec.active_class, args.active_class);
    if let Some(seed) = args.seed.or(file.rng_seed) {
        spec.rng_seed = seed;
    }
    if let Some(v) = args.coeff_sparsity {
        spec.coeff_sparsity = v;
    }
    if let Some(v) = args.neutral_scale {
        spec.neutral_scale = v;
    }
    if let Some(v) = args.noise_sigma {
        spec.noise_sigma = v;
    }
    let inst = generate_synthetic(&spec)?;
    let out = &args.out_dir;
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    write_matrix_csv(&out.join("y.csv"), &inst.sample.y)?;
    write_matrix_csv(&out.join("x_true.csv"), &inst.sample.x_true)?;
    write_matrix_csv(&out.join("l_true.csv"), &inst.sample.l_true)?;
    write_dictionary(&out.join("dictionary.bin"), &inst.dictionary)?;
    let spec_path = out.join("spec.json");
    let mut spec_json = serde_json::to_string_pretty(&spec)?;
    spec_json.push('\n');
    fs::write(&spec_path, spec_json)
        .with_context(|| format!("cannot write {}", spec_path.display()))?;
    println!(
        "d={} atoms={} classes={} tau={} class={}",
        spec.d,
        inst.dictionary.len(),
        spec.k,
        spec.tau,
        spec.class_labels()[spec.active_class]
    );
    Ok(())
}

fn report(args: ReportArgs) -> Result<()> {
    let text = fs::read_to_string(&args.input).map_err(|e| hislr::Error::Io {
        path: args.input.clone(),
        source: e,
    })?;
    let report = report_from_json(&text)?;
    present(&report, args.format, args.output.as_deref())
}
