//! Repeated randomized train/test experiments and their reports.
//!
//! Every repeat draws its own seed from the master seed, builds a
//! dictionary from that repeat's training split and classifies every test
//! unit. Counts are pooled over repeats into a confusion matrix whose rows
//! are ground truth and columns predictions.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{
    build_test_unit, build_training_unit, equispaced_subvideos, synthetic_dictionary,
    synthetic_sample, SyntheticSpec, TestMode, TrainMode, VideoSequence,
};
use crate::error::{Error, Result};
use crate::io::Manifest;
use crate::model::{build_dictionary, classify, Dictionary, LabeledUnit, Normalization};
use crate::solvers::SolverConfig;
use crate::Matrix;

/// How units are cut from each class's videos.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Protocol {
    /// One unit per video. Training units are neutral-subtracted tails,
    /// test units are the first frame plus the tail.
    Expression,
    /// Every video is cut into interleaved sub-videos, which become the
    /// units; frames are used raw.
    ActionUnit {
        subvideos: usize,
        frames_per_subvideo: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataSource {
    /// Fresh random dictionary per repeat; `test_per_class` signals are
    /// drawn for every class. `spec.rng_seed` and `spec.active_class` are
    /// replaced by the runner.
    Synthetic {
        spec: SyntheticSpec,
        test_per_class: usize,
    },
    Dataset {
        manifest: PathBuf,
        protocol: Protocol,
        train_per_class: usize,
        test_per_class: usize,
        tau_trn: usize,
        tau_tst: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub source: DataSource,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub normalization: Normalization,
    #[serde(default)]
    pub rng_seed: u64,
    /// Leave diverged units out of the accuracy denominator instead of
    /// counting them as errors.
    #[serde(default)]
    pub exclude_diverged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn default_repeats() -> usize {
    20
}

impl ExperimentConfig {
    pub fn synthetic(spec: SyntheticSpec, test_per_class: usize) -> Self {
        ExperimentConfig {
            source: DataSource::Synthetic {
                spec,
                test_per_class,
            },
            repeats: default_repeats(),
            solver: SolverConfig::default(),
            normalization: Normalization::default(),
            rng_seed: 0,
            exclude_diverged: false,
            output: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::param("repeats must be at least 1"));
        }
        self.solver.validate()?;
        match &self.source {
            DataSource::Synthetic {
                spec,
                test_per_class,
            } => {
                spec.validate()?;
                if *test_per_class == 0 {
                    return Err(Error::param("test_per_class must be at least 1"));
                }
            }
            DataSource::Dataset {
                train_per_class,
                test_per_class,
                tau_trn,
                tau_tst,
                protocol,
                ..
            } => {
                if *train_per_class == 0 || *test_per_class == 0 {
                    return Err(Error::param("split counts must be at least 1"));
                }
                if *tau_trn == 0 || *tau_tst == 0 {
                    return Err(Error::param("tau_trn and tau_tst must be positive"));
                }
                if let Protocol::ActionUnit {
                    subvideos,
                    frames_per_subvideo,
                } = protocol
                {
                    if *subvideos == 0 || *frames_per_subvideo < 2 {
                        return Err(Error::param("sub-video counts are too small"));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub total: usize,
    pub correct: usize,
    pub diverged: usize,
    /// Correct units over scored units.
    pub accuracy: f64,
    /// Mean of the per-class correct rates.
    pub class_averaged_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub labels: Vec<String>,
    /// Raw counts pooled over repeats; `counts[truth][predicted]`.
    pub counts: Vec<Vec<usize>>,
    /// `counts` with every nonempty row scaled to sum to one.
    pub confusion: Vec<Vec<f64>>,
    /// Diagonal of `confusion`.
    pub sensitivity: Vec<f64>,
    /// Mean and population standard deviation of the per-run unit accuracy.
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub class_averaged_mean: f64,
    pub class_averaged_std: f64,
    pub diverged_units: usize,
    pub runs: Vec<RunRecord>,
    pub config: ExperimentConfig,
}

struct Split {
    dictionary: Dictionary,
    tests: Vec<(usize, Matrix)>,
}

fn run_seeds(master: u64, repeats: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    (0..repeats).map(|_| rng.next_u64()).collect()
}

fn synthetic_split(spec: &SyntheticSpec, test_per_class: usize, seed: u64) -> Result<Split> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dictionary = synthetic_dictionary(spec, &mut rng)?;
    let mut tests = Vec::with_capacity(spec.k * test_per_class);
    for class in 0..spec.k {
        for _ in 0..test_per_class {
            tests.push((
                class,
                synthetic_sample(&dictionary, spec, class, &mut rng)?.y,
            ));
        }
    }
    Ok(Split { dictionary, tests })
}

/// Units available per class, in ascending label order.
fn dataset_pools(
    classes: &[(String, Vec<VideoSequence>)],
    protocol: Protocol,
) -> Result<Vec<Vec<VideoSequence>>> {
    classes
        .iter()
        .map(|(_, videos)| match protocol {
            Protocol::Expression => Ok(videos.clone()),
            Protocol::ActionUnit {
                subvideos,
                frames_per_subvideo,
            } => {
                let mut pool = Vec::new();
                for v in videos {
                    pool.extend(equispaced_subvideos(v, subvideos, frames_per_subvideo)?);
                }
                Ok(pool)
            }
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn dataset_split(
    labels: &[String],
    pools: &[Vec<VideoSequence>],
    protocol: Protocol,
    train_per_class: usize,
    test_per_class: usize,
    tau_trn: usize,
    tau_tst: usize,
    normalization: Normalization,
    seed: u64,
) -> Result<Split> {
    let (train_mode, test_mode) = match protocol {
        Protocol::Expression => (TrainMode::NeutralSubtract, TestMode::FirstPlusLast),
        Protocol::ActionUnit { .. } => (TrainMode::Raw, TestMode::RawWindow),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut training = Vec::new();
    let mut tests = Vec::new();
    for (class, pool) in pools.iter().enumerate() {
        if pool.len() < train_per_class + test_per_class {
            return Err(Error::input(format!(
                "class {:?} has {} units, split needs {}",
                labels[class],
                pool.len(),
                train_per_class + test_per_class
            )));
        }
        let mut order: Vec<usize> = (0..pool.len()).collect();
        order.shuffle(&mut rng);
        for &i in &order[..train_per_class] {
            let v = &pool[i];
            training.push(LabeledUnit {
                label: labels[class].clone(),
                id: v.id().to_string(),
                matrix: build_training_unit(v, tau_trn, train_mode)?,
            });
        }
        for &i in &order[train_per_class..train_per_class + test_per_class] {
            tests.push((class, build_test_unit(&pool[i], tau_tst, test_mode)?));
        }
    }
    Ok(Split {
        dictionary: build_dictionary(&training, normalization)?,
        tests,
    })
}

/// Predicted class per test unit, `None` where the solver failed numerically.
fn classify_all(
    split: &Split,
    solver: &SolverConfig,
    execution: Execution,
) -> Result<Vec<(usize, Option<usize>)>> {
    let one = |(truth, y): &(usize, Matrix)| -> Result<(usize, Option<usize>)> {
        match classify(y, &split.dictionary, solver) {
            Ok(res) => Ok((*truth, Some(res.predicted))),
            Err(e) if e.is_numeric() => Ok((*truth, None)),
            Err(e) => Err(e),
        }
    };
    match execution {
        Execution::Serial => split.tests.iter().map(one).collect(),
        Execution::Parallel => split.tests.par_iter().map(one).collect(),
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_experiment_with(cfg, Execution::default())
}

pub fn run_experiment_with(
    cfg: &ExperimentConfig,
    execution: Execution,
) -> Result<ExperimentReport> {
    cfg.validate()?;

    let (labels, pools) = match &cfg.source {
        DataSource::Synthetic { spec, .. } => (spec.class_labels(), Vec::new()),
        DataSource::Dataset {
            manifest, protocol, ..
        } => {
            let base = manifest.parent().unwrap_or(Path::new("."));
            let videos = Manifest::read(manifest)?.load_videos(base)?;
            // dictionaries order classes by label
            let mut classes: Vec<(String, Vec<VideoSequence>)> = Vec::new();
            for class_videos in videos {
                let label = match class_videos.first() {
                    Some(v) => v.label().to_string(),
                    None => continue,
                };
                match classes.iter_mut().find(|(l, _)| *l == label) {
                    Some((_, vs)) => vs.extend(class_videos),
                    None => classes.push((label, class_videos)),
                }
            }
            classes.sort_by(|a, b| a.0.cmp(&b.0));
            let labels = classes.iter().map(|(l, _)| l.clone()).collect();
            (labels, dataset_pools(&classes, *protocol)?)
        }
    };
    if labels.is_empty() {
        return Err(Error::input("dataset has no classes"));
    }

    let k = labels.len();
    let mut counts = vec![vec![0usize; k]; k];
    let mut runs = Vec::with_capacity(cfg.repeats);
    let mut diverged_units = 0;

    for seed in run_seeds(cfg.rng_seed, cfg.repeats) {
        let split = match &cfg.source {
            DataSource::Synthetic {
                spec,
                test_per_class,
            } => synthetic_split(spec, *test_per_class, seed)?,
            DataSource::Dataset {
                protocol,
                train_per_class,
                test_per_class,
                tau_trn,
                tau_tst,
                ..
            } => dataset_split(
                &labels,
                &pools,
                *protocol,
                *train_per_class,
                *test_per_class,
                *tau_trn,
                *tau_tst,
                cfg.normalization,
                seed,
            )?,
        };
        let outcomes = classify_all(&split, &cfg.solver, execution)?;

        let mut class_total = vec![0usize; k];
        let mut class_correct = vec![0usize; k];
        let mut diverged = 0;
        for &(truth, predicted) in &outcomes {
            match predicted {
                Some(p) => {
                    counts[truth][p] += 1;
                    class_total[truth] += 1;
                    if p == truth {
                        class_correct[truth] += 1;
                    }
                }
                None => {
                    diverged += 1;
                    if !cfg.exclude_diverged {
                        class_total[truth] += 1;
                    }
                }
            }
        }
        diverged_units += diverged;
        let total: usize = class_total.iter().sum();
        let correct: usize = class_correct.iter().sum();
        let rates: Vec<f64> = class_total
            .iter()
            .zip(&class_correct)
            .filter(|(t, _)| **t > 0)
            .map(|(t, c)| *c as f64 / *t as f64)
            .collect();
        runs.push(RunRecord {
            seed,
            total: outcomes.len(),
            correct,
            diverged,
            accuracy: if total > 0 {
                correct as f64 / total as f64
            } else {
                0.0
            },
            class_averaged_accuracy: if rates.is_empty() {
                0.0
            } else {
                mean_std(&rates).0
            },
        });
    }

    let confusion: Vec<Vec<f64>> = counts
        .iter()
        .map(|row| {
            let sum: usize = row.iter().sum();
            row.iter()
                .map(|&c| if sum > 0 { c as f64 / sum as f64 } else { 0.0 })
                .collect()
        })
        .collect();
    let sensitivity = (0..k).map(|c| confusion[c][c]).collect();
    let accuracies: Vec<f64> = runs.iter().map(|r| r.accuracy).collect();
    let averaged: Vec<f64> = runs.iter().map(|r| r.class_averaged_accuracy).collect();
    let (accuracy_mean, accuracy_std) = mean_std(&accuracies);
    let (class_averaged_mean, class_averaged_std) = mean_std(&averaged);

    Ok(ExperimentReport {
        labels,
        counts,
        confusion,
        sensitivity,
        accuracy_mean,
        accuracy_std,
        class_averaged_mean,
        class_averaged_std,
        diverged_units,
        runs,
        config: cfg.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportFormat {
    Csv,
    Json,
    TextTable,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "text" | "text-table" | "table" => Ok(ReportFormat::TextTable),
            other => Err(Error::param(format!("unknown report format {other:?}"))),
        }
    }
}

pub fn report_to_json(r: &ExperimentReport) -> String {
    let mut s = serde_json::to_string_pretty(r).expect("report serializes");
    s.push('\n');
    s
}

pub fn report_from_json(text: &str) -> Result<ExperimentReport> {
    serde_json::from_str(text).map_err(|e| Error::input(format!("bad report JSON: {e}")))
}

/// Confusion matrix as CSV: a header of predicted labels, then one row per
/// ground-truth class.
pub fn confusion_to_csv(labels: &[String], confusion: &[Vec<f64>]) -> String {
    let mut out = String::from("truth");
    for l in labels {
        out.push(',');
        out.push_str(l);
    }
    out.push('\n');
    for (label, row) in labels.iter().zip(confusion) {
        out.push_str(label);
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn parse_confusion_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let bad = |e: &dyn std::fmt::Display| Error::input(format!("bad confusion CSV: {e}"));
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let labels: Vec<String> = reader
        .headers()
        .map_err(|e| bad(&e))?
        .iter()
        .skip(1)
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| bad(&e))?;
        let row = record
            .iter()
            .skip(1)
            .map(|f| f.parse::<f64>().map_err(|e| bad(&e)))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok((labels, rows))
}

fn sensitivity_to_csv(r: &ExperimentReport) -> String {
    let mut out = String::from("class,sensitivity\n");
    for (l, s) in r.labels.iter().zip(&r.sensitivity) {
        let _ = writeln!(out, "{l},{s}");
    }
    out
}

fn runs_to_csv(r: &ExperimentReport) -> String {
    let mut out = String::from("seed,total,correct,diverged,accuracy,class_averaged_accuracy\n");
    for run in &r.runs {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            run.seed,
            run.total,
            run.correct,
            run.diverged,
            run.accuracy,
            run.class_averaged_accuracy
        );
    }
    out
}

/// Fixed-width table: rows are ground truth, columns predictions, then
/// the sensitivity row and summary statistics.
pub fn report_to_text(r: &ExperimentReport) -> String {
    let width = r.labels.iter().map(String::len).max().unwrap_or(0).max(5);
    let mut out = String::new();
    let _ = write!(out, "{:>width$}", "");
    for l in &r.labels {
        let _ = write!(out, " | {l:>width$}");
    }
    out.push('\n');
    let rule = "-".repeat(width + r.labels.len() * (width + 3));
    let _ = writeln!(out, "{rule}");
    for (l, row) in r.labels.iter().zip(&r.confusion) {
        let _ = write!(out, "{l:>width$}");
        for v in row {
            let _ = write!(out, " | {v:>width$.2}");
        }
        out.push('\n');
    }
    let _ = writeln!(out, "{rule}");
    let _ = write!(out, "{:>width$}", "sens");
    for s in &r.sensitivity {
        let _ = write!(out, " | {s:>width$.2}");
    }
    out.push('\n');
    let _ = writeln!(
        out,
        "\nrecognition rate {:.4} (std {:.4}); class-averaged {:.4} (std {:.4}); {} runs, {} diverged units",
        r.accuracy_mean,
        r.accuracy_std,
        r.class_averaged_mean,
        r.class_averaged_std,
        r.runs.len(),
        r.diverged_units
    );
    out
}

/// Writes the report next to `stem` and returns the files written:
/// `<stem>.json`, `<stem>.txt`, or `<stem>_{confusion,sensitivity,runs}.csv`.
pub fn emit_report(
    r: &ExperimentReport,
    format: ReportFormat,
    stem: &Path,
) -> Result<Vec<PathBuf>> {
    let with_suffix = |suffix: &str| {
        let mut name = stem.as_os_str().to_owned();
        name.push(suffix);
        PathBuf::from(name)
    };
    let files: Vec<(PathBuf, String)> = match format {
        ReportFormat::Json => vec![(with_suffix(".json"), report_to_json(r))],
        ReportFormat::TextTable => vec![(with_suffix(".txt"), report_to_text(r))],
        ReportFormat::Csv => vec![
            (
                with_suffix("_confusion.csv"),
                confusion_to_csv(&r.labels, &r.confusion),
            ),
            (with_suffix("_sensitivity.csv"), sensitivity_to_csv(r)),
            (with_suffix("_runs.csv"), runs_to_csv(r)),
        ],
    };
    for (path, contents) in &files {
        fs::write(path, contents).map_err(|e| Error::io(path, e))?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn perfect_report(k: usize) -> ExperimentReport {
        let labels: Vec<String> = (0..k).map(|c| format!("L{c}")).collect();
        let counts: Vec<Vec<usize>> = (0..k)
            .map(|i| (0..k).map(|j| if i == j { 3 } else { 0 }).collect())
            .collect();
        let confusion = counts
            .iter()
            .map(|r| r.iter().map(|&c| c as f64 / 3.0).collect())
            .collect();
        ExperimentReport {
            labels,
            counts,
            confusion,
            sensitivity: vec![1.0; k],
            accuracy_mean: 1.0,
            accuracy_std: 0.0,
            class_averaged_mean: 1.0,
            class_averaged_std: 0.0,
            diverged_units: 0,
            runs: vec![RunRecord {
                seed: 1,
                total: 3 * k,
                correct: 3 * k,
                diverged: 0,
                accuracy: 1.0,
                class_averaged_accuracy: 1.0,
            }],
            config: ExperimentConfig::synthetic(SyntheticSpec::default(), 3),
        }
    }

    #[test]
    fn perfect_classifier_table() {
        let r = perfect_report(7);
        let text = report_to_text(&r);
        assert!(text.contains("recognition rate 1.0000"));
        let (labels, m) = parse_confusion_csv(&confusion_to_csv(&r.labels, &r.confusion)).unwrap();
        assert_eq!(labels.len(), 7);
        assert_eq!(m.len(), 7);
        for (i, row) in m.iter().enumerate() {
            assert_eq!(row.len(), 7);
            assert_eq!(row[i], 1.0);
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let labels = vec!["An".to_string(), "Co".to_string()];
        let m = vec![vec![0.77, 0.23], vec![1.0 / 3.0, 2.0 / 3.0]];
        let (l, back) = parse_confusion_csv(&confusion_to_csv(&labels, &m)).unwrap();
        assert_eq!(l, labels);
        assert_eq!(back, m);
    }

    #[test]
    fn emit_writes_expected_files() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("rep");
        let r = perfect_report(3);
        let csv = emit_report(&r, ReportFormat::Csv, &stem).unwrap();
        assert_eq!(csv.len(), 3);
        let json = emit_report(&r, ReportFormat::Json, &stem).unwrap();
        let back = report_from_json(&fs::read_to_string(&json[0]).unwrap()).unwrap();
        assert_eq!(back, r);
        let txt = emit_report(&r, ReportFormat::TextTable, &stem).unwrap();
        assert!(txt[0].ends_with("rep.txt"));
        let missing = dir.path().join("no/such/dir/rep");
        assert!(matches!(
            emit_report(&r, ReportFormat::Json, &missing),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn population_std() {
        assert_eq!(mean_std(&[0.5]), (0.5, 0.0));
        let (m, s) = mean_std(&[1.0, 0.0]);
        assert_eq!((m, s), (0.5, 0.5));
    }

    #[test]
    fn seeds_are_reproducible_and_distinct() {
        let a = run_seeds(7, 5);
        assert_eq!(a, run_seeds(7, 5));
        let mut b = a.clone();
        b.sort();
        b.dedup();
        assert_eq!(b.len(), 5);
    }

    #[test]
    fn config_validation() {
        let mut cfg = ExperimentConfig::synthetic(SyntheticSpec::default(), 1);
        cfg.repeats = 0;
        assert!(run_experiment(&cfg).is_err());
        let cfg = ExperimentConfig::synthetic(SyntheticSpec::default(), 0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_json_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"source": {"kind": "synthetic", "spec": {"k": 3}, "test_per_class": 2}}"#,
        )
        .unwrap();
        assert_eq!(cfg.repeats, 20);
        assert_eq!(cfg.solver, SolverConfig::default());
        let DataSource::Synthetic { spec, .. } = &cfg.source else {
            panic!("expected synthetic source")
        };
        assert_eq!(spec.k, 3);
        assert_eq!(spec.d, 100);
    }
}
