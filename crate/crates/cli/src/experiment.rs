//! Simulation study: repeated sampling from a fixed parameter and refitting.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use grasmle::solver::{fit_fixed_point, fit_newton};
use grasmle::{model, CovarianceParameter, EmpiricalMeasure, Field, FitOptions};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{input_error, CliResult, Outcome};
use crate::formats::{
    matrix_to_rows, parse_parameter, read_json, to_json_string, Entry, FieldName, MatrixRows,
    EXPERIMENT_CONFIG_SCHEMA, EXPERIMENT_SCHEMA,
};
use crate::seeds::{split_seed, thread_pool};

fn default_field() -> FieldName {
    FieldName::Real
}

fn default_r() -> usize {
    2
}

fn default_method() -> String {
    "fixed-point".into()
}

fn default_max_iterations() -> usize {
    10_000
}

fn default_tolerance() -> f64 {
    1e-10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema: String,
    #[serde(default = "default_field")]
    pub field: FieldName,
    #[serde(default = "default_r")]
    pub r: usize,
    pub sigma0: MatrixRows,
    pub sizes: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_tolerance")]
    pub residual_tolerance: f64,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let config: ExperimentConfig = read_json(path)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.schema != EXPERIMENT_CONFIG_SCHEMA {
            return Err(input_error(format!(
                "unsupported schema {:?}, expected {EXPERIMENT_CONFIG_SCHEMA:?}",
                self.schema
            )));
        }
        let m = self.sigma0.len();
        if !(0 < self.r && self.r < m) {
            return Err(input_error(format!("need 0 < r < m, got m = {m}, r = {}", self.r)));
        }
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return Err(input_error("sizes must be a nonempty list of positive integers"));
        }
        if self.replications == 0 {
            return Err(input_error("replications must be at least 1"));
        }
        if !matches!(self.method.as_str(), "fixed-point" | "newton") {
            return Err(input_error(format!("unknown method {:?}", self.method)));
        }
        self.options().validate().map_err(|e| input_error(e.to_string()))
    }

    fn options(&self) -> FitOptions {
        FitOptions {
            max_iterations: self.max_iterations,
            residual_tolerance: self.residual_tolerance,
            ..FitOptions::default()
        }
    }
}

/// One replication at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub n: usize,
    pub replication: usize,
    pub seed: u64,
    pub converged: bool,
    pub divergence: String,
    pub iterations: usize,
    pub final_residual: f64,
    /// `‖σ̂ − σ₀‖_F` against the normalized `σ₀`.
    pub frobenius_error: f64,
    /// Upper triangle of `σ̂ − σ₀`, row by row.
    pub difference_upper: Vec<Entry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeSummary {
    pub n: usize,
    pub runs: usize,
    pub converged: usize,
    pub median_frobenius: f64,
    pub mean_frobenius: f64,
    pub min_frobenius: f64,
    pub max_frobenius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema: String,
    pub field: FieldName,
    pub m: usize,
    pub r: usize,
    pub method: String,
    pub replications: usize,
    pub seed: u64,
    pub sigma0_raw: MatrixRows,
    pub sigma0_normalized: MatrixRows,
    pub summary: Vec<SizeSummary>,
    pub runs: Vec<RunRecord>,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k == 0 {
        f64::NAN
    } else if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn upper_triangle<S: Field>(a: &DMatrix<S>) -> Vec<Entry> {
    let rows = matrix_to_rows(a);
    rows.iter()
        .enumerate()
        .flat_map(|(i, row)| row[i..].to_vec())
        .collect()
}

fn replicate<S: Field>(
    config: &ExperimentConfig,
    sigma0: &CovarianceParameter<S>,
    n: usize,
    replication: usize,
    seed: u64,
) -> CliResult<RunRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let atoms = (0..n).map(|_| model::sample(sigma0, config.r, &mut rng)).collect();
    let p = EmpiricalMeasure::uniform(atoms)?;
    let start = CovarianceParameter::identity(sigma0.dim());
    let opts = config.options();
    let fit = match config.method.as_str() {
        "newton" => fit_newton(&p, &start, &opts)?,
        _ => fit_fixed_point(&p, &start, &opts)?,
    };
    let diff = fit.estimate.entries() - sigma0.entries();
    Ok(RunRecord {
        n,
        replication,
        seed,
        converged: fit.converged,
        divergence: fit.divergence.as_str().into(),
        iterations: fit.iterations,
        final_residual: fit.final_residual,
        frobenius_error: diff.norm(),
        difference_upper: upper_triangle(&diff),
    })
}

fn run_typed<S: Field>(config: &ExperimentConfig) -> CliResult<ExperimentReport> {
    let (raw, sigma0) = parse_parameter::<S>(&config.sigma0, "sigma0")?;
    let tasks: Vec<(usize, usize)> = config
        .sizes
        .iter()
        .flat_map(|&n| (0..config.replications).map(move |k| (n, k)))
        .collect();
    let pool = thread_pool()?;
    let runs = pool.install(|| {
        tasks
            .par_iter()
            .enumerate()
            .map(|(index, &(n, k))| replicate(config, &sigma0, n, k, split_seed(config.seed, index as u64)))
            .collect::<CliResult<Vec<_>>>()
    })?;
    let summary = config
        .sizes
        .iter()
        .map(|&n| {
            let rows: Vec<&RunRecord> = runs.iter().filter(|r| r.n == n).collect();
            let errors: Vec<f64> = rows.iter().map(|r| r.frobenius_error).collect();
            SizeSummary {
                n,
                runs: rows.len(),
                converged: rows.iter().filter(|r| r.converged).count(),
                median_frobenius: median(&errors),
                mean_frobenius: errors.iter().sum::<f64>() / errors.len() as f64,
                min_frobenius: errors.iter().copied().fold(f64::INFINITY, f64::min),
                max_frobenius: errors.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect();
    Ok(ExperimentReport {
        schema: EXPERIMENT_SCHEMA.into(),
        field: S::FIELD.into(),
        m: sigma0.dim(),
        r: config.r,
        method: config.method.clone(),
        replications: config.replications,
        seed: config.seed,
        sigma0_raw: matrix_to_rows(&raw),
        sigma0_normalized: matrix_to_rows(sigma0.entries()),
        summary,
        runs,
    })
}

pub fn run_experiment(config: &ExperimentConfig) -> CliResult<ExperimentReport> {
    config.validate()?;
    match config.field {
        FieldName::Real => run_typed::<f64>(config),
        FieldName::Complex => run_typed::<Complex64>(config),
    }
}

pub fn summary_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("n,runs,converged,median_frobenius,mean_frobenius,min_frobenius,max_frobenius\n");
    for s in &report.summary {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            s.n, s.runs, s.converged, s.median_frobenius, s.mean_frobenius, s.min_frobenius, s.max_frobenius
        )
        .expect("writing to a String");
    }
    out
}

/// One row per run with the upper triangle of `σ̂ − σ₀` in columns `d11, d12, …`.
pub fn differences_csv(report: &ExperimentReport) -> String {
    let m = report.m;
    let complex = report.field == FieldName::Complex;
    let mut header = vec!["n".to_string(), "replication".into(), "seed".into(), "converged".into(), "frobenius".into()];
    for i in 1..=m {
        for j in i..=m {
            if complex {
                header.push(format!("re_d{i}{j}"));
                header.push(format!("im_d{i}{j}"));
            } else {
                header.push(format!("d{i}{j}"));
            }
        }
    }
    let mut out = header.join(",");
    out.push('\n');
    for run in &report.runs {
        let mut cells = vec![
            run.n.to_string(),
            run.replication.to_string(),
            run.seed.to_string(),
            run.converged.to_string(),
            run.frobenius_error.to_string(),
        ];
        for e in &run.difference_upper {
            match *e {
                Entry::Real(x) => cells.push(x.to_string()),
                Entry::Complex([re, im]) => {
                    cells.push(re.to_string());
                    cells.push(im.to_string());
                }
            }
        }
        out += &cells.join(",");
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn cmd_experiment(args: &ExperimentArgs) -> CliResult<Outcome> {
    let config = ExperimentConfig::load(&args.config)?;
    let report = run_experiment(&config)?;
    fs::create_dir_all(&args.out)?;
    fs::write(args.out.join("experiment.json"), to_json_string(&report))?;
    fs::write(args.out.join("summary.csv"), summary_csv(&report))?;
    fs::write(args.out.join("differences.csv"), differences_csv(&report))?;
    for s in &report.summary {
        println!(
            "n = {}: median ‖σ̂ − σ₀‖_F = {:.6} ({}/{} converged)",
            s.n, s.median_frobenius, s.converged, s.runs
        );
    }
    let failed = report.runs.iter().filter(|r| !r.converged).count();
    Ok(if failed == 0 {
        Outcome::Success
    } else {
        Outcome::Failure(format!("{failed} of {} fits did not converge", report.runs.len()))
    })
}
