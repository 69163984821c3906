//! The subcommands other than `experiment`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{ArgGroup, Args, ValueEnum};
use grasmle::existence::{
    check_gr42, check_r1, enumerate_b, lp_generic_verdict, lp_vertex_max, sample_size_bound, witness_search,
    MAX_ENUMERATION_DIM,
};
use grasmle::grassmann::uniform_sample;
use grasmle::model;
use grasmle::solver::{fit_fixed_point, fit_newton};
use grasmle::{
    CovarianceParameter, EmpiricalMeasure, Error, Field, FitOptions, FitReport, Subspace, UniquenessVerdict,
    VerdictStatus,
};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{input_error, CliResult, Outcome};
use crate::formats::{
    load_sample, parse_parameter, write_json, AnySample, FieldName, FitReportFile, ParameterFile, SampleFile,
    VerdictFile, VerdictRecord, BOUND_SCHEMA, CRITICAL_SCHEMA, VERDICT_SCHEMA,
};
use crate::seeds::{split_seed, thread_pool};

/// Default number of random rounds in the witness search.
pub const DEFAULT_BUDGET: usize = 200;

#[derive(Debug, Clone, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["param", "uniform"])))]
pub struct SampleArgs {
    /// Parameter file to sample from.
    #[arg(long)]
    pub param: Option<PathBuf>,
    /// Sample from the uniform distribution, the parameter σ = I.
    #[arg(long)]
    pub uniform: bool,
    /// Ambient dimension (required with --uniform).
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub r: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Field for --uniform; a parameter file states its own.
    #[arg(long, value_enum, default_value_t = FieldName::Real)]
    pub field: FieldName,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn draw<S: Field>(sigma: &CovarianceParameter<S>, r: usize, n: usize, seed: u64) -> Vec<Subspace<S>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| model::sample(sigma, r, &mut rng)).collect()
}

fn draw_uniform<S: Field>(m: usize, r: usize, n: usize, seed: u64) -> Vec<Subspace<S>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| uniform_sample::<S, _>(m, r, &mut rng)).collect()
}

fn check_shape(m: usize, r: usize, n: usize) -> CliResult<()> {
    if n == 0 {
        return Err(input_error("--n must be at least 1"));
    }
    if !(0 < r && r < m) {
        return Err(input_error(format!("need 0 < r < m, got m = {m}, r = {r}")));
    }
    Ok(())
}

pub fn build_sample(args: &SampleArgs) -> CliResult<SampleFile> {
    if let Some(path) = &args.param {
        let file = ParameterFile::load(path)?;
        let m = file.entries.len();
        if args.m.is_some_and(|given| given != m) {
            return Err(input_error(format!("--m {} does not match the {m}x{m} parameter", args.m.unwrap())));
        }
        check_shape(m, args.r, args.n)?;
        Ok(match file.field {
            FieldName::Real => {
                let (_, sigma) = parse_parameter::<f64>(&file.entries, "parameter")?;
                SampleFile::from_subspaces(m, args.r, &draw(&sigma, args.r, args.n, args.seed))
            }
            FieldName::Complex => {
                let (_, sigma) = parse_parameter::<Complex64>(&file.entries, "parameter")?;
                SampleFile::from_subspaces(m, args.r, &draw(&sigma, args.r, args.n, args.seed))
            }
        })
    } else {
        let m = args.m.ok_or_else(|| input_error("--uniform requires --m"))?;
        check_shape(m, args.r, args.n)?;
        Ok(match args.field {
            FieldName::Real => SampleFile::from_subspaces(m, args.r, &draw_uniform::<f64>(m, args.r, args.n, args.seed)),
            FieldName::Complex => {
                SampleFile::from_subspaces(m, args.r, &draw_uniform::<Complex64>(m, args.r, args.n, args.seed))
            }
        })
    }
}

pub fn cmd_sample(args: &SampleArgs) -> CliResult<Outcome> {
    let file = build_sample(args)?;
    write_json(&file, args.out.as_deref())?;
    Ok(Outcome::Success)
}

/// Exact test where one exists for the shape, then the witness search.
pub fn check_measure<S: Field>(p: &EmpiricalMeasure<S>, budget: usize, seed: u64) -> CliResult<UniquenessVerdict<S>> {
    let (m, r) = (p.ambient_dim(), p.subspace_dim());
    let exact = if r == 1 {
        match check_r1(p) {
            Ok(v) => Some(v),
            Err(Error::SampleTooLarge { .. }) => None,
            Err(e) => return Err(e.into()),
        }
    } else if (m, r) == (4, 2) {
        Some(check_gr42(p)?)
    } else {
        None
    };
    if let Some(v) = &exact {
        if v.status != VerdictStatus::Undecided {
            return Ok(v.clone());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut verdict = witness_search(p, budget, &mut rng)?;
    if verdict.status == VerdictStatus::Undecided {
        if let Some(v) = exact {
            verdict.notes = format!("{}; {}", v.notes, verdict.notes);
        }
        if m <= MAX_ENUMERATION_DIM {
            let generic = lp_generic_verdict::<S>(m, r, p.len())?;
            verdict.notes = format!("{}; {}", verdict.notes, generic.notes);
        }
    }
    Ok(verdict)
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    #[arg(long)]
    pub sample: PathBuf,
    /// Random rounds in the witness search.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    pub budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn verdict_file<S: Field>(p: &EmpiricalMeasure<S>, v: &UniquenessVerdict<S>) -> VerdictFile {
    VerdictFile {
        schema: VERDICT_SCHEMA.into(),
        field: S::FIELD.into(),
        m: p.ambient_dim(),
        r: p.subspace_dim(),
        n: p.len(),
        verdict: VerdictRecord::new(v),
    }
}

pub fn run_check(args: &CheckArgs) -> CliResult<VerdictFile> {
    Ok(match load_sample(&args.sample)? {
        AnySample::Real(p) => verdict_file(&p, &check_measure(&p, args.budget, args.seed)?),
        AnySample::Complex(p) => verdict_file(&p, &check_measure(&p, args.budget, args.seed)?),
    })
}

pub fn cmd_check(args: &CheckArgs) -> CliResult<Outcome> {
    let file = run_check(args)?;
    write_json(&file, args.out.as_deref())?;
    Ok(match file.verdict.status.as_str() {
        "not-unique" => Outcome::Failure(format!("no unique estimate: {}", file.verdict.notes)),
        _ => Outcome::Success,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodName {
    FixedPoint,
    Newton,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub sample: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodName::FixedPoint)]
    pub method: MethodName,
    /// Residual ‖(r/m)I − mean projector‖_F at which to stop.
    #[arg(long, default_value_t = FitOptions::default().residual_tolerance)]
    pub tol: f64,
    #[arg(long, default_value_t = FitOptions::default().max_iterations)]
    pub max_iter: usize,
    /// Seed of the witness search run after a divergence.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

fn fit_measure<S: Field>(p: &EmpiricalMeasure<S>, args: &FitArgs) -> CliResult<(FitReportFile, Outcome)> {
    let opts = FitOptions {
        max_iterations: args.max_iter,
        residual_tolerance: args.tol,
        rng_seed: args.seed,
        ..FitOptions::default()
    };
    opts.validate().map_err(|e| input_error(e.to_string()))?;
    let start = CovarianceParameter::identity(p.ambient_dim());
    let fit: FitReport<S> = match args.method {
        MethodName::FixedPoint => fit_fixed_point(p, &start, &opts)?,
        MethodName::Newton => fit_newton(p, &start, &opts)?,
    };
    if fit.converged {
        return Ok((FitReportFile::new(p, &fit, None), Outcome::Success));
    }
    let verdict = check_measure(p, DEFAULT_BUDGET, args.seed)?;
    let message = format!(
        "fit did not converge ({}, residual {:e}); uniqueness check: {} ({})",
        fit.divergence.as_str(),
        fit.final_residual,
        verdict.status.as_str(),
        verdict.notes
    );
    Ok((FitReportFile::new(p, &fit, Some(VerdictRecord::new(&verdict))), Outcome::Failure(message)))
}

pub fn run_fit(args: &FitArgs) -> CliResult<(FitReportFile, Outcome)> {
    match load_sample(&args.sample)? {
        AnySample::Real(p) => fit_measure(&p, args),
        AnySample::Complex(p) => fit_measure(&p, args),
    }
}

pub fn cmd_fit(args: &FitArgs) -> CliResult<Outcome> {
    let (report, outcome) = run_fit(args)?;
    write_json(&report, args.report.as_deref())?;
    Ok(outcome)
}

#[derive(Debug, Clone, Args)]
pub struct BoundArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub m: i64,
    #[arg(long, allow_negative_numbers = true)]
    pub r: i64,
    /// Also list B(m, r) with one certificate per element (m ≤ 8).
    #[arg(long)]
    pub enumerate: bool,
    /// Print JSON instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub n: u64,
    pub counts: Vec<u64>,
    pub profile: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceReport {
    pub s: usize,
    pub i0: usize,
    pub i1: usize,
    pub lp_vertex_max: f64,
    pub max: Option<u64>,
    pub certificates: Vec<Certificate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Enumeration {
    pub values: Vec<u64>,
    pub max: Option<u64>,
    pub per_s: Vec<SliceReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub schema: String,
    pub m: usize,
    pub r: usize,
    pub bound: String,
    pub bound_value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enumeration: Option<Enumeration>,
}

pub fn run_bound(args: &BoundArgs) -> CliResult<BoundReport> {
    if args.r <= 0 || args.m <= args.r {
        return Err(input_error(format!("need 0 < r < m, got m = {}, r = {}", args.m, args.r)));
    }
    let (m, r) = (args.m as usize, args.r as usize);
    let bound = sample_size_bound(m, r).map_err(|e| input_error(e.to_string()))?;
    let enumeration = if args.enumerate {
        if m > MAX_ENUMERATION_DIM {
            return Err(input_error(format!("--enumerate supports m ≤ {MAX_ENUMERATION_DIM}, got {m}")));
        }
        let set = enumerate_b(m, r)?;
        let mut per_s = Vec::new();
        for (s, found) in &set.per_s {
            let (i0, i1) = grasmle::existence::intersection_range(m, r, *s);
            per_s.push(SliceReport {
                s: *s,
                i0,
                i1,
                lp_vertex_max: lp_vertex_max(m, r, *s)?,
                max: found.keys().next_back().copied(),
                certificates: found
                    .iter()
                    .map(|(&n, inst)| Certificate {
                        n,
                        counts: inst.counts.clone(),
                        profile: inst.profile(),
                    })
                    .collect(),
            });
        }
        Some(Enumeration {
            values: set.values(),
            max: set.max(),
            per_s,
        })
    } else {
        None
    };
    Ok(BoundReport {
        schema: BOUND_SCHEMA.into(),
        m,
        r,
        bound: bound.to_string(),
        bound_value: *bound.numer() as f64 / *bound.denom() as f64,
        enumeration,
    })
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(", ")
}

pub fn format_bound(report: &BoundReport) -> String {
    let mut out = format!("{}\n", report.bound);
    if let Some(e) = &report.enumeration {
        let (m, r) = (report.m, report.r);
        out += &format!("B({m},{r}) = {{{}}}\n", join(&e.values));
        if let Some(max) = e.max {
            out += &format!("max B({m},{r}) = {max}\n");
        }
        for slice in &e.per_s {
            out += &format!(
                "s = {}: intersection dims {}..={}, lp vertex max {}\n",
                slice.s, slice.i0, slice.i1, slice.lp_vertex_max
            );
            for c in &slice.certificates {
                out += &format!("  n = {}: counts [{}], dims [{}]\n", c.n, join(&c.counts), join(&c.profile));
            }
        }
    }
    out
}

pub fn cmd_bound(args: &BoundArgs) -> CliResult<Outcome> {
    let report = run_bound(args)?;
    if args.json {
        write_json(&report, None)?;
    } else {
        print!("{}", format_bound(&report));
    }
    Ok(Outcome::Success)
}

#[derive(Debug, Clone, Args)]
pub struct CriticalArgs {
    #[arg(long, default_value_t = 4)]
    pub m: usize,
    #[arg(long, default_value_t = 2)]
    pub r: usize,
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[arg(long, value_enum, default_value_t = FieldName::Real)]
    pub field: FieldName,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    pub budget: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalReport {
    pub schema: String,
    pub field: FieldName,
    pub m: usize,
    pub r: usize,
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    /// Trial counts keyed by verdict status.
    pub counts: BTreeMap<String, usize>,
    pub frequency_unique: f64,
}

fn critical_trials<S: Field>(args: &CriticalArgs) -> CliResult<Vec<VerdictStatus>> {
    let pool = thread_pool()?;
    pool.install(|| {
        (0..args.trials)
            .into_par_iter()
            .map(|t| {
                let seed = split_seed(args.seed, t as u64);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let atoms = (0..args.n).map(|_| uniform_sample::<S, _>(args.m, args.r, &mut rng)).collect();
                let p = EmpiricalMeasure::uniform(atoms)?;
                Ok(check_measure(&p, args.budget, seed)?.status)
            })
            .collect()
    })
}

pub fn run_critical(args: &CriticalArgs) -> CliResult<CriticalReport> {
    if !(args.r == 1 && args.m >= 2) && (args.m, args.r) != (4, 2) {
        return Err(input_error(format!(
            "mc-critical supports r = 1 and Gr(4,2), got m = {}, r = {}",
            args.m, args.r
        )));
    }
    if args.n == 0 || args.trials == 0 {
        return Err(input_error("--n and --trials must be at least 1"));
    }
    let statuses = match args.field {
        FieldName::Real => critical_trials::<f64>(args)?,
        FieldName::Complex => critical_trials::<Complex64>(args)?,
    };
    let mut counts: BTreeMap<String, usize> = [VerdictStatus::Unique, VerdictStatus::NotUnique, VerdictStatus::Undecided]
        .iter()
        .map(|s| (s.as_str().to_string(), 0))
        .collect();
    for s in &statuses {
        *counts.get_mut(s.as_str()).expect("all statuses are keys") += 1;
    }
    let unique = counts[VerdictStatus::Unique.as_str()];
    Ok(CriticalReport {
        schema: CRITICAL_SCHEMA.into(),
        field: args.field,
        m: args.m,
        r: args.r,
        n: args.n,
        trials: args.trials,
        seed: args.seed,
        counts,
        frequency_unique: unique as f64 / args.trials as f64,
    })
}

pub fn cmd_critical(args: &CriticalArgs) -> CliResult<Outcome> {
    let report = run_critical(args)?;
    write_json(&report, args.out.as_deref())?;
    Ok(Outcome::Success)
}
