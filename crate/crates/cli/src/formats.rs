//! JSON artifact formats.
//!
//! Matrices are lists of rows. Real entries are plain numbers and complex
//! entries are `[re, im]` pairs. Floats use the shortest representation that
//! parses back to the same `f64`.

use std::fs;
use std::path::Path;

use grasmle::existence::{UniquenessVerdict, Witness};
use grasmle::grassmann::{subspace_from_matrix, DEFAULT_RANK_TOLERANCE};
use grasmle::manifold::normalize_parameter_with_tolerance;
use grasmle::solver::{FitReport, StepEvent, TraceEntry};
use grasmle::{CovarianceParameter, EmpiricalMeasure, Field, ScalarField, Subspace};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{input_error, CliResult};

pub const SAMPLE_SCHEMA: &str = "grasmle.sample/1";
pub const PARAMETER_SCHEMA: &str = "grasmle.parameter/1";
pub const FIT_SCHEMA: &str = "grasmle.fit-report/1";
pub const VERDICT_SCHEMA: &str = "grasmle.verdict/1";
pub const BOUND_SCHEMA: &str = "grasmle.bound/1";
pub const EXPERIMENT_CONFIG_SCHEMA: &str = "grasmle.experiment-config/1";
pub const EXPERIMENT_SCHEMA: &str = "grasmle.experiment/1";
pub const CRITICAL_SCHEMA: &str = "grasmle.mc-critical/1";

/// Asymmetry accepted when loading parameter files. Printed parameters are
/// rounded, so exact self-adjointness cannot be expected.
pub const PARAMETER_SYMMETRY_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FieldName {
    Real,
    Complex,
}

impl From<ScalarField> for FieldName {
    fn from(f: ScalarField) -> Self {
        match f {
            ScalarField::Real => FieldName::Real,
            ScalarField::Complex => FieldName::Complex,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

pub type MatrixRows = Vec<Vec<Entry>>;

pub fn matrix_to_rows<S: Field>(a: &DMatrix<S>) -> MatrixRows {
    (0..a.nrows())
        .map(|i| {
            (0..a.ncols())
                .map(|j| {
                    let (re, im) = a[(i, j)].parts();
                    match S::FIELD {
                        ScalarField::Real => Entry::Real(re),
                        ScalarField::Complex => Entry::Complex([re, im]),
                    }
                })
                .collect()
        })
        .collect()
}

/// Reads an `nrows × ncols` matrix. A real field rejects nonzero imaginary parts.
pub fn matrix_from_rows<S: Field>(rows: &MatrixRows, nrows: usize, ncols: usize, what: &str) -> CliResult<DMatrix<S>> {
    if rows.len() != nrows || rows.iter().any(|row| row.len() != ncols) {
        return Err(input_error(format!("{what}: expected a {nrows}x{ncols} matrix")));
    }
    let mut out = DMatrix::<S>::zeros(nrows, ncols);
    for (i, row) in rows.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            let (re, im) = match *e {
                Entry::Real(x) => (x, 0.0),
                Entry::Complex([re, im]) => (re, im),
            };
            if !re.is_finite() || !im.is_finite() {
                return Err(input_error(format!("{what}: entry ({i}, {j}) is not finite")));
            }
            if S::FIELD == ScalarField::Real && im != 0.0 {
                return Err(input_error(format!("{what}: complex entry ({i}, {j}) in a real matrix")));
            }
            out[(i, j)] = S::from_parts(re, im);
        }
    }
    Ok(out)
}

fn square_size(rows: &MatrixRows, what: &str) -> CliResult<usize> {
    let m = rows.len();
    if m == 0 {
        return Err(input_error(format!("{what}: empty matrix")));
    }
    Ok(m)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| input_error(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    text
}

/// Writes to `path`, or to standard output when `path` is `None`.
pub fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> anyhow::Result<()> {
    let text = to_json_string(value);
    match path {
        Some(p) => fs::write(p, text).map_err(|e| anyhow::anyhow!("{}: {e}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn check_schema(found: &str, expected: &str) -> CliResult<()> {
    if found != expected {
        return Err(input_error(format!("unsupported schema {found:?}, expected {expected:?}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleFile {
    pub schema: String,
    pub field: FieldName,
    pub m: usize,
    pub r: usize,
    pub subspaces: Vec<MatrixRows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

/// A parsed sample over either field.
#[derive(Debug, Clone)]
pub enum AnySample {
    Real(EmpiricalMeasure<f64>),
    Complex(EmpiricalMeasure<Complex64>),
}

impl AnySample {
    pub fn len(&self) -> usize {
        match self {
            AnySample::Real(p) => p.len(),
            AnySample::Complex(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl SampleFile {
    pub fn from_measure<S: Field>(p: &EmpiricalMeasure<S>) -> Self {
        Self {
            schema: SAMPLE_SCHEMA.into(),
            field: S::FIELD.into(),
            m: p.ambient_dim(),
            r: p.subspace_dim(),
            subspaces: p.atoms().iter().map(|u| matrix_to_rows(u.frame())).collect(),
            weights: if p.is_uniform() { None } else { Some(p.weights().to_vec()) },
        }
    }

    pub fn from_subspaces<S: Field>(m: usize, r: usize, atoms: &[Subspace<S>]) -> Self {
        Self {
            schema: SAMPLE_SCHEMA.into(),
            field: S::FIELD.into(),
            m,
            r,
            subspaces: atoms.iter().map(|u| matrix_to_rows(u.frame())).collect(),
            weights: None,
        }
    }

    pub fn to_measure<S: Field>(&self) -> CliResult<EmpiricalMeasure<S>> {
        check_schema(&self.schema, SAMPLE_SCHEMA)?;
        if !(0 < self.r && self.r < self.m) {
            return Err(input_error(format!("need 0 < r < m, got m = {}, r = {}", self.m, self.r)));
        }
        if self.subspaces.is_empty() {
            return Err(input_error("sample has no subspaces"));
        }
        let atoms = self
            .subspaces
            .iter()
            .enumerate()
            .map(|(k, rows)| {
                let what = format!("subspace {k}");
                let x = matrix_from_rows::<S>(rows, self.m, self.r, &what)?;
                subspace_from_matrix(&x, DEFAULT_RANK_TOLERANCE).map_err(|e| input_error(format!("{what}: {e}")))
            })
            .collect::<CliResult<Vec<_>>>()?;
        let measure = match &self.weights {
            None => EmpiricalMeasure::uniform(atoms),
            Some(w) => EmpiricalMeasure::weighted(atoms, w.clone()),
        };
        measure.map_err(|e| input_error(e.to_string()))
    }

    pub fn parse(&self) -> CliResult<AnySample> {
        Ok(match self.field {
            FieldName::Real => AnySample::Real(self.to_measure()?),
            FieldName::Complex => AnySample::Complex(self.to_measure()?),
        })
    }
}

pub fn load_sample(path: &Path) -> CliResult<AnySample> {
    read_json::<SampleFile>(path)?.parse()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterFile {
    pub schema: String,
    pub field: FieldName,
    pub entries: MatrixRows,
}

/// Loads a parameter matrix, symmetrizing and rescaling it to determinant 1.
/// Returns the raw matrix alongside the normalized parameter.
pub fn parse_parameter<S: Field>(rows: &MatrixRows, what: &str) -> CliResult<(DMatrix<S>, CovarianceParameter<S>)> {
    let m = square_size(rows, what)?;
    let raw = matrix_from_rows::<S>(rows, m, m, what)?;
    let sigma = normalize_parameter_with_tolerance(&raw, PARAMETER_SYMMETRY_TOLERANCE)
        .map_err(|e| input_error(format!("{what}: {e}")))?;
    Ok((raw, sigma))
}

impl ParameterFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let file: ParameterFile = read_json(path)?;
        check_schema(&file.schema, PARAMETER_SCHEMA)?;
        Ok(file)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub residual: f64,
    pub objective: f64,
    pub step: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event: Option<String>,
}

fn event_name(event: &StepEvent) -> String {
    match event {
        StepEvent::Backtracked(k) => format!("backtracked:{k}"),
        StepEvent::SingularHessian => "singular-hessian".into(),
        StepEvent::SingularHessianBacktracked(k) => format!("singular-hessian-backtracked:{k}"),
        StepEvent::NoDecrease => "no-decrease".into(),
    }
}

impl From<&TraceEntry> for TraceRecord {
    fn from(e: &TraceEntry) -> Self {
        Self {
            iteration: e.iteration,
            residual: e.residual,
            objective: e.objective,
            step: e.step,
            event: e.event.as_ref().map(event_name),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessRecord {
    pub dim: usize,
    pub intersection_dims: Vec<usize>,
    pub value: f64,
    pub frame: MatrixRows,
}

impl WitnessRecord {
    pub fn new<S: Field>(w: &Witness<S>) -> Self {
        Self {
            dim: w.dim(),
            intersection_dims: w.intersection_dims.clone(),
            value: w.value,
            frame: matrix_to_rows(w.subspace.frame()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub status: String,
    pub method: String,
    pub notes: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<WitnessRecord>,
}

impl VerdictRecord {
    pub fn new<S: Field>(v: &UniquenessVerdict<S>) -> Self {
        Self {
            status: v.status.as_str().into(),
            method: v.method.as_str().into(),
            notes: v.notes.clone(),
            witness: v.witness.as_ref().map(WitnessRecord::new),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictFile {
    pub schema: String,
    pub field: FieldName,
    pub m: usize,
    pub r: usize,
    pub n: usize,
    #[serde(flatten)]
    pub verdict: VerdictRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReportFile {
    pub schema: String,
    pub field: FieldName,
    pub m: usize,
    pub r: usize,
    pub n: usize,
    pub method: String,
    pub converged: bool,
    pub divergence: String,
    pub iterations: usize,
    pub final_residual: f64,
    pub objective: f64,
    pub estimate: MatrixRows,
    pub trace: Vec<TraceRecord>,
    /// Uniqueness verdict, present when the fit did not converge.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hint: Option<VerdictRecord>,
}

impl FitReportFile {
    pub fn new<S: Field>(p: &EmpiricalMeasure<S>, fit: &FitReport<S>, hint: Option<VerdictRecord>) -> Self {
        Self {
            schema: FIT_SCHEMA.into(),
            field: S::FIELD.into(),
            m: p.ambient_dim(),
            r: p.subspace_dim(),
            n: p.len(),
            method: fit.method.as_str().into(),
            converged: fit.converged,
            divergence: fit.divergence.as_str().into(),
            iterations: fit.iterations,
            final_residual: fit.final_residual,
            objective: fit.objective,
            estimate: matrix_to_rows(fit.estimate.entries()),
            trace: fit.trace.iter().map(TraceRecord::from).collect(),
            hint,
        }
    }
}
