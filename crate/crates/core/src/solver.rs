//! Iterative solvers for the likelihood equation `Σ wᵢ π_{Uᵢ}(σ) = (r/m) I`.
//!
//! Both solvers move along geodesics `σ ↦ e^{2tv} σ`:
//!
//! * [`fit_fixed_point`] steps along `v = −grad ℓ_P(σ_k)`, so a full step is
//!   `σ_{k+1} = e^{−2 grad ℓ_P(σ_k)} σ_k`, a descent step for `ℓ_P`.
//! * [`fit_newton`] solves `grad ℓ_P(σ_k) + ∇_v grad ℓ_P(σ_k) = 0` for `v` in
//!   `T_{σ_k}` and steps along `v`.
//!
//! Steps are halved until `ℓ_P` does not increase. A run stops as diverged
//! when the condition number of the iterate exceeds the cap: mass escaping to
//! the boundary of `Pos(m)` is the signature of a sample without estimate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::likelihood::{neg_log_likelihood, residual, EmpiricalMeasure, LocalLikelihood};
use crate::manifold::{
    distance, normalize_parameter, real_trace_product, try_geodesic, CovarianceParameter, TangentVector,
};
use crate::scalar::Field;

pub use crate::manifold::tangent_basis;

/// Hessian eigenvalues below this floor make the Newton system singular.
pub const HESSIAN_EIGENVALUE_FLOOR: f64 = 1e-10;

/// Converged multistart runs farther apart than this indicate a bug.
pub const MULTISTART_DISAGREEMENT: f64 = 1e-5;

const MAX_HALVINGS: u32 = 60;

/// Relative increase of `ℓ_P` tolerated by the line search.
const OBJECTIVE_SLACK: f64 = 1e-13;

/// Predicted decreases below this (relative) are lost in the rounding error
/// of `ℓ_P` on ill-conditioned iterates.
const OBJECTIVE_RESOLUTION: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    pub residual_tolerance: f64,
    /// Initial step length along the search geodesic, in `(0, 1]`.
    pub step_damping: f64,
    /// Iterates with a larger condition number count as escaped to the boundary.
    pub divergence_condition_cap: f64,
    /// Seed for the random starting points of [`multistart_fit`].
    pub rng_seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            residual_tolerance: 1e-10,
            step_damping: 1.0,
            divergence_condition_cap: 1e8,
            rng_seed: 0,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidOptions("max_iterations must be at least 1".into()));
        }
        if !(self.residual_tolerance > 0.0) {
            return Err(Error::InvalidOptions("residual_tolerance must be positive".into()));
        }
        if !(self.step_damping > 0.0 && self.step_damping <= 1.0) {
            return Err(Error::InvalidOptions("step_damping must lie in (0, 1]".into()));
        }
        if !(self.divergence_condition_cap > 1.0) {
            return Err(Error::InvalidOptions("divergence_condition_cap must exceed 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    FixedPoint,
    Newton,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::FixedPoint => "fixed-point",
            Method::Newton => "newton",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivergenceFlag {
    None,
    BoundaryEscape,
    MaxIterations,
}

impl DivergenceFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            DivergenceFlag::None => "none",
            DivergenceFlag::BoundaryEscape => "boundary-escape",
            DivergenceFlag::MaxIterations => "max-iterations",
        }
    }
}

/// Something worth recording about the step taken after a trace entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepEvent {
    /// The step was halved this many times before `ℓ_P` stopped increasing.
    Backtracked(u32),
    /// The Newton system was singular; a gradient step was taken instead.
    SingularHessian,
    /// Singular Newton system and backtracking on the fallback step.
    SingularHessianBacktracked(u32),
    /// No halving decreased `ℓ_P`; the smallest step was taken anyway.
    NoDecrease,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub residual: f64,
    pub objective: f64,
    /// Step length used to leave this iterate (0 for the final entry).
    pub step: f64,
    pub event: Option<StepEvent>,
}

#[derive(Debug, Clone)]
pub struct FitReport<S: Field> {
    pub method: Method,
    pub estimate: CovarianceParameter<S>,
    pub converged: bool,
    pub iterations: usize,
    pub final_residual: f64,
    pub objective: f64,
    pub trace: Vec<TraceEntry>,
    pub divergence: DivergenceFlag,
}

impl<S: Field> FitReport<S> {
    pub fn singular_hessian_events(&self) -> usize {
        self.trace
            .iter()
            .filter(|e| {
                matches!(
                    e.event,
                    Some(StepEvent::SingularHessian) | Some(StepEvent::SingularHessianBacktracked(_))
                )
            })
            .count()
    }
}

/// Iterates the descent dynamics `σ_{k+1} = e^{−2t grad ℓ_P(σ_k)} σ_k`.
pub fn fit_fixed_point<S: Field>(
    p: &EmpiricalMeasure<S>,
    sigma0: &CovarianceParameter<S>,
    opts: &FitOptions,
) -> Result<FitReport<S>> {
    run(p, sigma0, opts, Method::FixedPoint)
}

/// Newton iteration on the likelihood equation.
pub fn fit_newton<S: Field>(
    p: &EmpiricalMeasure<S>,
    sigma0: &CovarianceParameter<S>,
    opts: &FitOptions,
) -> Result<FitReport<S>> {
    run(p, sigma0, opts, Method::Newton)
}

fn newton_direction<S: Field>(local: &LocalLikelihood<'_, S>, grad: &TangentVector<S>) -> (TangentVector<S>, bool) {
    let sigma = local.sigma();
    let basis = tangent_basis(sigma);
    let h = local.hessian_matrix(&basis);
    let g = local.gradient_coordinates(&basis);
    let eig = h.symmetric_eigen();
    if eig.eigenvalues.min() < HESSIAN_EIGENVALUE_FLOOR {
        return (grad.scale(-1.0), true);
    }
    let mut coeffs = vec![0.0; basis.len()];
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        let u = eig.eigenvectors.column(k);
        let proj = u.dot(&g) / lambda;
        for (c, x) in coeffs.iter_mut().zip(u.iter()) {
            *c -= proj * x;
        }
    }
    let v = TangentVector::linear_combination(sigma, &coeffs, &basis).expect("common base point");
    (v, false)
}

fn run<S: Field>(
    p: &EmpiricalMeasure<S>,
    sigma0: &CovarianceParameter<S>,
    opts: &FitOptions,
    method: Method,
) -> Result<FitReport<S>> {
    opts.validate()?;
    if sigma0.dim() != p.ambient_dim() {
        return Err(Error::DimensionMismatch(format!(
            "starting point is {}x{}, sample lives in F^{}",
            sigma0.dim(),
            sigma0.dim(),
            p.ambient_dim()
        )));
    }
    let mut sigma = sigma0.clone();
    let mut objective = neg_log_likelihood(p, &sigma);
    let mut trace = Vec::new();
    let mut iteration = 0;
    loop {
        let local = LocalLikelihood::new(p, &sigma);
        let grad = local.gradient();
        let residual_now = grad.frobenius_norm();
        let mut entry = TraceEntry {
            iteration,
            residual: residual_now,
            objective,
            step: 0.0,
            event: None,
        };
        let stop = if residual_now <= opts.residual_tolerance {
            Some(DivergenceFlag::None)
        } else if sigma.condition_number() > opts.divergence_condition_cap {
            Some(DivergenceFlag::BoundaryEscape)
        } else if iteration >= opts.max_iterations {
            Some(DivergenceFlag::MaxIterations)
        } else {
            None
        };
        if let Some(divergence) = stop {
            trace.push(entry);
            return Ok(FitReport {
                method,
                estimate: sigma,
                converged: divergence == DivergenceFlag::None,
                iterations: iteration,
                final_residual: residual_now,
                objective,
                trace,
                divergence,
            });
        }

        let (direction, singular) = match method {
            Method::FixedPoint => (grad.scale(-1.0), false),
            Method::Newton => newton_direction(&local, &grad),
        };
        drop(local);

        let scale = objective.abs().max(1.0);
        let slack = OBJECTIVE_SLACK * scale;
        let slope = real_trace_product(grad.entries(), direction.entries()).abs();
        let mut t = opts.step_damping;
        let mut halvings = 0;
        let (next, next_objective, decreased) = loop {
            let Ok(candidate) = try_geodesic(&direction, t) else {
                if halvings == MAX_HALVINGS {
                    break (sigma.clone(), objective, false);
                }
                t *= 0.5;
                halvings += 1;
                continue;
            };
            let value = neg_log_likelihood(p, &candidate);
            if value <= objective + slack {
                break (candidate, value, true);
            }
            // Below the resolution of ℓ_P, fall back to the residual as merit.
            if t * slope < OBJECTIVE_RESOLUTION * scale && residual(p, &candidate) < residual_now {
                break (candidate, value, true);
            }
            if halvings == MAX_HALVINGS {
                break (candidate, value, false);
            }
            t *= 0.5;
            halvings += 1;
        };
        entry.step = t;
        entry.event = match (singular, decreased, halvings) {
            (_, false, _) => Some(StepEvent::NoDecrease),
            (true, true, 0) => Some(StepEvent::SingularHessian),
            (true, true, h) => Some(StepEvent::SingularHessianBacktracked(h)),
            (false, true, 0) => None,
            (false, true, h) => Some(StepEvent::Backtracked(h)),
        };
        trace.push(entry);
        sigma = next;
        objective = next_objective;
        iteration += 1;
    }
}

/// Result of [`multistart_fit_detailed`].
#[derive(Debug, Clone)]
pub struct MultistartOutcome<S: Field> {
    pub best: FitReport<S>,
    pub runs: Vec<FitReport<S>>,
    /// Largest pairwise distance between converged estimates (0 if fewer than two).
    pub max_pairwise_distance: f64,
}

/// A random starting parameter `normalize(AA* + I/10)` with Gaussian `A`.
pub fn random_parameter<S: Field>(m: usize, rng: &mut ChaCha8Rng) -> CovarianceParameter<S> {
    let a = nalgebra::DMatrix::<S>::from_fn(m, m, |_, _| S::standard_normal(rng));
    let spd = &a * a.adjoint() + nalgebra::DMatrix::<S>::identity(m, m).scale(0.1);
    normalize_parameter(&spd).expect("AA* + I/10 is positive definite")
}

/// Fixed-point fits from `I` and from `starts − 1` random parameters.
pub fn multistart_fit<S: Field>(p: &EmpiricalMeasure<S>, opts: &FitOptions, starts: usize) -> Result<FitReport<S>> {
    multistart_fit_detailed(p, opts, starts).map(|o| o.best)
}

pub fn multistart_fit_detailed<S: Field>(
    p: &EmpiricalMeasure<S>,
    opts: &FitOptions,
    starts: usize,
) -> Result<MultistartOutcome<S>> {
    if starts == 0 {
        return Err(Error::InvalidOptions("at least one start is required".into()));
    }
    let m = p.ambient_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.rng_seed);
    let mut starts_list = vec![CovarianceParameter::identity(m)];
    for _ in 1..starts {
        starts_list.push(random_parameter(m, &mut rng));
    }
    let runs = starts_list
        .iter()
        .map(|s0| fit_fixed_point(p, s0, opts))
        .collect::<Result<Vec<_>>>()?;

    let converged: Vec<&FitReport<S>> = runs.iter().filter(|r| r.converged).collect();
    let mut max_pairwise_distance = 0.0f64;
    for (i, a) in converged.iter().enumerate() {
        for b in &converged[i + 1..] {
            max_pairwise_distance = max_pairwise_distance.max(distance(&a.estimate, &b.estimate)?);
        }
    }
    if max_pairwise_distance > MULTISTART_DISAGREEMENT {
        return Err(Error::InconsistentRuns {
            distance: max_pairwise_distance,
        });
    }
    let best = runs
        .iter()
        .min_by(|a, b| {
            b.converged
                .cmp(&a.converged)
                .then(a.objective.total_cmp(&b.objective))
        })
        .expect("at least one run")
        .clone();
    Ok(MultistartOutcome {
        best,
        runs,
        max_pairwise_distance,
    })
}
