//! The negative log-likelihood `ℓ_P(σ) = Σ wᵢ ℓ_{Uᵢ}(σ)` of an atomic measure
//! and its Riemannian derivatives.
//!
//! With the metric `tr(v₁v₂)` the gradient is `(r/m) I − Σ wᵢ πᵢ` and the
//! covariant derivative of the gradient along `v` is
//! `Σ wᵢ [πᵢ v (I − πᵢ) + (I − πᵢ) v πᵢ]`, where `πᵢ = π_{Uᵢ}(σ)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grassmann::{apply_transform, projector, Subspace};
use crate::manifold::{real_trace_product, tangent_basis, CovarianceParameter, TangentVector};
use crate::model::log_density;
use crate::scalar::Field;
use crate::summation::{CompensatedSum, MatrixSum};

/// Eigenvalue threshold below which a Hessian direction counts as degenerate.
pub const DEFAULT_DEGENERACY_TOLERANCE: f64 = 1e-8;

/// A finitely supported probability measure on `Gr(m, r)`.
#[derive(Debug, Clone)]
pub struct EmpiricalMeasure<S: Field> {
    atoms: Vec<Subspace<S>>,
    weights: Vec<f64>,
    uniform: bool,
}

impl<S: Field> EmpiricalMeasure<S> {
    /// The empirical measure `(δ_{U₁} + … + δ_{Uₙ}) / n` of a sample.
    pub fn uniform(atoms: Vec<Subspace<S>>) -> Result<Self> {
        let n = atoms.len();
        Self::check_atoms(&atoms)?;
        Ok(Self {
            atoms,
            weights: vec![1.0 / n as f64; n],
            uniform: true,
        })
    }

    /// Weighted atoms; positive weights are rescaled to sum to one.
    pub fn weighted(atoms: Vec<Subspace<S>>, weights: Vec<f64>) -> Result<Self> {
        Self::check_atoms(&atoms)?;
        if weights.len() != atoms.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} weights for {} atoms",
                weights.len(),
                atoms.len()
            )));
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidMeasure("weights must be positive and finite".into()));
        }
        let mut total = CompensatedSum::default();
        weights.iter().for_each(|w| total.add(*w));
        let total = total.value();
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let uniform = weights.iter().all(|w| *w == weights[0]);
        Ok(Self {
            atoms,
            weights,
            uniform,
        })
    }

    fn check_atoms(atoms: &[Subspace<S>]) -> Result<()> {
        let first = atoms
            .first()
            .ok_or_else(|| Error::InvalidMeasure("at least one atom is required".into()))?;
        let shape = (first.ambient_dim(), first.dim());
        if let Some(bad) = atoms.iter().find(|u| (u.ambient_dim(), u.dim()) != shape) {
            return Err(Error::DimensionMismatch(format!(
                "atom in Gr({}, {}) mixed with Gr({}, {})",
                bad.ambient_dim(),
                bad.dim(),
                shape.0,
                shape.1
            )));
        }
        Ok(())
    }

    pub fn atoms(&self) -> &[Subspace<S>] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// True when every atom carries weight `1/n`.
    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    /// `m`.
    pub fn ambient_dim(&self) -> usize {
        self.atoms[0].ambient_dim()
    }

    /// `r`.
    pub fn subspace_dim(&self) -> usize {
        self.atoms[0].dim()
    }

    /// Push-forward `AP` under `U ↦ AU`.
    pub fn transform(&self, a: &DMatrix<S>) -> Result<Self> {
        let atoms = self
            .atoms
            .iter()
            .map(|u| apply_transform(a, u))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            atoms,
            weights: self.weights.clone(),
            uniform: self.uniform,
        })
    }

    fn check_parameter(&self, sigma: &CovarianceParameter<S>) {
        assert_eq!(
            sigma.dim(),
            self.ambient_dim(),
            "parameter and measure have different ambient dimensions"
        );
    }
}

/// The projectors `πᵢ = π_{Uᵢ}(σ)` of a measure at a fixed parameter, shared
/// by gradient and Hessian evaluations.
#[derive(Debug, Clone)]
pub struct LocalLikelihood<'a, S: Field> {
    measure: &'a EmpiricalMeasure<S>,
    sigma: &'a CovarianceParameter<S>,
    projectors: Vec<DMatrix<S>>,
}

impl<'a, S: Field> LocalLikelihood<'a, S> {
    pub fn new(measure: &'a EmpiricalMeasure<S>, sigma: &'a CovarianceParameter<S>) -> Self {
        measure.check_parameter(sigma);
        let projectors = measure.atoms.iter().map(|u| projector(sigma, u)).collect();
        Self {
            measure,
            sigma,
            projectors,
        }
    }

    pub fn sigma(&self) -> &CovarianceParameter<S> {
        self.sigma
    }

    /// `Σ wᵢ πᵢ`.
    pub fn mean_projector(&self) -> DMatrix<S> {
        let m = self.sigma.dim();
        let mut acc = MatrixSum::new(m, m);
        for (w, p) in self.measure.weights.iter().zip(&self.projectors) {
            acc.add_scaled(*w, p);
        }
        acc.value()
    }

    pub fn gradient(&self) -> TangentVector<S> {
        let m = self.sigma.dim();
        let ratio = self.measure.subspace_dim() as f64 / m as f64;
        let g = DMatrix::<S>::identity(m, m).scale(ratio) - self.mean_projector();
        TangentVector::from_raw(self.sigma, g)
    }

    pub fn hessian_apply(&self, v: &TangentVector<S>) -> TangentVector<S> {
        let m = self.sigma.dim();
        let v = v.entries();
        let mut acc = MatrixSum::new(m, m);
        for (w, p) in self.measure.weights.iter().zip(&self.projectors) {
            let pv = p * v;
            let vp = v * p;
            // πv(I−π) + (I−π)vπ = πv + vπ − 2πvπ
            let term = &pv + &vp - (&pv * p).scale(2.0);
            acc.add_scaled(*w, &term);
        }
        TangentVector::from_raw(self.sigma, acc.value())
    }

    /// Matrix of the Hessian operator in an orthonormal tangent basis.
    pub fn hessian_matrix(&self, basis: &[TangentVector<S>]) -> DMatrix<f64> {
        let k = basis.len();
        let images: Vec<_> = basis.iter().map(|b| self.hessian_apply(b)).collect();
        let mut h = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            for j in i..k {
                let a = real_trace_product(basis[i].entries(), images[j].entries());
                let b = real_trace_product(basis[j].entries(), images[i].entries());
                let sym = 0.5 * (a + b);
                h[(i, j)] = sym;
                h[(j, i)] = sym;
            }
        }
        h
    }

    /// Gradient coordinates `⟨grad, bₖ⟩` in the given basis.
    pub fn gradient_coordinates(&self, basis: &[TangentVector<S>]) -> DVector<f64> {
        let g = self.gradient();
        DVector::from_iterator(
            basis.len(),
            basis.iter().map(|b| real_trace_product(g.entries(), b.entries())),
        )
    }
}

/// `ℓ_P(σ) = Σ wᵢ ℓ_{Uᵢ}(σ)`.
pub fn neg_log_likelihood<S: Field>(p: &EmpiricalMeasure<S>, sigma: &CovarianceParameter<S>) -> f64 {
    p.check_parameter(sigma);
    let mut acc = CompensatedSum::default();
    for (w, u) in p.weights.iter().zip(&p.atoms) {
        acc.add(w * log_density(sigma, u));
    }
    acc.value()
}

/// `grad ℓ_P(σ) = (r/m) I − Σ wᵢ π_{Uᵢ}(σ)`.
pub fn gradient<S: Field>(p: &EmpiricalMeasure<S>, sigma: &CovarianceParameter<S>) -> TangentVector<S> {
    LocalLikelihood::new(p, sigma).gradient()
}

/// `∇_v grad ℓ_P(σ)`.
pub fn hessian_apply<S: Field>(
    p: &EmpiricalMeasure<S>,
    sigma: &CovarianceParameter<S>,
    v: &TangentVector<S>,
) -> TangentVector<S> {
    LocalLikelihood::new(p, sigma).hessian_apply(v)
}

/// `⟨∇_v grad ℓ_P(σ), v⟩`, the second derivative of `ℓ_P` along the geodesic
/// with velocity `v`. Nonnegative by convexity.
pub fn hessian_quadratic<S: Field>(
    p: &EmpiricalMeasure<S>,
    sigma: &CovarianceParameter<S>,
    v: &TangentVector<S>,
) -> f64 {
    real_trace_product(hessian_apply(p, sigma, v).entries(), v.entries())
}

/// Frobenius norm of the gradient; zero exactly at a solution of the
/// likelihood equation `Σ wᵢ πᵢ = (r/m) I`.
pub fn residual<S: Field>(p: &EmpiricalMeasure<S>, sigma: &CovarianceParameter<S>) -> f64 {
    gradient(p, sigma).frobenius_norm()
}

/// Orthonormal basis of the Hessian eigenspace with eigenvalues below `tol`.
///
/// Along these directions `ℓ_P` is affine (to second order) and the estimate,
/// if any, is not unique.
pub fn degenerate_directions<S: Field>(
    p: &EmpiricalMeasure<S>,
    sigma: &CovarianceParameter<S>,
    tol: f64,
) -> Vec<TangentVector<S>> {
    let local = LocalLikelihood::new(p, sigma);
    let basis = tangent_basis(sigma);
    let h = local.hessian_matrix(&basis);
    let eig = h.symmetric_eigen();
    eig.eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &l)| l < tol)
        .map(|(k, _)| {
            let coeffs: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            TangentVector::linear_combination(sigma, &coeffs, &basis)
                .expect("basis vectors share the base point")
        })
        .collect()
}
