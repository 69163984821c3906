//! Geometry of `Pos(m)`, the self-adjoint positive-definite matrices of
//! determinant one.
//!
//! The tangent space at `σ` is the set of self-σ-adjoint (`v = σ v* σ⁻¹`),
//! trace-free matrices, with metric `⟨v₁, v₂⟩ = tr(v₁ v₂)`. The geodesic of
//! velocity `v` issuing from `σ` is `γ(t) = e^{2tv} σ`.
//!
//! Every square root, logarithm and exponential here goes through the
//! eigendecomposition of a self-adjoint matrix.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::{Field, ScalarField};

/// Default tolerance on `‖M − M*‖ / ‖M‖` accepted by [`normalize_parameter`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-8;

/// Eigenvalues at or below this fraction of the largest one count as zero.
pub const POSITIVITY_TOLERANCE: f64 = 1e-12;

pub(crate) fn hermitian_part<S: Field>(a: &DMatrix<S>) -> DMatrix<S> {
    (a + a.adjoint()).scale(0.5)
}

/// Eigendecomposition of the self-adjoint part of `a`, eigenvalues ascending.
pub(crate) fn hermitian_eigen<S: Field>(a: &DMatrix<S>) -> (DVector<f64>, DMatrix<S>) {
    let eig = hermitian_part(a).symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = DMatrix::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect::<Vec<_>>(),
    );
    (values, vectors)
}

/// `V f(Λ) V*` for an eigendecomposition `(Λ, V)`.
pub(crate) fn spectral_apply<S: Field>(
    values: &DVector<f64>,
    vectors: &DMatrix<S>,
    f: impl Fn(f64) -> f64,
) -> DMatrix<S> {
    let mut scaled = vectors.clone();
    for (j, &lambda) in values.iter().enumerate() {
        let fj = f(lambda);
        scaled.column_mut(j).iter_mut().for_each(|x| *x = x.scale(fj));
    }
    let out = scaled * vectors.adjoint();
    hermitian_part(&out)
}

/// `Re tr(a b)` without forming the product.
pub(crate) fn real_trace_product<S: Field>(a: &DMatrix<S>, b: &DMatrix<S>) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (a[(i, j)] * b[(j, i)]).real();
        }
    }
    acc
}

pub(crate) fn real_trace<S: Field>(a: &DMatrix<S>) -> f64 {
    a.diagonal().iter().map(|x| x.real()).sum()
}

fn max_abs<S: Field>(a: &DMatrix<S>) -> f64 {
    a.iter().map(|x| x.modulus()).fold(0.0, f64::max)
}

/// A point `σ` of `Pos(m)`.
///
/// The eigendecomposition and inverse are computed once at construction and
/// reused by every downstream formula.
#[derive(Debug, Clone)]
pub struct CovarianceParameter<S: Field> {
    entries: DMatrix<S>,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<S>,
    inverse: DMatrix<S>,
}

/// Symmetrizes `m`, checks positive definiteness and rescales to determinant 1.
pub fn normalize_parameter<S: Field>(m: &DMatrix<S>) -> Result<CovarianceParameter<S>> {
    normalize_parameter_with_tolerance(m, SYMMETRY_TOLERANCE)
}

/// Like [`normalize_parameter`] with an explicit asymmetry tolerance, measured
/// as `max|M − M*| / max(1, max|M|)`.
pub fn normalize_parameter_with_tolerance<S: Field>(
    m: &DMatrix<S>,
    symmetry_tolerance: f64,
) -> Result<CovarianceParameter<S>> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "parameter must be a nonempty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|x| {
        let (re, im) = x.parts();
        !re.is_finite() || !im.is_finite()
    }) {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: f64::NAN,
        });
    }
    let asymmetry = max_abs(&(m - m.adjoint())) / max_abs(m).max(1.0);
    if asymmetry > symmetry_tolerance {
        return Err(Error::NotSelfAdjoint { asymmetry });
    }
    CovarianceParameter::from_self_adjoint(hermitian_part(m))
}

impl<S: Field> CovarianceParameter<S> {
    /// The identity, the parameter of the uniform distribution.
    pub fn identity(m: usize) -> Self {
        Self {
            entries: DMatrix::identity(m, m),
            eigenvalues: DVector::from_element(m, 1.0),
            eigenvectors: DMatrix::identity(m, m),
            inverse: DMatrix::identity(m, m),
        }
    }

    /// Builds from an exactly self-adjoint matrix, rescaling to determinant 1.
    fn from_self_adjoint(entries: DMatrix<S>) -> Result<Self> {
        let (values, vectors) = hermitian_eigen(&entries);
        let largest = values[values.len() - 1];
        let smallest = values[0];
        if !(largest > 0.0) || smallest <= POSITIVITY_TOLERANCE * largest {
            return Err(Error::NotPositiveDefinite {
                min_eigenvalue: smallest,
            });
        }
        let mean_log = values.iter().map(|l| l.ln()).sum::<f64>() / values.len() as f64;
        let scale = (-mean_log).exp();
        let eigenvalues = values.map(|l| l * scale);
        let entries = spectral_apply(&eigenvalues, &vectors, |l| l);
        let inverse = spectral_apply(&eigenvalues, &vectors, |l| 1.0 / l);
        Ok(Self {
            entries,
            eigenvalues,
            eigenvectors: vectors,
            inverse,
        })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn field(&self) -> ScalarField {
        S::FIELD
    }

    pub fn entries(&self) -> &DMatrix<S> {
        &self.entries
    }

    pub fn inverse(&self) -> &DMatrix<S> {
        &self.inverse
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn sqrt(&self) -> DMatrix<S> {
        spectral_apply(&self.eigenvalues, &self.eigenvectors, f64::sqrt)
    }

    pub fn inv_sqrt(&self) -> DMatrix<S> {
        spectral_apply(&self.eigenvalues, &self.eigenvectors, |l| 1.0 / l.sqrt())
    }

    /// `Λ^{-1/2} V* x` for `σ = V Λ V*`; whitened coordinates in which `σ` is `I`.
    pub(crate) fn whiten(&self, x: &DMatrix<S>) -> DMatrix<S> {
        let mut y = self.eigenvectors.adjoint() * x;
        for (i, &l) in self.eigenvalues.iter().enumerate() {
            y.row_mut(i).scale_mut(1.0 / l.sqrt());
        }
        y
    }

    /// `V Λ^{power} y`, the inverse of [`Self::whiten`] for `power = ½`.
    pub(crate) fn spectral_scale(&self, y: &DMatrix<S>, power: f64) -> DMatrix<S> {
        let mut z = y.clone();
        for (i, &l) in self.eigenvalues.iter().enumerate() {
            z.row_mut(i).scale_mut(l.powf(power));
        }
        &self.eigenvectors * z
    }

    /// `λ_max / λ_min`.
    pub fn condition_number(&self) -> f64 {
        self.eigenvalues[self.dim() - 1] / self.eigenvalues[0]
    }

    pub fn determinant(&self) -> f64 {
        self.eigenvalues.iter().product()
    }

    /// Congruence `A σ A*`, renormalized to determinant 1.
    pub fn congruence(&self, a: &DMatrix<S>) -> Result<Self> {
        if a.shape() != (self.dim(), self.dim()) {
            return Err(Error::DimensionMismatch(format!(
                "transform is {}x{}, parameter is {}x{}",
                a.nrows(),
                a.ncols(),
                self.dim(),
                self.dim()
            )));
        }
        let m = a * &self.entries * a.adjoint();
        Self::from_self_adjoint(hermitian_part(&m))
    }

    fn same_point(&self, other: &Self) -> bool {
        self.entries.shape() == other.entries.shape()
            && max_abs(&(&self.entries - &other.entries)) <= 1e-12 * max_abs(&self.entries).max(1.0)
    }
}

/// An element of the tangent space `T_σ`.
#[derive(Debug, Clone)]
pub struct TangentVector<S: Field> {
    base: CovarianceParameter<S>,
    entries: DMatrix<S>,
}

impl<S: Field> TangentVector<S> {
    pub fn zero(base: &CovarianceParameter<S>) -> Self {
        let m = base.dim();
        Self {
            base: base.clone(),
            entries: DMatrix::zeros(m, m),
        }
    }

    /// Wraps a matrix already known to lie in `T_σ`.
    pub(crate) fn from_raw(base: &CovarianceParameter<S>, entries: DMatrix<S>) -> Self {
        Self {
            base: base.clone(),
            entries,
        }
    }

    pub fn base(&self) -> &CovarianceParameter<S> {
        &self.base
    }

    pub fn entries(&self) -> &DMatrix<S> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<S> {
        self.entries
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            base: self.base.clone(),
            entries: self.entries.scale(c),
        }
    }

    /// Frobenius norm of the matrix (not the metric norm).
    pub fn frobenius_norm(&self) -> f64 {
        self.entries.norm()
    }

    /// Metric norm `sqrt(tr(v²))`.
    pub fn norm(&self) -> f64 {
        real_trace_product(&self.entries, &self.entries).max(0.0).sqrt()
    }

    /// `Σ cᵢ vᵢ` for tangent vectors at a common base point.
    pub fn linear_combination(
        base: &CovarianceParameter<S>,
        coefficients: &[f64],
        vectors: &[TangentVector<S>],
    ) -> Result<Self> {
        if coefficients.len() != vectors.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for {} vectors",
                coefficients.len(),
                vectors.len()
            )));
        }
        let m = base.dim();
        let mut acc = DMatrix::<S>::zeros(m, m);
        for (c, v) in coefficients.iter().zip(vectors) {
            if !v.base.same_point(base) {
                return Err(Error::BasePointMismatch);
            }
            acc += v.entries.scale(*c);
        }
        Ok(Self::from_raw(base, acc))
    }

    /// Violation of the tangent-space invariants: the largest entry of
    /// `v − σ v* σ⁻¹` and `|tr v|`, both absolute.
    pub fn invariant_defects(&self) -> (f64, f64) {
        let sigma = self.base.entries();
        let adj = sigma * self.entries.adjoint() * self.base.inverse();
        let tr = self.entries.trace();
        (max_abs(&(&self.entries - adj)), tr.modulus())
    }
}

/// Projection onto `T_σ`: `(A + σA*σ⁻¹)/2` with its trace removed.
pub fn tangent_project<S: Field>(sigma: &CovarianceParameter<S>, a: &DMatrix<S>) -> TangentVector<S> {
    let m = sigma.dim();
    assert_eq!(a.shape(), (m, m), "tangent_project: shape mismatch");
    let sym = (a + sigma.entries() * a.adjoint() * sigma.inverse()).scale(0.5);
    let shift = real_trace(&sym) / m as f64;
    let mut v = sym;
    for i in 0..m {
        v[(i, i)] -= S::from_real(shift);
    }
    TangentVector::from_raw(sigma, v)
}

/// Point at time `t` on the geodesic through `σ` with velocity `v`, i.e.
/// `e^{2tv} σ`, evaluated as `σ^{1/2} e^{2tw} σ^{1/2}` with the self-adjoint
/// `w = σ^{-1/2} v σ^{1/2}`.
///
/// Panics if the endpoint is numerically singular; see [`try_geodesic`].
pub fn geodesic<S: Field>(v: &TangentVector<S>, t: f64) -> CovarianceParameter<S> {
    try_geodesic(v, t).expect("geodesic endpoint is numerically positive definite")
}

/// [`geodesic`], failing with [`Error::NotPositiveDefinite`] when `2t·v` is
/// so long that the endpoint's condition number exceeds `1/POSITIVITY_TOLERANCE`.
pub fn try_geodesic<S: Field>(v: &TangentVector<S>, t: f64) -> Result<CovarianceParameter<S>> {
    let sigma = v.base();
    if t == 0.0 {
        return Ok(sigma.clone());
    }
    let half = sigma.sqrt();
    let w = hermitian_part(&(sigma.inv_sqrt() * v.entries() * &half));
    let (values, vectors) = hermitian_eigen(&w);
    let exp = spectral_apply(&values, &vectors, |l| (2.0 * t * l).exp());
    let point = hermitian_part(&(&half * exp * &half));
    CovarianceParameter::from_self_adjoint(point)
}

/// The exponential map `Exp_σ(v) = γ(1) = e^{2v} σ`.
pub fn exp_map<S: Field>(v: &TangentVector<S>) -> CovarianceParameter<S> {
    geodesic(v, 1.0)
}

/// Riemannian metric `Re tr(v₁ v₂)`.
pub fn metric_inner<S: Field>(v1: &TangentVector<S>, v2: &TangentVector<S>) -> Result<f64> {
    if !v1.base.same_point(&v2.base) {
        return Err(Error::BasePointMismatch);
    }
    Ok(real_trace_product(&v1.entries, &v2.entries))
}

/// Geodesic distance `‖log(σ₁^{-1/2} σ₂ σ₁^{-1/2})‖_F`.
pub fn distance<S: Field>(s1: &CovarianceParameter<S>, s2: &CovarianceParameter<S>) -> Result<f64> {
    if s1.dim() != s2.dim() {
        return Err(Error::DimensionMismatch(format!(
            "distance between {}x{} and {}x{} parameters",
            s1.dim(),
            s1.dim(),
            s2.dim(),
            s2.dim()
        )));
    }
    let inv_half = s1.inv_sqrt();
    let m = &inv_half * s2.entries() * &inv_half;
    let (values, _) = hermitian_eigen(&m);
    Ok(values
        .iter()
        .map(|l| l.max(f64::MIN_POSITIVE).ln().powi(2))
        .sum::<f64>()
        .sqrt())
}

/// A metric-orthonormal basis of `T_σ`, of length `m(m+1)/2 − 1` over the
/// reals and `m² − 1` over the complex numbers.
///
/// Built as `σ^{1/2} w σ^{-1/2}` from an orthonormal basis `w` of the
/// trace-free self-adjoint matrices, which preserves `tr(v₁v₂) = tr(w₁w₂)`.
pub fn tangent_basis<S: Field>(sigma: &CovarianceParameter<S>) -> Vec<TangentVector<S>> {
    let m = sigma.dim();
    let half = sigma.sqrt();
    let inv_half = sigma.inv_sqrt();
    let root_half = std::f64::consts::FRAC_1_SQRT_2;
    let mut ws: Vec<DMatrix<S>> = Vec::new();
    for i in 0..m {
        for j in (i + 1)..m {
            let mut w = DMatrix::<S>::zeros(m, m);
            w[(i, j)] = S::from_real(root_half);
            w[(j, i)] = S::from_real(root_half);
            ws.push(w);
            if S::FIELD == ScalarField::Complex {
                let mut w = DMatrix::<S>::zeros(m, m);
                w[(i, j)] = S::from_parts(0.0, root_half);
                w[(j, i)] = S::from_parts(0.0, -root_half);
                ws.push(w);
            }
        }
    }
    for k in 1..m {
        let norm = ((k * (k + 1)) as f64).sqrt();
        let mut w = DMatrix::<S>::zeros(m, m);
        for l in 0..k {
            w[(l, l)] = S::from_real(1.0 / norm);
        }
        w[(k, k)] = S::from_real(-(k as f64) / norm);
        ws.push(w);
    }
    ws.into_iter()
        .map(|w| TangentVector::from_raw(sigma, &half * w * &inv_half))
        .collect()
}
