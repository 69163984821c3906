//! Points of the Grassmann manifold `Gr(m, r)` stored as orthonormal frames.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::manifold::CovarianceParameter;
use crate::scalar::{Field, ScalarField};

/// Relative singular-value threshold used for rank decisions.
pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-9;

/// Largest condition number accepted by [`apply_transform`].
pub const MAX_TRANSFORM_CONDITION: f64 = 1e12;

/// An `r`-dimensional subspace of `F^m`, `0 < r < m`, represented by an
/// `m × r` frame with orthonormal columns.
#[derive(Debug, Clone)]
pub struct Subspace<S: Field> {
    frame: DMatrix<S>,
}

/// Singular values of `a`, descending.
pub(crate) fn singular_values<S: Field>(a: &DMatrix<S>) -> Vec<f64> {
    let mut sv: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

pub(crate) fn numerical_rank<S: Field>(a: &DMatrix<S>, tol: f64) -> usize {
    let sv = singular_values(a);
    let largest = sv.first().copied().unwrap_or(0.0);
    if largest == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * largest).count()
}

/// Orthonormal basis of the null space of `a` (columns), using a square
/// zero-padded copy so the full right singular basis is available.
pub(crate) fn null_space<S: Field>(a: &DMatrix<S>, tol: f64) -> DMatrix<S> {
    let (rows, cols) = a.shape();
    let padded = if rows < cols {
        let mut p = DMatrix::<S>::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let largest = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let kept: Vec<_> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| largest == 0.0 || s <= tol * largest)
        .map(|(i, _)| v_t.row(i).adjoint())
        .collect();
    if kept.is_empty() {
        DMatrix::zeros(cols, 0)
    } else {
        DMatrix::from_columns(&kept)
    }
}

/// Orthonormalizes the columns of `x` into a subspace.
///
/// Fails with [`Error::RankDeficient`] when the numerical rank, counted as
/// singular values above `tol` times the largest, is below the column count.
pub fn subspace_from_matrix<S: Field>(x: &DMatrix<S>, tol: f64) -> Result<Subspace<S>> {
    let (m, r) = x.shape();
    if r == 0 || r >= m {
        return Err(Error::DimensionMismatch(format!(
            "subspace frame must be m x r with 0 < r < m, got {m}x{r}"
        )));
    }
    let rank = numerical_rank(x, tol);
    if rank < r {
        return Err(Error::RankDeficient { rank, expected: r });
    }
    Ok(Subspace {
        frame: orthonormalize(x),
    })
}

/// Householder QR with the phases fixed so that `R` has a positive diagonal;
/// this makes the frame of an already orthonormal `x` equal to `x`.
fn orthonormalize<S: Field>(x: &DMatrix<S>) -> DMatrix<S> {
    let qr = x.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..q.ncols() {
        let d = r[(j, j)];
        let modulus = d.modulus();
        if modulus > 0.0 {
            let phase = d.unscale(modulus);
            q.column_mut(j).iter_mut().for_each(|z| *z *= phase);
        }
    }
    q
}

impl<S: Field> Subspace<S> {
    /// Span of the given columns, default rank tolerance.
    pub fn from_matrix(x: &DMatrix<S>) -> Result<Self> {
        subspace_from_matrix(x, DEFAULT_RANK_TOLERANCE)
    }

    /// The span of standard basis vectors `e_i`, `i ∈ indices` (0-based).
    pub fn coordinate(m: usize, indices: &[usize]) -> Result<Self> {
        let mut x = DMatrix::<S>::zeros(m, indices.len());
        for (j, &i) in indices.iter().enumerate() {
            if i >= m {
                return Err(Error::DimensionMismatch(format!("index {i} out of range for m = {m}")));
            }
            x[(i, j)] = S::one();
        }
        Self::from_matrix(&x)
    }

    pub fn frame(&self) -> &DMatrix<S> {
        &self.frame
    }

    /// Ambient dimension `m`.
    pub fn ambient_dim(&self) -> usize {
        self.frame.nrows()
    }

    /// Subspace dimension `r`.
    pub fn dim(&self) -> usize {
        self.frame.ncols()
    }

    pub fn field(&self) -> ScalarField {
        S::FIELD
    }

    /// Same range as `other`, decided by [`intersection_dim`].
    pub fn same_as(&self, other: &Self) -> bool {
        self.dim() == other.dim()
            && intersection_dim(self, other, DEFAULT_RANK_TOLERANCE).ok() == Some(self.dim())
    }

    /// `U + V` when it is a proper subspace; `None` when it fills `F^m`.
    pub fn sum(&self, other: &Self, tol: f64) -> Result<Option<Self>> {
        check_ambient(self, other)?;
        let joined = hstack(&self.frame, &other.frame);
        let rank = numerical_rank(&joined, tol);
        if rank >= self.ambient_dim() {
            return Ok(None);
        }
        let svd = joined.svd(true, false);
        let u = svd.u.expect("requested left singular vectors");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
        let cols: Vec<_> = order[..rank].iter().map(|&i| u.column(i).into_owned()).collect();
        Ok(Some(Subspace {
            frame: orthonormalize(&DMatrix::from_columns(&cols)),
        }))
    }

    /// `U ∩ V`; `None` when the intersection is zero.
    pub fn intersection(&self, other: &Self, tol: f64) -> Result<Option<Self>> {
        check_ambient(self, other)?;
        let r = self.dim();
        let joined = hstack(&self.frame, &other.frame);
        let kernel = null_space(&joined, tol);
        if kernel.ncols() == 0 {
            return Ok(None);
        }
        let coeffs = kernel.rows(0, r).into_owned();
        let vectors = &self.frame * coeffs;
        let rank = numerical_rank(&vectors, tol);
        if rank == 0 {
            return Ok(None);
        }
        let svd = vectors.svd(true, false);
        let u = svd.u.expect("requested left singular vectors");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
        let cols: Vec<_> = order[..rank].iter().map(|&i| u.column(i).into_owned()).collect();
        Ok(Some(Subspace {
            frame: orthonormalize(&DMatrix::from_columns(&cols)),
        }))
    }
}

fn hstack<S: Field>(a: &DMatrix<S>, b: &DMatrix<S>) -> DMatrix<S> {
    let mut out = DMatrix::<S>::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

fn check_ambient<S: Field>(u: &Subspace<S>, v: &Subspace<S>) -> Result<()> {
    if u.ambient_dim() != v.ambient_dim() {
        return Err(Error::DimensionMismatch(format!(
            "subspaces of F^{} and F^{}",
            u.ambient_dim(),
            v.ambient_dim()
        )));
    }
    Ok(())
}

/// A draw from the uniform distribution `G_I` on `Gr(m, r)`: the span of `r`
/// i.i.d. standard normal vectors.
pub fn uniform_sample<S: Field, R: Rng + ?Sized>(m: usize, r: usize, rng: &mut R) -> Subspace<S> {
    assert!(0 < r && r < m, "uniform_sample requires 0 < r < m");
    loop {
        let z = DMatrix::<S>::from_fn(m, r, |_, _| S::standard_normal(rng));
        if let Ok(u) = subspace_from_matrix(&z, 1e-12) {
            return u;
        }
    }
}

/// `dim(U ∩ V) = dim U + dim V − rank [X | Y]`.
pub fn intersection_dim<S: Field>(u: &Subspace<S>, v: &Subspace<S>, tol: f64) -> Result<usize> {
    check_ambient(u, v)?;
    let joined = hstack(&u.frame, &v.frame);
    let rank = numerical_rank(&joined, tol);
    Ok(u.dim() + v.dim() - rank)
}

/// The σ-orthogonal projector `π_U(σ) = X (X*σ⁻¹X)⁻¹ X*σ⁻¹` onto `U`.
///
/// Computed in whitened coordinates as `L Q Q* L⁻¹` with `σ = LL*` and `Q`
/// an orthonormal basis of `L⁻¹U`, which avoids inverting the Gram matrix.
pub fn projector<S: Field>(sigma: &CovarianceParameter<S>, u: &Subspace<S>) -> DMatrix<S> {
    assert_eq!(sigma.dim(), u.ambient_dim(), "projector: dimension mismatch");
    let q = sigma.whiten(u.frame()).qr().q();
    sigma.spectral_scale(&q, 0.5) * sigma.spectral_scale(&q, -0.5).adjoint()
}

/// The image `AU = ⟨AX⟩`.
pub fn apply_transform<S: Field>(a: &DMatrix<S>, u: &Subspace<S>) -> Result<Subspace<S>> {
    let m = u.ambient_dim();
    if a.shape() != (m, m) {
        return Err(Error::DimensionMismatch(format!(
            "transform is {}x{}, ambient dimension is {m}",
            a.nrows(),
            a.ncols()
        )));
    }
    let sv = singular_values(a);
    let condition = sv[0] / sv[m - 1];
    if !condition.is_finite() || condition > MAX_TRANSFORM_CONDITION {
        return Err(Error::Singular { condition });
    }
    subspace_from_matrix(&(a * u.frame()), DEFAULT_RANK_TOLERANCE)
}
