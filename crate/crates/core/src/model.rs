//! The Grassmannian model `(G_σ)`: sampling and density.
//!
//! Note: the normal density underlying the model is `exp(−x*σ⁻¹x/2)`.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::grassmann::{subspace_from_matrix, Subspace};
use crate::manifold::CovarianceParameter;
use crate::scalar::Field;

/// Largest exponent passed to `exp` before [`density_ratio`] reports overflow.
const MAX_EXPONENT: f64 = 709.0;

/// A draw from `G_σ`: the span of `r` i.i.d. `N(0, σ)` vectors, generated as
/// `σ^{1/2} Z` with `Z` standard normal.
pub fn sample<S: Field, R: Rng + ?Sized>(
    sigma: &CovarianceParameter<S>,
    r: usize,
    rng: &mut R,
) -> Subspace<S> {
    let m = sigma.dim();
    assert!(0 < r && r < m, "sample requires 0 < r < m");
    let half = sigma.sqrt();
    loop {
        let z = DMatrix::<S>::from_fn(m, r, |_, _| S::standard_normal(rng));
        if let Ok(u) = subspace_from_matrix(&(&half * z), 1e-12) {
            return u;
        }
    }
}

/// Log-determinant of a Hermitian positive-definite matrix as a sum of logs.
#[cfg(test)]
fn log_det_hermitian<S: Field>(a: &DMatrix<S>) -> f64 {
    let (values, _) = crate::manifold::hermitian_eigen(a);
    values.iter().map(|l| l.ln()).sum()
}

/// The negative log-density `ℓ_U(σ) = ½ log det(X*σ⁻¹X) / det(X*X)`.
///
/// Frames are orthonormal, so the denominator is 1. With `Y = L⁻¹X`,
/// `σ = LL*` and `Y = QR`, this is `Σ log|R_jj|`.
pub fn log_density<S: Field>(sigma: &CovarianceParameter<S>, u: &Subspace<S>) -> f64 {
    assert_eq!(sigma.dim(), u.ambient_dim(), "log_density: dimension mismatch");
    let r = sigma.whiten(u.frame()).qr().r();
    r.diagonal().iter().map(|d| d.modulus().ln()).sum()
}

/// `log dG_σ/dG_I (U) = −i_F · m · ℓ_U(σ)`.
pub fn log_density_ratio<S: Field>(sigma: &CovarianceParameter<S>, u: &Subspace<S>) -> f64 {
    let scale = (S::FIELD.real_dim() * sigma.dim()) as f64;
    -scale * log_density(sigma, u)
}

/// The Radon–Nikodym derivative `dG_σ/dG_I (U)`.
pub fn density_ratio<S: Field>(sigma: &CovarianceParameter<S>, u: &Subspace<S>) -> Result<f64> {
    let exponent = log_density_ratio(sigma, u);
    if exponent > MAX_EXPONENT {
        return Err(Error::Overflow { exponent });
    }
    Ok(exponent.exp())
}
