//! Real and complex scalars behind one interface.

use std::fmt;

use nalgebra::ComplexField;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

/// Which field the matrices live over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScalarField {
    Real,
    Complex,
}

impl ScalarField {
    /// Real dimension of the field: 1 for the reals, 2 for the complex numbers.
    pub fn real_dim(self) -> usize {
        match self {
            ScalarField::Real => 1,
            ScalarField::Complex => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ScalarField::Real => "real",
            ScalarField::Complex => "complex",
        }
    }
}

impl fmt::Display for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Scalar type of the model: `f64` or `Complex64`.
///
/// Every formula in the crate is written once against this trait, with
/// `adjoint` meaning the conjugate transpose.
pub trait Field: ComplexField<RealField = f64> + Copy + Send + Sync + 'static {
    const FIELD: ScalarField;

    /// Standard normal draw: `N(0, 1)` for reals, `(N(0,1) + i N(0,1)) / √2` for
    /// complex numbers, so that `E|z|² = 1` in both cases.
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Builds a scalar from real and imaginary parts. The imaginary part is
    /// dropped for the reals.
    fn from_parts(re: f64, im: f64) -> Self;

    fn parts(self) -> (f64, f64);
}

impl Field for f64 {
    const FIELD: ScalarField = ScalarField::Real;

    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }

    fn from_parts(re: f64, _im: f64) -> Self {
        re
    }

    fn parts(self) -> (f64, f64) {
        (self, 0.0)
    }
}

impl Field for Complex64 {
    const FIELD: ScalarField = ScalarField::Complex;

    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    }

    fn from_parts(re: f64, im: f64) -> Self {
        Complex64::new(re, im)
    }

    fn parts(self) -> (f64, f64) {
        (self.re, self.im)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_dimension_matches_field() {
        assert_eq!(<f64 as Field>::FIELD.real_dim(), 1);
        assert_eq!(<Complex64 as Field>::FIELD.real_dim(), 2);
    }

    #[test]
    fn complex_parts_roundtrip() {
        let z = Complex64::from_parts(1.5, -2.0);
        assert_eq!(z.parts(), (1.5, -2.0));
        assert_eq!(f64::from_parts(3.0, 7.0), 3.0);
    }
}
