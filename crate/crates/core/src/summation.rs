//! Neumaier-compensated sums, so atom reductions do not depend on order beyond
//! the last few ulps.

use nalgebra::DMatrix;

use crate::scalar::Field;

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Entrywise compensated accumulation of matrices, real and imaginary parts
/// tracked separately.
pub(crate) struct MatrixSum {
    rows: usize,
    cols: usize,
    re: Vec<CompensatedSum>,
    im: Vec<CompensatedSum>,
}

impl MatrixSum {
    pub(crate) fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            re: vec![CompensatedSum::default(); rows * cols],
            im: vec![CompensatedSum::default(); rows * cols],
        }
    }

    pub(crate) fn add_scaled<S: Field>(&mut self, weight: f64, m: &DMatrix<S>) {
        debug_assert_eq!(m.shape(), (self.rows, self.cols));
        for (k, x) in m.iter().enumerate() {
            let (re, im) = x.parts();
            self.re[k].add(weight * re);
            self.im[k].add(weight * im);
        }
    }

    pub(crate) fn value<S: Field>(&self) -> DMatrix<S> {
        DMatrix::from_iterator(
            self.rows,
            self.cols,
            self.re
                .iter()
                .zip(&self.im)
                .map(|(re, im)| S::from_parts(re.value(), im.value())),
        )
    }
}
