//! Design matrix plus response.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    /// Predictor names, one per column of `x`.
    pub names: Vec<String>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let names = (1..=x.ncols()).map(|j| format!("x{j}")).collect();
        Self::with_names(x, y, names)
    }

    pub fn with_names(x: DMatrix<f64>, y: DVector<f64>, names: Vec<String>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                found: y.len(),
            });
        }
        if names.len() != x.ncols() {
            return Err(Error::DimensionMismatch {
                expected: x.ncols(),
                found: names.len(),
            });
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite value in data".into()));
        }
        Ok(Self { x, y, names })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn residuals(&self, beta: &DVector<f64>) -> DVector<f64> {
        &self.y - &self.x * beta
    }

    /// Rows selected by `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        let x = self.x.select_rows(idx.iter());
        let y = DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.y[i]));
        Dataset {
            x,
            y,
            names: self.names.clone(),
        }
    }

    pub fn require_tall(&self) -> Result<()> {
        if self.n() <= self.p() {
            return Err(Error::UnsupportedDimension {
                n: self.n(),
                p: self.p(),
            });
        }
        Ok(())
    }
}
