//! Dense linear-Gaussian factor on the tangent space of stored linearization
//! points. Produced by marginalization (the Schur-complement prior on the
//! Markov blanket) and usable directly for linear problems.

use nalgebra::{DMatrix, DVector};

use crate::smoother::{Symbol, Value, Values};

use super::{missing, FactorError, Linearization};

/// Residual A * delta(x) - b where delta is the stacked tangent-space offset
/// of the current values from the stored linearization points. Rows are
/// already whitened.
#[derive(Debug, Clone)]
pub struct LinearGaussianFactor {
    keys: Vec<Symbol>,
    linearization: Vec<Value>,
    jacobian: DMatrix<f64>,
    rhs: DVector<f64>,
}

impl LinearGaussianFactor {
    /// Builds the factor from explicit (whitened) A and b.
    pub fn new(
        keys: Vec<Symbol>,
        linearization: Vec<Value>,
        jacobian: DMatrix<f64>,
        rhs: DVector<f64>,
    ) -> Self {
        assert_eq!(keys.len(), linearization.len());
        let dim: usize = keys.iter().map(|k| k.dim()).sum();
        assert_eq!(jacobian.ncols(), dim);
        assert_eq!(jacobian.nrows(), rhs.len());
        LinearGaussianFactor {
            keys,
            linearization,
            jacobian,
            rhs,
        }
    }

    /// Builds the factor from information form: residual rows A with
    /// A^T A = lambda and A^T b = eta. Eigenvalues below max * 1e-12 are
    /// treated as gauge directions and dropped, so the residual dimension is
    /// the rank of lambda.
    pub fn from_information(
        keys: Vec<Symbol>,
        linearization: Vec<Value>,
        lambda: &DMatrix<f64>,
        eta: &DVector<f64>,
    ) -> Self {
        let sym = (lambda + lambda.transpose()) * 0.5;
        let eig = sym.symmetric_eigen();
        let maxev = eig.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v));
        let mut rows = Vec::new();
        let mut rhs_rows = Vec::new();
        let n = lambda.nrows();
        for (i, &ev) in eig.eigenvalues.iter().enumerate() {
            if ev > maxev * 1e-12 && ev > 0.0 {
                let s = ev.sqrt();
                let v = eig.eigenvectors.column(i);
                rows.push(v.transpose() * s);
                rhs_rows.push(v.dot(eta) / s);
            }
        }
        let rank = rows.len();
        let mut jacobian = DMatrix::zeros(rank, n);
        let mut rhs = DVector::zeros(rank);
        for (r, (row, b)) in rows.iter().zip(&rhs_rows).enumerate() {
            jacobian.row_mut(r).copy_from(row);
            rhs[r] = *b;
        }
        LinearGaussianFactor::new(keys, linearization, jacobian, rhs)
    }

    pub fn keys(&self) -> &[Symbol] {
        &self.keys
    }

    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    fn delta(&self, values: &Values) -> Result<DVector<f64>, FactorError> {
        let total: usize = self.keys.iter().map(|k| k.dim()).sum();
        let mut delta = DVector::zeros(total);
        let mut at = 0;
        for (key, lin) in self.keys.iter().zip(&self.linearization) {
            let current = values.get(key).ok_or_else(|| missing(key))?;
            let d = lin.local_coords(current);
            delta.rows_mut(at, key.dim()).copy_from(&d);
            at += key.dim();
        }
        Ok(delta)
    }

    pub fn residual(&self, values: &Values) -> Result<DVector<f64>, FactorError> {
        Ok(&self.jacobian * self.delta(values)? - &self.rhs)
    }

    pub fn linearize(&self, values: &Values) -> Result<Linearization, FactorError> {
        let residual = self.residual(values)?;
        let mut jacobians = Vec::with_capacity(self.keys.len());
        let mut at = 0;
        for (key, lin) in self.keys.iter().zip(&self.linearization) {
            let current = values.get(key).ok_or_else(|| missing(key))?;
            let chart = lin.local_coords_jacobian(current);
            let block = self.jacobian.columns(at, key.dim()) * chart;
            jacobians.push(block);
            at += key.dim();
        }
        Ok(Linearization {
            residual,
            jacobians,
        })
    }
}
