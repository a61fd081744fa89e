//! Equation-by-equation least squares for VAR(p) with OLS t-values.

use crate::core_model::{ModelOrders, VarmaRepresentation};
use crate::error::{Error, Result};
use crate::numerics::least_squares;
use nalgebra::{DMatrix, DVector};
use std::collections::BTreeMap;

#[derive(Clone, Debug)]
pub struct VarFit {
    /// `phi_1..phi_p` with an identity offset-0 loading at step 1.
    pub representation: VarmaRepresentation,
    pub t_values: Vec<DMatrix<f64>>,
    pub intercept: Option<DVector<f64>>,
    pub intercept_t_values: Option<DVector<f64>>,
    /// Residuals for times `p..n`, one row per time.
    pub residuals: Vec<Vec<f64>>,
    pub residual_covariance: DMatrix<f64>,
}

/// `x(t) = c + sum_i phi_i x(t - i) + e(t)`, fit row by row; `series[t][k]`.
pub fn fit_var_ols(series: &[Vec<f64>], p: usize, intercept: bool) -> Result<VarFit> {
    if p == 0 {
        return Err(Error::Validation("VAR order p must be at least 1".into()));
    }
    let d = series.first().map_or(0, |r| r.len());
    if d == 0 || series.iter().any(|r| r.len() != d) {
        return Err(Error::Shape("VAR input rows must share a positive dimension".into()));
    }
    let n = series.len();
    if n <= 10 * p * d {
        return Err(Error::Validation(format!("VAR({p}) in dimension {d} needs more than {} observations, got {n}", 10 * p * d)));
    }
    let rows = n - p;
    let off = usize::from(intercept);
    let k = p * d + off;
    let x = DMatrix::from_fn(rows, k, |r, c| {
        if intercept && c == 0 {
            return 1.0;
        }
        let c = c - off;
        let lag = c / d + 1;
        series[r + p - lag][c % d]
    });
    let mut phi = vec![DMatrix::zeros(d, d); p];
    let mut tv = vec![DMatrix::zeros(d, d); p];
    let mut c0 = DVector::zeros(d);
    let mut ct = DVector::zeros(d);
    let mut residuals = vec![vec![0.0; d]; rows];
    for eq in 0..d {
        let y = DVector::from_fn(rows, |r, _| series[r + p][eq]);
        let (b, inv) = least_squares(&x, &y).map_err(|e| Error::Numeric(format!("VAR design: {e}")))?;
        let e = &y - &x * &b;
        let s2 = e.norm_squared() / (rows - k) as f64;
        for (r, v) in e.iter().enumerate() {
            residuals[r][eq] = *v;
        }
        let t_of = |j: usize| b[j] / (s2 * inv[(j, j)]).sqrt();
        if intercept {
            c0[eq] = b[0];
            ct[eq] = t_of(0);
        }
        for j in 0..p * d {
            phi[j / d][(eq, j % d)] = b[j + off];
            tv[j / d][(eq, j % d)] = t_of(j + off);
        }
    }
    let mut cov = DMatrix::zeros(d, d);
    for r in &residuals {
        for i in 0..d {
            for j in 0..d {
                cov[(i, j)] += r[i] * r[j];
            }
        }
    }
    cov /= (rows - k) as f64;
    let mut loads = BTreeMap::new();
    loads.insert(0, DMatrix::identity(d, d));
    let representation = VarmaRepresentation {
        orders: ModelOrders::new(p, 0, d, d)?,
        step: 1.0,
        phi_blocks: phi,
        noise_loadings: loads,
    };
    Ok(VarFit {
        representation,
        t_values: tv,
        intercept: intercept.then_some(c0),
        intercept_t_values: intercept.then_some(ct),
        residuals,
        residual_covariance: cov,
    })
}
