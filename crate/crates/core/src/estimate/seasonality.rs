//! Level, linear trend and ten cosine/sine pairs with periods `730 / j` days.

use crate::error::{Error, Result};
use crate::numerics::least_squares;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const HARMONICS: usize = 10;
pub const N_COEFFS: usize = 2 + 2 * HARMONICS;

/// Design row `[1, t, cos(pi t / 365), sin(pi t / 365), .., cos(10 pi t / 365), sin(10 pi t / 365)]`.
pub fn design_row(t: f64) -> [f64; N_COEFFS] {
    let mut r = [0.0; N_COEFFS];
    r[0] = 1.0;
    r[1] = t;
    for j in 1..=HARMONICS {
        let arg = j as f64 * PI * t / 365.0;
        r[2 * j] = arg.cos();
        r[2 * j + 1] = arg.sin();
    }
    r
}

/// `c_0 .. c_21` per dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeasonalityCoefficients {
    pub per_dim: Vec<Vec<f64>>,
}

impl SeasonalityCoefficients {
    pub fn validate(&self) -> Result<()> {
        for (k, c) in self.per_dim.iter().enumerate() {
            if c.len() != N_COEFFS {
                return Err(Error::Shape(format!(
                    "seasonality of dimension {} has {} coefficients, expected {}",
                    k + 1,
                    c.len(),
                    N_COEFFS
                )));
            }
        }
        Ok(())
    }

    pub fn zeros(d: usize) -> Self {
        SeasonalityCoefficients {
            per_dim: vec![vec![0.0; N_COEFFS]; d],
        }
    }

    /// `Lambda_k(t)`.
    pub fn eval(&self, k: usize, t: f64) -> f64 {
        design_row(t).iter().zip(&self.per_dim[k]).map(|(x, c)| x * c).sum()
    }

    /// Amplitude of harmonic pair `j` (1-based) in dimension `k`.
    pub fn amplitude(&self, k: usize, j: usize) -> f64 {
        self.per_dim[k][2 * j].hypot(self.per_dim[k][2 * j + 1])
    }
}

/// Single-dimension fit: coefficients and residuals.
#[derive(Clone, Debug)]
pub struct SeasonalFit {
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
}

/// Ordinary least squares on the 22-column design. `t` is the day counter
/// (365-day years, leap days removed).
pub fn fit_seasonality(values: &[f64], t: &[f64]) -> Result<SeasonalFit> {
    if values.len() != t.len() {
        return Err(Error::Shape(format!("{} values for {} day indices", values.len(), t.len())));
    }
    if values.len() < 2 * 365 {
        return Err(Error::Validation(format!("seasonality fit needs at least 730 days, got {}", values.len())));
    }
    if values.iter().chain(t).any(|v| !v.is_finite()) {
        return Err(Error::Validation("series contains non-finite values".into()));
    }
    let n = values.len();
    let x = DMatrix::from_fn(n, N_COEFFS, |i, j| design_row(t[i])[j]);
    let y = DVector::from_column_slice(values);
    let (c, _) = least_squares(&x, &y).map_err(|e| Error::Numeric(format!("seasonality design: {e}")))?;
    let fitted = &x * &c;
    Ok(SeasonalFit {
        coefficients: c.iter().copied().collect(),
        residuals: (0..n).map(|i| values[i] - fitted[i]).collect(),
    })
}
