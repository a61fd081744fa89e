//! A fixed MCAR(2) model with seasonality and volatility, used to generate
//! synthetic daily data with a known answer.

use super::{
    default_glue, default_segments, fit_volatility, write_csv, Dataset, FittedMcarModel, SeasonalityCoefficients,
    VolatilitySpec,
};
use crate::core_model::{rows_of, McarmaCoefficients, ModelFile, ModelOrders};
use crate::error::Result;
use crate::nig_levy::{FittedLaw, KsResult, NigParams};
use crate::simulate::{simulate_extended_mcar, SimSettings};
use chrono::NaiveDate;
use nalgebra::DMatrix;
use std::f64::consts::PI;

/// Seasonality coefficients used as the generator (a temperature-like and a
/// wind-like series).
pub const SEASONALITY: [[f64; 22]; 2] = [
    [
        226.15, -0.000072, -0.049, -0.11, -12.094, 1.63, 0.23, -0.23, 1.88, 2.81, 0.33, -0.040, 0.16, 1.54, 0.13, 0.14,
        -0.094, 0.45, -0.15, 0.049, -0.014, 0.11,
    ],
    [
        11.18, -0.00011, 0.19, 0.17, 22.58, -4.29, -0.40, 0.015, 0.88, -0.33, -0.29, -0.69, 1.12, 0.18, 0.59, -0.57,
        1.06, -0.37, 0.66, 0.19, 0.95, 0.31,
    ],
];

pub const DRIVER_SCALE: f64 = 1.7;

/// Volatility level per dimension; the yearly swing is 30 % around it.
pub const VOLATILITY_LEVEL: [f64; 2] = [0.3, 0.25];

pub fn reference_coefficients() -> Result<McarmaCoefficients> {
    let a1 = DMatrix::from_row_slice(2, 2, &[1.2, 0.1, -0.05, 1.0]);
    let a2 = DMatrix::from_row_slice(2, 2, &[0.3, 0.02, 0.0, 0.25]);
    McarmaCoefficients::new(ModelOrders::new(2, 0, 2, 2)?, vec![a1, a2], vec![reference_beta()])
}

/// Rows scaled to unit length so that `beta beta^T` has a unit diagonal.
pub fn reference_beta() -> DMatrix<f64> {
    let mut b = DMatrix::from_row_slice(2, 2, &[1.0, 0.03, -0.04, 1.0]);
    for i in 0..2 {
        let n = b.row(i).norm();
        for j in 0..2 {
            b[(i, j)] /= n;
        }
    }
    b
}

pub fn reference_model() -> Result<FittedMcarModel> {
    let coeffs = reference_coefficients()?;
    let specs = default_segments();
    let mut vol = VolatilitySpec { per_dim: Vec::new() };
    for k in 0..2 {
        let var: Vec<f64> = (1..=365)
            .map(|t| (VOLATILITY_LEVEL[k] * (1.0 + 0.3 * (2.0 * PI * (t as f64 - 20.0) / 365.0).cos())).powi(2))
            .collect();
        vol.per_dim.push(fit_volatility(&var, &specs[k], default_glue())?);
    }
    let driver = NigParams::new(DRIVER_SCALE, 0.0, DRIVER_SCALE, 0.0)?;
    let beta = reference_beta();
    let law = FittedLaw::new(
        &driver,
        KsResult {
            statistic: 0.0,
            p_value: 1.0,
        },
    );
    Ok(FittedMcarModel {
        model: ModelFile::from(&coeffs),
        seasonality: SeasonalityCoefficients {
            per_dim: SEASONALITY.iter().map(|c| c.to_vec()).collect(),
        },
        volatility: vol,
        residual_laws: vec![law.clone(), law],
        driver_laws: vec![driver, driver],
        beta: rows_of(&beta),
        sigma_hat: rows_of(&(&beta * beta.transpose())),
        c_delta: DRIVER_SCALE,
        diagnostics: None,
    })
}

/// `days` daily observations from 1 January 2000 of one simulated path.
pub fn reference_dataset(model: &FittedMcarModel, days: usize, seed: u64) -> Result<Dataset> {
    let settings = SimSettings {
        h: 1.0,
        t_end: days as f64,
        n_paths: 1,
        seed,
        epsilon: 0.05,
        x0: None,
    };
    let paths = simulate_extended_mcar(model, &settings)?;
    let d = paths.dim;
    let values = (0..days).map(|s| (0..d).map(|k| paths.value(0, s, k)).collect()).collect();
    Dataset::from_values(NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date"), values)
}

/// Writes the dataset as CSV.
pub fn write_reference_csv<W: std::io::Write>(ds: &Dataset, w: W) -> Result<()> {
    write_csv(ds, w)
}
