//! MCAR estimation with seasonality and volatility: Fourier seasonality,
//! VAR least squares, daily-variance volatility, NIG residual laws, the
//! discrete-to-continuous coefficient map and the error-loading solver.

pub mod beta;
pub mod synthetic;
pub mod seasonality;
pub mod var;
pub mod volatility;

pub use beta::{solve_beta, solve_beta_all, BetaBranch, BetaSolution};
pub use seasonality::{fit_seasonality, SeasonalityCoefficients};
pub use var::{fit_var_ols, VarFit};
pub use volatility::{
    default_glue, default_segments, empirical_daily_variance, fit_volatility, Glue, SegmentSpec, VolatilityCurve,
    VolatilitySpec,
};

use crate::core_model::{
    assemble_companion, matrix_from_rows, mcarma_stationarity, rows_of, var_stationarity, McarmaCoefficients,
    ModelFile, StationarityReport,
};
use crate::error::{Error, Result};
use crate::nig_levy::{ks_test, nig_fit, nig_scale, FittedLaw, NigParams};
use crate::transform::{inverse_transform_mcar, inverse_transform_closed_form};
use chrono::{Datelike, NaiveDate};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::io::Read;

/// Daily observations on a 365-day calendar.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    /// Day counter, 1 on the first row; leap days do not count.
    pub t: Vec<f64>,
    pub day_of_year: Vec<usize>,
    /// `values[i][k]`.
    pub values: Vec<Vec<f64>>,
    pub dates: Vec<NaiveDate>,
}

impl Dataset {
    pub fn dim(&self) -> usize {
        self.values.first().map_or(0, |r| r.len())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Consecutive days starting at `start`, which must not be 29 February.
    pub fn from_values(start: NaiveDate, values: Vec<Vec<f64>>) -> Result<Self> {
        let (y0, d0) = no_leap_ordinal(start).ok_or_else(|| Error::Validation("start date cannot be 29 February".into()))?;
        let mut t = Vec::with_capacity(values.len());
        let mut doy = Vec::with_capacity(values.len());
        let mut dates = Vec::with_capacity(values.len());
        for i in 0..values.len() {
            let abs = d0 - 1 + i;
            let year = y0 + (abs / 365) as i32;
            let day = abs % 365 + 1;
            t.push(i as f64 + 1.0);
            doy.push(day);
            dates.push(date_from_no_leap(year, day)?);
        }
        Ok(Dataset {
            t,
            day_of_year: doy,
            values,
            dates,
        })
    }
}

/// Year and day of year on a calendar without 29 February.
fn no_leap_ordinal(d: NaiveDate) -> Option<(i32, usize)> {
    if d.month() == 2 && d.day() == 29 {
        return None;
    }
    let mut o = d.ordinal() as usize;
    if d.leap_year() && d.month() > 2 {
        o -= 1;
    }
    Some((d.year(), o))
}

fn date_from_no_leap(year: i32, day: usize) -> Result<NaiveDate> {
    let leap = NaiveDate::from_ymd_opt(year, 2, 29).is_some();
    let ord = if leap && day >= 60 { day + 1 } else { day };
    NaiveDate::from_yo_opt(year, ord as u32).ok_or_else(|| Error::Validation(format!("no date for day {day} of {year}")))
}

/// Reads `date,dim1,..,dimd` with ISO dates. Rows dated 29 February are dropped.
pub fn load_csv<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Parse(format!("line 1: {e}")))?.clone();
    if headers.len() < 2 || &headers[0] != "date" {
        return Err(Error::Parse("line 1: header must be `date,dim1,..`".into()));
    }
    for (k, h) in headers.iter().enumerate().skip(1) {
        if h != format!("dim{k}") {
            return Err(Error::Parse(format!("line 1: column {} must be named dim{k}, found {h:?}", k + 1)));
        }
    }
    let d = headers.len() - 1;
    let mut rows: Vec<(NaiveDate, Vec<f64>)> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse(format!("line {line}: {e}")))?;
        if rec.len() != d + 1 {
            return Err(Error::Parse(format!("line {line}: expected {} fields, found {}", d + 1, rec.len())));
        }
        let date = NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d")
            .map_err(|e| Error::Parse(format!("line {line}: bad date {:?}: {e}", &rec[0])))?;
        let mut vals = Vec::with_capacity(d);
        for k in 1..=d {
            let v: f64 = rec[k]
                .parse()
                .map_err(|_| Error::Parse(format!("line {line}: value {:?} is not a number", &rec[k])))?;
            if !v.is_finite() {
                return Err(Error::Parse(format!("line {line}: value {:?} is not finite", &rec[k])));
            }
            vals.push(v);
        }
        if let Some((prev, _)) = rows.last() {
            if date <= *prev {
                return Err(Error::Parse(format!("line {line}: dates must increase")));
            }
        }
        rows.push((date, vals));
    }
    rows.retain(|(d, _)| !(d.month() == 2 && d.day() == 29));
    if rows.is_empty() {
        return Err(Error::Parse("no data rows".into()));
    }
    let (y0, d0) = no_leap_ordinal(rows[0].0).expect("leap days removed");
    let mut ds = Dataset {
        t: Vec::new(),
        day_of_year: Vec::new(),
        values: Vec::new(),
        dates: Vec::new(),
    };
    for (date, vals) in rows {
        let (y, o) = no_leap_ordinal(date).expect("leap days removed");
        ds.t.push(((y - y0) as f64) * 365.0 + o as f64 - d0 as f64 + 1.0);
        ds.day_of_year.push(o);
        ds.values.push(vals);
        ds.dates.push(date);
    }
    Ok(ds)
}

pub fn write_csv<W: std::io::Write>(ds: &Dataset, mut w: W) -> Result<()> {
    let d = ds.dim();
    let head: Vec<String> = (1..=d).map(|k| format!("dim{k}")).collect();
    writeln!(w, "date,{}", head.join(","))?;
    for (date, row) in ds.dates.iter().zip(&ds.values) {
        let vals: Vec<String> = row.iter().map(|v| crate::output::fmt_machine(*v)).collect();
        writeln!(w, "{},{}", date.format("%Y-%m-%d"), vals.join(","))?;
    }
    Ok(())
}

fn default_p() -> usize {
    4
}

/// Pipeline settings. `segments` holds one triple per dimension; a single
/// triple is used for every dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_p")]
    pub p: usize,
    #[serde(default = "default_segments")]
    pub segments: Vec<[SegmentSpec; 3]>,
    #[serde(default = "default_glue")]
    pub glue: [Glue; 2],
    #[serde(default)]
    pub paper_mode: bool,
    #[serde(default)]
    pub intercept: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            p: default_p(),
            segments: default_segments(),
            glue: default_glue(),
            paper_mode: false,
            intercept: false,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::Validation("config: p must be at least 1".into()));
        }
        if self.segments.is_empty() {
            return Err(Error::Validation("config: at least one segment triple is required".into()));
        }
        for g in &self.glue {
            if !(g.b > 0.0) || !g.a.is_finite() {
                return Err(Error::Validation(format!("config: glue needs b > 0 (a={}, b={})", g.a, g.b)));
            }
        }
        Ok(())
    }

    pub fn segments_for(&self, k: usize) -> &[SegmentSpec; 3] {
        &self.segments[k.min(self.segments.len() - 1)]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnosticsReport {
    pub var_phi: Vec<Vec<Vec<f64>>>,
    pub var_t_values: Vec<Vec<Vec<f64>>>,
    pub var_intercept: Option<Vec<f64>>,
    pub var_intercept_t_values: Option<Vec<f64>>,
    pub var_stationarity: StationarityReport,
    pub mcar_stationarity: StationarityReport,
    pub beta_solution: Option<BetaSolution>,
    pub paper_mode: bool,
    pub n_observations: usize,
}

/// Everything needed to simulate the fitted model, plus fit diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedMcarModel {
    pub model: ModelFile,
    pub seasonality: SeasonalityCoefficients,
    pub volatility: VolatilitySpec,
    /// NIG laws of the volatility-scaled residuals, per dimension.
    pub residual_laws: Vec<FittedLaw>,
    /// NIG laws of the driving channels (scale `C_delta` each).
    pub driver_laws: Vec<NigParams>,
    pub beta: Vec<Vec<f64>>,
    pub sigma_hat: Vec<Vec<f64>>,
    pub c_delta: f64,
    pub diagnostics: Option<FitDiagnosticsReport>,
}

impl FittedMcarModel {
    pub fn validate(&self) -> Result<()> {
        let c = self.model.to_coefficients()?;
        let o = c.orders;
        if o.q != 0 {
            return Err(Error::Validation("fitted model must have q = 0".into()));
        }
        self.seasonality.validate()?;
        if self.seasonality.per_dim.len() != o.d || self.volatility.per_dim.len() != o.d {
            return Err(Error::Shape(format!("seasonality and volatility need {} dimensions", o.d)));
        }
        if self.driver_laws.len() != o.m {
            return Err(Error::Shape(format!("{} driver laws for {} channels", self.driver_laws.len(), o.m)));
        }
        for p in &self.driver_laws {
            p.validate()?;
        }
        Ok(())
    }

    pub fn coefficients(&self) -> Result<McarmaCoefficients> {
        self.model.to_coefficients()
    }

    pub fn beta_matrix(&self) -> Result<DMatrix<f64>> {
        let d = self.beta.len();
        matrix_from_rows(&self.beta, (d, self.beta.first().map_or(0, |r| r.len())), "beta")
    }
}

/// Loading and common scale for a single channel: `beta = sqrt(Sigma)`, `C = delta / beta`.
fn solve_beta_scalar(sigma: f64, delta: f64) -> Result<(f64, DMatrix<f64>)> {
    if !(sigma > 0.0 && delta > 0.0) {
        return Err(Error::Validation("variance and scale must be positive".into()));
    }
    let b = sigma.sqrt();
    Ok((delta / b, DMatrix::from_element(1, 1, b)))
}

/// Runs the five stages on a dataset.
pub fn fit_mcar_pipeline(data: &Dataset, config: &PipelineConfig) -> Result<FittedMcarModel> {
    config.validate()?;
    let d = data.dim();
    if d == 0 {
        return Err(Error::Validation("dataset has no value columns".into()));
    }
    let n = data.len();

    // Seasonality.
    let mut seas = SeasonalityCoefficients { per_dim: Vec::new() };
    let mut deseason = vec![vec![0.0; d]; n];
    for k in 0..d {
        let col: Vec<f64> = data.values.iter().map(|r| r[k]).collect();
        let fit = fit_seasonality(&col, &data.t).map_err(|e| e.at_stage("seasonality"))?;
        for (i, r) in fit.residuals.iter().enumerate() {
            deseason[i][k] = *r;
        }
        seas.per_dim.push(fit.coefficients);
    }

    // VAR.
    let p = config.p;
    let var = fit_var_ols(&deseason, p, config.intercept).map_err(|e| e.at_stage("var"))?;
    let doy: Vec<usize> = data.day_of_year[p..].to_vec();

    // Volatility.
    let mut vol = VolatilitySpec { per_dim: Vec::new() };
    for k in 0..d {
        let e: Vec<f64> = var.residuals.iter().map(|r| r[k]).collect();
        let dv = empirical_daily_variance(&e, &doy).map_err(|e| e.at_stage("volatility"))?;
        let curve = fit_volatility(&dv, config.segments_for(k), config.glue).map_err(|e| e.at_stage("volatility"))?;
        vol.per_dim.push(curve);
    }

    // Scaled residuals, NIG laws and covariance.
    let scaled: Vec<Vec<f64>> = var
        .residuals
        .iter()
        .zip(&doy)
        .map(|(r, &day)| (0..d).map(|k| r[k] / vol.eval(k, day as f64)).collect())
        .collect();
    let mut laws = Vec::new();
    for k in 0..d {
        let z: Vec<f64> = scaled.iter().map(|r| r[k]).collect();
        let (law, _) = nig_fit(&z).map_err(|e| e.at_stage("residual laws"))?;
        let ks = ks_test(&z, &law).map_err(|e| e.at_stage("residual laws"))?;
        laws.push(FittedLaw::new(&law, ks));
    }
    let m = scaled.len() as f64;
    let means: Vec<f64> = (0..d).map(|k| scaled.iter().map(|r| r[k]).sum::<f64>() / m).collect();
    let sigma_hat = DMatrix::from_fn(d, d, |i, j| {
        scaled.iter().map(|r| (r[i] - means[i]) * (r[j] - means[j])).sum::<f64>() / (m - 1.0)
    });

    // Continuous-time coefficients.
    let rep = &var.representation;
    let coeffs = if config.paper_mode {
        inverse_transform_closed_form(rep)
    } else {
        inverse_transform_mcar(rep)
    }
    .map_err(|e| e.at_stage("coefficient map"))?;

    // Error loading.
    let (c_delta, beta_m, beta_solution) = match d {
        1 => {
            let (c, b) = solve_beta_scalar(sigma_hat[(0, 0)], laws[0].delta).map_err(|e| e.at_stage("error loading"))?;
            (c, b, None)
        }
        _ => {
            let s = solve_beta(&sigma_hat, laws[0].delta, laws[1].delta).map_err(|e| e.at_stage("error loading"))?;
            (s.c_delta, s.beta_matrix(), Some(s))
        }
    };
    let coeffs = McarmaCoefficients::new(coeffs.orders, coeffs.a_blocks.clone(), vec![beta_m.clone()])?;

    // Driver laws: residual law k rescaled so that its scale equals C_delta.
    let driver_laws = laws
        .iter()
        .map(|l| l.params().and_then(|p| nig_scale(c_delta / l.delta, &p)))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.at_stage("driver laws"))?;

    let sys = assemble_companion(&coeffs)?;
    let diagnostics = FitDiagnosticsReport {
        var_phi: rep.phi_blocks.iter().map(rows_of).collect(),
        var_t_values: var.t_values.iter().map(rows_of).collect(),
        var_intercept: var.intercept.as_ref().map(|v| v.iter().copied().collect()),
        var_intercept_t_values: var.intercept_t_values.as_ref().map(|v| v.iter().copied().collect()),
        var_stationarity: var_stationarity(rep).map_err(|e| e.at_stage("stationarity"))?,
        mcar_stationarity: mcarma_stationarity(&sys).map_err(|e| e.at_stage("stationarity"))?,
        beta_solution,
        paper_mode: config.paper_mode,
        n_observations: n,
    };
    Ok(FittedMcarModel {
        model: ModelFile::from(&coeffs),
        seasonality: seas,
        volatility: vol,
        residual_laws: laws,
        driver_laws,
        beta: rows_of(&beta_m),
        sigma_hat: rows_of(&sigma_hat),
        c_delta,
        diagnostics: Some(diagnostics),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leap_days_are_dropped() {
        let csv = "date,dim1,dim2\n2012-02-28,1,2\n2012-02-29,3,4\n2012-03-01,5,6\n";
        let ds = load_csv(csv.as_bytes()).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.t, vec![1.0, 2.0]);
        assert_eq!(ds.day_of_year, vec![59, 60]);
    }

    #[test]
    fn malformed_rows_name_the_line() {
        let csv = "date,dim1,dim2\n2012-01-01,1,2\n2012-01-02,x,4\n";
        let e = load_csv(csv.as_bytes()).unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn no_leap_calendar_round_trip() {
        let start = NaiveDate::from_ymd_opt(2011, 12, 30).unwrap();
        let ds = Dataset::from_values(start, vec![vec![0.0]; 800]).unwrap();
        let mut buf = Vec::new();
        write_csv(&ds, &mut buf).unwrap();
        let back = load_csv(buf.as_slice()).unwrap();
        assert_eq!(back.t, ds.t);
        assert_eq!(back.day_of_year, ds.day_of_year);
        assert!(!ds.dates.iter().any(|d| d.month() == 2 && d.day() == 29));
    }

    #[test]
    fn zero_p_rejected() {
        let c = PipelineConfig {
            p: 0,
            ..Default::default()
        };
        assert!(matches!(c.validate(), Err(Error::Validation(_))));
    }
}
