//! Yearly volatility curve: three truncated Fourier series on seasonal
//! intervals, joined by sigmoid blends.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Frequency factor `f`, harmonic count `n` and the day interval the series is fit on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpec {
    pub f: f64,
    pub n: usize,
    pub start_day: usize,
    pub end_day: usize,
}

/// Shift `a` and scale `b` (days) of `omega(x) = 1 / (1 + exp(-(x - a) / b))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Glue {
    pub a: f64,
    pub b: f64,
}

pub fn sigmoid(x: f64, g: &Glue) -> f64 {
    1.0 / (1.0 + (-(x - g.a) / g.b).exp())
}

/// `(1 - omega(x)) g1 + omega(x) g2`.
pub fn blend(x: f64, g1: f64, g2: f64, glue: &Glue) -> f64 {
    let w = sigmoid(x, glue);
    (1.0 - w) * g1 + w * g2
}

/// `w(t) = d_0 + sum_j (d_{2j-1} cos(f j pi t / 365) + d_{2j} sin(f j pi t / 365))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierSegment {
    pub spec: SegmentSpec,
    pub coefficients: Vec<f64>,
}

fn fourier_row(f: f64, n: usize, t: f64) -> Vec<f64> {
    let mut r = Vec::with_capacity(2 * n + 1);
    r.push(1.0);
    for j in 1..=n {
        let arg = f * j as f64 * PI * t / 365.0;
        r.push(arg.cos());
        r.push(arg.sin());
    }
    r
}

impl FourierSegment {
    pub fn eval(&self, t: f64) -> f64 {
        fourier_row(self.spec.f, self.spec.n, t)
            .iter()
            .zip(&self.coefficients)
            .map(|(x, c)| x * c)
            .sum()
    }
}

/// One dimension's curve: segments 2-3 joined by `glue[1]`, then segment 1
/// joined with that result by `glue[0]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolatilityCurve {
    pub segments: Vec<FourierSegment>,
    pub glue: [Glue; 2],
}

impl VolatilityCurve {
    /// `sigma(t)` for a day of the year `t`.
    pub fn eval(&self, t: f64) -> f64 {
        let g = |i: usize| self.segments[i].eval(t);
        let inner = blend(t, g(1), g(2), &self.glue[1]);
        blend(t, g(0), inner, &self.glue[0])
    }

    /// A curve that is `level` everywhere.
    pub fn constant(level: f64, specs: &[SegmentSpec; 3], glue: [Glue; 2]) -> Self {
        VolatilityCurve {
            segments: specs
                .iter()
                .map(|s| {
                    let mut c = vec![0.0; 2 * s.n + 1];
                    c[0] = level;
                    FourierSegment { spec: *s, coefficients: c }
                })
                .collect(),
            glue,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolatilitySpec {
    pub per_dim: Vec<VolatilityCurve>,
}

impl VolatilitySpec {
    pub fn eval(&self, k: usize, day_of_year: f64) -> f64 {
        self.per_dim[k].eval(day_of_year)
    }

    /// All-ones volatility.
    pub fn unit(d: usize, specs: &[SegmentSpec; 3], glue: [Glue; 2]) -> Self {
        VolatilitySpec {
            per_dim: (0..d).map(|_| VolatilityCurve::constant(1.0, specs, glue)).collect(),
        }
    }
}

/// Least-squares Fourier fit of `sqrt(daily_variance)` on each segment's
/// interval, then blended. Fails if the blended curve is not positive on
/// every day.
pub fn fit_volatility(daily_variance: &[f64], specs: &[SegmentSpec; 3], glue: [Glue; 2]) -> Result<VolatilityCurve> {
    if daily_variance.len() != 365 {
        return Err(Error::Shape(format!("daily variance needs 365 entries, got {}", daily_variance.len())));
    }
    if let Some(i) = daily_variance.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::Validation(format!("daily variance on day {} is {}", i + 1, daily_variance[i])));
    }
    let mut segments = Vec::new();
    for s in specs {
        if s.start_day < 1 || s.end_day > 365 || s.start_day > s.end_day {
            return Err(Error::Validation(format!("segment interval [{}, {}] is not inside [1, 365]", s.start_day, s.end_day)));
        }
        let days: Vec<usize> = (s.start_day..=s.end_day).collect();
        let k = 2 * s.n + 1;
        if days.len() < k {
            return Err(Error::Validation(format!(
                "segment [{}, {}] has {} days for {} coefficients",
                s.start_day,
                s.end_day,
                days.len(),
                k
            )));
        }
        let x = DMatrix::from_fn(days.len(), k, |i, j| fourier_row(s.f, s.n, days[i] as f64)[j]);
        let y = DVector::from_fn(days.len(), |i, _| daily_variance[days[i] - 1].sqrt());
        // Small frequency factors make the design nearly collinear; the SVD
        // gives the minimum-norm least-squares solution.
        let svd = x.svd(true, true);
        let tol = 1e-13 * svd.singular_values.max();
        let c = svd.solve(&y, tol).map_err(|e| Error::Numeric(format!("volatility segment fit: {e}")))?;
        segments.push(FourierSegment {
            spec: *s,
            coefficients: c.iter().copied().collect(),
        });
    }
    let curve = VolatilityCurve { segments, glue };
    for day in 1..=365 {
        let v = curve.eval(day as f64);
        if !(v > 0.0) {
            return Err(Error::Numeric(format!("fitted volatility is not positive on day {day} ({v})")));
        }
    }
    Ok(curve)
}

/// Mean squared residual per day of the year (1..=365).
pub fn empirical_daily_variance(residuals: &[f64], day_of_year: &[usize]) -> Result<Vec<f64>> {
    if residuals.len() != day_of_year.len() {
        return Err(Error::Shape(format!("{} residuals for {} day indices", residuals.len(), day_of_year.len())));
    }
    if residuals.len() < 2 * 365 {
        return Err(Error::Validation(format!("daily variance needs at least two years, got {} days", residuals.len())));
    }
    let mut sum = vec![0.0; 365];
    let mut count = vec![0usize; 365];
    for (e, &d) in residuals.iter().zip(day_of_year) {
        if !(1..=365).contains(&d) {
            return Err(Error::Validation(format!("day of year {d} is outside 1..=365")));
        }
        sum[d - 1] += e * e;
        count[d - 1] += 1;
    }
    if let Some(i) = count.iter().position(|&c| c == 0) {
        return Err(Error::Validation(format!("no residuals fall on day {}", i + 1)));
    }
    Ok(sum.iter().zip(&count).map(|(s, &c)| s / c as f64).collect())
}

/// Winter/spring, summer and autumn/winter intervals.
pub const SEASON_DAYS: [(usize, usize); 3] = [(1, 120), (121, 304), (305, 365)];

pub fn default_glue() -> [Glue; 2] {
    [Glue { a: 120.0, b: 2.0 }, Glue { a: 303.0, b: 5.0 }]
}

fn segments_from(fs: [f64; 3], ns: [usize; 3]) -> [SegmentSpec; 3] {
    let mk = |i: usize| SegmentSpec {
        f: fs[i],
        n: ns[i],
        start_day: SEASON_DAYS[i].0,
        end_day: SEASON_DAYS[i].1,
    };
    [mk(0), mk(1), mk(2)]
}

/// Segment settings used for the first and second series of the case study.
pub fn default_segments() -> Vec<[SegmentSpec; 3]> {
    vec![
        segments_from([0.44, 2.0, 0.44], [2, 2, 2]),
        segments_from([0.30, 0.50, 0.05], [2, 3, 4]),
    ]
}
