//! Quadrature, a derivative-free simplex minimizer and a few special
//! functions shared by the distribution and simulation modules.

use crate::error::{Error, Result};

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const GK_WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * GK_WK[7];
    let mut g = fc * GK_WG[3];
    for i in 0..7 {
        let x = h * GK_NODES[i];
        let s = f(c - x) + f(c + x);
        k += GK_WK[i] * s;
        if i % 2 == 1 {
            g += GK_WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss-Kronrod (7/15) quadrature on a finite interval.
pub fn integrate(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    integrate_from_partition(f, a, b, 1, abs_tol, rel_tol)
}

/// As [`integrate`], starting from `pieces` equal subintervals so that
/// narrow features are not missed by the first rule evaluation.
pub fn integrate_from_partition(
    f: &mut dyn FnMut(f64) -> f64,
    a: f64,
    b: f64,
    pieces: usize,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    let mut stack: Vec<(f64, f64, f64, f64)> = Vec::new();
    let mut total = 0.0;
    let mut err = 0.0;
    let w = (b - a) / pieces as f64;
    for i in 0..pieces {
        let lo = a + w * i as f64;
        let hi = if i + 1 == pieces { b } else { lo + w };
        let (v, e) = gk15(f, lo, hi);
        stack.push((lo, hi, v, e));
        total += v;
        err += e;
    }
    let mut iters = 0usize;
    while err > abs_tol.max(rel_tol * total.abs()) {
        iters += 1;
        if iters > 20_000 {
            return Err(Error::Numeric(format!(
                "quadrature did not converge on [{a}, {b}] (error estimate {err:e})"
            )));
        }
        // Split the interval with the largest error estimate.
        let (idx, _) = stack
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, v0, e0) = stack.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(f, lo, mid);
        let (v2, e2) = gk15(f, mid, hi);
        total += v1 + v2 - v0;
        err += e1 + e2 - e0;
        stack.push((lo, mid, v1, e1));
        stack.push((mid, hi, v2, e2));
        if !total.is_finite() {
            return Err(Error::Numeric("quadrature produced a non-finite value".into()));
        }
    }
    // Re-sum to shed accumulated update rounding.
    Ok(stack.iter().map(|s| s.2).sum())
}

/// `int_{-inf}^{x} f` via `t -> x - t / (1 - t)`.
pub fn integrate_lower_tail(f: &mut dyn FnMut(f64) -> f64, x: f64, abs_tol: f64) -> Result<f64> {
    let mut g = |t: f64| {
        if t >= 1.0 {
            return 0.0;
        }
        let s = 1.0 - t;
        let v = f(x - t / s) / (s * s);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate_from_partition(&mut g, 0.0, 1.0, 64, abs_tol, 1e-12)
}

/// `int_{x}^{inf} f` via `t -> x + t / (1 - t)`.
pub fn integrate_upper_tail(f: &mut dyn FnMut(f64) -> f64, x: f64, abs_tol: f64) -> Result<f64> {
    let mut g = |t: f64| {
        if t >= 1.0 {
            return 0.0;
        }
        let s = 1.0 - t;
        let v = f(x + t / s) / (s * s);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate_from_partition(&mut g, 0.0, 1.0, 64, abs_tol, 1e-12)
}

/// Outcome of [`nelder_mead`].
#[derive(Clone, Debug)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Nelder-Mead simplex minimization with standard coefficients.
pub fn nelder_mead(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x0: &[f64],
    step: &[f64],
    f_tol: f64,
    max_iter: usize,
) -> SimplexResult {
    let n = x0.len();
    let mut pts: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += step[i];
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| sanitize(f(p))).collect();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        let spread = (vals[n] - vals[0]).abs();
        let size = (1..=n)
            .map(|i| pts[i].iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread <= f_tol * (1.0 + vals[0].abs()) && size < 1e-8_f64.max(f_tol.sqrt()) {
            converged = true;
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|k| pts[..n].iter().map(|p| p[k]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|k| centroid[k] + t * (pts[n][k] - centroid[k])).collect() };
        let xr = along(-1.0);
        let fr = sanitize(f(&xr));
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = sanitize(f(&xe));
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
        } else if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
        } else {
            let (xc, fc) = if fr < vals[n] {
                let xc = along(-0.5);
                let fc = sanitize(f(&xc));
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = sanitize(f(&xc));
                (xc, fc)
            };
            if fc < vals[n].min(fr) {
                pts[n] = xc;
                vals[n] = fc;
            } else {
                for i in 1..=n {
                    let p: Vec<f64> = (0..n).map(|k| pts[0][k] + 0.5 * (pts[i][k] - pts[0][k])).collect();
                    vals[i] = sanitize(f(&p));
                    pts[i] = p;
                }
            }
        }
    }
    let best = (0..=n).min_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap_or(0);
    SimplexResult {
        x: pts[best].clone(),
        value: vals[best],
        iterations,
        converged,
    }
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// `ln K_1(x)` for `x > 0`, stable for large arguments.
pub fn ln_bessel_k1(x: f64) -> f64 {
    if x < 600.0 {
        puruspe::Kn(1, x).ln()
    } else {
        let r = 1.0 / (8.0 * x);
        let series = 1.0 + 3.0 * r - 15.0 / 2.0 * r * r + 105.0 / 2.0 * r * r * r;
        0.5 * (std::f64::consts::PI / (2.0 * x)).ln() - x + series.ln()
    }
}

/// Asymptotic Kolmogorov tail probability `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    let mut prev = 0.0f64;
    for k in 1..=200 {
        let kf = k as f64;
        let term = sign * 2.0 * (-2.0 * kf * kf * lambda * lambda).exp();
        sum += term;
        if term.abs() <= 1e-12 * prev.abs() || term.abs() < 1e-300 {
            return sum.clamp(0.0, 1.0);
        }
        sign = -sign;
        prev = term;
    }
    sum.clamp(0.0, 1.0)
}

/// Ordinary least squares via a thin QR with column scaling of the design.
///
/// Returns coefficients and `(X'X)^{-1}` for standard errors.
pub fn least_squares(x: &nalgebra::DMatrix<f64>, y: &nalgebra::DVector<f64>) -> Result<(nalgebra::DVector<f64>, nalgebra::DMatrix<f64>)> {
    let n = x.ncols();
    if x.nrows() < n || y.len() != x.nrows() {
        return Err(Error::Numeric(format!("design has {} rows for {} columns", x.nrows(), n)));
    }
    // Scale columns to unit norm so the rank test is scale free.
    let norms: Vec<f64> = (0..n).map(|j| x.column(j).norm()).collect();
    if norms.iter().any(|v| *v == 0.0) {
        return Err(Error::Numeric("design matrix is rank deficient (zero column)".into()));
    }
    let xs = nalgebra::DMatrix::from_fn(x.nrows(), n, |i, j| x[(i, j)] / norms[j]);
    let qr = xs.qr();
    let r = qr.r();
    let diag_max = (0..n).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    let diag_min = (0..n).map(|i| r[(i, i)].abs()).fold(f64::INFINITY, f64::min);
    if diag_max == 0.0 || diag_min <= 1e-10 * diag_max {
        return Err(Error::Numeric("design matrix is rank deficient".into()));
    }
    let qty = qr.q().transpose() * y;
    let bs = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Numeric("least-squares solve failed".into()))?;
    let rinv = r
        .solve_upper_triangular(&nalgebra::DMatrix::identity(n, n))
        .ok_or_else(|| Error::Numeric("triangular inverse failed".into()))?;
    let inv_s = &rinv * rinv.transpose();
    let beta = nalgebra::DVector::from_fn(n, |j, _| bs[j] / norms[j]);
    let inv = nalgebra::DMatrix::from_fn(n, n, |i, j| inv_s[(i, j)] / (norms[i] * norms[j]));
    Ok((beta, inv))
}
