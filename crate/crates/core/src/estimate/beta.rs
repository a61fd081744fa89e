//! Error-loading solver for two driving channels with a common scale
//! `C_delta`: find `beta` with `beta beta^T = Sigma` and
//! `delta_k = (|beta_k1| + |beta_k2|) C_delta`.
//!
//! For fixed `C` each off-diagonal entry takes one of the four values
//! `(+-delta +- sqrt(2 Sigma_kk C^2 - delta^2)) / (2 C)`; the diagonal
//! entries follow from the row norms and are taken positive. What is
//! left is the scalar consistency equation for `Sigma_12`, solved in `C`
//! for each of the 16 sign branches.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

const GRID: usize = 4000;

/// Signs in front of `delta` and of the square root for each off-diagonal entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BetaBranch {
    pub delta_sign12: i8,
    pub root_sign12: i8,
    pub delta_sign21: i8,
    pub root_sign21: i8,
}

impl BetaBranch {
    fn all() -> Vec<BetaBranch> {
        let mut v = Vec::new();
        for &delta_sign12 in &[1, -1] {
            for &root_sign12 in &[-1, 1] {
                for &delta_sign21 in &[1, -1] {
                    for &root_sign21 in &[-1, 1] {
                        v.push(BetaBranch {
                            delta_sign12,
                            root_sign12,
                            delta_sign21,
                            root_sign21,
                        });
                    }
                }
            }
        }
        v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaSolution {
    pub c_delta: f64,
    pub beta: [[f64; 2]; 2],
    pub branch: BetaBranch,
    /// `delta_k / sqrt(2 Sigma_kk)`, the lower bounds on `C_delta`.
    pub restriction_values: [f64; 2],
    /// `beta_12^2, beta_21^2`.
    pub off_diagonal_squares: [f64; 2],
    /// `(|beta_k1| + |beta_k2|) C_delta`.
    pub delta_hat: [f64; 2],
    /// `|delta_hat_k - delta_k| / delta_k`.
    pub delta_relative_error: [f64; 2],
    /// `max |beta beta^T - Sigma|`.
    pub covariance_residual: f64,
}

impl BetaSolution {
    pub fn beta_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(2, 2, |i, j| self.beta[i][j])
    }
}

/// Off-diagonal entry and the diagonal partner of one row.
fn row_entries(c: f64, sigma: f64, delta: f64, delta_sign: i8, root_sign: i8) -> Option<(f64, f64)> {
    let disc = 2.0 * sigma * c * c - delta * delta;
    if disc < -1e-14 * delta * delta {
        return None;
    }
    let off = (delta_sign as f64 * delta + root_sign as f64 * disc.max(0.0).sqrt()) / (2.0 * c);
    if off * off > sigma * (1.0 + 1e-12) {
        return None;
    }
    Some((off, (sigma - off * off).max(0.0).sqrt()))
}

fn consistency(c: f64, s: &[[f64; 2]; 2], delta: [f64; 2], br: BetaBranch) -> Option<f64> {
    let (b12, b11) = row_entries(c, s[0][0], delta[0], br.delta_sign12, br.root_sign12)?;
    let (b21, b22) = row_entries(c, s[1][1], delta[1], br.delta_sign21, br.root_sign21)?;
    Some(b11 * b21 + b12 * b22 - s[0][1])
}

fn assemble(c: f64, s: &[[f64; 2]; 2], delta: [f64; 2], br: BetaBranch) -> Option<BetaSolution> {
    let (b12, b11) = row_entries(c, s[0][0], delta[0], br.delta_sign12, br.root_sign12)?;
    let (b21, b22) = row_entries(c, s[1][1], delta[1], br.delta_sign21, br.root_sign21)?;
    let beta = [[b11, b12], [b21, b22]];
    let cov = [
        [b11 * b11 + b12 * b12, b11 * b21 + b12 * b22],
        [b11 * b21 + b12 * b22, b21 * b21 + b22 * b22],
    ];
    let mut resid: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            resid = resid.max((cov[i][j] - s[i][j]).abs());
        }
    }
    let delta_hat = [(b11.abs() + b12.abs()) * c, (b21.abs() + b22.abs()) * c];
    Some(BetaSolution {
        c_delta: c,
        beta,
        branch: br,
        restriction_values: [delta[0] / (2.0 * s[0][0]).sqrt(), delta[1] / (2.0 * s[1][1]).sqrt()],
        off_diagonal_squares: [b12 * b12, b21 * b21],
        delta_hat,
        delta_relative_error: [
            (delta_hat[0] - delta[0]).abs() / delta[0],
            (delta_hat[1] - delta[1]).abs() / delta[1],
        ],
        covariance_residual: resid,
    })
}

fn satisfies_restrictions(sol: &BetaSolution, s: &[[f64; 2]; 2]) -> bool {
    let c = sol.c_delta;
    let tol = 1e-12;
    c > 0.0
        && c >= sol.restriction_values[0] * (1.0 - tol)
        && c >= sol.restriction_values[1] * (1.0 - tol)
        && s[0][0] >= sol.off_diagonal_squares[1] * (1.0 - tol)
        && s[1][1] >= sol.off_diagonal_squares[0] * (1.0 - tol)
}

fn check_inputs(sigma: &DMatrix<f64>, delta1: f64, delta2: f64) -> Result<[[f64; 2]; 2]> {
    if sigma.shape() != (2, 2) {
        return Err(Error::Unsupported(format!(
            "the loading solver handles two driving channels only; got a {}x{} covariance",
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    let s = [[sigma[(0, 0)], sigma[(0, 1)]], [sigma[(1, 0)], sigma[(1, 1)]]];
    if s.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Validation("covariance has non-finite entries".into()));
    }
    if (s[0][1] - s[1][0]).abs() > 1e-12 * (s[0][0].abs() + s[1][1].abs()) {
        return Err(Error::Validation("covariance is not symmetric".into()));
    }
    if !(s[0][0] > 0.0 && s[0][0] * s[1][1] - s[0][1] * s[0][1] > 0.0) {
        return Err(Error::Validation("covariance is not positive definite".into()));
    }
    if !(delta1 > 0.0 && delta2 > 0.0 && delta1.is_finite() && delta2.is_finite()) {
        return Err(Error::Validation(format!("scale parameters must be positive (got {delta1}, {delta2})")));
    }
    Ok(s)
}

/// Every restriction-satisfying root over all branches, unsorted.
pub fn solve_beta_all(sigma: &DMatrix<f64>, delta1: f64, delta2: f64) -> Result<Vec<BetaSolution>> {
    let s = check_inputs(sigma, delta1, delta2)?;
    let delta = [delta1, delta2];
    let lo = (delta1 / (2.0 * s[0][0]).sqrt()).max(delta2 / (2.0 * s[1][1]).sqrt());
    let hi = 10.0 * delta1.max(delta2);
    let mut grid: Vec<f64> = (0..=GRID).map(|i| lo * (hi / lo).powf(i as f64 / GRID as f64)).collect();
    // Points where an off-diagonal entry vanishes; roots often sit exactly there.
    for (k, dk) in delta.iter().enumerate() {
        let c = dk / s[k][k].sqrt();
        if c > lo && c < hi {
            grid.push(c);
        }
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let mut out = Vec::new();
    for br in BetaBranch::all() {
        let vals: Vec<Option<f64>> = grid.iter().map(|&c| consistency(c, &s, delta, br)).collect();
        let mut roots = Vec::new();
        for i in 0..grid.len() {
            if let Some(v) = vals[i] {
                if v.abs() < 1e-13 {
                    roots.push(grid[i]);
                    continue;
                }
            }
            if i + 1 < grid.len() {
                if let (Some(a), Some(b)) = (vals[i], vals[i + 1]) {
                    if a.abs() >= 1e-13 && b.abs() >= 1e-13 && a.signum() != b.signum() {
                        if let Some(r) = bisect(grid[i], grid[i + 1], a, &s, delta, br) {
                            roots.push(r);
                        }
                    }
                }
            }
        }
        for c in roots {
            if let Some(sol) = assemble(c, &s, delta, br) {
                if sol.covariance_residual <= 1e-8 && satisfies_restrictions(&sol, &s) {
                    out.push(sol);
                }
            }
        }
    }
    Ok(out)
}

fn bisect(mut a: f64, mut b: f64, mut fa: f64, s: &[[f64; 2]; 2], delta: [f64; 2], br: BetaBranch) -> Option<f64> {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = consistency(m, s, delta, br)?;
        if fm == 0.0 || (b - a) <= 4.0 * f64::EPSILON * m {
            return Some(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

/// Solves for `(C_delta, beta)`. Roots are not unique in general; the
/// returned one minimizes, in order: the largest relative scale error,
/// `|beta_12| + |beta_21|` (both rounded to 1e-9), and `C_delta`.
pub fn solve_beta(sigma: &DMatrix<f64>, delta1: f64, delta2: f64) -> Result<BetaSolution> {
    let mut all = solve_beta_all(sigma, delta1, delta2)?;
    if all.is_empty() {
        let s = check_inputs(sigma, delta1, delta2)?;
        let lo = (delta1 / (2.0 * s[0][0]).sqrt()).max(delta2 / (2.0 * s[1][1]).sqrt());
        let report: Vec<String> = BetaBranch::all()
            .into_iter()
            .map(|br| {
                let best = (0..=200)
                    .filter_map(|i| {
                        let c = lo * (10.0 * delta1.max(delta2) / lo).powf(i as f64 / 200.0);
                        consistency(c, &s, [delta1, delta2], br)
                    })
                    .map(f64::abs)
                    .fold(f64::INFINITY, f64::min);
                format!(
                    "({},{},{},{}): min |residual| {:e}",
                    br.delta_sign12, br.root_sign12, br.delta_sign21, br.root_sign21, best
                )
            })
            .collect();
        return Err(Error::Solver(format!("no branch admits a feasible root; {}", report.join("; "))));
    }
    let key = |b: &BetaSolution| {
        let e = b.delta_relative_error[0].max(b.delta_relative_error[1]);
        ((e * 1e9).round(), ((b.beta[0][1].abs() + b.beta[1][0].abs()) * 1e9).round(), b.c_delta)
    };
    all.sort_by(|x, y| {
        let (a, b) = (key(x), key(y));
        a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.total_cmp(&b.2))
    });
    Ok(all.swap_remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_covariance() {
        let s = solve_beta(&DMatrix::identity(2, 2), 1.7, 1.7).unwrap();
        assert!((s.c_delta - 1.7).abs() < 1e-12);
        assert!((s.beta[0][0] - 1.0).abs() < 1e-12 && (s.beta[1][1] - 1.0).abs() < 1e-12);
        assert!(s.beta[0][1].abs() < 1e-12 && s.beta[1][0].abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(solve_beta(&DMatrix::identity(3, 3), 1.0, 1.0), Err(Error::Unsupported(_))));
        assert!(solve_beta(&DMatrix::identity(2, 2), -1.0, 1.0).is_err());
        let nsd = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(solve_beta(&nsd, 1.0, 1.0).is_err());
    }
}
