//! Normal inverse Gaussian laws: density, moments, closure operations,
//! sampling, maximum-likelihood fitting and the Kolmogorov-Smirnov test.

use crate::error::{Error, Result};
use crate::numerics::{integrate, integrate_lower_tail, integrate_upper_tail, kolmogorov_sf, ln_bessel_k1, nelder_mead};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, InverseGaussian, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// NIG parameters: tail heaviness `a`, asymmetry `b`, scale `delta`, location `mu`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NigParams {
    pub a: f64,
    pub b: f64,
    pub delta: f64,
    pub mu: f64,
}

impl NigParams {
    pub fn new(a: f64, b: f64, delta: f64, mu: f64) -> Result<Self> {
        let p = NigParams { a, b, delta, mu };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.b.is_finite() && self.delta.is_finite() && self.mu.is_finite()) {
            return Err(Error::Validation("NIG parameters must be finite".into()));
        }
        if !(self.a > self.b.abs()) {
            return Err(Error::Validation(format!("NIG needs a > |b| (a={}, b={})", self.a, self.b)));
        }
        if !(self.delta > 0.0) {
            return Err(Error::Validation(format!("NIG needs delta > 0 (delta={})", self.delta)));
        }
        Ok(())
    }

    pub fn gamma(&self) -> f64 {
        (self.a * self.a - self.b * self.b).sqrt()
    }
}

pub fn nig_ln_pdf(x: f64, p: &NigParams) -> f64 {
    let z = x - p.mu;
    let r = (p.delta * p.delta + z * z).sqrt();
    (p.a * p.delta / PI).ln() + ln_bessel_k1(p.a * r) - r.ln() + p.delta * p.gamma() + p.b * z
}

pub fn nig_pdf(x: f64, p: &NigParams) -> f64 {
    nig_ln_pdf(x, p).exp()
}

pub fn nig_mean(p: &NigParams) -> f64 {
    p.mu + p.delta * p.b / p.gamma()
}

pub fn nig_variance(p: &NigParams) -> f64 {
    p.delta * p.a * p.a / p.gamma().powi(3)
}

pub fn nig_skewness(p: &NigParams) -> f64 {
    3.0 * p.b / (p.a * (p.delta * p.gamma()).sqrt())
}

pub fn nig_excess_kurtosis(p: &NigParams) -> f64 {
    3.0 * (1.0 + 4.0 * p.b * p.b / (p.a * p.a)) / (p.delta * p.gamma())
}

/// Law of `c X`.
pub fn nig_scale(c: f64, p: &NigParams) -> Result<NigParams> {
    if c == 0.0 || !c.is_finite() {
        return Err(Error::Validation("scaling constant must be finite and nonzero".into()));
    }
    NigParams::new(p.a / c.abs(), p.b / c, c.abs() * p.delta, c * p.mu)
}

fn close(x: f64, y: f64, rel_tol: f64) -> bool {
    (x - y).abs() <= rel_tol * x.abs().max(y.abs()).max(1.0)
}

/// Law of a sum of independent NIG variables sharing `a` and `b`.
pub fn nig_convolve(ps: &[NigParams]) -> Result<NigParams> {
    nig_convolve_tol(ps, 1e-9)
}

pub fn nig_convolve_tol(ps: &[NigParams], rel_tol: f64) -> Result<NigParams> {
    let first = ps
        .first()
        .ok_or_else(|| Error::Validation("convolution of an empty list".into()))?;
    for (i, p) in ps.iter().enumerate() {
        if !close(p.a, first.a, rel_tol) || !close(p.b, first.b, rel_tol) {
            return Err(Error::Restriction(format!(
                "law {} has (a, b) = ({}, {}), expected ({}, {})",
                i + 1,
                p.a,
                p.b,
                first.a,
                first.b
            )));
        }
    }
    NigParams::new(
        first.a,
        first.b,
        ps.iter().map(|p| p.delta).sum(),
        ps.iter().map(|p| p.mu).sum(),
    )
}

/// Law of `sum_r row[r] L_r` for independent NIG channels, valid when
/// `a_r / |row[r]|` and `b_r / row[r]` agree across channels with nonzero
/// loading.
pub fn mix_through_loadings(row: &[f64], ps: &[NigParams], rel_tol: f64) -> Result<NigParams> {
    if row.len() != ps.len() {
        return Err(Error::Shape(format!("{} loadings for {} channels", row.len(), ps.len())));
    }
    let mut common: Option<(f64, f64, usize)> = None;
    let mut delta = 0.0;
    let mut mu = 0.0;
    for (r, (&w, p)) in row.iter().zip(ps).enumerate() {
        if w == 0.0 {
            continue;
        }
        let s = nig_scale(w, p)?;
        match common {
            None => common = Some((s.a, s.b, r)),
            Some((a, b, first)) => {
                if !close(s.a, a, rel_tol) || !close(s.b, b, rel_tol) {
                    return Err(Error::Restriction(format!(
                        "channel {} gives (a, b) = ({:.6}, {:.6}) but channel {} gives ({:.6}, {:.6})",
                        r + 1,
                        s.a,
                        s.b,
                        first + 1,
                        a,
                        b
                    )));
                }
            }
        }
        delta += s.delta;
        mu += s.mu;
    }
    let (a, b, _) = common.ok_or_else(|| Error::Validation("all loadings are zero".into()))?;
    NigParams::new(a, b, delta, mu)
}

pub fn rng_from_seed(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// One draw by inverse-Gaussian subordination: `mu + b Z + sqrt(Z) N`,
/// `Z ~ IG(delta / gamma, delta^2)`.
pub fn nig_draw<R: Rng + ?Sized>(p: &NigParams, ig: &InverseGaussian<f64>, rng: &mut R) -> f64 {
    let z: f64 = ig.sample(rng);
    let n: f64 = StandardNormal.sample(rng);
    p.mu + p.b * z + z.sqrt() * n
}

pub fn inverse_gaussian_for(p: &NigParams) -> Result<InverseGaussian<f64>> {
    InverseGaussian::new(p.delta / p.gamma(), p.delta * p.delta)
        .map_err(|e| Error::Validation(format!("inverse Gaussian mixing law: {e}")))
}

pub fn nig_sample(p: &NigParams, n: usize, seed: u64) -> Result<Vec<f64>> {
    p.validate()?;
    if n == 0 {
        return Err(Error::Validation("sample size must be at least 1".into()));
    }
    let ig = inverse_gaussian_for(p)?;
    let mut rng = rng_from_seed(seed);
    Ok((0..n).map(|_| nig_draw(p, &ig, &mut rng)).collect())
}

/// Moment-matching starting point (falls back to a near-Gaussian law when the
/// sample kurtosis is too small for an NIG).
pub fn nig_moment_start(samples: &[f64]) -> Result<NigParams> {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let m2 = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    if !(m2 > 0.0) {
        return Err(Error::Solver("sample has zero variance".into()));
    }
    let m3 = samples.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
    let m4 = samples.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    let skew = m3 / m2.powf(1.5);
    let kurt = m4 / (m2 * m2) - 3.0;
    let denom = kurt - 4.0 * skew * skew / 3.0;
    let zeta = if denom > 3.0 / 200.0 { 3.0 / denom } else { 200.0 };
    let rho = (skew.signum() * (skew * skew * zeta / 9.0).sqrt()).clamp(-0.9, 0.9);
    let gamma = (zeta / (m2 * (1.0 - rho * rho))).sqrt();
    let a = gamma / (1.0 - rho * rho).sqrt();
    let b = rho * a;
    let delta = zeta / gamma;
    NigParams::new(a, b, delta, mean - delta * b / gamma)
}

const CHUNK: usize = 4096;

/// Negative log-likelihood with a deterministic chunked parallel reduction.
pub fn nig_neg_log_likelihood(samples: &[f64], p: &NigParams) -> f64 {
    let parts: Vec<f64> = samples
        .par_chunks(CHUNK)
        .map(|c| c.iter().map(|&x| nig_ln_pdf(x, p)).sum::<f64>())
        .collect();
    -parts.iter().sum::<f64>()
}

fn from_theta(t: &[f64]) -> Option<NigParams> {
    let gamma = t[0].exp();
    let b = t[1];
    let a = (gamma * gamma + b * b).sqrt();
    let delta = t[2].exp();
    let p = NigParams { a, b, delta, mu: t[3] };
    p.validate().ok().map(|_| p)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub neg_log_likelihood: f64,
    pub iterations: usize,
    pub restarts: usize,
}

/// Maximum-likelihood fit over `(ln gamma, b, ln delta, mu)` from a
/// moment-matching start.
pub fn nig_fit(samples: &[f64]) -> Result<(NigParams, FitDiagnostics)> {
    if samples.len() < 100 {
        return Err(Error::Validation(format!("NIG fit needs at least 100 samples, got {}", samples.len())));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Validation("samples contain non-finite values".into()));
    }
    let start = nig_moment_start(samples)?;
    let mut theta = vec![start.gamma().ln(), start.b, start.delta.ln(), start.mu];
    let sd = nig_variance(&start).sqrt();
    let mut obj = |t: &[f64]| match from_theta(t) {
        Some(p) => nig_neg_log_likelihood(samples, &p),
        None => f64::INFINITY,
    };
    let mut total_iter = 0;
    let mut last = f64::INFINITY;
    let mut restarts = 0;
    let mut converged = false;
    for round in 0..6 {
        let step = [0.3, 0.3 * start.a.max(0.1), 0.3, 0.3 * sd];
        let res = nelder_mead(&mut obj, &theta, &step, 1e-12, 4000);
        total_iter += res.iterations;
        theta = res.x;
        restarts = round;
        if res.converged && (last - res.value).abs() <= 1e-9 * res.value.abs().max(1.0) {
            last = res.value;
            converged = true;
            break;
        }
        last = res.value;
    }
    let p = from_theta(&theta).ok_or_else(|| Error::Solver("fit left the parameter domain".into()))?;
    if !converged || !last.is_finite() {
        return Err(Error::Solver(format!(
            "NIG fit did not converge after {} iterations (negative log-likelihood {}, last params {:?})",
            total_iter, last, p
        )));
    }
    Ok((
        p,
        FitDiagnostics {
            neg_log_likelihood: last,
            iterations: total_iter,
            restarts,
        },
    ))
}

/// CDF by quadrature of the density.
pub fn nig_cdf(x: f64, p: &NigParams) -> Result<f64> {
    let mut f = |t: f64| nig_pdf(t, p);
    let v = if x <= nig_mean(p) {
        integrate_lower_tail(&mut f, x, 1e-14)?
    } else {
        1.0 - integrate_upper_tail(&mut f, x, 1e-14)?
    };
    Ok(v.clamp(0.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample Kolmogorov-Smirnov test against `p`, with the asymptotic
/// distribution and the usual small-sample scaling of the statistic.
pub fn ks_test(samples: &[f64], p: &NigParams) -> Result<KsResult> {
    if samples.is_empty() {
        return Err(Error::Validation("KS test needs at least one sample".into()));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut f = |t: f64| nig_pdf(t, p);
    let mut cdf = nig_cdf(xs[0], p)?;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        if i > 0 {
            cdf += integrate(&mut f, xs[i - 1], x, 1e-14, 1e-12)?;
        }
        let c = cdf.clamp(0.0, 1.0);
        d = d.max((i as f64 + 1.0) / n - c).max(c - i as f64 / n);
    }
    let en = n.sqrt();
    let p_value = kolmogorov_sf((en + 0.12 + 0.11 / en) * d);
    Ok(KsResult { statistic: d, p_value })
}

/// Levy density of the NIG law: `(delta a / (pi |z|)) K_1(a |z|) exp(b z)`.
pub fn nig_levy_density(z: f64, p: &NigParams) -> f64 {
    if z == 0.0 {
        return f64::INFINITY;
    }
    let az = p.a * z.abs();
    ((p.delta * p.a / (PI * z.abs())).ln() + ln_bessel_k1(az) + p.b * z).exp()
}

/// Fitted-law document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedLaw {
    pub a: f64,
    pub b: f64,
    pub delta: f64,
    pub mu: f64,
    pub ks: KsResult,
}

impl FittedLaw {
    pub fn new(p: &NigParams, ks: KsResult) -> Self {
        FittedLaw {
            a: p.a,
            b: p.b,
            delta: p.delta,
            mu: p.mu,
            ks,
        }
    }

    pub fn params(&self) -> Result<NigParams> {
        NigParams::new(self.a, self.b, self.delta, self.mu)
    }
}
