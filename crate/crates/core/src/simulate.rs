//! Euler simulation of jump diffusions with a Gaussian substitute for the
//! small jumps, NIG-driven MCARMA paths, and a coupled Monte Carlo harness
//! for strong errors.
//!
//! A jump channel with Levy measure `nu`, jump map `g` and threshold `eps`
//! is summarized by three numbers: the small-jump variance
//! `G^2(eps) = int_{|z|<eps} g^2 nu`, the arrival intensity
//! `nu({|z| >= eps})` and the compensator `int_{|z|>=eps} g nu`.

use crate::core_model::{assemble_companion, mcarma_stationarity, CompanionSystem};
use crate::estimate::FittedMcarModel;
use crate::error::{Error, Result};
use crate::nig_levy::{nig_levy_density, nig_mean, rng_from_seed, NigParams};
use crate::numerics::{integrate, integrate_upper_tail};
use crate::output::fmt_machine;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::sync::Arc;

const TABLE_POINTS: usize = 1024;

/// One-dimensional Levy measures with known densities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LevyMeasure {
    /// Levy measure of the NIG law.
    Nig { params: NigParams },
    /// Density `z^{-3/2} / 2` on `(0, 1]`; infinite activity and variation.
    PowerToy,
    /// A single atom of the given mass at `z0`.
    PointMass { z0: f64, mass: f64 },
}

impl LevyMeasure {
    pub fn density(&self, z: f64) -> f64 {
        match self {
            LevyMeasure::Nig { params } => nig_levy_density(z, params),
            LevyMeasure::PowerToy => {
                if z > 0.0 && z <= 1.0 {
                    0.5 * z.powf(-1.5)
                } else {
                    0.0
                }
            }
            LevyMeasure::PointMass { .. } => 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            LevyMeasure::Nig { params } => params.validate(),
            LevyMeasure::PowerToy => Ok(()),
            LevyMeasure::PointMass { z0, mass } => {
                if *z0 == 0.0 || !z0.is_finite() || !(*mass >= 0.0) || !mass.is_finite() {
                    Err(Error::Validation(format!("point mass needs z0 != 0 and mass >= 0 (z0={z0}, mass={mass})")))
                } else {
                    Ok(())
                }
            }
        }
    }

    fn sides(&self) -> &'static [f64] {
        match self {
            LevyMeasure::Nig { .. } => &[1.0, -1.0],
            _ => &[1.0],
        }
    }

    fn upper_edge(&self) -> f64 {
        match self {
            LevyMeasure::PowerToy => 1.0,
            _ => f64::INFINITY,
        }
    }

    /// `int_{lo <= |z| < hi, sign(z) = side} w(z) nu(dz)` for a continuous measure.
    fn side_integral(&self, w: &dyn Fn(f64) -> f64, side: f64, lo: f64, hi: f64) -> Result<f64> {
        let hi = hi.min(self.upper_edge());
        if hi <= lo {
            return Ok(0.0);
        }
        let mut f = |u: f64| {
            let z = side * u;
            w(z) * self.density(z)
        };
        let mut total = 0.0;
        let mid = hi.min(1.0).max(lo);
        if mid > lo {
            total += if lo == 0.0 {
                integrate(&mut f, 0.0, mid, 1e-15, 1e-11)?
            } else {
                let mut g = |s: f64| {
                    let u = s.exp();
                    f(u) * u
                };
                integrate(&mut g, lo.ln(), mid.ln(), 1e-15, 1e-11)?
            };
        }
        if hi > mid {
            total += if hi.is_infinite() {
                integrate_upper_tail(&mut f, mid, 1e-15)?
            } else {
                let mut g = |s: f64| {
                    let u = s.exp();
                    f(u) * u
                };
                integrate(&mut g, mid.ln(), hi.ln(), 1e-15, 1e-11)?
            };
        }
        Ok(total)
    }

    /// `int_{lo <= |z| < hi} w(z) nu(dz)`.
    pub fn integral(&self, w: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> Result<f64> {
        if let LevyMeasure::PointMass { z0, mass } = self {
            let a = z0.abs();
            return Ok(if a >= lo && a < hi { w(*z0) * mass } else { 0.0 });
        }
        let mut total = 0.0;
        for &side in self.sides() {
            total += self.side_integral(w, side, lo, hi)?;
        }
        if !total.is_finite() {
            return Err(Error::Numeric("Levy measure integral diverged".into()));
        }
        Ok(total)
    }
}

/// Jump-size map `g`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JumpMap {
    Identity,
    Scaled { c: f64 },
}

impl JumpMap {
    pub fn apply(&self, z: f64) -> f64 {
        match self {
            JumpMap::Identity => z,
            JumpMap::Scaled { c } => c * z,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct JumpSpec {
    pub measure: LevyMeasure,
    pub g: JumpMap,
    pub epsilon: f64,
    /// `G^2(inf)`, the total jump variance.
    pub total_variance: f64,
}

impl JumpSpec {
    /// Checks `0 < epsilon <= 1` and the finite-variance condition.
    pub fn new(measure: LevyMeasure, g: JumpMap, epsilon: f64) -> Result<Self> {
        measure.validate()?;
        check_epsilon(epsilon)?;
        let gg = g;
        let total = measure
            .integral(&|z| gg.apply(z).powi(2), 0.0, f64::INFINITY)
            .map_err(|e| Error::Validation(format!("finite-variance condition fails: {e}")))?;
        if !total.is_finite() {
            return Err(Error::Validation("finite-variance condition fails: G^2(inf) is infinite".into()));
        }
        Ok(JumpSpec {
            measure,
            g,
            epsilon,
            total_variance: total,
        })
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        Ok(JumpSpec {
            epsilon,
            ..self.clone()
        })
    }

    pub fn cell(&self) -> Result<JumpCell> {
        JumpCell::build(self)
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::Validation(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    Ok(())
}

/// `G^2(eps) = int_{|z| < eps} g(z)^2 nu(dz)`.
pub fn g_squared(spec: &JumpSpec, epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    let g = spec.g;
    spec.measure.integral(&|z| g.apply(z).powi(2), 0.0, epsilon)
}

/// Inverse-CDF sampler for jump sizes `|z| >= eps`.
#[derive(Clone, Debug)]
struct SideTable {
    sign: f64,
    grid: Vec<f64>,
    cum: Vec<f64>,
}

#[derive(Clone, Debug)]
enum JumpSampler {
    Table { sides: Vec<SideTable>, side_mass: Vec<f64> },
    Atom { z0: f64 },
    Empty,
}

/// Everything one simulation cell needs from a jump specification.
#[derive(Clone, Debug)]
pub struct JumpCell {
    pub epsilon: f64,
    pub g: JumpMap,
    pub g2: f64,
    pub intensity: f64,
    /// `int_{|z| >= eps} g(z) nu(dz)`.
    pub compensator: f64,
    sampler: JumpSampler,
}

impl JumpCell {
    fn build(spec: &JumpSpec) -> Result<Self> {
        let eps = spec.epsilon;
        let g = spec.g;
        let g2 = g_squared(spec, eps)?;
        let compensator = spec.measure.integral(&|z| g.apply(z), eps, f64::INFINITY)?;
        let (sampler, intensity) = match &spec.measure {
            LevyMeasure::PointMass { z0, mass } => {
                if z0.abs() >= eps && *mass > 0.0 {
                    (JumpSampler::Atom { z0: *z0 }, *mass)
                } else {
                    (JumpSampler::Empty, 0.0)
                }
            }
            m => {
                let mut sides = Vec::new();
                let mut side_mass = Vec::new();
                for &sign in m.sides() {
                    let t = side_table(m, sign, eps)?;
                    let mass = *t.cum.last().unwrap_or(&0.0);
                    if mass > 0.0 {
                        side_mass.push(mass);
                        sides.push(t);
                    }
                }
                let total: f64 = side_mass.iter().sum();
                if sides.is_empty() {
                    (JumpSampler::Empty, 0.0)
                } else {
                    (JumpSampler::Table { sides, side_mass }, total)
                }
            }
        };
        Ok(JumpCell {
            epsilon: eps,
            g,
            g2,
            intensity,
            compensator,
            sampler,
        })
    }

    pub fn g(&self) -> f64 {
        self.g2.sqrt()
    }

    /// A jump size `z` with `|z| >= eps`, distributed as the normalized tail of `nu`.
    pub fn sample_size<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.sampler {
            JumpSampler::Atom { z0 } => *z0,
            JumpSampler::Empty => 0.0,
            JumpSampler::Table { sides, side_mass } => {
                let total: f64 = side_mass.iter().sum();
                let mut u: f64 = rng.random::<f64>() * total;
                let mut k = 0;
                while k + 1 < sides.len() && u >= side_mass[k] {
                    u -= side_mass[k];
                    k += 1;
                }
                let t = &sides[k];
                let i = t.cum.partition_point(|&c| c < u).clamp(1, t.cum.len() - 1);
                let (c0, c1) = (t.cum[i - 1], t.cum[i]);
                let frac = if c1 > c0 { ((u - c0) / (c1 - c0)).clamp(0.0, 1.0) } else { 0.0 };
                t.sign * (t.grid[i - 1] + frac * (t.grid[i] - t.grid[i - 1]))
            }
        }
    }

    /// Jump sizes of the compound-Poisson arrivals in a window of length `h`.
    pub fn sample_arrivals<R: Rng + ?Sized>(&self, h: f64, rng: &mut R) -> Vec<f64> {
        let lam = self.intensity * h;
        if !(lam > 0.0) {
            return Vec::new();
        }
        let n = Poisson::new(lam).map(|p| p.sample(rng) as usize).unwrap_or(0);
        (0..n).map(|_| self.sample_size(rng)).collect()
    }
}

fn side_table(m: &LevyMeasure, sign: f64, eps: f64) -> Result<SideTable> {
    let one = |_: f64| 1.0;
    let mut zmax = m.upper_edge();
    if zmax.is_infinite() {
        let total = m.side_integral(&one, sign, eps, f64::INFINITY)?;
        zmax = 1.0f64.max(2.0 * eps);
        while zmax < 1e6 && m.side_integral(&one, sign, zmax, f64::INFINITY)? > 1e-13 * total {
            zmax *= 2.0;
        }
    }
    if zmax <= eps {
        return Ok(SideTable {
            sign,
            grid: vec![eps, eps],
            cum: vec![0.0, 0.0],
        });
    }
    let ratio = (zmax / eps).ln();
    let grid: Vec<f64> = (0..TABLE_POINTS)
        .map(|i| eps * (ratio * i as f64 / (TABLE_POINTS - 1) as f64).exp())
        .collect();
    let mut cum = vec![0.0; TABLE_POINTS];
    for i in 1..TABLE_POINTS {
        cum[i] = cum[i - 1] + m.side_integral(&one, sign, grid[i - 1], grid[i])?;
    }
    Ok(SideTable { sign, grid, cum })
}

pub type StateFn = Arc<dyn Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type LoadingFn = Arc<dyn Fn(f64, &DVector<f64>) -> DMatrix<f64> + Send + Sync>;

/// Growth and Lipschitz constants as declared by the user. They are recorded,
/// never verified.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DeclaredConstants {
    pub k: Option<f64>,
    pub k0: Option<f64>,
    pub k1: Option<f64>,
    pub k2: Option<f64>,
}

/// `dZ = a(t, Z) dt + b(t, Z) dW + eta(t, Z) dJ` with one scalar jump channel `J`.
#[derive(Clone)]
pub struct DiffusionSpec {
    pub dim: usize,
    pub brownian_dim: usize,
    pub drift: StateFn,
    pub diffusion: LoadingFn,
    pub jump_factor: StateFn,
    pub x0: DVector<f64>,
    pub constants: DeclaredConstants,
}

impl std::fmt::Debug for DiffusionSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiffusionSpec")
            .field("dim", &self.dim)
            .field("brownian_dim", &self.brownian_dim)
            .field("x0", &self.x0)
            .finish()
    }
}

impl DiffusionSpec {
    /// Checks the coefficient shapes at the initial state.
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Validation("state dimension must be positive".into()));
        }
        if self.x0.len() != self.dim {
            return Err(Error::Shape(format!("initial state has length {}, expected {}", self.x0.len(), self.dim)));
        }
        let a = (self.drift)(0.0, &self.x0);
        let b = (self.diffusion)(0.0, &self.x0);
        let e = (self.jump_factor)(0.0, &self.x0);
        if a.len() != self.dim || e.len() != self.dim || b.shape() != (self.dim, self.brownian_dim) {
            return Err(Error::Shape(format!(
                "coefficient shapes drift {}, diffusion {:?}, jump factor {} do not match dimension {} with {} Brownian motions",
                a.len(),
                b.shape(),
                e.len(),
                self.dim,
                self.brownian_dim
            )));
        }
        Ok(())
    }
}

/// Affine coefficients, the serializable form of a [`DiffusionSpec`]:
/// `a = a0 + A1 x`, column `j` of `b` is `b0[:, j] + B_j x`, `eta = e0 + E1 x`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AffineDiffusion {
    pub x0: Vec<f64>,
    pub drift_constant: Vec<f64>,
    pub drift_linear: Vec<Vec<f64>>,
    pub diffusion_constant: Vec<Vec<f64>>,
    pub diffusion_linear: Vec<Vec<Vec<f64>>>,
    pub jump_constant: Vec<f64>,
    pub jump_linear: Vec<Vec<f64>>,
    pub constants: DeclaredConstants,
}

fn vec_or_zero(v: &[f64], n: usize, what: &str) -> Result<DVector<f64>> {
    if v.is_empty() {
        return Ok(DVector::zeros(n));
    }
    if v.len() != n {
        return Err(Error::Shape(format!("{what} has length {}, expected {n}", v.len())));
    }
    Ok(DVector::from_column_slice(v))
}

fn mat_or_zero(rows: &[Vec<f64>], r: usize, c: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.is_empty() {
        return Ok(DMatrix::zeros(r, c));
    }
    if rows.len() != r || rows.iter().any(|row| row.len() != c) {
        return Err(Error::Shape(format!("{what} must be {r} x {c}")));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

impl AffineDiffusion {
    pub fn to_spec(&self) -> Result<DiffusionSpec> {
        let n = self.x0.len();
        let nw = if !self.diffusion_constant.is_empty() {
            self.diffusion_constant.first().map_or(0, |r| r.len())
        } else {
            self.diffusion_linear.len()
        };
        let a0 = vec_or_zero(&self.drift_constant, n, "drift_constant")?;
        let a1 = mat_or_zero(&self.drift_linear, n, n, "drift_linear")?;
        let b0 = mat_or_zero(&self.diffusion_constant, n, nw, "diffusion_constant")?;
        let bl: Vec<DMatrix<f64>> = if self.diffusion_linear.is_empty() {
            vec![DMatrix::zeros(n, n); nw]
        } else {
            if self.diffusion_linear.len() != nw {
                return Err(Error::Shape(format!("diffusion_linear needs {nw} matrices")));
            }
            self.diffusion_linear
                .iter()
                .map(|m| mat_or_zero(m, n, n, "diffusion_linear"))
                .collect::<Result<_>>()?
        };
        let e0 = vec_or_zero(&self.jump_constant, n, "jump_constant")?;
        let e1 = mat_or_zero(&self.jump_linear, n, n, "jump_linear")?;
        let spec = DiffusionSpec {
            dim: n,
            brownian_dim: nw,
            drift: Arc::new(move |_, x| &a0 + &a1 * x),
            diffusion: Arc::new(move |_, x| {
                let mut b = b0.clone();
                for (j, l) in bl.iter().enumerate() {
                    let col = l * x;
                    for i in 0..col.len() {
                        b[(i, j)] += col[i];
                    }
                }
                b
            }),
            jump_factor: Arc::new(move |_, x| &e0 + &e1 * x),
            x0: DVector::from_column_slice(&self.x0),
            constants: self.constants,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Noise for one Euler step.
#[derive(Clone, Debug)]
pub struct StepDraws {
    /// Brownian increments, variance `h` each.
    pub dw: DVector<f64>,
    /// Increment of the Brownian motion substituting the small jumps, variance `h`.
    pub db: f64,
    /// `sum g(z_j)` over the arrivals with `|z_j| >= eps` in the step.
    pub jump_sum: f64,
}

/// `x + a h + b dW + G(eps) eta dB + eta (sum g(z_j) - h int_{|z|>=eps} g nu)`.
pub fn euler_step(
    state: &DVector<f64>,
    t: f64,
    h: f64,
    spec: &DiffusionSpec,
    jumps: Option<&JumpCell>,
    draws: &StepDraws,
    step: usize,
) -> Result<DVector<f64>> {
    let mut next = state + (spec.drift)(t, state) * h;
    if spec.brownian_dim > 0 {
        next += (spec.diffusion)(t, state) * &draws.dw;
    }
    if let Some(cell) = jumps {
        let eta = (spec.jump_factor)(t, state);
        let scalar = cell.g() * draws.db + draws.jump_sum - h * cell.compensator;
        next += eta * scalar;
    }
    if next.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("state became non-finite at step {step} (t = {t})")));
    }
    Ok(next)
}

/// Paths on an equidistant grid; `values[path]` is row-major in (step, dim).
#[derive(Clone, Debug, PartialEq)]
pub struct PathSet {
    pub h: f64,
    pub t_end: f64,
    pub n_steps: usize,
    pub dim: usize,
    pub seed: u64,
    pub values: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

impl PathSet {
    pub fn n_paths(&self) -> usize {
        self.values.len()
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.h
    }

    pub fn value(&self, path: usize, step: usize, k: usize) -> f64 {
        self.values[path][step * self.dim + k]
    }

    /// CSV with columns `t, path_id, dim, value`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,path_id,dim,value")?;
        for (p, vals) in self.values.iter().enumerate() {
            for s in 0..=self.n_steps {
                let t = fmt_machine(self.time(s));
                for k in 0..self.dim {
                    writeln!(w, "{},{},{},{}", t, p, k + 1, fmt_machine(vals[s * self.dim + k]))?;
                }
            }
        }
        Ok(())
    }

    /// Per-dimension mean and standard error over all paths of the time
    /// average on `(0, T]`.
    pub fn time_average_summary(&self) -> Vec<(f64, f64)> {
        (0..self.dim)
            .map(|k| {
                let avgs: Vec<f64> = self
                    .values
                    .iter()
                    .map(|v| (1..=self.n_steps).map(|s| v[s * self.dim + k]).sum::<f64>() / self.n_steps as f64)
                    .collect();
                mean_and_se(&avgs)
            })
            .collect()
    }
}

pub fn mean_and_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (m, f64::NAN);
    }
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// Number of steps of size `h` in `[0, t_end]`, required to be an integer.
pub fn grid_steps(h: f64, t_end: f64) -> Result<usize> {
    if !(h > 0.0 && h.is_finite() && t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::Validation(format!("need h > 0 and T > 0 (h={h}, T={t_end})")));
    }
    let n = (t_end / h).round();
    if (n * h - t_end).abs() > 1e-9 * t_end || n < 1.0 {
        return Err(Error::Validation(format!("T = {t_end} is not a whole number of steps h = {h}")));
    }
    Ok(n as usize)
}

fn path_rng(seed: u64, path: usize) -> ChaCha20Rng {
    let mut rng = rng_from_seed(seed);
    rng.set_stream(path as u64);
    rng
}

/// One NIG driving channel with its truncation cell.
#[derive(Clone, Debug)]
pub struct LevyChannel {
    pub params: NigParams,
    pub cell: JumpCell,
    /// Drift with truncation at one: `E L(1) - int_{|z|>=1} z nu(dz)`.
    pub alpha: f64,
    /// `alpha - int_{eps <= |z| < 1} z nu(dz)`.
    pub alpha_hat: f64,
}

impl LevyChannel {
    pub fn new(params: NigParams, epsilon: f64) -> Result<Self> {
        let measure = LevyMeasure::Nig { params };
        let spec = JumpSpec::new(measure.clone(), JumpMap::Identity, epsilon)?;
        let cell = spec.cell()?;
        let alpha = nig_mean(&params) - measure.integral(&|z| z, 1.0, f64::INFINITY)?;
        let alpha_hat = alpha - measure.integral(&|z| z, epsilon, 1.0)?;
        Ok(LevyChannel {
            params,
            cell,
            alpha,
            alpha_hat,
        })
    }

    /// Approximate `L(t + h) - L(t)`.
    pub fn draw_increment<R: Rng + ?Sized>(&self, h: f64, rng: &mut R) -> f64 {
        let n: f64 = StandardNormal.sample(rng);
        let jumps: f64 = self.cell.sample_arrivals(h, rng).iter().sum();
        self.alpha_hat * h + self.cell.g() * h.sqrt() * n + jumps
    }
}

/// Grid and sampling settings shared by the MCARMA simulators.
#[derive(Clone, Debug, PartialEq)]
pub struct SimSettings {
    pub h: f64,
    pub t_end: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub epsilon: f64,
    /// Initial state; zero when absent.
    pub x0: Option<DVector<f64>>,
}

type TimeFn<'a> = &'a (dyn Fn(f64) -> DVector<f64> + Sync);

/// Shared Euler loop. `level(t)` is added to the output and `scale(t)`
/// multiplies the noise loading row-wise (per output dimension).
pub(crate) fn simulate_state_space(
    sys: &CompanionSystem,
    drivers: &[NigParams],
    s: &SimSettings,
    level: Option<TimeFn>,
    scale: Option<TimeFn>,
) -> Result<PathSet> {
    let o = sys.orders;
    let (n, d, m) = (o.p * o.d, o.d, o.m);
    if drivers.len() != m {
        return Err(Error::Shape(format!("{} driver laws given for {} channels", drivers.len(), m)));
    }
    if s.n_paths == 0 {
        return Err(Error::Validation("number of paths must be at least 1".into()));
    }
    let steps = grid_steps(s.h, s.t_end)?;
    let channels: Vec<LevyChannel> = drivers.iter().map(|p| LevyChannel::new(*p, s.epsilon)).collect::<Result<_>>()?;
    let x0 = match &s.x0 {
        Some(x) if x.len() != n => return Err(Error::Shape(format!("initial state has length {}, expected {n}", x.len()))),
        Some(x) => x.clone(),
        None => DVector::zeros(n),
    };
    let mut warnings = Vec::new();
    if let Ok(rep) = mcarma_stationarity(sys) {
        if !rep.stationary {
            warnings.push("companion matrix has eigenvalues with non-negative real part; paths may diverge".to_string());
        }
    }
    let step_matrix = DMatrix::<f64>::identity(n, n) + &sys.a * s.h;
    let values: Vec<Vec<f64>> = (0..s.n_paths)
        .into_par_iter()
        .map(|path| -> Result<Vec<f64>> {
            let mut rng = path_rng(s.seed, path);
            let mut out = Vec::with_capacity((steps + 1) * d);
            let mut x = x0.clone();
            let mut dl = DVector::<f64>::zeros(m);
            let emit = |x: &DVector<f64>, t: f64, out: &mut Vec<f64>| {
                let y = &sys.c * x;
                let lv = level.map(|f| f(t));
                for k in 0..d {
                    out.push(y[k] + lv.as_ref().map_or(0.0, |l| l[k]));
                }
            };
            emit(&x, 0.0, &mut out);
            for step in 0..steps {
                let t = step as f64 * s.h;
                for (r, ch) in channels.iter().enumerate() {
                    dl[r] = ch.draw_increment(s.h, &mut rng);
                }
                let mut noise = &sys.beta * &dl;
                if let Some(f) = scale {
                    let sig = f(t);
                    for i in 0..n {
                        noise[i] *= sig[i % d];
                    }
                }
                x = &step_matrix * &x + noise;
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Numeric(format!("path {path} blew up at step {}", step + 1)));
                }
                emit(&x, t + s.h, &mut out);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(PathSet {
        h: s.h,
        t_end: s.t_end,
        n_steps: steps,
        dim: d,
        seed: s.seed,
        values,
        warnings,
    })
}

/// Euler paths of `dX = A X dt + beta dL`, `Y = C X`, with NIG channels
/// whose small jumps (`|z| < eps`) are replaced by a Brownian term.
pub fn simulate_mcarma(sys: &CompanionSystem, drivers: &[NigParams], settings: &SimSettings) -> Result<PathSet> {
    simulate_state_space(sys, drivers, settings, None, None)
}

/// Day counter of model time `t` (day 1 at `t = 0`) and its day of year.
pub fn calendar_of(t: f64) -> (f64, f64) {
    let day = t + 1.0;
    (day, (t.floor().rem_euclid(365.0)) + 1.0)
}

/// Paths of the fitted model: `Y(t) = Lambda(t) + C X(t)` with the noise
/// loading scaled row-wise by `sigma(t-)`.
pub fn simulate_extended_mcar(model: &FittedMcarModel, settings: &SimSettings) -> Result<PathSet> {
    model.validate()?;
    let sys = assemble_companion(&model.coefficients()?)?;
    let d = sys.orders.d;
    let level = |t: f64| {
        let (day, _) = calendar_of(t);
        DVector::from_fn(d, |k, _| model.seasonality.eval(k, day))
    };
    let scale = |t: f64| {
        let (_, doy) = calendar_of(t);
        DVector::from_fn(d, |k, _| model.volatility.eval(k, doy))
    };
    simulate_state_space(&sys, &model.driver_laws, settings, Some(&level), Some(&scale))
}

/// Strong-error experiment description.
#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub diffusion: DiffusionSpec,
    /// Jump channel; `None` for a pure diffusion.
    pub jumps: Option<(LevyMeasure, JumpMap)>,
    pub t_end: f64,
    pub h_list: Vec<f64>,
    pub epsilon_list: Vec<f64>,
    pub n_paths: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorCell {
    pub h: f64,
    pub epsilon: f64,
    /// `E[sup_t |Z_ref(t) - Z(t)|^2]^{1/2}` over the cell's grid.
    pub error_l2_sup: f64,
    pub std_error: f64,
    pub g_epsilon: f64,
    pub n_paths: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorTable {
    pub reference_h: f64,
    pub reference_epsilon: f64,
    pub cells: Vec<ErrorCell>,
    /// Least-squares slope of log error against log h at the reference epsilon.
    pub slope_h: Option<f64>,
    /// Least-squares slope of log error against log G(eps) at the reference h.
    pub slope_g: Option<f64>,
}

impl ErrorTable {
    /// CSV with columns `h, epsilon, error_L2_sup, n_paths, seed`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "h,epsilon,error_L2_sup,n_paths,seed")?;
        for c in &self.cells {
            writeln!(
                w,
                "{},{},{},{},{}",
                fmt_machine(c.h),
                fmt_machine(c.epsilon),
                fmt_machine(c.error_l2_sup),
                c.n_paths,
                c.seed
            )?;
        }
        Ok(())
    }

    pub fn cell(&self, h: f64, epsilon: f64) -> Option<&ErrorCell> {
        self.cells.iter().find(|c| c.h == h && c.epsilon == epsilon)
    }
}

/// Least-squares slope of `y` on `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || x.len() != y.len() {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Some(sxy / sxx)
}

struct CellPlan {
    h: f64,
    stride: usize,
    cell: Option<JumpCell>,
    /// Standard deviation per unit time of the extra Gaussian standing in for
    /// jumps between the smallest threshold and this cell's threshold.
    extra_sd: f64,
}

/// Monte Carlo strong errors on a grid of (h, eps) against the reference
/// solution at the finest step and smallest threshold.
///
/// All cells are driven by one noise realization per path: Brownian
/// increments on the finest grid (summed for coarser steps) and jumps drawn
/// once at the smallest threshold. A cell with a larger threshold moves the
/// jumps below it into an independent Gaussian of variance
/// `G^2(eps) - G^2(eps_min)` per unit time.
pub fn strong_error_experiment(spec: &ExperimentSpec) -> Result<ErrorTable> {
    if spec.n_paths < 100 {
        return Err(Error::Validation(format!("strong-error experiment needs at least 100 paths, got {}", spec.n_paths)));
    }
    spec.diffusion.validate()?;
    if spec.h_list.is_empty() {
        return Err(Error::Validation("h list is empty".into()));
    }
    let mut hs = spec.h_list.clone();
    hs.sort_by(|a, b| b.total_cmp(a));
    hs.dedup();
    let h_ref = *hs.last().expect("non-empty");
    let n_ref = grid_steps(h_ref, spec.t_end)?;
    let mut strides = Vec::new();
    for &h in &hs {
        grid_steps(h, spec.t_end)?;
        let r = (h / h_ref).round();
        if (r * h_ref - h).abs() > 1e-12 * h {
            return Err(Error::Validation(format!("h = {h} is not a multiple of the finest step {h_ref}")));
        }
        strides.push(r as usize);
    }

    let mut eps_list = spec.epsilon_list.clone();
    let base = match &spec.jumps {
        Some((measure, g)) => {
            if eps_list.is_empty() {
                return Err(Error::Validation("epsilon list is empty".into()));
            }
            eps_list.sort_by(|a, b| b.total_cmp(a));
            eps_list.dedup();
            Some(JumpSpec::new(measure.clone(), *g, *eps_list.last().expect("non-empty"))?)
        }
        None => {
            eps_list = vec![0.0];
            None
        }
    };
    let eps_ref = *eps_list.last().expect("non-empty");
    let ref_cell = base.as_ref().map(|b| b.cell()).transpose()?;
    let mut eps_cells: Vec<(f64, Option<JumpCell>, f64)> = Vec::new();
    for &e in &eps_list {
        match &base {
            Some(b) => {
                let c = b.with_epsilon(e)?.cell()?;
                let extra = (c.g2 - ref_cell.as_ref().map_or(0.0, |r| r.g2)).max(0.0).sqrt();
                eps_cells.push((e, Some(c), extra));
            }
            None => eps_cells.push((e, None, 0.0)),
        }
    }

    let mut plans = Vec::new();
    for (hi, &h) in hs.iter().enumerate() {
        for (e, c, extra) in &eps_cells {
            plans.push((
                *e,
                CellPlan {
                    h,
                    stride: strides[hi],
                    cell: c.clone(),
                    extra_sd: *extra,
                },
            ));
        }
    }
    let ref_index = plans
        .iter()
        .position(|(e, p)| p.stride == 1 && *e == eps_ref)
        .expect("reference cell present");

    let nw = spec.diffusion.brownian_dim;
    let per_path: Vec<Vec<f64>> = (0..spec.n_paths)
        .into_par_iter()
        .map(|path| -> Result<Vec<f64>> {
            let mut rng = path_rng(spec.seed, path);
            let mut dw = vec![0.0; n_ref * nw];
            let mut db = vec![0.0; n_ref];
            let mut db2 = vec![0.0; n_ref];
            let sq = h_ref.sqrt();
            for v in dw.iter_mut().chain(db.iter_mut()).chain(db2.iter_mut()) {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v = z * sq;
            }
            // (fine step index, size) of every arrival at the smallest threshold.
            let mut arrivals: Vec<(usize, f64)> = Vec::new();
            if let Some(c) = &ref_cell {
                for z in c.sample_arrivals(spec.t_end, &mut rng) {
                    let t: f64 = rng.random::<f64>() * spec.t_end;
                    arrivals.push((((t / h_ref) as usize).min(n_ref - 1), z));
                }
                arrivals.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
            }
            let mut trajectories: Vec<Vec<DVector<f64>>> = Vec::with_capacity(plans.len());
            for (_, plan) in &plans {
                let steps = n_ref / plan.stride;
                let mut x = spec.diffusion.x0.clone();
                let mut traj = Vec::with_capacity(steps + 1);
                traj.push(x.clone());
                let mut next_arrival = 0;
                for k in 0..steps {
                    let lo = k * plan.stride;
                    let hi = lo + plan.stride;
                    let mut w = DVector::<f64>::zeros(nw);
                    let mut b = 0.0;
                    let mut b2 = 0.0;
                    for f in lo..hi {
                        for j in 0..nw {
                            w[j] += dw[f * nw + j];
                        }
                        b += db[f];
                        b2 += db2[f];
                    }
                    let mut jump_sum = 0.0;
                    let mut db_eff = 0.0;
                    if let Some(c) = &plan.cell {
                        while next_arrival < arrivals.len() && arrivals[next_arrival].0 < hi {
                            let z = arrivals[next_arrival].1;
                            if z.abs() >= c.epsilon {
                                jump_sum += c.g.apply(z);
                            }
                            next_arrival += 1;
                        }
                        let g_ref = ref_cell.as_ref().map_or(0.0, |r| r.g());
                        if c.g() > 0.0 {
                            db_eff = (g_ref * b + plan.extra_sd * b2) / c.g();
                        }
                    }
                    let draws = StepDraws {
                        dw: w,
                        db: db_eff,
                        jump_sum,
                    };
                    x = euler_step(&x, k as f64 * plan.h, plan.h, &spec.diffusion, plan.cell.as_ref(), &draws, k + 1)?;
                    traj.push(x.clone());
                }
                trajectories.push(traj);
            }
            let reference = &trajectories[ref_index];
            Ok(plans
                .iter()
                .zip(&trajectories)
                .map(|((_, plan), traj)| {
                    traj.iter()
                        .enumerate()
                        .map(|(k, x)| (x - &reference[k * plan.stride]).norm_squared())
                        .fold(0.0, f64::max)
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let np = spec.n_paths as f64;
    let mut cells = Vec::new();
    for (i, (e, plan)) in plans.iter().enumerate() {
        let sq: Vec<f64> = per_path.iter().map(|v| v[i]).collect();
        let mean = sq.iter().sum::<f64>() / np;
        let var = sq.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (np - 1.0);
        let err = mean.sqrt();
        // Delta method for the square root.
        let se = if err > 0.0 { (var / np).sqrt() / (2.0 * err) } else { 0.0 };
        cells.push(ErrorCell {
            h: plan.h,
            epsilon: *e,
            error_l2_sup: err,
            std_error: se,
            g_epsilon: plan.cell.as_ref().map_or(0.0, |c| c.g()),
            n_paths: spec.n_paths,
            seed: spec.seed,
        });
    }
    let (mut lx, mut ly) = (Vec::new(), Vec::new());
    for c in cells.iter().filter(|c| c.epsilon == eps_ref && c.error_l2_sup > 0.0) {
        lx.push(c.h.ln());
        ly.push(c.error_l2_sup.ln());
    }
    let slope_h = fit_slope(&lx, &ly);
    let (mut gx, mut gy) = (Vec::new(), Vec::new());
    for c in cells.iter().filter(|c| c.h == h_ref && c.error_l2_sup > 0.0 && c.g_epsilon > 0.0) {
        gx.push(c.g_epsilon.ln());
        gy.push(c.error_l2_sup.ln());
    }
    let slope_g = fit_slope(&gx, &gy);
    Ok(ErrorTable {
        reference_h: h_ref,
        reference_epsilon: eps_ref,
        cells,
        slope_h,
        slope_g,
    })
}

/// Default step list `2^-2 .. 2^-8`.
pub fn default_h_list() -> Vec<f64> {
    (2..=8).map(|k| 2f64.powi(-k)).collect()
}
