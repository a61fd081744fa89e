//! Maps between the MCARMA coefficients and the discrete representation of
//! the Euler-discretized state space.
//!
//! The discretized process satisfies, with `Delta` the forward difference of
//! step `h`,
//!
//! ```text
//! Delta^p x = - sum_j h^j A_j Delta^{p-j} x
//!             + sum_{i<p} h^{i-1} beta_i Delta^{p-i} dL
//!             + sum_j sum_{i<=p-j} h^{j+i-1} A_j beta_i Delta^{p-j-i} dL
//!             + h^{p-1} beta_p dL
//! ```
//!
//! where `Delta^n` expands with the coefficients of [`b_table`].

pub mod oracle;
pub mod poly;

pub use oracle::symbolic_oracle;
pub use poly::Poly;

use crate::core_model::{beta_stack, McarmaCoefficients, ModelOrders, VarmaRepresentation};
use crate::error::{Error, Result};
use crate::ring::{rational_from_f64, rational_to_string, Field, GMat, Ring};
use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Collected linear combination of `x(t + j h)` and `Delta L(t + j h)`.
///
/// `state[j]` is `rows x d`, `noise[j]` is `rows x m`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearForm<T> {
    pub rows: usize,
    pub d: usize,
    pub m: usize,
    pub state: BTreeMap<usize, GMat<T>>,
    pub noise: BTreeMap<usize, GMat<T>>,
}

impl<T: Ring> LinearForm<T> {
    pub fn zeros(rows: usize, d: usize, m: usize) -> Self {
        LinearForm {
            rows,
            d,
            m,
            state: BTreeMap::new(),
            noise: BTreeMap::new(),
        }
    }

    /// Drop all-zero coefficient matrices.
    pub fn prune(&mut self) {
        self.state.retain(|_, v| v.data.iter().any(|x| !x.is_zero_value()));
        self.noise.retain(|_, v| v.data.iter().any(|x| !x.is_zero_value()));
    }

    pub fn state_at(&self, offset: usize) -> GMat<T> {
        self.state.get(&offset).cloned().unwrap_or_else(|| GMat::zeros(self.rows, self.d))
    }

    pub fn noise_at(&self, offset: usize) -> GMat<T> {
        self.noise.get(&offset).cloned().unwrap_or_else(|| GMat::zeros(self.rows, self.m))
    }

    fn add_state(&mut self, offset: usize, m: GMat<T>) {
        let cur = self.state_at(offset);
        self.state.insert(offset, cur.add(&m));
    }

    fn add_noise(&mut self, offset: usize, m: GMat<T>) {
        let cur = self.noise_at(offset);
        self.noise.insert(offset, cur.add(&m));
    }
}

/// Triangular table `b[q][n]` for `0 <= n <= q <= p`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BCoefficientTable {
    pub rows: Vec<Vec<i64>>,
}

impl BCoefficientTable {
    pub fn get(&self, n: usize, q: usize) -> i64 {
        self.rows[q][n]
    }
}

/// Backward-difference weights: `b_n^q = binomial(q, n)`, built with
/// Pascal's rule in exact integers.
pub fn b_table(p: usize) -> BCoefficientTable {
    let mut rows: Vec<Vec<i64>> = Vec::with_capacity(p + 1);
    for q in 0..=p {
        let mut row = vec![1i64; q + 1];
        for n in 1..q {
            row[n] = rows[q - 1][n - 1] + rows[q - 1][n];
        }
        rows.push(row);
    }
    BCoefficientTable { rows }
}

fn signed(n: usize) -> i64 {
    if n % 2 == 0 {
        1
    } else {
        -1
    }
}

fn pow<T: Ring>(x: &T, n: usize) -> T {
    let mut acc = T::one();
    for _ in 0..n {
        acc = acc * x.clone();
    }
    acc
}

/// Expansion of the first-block state of block `l + 1` (component
/// `k`, 1-based) in terms of `x_k(t + j h)` and noise increments.
///
/// Returns a one-row form: `state[j]` carries the coefficient of `x_k` in
/// column `k - 1`.
pub fn lemma1_expansion<T: Ring>(l: usize, k: usize, orders: &ModelOrders, beta: &[GMat<T>], h: &BigRational) -> Result<LinearForm<T>> {
    let (p, d, m) = (orders.p, orders.d, orders.m);
    if l == 0 || l >= p || k == 0 || k > d {
        return Err(Error::Validation(format!("lemma expansion needs 1<=l<=p-1 and 1<=k<=d (got l={l}, k={k})")));
    }
    if beta.len() != p {
        return Err(Error::Shape("beta stack must have p blocks".into()));
    }
    let b = b_table(p);
    let hinv = T::from_rational(&(BigRational::from_integer(1.into()) / h));
    let mut form = LinearForm::zeros(1, d, m);
    let lead = pow(&hinv, l);
    for n in 0..=l {
        let mut g = GMat::zeros(1, d);
        g[(0, k - 1)] = lead.clone() * T::from_i64(signed(n) * b.get(n, l));
        form.add_state(l - n, g);
    }
    for w in 0..l {
        let scale = pow(&hinv, w + 1);
        let bl = &beta[l - w - 1];
        for v in 0..=w {
            let c = scale.clone() * T::from_i64(-signed(v) * b.get(v, w));
            let g = GMat::from_fn(1, m, |_, r| c.clone() * bl[(k - 1, r)].clone());
            form.add_noise(w - v, g);
        }
    }
    form.prune();
    Ok(form)
}

/// Forward map from autoregressive blocks and an explicit beta stack to the
/// linear form of `x(t + p h)`.
pub fn forward_from_stack<T: Ring>(orders: &ModelOrders, a: &[GMat<T>], beta: &[GMat<T>], h: &T) -> LinearForm<T> {
    let (p, d, m) = (orders.p, orders.d, orders.m);
    let b = b_table(p);
    let eye = GMat::<T>::identity(d);
    let mut form = LinearForm::zeros(d, d, m);
    let coef = |sign_exp: usize, q: usize, k: usize| T::from_i64(signed(sign_exp) * b.get(k, q));

    for k in 0..p {
        // Delta^p x moved to the right-hand side.
        let mut acc = eye.scale(&-coef(p - k, p, k));
        for j in 1..=p - k {
            let c = pow(h, j) * coef(p - j - k, p - j, k);
            acc = acc.sub(&a[j - 1].scale(&c));
        }
        form.add_state(k, acc);
    }

    for k in 0..p {
        let mut acc = GMat::zeros(d, m);
        for i in 1..p {
            if k <= p - i {
                let c = pow(h, i - 1) * coef(p - i - k, p - i, k);
                acc = acc.add(&beta[i - 1].scale(&c));
            }
        }
        for j in 1..=p {
            for i in 1..=p - j {
                if k <= p - j - i {
                    let c = pow(h, j + i - 1) * coef(p - j - i - k, p - j - i, k);
                    acc = acc.add(&a[j - 1].matmul(&beta[i - 1]).scale(&c));
                }
            }
        }
        if k == 0 {
            acc = acc.add(&beta[p - 1].scale(&pow(h, p - 1)));
        }
        form.add_noise(k, acc);
    }
    form.prune();
    form
}

/// Forward map over any ring, starting from `A_1..A_p` and `B_0..B_q`.
pub fn forward_generic<T: Ring>(orders: &ModelOrders, a: &[GMat<T>], b: &[GMat<T>], h: &T) -> LinearForm<T> {
    let beta = beta_stack(orders, a, b);
    forward_from_stack(orders, a, &beta, h)
}

fn representation_from_form(orders: ModelOrders, h: f64, form: &LinearForm<f64>) -> VarmaRepresentation {
    let p = orders.p;
    let phi = (1..=p).map(|i| form.state_at(p - i).to_dmatrix()).collect();
    let mut loads: BTreeMap<usize, DMatrix<f64>> = form.noise.iter().map(|(k, v)| (*k, v.to_dmatrix())).collect();
    loads.entry(0).or_insert_with(|| DMatrix::zeros(orders.d, orders.m));
    VarmaRepresentation {
        orders,
        step: h,
        phi_blocks: phi,
        noise_loadings: loads,
    }
}

pub fn forward_transform(coeffs: &McarmaCoefficients, h: f64) -> Result<VarmaRepresentation> {
    coeffs.validate()?;
    if !(h > 0.0 && h <= 1.0) {
        return Err(Error::Validation(format!("step must lie in (0, 1], got {h}")));
    }
    let a: Vec<GMat<f64>> = coeffs.a_blocks.iter().map(GMat::from_dmatrix).collect();
    let b: Vec<GMat<f64>> = coeffs.b_blocks.iter().map(GMat::from_dmatrix).collect();
    let form = forward_generic(&coeffs.orders, &a, &b, &h);
    Ok(representation_from_form(coeffs.orders, h, &form))
}

/// Affine structure of the pure-autoregressive forward map:
/// `phi_i = k_i I + sum_j m[i][j] A_j`, and offset-0 loading `s B_0`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineStructure<T> {
    pub constants: Vec<T>,
    pub weights: Vec<Vec<T>>,
    pub noise_scale: T,
}

/// Probe the forward map with scalar unit inputs to recover its affine
/// structure for `q = 0`.
pub fn probe_affine_structure<T: Field>(p: usize, h: &T) -> Result<AffineStructure<T>> {
    let orders = ModelOrders::new(p, 0, 1, 1)?;
    let scalar = |v: T| GMat::from_fn(1, 1, |_, _| v.clone());
    let run = |a_unit: Option<usize>, b0: T| {
        let a: Vec<GMat<T>> = (0..p).map(|j| scalar(if Some(j) == a_unit { T::one() } else { T::zero() })).collect();
        forward_generic(&orders, &a, &[scalar(b0)], h)
    };
    let base = run(None, T::zero());
    let constants: Vec<T> = (1..=p).map(|i| base.state_at(p - i)[(0, 0)].clone()).collect();
    let mut weights = vec![vec![T::zero(); p]; p];
    for j in 0..p {
        let f = run(Some(j), T::zero());
        for i in 0..p {
            weights[i][j] = f.state_at(p - 1 - i)[(0, 0)].clone() - constants[i].clone();
        }
    }
    for i in 0..p {
        for j in i + 1..p {
            if !weights[i][j].is_zero_value() {
                return Err(Error::Solver(format!("forward map is not lower triangular at ({}, {})", i + 1, j + 1)));
            }
        }
        if weights[i][i].is_zero_value() {
            return Err(Error::Solver(format!("forward map has a zero pivot at block {}", i + 1)));
        }
    }
    let nf = run(None, T::one());
    if nf.noise.keys().any(|k| *k != 0) {
        return Err(Error::Solver("pure autoregressive map has lagged noise terms".into()));
    }
    let noise_scale = nf.noise_at(0)[(0, 0)].clone();
    Ok(AffineStructure {
        constants,
        weights,
        noise_scale,
    })
}

/// Invert the affine structure block by block.
pub fn invert_affine<T: Field>(s: &AffineStructure<T>, phi: &[GMat<T>], load0: &GMat<T>) -> Result<(Vec<GMat<T>>, GMat<T>)> {
    let p = phi.len();
    let d = phi[0].rows;
    let eye = GMat::<T>::identity(d);
    let mut a: Vec<GMat<T>> = Vec::with_capacity(p);
    for i in 0..p {
        let mut rhs = phi[i].sub(&eye.scale(&s.constants[i]));
        for (j, aj) in a.iter().enumerate() {
            rhs = rhs.sub(&aj.scale(&s.weights[i][j]));
        }
        let piv = s.weights[i][i]
            .recip()
            .ok_or_else(|| Error::Solver(format!("zero pivot at block {}", i + 1)))?;
        a.push(rhs.scale(&piv));
    }
    let ns = s
        .noise_scale
        .recip()
        .ok_or_else(|| Error::Solver("zero noise scale".into()))?;
    Ok((a, load0.scale(&ns)))
}

/// Recover `A_1..A_p` and `B_0` from a pure-autoregressive representation.
pub fn inverse_transform_mcar(rep: &VarmaRepresentation) -> Result<McarmaCoefficients> {
    rep.validate()?;
    let o = rep.orders;
    if o.q != 0 {
        return Err(Error::Unsupported("inverse map is only defined for q = 0".into()));
    }
    if rep.noise_loadings.iter().any(|(k, v)| *k != 0 && v.iter().any(|x| *x != 0.0)) {
        return Err(Error::Unsupported("inverse map needs a single noise offset 0".into()));
    }
    let s = probe_affine_structure(o.p, &rep.step)?;
    let phi: Vec<GMat<f64>> = rep.phi_blocks.iter().map(GMat::from_dmatrix).collect();
    let load0 = rep
        .noise_loadings
        .get(&0)
        .map(GMat::from_dmatrix)
        .unwrap_or_else(|| GMat::zeros(o.d, o.m));
    let (a, b0) = invert_affine(&s, &phi, &load0)?;
    McarmaCoefficients::new(o, a.iter().map(|g| g.to_dmatrix()).collect(), vec![b0.to_dmatrix()])
}

/// Published closed forms for `p = 4`, `d = 2`, `h = 1`; the constant terms
/// act on the diagonal only.
pub fn closed_form_p4d2(phi: &[DMatrix<f64>]) -> Result<[DMatrix<f64>; 4]> {
    if phi.len() != 4 || phi.iter().any(|f| f.shape() != (2, 2)) {
        return Err(Error::Shape("closed form needs four 2x2 matrices".into()));
    }
    let eye = DMatrix::<f64>::identity(2, 2);
    let (f1, f2, f3, f4) = (&phi[0], &phi[1], &phi[2], &phi[3]);
    let a1 = -f1 - &eye;
    let a2 = -3.0 * f1 - f2 + &eye;
    let a3 = -3.0 * f1 - 2.0 * f2 - f3 - &eye;
    let a4 = -f1 - f2 - f3 - f4 + &eye;
    Ok([a1, a2, a3, a4])
}

/// Inverse in paper mode: the closed-form blocks are read as the bottom row
/// of the companion matrix, so `A_j = -alpha_j`. `B_0` is the offset-0 loading.
pub fn inverse_transform_closed_form(rep: &VarmaRepresentation) -> Result<McarmaCoefficients> {
    rep.validate()?;
    let o = rep.orders;
    if o.p != 4 || o.d != 2 || o.q != 0 || rep.step != 1.0 {
        return Err(Error::Unsupported(format!(
            "paper mode is defined for p=4, d=2, q=0, h=1 only (got p={}, d={}, q={}, h={})",
            o.p, o.d, o.q, rep.step
        )));
    }
    let alpha = closed_form_p4d2(&rep.phi_blocks)?;
    let b0 = rep
        .noise_loadings
        .get(&0)
        .cloned()
        .unwrap_or_else(|| DMatrix::zeros(o.d, o.m));
    McarmaCoefficients::from_bottom_row(o, &alpha, vec![b0])
}

// ---------------------------------------------------------------------------
// Discrepancy reporting
// ---------------------------------------------------------------------------

/// Constant weights on `x(t), x(t+1), x(t+2), x(t+3)` stated alongside the
/// published `p = 4` closed forms.
pub const PUBLISHED_PURE_STATE_CONSTANTS_P4: [i64; 4] = [4, -6, 4, -1];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderingVerdict {
    Matches,
    Reversed,
    Other,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntryDifference {
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub generic: f64,
    pub published: f64,
    pub difference: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyReport {
    pub p: usize,
    /// Oracle constants on `x(t + j h)`, `j = 0..p-1`, with `h = 1`, `A = 0`.
    pub oracle_constants: Vec<String>,
    /// Published constants on the same offsets.
    pub published_constants: Vec<i64>,
    pub ordering: OrderingVerdict,
    /// Generic inverse minus closed form, both read as `A_j`.
    pub inverse_differences: Vec<EntryDifference>,
    pub max_abs_difference: f64,
    pub consistent: bool,
}

/// Pure-state constants from the exact oracle (`h = 1`, all `A_j = 0`).
pub fn oracle_pure_state_constants(p: usize) -> Result<Vec<BigRational>> {
    let orders = ModelOrders::new(p, 0, 1, 1)?;
    let zero = GMat::<BigRational>::zeros(1, 1);
    let a = vec![zero.clone(); p];
    let beta = vec![zero; p];
    let one = BigRational::from_integer(BigInt::from(1));
    let form = symbolic_oracle(&orders, &a, &beta, &one, 10_000)?;
    Ok((0..p).map(|j| form.state_at(j)[(0, 0)].clone()).collect())
}

/// Compare the oracle's constant ordering with the published one, and the
/// generic inverse with the closed forms on `rep` (which must be `p=4, d=2, h=1`).
pub fn discrepancy_report(rep: &VarmaRepresentation) -> Result<DiscrepancyReport> {
    let p = 4;
    let oracle = oracle_pure_state_constants(p)?;
    let published: Vec<BigRational> = PUBLISHED_PURE_STATE_CONSTANTS_P4
        .iter()
        .map(|v| BigRational::from_integer(BigInt::from(*v)))
        .collect();
    let reversed: Vec<BigRational> = published.iter().rev().cloned().collect();
    let ordering = if oracle == published {
        OrderingVerdict::Matches
    } else if oracle == reversed {
        OrderingVerdict::Reversed
    } else {
        OrderingVerdict::Other
    };
    let generic = inverse_transform_mcar(rep)?;
    let closed_alpha = closed_form_p4d2(&rep.phi_blocks)?;
    let mut diffs = Vec::new();
    let mut worst = 0.0f64;
    for j in 0..p {
        for r in 0..2 {
            for c in 0..2 {
                let g = generic.a_blocks[j][(r, c)];
                let q = closed_alpha[j][(r, c)];
                worst = worst.max((g - q).abs());
                diffs.push(EntryDifference {
                    block: j + 1,
                    row: r + 1,
                    col: c + 1,
                    generic: g,
                    published: q,
                    difference: g - q,
                });
            }
        }
    }
    Ok(DiscrepancyReport {
        p,
        oracle_constants: oracle.iter().map(rational_to_string).collect(),
        published_constants: PUBLISHED_PURE_STATE_CONSTANTS_P4.to_vec(),
        consistent: ordering == OrderingVerdict::Matches && worst <= 1e-12,
        ordering,
        inverse_differences: diffs,
        max_abs_difference: worst,
    })
}

/// Exact version of [`forward_transform`] on the rational values of the
/// stored doubles.
pub fn forward_transform_exact(coeffs: &McarmaCoefficients, h: &BigRational) -> LinearForm<BigRational> {
    let a: Vec<GMat<BigRational>> = coeffs.a_blocks.iter().map(GMat::from_dmatrix_exact).collect();
    let b: Vec<GMat<BigRational>> = coeffs.b_blocks.iter().map(GMat::from_dmatrix_exact).collect();
    forward_generic(&coeffs.orders, &a, &b, h)
}

/// Exact rational step from a double (used for dyadic steps such as 1/2).
pub fn exact_step(h: f64) -> BigRational {
    rational_from_f64(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::rational;

    fn m(rows: usize, cols: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, v)
    }

    #[test]
    fn b_table_boundaries_and_rows() {
        let b = b_table(4);
        for q in 0..=4 {
            assert_eq!(b.get(0, q), 1);
            assert_eq!(b.get(q, q), 1);
        }
        assert_eq!(b.get(1, 1), 1);
        assert_eq!((b.get(1, 3), b.get(2, 3)), (3, 3));
        for q in 1..=4 {
            let alt: i64 = (0..=q).map(|n| signed(n) * b.get(n, q)).sum();
            assert_eq!(alt, 0);
        }
    }

    #[test]
    fn first_order_euler_step() {
        let o = ModelOrders::new(1, 0, 2, 2).unwrap();
        let a1 = m(2, 2, &[0.3, -0.1, 0.2, 0.8]);
        let b0 = m(2, 2, &[1.0, 0.2, 0.0, 0.5]);
        let h = 0.25;
        let rep = forward_transform(&McarmaCoefficients::new(o, vec![a1.clone()], vec![b0.clone()]).unwrap(), h).unwrap();
        let expect = DMatrix::<f64>::identity(2, 2) - h * &a1;
        assert!((&rep.phi_blocks[0] - expect).abs().max() < 1e-15);
        assert_eq!(rep.noise_loadings[&0], b0);
    }

    #[test]
    fn second_order_scalar_bootstrap() {
        // x(t+2) = (2 - a1) x(t+1) + (a1 - 1 - a2) x(t) + b0 dL(t)
        let o = ModelOrders::new(2, 0, 1, 1).unwrap();
        let (a1, a2, b0) = (rational(3, 7), rational(-2, 5), rational(5, 3));
        let g = |v: &BigRational| GMat::from_fn(1, 1, |_, _| v.clone());
        let one = rational(1, 1);
        let form = forward_generic(&o, &[g(&a1), g(&a2)], &[g(&b0)], &one);
        assert_eq!(form.state_at(1)[(0, 0)], rational(2, 1) - a1.clone());
        assert_eq!(form.state_at(0)[(0, 0)], a1.clone() - one.clone() - a2.clone());
        assert_eq!(form.noise_at(0)[(0, 0)], b0.clone());
        let beta = beta_stack(&o, &[g(&a1), g(&a2)], &[g(&b0)]);
        let oracle = symbolic_oracle(&o, &[g(&a1), g(&a2)], &beta, &one, 100).unwrap();
        assert_eq!(oracle, form);
    }

    #[test]
    fn lemma_first_step_and_second_difference() {
        let o = ModelOrders::new(3, 0, 1, 1).unwrap();
        let g = |v: i64| GMat::from_fn(1, 1, |_, _| rational(v, 1));
        let beta = vec![g(0), g(0), g(2)];
        let one = rational(1, 1);
        let f1 = lemma1_expansion(1, 1, &o, &beta, &one).unwrap();
        assert_eq!(f1.state_at(1)[(0, 0)], rational(1, 1));
        assert_eq!(f1.state_at(0)[(0, 0)], rational(-1, 1));
        let f2 = lemma1_expansion(2, 1, &o, &beta, &one).unwrap();
        let st: Vec<_> = (0..3).map(|j| f2.state_at(j)[(0, 0)].clone()).collect();
        assert_eq!(st, vec![rational(1, 1), rational(-2, 1), rational(1, 1)]);
        let half = rational(1, 2);
        let f2h = lemma1_expansion(2, 1, &o, &beta, &half).unwrap();
        for j in 0..3 {
            assert_eq!(f2h.state_at(j)[(0, 0)], f2.state_at(j)[(0, 0)].clone() * rational(4, 1));
        }
    }

    #[test]
    fn lemma_noise_term_uses_beta_p_minus_1() {
        let o = ModelOrders::new(3, 2, 1, 1).unwrap();
        let g = |v: i64| GMat::from_fn(1, 1, |_, _| rational(v, 1));
        let beta = vec![g(5), g(7), g(11)];
        let one = rational(1, 1);
        let f1 = lemma1_expansion(1, 1, &o, &beta, &one).unwrap();
        assert_eq!(f1.noise_at(0)[(0, 0)], rational(-5, 1));
    }

    #[test]
    fn zero_phi_closed_form_constants() {
        let z = vec![DMatrix::<f64>::zeros(2, 2); 4];
        let a = closed_form_p4d2(&z).unwrap();
        let eye = DMatrix::<f64>::identity(2, 2);
        assert_eq!(a[0], -&eye);
        assert_eq!(a[1], eye.clone());
        assert_eq!(a[2], -&eye);
        assert_eq!(a[3], eye);
    }

    #[test]
    fn p1_inverse_exact() {
        let o = ModelOrders::new(1, 0, 2, 1).unwrap();
        let a1 = m(2, 2, &[0.5, 0.25, -0.125, 1.0]);
        let c = McarmaCoefficients::new(o, vec![a1.clone()], vec![m(2, 1, &[1.0, 2.0])]).unwrap();
        let rep = forward_transform(&c, 1.0).unwrap();
        let back = inverse_transform_mcar(&rep).unwrap();
        assert_eq!(back.a_blocks[0], a1);
    }

    #[test]
    fn oracle_constants_are_reversed_against_published() {
        let c = oracle_pure_state_constants(4).unwrap();
        let as_int: Vec<String> = c.iter().map(rational_to_string).collect();
        assert_eq!(as_int, vec!["-1", "4", "-6", "4"]);
    }

    #[test]
    fn q_positive_inverse_is_unsupported() {
        let o = ModelOrders::new(2, 1, 1, 1).unwrap();
        let rep = VarmaRepresentation {
            orders: o,
            step: 1.0,
            phi_blocks: vec![m(1, 1, &[0.1]), m(1, 1, &[0.1])],
            noise_loadings: BTreeMap::new(),
        };
        assert!(matches!(inverse_transform_mcar(&rep), Err(Error::Unsupported(_))));
    }
}
