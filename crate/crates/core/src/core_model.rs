//! Model orders, the MCARMA companion state space, index bookkeeping and
//! stationarity checks for the continuous and discrete representations.

use crate::error::{Error, Result};
use crate::ring::{GMat, Ring};
use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// The integer quadruple `(p, q, d, m)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelOrders {
    pub p: usize,
    pub q: usize,
    pub d: usize,
    pub m: usize,
}

impl ModelOrders {
    pub fn new(p: usize, q: usize, d: usize, m: usize) -> Result<Self> {
        let o = ModelOrders { p, q, d, m };
        o.validate()?;
        Ok(o)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.d == 0 || self.m == 0 {
            return Err(Error::Validation(format!(
                "orders must satisfy p, d, m >= 1 (got p={}, d={}, m={})",
                self.p, self.d, self.m
            )));
        }
        if self.q >= self.p {
            return Err(Error::Validation(format!(
                "orders must satisfy p > q (got p={}, q={})",
                self.p, self.q
            )));
        }
        Ok(())
    }
}

/// Autoregressive blocks `A_1..A_p` (d x d) and moving-average blocks
/// `B_0..B_q` (d x m).
#[derive(Clone, Debug, PartialEq)]
pub struct McarmaCoefficients {
    pub orders: ModelOrders,
    pub a_blocks: Vec<DMatrix<f64>>,
    pub b_blocks: Vec<DMatrix<f64>>,
}

impl McarmaCoefficients {
    pub fn new(orders: ModelOrders, a_blocks: Vec<DMatrix<f64>>, b_blocks: Vec<DMatrix<f64>>) -> Result<Self> {
        let c = McarmaCoefficients {
            orders,
            a_blocks,
            b_blocks,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let o = &self.orders;
        o.validate()?;
        if self.a_blocks.len() != o.p {
            return Err(Error::Shape(format!("expected {} A-blocks, got {}", o.p, self.a_blocks.len())));
        }
        if self.b_blocks.len() != o.q + 1 {
            return Err(Error::Shape(format!(
                "expected {} B-blocks, got {}",
                o.q + 1,
                self.b_blocks.len()
            )));
        }
        for (j, a) in self.a_blocks.iter().enumerate() {
            if a.shape() != (o.d, o.d) {
                return Err(Error::Shape(format!("A_{} has shape {:?}, expected ({}, {})", j + 1, a.shape(), o.d, o.d)));
            }
            if a.iter().any(|x| !x.is_finite()) {
                return Err(Error::Validation(format!("A_{} has non-finite entries", j + 1)));
            }
        }
        for (j, b) in self.b_blocks.iter().enumerate() {
            if b.shape() != (o.d, o.m) {
                return Err(Error::Shape(format!("B_{} has shape {:?}, expected ({}, {})", j, b.shape(), o.d, o.m)));
            }
            if b.iter().any(|x| !x.is_finite()) {
                return Err(Error::Validation(format!("B_{} has non-finite entries", j)));
            }
        }
        Ok(())
    }

    /// Coefficients whose companion bottom row equals the given blocks,
    /// i.e. `A_j = -bottom_j`. Published estimates are usually displayed this way.
    pub fn from_bottom_row(orders: ModelOrders, bottom: &[DMatrix<f64>], b_blocks: Vec<DMatrix<f64>>) -> Result<Self> {
        Self::new(orders, bottom.iter().map(|m| -m).collect(), b_blocks)
    }

    /// The blocks as they appear in the bottom row of the companion matrix.
    pub fn bottom_row_blocks(&self) -> Vec<DMatrix<f64>> {
        self.a_blocks.iter().map(|m| -m).collect()
    }
}

/// The state space `(A, beta, C)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CompanionSystem {
    pub orders: ModelOrders,
    pub a: DMatrix<f64>,
    pub beta: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

impl CompanionSystem {
    /// The d x d block at block position (row, col), zero based.
    pub fn a_block(&self, row: usize, col: usize) -> DMatrix<f64> {
        let d = self.orders.d;
        self.a.view((row * d, col * d), (d, d)).into_owned()
    }
}

/// Stacked noise loadings `beta_1..beta_p` from the moving-average recursion,
/// over any ring. Blocks are returned in order `beta_1..beta_p`.
pub fn beta_stack<T: Ring>(orders: &ModelOrders, a: &[GMat<T>], b: &[GMat<T>]) -> Vec<GMat<T>> {
    let (p, q, d, m) = (orders.p, orders.q, orders.d, orders.m);
    let mut beta: Vec<GMat<T>> = (0..p).map(|_| GMat::zeros(d, m)).collect();
    // beta_{p-kappa} for kappa = q down to 0; beta index n = p - kappa is 1-based.
    for kappa in (0..=q).rev() {
        let n = p - kappa;
        let mut acc = GMat::zeros(d, m);
        for i in 1..n {
            acc = acc.add(&a[i - 1].matmul(&beta[n - i - 1]));
        }
        beta[n - 1] = b[q - kappa].sub(&acc);
    }
    beta
}

pub fn assemble_companion(coeffs: &McarmaCoefficients) -> Result<CompanionSystem> {
    coeffs.validate()?;
    let o = coeffs.orders;
    let (p, d, m) = (o.p, o.d, o.m);
    let n = p * d;
    let mut a = DMatrix::<f64>::zeros(n, n);
    for blk in 0..p.saturating_sub(1) {
        for k in 0..d {
            a[(blk * d + k, (blk + 1) * d + k)] = 1.0;
        }
    }
    for j in 1..=p {
        let col = (p - j) * d;
        let aj = &coeffs.a_blocks[j - 1];
        for r in 0..d {
            for c in 0..d {
                a[((p - 1) * d + r, col + c)] = -aj[(r, c)];
            }
        }
    }
    let ga: Vec<GMat<f64>> = coeffs.a_blocks.iter().map(GMat::from_dmatrix).collect();
    let gb: Vec<GMat<f64>> = coeffs.b_blocks.iter().map(GMat::from_dmatrix).collect();
    let stack = beta_stack(&o, &ga, &gb);
    let mut beta = DMatrix::<f64>::zeros(n, m);
    for (blk, bm) in stack.iter().enumerate() {
        for r in 0..d {
            for c in 0..m {
                beta[(blk * d + r, c)] = bm[(r, c)];
            }
        }
    }
    let mut c = DMatrix::<f64>::zeros(d, n);
    for k in 0..d {
        c[(k, k)] = 1.0;
    }
    Ok(CompanionSystem { orders: o, a, beta, c })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Collection {
    Solution,
    Recursive,
    Autoregressive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexClassification {
    pub sde_index: usize,
    pub block: usize,
    pub collection: Collection,
}

/// Block and collection of SDE index `i` (1-based). With `p = 1` the single
/// block is both first and last; it is reported as autoregressive.
pub fn classify_index(i: usize, orders: &ModelOrders) -> Result<IndexClassification> {
    let (p, d) = (orders.p, orders.d);
    if i == 0 || i > p * d {
        return Err(Error::Validation(format!("SDE index {} outside 1..={}", i, p * d)));
    }
    let block = i.div_ceil(d);
    let collection = if block == p {
        Collection::Autoregressive
    } else if block == 1 {
        Collection::Solution
    } else {
        Collection::Recursive
    };
    Ok(IndexClassification {
        sde_index: i,
        block,
        collection,
    })
}

/// `Q_i^{(l)} = (l - i) d + k`.
pub fn recursive_parameter(i: usize, l: usize, k: usize, orders: &ModelOrders) -> Result<usize> {
    let (p, d) = (orders.p, orders.d);
    if !(1..=d).contains(&k) || !(1..=p).contains(&l) || !(1..=l).contains(&i) || (l == p && i == 1 && p > 1) {
        return Err(Error::Validation(format!(
            "recursive parameter needs 1<=k<=d, 1<=l<=p, 1<=i<=l and i>1 when l=p (got i={i}, l={l}, k={k}, p={p}, d={d})"
        )));
    }
    Ok((l - i) * d + k)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbMode {
    /// Add the shift to every entry of each bottom-row block.
    EveryEntry,
    /// Add the shift to the diagonal of each bottom-row block.
    DiagonalOnly,
}

/// Shift the bottom block row of the companion matrix by `rho`.
pub fn perturb_companion(sys: &CompanionSystem, rho: f64, mode: PerturbMode) -> CompanionSystem {
    let (p, d) = (sys.orders.p, sys.orders.d);
    let mut out = sys.clone();
    for blk in 0..p {
        for r in 0..d {
            for c in 0..d {
                if mode == PerturbMode::EveryEntry || r == c {
                    out.a[((p - 1) * d + r, blk * d + c)] += rho;
                }
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    /// Eigenvalues as `[re, im]`, sorted by real part then imaginary part.
    pub eigenvalues: Vec<[f64; 2]>,
    pub moduli: Vec<f64>,
    pub stationary: bool,
}

impl StationarityReport {
    pub fn complex(&self) -> Vec<Complex<f64>> {
        self.eigenvalues.iter().map(|e| Complex::new(e[0], e[1])).collect()
    }
}

pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    if m.nrows() != m.ncols() {
        return Err(Error::Shape(format!("eigenvalues need a square matrix, got {:?}", m.shape())));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("matrix has non-finite entries".into()));
    }
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), f64::EPSILON, 100_000)
        .ok_or_else(|| Error::Numeric("Schur iteration did not converge".into()))?;
    let mut ev: Vec<Complex<f64>> = schur.complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(ev)
}

fn report(ev: Vec<Complex<f64>>, stationary: bool) -> StationarityReport {
    StationarityReport {
        moduli: ev.iter().map(|z| z.norm()).collect(),
        eigenvalues: ev.iter().map(|z| [z.re, z.im]).collect(),
        stationary,
    }
}

/// Continuous-time check: every eigenvalue of `A` has strictly negative real part.
pub fn mcarma_stationarity(sys: &CompanionSystem) -> Result<StationarityReport> {
    let ev = eigenvalues(&sys.a)?;
    let ok = ev.iter().all(|z| z.re < 0.0);
    Ok(report(ev, ok))
}

/// Discrete representation: lag coefficients `phi_1..phi_p` on
/// `x(t+(p-1)h) .. x(t)` and noise loadings keyed by the offset `j` of
/// `Delta L(t + j h)`.
#[derive(Clone, Debug, PartialEq)]
pub struct VarmaRepresentation {
    pub orders: ModelOrders,
    pub step: f64,
    pub phi_blocks: Vec<DMatrix<f64>>,
    pub noise_loadings: BTreeMap<usize, DMatrix<f64>>,
}

impl VarmaRepresentation {
    pub fn validate(&self) -> Result<()> {
        let o = &self.orders;
        o.validate()?;
        if !(self.step > 0.0 && self.step <= 1.0) {
            return Err(Error::Validation(format!("step must lie in (0, 1], got {}", self.step)));
        }
        if self.phi_blocks.len() != o.p {
            return Err(Error::Shape(format!("expected {} phi-blocks, got {}", o.p, self.phi_blocks.len())));
        }
        for (j, f) in self.phi_blocks.iter().enumerate() {
            if f.shape() != (o.d, o.d) {
                return Err(Error::Shape(format!("phi_{} has shape {:?}", j + 1, f.shape())));
            }
        }
        for (off, l) in &self.noise_loadings {
            if *off >= o.p {
                return Err(Error::Shape(format!("noise offset {} exceeds p-1 = {}", off, o.p - 1)));
            }
            if l.shape() != (o.d, o.m) {
                return Err(Error::Shape(format!("noise loading at offset {} has shape {:?}", off, l.shape())));
            }
        }
        Ok(())
    }
}

/// Akaike state space matrix: identity super-diagonal blocks, bottom row
/// `[phi_p .. phi_1]`.
pub fn akaike_f(phi: &[DMatrix<f64>]) -> DMatrix<f64> {
    let p = phi.len();
    let d = phi[0].nrows();
    let n = p * d;
    let mut f = DMatrix::<f64>::zeros(n, n);
    for blk in 0..p.saturating_sub(1) {
        for k in 0..d {
            f[(blk * d + k, (blk + 1) * d + k)] = 1.0;
        }
    }
    for j in 1..=p {
        let col = (p - j) * d;
        for r in 0..d {
            for c in 0..d {
                f[((p - 1) * d + r, col + c)] = phi[j - 1][(r, c)];
            }
        }
    }
    f
}

/// Discrete-time check: every eigenvalue of the Akaike matrix lies strictly
/// inside the unit circle.
pub fn var_stationarity(rep: &VarmaRepresentation) -> Result<StationarityReport> {
    if rep.phi_blocks.len() != rep.orders.p {
        return Err(Error::Shape("phi-block count differs from p".into()));
    }
    let ev = eigenvalues(&akaike_f(&rep.phi_blocks))?;
    let ok = ev.iter().all(|z| z.norm() < 1.0);
    Ok(report(ev, ok))
}

// ---------------------------------------------------------------------------
// JSON formats
// ---------------------------------------------------------------------------

pub fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

pub fn matrix_from_rows(rows: &[Vec<f64>], shape: (usize, usize), what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != shape.0 || rows.iter().any(|r| r.len() != shape.1) {
        return Err(Error::Shape(format!("{} must be {}x{}", what, shape.0, shape.1)));
    }
    Ok(DMatrix::from_fn(shape.0, shape.1, |i, j| rows[i][j]))
}

/// How `A_blocks` in a model file are to be read.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockConvention {
    /// The blocks are `A_1..A_p`; the companion bottom row is `-A_p .. -A_1`.
    #[default]
    Coefficients,
    /// The blocks are the companion bottom-row entries, i.e. `-A_1..-A_p`.
    BottomRow,
}

impl BlockConvention {
    fn is_default(&self) -> bool {
        *self == BlockConvention::Coefficients
    }
}

/// On-disk model coefficient document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub orders: ModelOrders,
    #[serde(default, skip_serializing_if = "BlockConvention::is_default")]
    pub convention: BlockConvention,
    #[serde(rename = "A_blocks")]
    pub a_blocks: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "B_blocks")]
    pub b_blocks: Vec<Vec<Vec<f64>>>,
}

impl From<&McarmaCoefficients> for ModelFile {
    fn from(c: &McarmaCoefficients) -> Self {
        ModelFile {
            orders: c.orders,
            convention: BlockConvention::Coefficients,
            a_blocks: c.a_blocks.iter().map(rows_of).collect(),
            b_blocks: c.b_blocks.iter().map(rows_of).collect(),
        }
    }
}

impl ModelFile {
    /// The same coefficients written with bottom-row blocks.
    pub fn bottom_row(c: &McarmaCoefficients) -> Self {
        ModelFile {
            orders: c.orders,
            convention: BlockConvention::BottomRow,
            a_blocks: c.bottom_row_blocks().iter().map(rows_of).collect(),
            b_blocks: c.b_blocks.iter().map(rows_of).collect(),
        }
    }

    pub fn to_coefficients(&self) -> Result<McarmaCoefficients> {
        let o = self.orders;
        o.validate()?;
        let a = self
            .a_blocks
            .iter()
            .enumerate()
            .map(|(j, r)| matrix_from_rows(r, (o.d, o.d), &format!("A_{}", j + 1)))
            .collect::<Result<Vec<_>>>()?;
        let b = self
            .b_blocks
            .iter()
            .enumerate()
            .map(|(j, r)| matrix_from_rows(r, (o.d, o.m), &format!("B_{}", j)))
            .collect::<Result<Vec<_>>>()?;
        match self.convention {
            BlockConvention::Coefficients => McarmaCoefficients::new(o, a, b),
            BlockConvention::BottomRow => McarmaCoefficients::from_bottom_row(o, &a, b),
        }
    }
}

/// On-disk discrete representation document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepresentationFile {
    pub orders: ModelOrders,
    pub step: f64,
    pub phi_blocks: Vec<Vec<Vec<f64>>>,
    pub noise_loadings: BTreeMap<String, Vec<Vec<f64>>>,
}

impl From<&VarmaRepresentation> for RepresentationFile {
    fn from(r: &VarmaRepresentation) -> Self {
        RepresentationFile {
            orders: r.orders,
            step: r.step,
            phi_blocks: r.phi_blocks.iter().map(rows_of).collect(),
            noise_loadings: r.noise_loadings.iter().map(|(k, v)| (k.to_string(), rows_of(v))).collect(),
        }
    }
}

impl RepresentationFile {
    pub fn to_representation(&self) -> Result<VarmaRepresentation> {
        let o = self.orders;
        o.validate()?;
        let phi = self
            .phi_blocks
            .iter()
            .enumerate()
            .map(|(j, r)| matrix_from_rows(r, (o.d, o.d), &format!("phi_{}", j + 1)))
            .collect::<Result<Vec<_>>>()?;
        let mut loads = BTreeMap::new();
        for (k, v) in &self.noise_loadings {
            let off: usize = k
                .parse()
                .map_err(|_| Error::Validation(format!("noise offset key {:?} is not an integer", k)))?;
            loads.insert(off, matrix_from_rows(v, (o.d, o.m), &format!("noise loading {}", k))?);
        }
        let rep = VarmaRepresentation {
            orders: o,
            step: self.step,
            phi_blocks: phi,
            noise_loadings: loads,
        };
        rep.validate()?;
        Ok(rep)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, v)
    }

    #[test]
    fn single_block_companion() {
        let o = ModelOrders::new(1, 0, 2, 2).unwrap();
        let a1 = m(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b0 = m(2, 2, &[0.5, 0.0, 0.1, 0.7]);
        let sys = assemble_companion(&McarmaCoefficients::new(o, vec![a1.clone()], vec![b0.clone()]).unwrap()).unwrap();
        assert_eq!(sys.a, -a1);
        assert_eq!(sys.beta, b0);
        assert_eq!(sys.c, DMatrix::identity(2, 2));
    }

    #[test]
    fn beta_recursion_p2_q1() {
        let o = ModelOrders::new(2, 1, 1, 1).unwrap();
        let (a1, a2, b0, b1) = (0.7, 0.2, 1.5, -0.4);
        let c = McarmaCoefficients::new(o, vec![m(1, 1, &[a1]), m(1, 1, &[a2])], vec![m(1, 1, &[b0]), m(1, 1, &[b1])]).unwrap();
        let sys = assemble_companion(&c).unwrap();
        assert_eq!(sys.beta[(0, 0)], b0);
        assert!((sys.beta[(1, 0)] - (b1 - a1 * b0)).abs() < 1e-15);
    }

    #[test]
    fn classification_examples() {
        let o = ModelOrders::new(3, 0, 2, 2).unwrap();
        assert_eq!(classify_index(1, &o).unwrap().collection, Collection::Solution);
        let last = classify_index(6, &o).unwrap();
        assert_eq!((last.block, last.collection), (3, Collection::Autoregressive));
        let o4 = ModelOrders::new(4, 0, 2, 2).unwrap();
        let r = classify_index(3, &o4).unwrap();
        assert_eq!((r.block, r.collection), (2, Collection::Recursive));
        assert!(classify_index(0, &o).is_err());
        assert!(classify_index(7, &o).is_err());
    }

    #[test]
    fn recursive_parameter_examples() {
        let o = ModelOrders::new(4, 0, 2, 2).unwrap();
        assert_eq!(recursive_parameter(1, 1, 1, &o).unwrap(), 1);
        assert_eq!(recursive_parameter(2, 4, 2, &o).unwrap(), 6);
        assert_eq!(recursive_parameter(4, 4, 2, &o).unwrap(), 2);
        assert!(recursive_parameter(1, 4, 1, &o).is_err());
        assert!(recursive_parameter(1, 2, 3, &o).is_err());
    }

    #[test]
    fn negative_identity_is_stationary() {
        let o = ModelOrders::new(3, 0, 2, 1).unwrap();
        let sys = CompanionSystem {
            orders: o,
            a: -DMatrix::<f64>::identity(6, 6),
            beta: DMatrix::zeros(6, 1),
            c: DMatrix::zeros(2, 6),
        };
        let r = mcarma_stationarity(&sys).unwrap();
        assert!(r.stationary);
        assert!(r.eigenvalues.iter().all(|e| (e[0] + 1.0).abs() < 1e-12 && e[1].abs() < 1e-12));
    }

    #[test]
    fn var_white_noise_and_unit_root() {
        let o = ModelOrders::new(1, 0, 2, 2).unwrap();
        let mut rep = VarmaRepresentation {
            orders: o,
            step: 1.0,
            phi_blocks: vec![DMatrix::zeros(2, 2)],
            noise_loadings: BTreeMap::new(),
        };
        assert!(var_stationarity(&rep).unwrap().stationary);
        rep.phi_blocks[0] = DMatrix::identity(2, 2);
        assert!(!var_stationarity(&rep).unwrap().stationary);
    }

    #[test]
    fn orders_validation() {
        assert!(ModelOrders::new(2, 2, 1, 1).is_err());
        assert!(ModelOrders::new(0, 0, 1, 1).is_err());
        assert!(ModelOrders::new(1, 0, 0, 1).is_err());
    }
}
