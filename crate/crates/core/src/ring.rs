//! Minimal ring abstraction so the coefficient maps run in `f64`, exact
//! rationals, or symbolic polynomials with the same code.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

pub trait Ring:
    Clone + PartialEq + Debug + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_rational(r: &BigRational) -> Self;
    fn is_zero_value(&self) -> bool;

    fn from_i64(v: i64) -> Self {
        Self::from_rational(&BigRational::from_integer(BigInt::from(v)))
    }

    fn sum(items: impl IntoIterator<Item = Self>) -> Self {
        items.into_iter().fold(Self::zero(), |acc, x| acc + x)
    }
}

impl Ring for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_rational(r: &BigRational) -> Self {
        r.to_f64().unwrap_or(f64::NAN)
    }
    fn is_zero_value(&self) -> bool {
        *self == 0.0
    }

    /// Neumaier compensated summation.
    fn sum(items: impl IntoIterator<Item = Self>) -> Self {
        let mut s = 0.0f64;
        let mut c = 0.0f64;
        for x in items {
            let t = s + x;
            if s.abs() >= x.abs() {
                c += (s - t) + x;
            } else {
                c += (x - t) + s;
            }
            s = t;
        }
        s + c
    }
}

impl Ring for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn from_rational(r: &BigRational) -> Self {
        r.clone()
    }
    fn is_zero_value(&self) -> bool {
        Zero::is_zero(self)
    }
}

/// A [`Ring`] with division by nonzero elements.
pub trait Field: Ring {
    fn recip(&self) -> Option<Self>;
}

impl Field for f64 {
    fn recip(&self) -> Option<Self> {
        (*self != 0.0).then(|| 1.0 / self)
    }
}

impl Field for BigRational {
    fn recip(&self) -> Option<Self> {
        (!Zero::is_zero(self)).then(|| <BigRational as One>::one() / self.clone())
    }
}

/// Exact rational from an `f64` (every finite double is a dyadic rational).
pub fn rational_from_f64(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite value")
}

pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn rational_to_string(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn rational_abs(r: &BigRational) -> BigRational {
    r.abs()
}

/// Dense row-major matrix over a [`Ring`].
#[derive(Clone, Debug, PartialEq)]
pub struct GMat<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Ring> GMat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        GMat {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        GMat { rows, cols, data }
    }

    pub fn scale(&self, s: &T) -> Self {
        GMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| s.clone() * x.clone()).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        GMat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a.clone() + b.clone())
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&-T::one()))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        GMat::from_fn(self.rows, other.cols, |i, j| {
            T::sum((0..self.cols).map(|k| self[(i, k)].clone() * other[(k, j)].clone()))
        })
    }

    pub fn map<U: Ring>(&self, f: impl Fn(&T) -> U) -> GMat<U> {
        GMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl<T> std::ops::Index<(usize, usize)> for GMat<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for GMat<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

impl GMat<f64> {
    pub fn from_dmatrix(m: &DMatrix<f64>) -> Self {
        GMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

impl GMat<BigRational> {
    pub fn from_dmatrix_exact(m: &DMatrix<f64>) -> Self {
        GMat::from_fn(m.nrows(), m.ncols(), |i, j| rational_from_f64(m[(i, j)]))
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| f64::from_rational(&self[(i, j)]))
    }
}
