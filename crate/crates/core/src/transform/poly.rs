//! Sparse multivariate polynomials with exact rational coefficients.

use crate::ring::{rational_to_string, Ring};
use num_rational::BigRational;
use num_traits::{One, Zero};
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

/// Monomial as sorted `(variable, exponent)` pairs.
pub type Monomial = Vec<(u32, u32)>;

#[derive(Clone, PartialEq, Eq, Default)]
pub struct Poly {
    terms: BTreeMap<Monomial, BigRational>,
}

impl Poly {
    pub fn var(v: u32) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(vec![(v, 1)], <BigRational as One>::one());
        Poly { terms }
    }

    pub fn constant(c: BigRational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Vec::new(), c);
        }
        Poly { terms }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    /// Constant term, or `None` when the polynomial has non-constant terms.
    pub fn as_constant(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(<BigRational as Zero>::zero()),
            1 => self.terms.get(&Vec::new()).cloned(),
            _ => None,
        }
    }

    pub fn eval(&self, values: &dyn Fn(u32) -> BigRational) -> BigRational {
        let mut acc = <BigRational as Zero>::zero();
        for (mono, c) in &self.terms {
            let mut t = c.clone();
            for &(v, e) in mono {
                let x = values(v);
                for _ in 0..e {
                    t *= &x;
                }
            }
            acc += t;
        }
        acc
    }

    fn insert(&mut self, mono: Monomial, c: BigRational) {
        use std::collections::btree_map::Entry;
        if c.is_zero() {
            return;
        }
        match self.terms.entry(mono) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }
}

fn mono_mul(a: &Monomial, b: &Monomial) -> Monomial {
    let mut out: BTreeMap<u32, u32> = BTreeMap::new();
    for &(v, e) in a.iter().chain(b.iter()) {
        *out.entry(v).or_insert(0) += e;
    }
    out.into_iter().collect()
}

impl Add for Poly {
    type Output = Poly;
    fn add(mut self, rhs: Poly) -> Poly {
        for (m, c) in rhs.terms {
            self.insert(m, c);
        }
        self
    }
}

impl Neg for Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly {
            terms: self.terms.into_iter().map(|(m, c)| (m, -c)).collect(),
        }
    }
}

impl Sub for Poly {
    type Output = Poly;
    fn sub(self, rhs: Poly) -> Poly {
        self + (-rhs)
    }
}

impl Mul for Poly {
    type Output = Poly;
    fn mul(self, rhs: Poly) -> Poly {
        let mut out = Poly::default();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.insert(mono_mul(ma, mb), ca * cb);
            }
        }
        out
    }
}

impl Ring for Poly {
    fn zero() -> Self {
        Poly::default()
    }
    fn one() -> Self {
        Poly::constant(<BigRational as One>::one())
    }
    fn from_rational(r: &BigRational) -> Self {
        Poly::constant(r.clone())
    }
    fn is_zero_value(&self) -> bool {
        self.terms.is_empty()
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(m, c)| {
                let vars: Vec<String> = m
                    .iter()
                    .map(|(v, e)| if *e == 1 { format!("v{v}") } else { format!("v{v}^{e}") })
                    .collect();
                if vars.is_empty() {
                    rational_to_string(c)
                } else {
                    format!("{}*{}", rational_to_string(c), vars.join("*"))
                }
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}
