//! Exact substitution oracle for the discretized state space.
//!
//! Starts from the Euler step of the last (autoregressive) block and replaces
//! every higher-block state by the difference quotient of the block below it,
//! until only first-block states and noise increments remain. No closed-form
//! coefficient is used; the output serves as ground truth for
//! [`super::forward_from_stack`].

use super::LinearForm;
use crate::core_model::ModelOrders;
use crate::error::{Error, Result};
use crate::ring::{GMat, Ring};
use num_rational::BigRational;
use num_traits::{One, Zero};
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Var {
    State { idx: usize, off: usize },
    Noise { r: usize, off: usize },
}

type Expr<T> = BTreeMap<Var, T>;

fn add_term<T: Ring>(e: &mut Expr<T>, v: Var, c: T) {
    if c.is_zero_value() {
        return;
    }
    let slot = e.entry(v).or_insert_with(T::zero);
    *slot = slot.clone() + c;
    if slot.is_zero_value() {
        e.remove(&v);
    }
}

/// Linear form for `x(t + p h)` in terms of `x(t + j h)` (j < p) and
/// `Delta L(t + j h)`, derived by literal backward substitution.
///
/// `beta` is the stacked loading `beta_1..beta_p`; its entries may be
/// arbitrary ring elements (symbols included).
pub fn symbolic_oracle<T: Ring>(
    orders: &ModelOrders,
    a: &[GMat<T>],
    beta: &[GMat<T>],
    h: &BigRational,
    budget: usize,
) -> Result<LinearForm<T>> {
    let (p, d, m) = (orders.p, orders.d, orders.m);
    if h.is_zero() {
        return Err(Error::Validation("step must be nonzero".into()));
    }
    if a.len() != p || beta.len() != p {
        return Err(Error::Shape("oracle needs p A-blocks and p beta-blocks".into()));
    }
    let ht = T::from_rational(h);
    let hinv = T::from_rational(&(<BigRational as One>::one() / h));
    let mut form = LinearForm::<T>::zeros(d, d, m);
    let mut steps = 0usize;

    for k in 0..d {
        let top = (p - 1) * d + k;
        let mut e: Expr<T> = BTreeMap::new();
        add_term(&mut e, Var::State { idx: top, off: 1 }, T::one());
        add_term(&mut e, Var::State { idx: top, off: 0 }, -T::one());
        for j in 1..=p {
            for s in 0..d {
                add_term(
                    &mut e,
                    Var::State {
                        idx: (p - j) * d + s,
                        off: 0,
                    },
                    ht.clone() * a[j - 1][(k, s)].clone(),
                );
            }
        }
        for r in 0..m {
            add_term(&mut e, Var::Noise { r, off: 0 }, -beta[p - 1][(k, r)].clone());
        }

        loop {
            let next = e
                .iter()
                .filter_map(|(v, c)| match v {
                    Var::State { idx, off } if *idx >= d => Some((*idx, *off, c.clone())),
                    _ => None,
                })
                .max_by_key(|(idx, off, _)| (*idx, *off));
            let Some((idx, off, coef)) = next else { break };
            steps += 1;
            if steps > budget {
                return Err(Error::Numeric(format!("oracle substitution budget {} exceeded", budget)));
            }
            e.remove(&Var::State { idx, off });
            let lower = idx - d;
            let blk = lower / d;
            let row = lower % d;
            let c = coef * hinv.clone();
            add_term(&mut e, Var::State { idx: lower, off: off + 1 }, c.clone());
            add_term(&mut e, Var::State { idx: lower, off }, -c.clone());
            for r in 0..m {
                add_term(&mut e, Var::Noise { r, off }, -(c.clone() * beta[blk][(row, r)].clone()));
            }
        }

        // Normalize so the coefficient of x_k(t + p h) is one.
        let mut scale = T::one();
        for _ in 1..p {
            scale = scale * ht.clone();
        }
        let lead = e
            .remove(&Var::State { idx: k, off: p })
            .ok_or_else(|| Error::Numeric("lead term vanished during substitution".into()))?;
        if lead.clone() * scale.clone() != T::one() {
            return Err(Error::Numeric(format!("unexpected lead coefficient {:?}", lead)));
        }
        for (v, c) in e {
            let val = -(c * scale.clone());
            match v {
                Var::State { idx, off } => {
                    debug_assert!(idx < d && off < p);
                    let mat = form.state.entry(off).or_insert_with(|| GMat::zeros(d, d));
                    mat[(k, idx)] = mat[(k, idx)].clone() + val;
                }
                Var::Noise { r, off } => {
                    let mat = form.noise.entry(off).or_insert_with(|| GMat::zeros(d, m));
                    mat[(k, r)] = mat[(k, r)].clone() + val;
                }
            }
        }
    }
    form.prune();
    Ok(form)
}
