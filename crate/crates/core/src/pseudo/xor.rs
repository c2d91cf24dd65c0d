//! Random 4-XOR instances, sign propagation over symmetric differences, and
//! the resulting parity pseudo-expectation.
//!
//! Sets of variables are bitmasks (`bit v-1` for variable `v`), so `n ≤ 64`.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::{hermite_coefficients, MultisetIndex};
use crate::poly::MonomialPoly;

pub type VarSet = u64;

pub fn set_of(vars: &[u32]) -> VarSet {
    vars.iter().fold(0, |acc, &v| acc | (1u64 << (v - 1)))
}

pub fn vars_of(set: VarSet) -> Vec<u32> {
    (0..64).filter(|b| set >> b & 1 == 1).map(|b| b + 1).collect()
}

fn size(set: VarSet) -> usize {
    set.count_ones() as usize
}

/// `x_{vars} = sign`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct XorEquation {
    pub vars: Vec<u32>,
    pub sign: i8,
}

impl XorEquation {
    pub fn new(mut vars: Vec<u32>, sign: i8) -> Result<Self> {
        vars.sort_unstable();
        let distinct = vars.windows(2).all(|w| w[0] < w[1]);
        if vars.len() != 4 || !distinct || vars[0] == 0 || vars[3] > 64 {
            return Err(Error::InvalidParameter(format!(
                "an equation needs 4 distinct variables in 1..=64, got {vars:?}"
            )));
        }
        if sign != 1 && sign != -1 {
            return Err(Error::InvalidParameter(format!("sign must be ±1, got {sign}")));
        }
        Ok(XorEquation { vars, sign })
    }

    pub fn set(&self) -> VarSet {
        set_of(&self.vars)
    }
}

/// `m` distinct random 4-sets of `1..=n` with random signs.
pub fn xor_instance(n: usize, m: usize, seed: u64) -> Result<Vec<XorEquation>> {
    if !(4..=64).contains(&n) {
        return Err(Error::InvalidParameter(format!("n must be in 4..=64, got {n}")));
    }
    let available = (n * (n - 1) * (n - 2) * (n - 3) / 24) as u128;
    if m as u128 > available {
        return Err(Error::InvalidParameter(format!("only {available} distinct 4-sets exist for n = {n}")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(m);
    while out.len() < m {
        let mut vars: Vec<u32> = Vec::with_capacity(4);
        while vars.len() < 4 {
            let v = rng.random_range(1..=n as u32);
            if !vars.contains(&v) {
                vars.push(v);
            }
        }
        let sign = if rng.random::<bool>() { 1 } else { -1 };
        let eq = XorEquation::new(vars, sign)?;
        if seen.insert(eq.set()) {
            out.push(eq);
        }
    }
    Ok(out)
}

/// `p = Σ −b_I x_I`.
pub fn xor_polynomial(equations: &[XorEquation], n: usize) -> Result<MonomialPoly<BigRational>> {
    let mut terms = Vec::with_capacity(equations.len());
    for eq in equations {
        let index = MultisetIndex::from_vars(&eq.vars)?;
        terms.push((index, BigRational::from_integer(BigInt::from(-eq.sign))));
    }
    MonomialPoly::from_terms(n, terms)
}

/// Every assigned sign after propagation, including `b_∅ = 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Closure {
    pub d: usize,
    pub signs: HashMap<VarSet, i8>,
    /// Sets in the order they were assigned.
    pub order: Vec<VarSet>,
}

impl Closure {
    pub fn sign(&self, set: VarSet) -> Option<i8> {
        self.signs.get(&set).copied()
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Assignments sorted canonically (by size, then variables).
    pub fn sorted(&self) -> Vec<(Vec<u32>, i8)> {
        let mut v: Vec<(Vec<u32>, i8)> = self.signs.iter().map(|(&s, &b)| (vars_of(s), b)).collect();
        v.sort_by(|a, b| (a.0.len(), &a.0).cmp(&(b.0.len(), &b.0)));
        v
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ClosureOutcome {
    Closed(Closure),
    /// `set` was forced to both signs.
    Contradiction {
        set: Vec<u32>,
        assigned: i8,
        forced: i8,
    },
}

impl ClosureOutcome {
    pub fn is_contradiction(&self) -> bool {
        matches!(self, ClosureOutcome::Contradiction { .. })
    }

    pub fn closure(&self) -> Option<&Closure> {
        match self {
            ClosureOutcome::Closed(c) => Some(c),
            _ => None,
        }
    }
}

/// Sets `b_{I Δ J} = b_I b_J` for all assigned `I, J` with `|I Δ J| ≤ d` until
/// nothing changes. Pairs are visited as `(i, j)`, `j ≤ i`, in assignment
/// order, so every pair is seen exactly once and the trace is reproducible.
pub fn xor_closure(equations: &[XorEquation], d: usize) -> ClosureOutcome {
    let mut signs: HashMap<VarSet, i8> = HashMap::new();
    let mut order = Vec::new();
    let conflict =
        |set: VarSet, assigned: i8, forced: i8| ClosureOutcome::Contradiction { set: vars_of(set), assigned, forced };
    for eq in equations {
        let s = eq.set();
        match signs.get(&s) {
            Some(&b) if b != eq.sign => return conflict(s, b, eq.sign),
            Some(_) => {}
            None if size(s) <= d => {
                signs.insert(s, eq.sign);
                order.push(s);
            }
            None => {}
        }
    }
    let mut i = 0;
    while i < order.len() {
        let si = order[i];
        let bi = signs[&si];
        for j in 0..=i {
            let sj = order[j];
            let k = si ^ sj;
            if size(k) > d {
                continue;
            }
            let b = bi * signs[&sj];
            match signs.get(&k) {
                Some(&old) if old != b => return conflict(k, old, b),
                Some(_) => {}
                None => {
                    signs.insert(k, b);
                    order.push(k);
                }
            }
        }
        i += 1;
    }
    ClosureOutcome::Closed(Closure { d, signs, order })
}

/// The parity pseudo-expectation of a successful closure.
///
/// `Ẽ[x_I]` reduces `I` mod 2 to a set `S`; the value is `b_S` when `S` was
/// assigned and `|S| ≤ d`, otherwise 0. The moment matrix is indexed by sets
/// of size at most `d/2`.
#[derive(Clone, Debug)]
pub struct XorPe {
    n: usize,
    d: usize,
    equations: Vec<XorEquation>,
    closure: Closure,
}

impl XorPe {
    pub fn new(n: usize, equations: Vec<XorEquation>, outcome: &ClosureOutcome) -> Result<Self> {
        let closure = outcome.closure().ok_or(Error::Contradiction)?.clone();
        if closure.d < 4 || closure.d % 2 == 1 {
            return Err(Error::InvalidParameter(format!("d must be even and at least 4, got {}", closure.d)));
        }
        if let Some(eq) = equations.iter().find(|e| *e.vars.last().unwrap() as usize > n) {
            return Err(Error::InvalidIndex(format!("equation {:?} exceeds n = {n}", eq.vars)));
        }
        Ok(XorPe { n, d: closure.d, equations, closure })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn half_degree(&self) -> usize {
        self.d / 2
    }

    pub fn equations(&self) -> &[XorEquation] {
        &self.equations
    }

    pub fn closure(&self) -> &Closure {
        &self.closure
    }

    /// `Ẽ[x_S]` for a set.
    pub fn set_value(&self, set: VarSet) -> i8 {
        if size(set) > self.d {
            return 0;
        }
        self.closure.sign(set).unwrap_or(0)
    }

    /// `Ẽ[x_I]` for a multiset.
    pub fn moment(&self, index: &MultisetIndex) -> i8 {
        let odd: Vec<u32> = index.entries().iter().filter(|e| e.1 % 2 == 1).map(|e| e.0).collect();
        self.set_value(set_of(&odd))
    }

    /// `Σ_{|I| ≤ 2·half_degree} Ẽ[h_I]²` in closed form.
    ///
    /// `Ẽ[h_I] = Ẽ[x_S] Π_v h_{m_v}(1)` where `S` holds the odd multiplicities,
    /// because every monomial of `Π He_{m_v}(x_v)` reduces to the same `S`.
    /// The sum therefore factors into a per-variable degree convolution.
    pub fn hermite_square_sum(&self) -> BigRational {
        let budget = 2 * self.half_degree();
        let w = unit_weights(budget);
        let even: Vec<BigRational> =
            (0..=budget).map(|m| if m % 2 == 0 { w[m].clone() } else { BigRational::zero() }).collect();
        let odd: Vec<BigRational> =
            (0..=budget).map(|m| if m % 2 == 1 { w[m].clone() } else { BigRational::zero() }).collect();
        // Sets sharing a size share the convolution.
        let mut by_size: BTreeMap<usize, usize> = BTreeMap::new();
        for &s in self.closure.signs.keys() {
            if size(s) <= budget.min(self.d) {
                *by_size.entry(size(s)).or_insert(0) += 1;
            }
        }
        let mut total = BigRational::zero();
        for (k, count) in by_size {
            let mut poly = vec![BigRational::one()];
            for _ in 0..k {
                poly = convolve(&poly, &odd, budget);
            }
            for _ in 0..self.n - k {
                poly = convolve(&poly, &even, budget);
            }
            let sum: BigRational = poly.into_iter().fold(BigRational::zero(), |a, b| a + b);
            total += sum * BigRational::from_integer(BigInt::from(count));
        }
        total
    }
}

/// `h_m(1)² = He_m(1)² / m!` for `m ≤ max`.
fn unit_weights(max: usize) -> Vec<BigRational> {
    let mut fact = BigInt::one();
    (0..=max)
        .map(|m| {
            if m > 0 {
                fact *= BigInt::from(m);
            }
            let at_one: BigInt = hermite_coefficients(m).into_iter().sum();
            BigRational::new(&at_one * &at_one, fact.clone())
        })
        .collect()
}

fn convolve(a: &[BigRational], b: &[BigRational], max: usize) -> Vec<BigRational> {
    let len = (a.len() + b.len() - 1).min(max + 1);
    let mut out = vec![BigRational::zero(); len];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            if i + j < len && !y.is_zero() {
                out[i + j] += x * y;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eq(v: [u32; 4], s: i8) -> XorEquation {
        XorEquation::new(v.to_vec(), s).unwrap()
    }

    #[test]
    fn propagation_example() {
        let eqs = [eq([1, 2, 3, 4], 1), eq([1, 2, 5, 6], 1)];
        let out = xor_closure(&eqs, 4);
        let c = out.closure().unwrap();
        assert_eq!(c.sign(set_of(&[3, 4, 5, 6])), Some(1));
        assert_eq!(c.sign(0), Some(1));
        assert_eq!(c.len(), 4);
    }

    #[test]
    fn contradiction_example() {
        let eqs = [eq([1, 2, 3, 4], 1), eq([1, 2, 5, 6], 1), eq([3, 4, 5, 6], -1)];
        assert!(xor_closure(&eqs, 4).is_contradiction());
    }

    #[test]
    fn instances_are_reproducible_and_distinct() {
        let a = xor_instance(16, 40, 3).unwrap();
        assert_eq!(a, xor_instance(16, 40, 3).unwrap());
        assert_ne!(a, xor_instance(16, 40, 4).unwrap());
        let sets: std::collections::HashSet<_> = a.iter().map(|e| e.set()).collect();
        assert_eq!(sets.len(), 40);
        assert!(a.iter().all(|e| e.vars.len() == 4 && e.vars[3] <= 16));
        assert!(xor_instance(5, 6, 0).is_err());
    }

    #[test]
    fn reduction_rules() {
        let eqs = vec![eq([1, 2, 3, 4], -1)];
        let out = xor_closure(&eqs, 4);
        let pe = XorPe::new(8, eqs, &out).unwrap();
        assert_eq!(pe.moment(&MultisetIndex::single(5, 2)), 1);
        assert_eq!(pe.moment(&MultisetIndex::from_vars(&[1, 2, 3, 4]).unwrap()), -1);
        assert_eq!(pe.moment(&MultisetIndex::from_vars(&[1, 1, 1, 2, 3, 4]).unwrap()), -1);
        assert_eq!(pe.moment(&MultisetIndex::from_vars(&[5, 6, 7, 8]).unwrap()), 0);
        assert!(XorPe::new(8, vec![], &ClosureOutcome::Contradiction { set: vec![], assigned: 1, forced: -1 }).is_err());
    }

    #[test]
    fn unit_weights_known() {
        let w = unit_weights(4);
        let q = |n: i64, d: i64| BigRational::new(n.into(), d.into());
        assert_eq!(w, vec![q(1, 1), q(1, 1), q(0, 1), q(4, 6), q(4, 24)]);
    }
}
