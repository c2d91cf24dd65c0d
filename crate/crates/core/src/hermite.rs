//! Hermite polynomials orthonormal under the standard Gaussian measure.
//!
//! The monic polynomials `He_j` are kept as exact integer coefficient lists,
//! and the normalized `h_j = He_j / sqrt(j!)` is only ever materialized as a
//! float at the last step. Multivariate basis elements `h_I` are products of
//! univariate ones indexed by a [`MultisetIndex`].

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest per-variable degree for which product linearizations are tabulated.
pub const MAX_LINEARIZATION_DEGREE: usize = 16;

/// A multiset of variable ids in `1..=n`, stored as `(id, multiplicity)` pairs
/// with strictly increasing ids.
///
/// Ordering is canonical: by total degree, then lexicographically on the sorted
/// element sequence (so `{1,1} < {1,2} < {2,2}`).
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct MultisetIndex {
    entries: Vec<(u32, u32)>,
    degree: u32,
}

impl MultisetIndex {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(entries: Vec<(u32, u32)>) -> Result<Self> {
        let mut prev = 0u32;
        let mut degree = 0u32;
        for &(var, mult) in &entries {
            if var == 0 {
                return Err(Error::InvalidIndex("variable ids start at 1".into()));
            }
            if var <= prev {
                return Err(Error::InvalidIndex(format!(
                    "variable ids must be strictly increasing, got {var} after {prev}"
                )));
            }
            if mult == 0 {
                return Err(Error::InvalidIndex(format!("variable {var} has multiplicity 0")));
            }
            prev = var;
            degree += mult;
        }
        Ok(MultisetIndex { entries, degree })
    }

    /// `x_var^mult`.
    pub fn single(var: u32, mult: u32) -> Self {
        if mult == 0 {
            return Self::empty();
        }
        assert!(var >= 1, "variable ids start at 1");
        MultisetIndex { entries: vec![(var, mult)], degree: mult }
    }

    /// Builds the multiset from a list of (possibly repeated) variable ids.
    pub fn from_vars(vars: &[u32]) -> Result<Self> {
        let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
        for &v in vars {
            *counts.entry(v).or_default() += 1;
        }
        Self::new(counts.into_iter().collect())
    }

    /// Collects `(id, multiplicity)` pairs in any order, merging repeats and
    /// dropping zero multiplicities.
    pub(crate) fn from_unsorted(pairs: impl IntoIterator<Item = (u32, u32)>) -> Self {
        let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
        for (v, m) in pairs {
            if m > 0 {
                *counts.entry(v).or_default() += m;
            }
        }
        let degree = counts.values().sum();
        MultisetIndex { entries: counts.into_iter().collect(), degree }
    }

    pub fn degree(&self) -> usize {
        self.degree as usize
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(u32, u32)] {
        &self.entries
    }

    pub fn multiplicity(&self, var: u32) -> u32 {
        self.entries.binary_search_by_key(&var, |&(v, _)| v).map(|i| self.entries[i].1).unwrap_or(0)
    }

    pub fn max_var(&self) -> u32 {
        self.entries.last().map(|&(v, _)| v).unwrap_or(0)
    }

    pub fn max_multiplicity(&self) -> u32 {
        self.entries.iter().map(|&(_, m)| m).max().unwrap_or(0)
    }

    pub fn vars(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries.iter().map(|&(v, _)| v)
    }

    /// The sorted element sequence, e.g. `{1:2, 3:1}` → `[1, 1, 3]`.
    pub fn expanded(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries.iter().flat_map(|&(v, m)| std::iter::repeat_n(v, m as usize))
    }

    /// Multiset sum: the index of the monomial `x_I · x_J`.
    pub fn union(&self, other: &MultisetIndex) -> MultisetIndex {
        let mut out = Vec::with_capacity(self.entries.len() + other.entries.len());
        let (mut i, mut j) = (0, 0);
        while i < self.entries.len() || j < other.entries.len() {
            let a = self.entries.get(i);
            let b = other.entries.get(j);
            match (a, b) {
                (Some(&(va, ma)), Some(&(vb, mb))) if va == vb => {
                    out.push((va, ma + mb));
                    i += 1;
                    j += 1;
                }
                (Some(&(va, ma)), Some(&(vb, _))) if va < vb => {
                    out.push((va, ma));
                    i += 1;
                }
                (Some(&(va, ma)), None) => {
                    out.push((va, ma));
                    i += 1;
                }
                (_, Some(&(vb, mb))) => {
                    out.push((vb, mb));
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        MultisetIndex { entries: out, degree: self.degree + other.degree }
    }

    /// Multiplicities reduced mod 2: the set of variables appearing an odd
    /// number of times. For sets this is the symmetric difference with ∅.
    pub fn parity(&self) -> MultisetIndex {
        let entries: Vec<(u32, u32)> =
            self.entries.iter().filter(|&&(_, m)| m % 2 == 1).map(|&(v, _)| (v, 1)).collect();
        let degree = entries.len() as u32;
        MultisetIndex { entries, degree }
    }

    pub fn is_set(&self) -> bool {
        self.entries.iter().all(|&(_, m)| m == 1)
    }

    /// Per-variable containment `self ⊆ other`.
    pub fn is_subset_of(&self, other: &MultisetIndex) -> bool {
        self.entries.iter().all(|&(v, m)| other.multiplicity(v) >= m)
    }

    /// Keeps only the listed variables.
    pub fn restrict(&self, keep: impl Fn(u32) -> bool) -> MultisetIndex {
        MultisetIndex::from_unsorted(self.entries.iter().copied().filter(|&(v, _)| keep(v)))
    }
}

impl Ord for MultisetIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree.cmp(&other.degree).then_with(|| self.expanded().cmp(other.expanded()))
    }
}

impl PartialOrd for MultisetIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for MultisetIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, (v, m)) in self.entries.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}:{m}")?;
        }
        write!(f, "}}")
    }
}

impl Serialize for MultisetIndex {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.entries.serialize(s)
    }
}

impl<'de> Deserialize<'de> for MultisetIndex {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let entries = Vec::<(u32, u32)>::deserialize(d)?;
        MultisetIndex::new(entries).map_err(serde::de::Error::custom)
    }
}

/// All multisets over `1..=n` with total degree in `min_degree..=max_degree`,
/// in canonical order.
pub fn enumerate_multisets(n: usize, min_degree: usize, max_degree: usize) -> Vec<MultisetIndex> {
    let mut out = Vec::new();
    let mut seq = Vec::new();
    for deg in min_degree..=max_degree {
        if n == 0 && deg > 0 {
            break;
        }
        seq.clear();
        push_sequences(n as u32, deg, 1, &mut seq, &mut out);
    }
    out
}

fn push_sequences(n: u32, remaining: usize, start: u32, seq: &mut Vec<u32>, out: &mut Vec<MultisetIndex>) {
    if remaining == 0 {
        out.push(MultisetIndex::from_vars(seq).expect("nondecreasing ids are valid"));
        return;
    }
    for v in start..=n {
        seq.push(v);
        push_sequences(n, remaining - 1, v, seq, out);
        seq.pop();
    }
}

/// Number of multisets over `n` variables of total degree exactly `k`:
/// `binom(n + k - 1, k)`.
pub fn multiset_count(n: usize, k: usize) -> u128 {
    if k == 0 {
        return 1;
    }
    if n == 0 {
        return 0;
    }
    let mut acc: u128 = 1;
    for i in 1..=k as u128 {
        acc = acc * (n as u128 + i - 1) / i;
    }
    acc
}

/// An exact real of the form `rational · sqrt(radicand)` with a square-free
/// radicand. Every Hermite inner product and linearization coefficient has
/// this shape.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RadicalRational {
    rational: BigRational,
    radicand: BigUint,
}

impl RadicalRational {
    pub fn new(rational: BigRational, radicand: BigUint) -> Self {
        if rational.is_zero() || radicand.is_zero() {
            return Self::zero();
        }
        let (square_root_part, free) = split_square(radicand);
        RadicalRational {
            rational: rational * BigRational::from_integer(BigInt::from(square_root_part)),
            radicand: free,
        }
    }

    /// `numerator / sqrt(denominator_sq)`.
    pub fn over_sqrt(numerator: BigInt, denominator_sq: BigUint) -> Self {
        assert!(!denominator_sq.is_zero());
        let den = BigInt::from(denominator_sq.clone());
        Self::new(BigRational::new(numerator, den), denominator_sq)
    }

    pub fn zero() -> Self {
        RadicalRational { rational: BigRational::zero(), radicand: BigUint::one() }
    }

    pub fn one() -> Self {
        RadicalRational { rational: BigRational::one(), radicand: BigUint::one() }
    }

    pub fn is_zero(&self) -> bool {
        self.rational.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.rational.is_one() && self.radicand.is_one()
    }

    pub fn rational(&self) -> &BigRational {
        &self.rational
    }

    pub fn radicand(&self) -> &BigUint {
        &self.radicand
    }

    /// The exact square, a rational.
    pub fn square(&self) -> BigRational {
        &self.rational * &self.rational * BigRational::from_integer(BigInt::from(self.radicand.clone()))
    }

    pub fn mul(&self, other: &RadicalRational) -> RadicalRational {
        RadicalRational::new(&self.rational * &other.rational, &self.radicand * &other.radicand)
    }

    pub fn to_f64(&self) -> f64 {
        self.rational.to_f64().unwrap_or(f64::NAN) * self.radicand.to_f64().unwrap_or(f64::NAN).sqrt()
    }
}

impl fmt::Display for RadicalRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.radicand.is_one() {
            write!(f, "{}", self.rational)
        } else {
            write!(f, "{}*sqrt({})", self.rational, self.radicand)
        }
    }
}

/// Writes `x = s² · q` with `q` square-free over the primes below 128 (the
/// radicands here are products of small factorials, so this is complete).
fn split_square(mut x: BigUint) -> (BigUint, BigUint) {
    let mut s = BigUint::one();
    let mut q = BigUint::one();
    for p in (2u32..128).filter(|&p| (2..p).take_while(|d| d * d <= p).all(|d| p % d != 0)) {
        let bp = BigUint::from(p);
        let mut count = 0u32;
        loop {
            let (quot, rem) = x.div_rem(&bp);
            if !rem.is_zero() {
                break;
            }
            x = quot;
            count += 1;
        }
        if count > 0 {
            s *= bp.pow(count / 2);
            if count % 2 == 1 {
                q *= &bp;
            }
        }
    }
    // Leftover factors above the trial bound stay under the root.
    (s, q * x)
}

/// `E[x^p]` for `x ~ N(0, 1)`: `(p-1)!!` for even `p`, zero for odd `p`.
pub fn gaussian_moment(p: usize) -> BigUint {
    if p % 2 == 1 {
        return BigUint::zero();
    }
    (1..=p / 2).fold(BigUint::one(), |acc, i| acc * BigUint::from(2 * i - 1))
}

/// Exact integer coefficients of the monic Hermite polynomial `He_j`,
/// lowest degree first.
pub fn hermite_coefficients(j: usize) -> Vec<BigInt> {
    let mut prev: Vec<BigInt> = vec![BigInt::one()];
    if j == 0 {
        return prev;
    }
    let mut cur: Vec<BigInt> = vec![BigInt::zero(), BigInt::one()];
    for k in 1..j {
        // He_{k+1} = x He_k - k He_{k-1}
        let mut next = vec![BigInt::zero(); k + 2];
        for (i, c) in cur.iter().enumerate() {
            next[i + 1] += c;
        }
        let kk = BigInt::from(k);
        for (i, c) in prev.iter().enumerate() {
            next[i] -= &kk * c;
        }
        prev = cur;
        cur = next;
    }
    cur
}

fn factorial(j: usize) -> BigUint {
    (1..=j).fold(BigUint::one(), |acc, i| acc * BigUint::from(i))
}

fn poly_mul(a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
    let mut out = vec![BigInt::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// `E[p(x) q(x)]` for integer polynomials under `N(0, 1)`.
fn gaussian_pairing(p: &[BigInt], q: &[BigInt]) -> BigInt {
    let mut acc = BigInt::zero();
    for (i, a) in p.iter().enumerate() {
        if a.is_zero() {
            continue;
        }
        for (j, b) in q.iter().enumerate() {
            if (i + j) % 2 == 1 || b.is_zero() {
                continue;
            }
            acc += a * b * BigInt::from(gaussian_moment(i + j));
        }
    }
    acc
}

/// Exact tables shared by every module: monic coefficients, factorials,
/// univariate linearization coefficients and monomial↔Hermite changes of
/// basis. Built once, read-only afterwards.
#[derive(Debug)]
pub struct HermiteTable {
    max_degree: usize,
    monic: Vec<Vec<BigInt>>,
    factorials: Vec<BigUint>,
    linearization: Vec<Vec<Vec<(usize, RadicalRational)>>>,
    linearization_f64: Vec<Vec<Vec<(usize, f64)>>>,
    monomial_to_hermite: Vec<Vec<(usize, RadicalRational)>>,
    monomial_to_hermite_f64: Vec<Vec<(usize, f64)>>,
    hermite_to_monomial_f64: Vec<Vec<(usize, f64)>>,
}

impl HermiteTable {
    pub fn build(max_degree: usize) -> Self {
        let top = 2 * max_degree;
        let monic: Vec<Vec<BigInt>> = (0..=top).map(hermite_coefficients).collect();
        let factorials: Vec<BigUint> = (0..=top).map(factorial).collect();

        // h_a h_b = Σ_c q_c h_c. The h_c are orthonormal (see
        // `inner_product_exact`), so the coefficient system has identity Gram
        // matrix and q_c = <h_a h_b, h_c> = E[He_a He_b He_c] / sqrt(a! b! c!).
        let mut linearization = vec![vec![Vec::new(); max_degree + 1]; max_degree + 1];
        for a in 0..=max_degree {
            for b in 0..=max_degree {
                let prod = poly_mul(&monic[a], &monic[b]);
                let mut row = Vec::new();
                for c in (a.abs_diff(b)..=a + b).step_by(2) {
                    let num = gaussian_pairing(&prod, &monic[c]);
                    if num.is_zero() {
                        continue;
                    }
                    let den = &factorials[a] * &factorials[b] * &factorials[c];
                    row.push((c, RadicalRational::over_sqrt(num, den)));
                }
                linearization[a][b] = row;
            }
        }
        let linearization_f64 = linearization
            .iter()
            .map(|rows| rows.iter().map(|r| r.iter().map(|(c, q)| (*c, q.to_f64())).collect()).collect())
            .collect();

        // x^a = Σ_j <x^a, h_j> h_j.
        let mut monomial_to_hermite = Vec::with_capacity(top + 1);
        for a in 0..=top {
            let mut xa = vec![BigInt::zero(); a + 1];
            xa[a] = BigInt::one();
            let mut row = Vec::new();
            for j in (0..=a).rev().step_by(2) {
                let num = gaussian_pairing(&xa, &monic[j]);
                if !num.is_zero() {
                    row.push((j, RadicalRational::over_sqrt(num, factorials[j].clone())));
                }
            }
            row.reverse();
            monomial_to_hermite.push(row);
        }
        let monomial_to_hermite_f64 =
            monomial_to_hermite.iter().map(|r| r.iter().map(|(j, q)| (*j, q.to_f64())).collect()).collect();

        let hermite_to_monomial_f64 = (0..=top)
            .map(|j| {
                let norm = factorials[j].to_f64().unwrap().sqrt();
                monic[j]
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| !c.is_zero())
                    .map(|(i, c)| (i, c.to_f64().unwrap() / norm))
                    .collect()
            })
            .collect();

        HermiteTable {
            max_degree,
            monic,
            factorials,
            linearization,
            linearization_f64,
            monomial_to_hermite,
            monomial_to_hermite_f64,
            hermite_to_monomial_f64,
        }
    }

    /// Largest per-variable degree accepted by [`Self::linearize`].
    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// Largest per-variable degree accepted by the basis changes.
    pub fn max_basis_degree(&self) -> usize {
        2 * self.max_degree
    }

    pub fn monic(&self, j: usize) -> Result<&[BigInt]> {
        self.monic.get(j).map(|v| v.as_slice()).ok_or(Error::DegreeOverflow { degree: j, max: self.max_basis_degree() })
    }

    pub fn factorial(&self, j: usize) -> Result<&BigUint> {
        self.factorials.get(j).ok_or(Error::DegreeOverflow { degree: j, max: self.max_basis_degree() })
    }

    /// `(c, Q_c)` with `h_a h_b = Σ_c Q_c h_c`.
    pub fn linearize(&self, a: usize, b: usize) -> Result<&[(usize, f64)]> {
        self.check_lin(a, b)?;
        Ok(&self.linearization_f64[a][b])
    }

    pub fn linearize_exact(&self, a: usize, b: usize) -> Result<&[(usize, RadicalRational)]> {
        self.check_lin(a, b)?;
        Ok(&self.linearization[a][b])
    }

    fn check_lin(&self, a: usize, b: usize) -> Result<()> {
        let worst = a.max(b);
        if worst > self.max_degree {
            return Err(Error::DegreeOverflow { degree: worst, max: self.max_degree });
        }
        Ok(())
    }

    /// `(j, m_j)` with `x^a = Σ_j m_j h_j(x)`.
    pub fn monomial_to_hermite(&self, a: usize) -> Result<&[(usize, f64)]> {
        self.monomial_to_hermite_f64
            .get(a)
            .map(|v| v.as_slice())
            .ok_or(Error::DegreeOverflow { degree: a, max: self.max_basis_degree() })
    }

    pub fn monomial_to_hermite_exact(&self, a: usize) -> Result<&[(usize, RadicalRational)]> {
        self.monomial_to_hermite
            .get(a)
            .map(|v| v.as_slice())
            .ok_or(Error::DegreeOverflow { degree: a, max: self.max_basis_degree() })
    }

    /// `(i, c_i)` with `h_j(x) = Σ_i c_i x^i`.
    pub fn hermite_to_monomial(&self, j: usize) -> Result<&[(usize, f64)]> {
        self.hermite_to_monomial_f64
            .get(j)
            .map(|v| v.as_slice())
            .ok_or(Error::DegreeOverflow { degree: j, max: self.max_basis_degree() })
    }
}

/// The process-wide table, built on first use.
pub fn table() -> &'static HermiteTable {
    static TABLE: OnceLock<HermiteTable> = OnceLock::new();
    TABLE.get_or_init(|| HermiteTable::build(MAX_LINEARIZATION_DEGREE))
}

/// `h_0(x), …, h_max(x)` via the normalized three-term recurrence
/// `h_{j+1} = (x h_j - sqrt(j) h_{j-1}) / sqrt(j+1)`.
pub fn univariate_values<T: Scalar>(x: T, max_degree: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(max_degree + 1);
    out.push(T::one());
    if max_degree >= 1 {
        out.push(x);
    }
    for j in 1..max_degree {
        let jf = T::from_usize(j).unwrap();
        let next = (x * out[j] - jf.sqrt() * out[j - 1]) / (jf + T::one()).sqrt();
        out.push(next);
    }
    out
}

/// `h_I(point) = Π_k h_{I_k}(point_k)`; variable ids are 1-based.
pub fn eval_basis<T: Scalar>(index: &MultisetIndex, point: &[T]) -> Result<T> {
    if index.max_var() as usize > point.len() {
        return Err(Error::DimensionMismatch { expected: index.max_var() as usize, found: point.len() });
    }
    let mut acc = T::one();
    for &(v, m) in index.entries() {
        let vals = univariate_values(point[v as usize - 1], m as usize);
        acc = acc * vals[m as usize];
    }
    Ok(acc)
}

/// `<h_I, h_J>` under `N(0, Id)`, integrated exactly through Gaussian moments.
pub fn inner_product_exact(i: &MultisetIndex, j: &MultisetIndex) -> RadicalRational {
    let vars = i.union(j);
    let mut acc = RadicalRational::one();
    for v in vars.vars() {
        let a = i.multiplicity(v) as usize;
        let b = j.multiplicity(v) as usize;
        let num = gaussian_pairing(&hermite_coefficients(a), &hermite_coefficients(b));
        if num.is_zero() {
            return RadicalRational::zero();
        }
        let term = RadicalRational::over_sqrt(num, factorial(a) * factorial(b));
        acc = acc.mul(&term);
    }
    acc
}

/// Per-variable expansion shared by the float and exact product expansions.
fn expand_product<C: Clone>(
    a: &MultisetIndex,
    b: &MultisetIndex,
    per_var: impl Fn(usize, usize) -> Result<Vec<(usize, C)>>,
    mul: impl Fn(&C, &C) -> C,
    one: C,
) -> Result<Vec<(MultisetIndex, C)>> {
    let union = a.union(b);
    let mut partial: Vec<(Vec<(u32, u32)>, C)> = vec![(Vec::new(), one)];
    for v in union.vars() {
        let terms = per_var(a.multiplicity(v) as usize, b.multiplicity(v) as usize)?;
        let mut next = Vec::with_capacity(partial.len() * terms.len());
        for (entries, coef) in &partial {
            for (c, q) in &terms {
                let mut e = entries.clone();
                if *c > 0 {
                    e.push((v, *c as u32));
                }
                next.push((e, mul(coef, q)));
            }
        }
        partial = next;
    }
    Ok(partial
        .into_iter()
        .map(|(e, c)| {
            let degree = e.iter().map(|&(_, m)| m).sum();
            (MultisetIndex { entries: e, degree }, c)
        })
        .collect())
}

/// Unsorted `(J, Q_J)` pairs of the float linearization.
pub(crate) fn product_terms(a: &MultisetIndex, b: &MultisetIndex) -> Result<Vec<(MultisetIndex, f64)>> {
    let t = table();
    expand_product(a, b, |x, y| Ok(t.linearize(x, y)?.to_vec()), |p, q| p * q, 1.0f64)
}

/// Linearization `h_I h_{I'} = Σ_J Q_{J(I,I')} h_J` with float coefficients.
pub fn product_expansion<T: Scalar>(a: &MultisetIndex, b: &MultisetIndex) -> Result<BTreeMap<MultisetIndex, T>> {
    Ok(product_terms(a, b)?.into_iter().map(|(j, q)| (j, T::lit(q))).collect())
}

/// Exact linearization coefficients.
pub fn product_expansion_exact(
    a: &MultisetIndex,
    b: &MultisetIndex,
) -> Result<BTreeMap<MultisetIndex, RadicalRational>> {
    let t = table();
    let terms =
        expand_product(a, b, |x, y| Ok(t.linearize_exact(x, y)?.to_vec()), |p, q| p.mul(q), RadicalRational::one())?;
    Ok(terms.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ms(entries: &[(u32, u32)]) -> MultisetIndex {
        MultisetIndex::new(entries.to_vec()).unwrap()
    }

    fn ints(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&x| BigInt::from(x)).collect()
    }

    #[test]
    fn monic_coefficients() {
        assert_eq!(hermite_coefficients(0), ints(&[1]));
        assert_eq!(hermite_coefficients(1), ints(&[0, 1]));
        assert_eq!(hermite_coefficients(2), ints(&[-1, 0, 1]));
        assert_eq!(hermite_coefficients(3), ints(&[0, -3, 0, 1]));
    }

    #[test]
    fn second_hermite_is_gram_schmidt_of_x_squared() {
        // Orthogonalize x² against 1 and x under N(0,1): x² - E[x²]·1 - E[x³]·x.
        let e2 = BigInt::from(gaussian_moment(2));
        let e3 = BigInt::from(gaussian_moment(3));
        let gs = vec![-e2, -e3, BigInt::one()];
        assert_eq!(gs, hermite_coefficients(2));
    }

    #[test]
    fn recurrence_holds_exactly() {
        for j in 1..20 {
            let next = hermite_coefficients(j + 1);
            let cur = hermite_coefficients(j);
            let prev = hermite_coefficients(j - 1);
            let mut rhs = vec![BigInt::zero(); j + 2];
            for (i, c) in cur.iter().enumerate() {
                rhs[i + 1] += c;
            }
            for (i, c) in prev.iter().enumerate() {
                rhs[i] -= BigInt::from(j) * c;
            }
            assert_eq!(next, rhs);
            assert!(next.last().unwrap().is_one());
        }
    }

    #[test]
    fn moments() {
        assert_eq!(gaussian_moment(0), BigUint::one());
        assert_eq!(gaussian_moment(3), BigUint::zero());
        assert_eq!(gaussian_moment(4), BigUint::from(3u32));
        assert_eq!(gaussian_moment(6), BigUint::from(15u32));
    }

    #[test]
    fn normalized_leading_coefficient() {
        let t = table();
        for d in 0..12usize {
            let top = t.hermite_to_monomial(d).unwrap().last().copied().unwrap();
            assert_eq!(top.0, d);
            let want = 1.0 / factorial(d).to_f64().unwrap().sqrt();
            assert!((top.1 - want).abs() <= 1e-15 * want.max(1.0));
        }
    }

    #[test]
    fn eval_examples() {
        let p = [2.0, 0.3];
        assert_eq!(eval_basis(&MultisetIndex::empty(), &p).unwrap(), 1.0);
        assert_eq!(eval_basis(&ms(&[(1, 1)]), &p).unwrap(), 2.0);
        assert!(eval_basis(&ms(&[(1, 2)]), &[1.0f64]).unwrap().abs() < 1e-15);
        assert!(matches!(eval_basis(&ms(&[(3, 1)]), &p), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn recurrence_evaluation_matches_exact_coefficients() {
        let t = table();
        for &x in &[-2.3f64, -0.5, 0.0, 0.7, 3.1] {
            let vals = univariate_values(x, 14);
            for (j, v) in vals.iter().enumerate() {
                let direct: f64 = t.hermite_to_monomial(j).unwrap().iter().map(|&(i, c)| c * x.powi(i as i32)).sum();
                assert!((v - direct).abs() <= 1e-9 * (1.0 + direct.abs()), "j={j} x={x}");
            }
        }
    }

    #[test]
    fn inner_product_examples() {
        assert!(inner_product_exact(&ms(&[(1, 2)]), &ms(&[(1, 2)])).is_one());
        assert!(inner_product_exact(&ms(&[(1, 1)]), &ms(&[(2, 1)])).is_zero());
        assert!(inner_product_exact(&ms(&[(1, 1)]), &ms(&[(1, 3)])).is_zero());
    }

    #[test]
    fn product_expansion_examples() {
        let x1 = ms(&[(1, 1)]);
        let e = product_expansion::<f64>(&MultisetIndex::empty(), &x1).unwrap();
        assert_eq!(e.len(), 1);
        assert_eq!(e[&x1], 1.0);

        let e = product_expansion_exact(&x1, &x1).unwrap();
        assert_eq!(e.len(), 2);
        assert!(e[&MultisetIndex::empty()].is_one());
        let q = &e[&ms(&[(1, 2)])];
        assert_eq!(q.rational(), &BigRational::one());
        assert_eq!(q.radicand(), &BigUint::from(2u32));

        let x2 = ms(&[(2, 1)]);
        let e = product_expansion::<f64>(&x1, &x2).unwrap();
        assert_eq!(e.len(), 1);
        assert_eq!(e[&ms(&[(1, 1), (2, 1)])], 1.0);
    }

    #[test]
    fn linearization_matches_closed_form() {
        // Independent formula: E[He_a He_b He_c] = a! b! c! / ((s-a)! (s-b)! (s-c)!)
        // with s = (a+b+c)/2, zero unless the triangle and parity conditions hold.
        let t = table();
        for a in 0..=8usize {
            for b in 0..=8usize {
                let lin = t.linearize_exact(a, b).unwrap();
                for c in 0..=16usize {
                    let got = lin
                        .iter()
                        .find(|(cc, _)| *cc == c)
                        .map(|(_, q)| q.clone())
                        .unwrap_or_else(RadicalRational::zero);
                    let want = if (a + b + c) % 2 == 0 && c <= a + b && a <= b + c && b <= a + c {
                        let s = (a + b + c) / 2;
                        let num = factorial(a) * factorial(b) * factorial(c);
                        let den = factorial(s - a) * factorial(s - b) * factorial(s - c);
                        RadicalRational::over_sqrt(BigInt::from(num / den), factorial(a) * factorial(b) * factorial(c))
                    } else {
                        RadicalRational::zero()
                    };
                    assert_eq!(got, want, "a={a} b={b} c={c}");
                }
            }
        }
    }

    #[test]
    fn degree_overflow_is_reported() {
        let big = MultisetIndex::single(1, (MAX_LINEARIZATION_DEGREE + 1) as u32);
        assert!(matches!(product_expansion::<f64>(&big, &big), Err(Error::DegreeOverflow { .. })));
    }

    #[test]
    fn canonical_order() {
        let all = enumerate_multisets(2, 0, 2);
        let want = vec![
            MultisetIndex::empty(),
            ms(&[(1, 1)]),
            ms(&[(2, 1)]),
            ms(&[(1, 2)]),
            ms(&[(1, 1), (2, 1)]),
            ms(&[(2, 2)]),
        ];
        assert_eq!(all, want);
        let mut sorted = all.clone();
        sorted.sort();
        assert_eq!(sorted, all);
        assert_eq!(enumerate_multisets(3, 0, 4).len(), 35);
        assert_eq!(multiset_count(101, 2), 5151);
    }

    #[test]
    fn invalid_indices_rejected() {
        assert!(MultisetIndex::new(vec![(2, 1), (1, 1)]).is_err());
        assert!(MultisetIndex::new(vec![(1, 0)]).is_err());
        assert!(MultisetIndex::new(vec![(0, 1)]).is_err());
        let i = ms(&[(1, 2), (4, 1)]);
        assert_eq!(i.degree(), 3);
        assert_eq!(i.multiplicity(4), 1);
        assert_eq!(i.multiplicity(2), 0);
    }

    #[test]
    fn radical_reduction() {
        let r = RadicalRational::new(BigRational::one(), BigUint::from(12u32));
        assert_eq!(r.rational(), &BigRational::from_integer(BigInt::from(2)));
        assert_eq!(r.radicand(), &BigUint::from(3u32));
        assert_eq!(r.square(), BigRational::from_integer(BigInt::from(12)));
    }
}
