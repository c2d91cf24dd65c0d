//! Sparse multivariate polynomials in two bases.
//!
//! [`MonomialPoly`] stores coefficients of `x_I`, [`HermitePoly`] stores
//! coefficients of `h_I`. Conversion between the two is always explicit; the
//! Gaussian norm is only defined on the Hermite side, where it is the
//! Euclidean norm of the coefficient vector.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::{self, table, MultisetIndex};
use crate::scalar::Scalar;

/// Coefficients below this magnitude are dropped after every operation.
pub const DROP_THRESHOLD: f64 = 1e-15;

/// Coefficient ring for [`MonomialPoly`]: floats or exact rationals.
pub trait Coeff:
    Clone
    + Debug
    + PartialEq
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
{
    fn negligible(&self) -> bool;
}

impl Coeff for f64 {
    fn negligible(&self) -> bool {
        self.abs() <= DROP_THRESHOLD
    }
}

impl Coeff for f32 {
    fn negligible(&self) -> bool {
        (self.abs() as f64) <= DROP_THRESHOLD
    }
}

impl Coeff for BigRational {
    fn negligible(&self) -> bool {
        self.is_zero()
    }
}

fn check_vars(n: usize, index: &MultisetIndex) -> Result<()> {
    if index.max_var() as usize > n {
        return Err(Error::DimensionMismatch { expected: index.max_var() as usize, found: n });
    }
    Ok(())
}

fn insert_add<T: Coeff>(terms: &mut BTreeMap<MultisetIndex, T>, index: MultisetIndex, c: T) {
    match terms.get_mut(&index) {
        Some(v) => *v = v.clone() + c,
        None => {
            terms.insert(index, c);
        }
    }
}

fn prune<T: Coeff>(terms: &mut BTreeMap<MultisetIndex, T>) {
    terms.retain(|_, c| !c.negligible());
}

/// Polynomial `Σ_I c_I x_I`.
#[derive(Clone, Debug, PartialEq)]
pub struct MonomialPoly<T: Coeff> {
    n: usize,
    terms: BTreeMap<MultisetIndex, T>,
}

impl<T: Coeff> MonomialPoly<T> {
    pub fn zero(n: usize) -> Self {
        MonomialPoly { n, terms: BTreeMap::new() }
    }

    pub fn constant(n: usize, c: T) -> Self {
        let mut p = Self::zero(n);
        if !c.negligible() {
            p.terms.insert(MultisetIndex::empty(), c);
        }
        p
    }

    /// The single monomial `c · x_I`.
    pub fn monomial(n: usize, index: MultisetIndex, c: T) -> Result<Self> {
        Self::from_terms(n, [(index, c)])
    }

    /// Sums the given terms; repeated indices accumulate.
    pub fn from_terms(n: usize, terms: impl IntoIterator<Item = (MultisetIndex, T)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, c) in terms {
            check_vars(n, &i)?;
            insert_add(&mut map, i, c);
        }
        prune(&mut map);
        Ok(MonomialPoly { n, terms: map })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &BTreeMap<MultisetIndex, T> {
        &self.terms
    }

    pub fn coeff(&self, index: &MultisetIndex) -> T {
        self.terms.get(index).cloned().unwrap_or_else(T::zero)
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(|i| i.degree()).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Same polynomial viewed in more variables.
    pub fn with_n(mut self, n: usize) -> Result<Self> {
        for i in self.terms.keys() {
            check_vars(n, i)?;
        }
        self.n = n;
        Ok(self)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(other, T::one())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(other, -T::one())
    }

    fn combine(&self, other: &Self, sign: T) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: other.n });
        }
        let mut terms = self.terms.clone();
        for (i, c) in &other.terms {
            insert_add(&mut terms, i.clone(), sign.clone() * c.clone());
        }
        prune(&mut terms);
        Ok(MonomialPoly { n: self.n, terms })
    }

    pub fn scale(&self, s: T) -> Self {
        let mut terms: BTreeMap<_, _> = self.terms.iter().map(|(i, c)| (i.clone(), c.clone() * s.clone())).collect();
        prune(&mut terms);
        MonomialPoly { n: self.n, terms }
    }

    /// Product in the monomial basis: `x_I x_J = x_{I ∪ J}`.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: other.n });
        }
        let mut terms = BTreeMap::new();
        for (i, a) in &self.terms {
            for (j, b) in &other.terms {
                insert_add(&mut terms, i.union(j), a.clone() * b.clone());
            }
        }
        prune(&mut terms);
        Ok(MonomialPoly { n: self.n, terms })
    }

    pub fn map_coeffs<U: Coeff>(&self, f: impl Fn(&T) -> U) -> MonomialPoly<U> {
        let mut terms: BTreeMap<_, _> = self.terms.iter().map(|(i, c)| (i.clone(), f(c))).collect();
        prune(&mut terms);
        MonomialPoly { n: self.n, terms }
    }
}

impl MonomialPoly<BigRational> {
    pub fn to_f64(&self) -> MonomialPoly<f64> {
        self.map_coeffs(|c| c.to_f64().unwrap_or(f64::NAN))
    }
}

impl<T: Scalar> MonomialPoly<T> {
    pub fn evaluate(&self, point: &[T]) -> Result<T> {
        if point.len() < self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: point.len() });
        }
        Ok(self
            .terms
            .iter()
            .map(|(i, c)| {
                *c * i.entries().iter().map(|&(v, m)| point[v as usize - 1].powi(m as i32)).fold(T::one(), |a, b| a * b)
            })
            .sum())
    }

    /// Exact triangular change of basis, applied variable by variable.
    pub fn to_hermite(&self) -> Result<HermitePoly<T>> {
        let t = table();
        let mut out = BTreeMap::new();
        for (index, c) in &self.terms {
            let factors = index
                .entries()
                .iter()
                .map(|&(v, m)| Ok((v, t.monomial_to_hermite(m as usize)?)))
                .collect::<Result<Vec<_>>>()?;
            for (j, q) in tensor_expand(&factors) {
                insert_add(&mut out, j, *c * T::lit(q));
            }
        }
        prune(&mut out);
        Ok(HermitePoly { n: self.n, terms: out })
    }
}

/// Expands `Π_v Σ_j w_{v,j} e_{v,j}` where `e_{v,j}` is the degree-`j`
/// element in variable `v`.
fn tensor_expand(factors: &[(u32, &[(usize, f64)])]) -> Vec<(MultisetIndex, f64)> {
    let mut partial: Vec<(Vec<(u32, u32)>, f64)> = vec![(Vec::new(), 1.0)];
    for &(v, terms) in factors {
        let mut next = Vec::with_capacity(partial.len() * terms.len());
        for (entries, w) in &partial {
            for &(j, q) in terms {
                let mut e = entries.clone();
                if j > 0 {
                    e.push((v, j as u32));
                }
                next.push((e, w * q));
            }
        }
        partial = next;
    }
    partial.into_iter().map(|(e, w)| (MultisetIndex::new(e).expect("increasing ids"), w)).collect()
}

/// Polynomial `Σ_I c_I h_I` in the orthonormal Hermite basis.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitePoly<T: Scalar> {
    n: usize,
    terms: BTreeMap<MultisetIndex, T>,
}

impl<T: Scalar> HermitePoly<T> {
    pub fn zero(n: usize) -> Self {
        HermitePoly { n, terms: BTreeMap::new() }
    }

    pub fn constant(n: usize, c: T) -> Self {
        let mut p = Self::zero(n);
        if !c.negligible() {
            p.terms.insert(MultisetIndex::empty(), c);
        }
        p
    }

    pub fn basis(n: usize, index: MultisetIndex) -> Result<Self> {
        Self::from_terms(n, [(index, T::one())])
    }

    pub fn from_terms(n: usize, terms: impl IntoIterator<Item = (MultisetIndex, T)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, c) in terms {
            check_vars(n, &i)?;
            insert_add(&mut map, i, c);
        }
        prune(&mut map);
        Ok(HermitePoly { n, terms: map })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &BTreeMap<MultisetIndex, T> {
        &self.terms
    }

    pub fn coeff(&self, index: &MultisetIndex) -> T {
        self.terms.get(index).copied().unwrap_or_else(T::zero)
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(|i| i.degree()).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// `Σ c_I²`, the squared Gaussian norm.
    pub fn norm_sq(&self) -> T {
        self.terms.values().map(|c| *c * *c).sum()
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(other, T::one())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(other, -T::one())
    }

    fn combine(&self, other: &Self, sign: T) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: other.n });
        }
        let mut terms = self.terms.clone();
        for (i, c) in &other.terms {
            insert_add(&mut terms, i.clone(), sign * *c);
        }
        prune(&mut terms);
        Ok(HermitePoly { n: self.n, terms })
    }

    pub fn scale(&self, s: T) -> Self {
        let mut terms: BTreeMap<_, _> = self.terms.iter().map(|(i, c)| (i.clone(), *c * s)).collect();
        prune(&mut terms);
        HermitePoly { n: self.n, terms }
    }

    /// Product through the linearization coefficients of each basis pair.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: other.n });
        }
        let same = self == other;
        let mut acc: HashMap<MultisetIndex, T> = HashMap::new();
        for (x, (i, a)) in self.terms.iter().enumerate() {
            for (y, (j, b)) in other.terms.iter().enumerate() {
                // Squares only need the upper triangle.
                if same && y < x {
                    continue;
                }
                let w = if same && y > x { T::lit(2.0) } else { T::one() } * *a * *b;
                for (k, q) in hermite::product_terms(i, j)? {
                    let e = acc.entry(k).or_insert_with(T::zero);
                    *e = *e + w * T::lit(q);
                }
            }
        }
        let mut terms: BTreeMap<_, _> = acc.into_iter().collect();
        prune(&mut terms);
        Ok(HermitePoly { n: self.n, terms })
    }

    pub fn evaluate(&self, point: &[T]) -> Result<T> {
        if point.len() < self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: point.len() });
        }
        // One recurrence per variable, shared by all terms.
        let mut top = vec![0usize; self.n + 1];
        for i in self.terms.keys() {
            for &(v, m) in i.entries() {
                top[v as usize] = top[v as usize].max(m as usize);
            }
        }
        let values: Vec<Vec<T>> = (0..=self.n)
            .map(|v| if v == 0 || top[v] == 0 { Vec::new() } else { hermite::univariate_values(point[v - 1], top[v]) })
            .collect();
        Ok(self
            .terms
            .iter()
            .map(|(i, c)| {
                *c * i.entries().iter().map(|&(v, m)| values[v as usize][m as usize]).fold(T::one(), |a, b| a * b)
            })
            .sum())
    }

    pub fn to_monomial(&self) -> Result<MonomialPoly<T>> {
        let t = table();
        let mut out = BTreeMap::new();
        for (index, c) in &self.terms {
            let factors = index
                .entries()
                .iter()
                .map(|&(v, m)| Ok((v, t.hermite_to_monomial(m as usize)?)))
                .collect::<Result<Vec<_>>>()?;
            for (j, q) in tensor_expand(&factors) {
                insert_add(&mut out, j, *c * T::lit(q));
            }
        }
        prune(&mut out);
        Ok(MonomialPoly { n: self.n, terms: out })
    }

    /// Coefficients on a fixed index list, zero where absent.
    pub fn coefficient_vector(&self, index: &[MultisetIndex]) -> Vec<T> {
        index.iter().map(|i| self.coeff(i)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Monomial,
    Hermite,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermRecord {
    vars: MultisetIndex,
    coeff: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolyRecord {
    n: usize,
    basis: Basis,
    terms: Vec<TermRecord>,
}

/// A polynomial read from or written to the JSON exchange format
/// `{"n", "basis", "terms": [{"vars": [[id, mult], ...], "coeff"}]}`.
#[derive(Clone, Debug, PartialEq)]
pub enum Polynomial {
    Monomial(MonomialPoly<f64>),
    Hermite(HermitePoly<f64>),
}

impl Polynomial {
    pub fn from_json(text: &str) -> Result<Self> {
        let rec: PolyRecord = serde_json::from_str(text)?;
        let terms = rec.terms.into_iter().map(|t| (t.vars, t.coeff));
        let poly = match rec.basis {
            Basis::Monomial => Polynomial::Monomial(MonomialPoly::from_terms(rec.n, terms).map_err(schema)?),
            Basis::Hermite => Polynomial::Hermite(HermitePoly::from_terms(rec.n, terms).map_err(schema)?),
        };
        Ok(poly)
    }

    pub fn to_json(&self) -> String {
        let (n, basis, terms): (usize, Basis, Vec<TermRecord>) = match self {
            Polynomial::Monomial(p) => {
                (p.n, Basis::Monomial, p.terms.iter().map(|(i, c)| TermRecord { vars: i.clone(), coeff: *c }).collect())
            }
            Polynomial::Hermite(p) => {
                (p.n, Basis::Hermite, p.terms.iter().map(|(i, c)| TermRecord { vars: i.clone(), coeff: *c }).collect())
            }
        };
        serde_json::to_string_pretty(&PolyRecord { n, basis, terms }).expect("plain data serializes")
    }

    pub fn n(&self) -> usize {
        match self {
            Polynomial::Monomial(p) => p.n(),
            Polynomial::Hermite(p) => p.n(),
        }
    }

    pub fn to_hermite(&self) -> Result<HermitePoly<f64>> {
        match self {
            Polynomial::Monomial(p) => p.to_hermite(),
            Polynomial::Hermite(p) => Ok(p.clone()),
        }
    }

    pub fn to_monomial(&self) -> Result<MonomialPoly<f64>> {
        match self {
            Polynomial::Monomial(p) => Ok(p.clone()),
            Polynomial::Hermite(p) => p.to_monomial(),
        }
    }

    pub fn evaluate(&self, point: &[f64]) -> Result<f64> {
        match self {
            Polynomial::Monomial(p) => p.evaluate(point),
            Polynomial::Hermite(p) => p.evaluate(point),
        }
    }
}

fn schema(e: Error) -> Error {
    Error::Schema(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::approx_eq;
    use num_bigint::BigInt;

    fn ms(entries: &[(u32, u32)]) -> MultisetIndex {
        MultisetIndex::new(entries.to_vec()).unwrap()
    }

    #[test]
    fn to_hermite_examples() {
        let x1 = MonomialPoly::monomial(1, ms(&[(1, 1)]), 1.0).unwrap();
        let h = x1.to_hermite().unwrap();
        assert_eq!(h.terms().len(), 1);
        assert_eq!(h.coeff(&ms(&[(1, 1)])), 1.0);

        let x1sq = MonomialPoly::monomial(1, ms(&[(1, 2)]), 1.0).unwrap();
        let h = x1sq.to_hermite().unwrap();
        assert!(approx_eq(h.coeff(&ms(&[(1, 2)])), 2f64.sqrt(), 1e-15));
        assert!(approx_eq(h.coeff(&MultisetIndex::empty()), 1.0, 1e-15));
        assert!(approx_eq(h.norm(), 3f64.sqrt(), 1e-15));

        let one = MonomialPoly::constant(1, 1.0).to_hermite().unwrap();
        assert_eq!(one, HermitePoly::constant(1, 1.0));
    }

    #[test]
    fn to_monomial_examples() {
        let h2 = HermitePoly::<f64>::basis(1, ms(&[(1, 2)])).unwrap().to_monomial().unwrap();
        let r = 1.0 / 2f64.sqrt();
        assert!(approx_eq(h2.coeff(&ms(&[(1, 2)])), r, 1e-15));
        assert!(approx_eq(h2.coeff(&MultisetIndex::empty()), -r, 1e-15));

        let back = HermitePoly::from_terms(1, [(ms(&[(1, 2)]), 2f64.sqrt()), (MultisetIndex::empty(), 1.0)])
            .unwrap()
            .to_monomial()
            .unwrap();
        assert!(approx_eq(back.coeff(&ms(&[(1, 2)])), 1.0, 1e-12));
        assert!(back.coeff(&MultisetIndex::empty()).abs() < 1e-12);
    }

    #[test]
    fn norm_examples() {
        let f = HermitePoly::from_terms(2, [(ms(&[(1, 1)]), 3.0)]).unwrap();
        assert_eq!(f.norm(), 3.0);
        assert_eq!(HermitePoly::<f64>::zero(3).norm(), 0.0);
    }

    #[test]
    fn multiply_examples() {
        let h1 = HermitePoly::<f64>::basis(1, ms(&[(1, 1)])).unwrap();
        let sq = h1.multiply(&h1).unwrap();
        assert!(approx_eq(sq.coeff(&ms(&[(1, 2)])), 2f64.sqrt(), 1e-15));
        assert!(approx_eq(sq.coeff(&MultisetIndex::empty()), 1.0, 1e-15));
        assert_eq!(h1.multiply(&HermitePoly::constant(1, 1.0)).unwrap(), h1);

        let x1 = MonomialPoly::monomial(2, ms(&[(1, 1)]), 1.0).unwrap();
        let x2 = MonomialPoly::monomial(2, ms(&[(2, 1)]), 1.0).unwrap();
        let a = x1.add(&x2).unwrap().to_hermite().unwrap();
        let b = x1.sub(&x2).unwrap().to_hermite().unwrap();
        let prod = a.multiply(&b).unwrap().to_monomial().unwrap();
        let want = x1.multiply(&x1).unwrap().sub(&x2.multiply(&x2).unwrap()).unwrap();
        assert_eq!(prod.terms().len(), want.terms().len());
        for (i, c) in want.terms() {
            assert!(approx_eq(prod.coeff(i), *c, 1e-12));
        }
    }

    #[test]
    fn evaluate_examples() {
        let one = HermitePoly::constant(3, 1.0);
        assert_eq!(one.evaluate(&[0.3, -1.0, 7.0]).unwrap(), 1.0);
        let x1sq = MonomialPoly::monomial(3, ms(&[(1, 2)]), 1.0).unwrap().to_hermite().unwrap();
        assert!(approx_eq(x1sq.evaluate(&[2.0, 0.5, 0.1]).unwrap(), 4.0, 1e-14));
        assert!(matches!(x1sq.evaluate(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn exact_coefficients_convert() {
        let half = BigRational::new(BigInt::from(1), BigInt::from(2));
        let p = MonomialPoly::from_terms(2, [(ms(&[(1, 2), (2, 1)]), half.clone()), (MultisetIndex::empty(), -half)])
            .unwrap();
        let f = p.to_f64();
        assert_eq!(f.coeff(&ms(&[(1, 2), (2, 1)])), 0.5);
        assert_eq!(f.evaluate(&[2.0, 1.0]).unwrap(), 1.5);
    }

    #[test]
    fn generic_over_f32() {
        let p = MonomialPoly::<f32>::from_terms(2, [(ms(&[(1, 2)]), 1.0f32), (ms(&[(2, 1)]), -2.0)]).unwrap();
        let h = p.to_hermite().unwrap();
        let pt = [0.7f32, -0.4];
        let direct = p.evaluate(&pt).unwrap();
        assert!((h.evaluate(&pt).unwrap() - direct).abs() < 1e-5);
    }

    #[test]
    fn json_round_trip() {
        let p = HermitePoly::from_terms(4, [(ms(&[(1, 1), (4, 2)]), 0.1 + 0.2), (MultisetIndex::empty(), -1.0 / 3.0)])
            .unwrap();
        let poly = Polynomial::Hermite(p);
        let text = poly.to_json();
        assert_eq!(Polynomial::from_json(&text).unwrap(), poly);
        assert!(text.contains("\"basis\": \"hermite\""));
    }

    #[test]
    fn json_schema_violations() {
        assert!(matches!(Polynomial::from_json("{}"), Err(Error::Schema(_))));
        let bad_var = r#"{"n": 2, "basis": "monomial", "terms": [{"vars": [[3, 1]], "coeff": 1.0}]}"#;
        assert!(matches!(Polynomial::from_json(bad_var), Err(Error::Schema(_))));
        let unsorted = r#"{"n": 2, "basis": "monomial", "terms": [{"vars": [[2, 1], [1, 1]], "coeff": 1.0}]}"#;
        assert!(matches!(Polynomial::from_json(unsorted), Err(Error::Schema(_))));
        let basis = r#"{"n": 2, "basis": "chebyshev", "terms": []}"#;
        assert!(matches!(Polynomial::from_json(basis), Err(Error::Schema(_))));
    }
}
