//! The generalized Motzkin polynomial and two pseudo-expectations for it.
//!
//! `f = (r/2) x^(r+2) y^r + (r/2) x^r y^(r+2) − (r+1) x^r y^r + (1+c)` lives on
//! variables 1 (`x`) and 2 (`y`) of an `n`-variable space; every other variable
//! is Gaussian under both certificates.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::logsigned::{Exponents, LogScale, LogSigned, LogSum};
use crate::error::{Error, Result};
use crate::hermite::MultisetIndex;
use crate::poly::MonomialPoly;

fn int(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

fn check_r(r: u32) -> Result<()> {
    if r < 2 || r % 2 == 1 {
        return Err(Error::InvalidParameter(format!("r must be even and at least 2, got {r}")));
    }
    Ok(())
}

fn check_c(c: &BigRational) -> Result<()> {
    if c.is_negative() {
        return Err(Error::InvalidParameter(format!("c must be nonnegative, got {c}")));
    }
    Ok(())
}

/// `x^a y^b` on variables 1 and 2.
pub fn xy(a: u32, b: u32) -> MultisetIndex {
    let mut e = Vec::new();
    if a > 0 {
        e.push((1, a));
    }
    if b > 0 {
        e.push((2, b));
    }
    MultisetIndex::new(e).expect("ordered")
}

/// The degree-`2r+2` polynomial, embedded in `n ≥ 2` variables.
pub fn motzkin_polynomial(r: u32, c: &BigRational, n: usize) -> Result<MonomialPoly<BigRational>> {
    check_r(r)?;
    check_c(c)?;
    if n < 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: n });
    }
    let half = BigRational::new(BigInt::from(r), BigInt::from(2));
    MonomialPoly::from_terms(
        n,
        [
            (xy(r + 2, r), half.clone()),
            (xy(r, r + 2), half),
            (xy(r, r), -int(r as i64 + 1)),
            (MultisetIndex::empty(), BigRational::one() + c),
        ],
    )
}

/// Splits `x_I` into its `(x, y)` exponents and the rest.
pub(crate) fn split_xy(index: &MultisetIndex) -> (u32, u32, Vec<u32>) {
    let mut rest = Vec::new();
    for &(v, m) in index.entries() {
        if v > 2 {
            rest.push(m);
        }
    }
    (index.multiplicity(1), index.multiplicity(2), rest)
}

/// The explicit two-variable moments with huge, graded magnitudes.
///
/// With `D = k d³`, `d = 2r+2`, `B = D^(3d³)`:
/// * `a > b`: `D^(a² + (a+b)² − ν) · B^(a − (r+2)b/r)`
/// * `b > a`: `D^(b² + (a+b)² − ν) · B^(b − (r+2)a/r)`
/// * `a = b > 0`: `4^(a² − r²) k^a`, and `1` at the origin.
///
/// The `b > a` case is the mirror image of `a > b`; with the other reading
/// `Ẽ[x^r y^(r+2)]` would not equal `Ẽ[x^(r+2) y^r]` and `Ẽ[f]` would no longer
/// come out as `c + (r+1)(1 − k^r)`.
#[derive(Clone, Debug)]
pub struct MotzkinPe {
    r: u32,
    c: BigRational,
    nu: i64,
    n: usize,
    scale: Arc<LogScale>,
}

impl MotzkinPe {
    /// `k = k_base^(1/k_root)` must exceed 1. `nu = None` picks
    /// [`MotzkinPe::balanced_nu`].
    pub fn new(r: u32, c: BigRational, k_base: BigRational, k_root: u32, nu: Option<i64>, n: usize) -> Result<Self> {
        check_r(r)?;
        check_c(&c)?;
        if k_root == 0 || k_base <= BigRational::one() {
            return Err(Error::InvalidParameter(format!("k must exceed 1, got {k_base}^(1/{k_root})")));
        }
        if n < 2 {
            return Err(Error::DimensionMismatch { expected: 2, found: n });
        }
        let d = 2 * r as u64 + 2;
        let scale = Arc::new(LogScale::new(k_base, k_root, d)?);
        Ok(MotzkinPe { r, c, nu: nu.unwrap_or_else(|| Self::balanced_nu(r)), n, scale })
    }

    /// `k = (2+c)^(1/r)`, the value behind the closed-form distance floor.
    pub fn with_default_k(r: u32, c: BigRational, nu: Option<i64>, n: usize) -> Result<Self> {
        let base = int(2) + &c;
        Self::new(r, c, base, r, nu, n)
    }

    /// `(r+2)² + (2r+2)²`: makes `Ẽ[x^(r+2) y^r] = 1`.
    pub fn balanced_nu(r: u32) -> i64 {
        let r = r as i64;
        (r + 2) * (r + 2) + (2 * r + 2) * (2 * r + 2)
    }

    /// `2d²`, the other normalization on offer.
    pub fn degree_squared_nu(r: u32) -> i64 {
        let d = 2 * r as i64 + 2;
        2 * d * d
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    pub fn c(&self) -> &BigRational {
        &self.c
    }

    pub fn nu(&self) -> i64 {
        self.nu
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> u32 {
        2 * self.r + 2
    }

    pub fn half_degree(&self) -> usize {
        self.r as usize + 1
    }

    pub fn scale(&self) -> &Arc<LogScale> {
        &self.scale
    }

    /// `Ẽ[x^a y^b]`.
    pub fn two_var(&self, a: u32, b: u32) -> LogSigned {
        let s = self.scale.clone();
        if a == b {
            if a == 0 {
                return LogSigned::one(s);
            }
            let (a, r) = (a as i64, self.r as i64);
            let e = Exponents { four: int(a * a - r * r), k: int(a), cube: BigRational::zero() };
            return LogSigned::new(BigRational::one(), e, s);
        }
        let (hi, lo) = if a > b { (a as i64, b as i64) } else { (b as i64, a as i64) };
        let r = self.r as i64;
        let d = 2 * r + 2;
        let base_exp = int(hi * hi + (hi + lo) * (hi + lo) - self.nu);
        let b_exp = int(hi) - BigRational::new(BigInt::from(r + 2), BigInt::from(r)) * int(lo);
        let total = base_exp + b_exp * int(3 * d * d * d);
        let e = Exponents { four: BigRational::zero(), k: total.clone(), cube: total };
        LogSigned::new(BigRational::one(), e, s)
    }
}

/// A second certificate for `r = 2`, with every moment a small rational.
///
/// Odd moments vanish. With `q = (6+c)/3`, `s = q² + 1`, `p = 2s²`, `u = 1`
/// and `t = 2(p² − 2pq + s)/(s − q²) + 1`:
///
/// `E[1]=1, E[x²]=E[y²]=s, E[x⁴]=E[y⁴]=p, E[x²y²]=q, E[x⁶]=E[y⁶]=t,
///  E[x⁴y²]=E[x²y⁴]=u`,
///
/// so `Ẽ[f] = 2u − 3q + 1 + c = −3`. The moment matrix splits into parity
/// blocks; each is positive definite, which [`super::psd_check`] confirms by
/// exact LDLᵀ.
#[derive(Clone, Debug)]
pub struct ParityBlockPe {
    c: BigRational,
    n: usize,
    moments: BTreeMap<(u32, u32), BigRational>,
}

impl ParityBlockPe {
    pub fn new(c: BigRational, n: usize) -> Result<Self> {
        check_c(&c)?;
        if n < 2 {
            return Err(Error::DimensionMismatch { expected: 2, found: n });
        }
        let one = BigRational::one();
        let q = (int(6) + &c) / int(3);
        let s = &q * &q + &one;
        let p = int(2) * &s * &s;
        let u = one.clone();
        let t = int(2) * (&p * &p * &u - int(2) * &p * &q * &u + &s * &u * &u) / (&s * &u - &q * &q) + &one;
        let mut moments = BTreeMap::new();
        moments.insert((0, 0), one);
        for (a, b, v) in [(2, 0, &s), (4, 0, &p), (6, 0, &t), (4, 2, &u)] {
            moments.insert((a, b), v.clone());
            moments.insert((b, a), v.clone());
        }
        moments.insert((2, 2), q);
        Ok(ParityBlockPe { c, n, moments })
    }

    pub fn c(&self) -> &BigRational {
        &self.c
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> u32 {
        2
    }

    pub fn half_degree(&self) -> usize {
        3
    }

    /// `Ẽ[x^a y^b]` for `a + b ≤ 6`.
    pub fn two_var(&self, a: u32, b: u32) -> Result<BigRational> {
        if a + b > 6 {
            return Err(Error::DegreeOverflow { degree: (a + b) as usize, max: 6 });
        }
        if a % 2 == 1 || b % 2 == 1 {
            return Ok(BigRational::zero());
        }
        Ok(self.moments[&(a, b)].clone())
    }

    /// The nonzero moments, keyed by `(a, b)`.
    pub fn moments(&self) -> &BTreeMap<(u32, u32), BigRational> {
        &self.moments
    }
}

/// `log2` of the closed-form distance floor `(d³ (2+c)^(1/r))^(−2d⁴)`.
pub fn distance_floor_log2(r: u32, c: f64) -> f64 {
    let d = 2.0 * r as f64 + 2.0;
    -2.0 * d.powi(4) * (3.0 * d.log2() + (2.0 + c).log2() / r as f64)
}

/// `Ẽ[x_I]` for the explicit Motzkin moments times Gaussian moments elsewhere.
pub(crate) fn motzkin_moment(pe: &MotzkinPe, index: &MultisetIndex) -> LogSum {
    let (a, b, rest) = split_xy(index);
    match gaussian_rest(&rest) {
        None => LogSum::zero(pe.scale.clone()),
        Some(g) => pe.two_var(a, b).scale_by(&g).into(),
    }
}

pub(crate) fn gaussian_rest(rest: &[u32]) -> Option<BigRational> {
    let mut acc = BigRational::one();
    for &m in rest {
        let g = crate::hermite::gaussian_moment(m as usize);
        if g.is_zero() {
            return None;
        }
        acc *= BigRational::from_integer(g.into());
    }
    Some(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pseudo::logsigned::HighPrecision;

    #[test]
    fn polynomial_shape() {
        let f = motzkin_polynomial(2, &BigRational::zero(), 2).unwrap();
        assert_eq!(f.terms().len(), 4);
        assert_eq!(f.coeff(&xy(4, 2)), int(1));
        assert_eq!(f.coeff(&xy(2, 4)), int(1));
        assert_eq!(f.coeff(&xy(2, 2)), int(-3));
        assert_eq!(f.coeff(&MultisetIndex::empty()), int(1));
        assert!(motzkin_polynomial(3, &BigRational::zero(), 2).is_err());
        assert!(motzkin_polynomial(2, &int(-1), 2).is_err());
    }

    #[test]
    fn key_moments() {
        let pe = MotzkinPe::new(2, BigRational::zero(), int(2), 2, None, 2).unwrap();
        assert_eq!(pe.nu(), 16 + 36);
        assert_eq!(pe.two_var(0, 0).as_rational(), Some(&int(1)));
        assert_eq!(pe.two_var(2, 2).as_rational(), Some(&int(2)));
        assert_eq!(pe.two_var(4, 2).as_rational(), Some(&int(1)));
        assert_eq!(pe.two_var(2, 4).as_rational(), Some(&int(1)));
        // x^1 y^1: 4^(1-4) sqrt2
        let t = pe.two_var(1, 1);
        let mut hp = HighPrecision::new();
        assert!((t.value(&mut hp).to_f64() - 2f64.sqrt() / 64.0).abs() < 1e-15);
    }

    #[test]
    fn k_at_most_one_rejected() {
        assert!(MotzkinPe::new(2, BigRational::zero(), int(1), 2, None, 2).is_err());
        assert!(MotzkinPe::new(2, BigRational::zero(), BigRational::new(1.into(), 2.into()), 1, None, 2).is_err());
    }

    #[test]
    fn parity_block_values() {
        let pe = ParityBlockPe::new(BigRational::zero(), 2).unwrap();
        assert_eq!(pe.two_var(2, 2).unwrap(), int(2));
        assert_eq!(pe.two_var(2, 0).unwrap(), int(5));
        assert_eq!(pe.two_var(4, 0).unwrap(), int(50));
        assert_eq!(pe.two_var(3, 1).unwrap(), int(0));
        assert!(pe.two_var(4, 4).is_err());
    }

    #[test]
    fn floor_value() {
        // d = 6: -2 * 1296 * (3 log2 6 + 1/2)
        let want = -2592.0 * (3.0 * 6f64.log2() + 0.5);
        assert!((distance_floor_log2(2, 0.0) - want).abs() < 1e-9);
    }
}
