//! Exact magnitudes `q · 4^e4 · k^ek · (d³)^eD` with rational `q` and rational
//! exponents, where `k = base^(1/root)`.
//!
//! Certificate values such as `(k d³)^(3 d³)` overflow every float format, so
//! they are kept symbolic. Integer powers of 2 and of `base` are folded into the
//! coefficient, which keeps the representation canonical enough for like terms
//! to cancel exactly. Signs and sizes of sums are decided by a high-precision
//! log evaluation.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use astro_float_num::{BigFloat, Consts, Radix, RoundingMode};
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Working precision (bits) for log-domain evaluation.
pub const LOG_PRECISION: usize = 320;
const RM: RoundingMode = RoundingMode::ToEven;

/// `k = base^(1/root)` and the cube `d³`, shared by every value of one
/// certificate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogScale {
    base: BigRational,
    root: u32,
    cube: BigUint,
}

impl LogScale {
    pub fn new(base: BigRational, root: u32, d: u64) -> Result<Self> {
        if !base.is_positive() || root == 0 || d == 0 {
            return Err(Error::InvalidParameter(format!("bad log scale: base {base}, root {root}, d {d}")));
        }
        Ok(LogScale { base, root, cube: BigUint::from(d).pow(3) })
    }

    /// Scale for certificates whose values are plain rationals.
    pub fn trivial() -> Arc<Self> {
        Arc::new(LogScale { base: BigRational::one(), root: 1, cube: BigUint::one() })
    }

    pub fn base(&self) -> &BigRational {
        &self.base
    }

    pub fn root(&self) -> u32 {
        self.root
    }

    pub fn cube(&self) -> &BigUint {
        &self.cube
    }

    /// `k` written as `base^(1/root)`.
    pub fn k_string(&self) -> String {
        if self.root == 1 {
            self.base.to_string()
        } else {
            format!("{}^(1/{})", self.base, self.root)
        }
    }
}

/// Exponents of `4`, `k` and `d³`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Exponents {
    pub four: BigRational,
    pub k: BigRational,
    pub cube: BigRational,
}

impl Exponents {
    pub fn zero() -> Self {
        Exponents { four: BigRational::zero(), k: BigRational::zero(), cube: BigRational::zero() }
    }

    pub fn is_zero(&self) -> bool {
        self.four.is_zero() && self.k.is_zero() && self.cube.is_zero()
    }

    fn add(&self, o: &Exponents) -> Exponents {
        Exponents { four: &self.four + &o.four, k: &self.k + &o.k, cube: &self.cube + &o.cube }
    }
}

fn rational_pow(base: &BigRational, e: &BigInt) -> BigRational {
    let mag = e.abs().to_usize().expect("exponent fits in usize");
    let p = num_traits::pow(base.clone(), mag);
    if e.is_negative() {
        p.recip()
    } else {
        p
    }
}

/// One signed term `coeff · 4^e4 · k^ek · (d³)^eD`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogSigned {
    coeff: BigRational,
    exp: Exponents,
    scale: Arc<LogScale>,
}

impl LogSigned {
    pub fn new(coeff: BigRational, exp: Exponents, scale: Arc<LogScale>) -> Self {
        LogSigned { coeff, exp, scale }.normalized()
    }

    pub fn rational(q: BigRational, scale: Arc<LogScale>) -> Self {
        Self::new(q, Exponents::zero(), scale)
    }

    pub fn one(scale: Arc<LogScale>) -> Self {
        Self::rational(BigRational::one(), scale)
    }

    pub fn zero(scale: Arc<LogScale>) -> Self {
        Self::rational(BigRational::zero(), scale)
    }

    fn normalized(mut self) -> Self {
        if self.coeff.is_zero() {
            self.exp = Exponents::zero();
            return self;
        }
        let two = BigRational::from_integer(2.into());
        let twice = &self.exp.four * &two;
        if twice.is_integer() {
            self.coeff *= rational_pow(&two, &twice.to_integer());
            self.exp.four = BigRational::zero();
        }
        let root = BigRational::from_integer(self.scale.root.into());
        let j = (&self.exp.k / &root).floor();
        if !j.is_zero() && !self.scale.base.is_one() {
            self.coeff *= rational_pow(&self.scale.base, &j.to_integer());
            self.exp.k -= j * root;
        } else if self.scale.base.is_one() {
            self.exp.k = BigRational::zero();
        }
        self
    }

    pub fn coeff(&self) -> &BigRational {
        &self.coeff
    }

    pub fn exponents(&self) -> &Exponents {
        &self.exp
    }

    pub fn scale(&self) -> &Arc<LogScale> {
        &self.scale
    }

    pub fn sign(&self) -> i8 {
        if self.coeff.is_zero() {
            0
        } else if self.coeff.is_positive() {
            1
        } else {
            -1
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeff.is_zero()
    }

    /// The value as a rational, if no symbolic factor is left.
    pub fn as_rational(&self) -> Option<&BigRational> {
        self.exp.is_zero().then_some(&self.coeff)
    }

    pub fn mul(&self, other: &LogSigned) -> LogSigned {
        debug_assert_eq!(self.scale, other.scale);
        LogSigned::new(&self.coeff * &other.coeff, self.exp.add(&other.exp), self.scale.clone())
    }

    pub fn scale_by(&self, q: &BigRational) -> LogSigned {
        LogSigned::new(&self.coeff * q, self.exp.clone(), self.scale.clone())
    }

    /// `log2 |value|` at working precision; `None` for zero.
    pub fn log2_abs(&self, hp: &mut HighPrecision) -> Option<BigFloat> {
        if self.is_zero() {
            return None;
        }
        let mut acc = hp.log2_rational(&self.coeff.abs());
        let four = hp.rational(&(&self.exp.four * BigRational::from_integer(2.into())));
        acc = acc.add(&four, hp.p, RM);
        if !self.exp.k.is_zero() {
            let e = hp.rational(&(&self.exp.k / BigRational::from_integer(self.scale.root.into())));
            let lb = hp.log2_rational(&self.scale.base);
            acc = acc.add(&e.mul(&lb, hp.p, RM), hp.p, RM);
        }
        if !self.exp.cube.is_zero() {
            let e = hp.rational(&self.exp.cube);
            let lc = hp.log2_biguint(&self.scale.cube);
            acc = acc.add(&e.mul(&lc, hp.p, RM), hp.p, RM);
        }
        Some(acc)
    }

    pub fn value(&self, hp: &mut HighPrecision) -> LogValue {
        match self.log2_abs(hp) {
            None => LogValue::zero(),
            Some(l) => LogValue { sign: self.sign(), log2: l },
        }
    }
}

impl fmt::Display for LogSigned {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.coeff)?;
        if !self.exp.four.is_zero() {
            write!(f, "·4^({})", self.exp.four)?;
        }
        if !self.exp.k.is_zero() {
            write!(f, "·k^({})", self.exp.k)?;
        }
        if !self.exp.cube.is_zero() {
            write!(f, "·{}^({})", self.scale.cube, self.exp.cube)?;
        }
        Ok(())
    }
}

/// Exact sum of [`LogSigned`] terms, like terms combined.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogSum {
    terms: BTreeMap<Exponents, BigRational>,
    scale: Arc<LogScale>,
}

impl LogSum {
    pub fn zero(scale: Arc<LogScale>) -> Self {
        LogSum { terms: BTreeMap::new(), scale }
    }

    pub fn rational(q: BigRational, scale: Arc<LogScale>) -> Self {
        LogSigned::rational(q, scale).into()
    }

    pub fn scale(&self) -> &Arc<LogScale> {
        &self.scale
    }

    pub fn push(&mut self, t: &LogSigned) {
        if t.is_zero() {
            return;
        }
        let slot = self.terms.entry(t.exp.clone()).or_insert_with(BigRational::zero);
        *slot += &t.coeff;
        if slot.is_zero() {
            self.terms.remove(&t.exp);
        }
    }

    pub fn add(&self, other: &LogSum) -> LogSum {
        let mut out = self.clone();
        for t in other.terms() {
            out.push(&t);
        }
        out
    }

    pub fn scale_by(&self, q: &BigRational) -> LogSum {
        let mut out = LogSum::zero(self.scale.clone());
        for t in self.terms() {
            out.push(&t.scale_by(q));
        }
        out
    }

    pub fn mul(&self, other: &LogSum) -> LogSum {
        let mut out = LogSum::zero(self.scale.clone());
        for a in self.terms() {
            for b in other.terms() {
                out.push(&a.mul(&b));
            }
        }
        out
    }

    pub fn square(&self) -> LogSum {
        self.mul(self)
    }

    pub fn terms(&self) -> impl Iterator<Item = LogSigned> + '_ {
        self.terms.iter().map(|(e, c)| LogSigned { coeff: c.clone(), exp: e.clone(), scale: self.scale.clone() })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// The exact rational value, when every symbolic factor has cancelled.
    pub fn as_rational(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => self.terms.get(&Exponents::zero()).cloned(),
            _ => None,
        }
    }

    /// The single term, if there is exactly one.
    pub fn single(&self) -> Option<LogSigned> {
        (self.terms.len() == 1).then(|| self.terms().next().unwrap())
    }

    /// Sign and `log2 |sum|` at working precision.
    ///
    /// Terms are rescaled by the largest magnitude before summing, so huge
    /// exponents never reach the float range. Fails if cancellation eats the
    /// whole precision budget.
    pub fn value(&self, hp: &mut HighPrecision) -> Result<LogValue> {
        if self.terms.is_empty() {
            return Ok(LogValue::zero());
        }
        let logs: Vec<(i8, BigFloat)> = self.terms().map(|t| (t.sign(), t.log2_abs(hp).unwrap())).collect();
        if logs.len() == 1 {
            let (s, l) = logs.into_iter().next().unwrap();
            return Ok(LogValue { sign: s, log2: l });
        }
        let mut top = logs[0].1.clone();
        for (_, l) in &logs[1..] {
            if l.cmp(&top) == Some(1) {
                top = l.clone();
            }
        }
        let floor = BigFloat::from_i64(-(hp.p as i64) - 64, hp.p);
        let mut acc = BigFloat::from_i64(0, hp.p);
        for (s, l) in &logs {
            let rel = l.sub(&top, hp.p, RM);
            if rel.cmp(&floor) == Some(-1) {
                continue;
            }
            let mut v = hp.exp2(&rel);
            if *s < 0 {
                v = v.neg();
            }
            acc = acc.add(&v, hp.p, RM);
        }
        let cutoff = hp.exp2(&BigFloat::from_i64(-(hp.p as i64) / 2, hp.p));
        if acc.abs().cmp(&cutoff) != Some(1) {
            return Err(Error::InvalidParameter(format!(
                "sign of a {}-term sum is not resolved at {} bits",
                self.terms.len(),
                hp.p
            )));
        }
        let sign = if acc.is_negative() { -1 } else { 1 };
        let log2 = acc.abs().log2(hp.p, RM, &mut hp.cc).add(&top, hp.p, RM);
        Ok(LogValue { sign, log2 })
    }
}

impl From<LogSigned> for LogSum {
    fn from(t: LogSigned) -> Self {
        let mut s = LogSum::zero(t.scale.clone());
        s.push(&t);
        s
    }
}

impl fmt::Display for LogSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, t) in self.terms().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

/// A real number by sign and high-precision `log2` of its magnitude.
#[derive(Clone, Debug)]
pub struct LogValue {
    pub sign: i8,
    pub log2: BigFloat,
}

impl LogValue {
    pub fn zero() -> Self {
        LogValue { sign: 0, log2: BigFloat::from_i64(0, LOG_PRECISION) }
    }

    pub fn is_negative(&self) -> bool {
        self.sign < 0
    }

    pub fn is_positive(&self) -> bool {
        self.sign > 0
    }

    /// `log2 |x|` rounded to `f64` (`-inf` for zero).
    pub fn log2_f64(&self) -> f64 {
        if self.sign == 0 {
            return f64::NEG_INFINITY;
        }
        bigfloat_to_f64(&self.log2)
    }

    /// The value itself; overflows to `±inf` or underflows to `0`.
    pub fn to_f64(&self) -> f64 {
        if self.sign == 0 {
            return 0.0;
        }
        self.sign as f64 * self.log2_f64().exp2()
    }

    /// Orders two values, comparing logs when signs agree.
    pub fn compare(&self, other: &LogValue) -> Ordering {
        match self.sign.cmp(&other.sign) {
            Ordering::Equal if self.sign == 0 => Ordering::Equal,
            Ordering::Equal => {
                let c = self.log2.cmp(&other.log2).unwrap_or(0).signum();
                let c = if self.sign > 0 { c } else { -c };
                c.cmp(&0)
            }
            o => o,
        }
    }
}

/// Rounds a finite `BigFloat` to the nearest `f64` via its decimal form.
pub fn bigfloat_to_f64(x: &BigFloat) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    let mut cc = Consts::new().expect("constant cache");
    x.format(Radix::Dec, RM, &mut cc).ok().and_then(|s| s.parse::<f64>().ok()).unwrap_or(f64::NAN)
}

/// Scratch state for high-precision evaluation.
pub struct HighPrecision {
    p: usize,
    cc: Consts,
}

impl Default for HighPrecision {
    fn default() -> Self {
        Self::new()
    }
}

impl HighPrecision {
    pub fn new() -> Self {
        Self::with_precision(LOG_PRECISION)
    }

    pub fn with_precision(p: usize) -> Self {
        HighPrecision { p, cc: Consts::new().expect("constant cache") }
    }

    pub fn precision(&self) -> usize {
        self.p
    }

    /// Small rational (exponent-sized) to `BigFloat`.
    pub fn rational(&mut self, q: &BigRational) -> BigFloat {
        let n = self.integer(q.numer());
        let d = self.integer(q.denom());
        n.div(&d, self.p, RM)
    }

    fn integer(&mut self, i: &BigInt) -> BigFloat {
        match i.to_i64() {
            Some(v) => BigFloat::from_i64(v, self.p),
            None => BigFloat::parse(&i.to_string(), Radix::Dec, self.p, RM, &mut self.cc),
        }
    }

    /// `log2 x` for a positive integer of any size.
    pub fn log2_biguint(&mut self, x: &BigUint) -> BigFloat {
        let bits = x.bits();
        let keep = self.p as u64 + 64;
        let (top, shift) = if bits > keep { (x >> (bits - keep), bits - keep) } else { (x.clone(), 0) };
        let m = BigFloat::parse(&top.to_string(), Radix::Dec, self.p, RM, &mut self.cc);
        m.log2(self.p, RM, &mut self.cc).add(&BigFloat::from_u64(shift, self.p), self.p, RM)
    }

    /// `log2 |q|` for nonzero `q`.
    pub fn log2_rational(&mut self, q: &BigRational) -> BigFloat {
        let n = self.log2_biguint(q.numer().magnitude());
        let d = self.log2_biguint(q.denom().magnitude());
        n.sub(&d, self.p, RM)
    }

    pub fn exp2(&mut self, x: &BigFloat) -> BigFloat {
        let two = BigFloat::from_u8(2, self.p);
        two.pow(x, self.p, RM, &mut self.cc)
    }
}
