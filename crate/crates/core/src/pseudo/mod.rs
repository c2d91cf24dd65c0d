//! Pseudo-expectations, their moment matrices, and distance-from-SOS bounds.
//!
//! Values are exact ([`LogSum`]); only the final scaled moment matrix and the
//! reported logs are rounded.

pub mod logsigned;
pub mod motzkin;
pub mod xor;

use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::hermite::{enumerate_multisets, gaussian_moment, hermite_coefficients, MultisetIndex};
use crate::linalg::{Matrix, SymmetricEigen};
use crate::poly::MonomialPoly;

pub use logsigned::{HighPrecision, LogScale, LogSigned, LogSum, LogValue};
pub use motzkin::{distance_floor_log2, motzkin_polynomial, MotzkinPe, ParityBlockPe};
pub use xor::{xor_closure, xor_instance, xor_polynomial, ClosureOutcome, XorEquation, XorPe};

/// Eigenvalue tolerance for the scaled moment matrix.
pub const PSD_TOLERANCE: f64 = 1e-8;

/// Scaled entries beyond this magnitude are clipped before the eigensolve.
const SCALED_CLIP: f64 = 1e150;

/// A linear functional on polynomials of degree at most `2 · half_degree`.
#[derive(Clone, Debug)]
pub enum PseudoExpectation {
    Motzkin(MotzkinPe),
    ParityBlock(ParityBlockPe),
    Xor(XorPe),
    /// The true Gaussian expectation; a sanity baseline.
    Gaussian {
        n: usize,
        half_degree: usize,
    },
}

impl PseudoExpectation {
    pub fn half_degree(&self) -> usize {
        match self {
            PseudoExpectation::Motzkin(p) => p.half_degree(),
            PseudoExpectation::ParityBlock(p) => p.half_degree(),
            PseudoExpectation::Xor(p) => p.half_degree(),
            PseudoExpectation::Gaussian { half_degree, .. } => *half_degree,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            PseudoExpectation::Motzkin(p) => p.n(),
            PseudoExpectation::ParityBlock(p) => p.n(),
            PseudoExpectation::Xor(p) => p.n(),
            PseudoExpectation::Gaussian { n, .. } => *n,
        }
    }

    pub fn scale(&self) -> Arc<LogScale> {
        match self {
            PseudoExpectation::Motzkin(p) => p.scale().clone(),
            _ => LogScale::trivial(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            PseudoExpectation::Motzkin(_) => "motzkin",
            PseudoExpectation::ParityBlock(_) => "motzkin-block",
            PseudoExpectation::Xor(_) => "xor",
            PseudoExpectation::Gaussian { .. } => "gaussian",
        }
    }

    /// Variables on which `Ẽ` differs from the Gaussian expectation.
    fn special_vars(&self) -> Option<u32> {
        match self {
            PseudoExpectation::Motzkin(_) | PseudoExpectation::ParityBlock(_) => Some(2),
            PseudoExpectation::Gaussian { .. } => Some(0),
            PseudoExpectation::Xor(_) => None,
        }
    }

    fn check_index(&self, index: &MultisetIndex) -> Result<()> {
        let max = 2 * self.half_degree();
        if index.degree() > max {
            return Err(Error::DegreeOverflow { degree: index.degree(), max });
        }
        if index.max_var() as usize > self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), found: index.max_var() as usize });
        }
        Ok(())
    }

    /// `Ẽ[x_I]`.
    pub fn moment(&self, index: &MultisetIndex) -> Result<LogSum> {
        self.check_index(index)?;
        let scale = self.scale();
        Ok(match self {
            PseudoExpectation::Motzkin(p) => motzkin::motzkin_moment(p, index),
            PseudoExpectation::ParityBlock(p) => {
                let (a, b, rest) = motzkin::split_xy(index);
                match motzkin::gaussian_rest(&rest) {
                    Some(g) => LogSum::rational(p.two_var(a, b)? * g, scale),
                    None => LogSum::zero(scale),
                }
            }
            PseudoExpectation::Xor(p) => LogSum::rational(BigRational::from_integer(p.moment(index).into()), scale),
            PseudoExpectation::Gaussian { .. } => {
                let all: Vec<u32> = index.entries().iter().map(|e| e.1).collect();
                match motzkin::gaussian_rest(&all) {
                    Some(g) => LogSum::rational(g, scale),
                    None => LogSum::zero(scale),
                }
            }
        })
    }

    /// Exported parameters as JSON.
    pub fn certificate_json(&self) -> serde_json::Value {
        match self {
            PseudoExpectation::Motzkin(p) => json!({
                "kind": self.kind(),
                "parameters": {
                    "r": p.r(),
                    "c": p.c().to_string(),
                    "k": p.scale().k_string(),
                    "nu": p.nu(),
                    "n": p.n(),
                    "half_degree": p.half_degree(),
                }
            }),
            PseudoExpectation::ParityBlock(p) => {
                let moments: Vec<_> =
                    p.moments().iter().map(|((a, b), v)| json!({ "x": a, "y": b, "value": v.to_string() })).collect();
                json!({
                    "kind": self.kind(),
                    "parameters": { "r": p.r(), "c": p.c().to_string(), "n": p.n(), "half_degree": p.half_degree() },
                    "moments": moments,
                })
            }
            PseudoExpectation::Xor(p) => {
                let assignments: Vec<_> =
                    p.closure().sorted().into_iter().map(|(vars, sign)| json!({ "set": vars, "sign": sign })).collect();
                json!({
                    "kind": self.kind(),
                    "parameters": { "n": p.n(), "m": p.equations().len(), "d": p.d(), "half_degree": p.half_degree() },
                    "equations": p.equations(),
                    "assignments": assignments,
                })
            }
            PseudoExpectation::Gaussian { n, half_degree } => json!({
                "kind": self.kind(),
                "parameters": { "n": n, "half_degree": half_degree },
            }),
        }
    }
}

/// `Ẽ[f]`, exactly.
pub fn pe_apply(pe: &PseudoExpectation, f: &MonomialPoly<BigRational>) -> Result<LogSum> {
    if f.n() > pe.n() {
        return Err(Error::DimensionMismatch { expected: pe.n(), found: f.n() });
    }
    let mut acc = LogSum::zero(pe.scale());
    for (index, c) in f.terms() {
        acc = acc.add(&pe.moment(index)?.scale_by(c));
    }
    Ok(acc)
}

/// `Ẽ[h_I] = Ẽ[Π He_m(x_v)] / √(Π m!)`, kept as the pair.
#[derive(Clone, Debug)]
pub struct HermiteMoment {
    /// `Ẽ[Π He_m(x_v)]`.
    pub monic: LogSum,
    /// `Π m!`.
    pub norm_sq: BigUint,
}

impl HermiteMoment {
    /// `Ẽ[h_I]²`, exactly.
    pub fn square(&self) -> LogSum {
        self.monic.square().scale_by(&BigRational::new(BigInt::one(), BigInt::from(self.norm_sq.clone())))
    }

    pub fn is_zero(&self) -> bool {
        self.monic.is_zero()
    }

    pub fn value(&self, hp: &mut HighPrecision) -> Result<f64> {
        let v = self.monic.value(hp)?.to_f64();
        Ok(v / num_traits::ToPrimitive::to_f64(&self.norm_sq).unwrap_or(f64::INFINITY).sqrt())
    }
}

fn factorial(m: u32) -> BigUint {
    (1..=m as u64).fold(BigUint::one(), |a, i| a * i)
}

/// `Ẽ[h_I]` by expanding `h_I` into monomials.
pub fn pe_hermite(pe: &PseudoExpectation, index: &MultisetIndex) -> Result<HermiteMoment> {
    pe.check_index(index)?;
    let norm_sq = index.entries().iter().fold(BigUint::one(), |a, e| a * factorial(e.1));
    if let Some(last) = pe.special_vars() {
        // E[He_m] = 0 for m > 0 under the Gaussian factor.
        if index.entries().iter().any(|e| e.0 > last) {
            return Ok(HermiteMoment { monic: LogSum::zero(pe.scale()), norm_sq });
        }
    }
    let mut monomials: Vec<(Vec<(u32, u32)>, BigInt)> = vec![(Vec::new(), BigInt::one())];
    for &(v, m) in index.entries() {
        let coeffs = hermite_coefficients(m as usize);
        let mut next = Vec::new();
        for (entries, c) in &monomials {
            for (p, hc) in coeffs.iter().enumerate() {
                if hc.is_zero() {
                    continue;
                }
                let mut e = entries.clone();
                if p > 0 {
                    e.push((v, p as u32));
                }
                next.push((e, c * hc));
            }
        }
        monomials = next;
    }
    let mut monic = LogSum::zero(pe.scale());
    for (entries, c) in monomials {
        let m = pe.moment(&MultisetIndex::new(entries)?)?;
        monic = monic.add(&m.scale_by(&BigRational::from_integer(c)));
    }
    Ok(HermiteMoment { monic, norm_sq })
}

/// `Σ_{|I| ≤ 2·half_degree} Ẽ[h_I]²` over the whole index set, exactly.
///
/// Indices touching a Gaussian-only variable contribute zero, so the
/// two-variable families sum over `(x, y)` exponents only; the parity family
/// uses its closed form.
pub fn hermite_square_sum(pe: &PseudoExpectation) -> Result<LogSum> {
    let max = 2 * pe.half_degree();
    match pe {
        PseudoExpectation::Xor(p) => Ok(LogSum::rational(p.hermite_square_sum(), pe.scale())),
        _ => {
            let vars = pe.special_vars().unwrap_or(0).min(pe.n() as u32).max(1) as usize;
            let mut acc = LogSum::zero(pe.scale());
            for index in enumerate_multisets(vars, 0, max) {
                acc = acc.add(&pe_hermite(pe, &index)?.square());
            }
            Ok(acc)
        }
    }
}

/// Rows and columns indexed by monomials; `entries[u][v] = Ẽ[x_u x_v]`.
#[derive(Clone, Debug)]
pub struct MomentMatrix {
    pub index: Vec<MultisetIndex>,
    pub entries: Vec<Vec<LogSum>>,
}

impl MomentMatrix {
    pub fn size(&self) -> usize {
        self.index.len()
    }

    /// All entries as rationals, when no symbolic factor is present.
    pub fn rational_entries(&self) -> Option<Vec<Vec<BigRational>>> {
        self.entries.iter().map(|row| row.iter().map(|e| e.as_rational()).collect()).collect()
    }
}

/// The default index set: `(x, y)` monomials up to the half degree for the
/// two-variable families, sets up to the half degree for parity, all
/// monomials otherwise.
pub fn moment_index(pe: &PseudoExpectation) -> Vec<MultisetIndex> {
    let hd = pe.half_degree();
    match pe {
        PseudoExpectation::Motzkin(_) | PseudoExpectation::ParityBlock(_) => enumerate_multisets(2, 0, hd),
        PseudoExpectation::Xor(p) => enumerate_multisets(p.n(), 0, hd).into_iter().filter(|i| i.is_set()).collect(),
        PseudoExpectation::Gaussian { n, .. } => enumerate_multisets(*n, 0, hd),
    }
}

pub fn moment_matrix(pe: &PseudoExpectation) -> Result<MomentMatrix> {
    moment_matrix_over(pe, &moment_index(pe))
}

/// `Ẽ[x_I x_J]` over an explicit index list.
pub fn moment_matrix_over(pe: &PseudoExpectation, index: &[MultisetIndex]) -> Result<MomentMatrix> {
    let mut entries = Vec::with_capacity(index.len());
    for i in index {
        let mut row = Vec::with_capacity(index.len());
        for j in index {
            row.push(pe.moment(&i.union(j))?);
        }
        entries.push(row);
    }
    Ok(MomentMatrix { index: index.to_vec(), entries })
}

#[derive(Clone, Debug, Serialize)]
pub struct PsdReport {
    pub size: usize,
    /// Smallest eigenvalue of `S_uv = M_uv / √(M_uu M_vv)`.
    pub min_scaled_eigenvalue: f64,
    /// `1 − max_u Σ_{v≠u} |S_uv|`.
    pub dominance_margin: f64,
    pub max_offdiagonal: f64,
    /// Verdict of an exact LDLᵀ when every entry is rational.
    pub exact_psd: Option<bool>,
    /// Rows dropped because their diagonal and every entry were zero.
    pub dropped: usize,
    /// Scaled entries clipped to ±1e150 before the eigensolve.
    pub clipped: usize,
    pub pass: bool,
    #[serde(skip)]
    pub scaled: Option<Matrix<f64>>,
    #[serde(skip)]
    pub kept: Vec<usize>,
}

fn exact_psd(mut a: Vec<Vec<BigRational>>) -> bool {
    let n = a.len();
    for k in 0..n {
        let pivot = a[k][k].clone();
        if pivot.is_negative() {
            return false;
        }
        if pivot.is_zero() {
            if (k + 1..n).any(|i| !a[i][k].is_zero()) {
                return false;
            }
            continue;
        }
        for i in k + 1..n {
            if a[i][k].is_zero() {
                continue;
            }
            let f = &a[i][k] / &pivot;
            for j in k + 1..n {
                let delta = &f * &a[k][j];
                a[i][j] -= delta;
            }
        }
    }
    true
}

/// Checks a moment matrix for positive semidefiniteness.
///
/// The eigensolve runs on the unit-diagonal rescaling, evaluated from exact
/// log ratios so huge entries never meet floating point; rational matrices
/// are additionally decided exactly.
pub fn psd_check(m: &MomentMatrix) -> Result<PsdReport> {
    let n = m.size();
    if m.entries.len() != n || m.entries.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, found: m.entries.len() });
    }
    for u in 0..n {
        for v in 0..u {
            if m.entries[u][v] != m.entries[v][u] {
                return Err(Error::InvalidParameter(format!("moment matrix is not symmetric at ({u}, {v})")));
            }
        }
    }
    let exact = m.rational_entries().map(exact_psd);
    let mut hp = HighPrecision::new();
    let mut diag = Vec::with_capacity(n);
    let mut kept = Vec::new();
    let mut failed = false;
    for u in 0..n {
        let v = m.entries[u][u].value(&mut hp)?;
        if v.is_negative() {
            failed = true;
        }
        if v.sign == 0 && m.entries[u].iter().all(|e| e.is_zero()) {
            diag.push(v);
            continue;
        }
        if v.sign == 0 {
            failed = true;
        }
        kept.push(u);
        diag.push(v);
    }
    if failed {
        return Ok(PsdReport {
            size: n,
            min_scaled_eigenvalue: f64::NEG_INFINITY,
            dominance_margin: f64::NEG_INFINITY,
            max_offdiagonal: f64::INFINITY,
            exact_psd: exact,
            dropped: n - kept.len(),
            clipped: 0,
            pass: false,
            scaled: None,
            kept,
        });
    }
    let k = kept.len();
    let mut clipped = 0;
    let mut s = Matrix::<f64>::identity(k);
    let p = hp.precision();
    let half = astro_float_num::BigFloat::from_f64(0.5, p);
    let rm = astro_float_num::RoundingMode::ToEven;
    for a in 0..k {
        for b in 0..a {
            let (u, v) = (kept[a], kept[b]);
            let e = m.entries[u][v].value(&mut hp)?;
            if e.sign == 0 {
                continue;
            }
            let norm = diag[u].log2.add(&diag[v].log2, p, rm).mul(&half, p, rm);
            let rel = logsigned::bigfloat_to_f64(&e.log2.sub(&norm, p, rm));
            let mut mag = rel.exp2();
            if mag > SCALED_CLIP {
                mag = SCALED_CLIP;
                clipped += 1;
            }
            let val = e.sign as f64 * mag;
            s[(a, b)] = val;
            s[(b, a)] = val;
        }
    }
    let (min_eig, margin, max_off) = if k == 0 {
        (f64::INFINITY, 1.0, 0.0)
    } else {
        let eig = SymmetricEigen::new(&s);
        let mut worst_row = 0.0f64;
        let mut max_off = 0.0f64;
        for a in 0..k {
            let mut row = 0.0;
            for b in 0..k {
                if a != b {
                    row += s[(a, b)].abs();
                    max_off = max_off.max(s[(a, b)].abs());
                }
            }
            worst_row = worst_row.max(row);
        }
        (eig.min(), 1.0 - worst_row, max_off)
    };
    let pass = match exact {
        Some(v) => v,
        None => min_eig >= -PSD_TOLERANCE && clipped == 0,
    };
    Ok(PsdReport {
        size: n,
        min_scaled_eigenvalue: min_eig,
        dominance_margin: margin,
        max_offdiagonal: max_off,
        exact_psd: exact,
        dropped: n - k,
        clipped,
        pass,
        scaled: Some(s),
        kept,
    })
}

/// Entry-wise bounds on the scaled two-variable moment matrix.
#[derive(Clone, Debug, Serialize)]
pub struct GradedBounds {
    /// Largest `|S|` over distinct pairs that are not both of the form `x^a y^a`.
    pub max_mixed: f64,
    pub mixed_bound: f64,
    /// Largest `|S| · 4^|a−b|` over pairs `(x^a y^a, x^b y^b)`, `a ≠ b`.
    pub max_balanced_ratio: f64,
    pub holds: bool,
}

/// Compares the scaled matrix with `1/(2d²)` for mixed pairs and
/// `4^(−|a−b|)` for balanced pairs, `d` the polynomial degree.
pub fn graded_bounds(m: &MomentMatrix, report: &PsdReport, degree: u32) -> Option<GradedBounds> {
    let s = report.scaled.as_ref()?;
    let mixed_bound = 1.0 / (2.0 * (degree as f64).powi(2));
    let mut max_mixed = 0.0f64;
    let mut max_balanced_ratio = 0.0f64;
    for (a, &u) in report.kept.iter().enumerate() {
        for (b, &v) in report.kept.iter().enumerate() {
            if a == b {
                continue;
            }
            let (iu, iv) = (&m.index[u], &m.index[v]);
            let (a1, b1) = (iu.multiplicity(1), iu.multiplicity(2));
            let (a2, b2) = (iv.multiplicity(1), iv.multiplicity(2));
            let val = s[(a, b)].abs();
            if a1 == b1 && a2 == b2 {
                let gap = (a1 as i32 - a2 as i32).abs();
                max_balanced_ratio = max_balanced_ratio.max(val * 4f64.powi(gap));
            } else {
                max_mixed = max_mixed.max(val);
            }
        }
    }
    Some(GradedBounds {
        max_mixed,
        mixed_bound,
        max_balanced_ratio,
        holds: max_mixed <= mixed_bound && max_balanced_ratio <= 1.0,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DistanceReport {
    pub kind: &'static str,
    /// `Ẽ[f]`, exactly.
    pub pe_value: String,
    pub pe_value_log2: f64,
    /// `Σ Ẽ[h_I]²`.
    pub hermite_sum_log2: f64,
    pub hermite_sum_exact: Option<String>,
    /// `log2` of `Ẽ[f]² / Σ Ẽ[h_I]²`, a lower bound on the squared distance.
    pub squared_distance_log2: f64,
    pub squared_distance_exact: Option<String>,
    pub distance_log2: f64,
    /// Hermite norm of `f` and the distance relative to it.
    pub f_norm: f64,
    pub relative_distance_log2: f64,
    /// Closed-form floor on the distance, for the Motzkin families.
    pub floor_log2: Option<f64>,
    pub meets_floor: Option<bool>,
    pub psd: PsdReport,
    /// True when the moment matrix passed, i.e. the bound is a certificate.
    pub certified: bool,
}

/// `Ẽ[f]² / Σ_I Ẽ[h_I]²` and its context, whether or not the moment matrix is
/// PSD. Only [`distance_lower_bound`] turns this into a certificate.
pub fn distance_ratio(pe: &PseudoExpectation, f: &MonomialPoly<BigRational>) -> Result<DistanceReport> {
    let mut hp = HighPrecision::new();
    let value = pe_apply(pe, f)?;
    let v = value.value(&mut hp)?;
    if !v.is_negative() {
        return Err(Error::NotRefuted);
    }
    let sum = hermite_square_sum(pe)?;
    let s = sum.value(&mut hp)?;
    let num = value.square();
    let squared_exact = match (num.as_rational(), sum.as_rational()) {
        (Some(a), Some(b)) if !b.is_zero() => Some((a / b).to_string()),
        _ => None,
    };
    let sq_log2 = 2.0 * v.log2_f64() - s.log2_f64();
    let f_norm = f.to_f64().to_hermite()?.norm();
    let distance_log2 = sq_log2 / 2.0;
    let floor_log2 = match pe {
        PseudoExpectation::Motzkin(p) => {
            Some(distance_floor_log2(p.r(), num_traits::ToPrimitive::to_f64(p.c()).unwrap()))
        }
        PseudoExpectation::ParityBlock(p) => {
            Some(distance_floor_log2(p.r(), num_traits::ToPrimitive::to_f64(p.c()).unwrap()))
        }
        _ => None,
    };
    let psd = psd_check(&moment_matrix(pe)?)?;
    Ok(DistanceReport {
        kind: pe.kind(),
        pe_value: value.to_string(),
        pe_value_log2: v.log2_f64(),
        hermite_sum_log2: s.log2_f64(),
        hermite_sum_exact: sum.as_rational().map(|q| q.to_string()),
        squared_distance_log2: sq_log2,
        squared_distance_exact: squared_exact,
        distance_log2,
        f_norm,
        relative_distance_log2: distance_log2 - f_norm.log2(),
        floor_log2,
        meets_floor: floor_log2.map(|fl| distance_log2 >= fl),
        certified: psd.pass,
        psd,
    })
}

/// Certified lower bound: every SOS `g` of degree at most `2·half_degree`
/// has `||f − g||² ≥ Ẽ[f]² / Σ_I Ẽ[h_I]²`.
///
/// Errors with [`Error::NotRefuted`] when `Ẽ[f] ≥ 0` and [`Error::NotPsd`] when
/// the moment matrix fails its check.
pub fn distance_lower_bound(pe: &PseudoExpectation, f: &MonomialPoly<BigRational>) -> Result<DistanceReport> {
    let report = distance_ratio(pe, f)?;
    if !report.certified {
        return Err(Error::NotPsd { min_eigenvalue: report.psd.min_scaled_eigenvalue, tolerance: PSD_TOLERANCE });
    }
    Ok(report)
}

/// Exact `E[x_I]` under the standard Gaussian, for tests and baselines.
pub fn gaussian_expectation(index: &MultisetIndex) -> BigUint {
    index.entries().iter().fold(BigUint::one(), |a, e| a * gaussian_moment(e.1 as usize))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pseudo::motzkin::xy;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn motzkin_sqrt2(nu: Option<i64>) -> PseudoExpectation {
        PseudoExpectation::Motzkin(MotzkinPe::new(2, q(0, 1), q(2, 1), 2, nu, 3).unwrap())
    }

    #[test]
    fn motzkin_value_is_minus_three() {
        let pe = motzkin_sqrt2(None);
        let f = motzkin_polynomial(2, &q(0, 1), 3).unwrap();
        assert_eq!(pe_apply(&pe, &f).unwrap().as_rational(), Some(q(-3, 1)));
        let one = MonomialPoly::constant(3, q(1, 1));
        assert_eq!(pe_apply(&pe, &one).unwrap().as_rational(), Some(q(1, 1)));
        // x^r y^r = k^r = 2
        let m = MonomialPoly::monomial(3, xy(2, 2), q(1, 1)).unwrap();
        assert_eq!(pe_apply(&pe, &m).unwrap().as_rational(), Some(q(2, 1)));
    }

    #[test]
    fn motzkin_general_formula() {
        // c + (r+1)(1 - k^r) with k^r = 2 + c
        for (r, c) in [(2u32, 1i64), (4, 0), (4, 3)] {
            let pe = PseudoExpectation::Motzkin(MotzkinPe::with_default_k(r, q(c, 1), None, 2).unwrap());
            let f = motzkin_polynomial(r, &q(c, 1), 2).unwrap();
            let want = q(c, 1) + q(r as i64 + 1, 1) * (q(1, 1) - q(2 + c, 1));
            assert_eq!(pe_apply(&pe, &f).unwrap().as_rational(), Some(want));
        }
    }

    #[test]
    fn linearity() {
        let pe = motzkin_sqrt2(None);
        let f = motzkin_polynomial(2, &q(0, 1), 3).unwrap();
        let g = MonomialPoly::from_terms(3, [(xy(3, 1), q(2, 3)), (MultisetIndex::single(3, 2), q(-5, 1))]).unwrap();
        let (a, b) = (q(7, 2), q(-3, 1));
        let combo = f.scale(a.clone()).add(&g.scale(b.clone())).unwrap();
        let lhs = pe_apply(&pe, &combo).unwrap();
        let rhs = pe_apply(&pe, &f).unwrap().scale_by(&a).add(&pe_apply(&pe, &g).unwrap().scale_by(&b));
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn hermite_moment_third_variable_is_zero() {
        let pe = motzkin_sqrt2(None);
        let i = MultisetIndex::new(vec![(1, 2), (3, 1)]).unwrap();
        assert!(pe_hermite(&pe, &i).unwrap().is_zero());
        let e = pe_hermite(&pe, &MultisetIndex::empty()).unwrap();
        assert_eq!(e.monic.as_rational(), Some(q(1, 1)));
        // h_{x:2} = (x^2 - 1)/sqrt2, checked against a direct expansion
        let h = pe_hermite(&pe, &MultisetIndex::single(1, 2)).unwrap();
        let x2 = pe.moment(&MultisetIndex::single(1, 2)).unwrap();
        assert_eq!(h.monic, x2.add(&LogSum::rational(q(-1, 1), pe.scale())));
        assert_eq!(h.norm_sq, BigUint::from(2u32));
        // The third variable's even powers still see Gaussian moments.
        let z4 = pe.moment(&MultisetIndex::single(3, 4)).unwrap();
        assert_eq!(z4.as_rational(), Some(q(3, 1)));
    }

    #[test]
    fn gaussian_baseline_distance_is_one() {
        let pe = PseudoExpectation::Gaussian { n: 2, half_degree: 2 };
        let f = MonomialPoly::constant(2, q(-1, 1));
        let r = distance_lower_bound(&pe, &f).unwrap();
        assert_eq!(r.squared_distance_exact.as_deref(), Some("1"));
        assert!(r.distance_log2.abs() < 1e-12);
        assert!(r.psd.pass);
        let pos = MonomialPoly::constant(2, q(1, 1));
        assert_eq!(distance_lower_bound(&pe, &pos).unwrap_err(), Error::NotRefuted);
    }

    #[test]
    fn one_by_one_matrix() {
        let s = LogScale::trivial();
        let m = MomentMatrix { index: vec![MultisetIndex::empty()], entries: vec![vec![LogSum::rational(q(1, 1), s)]] };
        let r = psd_check(&m).unwrap();
        assert!(r.pass);
        assert_eq!(r.dominance_margin, 1.0);
    }

    #[test]
    fn asymmetric_matrix_rejected() {
        let s = LogScale::trivial();
        let e = |v| LogSum::rational(q(v, 1), s.clone());
        let m = MomentMatrix { index: enumerate_multisets(1, 0, 1), entries: vec![vec![e(1), e(0)], vec![e(1), e(1)]] };
        assert!(psd_check(&m).is_err());
    }

    #[test]
    fn exact_ldl() {
        let m = |rows: Vec<Vec<i64>>| rows.into_iter().map(|r| r.into_iter().map(|v| q(v, 1)).collect()).collect();
        assert!(exact_psd(m(vec![vec![2, 1], vec![1, 2]])));
        assert!(exact_psd(m(vec![vec![1, 1], vec![1, 1]])));
        assert!(!exact_psd(m(vec![vec![1, 2], vec![2, 1]])));
        assert!(!exact_psd(m(vec![vec![0, 1], vec![1, 5]])));
    }

    #[test]
    fn parity_block_certificate() {
        for c in [0, 1] {
            let pe = PseudoExpectation::ParityBlock(ParityBlockPe::new(q(c, 1), 10).unwrap());
            let f = motzkin_polynomial(2, &q(c, 1), 10).unwrap();
            assert_eq!(pe_apply(&pe, &f).unwrap().as_rational(), Some(q(-3, 1)));
            let report = distance_lower_bound(&pe, &f).unwrap();
            assert_eq!(report.psd.exact_psd, Some(true));
            assert!(report.psd.min_scaled_eigenvalue > 0.0);
            assert!(report.squared_distance_exact.is_some());
            assert!(report.distance_log2.is_finite());
        }
    }

    #[test]
    fn tensor_factorization_n3() {
        // Full moment matrix on (x, y, z) up to degree 2 equals the (x, y)
        // block times the Gaussian moments of z, entry by entry.
        let pe = motzkin_sqrt2(None);
        let index = enumerate_multisets(3, 0, 2);
        let full = moment_matrix_over(&pe, &index).unwrap();
        for (u, iu) in index.iter().enumerate() {
            for (v, iv) in index.iter().enumerate() {
                let two = xy(iu.multiplicity(1) + iv.multiplicity(1), iu.multiplicity(2) + iv.multiplicity(2));
                let block = pe.moment(&two).unwrap();
                let z = gaussian_moment((iu.multiplicity(3) + iv.multiplicity(3)) as usize);
                let want = block.scale_by(&BigRational::from_integer(z.into()));
                assert_eq!(full.entries[u][v], want);
            }
        }
    }

    #[test]
    fn xor_pe_value_and_matrix() {
        let eqs = vec![
            XorEquation::new(vec![1, 2, 3, 4], 1).unwrap(),
            XorEquation::new(vec![1, 2, 5, 6], -1).unwrap(),
            XorEquation::new(vec![7, 8, 9, 10], -1).unwrap(),
        ];
        let out = xor_closure(&eqs, 4);
        let pe = PseudoExpectation::Xor(XorPe::new(10, eqs.clone(), &out).unwrap());
        let p = xor_polynomial(&eqs, 10).unwrap();
        assert_eq!(pe_apply(&pe, &p).unwrap().as_rational(), Some(q(-3, 1)));
        let m = moment_matrix(&pe).unwrap();
        // M_IJ = E[x_{I Δ J}]
        for (u, iu) in m.index.iter().enumerate() {
            for (v, iv) in m.index.iter().enumerate() {
                let sd = iu.union(iv).parity();
                assert_eq!(m.entries[u][v], pe.moment(&sd).unwrap());
            }
        }
        let r = psd_check(&m).unwrap();
        assert!(r.pass && r.min_scaled_eigenvalue > -1e-8);
    }

    #[test]
    fn xor_square_sum_matches_brute_force() {
        let eqs = vec![XorEquation::new(vec![1, 2, 3, 4], -1).unwrap(), XorEquation::new(vec![2, 3, 4, 5], 1).unwrap()];
        let out = xor_closure(&eqs, 4);
        let xp = XorPe::new(6, eqs, &out).unwrap();
        let closed = xp.hermite_square_sum();
        let pe = PseudoExpectation::Xor(xp);
        let mut brute = LogSum::zero(pe.scale());
        for i in enumerate_multisets(6, 0, 4) {
            brute = brute.add(&pe_hermite(&pe, &i).unwrap().square());
        }
        assert_eq!(brute.as_rational(), Some(closed));
    }
}
