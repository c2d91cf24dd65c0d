//! Minimum-norm interpolation through random Gaussian points.
//!
//! For sample points `p_1..p_m` and the index set `0 < |I| <= d`, the matrix
//! `H` has entries `H_{Ii} = h_I(p_i)`. Each point gets the dual function
//! `g_i = Σ_I h_I(p_i) h_I / C`, where `C` counts the index set (the expected
//! value of `Σ_I h_I(p)²`). With `M = HᵀH / C` and `Mx = v`, the polynomial
//! `g = Σ_i x_i g_i` has coefficient vector `Hx / C`, matches `v` on the
//! samples and has `||g||² = vᵀM⁻¹v / C`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::hermite::{enumerate_multisets, multiset_count, univariate_values, MultisetIndex};
use crate::linalg::{cholesky, cholesky_solve, dot, norm2, Matrix, SymmetricEigen};
use crate::poly::HermitePoly;
use crate::sampling::SampleSet;
use crate::scalar::Scalar;

/// Smallest eigenvalue of `M` accepted by [`interpolate`].
pub const MIN_EIGENVALUE: f64 = 1e-8;

const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITER: usize = 10_000;

/// `Σ_{i=1}^{d} binom(n+i-1, i)`, the number of multisets with `0 < |I| <= d`.
pub fn capacity(n: usize, d: usize) -> f64 {
    (1..=d).map(|i| multiset_count(n, i) as f64).sum()
}

/// Row index of `H`: every multiset with `0 < |I| <= d`, canonical order.
pub fn row_index(n: usize, d: usize) -> Vec<MultisetIndex> {
    enumerate_multisets(n, 1, d)
}

/// `H_{Ii} = h_I(p_i)`, rows following [`row_index`].
pub fn build_h<T: Scalar>(samples: &SampleSet<T>, d: usize) -> Matrix<T> {
    let index = row_index(samples.n, d);
    let mut h = Matrix::zeros(index.len(), samples.m);
    for (i, p) in samples.points.iter().enumerate() {
        let table: Vec<Vec<T>> = p.iter().map(|&x| univariate_values(x, d)).collect();
        for (r, idx) in index.iter().enumerate() {
            h[(r, i)] =
                idx.entries().iter().map(|&(v, m)| table[v as usize - 1][m as usize]).fold(T::one(), |a, b| a * b);
        }
    }
    h
}

/// `M = HᵀH / C`.
pub fn build_m<T: Scalar>(h: &Matrix<T>, c: T) -> Matrix<T> {
    h.gram().scale(T::one() / c)
}

/// Largest singular value by power iteration on `AᵀA` (or `AAᵀ`, whichever is
/// smaller). Stops once the relative change of the Rayleigh quotient drops
/// below `1e-12`.
pub fn spectral_norm<T: Scalar>(a: &Matrix<T>) -> Result<T> {
    if !a.is_finite() {
        return Err(Error::InvalidParameter("matrix has non-finite entries".into()));
    }
    if a.rows() == 0 || a.cols() == 0 {
        return Ok(T::zero());
    }
    let g = if a.rows() >= a.cols() { a.gram() } else { a.transpose().gram() };
    let k = g.rows();
    // Deterministic start with no special alignment to coordinate axes.
    let mut v: Vec<T> = (0..k).map(|i| T::lit(1.0 + ((i as f64 + 1.0) * 0.618_033_988_749_895).fract())).collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x = *x / nv);
    let mut lambda = T::zero();
    for _ in 0..POWER_MAX_ITER {
        let w = g.matvec(&v);
        let next = dot(&v, &w);
        let nw = norm2(&w);
        if nw == T::zero() {
            return Ok(T::zero());
        }
        v = w.into_iter().map(|x| x / nw).collect();
        if (next - lambda).abs() <= T::lit(POWER_TOL) * next.abs() {
            return Ok(next.max(T::zero()).sqrt());
        }
        lambda = next;
    }
    Err(Error::IterationCap { iterations: POWER_MAX_ITER, estimate: lambda.max(T::zero()).sqrt().as_f64() })
}

#[derive(Clone, Debug)]
pub struct InterpolationResult<T: Scalar> {
    pub g: HermitePoly<T>,
    /// Solution of `Mx = v`.
    pub x: Vec<T>,
    pub capacity: T,
    /// `||M - Id||₂`.
    pub m_dev: T,
    pub h_norm: T,
    pub g_norm: T,
    /// `||g²||`, only filled in when requested.
    pub gsq_norm: Option<T>,
    /// `max_i |g(p_i) - v_i|`, evaluated through `g` itself.
    pub residual: T,
    /// `vᵀM⁻¹v / C`, which must agree with `g_norm²`.
    pub quadratic_form: T,
    pub min_eigenvalue: T,
}

impl<T: Scalar> InterpolationResult<T> {
    pub fn csv_header() -> &'static str {
        "seed,n,m,d,C,M_dev,H_norm,g_norm,gsq_norm,residual"
    }

    /// One CSV row; floats use shortest round-trip formatting, a missing
    /// `gsq_norm` is left empty.
    pub fn csv_row(&self, seed: u64, n: usize, m: usize, d: usize) -> String {
        let mut s = String::new();
        let gsq = self.gsq_norm.map(|x| format!("{}", x.as_f64())).unwrap_or_default();
        write!(
            s,
            "{seed},{n},{m},{d},{},{},{},{},{gsq},{}",
            self.capacity.as_f64(),
            self.m_dev.as_f64(),
            self.h_norm.as_f64(),
            self.g_norm.as_f64(),
            self.residual.as_f64()
        )
        .unwrap();
        s
    }
}

/// Solves `Mx = v` and assembles `g`. Fails with [`Error::IllConditioned`]
/// when the smallest eigenvalue of `M` is at or below `1e-8`; there is no
/// pseudo-inverse fallback.
pub fn interpolate<T: Scalar>(samples: &SampleSet<T>, v: &[T], d: usize) -> Result<InterpolationResult<T>> {
    interpolate_inner(samples, v, d, false)
}

/// [`interpolate`] plus `||g²||`.
pub fn interpolate_with_square<T: Scalar>(samples: &SampleSet<T>, v: &[T], d: usize) -> Result<InterpolationResult<T>> {
    interpolate_inner(samples, v, d, true)
}

fn interpolate_inner<T: Scalar>(
    samples: &SampleSet<T>,
    v: &[T],
    d: usize,
    square: bool,
) -> Result<InterpolationResult<T>> {
    if v.len() != samples.m {
        return Err(Error::DimensionMismatch { expected: samples.m, found: v.len() });
    }
    if samples.n == 0 || d == 0 {
        return Err(Error::InvalidParameter("interpolation needs n >= 1 and d >= 1".into()));
    }
    let index = row_index(samples.n, d);
    let c = T::lit(capacity(samples.n, d));
    let h = build_h(samples, d);
    let m = build_m(&h, c);

    let eig = SymmetricEigen::new(&m);
    let min_eigenvalue = eig.min();
    if samples.m > 0 && !(min_eigenvalue > T::lit(MIN_EIGENVALUE)) {
        return Err(Error::IllConditioned { min_eigenvalue: min_eigenvalue.as_f64() });
    }
    let x = if samples.m == 0 {
        Vec::new()
    } else {
        let l = cholesky(&m).ok_or(Error::IllConditioned { min_eigenvalue: min_eigenvalue.as_f64() })?;
        cholesky_solve(&l, v)
    };

    let coeffs: Vec<T> = h.matvec(&x).into_iter().map(|z| z / c).collect();
    let g = HermitePoly::from_terms(samples.n, index.into_iter().zip(coeffs))?;
    let g_norm = g.norm();
    let quadratic_form = dot(v, &x) / c;

    let mut residual = T::zero();
    for (p, &vi) in samples.points.iter().zip(v) {
        residual = residual.max((g.evaluate(p)? - vi).abs());
    }

    let m_dev = spectral_norm(&m.sub(&Matrix::identity(samples.m)))?;
    let h_norm = spectral_norm(&h)?;
    let gsq_norm = if square { Some(g.multiply(&g)?.norm()) } else { None };

    Ok(InterpolationResult {
        g,
        x,
        capacity: c,
        m_dev,
        h_norm,
        g_norm,
        gsq_norm,
        residual,
        quadratic_form,
        min_eigenvalue,
    })
}

/// Interpolates `sqrt(v)` and returns `g` together with `g²`, which then
/// matches `v` on the samples and is a sum of squares by construction.
pub fn sqrt_interpolate<T: Scalar>(
    samples: &SampleSet<T>,
    v: &[T],
    d: usize,
) -> Result<(InterpolationResult<T>, HermitePoly<T>)> {
    if let Some((index, &value)) = v.iter().enumerate().find(|(_, x)| **x < T::zero()) {
        return Err(Error::NegativeValue { index, value: value.as_f64() });
    }
    let roots: Vec<T> = v.iter().map(|x| x.sqrt()).collect();
    let mut res = interpolate(samples, &roots, d)?;
    let square = res.g.multiply(&res.g)?;
    res.gsq_norm = Some(square.norm());
    Ok((res, square))
}

/// Sample count `floor(n^exponent)`, nudged so exact powers are not lost to
/// rounding.
pub fn sample_count(n: usize, exponent: f64) -> usize {
    ((n as f64).powf(exponent) + 1e-9).floor() as usize
}
