//! Gram matrices and the convex feasibility search behind the SOS tester.
//!
//! A symmetric matrix `M` indexed by multisets with `|I| <= d` describes the
//! polynomial `f_M = Σ_J (Σ_{I ∪ I' = J} M_{II'}) x_J`; `M ⪰ 0` makes `f_M` a
//! sum of squares. [`feasibility_search`] looks for such an `M` subject to
//! evaluation constraints (or a full target polynomial) and an optional bound
//! on the Gaussian norm of `f_M`, using Dykstra's alternating projections in
//! the Frobenius geometry.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::{enumerate_multisets, MultisetIndex};
use crate::linalg::{cholesky, cholesky_solve, Matrix, SymmetricEigen};
use crate::poly::MonomialPoly;
use crate::scalar::Scalar;

/// Monomial classes larger than this make the dense norm-ball projector
/// impractical.
pub const MAX_NORM_CLASSES: usize = 4000;

/// All multisets over `n` variables with `|I| <= d`, canonical order.
pub fn gram_index(n: usize, d: usize) -> Vec<MultisetIndex> {
    enumerate_multisets(n, 0, d)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix<T: Scalar> {
    d: usize,
    n: usize,
    index: Vec<MultisetIndex>,
    entries: Matrix<T>,
}

impl<T: Scalar> GramMatrix<T> {
    /// Checks shape and symmetry (within `1e-12` relative to the largest entry).
    pub fn new(n: usize, d: usize, entries: Matrix<T>) -> Result<Self> {
        let index = gram_index(n, d);
        if entries.rows() != index.len() || entries.cols() != index.len() {
            return Err(Error::DimensionMismatch { expected: index.len(), found: entries.rows() });
        }
        let scale = entries.max_abs().max(T::one());
        if entries.asymmetry() > T::lit(1e-12) * scale {
            return Err(Error::InvalidParameter(format!(
                "gram matrix is not symmetric (asymmetry {})",
                entries.asymmetry()
            )));
        }
        let mut entries = entries;
        entries.symmetrize();
        Ok(GramMatrix { d, n, index, entries })
    }

    pub fn zeros(n: usize, d: usize) -> Self {
        let index = gram_index(n, d);
        let k = index.len();
        GramMatrix { d, n, index, entries: Matrix::zeros(k, k) }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn index(&self) -> &[MultisetIndex] {
        &self.index
    }

    pub fn entries(&self) -> &Matrix<T> {
        &self.entries
    }

    pub fn min_eigenvalue(&self) -> T {
        SymmetricEigen::new(&self.entries).min()
    }
}

impl GramMatrix<f64> {
    pub fn to_json(&self) -> String {
        let rec = GramRecord { d: self.d, index: self.index.clone(), entries: self.entries.as_slice().to_vec() };
        serde_json::to_string(&rec).expect("plain data serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: GramRecord = serde_json::from_str(text)?;
        // The index lists every |I| <= d, so for d >= 1 it names variable n.
        let n = rec.index.iter().map(|i| i.max_var() as usize).max().unwrap_or(0);
        let want = gram_index(n, rec.d);
        if rec.index != want {
            return Err(Error::Schema("index is not the canonical list of multisets of size <= d".into()));
        }
        let k = want.len();
        if rec.entries.len() != k * k {
            return Err(Error::Schema(format!("expected {} entries, found {}", k * k, rec.entries.len())));
        }
        GramMatrix::new(n, rec.d, Matrix::from_row_major(k, k, rec.entries)).map_err(|e| Error::Schema(e.to_string()))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GramRecord {
    d: usize,
    index: Vec<MultisetIndex>,
    entries: Vec<f64>,
}

/// `f_M`: the entry `M_{II'}` contributes to the coefficient of `x_{I ∪ I'}`.
pub fn f_from_gram<T: Scalar>(m: &GramMatrix<T>) -> MonomialPoly<T> {
    let k = m.index.len();
    let mut terms = Vec::with_capacity(k * k);
    for a in 0..k {
        for b in 0..k {
            let v = m.entries[(a, b)];
            if v != T::zero() {
                terms.push((m.index[a].union(&m.index[b]), v));
            }
        }
    }
    MonomialPoly::from_terms(m.n, terms).expect("gram index stays within n variables")
}

/// Rank-one Gram matrix `c cᵀ` of `g²`, where `c` is the monomial coefficient
/// vector of `g` over the multisets of size `<= d`.
pub fn gram_from_square<T: Scalar>(g: &MonomialPoly<T>, d: usize) -> Result<GramMatrix<T>> {
    if g.degree() > d {
        return Err(Error::DegreeOverflow { degree: g.degree(), max: d });
    }
    let index = gram_index(g.n(), d);
    let c: Vec<T> = index.iter().map(|i| g.coeff(i)).collect();
    let k = index.len();
    let entries = Matrix::from_fn(k, k, |a, b| c[a] * c[b]);
    Ok(GramMatrix { d, n: g.n(), index, entries })
}

/// `g_k = sqrt(λ_k) · Σ_I v_{Ik} x_I` over the positive eigenpairs, so that
/// `Σ g_k² = f_M`. Eigenvalues in `[-psd_tol, 0]` are treated as zero.
pub fn extract_squares<T: Scalar>(m: &GramMatrix<T>, psd_tol: T) -> Result<Vec<MonomialPoly<T>>> {
    let eig = SymmetricEigen::new(&m.entries);
    if eig.min() < -psd_tol {
        return Err(Error::NotPsd { min_eigenvalue: eig.min().as_f64(), tolerance: psd_tol.as_f64() });
    }
    let cutoff = eig.max().abs() * T::epsilon();
    let mut out = Vec::new();
    for (k, &lambda) in eig.values.iter().enumerate().rev() {
        if lambda <= cutoff {
            continue;
        }
        let s = lambda.sqrt();
        let terms = m.index.iter().enumerate().map(|(r, i)| (i.clone(), s * eig.vectors[(r, k)]));
        out.push(MonomialPoly::from_terms(m.n, terms)?);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub eval: f64,
    pub psd: f64,
    pub norm: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { eval: 1e-6, psd: 1e-8, norm: 1e-6 }
    }
}

pub const DEFAULT_MAX_ITERATIONS: usize = 100_000;

/// Search for `M ⪰ 0` with `f_M` matching a target polynomial or a list of
/// sample values, optionally with `||f_M|| <= norm_bound`.
#[derive(Clone, Debug)]
pub struct FeasibilityProblem<T: Scalar> {
    pub n: usize,
    /// Half degree: `f_M` has degree at most `2d`.
    pub d: usize,
    pub target: Option<MonomialPoly<T>>,
    pub samples: Vec<(Vec<T>, T)>,
    pub norm_bound: Option<T>,
    pub tolerances: Tolerances,
    pub max_iterations: usize,
    pub warm_start: Option<GramMatrix<T>>,
}

impl<T: Scalar> FeasibilityProblem<T> {
    pub fn for_target(target: MonomialPoly<T>, d: usize) -> Self {
        FeasibilityProblem {
            n: target.n(),
            d,
            target: Some(target),
            samples: Vec::new(),
            norm_bound: None,
            tolerances: Tolerances::default(),
            max_iterations: DEFAULT_MAX_ITERATIONS,
            warm_start: None,
        }
    }

    pub fn for_samples(n: usize, d: usize, points: &[Vec<T>], values: &[T]) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: points.len(), found: values.len() });
        }
        if let Some(p) = points.iter().find(|p| p.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: p.len() });
        }
        Ok(FeasibilityProblem {
            n,
            d,
            target: None,
            samples: points.iter().cloned().zip(values.iter().copied()).collect(),
            norm_bound: None,
            tolerances: Tolerances::default(),
            max_iterations: DEFAULT_MAX_ITERATIONS,
            warm_start: None,
        })
    }

    pub fn with_norm_bound(mut self, bound: T) -> Self {
        self.norm_bound = Some(bound);
        self
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tolerances = tol;
        self
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    pub fn with_warm_start(mut self, start: GramMatrix<T>) -> Self {
        self.warm_start = Some(start);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.target.is_none() && self.samples.is_empty() {
            return Err(Error::InvalidParameter("feasibility problem has no constraints".into()));
        }
        if let Some(t) = &self.target {
            if t.n() != self.n {
                return Err(Error::DimensionMismatch { expected: self.n, found: t.n() });
            }
            if t.degree() > 2 * self.d {
                return Err(Error::DegreeOverflow { degree: t.degree(), max: 2 * self.d });
            }
        }
        if let Some(w) = &self.warm_start {
            if w.n != self.n || w.d != self.d {
                return Err(Error::InvalidParameter("warm start has the wrong shape".into()));
            }
        }
        if let Some(b) = self.norm_bound {
            if !(b >= T::zero()) {
                return Err(Error::InvalidParameter("norm bound must be nonnegative".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchStatus {
    Converged,
    /// Iterates stopped moving while a constraint family was still violated.
    Stalled,
    /// Iteration cap reached with violations still changing.
    NonConverged,
}

/// Largest violation of each constraint family, measured on the last
/// iterate. `psd` is `max(0, -λ_min)` of the iterate entering the PSD
/// projection; `eval` and `norm` are measured after it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Violations {
    pub eval: f64,
    pub psd: f64,
    pub norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub status: SearchStatus,
    pub iterations: usize,
    pub violations: Violations,
    pub tolerances: Tolerances,
    pub max_iterations: usize,
    pub norm_bound: Option<f64>,
    pub gram_size: usize,
    pub constraint_count: usize,
}

impl FeasibilityReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }
}

#[derive(Clone, Debug)]
pub enum FeasibilityOutcome<T: Scalar> {
    Feasible { gram: GramMatrix<T>, report: FeasibilityReport },
    Infeasible { report: FeasibilityReport },
}

impl<T: Scalar> FeasibilityOutcome<T> {
    pub fn is_feasible(&self) -> bool {
        matches!(self, FeasibilityOutcome::Feasible { .. })
    }

    pub fn report(&self) -> &FeasibilityReport {
        match self {
            FeasibilityOutcome::Feasible { report, .. } | FeasibilityOutcome::Infeasible { report } => report,
        }
    }
}

/// Recomputes every constraint family from scratch: `f_M` through
/// [`f_from_gram`], values by direct evaluation, the norm through the Hermite
/// basis and PSD-ness through a fresh eigendecomposition.
pub fn verify<T: Scalar>(problem: &FeasibilityProblem<T>, m: &GramMatrix<T>) -> Result<Violations> {
    let f = f_from_gram(m);
    let mut eval = 0.0f64;
    if let Some(t) = &problem.target {
        let diff = f.sub(t)?;
        for (j, c) in diff.terms() {
            let scale = 1.0 + t.coeff(j).as_f64().abs();
            eval = eval.max(c.as_f64().abs() / scale);
        }
    }
    for (p, v) in &problem.samples {
        let got = f.evaluate(p)?;
        eval = eval.max((got - *v).as_f64().abs() / (1.0 + v.as_f64().abs()));
    }
    let psd = (-m.min_eigenvalue().as_f64()).max(0.0);
    let norm = match problem.norm_bound {
        Some(b) => (f.to_hermite()?.norm() - b).as_f64().max(0.0),
        None => 0.0,
    };
    Ok(Violations { eval, psd, norm })
}

fn within(v: &Violations, tol: &Tolerances) -> bool {
    v.eval <= tol.eval && v.psd <= tol.psd && v.norm <= tol.norm
}

/// Partition of the Gram cells by the monomial they feed.
struct Classes {
    /// Class of cell `(a, b)`, row-major.
    of: Vec<usize>,
    index: Vec<MultisetIndex>,
    /// Number of ordered cells per class.
    size: Vec<usize>,
}

impl Classes {
    fn new(index: &[MultisetIndex]) -> Self {
        let k = index.len();
        let mut lookup: HashMap<MultisetIndex, usize> = HashMap::new();
        let mut of = vec![0usize; k * k];
        for a in 0..k {
            for b in a..k {
                let j = index[a].union(&index[b]);
                let next = lookup.len();
                let id = *lookup.entry(j).or_insert(next);
                of[a * k + b] = id;
                of[b * k + a] = id;
            }
        }
        let mut classes = vec![MultisetIndex::empty(); lookup.len()];
        for (j, id) in lookup {
            classes[id] = j;
        }
        // Renumber canonically so results do not depend on hashing.
        let mut order: Vec<usize> = (0..classes.len()).collect();
        order.sort_by(|&x, &y| classes[x].cmp(&classes[y]));
        let mut rank = vec![0usize; order.len()];
        for (r, &id) in order.iter().enumerate() {
            rank[id] = r;
        }
        let of: Vec<usize> = of.into_iter().map(|id| rank[id]).collect();
        let index: Vec<MultisetIndex> = order.iter().map(|&id| classes[id].clone()).collect();
        let mut size = vec![0usize; index.len()];
        for &c in &of {
            size[c] += 1;
        }
        Classes { of, index, size }
    }

    fn coefficients<T: Scalar>(&self, x: &Matrix<T>) -> Vec<T> {
        let mut c = vec![T::zero(); self.index.len()];
        for (cell, &v) in x.as_slice().iter().enumerate() {
            let id = self.of[cell];
            c[id] = c[id] + v;
        }
        c
    }

    /// Adds `delta_J` to every cell of class `J`.
    fn spread<T: Scalar>(&self, x: &mut Matrix<T>, delta: &[T]) {
        let k = x.rows();
        for a in 0..k {
            for b in 0..k {
                x[(a, b)] = x[(a, b)] + delta[self.of[a * k + b]];
            }
        }
    }
}

enum Affine<T: Scalar> {
    Target { rhs: Vec<T> },
    Samples { features: Vec<Vec<T>>, values: Vec<T>, pinv: Matrix<T> },
}

/// Projector onto `{X : ||to_hermite(f_X)|| <= β}`. Only the class sums of
/// `X` matter; with `y_J = c_J / sqrt(size_J)` the map to Hermite coefficients
/// is `W = T D^{1/2}`, and `WᵀW = V Σ² Vᵀ` diagonalizes the constraint.
struct NormBall<T: Scalar> {
    bound: T,
    sigma_sq: Vec<T>,
    v: Matrix<T>,
}

impl<T: Scalar> NormBall<T> {
    fn new(classes: &Classes, n: usize, bound: T) -> Result<Self> {
        let k = classes.index.len();
        if k > MAX_NORM_CLASSES {
            return Err(Error::TooLarge(format!("{k} monomial classes for the norm-ball projection")));
        }
        let pos: HashMap<&MultisetIndex, usize> = classes.index.iter().enumerate().map(|(i, j)| (j, i)).collect();
        let mut w = Matrix::zeros(k, k);
        for (col, j) in classes.index.iter().enumerate() {
            let h = MonomialPoly::monomial(n, j.clone(), T::one())?.to_hermite()?;
            let s = T::from_usize(classes.size[col]).unwrap().sqrt();
            for (i, c) in h.terms() {
                let row = *pos.get(i).expect("hermite expansion stays in the class set");
                w[(row, col)] = *c * s;
            }
        }
        let eig = SymmetricEigen::new(&w.gram());
        Ok(NormBall { bound, sigma_sq: eig.values.iter().map(|&s| s.max(T::zero())).collect(), v: eig.vectors })
    }

    fn project(&self, classes: &Classes, x: &mut Matrix<T>) {
        let c = classes.coefficients(x);
        let y: Vec<T> = c.iter().zip(&classes.size).map(|(&c, &s)| c / T::from_usize(s).unwrap().sqrt()).collect();
        let z = self.v.tmatvec(&y);
        let beta_sq = self.bound * self.bound;
        let norm_sq = |mu: T| -> T {
            z.iter()
                .zip(&self.sigma_sq)
                .map(|(&zk, &s)| s * zk * zk / ((T::one() + mu * s) * (T::one() + mu * s)))
                .sum()
        };
        if norm_sq(T::zero()) <= beta_sq {
            return;
        }
        // norm_sq is decreasing in mu; bracket then bisect.
        let mut hi = T::one();
        while norm_sq(hi) > beta_sq && hi < T::lit(1e300) {
            hi = hi * T::lit(4.0);
        }
        let mut lo = T::zero();
        for _ in 0..200 {
            let mid = (lo + hi) * T::lit(0.5);
            if mid <= lo || mid >= hi {
                break;
            }
            if norm_sq(mid) > beta_sq {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mu = hi;
        let z_new: Vec<T> = z.iter().zip(&self.sigma_sq).map(|(&zk, &s)| zk / (T::one() + mu * s)).collect();
        let y_new = self.v.matvec(&z_new);
        let delta: Vec<T> = y_new
            .iter()
            .zip(&y)
            .zip(&classes.size)
            .map(|((&a, &b), &s)| (a - b) / T::from_usize(s).unwrap().sqrt())
            .collect();
        classes.spread(x, &delta);
    }
}

fn monomial_features<T: Scalar>(index: &[MultisetIndex], p: &[T]) -> Vec<T> {
    index
        .iter()
        .map(|i| i.entries().iter().map(|&(v, m)| p[v as usize - 1].powi(m as i32)).fold(T::one(), |a, b| a * b))
        .collect()
}

fn quad_form<T: Scalar>(x: &Matrix<T>, phi: &[T]) -> T {
    crate::linalg::dot(phi, &x.matvec(phi))
}

struct Engine<T: Scalar> {
    classes: Classes,
    affine: Affine<T>,
    ball: Option<NormBall<T>>,
}

impl<T: Scalar> Engine<T> {
    fn new(problem: &FeasibilityProblem<T>, index: &[MultisetIndex]) -> Result<Self> {
        let classes = Classes::new(index);
        let affine = match &problem.target {
            Some(t) => {
                let pos: HashMap<&MultisetIndex, usize> =
                    classes.index.iter().enumerate().map(|(i, j)| (j, i)).collect();
                let mut rhs = vec![T::zero(); classes.index.len()];
                for (j, c) in t.terms() {
                    rhs[pos[j]] = *c;
                }
                Affine::Target { rhs }
            }
            None => {
                let features: Vec<Vec<T>> = problem.samples.iter().map(|(p, _)| monomial_features(index, p)).collect();
                let values = problem.samples.iter().map(|(_, v)| *v).collect();
                let m = features.len();
                let g = Matrix::from_fn(m, m, |i, j| {
                    let d = crate::linalg::dot(&features[i], &features[j]);
                    d * d
                });
                let eig = SymmetricEigen::new(&g);
                let cut = eig.max().abs() * T::lit(1e-13);
                let pinv = eig.reconstruct_with(|l| if l > cut { T::one() / l } else { T::zero() });
                Affine::Samples { features, values, pinv }
            }
        };
        let ball = match problem.norm_bound {
            Some(b) => Some(NormBall::new(&classes, problem.n, b)?),
            None => None,
        };
        Ok(Engine { classes, affine, ball })
    }

    fn project_affine(&self, x: &mut Matrix<T>) {
        match &self.affine {
            Affine::Target { rhs } => {
                let c = self.classes.coefficients(x);
                let delta: Vec<T> = c
                    .iter()
                    .zip(rhs)
                    .zip(&self.classes.size)
                    .map(|((&c, &b), &s)| (b - c) / T::from_usize(s).unwrap())
                    .collect();
                self.classes.spread(x, &delta);
            }
            Affine::Samples { features, values, pinv } => {
                let r: Vec<T> = features.iter().zip(values).map(|(phi, &v)| quad_form(x, phi) - v).collect();
                let y = pinv.matvec(&r);
                let k = x.rows();
                for (phi, &yi) in features.iter().zip(&y) {
                    for a in 0..k {
                        let pa = phi[a] * yi;
                        for b in 0..k {
                            x[(a, b)] = x[(a, b)] - pa * phi[b];
                        }
                    }
                }
            }
        }
    }

    /// Residuals of the evaluation constraints, each divided by `1 + |b|`.
    fn weighted_residuals(&self, x: &Matrix<T>) -> Vec<T> {
        match &self.affine {
            Affine::Target { rhs } => {
                self.classes.coefficients(x).iter().zip(rhs).map(|(&c, &b)| (c - b) / (T::one() + b.abs())).collect()
            }
            Affine::Samples { features, values, .. } => {
                features.iter().zip(values).map(|(phi, &v)| (quad_form(x, phi) - v) / (T::one() + v.abs())).collect()
            }
        }
    }

    /// Jacobian of [`Self::weighted_residuals`] at `X = F Fᵀ` with respect to
    /// the entries of `F` (row-major).
    fn jacobian(&self, f: &Matrix<T>) -> Matrix<T> {
        let (k, r) = (f.rows(), f.cols());
        let two = T::lit(2.0);
        match &self.affine {
            Affine::Target { rhs } => {
                let mut jac = Matrix::zeros(rhs.len(), k * r);
                for a in 0..k {
                    for b in 0..k {
                        let cls = self.classes.of[a * k + b];
                        let w = two / (T::one() + rhs[cls].abs());
                        for j in 0..r {
                            jac[(cls, a * r + j)] = jac[(cls, a * r + j)] + w * f[(b, j)];
                        }
                    }
                }
                jac
            }
            Affine::Samples { features, values, .. } => {
                let mut jac = Matrix::zeros(features.len(), k * r);
                for (i, (phi, &v)) in features.iter().zip(values).enumerate() {
                    let proj = f.tmatvec(phi);
                    let w = two / (T::one() + v.abs());
                    for a in 0..k {
                        for j in 0..r {
                            jac[(i, a * r + j)] = w * phi[a] * proj[j];
                        }
                    }
                }
                jac
            }
        }
    }

    /// Low-rank Levenberg–Marquardt refinement of a PSD iterate: factor
    /// `X ≈ F Fᵀ` on its leading eigenvectors and drive the evaluation
    /// residuals to zero while staying PSD by construction. Alternating
    /// projections slow to a crawl when the affine set only touches the cone
    /// at a low-rank point, and the factorization only converges fast at the
    /// right rank, so ranks are tried from 1 upwards.
    fn polish(&self, x: &Matrix<T>, tol: &Tolerances) -> Option<Matrix<T>> {
        let eig = SymmetricEigen::new(x);
        let top = eig.max();
        if !(top > T::zero()) {
            return None;
        }
        let k = x.rows();
        let significant: Vec<usize> = (0..k).rev().filter(|&c| eig.values[c] > top * T::lit(1e-6)).collect();
        for r in 1..=significant.len() {
            if k * r > POLISH_MAX_UNKNOWNS {
                break;
            }
            let cols = &significant[..r];
            let f = Matrix::from_fn(k, r, |a, j| eig.vectors[(a, cols[j])] * eig.values[cols[j]].sqrt());
            if let Some(out) = self.refine(f, tol) {
                return Some(out);
            }
        }
        None
    }

    fn refine(&self, mut f: Matrix<T>, tol: &Tolerances) -> Option<Matrix<T>> {
        let (k, r) = (f.rows(), f.cols());
        let mut res = self.weighted_residuals(&f.matmul(&f.transpose()));
        let mut cost = crate::linalg::dot(&res, &res);
        let mut mu = T::lit(1e-3);
        let target = T::lit(0.5 * tol.eval);
        for _ in 0..POLISH_STEPS {
            if res.iter().all(|e| e.abs() <= target) {
                let out = f.matmul(&f.transpose());
                return (self.norm_violation(&out) <= tol.norm).then_some(out);
            }
            let jac = self.jacobian(&f);
            let jtj = jac.gram();
            let grad = jac.tmatvec(&res);
            loop {
                let mut a = jtj.clone();
                for i in 0..a.rows() {
                    a[(i, i)] = a[(i, i)] + mu * (T::one() + jtj[(i, i)]);
                }
                let l = cholesky(&a)?;
                let step = cholesky_solve(&l, &grad);
                let trial = Matrix::from_fn(k, r, |p, q| f[(p, q)] - step[p * r + q]);
                let trial_res = self.weighted_residuals(&trial.matmul(&trial.transpose()));
                let trial_cost = crate::linalg::dot(&trial_res, &trial_res);
                if trial_cost < cost {
                    f = trial;
                    res = trial_res;
                    cost = trial_cost;
                    mu = (mu / T::lit(3.0)).max(T::lit(1e-12));
                    break;
                }
                mu = mu * T::lit(4.0);
                if mu > T::lit(1e10) {
                    return None;
                }
            }
        }
        None
    }

    fn eval_violation(&self, x: &Matrix<T>) -> f64 {
        match &self.affine {
            Affine::Target { rhs } => self
                .classes
                .coefficients(x)
                .iter()
                .zip(rhs)
                .map(|(&c, &b)| (c - b).as_f64().abs() / (1.0 + b.as_f64().abs()))
                .fold(0.0, f64::max),
            Affine::Samples { features, values, .. } => features
                .iter()
                .zip(values)
                .map(|(phi, &v)| (quad_form(x, phi) - v).as_f64().abs() / (1.0 + v.as_f64().abs()))
                .fold(0.0, f64::max),
        }
    }

    fn norm_violation(&self, x: &Matrix<T>) -> f64 {
        let Some(ball) = &self.ball else { return 0.0 };
        let c = self.classes.coefficients(x);
        let y: Vec<T> = c.iter().zip(&self.classes.size).map(|(&c, &s)| c / T::from_usize(s).unwrap().sqrt()).collect();
        let z = ball.v.tmatvec(&y);
        let norm: T = z.iter().zip(&ball.sigma_sq).map(|(&zk, &s)| s * zk * zk).sum::<T>().sqrt();
        (norm - ball.bound).as_f64().max(0.0)
    }
}

/// Returns the PSD projection and the smallest eigenvalue of the input.
fn project_psd<T: Scalar>(x: &Matrix<T>) -> (Matrix<T>, T) {
    let eig = SymmetricEigen::new(x);
    let min = eig.min();
    if min >= T::zero() {
        return (x.clone(), min);
    }
    (eig.reconstruct_with(|l| l.max(T::zero())), min)
}

const STALL_WINDOW: usize = 200;
const STALL_STEP: f64 = 1e-13;
/// Polish attempts happen at iterations 64, 256, 1024, ...
const POLISH_FIRST: usize = 64;
const POLISH_MAX_UNKNOWNS: usize = 1200;
const POLISH_STEPS: usize = 60;

/// Dykstra's alternating projections over the evaluation constraints, the
/// norm ball (when a bound is set) and the PSD cone, with an occasional
/// low-rank polish of the PSD iterate. A warm start is checked before the
/// first projection. `Feasible` results pass [`verify`].
pub fn feasibility_search<T: Scalar>(problem: &FeasibilityProblem<T>) -> Result<FeasibilityOutcome<T>> {
    problem.validate()?;
    let index = gram_index(problem.n, problem.d);
    let k = index.len();
    let tol = problem.tolerances;
    let constraint_count = if problem.target.is_some() {
        crate::hermite::multiset_count(problem.n + 1, 2 * problem.d) as usize
    } else {
        problem.samples.len()
    };
    let report = |status, iterations, violations| FeasibilityReport {
        status,
        iterations,
        violations,
        tolerances: tol,
        max_iterations: problem.max_iterations,
        norm_bound: problem.norm_bound.map(|b| b.as_f64()),
        gram_size: k,
        constraint_count,
    };

    if let Some(w) = &problem.warm_start {
        let v = verify(problem, w)?;
        if within(&v, &tol) {
            return Ok(FeasibilityOutcome::Feasible { gram: w.clone(), report: report(SearchStatus::Converged, 0, v) });
        }
    }

    let engine = Engine::new(problem, &index)?;
    let mut x = problem.warm_start.as_ref().map(|w| w.entries.clone()).unwrap_or_else(|| Matrix::zeros(k, k));
    let mut inc_affine = Matrix::zeros(k, k);
    let mut inc_ball = Matrix::zeros(k, k);
    let mut inc_psd = Matrix::zeros(k, k);
    let mut before_psd = x.clone();
    let mut quiet = 0usize;
    let mut next_polish = POLISH_FIRST;

    let final_violations = |x: &Matrix<T>, before_psd: &Matrix<T>| Violations {
        eval: engine.eval_violation(x),
        psd: (-SymmetricEigen::new(before_psd).min().as_f64()).max(0.0),
        norm: engine.norm_violation(x),
    };

    for it in 1..=problem.max_iterations {
        let prev = x.clone();

        let mut y = x.add(&inc_affine);
        engine.project_affine(&mut y);
        inc_affine = x.add(&inc_affine).sub(&y);
        x = y;

        if let Some(ball) = &engine.ball {
            let mut y = x.add(&inc_ball);
            ball.project(&engine.classes, &mut y);
            inc_ball = x.add(&inc_ball).sub(&y);
            x = y;
        }
        before_psd = x.clone();

        let shifted = x.add(&inc_psd);
        let (projected, _) = project_psd(&shifted);
        inc_psd = shifted.sub(&projected);
        x = projected;

        let mut candidate = None;
        if engine.eval_violation(&x) <= tol.eval && engine.norm_violation(&x) <= tol.norm {
            candidate = Some(x.clone());
        } else if it == next_polish {
            next_polish *= 4;
            candidate = engine.polish(&x, &tol);
        }
        if let Some(c) = candidate {
            let gram = GramMatrix { d: problem.d, n: problem.n, index: index.clone(), entries: c };
            let v = verify(problem, &gram)?;
            if within(&v, &tol) {
                return Ok(FeasibilityOutcome::Feasible { gram, report: report(SearchStatus::Converged, it, v) });
            }
        }

        let step = x.sub(&prev).frobenius_norm().as_f64();
        let scale = 1.0 + x.frobenius_norm().as_f64();
        if step <= STALL_STEP * scale {
            quiet += 1;
            if quiet >= STALL_WINDOW {
                let v = final_violations(&x, &before_psd);
                return Ok(FeasibilityOutcome::Infeasible { report: report(SearchStatus::Stalled, it, v) });
            }
        } else {
            quiet = 0;
        }
    }
    let v = final_violations(&x, &before_psd);
    Ok(FeasibilityOutcome::Infeasible { report: report(SearchStatus::NonConverged, problem.max_iterations, v) })
}
