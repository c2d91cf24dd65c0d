//! The two sample-based testers: a sign check with a hypercontractive sample
//! bound, and the SOS tester that hands samples to the feasibility search.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::{capacity, sqrt_interpolate};
use crate::pseudo::{
    distance_lower_bound, moment_matrix, motzkin_polynomial, psd_check, DistanceReport, MotzkinPe, ParityBlockPe,
    PsdReport, PseudoExpectation,
};
use crate::sampling::{gaussian_point, SampleSet};
use crate::scalar::Scalar;
use crate::sos::{feasibility_search, gram_from_square, FeasibilityProblem, FeasibilityReport, Tolerances};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Yes,
    No,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TesterVerdict<T: Scalar> {
    pub verdict: Verdict,
    pub samples_used: usize,
    /// A point where the observed value was negative.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_point: Option<Vec<T>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_value: Option<T>,
    /// The feasibility report behind an SOS verdict.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<FeasibilityReport>,
    /// Whether the search was seeded with the square of an interpolant.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warm_started: Option<bool>,
}

impl<T: Scalar + Serialize> TesterVerdict<T> {
    pub fn is_yes(&self) -> bool {
        self.verdict == Verdict::Yes
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }
}

/// `B = e (4 + ln(1/ε))^(2d)`.
pub fn sample_bound_b(epsilon: f64, d: usize) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    if d == 0 {
        return Err(Error::InvalidParameter("degree must be at least 1".into()));
    }
    Ok(std::f64::consts::E * (4.0 + (1.0 / epsilon).ln()).powi(2 * d as i32))
}

/// `⌈10 B / ε⌉`.
pub fn nonneg_sample_count(epsilon: f64, d: usize) -> Result<usize> {
    Ok((10.0 * sample_bound_b(epsilon, d)? / epsilon).ceil() as usize)
}

/// Strictly negative beyond rounding noise.
pub fn is_negative<T: Scalar>(v: T) -> bool {
    v < -T::lit(1e-12) * (T::one() + v.abs())
}

/// Draws `⌈10B/ε⌉` Gaussian points (the same streams as [`SampleSet`]) and
/// answers NO at the first negative value. Only signs are read, so scaling
/// the oracle by a positive constant never changes the verdict.
pub fn nonneg_tester<T: Scalar>(
    mut oracle: impl FnMut(&[T]) -> T,
    n: usize,
    epsilon: f64,
    d: usize,
    seed: u64,
) -> Result<TesterVerdict<T>> {
    let count = nonneg_sample_count(epsilon, d)?;
    for i in 0..count {
        let p: Vec<T> = gaussian_point(seed, i as u64, n);
        let v = oracle(&p);
        if is_negative(v) {
            return Ok(TesterVerdict {
                verdict: Verdict::No,
                samples_used: i + 1,
                witness_point: Some(p),
                witness_value: Some(v),
                report: None,
                warm_started: None,
            });
        }
    }
    Ok(TesterVerdict {
        verdict: Verdict::Yes,
        samples_used: count,
        witness_point: None,
        witness_value: None,
        report: None,
        warm_started: None,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct SosTesterOptions {
    pub norm_bound: f64,
    pub tolerances: Tolerances,
    pub max_iterations: usize,
    /// Seed the search with `g²` for an interpolant `g` of `√v`.
    pub warm_start: bool,
}

impl Default for SosTesterOptions {
    fn default() -> Self {
        SosTesterOptions {
            norm_bound: 1.0,
            tolerances: Tolerances::default(),
            max_iterations: crate::sos::DEFAULT_MAX_ITERATIONS,
            warm_start: true,
        }
    }
}

/// YES iff some `M ⪰ 0` has `f_M(p_i) = v_i` and `||f_M|| ≤ norm_bound`, with
/// `f_M` of degree `2d`. A negative value is an immediate NO.
pub fn sos_tester<T: Scalar>(
    n: usize,
    points: &[Vec<T>],
    values: &[T],
    d: usize,
    options: &SosTesterOptions,
) -> Result<TesterVerdict<T>> {
    if points.len() != values.len() {
        return Err(Error::DimensionMismatch { expected: points.len(), found: values.len() });
    }
    if let Some(i) = values.iter().position(|&v| v < T::zero()) {
        return Ok(TesterVerdict {
            verdict: Verdict::No,
            samples_used: points.len(),
            witness_point: Some(points[i].clone()),
            witness_value: Some(values[i]),
            report: None,
            warm_started: None,
        });
    }
    let mut problem = FeasibilityProblem::for_samples(n, d, points, values)?
        .with_norm_bound(T::lit(options.norm_bound))
        .with_tolerances(options.tolerances)
        .with_max_iterations(options.max_iterations);
    let mut warm = false;
    if options.warm_start && !points.is_empty() {
        let samples = SampleSet::from_points(n, points.to_vec(), 0);
        // An ill-conditioned system just means no warm start.
        if let Ok((res, _)) = sqrt_interpolate(&samples, values, d) {
            let g = res.g.to_monomial()?;
            problem = problem.with_warm_start(gram_from_square(&g, d)?);
            warm = true;
        }
    }
    let outcome = feasibility_search(&problem)?;
    Ok(TesterVerdict {
        verdict: if outcome.is_feasible() { Verdict::Yes } else { Verdict::No },
        samples_used: points.len(),
        witness_point: None,
        witness_value: None,
        report: Some(outcome.report().clone()),
        warm_started: Some(warm),
    })
}

/// Which side of the interpolation capacity a sample count falls on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// `m ≤ C(n, d)`: a low-norm interpolant of `√v` exists, so the tester
    /// must accept.
    Inside,
    /// More samples than the interpolation capacity; the lower-bound argument
    /// no longer applies and the tester is not run.
    OutsideLowerBoundRegime,
}

/// Farness certificate plus tester run on the normalized Motzkin-type `f`.
#[derive(Clone, Debug, Serialize)]
pub struct LowerBoundDemo {
    pub n: usize,
    pub r: u32,
    pub c: f64,
    pub m: usize,
    pub seed: u64,
    pub far: bool,
    /// `log2` of the certified distance of `f / ||f||` from SOS.
    pub normalized_distance_log2: Option<f64>,
    pub certificate: Option<DistanceReport>,
    /// PSD check of the explicit graded moments at `k = (2+c)^(1/r)`.
    pub explicit_moments: PsdReport,
    pub f_norm: f64,
    pub regime: Regime,
    pub capacity: f64,
    pub coefficient_dimension: u128,
    pub tester: Option<Verdict>,
    pub tester_report: Option<FeasibilityReport>,
    pub warm_started: Option<bool>,
    pub min_sample_value: f64,
}

impl LowerBoundDemo {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }
}

/// Certifies that `f / ||f||` is far from SOS and runs [`sos_tester`] on `m`
/// of its Gaussian samples with norm bound 1.
///
/// The certificate for `r = 2` is [`ParityBlockPe`]; other `r` fall back to
/// the explicit graded moments, which are reported but usually not PSD.
pub fn lowerbound_demo(
    n: usize,
    r: u32,
    c: f64,
    m: usize,
    seed: u64,
    options: &SosTesterOptions,
) -> Result<LowerBoundDemo> {
    let c_exact = num_rational::BigRational::from_float(c)
        .filter(|q| !num_traits::Signed::is_negative(q))
        .ok_or_else(|| Error::InvalidParameter(format!("c must be a finite nonnegative number, got {c}")))?;
    let f = motzkin_polynomial(r, &c_exact, n)?;
    let f_float = f.to_f64();
    let f_norm = f_float.to_hermite()?.norm();
    let half = r as usize + 1;

    let explicit = PseudoExpectation::Motzkin(MotzkinPe::with_default_k(r, c_exact.clone(), None, n)?);
    let explicit_moments = psd_check(&moment_matrix(&explicit)?)?;
    let pe = if r == 2 { PseudoExpectation::ParityBlock(ParityBlockPe::new(c_exact, n)?) } else { explicit };
    let certificate = match distance_lower_bound(&pe, &f) {
        Ok(rep) => Some(rep),
        Err(Error::NotPsd { .. }) | Err(Error::NotRefuted) => None,
        Err(e) => return Err(e),
    };
    let normalized_distance_log2 = certificate.as_ref().map(|c| c.distance_log2 - f_norm.log2());
    let far = normalized_distance_log2.is_some_and(|l| l.is_finite());

    let samples = SampleSet::<f64>::draw(n, m, seed);
    let values: Vec<f64> =
        samples.points.iter().map(|p| f_float.evaluate(p).map(|v| v / f_norm)).collect::<Result<_>>()?;
    let min_sample_value = values.iter().copied().fold(f64::INFINITY, f64::min);
    let cap = capacity(n, half);
    let regime = if (m as f64) <= cap { Regime::Inside } else { Regime::OutsideLowerBoundRegime };
    let (tester, tester_report, warm_started) = match regime {
        Regime::Inside => {
            let v = sos_tester(n, &samples.points, &values, half, options)?;
            (Some(v.verdict), v.report, v.warm_started)
        }
        Regime::OutsideLowerBoundRegime => (None, None, None),
    };
    Ok(LowerBoundDemo {
        n,
        r,
        c,
        m,
        seed,
        far,
        normalized_distance_log2,
        certificate,
        explicit_moments,
        f_norm,
        regime,
        capacity: cap,
        coefficient_dimension: crate::hermite::multiset_count(n + 1, 2 * half),
        tester,
        tester_report,
        warm_started,
        min_sample_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_values() {
        assert!((sample_bound_b(1.0, 1).unwrap() - 16.0 * std::f64::consts::E).abs() < 1e-12);
        let b = sample_bound_b(0.1, 2).unwrap();
        assert!((b - std::f64::consts::E * (4.0 + 10f64.ln()).powi(4)).abs() < 1e-9);
        assert!((b - 4.29e3).abs() < 10.0);
        assert!(sample_bound_b(0.01, 2).unwrap() > b);
        assert!(sample_bound_b(0.0, 2).is_err());
        assert!(sample_bound_b(1.5, 2).is_err());
        assert_eq!(nonneg_sample_count(1.0, 1).unwrap(), 435);
    }

    #[test]
    fn nonneg_examples() {
        let sq = nonneg_tester(|p: &[f64]| p[0] * p[0], 2, 0.5, 2, 1).unwrap();
        assert!(sq.is_yes());
        let one = nonneg_tester(|_: &[f64]| 1.0, 2, 0.5, 2, 1).unwrap();
        assert!(one.is_yes());
        let neg = nonneg_tester(|p: &[f64]| -p[0], 2, 0.5, 2, 1).unwrap();
        assert_eq!(neg.verdict, Verdict::No);
        assert!(neg.witness_value.unwrap() < 0.0);
        assert!(-neg.witness_point.as_ref().unwrap()[0] < 0.0);
    }

    #[test]
    fn scale_invariance() {
        let f = |p: &[f64]| p[0] * p[1] + 0.1;
        let a = nonneg_tester(f, 3, 0.5, 2, 5).unwrap();
        let b = nonneg_tester(|p: &[f64]| 7.5 * f(p), 3, 0.5, 2, 5).unwrap();
        assert_eq!(a.verdict, b.verdict);
        assert_eq!(a.samples_used, b.samples_used);
    }

    #[test]
    fn negative_sample_is_no() {
        let pts = vec![vec![0.1, 0.2], vec![0.3, -0.4]];
        let v = sos_tester(2, &pts, &[1.0, -0.5], 1, &SosTesterOptions::default()).unwrap();
        assert_eq!(v.verdict, Verdict::No);
        assert_eq!(v.witness_point.unwrap(), pts[1]);
    }

    #[test]
    fn square_samples_accepted() {
        // g = 0.3 x1 - 0.2 x2, ||g²|| well below 1
        let g = |p: &[f64]| (0.3 * p[0] - 0.2 * p[1]).powi(2);
        let s = SampleSet::<f64>::draw(3, 2, 11);
        let vals: Vec<f64> = s.points.iter().map(|p| g(p)).collect();
        let v = sos_tester(3, &s.points, &vals, 1, &SosTesterOptions::default()).unwrap();
        assert!(v.is_yes(), "{}", v.to_json());
        assert_eq!(v.warm_started, Some(true));
        assert!(v.to_json().contains("\"verdict\": \"YES\""));
        // More points than the interpolation capacity: no warm start, still YES.
        let s = SampleSet::<f64>::draw(3, 5, 12);
        let vals: Vec<f64> = s.points.iter().map(|p| g(p)).collect();
        let v = sos_tester(3, &s.points, &vals, 1, &SosTesterOptions::default()).unwrap();
        assert!(v.is_yes(), "{}", v.to_json());
        assert_eq!(v.warm_started, Some(false));
    }
}
