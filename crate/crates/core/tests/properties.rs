use num_rational::BigRational;
use proptest::prelude::*;

use sostest::hermite::{eval_basis, inner_product_exact, product_expansion, MultisetIndex};
use sostest::interp::{capacity, interpolate};
use sostest::poly::{HermitePoly, MonomialPoly, Polynomial};
use sostest::pseudo::{xor_closure, xor_instance, HighPrecision, LogScale, LogSum, XorEquation};
use sostest::sampling::{gaussian_point, unit_uniform, SampleSet};
use sostest::sos::{f_from_gram, gram_from_square, gram_index};
use sostest::testers::nonneg_tester;

/// Multisets over `n` variables of degree at most `max`.
fn index(n: u32, max: u32) -> impl Strategy<Value = MultisetIndex> {
    prop::collection::vec(0..=max, n as usize).prop_filter_map("degree bound", move |mults| {
        if mults.iter().sum::<u32>() > max {
            return None;
        }
        let entries: Vec<(u32, u32)> =
            mults.iter().enumerate().filter(|(_, &m)| m > 0).map(|(v, &m)| (v as u32 + 1, m)).collect();
        MultisetIndex::new(entries).ok()
    })
}

fn poly_terms(n: u32, max: u32) -> impl Strategy<Value = Vec<(MultisetIndex, f64)>> {
    prop::collection::vec((index(n, max), -2.0f64..2.0), 1..8)
}

fn point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, n)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn linearization_matches_pointwise_product(a in index(3, 4), b in index(3, 4), p in point(3)) {
        let lhs = eval_basis(&a, &p).unwrap() * eval_basis(&b, &p).unwrap();
        let rhs: f64 = product_expansion::<f64>(&a, &b).unwrap().iter().map(|(j, q)| q * eval_basis(j, &p).unwrap()).sum();
        prop_assert!(close(lhs, rhs, 1e-10), "{lhs} vs {rhs}");
    }

    #[test]
    fn inner_product_is_symmetric_and_orthonormal(a in index(3, 4), b in index(3, 4)) {
        let ab = inner_product_exact(&a, &b);
        prop_assert_eq!(&ab, &inner_product_exact(&b, &a));
        if a == b { prop_assert!(ab.is_one()); } else { prop_assert!(ab.is_zero()); }
    }

    #[test]
    fn basis_change_round_trips(terms in poly_terms(3, 4), p in point(3)) {
        let f = MonomialPoly::from_terms(3, terms).unwrap();
        let h = f.to_hermite().unwrap();
        prop_assert!(close(f.evaluate(&p).unwrap(), h.evaluate(&p).unwrap(), 1e-10));
        let back = h.to_monomial().unwrap();
        for (i, c) in f.terms() {
            prop_assert!(close(*c, back.coeff(i), 1e-12));
        }
    }

    #[test]
    fn hermite_product_agrees_with_monomial_product(a in poly_terms(2, 3), b in poly_terms(2, 3), p in point(2)) {
        let f = MonomialPoly::from_terms(2, a).unwrap();
        let g = MonomialPoly::from_terms(2, b).unwrap();
        let mono = f.multiply(&g).unwrap().evaluate(&p).unwrap();
        let herm = f.to_hermite().unwrap().multiply(&g.to_hermite().unwrap()).unwrap().evaluate(&p).unwrap();
        prop_assert!(close(mono, herm, 1e-9), "{mono} vs {herm}");
    }

    #[test]
    fn polynomial_json_round_trips(terms in poly_terms(4, 3), hermite in any::<bool>()) {
        let poly = if hermite {
            Polynomial::Hermite(HermitePoly::from_terms(4, terms).unwrap())
        } else {
            Polynomial::Monomial(MonomialPoly::from_terms(4, terms).unwrap())
        };
        let back = Polynomial::from_json(&poly.to_json()).unwrap();
        prop_assert_eq!(back, poly);
    }

    #[test]
    fn interpolant_matches_values(n in 2usize..6, d in 1usize..3, seed in 0u64..1000) {
        let m = (capacity(n, d) as usize / 3).max(1);
        let s = SampleSet::<f64>::draw(n, m, seed);
        let v: Vec<f64> = gaussian_point(seed, u64::MAX, m);
        if let Ok(r) = interpolate(&s, &v, d) {
            for (p, vi) in s.points.iter().zip(&v) {
                prop_assert!(close(r.g.evaluate(p).unwrap(), *vi, 1e-7));
            }
            let g2 = r.g_norm * r.g_norm;
            prop_assert!((g2 - r.quadratic_form).abs() <= 1e-6 * g2);
            // no constant term: g lives in the span of h_I with 0 < |I| <= d
            prop_assert!(r.g.coeff(&MultisetIndex::empty()) == 0.0);
        }
    }

    #[test]
    fn gram_of_square_reproduces_square(terms in poly_terms(3, 2)) {
        let g = MonomialPoly::from_terms(3, terms).unwrap();
        let m = gram_from_square(&g, 2).unwrap();
        prop_assert!(m.min_eigenvalue() >= -1e-10);
        let f = f_from_gram(&m);
        let sq = g.multiply(&g).unwrap();
        for i in gram_index(3, 4) {
            prop_assert!(close(f.coeff(&i), sq.coeff(&i), 1e-12));
        }
    }

    #[test]
    fn sampling_is_deterministic(seed in any::<u64>(), i in any::<u64>(), dim in 1usize..8) {
        let a: Vec<f64> = gaussian_point(seed, i, dim);
        prop_assert_eq!(a.clone(), gaussian_point::<f64>(seed, i, dim));
        prop_assert!(a.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn uniforms_stay_open(word in any::<u64>()) {
        let u = unit_uniform(word);
        prop_assert!(u > 0.0 && u < 1.0);
    }

    #[test]
    fn log_sums_of_rationals_evaluate_exactly(xs in prop::collection::vec((-1000i64..1000, 1i64..50), 1..10)) {
        let scale = LogScale::trivial();
        let mut sum = LogSum::zero(scale.clone());
        let mut exact = BigRational::from_integer(0.into());
        for (p, q) in xs {
            let r = BigRational::new(p.into(), q.into());
            exact += &r;
            sum = sum.add(&LogSum::rational(r, scale.clone()));
        }
        prop_assert_eq!(sum.as_rational(), Some(exact.clone()));
        let v = sum.value(&mut HighPrecision::new()).unwrap().to_f64();
        let e: f64 = num_traits::ToPrimitive::to_f64(&exact).unwrap();
        prop_assert!(close(v, e, 1e-14));
    }

    #[test]
    fn nonneg_verdict_ignores_positive_scaling(seed in 0u64..500, scale in 0.01f64..100.0) {
        let f = |p: &[f64]| p[0] * p[1] + 0.2;
        let a = nonneg_tester(f, 2, 1.0, 2, seed).unwrap();
        let b = nonneg_tester(|p: &[f64]| scale * f(p), 2, 1.0, 2, seed).unwrap();
        prop_assert_eq!(a.verdict, b.verdict);
        prop_assert_eq!(a.samples_used, b.samples_used);
    }

    #[test]
    fn closure_keeps_equations_and_products(n in 6usize..12, m in 1usize..6, seed in any::<u64>()) {
        let eqs = xor_instance(n, m, seed).unwrap();
        let outcome = xor_closure(&eqs, 4);
        if let Some(c) = outcome.closure() {
            for e in &eqs {
                prop_assert_eq!(c.sign(e.set()), Some(e.sign));
            }
            let sorted = c.sorted();
            for (a, sa) in &sorted {
                for (b, sb) in &sorted {
                    let x = sostest::pseudo::xor::set_of(a) ^ sostest::pseudo::xor::set_of(b);
                    if x.count_ones() <= 4 {
                        prop_assert_eq!(c.sign(x), Some(sa * sb));
                    }
                }
            }
        }
    }
}

#[test]
fn contradiction_example() {
    let eqs: Vec<XorEquation> = [([1, 2, 3, 4], 1), ([1, 2, 5, 6], 1), ([3, 4, 5, 6], -1)]
        .into_iter()
        .map(|(v, s)| XorEquation::new(v.to_vec(), s).unwrap())
        .collect();
    assert!(xor_closure(&eqs, 4).is_contradiction());
    // flipping the last sign makes the system consistent
    let mut ok = eqs.clone();
    ok[2].sign = 1;
    assert!(!xor_closure(&ok, 4).is_contradiction());
}
