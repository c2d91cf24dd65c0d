use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use sostest::interp::{capacity, interpolate, interpolate_with_square, sample_count};
use sostest::poly::{MonomialPoly, Polynomial};
use sostest::pseudo::{
    distance_ratio, graded_bounds, moment_matrix, motzkin_polynomial, pe_apply, psd_check, xor_closure, xor_instance,
    xor_polynomial, ClosureOutcome, MotzkinPe, ParityBlockPe, PseudoExpectation, XorEquation, XorPe,
};
use sostest::sampling::{gaussian_point, SampleSet};
use sostest::sos::{extract_squares, feasibility_search, verify, FeasibilityOutcome, FeasibilityProblem};
use sostest::testers::{nonneg_tester, sos_tester, SosTesterOptions, Verdict};
use sostest::{Error, Rational};

use crate::config::{pick, CertifyConfig, DemoConfig, NonnegConfig, Settings, SosCheckConfig, SweepConfig};
use crate::output::{emit, json_document, read_input, CliError, EXIT_NO, EXIT_NUMERICAL, EXIT_OK};
use crate::{CertifyArgs, DemoArgs, Family, Format, NonnegArgs, SosCheckArgs, SweepArgs, ValuesKind};

fn verdict_code(v: Verdict) -> u8 {
    match v {
        Verdict::Yes => EXIT_OK,
        Verdict::No => EXIT_NO,
    }
}

fn object(v: impl Serialize) -> Map<String, Value> {
    match serde_json::to_value(v).expect("plain data serializes") {
        Value::Object(m) => m,
        other => {
            let mut m = Map::new();
            m.insert("value".into(), other);
            m
        }
    }
}

// ---------------------------------------------------------------- interp-sweep

#[derive(Serialize)]
struct SweepRow {
    seed: u64,
    n: usize,
    m: usize,
    d: usize,
    #[serde(rename = "C")]
    capacity: f64,
    #[serde(rename = "M_dev")]
    m_dev: Option<f64>,
    #[serde(rename = "H_norm")]
    h_norm: Option<f64>,
    g_norm: Option<f64>,
    gsq_norm: Option<f64>,
    residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(skip)]
    csv: String,
}

/// Random unit vector on its own stream, disjoint from the sample points.
fn unit_values(seed: u64, m: usize) -> Vec<f64> {
    let v: Vec<f64> = gaussian_point(seed, u64::MAX, m);
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

fn sweep_trial(n: usize, m: usize, d: usize, seed: u64, values: ValuesKind, gsq: bool) -> SweepRow {
    let samples = SampleSet::draw(n, m, seed);
    let v = match values {
        ValuesKind::Unit => unit_values(seed, m),
        ValuesKind::Ones => vec![1.0; m],
    };
    let result = if gsq { interpolate_with_square(&samples, &v, d) } else { interpolate(&samples, &v, d) };
    match result {
        Ok(r) => SweepRow {
            seed,
            n,
            m,
            d,
            capacity: r.capacity,
            m_dev: Some(r.m_dev),
            h_norm: Some(r.h_norm),
            g_norm: Some(r.g_norm),
            gsq_norm: r.gsq_norm,
            residual: Some(r.residual),
            error: None,
            csv: r.csv_row(seed, n, m, d),
        },
        Err(e) => {
            let cap = capacity(n, d);
            SweepRow {
                seed,
                n,
                m,
                d,
                capacity: cap,
                m_dev: None,
                h_norm: None,
                g_norm: None,
                gsq_norm: None,
                residual: None,
                error: Some(e.to_string()),
                csv: format!("{seed},{n},{m},{d},{cap},NaN,NaN,NaN,,NaN"),
            }
        }
    }
}

fn csv_echo(effective: &Map<String, Value>) -> String {
    let mut s = String::new();
    for (k, v) in effective {
        let text = match v {
            Value::Array(items) => items.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","),
            Value::String(t) => t.clone(),
            other => other.to_string(),
        };
        s.push_str(&format!("# {k}={text}\n"));
    }
    s
}

pub fn interp_sweep(a: &SweepArgs, cfg: &SweepConfig, s: &Settings) -> Result<u8, CliError> {
    let ns = pick(a.n.clone(), cfg.n.clone(), vec![32, 64, 128]);
    let d = pick(a.d, cfg.d, 2);
    let explicit_m = a.m.clone().or_else(|| cfg.m.clone());
    let exponent = pick(a.m_exponent, cfg.m_exponent, 0.8);
    let seeds = pick(a.seeds, cfg.seeds, 10);
    let values = pick(a.values, cfg.values, ValuesKind::Unit);
    let gsq = a.gsq || cfg.gsq.unwrap_or(false);
    let format = s.format.unwrap_or(Format::Csv);
    if d == 0 {
        return Err(CliError::usage("--d must be at least 1"));
    }
    if ns.contains(&0) {
        return Err(CliError::usage("every n must be at least 1"));
    }
    if explicit_m.is_none() && !(exponent.is_finite() && exponent >= 0.0) {
        return Err(CliError::usage(format!("--m-exponent must be nonnegative, got {exponent}")));
    }

    let mut tasks = Vec::new();
    for &n in &ns {
        let ms = explicit_m.clone().unwrap_or_else(|| vec![sample_count(n, exponent)]);
        for m in ms.into_iter().filter(|&m| m > 0) {
            for k in 0..seeds {
                tasks.push((n, m, s.seed.wrapping_add(k as u64)));
            }
        }
    }
    tasks.sort_unstable();
    tasks.dedup();
    let mut rows: Vec<SweepRow> =
        tasks.par_iter().map(|&(n, m, seed)| sweep_trial(n, m, d, seed, values, gsq)).collect();
    rows.sort_by_key(|r| (r.n, r.m, r.seed));
    let failed = rows.iter().filter(|r| r.error.is_some()).count();

    let mut effective = Map::new();
    effective.insert("command".into(), "interp-sweep".into());
    effective.extend(s.echo());
    effective.insert("n".into(), json!(ns));
    effective.insert("d".into(), d.into());
    match &explicit_m {
        Some(ms) => effective.insert("m".into(), json!(ms)),
        None => effective.insert("m_exponent".into(), exponent.into()),
    };
    effective.insert("seeds".into(), seeds.into());
    effective.insert("values".into(), format!("{values:?}").to_lowercase().into());
    effective.insert("gsq".into(), gsq.into());

    let text = match format {
        Format::Csv => {
            let mut out = csv_echo(&effective);
            out.push_str(sostest::InterpolationResult::csv_header());
            out.push('\n');
            for r in &rows {
                out.push_str(&r.csv);
                out.push('\n');
            }
            out
        }
        Format::Json => {
            effective.remove("command");
            let mut body = Map::new();
            body.insert("rows".into(), serde_json::to_value(&rows).expect("rows serialize"));
            json_document("interp-sweep", effective, body)
        }
    };
    emit(s.out.as_deref(), &text)?;
    if failed > 0 {
        eprintln!("sostest: {failed} of {} trials failed to interpolate", rows.len());
        return Ok(EXIT_NUMERICAL);
    }
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------- sos-check

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleRecord {
    point: Vec<f64>,
    value: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleFile {
    n: usize,
    half_degree: Option<usize>,
    samples: Vec<SampleRecord>,
}

fn parse_json(path: &Path, text: &str) -> Result<Value, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn poly_value(p: MonomialPoly<f64>) -> Value {
    serde_json::from_str(&Polynomial::Monomial(p).to_json()).expect("polynomial json parses")
}

pub fn sos_check(a: &SosCheckArgs, cfg: &SosCheckConfig, s: &Settings) -> Result<u8, CliError> {
    s.require_json("sos-check")?;
    let text = read_input(&a.file)?;
    let value = parse_json(&a.file, &text)?;
    let mut effective = s.echo();
    effective.insert("file".into(), a.file.display().to_string().into());

    if value.get("samples").is_some() {
        let file: SampleFile =
            serde_json::from_value(value).map_err(|e| CliError::usage(format!("{}: {e}", a.file.display())))?;
        if file.samples.is_empty() {
            return Err(CliError::usage(format!("{}: no sample constraints", a.file.display())));
        }
        let d = a
            .half_degree
            .or(file.half_degree)
            .or(cfg.half_degree)
            .ok_or_else(|| CliError::usage("sample files need a half degree (--half-degree or \"half_degree\")"))?;
        let options = SosTesterOptions {
            norm_bound: pick(a.norm_bound, cfg.norm_bound, 1.0),
            tolerances: s.tolerances,
            max_iterations: s.max_iter,
            warm_start: !(a.cold || cfg.cold.unwrap_or(false)),
        };
        let (points, values): (Vec<_>, Vec<_>) = file.samples.into_iter().map(|r| (r.point, r.value)).unzip();
        let verdict = sos_tester(file.n, &points, &values, d, &options)?;
        effective.insert("input".into(), "samples".into());
        effective.insert("half_degree".into(), d.into());
        effective.insert("norm_bound".into(), options.norm_bound.into());
        effective.insert("warm_start".into(), options.warm_start.into());
        emit(s.out.as_deref(), &json_document("sos-check", effective, object(&verdict)))?;
        return Ok(verdict_code(verdict.verdict));
    }

    let target = Polynomial::from_json(&text)?.to_monomial()?;
    let d = pick(a.half_degree, cfg.half_degree, target.degree().div_ceil(2).max(1));
    let mut problem =
        FeasibilityProblem::for_target(target, d).with_tolerances(s.tolerances).with_max_iterations(s.max_iter);
    let norm_bound = a.norm_bound.or(cfg.norm_bound);
    if let Some(b) = norm_bound {
        problem = problem.with_norm_bound(b);
    }
    effective.insert("input".into(), "polynomial".into());
    effective.insert("half_degree".into(), d.into());
    effective.insert("norm_bound".into(), json!(norm_bound));

    let mut body = Map::new();
    let code = match feasibility_search(&problem)? {
        FeasibilityOutcome::Feasible { gram, report } => {
            let squares = extract_squares(&gram, s.tolerances.psd)?;
            body.insert("verdict".into(), json!(Verdict::Yes));
            body.insert("report".into(), json!(report));
            body.insert("violations".into(), json!(verify(&problem, &gram)?));
            body.insert("min_gram_eigenvalue".into(), json!(gram.min_eigenvalue()));
            body.insert("decomposition".into(), Value::Array(squares.into_iter().map(poly_value).collect()));
            EXIT_OK
        }
        FeasibilityOutcome::Infeasible { report } => {
            body.insert("verdict".into(), json!(Verdict::No));
            body.insert("report".into(), json!(report));
            EXIT_NO
        }
    };
    emit(s.out.as_deref(), &json_document("sos-check", effective, body))?;
    Ok(code)
}

// ---------------------------------------------------------------- certify

/// Accepts `p/q`, integers and plain decimals exactly; anything else that
/// parses as a float is taken at its binary value.
fn parse_rational(text: &str, what: &str) -> Result<Rational, CliError> {
    let t = text.trim();
    if let Ok(q) = t.parse::<Rational>() {
        return Ok(q);
    }
    if let Some((int, frac)) = t.split_once('.') {
        let digits = format!("{int}{frac}");
        let plain = !frac.is_empty() && frac.bytes().all(|b| b.is_ascii_digit());
        if plain {
            if let Ok(q) = format!("{digits}/1{}", "0".repeat(frac.len())).parse::<Rational>() {
                return Ok(q);
            }
        }
    }
    t.parse::<f64>()
        .ok()
        .and_then(Rational::from_float)
        .ok_or_else(|| CliError::usage(format!("{what}: cannot parse {text:?} as a number")))
}

fn read_equations(path: &Path) -> Result<Vec<XorEquation>, CliError> {
    let text = read_input(path)?;
    let raw: Vec<XorEquation> =
        serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    raw.into_iter().map(|e| XorEquation::new(e.vars, e.sign).map_err(CliError::from)).collect()
}

fn motzkin_body(
    pe: PseudoExpectation,
    f: &sostest::ExactPoly,
    degree: Option<u32>,
    body: &mut Map<String, Value>,
) -> Result<u8, CliError> {
    let mm = moment_matrix(&pe)?;
    let psd = psd_check(&mm)?;
    let graded = degree.and_then(|deg| graded_bounds(&mm, &psd, deg));
    body.insert("certificate".into(), pe.certificate_json());
    body.insert("pe_value".into(), pe_apply(&pe, f)?.to_string().into());
    body.insert("psd".into(), json!(psd));
    if let Some(g) = graded {
        body.insert("graded_bounds".into(), json!(g));
    }
    distance_body(&pe, f, body)
}

fn distance_body(
    pe: &PseudoExpectation,
    f: &sostest::ExactPoly,
    body: &mut Map<String, Value>,
) -> Result<u8, CliError> {
    let certified = match distance_ratio(pe, f) {
        Ok(report) => {
            let certified = report.certified;
            body.insert("distance".into(), json!(report));
            certified
        }
        Err(Error::NotRefuted) => {
            body.insert("distance".into(), Value::Null);
            body.insert("notice".into(), "pseudo-expectation of f is not negative; nothing is refuted".into());
            false
        }
        Err(e) => return Err(e.into()),
    };
    body.insert("certified".into(), certified.into());
    Ok(if certified { EXIT_OK } else { EXIT_NO })
}

pub fn certify(a: &CertifyArgs, cfg: &CertifyConfig, s: &Settings) -> Result<u8, CliError> {
    s.require_json("certify")?;
    let mut effective = s.echo();
    let mut body = Map::new();
    let code = match a.family {
        Family::Motzkin | Family::MotzkinBlock => {
            let r = pick(a.r, cfg.r, 2);
            let c_text = pick(a.c.clone(), cfg.c.clone(), "0".to_string());
            let c = parse_rational(&c_text, "--c")?;
            let n = pick(a.n, cfg.n, 2);
            let f = motzkin_polynomial(r, &c, n)?;
            effective
                .insert("family".into(), if a.family == Family::Motzkin { "motzkin" } else { "motzkin-block" }.into());
            effective.insert("r".into(), r.into());
            effective.insert("c".into(), c.to_string().into());
            effective.insert("n".into(), n.into());
            if a.family == Family::MotzkinBlock {
                if r != 2 {
                    return Err(CliError::usage(format!("motzkin-block needs r = 2, got {r}")));
                }
                let pe = PseudoExpectation::ParityBlock(ParityBlockPe::new(c, n)?);
                motzkin_body(pe, &f, None, &mut body)?
            } else {
                let k_base = a.k_base.clone().or_else(|| cfg.k_base.clone());
                let k_root = a.k_root.or(cfg.k_root);
                let nu = a.nu.or(cfg.nu);
                let pe = match k_base {
                    Some(b) => MotzkinPe::new(r, c, parse_rational(&b, "--k-base")?, k_root.unwrap_or(r), nu, n)?,
                    None if k_root.is_none_or(|k| k == r) => MotzkinPe::with_default_k(r, c, nu, n)?,
                    None => return Err(CliError::usage("--k-root other than r needs --k-base")),
                };
                effective.insert("k".into(), pe.scale().k_string().into());
                effective.insert("nu".into(), pe.nu().into());
                let degree = pe.degree();
                motzkin_body(PseudoExpectation::Motzkin(pe), &f, Some(degree), &mut body)?
            }
        }
        Family::Xor => {
            let n = pick(a.n, cfg.n, 16);
            let d = pick(a.d, cfg.d, 4);
            let file = a.equations.clone().or_else(|| cfg.equations.clone());
            let equations = match &file {
                Some(path) => read_equations(path)?,
                None => xor_instance(n, pick(a.m, cfg.m, 40), s.seed)?,
            };
            effective.insert("family".into(), "xor".into());
            effective.insert("n".into(), n.into());
            effective.insert("m".into(), equations.len().into());
            effective.insert("d".into(), d.into());
            if let Some(p) = &file {
                effective.insert("equations".into(), p.display().to_string().into());
            }
            let p = xor_polynomial(&equations, n)?;
            let outcome = xor_closure(&equations, d);
            match &outcome {
                ClosureOutcome::Contradiction { set, assigned, forced } => {
                    body.insert(
                        "notice".into(),
                        format!("Contradiction: closure forced the set {set:?} to {forced} after assigning {assigned}")
                            .into(),
                    );
                    body.insert("contradiction".into(), json!({ "set": set, "assigned": assigned, "forced": forced }));
                    body.insert("equations".into(), json!(equations));
                    EXIT_NO
                }
                ClosureOutcome::Closed(closure) => {
                    let closure_size = closure.len();
                    let pe = PseudoExpectation::Xor(XorPe::new(n, equations, &outcome)?);
                    body.insert("certificate".into(), pe.certificate_json());
                    body.insert("closure_size".into(), closure_size.into());
                    body.insert("pe_value".into(), pe_apply(&pe, &p)?.to_string().into());
                    distance_body(&pe, &p, &mut body)?
                }
            }
        }
    };
    emit(s.out.as_deref(), &json_document("certify", effective, body))?;
    Ok(code)
}

// ---------------------------------------------------------------- lowerbound-demo

pub fn lowerbound_demo(a: &DemoArgs, cfg: &DemoConfig, s: &Settings) -> Result<u8, CliError> {
    s.require_json("lowerbound-demo")?;
    let n = pick(a.n, cfg.n, 10);
    let r = pick(a.r, cfg.r, 2);
    let c = pick(a.c, cfg.c, 1.0);
    let m = pick(a.m, cfg.m, 8);
    let options =
        SosTesterOptions { norm_bound: 1.0, tolerances: s.tolerances, max_iterations: s.max_iter, warm_start: true };
    let demo = sostest::testers::lowerbound_demo(n, r, c, m, s.seed, &options)?;
    let mut effective = s.echo();
    effective.insert("n".into(), n.into());
    effective.insert("r".into(), r.into());
    effective.insert("c".into(), c.into());
    effective.insert("m".into(), m.into());
    emit(s.out.as_deref(), &json_document("lowerbound-demo", effective, object(&demo)))?;
    Ok(demo.tester.map_or(EXIT_OK, verdict_code))
}

// ---------------------------------------------------------------- nonneg-test

pub fn nonneg_test(a: &NonnegArgs, cfg: &NonnegConfig, s: &Settings) -> Result<u8, CliError> {
    s.require_json("nonneg-test")?;
    let text = read_input(&a.file)?;
    let f = Polynomial::from_json(&text)?.to_monomial()?;
    let epsilon = pick(a.epsilon, cfg.epsilon, 0.1);
    let degree = pick(a.degree, cfg.degree, f.degree().max(1));
    let verdict = nonneg_tester(|p: &[f64]| f.evaluate(p).unwrap_or(f64::NAN), f.n(), epsilon, degree, s.seed)?;
    let mut effective = s.echo();
    effective.insert("file".into(), a.file.display().to_string().into());
    effective.insert("epsilon".into(), epsilon.into());
    effective.insert("degree".into(), degree.into());
    emit(s.out.as_deref(), &json_document("nonneg-test", effective, object(&verdict)))?;
    Ok(verdict_code(verdict.verdict))
}
