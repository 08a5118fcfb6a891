use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sigwind::lyndon::{lie_to_lyndon, lyndon_words};
use sigwind::path::{polyline_signature, random_polygon_corpus, read_csv, segment_signature, write_csv};
use sigwind::sle::{
    close_curve_phi, expected_loop_signature, loewner_trace, map_to_disc, mc_expected_signature, one_point_moments,
    sample_driver, semicircle_loop, semicircle_signature, theorem6_assemble, theorem6_check, word_table, McEstimate,
    SleConfig,
};
use sigwind::specfun::{
    catalan_constant, hyp_g, qmc_integral_a, quad_integral_a, two_point_moment_mc_check, QuadratureResult,
    QuadratureSpec,
};
use sigwind::winding::{
    fourth_level_from_winding, isoperimetric_check, sharpness_pair, verify_theorem1, MomentTable,
};
use sigwind::{PolyLine, Result, SigError, Word};

use crate::{
    Command, CorpusArgs, LyndonCommand, Output, QuadArgs, SigCommand, SleArgs, SleCommand, SpecfunCommand, Stage,
    VerifyCommand, WindingCommand,
};

#[derive(Serialize, Deserialize)]
struct EstimateFile {
    schema: u32,
    estimate: McEstimate,
}

fn json_output(mut value: Value, passed: bool) -> Output {
    if let Value::Object(map) = &mut value {
        map.insert("schema".into(), json!(1));
    }
    let mut bytes = serde_json::to_vec_pretty(&value).expect("plain data");
    bytes.push(b'\n');
    Output { bytes, passed }
}

fn read_path(path: &Path) -> Result<PolyLine> {
    read_csv(File::open(path)?)
}

fn corpus(args: &CorpusArgs) -> Result<Vec<PolyLine>> {
    match &args.input {
        Some(path) => Ok(vec![read_path(path)?]),
        None => {
            if args.count == 0 || args.max_vertices < 3 {
                return Err(SigError::Domain("need count >= 1 and max_vertices >= 3".into()));
            }
            Ok(random_polygon_corpus(args.seed, args.count, args.max_vertices, 1.0))
        }
    }
}

pub fn run(command: &Command) -> Result<Output> {
    match command {
        Command::Sig(SigCommand::Compute { input, level }) => sig_compute(input, *level),
        Command::Lyndon(LyndonCommand::List { dim, level }) => lyndon_list(*dim, *level),
        Command::Winding(WindingCommand::Moments { input, level }) => {
            let table = MomentTable::compute(&read_path(input)?, *level)?;
            Ok(json_output(json!({ "N": level, "moments": table }), true))
        }
        Command::Verify(v) => verify(v),
        Command::Sle(SleCommand::Sample { sle, index, stage }) => sle_sample(sle, *index, *stage),
        Command::Sle(SleCommand::Mc { sle, samples, level }) => {
            let cfg = sle_config(sle, *samples, *level);
            let estimate = mc_expected_signature(&cfg)?;
            let mut bytes = serde_json::to_vec_pretty(&EstimateFile { schema: 1, estimate }).expect("plain data");
            bytes.push(b'\n');
            Ok(Output { bytes, passed: true })
        }
        Command::Specfun(s) => specfun(s),
    }
}

fn sig_compute(input: &Path, level: usize) -> Result<Output> {
    if level == 0 {
        return Err(SigError::Domain("N must be positive".into()));
    }
    let p = read_path(input)?;
    let sig = polyline_signature(&p, level);
    let log = lie_to_lyndon(&sig.log()?)?;
    Ok(json_output(
        json!({ "N": level, "vertices": p.num_vertices(), "signature": sig, "log_signature": log }),
        true,
    ))
}

fn lyndon_list(dim: usize, level: usize) -> Result<Output> {
    if !(1..=9).contains(&dim) {
        return Err(SigError::Domain("d must be in 1..=9".into()));
    }
    let words: Vec<String> = lyndon_words(dim, level).iter().map(Word::to_string).collect();
    Ok(json_output(json!({ "d": dim, "N": level, "count": words.len(), "words": words }), true))
}

fn sle_config(args: &SleArgs, samples: usize, level: usize) -> SleConfig {
    SleConfig {
        kappa: args.kappa,
        steps: args.steps,
        horizon: args.horizon,
        samples,
        seed: args.seed,
        level,
        arc_points: args.arc_points,
    }
}

fn sle_sample(args: &SleArgs, index: u64, stage: Stage) -> Result<Output> {
    let cfg = sle_config(args, 1, 4);
    cfg.validate()?;
    let trace = loewner_trace(&sample_driver(&cfg, index), cfg.dt())?;
    let curve = match stage {
        Stage::Trace => trace,
        Stage::Disc => map_to_disc(&trace)?,
        Stage::Loop => close_curve_phi(&map_to_disc(&trace)?, cfg.arc_points)?,
    };
    let mut bytes = Vec::new();
    write_csv(&curve, &mut bytes)?;
    Ok(Output { bytes, passed: true })
}

fn verify(command: &VerifyCommand) -> Result<Output> {
    match command {
        VerifyCommand::Theorem1 { corpus: args, level, tol } => {
            let mut worst: Option<(usize, sigwind::winding::Theorem1Report)> = None;
            let mut algebraic: f64 = 0.0;
            let polygons = corpus(args)?;
            for (i, p) in polygons.iter().enumerate() {
                let r = verify_theorem1(p, *level)?;
                algebraic = algebraic.max(r.algebraic_max_abs_error);
                if worst.as_ref().is_none_or(|(_, w)| r.max_abs_error > w.max_abs_error) {
                    worst = Some((i, r));
                }
            }
            let (index, report) = worst.expect("nonempty corpus");
            let passed = report.max_abs_error < *tol;
            Ok(json_output(
                json!({
                    "check": "theorem1",
                    "passed": passed,
                    "tolerance": tol,
                    "N": level,
                    "polygons": polygons.len(),
                    "max_abs_error": report.max_abs_error,
                    "algebraic_max_abs_error": algebraic,
                    "worst_polygon": index,
                    "per_word_table": report.per_word_table,
                }),
                passed,
            ))
        }
        VerifyCommand::Sharpness { tol } => {
            let (gamma, gamma_tilde) = sharpness_pair();
            let w = Word::parse("12121")?;
            let a = polyline_signature(&gamma, 5).word_coefficient(&w)?;
            let b = polyline_signature(&gamma_tilde, 5).word_coefficient(&w)?;
            let ma = MomentTable::compute(&gamma, 6)?;
            let mb = MomentTable::compute(&gamma_tilde, 6)?;
            let gap = ma.max_abs_diff(&mb);
            let passed = gap < *tol && a != b;
            Ok(json_output(
                json!({
                    "check": "sharpness",
                    "passed": passed,
                    "word": "12121",
                    "gamma": a,
                    "gamma_tilde": b,
                    "moment_tables_max_abs_difference": gap,
                    "tolerance": tol,
                    "moments": ma,
                }),
                passed,
            ))
        }
        VerifyCommand::Corollary2 { corpus: args, tol } => {
            let polygons = corpus(args)?;
            let mut worst = (0usize, -1.0f64, BTreeMap::new());
            for (i, p) in polygons.iter().enumerate() {
                let log = polyline_signature(p, 4).log()?;
                let rebuilt = fourth_level_from_winding(&MomentTable::compute(p, 4)?)?;
                let gap = rebuilt.max_abs_diff(&log)?;
                if gap > worst.1 {
                    let table: BTreeMap<String, [f64; 2]> = log
                        .iter_words()
                        .filter(|(w, _)| !w.is_empty())
                        .map(|(w, x)| (w.to_string(), [rebuilt.coeff(&w), x]))
                        .filter(|(_, [r, x])| *r != 0.0 || *x != 0.0)
                        .collect();
                    worst = (i, gap, table);
                }
            }
            let passed = worst.1 < *tol;
            Ok(json_output(
                json!({
                    "check": "corollary2",
                    "passed": passed,
                    "tolerance": tol,
                    "polygons": polygons.len(),
                    "max_abs_difference": worst.1,
                    "worst_polygon": worst.0,
                    "per_word_table": worst.2,
                    "columns": ["from_moments", "log_signature"],
                }),
                passed,
            ))
        }
        VerifyCommand::Isoperimetric { corpus: args, resolution, slack } => {
            let polygons = corpus(args)?;
            let reports = polygons
                .iter()
                .map(|p| isoperimetric_check(p, *resolution, *slack))
                .collect::<Result<Vec<_>>>()?;
            let violations: Vec<usize> = (0..reports.len()).filter(|&i| !reports[i].holds).collect();
            let worst = (0..reports.len())
                .max_by(|&i, &j| reports[i].ratio.total_cmp(&reports[j].ratio))
                .expect("nonempty corpus");
            let passed = violations.is_empty();
            Ok(json_output(
                json!({
                    "check": "isoperimetric",
                    "passed": passed,
                    "resolution": resolution,
                    "slack": slack,
                    "polygons": polygons.len(),
                    "violations": violations,
                    "worst_polygon": worst,
                    "worst": reports[worst],
                }),
                passed,
            ))
        }
        VerifyCommand::Semicircle { m, tol } => {
            let exact = semicircle_signature(4)?;
            let mut ms: Vec<usize> = vec![m / 100, m / 10, *m];
            ms.retain(|&k| k > 0);
            ms.dedup();
            let mut rows = Vec::new();
            for &k in &ms {
                let s = polyline_signature(&semicircle_loop(k)?, 4);
                rows.push(json!({ "m": k, "max_abs_error": s.max_abs_diff(&exact)? }));
            }
            let errors: Vec<f64> = rows.iter().map(|r| r["max_abs_error"].as_f64().expect("number")).collect();
            let monotone = errors.windows(2).all(|w| w[1] < w[0]);
            let passed = monotone && *errors.last().expect("m >= 1") < *tol;
            Ok(json_output(
                json!({
                    "check": "semicircle",
                    "passed": passed,
                    "tolerance": tol,
                    "monotone": monotone,
                    "errors": rows,
                    "closed_form": word_table(&exact),
                }),
                passed,
            ))
        }
        VerifyCommand::Theorem6 { estimate, a, tol, quad } => theorem6(estimate.as_deref(), *a, *tol, quad),
    }
}

fn quadrature(args: &QuadArgs) -> Result<QuadratureResult> {
    quad_integral_a(&QuadratureSpec {
        tolerance: args.quad_tol,
        kernel: args.kernel.into(),
        ..QuadratureSpec::default()
    })
}

fn free_moments(est: &McEstimate) -> Result<[f64; 3]> {
    // E M(n, k) = (-1)^k n! k! E S^{1^{n+1} 2^{k+1}} on closed loops.
    let coeff = |s: &str| est.mean.word_coefficient(&Word::parse(s)?);
    Ok([coeff("112")?, 2.0 * coeff("1112")?, 2.0 * coeff("1222")?])
}

fn theorem6(estimate: Option<&Path>, a: Option<f64>, tol: f64, quad: &QuadArgs) -> Result<Output> {
    let k = catalan_constant();
    let (a_value, quad_result) = match a {
        Some(v) => (
            v,
            QuadratureResult {
                value: v,
                error_estimate: 0.0,
                nodes_used: 0,
                refinements: 0,
                history: vec![v],
            },
        ),
        None => {
            let r = quadrature(quad)?;
            (r.value, r)
        }
    };
    let report = theorem6_check(k, a_value)?;
    let display_ok = report.free_moment_sensitivity < tol && report.max_abs_difference < tol;
    let mut out = json!({
        "check": "theorem6",
        "tolerance": tol,
        "catalan": k,
        "A": a_value,
        "A_quadrature": if a.is_none() { json!(quad_result) } else { Value::Null },
        "display": {
            "passed": display_ok,
            "free_moment_sensitivity": report.free_moment_sensitivity,
            "max_abs_difference": report.max_abs_difference,
            "words": report.words,
        },
    });
    let mut passed = display_ok;
    if let Some(path) = estimate {
        let file: EstimateFile = serde_json::from_reader(File::open(path)?)
            .map_err(|e| SigError::Parse { row: e.line(), message: e.to_string() })?;
        let est = file.estimate;
        if est.mean.dim() != 2 || est.mean.depth() < 4 {
            return Err(SigError::Shape("estimate must be planar and reach level 4".into()));
        }
        let free = free_moments(&est)?;
        let closed_form = theorem6_assemble(k, a_value, free)?;
        let tail = &semicircle_signature(4)? * &segment_signature(&[1.0, 0.0], 4);
        let mc_route = est.mean.truncated(4).try_mul(&tail)?;
        let routes: Vec<Value> = closed_form
            .iter_words()
            .filter(|(w, _)| !w.is_empty())
            .map(|(w, x)| json!({ "word": w.to_string(), "closed_form": x, "monte_carlo": mc_route.coeff(&w) }))
            .collect();
        let predicted = expected_loop_signature(&one_point_moments(k, free), a_value)?;
        let mut loop_ok = true;
        let mut rows = Vec::new();
        for (w, p) in predicted.iter_words().filter(|(w, _)| w.degree() >= 2) {
            let (m, se) = est.word(&w)?;
            let tolerance = (3.0 * se).max(0.15 * p.abs());
            let agrees = (m - p).abs() <= tolerance;
            loop_ok &= agrees;
            rows.push(json!({
                "word": w.to_string(),
                "monte_carlo": m,
                "standard_error": se,
                "predicted": p,
                "tolerance": tolerance,
                "agrees": agrees,
            }));
        }
        let two_point = two_point_moment_mc_check(&est, &quad_result)?;
        passed &= loop_ok;
        out["monte_carlo"] = json!({
            "samples": est.samples_used,
            "free_moments": { "x": free[0], "x2": free[1], "y2": free[2] },
            "routes": routes,
            "loop_comparison": { "passed": loop_ok, "words": rows },
            "two_point": two_point,
        });
    }
    out["passed"] = json!(passed);
    Ok(json_output(out, passed))
}

fn specfun(command: &SpecfunCommand) -> Result<Output> {
    match command {
        SpecfunCommand::A {
            tol,
            kernel,
            radial_panels,
            angular_panels,
            nodes_per_panel,
            qmc_points,
            qmc_shifts,
            seed,
        } => {
            let spec = QuadratureSpec {
                radial_panels: *radial_panels,
                angular_panels: *angular_panels,
                nodes_per_panel: *nodes_per_panel,
                tolerance: *tol,
                kernel: (*kernel).into(),
                ..QuadratureSpec::default()
            };
            let started = Instant::now();
            let r = quad_integral_a(&spec)?;
            let mut out = json!({
                "value": r.value,
                "error_estimate": r.error_estimate,
                "nodes_used": r.nodes_used,
                "refinements": r.refinements,
                "history": r.history,
                "spec": spec,
            });
            if *qmc_points > 0 {
                out["qmc"] = json!(qmc_integral_a(spec.kernel, spec.radial_scale, *qmc_points, *qmc_shifts, *seed)?);
            }
            out["wall_time"] = json!(started.elapsed().as_secs_f64());
            Ok(json_output(out, true))
        }
        SpecfunCommand::Catalan => Ok(json_output(json!({ "value": catalan_constant() }), true)),
        SpecfunCommand::G { sigma } => {
            let value = hyp_g(*sigma)?;
            Ok(json_output(json!({ "sigma": sigma, "value": value }), true))
        }
    }
}
