//! Numerical verification suites: Monte Carlo and quadrature evidence that
//! the exact verdicts describe the actual integrals.
//!
//! Each suite emits one row per check. A suite requested by name fails loudly
//! when the document does not meet its preconditions; under `--suite all`
//! the inapplicable suites emit `skip` rows instead and every applicable one
//! runs.

use mfi_core::{
    ball_composition, check_integrability, decide_boundedness, divergence_diagnostic, envelope_l,
    format_rat, homogeneity_ratio_test, mc_selberg_ball, rat_int, rat_to_f64, riesz_composition,
    BoundednessDecision, DivergenceVerdict, GrowthKind, KernelError, KernelSpec, LebesgueProfile,
    McEstimate, McMethod, NumericError, PointConfig, Rat,
};
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::input;
use crate::render::{csv_line, f64_str};
use crate::{CliError, Format, McArgs, ProfileArg, SpecArg, Suite, EXIT_NEGATIVE};

/// Base-point norms for the dilation-slope fit.
const HOMOGENEITY_NORMS: [f64; 4] = [0.5, 1.0, 2.0, 4.0];
/// Exclusion radii for the convergence sweep on integrable documents.
const TAIL_RADII: [f64; 3] = [1e-1, 1e-2, 1e-3];
/// Exclusion radii for the divergence sweep on overloaded documents: the
/// growth fit wants at least four decades.
const WITNESS_RADII: [f64; 5] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5];
/// Random point configurations per envelope check.
const ENVELOPE_CONFIGS: usize = 100;

#[derive(Copy, Clone, PartialEq, Eq)]
enum Outcome {
    Pass,
    Fail,
    Skip,
}

impl Outcome {
    fn as_str(self) -> &'static str {
        match self {
            Outcome::Pass => "pass",
            Outcome::Fail => "fail",
            Outcome::Skip => "skip",
        }
    }
}

struct Row {
    check: String,
    method: &'static str,
    seed: u64,
    samples: u64,
    mean: Option<f64>,
    stderr: Option<f64>,
    outcome: Outcome,
    diagnostics: String,
}

/// Convert a numeric failure into fail-row text, except for resource caps,
/// which abort the whole run on their own exit code.
fn fail_text(err: NumericError) -> Result<String, CliError> {
    if let NumericError::Kernel(
        k @ (KernelError::SubsetCapExceeded { .. } | KernelError::TooManyPoints(_)),
    ) = err
    {
        return Err(k.into());
    }
    Ok(err.to_string())
}

fn push_precondition(rows: &mut Vec<Row>, suite: &str, strict: bool, reason: impl Into<String>) {
    rows.push(Row {
        check: format!("{suite}_precondition"),
        method: "precondition",
        seed: 0,
        samples: 0,
        mean: None,
        stderr: None,
        outcome: if strict { Outcome::Fail } else { Outcome::Skip },
        diagnostics: reason.into(),
    });
}

/// Record one estimate row (pass iff the run produced finite numbers) and
/// hand the estimate back for cross-checks.
fn push_estimate(
    rows: &mut Vec<Row>,
    check: &str,
    method: &'static str,
    seed: u64,
    samples: u64,
    result: Result<McEstimate, NumericError>,
) -> Result<Option<McEstimate>, CliError> {
    match result {
        Ok(est) => {
            let ok = est.mean.is_finite() && est.stderr.is_finite();
            rows.push(Row {
                check: check.to_string(),
                method,
                seed,
                samples,
                mean: Some(est.mean),
                stderr: Some(est.stderr),
                outcome: if ok { Outcome::Pass } else { Outcome::Fail },
                diagnostics: String::new(),
            });
            Ok(Some(est))
        }
        Err(err) => {
            let text = fail_text(err)?;
            rows.push(Row {
                check: check.to_string(),
                method,
                seed,
                samples,
                mean: None,
                stderr: None,
                outcome: Outcome::Fail,
                diagnostics: text,
            });
            Ok(None)
        }
    }
}

fn push_check(
    rows: &mut Vec<Row>,
    check: &str,
    method: &'static str,
    seed: u64,
    samples: u64,
    mean: Option<f64>,
    stderr: Option<f64>,
    pass: bool,
    diagnostics: String,
) {
    rows.push(Row {
        check: check.to_string(),
        method,
        seed,
        samples,
        mean,
        stderr,
        outcome: if pass { Outcome::Pass } else { Outcome::Fail },
        diagnostics,
    });
}

/// Two independent uniform-ball runs, their cross-agreement, and a
/// truncation sweep that must stabilize. Applies to integrable documents.
fn suite_selberg(
    spec: &KernelSpec,
    mc: &McArgs,
    strict: bool,
    rows: &mut Vec<Row>,
) -> Result<(), CliError> {
    let violations = check_integrability(spec)?;
    if !violations.is_empty() {
        push_precondition(
            rows,
            "selberg",
            strict,
            format!(
                "cluster {} is overloaded; use the witness suite",
                violations[0]
            ),
        );
        return Ok(());
    }

    let a = push_estimate(
        rows,
        "selberg_run_a",
        "uniform-ball mc",
        mc.seed,
        mc.samples,
        mc_selberg_ball(spec, mc.samples, mc.seed),
    )?;
    let b = push_estimate(
        rows,
        "selberg_run_b",
        "uniform-ball mc",
        mc.seed + 1,
        mc.samples,
        mc_selberg_ball(spec, mc.samples, mc.seed + 1),
    )?;
    match (a, b) {
        (Some(a), Some(b)) => {
            let delta = (a.mean - b.mean).abs();
            let band = 3.0 * (a.stderr * a.stderr + b.stderr * b.stderr).sqrt();
            push_check(
                rows,
                "selberg_agreement",
                "3-sigma two-run band",
                mc.seed,
                mc.samples,
                Some(delta),
                None,
                a.agrees_with(&b, 3.0),
                format!("band={}", f64_str(band)),
            );
        }
        _ => push_check(
            rows,
            "selberg_agreement",
            "3-sigma two-run band",
            mc.seed,
            mc.samples,
            None,
            None,
            false,
            "prerequisite run failed".to_string(),
        ),
    }

    match divergence_diagnostic(spec, &TAIL_RADII, mc.samples, mc.seed) {
        Ok(report) => {
            let (mean, stderr) = report
                .estimates
                .last()
                .map(|(_, est)| (Some(est.mean), Some(est.stderr)))
                .unwrap_or((None, None));
            push_check(
                rows,
                "selberg_tail_stable",
                "coupled truncation sweep",
                mc.seed,
                mc.samples,
                mean,
                stderr,
                report.verdict == DivergenceVerdict::Converges,
                format!("verdict={:?}", report.verdict),
            );
        }
        Err(err) => {
            let text = fail_text(err)?;
            push_check(
                rows,
                "selberg_tail_stable",
                "coupled truncation sweep",
                mc.seed,
                mc.samples,
                None,
                None,
                false,
                text,
            );
        }
    }
    Ok(())
}

/// Exact overload recheck plus a divergence sweep whose growth must match
/// the predicted shape. Applies to documents with overloaded clusters.
fn suite_witness(
    spec: &KernelSpec,
    mc: &McArgs,
    strict: bool,
    rows: &mut Vec<Row>,
) -> Result<(), CliError> {
    let violations = check_integrability(spec)?;
    if violations.is_empty() {
        push_precondition(
            rows,
            "witness",
            strict,
            "every cluster is integrable; use the selberg suite",
        );
        return Ok(());
    }

    // Worst overload, recomputed exactly.
    let n = spec.n_rat();
    let mut worst: Option<(mfi_core::SubsetMask, Rat)> = None;
    for &j in &violations {
        let capacity = rat_int(j.len() as i64 - 1) * &n;
        let excess = spec.subset_alpha_sum(j) - capacity;
        if worst.as_ref().map_or(true, |(_, w)| excess > *w) {
            worst = Some((j, excess));
        }
    }
    let (subset, excess) = worst.expect("nonempty violations");
    push_check(
        rows,
        "witness_overload",
        "exact rational",
        0,
        0,
        Some(rat_to_f64(&excess)),
        None,
        !excess.is_negative(),
        format!("subset={subset};excess={}", format_rat(&excess)),
    );

    match divergence_diagnostic(spec, &WITNESS_RADII, mc.samples, mc.seed) {
        Ok(report) => {
            let (mean, stderr) = report
                .estimates
                .last()
                .map(|(_, est)| (Some(est.mean), Some(est.stderr)))
                .unwrap_or((None, None));
            push_check(
                rows,
                "witness_divergence",
                "coupled truncation sweep",
                mc.seed,
                mc.samples,
                mean,
                stderr,
                report.verdict == DivergenceVerdict::Diverges,
                format!(
                    "verdict={:?};predicted={:?}",
                    report.verdict, report.predicted
                ),
            );
            match report.fit {
                Some(fit) => {
                    let (pass, diag) = match fit.kind {
                        GrowthKind::PowerLaw => {
                            let predicted = report.predicted_exponent.unwrap_or(f64::NAN);
                            (
                                (fit.rate - predicted).abs() <= 0.1,
                                format!(
                                    "kind=power;predicted={};r2={}",
                                    f64_str(predicted),
                                    f64_str(fit.r_squared)
                                ),
                            )
                        }
                        GrowthKind::Logarithmic => (
                            fit.rate > 0.0,
                            format!("kind=log;r2={}", f64_str(fit.r_squared)),
                        ),
                    };
                    push_check(
                        rows,
                        "witness_rate",
                        "truncation growth fit",
                        mc.seed,
                        mc.samples,
                        Some(fit.rate),
                        None,
                        pass,
                        diag,
                    );
                }
                None => push_check(
                    rows,
                    "witness_rate",
                    "truncation growth fit",
                    mc.seed,
                    mc.samples,
                    None,
                    None,
                    false,
                    "no growth fit produced".to_string(),
                ),
            }
        }
        Err(err) => {
            let text = fail_text(err)?;
            for check in ["witness_divergence", "witness_rate"] {
                push_check(
                    rows,
                    check,
                    "coupled truncation sweep",
                    mc.seed,
                    mc.samples,
                    None,
                    None,
                    false,
                    text.clone(),
                );
            }
        }
    }
    Ok(())
}

/// Dilation response of the weighted integral: fitted log-log slope against
/// the exact prediction on bounded documents, divergence on unbounded ones.
fn suite_homogeneity(
    spec: &KernelSpec,
    profile: Option<&LebesgueProfile>,
    mc: &McArgs,
    strict: bool,
    rows: &mut Vec<Row>,
) -> Result<(), CliError> {
    let Some(profile) = profile else {
        push_precondition(
            rows,
            "homogeneity",
            strict,
            "no Lebesgue exponents: add \"p\" or pass --profile",
        );
        return Ok(());
    };
    let report = decide_boundedness(spec, profile)?;
    match report.verdict {
        BoundednessDecision::OutOfScope { reason } => {
            push_precondition(rows, "homogeneity", strict, reason);
        }
        BoundednessDecision::Bounded => {
            match homogeneity_ratio_test(
                spec,
                profile.reciprocals(),
                &HOMOGENEITY_NORMS,
                mc.samples,
                mc.seed,
            ) {
                Ok(hr) => {
                    match (hr.slope, hr.r_squared) {
                        (Some(slope), Some(r2)) => push_check(
                            rows,
                            "homogeneity_slope",
                            "log-log dilation fit",
                            mc.seed,
                            mc.samples,
                            Some(slope),
                            None,
                            (slope - hr.predicted_slope).abs() <= 0.05 && r2 > 0.99,
                            format!(
                                "predicted={};r2={}",
                                f64_str(hr.predicted_slope),
                                f64_str(r2)
                            ),
                        ),
                        _ => push_check(
                            rows,
                            "homogeneity_slope",
                            "log-log dilation fit",
                            mc.seed,
                            mc.samples,
                            None,
                            None,
                            false,
                            "no convergent grid points".to_string(),
                        ),
                    }
                    let unit = hr
                        .points
                        .iter()
                        .find(|p| (p.base_norm - 1.0).abs() < 1e-12);
                    match unit.and_then(|p| {
                        if p.divergent {
                            None
                        } else {
                            p.estimate.as_ref()
                        }
                    }) {
                        Some(est) => push_check(
                            rows,
                            "homogeneity_f1",
                            "importance mc",
                            mc.seed,
                            mc.samples,
                            Some(est.mean),
                            Some(est.stderr),
                            est.mean.is_finite() && est.stderr <= 0.05 * est.mean.abs(),
                            "unit base point".to_string(),
                        ),
                        None => push_check(
                            rows,
                            "homogeneity_f1",
                            "importance mc",
                            mc.seed,
                            mc.samples,
                            None,
                            None,
                            false,
                            "unit base point diverged".to_string(),
                        ),
                    }
                }
                Err(err) => {
                    let text = fail_text(err)?;
                    for check in ["homogeneity_slope", "homogeneity_f1"] {
                        push_check(
                            rows,
                            check,
                            "log-log dilation fit",
                            mc.seed,
                            mc.samples,
                            None,
                            None,
                            false,
                            text.clone(),
                        );
                    }
                }
            }
        }
        BoundednessDecision::Unbounded { .. } => {
            match homogeneity_ratio_test(
                spec,
                profile.reciprocals(),
                &HOMOGENEITY_NORMS,
                mc.samples,
                mc.seed,
            ) {
                Ok(hr) => {
                    let divergent = hr.points.iter().filter(|p| p.divergent).count();
                    push_check(
                        rows,
                        "homogeneity_divergence",
                        "coupled truncation sweep",
                        mc.seed,
                        mc.samples,
                        None,
                        None,
                        divergent > 0,
                        format!("divergent_points={divergent}/{}", hr.points.len()),
                    );
                }
                Err(err) => {
                    let text = fail_text(err)?;
                    push_check(
                        rows,
                        "homogeneity_divergence",
                        "coupled truncation sweep",
                        mc.seed,
                        mc.samples,
                        None,
                        None,
                        false,
                        text,
                    );
                }
            }
        }
    }
    Ok(())
}

/// Exponents the envelope suite sees: the last column of the kernel matrix,
/// one per remaining point.
fn envelope_alphas(spec: &KernelSpec) -> Vec<Rat> {
    let last = spec.m() - 1;
    (0..last).map(|i| spec.alpha(i, last).clone()).collect()
}

/// Draw one random center configuration. Every coordinate is uniform in
/// `[-scale, scale]`; when `target_spread` is set the whole configuration is
/// rescaled so its pairwise distance sum lands exactly there.
fn random_config(
    n: usize,
    k: usize,
    scale: f64,
    target_spread: Option<f64>,
    rng: &mut ChaCha8Rng,
) -> Result<PointConfig, CliError> {
    let mut points: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..n).map(|_| scale * rng.gen_range(-1.0..1.0)).collect())
        .collect();
    if let Some(target) = target_spread {
        let config = PointConfig::new(n, points.clone()).map_err(CliError::from)?;
        let full = mfi_core::SubsetMask::full(k);
        let spread = config.pairwise_sum(full);
        if spread > 0.0 {
            let factor = target / spread;
            for p in &mut points {
                for c in p.iter_mut() {
                    *c *= factor;
                }
            }
        }
    }
    PointConfig::new(n, points).map_err(CliError::from)
}

/// Composition integral against the envelope decomposition over random
/// configurations: finite positive ratios, and a fitted constant stable
/// between two independent batches. At the critical total the ball-restricted
/// integral is compared two-sidedly to the logarithm of the spread.
fn suite_envelope(
    spec: &KernelSpec,
    mc: &McArgs,
    strict: bool,
    rows: &mut Vec<Row>,
) -> Result<(), CliError> {
    let m = spec.m();
    if m < 3 {
        push_precondition(rows, "envelope", strict, "need at least two centers");
        return Ok(());
    }
    let alphas_rat = envelope_alphas(spec);
    let n_rat = spec.n_rat();
    if alphas_rat
        .iter()
        .any(|a| a.is_zero() || *a >= n_rat)
    {
        push_precondition(
            rows,
            "envelope",
            strict,
            "every exponent toward the last point must lie strictly between 0 and n",
        );
        return Ok(());
    }
    let total: Rat = alphas_rat.iter().sum();
    let alphas: Vec<f64> = alphas_rat.iter().map(rat_to_f64).collect();
    let total_f: f64 = alphas.iter().sum();
    let n = spec.n() as usize;
    let nf = n as f64;
    let k = m - 1;
    let method = if n == 1 {
        McMethod::Quadrature1d
    } else {
        McMethod::Importance
    };
    let method_name: &'static str = if n == 1 {
        "adaptive quadrature vs envelope"
    } else {
        "importance mc vs envelope"
    };
    let per_config = (mc.samples / 10).max(1_000);

    if total == n_rat {
        // Critical total: ball integral against log(8 / d_S).
        let mut rng = ChaCha8Rng::seed_from_u64(mc.seed ^ 0x454e_565f);
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        let mut sum = 0.0;
        let mut count = 0usize;
        let mut failure: Option<String> = None;
        for i in 0..ENVELOPE_CONFIGS {
            let spread = 10f64.powf(rng.gen_range(-4.0..0.0));
            let config = random_config(n, k, 1.0, Some(spread), &mut rng)?;
            let seed = mc.seed + 30_000 + i as u64;
            match ball_composition(n, &alphas, &config, 2.0, method, per_config, seed) {
                Ok(est) => {
                    let ratio = est.mean / (8.0 / spread).ln();
                    if !(ratio.is_finite() && ratio > 0.0) {
                        failure = Some(format!("config {i}: ratio {ratio}"));
                        break;
                    }
                    lo = lo.min(ratio);
                    hi = hi.max(ratio);
                    sum += ratio;
                    count += 1;
                }
                Err(err) => {
                    failure = Some(format!("config {i}: {}", fail_text(err)?));
                    break;
                }
            }
        }
        let (pass, diag) = match failure {
            Some(text) => (false, text),
            None => (
                hi / lo < 4.0,
                format!("lo={};hi={}", f64_str(lo), f64_str(hi)),
            ),
        };
        push_check(
            rows,
            "envelope_log_criticality",
            "ball integral vs log spread",
            mc.seed,
            per_config,
            (count > 0).then(|| sum / count as f64),
            None,
            pass,
            diag,
        );
        return Ok(());
    }

    if total < n_rat || total_f <= nf {
        push_precondition(
            rows,
            "envelope",
            strict,
            "total exponent toward the last point does not decay at infinity",
        );
        return Ok(());
    }

    // Supercritical total: full composition against the envelope sum.
    let mut rng = ChaCha8Rng::seed_from_u64(mc.seed ^ 0x454e_565f);
    let mut ratios: Vec<f64> = Vec::with_capacity(ENVELOPE_CONFIGS);
    let mut failure: Option<String> = None;
    for i in 0..ENVELOPE_CONFIGS {
        let scale = 10f64.powf(rng.gen_range(-2.0..1.0));
        let config = random_config(n, k, scale, None, &mut rng)?;
        let f = match riesz_composition(
            n,
            &alphas,
            &config,
            method,
            per_config,
            mc.seed + 10_000 + i as u64,
        ) {
            Ok(est) => est.mean,
            Err(err) => {
                failure = Some(format!("config {i}: {}", fail_text(err)?));
                break;
            }
        };
        let l_sum: f64 = match envelope_l(n, &alphas, &config, per_config, mc.seed + 20_000 + i as u64)
        {
            Ok(l) => l.into_iter().sum(),
            Err(err) => {
                failure = Some(format!("config {i}: {}", fail_text(err)?));
                break;
            }
        };
        if !(l_sum.is_finite() && l_sum > 0.0) {
            failure = Some(format!("config {i}: envelope sum {l_sum}"));
            break;
        }
        ratios.push(f / l_sum);
    }

    match failure {
        Some(text) => {
            for check in ["envelope_ratio_finite", "envelope_constant_stable"] {
                push_check(
                    rows,
                    check,
                    method_name,
                    mc.seed,
                    per_config,
                    None,
                    None,
                    false,
                    text.clone(),
                );
            }
        }
        None => {
            let max = ratios.iter().copied().fold(0.0f64, f64::max);
            let finite = ratios.iter().all(|r| r.is_finite() && *r > 0.0);
            push_check(
                rows,
                "envelope_ratio_finite",
                method_name,
                mc.seed,
                per_config,
                Some(max),
                None,
                finite,
                format!("configs={ENVELOPE_CONFIGS}"),
            );
            let half = ratios.len() / 2;
            let c1 = ratios[..half].iter().copied().fold(0.0f64, f64::max);
            let c2 = ratios[half..].iter().copied().fold(0.0f64, f64::max);
            push_check(
                rows,
                "envelope_constant_stable",
                method_name,
                mc.seed,
                per_config,
                Some(c1.max(c2)),
                None,
                finite && c1 / c2 < 2.0 && c2 / c1 < 2.0,
                format!("batch_a={};batch_b={}", f64_str(c1), f64_str(c2)),
            );
        }
    }
    Ok(())
}

fn render_rows(rows: &[Row], format: Format) -> String {
    match format {
        Format::Csv => {
            let mut out = String::from("check,method,seed,samples,mean,stderr,outcome,diagnostics");
            for row in rows {
                out.push('\n');
                out.push_str(&csv_line(&[
                    row.check.clone(),
                    row.method.to_string(),
                    row.seed.to_string(),
                    row.samples.to_string(),
                    row.mean.map(f64_str).unwrap_or_default(),
                    row.stderr.map(f64_str).unwrap_or_default(),
                    row.outcome.as_str().to_string(),
                    row.diagnostics.clone(),
                ]));
            }
            out
        }
        Format::Json => {
            let items: Vec<serde_json::Value> = rows
                .iter()
                .map(|row| {
                    serde_json::json!({
                        "check": row.check,
                        "method": row.method,
                        "seed": row.seed,
                        "samples": row.samples,
                        "mean": row.mean,
                        "stderr": row.stderr,
                        "outcome": row.outcome.as_str(),
                        "diagnostics": row.diagnostics,
                    })
                })
                .collect();
            serde_json::to_string_pretty(&items).expect("serializable")
        }
        Format::Text => rows
            .iter()
            .map(|row| {
                let mut line = format!("{:<4} {:<26}", row.outcome.as_str(), row.check);
                if let Some(mean) = row.mean {
                    line.push_str(&format!(" mean={}", f64_str(mean)));
                }
                if let Some(stderr) = row.stderr {
                    line.push_str(&format!(" stderr={}", f64_str(stderr)));
                }
                if !row.diagnostics.is_empty() {
                    line.push_str(&format!(" [{}]", row.diagnostics));
                }
                line
            })
            .collect::<Vec<_>>()
            .join("\n"),
    }
}

pub(crate) fn run(
    spec_arg: &SpecArg,
    profile_arg: &ProfileArg,
    suite: Suite,
    mc: &McArgs,
    format: Format,
) -> Result<u8, CliError> {
    let doc = input::load_document(&spec_arg.spec)?;
    let profile = input::effective_profile(&doc, profile_arg)?;
    let mut rows = Vec::new();
    match suite {
        Suite::Selberg => suite_selberg(&doc.spec, mc, true, &mut rows)?,
        Suite::Witness => suite_witness(&doc.spec, mc, true, &mut rows)?,
        Suite::Homogeneity => suite_homogeneity(&doc.spec, profile.as_ref(), mc, true, &mut rows)?,
        Suite::Envelope => suite_envelope(&doc.spec, mc, true, &mut rows)?,
        Suite::All => {
            suite_selberg(&doc.spec, mc, false, &mut rows)?;
            suite_witness(&doc.spec, mc, false, &mut rows)?;
            suite_homogeneity(&doc.spec, profile.as_ref(), mc, false, &mut rows)?;
            suite_envelope(&doc.spec, mc, false, &mut rows)?;
        }
    }
    println!("{}", render_rows(&rows, format));
    Ok(if rows.iter().any(|r| r.outcome == Outcome::Fail) {
        EXIT_NEGATIVE
    } else {
        0
    })
}
