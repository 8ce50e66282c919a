//! Plain-text and CSV rendering shared by the subcommands.
//!
//! CSV fields containing commas, quotes, or newlines are double-quoted with
//! embedded quotes doubled; floats always print in scientific notation with
//! nine significant decimals so identical runs stay byte-identical.

use mfi_core::{
    format_rat, BoundednessDecision, ConditionIiiStatus, ConditionReport, EndpointDecision,
    IiiViolation, WitnessKind,
};

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub(crate) fn csv_line(fields: &[String]) -> String {
    fields
        .iter()
        .map(|f| csv_field(f))
        .collect::<Vec<_>>()
        .join(",")
}

pub(crate) fn f64_str(x: f64) -> String {
    format!("{x:.9e}")
}

/// `{1,3}`-style rendering of a sorted 1-based index list.
pub(crate) fn subset_str(indices: &[usize]) -> String {
    let inner: Vec<String> = indices.iter().map(|i| i.to_string()).collect();
    format!("{{{}}}", inner.join(","))
}

/// The first failed condition, in the order homogeneity, integrability,
/// subset capacity; empty when the verdict is bounded, `scope` when the
/// profile is out of scope with all conditions passing.
pub(crate) fn first_violation(report: &ConditionReport) -> String {
    if !report.homogeneity.holds {
        return "homogeneity".to_string();
    }
    if let Some(j) = report.integrability_violations.first() {
        return format!("integrability {j}");
    }
    if let Some((j, _)) = report
        .iii_results
        .iter()
        .find(|(_, status)| !status.passes())
    {
        return format!("capacity {j}");
    }
    match &report.verdict {
        BoundednessDecision::OutOfScope { .. } => "scope".to_string(),
        _ => String::new(),
    }
}

/// One-row CSV with the columns `verdict,first_violation`.
pub(crate) fn report_csv(report: &ConditionReport) -> String {
    format!(
        "verdict,first_violation\n{}",
        csv_line(&[
            mfi_core::verdict_str(&report.verdict).to_string(),
            first_violation(report),
        ])
    )
}

pub(crate) fn report_text(report: &ConditionReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "homogeneity: {} ({} vs {})\n",
        if report.homogeneity.holds {
            "holds"
        } else {
            "fails"
        },
        format_rat(&report.homogeneity.lhs),
        format_rat(&report.homogeneity.rhs),
    ));
    if report.integrability_violations.is_empty() {
        out.push_str("integrability: every cluster below capacity\n");
    } else {
        for j in &report.integrability_violations {
            out.push_str(&format!("integrability: cluster {j} at or above capacity\n"));
        }
    }
    for (j, status) in report.iii_results.iter() {
        let line = match status {
            ConditionIiiStatus::StrictA { margin } => {
                format!("capacity {j}: strict, margin {}", format_rat(margin))
            }
            ConditionIiiStatus::EqualityB { nested_checks } => {
                let failing: Vec<String> = nested_checks
                    .iter()
                    .filter(|c| !c.holds)
                    .map(|c| c.j.to_string())
                    .collect();
                if failing.is_empty() {
                    format!(
                        "capacity {j}: equality, all {} nested rows hold",
                        nested_checks.len()
                    )
                } else {
                    format!("capacity {j}: equality, nested rows fail at {}", failing.join(" "))
                }
            }
            ConditionIiiStatus::Violated { reason } => match reason {
                IiiViolation::Excess { amount } => {
                    format!("capacity {j}: violated, excess {}", format_rat(amount))
                }
                IiiViolation::ComplementMassDeficit { mass } => format!(
                    "capacity {j}: violated, complement mass {} below 1",
                    format_rat(mass)
                ),
            },
        };
        out.push_str(&line);
        out.push('\n');
    }
    match &report.verdict {
        BoundednessDecision::Bounded => out.push_str("verdict: bounded"),
        BoundednessDecision::Unbounded { witness } => {
            out.push_str("verdict: unbounded\n");
            let kind = match &witness.kind {
                WitnessKind::Dilation => "dilation".to_string(),
                WitnessKind::PowerCutoff { j0, .. } => format!("power cutoff on {j0}"),
                WitnessKind::LogTail { j_c, .. } => format!("log tail on {j_c}"),
            };
            out.push_str(&format!("witness: {kind}\n  {}", witness.description));
        }
        BoundednessDecision::OutOfScope { reason } => {
            out.push_str(&format!("verdict: out of scope\n  {reason}"));
        }
    }
    out
}

pub(crate) fn endpoint_text(decision: &EndpointDecision) -> String {
    match decision {
        EndpointDecision::L1Eligible => "eligible: sup-norm slot maps into L^1".to_string(),
        EndpointDecision::BMOEligible => {
            "eligible: unit-exponent slot maps into bounded mean oscillation".to_string()
        }
        EndpointDecision::NotEligible { reason } => format!("not eligible: {reason}"),
    }
}
