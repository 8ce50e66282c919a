//! Replay a merge-process document: apply the listed pair merges to the
//! initial coupling measure and print the concentration trace, optionally
//! followed by a greedy continuation.

use mfi_core::{
    format_rat, greedy_maximize_omega, objective_value, GreedyOutcome, MeasureState,
    SetFamilyError, SubsetMask,
};

use crate::input;
use crate::render::csv_line;
use crate::{CliError, Format, SpecArg};

struct TraceRow {
    step: usize,
    j1: Option<SubsetMask>,
    j2: Option<SubsetMask>,
    omega: String,
    lambda_min: Option<String>,
    objective: Option<String>,
}

fn trace_row(
    step: usize,
    merged: Option<(SubsetMask, SubsetMask)>,
    state: &MeasureState,
    objective: Option<&mfi_core::ObjectiveSpec>,
) -> Result<TraceRow, CliError> {
    let obj = match objective {
        Some(obj) => Some(match objective_value(state, obj) {
            Ok(v) => format_rat(&v),
            Err(SetFamilyError::MissingCoefficient(j)) => {
                return Err(CliError::input(
                    "/objective/coefficients",
                    format!("no coefficient for support set {j}"),
                ))
            }
            Err(e) => return Err(CliError::Failure(e.to_string())),
        }),
        None => None,
    };
    Ok(TraceRow {
        step,
        j1: merged.map(|(a, _)| a),
        j2: merged.map(|(_, b)| b),
        omega: format_rat(&state.omega()),
        lambda_min: state.min_lambda().map(|l| format_rat(&l)),
        objective: obj,
    })
}

fn mask_str(mask: Option<SubsetMask>) -> String {
    mask.map(|m| m.to_string()).unwrap_or_default()
}

pub(crate) fn run(
    spec_arg: &SpecArg,
    max_steps: Option<usize>,
    format: Format,
) -> Result<u8, CliError> {
    let doc = input::load_process_document(&spec_arg.spec)?;
    let mut state = doc.state.clone();
    let mut trace = vec![trace_row(0, None, &state, doc.objective.as_ref())?];
    for (i, &(j1, j2)) in doc.steps.iter().enumerate() {
        state = state
            .merge_step(j1, j2)
            .map_err(|e| CliError::Failure(format!("step {}: {e}", i + 1)))?;
        trace.push(trace_row(
            i + 1,
            Some((j1, j2)),
            &state,
            doc.objective.as_ref(),
        )?);
    }
    let greedy: Option<GreedyOutcome> = match max_steps {
        Some(cap) => Some(
            greedy_maximize_omega(&state, cap)
                .map_err(|e| CliError::Failure(format!("greedy continuation: {e}")))?,
        ),
        None => None,
    };

    let out = match format {
        Format::Csv => {
            let mut out = String::from("step,j1,j2,omega,lambda_min,objective");
            for row in &trace {
                out.push('\n');
                out.push_str(&csv_line(&[
                    row.step.to_string(),
                    mask_str(row.j1),
                    mask_str(row.j2),
                    row.omega.clone(),
                    row.lambda_min.clone().unwrap_or_default(),
                    row.objective.clone().unwrap_or_default(),
                ]));
            }
            if let Some(g) = &greedy {
                out.push('\n');
                out.push_str(&csv_line(&[
                    "greedy".to_string(),
                    g.steps_taken.to_string(),
                    if g.reached_stable { "stable" } else { "capped" }.to_string(),
                    format_rat(&g.omega_value),
                    g.final_state
                        .min_lambda()
                        .map(|l| format_rat(&l))
                        .unwrap_or_default(),
                    format_rat(&g.ceiling),
                ]));
            }
            out
        }
        Format::Json => {
            let rows: Vec<serde_json::Value> = trace
                .iter()
                .map(|row| {
                    serde_json::json!({
                        "step": row.step,
                        "j1": row.j1.map(|m| m.one_based()),
                        "j2": row.j2.map(|m| m.one_based()),
                        "omega": row.omega,
                        "lambda_min": row.lambda_min,
                        "objective": row.objective,
                    })
                })
                .collect();
            let mut body = serde_json::Map::new();
            body.insert("trace".into(), serde_json::Value::Array(rows));
            if let Some(g) = &greedy {
                body.insert(
                    "greedy".into(),
                    serde_json::json!({
                        "omega": format_rat(&g.omega_value),
                        "ceiling": format_rat(&g.ceiling),
                        "reached_stable": g.reached_stable,
                        "steps_taken": g.steps_taken,
                    }),
                );
            }
            serde_json::to_string_pretty(&serde_json::Value::Object(body)).expect("serializable")
        }
        Format::Text => {
            let mut lines = vec![format!(
                "{:>5}  {:<12} {:<12} {:<12} {:<12} {}",
                "step", "j1", "j2", "omega", "lambda_min", "objective"
            )];
            for row in &trace {
                lines.push(format!(
                    "{:>5}  {:<12} {:<12} {:<12} {:<12} {}",
                    row.step,
                    mask_str(row.j1),
                    mask_str(row.j2),
                    row.omega,
                    row.lambda_min.clone().unwrap_or_default(),
                    row.objective.clone().unwrap_or_default(),
                ));
            }
            if let Some(g) = &greedy {
                lines.push(format!(
                    "greedy continuation: omega {} after {} step(s), ceiling {}, {}",
                    format_rat(&g.omega_value),
                    g.steps_taken,
                    format_rat(&g.ceiling),
                    if g.reached_stable {
                        "reached a stable family"
                    } else {
                        "stopped at the step cap"
                    },
                ));
            }
            lines.join("\n")
        }
    };
    println!("{out}");
    Ok(0)
}
