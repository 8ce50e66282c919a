//! Parameter sweeps: re-decide boundedness along a rational grid through one
//! kernel exponent or one Lebesgue exponent.

use mfi_core::{
    decide_boundedness, format_rat, parse_rat, rat_int, KernelSpec, LebesgueProfile, Rat,
    verdict_str,
};
use num_traits::{Signed, Zero};

use crate::input;
use crate::render::{csv_line, first_violation};
use crate::{CliError, Format, ProfileArg, SpecArg};

/// Which scalar the grid addresses (0-based indices).
#[derive(Copy, Clone)]
enum GridTarget {
    Alpha(usize, usize),
    R(usize),
}

struct Grid {
    target: GridTarget,
    values: Vec<Rat>,
}

/// Parse `"alpha[i][j],start,stop,steps"` or `"r[i],start,stop,steps"`.
fn parse_grid(text: &str, m: usize) -> Result<Grid, CliError> {
    let bad = |detail: String| CliError::input("--grid", detail);
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 4 {
        return Err(bad(format!(
            "expected \"parameter,start,stop,steps\", got {} fields",
            parts.len()
        )));
    }

    let index = |s: &str| -> Result<usize, CliError> {
        let i: usize = s
            .trim()
            .parse()
            .map_err(|_| bad(format!("cannot parse index {s:?}")))?;
        if !(1..=m).contains(&i) {
            return Err(bad(format!("index {i} outside 1..={m}")));
        }
        Ok(i - 1)
    };

    let target_text = parts[0].trim();
    let target = if let Some(rest) = target_text
        .strip_prefix("alpha[")
        .and_then(|r| r.strip_suffix(']'))
    {
        let (i_s, j_s) = rest
            .split_once("][")
            .ok_or_else(|| bad(format!("cannot parse parameter {target_text:?}")))?;
        let (i, j) = (index(i_s)?, index(j_s)?);
        if i == j {
            return Err(bad("the diagonal is structurally zero".to_string()));
        }
        GridTarget::Alpha(i.min(j), i.max(j))
    } else if let Some(rest) = target_text
        .strip_prefix("r[")
        .and_then(|r| r.strip_suffix(']'))
    {
        GridTarget::R(index(rest)?)
    } else {
        return Err(bad(format!(
            "parameter {target_text:?} is not sweepable; use alpha[i][j] or r[i]"
        )));
    };

    let start = parse_rat(parts[1]).map_err(|e| bad(e.to_string()))?;
    let stop = parse_rat(parts[2]).map_err(|e| bad(e.to_string()))?;
    let steps: usize = parts[3]
        .trim()
        .parse()
        .map_err(|_| bad(format!("cannot parse step count {:?}", parts[3])))?;
    if steps == 0 {
        return Err(bad("need at least one step".to_string()));
    }
    for bound in [&start, &stop] {
        match target {
            GridTarget::Alpha(_, _) if bound.is_negative() => {
                return Err(bad("kernel exponents must be nonnegative".to_string()))
            }
            GridTarget::R(_) if bound.is_negative() || *bound > rat_int(1) => {
                return Err(bad(
                    "reciprocal Lebesgue exponents must lie in [0,1]".to_string()
                ))
            }
            _ => {}
        }
    }

    let span = &stop - &start;
    let den = rat_int(steps as i64);
    let values = (0..=steps)
        .map(|k| &start + &span * rat_int(k as i64) / &den)
        .collect();
    Ok(Grid { target, values })
}

struct ScanRow {
    value: String,
    verdict: &'static str,
    violation: String,
}

/// Build the instance at one grid point, re-balancing the untouched
/// exponents to preserve the homogeneity balance when asked. A re-balance
/// pushing some reciprocal outside `[0,1]` leaves no instance to decide and
/// reports as out of scope.
fn instance_at(
    spec: &KernelSpec,
    profile: &LebesgueProfile,
    target: GridTarget,
    value: &Rat,
    rebalance: bool,
) -> Result<Option<(KernelSpec, LebesgueProfile)>, CliError> {
    let m = spec.m();
    let n = spec.n_rat();
    let mut alpha = spec.alpha_matrix().clone();
    let mut r: Vec<Rat> = profile.reciprocals().to_vec();
    match target {
        GridTarget::Alpha(i, j) => {
            let delta = value - &alpha[i][j];
            alpha[i][j] = value.clone();
            alpha[j][i] = value.clone();
            if rebalance && !delta.is_zero() {
                // Spread the homogeneity correction evenly over all points.
                let adjust = delta / (&n * rat_int(m as i64));
                for entry in &mut r {
                    *entry -= &adjust;
                }
            }
        }
        GridTarget::R(i) => {
            let delta = value - &r[i];
            r[i] = value.clone();
            if rebalance && !delta.is_zero() {
                let adjust = delta / rat_int(m as i64 - 1);
                for (u, entry) in r.iter_mut().enumerate() {
                    if u != i {
                        *entry -= &adjust;
                    }
                }
            }
        }
    }
    let spec = KernelSpec::new(spec.n(), alpha).map_err(CliError::from)?;
    match LebesgueProfile::new(r) {
        Ok(profile) => Ok(Some((spec, profile))),
        Err(_) => Ok(None),
    }
}

pub(crate) fn run(
    spec_arg: &SpecArg,
    profile_arg: &ProfileArg,
    grid_text: &str,
    rebalance: bool,
    format: Format,
) -> Result<u8, CliError> {
    let doc = input::load_document(&spec_arg.spec)?;
    let profile = input::require_profile(&doc, profile_arg)?;
    let grid = parse_grid(grid_text, doc.spec.m())?;

    let mut rows = Vec::with_capacity(grid.values.len());
    for value in &grid.values {
        let row = match instance_at(&doc.spec, &profile, grid.target, value, rebalance)? {
            Some((spec, prof)) => {
                let report = decide_boundedness(&spec, &prof)?;
                ScanRow {
                    value: format_rat(value),
                    verdict: verdict_str(&report.verdict),
                    violation: first_violation(&report),
                }
            }
            None => ScanRow {
                value: format_rat(value),
                verdict: "out_of_scope",
                violation: "scope".to_string(),
            },
        };
        rows.push(row);
    }

    let out = match format {
        Format::Csv => {
            let mut out = String::from("value,verdict,first_violation");
            for row in &rows {
                out.push('\n');
                out.push_str(&csv_line(&[
                    row.value.clone(),
                    row.verdict.to_string(),
                    row.violation.clone(),
                ]));
            }
            out
        }
        Format::Json => {
            let items: Vec<serde_json::Value> = rows
                .iter()
                .map(|row| {
                    serde_json::json!({
                        "value": row.value,
                        "verdict": row.verdict,
                        "first_violation": row.violation,
                    })
                })
                .collect();
            serde_json::to_string_pretty(&items).expect("serializable")
        }
        Format::Text => rows
            .iter()
            .map(|row| {
                if row.violation.is_empty() {
                    format!("{:<12} {}", row.value, row.verdict)
                } else {
                    format!("{:<12} {} ({})", row.value, row.verdict, row.violation)
                }
            })
            .collect::<Vec<_>>()
            .join("\n"),
    };
    println!("{out}");
    Ok(0)
}
