//! JSON problem documents and report serialization shared with the CLI.
//!
//! A problem document is an object `{"n": int, "alpha": [[rational]],
//! "p": [rational-or-"inf"]}`. Rationals travel as `"num/den"` strings so no
//! precision is lost in transit; the `p` entries are the Lebesgue exponents
//! themselves (reciprocals are an internal convention only). An optional
//! `"annotations"` list carries derivation notes on documents emitted by the
//! fold commands; other unrecognised keys are ignored so annotated documents
//! feed back into every reader.
//!
//! Every parse failure names the offending location as a JSON pointer
//! (`/alpha/0/1`, `/p/2`, ...), which the CLI prints verbatim. Rendering is
//! deterministic: fields appear in a fixed order and subsets are always the
//! sorted list of 1-based point indices, so identical inputs produce
//! byte-identical documents and reports.

use serde::Serialize;
use serde_json::Value;

use crate::conditions::{
    BoundednessDecision, ConditionIiiStatus, ConditionReport, EndpointDecision, IiiViolation,
    WitnessKind,
};
use crate::kernel::{
    format_rat, parse_rat, KernelError, KernelSpec, LebesgueProfile, Rat, SubsetMask, SubsetMap,
};
use crate::linsys::{Certificate, CertificateKind, FeasibilityOutcome, FoldOutput, LinSystem};
use crate::setfamily::{FamilyKind, MeasureState, ObjectiveSpec, SetFamilyError};
use num_traits::{One, Signed, Zero};

/// A document failed to parse or validate. `Field` errors carry a JSON
/// pointer to the offending location.
#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum DocError {
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("invalid field at {pointer}: {detail}")]
    Field { pointer: String, detail: String },
}

impl DocError {
    fn at(pointer: impl Into<String>, detail: impl Into<String>) -> Self {
        DocError::Field {
            pointer: pointer.into(),
            detail: detail.into(),
        }
    }

    /// The JSON pointer of a field error; empty for whole-document errors.
    pub fn pointer(&self) -> &str {
        match self {
            DocError::Json(_) => "",
            DocError::Field { pointer, .. } => pointer,
        }
    }
}

/// Parse one Lebesgue-exponent entry — `"inf"` or a rational `>= 1` — into
/// its reciprocal in `[0, 1]`.
pub fn parse_exponent(s: &str) -> Result<Rat, String> {
    let t = s.trim();
    if t == "inf" {
        return Ok(Rat::zero());
    }
    let p = parse_rat(t).map_err(|_| format!("cannot parse {t:?} as a rational or \"inf\""))?;
    if p < Rat::one() {
        return Err(format!(
            "Lebesgue exponent must be \"inf\" or a rational at least 1, got {}",
            format_rat(&p)
        ));
    }
    Ok(p.recip())
}

/// Render a reciprocal Lebesgue exponent back to its document entry.
pub fn render_exponent(r: &Rat) -> String {
    if r.is_zero() {
        "inf".to_string()
    } else {
        format_rat(&r.recip())
    }
}

// ---------------------------------------------------------------------------
// Value-walking helpers
// ---------------------------------------------------------------------------

fn as_object<'v>(
    v: &'v Value,
    ptr: &str,
) -> Result<&'v serde_json::Map<String, Value>, DocError> {
    v.as_object()
        .ok_or_else(|| DocError::at(ptr, "expected a JSON object"))
}

fn as_array<'v>(v: &'v Value, ptr: &str) -> Result<&'v Vec<Value>, DocError> {
    v.as_array()
        .ok_or_else(|| DocError::at(ptr, "expected a JSON array"))
}

fn as_str<'v>(v: &'v Value, ptr: &str) -> Result<&'v str, DocError> {
    v.as_str()
        .ok_or_else(|| DocError::at(ptr, "expected a JSON string"))
}

fn require<'v>(
    obj: &'v serde_json::Map<String, Value>,
    key: &str,
    parent: &str,
) -> Result<&'v Value, DocError> {
    obj.get(key)
        .ok_or_else(|| DocError::at(format!("{parent}/{key}"), "missing required field"))
}

fn rat_field(v: &Value, ptr: &str) -> Result<Rat, DocError> {
    let s = as_str(v, ptr)?;
    parse_rat(s).map_err(|_| DocError::at(ptr, format!("cannot parse {s:?} as a rational")))
}

/// Parse a subset given as a list of 1-based point indices.
fn subset_field(v: &Value, ptr: &str) -> Result<SubsetMask, DocError> {
    let arr = as_array(v, ptr)?;
    let mut mask = SubsetMask::EMPTY;
    for (pos, entry) in arr.iter().enumerate() {
        let eptr = format!("{ptr}/{pos}");
        let idx = entry
            .as_u64()
            .ok_or_else(|| DocError::at(&eptr, "expected a 1-based point index"))?;
        if !(1..=32).contains(&idx) {
            return Err(DocError::at(&eptr, "point index must lie in 1..=32"));
        }
        let next = mask.insert(idx as usize - 1);
        if next == mask {
            return Err(DocError::at(&eptr, format!("duplicate point index {idx}")));
        }
        mask = next;
    }
    Ok(mask)
}

// ---------------------------------------------------------------------------
// Problem documents
// ---------------------------------------------------------------------------

/// A parsed problem document: a kernel, an optional Lebesgue-exponent
/// profile, and any annotations attached by the command that produced it.
#[derive(Clone, Debug)]
pub struct ProblemDoc {
    pub spec: KernelSpec,
    pub profile: Option<LebesgueProfile>,
    pub annotations: Vec<String>,
}

/// Serialized field order of a problem document.
#[derive(Serialize)]
struct DocRepr {
    n: u32,
    alpha: Vec<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    annotations: Vec<String>,
}

/// Map a kernel-construction failure onto the document field that caused it.
fn spec_error_pointer(err: &KernelError) -> String {
    match err {
        KernelError::ZeroDimension => "/n".to_string(),
        KernelError::TooFewPoints(_) | KernelError::TooManyPoints(_) => "/alpha".to_string(),
        KernelError::RaggedMatrix(i, _, _) => format!("/alpha/{i}"),
        KernelError::NonzeroDiagonal(i) => format!("/alpha/{i}/{i}"),
        // The upper triangle is read as authoritative; blame its mirror.
        KernelError::Asymmetric(i, j) => format!("/alpha/{j}/{i}"),
        KernelError::NegativeExponent(i, j) => format!("/alpha/{i}/{j}"),
        _ => String::new(),
    }
}

impl ProblemDoc {
    pub fn new(spec: KernelSpec, profile: Option<LebesgueProfile>) -> Self {
        ProblemDoc {
            spec,
            profile,
            annotations: Vec::new(),
        }
    }

    /// Parse and validate a problem document.
    pub fn from_json(text: &str) -> Result<Self, DocError> {
        let root: Value =
            serde_json::from_str(text).map_err(|e| DocError::Json(e.to_string()))?;
        let obj = as_object(&root, "")?;

        let n_value = require(obj, "n", "")?;
        let n = n_value
            .as_u64()
            .filter(|&n| n <= u32::MAX as u64)
            .ok_or_else(|| DocError::at("/n", "expected a positive integer dimension"))?;

        let alpha_rows = as_array(require(obj, "alpha", "")?, "/alpha")?;
        let mut alpha = Vec::with_capacity(alpha_rows.len());
        for (i, row) in alpha_rows.iter().enumerate() {
            let row_ptr = format!("/alpha/{i}");
            let cells = as_array(row, &row_ptr)?;
            let mut parsed = Vec::with_capacity(cells.len());
            for (j, cell) in cells.iter().enumerate() {
                parsed.push(rat_field(cell, &format!("{row_ptr}/{j}"))?);
            }
            alpha.push(parsed);
        }
        let spec = KernelSpec::new(n as u32, alpha).map_err(|e| DocError::Field {
            pointer: spec_error_pointer(&e),
            detail: e.to_string(),
        })?;

        let profile = match obj.get("p") {
            None | Some(Value::Null) => None,
            Some(v) => {
                let entries = as_array(v, "/p")?;
                if entries.len() != spec.m() {
                    return Err(DocError::at(
                        "/p",
                        format!(
                            "profile has {} entries but the kernel has {} points",
                            entries.len(),
                            spec.m()
                        ),
                    ));
                }
                let mut r = Vec::with_capacity(entries.len());
                for (i, entry) in entries.iter().enumerate() {
                    let ptr = format!("/p/{i}");
                    let s = as_str(entry, &ptr)?;
                    r.push(parse_exponent(s).map_err(|detail| DocError::at(&ptr, detail))?);
                }
                Some(LebesgueProfile::new(r).expect("reciprocals lie in [0,1]"))
            }
        };

        let annotations = match obj.get("annotations") {
            None => Vec::new(),
            Some(v) => {
                let items = as_array(v, "/annotations")?;
                let mut out = Vec::with_capacity(items.len());
                for (i, item) in items.iter().enumerate() {
                    out.push(as_str(item, &format!("/annotations/{i}"))?.to_string());
                }
                out
            }
        };

        Ok(ProblemDoc {
            spec,
            profile,
            annotations,
        })
    }

    /// Deterministic pretty rendering; parses back to an equal document.
    pub fn to_json(&self) -> String {
        let repr = DocRepr {
            n: self.spec.n(),
            alpha: self
                .spec
                .alpha_matrix()
                .iter()
                .map(|row| row.iter().map(format_rat).collect())
                .collect(),
            p: self
                .profile
                .as_ref()
                .map(|p| p.reciprocals().iter().map(render_exponent).collect()),
            annotations: self.annotations.clone(),
        };
        to_pretty(&repr)
    }
}

impl From<&FoldOutput> for ProblemDoc {
    fn from(out: &FoldOutput) -> Self {
        ProblemDoc {
            spec: out.spec.clone(),
            profile: out.profile.clone(),
            annotations: out.annotations.clone(),
        }
    }
}

fn to_pretty<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report types serialize infallibly")
}

// ---------------------------------------------------------------------------
// Condition reports
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct HomogeneityRepr {
    holds: bool,
    lhs: String,
    rhs: String,
}

#[derive(Serialize)]
struct NestedRepr {
    subset: Vec<usize>,
    lhs: String,
    rhs: String,
    holds: bool,
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ViolationRepr {
    Excess { amount: String },
    ComplementMassDeficit { mass: String },
}

#[derive(Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
enum IiiStatusRepr {
    StrictA {
        margin: String,
    },
    EqualityB {
        passes: bool,
        nested_checks: Vec<NestedRepr>,
    },
    Violated {
        reason: ViolationRepr,
    },
}

#[derive(Serialize)]
struct IiiEntryRepr {
    subset: Vec<usize>,
    #[serde(flatten)]
    status: IiiStatusRepr,
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum WitnessKindRepr {
    Dilation,
    PowerCutoff {
        subset: Vec<usize>,
        lambda: Vec<String>,
    },
    LogTail {
        subset: Vec<usize>,
        lambda: Vec<String>,
    },
}

#[derive(Serialize)]
struct WitnessRepr {
    #[serde(flatten)]
    kind: WitnessKindRepr,
    description: String,
}

#[derive(Serialize)]
struct ReportRepr {
    homogeneity: HomogeneityRepr,
    integrability_violations: Vec<Vec<usize>>,
    iii: Vec<IiiEntryRepr>,
    verdict: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    witness: Option<WitnessRepr>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
}

fn rat_strings(values: &[Rat]) -> Vec<String> {
    values.iter().map(format_rat).collect()
}

fn witness_repr(kind: &WitnessKind, description: &str) -> WitnessRepr {
    let kind = match kind {
        WitnessKind::Dilation => WitnessKindRepr::Dilation,
        WitnessKind::PowerCutoff { j0, lambda } => WitnessKindRepr::PowerCutoff {
            subset: j0.one_based(),
            lambda: rat_strings(lambda),
        },
        WitnessKind::LogTail { j_c, lambda } => WitnessKindRepr::LogTail {
            subset: j_c.one_based(),
            lambda: rat_strings(lambda),
        },
    };
    WitnessRepr {
        kind,
        description: description.to_string(),
    }
}

/// The verdict string of a decision, also used for CSV rows and exit codes.
pub fn verdict_str(verdict: &BoundednessDecision) -> &'static str {
    match verdict {
        BoundednessDecision::Bounded => "bounded",
        BoundednessDecision::Unbounded { .. } => "unbounded",
        BoundednessDecision::OutOfScope { .. } => "out_of_scope",
    }
}

/// Render a full condition report: the homogeneity balance, every cluster
/// violating integrability, the branch taken by every proper subset, and the
/// verdict with its witness recipe or out-of-scope reason.
pub fn condition_report_json(report: &ConditionReport) -> String {
    let iii = report
        .iii_results
        .iter()
        .map(|(subset, status)| IiiEntryRepr {
            subset: subset.one_based(),
            status: match status {
                ConditionIiiStatus::StrictA { margin } => IiiStatusRepr::StrictA {
                    margin: format_rat(margin),
                },
                ConditionIiiStatus::EqualityB { nested_checks } => IiiStatusRepr::EqualityB {
                    passes: status.passes(),
                    nested_checks: nested_checks
                        .iter()
                        .map(|c| NestedRepr {
                            subset: c.j.one_based(),
                            lhs: format_rat(&c.lhs),
                            rhs: format_rat(&c.rhs),
                            holds: c.holds,
                        })
                        .collect(),
                },
                ConditionIiiStatus::Violated { reason } => IiiStatusRepr::Violated {
                    reason: match reason {
                        IiiViolation::Excess { amount } => ViolationRepr::Excess {
                            amount: format_rat(amount),
                        },
                        IiiViolation::ComplementMassDeficit { mass } => {
                            ViolationRepr::ComplementMassDeficit {
                                mass: format_rat(mass),
                            }
                        }
                    },
                },
            },
        })
        .collect();

    let (witness, reason) = match &report.verdict {
        BoundednessDecision::Bounded => (None, None),
        BoundednessDecision::Unbounded { witness } => {
            (Some(witness_repr(&witness.kind, &witness.description)), None)
        }
        BoundednessDecision::OutOfScope { reason } => (None, Some(reason.clone())),
    };

    to_pretty(&ReportRepr {
        homogeneity: HomogeneityRepr {
            holds: report.homogeneity.holds,
            lhs: format_rat(&report.homogeneity.lhs),
            rhs: format_rat(&report.homogeneity.rhs),
        },
        integrability_violations: report
            .integrability_violations
            .iter()
            .map(|j| j.one_based())
            .collect(),
        iii,
        verdict: verdict_str(&report.verdict),
        witness,
        reason,
    })
}

#[derive(Serialize)]
struct EndpointRepr {
    eligibility: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
}

/// Render an endpoint eligibility decision.
pub fn endpoint_decision_json(decision: &EndpointDecision) -> String {
    let repr = match decision {
        EndpointDecision::L1Eligible => EndpointRepr {
            eligibility: "l1",
            reason: None,
        },
        EndpointDecision::BMOEligible => EndpointRepr {
            eligibility: "bmo",
            reason: None,
        },
        EndpointDecision::NotEligible { reason } => EndpointRepr {
            eligibility: "not_eligible",
            reason: Some(reason.clone()),
        },
    };
    to_pretty(&repr)
}

// ---------------------------------------------------------------------------
// Linear systems and certificates
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct RowRepr {
    label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    subset: Option<Vec<usize>>,
    coeffs: Vec<String>,
    rel: &'static str,
    rhs: String,
}

#[derive(Serialize)]
struct SystemRepr {
    vars: Vec<String>,
    rows: Vec<RowRepr>,
}

/// Render a linear system for audit: variables by name, one row per
/// constraint with exact coefficients.
pub fn linsystem_json(sys: &LinSystem) -> String {
    to_pretty(&SystemRepr {
        vars: sys.vars.clone(),
        rows: sys
            .rows
            .iter()
            .map(|row| RowRepr {
                label: row.label.clone(),
                subset: row.subset.map(|j| j.one_based()),
                coeffs: rat_strings(&row.coeffs),
                rel: row.rel.symbol(),
                rhs: format_rat(&row.rhs),
            })
            .collect(),
    })
}

#[derive(Serialize)]
struct CertificateRepr {
    kind: &'static str,
    multipliers: Vec<String>,
}

fn certificate_repr(cert: &Certificate) -> CertificateRepr {
    CertificateRepr {
        kind: match cert.kind {
            CertificateKind::MixedStrict => "mixed_strict",
            CertificateKind::NonStrictSubsystem => "non_strict_subsystem",
        },
        multipliers: rat_strings(&cert.multipliers),
    }
}

/// Render an infeasibility certificate's row multipliers.
pub fn certificate_json(cert: &Certificate) -> String {
    to_pretty(&certificate_repr(cert))
}

#[derive(Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
enum FeasibilityRepr {
    Feasible {
        witness: Vec<String>,
        margin: String,
        slacks: Vec<String>,
    },
    Infeasible {
        certificate: CertificateRepr,
    },
}

/// Render a feasibility decision: a satisfying point with its margin and
/// per-row slacks, or the refuting certificate.
pub fn feasibility_json(outcome: &FeasibilityOutcome) -> String {
    let repr = match outcome {
        FeasibilityOutcome::Feasible {
            witness,
            margin,
            slacks,
        } => FeasibilityRepr::Feasible {
            witness: rat_strings(witness),
            margin: format_rat(margin),
            slacks: rat_strings(slacks),
        },
        FeasibilityOutcome::Infeasible { certificate } => FeasibilityRepr::Infeasible {
            certificate: certificate_repr(certificate),
        },
    };
    to_pretty(&repr)
}

// ---------------------------------------------------------------------------
// Merge-process documents
// ---------------------------------------------------------------------------

/// A replayable merge process: an initial weighted state, the steps to apply
/// in order, and an optional objective to track alongside.
#[derive(Clone, Debug)]
pub struct ProcessDoc {
    pub state: MeasureState,
    pub steps: Vec<(SubsetMask, SubsetMask)>,
    pub objective: Option<ObjectiveSpec>,
}

/// Map a state-construction failure onto the document field that caused it.
fn state_error_pointer(err: &SetFamilyError, weights: &[(SubsetMask, Rat)]) -> String {
    let entry_of = |mask: &SubsetMask| {
        weights
            .iter()
            .position(|(j, _)| j == mask)
            .map(|i| format!("/weights/{i}/set"))
            .unwrap_or_else(|| "/weights".to_string())
    };
    match err {
        SetFamilyError::ThetaOutsideGround(_, _) => "/theta".to_string(),
        SetFamilyError::SetOutsideFamily(j) => entry_of(j),
        SetFamilyError::NegativeLambda(_) => "/drive".to_string(),
        _ => String::new(),
    }
}

impl ProcessDoc {
    /// Parse `{"ground": [...], "theta": [...], "family": "...",
    /// "drive": rational, "weights": [{"set": [...], "weight": rational}],
    /// "steps": [{"j1": [...], "j2": [...]}], "objective": {...}?}`.
    pub fn from_json(text: &str) -> Result<Self, DocError> {
        let root: Value =
            serde_json::from_str(text).map_err(|e| DocError::Json(e.to_string()))?;
        let obj = as_object(&root, "")?;

        let ground = subset_field(require(obj, "ground", "")?, "/ground")?;
        let theta = subset_field(require(obj, "theta", "")?, "/theta")?;
        let family = match as_str(require(obj, "family", "")?, "/family")? {
            "fm" => FamilyKind::Fm,
            "fm_bar" => FamilyKind::FmBar,
            "all_nonempty" => FamilyKind::AllNonempty,
            other => {
                return Err(DocError::at(
                    "/family",
                    format!("unknown family {other:?}; expected \"fm\", \"fm_bar\", or \"all_nonempty\""),
                ))
            }
        };
        let drive = rat_field(require(obj, "drive", "")?, "/drive")?;

        let weight_items = as_array(require(obj, "weights", "")?, "/weights")?;
        let mut weights = Vec::with_capacity(weight_items.len());
        for (i, item) in weight_items.iter().enumerate() {
            let ptr = format!("/weights/{i}");
            let entry = as_object(item, &ptr)?;
            let set = subset_field(require(entry, "set", &ptr)?, &format!("{ptr}/set"))?;
            let w = rat_field(require(entry, "weight", &ptr)?, &format!("{ptr}/weight"))?;
            if w.is_negative() {
                return Err(DocError::at(
                    format!("{ptr}/weight"),
                    "weights must be nonnegative",
                ));
            }
            weights.push((set, w));
        }

        let state = MeasureState::new(ground, theta, family, weights.iter().cloned(), drive)
            .map_err(|e| DocError::Field {
                pointer: state_error_pointer(&e, &weights),
                detail: e.to_string(),
            })?;

        let step_items = as_array(require(obj, "steps", "")?, "/steps")?;
        let mut steps = Vec::with_capacity(step_items.len());
        for (i, item) in step_items.iter().enumerate() {
            let ptr = format!("/steps/{i}");
            let entry = as_object(item, &ptr)?;
            let j1 = subset_field(require(entry, "j1", &ptr)?, &format!("{ptr}/j1"))?;
            let j2 = subset_field(require(entry, "j2", &ptr)?, &format!("{ptr}/j2"))?;
            steps.push((j1, j2));
        }

        let objective = match obj.get("objective") {
            None | Some(Value::Null) => None,
            Some(v) => {
                let entry = as_object(v, "/objective")?;
                let c0 = rat_field(require(entry, "c0", "/objective")?, "/objective/c0")?;
                let coeff_items = as_array(
                    require(entry, "coefficients", "/objective")?,
                    "/objective/coefficients",
                )?;
                let mut coefficients: SubsetMap<Rat> = SubsetMap::new();
                for (i, item) in coeff_items.iter().enumerate() {
                    let ptr = format!("/objective/coefficients/{i}");
                    let pair = as_object(item, &ptr)?;
                    let set = subset_field(require(pair, "set", &ptr)?, &format!("{ptr}/set"))?;
                    let c = rat_field(require(pair, "c", &ptr)?, &format!("{ptr}/c"))?;
                    coefficients.insert(set, c);
                }
                Some(ObjectiveSpec::new(c0, coefficients))
            }
        };

        Ok(ProcessDoc {
            state,
            steps,
            objective,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditions::{check_endpoint, decide_boundedness};
    use crate::kernel::{rat, rat_int};
    use crate::linsys::{distribute_and_fold, solve, FoldMode, Relation};
    use crate::setfamily::objective_value;

    fn doc(text: &str) -> Result<ProblemDoc, DocError> {
        ProblemDoc::from_json(text)
    }

    fn pointer_of(err: DocError) -> String {
        err.pointer().to_string()
    }

    #[test]
    fn document_round_trips_exactly() {
        let text = r#"{
            "n": 1,
            "alpha": [["0", "1/2"], ["1/2", "0"]],
            "p": ["4/3", "4/3"],
            "annotations": ["hand-built"]
        }"#;
        let parsed = doc(text).unwrap();
        assert_eq!(parsed.spec.n(), 1);
        assert_eq!(*parsed.spec.alpha(0, 1), rat(1, 2));
        let prof = parsed.profile.as_ref().unwrap();
        assert_eq!(*prof.r(0), rat(3, 4));
        assert_eq!(parsed.annotations, vec!["hand-built".to_string()]);

        let rendered = parsed.to_json();
        let reparsed = doc(&rendered).unwrap();
        assert_eq!(reparsed.spec, parsed.spec);
        assert_eq!(reparsed.profile, parsed.profile);
        assert_eq!(reparsed.annotations, parsed.annotations);
        // Deterministic rendering is the CLI's idempotence contract.
        assert_eq!(reparsed.to_json(), rendered);
    }

    #[test]
    fn infinite_exponent_round_trips_and_unknown_keys_are_ignored() {
        let text = r#"{
            "n": 2,
            "alpha": [["0", "1", "1"], ["1", "0", "1"], ["1", "1", "0"]],
            "p": ["2", "2", "inf"],
            "generator": "someone else's tool"
        }"#;
        let parsed = doc(text).unwrap();
        let prof = parsed.profile.as_ref().unwrap();
        assert!(prof.r(2).is_zero());
        let rendered = parsed.to_json();
        assert!(rendered.contains("\"inf\""));
        assert!(!rendered.contains("generator"));
        assert_eq!(doc(&rendered).unwrap().profile, parsed.profile);
    }

    #[test]
    fn profile_is_optional() {
        let parsed = doc(r#"{"n": 1, "alpha": [["0", "1/3"], ["1/3", "0"]]}"#).unwrap();
        assert!(parsed.profile.is_none());
        let rendered = parsed.to_json();
        assert!(!rendered.contains("\"p\""));
        assert!(doc(&rendered).unwrap().profile.is_none());
    }

    #[test]
    fn malformed_documents_point_at_the_offending_field() {
        let cases: Vec<(&str, &str)> = vec![
            // Whole-document shape.
            (r#"[1, 2]"#, ""),
            // Missing and malformed scalars.
            (r#"{"alpha": [["0"]]}"#, "/n"),
            (r#"{"n": 0, "alpha": [["0", "0"], ["0", "0"]]}"#, "/n"),
            (r#"{"n": 1.5, "alpha": [["0", "0"], ["0", "0"]]}"#, "/n"),
            (r#"{"n": -1, "alpha": [["0", "0"], ["0", "0"]]}"#, "/n"),
            (r#"{"n": 1}"#, "/alpha"),
            (r#"{"n": 1, "alpha": "x"}"#, "/alpha"),
            // Matrix shape and content.
            (r#"{"n": 1, "alpha": [["0"]]}"#, "/alpha"),
            (r#"{"n": 1, "alpha": [["0", "1/2"], ["1/2"]]}"#, "/alpha/1"),
            (
                r#"{"n": 1, "alpha": [["0", "nope"], ["1/2", "0"]]}"#,
                "/alpha/0/1",
            ),
            (
                r#"{"n": 1, "alpha": [["0", "1/0"], ["1/2", "0"]]}"#,
                "/alpha/0/1",
            ),
            (
                r#"{"n": 1, "alpha": [["1", "1/2"], ["1/2", "0"]]}"#,
                "/alpha/0/0",
            ),
            (
                r#"{"n": 1, "alpha": [["0", "1/2"], ["1/3", "0"]]}"#,
                "/alpha/1/0",
            ),
            (
                r#"{"n": 1, "alpha": [["0", "-1/2"], ["-1/2", "0"]]}"#,
                "/alpha/0/1",
            ),
            // Profile entries.
            (
                r#"{"n": 1, "alpha": [["0", "1/2"], ["1/2", "0"]], "p": ["2"]}"#,
                "/p",
            ),
            (
                r#"{"n": 1, "alpha": [["0", "1/2"], ["1/2", "0"]], "p": [2, 2]}"#,
                "/p/0",
            ),
            (
                r#"{"n": 1, "alpha": [["0", "1/2"], ["1/2", "0"]], "p": ["2", "2/3"]}"#,
                "/p/1",
            ),
            (
                r#"{"n": 1, "alpha": [["0", "1/2"], ["1/2", "0"]], "p": ["2", "-2"]}"#,
                "/p/1",
            ),
            (
                r#"{"n": 1, "alpha": [["0", "1/2"], ["1/2", "0"]], "p": ["2", "Inf"]}"#,
                "/p/1",
            ),
        ];
        for (text, want) in cases {
            let err = doc(text).expect_err(text);
            assert_eq!(pointer_of(err), want, "input: {text}");
        }
    }

    #[test]
    fn invalid_json_reports_without_a_pointer() {
        let err = doc("{not json").unwrap_err();
        assert!(matches!(err, DocError::Json(_)));
        assert_eq!(err.pointer(), "");
    }

    #[test]
    fn exponent_entries_convert_both_ways() {
        assert_eq!(parse_exponent("inf").unwrap(), rat_int(0));
        assert_eq!(parse_exponent("4/3").unwrap(), rat(3, 4));
        assert_eq!(parse_exponent(" 2 ").unwrap(), rat(1, 2));
        assert_eq!(parse_exponent("1").unwrap(), rat_int(1));
        assert!(parse_exponent("2/3").is_err());
        assert!(parse_exponent("0").is_err());
        assert!(parse_exponent("-2").is_err());
        assert!(parse_exponent("INF").is_err());

        assert_eq!(render_exponent(&rat_int(0)), "inf");
        assert_eq!(render_exponent(&rat(3, 4)), "4/3");
        assert_eq!(render_exponent(&rat_int(1)), "1");
    }

    #[test]
    fn bounded_report_serializes_every_subset() {
        let spec = KernelSpec::from_pairs(
            1,
            3,
            &[
                ((0, 1), rat(1, 2)),
                ((0, 2), rat(1, 2)),
                ((1, 2), rat(1, 2)),
            ],
        )
        .unwrap();
        let profile = LebesgueProfile::new(vec![rat(1, 2), rat(1, 2), rat(1, 2)]).unwrap();
        let report = decide_boundedness(&spec, &profile).unwrap();
        let rendered = condition_report_json(&report);
        assert_eq!(rendered, condition_report_json(&report));

        let v: Value = serde_json::from_str(&rendered).unwrap();
        assert_eq!(v["verdict"], "bounded");
        assert_eq!(v["homogeneity"]["holds"], true);
        assert_eq!(v["homogeneity"]["lhs"], "3");
        assert_eq!(v["integrability_violations"].as_array().unwrap().len(), 0);
        let iii = v["iii"].as_array().unwrap();
        assert_eq!(iii.len(), 6);
        assert_eq!(iii[0]["subset"], serde_json::json!([1]));
        assert!(iii.iter().all(|e| e["status"] == "strict_a"));
        assert!(v.get("witness").is_none());
    }

    #[test]
    fn unbounded_report_carries_the_witness_recipe() {
        let spec = KernelSpec::from_pairs(1, 2, &[((0, 1), rat_int(1))]).unwrap();
        let profile = LebesgueProfile::new(vec![rat(1, 2), rat(1, 2)]).unwrap();
        let report = decide_boundedness(&spec, &profile).unwrap();
        let v: Value = serde_json::from_str(&condition_report_json(&report)).unwrap();
        assert_eq!(v["verdict"], "unbounded");
        assert_eq!(v["witness"]["kind"], "power_cutoff");
        assert_eq!(v["witness"]["subset"], serde_json::json!([1, 2]));
        assert_eq!(v["witness"]["lambda"].as_array().unwrap().len(), 2);
        assert!(v["witness"]["description"].as_str().unwrap().len() > 0);
        assert_eq!(
            v["integrability_violations"],
            serde_json::json!([[1, 2]])
        );
    }

    #[test]
    fn out_of_scope_report_names_the_reason() {
        let spec = KernelSpec::from_pairs(1, 2, &[((0, 1), rat(1, 2))]).unwrap();
        let profile = LebesgueProfile::new(vec![rat_int(1), rat(1, 2)]).unwrap();
        let report = decide_boundedness(&spec, &profile).unwrap();
        let v: Value = serde_json::from_str(&condition_report_json(&report)).unwrap();
        assert_eq!(v["verdict"], "out_of_scope");
        assert!(v["reason"].as_str().unwrap().len() > 0);
        assert!(v.get("witness").is_none());
    }

    #[test]
    fn endpoint_decisions_serialize() {
        let spec = KernelSpec::from_pairs(1, 3, &[((0, 2), rat(3, 4)), ((1, 2), rat(3, 4))])
            .unwrap();
        let profile = LebesgueProfile::new(vec![rat(3, 4), rat(3, 4), rat_int(0)]).unwrap();
        let decision = check_endpoint(&spec, &profile).unwrap();
        let v: Value = serde_json::from_str(&endpoint_decision_json(&decision)).unwrap();
        assert_eq!(v["eligibility"], "l1");
        assert!(v.get("reason").is_none());
    }

    #[test]
    fn systems_and_outcomes_serialize_with_exact_entries() {
        let mut sys = LinSystem::new(vec!["d_12".into(), "d_13".into()]);
        sys.push(
            "balance",
            None,
            vec![rat_int(1), rat_int(1)],
            Relation::Eq,
            rat(1, 2),
        );
        sys.push(
            "cap {1,2}",
            Some(SubsetMask::from_one_based(&[1, 2])),
            vec![rat_int(1), rat_int(0)],
            Relation::Lt,
            rat(1, 3),
        );
        let v: Value = serde_json::from_str(&linsystem_json(&sys)).unwrap();
        assert_eq!(v["vars"], serde_json::json!(["d_12", "d_13"]));
        assert_eq!(v["rows"][0]["rel"], "=");
        assert_eq!(v["rows"][0]["rhs"], "1/2");
        assert!(v["rows"][0].get("subset").is_none());
        assert_eq!(v["rows"][1]["subset"], serde_json::json!([1, 2]));
        assert_eq!(v["rows"][1]["rel"], "<");

        let outcome = solve(&sys).unwrap();
        let fv: Value = serde_json::from_str(&feasibility_json(&outcome)).unwrap();
        assert_eq!(fv["outcome"], "feasible");
        assert_eq!(fv["witness"].as_array().unwrap().len(), 2);

        // An inconsistent pair of rows produces a certificate.
        let mut bad = LinSystem::new(vec!["x".into()]);
        bad.push("up", None, vec![rat_int(1)], Relation::Le, rat_int(0));
        bad.push("down", None, vec![rat_int(-1)], Relation::Lt, rat_int(-1));
        let outcome = solve(&bad).unwrap();
        let fv: Value = serde_json::from_str(&feasibility_json(&outcome)).unwrap();
        assert_eq!(fv["outcome"], "infeasible");
        let kind = fv["certificate"]["kind"].as_str().unwrap();
        assert!(kind == "mixed_strict" || kind == "non_strict_subsystem");
        assert_eq!(
            fv["certificate"]["multipliers"].as_array().unwrap().len(),
            2
        );
    }

    #[test]
    fn fold_outputs_become_checkable_documents() {
        let spec = KernelSpec::from_pairs(1, 3, &[((0, 2), rat(3, 4)), ((1, 2), rat(3, 4))])
            .unwrap();
        let profile = LebesgueProfile::new(vec![rat(3, 4), rat(3, 4), rat_int(0)]).unwrap();
        let outs = distribute_and_fold(&spec, Some(&profile), FoldMode::LInfty).unwrap();
        assert_eq!(outs.len(), 1);
        let rendered = ProblemDoc::from(&outs[0]).to_json();
        let parsed = doc(&rendered).unwrap();
        assert_eq!(parsed.spec, outs[0].spec);
        assert_eq!(parsed.profile, outs[0].profile);
        assert!(!parsed.annotations.is_empty());
        // The reduced problem is itself decidable — the round trip a fold
        // command's outputs must survive.
        let report =
            decide_boundedness(&parsed.spec, parsed.profile.as_ref().unwrap()).unwrap();
        assert!(report.is_bounded());
    }

    #[test]
    fn process_documents_replay() {
        let text = r#"{
            "ground": [1, 2, 3],
            "theta": [1, 2, 3],
            "family": "fm",
            "drive": "1",
            "weights": [
                {"set": [1, 2], "weight": "1"},
                {"set": [1, 3], "weight": "1"},
                {"set": [2, 3], "weight": "1"}
            ],
            "steps": [{"j1": [1, 2], "j2": [2, 3]}],
            "objective": {
                "c0": "1",
                "coefficients": [
                    {"set": [1, 2], "c": "1"},
                    {"set": [1, 3], "c": "1"},
                    {"set": [2, 3], "c": "1"},
                    {"set": [1, 2, 3], "c": "1"}
                ]
            }
        }"#;
        let parsed = ProcessDoc::from_json(text).unwrap();
        assert_eq!(parsed.steps.len(), 1);
        assert!(parsed.state.omega().is_zero());
        let (j1, j2) = parsed.steps[0];
        let next = parsed.state.merge_step(j1, j2).unwrap();
        assert_eq!(next.omega(), rat_int(1));
        let obj = parsed.objective.unwrap();
        assert!(objective_value(&parsed.state, &obj).is_ok());
    }

    #[test]
    fn process_documents_point_at_bad_fields() {
        let base = |weights: &str, theta: &str, drive: &str| {
            format!(
                r#"{{"ground": [1, 2, 3], "theta": {theta}, "family": "fm",
                    "drive": {drive}, "weights": {weights}, "steps": []}}"#
            )
        };
        let cases = vec![
            (base(r#"[{"set": [1, 2], "weight": "-1"}]"#, "[1, 2, 3]", "\"0\""), "/weights/0/weight"),
            (base(r#"[{"set": [1], "weight": "1"}]"#, "[1, 2, 3]", "\"0\""), "/weights/0/set"),
            (base(r#"[]"#, "[1, 2, 3, 4]", "\"0\""), "/theta"),
            (base(r#"[{"set": [1, 2], "weight": "1"}]"#, "[1, 2, 3]", "\"1/0\""), "/drive"),
            // Positive drive with no pair mass makes a pair excess negative.
            (base(r#"[]"#, "[1, 2, 3]", "\"1\""), "/drive"),
            (base(r#"[{"set": [0, 2], "weight": "1"}]"#, "[1, 2, 3]", "\"0\""), "/weights/0/set/0"),
            (base(r#"[{"set": [2, 2], "weight": "1"}]"#, "[1, 2, 3]", "\"0\""), "/weights/0/set/1"),
        ];
        for (text, want) in cases {
            let err = ProcessDoc::from_json(&text).expect_err(&text);
            assert_eq!(pointer_of(err), want, "input: {text}");
        }
        let missing_family = r#"{"ground": [1], "theta": [1], "drive": "0",
            "weights": [], "steps": []}"#;
        assert_eq!(
            pointer_of(ProcessDoc::from_json(missing_family).unwrap_err()),
            "/family"
        );
    }
}
