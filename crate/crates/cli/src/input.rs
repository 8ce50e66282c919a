//! Input loading: problem documents from disk and profile overrides from the
//! command line.

use std::path::Path;

use mfi_core::{parse_exponent, LebesgueProfile, ProblemDoc, ProcessDoc};

use crate::{CliError, ProfileArg};

pub(crate) fn load_document(path: &Path) -> Result<ProblemDoc, CliError> {
    ProblemDoc::from_json(&read(path)?).map_err(CliError::from)
}

pub(crate) fn load_process_document(path: &Path) -> Result<ProcessDoc, CliError> {
    ProcessDoc::from_json(&read(path)?).map_err(CliError::from)
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::input(path.display().to_string(), format!("cannot read file: {e}")))
}

/// Parse a `--profile` list ("4/3,2,inf") into a profile of `m` exponents.
fn parse_profile_list(list: &str, m: usize) -> Result<LebesgueProfile, CliError> {
    let parts: Vec<&str> = list.split(',').collect();
    if parts.len() != m {
        return Err(CliError::input(
            "--profile",
            format!("{} entries for a kernel with {m} points", parts.len()),
        ));
    }
    let mut r = Vec::with_capacity(parts.len());
    for (i, part) in parts.iter().enumerate() {
        r.push(
            parse_exponent(part).map_err(|detail| CliError::input(format!("--profile/{i}"), detail))?,
        );
    }
    Ok(LebesgueProfile::new(r).expect("reciprocals lie in [0,1]"))
}

/// The profile in effect: `--profile` wins over the document's `p`.
pub(crate) fn effective_profile(
    doc: &ProblemDoc,
    arg: &ProfileArg,
) -> Result<Option<LebesgueProfile>, CliError> {
    match &arg.profile {
        Some(list) => parse_profile_list(list, doc.spec.m()).map(Some),
        None => Ok(doc.profile.clone()),
    }
}

/// Like [`effective_profile`], but a missing profile is an input error.
pub(crate) fn require_profile(
    doc: &ProblemDoc,
    arg: &ProfileArg,
) -> Result<LebesgueProfile, CliError> {
    effective_profile(doc, arg)?.ok_or_else(|| {
        CliError::input(
            "/p",
            "this command needs Lebesgue exponents: add \"p\" to the document or pass --profile",
        )
    })
}
