//! Eliminate the last coordinate of a problem document, writing one reduced
//! document per branch of the distribution.

use std::path::PathBuf;

use mfi_core::{
    build_system, distribute_and_fold, linsystem_json, FoldMode, ProblemDoc, SystemKind,
};

use crate::input;
use crate::{CliError, FoldModeArg, Format, ProfileArg, SpecArg};

pub(crate) fn run(
    spec_arg: &SpecArg,
    profile_arg: &ProfileArg,
    mode: FoldModeArg,
    out_dir: Option<PathBuf>,
    dump_system: bool,
    format: Format,
) -> Result<u8, CliError> {
    let doc = input::load_document(&spec_arg.spec)?;
    let (fold_mode, system_kind) = match mode {
        FoldModeArg::Integrability => (FoldMode::Integrability, SystemKind::PairRedistribution),
        FoldModeArg::SupNorm => (FoldMode::LInfty, SystemKind::ProfilePairRedistribution),
        FoldModeArg::WeakPower => (FoldMode::WeakPower, SystemKind::WeakPairSingles),
    };
    let profile = match fold_mode {
        FoldMode::Integrability => None,
        FoldMode::LInfty | FoldMode::WeakPower => {
            Some(input::require_profile(&doc, profile_arg)?)
        }
    };
    let outputs = distribute_and_fold(&doc.spec, profile.as_ref(), fold_mode)?;

    let dir = match &out_dir {
        Some(dir) => dir.clone(),
        None => spec_arg
            .spec
            .parent()
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(".")),
    };
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::Failure(format!("cannot create {}: {e}", dir.display())))?;
    let stem = spec_arg
        .spec
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("problem");

    let mut written: Vec<(PathBuf, &mfi_core::FoldOutput)> = Vec::new();
    for (i, out) in outputs.iter().enumerate() {
        let path = dir.join(format!("{stem}.reduced-{:02}.json", i + 1));
        let body = ProblemDoc::from(out).to_json();
        std::fs::write(&path, body + "\n")
            .map_err(|e| CliError::Failure(format!("cannot write {}: {e}", path.display())))?;
        written.push((path, out));
    }

    let system = if dump_system {
        Some(build_system(system_kind, &doc.spec, profile.as_ref())?)
    } else {
        None
    };

    let out = match format {
        Format::Json => {
            let files: Vec<serde_json::Value> = written
                .iter()
                .map(|(path, out)| {
                    serde_json::json!({
                        "path": path.display().to_string(),
                        "m": out.spec.m(),
                        "annotations": out.annotations,
                    })
                })
                .collect();
            let mut body = serde_json::Map::new();
            body.insert("mode".into(), serde_json::json!(fold_mode.to_string()));
            body.insert("outputs".into(), serde_json::Value::Array(files));
            if let Some(sys) = &system {
                let sys_value: serde_json::Value =
                    serde_json::from_str(&linsystem_json(sys)).expect("valid JSON");
                body.insert("system".into(), sys_value);
            }
            serde_json::to_string_pretty(&serde_json::Value::Object(body)).expect("serializable")
        }
        Format::Text | Format::Csv => {
            let mut lines = Vec::new();
            if let Some(sys) = &system {
                lines.push(sys.render());
            }
            for (path, out) in &written {
                lines.push(format!(
                    "wrote {} ({} points)",
                    path.display(),
                    out.spec.m()
                ));
            }
            lines.join("\n")
        }
    };
    println!("{out}");
    Ok(0)
}
