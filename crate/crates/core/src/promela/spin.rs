//! Cross-checking internal verdicts against an external SPIN.
//!
//! One call writes `model.pml` into the caller's scratch directory and runs
//! `spin -run` there, which generates, compiles and executes the verifier.
//! Invariants and LTL properties run with `-a -N <claim>`; a design without a
//! property runs in safety mode, where invalid end states are deadlocks.

use std::io;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::Serialize;
use thiserror::Error;

use super::{emit_promela, EmitOptions, PromelaError};
use crate::explorer::{check_design, check_property, CheckConfig, ExploreError, Status};
use crate::scl::design::Design;

pub const SPIN_ENV: &str = "SCVER_SPIN";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpinOutcome {
    Pass,
    Violation,
}

#[derive(Clone, Debug, Serialize)]
pub struct CrosscheckReport {
    pub property: Option<String>,
    pub internal: Status,
    pub spin: SpinOutcome,
    pub agree: bool,
    pub internal_output: serde_json::Value,
    pub spin_output: String,
}

#[derive(Debug, Error)]
pub enum CrosscheckError {
    #[error(transparent)]
    Emit(#[from] PromelaError),
    #[error(transparent)]
    Explore(#[from] ExploreError),
    #[error("SPIN executable `{0}` not found")]
    SpinNotFound(PathBuf),
    #[error("SPIN exited with {code:?}:\n{output}")]
    SpinFailed { code: Option<i32>, output: String },
    #[error("SPIN output has no error count:\n{0}")]
    Unparsed(String),
    #[error("scratch directory: {0}")]
    Io(#[from] io::Error),
}

/// SPIN path from `SCVER_SPIN`, if set and non-empty.
pub fn spin_from_env() -> Option<PathBuf> {
    std::env::var_os(SPIN_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

/// Reads `errors: N` from verifier output.
fn parse_errors(out: &str) -> Option<u64> {
    out.lines().find_map(|l| {
        let pos = l.find("errors:")?;
        l[pos + "errors:".len()..].split_whitespace().next()?.parse().ok()
    })
}

pub fn spin_crosscheck(
    d: &Design,
    property: Option<&str>,
    spin: &Path,
    scratch: &Path,
    cfg: &CheckConfig,
) -> Result<CrosscheckReport, CrosscheckError> {
    let opts = EmitOptions { kernel: cfg.kernel.clone(), env: cfg.env };
    let names: Vec<&str> = property.into_iter().collect();
    let pml = emit_promela(d, Some(&names), &opts)?;
    // claim mode disables SPIN's end-state check, so compare without deadlock
    let (verdict, cfg_used) = match property {
        Some(p) => {
            let c = CheckConfig { check_deadlock: false, ..cfg.clone() };
            (check_property(d, p, &c)?, c)
        }
        None => (check_design(d, cfg)?, cfg.clone()),
    };
    std::fs::create_dir_all(scratch)?;
    std::fs::write(scratch.join("model.pml"), &pml)?;
    let mut cmd = Command::new(spin);
    cmd.current_dir(scratch).arg("-run").arg("-DNOREDUCE");
    if let Some(p) = property {
        let claim = pml
            .lines()
            .filter_map(|l| l.strip_prefix("ltl "))
            .filter_map(|l| l.split_whitespace().next())
            .next()
            .unwrap_or(p)
            .to_string();
        cmd.arg("-a").arg("-N").arg(claim);
    }
    cmd.arg("model.pml");
    let out = match cmd.output() {
        Ok(o) => o,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(CrosscheckError::SpinNotFound(spin.to_path_buf())),
        Err(e) if e.kind() == io::ErrorKind::PermissionDenied => {
            return Err(CrosscheckError::SpinNotFound(spin.to_path_buf()))
        }
        Err(e) => return Err(e.into()),
    };
    let text = format!("{}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr));
    if !out.status.success() {
        return Err(CrosscheckError::SpinFailed { code: out.status.code(), output: text });
    }
    let errors = parse_errors(&text).ok_or_else(|| CrosscheckError::Unparsed(text.clone()))?;
    let spin_outcome = if errors == 0 { SpinOutcome::Pass } else { SpinOutcome::Violation };
    // bounded passes count as passes: both tools verify the same horizon
    let agree = verdict.status.is_violation() == (spin_outcome == SpinOutcome::Violation);
    Ok(CrosscheckReport {
        property: property.map(str::to_string),
        internal: verdict.status,
        spin: spin_outcome,
        agree,
        internal_output: verdict.to_json(d, &cfg_used),
        spin_output: text,
    })
}
