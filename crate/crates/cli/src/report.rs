//! Collects the tables of a run directory into `report/`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::CliError;
use crate::manifest::{self, MANIFEST};

pub const REPORT_DIR: &str = "report";

/// (source file, report file, column documentation)
const TABLES: &[(&str, &str, &str)] = &[
    (
        "mu_curve.csv",
        "mu_curve.csv",
        "M mass; energy H(v_M); chem_potential μ; l4fourth ‖v_M‖₄⁴; residual of the stationary equation; iterations of the flow",
    ),
    ("k_scan.csv", "k_scan.csv", "M mass; K pump/damp balance of v_M"),
    (
        "spectrum.csv",
        "spectrum.csv",
        "index; lminus, lplus: ascending lowest eigenvalues of L₋ and L₊ at the balanced state",
    ),
    (
        "scaling.csv",
        "scaling.csv",
        "eps; kappa_abs |κ|; psi_r_sigma, psi_i_sigma Σ-norms of the corrections; residual of the approximate wave; \
         final_residual of the converged wave; iterations; contraction_ratio. The last row holds fitted log-log slopes \
         of the first four columns",
    ),
    (
        "trajectory.csv",
        "trajectory.csv",
        "t; M mass; H Hamiltonian; K balance; l4fourth ‖ψ‖₄⁴; l4_integral running time integral of l4fourth; \
         mass_bound M(0)e^{εt‖σ‖∞}; dH_stated rate integrand without ∇σ; dH_grad_sigma the ∇σ term",
    ),
    (
        "evolve.json",
        "laws.csv",
        "quantity; value. Relative errors of the mass and Hamiltonian laws, the global bounds and, for solitary data, \
         the stationarity measurements",
    ),
];

#[derive(Debug, Clone, Serialize)]
pub struct ReportIndex {
    pub tables: Vec<TableEntry>,
    pub missing: Vec<String>,
    pub partial: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TableEntry {
    pub file: String,
    pub source: String,
    pub columns: String,
}

fn flatten(prefix: &str, v: &Value, out: &mut String) {
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, x, out);
            }
        }
        Value::Number(n) => {
            writeln!(out, "{prefix},{n}").unwrap();
        }
        _ => {}
    }
}

fn laws_table(evolve: &Value) -> String {
    let mut out = String::from("quantity,value\n");
    for part in ["laws", "bounds", "stationarity", "convergence"] {
        if let Some(v) = evolve.get(part) {
            flatten(part, v, &mut out);
        }
    }
    out
}

/// Writes every table the run has produced; absent inputs are listed in
/// `report/index.json` and flagged as a partial report.
pub fn emit_report(dir: &Path) -> Result<ReportIndex, CliError> {
    if !dir.is_dir() {
        return Err(CliError::Usage(format!("run directory {} does not exist", dir.display())));
    }
    let out = dir.join(REPORT_DIR);
    fs::create_dir_all(&out)?;
    let mut tables = Vec::new();
    let mut missing = Vec::new();
    if manifest::read(dir)?.is_none() {
        missing.push(MANIFEST.to_string());
    }
    for &(src, dst, columns) in TABLES {
        let path = dir.join(src);
        if !path.exists() {
            missing.push(src.to_string());
            continue;
        }
        let text = fs::read_to_string(&path)?;
        let body = if src.ends_with(".json") { laws_table(&serde_json::from_str(&text)?) } else { text };
        fs::write(out.join(dst), body)?;
        tables.push(TableEntry {
            file: format!("{REPORT_DIR}/{dst}"),
            source: src.to_string(),
            columns: columns.to_string(),
        });
    }
    let partial = !missing.is_empty();
    if partial {
        eprintln!("warning: partial report, missing {}", missing.join(", "));
    }
    let index = ReportIndex { tables, missing, partial };
    fs::write(out.join("index.json"), serde_json::to_string_pretty(&json!(index))? + "\n")?;
    Ok(index)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_dir_gives_partial_report() {
        let dir = tempfile::tempdir().unwrap();
        let idx = emit_report(dir.path()).unwrap();
        assert!(idx.partial);
        assert!(idx.tables.is_empty());
        assert_eq!(idx.missing.len(), TABLES.len() + 1);
        assert!(dir.path().join("report/index.json").exists());
    }

    #[test]
    fn missing_dir_is_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = emit_report(&dir.path().join("nope")).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn scaling_and_laws_copied() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("scaling.csv"), "eps,kappa_abs\n0.1,1e-4\nslope,4.0\n").unwrap();
        fs::write(
            dir.path().join("evolve.json"),
            r#"{"laws": {"mass_law_doubled": 1e-7, "hamiltonian_match": "full"}, "stationarity": null}"#,
        )
        .unwrap();
        let idx = emit_report(dir.path()).unwrap();
        assert_eq!(idx.tables.len(), 2);
        let laws = fs::read_to_string(dir.path().join("report/laws.csv")).unwrap();
        assert_eq!(laws, "quantity,value\nlaws.mass_law_doubled,1e-7\n");
        let scaling = fs::read_to_string(dir.path().join("report/scaling.csv")).unwrap();
        assert!(scaling.lines().last().unwrap().starts_with("slope,"));
    }
}
