use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";

/// All invocations that wrote into one run directory, oldest first.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunManifest {
    pub runs: Vec<RunRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub command: String,
    pub config: serde_json::Value,
    pub versions: BTreeMap<String, String>,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub threads: usize,
    /// "ok" or "failed"
    pub status: String,
    pub reason: Option<String>,
    pub exit_code: i32,
    /// Scalars of the run; null where the quantity is undefined.
    pub derived: BTreeMap<String, Option<f64>>,
    /// Paths relative to the run directory.
    pub files: Vec<String>,
}

pub fn now_unix() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

pub fn versions() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("gp-pump".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("gpf".to_string(), "1".to_string()),
    ])
}

pub fn read(dir: &Path) -> Result<Option<RunManifest>, CliError> {
    let path = dir.join(MANIFEST);
    if !path.exists() {
        return Ok(None);
    }
    Ok(Some(serde_json::from_str(&fs::read_to_string(path)?)?))
}

/// Adds `record` after the existing runs; earlier records are kept verbatim.
pub fn append(dir: &Path, record: RunRecord) -> Result<(), CliError> {
    let mut m = read(dir)?.unwrap_or_default();
    m.runs.push(record);
    fs::write(dir.join(MANIFEST), serde_json::to_string_pretty(&m)? + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(cmd: &str) -> RunRecord {
        RunRecord {
            command: cmd.into(),
            config: serde_json::Value::Null,
            versions: versions(),
            started_unix: 0.0,
            finished_unix: 1.0,
            threads: 1,
            status: "ok".into(),
            reason: None,
            exit_code: 0,
            derived: BTreeMap::from([("m_star".into(), Some(4.5))]),
            files: vec!["balance.json".into()],
        }
    }

    #[test]
    fn append_keeps_history() {
        let dir = tempfile::tempdir().unwrap();
        append(dir.path(), record("balance")).unwrap();
        let first = fs::read_to_string(dir.path().join(MANIFEST)).unwrap();
        append(dir.path(), record("expand")).unwrap();
        let m = read(dir.path()).unwrap().unwrap();
        assert_eq!(m.runs.len(), 2);
        assert_eq!(m.runs[0].command, "balance");
        assert_eq!(m.runs[1].command, "expand");
        assert_eq!(m.runs[0].derived["m_star"], Some(4.5));
        assert!(first.contains("\"balance\""));
    }
}
