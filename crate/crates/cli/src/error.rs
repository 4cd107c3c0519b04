use std::fmt;
use std::path::PathBuf;

use serde_json::json;

/// An input another stage should have produced is absent.
#[derive(Debug)]
pub struct MissingDependency {
    pub flag: &'static str,
    pub path: Option<PathBuf>,
}

impl fmt::Display for MissingDependency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.path {
            None => write!(f, "missing dependency: {} is required", self.flag),
            Some(p) => write!(f, "missing dependency: {} {} does not exist", self.flag, p.display()),
        }
    }
}

impl std::error::Error for MissingDependency {}

/// A flag that is required but is not an upstream artifact.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

/// Exit status and the JSON record printed on stderr.
pub fn error_record(command: &str, err: &anyhow::Error) -> (i32, serde_json::Value) {
    let message = format!("{err:#}");
    if let Some(m) = err.downcast_ref::<MissingDependency>() {
        let rec = json!({
            "status": "error",
            "kind": "missing_dependency",
            "command": command,
            "dependency": m.flag,
            "path": m.path.as_ref().map(|p| p.display().to_string()),
            "message": message,
        });
        return (2, rec);
    }
    let kind = if err.downcast_ref::<Usage>().is_some() {
        "usage"
    } else {
        "failure"
    };
    (
        1,
        json!({
            "status": "error",
            "kind": kind,
            "command": command,
            "message": message,
        }),
    )
}
