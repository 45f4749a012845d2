//! Machine-readable run reports.
//!
//! Every command writes one JSON document:
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "command": "se",
//!   "inputs": [{"path": "case14.m", "sha256": "…"}],
//!   "inputs_digest": "…",
//!   "options": {…},
//!   "status": "ok",
//!   "results": {…}
//! }
//! ```
//!
//! On failure `status` is `"error"`, `results` is absent and `error` holds
//! `{"kind": "input" | "analysis", "message": …}`. Reports carry no
//! timestamps, so identical inputs and options give byte-identical output.
//! `inputs_digest` hashes the per-file content digests in order, so it pins
//! the fixtures independently of where they live on disk.

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InputFile {
    pub path: String,
    pub sha256: String,
}

impl InputFile {
    pub fn new(path: impl Into<String>, contents: &[u8]) -> Self {
        Self {
            path: path.into(),
            sha256: sha256_hex(contents),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Input,
    Analysis,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorInfo {
    pub kind: ErrorKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub inputs: Vec<InputFile>,
    pub inputs_digest: String,
    pub options: Value,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub results: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorInfo>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Digest over the input file content digests, in order.
pub fn inputs_digest(inputs: &[InputFile]) -> String {
    let mut h = Sha256::new();
    for f in inputs {
        h.update(f.sha256.as_bytes());
        h.update([0u8]);
    }
    hex::encode(h.finalize())
}

impl Report {
    pub fn new(command: &str, inputs: Vec<InputFile>, options: Value) -> Self {
        let inputs_digest = inputs_digest(&inputs);
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            command: command.to_string(),
            inputs,
            inputs_digest,
            options,
            status: Status::Ok,
            results: None,
            error: None,
        }
    }

    pub fn succeed(mut self, results: Value) -> Self {
        self.status = Status::Ok;
        self.results = Some(results);
        self
    }

    pub fn fail(mut self, kind: ErrorKind, message: String) -> Self {
        self.status = Status::Error;
        self.results = None;
        self.error = Some(ErrorInfo { kind, message });
        self
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn known_digest() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn digest_depends_on_contents_only() {
        let a = vec![InputFile::new("x", b"1")];
        let b = vec![InputFile::new("y", b"1")];
        let c = vec![InputFile::new("x", b"2")];
        assert_eq!(inputs_digest(&a), inputs_digest(&b));
        assert_ne!(inputs_digest(&a), inputs_digest(&c));
    }

    #[test]
    fn error_reports_have_no_results() {
        let r = Report::new("pf", vec![], json!({})).fail(ErrorKind::Analysis, "diverged".into());
        let v: Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["status"], "error");
        assert_eq!(v["error"]["kind"], "analysis");
        assert!(v.get("results").is_none());
        assert_eq!(v["schema_version"], 1);
    }
}
