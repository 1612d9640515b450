//! Command-line front end for the word sense induction pipelines: config
//! handling, per-lemma orchestration and output files.

pub mod config;
pub mod pipeline;

use std::fmt;

use serde::Serialize;

/// The planted world behind the bundled fixtures.
pub fn fixture_spec() -> wsi_core::synthetic::PlantedSpec {
    use wsi_core::Pos;
    wsi_core::synthetic::PlantedSpec {
        lemmas: vec![
            ("zamek".into(), Pos::Noun),
            ("szybki".into(), Pos::Adj),
            ("zamykać".into(), Pos::Verb),
        ],
        ..Default::default()
    }
}

pub use config::{ConfigOverrides, Method, RunConfig, Targets};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const DATA: i32 = 3;
    pub const INTERNAL: i32 = 4;
}

/// A failed command, classified by exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad or inconsistent configuration; every problem found is listed.
    Config(Vec<String>),
    /// Input files that cannot be read or parsed.
    Data(String),
    Internal(String),
}

#[derive(Serialize)]
struct FailureRecord<'a> {
    error: &'static str,
    exit_code: i32,
    messages: &'a [String],
}

impl Failure {
    pub fn config(msg: impl Into<String>) -> Self {
        Failure::Config(vec![msg.into()])
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Failure::Config(_) => "config",
            Failure::Data(_) => "data",
            Failure::Internal(_) => "internal",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => exit::CONFIG,
            Failure::Data(_) => exit::DATA,
            Failure::Internal(_) => exit::INTERNAL,
        }
    }

    pub fn messages(&self) -> Vec<String> {
        match self {
            Failure::Config(m) => m.clone(),
            Failure::Data(m) | Failure::Internal(m) => vec![m.clone()],
        }
    }

    /// Single-line JSON for stderr.
    pub fn to_json(&self) -> String {
        let messages = self.messages();
        serde_json::to_string(&FailureRecord {
            error: self.kind(),
            exit_code: self.exit_code(),
            messages: &messages,
        })
        .expect("failure record serializes")
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} error: {}", self.kind(), self.messages().join("; "))
    }
}

impl std::error::Error for Failure {}

impl From<wsi_core::Error> for Failure {
    fn from(e: wsi_core::Error) -> Self {
        match e {
            wsi_core::Error::Config(m) => Failure::Config(vec![m]),
            other => Failure::Data(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Internal(e.to_string())
    }
}
