//! Circuit graphs, the `.qc` description language, execution engines and the
//! closed-form XOR oracles.

pub mod builder;
pub mod engine;
pub mod graph;
pub mod oracle;
pub mod parser;
pub mod serialize;

use thiserror::Error;

pub use builder::{build_parity_circuit, build_xor1_hom_circuit, Physics, ScanSettings, SourceModel};
pub use engine::{run_exact, run_monte_carlo, run_monte_carlo_parallel, CountTable, EngineError, ResultRow, ResultTable};
pub use graph::{CircuitGraph, EngineKind, ScanKind, ScanSpec, Stage};
pub use oracle::{simulate_xor_gate, xor_conditional_output, xor_success_probability, OracleError, QubitPrep, QubitState};
pub use parser::parse_circuit;
pub use serialize::serialize_circuit;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("line {line}, column {column}: expected {expected}")]
    Syntax { line: usize, column: usize, expected: String },
    #[error("line {line}: unknown port `{name}`")]
    UnknownPort { name: String, line: usize },
    #[error("line {line}: detector `{name}` declared twice")]
    DuplicateDetector { name: String, line: usize },
    #[error("line {line}: port `{name}` declared twice")]
    DuplicatePort { name: String, line: usize },
    #[error("line {line}: port `{name}` carries photons but has no detector or output")]
    DanglingPort { name: String, line: usize },
    #[error("line {line}: port `{name}` is used after its detector")]
    PortTerminated { name: String, line: usize },
    #[error("line {line}: unknown detector `{name}`")]
    UnknownDetector { name: String, line: usize },
    #[error("line {line}: delay on port `{port}` after it has been mixed")]
    MisplacedDelay { port: String, line: usize },
    #[error("line {line}, column {column}: {message}")]
    InvalidValue { line: usize, column: usize, message: String },
    #[error("line {line}: nothing to scan on port `{port}`")]
    UnknownScanTarget { port: String, line: usize },
}

impl ParseError {
    /// Short variant name, as used by the malformed-file corpus.
    pub fn kind(&self) -> &'static str {
        match self {
            ParseError::Syntax { .. } => "Syntax",
            ParseError::UnknownPort { .. } => "UnknownPort",
            ParseError::DuplicateDetector { .. } => "DuplicateDetector",
            ParseError::DuplicatePort { .. } => "DuplicatePort",
            ParseError::DanglingPort { .. } => "DanglingPort",
            ParseError::PortTerminated { .. } => "PortTerminated",
            ParseError::UnknownDetector { .. } => "UnknownDetector",
            ParseError::MisplacedDelay { .. } => "MisplacedDelay",
            ParseError::InvalidValue { .. } => "InvalidValue",
            ParseError::UnknownScanTarget { .. } => "UnknownScanTarget",
        }
    }

    pub fn line(&self) -> usize {
        match self {
            ParseError::Syntax { line, .. }
            | ParseError::UnknownPort { line, .. }
            | ParseError::DuplicateDetector { line, .. }
            | ParseError::DuplicatePort { line, .. }
            | ParseError::DanglingPort { line, .. }
            | ParseError::PortTerminated { line, .. }
            | ParseError::UnknownDetector { line, .. }
            | ParseError::MisplacedDelay { line, .. }
            | ParseError::InvalidValue { line, .. }
            | ParseError::UnknownScanTarget { line, .. } => *line,
        }
    }
}
