use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the simulation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit {qubit} out of range for {num_qubits} qubits")]
    QubitOutOfRange { qubit: usize, num_qubits: usize },

    #[error("self-loop on qubit {0}")]
    SelfLoop(usize),

    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),

    #[error("graph has no edges")]
    EmptyGraph,

    #[error("edge list parse error: {0}")]
    EdgeListParse(String),

    #[error("qubits {0} and {1} are not connected")]
    Disconnected(usize, usize),

    #[error("edge coloring refused: {0}")]
    NotColorable(String),

    #[error("coupling graph has no edge layers; color it before building circuits")]
    NotColored,

    #[error("size mismatch: {what} has length {got}, expected {expected}")]
    SizeMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("gates in one layer overlap on qubit {0}")]
    OverlappingLayer(usize),

    #[error("circuit was not built by build_otoc_circuit")]
    NotOtocCircuit,

    #[error("{num_qubits} qubits exceeds the configured cap of {cap}")]
    MemoryCap { num_qubits: usize, cap: usize },

    #[error("values cannot be extrapolated with an exponential model: {0}")]
    NotExtrapolable(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("schema mismatch in {path}: {reason}")]
    Schema { path: PathBuf, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Whether the error stems from user input (config, files, arguments)
    /// rather than a failure inside the pipeline.
    pub fn is_user_error(&self) -> bool {
        !matches!(self, Error::NotOtocCircuit | Error::OverlappingLayer(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
