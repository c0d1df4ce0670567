use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("qubit index {index} out of range for {n_qubits}-qubit register")]
    QubitOutOfRange { index: usize, n_qubits: usize },

    #[error("invalid gate: {0}")]
    InvalidGate(String),

    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),

    #[error("parameter vector has length {got}, circuit expects {expected}")]
    ParamLength { expected: usize, got: usize },

    #[error("shot count must be at least 1")]
    ZeroShots,

    #[error("hamiltonian parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid hamiltonian: {0}")]
    InvalidHamiltonian(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("matrix of dimension 2^{0} is too large for dense diagonalization")]
    TooLarge(usize),

    #[error("idx format error in {path}: {msg}")]
    IdxFormat { path: PathBuf, msg: String },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("cannot amplitude-encode a zero-norm vector")]
    ZeroNorm,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("node {node} failed in round {round}: {source}")]
    NodeFailed {
        node: usize,
        round: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("download failed: {0}")]
    Fetch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
