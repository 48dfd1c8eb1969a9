use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("network schema violation: {0}")]
    Schema(String),

    #[error("network must have at least one layer")]
    EmptyNetwork,

    #[error("dimension mismatch at layer {layer}: expected {expected} inputs, found {found}")]
    DimensionMismatch {
        layer: usize,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value at layer {layer}, neuron {neuron}")]
    NonFinite { layer: usize, neuron: usize },

    #[error("invalid domain: {0}")]
    Domain(String),

    #[error("invalid activation at layer {layer}, neuron {neuron}: {reason}")]
    Activation {
        layer: usize,
        neuron: usize,
        reason: String,
    },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("invalid instance: {0}")]
    Instance(String),

    #[error("unsupported formulation input: {0}")]
    Unsupported(String),

    #[error("LP solve failed: {0}")]
    Lp(String),

    #[error("size guard exceeded: {what} ({size} > {limit})")]
    Guard {
        what: &'static str,
        size: usize,
        limit: usize,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
