//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NeatError {
    #[error("genome {genome} has no fitness; evaluate before reproducing")]
    UnsetFitness { genome: u64 },
    #[error("genome {genome} is malformed: {reason}")]
    MalformedGenome { genome: u64, reason: String },
}

#[derive(Debug, Error)]
pub enum PhenotypeError {
    #[error("genome {genome} has a cycle in its enabled connections")]
    Cycle { genome: u64 },
    #[error("observation length {got} does not match input arity {expected}")]
    ArityMismatch { expected: usize, got: usize },
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Phenotype(#[from] PhenotypeError),
    #[error("network output arity {got}, simulator needs {expected}")]
    OutputArity { expected: usize, got: usize },
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown config key '{key}'")]
    UnknownKey { key: String },
    #[error("invalid value for '{key}': {reason}")]
    InvalidValue { key: String, reason: String },
    #[error("missing required config key '{key}'")]
    MissingKey { key: String },
    #[error("unknown preset '{name}'; valid presets: {valid}")]
    UnknownPreset { name: String, valid: String },
    #[error("config conflict: {reason}")]
    Conflict { reason: String },
    #[error("malformed config line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("io error reading config: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("checkpoint at {path} is corrupt: {reason}")]
    Corrupt { path: String, reason: String },
    #[error("checkpoint version {found} unsupported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("config hash mismatch: checkpoint {stored:#018x} vs supplied {supplied:#018x}; pass the override flag to proceed")]
    ConfigMismatch { stored: u64, supplied: u64 },
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Neat(#[from] NeatError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("engine has no active pairs")]
    NoActivePairs,
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("run '{method}' has {have} solved environments with recorded agents, need {need}")]
    Shortfall {
        method: String,
        have: usize,
        need: usize,
    },
    #[error("generalization needs at least one run directory")]
    NoRuns,
    #[error(transparent)]
    Sim(#[from] SimError),
}
