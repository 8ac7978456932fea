use thiserror::Error;

/// Every failure the engine can report.
///
/// Node ids in variants are the ids given in the input document, not the
/// dense internal indices.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("cycle detected through node {0}")]
    CycleDetected(u64),
    #[error("multiple root nodes: {0} and {1}")]
    MultipleRoots(u64, u64),
    #[error("no root node (every record has a parent)")]
    NoRoot,
    #[error("node {0} is a leaf but not a consumer")]
    NonConsumerLeaf(u64),
    #[error("consumer node {0} has children")]
    ConsumerWithChildren(u64),
    #[error("node {node} references missing parent {parent}")]
    DanglingParentRef { node: u64, parent: u64 },
    #[error("duplicate node id {0}")]
    DuplicateNodeId(u64),
    #[error("invalid field on node {node}: {reason}")]
    InvalidNode { node: u64, reason: String },
    #[error("unknown node {0}")]
    UnknownNode(u64),

    #[error("invalid lifetime {0} (must be >= 1 year)")]
    InvalidLifetime(f64),
    #[error("invalid discount rate {0} (must be > 0)")]
    InvalidRate(f64),
    #[error("demanded capacity {peak_kw} kW exceeds largest {item} in catalog (node {node:?})")]
    CapacityExceedsCatalog {
        node: Option<u64>,
        item: &'static str,
        peak_kw: f64,
    },
    #[error("invalid cost configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid catalog: {0}")]
    InvalidCatalog(String),
    #[error("invalid generation lookup table: {0}")]
    InvalidLookupTable(String),

    #[error("the root node {0} is the grid connection and cannot be pruned")]
    RootNotPrunable(u64),
    #[error("node {0} is already pruned")]
    AlreadyPruned(u64),
    #[error("node {0} has not been evaluated")]
    NotEvaluated(u64),

    #[error("coincident consumers {0} and {1}")]
    DuplicatePoints(u64, u64),
    #[error("infeasible scenario: {0}")]
    InfeasibleSpec(String),
    #[error("summary totals {rows} do not match engine total {engine}")]
    InconsistentTotals { rows: f64, engine: f64 },
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),

    #[error("network file missing: {0}")]
    NetworkMissing(String),
    #[error("config file missing: {0}")]
    ConfigMissing(String),
    #[error("catalog file missing: {0}")]
    CatalogMissing(String),
    #[error("parse error in {file}: {reason}")]
    Parse { file: String, reason: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable, machine-parsable class name (the variant name).
    pub fn class(&self) -> &'static str {
        match self {
            Error::CycleDetected(_) => "CycleDetected",
            Error::MultipleRoots(..) => "MultipleRoots",
            Error::NoRoot => "NoRoot",
            Error::NonConsumerLeaf(_) => "NonConsumerLeaf",
            Error::ConsumerWithChildren(_) => "ConsumerWithChildren",
            Error::DanglingParentRef { .. } => "DanglingParentRef",
            Error::DuplicateNodeId(_) => "DuplicateNodeId",
            Error::InvalidNode { .. } => "InvalidNode",
            Error::UnknownNode(_) => "UnknownNode",
            Error::InvalidLifetime(_) => "InvalidLifetime",
            Error::InvalidRate(_) => "InvalidRate",
            Error::CapacityExceedsCatalog { .. } => "CapacityExceedsCatalog",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::InvalidCatalog(_) => "InvalidCatalog",
            Error::InvalidLookupTable(_) => "InvalidLookupTable",
            Error::RootNotPrunable(_) => "RootNotPrunable",
            Error::AlreadyPruned(_) => "AlreadyPruned",
            Error::NotEvaluated(_) => "NotEvaluated",
            Error::DuplicatePoints(..) => "DuplicatePoints",
            Error::InfeasibleSpec(_) => "InfeasibleSpec",
            Error::InconsistentTotals { .. } => "InconsistentTotals",
            Error::InvalidSweep(_) => "InvalidSweep",
            Error::NetworkMissing(_) => "NetworkMissing",
            Error::ConfigMissing(_) => "ConfigMissing",
            Error::CatalogMissing(_) => "CatalogMissing",
            Error::Parse { .. } => "Parse",
            Error::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
