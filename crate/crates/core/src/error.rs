use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{source_name}:{line}: malformed record: {reason}")]
    Malformed {
        source_name: &'static str,
        line: usize,
        reason: String,
    },

    #[error("edges:{line}: endpoint `{id}` is not declared in the nodes file")]
    UndeclaredEndpoint { line: usize, id: String },

    #[error("edges:{line}: space partition violation: {kind} edge `{src}` -> `{dst}` ({detail})")]
    SpacePartition {
        line: usize,
        kind: String,
        src: String,
        dst: String,
        detail: String,
    },

    #[error("nodes:{line}: `{id}` declared as both instance and concept")]
    ConflictingSpace { line: usize, id: String },

    #[error("unknown concept `{0}`")]
    UnknownConcept(String),

    #[error("unknown entity `{0}`")]
    UnknownEntity(String),

    #[error("duplicate document id `{0}`")]
    DuplicateDocument(String),

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("empty source set: concept has no instance entities")]
    EmptySources,

    #[error("empty context set")]
    EmptyContext,

    #[error("path enumeration cap of {cap} extensions exceeded ({partial} paths found so far)")]
    EnumerationCap { cap: u64, partial: u64 },

    #[error(
        "k-hop index needs ~{needed} bytes, over the budget of {budget} bytes; use the per-target hop cache instead"
    )]
    MemoryBudget { needed: usize, budget: usize },

    #[error("concept `{0}` has no direct or descendant match in the document")]
    UnmatchableConcept(String),

    #[error("concept `{0}` is not a subtopic candidate for the query")]
    NotACandidate(String),

    #[error("index format: {0}")]
    IndexFormat(String),

    #[error("index checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    Checksum { stored: u32, computed: u32 },

    #[error("index is truncated: {0}")]
    Truncated(String),

    #[error("study: {0}")]
    Study(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short stable tag, used by the CLI's machine-parsable error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io(_) => "io",
            Error::Malformed { .. } => "malformed",
            Error::UndeclaredEndpoint { .. } => "undeclared_endpoint",
            Error::SpacePartition { .. } => "space_partition",
            Error::ConflictingSpace { .. } => "conflicting_space",
            Error::UnknownConcept(_) => "unknown_concept",
            Error::UnknownEntity(_) => "unknown_entity",
            Error::DuplicateDocument(_) => "duplicate_document",
            Error::InvalidParams(_) => "invalid_params",
            Error::EmptySources => "empty_sources",
            Error::EmptyContext => "empty_context",
            Error::EnumerationCap { .. } => "enumeration_cap",
            Error::MemoryBudget { .. } => "memory_budget",
            Error::UnmatchableConcept(_) => "unmatchable_concept",
            Error::NotACandidate(_) => "not_a_candidate",
            Error::IndexFormat(_) => "index_format",
            Error::Checksum { .. } => "checksum",
            Error::Truncated(_) => "truncated",
            Error::Study(_) => "study",
            Error::Json(_) => "json",
        }
    }
}
