use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("developer identifier is empty after trimming")]
    EmptyIdentifier,
    #[error("report id is empty")]
    EmptyReportId,
    #[error("duplicate report id `{0}`")]
    DuplicateId(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("threshold must be at least 1")]
    InvalidThreshold,
    #[error("filter threshold {threshold} removed every report")]
    FilterRemovedAll { threshold: usize },
    #[error("need at least {required} reports to split, found {found}")]
    TooFewReports { required: usize, found: usize },
    #[error("requested {requested} runs but only {available} distinct folds exist")]
    TooManyRuns { requested: usize, available: usize },
    #[error("runs must be at least 1")]
    InvalidRuns,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("prompt template kind mismatch: expected {expected}")]
    TemplateKind { expected: &'static str },
    #[error("token budget {budget} cannot hold the fixed prompt text ({fixed} tokens)")]
    BudgetTooSmall { budget: usize, fixed: usize },
    #[error("empty split")]
    EmptySplit,
    #[error("vocabulary is empty after frequency filtering")]
    EmptyVocabulary,
    #[error("label {label} outside candidate set of size {classes}")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("assignee `{0}` is not in the candidate set")]
    UnknownAssignee(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("non-finite gradient at parameter {index} on optimizer step {step}")]
    NonFiniteGradient { index: usize, step: u64 },
    #[error("shape mismatch: {0}")]
    Shape(&'static str),
    #[error("rankings and truths disagree on issue `{0}`")]
    IdMismatch(String),
    #[error("reports are not comparable: {0}")]
    Incomparable(String),
    #[error("invalid configuration: {0}")]
    Config(&'static str),
}

/// Convenience alias.
pub type Result<T> = core::result::Result<T, Error>;
