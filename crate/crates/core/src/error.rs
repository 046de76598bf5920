use alloc::boxed::Box;
use alloc::string::String;

use crate::lang::LanguageId;
use crate::typology::FeatureCategory;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid language id {0:?}: expected 1-8 chars of [a-z0-9_]")]
    InvalidLanguageId(String),

    #[error("unknown language `{0}`")]
    UnknownLanguage(LanguageId),

    #[error("typology table is empty")]
    EmptyTable,

    #[error("invalid typology table: {0}")]
    InvalidTable(String),

    #[error("no feature carries category `{0}`")]
    EmptyCategory(FeatureCategory),

    #[error("`{a}` and `{b}` share {shared} non-missing features, need at least {required}")]
    InsufficientOverlap {
        a: LanguageId,
        b: LanguageId,
        shared: usize,
        required: usize,
    },

    #[error("zero-norm shared feature vector between `{a}` and `{b}`")]
    ZeroVector { a: LanguageId, b: LanguageId },

    #[error("source `{language}`: {source}")]
    Source {
        language: LanguageId,
        #[source]
        source: Box<Error>,
    },

    #[error("language `{0}` appears more than once in the pool")]
    DuplicateLanguage(LanguageId),

    #[error("source pool is empty")]
    EmptyPool,

    #[error("pruning policy removed every source")]
    AllPruned,

    #[error("invalid pruning policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid distance matrix: {0}")]
    InvalidMatrix(String),

    #[error("distance matrix asymmetric at ({a}, {b}): {ab} vs {ba}")]
    AsymmetryTooLarge {
        a: LanguageId,
        b: LanguageId,
        ab: f64,
        ba: f64,
    },

    #[error("distance matrix diagonal for `{0}` is {1}, expected 0")]
    NonzeroDiagonal(LanguageId, f64),

    #[error("schema mismatch at tensor `{tensor}`: {detail}")]
    SchemaMismatch { tensor: String, detail: String },

    #[error("weights must be positive and sum to 1 (sum = {0})")]
    WeightSumInvalid(f64),

    #[error("non-finite value in tensor `{0}`")]
    NonfiniteInput(String),

    #[error("invalid tensor `{0}`: {1}")]
    InvalidTensor(String, String),

    #[error("lambda {0} outside [0, 1]")]
    LambdaOutOfRange(f64),

    #[error("invalid world config: {0}")]
    InvalidConfig(String),

    #[error("unknown merge method `{0}`")]
    UnknownMethod(String),

    #[error("method `{0}` unavailable: {1}")]
    MethodUnavailable(&'static str, String),
}

impl Error {
    /// Wrap an error raised while handling one pool member.
    pub fn for_source(self, language: &LanguageId) -> Self {
        Error::Source {
            language: language.clone(),
            source: Box::new(self),
        }
    }

    /// The innermost error, with any per-source annotations peeled off.
    pub fn root(&self) -> &Error {
        match self {
            Error::Source { source, .. } => source.root(),
            other => other,
        }
    }
}
