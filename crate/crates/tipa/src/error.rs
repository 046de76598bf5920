use std::io;
use std::path::PathBuf;

use tipa_core::LanguageId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] tipa_core::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{}: {reason}", path.display())]
    MalformedFile { path: PathBuf, reason: String },

    #[error("malformed container: {0}")]
    MalformedContainer(String),

    #[error("tensor `{tensor}` has unsupported dtype {dtype}{hint}")]
    UnsupportedDtype {
        tensor: String,
        dtype: String,
        hint: &'static str,
    },

    #[error("language `{language}` found twice: {} and {}", first.display(), second.display())]
    DuplicateLanguage {
        language: LanguageId,
        first: PathBuf,
        second: PathBuf,
    },

    #[error("pool schema mismatch between `{first}` and `{second}` at tensor `{tensor}`: {detail}")]
    PoolSchemaMismatch {
        first: LanguageId,
        second: LanguageId,
        tensor: String,
        detail: String,
    },

    #[error("{0}")]
    Usage(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn malformed(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::MalformedFile {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// Stable identifier printed with every failure.
    pub fn code(&self) -> &'static str {
        use tipa_core::Error as C;
        match self {
            Error::Core(e) => match e.root() {
                C::UnknownLanguage(_) => "E_UNKNOWN_LANGUAGE",
                C::AllPruned => "E_ALL_PRUNED",
                C::SchemaMismatch { .. } => "E_SCHEMA_MISMATCH",
                C::EmptyPool => "E_EMPTY_POOL",
                C::EmptyTable => "E_EMPTY_TABLE",
                C::EmptyCategory(_) => "E_EMPTY_CATEGORY",
                C::InsufficientOverlap { .. } => "E_INSUFFICIENT_OVERLAP",
                C::ZeroVector { .. } => "E_ZERO_VECTOR",
                C::AsymmetryTooLarge { .. } => "E_ASYMMETRY",
                C::NonzeroDiagonal(..) => "E_NONZERO_DIAGONAL",
                C::NonfiniteInput(_) => "E_NONFINITE",
                C::WeightSumInvalid(_) => "E_WEIGHT_SUM",
                C::LambdaOutOfRange(_) => "E_LAMBDA_RANGE",
                C::InvalidPolicy(_) => "E_POLICY",
                C::InvalidConfig(_) => "E_CONFIG",
                C::MethodUnavailable(..) | C::UnknownMethod(_) => "E_METHOD",
                C::DuplicateLanguage(_) => "E_DUPLICATE_LANGUAGE",
                _ => "E_DATA",
            },
            Error::Io { .. } => "E_IO",
            Error::MalformedFile { .. } => "E_MALFORMED_FILE",
            Error::MalformedContainer(_) => "E_MALFORMED_CONTAINER",
            Error::UnsupportedDtype { .. } => "E_UNSUPPORTED_DTYPE",
            Error::DuplicateLanguage { .. } => "E_DUPLICATE_LANGUAGE",
            Error::PoolSchemaMismatch { .. } => "E_SCHEMA_MISMATCH",
            Error::Usage(_) => "E_USAGE",
        }
    }

    /// 1 for I/O, 3 when pruning removed every source, 4 for schema
    /// mismatches, 2 for every other data error.
    pub fn exit_code(&self) -> i32 {
        match self.code() {
            "E_IO" => 1,
            "E_ALL_PRUNED" => 3,
            "E_SCHEMA_MISMATCH" => 4,
            _ => 2,
        }
    }
}
