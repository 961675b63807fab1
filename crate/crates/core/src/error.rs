use thiserror::Error;

use crate::symbols::Domain;

#[derive(Debug, Error)]
pub enum Error {
    #[error("instruction contains no words")]
    EmptyInstruction,

    #[error("\"{token}\" (word {position}) is not covered by the instruction grammar")]
    OutOfGrammar { token: String, position: usize },

    #[error("malformed tree at byte {offset}: {reason}")]
    MalformedTree { offset: usize, reason: String },

    #[error("unknown symbol {0:?}")]
    UnknownSymbol(String),

    #[error("classifier registry is empty")]
    EmptyRegistry,

    #[error("expected a {expected} symbol, found a {found} symbol")]
    DomainMismatch { expected: Domain, found: Domain },

    #[error("non-finite factor score for phrase {phrase}, symbol {symbol}")]
    NonFiniteScore { phrase: usize, symbol: String },

    #[error("no object in the world model satisfies the instruction's constraints")]
    NoTargetObject,

    #[error("{candidates} objects satisfy the constraints and no spatial relation selects one")]
    AmbiguousRelation { candidates: usize },

    #[error("{variables} correspondence variables exceed the exhaustive-search limit of {limit}")]
    TooLarge { variables: usize, limit: usize },

    #[error("{found} training data given to a {expected} model")]
    CorpusDomainMismatch { expected: Domain, found: Domain },

    #[error("training objective became non-finite at iteration {iteration}")]
    DivergedLoss { iteration: usize },

    #[error("invalid world spec: {0}")]
    InvalidSpec(String),

    #[error("unknown classifier {0}")]
    UnknownClassifier(String),

    #[error("invalid corpus configuration: {0}")]
    InvalidConfig(String),

    #[error("split fraction {0} must lie strictly between 0 and 1")]
    InvalidFraction(f64),

    #[error("unsupported {what} schema version {found} (expected {expected})")]
    UnsupportedSchema {
        what: &'static str,
        found: u32,
        expected: u32,
    },

    #[error("malformed {what}: {message}")]
    Format { what: &'static str, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Errors that describe the instruction or the world rather than misuse
    /// or I/O.
    pub fn is_domain_error(&self) -> bool {
        matches!(
            self,
            Error::EmptyInstruction
                | Error::OutOfGrammar { .. }
                | Error::NoTargetObject
                | Error::AmbiguousRelation { .. }
        )
    }
}
