use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("no operators registered")]
    NoOperators,
    #[error("unknown operator `{0}`")]
    UnknownOperator(String),
    #[error("requirement bin {0:?} has no observations")]
    EmptyBin([usize; 3]),
    #[error("history of {len} snapshots is shorter than the window of {window}")]
    HistoryTooShort { len: usize, window: usize },
    #[error("failure catalog is empty")]
    EmptyCatalog,
    #[error("ledger is empty")]
    EmptyLedger,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
