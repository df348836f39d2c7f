use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown operator `{0}`")]
    UnknownOperator(String),

    #[error("operator `{op}` expects {expected} argument(s), got {got}")]
    Arity { op: String, expected: usize, got: usize },

    #[error("window argument of `{op}` must be an integer literal in [{min}, {max}], got {got}")]
    WindowRange { op: String, min: i64, max: i64, got: String },

    #[error("expression depth {depth} exceeds cap {cap}")]
    DepthCap { depth: usize, cap: usize },

    #[error("unit error in `{op}`: incompatible units {left} and {right}")]
    Unit { op: String, left: String, right: String },

    #[error("field `{0}` is absent from the panel")]
    MissingField(String),

    #[error("duplicate (date, symbol) row: ({date}, {symbol})")]
    DuplicateKey { date: String, symbol: String },

    #[error("row {row}: cannot parse `{value}` in column `{column}`")]
    BadCell { row: usize, column: String, value: String },

    #[error("row {row}: non-positive price {value} in column `{column}`")]
    NonPositivePrice { row: usize, column: String, value: f64 },

    #[error("invalid panel: {0}")]
    InvalidPanel(String),

    #[error("no defined labels: horizon {horizon} + lag {lag} >= {t} bars")]
    LabelHorizon { horizon: usize, lag: usize, t: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("seed expression rejected: {0}")]
    InvalidSeed(String),

    #[error("pool store error: {0}")]
    Pool(String),

    #[error("chat client error: {0}")]
    Chat(String),

    #[error("pinned messages alone exceed the token budget ({tokens} > {budget})")]
    PinnedOverBudget { tokens: usize, budget: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
