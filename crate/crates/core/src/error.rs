use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid spatial mode label {0:?}")]
    InvalidModeLabel(String),
    #[error("states share spatial modes: {0}")]
    OverlappingModes(String),
    #[error("cannot normalize the zero state")]
    ZeroState,
    #[error("element precondition violated: {0}")]
    Precondition(String),
    #[error("logical amplitudes are not normalized (|alpha|^2 + |beta|^2 = {0})")]
    UnnormalizedQubit(f64),
    #[error("parity encoding needs at least one component qubit and one mode per qubit")]
    InvalidEncodingSize,
    #[error("state is not a parity encoding on the given modes (overlap weight {0})")]
    NotParityEncoded(f64),
    #[error("pattern {0} is not a success pattern")]
    NotSuccessPattern(String),
    #[error("invalid pattern id {0:?}")]
    InvalidPatternId(String),
    #[error("mode-matching parameter {name} = {value} is outside [0, 1]")]
    EtaOutOfRange { name: &'static str, value: f64 },
    #[error("pattern {pattern} belongs to the {actual} variant, not {requested}")]
    VariantMismatch { pattern: String, actual: String, requested: String },
    #[error("quadrature needs at least {min} nodes in {axis}")]
    QuadratureTooCoarse { axis: &'static str, min: usize },
    #[error("a sweep grid needs at least 2 points per axis, got {0}")]
    GridTooSmall(usize),
    #[error("retry bounds must be at least 1")]
    InvalidPolicy,
    #[error("cannot aggregate an empty set of trials")]
    EmptyTrials,
    #[error("invalid PDC parameters: {0}")]
    InvalidPdc(String),
    #[error("degenerate event with zero probability")]
    ZeroProbability,
}

pub type Result<T> = std::result::Result<T, Error>;
