use thiserror::Error;

/// Errors produced by the analysis library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid OFDM configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("channel taps are all zero; SINR is undefined")]
    ZeroChannel,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("channel order {order} does not fit a {n}-point DFT")]
    ChannelTooLong { order: usize, n: usize },

    #[error("zero-forcing equalizer undefined: spectral null on tone {tone}")]
    SpectralNull { tone: usize },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("wall Gram matrix is singular after regularization")]
    SingularWall,

    #[error("TEQ delay {delay} lies outside the overall response (length {oir_len})")]
    InvalidDelay { delay: usize, oir_len: usize },

    #[error("simulation needs at least {min} blocks, got {got}")]
    TooFewBlocks { min: usize, got: usize },

    #[error("warmup of {warmup} blocks per edge leaves no room in a {n_blocks}-block run")]
    WarmupTooLong { warmup: usize, n_blocks: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
