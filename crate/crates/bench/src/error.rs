use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("script parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Core(#[from] bamboo_core::CoreError),

    #[error(transparent)]
    Wire(#[from] bamboo_wire::WireError),

    #[error("server thread panicked")]
    ServerPanic,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl BenchError {
    pub fn parse(line: usize, message: &str) -> BenchError {
        BenchError::Parse {
            line,
            message: message.to_string(),
        }
    }
}
