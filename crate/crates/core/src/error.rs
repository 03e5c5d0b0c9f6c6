use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// The graph (or an induced cluster subgraph) splits into several components.
    #[error("graph is disconnected: node {unreachable} is not reachable from node {root} ({components} components)")]
    Disconnected {
        root: usize,
        unreachable: usize,
        components: usize,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("fixed-point map is not a contraction at node {node}: R = {rate:.6} >= 1; use a smaller tau")]
    ContractionViolated { node: usize, rate: f64 },

    #[error("step-size condition violated: ||Sigma^1/2 D T^1/2||^2 estimated at {estimate:.6}")]
    StepSize { estimate: f64 },

    #[error("non-finite value encountered at iteration {iteration}")]
    NonFinite { iteration: usize },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn parse(source_name: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.into(),
            line,
            message: message.into(),
        }
    }

    /// True for failures caused by bad input (files, arguments, configuration),
    /// false for failures of the numerics themselves.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            Error::NonFinite { .. } | Error::Singular(_) | Error::StepSize { .. }
        )
    }
}
