use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("graph parse error: {0}")]
    GraphParse(String),

    #[error("fault model parse error: {0}")]
    FaultModelParse(String),

    #[error("graph is disconnected")]
    Disconnected,

    #[error("removal set equals the whole node set; no pair left to separate")]
    NothingLeftToSeparate,

    #[error("resource guard exceeded: {what} is {actual}, limit {limit}")]
    ResourceLimit {
        what: &'static str,
        actual: usize,
        limit: usize,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("simulation error at node `{node}`, round {round}: {reason}")]
    Simulation {
        node: String,
        round: usize,
        reason: String,
    },

    #[error("scenario parse error: {0}")]
    ScenarioParse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
