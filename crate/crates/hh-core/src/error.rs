use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HhError {
    #[error("enumeration cap exceeded: {what} needs {needed} > cap {cap}")]
    CapExceeded {
        what: &'static str,
        needed: f64,
        cap: u64,
    },
    #[error("zero evidence: {0}")]
    ZeroEvidence(String),
    #[error("degenerate split: {0}")]
    DegenerateSplit(String),
    #[error("assumption violated: {0}")]
    AssumptionViolated(String),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("oracle unavailable: {0}")]
    OracleUnavailable(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("at episode {episode} (phase {phase}): {source}")]
    InEpisode {
        episode: u64,
        phase: u64,
        #[source]
        source: Box<HhError>,
    },
}

impl HhError {
    /// Strips episode context.
    pub fn root(&self) -> &HhError {
        match self {
            HhError::InEpisode { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn in_episode(self, episode: u64, phase: u64) -> HhError {
        HhError::InEpisode {
            episode,
            phase,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, HhError>;
