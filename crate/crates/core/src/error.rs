use thiserror::Error;

pub type Result<T> = std::result::Result<T, ModelError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    /// A lattice or parameter value violates a structural invariant.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The colonisation lattice has zero density under the current parameters,
    /// e.g. a colonisation event at a cell with zero colonisation pressure.
    #[error("state has zero density: colonisation at t={t}, individual {individual} with zero pressure")]
    InvalidState { t: usize, individual: usize },

    #[error("every cell has zero complement mass; no perturbation is possible")]
    NoPerturbableCell,

    #[error("proposal bounds have zero total complement mass")]
    DegenerateProposal,

    #[error("{0} proposal has an empty candidate set")]
    InfeasibleProposal(&'static str),

    #[error("enumeration over {cells} cells exceeds the limit of {limit}")]
    TooLarge { cells: usize, limit: usize },

    #[error("global colonisation pressure is zero; household risk ratio is undefined")]
    UndefinedRatio,
}
