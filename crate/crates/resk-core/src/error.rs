use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax {
        line: usize,
        col: usize,
        msg: String,
    },

    #[error("self-join not supported: relation `{0}` appears more than once")]
    SelfJoin(String),

    #[error("unknown relation `{0}`")]
    UnknownRelation(String),

    #[error("unknown atom `{0}`")]
    UnknownAtom(String),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("relation `{relation}`: expected arity {expected}, got {got}")]
    ArityMismatch {
        relation: String,
        expected: usize,
        got: usize,
    },

    #[error("missing relation file `{0}`")]
    MissingRelationFile(String),

    #[error("witness cap of {0} exceeded; instance too large for exact methods")]
    WitnessCapExceeded(usize),

    #[error("branch budget of {0} exhausted; instance too large for exact methods")]
    BranchCapExceeded(u64),

    #[error("query cannot be falsified: witness {0} contains no endogenous tuple")]
    CannotFalsify(String),

    #[error("tuple {0} is not endogenous or not present in the database")]
    BadDeletion(String),

    #[error("atom `{0}` is endogenous; dissociation applies to exogenous atoms only")]
    DissociateEndogenous(String),

    #[error("variable `{var}` already occurs in atom `{atom}`")]
    DissociateDuplicate { atom: String, var: String },

    #[error("query has a triad {0:?}; it cannot be linearized")]
    TriadPresent([String; 3]),

    #[error("database violates functional dependency {0}")]
    FdViolation(String),

    #[error("functional dependency {0} spans disconnected components")]
    FdSpansComponents(String),

    #[error("clause {0} repeats a variable; gadget construction requires three distinct variables per clause")]
    RepeatedClauseVariable(usize),

    #[error("invalid 3CNF: {0}")]
    BadCnf(String),

    #[error("rats gadget needs t >= 7m for unique matching allocation (t={t}, m={m})")]
    RatsTooSmall { t: usize, m: usize },

    #[error("triad {0:?} is not valid in this query")]
    InvalidTriad([String; 3]),

    #[error("variable `{0}` is shared by all three triad atoms; set it to a constant first")]
    TriadSharedVariable(String),

    #[error(
        "min cut reached the infinity sentinel; the endogenous side cannot disconnect the network"
    )]
    SentinelCut,

    #[error("{0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
