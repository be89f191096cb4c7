use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValueError {
    #[error("malformed rational `{0}`")]
    BadRational(String),
    #[error("unknown value function `{0}`")]
    UnknownFunction(String),
    #[error("nothing left to aggregate after removing silent entries and burn-in")]
    EmptyAfterFilter,
    #[error("estimator input contains an infinite value")]
    NonFiniteEntry,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error(transparent)]
    Value(#[from] ValueError),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("non-deterministic: state `{state}` has several transitions on `{letter}`")]
    NonDeterministic { state: String, letter: String },
    #[error("not dualizable: {0}")]
    NotDualizable(String),
    #[error("master automaton has no transition at position {position}")]
    MasterStuck { position: usize },
    #[error("illegal counter instruction at position {position} on counter {counter}")]
    RuntimeInstruction { position: usize, counter: usize },
    #[error("more than {k} slave automata can be active at once")]
    WidthExceeded { k: usize },
    #[error("linear system is singular")]
    SingularSystem,
    #[error("chain restricted to the given states is not irreducible")]
    NotIrreducible,
    #[error("end component {0:?} has no non-silent edge")]
    AllSilentEndScc(Vec<usize>),
    #[error("not almost-surely accepting: {0}")]
    NotAlmostSureAccepting(String),
    #[error("{slave} does not terminate almost surely from chain state `{state}`")]
    NotAlmostSurelyTerminating { slave: String, state: String },
    #[error("slave never reaches an accepting state on words of the chain")]
    NoAcceptingPath,
    #[error("positive probability of rejection: {0}")]
    RejectionMassPositive(String),
    #[error("slave sums are unbounded below; the exact question is undecidable, use --approx")]
    SumUnboundedBelow,
    #[error("open problem: {0}")]
    OpenProblem(String),
    #[error("expected value undefined (both infinities carry positive mass)")]
    UndefinedExpected,
    #[error("state budget of {0} exceeded")]
    StateBudgetExceeded(usize),
    #[error("depth {depth} exceeds the cap {cap}")]
    DepthCap { depth: usize, cap: usize },
    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    /// Stable machine-readable tag.
    pub fn tag(&self) -> &'static str {
        match self {
            Error::Value(_) => "ValueError",
            Error::Schema(_) => "SchemaError",
            Error::NonDeterministic { .. } => "NonDeterministic",
            Error::NotDualizable(_) => "NotDualizable",
            Error::MasterStuck { .. } => "MasterStuck",
            Error::RuntimeInstruction { .. } => "RuntimeInstructionError",
            Error::WidthExceeded { .. } => "WidthExceeded",
            Error::SingularSystem => "SingularSystem",
            Error::NotIrreducible => "NotIrreducible",
            Error::AllSilentEndScc(_) => "AllSilentEndScc",
            Error::NotAlmostSureAccepting(_) => "NotAlmostSureAccepting",
            Error::NotAlmostSurelyTerminating { .. } => "NotAlmostSurelyTerminating",
            Error::NoAcceptingPath => "NoAcceptingPath",
            Error::RejectionMassPositive(_) => "RejectionMassPositive",
            Error::SumUnboundedBelow => "SumUnboundedBelow",
            Error::OpenProblem(_) => "OpenProblem",
            Error::UndefinedExpected => "UndefinedExpected",
            Error::StateBudgetExceeded(_) => "StateBudgetExceeded",
            Error::DepthCap { .. } => "DepthCap",
            Error::Unsupported(_) => "Unsupported",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
