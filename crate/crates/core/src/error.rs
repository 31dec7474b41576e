use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: axis {axis_a} of A has extent {dim_a}, axis {axis_b} of B has extent {dim_b}")]
    DimensionMismatch {
        axis_a: usize,
        axis_b: usize,
        dim_a: usize,
        dim_b: usize,
    },
    #[error("invalid index pairing: {0}")]
    InvalidPairing(String),
    #[error("invalid tensor: {0}")]
    InvalidTensor(String),
    #[error("state has zero norm")]
    ZeroNorm,
    #[error("{requested} qubits exceeds the statevector cap of {cap}")]
    TooManyQubits { requested: usize, cap: usize },
    #[error("matrix on vertex {vertex} is singular (|det| = {det:e})")]
    SingularMatrix { vertex: usize, det: f64 },
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("invalid assignment: {0}")]
    InvalidAssignment(String),
    #[error("invalid factor graph: {0}")]
    InvalidFactorGraph(String),
    #[error("all assignments have zero weight")]
    ZeroWeight,
    #[error("conditioning event has zero probability")]
    ImpossibleCondition,
    #[error("factor {index} is not pairwise-exponential")]
    NonPairwiseFactor { index: usize },
    #[error("parameter {name} = {value} outside [-{limit}, {limit}]")]
    ParameterOutOfRange {
        name: &'static str,
        value: f64,
        limit: f64,
    },
    #[error("table has a non-positive entry at index {index}")]
    NonPositiveTable { index: usize },
    #[error("grouping infeasible: cut between groups {left} and {right} carries {bonds} bonds (budget {budget})")]
    GroupingInfeasible {
        left: usize,
        right: usize,
        bonds: usize,
        budget: usize,
    },
    #[error("window {window} contracts to the zero map")]
    ZeroWindow { window: usize },
    #[error("intermediate state {stage} is zero")]
    ZeroIntermediate { stage: usize },
    #[error("stage {stage} has zero overlap with its predecessor")]
    DegenerateStage { stage: usize },
    #[error("stage {stage} Hamiltonian has a {degeneracy}-fold ground space")]
    NotUnique { stage: usize, degeneracy: usize },
    #[error("training diverged at step {step}")]
    Divergence {
        step: usize,
        trace: Vec<crate::inference::TrainRecord>,
    },
    #[error("eigensolver: {0}")]
    Solver(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
