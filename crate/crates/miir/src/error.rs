//! Error types shared across the crate.

use crate::id::EntityId;
use thiserror::Error;

/// Errors from parsing case files, snapshots, and network files.
#[derive(Debug, Error)]
pub enum CaseError {
    #[error("line {line}, col {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("duplicate bus id {0}")]
    DuplicateBus(i64),
    #[error("unknown bus {0}")]
    UnknownBus(i64),
    #[error("unknown branch index {0}")]
    UnknownBranch(usize),
    #[error("branch {from}-{to} has zero reactance")]
    ZeroReactance { from: i64, to: i64 },
    #[error("base MVA must be positive, got {0}")]
    BadBaseMva(f64),
    #[error("snapshot carries neither voltages nor line flows")]
    EmptySnapshot,
    #[error("invalid network file: {0}")]
    BadNetwork(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Errors from assembling a `PowerNetwork` out of raw case data.
#[derive(Debug, Error)]
pub enum BuildError {
    #[error("branch {from}-{to} has zero impedance")]
    ZeroImpedance { from: i64, to: i64 },
    #[error("snapshot lacks voltages needed to compute line flows")]
    MissingVoltages,
    #[error("no voltage for bus {0}")]
    MissingVoltage(i64),
    #[error("no flow for branch {0}")]
    MissingFlow(usize),
    #[error("network is disconnected or has no reference bus; flow system is singular")]
    SingularSystem,
    #[error("conservation violated at bus {bus}: residual {residual:.6} MW")]
    Conservation { bus: EntityId, residual: f64 },
    #[error("line {line} carries {value:.3} MW above its rating {bound:.3} MW at build time")]
    LineOverBound { line: EntityId, value: f64, bound: f64 },
    #[error("generator {gen} produces {value:.3} MW above its capacity {bound:.3} MW")]
    GenOverBound { gen: EntityId, value: f64, bound: f64 },
    #[error("dependency graph contains a cycle through {0}")]
    CyclicDependencies(EntityId),
    #[error("invalid entity {id}: {msg}")]
    BadEntity { id: EntityId, msg: String },
}

/// Errors from cascade and contingency queries.
#[derive(Debug, Error)]
pub enum QueryError {
    #[error("unknown entity {0}")]
    UnknownEntity(EntityId),
    #[error("K = {k} out of range 0..={max}")]
    KOutOfRange { k: usize, max: usize },
    #[error("enumeration budget exceeded: C({n}, {k}) > {budget}")]
    BudgetExceeded { n: usize, k: usize, budget: u64 },
    #[error("worst-case evaluation needs a solver result: {0}")]
    SolverUnavailable(String),
}

/// Errors from MIP model handling and solution files.
#[derive(Debug, Error)]
pub enum MipError {
    #[error("unknown variable name {0}")]
    UnknownVariable(String),
    #[error("line {line}: non-numeric value {value}")]
    BadValue { line: usize, value: String },
    #[error("line {line}: expected `<name> <value>`")]
    BadSolutionLine { line: usize },
    #[error("solution is missing the objective line")]
    MissingObjective,
    #[error("solution does not cover binary variables ({0} missing)")]
    IncompleteBinaries(usize),
    #[error("non-monotone failure trajectory for {0}")]
    NonMonotone(String),
}

/// Errors raised by the LP/MIP solver.
#[derive(Debug, Error)]
pub enum SolveError {
    #[error("numeric breakdown in simplex: {0}")]
    Numeric(String),
    #[error("model is infeasible")]
    Infeasible,
}

/// Errors from hypergraph parsing and the reduction.
#[derive(Debug, Error)]
pub enum ReduceError {
    #[error("p = {p} out of range 1..={max}")]
    BadP { p: usize, max: usize },
    #[error("hyperedge {0} is empty")]
    EmptyEdge(usize),
    #[error("enumeration budget exceeded: C({n}, {p}) > {budget}")]
    BudgetExceeded { n: usize, p: usize, budget: u64 },
}
