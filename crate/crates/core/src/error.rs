use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CurveError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("invalid curve: {0}")]
    Validation(String),
    #[error("result needs {needed} breakpoints, limit is {limit}")]
    TooManyBreakpoints { needed: usize, limit: usize },
    #[error("parse error: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalcError {
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("no finite T exists: the service curve never catches up with the envelope")]
    NoFiniteHorizon,
    #[error("backlog assumption is unsatisfiable: S(l) - A*(l) = {slack}")]
    NegativeSlack { slack: f64 },
    #[error("objective infeasible on the whole grid: {0}")]
    Infeasible(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TraceError {
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error("causality violation at t={t}: departures {departures} exceed arrivals {arrivals}")]
    Causality { t: f64, arrivals: f64, departures: f64 },
    #[error("invalid argument: {0}")]
    Argument(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Calc(#[from] CalcError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("invalid simulation setup: {0}")]
    Setup(String),
}
