use thiserror::Error;

/// Errors shared by all modules of the workbench.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point {x} is outside the declared domain neighbourhood")]
    OutOfDomain { x: f64 },

    #[error("orbit of {x} hits a critical point exactly at step {step}")]
    OrbitHitsCritical { x: f64, step: usize },

    #[error("preimage tree of {z} is empty at depth {depth}")]
    EmptyTree { z: f64, depth: u32 },

    #[error("derivative-zero branch met with t = {t} < 0; tree sum diverges")]
    DivergentNegativeT { t: f64 },

    #[error("cylinder budget exceeded: {requested} cylinders > cap {cap}")]
    CylinderBudgetExceeded { requested: u64, cap: u64 },

    #[error("partition is not Markov: endpoint residual {residual:e} at cylinder {cylinder}")]
    NotMarkov { cylinder: usize, residual: f64 },

    #[error("sign pattern on the grid is not monotone at the sampled resolution")]
    GridTooCoarse,

    #[error("pressure curve has no zero in the sampled range")]
    NoZeroInRange,

    #[error("nice-set verification failed: residual {residual:e} within horizon {horizon}")]
    VerificationFailed { residual: f64, horizon: u32 },

    #[error("no periodic orbit suitable as a nice-set anchor was found")]
    NoSuitableOrbit,

    #[error("branch budget exceeded while enumerating the induced system ({nodes} nodes)")]
    BranchBudgetExceeded { nodes: u64 },

    #[error("induced pressure diverges at (t, p) = ({t}, {p})")]
    Divergent { t: f64, p: f64 },

    #[error("no sign change of the induced pressure on the search range [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("running Patterson-Sullivan mass overflowed; lambda = {lambda} too small")]
    PsDivergent { lambda: f64 },

    #[error("test interval [{lo}, {hi}] is not inside a single lap or touches the singular set")]
    IntervalNotInjective { lo: f64, hi: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
