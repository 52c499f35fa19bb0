use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid rational parameter {m}/{n}: {reason}")]
    InvalidTheta { m: i64, n: i64, reason: &'static str },

    #[error("elements live over different deformation parameters ({left} vs {right})")]
    ThetaMismatch { left: String, right: String },

    #[error("operation requires a rational deformation parameter")]
    IrrationalTheta,

    #[error("invalid twist (q={q}, r={r}): {reason}")]
    InvalidTwist { q: i64, r: i64, reason: &'static str },

    #[error("degenerate representation: gcd(N={n}, q={q}) = {gcd} != 1")]
    DegenerateRepresentation { n: i64, q: i64, gcd: i64 },

    #[error("integer overflow in {0}")]
    Overflow(&'static str),

    #[error("gap index {g} out of range 0..={max} for N={n}")]
    GapIndexOutOfRange { n: i64, g: i64, max: i64 },

    #[error("label d={d} outside 0..={n}")]
    LabelOutOfRange { n: i64, d: i64 },

    #[error("no solution of N t + M0 s = q d with 2|s| < N (N={n}, M0={m0}, q={q}, d={d})")]
    NoConstrainedSolution { n: i64, m0: i64, q: i64, d: i64 },

    #[error("element is not self-adjoint (defect {defect:.3e})")]
    NotSelfAdjoint { defect: f64 },

    #[error("fermi level {fermi} lies within {distance:.3e} of the spectrum")]
    GapViolation { fermi: f64, distance: f64 },

    #[error("link overlap {magnitude:.3e} below threshold at grid point ({i}, {j}); refine the grid")]
    GridTooCoarse { i: usize, j: usize, magnitude: f64 },

    #[error("lattice Chern sum {raw} is not within {threshold} of an integer")]
    NotQuantized { raw: f64, threshold: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("pullback multipliers must be nonzero (got {n1}, {n2})")]
    ZeroMultiplier { n1: i64, n2: i64 },

    #[error("wrong field kind: expected {expected}, got {found}")]
    WrongKind { expected: &'static str, found: &'static str },
}

pub type Result<T> = std::result::Result<T, Error>;
