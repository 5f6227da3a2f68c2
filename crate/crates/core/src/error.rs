use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors shared across the toolkit. Variants carry enough data to be
/// re-checked by the caller (offending index, achieved residual, best
/// candidate found).
#[derive(Debug, Clone, Error)]
pub enum Error {
    // map iteration / solving
    #[error("iterate {step} left the map domain")]
    DomainEscape { step: i64 },
    #[error("Newton inversion failed to reach residual {residual:.3e} < 1e-10")]
    InverseDivergence { residual: f64 },
    #[error("Newton did not converge after {iterations} iterations (last residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("Newton matrix is rank-deficient (condition number {cond:.3e})")]
    SingularJacobian { cond: f64 },
    #[error("multiplier of modulus {modulus} lies on the unit circle")]
    NonHyperbolic { modulus: f64 },

    // local models
    #[error("perturbation-size guard failed: diffeomorphism margin {margin:.3e} <= 0")]
    NotDiffeomorphism { margin: f64 },
    #[error("cycle regions overlap inconsistently: {0}")]
    Overlap(String),
    #[error("declared intersection marker '{name}' failed verification (residual {residual:.3e})")]
    MarkerMismatch { name: String, residual: f64 },

    // manifold geometry
    #[error("no spectral gap for the requested invariant subspace: {0}")]
    SpectralGapMissing(String),
    #[error("adaptive resampling exceeded the sample budget ({budget})")]
    MeshBlowup { budget: usize },
    #[error("no intersection within capture radius")]
    NoIntersection,
    #[error("two intersection candidates within capture radius (parameters {t0:.6} and {t1:.6})")]
    AmbiguousIntersection { t0: f64, t1: f64 },
    #[error("alignment horizon {horizon} exhausted; best angle {best_angle:.6e} at n = {best_n}")]
    HorizonExhausted {
        horizon: usize,
        best_n: usize,
        best_angle: f64,
    },
    #[error("no intrinsic tangency found along the trace curve")]
    NoTangency,
    #[error("mesh too coarse: {0}")]
    MeshTooCoarse(String),
    #[error("no tangency candidate between the supplied patches")]
    NoTangencyCandidate,

    // hopf
    #[error("radial Newton for the invariant circle diverged")]
    NewtonDivergence,
    #[error("no invariant circle for mu = {mu} <= 0")]
    NotBorn { mu: f64 },
    #[error("no unit-modulus crossing of the multiplier pair in [{lo}, {hi}]")]
    NoCrossing { lo: f64, hi: f64 },
    #[error("least-squares fit ill-conditioned (condition number {cond:.3e})")]
    IllConditioned { cond: f64 },

    // denjoy
    #[error("gap-length ratios infeasible for a C1 construction: {0}")]
    InfeasibleRatios(String),
    #[error("total gap mass {mass} >= 1")]
    MassOverflow { mass: f64 },
    #[error("circle lift is not monotone near x = {x:.6}")]
    NonMonotoneLift { x: f64 },
    #[error("rotation number {value} failed the irrationality certificate: {reason}")]
    NotIrrational { value: f64, reason: String },

    // certifier
    #[error("tube radius {delta:.6e} too large; maximal admissible delta is {max_delta:.6e}")]
    DeltaTooLarge { delta: f64, max_delta: f64 },
    #[error("horizon {horizon} beyond built table (I_max = {i_max})")]
    HorizonBeyondTable { horizon: usize, i_max: usize },

    // generic contract violations
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
