use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("negative rate: `{field}` = {value}")]
    NegativeRate { field: &'static str, value: f64 },
    #[error("scale unit Gamma10 must be strictly positive, got {0}")]
    ZeroScaleUnit(f64),
    #[error("non-finite parameter `{0}`")]
    NonFinite(&'static str),
    #[error("invalid unit context: {0}")]
    InvalidUnits(&'static str),
    #[error("invalid physical preset: {0}")]
    InvalidPreset(&'static str),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("negative probe Rabi frequency {0}")]
    NegativeRabi(f64),

    #[error("susceptibility denominator vanishes at delta = {delta}")]
    DegenerateDenominator { delta: f64 },
    #[error("dispersion approximation undefined without tunneling")]
    ZeroTunneling,
    #[error("no transparency window without tunneling")]
    NoTunneling,
    #[error("no transparency window found within +/-{half_width} of omega12")]
    WindowNotFound { half_width: f64 },
    #[error("empty grid")]
    EmptyGrid,
    #[error("grid not strictly increasing at index {index}")]
    StrictOrderViolated { index: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(&'static str),

    #[error("time step {dt} exceeds stability bound {bound}")]
    StepTooLarge { dt: f64, bound: f64 },
    #[error("invalid evolution config: {0}")]
    InvalidEvolution(&'static str),
    #[error("steady-state system is singular (pivot {pivot:e})")]
    SingularSystem { pivot: f64 },

    #[error("invalid cavity: {0}")]
    InvalidCavity(&'static str),
    #[error("pulling coefficient {0} at or below the pole xi = -1")]
    PoleAtMinusOne(f64),
    #[error("negative absorption {0}: printed-convention chi'' passed where canonical is required")]
    ConventionViolation(f64),
    #[error("round-trip transmission kappa must lie in (0, 1], got {0}")]
    ZeroKappa(f64),
    #[error("reference dispersion is zero")]
    ZeroDispersion,
    #[error("spectrum peak sits on the grid boundary (index {index})")]
    PeakAtBoundary { index: usize },
    #[error("spectrum does not fall below half maximum on the {side} side")]
    NoHalfCrossing { side: &'static str },

    #[error("cell {index}: {source}")]
    CellFailed {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}
