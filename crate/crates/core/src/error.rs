use num_complex::Complex64;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("point {point} lies outside the disk of radius {radius}")]
    Domain { point: Complex64, radius: f64 },

    #[error("curvature eigenvalue {value} at {point} is below the floor {floor}")]
    DegenerateCurvature {
        point: Complex64,
        value: f64,
        floor: f64,
    },

    #[error("invalid weight model: {0}")]
    InvalidModel(String),

    #[error("invalid test form: {0}")]
    InvalidForm(String),

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("Gram matrix is not positive definite: leading minor {minor} has pivot {pivot:e}")]
    IllConditioned { minor: usize, pivot: f64 },

    #[error("required degree exceeds the hard cap {cap} (n = {n}, radius = {radius})")]
    DegreeCap { cap: usize, n: u32, radius: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("n = {n} does not satisfy the asymptotic precondition; the smallest admissible n is {minimal_n}")]
    InsufficientN { n: u32, minimal_n: u32 },

    #[error("section is identically zero")]
    DegenerateSection,

    #[error("root finder stopped after {iterations} iterations with {unconverged} unconverged roots (worst backward error {worst:e})")]
    RootFinder {
        iterations: usize,
        unconverged: usize,
        worst: f64,
    },

    #[error("insufficient data: {got} samples, at least {need} required")]
    InsufficientData { got: usize, need: usize },

    #[error("degenerate variance {variance:e} (mean {mean:e})")]
    DegenerateVariance { variance: f64, mean: f64 },

    #[error("length mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
