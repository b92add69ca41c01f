use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("flux is not uniformly convex on [0,1]: min f'' = {min_curvature:e}")]
    NonConvexFlux { min_curvature: f64 },
    #[error("invalid flux specification: {0}")]
    InvalidFlux(String),
    #[error("states {0} and {1} are equal; no front between them")]
    EqualStates(f64, f64),
    #[error("speed {sigma} outside the characteristic speed range [{lo}, {hi}]")]
    SpeedOutOfRange { sigma: f64, lo: f64, hi: f64 },
    #[error("level {v} is not strictly between the shock states {u_left} and {u_right}")]
    LevelOutsideShock { v: f64, u_left: f64, u_right: f64 },
    #[error("entropy is not convex (derivative decreases near u = {0})")]
    NonConvexEntropy(f64),
    #[error("entropy anchored at {found} cannot be paired with a {side} ensemble")]
    AnchorMismatch { side: &'static str, found: &'static str },
    #[error("invalid initial data: {0}")]
    InvalidInitialData(String),
    #[error("invalid ensemble grid: {0}")]
    InvalidGrid(String),
    #[error("curve {id} starting at ({x0}, {v0}) is not inside the represented region")]
    StartOutsideRegion { id: usize, x0: f64, v0: f64 },
    #[error("curve evolution did not terminate (curve {0})")]
    RunawayCurve(usize),
    #[error("invalid surface: {0}")]
    InvalidSurface(String),
    #[error("mollifier width {delta} too large: ramp leaves the test-function support")]
    RampTooWide { delta: f64 },
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
