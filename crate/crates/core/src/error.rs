use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// The planner could not connect start and goal, or one of them is blocked.
    #[error("infeasible query: {0}")]
    InfeasibleQuery(String),
    /// An obstacle point coincides with the ellipsoid center.
    #[error("seed in obstacle: obstacle point at ellipsoid center")]
    SeedInObstacle,
    /// An obstacle point lies strictly inside the seed ellipsoid.
    #[error("seed ellipsoid in collision with obstacle point {0}")]
    SeedInCollision(String),
    #[error("degenerate polytope: no strictly interior point")]
    DegeneratePolytope,
    #[error("singular system: {0}")]
    Singular(&'static str),
    #[error("inconsistent sizes: {0}")]
    InconsistentSizes(String),
    #[error("point outside map extent")]
    OutOfBounds,
    #[error("non-finite objective or gradient at the initial point")]
    NonFinite,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
