use thiserror::Error;

/// Unified error type for the whole pipeline.
///
/// `EmptyResult` is special: it means the pipeline ran to completion but no
/// candidate survived the filter chain. The CLI maps it to exit code 2, every
/// other variant to exit code 1.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("bad parameters: {0}")]
    BadParams(String),

    #[error("interpolation system is singular: {0}")]
    SingularSystem(String),

    #[error("point count {n} exceeds interpolation cap {cap}; subsample first")]
    TooManyPoints { n: usize, cap: usize },

    #[error("no voxel is labeled GRASPING; offset radius {offset} and resolution {resolution} leave no free shell around the object")]
    EmptyGraspingSpace { offset: f64, resolution: usize },

    #[error("grid contains no OBJECT voxels")]
    NoObjectVoxels,

    #[error("base voxel {0} is not in grasping space")]
    BaseNotInGraspingSpace(usize),

    #[error("degenerate loop at critical voxel {voxel}: {msg}")]
    DegenerateLoop { voxel: usize, msg: String },

    #[error("loop collapsed during relaxation: length {len:.6e} below floor {floor:.6e}")]
    CollapsedLoop { len: f64, floor: f64 },

    #[error("loop vertices are collinear; no plane fit")]
    CollinearLoop,

    #[error("no loop vertex clears the minimum opening angle {min_angle:.3} rad")]
    NoValidOrigin { min_angle: f64 },

    #[error("no base points left after curvature filtering; set curvature_filter = false for convex shapes")]
    NoBasePoints,

    #[error("no caging loop survived; last candidates were rejected by the {stage} stage")]
    EmptyResult { stage: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// CLI exit code mapping.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::EmptyResult { .. } => 2,
            _ => 1,
        }
    }
}
