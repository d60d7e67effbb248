//! Cell-based design of planar compliant mechanisms.
//!
//! A design is a grid of unit cells drawn from a twelve-cell vocabulary. The
//! grid is assembled into a frame model, analysed with linear beam elements,
//! scored against a mechanism objective, and searched with a dueling deep
//! Q-network that places one cell per step.

// Dense kernels index several arrays per loop, and `!(x <= tol)` checks
// deliberately treat NaN as a failure.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod baseline;
pub mod cells;
pub mod env;
pub mod fea;
pub mod geom;
pub mod lattice;
pub mod mechanisms;
pub mod render;

use std::path::{Path, PathBuf};

pub use cells::{CellKind, CellParams, Facing, Reinforcement, Shape};
pub use geom::Point;
pub use lattice::{DesignGrid, FrameModel, Material};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("action index {0} is outside 0..12")]
    InvalidAction(usize),
    #[error("unknown cell code {0:?}")]
    UnknownCode(String),
    #[error("invalid cell parameters: {0}")]
    InvalidParams(String),
    #[error("{0} has no geometry to place")]
    NotPlaceable(CellKind),
    #[error("design file: {0}")]
    DesignFile(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("design region is empty")]
    EmptyDesignRegion,
    #[error("{0} design slots are still open")]
    Unresolved(usize),
    #[error("no node within tolerance of ({}, {})", .0.x, .0.y)]
    NoNodeNear(Point),
    #[error("zero-length element at ({}, {})", .0.x, .0.y)]
    ZeroLengthElement(Point),
    #[error("invalid load case: {0}")]
    InvalidLoadCase(String),
    #[error("degenerate torque couple: {0}")]
    DegenerateCouple(String),
    #[error("singular stiffness; unsupported components: {floating:?}")]
    Singular { floating: Vec<Vec<usize>> },
    #[error("residual {0:e} exceeds tolerance")]
    Residual(f64),
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("illegal step: {0}")]
    IllegalStep(String),
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().to_path_buf(), source }
    }

    /// Whether the error comes from the numerical analysis rather than input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Singular { .. } | Error::Residual(_) | Error::Diverged(_) | Error::ZeroLengthElement(_) | Error::DegenerateCouple(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
