//! Turns resolved programs into watertight triangle meshes: curve
//! tessellation, profile triangulation, prism extrusion and BSP booleans.

mod bsp;
mod build;
mod export;
mod extrude;
pub(crate) mod mesh;
mod tessellate;
mod triangulate;

pub use bsp::{csg, BooleanOp};
pub use build::{build_program, build_program_with, BuildError, BuildLimits, BuildStep, BuildTrace};
pub use export::{export_obj, export_stl_ascii, export_stl_binary, import_stl};
pub use extrude::{extrude, extrude_sketch};
pub use mesh::{classify_grid, mesh_metrics, MeshMetrics, SolidMesh};
pub use tessellate::{segments_properly_intersect, tessellate_curve, tessellate_loop, ChordTol, Polyline2};
pub use triangulate::{triangulate_profile, triangulate_rings, triangulated_area, RegionTriangles};

use thiserror::Error;

use crate::model::ModelError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("chord tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("degenerate curve: {0}")]
    DegenerateCurve(String),
    #[error("triangulation failed: {0}")]
    TriangulationFailure(String),
    #[error("extrusion extent {0:.3e} is degenerate")]
    DegenerateExtent(f64),
    #[error("boolean failed: {0}")]
    BooleanFailure(String),
    #[error("the body is empty after extrusion {step}")]
    EmptyResult { step: usize },
    #[error("program has no extrusion")]
    NoExtrusion,
    #[error("{0}")]
    Model(#[from] ModelError),
    #[error("invalid program: {0}")]
    InvalidProgram(String),
    #[error("deadline exceeded")]
    Timeout,
    #[error("step budget of {0} exhausted")]
    StepBudget(usize),
}
