//! In-memory representation of CAD programs and the structural rules shared
//! by every other module: loop closure, profile nesting and the
//! loop-extrusion pairs a program is scored by.

mod curve;
mod plane;
mod profile;
mod program;
mod vector;

pub use curve::{circumcircle, ArcGeometry, Curve, CurveKind, PointKind};
pub use plane::SketchPlane;
pub use profile::{classify_profile, validate_loop, Loop, LoopReport, Profile};
pub use program::{
    CadProgram, Command, Constraint, CurveId, ExtentType, Extrusion, LoopId, Operation, PairEntry, PairView,
    PlaneDef, PlaneId, PointRef, ProfileId, ProgramBuilder, Sketch, SketchDef, SketchId, Statement, Tolerances,
    ValidationIssue, ValidationReport,
};
pub use vector::{Vec2, Vec3};

use thiserror::Error;

/// Default distance under which consecutive curve endpoints count as joined.
pub const EPS_JOIN: f64 = 1e-6;
/// Default length under which a curve or extent counts as degenerate.
pub const EPS_DEGENERATE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("degenerate sketch plane axes: {0}")]
    DegenerateAxes(String),
    #[error("loops {0} and {1} of the profile cross each other")]
    CrossingLoops(usize, usize),
    #[error("loop {index} is not closed (largest gap {gap:.3e})")]
    OpenLoop { index: usize, gap: f64 },
    #[error("{kind} {index} is referenced but not defined")]
    DanglingReference { kind: &'static str, index: usize },
    #[error("curve {0} is degenerate")]
    DegenerateCurve(usize),
    #[error("invalid program: {0}")]
    Invalid(String),
}
