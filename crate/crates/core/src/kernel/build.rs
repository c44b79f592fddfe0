use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use super::bsp::{csg, BooleanOp};
use super::extrude::extrude_sketch;
use super::mesh::{mesh_metrics, MeshMetrics, SolidMesh};
use super::KernelError;
use crate::model::{CadProgram, Operation, Tolerances};

/// Cooperative limits checked between build steps.
#[derive(Clone, Copy, Debug, Default)]
pub struct BuildLimits {
    pub deadline: Option<Instant>,
    pub max_steps: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BuildStep {
    pub extrusion_index: usize,
    pub operation: Operation,
    pub tool: MeshMetrics,
    pub scene: MeshMetrics,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct BuildTrace {
    pub steps: Vec<BuildStep>,
    pub warnings: Vec<String>,
}

/// Failure while building, tagged with the extrusion that caused it.
#[derive(Clone, Debug, Error, PartialEq)]
#[error("{}{error}", step.map(|s| format!("extrusion {s}: ")).unwrap_or_default())]
pub struct BuildError {
    pub step: Option<usize>,
    pub error: KernelError,
}

impl BuildError {
    fn at(step: usize, error: impl Into<KernelError>) -> Self {
        Self { step: Some(step), error: error.into() }
    }
}

pub fn build_program(program: &CadProgram, tol: &Tolerances) -> Result<(SolidMesh, BuildTrace), BuildError> {
    build_program_with(program, tol, BuildLimits::default())
}

/// Validates the program and folds its extrusions into one solid.
pub fn build_program_with(program: &CadProgram, tol: &Tolerances, limits: BuildLimits) -> Result<(SolidMesh, BuildTrace), BuildError> {
    let report = program.validate(tol);
    if let Some(issue) = report.issues.first() {
        return Err(BuildError { step: None, error: KernelError::InvalidProgram(issue.to_string()) });
    }
    let mut trace = BuildTrace { steps: Vec::new(), warnings: report.warnings };
    let extrusions: Vec<_> = program.extrusions().copied().collect();
    if extrusions.is_empty() {
        return Err(BuildError { step: None, error: KernelError::NoExtrusion });
    }
    let mut scene = SolidMesh::default();
    for (k, e) in extrusions.iter().enumerate() {
        if limits.deadline.is_some_and(|d| Instant::now() >= d) {
            return Err(BuildError::at(k, KernelError::Timeout));
        }
        if limits.max_steps.is_some_and(|m| k >= m) {
            return Err(BuildError::at(k, KernelError::StepBudget(limits.max_steps.unwrap_or(0))));
        }
        let sketch = program.resolve_sketch(e.sketch, tol.chord).map_err(|err| BuildError::at(k, err))?;
        let tool = extrude_sketch(&sketch, e, tol.chord).map_err(|err| BuildError::at(k, err))?;
        let op = match e.operation {
            Operation::NewBody | Operation::Join => BooleanOp::Union,
            Operation::Cut => BooleanOp::Difference,
            Operation::Intersect => BooleanOp::Intersection,
        };
        scene = if scene.is_empty() && op == BooleanOp::Union {
            tool.clone()
        } else {
            csg(&scene, &tool, op).map_err(|err| BuildError::at(k, err))?
        };
        if scene.is_empty() {
            return Err(BuildError::at(k, KernelError::EmptyResult { step: k }));
        }
        trace.steps.push(BuildStep { extrusion_index: k, operation: e.operation, tool: mesh_metrics(&tool), scene: mesh_metrics(&scene) });
    }
    Ok((scene, trace))
}
