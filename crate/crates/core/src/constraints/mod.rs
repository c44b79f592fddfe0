//! Sketch constraints as residual equations: Jacobians, degrees-of-freedom
//! analysis and a damped least-squares solver.

mod dual;
mod residual;
mod solver;

use std::ops::Range;

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::model::{CadProgram, Constraint, Curve, CurveKind, PointRef, Vec2, EPS_DEGENERATE};
use dual::{Dual, LOCAL};
use residual::{constraint_rows, tangent_branches, CurveParams};

pub use residual::TangentBranch;
pub use solver::{solve_system, SolverOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstraintError {
    #[error("constraint {index}: curve {curve} does not exist")]
    MissingCurve { index: usize, curve: usize },
    #[error("constraint {index}: {detail}")]
    WrongCurveType { index: usize, detail: String },
    #[error("constraint {index}: make_tangent between two lines is undefined")]
    UnsupportedPair { index: usize },
    #[error("solver did not converge after {iterations} iterations (best residual {best_residual:.3e})")]
    NonConvergence { best_residual: f64, iterations: usize },
}

/// Flat curve parameters: lines 4, arcs 6, circles 3, in curve order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParamVector {
    values: Vec<f64>,
    offsets: Vec<usize>,
}

fn curve_params(c: &Curve) -> Vec<f64> {
    match *c {
        Curve::Line { start, end } => vec![start.u, start.v, end.u, end.v],
        Curve::Arc { start, end, mid } => vec![start.u, start.v, end.u, end.v, mid.u, mid.v],
        Curve::Circle { center, radius } => vec![center.u, center.v, radius],
    }
}

fn curve_from(p: &[f64]) -> Curve {
    let v = |i: usize| Vec2::new(p[i], p[i + 1]);
    match p.len() {
        4 => Curve::line(v(0), v(2)),
        6 => Curve::arc(v(0), v(2), v(4)),
        _ => Curve::circle(v(0), p[2]),
    }
}

impl ParamVector {
    pub fn from_curves(curves: &[Curve]) -> Self {
        let mut values = Vec::new();
        let mut offsets = vec![0];
        for c in curves {
            values.extend(curve_params(c));
            offsets.push(values.len());
        }
        Self { values, offsets }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn curve_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Parameter indices of one curve.
    pub fn range(&self, curve: usize) -> Range<usize> {
        self.offsets[curve]..self.offsets[curve + 1]
    }

    /// Same layout with different values.
    pub fn with_values(&self, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.values.len());
        Self { values, offsets: self.offsets.clone() }
    }

    pub fn to_curves(&self) -> Vec<Curve> {
        (0..self.curve_count()).map(|i| curve_from(&self.values[self.range(i)])).collect()
    }
}

/// Constraints bound to a fixed curve set, ready for evaluation.
#[derive(Clone, Debug)]
pub struct ConstraintSystem {
    constraints: Vec<Constraint>,
    branches: Vec<TangentBranch>,
    row_offsets: Vec<usize>,
    params: ParamVector,
}

fn type_check(index: usize, c: &Constraint, curves: &[Curve]) -> Result<(), ConstraintError> {
    for id in c.curves() {
        if id.0 >= curves.len() {
            return Err(ConstraintError::MissingCurve { index, curve: id.0 });
        }
    }
    let kind = |id: usize| curves[id].kind();
    let wrong = |detail: String| Err(ConstraintError::WrongCurveType { index, detail });
    for l in c.required_lines() {
        if kind(l.0) != CurveKind::Line {
            return wrong(format!("{} needs a line, curve {} is a {}", c.command_name(), l.0, kind(l.0).name()));
        }
    }
    match c {
        Constraint::Tangent { a, b } if kind(a.0) == CurveKind::Line && kind(b.0) == CurveKind::Line => {
            Err(ConstraintError::UnsupportedPair { index })
        }
        Constraint::Mirror { a, b, .. } if kind(a.0) != kind(b.0) => wrong(format!(
            "make_mirror needs curves of the same type, got {} and {}",
            kind(a.0).name(),
            kind(b.0).name()
        )),
        Constraint::Coincident { a, b } => {
            for p in [a, b] {
                if let PointRef::Curve { curve, point } = p {
                    if !kind(curve.0).has_point(*point) {
                        return wrong(format!("a {} has no {} point", kind(curve.0).name(), point.name()));
                    }
                }
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

impl ConstraintSystem {
    /// Checks every constraint against `curves` and fixes tangency branches
    /// at the given configuration.
    pub fn new(curves: &[Curve], constraints: &[Constraint]) -> Result<Self, ConstraintError> {
        let params = ParamVector::from_curves(curves);
        let mut branches = Vec::with_capacity(constraints.len());
        for (i, c) in constraints.iter().enumerate() {
            type_check(i, c, curves)?;
            let branch = match c {
                Constraint::Tangent { a, b } => {
                    let pa = CurveParams::from_slice(&params.values[params.range(a.0)]);
                    let pb = CurveParams::from_slice(&params.values[params.range(b.0)]);
                    match tangent_branches(&pa, &pb) {
                        Some((ext, int)) if int.abs() < ext.abs() => TangentBranch::Internal,
                        _ => TangentBranch::External,
                    }
                }
                _ => TangentBranch::External,
            };
            branches.push(branch);
        }
        let mut sys = Self { constraints: constraints.to_vec(), branches, row_offsets: vec![0], params };
        let mut rows = Vec::new();
        for k in 0..sys.constraints.len() {
            sys.rows_f64(k, &sys.params.values, &mut rows);
            sys.row_offsets.push(rows.len());
        }
        Ok(sys)
    }

    /// All curves and constraints of a program as one system.
    pub fn from_program(program: &CadProgram) -> Result<Self, ConstraintError> {
        let curves: Vec<Curve> = program.curves().copied().collect();
        let constraints: Vec<Constraint> = program.constraints().copied().collect();
        Self::new(&curves, &constraints)
    }

    pub fn params(&self) -> &ParamVector {
        &self.params
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn branches(&self) -> &[TangentBranch] {
        &self.branches
    }

    pub fn residual_count(&self) -> usize {
        *self.row_offsets.last().unwrap()
    }

    fn rows_f64(&self, k: usize, x: &[f64], out: &mut Vec<f64>) {
        let get = |id: usize| CurveParams::from_slice(&x[self.params.range(id)]);
        constraint_rows(&self.constraints[k], self.branches[k], &get, out);
    }

    pub fn residuals(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.residual_count());
        for k in 0..self.constraints.len() {
            self.rows_f64(k, x, &mut out);
        }
        out
    }

    /// Exact Jacobian by forward-mode differentiation, one constraint at a time.
    pub fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(self.residual_count(), x.len());
        let mut rows: Vec<Dual> = Vec::new();
        for (k, c) in self.constraints.iter().enumerate() {
            let mut ids: Vec<usize> = c.curves().into_iter().map(|id| id.0).collect();
            ids.sort_unstable();
            ids.dedup();
            let mut global = Vec::new();
            let mut local: Vec<Vec<Dual>> = Vec::with_capacity(ids.len());
            for &id in &ids {
                let r = self.params.range(id);
                local.push(r.clone().map(|g| {
                    global.push(g);
                    Dual::var(x[g], global.len() - 1)
                }).collect());
            }
            debug_assert!(global.len() <= LOCAL);
            let get = |id: usize| {
                let pos = ids.binary_search(&id).expect("constraint curve");
                CurveParams::from_slice(&local[pos])
            };
            rows.clear();
            constraint_rows(c, self.branches[k], &get, &mut rows);
            for (r, d) in rows.iter().enumerate() {
                for (l, &g) in global.iter().enumerate() {
                    j[(self.row_offsets[k] + r, g)] = d.d[l];
                }
            }
        }
        j
    }

    /// Central-difference Jacobian with step `h`.
    pub fn numeric_jacobian(&self, x: &[f64], h: f64) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(self.residual_count(), x.len());
        let mut xp = x.to_vec();
        for col in 0..x.len() {
            xp[col] = x[col] + h;
            let fp = self.residuals(&xp);
            xp[col] = x[col] - h;
            let fm = self.residuals(&xp);
            xp[col] = x[col];
            for row in 0..fp.len() {
                j[(row, col)] = (fp[row] - fm[row]) / (2.0 * h);
            }
        }
        j
    }
}

/// Numerical rank with a threshold relative to the largest singular value.
pub fn matrix_rank(j: &DMatrix<f64>) -> usize {
    if j.nrows() == 0 || j.ncols() == 0 {
        return 0;
    }
    let sv = j.clone().svd(false, false).singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > smax * 1e-9).count()
}

pub fn build_residuals(curves: &[Curve], constraints: &[Constraint], params: &ParamVector) -> Result<Vec<f64>, ConstraintError> {
    Ok(ConstraintSystem::new(curves, constraints)?.residuals(params.values()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DofStatus {
    UnderConstrained,
    FullyDefined,
    OverConstrainedConsistent,
    OverConstrainedInconsistent,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DofReport {
    pub n_params: usize,
    pub n_residuals: usize,
    pub jacobian_rank: usize,
    pub dof: usize,
    pub status: DofStatus,
    /// Residual norm reached by the consistency solve.
    pub residual_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveResult {
    pub params: ParamVector,
    pub curves: Vec<Curve>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Rank analysis plus a consistency solve.
///
/// Systems that only converge by collapsing a curve (a line that is both
/// horizontal and vertical) are reported as inconsistent.
pub fn analyze_dof(curves: &[Curve], constraints: &[Constraint]) -> Result<DofReport, ConstraintError> {
    let sys = ConstraintSystem::new(curves, constraints)?;
    let solved = solve_system(&sys, &SolverOptions::default());
    let at = if solved.converged { solved.params.values() } else { sys.params.values() };
    let rank = matrix_rank(&sys.jacobian(at));
    let n_params = sys.params.len();
    let n_residuals = sys.residual_count();
    let collapsed = solved
        .curves
        .iter()
        .zip(curves)
        .any(|(after, before)| after.is_degenerate(EPS_DEGENERATE) && !before.is_degenerate(EPS_DEGENERATE));
    let dof = n_params - rank;
    let status = if !solved.converged || collapsed {
        DofStatus::OverConstrainedInconsistent
    } else if rank < n_residuals {
        DofStatus::OverConstrainedConsistent
    } else if dof == 0 {
        DofStatus::FullyDefined
    } else {
        DofStatus::UnderConstrained
    };
    Ok(DofReport { n_params, n_residuals, jacobian_rank: rank, dof, status, residual_norm: solved.residual_norm })
}

/// Solves from the curves' current coordinates.
pub fn solve_constraints(curves: &[Curve], constraints: &[Constraint]) -> Result<SolveResult, ConstraintError> {
    let sys = ConstraintSystem::new(curves, constraints)?;
    let r = solve_system(&sys, &SolverOptions::default());
    if r.converged {
        Ok(r)
    } else {
        Err(ConstraintError::NonConvergence { best_residual: r.residual_norm, iterations: r.iterations })
    }
}

/// Solves a program's constraints and returns a copy with the solved curves.
pub fn solve_program(program: &CadProgram) -> Result<(CadProgram, SolveResult), ConstraintError> {
    let curves: Vec<Curve> = program.curves().copied().collect();
    let constraints: Vec<Constraint> = program.constraints().copied().collect();
    let r = solve_constraints(&curves, &constraints)?;
    let mut out = program.clone();
    for (dst, src) in out.curves_mut().zip(&r.curves) {
        *dst = *src;
    }
    Ok((out, r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CurveId, PointKind};

    fn v(u: f64, w: f64) -> Vec2 {
        Vec2::new(u, w)
    }

    fn pt(curve: usize, point: PointKind) -> PointRef {
        PointRef::Curve { curve: CurveId(curve), point }
    }

    #[test]
    fn param_layout() {
        let curves = [Curve::line(v(0.0, 0.0), v(1.0, 0.0)), Curve::circle(v(1.0, 1.0), 2.0), Curve::arc(v(1.0, 0.0), v(-1.0, 0.0), v(0.0, 1.0))];
        let p = ParamVector::from_curves(&curves);
        assert_eq!(p.len(), 13);
        assert_eq!(p.range(1), 4..7);
        assert_eq!(p.to_curves(), curves);
    }

    #[test]
    fn tangent_two_lines_rejected() {
        let curves = [Curve::line(v(0.0, 0.0), v(1.0, 0.0)), Curve::line(v(0.0, 1.0), v(1.0, 1.0))];
        let e = ConstraintSystem::new(&curves, &[Constraint::Tangent { a: CurveId(0), b: CurveId(1) }]).unwrap_err();
        assert_eq!(e, ConstraintError::UnsupportedPair { index: 0 });
    }

    #[test]
    fn internal_branch_kept_when_nearer() {
        let curves = [Curve::circle(v(0.0, 0.0), 3.0), Curve::circle(v(1.1, 0.0), 1.0)];
        let sys = ConstraintSystem::new(&curves, &[Constraint::Tangent { a: CurveId(0), b: CurveId(1) }]).unwrap();
        assert_eq!(sys.branches(), &[TangentBranch::Internal]);
        let r = solve_constraints(&curves, sys.constraints()).unwrap();
        let (Curve::Circle { center: c0, radius: r0 }, Curve::Circle { center: c1, radius: r1 }) = (r.curves[0], r.curves[1]) else {
            panic!()
        };
        assert!((c0.distance(c1) - (r0 - r1).abs()).abs() < 1e-9);
        assert!((c0.distance(c1) - (r0 + r1)).abs() > 0.1);
    }

    #[test]
    fn horizontal_and_vertical_line_is_inconsistent() {
        let curves = [Curve::line(v(0.0, 0.0), v(1.0, 0.5))];
        let cs = [Constraint::Horizontal { line: CurveId(0) }, Constraint::Vertical { line: CurveId(0) }];
        assert_eq!(analyze_dof(&curves, &cs).unwrap().status, DofStatus::OverConstrainedInconsistent);
    }

    #[test]
    fn line_horizontal_fixed_length() {
        let curves = [Curve::line(v(0.0, 0.0), v(1.0, 0.3))];
        let cs = [Constraint::Horizontal { line: CurveId(0) }, Constraint::FixSize { curve: CurveId(0), size: 1.0 }];
        let r = analyze_dof(&curves, &cs).unwrap();
        assert_eq!((r.dof, r.status), (2, DofStatus::UnderConstrained));
    }

    #[test]
    fn satisfied_system_does_not_move() {
        let curves = [Curve::line(v(0.0, 0.0), v(1.0, 0.0))];
        let r = solve_constraints(&curves, &[Constraint::Horizontal { line: CurveId(0) }]).unwrap();
        assert!(r.iterations <= 1);
        assert_eq!(r.curves, curves);
    }

    #[test]
    fn anchored_coincidence() {
        let curves = [Curve::line(v(0.1, 0.2), v(1.0, 0.0))];
        let cs = [Constraint::Coincident { a: pt(0, PointKind::Start), b: PointRef::Fixed(v(0.0, 0.0)) }];
        let r = solve_constraints(&curves, &cs).unwrap();
        assert!(r.curves[0].start().norm() < 1e-10);
    }

    #[test]
    fn jacobians_agree_on_mixed_system() {
        let curves = [
            Curve::line(v(0.0, 0.0), v(1.0, 0.2)),
            Curve::line(v(0.1, 1.0), v(1.3, 1.4)),
            Curve::arc(v(2.0, 0.0), v(0.0, 2.0), v(1.5, 1.6)),
            Curve::circle(v(3.0, 3.0), 0.7),
            Curve::arc(v(-2.0, 0.1), v(0.1, -2.0), v(-1.4, -1.5)),
        ];
        let cs = [
            Constraint::Angle { a: CurveId(0), b: CurveId(1), angle: 0.3, clockwise: true },
            Constraint::Tangent { a: CurveId(2), b: CurveId(3) },
            Constraint::Tangent { a: CurveId(1), b: CurveId(2) },
            Constraint::Mirror { a: CurveId(2), b: CurveId(4), axis: CurveId(0) },
            Constraint::FixSize { curve: CurveId(2), size: 2.0 },
            Constraint::Coincident { a: pt(2, PointKind::Mid), b: pt(3, PointKind::Center) },
        ];
        let sys = ConstraintSystem::new(&curves, &cs).unwrap();
        let x = sys.params().values().to_vec();
        let d = sys.jacobian(&x) - sys.numeric_jacobian(&x, 1e-6);
        assert!(d.amax() <= 1e-5, "{}", d.amax());
    }
}
