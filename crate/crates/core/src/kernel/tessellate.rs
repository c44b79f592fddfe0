use std::f64::consts::TAU;

use super::KernelError;
use crate::model::{Curve, Loop, Vec2, EPS_DEGENERATE};

/// Maximum allowed chord sagitta, either absolute or relative to the
/// profile's bounding-box diagonal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ChordTol {
    Absolute(f64),
    Relative(f64),
}

impl Default for ChordTol {
    fn default() -> Self {
        ChordTol::Relative(0.005)
    }
}

impl ChordTol {
    /// Absolute tolerance for a profile of the given diagonal.
    pub fn resolve(self, diagonal: f64) -> f64 {
        match self {
            ChordTol::Absolute(t) => t,
            ChordTol::Relative(f) => {
                let d = if diagonal > 0.0 && diagonal.is_finite() { diagonal } else { 1.0 };
                f * d
            }
        }
    }
}

/// Ordered points; closed polylines do not repeat the first point.
#[derive(Clone, Debug, PartialEq)]
pub struct Polyline2 {
    pub points: Vec<Vec2>,
    pub closed: bool,
}

impl Polyline2 {
    /// Shoelace area, positive for counter-clockwise rings.
    pub fn signed_area(&self) -> f64 {
        signed_area(&self.points)
    }
}

pub(crate) fn signed_area(p: &[Vec2]) -> f64 {
    let n = p.len();
    (0..n).map(|i| p[i].cross(p[(i + 1) % n])).sum::<f64>() * 0.5
}

/// Largest angular step whose chord sagitta stays within half of `tol`.
///
/// Targeting half the tolerance keeps the polygon-area deficit of a
/// default-tolerance circle under 1 %.
fn max_step(radius: f64, tol: f64) -> f64 {
    let ratio = (0.5 * tol / radius).min(1.0);
    2.0 * (1.0 - ratio).acos()
}

fn steps_for(sweep: f64, radius: f64, tol: f64) -> usize {
    let n = (sweep.abs() / max_step(radius, tol)).ceil();
    if n.is_finite() {
        (n as usize).max(1)
    } else {
        1
    }
}

/// Approximates a curve by a polyline whose chords deviate from the exact
/// curve by at most `chord_tol`.
///
/// Circles get at least 8 segments and start at angle 0; arcs get at least
/// 4 and hit their authored mid point exactly at the middle vertex.
pub fn tessellate_curve(curve: &Curve, chord_tol: f64) -> Result<Polyline2, KernelError> {
    if !(chord_tol > 0.0) {
        return Err(KernelError::InvalidTolerance(chord_tol));
    }
    if curve.is_degenerate(EPS_DEGENERATE) {
        return Err(KernelError::DegenerateCurve(format!("{curve:?}")));
    }
    match *curve {
        Curve::Line { start, end } => Ok(Polyline2 { points: vec![start, end], closed: false }),
        Curve::Circle { center, radius } => {
            let n = steps_for(TAU, radius, chord_tol).max(8);
            let points = (0..n).map(|i| center + Vec2::from_angle(TAU * i as f64 / n as f64) * radius).collect();
            Ok(Polyline2 { points, closed: true })
        }
        Curve::Arc { start, end, mid } => {
            let g = curve.arc_geometry().ok_or_else(|| KernelError::DegenerateCurve(format!("{curve:?}")))?;
            let first = g.mid_sweep;
            let second = g.sweep - g.mid_sweep;
            let k = steps_for(first, g.radius, chord_tol).max(steps_for(second, g.radius, chord_tol)).max(2);
            let mut points = Vec::with_capacity(2 * k + 1);
            points.push(start);
            for i in 1..k {
                points.push(g.point_at_angle(g.start_angle + first * i as f64 / k as f64));
            }
            points.push(mid);
            for i in 1..k {
                points.push(g.point_at_angle(g.start_angle + first + second * i as f64 / k as f64));
            }
            points.push(end);
            Ok(Polyline2 { points, closed: false })
        }
    }
}

/// Closed polygon of a loop: curve polylines chained, joints shared.
pub fn tessellate_loop(lp: &Loop, chord_tol: f64) -> Result<Polyline2, KernelError> {
    if lp.curves.is_empty() {
        return Err(KernelError::DegenerateCurve("empty loop".into()));
    }
    let mut points: Vec<Vec2> = Vec::new();
    for c in &lp.curves {
        let pl = tessellate_curve(c, chord_tol)?;
        let take = if pl.closed { pl.points.len() } else { pl.points.len() - 1 };
        for &p in &pl.points[..take] {
            if points.last().is_none_or(|q| q.distance(p) > EPS_DEGENERATE) {
                points.push(p);
            }
        }
    }
    while points.len() > 1 && points[0].distance(*points.last().unwrap()) <= EPS_DEGENERATE {
        points.pop();
    }
    if points.len() < 3 {
        return Err(KernelError::DegenerateCurve("loop collapses to fewer than 3 points".into()));
    }
    Ok(Polyline2 { points, closed: true })
}

fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

/// True when the open segments cross at a single interior point of both.
pub fn segments_properly_intersect(a0: Vec2, a1: Vec2, b0: Vec2, b1: Vec2) -> bool {
    let scale = (a1 - a0).norm() * (b1 - b0).norm();
    let eps = 1e-12 * scale;
    let d1 = orient(b0, b1, a0);
    let d2 = orient(b0, b1, a1);
    let d3 = orient(a0, a1, b0);
    let d4 = orient(a0, a1, b1);
    ((d1 > eps && d2 < -eps) || (d1 < -eps && d2 > eps)) && ((d3 > eps && d4 < -eps) || (d3 < -eps && d4 > eps))
}
