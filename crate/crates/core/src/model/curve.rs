use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::{Vec2, EPS_DEGENERATE};

/// A sketch curve as authored: lines by endpoints, arcs by start/end/mid,
/// circles by center and radius.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Curve {
    Line { start: Vec2, end: Vec2 },
    Arc { start: Vec2, end: Vec2, mid: Vec2 },
    Circle { center: Vec2, radius: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    Line,
    Arc,
    Circle,
}

/// Named point of a curve that constraints can refer to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointKind {
    Start,
    End,
    Mid,
    Center,
}

impl PointKind {
    pub fn name(self) -> &'static str {
        match self {
            PointKind::Start => "start",
            PointKind::End => "end",
            PointKind::Mid => "mid",
            PointKind::Center => "center",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "start" => Some(PointKind::Start),
            "end" => Some(PointKind::End),
            "mid" => Some(PointKind::Mid),
            "center" => Some(PointKind::Center),
            _ => None,
        }
    }
}

impl CurveKind {
    pub fn name(self) -> &'static str {
        match self {
            CurveKind::Line => "Line",
            CurveKind::Arc => "Arc",
            CurveKind::Circle => "Circle",
        }
    }

    /// Number of scalar parameters the curve contributes to a constraint system.
    pub fn param_count(self) -> usize {
        match self {
            CurveKind::Line => 4,
            CurveKind::Arc => 6,
            CurveKind::Circle => 3,
        }
    }

    /// Whether `point` names a parameter point of this kind of curve.
    pub fn has_point(self, point: PointKind) -> bool {
        matches!(
            (self, point),
            (CurveKind::Line, PointKind::Start | PointKind::End)
                | (CurveKind::Arc, PointKind::Start | PointKind::End | PointKind::Mid)
                | (CurveKind::Circle, PointKind::Center)
        )
    }
}

/// Circle through three points, `None` when they are (nearly) collinear.
pub fn circumcircle(a: Vec2, b: Vec2, c: Vec2) -> Option<(Vec2, f64)> {
    let ab = b - a;
    let ac = c - a;
    let d = 2.0 * ab.cross(ac);
    let scale = ab.norm_sq().max(ac.norm_sq());
    if d.abs() <= 1e-12 * scale || scale <= EPS_DEGENERATE * EPS_DEGENERATE {
        return None;
    }
    let ab2 = ab.norm_sq();
    let ac2 = ac.norm_sq();
    let off = Vec2::new(ac.v * ab2 - ab.v * ac2, ab.u * ac2 - ac.u * ab2) / d;
    Some((a + off, off.norm()))
}

/// Exact circular-arc geometry derived from a three-point arc.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArcGeometry {
    pub center: Vec2,
    pub radius: f64,
    pub start_angle: f64,
    /// Signed sweep: positive for counter-clockwise traversal.
    pub sweep: f64,
    /// Signed angle from start to the authored mid point.
    pub mid_sweep: f64,
}

impl ArcGeometry {
    pub fn from_points(start: Vec2, end: Vec2, mid: Vec2) -> Option<Self> {
        let (center, radius) = circumcircle(start, mid, end)?;
        let ccw = (mid - start).cross(end - start) > 0.0;
        let ang = |p: Vec2| (p.v - center.v).atan2(p.u - center.u);
        let a0 = ang(start);
        let sweep_to = |p: Vec2| {
            let d = (ang(p) - a0).rem_euclid(TAU);
            if ccw {
                d
            } else {
                -((TAU - d).rem_euclid(TAU))
            }
        };
        Some(Self { center, radius, start_angle: a0, sweep: sweep_to(end), mid_sweep: sweep_to(mid) })
    }

    pub fn point_at_angle(&self, a: f64) -> Vec2 {
        self.center + Vec2::from_angle(a) * self.radius
    }

    pub fn length(&self) -> f64 {
        self.radius * self.sweep.abs()
    }
}

impl Curve {
    pub fn line(start: Vec2, end: Vec2) -> Self {
        Curve::Line { start, end }
    }

    pub fn arc(start: Vec2, end: Vec2, mid: Vec2) -> Self {
        Curve::Arc { start, end, mid }
    }

    pub fn circle(center: Vec2, radius: f64) -> Self {
        Curve::Circle { center, radius }
    }

    pub fn kind(&self) -> CurveKind {
        match self {
            Curve::Line { .. } => CurveKind::Line,
            Curve::Arc { .. } => CurveKind::Arc,
            Curve::Circle { .. } => CurveKind::Circle,
        }
    }

    /// Start point; circles report their seam point at angle 0.
    pub fn start(&self) -> Vec2 {
        match *self {
            Curve::Line { start, .. } | Curve::Arc { start, .. } => start,
            Curve::Circle { center, radius } => center + Vec2::new(radius, 0.0),
        }
    }

    pub fn end(&self) -> Vec2 {
        match *self {
            Curve::Line { end, .. } | Curve::Arc { end, .. } => end,
            Curve::Circle { .. } => self.start(),
        }
    }

    pub fn point(&self, which: PointKind) -> Option<Vec2> {
        match (*self, which) {
            (Curve::Line { start, .. } | Curve::Arc { start, .. }, PointKind::Start) => Some(start),
            (Curve::Line { end, .. } | Curve::Arc { end, .. }, PointKind::End) => Some(end),
            (Curve::Arc { mid, .. }, PointKind::Mid) => Some(mid),
            (Curve::Circle { center, .. }, PointKind::Center) => Some(center),
            _ => None,
        }
    }

    /// Same curve traversed the other way.
    pub fn reversed(&self) -> Curve {
        match *self {
            Curve::Line { start, end } => Curve::Line { start: end, end: start },
            Curve::Arc { start, end, mid } => Curve::Arc { start: end, end: start, mid },
            c @ Curve::Circle { .. } => c,
        }
    }

    pub fn is_finite(&self) -> bool {
        match *self {
            Curve::Line { start, end } => start.is_finite() && end.is_finite(),
            Curve::Arc { start, end, mid } => start.is_finite() && end.is_finite() && mid.is_finite(),
            Curve::Circle { center, radius } => center.is_finite() && radius.is_finite(),
        }
    }

    /// True when the curve has no well-defined shape at tolerance `eps`.
    pub fn is_degenerate(&self, eps: f64) -> bool {
        if !self.is_finite() {
            return true;
        }
        match *self {
            Curve::Line { start, end } => start.distance(end) <= eps,
            Curve::Arc { start, end, mid } => {
                start.distance(end) <= eps
                    || start.distance(mid) <= eps
                    || end.distance(mid) <= eps
                    || ArcGeometry::from_points(start, end, mid).is_none()
            }
            Curve::Circle { radius, .. } => radius <= eps,
        }
    }

    pub fn arc_geometry(&self) -> Option<ArcGeometry> {
        match *self {
            Curve::Arc { start, end, mid } => ArcGeometry::from_points(start, end, mid),
            _ => None,
        }
    }

    /// Exact curve length.
    pub fn length(&self) -> f64 {
        match *self {
            Curve::Line { start, end } => start.distance(end),
            Curve::Arc { .. } => self.arc_geometry().map_or(0.0, |g| g.length()),
            Curve::Circle { radius, .. } => TAU * radius,
        }
    }

    /// Point at normalized arc-length parameter `t ∈ [0, 1]` on the exact curve.
    pub fn point_at(&self, t: f64) -> Vec2 {
        match *self {
            Curve::Line { start, end } => start.lerp(end, t),
            Curve::Arc { start, .. } => match self.arc_geometry() {
                Some(g) => g.point_at_angle(g.start_angle + g.sweep * t),
                None => start,
            },
            Curve::Circle { center, radius } => center + Vec2::from_angle(TAU * t) * radius,
        }
    }

    /// Applies the sketch placement `size · p + position` to every control point.
    pub fn placed(&self, position: Vec2, size: f64) -> Curve {
        let f = |p: Vec2| p * size + position;
        match *self {
            Curve::Line { start, end } => Curve::Line { start: f(start), end: f(end) },
            Curve::Arc { start, end, mid } => Curve::Arc { start: f(start), end: f(end), mid: f(mid) },
            Curve::Circle { center, radius } => Curve::Circle { center: f(center), radius: radius * size },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn circumcircle_of_semicircle() {
        let (c, r) = circumcircle(Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0), Vec2::new(-1.0, 0.0)).unwrap();
        assert!(c.norm() < 1e-12);
        assert!((r - 1.0).abs() < 1e-12);
        assert!(circumcircle(Vec2::ZERO, Vec2::new(1.0, 1.0), Vec2::new(2.0, 2.0)).is_none());
    }

    #[test]
    fn arc_direction_follows_mid() {
        let ccw = ArcGeometry::from_points(Vec2::new(1.0, 0.0), Vec2::new(-1.0, 0.0), Vec2::new(0.0, 1.0)).unwrap();
        assert!((ccw.sweep - PI).abs() < 1e-12);
        assert!((ccw.mid_sweep - PI / 2.0).abs() < 1e-12);
        let cw = ArcGeometry::from_points(Vec2::new(1.0, 0.0), Vec2::new(-1.0, 0.0), Vec2::new(0.0, -1.0)).unwrap();
        assert!((cw.sweep + PI).abs() < 1e-12);
        // three-quarter arc: start (1,0), end (0,-1) through (-1,0) counter-clockwise
        let big = ArcGeometry::from_points(Vec2::new(1.0, 0.0), Vec2::new(0.0, -1.0), Vec2::new(-1.0, 0.0)).unwrap();
        assert!((big.sweep - 1.5 * PI).abs() < 1e-12);
    }

    #[test]
    fn lengths() {
        assert_eq!(Curve::line(Vec2::ZERO, Vec2::new(3.0, 4.0)).length(), 5.0);
        let semi = Curve::arc(Vec2::new(1.0, 0.0), Vec2::new(-1.0, 0.0), Vec2::new(0.0, 1.0));
        assert!((semi.length() - PI).abs() < 1e-12);
        assert!((Curve::circle(Vec2::ZERO, 2.0).length() - 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn degeneracy() {
        assert!(Curve::line(Vec2::ZERO, Vec2::ZERO).is_degenerate(1e-9));
        assert!(Curve::arc(Vec2::ZERO, Vec2::new(2.0, 0.0), Vec2::new(1.0, 0.0)).is_degenerate(1e-9));
        assert!(Curve::circle(Vec2::ZERO, 0.0).is_degenerate(1e-9));
        assert!(!Curve::circle(Vec2::ZERO, 0.5).is_degenerate(1e-9));
    }

    #[test]
    fn point_at_follows_arc() {
        let semi = Curve::arc(Vec2::new(1.0, 0.0), Vec2::new(-1.0, 0.0), Vec2::new(0.0, -1.0));
        let p = semi.point_at(0.5);
        assert!(p.distance(Vec2::new(0.0, -1.0)) < 1e-12);
    }
}
