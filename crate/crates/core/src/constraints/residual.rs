use std::f64::consts::TAU;

use super::dual::Scalar;
use crate::model::{Constraint, PointKind, PointRef};

#[derive(Clone, Copy, Debug)]
pub(crate) struct P<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> P<T> {
    pub fn cst(x: f64, y: f64) -> Self {
        P { x: T::cst(x), y: T::cst(y) }
    }
    fn sub(self, o: Self) -> Self {
        P { x: self.x - o.x, y: self.y - o.y }
    }
    fn add(self, o: Self) -> Self {
        P { x: self.x + o.x, y: self.y + o.y }
    }
    fn mul(self, k: T) -> Self {
        P { x: self.x * k, y: self.y * k }
    }
    fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }
    fn cross(self, o: Self) -> T {
        self.x * o.y - self.y * o.x
    }
    fn norm(self) -> T {
        self.dot(self).sqrt()
    }
}

/// Curve parameters in residual arithmetic.
#[derive(Clone, Copy, Debug)]
pub(crate) enum CurveParams<T> {
    Line { s: P<T>, e: P<T> },
    Arc { s: P<T>, e: P<T>, m: P<T> },
    Circle { c: P<T>, r: T },
}

impl<T: Scalar> CurveParams<T> {
    /// Reads a line (4), arc (6) or circle (3) parameter slice.
    pub fn from_slice(p: &[T]) -> Self {
        match p.len() {
            4 => CurveParams::Line { s: P { x: p[0], y: p[1] }, e: P { x: p[2], y: p[3] } },
            6 => CurveParams::Arc { s: P { x: p[0], y: p[1] }, e: P { x: p[2], y: p[3] }, m: P { x: p[4], y: p[5] } },
            3 => CurveParams::Circle { c: P { x: p[0], y: p[1] }, r: p[2] },
            n => unreachable!("curve with {n} parameters"),
        }
    }

    fn point(&self, k: PointKind) -> Option<P<T>> {
        match (*self, k) {
            (CurveParams::Line { s, .. } | CurveParams::Arc { s, .. }, PointKind::Start) => Some(s),
            (CurveParams::Line { e, .. } | CurveParams::Arc { e, .. }, PointKind::End) => Some(e),
            (CurveParams::Arc { m, .. }, PointKind::Mid) => Some(m),
            (CurveParams::Circle { c, .. }, PointKind::Center) => Some(c),
            _ => None,
        }
    }

    fn direction(&self) -> Option<(P<T>, P<T>)> {
        match *self {
            CurveParams::Line { s, e } => Some((s, e.sub(s))),
            _ => None,
        }
    }

    /// Center and radius of circles and arcs.
    fn round(&self) -> Option<(P<T>, T)> {
        match *self {
            CurveParams::Circle { c, r } => Some((c, r)),
            CurveParams::Arc { s, e, m } => Some(circumcircle(s, m, e)),
            CurveParams::Line { .. } => None,
        }
    }

    fn control_points(&self) -> Vec<P<T>> {
        match *self {
            CurveParams::Line { s, e } => vec![s, e],
            CurveParams::Arc { s, e, m } => vec![s, e, m],
            CurveParams::Circle { c, .. } => vec![c],
        }
    }
}

fn circumcircle<T: Scalar>(a: P<T>, b: P<T>, c: P<T>) -> (P<T>, T) {
    let b = b.sub(a);
    let c = c.sub(a);
    let d = b.cross(c).scale(2.0);
    let (bb, cc) = (b.dot(b), c.dot(c));
    let u = P { x: (c.y * bb - b.y * cc) / d, y: (b.x * cc - c.x * bb) / d };
    (a.add(u), u.norm())
}

fn line_distance<T: Scalar>(p: P<T>, s: P<T>, d: P<T>) -> T {
    (d.cross(p.sub(s)) / d.norm()).abs()
}

fn reflect<T: Scalar>(p: P<T>, s: P<T>, d: P<T>) -> P<T> {
    let t = p.sub(s).dot(d) / d.dot(d);
    let foot = s.add(d.mul(t));
    foot.mul(T::cst(2.0)).sub(p)
}

/// Which circle-circle tangency a constraint enforces.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TangentBranch {
    #[default]
    External,
    Internal,
}

fn tangent_round<T: Scalar>(a: (P<T>, T), b: (P<T>, T), branch: TangentBranch) -> T {
    let d = a.0.sub(b.0).norm();
    match branch {
        TangentBranch::External => d - (a.1 + b.1),
        TangentBranch::Internal => d - (a.1 - b.1).abs(),
    }
}

/// Both tangency residuals for a pair of round curves.
pub(crate) fn tangent_branches(a: &CurveParams<f64>, b: &CurveParams<f64>) -> Option<(f64, f64)> {
    let (ra, rb) = (a.round()?, b.round()?);
    Some((tangent_round(ra, rb, TangentBranch::External), tangent_round(ra, rb, TangentBranch::Internal)))
}

/// Appends the residual rows of one constraint. `get` yields the parameters
/// of a curve by id; all type checks happened when the system was built.
pub(crate) fn constraint_rows<T: Scalar>(
    c: &Constraint,
    branch: TangentBranch,
    get: &impl Fn(usize) -> CurveParams<T>,
    out: &mut Vec<T>,
) {
    let line = |id: usize| get(id).direction().expect("line checked at build time");
    let point = |r: &PointRef| match *r {
        PointRef::Curve { curve, point } => get(curve.0).point(point).expect("point checked at build time"),
        PointRef::Fixed(p) => P::cst(p.u, p.v),
    };
    match c {
        Constraint::Horizontal { line: l } => {
            let (_, d) = line(l.0);
            out.push(d.y);
        }
        Constraint::Vertical { line: l } => {
            let (_, d) = line(l.0);
            out.push(d.x);
        }
        Constraint::FixSize { curve, size } => {
            let v = match get(curve.0) {
                CurveParams::Line { s, e } => e.sub(s).norm(),
                other => other.round().expect("round curve").1,
            };
            out.push(v - T::cst(*size));
        }
        Constraint::Coincident { a, b } => {
            let d = point(a).sub(point(b));
            out.push(d.x);
            out.push(d.y);
        }
        Constraint::Parallel { a, b } => out.push(line(a.0).1.cross(line(b.0).1)),
        Constraint::Perpendicular { a, b } => out.push(line(a.0).1.dot(line(b.0).1)),
        Constraint::Tangent { a, b } => {
            let (ca, cb) = (get(a.0), get(b.0));
            let r = match (ca.direction(), cb.direction()) {
                (Some((s, d)), None) | (None, Some((s, d))) => {
                    let (center, radius) = if ca.direction().is_some() { cb.round() } else { ca.round() }.expect("round curve");
                    line_distance(center, s, d) - radius
                }
                _ => tangent_round(ca.round().expect("round"), cb.round().expect("round"), branch),
            };
            out.push(r);
        }
        Constraint::Mirror { a, b, axis } => {
            let (s, d) = line(axis.0);
            let (ca, cb) = (get(a.0), get(b.0));
            for (pa, pb) in ca.control_points().into_iter().zip(cb.control_points()) {
                let r = reflect(pa, s, d).sub(pb);
                out.push(r.x);
                out.push(r.y);
            }
            if let (CurveParams::Circle { r: ra, .. }, CurveParams::Circle { r: rb, .. }) = (ca, cb) {
                out.push(ra - rb);
            }
        }
        Constraint::Angle { a, b, angle, clockwise } => {
            let (da, db) = (line(a.0).1, line(b.0).1);
            let mut phi = da.cross(db).atan2(da.dot(db));
            if *clockwise {
                phi = -phi;
            }
            let r = phi - T::cst(*angle);
            let wrap = (r.val() / TAU).round() * TAU;
            out.push(r - T::cst(wrap));
        }
    }
}
