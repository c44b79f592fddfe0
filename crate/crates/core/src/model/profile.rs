use serde::{Deserialize, Serialize};

use super::{Curve, CurveKind, ModelError, Vec2};
use crate::kernel::{segments_properly_intersect, tessellate_loop, Polyline2};

/// A closed chain of curves, or a single circle.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Loop {
    pub curves: Vec<Curve>,
}

impl Loop {
    pub fn new(curves: Vec<Curve>) -> Self {
        Self { curves }
    }

    /// Axis-aligned bounds of the exact curves.
    pub fn bounds(&self) -> Option<(Vec2, Vec2)> {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        let mut grow = |p: Vec2| {
            lo = Vec2::new(lo.u.min(p.u), lo.v.min(p.v));
            hi = Vec2::new(hi.u.max(p.u), hi.v.max(p.v));
        };
        for c in &self.curves {
            match *c {
                Curve::Line { start, end } => {
                    grow(start);
                    grow(end);
                }
                Curve::Arc { start, end, mid } => {
                    grow(start);
                    grow(end);
                    grow(mid);
                    if let Some(g) = c.arc_geometry() {
                        // axis-extreme points inside the swept range
                        for k in -6..=6 {
                            let a = k as f64 * std::f64::consts::FRAC_PI_2;
                            let rel = (a - g.start_angle) / g.sweep;
                            if rel > 0.0 && rel < 1.0 {
                                grow(g.point_at_angle(a));
                            }
                        }
                    }
                }
                Curve::Circle { center, radius } => {
                    grow(center - Vec2::new(radius, radius));
                    grow(center + Vec2::new(radius, radius));
                }
            }
        }
        lo.u.is_finite().then_some((lo, hi))
    }

    /// Total exact length of the loop.
    pub fn length(&self) -> f64 {
        self.curves.iter().map(Curve::length).sum()
    }
}

/// Closure diagnostics for one loop.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LoopReport {
    pub closed: bool,
    /// Distance between `end(curve_i)` and `start(curve_{i+1})` (wrapping), one per joint.
    pub gaps: Vec<f64>,
    /// Joints whose gap exceeds the join tolerance.
    pub open_joints: Vec<usize>,
    pub degenerate_curves: Vec<usize>,
    /// A circle shares the loop with other curves.
    pub mixed_circle: bool,
    pub empty: bool,
}

impl LoopReport {
    pub fn max_gap(&self) -> f64 {
        self.gaps.iter().copied().fold(0.0, f64::max)
    }
}

/// Checks that a loop is a single circle or a chain of non-circle curves
/// whose consecutive endpoints meet within `eps_join`.
pub fn validate_loop(lp: &Loop, eps_join: f64) -> LoopReport {
    let n = lp.curves.len();
    let degenerate_curves: Vec<usize> = lp
        .curves
        .iter()
        .enumerate()
        .filter(|(_, c)| c.is_degenerate(super::EPS_DEGENERATE))
        .map(|(i, _)| i)
        .collect();
    let circles = lp.curves.iter().filter(|c| c.kind() == CurveKind::Circle).count();
    let mixed_circle = circles > 0 && n > 1;
    let mut gaps = Vec::new();
    let mut open_joints = Vec::new();
    if circles == 0 {
        for i in 0..n {
            let g = lp.curves[i].end().distance(lp.curves[(i + 1) % n].start());
            if !(g <= eps_join) {
                open_joints.push(i);
            }
            gaps.push(g);
        }
    }
    let empty = n == 0;
    LoopReport {
        closed: !empty && !mixed_circle && open_joints.is_empty() && degenerate_curves.is_empty(),
        gaps,
        open_joints,
        degenerate_curves,
        mixed_circle,
        empty,
    }
}

/// Loops with their even-odd nesting.
#[derive(Clone, Debug, PartialEq)]
pub struct Profile {
    loops: Vec<Loop>,
    depths: Vec<usize>,
    parents: Vec<Option<usize>>,
}

impl Profile {
    pub fn loops(&self) -> &[Loop] {
        &self.loops
    }

    /// Nesting depth per loop: 0 = outer boundary, 1 = hole, 2 = island, ...
    pub fn depths(&self) -> &[usize] {
        &self.depths
    }

    /// Innermost loop containing each loop.
    pub fn parents(&self) -> &[Option<usize>] {
        &self.parents
    }

    /// Material regions: each even-depth loop with its direct odd-depth children.
    pub fn regions(&self) -> Vec<(usize, Vec<usize>)> {
        (0..self.loops.len())
            .filter(|&i| self.depths[i].is_multiple_of(2))
            .map(|i| {
                let holes = (0..self.loops.len()).filter(|&j| self.parents[j] == Some(i)).collect();
                (i, holes)
            })
            .collect()
    }

    pub fn bounds(&self) -> Option<(Vec2, Vec2)> {
        self.loops.iter().filter_map(Loop::bounds).reduce(|(a0, a1), (b0, b1)| {
            (Vec2::new(a0.u.min(b0.u), a0.v.min(b0.v)), Vec2::new(a1.u.max(b1.u), a1.v.max(b1.v)))
        })
    }

    /// Length of the bounding-box diagonal, the scale chord tolerances are relative to.
    pub fn diagonal(&self) -> f64 {
        self.bounds().map_or(0.0, |(lo, hi)| lo.distance(hi))
    }
}

pub(crate) fn point_in_polygon(p: Vec2, poly: &[Vec2]) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a.v > p.v) != (b.v > p.v) {
            let x = a.u + (p.v - a.v) / (b.v - a.v) * (b.u - a.u);
            if p.u < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn distance_to_polyline(p: Vec2, poly: &[Vec2]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            let ab = b - a;
            let t = ((p - a).dot(ab) / ab.norm_sq().max(f64::MIN_POSITIVE)).clamp(0.0, 1.0);
            p.distance(a + ab * t)
        })
        .fold(f64::INFINITY, f64::min)
}

/// A point on `inner`'s boundary that is clearly off `outer`'s boundary.
fn probe_point(inner: &[Vec2], outer: &[Vec2], tol: f64) -> Vec2 {
    let n = inner.len();
    let mut best = (inner[0], -1.0);
    for i in 0..n {
        for cand in [inner[i], inner[i].lerp(inner[(i + 1) % n], 0.5)] {
            let d = distance_to_polyline(cand, outer);
            if d > tol {
                return cand;
            }
            if d > best.1 {
                best = (cand, d);
            }
        }
    }
    best.0
}

fn polylines_cross(a: &Polyline2, b: &Polyline2) -> bool {
    let (pa, pb) = (&a.points, &b.points);
    let bb = |p: &[Vec2]| {
        p.iter().fold((Vec2::new(f64::INFINITY, f64::INFINITY), Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY)), |(lo, hi), q| {
            (Vec2::new(lo.u.min(q.u), lo.v.min(q.v)), Vec2::new(hi.u.max(q.u), hi.v.max(q.v)))
        })
    };
    let (alo, ahi) = bb(pa);
    let (blo, bhi) = bb(pb);
    if alo.u > bhi.u || blo.u > ahi.u || alo.v > bhi.v || blo.v > ahi.v {
        return false;
    }
    for i in 0..pa.len() {
        let (a0, a1) = (pa[i], pa[(i + 1) % pa.len()]);
        for j in 0..pb.len() {
            if segments_properly_intersect(a0, a1, pb[j], pb[(j + 1) % pb.len()]) {
                return true;
            }
        }
    }
    false
}

/// Assigns nesting depths by containment and rejects crossing loops.
///
/// `chord_tol` controls the tessellation used for the containment tests.
pub fn classify_profile(loops: Vec<Loop>, chord_tol: f64) -> Result<Profile, ModelError> {
    let polys: Vec<Polyline2> = loops
        .iter()
        .enumerate()
        .map(|(i, l)| tessellate_loop(l, chord_tol).map_err(|_| ModelError::DegenerateCurve(i)))
        .collect::<Result<_, _>>()?;
    let n = loops.len();
    for i in 0..n {
        for j in i + 1..n {
            if polylines_cross(&polys[i], &polys[j]) {
                return Err(ModelError::CrossingLoops(i, j));
            }
        }
    }
    // contains[i][j]: loop j lies inside loop i
    let mut contains = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let p = probe_point(&polys[j].points, &polys[i].points, chord_tol * 1e-3);
                contains[i][j] = point_in_polygon(p, &polys[i].points);
            }
        }
    }
    let depths: Vec<usize> = (0..n).map(|j| (0..n).filter(|&i| contains[i][j]).count()).collect();
    let parents = (0..n)
        .map(|j| (0..n).filter(|&i| contains[i][j] && depths[i] + 1 == depths[j]).max_by_key(|&i| depths[i]))
        .collect();
    Ok(Profile { loops, depths, parents })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn square(x0: f64, y0: f64, s: f64) -> Loop {
        let p = [
            Vec2::new(x0, y0),
            Vec2::new(x0 + s, y0),
            Vec2::new(x0 + s, y0 + s),
            Vec2::new(x0, y0 + s),
        ];
        Loop::new((0..4).map(|i| Curve::line(p[i], p[(i + 1) % 4])).collect())
    }

    #[test]
    fn closed_square() {
        let r = validate_loop(&square(0.0, 0.0, 1.0), 1e-6);
        assert!(r.closed);
        assert_eq!(r.gaps.len(), 4);
    }

    #[test]
    fn open_square_reports_gap() {
        let mut l = square(0.0, 0.0, 1.0);
        l.curves[3] = Curve::line(Vec2::new(0.0, 1.0), Vec2::new(0.0, 0.001));
        let r = validate_loop(&l, 1e-6);
        assert!(!r.closed);
        assert_eq!(r.open_joints, vec![3]);
        assert!((r.gaps[3] - 0.001).abs() < 1e-15);
    }

    #[test]
    fn single_circle_closed() {
        let r = validate_loop(&Loop::new(vec![Curve::circle(Vec2::ZERO, 1.0)]), 1e-6);
        assert!(r.closed);
    }

    #[test]
    fn circle_mixed_with_lines_is_invalid() {
        let mut l = square(0.0, 0.0, 1.0);
        l.curves.push(Curve::circle(Vec2::ZERO, 1.0));
        assert!(validate_loop(&l, 1e-6).mixed_circle);
    }

    #[test]
    fn annulus_depths() {
        let outer = square(-1.0, -1.0, 2.0);
        let hole = Loop::new(vec![Curve::circle(Vec2::ZERO, 0.5)]);
        let p = classify_profile(vec![outer, hole], 0.01).unwrap();
        assert_eq!(p.depths(), &[0, 1]);
        assert_eq!(p.regions(), vec![(0, vec![1])]);
    }

    #[test]
    fn disjoint_squares() {
        let p = classify_profile(vec![square(0.0, 0.0, 1.0), square(3.0, 0.0, 1.0)], 0.01).unwrap();
        assert_eq!(p.depths(), &[0, 0]);
    }

    #[test]
    fn overlapping_squares_cross() {
        let e = classify_profile(vec![square(0.0, 0.0, 1.0), square(0.5, 0.5, 1.0)], 0.01).unwrap_err();
        assert_eq!(e, ModelError::CrossingLoops(0, 1));
    }

    #[test]
    fn island_in_hole() {
        let p = classify_profile(
            vec![
                Loop::new(vec![Curve::circle(Vec2::ZERO, 0.25)]),
                square(-2.0, -2.0, 4.0),
                square(-1.0, -1.0, 2.0),
            ],
            0.01,
        )
        .unwrap();
        assert_eq!(p.depths(), &[2, 0, 1]);
        assert_eq!(p.parents(), &[Some(2), None, Some(1)]);
        assert_eq!(p.regions(), vec![(0, vec![]), (1, vec![2])]);
    }
}
