use std::f64::consts::{PI, TAU};

use rand::Rng;

use ecad_core::model::{
    CadProgram, Command, Constraint, Curve, CurveId, CurveKind, ExtentType, LoopId, Operation, PlaneDef, PointKind, PointRef,
    ProgramBuilder, Statement, Vec2, Vec3,
};

fn rotation(rng: &mut impl Rng) -> (Vec3, Vec3) {
    // random proper rotation from a unit quaternion
    let (a, b, c, d): (f64, f64, f64, f64) = loop {
        let q: (f64, f64, f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = q.0 * q.0 + q.1 * q.1 + q.2 * q.2 + q.3 * q.3;
        if n > 0.01 && n <= 1.0 {
            let s = 1.0 / n.sqrt();
            break (q.0 * s, q.1 * s, q.2 * s, q.3 * s);
        }
    };
    let x = Vec3::new(a * a + b * b - c * c - d * d, 2.0 * (b * c + a * d), 2.0 * (b * d - a * c));
    let y = Vec3::new(2.0 * (b * c - a * d), a * a - b * b + c * c - d * d, 2.0 * (c * d + a * b));
    (x, y)
}

/// Plane through a point near the origin: axis-aligned most of the time,
/// otherwise arbitrarily rotated.
pub fn random_plane(rng: &mut impl Rng) -> PlaneDef {
    let origin = Vec3::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3));
    let (x, y) = match rng.random_range(0..4) {
        0 => (Vec3::X, Vec3::Y),
        1 => (Vec3::Y, Vec3::Z),
        2 => (Vec3::Z, Vec3::X),
        _ => rotation(rng),
    };
    PlaneDef::new(origin, x, y)
}

fn jitter(rng: &mut impl Rng, r: f64) -> Vec2 {
    Vec2::new(rng.random_range(-r..r), rng.random_range(-r..r))
}

/// Closed loop of one of several primitive shapes centered near `c`.
fn random_loop(b: &mut ProgramBuilder, rng: &mut impl Rng, c: Vec2, scale: f64) -> LoopId {
    match rng.random_range(0..5) {
        0 => {
            let (w, h) = (rng.random_range(0.4..1.0) * scale, rng.random_range(0.4..1.0) * scale);
            b.rectangle(c - Vec2::new(w / 2.0, h / 2.0), w, h)
        }
        1 => b.circle_loop(c, rng.random_range(0.2..0.5) * scale),
        2 => {
            let r = rng.random_range(0.3..0.5) * scale;
            let a0 = rng.random_range(0.0..TAU);
            let pts: Vec<Vec2> = (0..3).map(|k| c + Vec2::from_angle(a0 + TAU * k as f64 / 3.0 + rng.random_range(-0.3..0.3)) * r).collect();
            b.polygon(&pts)
        }
        3 => {
            // slot: two lines joined by half circles
            let (l, r) = (rng.random_range(0.2..0.6) * scale, rng.random_range(0.1..0.25) * scale);
            let p = |u: f64, v: f64| c + Vec2::new(u, v);
            let ids = vec![
                b.line(p(-l / 2.0, -r), p(l / 2.0, -r)),
                b.arc(p(l / 2.0, -r), p(l / 2.0, r), p(l / 2.0 + r, 0.0)),
                b.line(p(l / 2.0, r), p(-l / 2.0, r)),
                b.arc(p(-l / 2.0, r), p(-l / 2.0, -r), p(-l / 2.0 - r, 0.0)),
            ];
            b.add_loop(ids)
        }
        _ => {
            // D shape: a chord closed by an arc bulging either way
            let r = rng.random_range(0.25..0.5) * scale;
            let a0 = rng.random_range(0.0..TAU);
            let sweep = rng.random_range(0.6..1.6) * PI;
            let s = c + Vec2::from_angle(a0) * r;
            let e = c + Vec2::from_angle(a0 + sweep) * r;
            let m = c + Vec2::from_angle(a0 + sweep / 2.0) * r;
            let ids = vec![b.arc(s, e, m), b.line(e, s)];
            b.add_loop(ids)
        }
    }
}

fn random_extent(rng: &mut impl Rng) -> (ExtentType, f64, f64) {
    let t = ExtentType::ALL[rng.random_range(0..3)];
    let e1 = rng.random_range(0.2..1.0);
    let e2 = if t == ExtentType::TwoSided { rng.random_range(0.1..0.6) } else { 0.0 };
    (t, e1, e2)
}

/// Sketch-extrude program built from primitives, with at most
/// `max_pairs` loop-extrusion pairs. The first extrusion creates the body.
pub fn random_primitive_program(rng: &mut impl Rng, max_pairs: usize) -> CadProgram {
    let mut b = ProgramBuilder::new();
    let mut pairs = 0;
    let mut first = true;
    while pairs < max_pairs && (first || rng.random_bool(0.6)) {
        let pl = b.plane(random_plane(rng));
        let with_hole = pairs + 2 <= max_pairs && rng.random_bool(0.25);
        let c = jitter(rng, 0.2);
        let loops = if with_hole {
            let outer = {
                let (w, h) = (rng.random_range(0.8..1.2), rng.random_range(0.8..1.2));
                b.rectangle(c - Vec2::new(w / 2.0, h / 2.0), w, h)
            };
            let hc = c + jitter(rng, 0.05);
            let hole = random_loop(&mut b, rng, hc, 0.55);
            vec![outer, hole]
        } else {
            vec![random_loop(&mut b, rng, c, 1.0)]
        };
        pairs += loops.len();
        let pr = b.profile(loops);
        let s = if rng.random_bool(0.2) {
            b.sketch_placed(pl, pr, jitter(rng, 0.1), rng.random_range(0.7..1.3))
        } else {
            b.sketch(pl, pr)
        };
        let op = if first {
            Operation::NewBody
        } else {
            [Operation::Join, Operation::Join, Operation::Cut, Operation::Cut, Operation::Intersect, Operation::NewBody][rng.random_range(0..6)]
        };
        let (t, e1, e2) = random_extent(rng);
        b.extrude(s, op, t, e1, e2);
        first = false;
    }
    b.finish()
}

const NOTES: &[&str] = &["base plate", "draws the tabletop", "leg #2", "cut (through)", "x = 3, y = 4", "", " indented", "arc.mid"];

fn line_ids(kinds: &[CurveKind]) -> Vec<CurveId> {
    kinds.iter().enumerate().filter(|(_, k)| **k == CurveKind::Line).map(|(i, _)| CurveId(i)).collect()
}

fn pick(rng: &mut impl Rng, ids: &[CurveId]) -> CurveId {
    ids[rng.random_range(0..ids.len())]
}

fn point_of(rng: &mut impl Rng, kinds: &[CurveKind]) -> PointRef {
    if kinds.is_empty() || rng.random_bool(0.2) {
        return PointRef::Fixed(jitter(rng, 1.0));
    }
    let i = rng.random_range(0..kinds.len());
    let pts: Vec<PointKind> = [PointKind::Start, PointKind::End, PointKind::Mid, PointKind::Center]
        .into_iter()
        .filter(|p| kinds[i].has_point(*p))
        .collect();
    PointRef::Curve { curve: CurveId(i), point: pts[rng.random_range(0..pts.len())] }
}

/// A type-correct constraint over curves of the given kinds, if one exists.
pub fn random_constraint(rng: &mut impl Rng, kinds: &[CurveKind]) -> Option<Constraint> {
    let lines = line_ids(kinds);
    let all: Vec<CurveId> = (0..kinds.len()).map(CurveId).collect();
    let round: Vec<CurveId> = all.iter().copied().filter(|c| kinds[c.0] != CurveKind::Line).collect();
    for _ in 0..20 {
        let c = match rng.random_range(0..9) {
            0 if !lines.is_empty() => Constraint::Horizontal { line: pick(rng, &lines) },
            1 if !lines.is_empty() => Constraint::Vertical { line: pick(rng, &lines) },
            2 if !all.is_empty() => Constraint::FixSize { curve: pick(rng, &all), size: rng.random_range(0.1..2.0) },
            3 => Constraint::Coincident { a: point_of(rng, kinds), b: point_of(rng, kinds) },
            4 if lines.len() >= 2 => Constraint::Parallel { a: pick(rng, &lines), b: pick(rng, &lines) },
            5 if lines.len() >= 2 => Constraint::Perpendicular { a: pick(rng, &lines), b: pick(rng, &lines) },
            6 if !round.is_empty() && all.len() >= 2 => {
                let a = pick(rng, &round);
                let b = pick(rng, &all);
                if a == b {
                    continue;
                }
                Constraint::Tangent { a, b }
            }
            7 if !lines.is_empty() && all.len() >= 3 => {
                let a = pick(rng, &all);
                let same: Vec<CurveId> = all.iter().copied().filter(|c| kinds[c.0] == kinds[a.0] && *c != a).collect();
                let axes: Vec<CurveId> = lines.iter().copied().filter(|l| *l != a).collect();
                if same.is_empty() || axes.is_empty() {
                    continue;
                }
                let b = pick(rng, &same);
                let axis = pick(rng, &axes);
                if axis == b {
                    continue;
                }
                Constraint::Mirror { a, b, axis }
            }
            8 if lines.len() >= 2 => Constraint::Angle {
                a: pick(rng, &lines),
                b: pick(rng, &lines),
                angle: rng.random_range(-PI..PI),
                clockwise: rng.random_bool(0.5),
            },
            _ => continue,
        };
        return Some(c);
    }
    None
}

/// Random program exercising every statement form: primitives plus
/// constraints and comment annotations.
pub fn random_program(rng: &mut impl Rng) -> CadProgram {
    let mut p = random_primitive_program(rng, 3);
    let n = rng.random_range(0..5);
    let extrude_at = p.statements.iter().position(|s| matches!(s.command, Command::Extrude(_))).unwrap_or(p.statements.len());
    let kinds: Vec<CurveKind> = p.statements[..extrude_at]
        .iter()
        .filter_map(|s| match &s.command {
            Command::Curve(c) => Some(c.kind()),
            _ => None,
        })
        .collect();
    for _ in 0..n {
        if let Some(c) = random_constraint(rng, &kinds) {
            p.statements.insert(extrude_at, Statement { command: Command::Constraint(c), annotation: None });
        }
    }
    for s in &mut p.statements {
        if rng.random_bool(0.15) {
            let lines = rng.random_range(1..3);
            s.annotation = Some((0..lines).map(|_| NOTES[rng.random_range(0..NOTES.len())]).collect::<Vec<_>>().join("\n"));
        }
    }
    if rng.random_bool(0.2) {
        p.trailing_annotation = Some(NOTES[rng.random_range(0..NOTES.len())].to_string());
    }
    p
}

fn random_curve(rng: &mut impl Rng) -> Curve {
    match rng.random_range(0..3) {
        0 => Curve::line(jitter(rng, 2.0), jitter(rng, 2.0)),
        1 => {
            let c = jitter(rng, 1.0);
            let r = rng.random_range(0.3..1.5);
            let a0 = rng.random_range(0.0..TAU);
            let sw = rng.random_range(0.3..5.0);
            let at = |a: f64| c + Vec2::from_angle(a) * r;
            Curve::arc(at(a0), at(a0 + sw), at(a0 + sw / 2.0))
        }
        _ => Curve::circle(jitter(rng, 1.5), rng.random_range(0.2..1.5)),
    }
}

/// Free-standing sketch geometry with type-correct constraints.
pub fn random_sketch(rng: &mut impl Rng) -> (Vec<Curve>, Vec<Constraint>) {
    let n = rng.random_range(2..6);
    let mut curves: Vec<Curve> = (0..n).map(|_| random_curve(rng)).collect();
    if !curves.iter().any(|c| c.kind() == CurveKind::Line) {
        curves[0] = Curve::line(jitter(rng, 2.0), jitter(rng, 2.0));
    }
    let kinds: Vec<CurveKind> = curves.iter().map(|c| c.kind()).collect();
    let m = rng.random_range(1..7);
    let constraints = (0..m).filter_map(|_| random_constraint(rng, &kinds)).collect();
    (curves, constraints)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use ecad_core::model::Tolerances;

    #[test]
    fn primitive_programs_validate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let p = random_primitive_program(&mut rng, 3);
            let r = p.validate(&Tolerances::default());
            assert!(r.is_ok(), "{:?}", r.issues);
            assert!(p.extract_pairs().unwrap().len() <= 3);
        }
    }

    #[test]
    fn full_programs_validate() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let p = random_program(&mut rng);
            let r = p.validate(&Tolerances::default());
            assert!(r.is_ok(), "{:?}", r.issues);
        }
    }

    #[test]
    fn sketches_are_type_correct() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let (c, k) = random_sketch(&mut rng);
            ecad_core::constraints::ConstraintSystem::new(&c, &k).unwrap();
        }
    }
}
