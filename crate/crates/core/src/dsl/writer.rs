use std::fmt::Write;

use crate::model::{CadProgram, Command, Constraint, Curve, CurveId, ExtentType, PointRef, Vec2, Vec3};

/// Shortest of plain and exponent notation; both parse back exactly.
pub(crate) fn real(v: f64) -> String {
    let plain = format!("{v}");
    let exp = format!("{v:e}");
    if exp.len() < plain.len() {
        exp
    } else {
        plain
    }
}

fn p2(p: Vec2) -> String {
    format!("({}, {})", real(p.u), real(p.v))
}

fn p3(p: Vec3) -> String {
    format!("({}, {}, {})", real(p.x), real(p.y), real(p.z))
}

struct Names {
    curves: Vec<String>,
}

impl Names {
    fn curve(&self, id: CurveId) -> String {
        self.curves.get(id.0).cloned().unwrap_or_else(|| format!("Curve{}", id.0))
    }

    fn point(&self, r: &PointRef) -> String {
        match r {
            PointRef::Curve { curve, point } => format!("{}.{}", self.curve(*curve), point.name()),
            PointRef::Fixed(p) => p2(*p),
        }
    }

    fn constraint(&self, c: &Constraint) -> String {
        let args = match c {
            Constraint::Horizontal { line } | Constraint::Vertical { line } => self.curve(*line),
            Constraint::FixSize { curve, size } => format!("{}, {}", self.curve(*curve), real(*size)),
            Constraint::Coincident { a, b } => format!("{}, {}", self.point(a), self.point(b)),
            Constraint::Parallel { a, b } | Constraint::Perpendicular { a, b } | Constraint::Tangent { a, b } => {
                format!("{}, {}", self.curve(*a), self.curve(*b))
            }
            Constraint::Mirror { a, b, axis } => format!("{}, {}, {}", self.curve(*a), self.curve(*b), self.curve(*axis)),
            Constraint::Angle { a, b, angle, clockwise } => {
                format!("{}, {}, {}, {}", self.curve(*a), self.curve(*b), real(*angle), clockwise)
            }
        };
        format!("{}({args})", c.command_name())
    }
}

fn curve_call(c: &Curve) -> String {
    match *c {
        Curve::Line { start, end } => format!("add_line({}, {})", p2(start), p2(end)),
        Curve::Arc { start, end, mid } => format!("add_arc({}, {}, {})", p2(start), p2(end), p2(mid)),
        Curve::Circle { center, radius } => format!("add_circle({}, {})", p2(center), real(radius)),
    }
}

fn annotate(out: &mut String, text: &str) {
    for line in text.split('\n') {
        if line.is_empty() {
            out.push_str("#\n");
        } else {
            let _ = writeln!(out, "# {line}");
        }
    }
}

/// Canonical text of a program. Parsing the result gives the program back.
pub fn serialize_program(p: &CadProgram) -> String {
    let names = Names {
        curves: p.curves().enumerate().map(|(i, c)| format!("{}{i}", c.kind().name())).collect(),
    };
    let mut out = String::new();
    let mut counts = [0usize; 6];
    let mut next = |k: usize| {
        counts[k] += 1;
        counts[k] - 1
    };
    let mut curve = 0;
    for s in &p.statements {
        if let Some(a) = &s.annotation {
            annotate(&mut out, a);
        }
        match &s.command {
            Command::SketchPlane(d) => {
                let args = match d.normal {
                    Some(n) => format!("{}, {}, {}, {}", p3(d.origin), p3(n), p3(d.x_axis), p3(d.y_axis)),
                    None => format!("{}, {}, {}", p3(d.origin), p3(d.x_axis), p3(d.y_axis)),
                };
                let _ = writeln!(out, "SketchPlane{} = add_sketchplane({args})", next(0));
            }
            Command::Curve(c) => {
                let _ = writeln!(out, "{} = {}", names.curve(CurveId(curve)), curve_call(c));
                curve += 1;
            }
            Command::Loop(ids) => {
                let k = next(1);
                let _ = writeln!(out, "Curves{k} = []");
                for id in ids {
                    let _ = writeln!(out, "Curves{k}.append({})", names.curve(*id));
                }
                let _ = writeln!(out, "Loop{k} = add_loop(Curves{k})");
            }
            Command::Profile(ids) => {
                let k = next(2);
                let _ = writeln!(out, "Loops{k} = []");
                for id in ids {
                    let _ = writeln!(out, "Loops{k}.append(Loop{})", id.0);
                }
                let _ = writeln!(out, "Profile{k} = add_profile(Loops{k})");
            }
            Command::Sketch(d) => {
                let mut args = format!("SketchPlane{}, Profile{}", d.plane.0, d.profile.0);
                if d.position != Vec2::ZERO || d.size != 1.0 {
                    let _ = write!(args, ", {}", p2(d.position));
                }
                if d.size != 1.0 {
                    let _ = write!(args, ", {}", real(d.size));
                }
                let _ = writeln!(out, "Sketch{} = add_sketch({args})", next(3));
            }
            Command::Constraint(c) => {
                let _ = writeln!(out, "{}", names.constraint(c));
            }
            Command::Extrude(e) => {
                let extent = if e.extent_type == ExtentType::TwoSided {
                    format!("({}, {})", real(e.extent_one), real(e.extent_two))
                } else if e.extent_two != 0.0 {
                    format!("{}, {}", real(e.extent_one), real(e.extent_two))
                } else {
                    real(e.extent_one)
                };
                let _ = writeln!(
                    out,
                    "Extrude{} = add_extrude(Sketch{}, {}, {}, {extent})",
                    next(4),
                    e.sketch.0,
                    e.operation.token(),
                    e.extent_type.token()
                );
            }
        }
    }
    if let Some(a) = &p.trailing_annotation {
        annotate(&mut out, a);
    }
    out
}
