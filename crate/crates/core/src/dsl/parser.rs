use std::collections::HashMap;

use super::lexer::{lex, Line, Tok, Token};
use super::{ErrorKind, ParseError};
use crate::model::{
    CadProgram, Command, Constraint, Curve, CurveId, CurveKind, ExtentType, Extrusion, LoopId, Operation, PlaneDef,
    PlaneId, PointKind, PointRef, ProfileId, SketchDef, SketchId, Statement, Vec2, Vec3,
};

#[derive(Clone, Debug)]
enum Value {
    Plane(PlaneId),
    Curve(CurveId, CurveKind),
    Loop(LoopId),
    Profile(ProfileId),
    Sketch(SketchId),
    Extrude,
    Constraint,
    List(Vec<Value>),
    /// Result of a statement that failed; uses fail silently.
    Poison,
}

impl Value {
    fn describe(&self) -> &'static str {
        match self {
            Value::Plane(_) => "a sketch plane",
            Value::Curve(..) => "a curve",
            Value::Loop(_) => "a loop",
            Value::Profile(_) => "a profile",
            Value::Sketch(_) => "a sketch",
            Value::Extrude => "an extrusion",
            Value::Constraint => "a constraint",
            Value::List(_) => "a list",
            Value::Poison => "an invalid value",
        }
    }
}

#[derive(Clone, Debug)]
enum Expr {
    Num(f64),
    Tuple(Vec<f64>),
    List(Vec<Spanned>),
    Ident(String),
    Member(String, String),
}

#[derive(Clone, Debug)]
struct Spanned {
    expr: Expr,
    start: usize,
    end: usize,
}

struct Arg {
    name: Option<String>,
    value: Spanned,
    start: usize,
}

enum Fail {
    Error(ParseError),
    Poison,
}

type R<T> = Result<T, Fail>;

struct Cursor<'a> {
    toks: &'a [Token],
    pos: usize,
    line_end: usize,
}

impl Cursor<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks.get(self.pos).map_or((self.line_end, self.line_end), |t| (t.start, t.end))
    }

    fn prev_end(&self) -> usize {
        if self.pos == 0 {
            self.toks.first().map_or(self.line_end, |t| t.start)
        } else {
            self.toks[self.pos - 1].end
        }
    }

    fn bump(&mut self) -> Option<&Token> {
        let t = self.toks.get(self.pos);
        self.pos += 1;
        t
    }
}

struct Param {
    names: &'static [&'static str],
    optional: bool,
}

const fn req(names: &'static [&'static str]) -> Param {
    Param { names, optional: false }
}

const fn opt(names: &'static [&'static str]) -> Param {
    Param { names, optional: true }
}

const COMMANDS: &[&str] = &[
    "add_sketchplane",
    "add_line",
    "add_arc",
    "add_circle",
    "add_loop",
    "add_profile",
    "add_sketch",
    "add_extrude",
    "make_horizontal",
    "make_vertical",
    "fix_size",
    "make_coincident",
    "make_parallel",
    "make_perpendicular",
    "make_tangent",
    "make_mirror",
    "make_angle",
];

struct Parser<'t> {
    text: &'t str,
    env: HashMap<String, Value>,
    statements: Vec<Statement>,
    curve_kinds: Vec<CurveKind>,
    counts: [usize; 4],
    errors: Vec<ParseError>,
    stmt: usize,
    line: Line,
}

fn parse_number_tuple(items: &[Spanned]) -> Option<Vec<f64>> {
    items.iter().map(|s| if let Expr::Num(v) = s.expr { Some(v) } else { None }).collect()
}

impl<'t> Parser<'t> {
    fn err(&self, kind: ErrorKind, start: usize, end: usize, msg: impl Into<String>) -> Fail {
        Fail::Error(ParseError::new(kind, self.line.span(self.stmt, start, end, self.text), msg))
    }

    fn syntax(&self, c: &Cursor, what: &str) -> Fail {
        let (s, e) = c.here();
        let found = match c.peek() {
            None => "end of line".to_string(),
            Some(t) => format!("{t:?}"),
        };
        self.err(ErrorKind::Syntax, s, e, format!("expected {what}, found {found}"))
    }

    fn expect(&self, c: &mut Cursor, tok: Tok, what: &str) -> R<()> {
        if c.peek() == Some(&tok) {
            c.bump();
            Ok(())
        } else {
            Err(self.syntax(c, what))
        }
    }

    fn expr(&self, c: &mut Cursor) -> R<Spanned> {
        let (start, _) = c.here();
        let expr = match c.peek().cloned() {
            Some(Tok::Num(v)) => {
                c.bump();
                Expr::Num(v)
            }
            Some(Tok::Ident(name)) => {
                c.bump();
                if c.peek() == Some(&Tok::Dot) {
                    c.bump();
                    match c.peek().cloned() {
                        Some(Tok::Ident(field)) => {
                            c.bump();
                            Expr::Member(name, field)
                        }
                        _ => return Err(self.syntax(c, "a point name after `.`")),
                    }
                } else {
                    Expr::Ident(name)
                }
            }
            Some(open @ (Tok::LParen | Tok::LBracket)) => {
                c.bump();
                let close = if open == Tok::LParen { Tok::RParen } else { Tok::RBracket };
                let mut items = Vec::new();
                if c.peek() != Some(&close) {
                    loop {
                        items.push(self.expr(c)?);
                        match c.peek() {
                            Some(Tok::Comma) => {
                                c.bump();
                            }
                            Some(t) if *t == close => break,
                            _ => return Err(self.syntax(c, "`,` or a closing bracket")),
                        }
                    }
                }
                c.bump();
                match (open, parse_number_tuple(&items)) {
                    (_, Some(nums)) if !nums.is_empty() => Expr::Tuple(nums),
                    (Tok::LBracket, _) => Expr::List(items),
                    _ => return Err(self.err(ErrorKind::Syntax, start, c.prev_end(), "parentheses hold only numeric tuples")),
                }
            }
            _ => return Err(self.syntax(c, "a value")),
        };
        Ok(Spanned { expr, start, end: c.prev_end() })
    }

    fn args(&self, c: &mut Cursor) -> R<Vec<Arg>> {
        self.expect(c, Tok::LParen, "`(`")?;
        let mut args = Vec::new();
        if c.peek() == Some(&Tok::RParen) {
            c.bump();
            return Ok(args);
        }
        loop {
            let (start, _) = c.here();
            let named = matches!(c.peek(), Some(Tok::Ident(_))) && c.toks.get(c.pos + 1).map(|t| &t.tok) == Some(&Tok::Equals);
            let name = if named {
                let Some(Token { tok: Tok::Ident(n), .. }) = c.bump().cloned() else { unreachable!() };
                c.bump();
                Some(n)
            } else {
                None
            };
            let value = self.expr(c)?;
            args.push(Arg { name, value, start });
            match c.peek() {
                Some(Tok::Comma) => {
                    c.bump();
                }
                Some(Tok::RParen) => {
                    c.bump();
                    return Ok(args);
                }
                _ => return Err(self.syntax(c, "`,` or `)`")),
            }
        }
    }

    fn bind<'a>(&self, args: &'a [Arg], params: &[Param], span: (usize, usize), cmd: &str) -> R<Vec<Option<&'a Spanned>>> {
        let mut out: Vec<Option<&Spanned>> = vec![None; params.len()];
        let mut positional = 0;
        let mut seen_named = false;
        for a in args {
            let slot = match &a.name {
                None => {
                    if seen_named {
                        return Err(self.err(ErrorKind::Syntax, a.start, a.value.end, "positional argument after keyword argument"));
                    }
                    positional += 1;
                    if positional > params.len() {
                        return Err(self.err(
                            ErrorKind::ArityMismatch,
                            span.0,
                            span.1,
                            format!("{cmd} takes at most {} arguments, got {}", params.len(), args.len()),
                        ));
                    }
                    positional - 1
                }
                Some(n) => {
                    seen_named = true;
                    let lower = n.to_ascii_lowercase();
                    params.iter().position(|p| p.names.contains(&lower.as_str())).ok_or_else(|| {
                        self.err(ErrorKind::ArityMismatch, a.start, a.value.end, format!("{cmd} has no parameter `{n}`"))
                    })?
                }
            };
            if out[slot].is_some() {
                return Err(self.err(ErrorKind::Syntax, a.start, a.value.end, format!("parameter `{}` given twice", params[slot].names[0])));
            }
            out[slot] = Some(&a.value);
        }
        for (p, v) in params.iter().zip(&out) {
            if v.is_none() && !p.optional {
                let required = params.iter().filter(|p| !p.optional).count();
                return Err(self.err(
                    ErrorKind::ArityMismatch,
                    span.0,
                    span.1,
                    format!("{cmd} needs {required} arguments, missing `{}`", p.names[0]),
                ));
            }
        }
        Ok(out)
    }

    fn mismatch(&self, s: &Spanned, want: &str) -> Fail {
        self.err(ErrorKind::TypeMismatch, s.start, s.end, format!("expected {want}"))
    }

    fn lookup(&self, s: &Spanned, name: &str) -> R<Value> {
        match self.env.get(name) {
            Some(Value::Poison) => Err(Fail::Poison),
            Some(v) => Ok(v.clone()),
            None => Err(self.err(ErrorKind::UndefinedIdentifier, s.start, s.end, format!("`{name}` is not defined"))),
        }
    }

    fn value(&self, s: &Spanned) -> R<Value> {
        match &s.expr {
            Expr::Ident(n) => self.lookup(s, n),
            Expr::List(items) => Ok(Value::List(items.iter().map(|i| self.value(i)).collect::<R<_>>()?)),
            _ => Err(self.mismatch(s, "a name or list")),
        }
    }

    fn real(&self, s: &Spanned) -> R<f64> {
        match s.expr {
            Expr::Num(v) => Ok(v),
            _ => Err(self.mismatch(s, "a number")),
        }
    }

    fn point2(&self, s: &Spanned) -> R<Vec2> {
        match &s.expr {
            Expr::Tuple(v) if v.len() == 2 => Ok(Vec2::new(v[0], v[1])),
            _ => Err(self.mismatch(s, "a 2D point (u, v)")),
        }
    }

    fn point3(&self, s: &Spanned) -> R<Vec3> {
        match &s.expr {
            Expr::Tuple(v) if v.len() == 3 => Ok(Vec3::new(v[0], v[1], v[2])),
            _ => Err(self.mismatch(s, "a 3D vector (x, y, z)")),
        }
    }

    fn curve(&self, s: &Spanned) -> R<CurveId> {
        match self.value(s)? {
            Value::Curve(id, _) => Ok(id),
            v => Err(self.mismatch(s, &format!("a curve, found {}", v.describe()))),
        }
    }

    fn handle<T>(&self, s: &Spanned, want: &str, pick: impl Fn(&Value) -> Option<T>) -> R<T> {
        let v = self.value(s)?;
        pick(&v).ok_or_else(|| self.mismatch(s, &format!("{want}, found {}", v.describe())))
    }

    fn list<T>(&self, s: &Spanned, want: &str, pick: impl Fn(&Value) -> Option<T>) -> R<Vec<T>> {
        match self.value(s)? {
            Value::List(items) => {
                let mut out = Vec::with_capacity(items.len());
                for v in &items {
                    if matches!(v, Value::Poison) {
                        return Err(Fail::Poison);
                    }
                    out.push(pick(v).ok_or_else(|| self.mismatch(s, &format!("a list of {want}, found {}", v.describe())))?);
                }
                Ok(out)
            }
            v => Err(self.mismatch(s, &format!("a list of {want}, found {}", v.describe()))),
        }
    }

    fn point_ref(&self, s: &Spanned) -> R<PointRef> {
        match &s.expr {
            Expr::Member(name, field) => {
                let Value::Curve(curve, kind) = self.lookup(s, name)? else {
                    return Err(self.mismatch(s, "a curve point such as Line0.start"));
                };
                let point = PointKind::from_name(&field.to_ascii_lowercase())
                    .filter(|p| kind.has_point(*p))
                    .ok_or_else(|| self.mismatch(s, &format!("a point of a {} (not `{field}`)", kind.name())))?;
                Ok(PointRef::Curve { curve, point })
            }
            Expr::Tuple(v) if v.len() == 2 => Ok(PointRef::Fixed(Vec2::new(v[0], v[1]))),
            _ => Err(self.mismatch(s, "a curve point or a fixed (u, v) point")),
        }
    }

    fn token(&self, s: &Spanned) -> Option<String> {
        match &s.expr {
            Expr::Ident(n) => Some(n.to_ascii_lowercase()),
            _ => None,
        }
    }

    fn operation(&self, s: &Spanned) -> R<Operation> {
        match self.token(s).as_deref() {
            Some("new_body" | "newbody" | "new") => Ok(Operation::NewBody),
            Some("join") => Ok(Operation::Join),
            Some("cut") => Ok(Operation::Cut),
            Some("intersect") => Ok(Operation::Intersect),
            _ => Err(self.mismatch(s, "an operation: new_body, join, cut or intersect")),
        }
    }

    fn extent_type(&self, s: &Spanned) -> R<ExtentType> {
        match self.token(s).as_deref() {
            Some("one_sided" | "onesided") => Ok(ExtentType::OneSided),
            Some("symmetric") => Ok(ExtentType::Symmetric),
            Some("two_sided" | "twosided") => Ok(ExtentType::TwoSided),
            _ => Err(self.mismatch(s, "an extent type: one_sided, symmetric or two_sided")),
        }
    }

    fn boolean(&self, s: &Spanned) -> R<bool> {
        match self.token(s).as_deref() {
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            _ => Err(self.mismatch(s, "true or false")),
        }
    }

    fn next_id(&mut self, k: usize) -> usize {
        self.counts[k] += 1;
        self.counts[k] - 1
    }

    /// Evaluates a command call into a program command plus the value it binds.
    fn command(&mut self, cmd: &str, args: &[Arg], span: (usize, usize)) -> R<(Command, Value)> {
        let a = |p: &[Param]| self.bind(args, p, span, cmd);
        let c = |v: Constraint| Ok((Command::Constraint(v), Value::Constraint));
        Ok(match cmd {
            "add_sketchplane" => {
                let origin = &["origin", "origin_point"][..];
                let (o, n, x, y) = if args.iter().filter(|a| a.name.is_none()).count() == 4 {
                    let b = a(&[req(origin), req(&["normal"]), req(&["x_axis"]), req(&["y_axis"])])?;
                    (b[0], b[1], b[2], b[3])
                } else {
                    let b = a(&[req(origin), req(&["x_axis"]), req(&["y_axis"]), opt(&["normal"])])?;
                    (b[0], b[3], b[1], b[2])
                };
                let def = PlaneDef {
                    origin: self.point3(o.unwrap())?,
                    x_axis: self.point3(x.unwrap())?,
                    y_axis: self.point3(y.unwrap())?,
                    normal: n.map(|n| self.point3(n)).transpose()?,
                };
                let id = self.next_id(0);
                (Command::SketchPlane(def), Value::Plane(PlaneId(id)))
            }
            "add_line" => {
                let b = a(&[req(&["start", "start_point"]), req(&["end", "end_point"])])?;
                self.new_curve(Curve::line(self.point2(b[0].unwrap())?, self.point2(b[1].unwrap())?))
            }
            "add_arc" => {
                let b = a(&[req(&["start", "start_point"]), req(&["end", "end_point"]), req(&["mid", "mid_point"])])?;
                let (s, e, m) = (self.point2(b[0].unwrap())?, self.point2(b[1].unwrap())?, self.point2(b[2].unwrap())?);
                self.new_curve(Curve::arc(s, e, m))
            }
            "add_circle" => {
                let b = a(&[req(&["center", "center_point"]), req(&["radius"])])?;
                self.new_curve(Curve::circle(self.point2(b[0].unwrap())?, self.real(b[1].unwrap())?))
            }
            "add_loop" => {
                let b = a(&[req(&["curves", "curves_list"])])?;
                let ids = self.list(b[0].unwrap(), "curves", |v| if let Value::Curve(id, _) = v { Some(*id) } else { None })?;
                (Command::Loop(ids), Value::Loop(LoopId(self.next_id(1))))
            }
            "add_profile" => {
                let b = a(&[req(&["loops", "loops_list"])])?;
                let ids = self.list(b[0].unwrap(), "loops", |v| if let Value::Loop(id) = v { Some(*id) } else { None })?;
                (Command::Profile(ids), Value::Profile(ProfileId(self.next_id(2))))
            }
            "add_sketch" => {
                let b = a(&[
                    req(&["sketchplane", "sketch_plane", "plane"]),
                    req(&["profile"]),
                    opt(&["position", "sketch_position"]),
                    opt(&["size", "sketch_size"]),
                ])?;
                let plane = self.handle(b[0].unwrap(), "a sketch plane", |v| if let Value::Plane(p) = v { Some(*p) } else { None })?;
                let profile = self.handle(b[1].unwrap(), "a profile", |v| if let Value::Profile(p) = v { Some(*p) } else { None })?;
                let position = b[2].map(|s| self.point2(s)).transpose()?.unwrap_or(Vec2::ZERO);
                let size = b[3].map(|s| self.real(s)).transpose()?.unwrap_or(1.0);
                let def = SketchDef { plane, profile, position, size };
                (Command::Sketch(def), Value::Sketch(SketchId(self.next_id(3))))
            }
            "add_extrude" => {
                let b = a(&[
                    req(&["sketch"]),
                    req(&["operation"]),
                    req(&["type", "extent_type"]),
                    req(&["extent", "extent_size", "extent_one"]),
                    opt(&["extent_two"]),
                ])?;
                let sketch = self.handle(b[0].unwrap(), "a sketch", |v| if let Value::Sketch(s) = v { Some(*s) } else { None })?;
                let operation = self.operation(b[1].unwrap())?;
                let extent_type = self.extent_type(b[2].unwrap())?;
                let ext = b[3].unwrap();
                let (extent_one, extent_two) = match (&ext.expr, b[4]) {
                    (Expr::Tuple(v), None) if v.len() == 2 => (v[0], v[1]),
                    (Expr::Num(e1), None) => (*e1, 0.0),
                    (Expr::Num(e1), Some(e2)) => (*e1, self.real(e2)?),
                    _ => return Err(self.mismatch(ext, "an extent: a number or (extent_one, extent_two)")),
                };
                let e = Extrusion { sketch, operation, extent_type, extent_one, extent_two };
                (Command::Extrude(e), Value::Extrude)
            }
            "make_horizontal" | "make_vertical" => {
                let b = a(&[req(&["line0", "line"])])?;
                let line = self.curve(b[0].unwrap())?;
                return c(if cmd == "make_horizontal" { Constraint::Horizontal { line } } else { Constraint::Vertical { line } });
            }
            "fix_size" => {
                let b = a(&[req(&["curve0", "curve"]), req(&["size"])])?;
                return c(Constraint::FixSize { curve: self.curve(b[0].unwrap())?, size: self.real(b[1].unwrap())? });
            }
            "make_coincident" => {
                let b = a(&[req(&["point0"]), req(&["point1"])])?;
                return c(Constraint::Coincident { a: self.point_ref(b[0].unwrap())?, b: self.point_ref(b[1].unwrap())? });
            }
            "make_parallel" | "make_perpendicular" => {
                let b = a(&[req(&["line0"]), req(&["line1"])])?;
                let (l0, l1) = (self.curve(b[0].unwrap())?, self.curve(b[1].unwrap())?);
                return c(if cmd == "make_parallel" {
                    Constraint::Parallel { a: l0, b: l1 }
                } else {
                    Constraint::Perpendicular { a: l0, b: l1 }
                });
            }
            "make_tangent" => {
                let b = a(&[req(&["curve0"]), req(&["curve1"])])?;
                return c(Constraint::Tangent { a: self.curve(b[0].unwrap())?, b: self.curve(b[1].unwrap())? });
            }
            "make_mirror" => {
                let b = a(&[req(&["curve0"]), req(&["curve1"]), req(&["axis", "line"])])?;
                let (c0, c1, axis) = (self.curve(b[0].unwrap())?, self.curve(b[1].unwrap())?, self.curve(b[2].unwrap())?);
                return c(Constraint::Mirror { a: c0, b: c1, axis });
            }
            "make_angle" => {
                let b = a(&[req(&["line0"]), req(&["line1"]), req(&["angle"]), req(&["clockwise"])])?;
                let (l0, l1) = (self.curve(b[0].unwrap())?, self.curve(b[1].unwrap())?);
                let angle = self.real(b[2].unwrap())?;
                let clockwise = self.boolean(b[3].unwrap())?;
                return c(Constraint::Angle { a: l0, b: l1, angle, clockwise });
            }
            _ => return Err(self.err(ErrorKind::UnknownCommand, span.0, span.0 + cmd.len(), format!("unknown command `{cmd}`"))),
        })
    }

    fn new_curve(&mut self, c: Curve) -> (Command, Value) {
        let id = CurveId(self.curve_kinds.len());
        self.curve_kinds.push(c.kind());
        (Command::Curve(c), Value::Curve(id, c.kind()))
    }

    /// Parses one statement line. Returns the command it defines, if any.
    fn statement(&mut self) -> R<Option<Command>> {
        let toks = std::mem::take(&mut self.line.tokens);
        let mut c = Cursor { toks: &toks, pos: 0, line_end: self.line.end };
        let first = match c.peek().cloned() {
            Some(Tok::Ident(n)) => n,
            _ => return Err(self.syntax(&c, "a statement")),
        };
        let (call_start, _) = c.here();
        c.bump();
        let result = match c.peek() {
            Some(Tok::Dot) => {
                c.bump();
                match c.bump().map(|t| t.tok.clone()) {
                    Some(Tok::Ident(m)) if m == "append" => {}
                    _ => {
                        c.pos -= 1;
                        return Err(self.syntax(&c, "`append`"));
                    }
                }
                self.expect(&mut c, Tok::LParen, "`(`")?;
                let item = self.expr(&mut c)?;
                self.expect(&mut c, Tok::RParen, "`)`")?;
                self.end(&c)?;
                let target = Spanned { expr: Expr::Ident(first.clone()), start: call_start, end: call_start + first.len() };
                let v = self.value(&item)?;
                match self.lookup(&target, &first)? {
                    Value::List(mut items) => {
                        items.push(v);
                        self.env.insert(first, Value::List(items));
                    }
                    other => return Err(self.mismatch(&target, &format!("a list, found {}", other.describe()))),
                }
                Ok(None)
            }
            Some(Tok::Equals) => {
                c.bump();
                match c.peek().cloned() {
                    Some(Tok::LBracket) => {
                        let (s, _) = c.here();
                        let e = self.expr(&mut c)?;
                        self.end(&c)?;
                        let v = match &e.expr {
                            Expr::List(_) => self.value(&e),
                            _ => Err(self.err(ErrorKind::TypeMismatch, s, e.end, "lists hold names, not numbers")),
                        };
                        match v {
                            Ok(v) => {
                                self.env.insert(first, v);
                                Ok(None)
                            }
                            Err(f) => {
                                self.env.insert(first, Value::Poison);
                                Err(f)
                            }
                        }
                    }
                    Some(Tok::Ident(cmd)) => {
                        let (s, _) = c.here();
                        c.bump();
                        let r = self.call(&mut c, &cmd, s);
                        match r {
                            Ok((command, value)) => {
                                self.env.insert(first, value);
                                Ok(Some(command))
                            }
                            Err(f) => {
                                self.env.insert(first, Value::Poison);
                                Err(f)
                            }
                        }
                    }
                    _ => Err(self.syntax(&c, "a command or list")),
                }
            }
            Some(Tok::LParen) => self.call(&mut c, &first, call_start).map(|(cmd, _)| Some(cmd)),
            _ => Err(self.syntax(&c, "`=`, `(` or `.append`")),
        };
        result
    }

    fn end(&self, c: &Cursor) -> R<()> {
        if c.peek().is_some() {
            Err(self.syntax(c, "end of statement"))
        } else {
            Ok(())
        }
    }

    fn call(&mut self, c: &mut Cursor, cmd: &str, start: usize) -> R<(Command, Value)> {
        if !COMMANDS.contains(&cmd) {
            return Err(self.err(ErrorKind::UnknownCommand, start, start + cmd.len(), format!("unknown command `{cmd}`")));
        }
        let args = self.args(c)?;
        self.end(c)?;
        let span = (start, c.prev_end());
        let counts = self.counts;
        let kinds = self.curve_kinds.len();
        let r = self.command(cmd, &args, span);
        if r.is_err() {
            self.counts = counts;
            self.curve_kinds.truncate(kinds);
        }
        r
    }
}

/// Parses program text; any error rejects the whole program.
pub fn parse_program(text: &str) -> Result<CadProgram, Vec<ParseError>> {
    let mut lex_errors = Vec::new();
    let lines = lex(text, &mut lex_errors);
    let mut p = Parser {
        text,
        env: HashMap::new(),
        statements: Vec::new(),
        curve_kinds: Vec::new(),
        counts: [0; 4],
        errors: Vec::new(),
        stmt: 0,
        line: Line::default(),
    };
    let mut pending: Vec<String> = Vec::new();
    let mut lex_iter = lex_errors.into_iter().peekable();
    for line in lines {
        let lexed_bad = lex_iter.peek().is_some_and(|(n, _)| *n + 1 == line.number);
        if lexed_bad {
            while lex_iter.peek().is_some_and(|(n, _)| *n + 1 == line.number) {
                let (_, mut e) = lex_iter.next().unwrap();
                e.span.statement = p.stmt;
                p.errors.push(e);
            }
            p.stmt += 1;
            continue;
        }
        if line.tokens.is_empty() {
            if let Some(c) = line.comment {
                pending.push(c);
            }
            continue;
        }
        let comment = line.comment.clone();
        p.line = line;
        match p.statement() {
            Ok(Some(command)) => {
                if let Some(c) = comment {
                    pending.push(c);
                }
                let annotation = if pending.is_empty() { None } else { Some(std::mem::take(&mut pending).join("\n")) };
                p.statements.push(Statement { command, annotation });
            }
            Ok(None) => {
                if let Some(c) = comment {
                    pending.push(c);
                }
            }
            Err(Fail::Error(e)) => p.errors.push(e),
            Err(Fail::Poison) => {}
        }
        p.stmt += 1;
    }
    if !p.errors.is_empty() {
        return Err(p.errors);
    }
    let trailing_annotation = if pending.is_empty() { None } else { Some(pending.join("\n")) };
    Ok(CadProgram { statements: p.statements, trailing_annotation })
}
