use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{
    classify_profile, validate_loop, Curve, CurveKind, Loop, ModelError, PointKind, Profile, SketchPlane, Vec2, Vec3,
    EPS_DEGENERATE, EPS_JOIN,
};
use crate::kernel::ChordTol;

macro_rules! id_type {
    ($($name:ident),+) => {$(
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub struct $name(pub usize);
    )+};
}

id_type!(PlaneId, CurveId, LoopId, ProfileId, SketchId);

/// A sketch plane exactly as authored. Axes are normalized only when the
/// plane is resolved, so authored text round-trips bit for bit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaneDef {
    pub origin: Vec3,
    pub x_axis: Vec3,
    pub y_axis: Vec3,
    /// Optional explicit normal; only checked against `x × y`.
    pub normal: Option<Vec3>,
}

impl PlaneDef {
    pub fn new(origin: Vec3, x_axis: Vec3, y_axis: Vec3) -> Self {
        Self { origin, x_axis, y_axis, normal: None }
    }

    pub fn resolve(&self) -> Result<SketchPlane, ModelError> {
        SketchPlane::new(self.origin, self.x_axis, self.y_axis)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SketchDef {
    pub plane: PlaneId,
    pub profile: ProfileId,
    pub position: Vec2,
    pub size: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operation {
    NewBody,
    Join,
    Cut,
    Intersect,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtentType {
    OneSided,
    Symmetric,
    TwoSided,
}

impl Operation {
    pub const ALL: [Operation; 4] = [Operation::NewBody, Operation::Join, Operation::Cut, Operation::Intersect];

    pub fn token(self) -> &'static str {
        match self {
            Operation::NewBody => "new_body",
            Operation::Join => "join",
            Operation::Cut => "cut",
            Operation::Intersect => "intersect",
        }
    }
}

impl ExtentType {
    pub const ALL: [ExtentType; 3] = [ExtentType::OneSided, ExtentType::Symmetric, ExtentType::TwoSided];

    pub fn token(self) -> &'static str {
        match self {
            ExtentType::OneSided => "one_sided",
            ExtentType::Symmetric => "symmetric",
            ExtentType::TwoSided => "two_sided",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extrusion {
    pub sketch: SketchId,
    pub operation: Operation,
    pub extent_type: ExtentType,
    pub extent_one: f64,
    /// Only meaningful for [`ExtentType::TwoSided`]; zero otherwise.
    pub extent_two: f64,
}

impl Extrusion {
    /// Signed span `[w0, w1]` along the sketch normal, with `w0 <= w1`.
    pub fn span(&self) -> (f64, f64) {
        let (a, b) = match self.extent_type {
            ExtentType::OneSided => (0.0, self.extent_one),
            ExtentType::Symmetric => (-self.extent_one / 2.0, self.extent_one / 2.0),
            ExtentType::TwoSided => (-self.extent_two, self.extent_one),
        };
        (a.min(b), a.max(b))
    }
}

/// A constraint endpoint: a named point of a curve or a fixed anchor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointRef {
    Curve { curve: CurveId, point: PointKind },
    Fixed(Vec2),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Constraint {
    Horizontal { line: CurveId },
    Vertical { line: CurveId },
    FixSize { curve: CurveId, size: f64 },
    Coincident { a: PointRef, b: PointRef },
    Parallel { a: CurveId, b: CurveId },
    Perpendicular { a: CurveId, b: CurveId },
    Tangent { a: CurveId, b: CurveId },
    Mirror { a: CurveId, b: CurveId, axis: CurveId },
    Angle { a: CurveId, b: CurveId, angle: f64, clockwise: bool },
}

impl Constraint {
    pub fn command_name(&self) -> &'static str {
        match self {
            Constraint::Horizontal { .. } => "make_horizontal",
            Constraint::Vertical { .. } => "make_vertical",
            Constraint::FixSize { .. } => "fix_size",
            Constraint::Coincident { .. } => "make_coincident",
            Constraint::Parallel { .. } => "make_parallel",
            Constraint::Perpendicular { .. } => "make_perpendicular",
            Constraint::Tangent { .. } => "make_tangent",
            Constraint::Mirror { .. } => "make_mirror",
            Constraint::Angle { .. } => "make_angle",
        }
    }

    /// Every curve the constraint touches.
    pub fn curves(&self) -> Vec<CurveId> {
        let pt = |p: &PointRef| match p {
            PointRef::Curve { curve, .. } => Some(*curve),
            PointRef::Fixed(_) => None,
        };
        match self {
            Constraint::Horizontal { line } | Constraint::Vertical { line } => vec![*line],
            Constraint::FixSize { curve, .. } => vec![*curve],
            Constraint::Coincident { a, b } => pt(a).into_iter().chain(pt(b)).collect(),
            Constraint::Parallel { a, b }
            | Constraint::Perpendicular { a, b }
            | Constraint::Tangent { a, b }
            | Constraint::Angle { a, b, .. } => vec![*a, *b],
            Constraint::Mirror { a, b, axis } => vec![*a, *b, *axis],
        }
    }

    /// Curves that must be lines for the constraint to make sense.
    pub fn required_lines(&self) -> Vec<CurveId> {
        match self {
            Constraint::Horizontal { line } | Constraint::Vertical { line } => vec![*line],
            Constraint::Parallel { a, b } | Constraint::Perpendicular { a, b } | Constraint::Angle { a, b, .. } => {
                vec![*a, *b]
            }
            Constraint::Mirror { axis, .. } => vec![*axis],
            _ => vec![],
        }
    }
}

/// One program statement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    SketchPlane(PlaneDef),
    Curve(Curve),
    Loop(Vec<CurveId>),
    Profile(Vec<LoopId>),
    Sketch(SketchDef),
    Constraint(Constraint),
    Extrude(Extrusion),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Statement {
    pub command: Command,
    /// Free text attached to the statement (one or more comment lines).
    pub annotation: Option<String>,
}

/// An ordered CAD command sequence.
///
/// Definitions are referred to by their index among earlier definitions of
/// the same kind, so identifier spelling is not part of the program.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CadProgram {
    pub statements: Vec<Statement>,
    /// Comment lines after the last statement.
    pub trailing_annotation: Option<String>,
}

/// Tolerances used when validating and executing programs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub eps_join: f64,
    pub eps_degenerate: f64,
    pub chord: ChordTol,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { eps_join: EPS_JOIN, eps_degenerate: EPS_DEGENERATE, chord: ChordTol::default() }
    }
}

/// A sketch with its plane and classified profile.
#[derive(Clone, Debug, PartialEq)]
pub struct Sketch {
    pub plane: SketchPlane,
    pub profile: Profile,
    pub position: Vec2,
    pub size: f64,
}

impl Sketch {
    /// In-plane point of the placed sketch in model space.
    pub fn to_world(&self, p: Vec2, w: f64) -> crate::model::Vec3 {
        self.plane.to_world(p * self.size + self.position, w)
    }

    /// Chord tolerance in unplaced sketch units.
    pub fn chord_tol(&self, chord: ChordTol) -> f64 {
        chord.resolve(self.profile.diagonal())
    }
}

/// One loop-extrusion combination of a program.
#[derive(Clone, Debug, PartialEq)]
pub struct PairEntry {
    /// Position of the extrusion among the program's extrusions.
    pub extrusion_index: usize,
    pub extrusion: Extrusion,
    pub sketch: SketchId,
    pub loop_id: LoopId,
    pub curves: Loop,
}

pub type PairView = Vec<PairEntry>;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValidationIssue {
    DanglingReference { statement: usize, detail: String },
    DegenerateAxes { statement: usize, detail: String },
    DegenerateCurve { statement: usize, curve: usize },
    OpenLoop { statement: usize, r#loop: usize, max_gap: f64, open_joints: Vec<usize> },
    MixedCircleLoop { statement: usize, r#loop: usize },
    EmptyList { statement: usize },
    CrossingLoops { statement: usize, profile: usize, a: usize, b: usize },
    InvalidSketchSize { statement: usize, size: f64 },
    DegenerateExtent { statement: usize },
    MissingBody { statement: usize },
    ConstraintType { statement: usize, detail: String },
    NonFinite { statement: usize },
}

impl std::fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        use ValidationIssue::*;
        match self {
            DanglingReference { statement, detail } => write!(f, "statement {statement}: {detail}"),
            DegenerateAxes { statement, detail } => write!(f, "statement {statement}: degenerate plane axes ({detail})"),
            DegenerateCurve { statement, curve } => write!(f, "statement {statement}: curve {curve} is degenerate"),
            OpenLoop { statement, r#loop, max_gap, .. } => {
                write!(f, "statement {statement}: loop {} is open (gap {max_gap:.3e})", r#loop)
            }
            MixedCircleLoop { statement, r#loop } => {
                write!(f, "statement {statement}: loop {} mixes a circle with other curves", r#loop)
            }
            EmptyList { statement } => write!(f, "statement {statement}: empty list"),
            CrossingLoops { statement, profile, a, b } => {
                write!(f, "statement {statement}: loops {a} and {b} of profile {profile} cross")
            }
            InvalidSketchSize { statement, size } => write!(f, "statement {statement}: sketch size {size} must be positive"),
            DegenerateExtent { statement } => write!(f, "statement {statement}: extrusion has no thickness"),
            MissingBody { statement } => write!(f, "statement {statement}: boolean before any new body"),
            ConstraintType { statement, detail } => write!(f, "statement {statement}: {detail}"),
            NonFinite { statement } => write!(f, "statement {statement}: non-finite value"),
        }
    }
}

/// Outcome of [`CadProgram::validate`].
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.issues.is_empty()
    }
}

impl CadProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn plane_defs(&self) -> impl Iterator<Item = &PlaneDef> {
        self.statements.iter().filter_map(|s| match &s.command {
            Command::SketchPlane(p) => Some(p),
            _ => None,
        })
    }

    pub fn curves(&self) -> impl Iterator<Item = &Curve> {
        self.statements.iter().filter_map(|s| match &s.command {
            Command::Curve(c) => Some(c),
            _ => None,
        })
    }

    pub fn loop_defs(&self) -> impl Iterator<Item = &Vec<CurveId>> {
        self.statements.iter().filter_map(|s| match &s.command {
            Command::Loop(l) => Some(l),
            _ => None,
        })
    }

    pub fn profile_defs(&self) -> impl Iterator<Item = &Vec<LoopId>> {
        self.statements.iter().filter_map(|s| match &s.command {
            Command::Profile(p) => Some(p),
            _ => None,
        })
    }

    pub fn sketch_defs(&self) -> impl Iterator<Item = &SketchDef> {
        self.statements.iter().filter_map(|s| match &s.command {
            Command::Sketch(p) => Some(p),
            _ => None,
        })
    }

    pub fn constraints(&self) -> impl Iterator<Item = &Constraint> {
        self.statements.iter().filter_map(|s| match &s.command {
            Command::Constraint(c) => Some(c),
            _ => None,
        })
    }

    pub fn extrusions(&self) -> impl Iterator<Item = &Extrusion> {
        self.statements.iter().filter_map(|s| match &s.command {
            Command::Extrude(e) => Some(e),
            _ => None,
        })
    }

    pub fn curve(&self, id: CurveId) -> Option<&Curve> {
        self.curves().nth(id.0)
    }

    /// Mutable access to curve definitions in order, used to write back solved geometry.
    pub fn curves_mut(&mut self) -> impl Iterator<Item = &mut Curve> {
        self.statements.iter_mut().filter_map(|s| match &mut s.command {
            Command::Curve(c) => Some(c),
            _ => None,
        })
    }

    pub fn curve_count(&self) -> usize {
        self.curves().count()
    }

    pub fn constraint_count(&self) -> usize {
        self.constraints().count()
    }

    pub fn extrusion_count(&self) -> usize {
        self.extrusions().count()
    }

    /// Curves of a loop definition.
    pub fn loop_curves(&self, id: LoopId) -> Result<Loop, ModelError> {
        let ids = self.loop_defs().nth(id.0).ok_or(ModelError::DanglingReference { kind: "loop", index: id.0 })?;
        let curves: Vec<Curve> = self.curves().copied().collect();
        ids.iter()
            .map(|c| curves.get(c.0).copied().ok_or(ModelError::DanglingReference { kind: "curve", index: c.0 }))
            .collect::<Result<Vec<_>, _>>()
            .map(Loop::new)
    }

    /// Loop ids of the profile a sketch uses.
    pub fn sketch_loops(&self, id: SketchId) -> Result<Vec<LoopId>, ModelError> {
        let sk = self.sketch_defs().nth(id.0).ok_or(ModelError::DanglingReference { kind: "sketch", index: id.0 })?;
        self.profile_defs()
            .nth(sk.profile.0)
            .cloned()
            .ok_or(ModelError::DanglingReference { kind: "profile", index: sk.profile.0 })
    }

    /// Builds the geometric sketch: resolved plane plus classified profile.
    pub fn resolve_sketch(&self, id: SketchId, chord: ChordTol) -> Result<Sketch, ModelError> {
        let sk = *self.sketch_defs().nth(id.0).ok_or(ModelError::DanglingReference { kind: "sketch", index: id.0 })?;
        let plane = self
            .plane_defs()
            .nth(sk.plane.0)
            .ok_or(ModelError::DanglingReference { kind: "sketch plane", index: sk.plane.0 })?
            .resolve()?;
        let loops = self
            .sketch_loops(id)?
            .into_iter()
            .map(|l| self.loop_curves(l))
            .collect::<Result<Vec<_>, _>>()?;
        for (i, l) in loops.iter().enumerate() {
            let r = validate_loop(l, EPS_JOIN);
            if !r.closed {
                return Err(ModelError::OpenLoop { index: i, gap: r.max_gap() });
            }
        }
        let diag = Profile::diag_of(&loops);
        let profile = classify_profile(loops, chord.resolve(diag))?;
        Ok(Sketch { plane, profile, position: sk.position, size: sk.size })
    }

    /// One entry per loop per extrusion, in statement order.
    pub fn extract_pairs(&self) -> Result<PairView, ModelError> {
        let mut out = Vec::new();
        for (k, e) in self.extrusions().enumerate() {
            for lid in self.sketch_loops(e.sketch)? {
                out.push(PairEntry {
                    extrusion_index: k,
                    extrusion: *e,
                    sketch: e.sketch,
                    loop_id: lid,
                    curves: self.loop_curves(lid)?,
                });
            }
        }
        Ok(out)
    }

    /// Sketch owning each curve (through loop and profile membership), if any.
    pub fn curve_owners(&self) -> Vec<BTreeSet<SketchId>> {
        let mut owners = vec![BTreeSet::new(); self.curve_count()];
        let loops: Vec<&Vec<CurveId>> = self.loop_defs().collect();
        let profiles: Vec<&Vec<LoopId>> = self.profile_defs().collect();
        for (s, sk) in self.sketch_defs().enumerate() {
            let Some(p) = profiles.get(sk.profile.0) else { continue };
            for l in p.iter() {
                let Some(cs) = loops.get(l.0) else { continue };
                for c in cs.iter() {
                    if let Some(o) = owners.get_mut(c.0) {
                        o.insert(SketchId(s));
                    }
                }
            }
        }
        owners
    }

    /// Full structural and geometric validation.
    pub fn validate(&self, tol: &Tolerances) -> ValidationReport {
        let mut report = ValidationReport::default();
        let mut n_planes = 0;
        let mut curves: Vec<Curve> = Vec::new();
        let mut loops: Vec<Vec<CurveId>> = Vec::new();
        let mut profiles: Vec<Vec<LoopId>> = Vec::new();
        let mut sketches: Vec<SketchDef> = Vec::new();
        let mut seen_body = false;
        let owners = self.curve_owners();
        let issues = &mut report.issues;
        let dangling = |statement: usize, kind: &str, index: usize| ValidationIssue::DanglingReference {
            statement,
            detail: format!("{kind} {index} used before definition"),
        };

        for (si, st) in self.statements.iter().enumerate() {
            match &st.command {
                Command::SketchPlane(p) => {
                    n_planes += 1;
                    match p.resolve() {
                        Ok(plane) => {
                            if let Some(n) = p.normal {
                                match plane.normal_deviation_deg(n) {
                                    Some(dev) if dev > 1.0 => report
                                        .warnings
                                        .push(format!("statement {si}: explicit normal deviates {dev:.2}° from x × y")),
                                    None => report.warnings.push(format!("statement {si}: explicit normal is zero")),
                                    _ => {}
                                }
                            }
                        }
                        Err(e) => {
                            issues.push(ValidationIssue::DegenerateAxes { statement: si, detail: e.to_string() });
                        }
                    }
                }
                Command::Curve(c) => {
                    if !c.is_finite() {
                        issues.push(ValidationIssue::NonFinite { statement: si });
                    } else if c.is_degenerate(tol.eps_degenerate) {
                        issues.push(ValidationIssue::DegenerateCurve { statement: si, curve: curves.len() });
                    }
                    curves.push(*c);
                }
                Command::Loop(ids) => {
                    let idx = loops.len();
                    loops.push(ids.clone());
                    if ids.is_empty() {
                        issues.push(ValidationIssue::EmptyList { statement: si });
                        continue;
                    }
                    if let Some(bad) = ids.iter().find(|c| c.0 >= curves.len()) {
                        issues.push(dangling(si, "curve", bad.0));
                        continue;
                    }
                    let lp = Loop::new(ids.iter().map(|c| curves[c.0]).collect());
                    let r = validate_loop(&lp, tol.eps_join);
                    if r.mixed_circle {
                        issues.push(ValidationIssue::MixedCircleLoop { statement: si, r#loop: idx });
                    } else if !r.open_joints.is_empty() {
                        issues.push(ValidationIssue::OpenLoop {
                            statement: si,
                            r#loop: idx,
                            max_gap: r.max_gap(),
                            open_joints: r.open_joints,
                        });
                    }
                }
                Command::Profile(ids) => {
                    profiles.push(ids.clone());
                    if ids.is_empty() {
                        issues.push(ValidationIssue::EmptyList { statement: si });
                    } else if let Some(bad) = ids.iter().find(|l| l.0 >= loops.len()) {
                        issues.push(dangling(si, "loop", bad.0));
                    }
                }
                Command::Sketch(sk) => {
                    sketches.push(*sk);
                    if sk.plane.0 >= n_planes {
                        issues.push(dangling(si, "sketch plane", sk.plane.0));
                        continue;
                    }
                    if sk.profile.0 >= profiles.len() {
                        issues.push(dangling(si, "profile", sk.profile.0));
                        continue;
                    }
                    if !(sk.size > 0.0 && sk.size.is_finite()) {
                        issues.push(ValidationIssue::InvalidSketchSize { statement: si, size: sk.size });
                    }
                    if !sk.position.is_finite() {
                        issues.push(ValidationIssue::NonFinite { statement: si });
                    }
                    let lids = &profiles[sk.profile.0];
                    if lids.is_empty() || lids.iter().any(|l| l.0 >= loops.len()) {
                        continue;
                    }
                    let lps: Option<Vec<Loop>> = lids
                        .iter()
                        .map(|l| {
                            let ids = &loops[l.0];
                            if ids.is_empty() || ids.iter().any(|c| c.0 >= curves.len()) {
                                return None;
                            }
                            let lp = Loop::new(ids.iter().map(|c| curves[c.0]).collect());
                            validate_loop(&lp, tol.eps_join).closed.then_some(lp)
                        })
                        .collect();
                    // open or degenerate loops were already reported at their definition
                    if let Some(lps) = lps {
                        let diag = Profile::diag_of(&lps);
                        if let Err(ModelError::CrossingLoops(a, b)) = classify_profile(lps, tol.chord.resolve(diag)) {
                            issues.push(ValidationIssue::CrossingLoops { statement: si, profile: sk.profile.0, a, b });
                        }
                    }
                }
                Command::Constraint(c) => {
                    if let Some(bad) = c.curves().into_iter().find(|id| id.0 >= curves.len()) {
                        issues.push(dangling(si, "curve", bad.0));
                        continue;
                    }
                    if let Some(detail) = constraint_type_error(c, &curves) {
                        issues.push(ValidationIssue::ConstraintType { statement: si, detail });
                    }
                    let sk: BTreeSet<SketchId> =
                        c.curves().iter().flat_map(|id| owners.get(id.0).into_iter().flatten().copied()).collect();
                    if sk.len() > 1 {
                        issues.push(ValidationIssue::ConstraintType {
                            statement: si,
                            detail: format!("{} spans curves of several sketches", c.command_name()),
                        });
                    }
                }
                Command::Extrude(e) => {
                    if e.sketch.0 >= sketches.len() {
                        issues.push(dangling(si, "sketch", e.sketch.0));
                        continue;
                    }
                    if !(e.extent_one.is_finite() && e.extent_two.is_finite()) {
                        issues.push(ValidationIssue::NonFinite { statement: si });
                    } else {
                        let (w0, w1) = e.span();
                        let two_ok = e.extent_type != ExtentType::TwoSided || e.extent_two.abs() > tol.eps_degenerate;
                        if e.extent_one.abs() <= tol.eps_degenerate || !two_ok || w1 - w0 <= tol.eps_degenerate {
                            issues.push(ValidationIssue::DegenerateExtent { statement: si });
                        }
                    }
                    if !seen_body && e.operation != Operation::NewBody {
                        issues.push(ValidationIssue::MissingBody { statement: si });
                    }
                    seen_body = true;
                }
            }
        }
        report
    }
}

impl Profile {
    pub(crate) fn diag_of(loops: &[Loop]) -> f64 {
        loops
            .iter()
            .filter_map(Loop::bounds)
            .reduce(|(a0, a1), (b0, b1)| (Vec2::new(a0.u.min(b0.u), a0.v.min(b0.v)), Vec2::new(a1.u.max(b1.u), a1.v.max(b1.v))))
            .map_or(1.0, |(lo, hi)| lo.distance(hi))
    }
}

fn constraint_type_error(c: &Constraint, curves: &[Curve]) -> Option<String> {
    let kind = |id: CurveId| curves[id.0].kind();
    for l in c.required_lines() {
        if kind(l) != CurveKind::Line {
            return Some(format!("{} needs a line, curve {} is a {}", c.command_name(), l.0, kind(l).name()));
        }
    }
    match c {
        Constraint::Mirror { a, b, .. } if kind(*a) != kind(*b) => {
            Some(format!("make_mirror needs curves of the same type, got {} and {}", kind(*a).name(), kind(*b).name()))
        }
        Constraint::Tangent { a, b } if kind(*a) == CurveKind::Line && kind(*b) == CurveKind::Line => {
            Some("make_tangent is undefined between two lines".into())
        }
        Constraint::Coincident { a, b } => [a, b].into_iter().find_map(|p| match p {
            PointRef::Curve { curve, point } if !kind(*curve).has_point(*point) => {
                Some(format!("a {} has no {} point", kind(*curve).name(), point.name()))
            }
            _ => None,
        }),
        _ => None,
    }
}

/// Incremental construction of programs from code.
#[derive(Clone, Debug, Default)]
pub struct ProgramBuilder {
    program: CadProgram,
    counts: [usize; 5],
    pending: Option<String>,
}

impl ProgramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, command: Command) {
        let annotation = self.pending.take();
        self.program.statements.push(Statement { command, annotation });
    }

    fn next(&mut self, slot: usize) -> usize {
        let id = self.counts[slot];
        self.counts[slot] += 1;
        id
    }

    /// Attaches a comment to the next statement.
    pub fn annotate(&mut self, text: impl Into<String>) -> &mut Self {
        self.pending = Some(text.into());
        self
    }

    pub fn plane(&mut self, def: PlaneDef) -> PlaneId {
        self.push(Command::SketchPlane(def));
        PlaneId(self.next(0))
    }

    pub fn curve(&mut self, c: Curve) -> CurveId {
        self.push(Command::Curve(c));
        CurveId(self.next(1))
    }

    pub fn line(&mut self, start: Vec2, end: Vec2) -> CurveId {
        self.curve(Curve::line(start, end))
    }

    pub fn arc(&mut self, start: Vec2, end: Vec2, mid: Vec2) -> CurveId {
        self.curve(Curve::arc(start, end, mid))
    }

    pub fn circle(&mut self, center: Vec2, radius: f64) -> CurveId {
        self.curve(Curve::circle(center, radius))
    }

    pub fn add_loop(&mut self, curves: Vec<CurveId>) -> LoopId {
        self.push(Command::Loop(curves));
        LoopId(self.next(2))
    }

    /// Closed polygon through `points`, one line per edge.
    pub fn polygon(&mut self, points: &[Vec2]) -> LoopId {
        let n = points.len();
        let ids = (0..n).map(|i| self.line(points[i], points[(i + 1) % n])).collect();
        self.add_loop(ids)
    }

    /// Axis-aligned rectangle loop with corner `lo` and size `w × h`.
    pub fn rectangle(&mut self, lo: Vec2, w: f64, h: f64) -> LoopId {
        self.polygon(&[lo, lo + Vec2::new(w, 0.0), lo + Vec2::new(w, h), lo + Vec2::new(0.0, h)])
    }

    pub fn circle_loop(&mut self, center: Vec2, radius: f64) -> LoopId {
        let c = self.circle(center, radius);
        self.add_loop(vec![c])
    }

    pub fn profile(&mut self, loops: Vec<LoopId>) -> ProfileId {
        self.push(Command::Profile(loops));
        ProfileId(self.next(3))
    }

    pub fn sketch(&mut self, plane: PlaneId, profile: ProfileId) -> SketchId {
        self.sketch_placed(plane, profile, Vec2::ZERO, 1.0)
    }

    pub fn sketch_placed(&mut self, plane: PlaneId, profile: ProfileId, position: Vec2, size: f64) -> SketchId {
        self.push(Command::Sketch(SketchDef { plane, profile, position, size }));
        SketchId(self.next(4))
    }

    pub fn constrain(&mut self, c: Constraint) -> &mut Self {
        self.push(Command::Constraint(c));
        self
    }

    pub fn extrude(&mut self, sketch: SketchId, operation: Operation, extent_type: ExtentType, extent_one: f64, extent_two: f64) {
        let extent_two = if extent_type == ExtentType::TwoSided { extent_two } else { 0.0 };
        self.push(Command::Extrude(Extrusion { sketch, operation, extent_type, extent_one, extent_two }));
    }

    /// Convenience: plane + profile + sketch + extrusion for a list of loops.
    pub fn sketch_extrude(
        &mut self,
        plane: PlaneDef,
        loops: Vec<LoopId>,
        operation: Operation,
        extent_type: ExtentType,
        extent_one: f64,
        extent_two: f64,
    ) -> SketchId {
        let p = self.plane(plane);
        let pr = self.profile(loops);
        let s = self.sketch(p, pr);
        self.extrude(s, operation, extent_type, extent_one, extent_two);
        s
    }

    pub fn finish(mut self) -> CadProgram {
        self.program.trailing_annotation = self.pending.take();
        self.program
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xy() -> PlaneDef {
        PlaneDef::new(Vec3::ZERO, Vec3::X, Vec3::Y)
    }

    /// Tabletop plus four legs: two sketch-extrusion steps.
    pub(crate) fn table() -> CadProgram {
        let mut b = ProgramBuilder::new();
        let top = b.rectangle(Vec2::new(-1.0, -0.5), 2.0, 1.0);
        b.sketch_extrude(xy(), vec![top], Operation::NewBody, ExtentType::OneSided, 0.1, 0.0);
        let legs: Vec<LoopId> = [(-0.9, -0.4), (0.8, -0.4), (0.8, 0.3), (-0.9, 0.3)]
            .iter()
            .map(|&(x, y)| b.rectangle(Vec2::new(x, y), 0.1, 0.1))
            .collect();
        b.sketch_extrude(xy(), legs, Operation::Join, ExtentType::OneSided, -1.0, 0.0);
        b.finish()
    }

    #[test]
    fn table_has_five_pairs() {
        let p = table();
        assert!(p.validate(&Tolerances::default()).is_ok());
        let pairs = p.extract_pairs().unwrap();
        assert_eq!(pairs.len(), 5);
        assert_eq!(pairs.iter().map(|e| e.extrusion_index).collect::<Vec<_>>(), vec![0, 1, 1, 1, 1]);
    }

    #[test]
    fn single_circle_one_pair() {
        let mut b = ProgramBuilder::new();
        let c = b.circle_loop(Vec2::ZERO, 1.0);
        b.sketch_extrude(xy(), vec![c], Operation::NewBody, ExtentType::OneSided, 1.0, 0.0);
        assert_eq!(b.finish().extract_pairs().unwrap().len(), 1);
    }

    #[test]
    fn empty_program_no_pairs() {
        assert!(CadProgram::new().extract_pairs().unwrap().is_empty());
    }

    #[test]
    fn dangling_sketch_reported() {
        let mut p = table();
        p.statements.push(Statement {
            command: Command::Extrude(Extrusion {
                sketch: SketchId(9),
                operation: Operation::Join,
                extent_type: ExtentType::OneSided,
                extent_one: 1.0,
                extent_two: 0.0,
            }),
            annotation: None,
        });
        assert!(matches!(p.extract_pairs(), Err(ModelError::DanglingReference { kind: "sketch", index: 9 })));
        assert!(matches!(p.validate(&Tolerances::default()).issues[0], ValidationIssue::DanglingReference { .. }));
    }

    #[test]
    fn first_extrusion_must_create_body() {
        let mut b = ProgramBuilder::new();
        let c = b.circle_loop(Vec2::ZERO, 1.0);
        b.sketch_extrude(xy(), vec![c], Operation::Cut, ExtentType::OneSided, 1.0, 0.0);
        let r = b.finish().validate(&Tolerances::default());
        assert!(matches!(r.issues.as_slice(), [ValidationIssue::MissingBody { .. }]));
    }

    #[test]
    fn spans() {
        let e = |t, a, b| Extrusion { sketch: SketchId(0), operation: Operation::NewBody, extent_type: t, extent_one: a, extent_two: b };
        assert_eq!(e(ExtentType::OneSided, 2.0, 0.0).span(), (0.0, 2.0));
        assert_eq!(e(ExtentType::OneSided, -2.0, 0.0).span(), (-2.0, 0.0));
        assert_eq!(e(ExtentType::Symmetric, 1.0, 0.0).span(), (-0.5, 0.5));
        assert_eq!(e(ExtentType::TwoSided, 1.0, 0.25).span(), (-0.25, 1.0));
    }

    #[test]
    fn mirror_needs_same_types() {
        let mut b = ProgramBuilder::new();
        let l = b.line(Vec2::ZERO, Vec2::new(1.0, 0.0));
        let c = b.circle(Vec2::new(3.0, 0.0), 1.0);
        let axis = b.line(Vec2::new(0.0, -1.0), Vec2::new(0.0, 1.0));
        b.constrain(Constraint::Mirror { a: l, b: c, axis });
        let r = b.finish().validate(&Tolerances::default());
        assert!(matches!(r.issues.as_slice(), [ValidationIssue::ConstraintType { .. }]));
    }

    #[test]
    fn normal_mismatch_warns() {
        let mut b = ProgramBuilder::new();
        b.plane(PlaneDef { normal: Some(Vec3::X), ..xy() });
        let r = b.finish().validate(&Tolerances::default());
        assert!(r.is_ok());
        assert_eq!(r.warnings.len(), 1);
    }
}
