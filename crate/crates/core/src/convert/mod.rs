//! Import of external sketch-and-extrude records, length filtering and
//! dataset statistics.

mod record;

use std::collections::BTreeMap;
use std::io::Write;
use std::process::{Command as Process, Stdio};

use serde::{Deserialize, Serialize};

pub use record::{adapt_deepcad, ExternalEntity, ExternalExtrude, ExternalPlane, ExternalRecord, ExternalSketch, ExternalStep};

use crate::dsl::{count_tokens, serialize_program};
use crate::kernel::build_program;
use crate::model::{
    CadProgram, Curve, ExtentType, Operation, PlaneDef, ProgramBuilder, SketchId, SketchPlane, Tolerances, Vec2, Vec3,
};

/// Largest accepted angle between a record's z axis and `x × y`.
pub const MAX_NORMAL_DEVIATION_DEG: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConvertError {
    #[error("unsupported entity {entity} in loop {loop_index} of sketch {sketch}")]
    UnsupportedEntity { sketch: usize, loop_index: usize, entity: usize },
    #[error("arc sweeps {0:e} rad")]
    DegenerateArc(f64),
    #[error("invalid radius {0}")]
    InvalidRadius(f64),
    #[error("non-finite value in sketch {0}")]
    NonFinite(usize),
    #[error("plane of sketch {sketch}: {detail}")]
    InconsistentPlane { sketch: usize, detail: String },
    #[error("extrude refers to missing sketch {0}")]
    MissingSketch(usize),
    #[error("unknown tag `{0}`")]
    UnknownTag(String),
    #[error("malformed record: {0}")]
    Malformed(String),
    #[error("annotation hook failed: {0}")]
    Hook(String),
}

/// Three-point arc from center, radius and angles. The midpoint lies half
/// way along the traversed sweep.
pub fn arc_reparam(center: Vec2, radius: f64, start_angle: f64, end_angle: f64, ccw: bool) -> Result<Curve, ConvertError> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(ConvertError::InvalidRadius(radius));
    }
    if !(start_angle.is_finite() && end_angle.is_finite() && center.is_finite()) {
        return Err(ConvertError::Malformed("non-finite arc".into()));
    }
    let tau = std::f64::consts::TAU;
    let sweep = if ccw { end_angle - start_angle } else { start_angle - end_angle }.rem_euclid(tau);
    if sweep < 1e-9 {
        return Err(ConvertError::DegenerateArc(sweep));
    }
    let mid = if ccw { start_angle + sweep / 2.0 } else { start_angle - sweep / 2.0 };
    let at = |a: f64| center + Vec2::from_angle(a) * radius;
    Ok(Curve::arc(at(start_angle), at(end_angle), at(mid)))
}

fn v2(a: [f64; 2]) -> Vec2 {
    Vec2::new(a[0], a[1])
}

fn v3(a: [f64; 3]) -> Vec3 {
    Vec3::from_array(a)
}

pub fn parse_operation(tag: &str) -> Result<Operation, ConvertError> {
    let t = tag.to_ascii_lowercase();
    Operation::ALL.into_iter().find(|o| o.token() == t || o.token().replace('_', "") == t).ok_or_else(|| ConvertError::UnknownTag(tag.into()))
}

pub fn parse_extent_type(tag: &str) -> Result<ExtentType, ConvertError> {
    let t = tag.to_ascii_lowercase();
    ExtentType::ALL.into_iter().find(|e| e.token() == t || e.token().replace('_', "") == t).ok_or_else(|| ConvertError::UnknownTag(tag.into()))
}

fn entity_curve(e: &ExternalEntity, at: (usize, usize, usize)) -> Result<Curve, ConvertError> {
    match *e {
        ExternalEntity::Line { start, end } => Ok(Curve::line(v2(start), v2(end))),
        ExternalEntity::Arc { center, radius, start_angle, end_angle, ccw } => {
            arc_reparam(v2(center), radius, start_angle, end_angle, ccw)
        }
        ExternalEntity::Circle { center, radius } => {
            if !(radius > 0.0 && radius.is_finite()) {
                return Err(ConvertError::InvalidRadius(radius));
            }
            Ok(Curve::circle(v2(center), radius))
        }
        ExternalEntity::Unsupported => Err(ConvertError::UnsupportedEntity { sketch: at.0, loop_index: at.1, entity: at.2 }),
    }
}

fn plane_def(p: &ExternalPlane, sketch: usize) -> Result<PlaneDef, ConvertError> {
    let def = PlaneDef { origin: v3(p.origin), x_axis: v3(p.x_axis), y_axis: v3(p.y_axis), normal: p.z_axis.map(v3) };
    let plane = SketchPlane::new(def.origin, def.x_axis, def.y_axis)
        .map_err(|e| ConvertError::InconsistentPlane { sketch, detail: e.to_string() })?;
    if let Some(z) = def.normal {
        match plane.normal_deviation_deg(z) {
            Some(d) if d <= MAX_NORMAL_DEVIATION_DEG => {}
            Some(d) => return Err(ConvertError::InconsistentPlane { sketch, detail: format!("z axis is {d:.3}° off x × y") }),
            None => return Err(ConvertError::InconsistentPlane { sketch, detail: "z axis is zero".into() }),
        }
    }
    Ok(def)
}

/// Converts a neutral record into a program, one pair of statements
/// groups per sketch, loops kept in source order.
pub fn convert_record(record: &ExternalRecord) -> Result<CadProgram, ConvertError> {
    let mut b = ProgramBuilder::new();
    let mut sketches: Vec<SketchId> = Vec::new();
    for step in &record.sequence {
        match step {
            ExternalStep::Sketch(s) => {
                let k = sketches.len();
                if !(s.size.is_finite() && s.size > 0.0 && s.position.iter().all(|v| v.is_finite())) {
                    return Err(ConvertError::NonFinite(k));
                }
                let plane = b.plane(plane_def(&s.plane, k)?);
                let mut loops = Vec::with_capacity(s.loops.len());
                for (li, entities) in s.loops.iter().enumerate() {
                    let ids = entities
                        .iter()
                        .enumerate()
                        .map(|(ei, e)| entity_curve(e, (k, li, ei)).map(|c| b.curve(c)))
                        .collect::<Result<Vec<_>, _>>()?;
                    loops.push(b.add_loop(ids));
                }
                let profile = b.profile(loops);
                sketches.push(b.sketch_placed(plane, profile, v2(s.position), s.size));
            }
            ExternalStep::Extrude(e) => {
                let sketch = *sketches.get(e.sketch).ok_or(ConvertError::MissingSketch(e.sketch))?;
                let op = parse_operation(&e.operation)?;
                let ty = parse_extent_type(&e.extent_type)?;
                b.extrude(sketch, op, ty, e.extent_one, e.extent_two);
            }
        }
    }
    Ok(b.finish())
}

/// Reads one JSON record, applying the DeepCAD adapter first.
pub fn read_record(json: &str) -> Result<ExternalRecord, ConvertError> {
    let v: serde_json::Value = serde_json::from_str(json).map_err(|e| ConvertError::Malformed(e.to_string()))?;
    serde_json::from_value(adapt_deepcad(v)).map_err(|e| ConvertError::Malformed(e.to_string()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterPolicy {
    pub max_tokens: usize,
    pub drop_on_convert_error: bool,
}

impl Default for FilterPolicy {
    fn default() -> Self {
        Self { max_tokens: 1536, drop_on_convert_error: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum DropReason {
    TooLong { tokens: usize },
    BuildFailure { detail: String },
    ConvertFailure { detail: String },
}

impl std::fmt::Display for DropReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DropReason::TooLong { tokens } => write!(f, "too long ({tokens} tokens)"),
            DropReason::BuildFailure { detail } => write!(f, "build failure: {detail}"),
            DropReason::ConvertFailure { detail } => write!(f, "conversion failure: {detail}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FilterDecision {
    Keep,
    Drop(DropReason),
}

/// Length check first, then a full build.
pub fn apply_filter(program: &CadProgram, policy: &FilterPolicy, tol: &Tolerances) -> FilterDecision {
    let tokens = count_tokens(&serialize_program(program));
    if tokens > policy.max_tokens {
        return FilterDecision::Drop(DropReason::TooLong { tokens });
    }
    match build_program(program, tol) {
        Ok(_) => FilterDecision::Keep,
        Err(e) => FilterDecision::Drop(DropReason::BuildFailure { detail: e.to_string() }),
    }
}

/// One line of the conversion manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub code_path: Option<String>,
    pub kept: bool,
    pub reason: Option<String>,
    pub pair_count: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub programs: usize,
    pub pairs: usize,
    pub curves: usize,
    pub constraints: usize,
    pub pair_histogram: BTreeMap<usize, usize>,
    pub curve_histogram: BTreeMap<usize, usize>,
    pub constraint_histogram: BTreeMap<usize, usize>,
}

impl DatasetStats {
    pub fn add(&mut self, p: &CadProgram) {
        let (pairs, curves, constraints) = (p.extrusion_count(), p.curve_count(), p.constraint_count());
        self.programs += 1;
        self.pairs += pairs;
        self.curves += curves;
        self.constraints += constraints;
        *self.pair_histogram.entry(pairs).or_default() += 1;
        *self.curve_histogram.entry(curves).or_default() += 1;
        *self.constraint_histogram.entry(constraints).or_default() += 1;
    }

    /// Associative merge of partial statistics.
    pub fn merge(mut self, o: DatasetStats) -> DatasetStats {
        self.programs += o.programs;
        self.pairs += o.pairs;
        self.curves += o.curves;
        self.constraints += o.constraints;
        for (dst, src) in [
            (&mut self.pair_histogram, o.pair_histogram),
            (&mut self.curve_histogram, o.curve_histogram),
            (&mut self.constraint_histogram, o.constraint_histogram),
        ] {
            for (k, n) in src {
                *dst.entry(k).or_default() += n;
            }
        }
        self
    }
}

pub fn dataset_stats<'a>(programs: impl IntoIterator<Item = &'a CadProgram>) -> DatasetStats {
    let mut s = DatasetStats::default();
    for p in programs {
        s.add(p);
    }
    s
}

/// External command that writes a description of the program given on
/// stdin to stdout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotationHook {
    pub program: String,
    #[serde(default)]
    pub args: Vec<String>,
}

impl AnnotationHook {
    pub fn describe(&self, code: &str) -> Result<String, ConvertError> {
        let mut child = Process::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| ConvertError::Hook(e.to_string()))?;
        child
            .stdin
            .take()
            .expect("piped stdin")
            .write_all(code.as_bytes())
            .map_err(|e| ConvertError::Hook(e.to_string()))?;
        let out = child.wait_with_output().map_err(|e| ConvertError::Hook(e.to_string()))?;
        if !out.status.success() {
            return Err(ConvertError::Hook(format!("exit status {}", out.status)));
        }
        Ok(String::from_utf8_lossy(&out.stdout).trim_end().to_string())
    }

    /// Attaches the hook's output as the program's leading comment.
    pub fn annotate(&self, p: &mut CadProgram) -> Result<(), ConvertError> {
        let text = self.describe(&serialize_program(p))?;
        if let Some(first) = p.statements.first_mut() {
            first.annotation = Some(match first.annotation.take() {
                Some(old) => format!("{text}\n{old}"),
                None => text,
            });
        }
        Ok(())
    }
}
