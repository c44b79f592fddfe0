//! Executability check and geometric pair scoring of generated programs
//! against a reference, on a 0 to 100 scale.

mod hungarian;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use hungarian::max_weight_assignment;

use crate::dsl::parse_program;
use crate::kernel::{build_program_with, BuildLimits, SolidMesh};
use crate::model::{CadProgram, ExtentType, Operation, Tolerances, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreConfig {
    /// Normal deviation at which P drops to zero, degrees.
    pub max_normal_deg: f64,
    /// Origin offset at which P drops to zero, normalized units.
    pub max_origin_dist: f64,
    /// Chamfer distance at which L drops to zero, normalized units.
    pub max_chamfer: f64,
    /// Loop resampling density.
    pub samples: usize,
    pub time_budget_secs: f64,
    pub max_steps: Option<usize>,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self { max_normal_deg: 45.0, max_origin_dist: 0.25, max_chamfer: 0.25, samples: 256, time_budget_secs: 30.0, max_steps: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    Parse,
    Validate,
    Build,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub stage: Stage,
    pub detail: String,
}

pub struct Executed {
    pub program: CadProgram,
    pub mesh: SolidMesh,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScoreError {
    #[error("reference does not build: {0}")]
    InvalidReference(String),
}

fn clamp01(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

/// Builds an already parsed program under the configured budgets.
pub fn execute_program(program: CadProgram, cfg: &ScoreConfig) -> Result<Executed, Failure> {
    let tol = Tolerances::default();
    let report = program.validate(&tol);
    if let Some(issue) = report.issues.first() {
        return Err(Failure { stage: Stage::Validate, detail: issue.to_string() });
    }
    let limits = BuildLimits {
        deadline: Some(Instant::now() + Duration::from_secs_f64(cfg.time_budget_secs.max(0.0))),
        max_steps: cfg.max_steps,
    };
    match catch_unwind(AssertUnwindSafe(|| build_program_with(&program, &tol, limits))) {
        Ok(Ok((mesh, _))) => Ok(Executed { program, mesh }),
        Ok(Err(e)) => Err(Failure { stage: Stage::Build, detail: e.to_string() }),
        Err(_) => Err(Failure { stage: Stage::Build, detail: "kernel panicked".into() }),
    }
}

/// Parse, validate and build, reporting the first stage that fails.
pub fn execute_guarded(text: &str, cfg: &ScoreConfig) -> Result<Executed, Failure> {
    let program = parse_program(text).map_err(|errs| Failure {
        stage: Stage::Parse,
        detail: errs.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "),
    })?;
    execute_program(program, cfg)
}

/// Geometry of one loop-extrusion pair in the model's normalized frame.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairFeatures {
    pub origin: Vec3,
    pub normal: Vec3,
    pub operation: Operation,
    pub extent_type: ExtentType,
    pub extents: [f64; 2],
    pub loop_points: Vec<Vec3>,
}

/// Centroid-to-origin, bounding-box-diagonal-to-one frame of a mesh.
fn normalization(mesh: &SolidMesh) -> (Vec3, f64) {
    let c = mesh.centroid();
    let diag = mesh.aabb().map_or(1.0, |(lo, hi)| hi.distance(lo));
    (c, if diag > 0.0 { 1.0 / diag } else { 1.0 })
}

pub fn features_of(program: &CadProgram, mesh: &SolidMesh, samples: usize) -> Result<Vec<PairFeatures>, String> {
    let (c, k) = normalization(mesh);
    let norm = |p: Vec3| (p - c) * k;
    let tol = Tolerances::default();
    let pairs = program.extract_pairs().map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let sketch = program.resolve_sketch(pair.sketch, tol.chord).map_err(|e| e.to_string())?;
        let lengths: Vec<f64> = pair.curves.curves.iter().map(|cv| cv.length()).collect();
        let total: f64 = lengths.iter().sum();
        let mut loop_points = Vec::with_capacity(samples);
        let (mut ci, mut acc) = (0, 0.0);
        for s in 0..samples {
            let target = total * s as f64 / samples as f64;
            while ci + 1 < lengths.len() && acc + lengths[ci] <= target {
                acc += lengths[ci];
                ci += 1;
            }
            let t = if lengths[ci] > 0.0 { ((target - acc) / lengths[ci]).clamp(0.0, 1.0) } else { 0.0 };
            loop_points.push(norm(sketch.to_world(pair.curves.curves[ci].point_at(t), 0.0)));
        }
        let e = pair.extrusion;
        out.push(PairFeatures {
            origin: norm(sketch.to_world(crate::model::Vec2::ZERO, 0.0)),
            normal: sketch.plane.normal(),
            operation: e.operation,
            extent_type: e.extent_type,
            extents: [e.extent_one * k, e.extent_two * k],
            loop_points,
        });
    }
    Ok(out)
}

/// Builds the program and extracts normalized pair features.
pub fn extract_features(program: &CadProgram, cfg: &ScoreConfig) -> Result<Vec<PairFeatures>, Failure> {
    let ex = execute_program(program.clone(), cfg)?;
    features_of(&ex.program, &ex.mesh, cfg.samples).map_err(|detail| Failure { stage: Stage::Build, detail })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub p: f64,
    pub o: f64,
    pub l: f64,
}

impl PairScore {
    pub fn weighted(&self) -> f64 {
        0.2 * self.p + 0.2 * self.o + 0.6 * self.l
    }
}

fn mean_nearest(a: &[Vec3], b: &[Vec3]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    a.iter().map(|p| b.iter().map(|q| p.distance(*q)).fold(f64::INFINITY, f64::min)).sum::<f64>() / a.len() as f64
}

/// Symmetric mean nearest-point distance.
pub fn chamfer(a: &[Vec3], b: &[Vec3]) -> f64 {
    0.5 * (mean_nearest(a, b) + mean_nearest(b, a))
}

pub fn pair_scores(g: &PairFeatures, r: &PairFeatures, cfg: &ScoreConfig) -> PairScore {
    let a = g.normal.angle_to(r.normal);
    let theta = a.min(std::f64::consts::PI - a).to_degrees();
    let delta = g.origin - r.origin;
    let along = delta.dot(r.normal);
    let d_o = along.abs() + (delta - r.normal * along).norm();
    let p = clamp01(1.0 - theta / cfg.max_normal_deg) * clamp01(1.0 - d_o / cfg.max_origin_dist);
    let (eg, er) = (g.extents[0], r.extents[0]);
    let o = 0.5 * f64::from(u8::from(g.operation == r.operation))
        + 0.3 * f64::from(u8::from(g.extent_type == r.extent_type))
        + 0.2 * clamp01(1.0 - (eg - er).abs() / er.abs().max(1e-6));
    let l = clamp01(1.0 - chamfer(&g.loop_points, &r.loop_points) / cfg.max_chamfer);
    PairScore { p, o, l }
}

/// Optimal generated-to-reference pairing; entry `i` is the reference
/// pair matched to generated pair `i`.
pub fn match_pairs(gen: &[PairFeatures], reference: &[PairFeatures], cfg: &ScoreConfig) -> Vec<Option<(usize, PairScore)>> {
    let scores: Vec<Vec<PairScore>> = gen.iter().map(|g| reference.iter().map(|r| pair_scores(g, r, cfg)).collect()).collect();
    let weights: Vec<Vec<f64>> = scores.iter().map(|row| row.iter().map(PairScore::weighted).collect()).collect();
    max_weight_assignment(&weights).into_iter().enumerate().map(|(i, j)| j.map(|j| (j, scores[i][j]))).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub gen_index: usize,
    pub matched_ref_index: Option<usize>,
    pub p: f64,
    pub o: f64,
    pub l: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub r: u8,
    pub pairs: Vec<PairReport>,
    pub n_ref: usize,
    pub total: f64,
    pub failure: Option<Failure>,
}

/// Reference features computed once, for scoring many candidates.
pub struct Reference {
    features: Vec<PairFeatures>,
}

impl Reference {
    pub fn new(program: &CadProgram, cfg: &ScoreConfig) -> Result<Self, ScoreError> {
        let features = extract_features(program, cfg).map_err(|f| ScoreError::InvalidReference(f.detail))?;
        if features.is_empty() {
            return Err(ScoreError::InvalidReference("no loop-extrusion pairs".into()));
        }
        Ok(Self { features })
    }

    pub fn pair_count(&self) -> usize {
        self.features.len()
    }

    pub fn score(&self, gen_text: &str, cfg: &ScoreConfig) -> ScoreReport {
        let n_ref = self.features.len();
        let failed = |failure: Failure| ScoreReport { r: 0, pairs: vec![], n_ref, total: 0.0, failure: Some(failure) };
        let ex = match execute_guarded(gen_text, cfg) {
            Ok(ex) => ex,
            Err(f) => return failed(f),
        };
        let gen = match features_of(&ex.program, &ex.mesh, cfg.samples) {
            Ok(g) => g,
            Err(detail) => return failed(Failure { stage: Stage::Build, detail }),
        };
        let matches = match_pairs(&gen, &self.features, cfg);
        let mut sum = 0.0;
        let pairs = matches
            .iter()
            .enumerate()
            .map(|(i, m)| match m {
                Some((j, s)) => {
                    sum += s.weighted();
                    PairReport { gen_index: i, matched_ref_index: Some(*j), p: s.p, o: s.o, l: s.l }
                }
                None => PairReport { gen_index: i, matched_ref_index: None, p: 0.0, o: 0.0, l: 0.0 },
            })
            .collect();
        let total = (10.0 + 90.0 / n_ref as f64 * sum).clamp(0.0, 100.0);
        ScoreReport { r: 1, pairs, n_ref, total, failure: None }
    }
}

pub fn score(gen_text: &str, reference: &CadProgram, cfg: &ScoreConfig) -> Result<ScoreReport, ScoreError> {
    Ok(Reference::new(reference, cfg)?.score(gen_text, cfg))
}

/// Summary over a batch of scored cases.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BatchAggregate {
    pub cases: usize,
    pub overall: f64,
    pub executable: usize,
    pub unfinished: usize,
    pub run_with_errors: usize,
    pub completely_correct: usize,
}

pub const COMPLETELY_CORRECT: f64 = 99.5;

pub fn aggregate<'a>(reports: impl IntoIterator<Item = &'a ScoreReport>) -> BatchAggregate {
    let mut a = BatchAggregate::default();
    let mut sum = 0.0;
    for r in reports {
        a.cases += 1;
        sum += r.total;
        match &r.failure {
            None => a.executable += 1,
            Some(f) if f.stage == Stage::Parse => a.unfinished += 1,
            Some(_) => a.run_with_errors += 1,
        }
        if r.total >= COMPLETELY_CORRECT {
            a.completely_correct += 1;
        }
    }
    if a.cases > 0 {
        a.overall = sum / a.cases as f64;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::serialize_program;
    use crate::model::{Command, PlaneDef, ProgramBuilder, Vec2};

    fn cfg() -> ScoreConfig {
        ScoreConfig::default()
    }

    fn plate_with_hole(hole: bool) -> CadProgram {
        let mut b = ProgramBuilder::new();
        let pl = b.plane(PlaneDef::new(Vec3::ZERO, Vec3::X, Vec3::Y));
        let sq = b.rectangle(Vec2::new(-1.0, -1.0), 2.0, 2.0);
        let pr = b.profile(vec![sq]);
        let s = b.sketch(pl, pr);
        b.extrude(s, Operation::NewBody, ExtentType::OneSided, 0.5, 0.0);
        if hole {
            let pl = b.plane(PlaneDef::new(Vec3::new(0.0, 0.0, -0.1), Vec3::X, Vec3::Y));
            let c = b.circle_loop(Vec2::ZERO, 0.4);
            let pr = b.profile(vec![c]);
            let s = b.sketch(pl, pr);
            b.extrude(s, Operation::Cut, ExtentType::OneSided, 0.7, 0.0);
        }
        b.finish()
    }

    fn scaled(p: &CadProgram, k: f64) -> CadProgram {
        let mut p = p.clone();
        for s in &mut p.statements {
            match &mut s.command {
                Command::SketchPlane(d) => d.origin = d.origin * k,
                Command::Sketch(d) => {
                    d.position = d.position * k;
                    d.size *= k;
                }
                Command::Extrude(e) => {
                    e.extent_one *= k;
                    e.extent_two *= k;
                }
                _ => {}
            }
        }
        p
    }

    #[test]
    fn self_score_is_100() {
        let p = plate_with_hole(true);
        let r = score(&serialize_program(&p), &p, &cfg()).unwrap();
        assert_eq!(r.r, 1);
        assert!((r.total - 100.0).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn scaled_copy_scores_100() {
        let p = plate_with_hole(true);
        let r = score(&serialize_program(&scaled(&p, 10.0)), &p, &cfg()).unwrap();
        assert!((r.total - 100.0).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn features_are_scale_free() {
        let p = plate_with_hole(true);
        let a = extract_features(&p, &cfg()).unwrap();
        let b = extract_features(&scaled(&p, 10.0), &cfg()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!(x.origin.distance(y.origin) < 1e-9);
            assert!((x.extents[0] - y.extents[0]).abs() < 1e-9);
            assert!(x.loop_points.iter().zip(&y.loop_points).all(|(p, q)| p.distance(*q) < 1e-9));
        }
    }

    #[test]
    fn circle_loop_samples_are_concentric() {
        let f = extract_features(&plate_with_hole(true), &cfg()).unwrap();
        let pts = &f[1].loop_points;
        assert_eq!(pts.len(), 256);
        let c = pts.iter().fold(Vec3::ZERO, |a, p| a + *p) * (1.0 / pts.len() as f64);
        let r0 = pts[0].distance(c);
        assert!(pts.iter().all(|p| (p.distance(c) - r0).abs() < 1e-6));
    }

    #[test]
    fn one_of_two_pairs_scores_55() {
        let r = score(&serialize_program(&plate_with_hole(false)), &plate_with_hole(true), &cfg()).unwrap();
        assert!((r.total - 55.0).abs() < 1e-6, "{r:?}");
        assert_eq!(r.pairs[0].matched_ref_index, Some(0));
    }

    #[test]
    fn unrunnable_text_scores_0() {
        let p = plate_with_hole(true);
        let text = serialize_program(&p);
        let r = score(&text[..text.len() / 2], &p, &cfg()).unwrap();
        assert_eq!((r.r, r.total), (0, 0.0));
        assert_eq!(r.failure.unwrap().stage, Stage::Parse);
    }

    #[test]
    fn emptying_cut_is_a_build_failure() {
        let mut p = plate_with_hole(false);
        let mut e = *p.extrusions().next().unwrap();
        e.operation = Operation::Cut;
        e.extent_one = 2.0;
        p.statements.push(crate::model::Statement { command: Command::Extrude(e), annotation: None });
        let f = execute_guarded(&serialize_program(&p), &cfg()).err().unwrap();
        assert_eq!(f.stage, Stage::Build);
    }

    #[test]
    fn operation_mismatch_costs_half_of_o() {
        let f = extract_features(&plate_with_hole(false), &cfg()).unwrap();
        let mut g = f[0].clone();
        g.operation = Operation::Cut;
        let mut r = f[0].clone();
        r.operation = Operation::Join;
        let s = pair_scores(&g, &r, &cfg());
        assert_eq!((s.p, s.o, s.l), (1.0, 0.5, 1.0));
    }

    #[test]
    fn translation_along_normal_reaches_l_boundary() {
        let f = extract_features(&plate_with_hole(false), &cfg()).unwrap();
        let mut g = f[0].clone();
        for p in &mut g.loop_points {
            *p += g.normal * 0.25;
        }
        assert!((chamfer(&g.loop_points, &f[0].loop_points) - 0.25).abs() < 1e-12);
        assert!(pair_scores(&g, &f[0], &cfg()).l.abs() < 1e-9);
    }

    #[test]
    fn reversed_pairs_are_rematched() {
        let f = extract_features(&plate_with_hole(true), &cfg()).unwrap();
        let rev: Vec<_> = f.iter().rev().cloned().collect();
        let m = match_pairs(&rev, &f, &cfg());
        assert_eq!(m.iter().map(|x| x.unwrap().0).collect::<Vec<_>>(), vec![1, 0]);
    }

    #[test]
    fn dropping_a_pair_never_helps() {
        let full = plate_with_hole(true);
        let a = score(&serialize_program(&full), &full, &cfg()).unwrap().total;
        let b = score(&serialize_program(&plate_with_hole(false)), &full, &cfg()).unwrap().total;
        assert!(b <= a);
    }

    #[test]
    fn aggregate_counts() {
        let ok = ScoreReport { r: 1, pairs: vec![], n_ref: 1, total: 100.0, failure: None };
        let parse = ScoreReport { r: 0, pairs: vec![], n_ref: 1, total: 0.0, failure: Some(Failure { stage: Stage::Parse, detail: String::new() }) };
        let build = ScoreReport { failure: Some(Failure { stage: Stage::Build, detail: String::new() }), ..parse.clone() };
        let a = aggregate([&ok, &parse, &build]);
        assert_eq!((a.cases, a.executable, a.unfinished, a.run_with_errors, a.completely_correct), (3, 1, 1, 1, 1));
        assert!((a.overall - 100.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_reference_is_an_error() {
        let p = ProgramBuilder::new().finish();
        assert!(matches!(score("", &p, &cfg()), Err(ScoreError::InvalidReference(_))));
    }
}
