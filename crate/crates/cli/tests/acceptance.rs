use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use ecad_cli::dataset::dataset_gen;
use ecad_cli::Config;
use ecad_core::constraints::{analyze_dof, solve_constraints, ConstraintSystem, DofStatus};
use ecad_core::convert::{arc_reparam, convert_record, read_record};
use ecad_core::dsl::{parse_program, serialize_program};
use ecad_core::kernel::{build_program, mesh_metrics, BuildError, KernelError};
use ecad_core::model::{
    CadProgram, Constraint, Curve, CurveId, ExtentType, Operation, PlaneDef, PointKind, PointRef, ProgramBuilder, Tolerances, Vec2, Vec3,
};
use ecad_core::render::{isometric_axis, render_view, sample_view_dir, ViewSpec};
use ecad_core::score::{max_weight_assignment, Reference, ScoreConfig};
use ecad_oracle::{random_primitive_program, random_program, random_sketch, voxel_agreement, AnalyticSolid};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn json_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).filter(|p| p.extension().is_some_and(|e| e == "json")).collect();
    v.sort();
    v
}

fn mutate(text: &str, rng: &mut impl Rng, kind: usize) -> String {
    let lines: Vec<&str> = text.lines().collect();
    let code: Vec<usize> = (0..lines.len()).filter(|&i| !lines[i].starts_with('#')).collect();
    let pick = |rng: &mut dyn rand::RngCore, f: &dyn Fn(&str) -> bool| -> usize {
        let c: Vec<usize> = code.iter().copied().filter(|&i| f(lines[i])).collect();
        c[rng.random_range(0..c.len())]
    };
    let mut out: Vec<String> = lines.iter().map(|s| s.to_string()).collect();
    match kind {
        0 => {
            // truncated right after an opening parenthesis
            let i = pick(rng, &|l| l.contains('('));
            let cut = out[i].find('(').unwrap() + 1;
            out[i].truncate(cut);
            out.truncate(i + 1);
        }
        1 => {
            let i = pick(rng, &|l| l.contains("= add_"));
            out[i] = out[i].replacen("= add_", "= add_spline_", 1);
        }
        2 => {
            let i = pick(rng, &|l| l.contains(".append("));
            let open = out[i].find('(').unwrap();
            out[i] = format!("{}(Ghost9)", &out[i][..open]);
        }
        3 => {
            let i = pick(rng, &|l| l.ends_with(')'));
            out[i].pop();
        }
        _ => {
            let i = rng.random_range(0..=out.len());
            out.insert(i, "Line0 = = 1".to_string());
        }
    }
    out.join("\n") + "\n"
}

fn dsl_round_trip() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for i in 0..1000 {
        let p = random_program(&mut rng);
        let text = serialize_program(&p);
        let back = parse_program(&text).map_err(|e| format!("program {i} failed to parse: {}", e[0]))?;
        ensure(back == p, || format!("program {i} changed on round trip"))?;
    }
    for i in 0..100 {
        let text = serialize_program(&random_program(&mut rng));
        let bad = mutate(&text, &mut rng, i % 5);
        ensure(parse_program(&bad).is_err(), || format!("mutation {i} (kind {}) parsed:\n{bad}", i % 5))?;
    }
    let el = t.elapsed();
    ensure(el < Duration::from_secs(10), || format!("took {el:?}"))?;
    Ok(format!("1000 round trips exact, 100 mutations rejected, {el:.2?}"))
}

fn extruded(loop_fn: impl FnOnce(&mut ProgramBuilder) -> Vec<ecad_core::model::LoopId>, h: f64) -> ProgramBuilder {
    let mut b = ProgramBuilder::new();
    let pl = b.plane(PlaneDef::new(Vec3::ZERO, Vec3::X, Vec3::Y));
    let loops = loop_fn(&mut b);
    let pr = b.profile(loops);
    let s = b.sketch(pl, pr);
    b.extrude(s, Operation::NewBody, ExtentType::OneSided, h, 0.0);
    b
}

fn kernel_analytics() -> Outcome {
    let tol = Tolerances::default();
    let cube = extruded(|b| vec![b.rectangle(Vec2::ZERO, 1.0, 1.0)], 1.0).finish();
    let cylinder = extruded(|b| vec![b.circle_loop(Vec2::ZERO, 1.0)], 2.0).finish();
    let mut annulus = extruded(|b| vec![b.circle_loop(Vec2::ZERO, 1.0)], 1.0);
    let pl = annulus.plane(PlaneDef::new(Vec3::new(0.0, 0.0, -0.1), Vec3::X, Vec3::Y));
    let c = annulus.circle_loop(Vec2::ZERO, 0.5);
    let pr = annulus.profile(vec![c]);
    let s = annulus.sketch(pl, pr);
    annulus.extrude(s, Operation::Cut, ExtentType::OneSided, 1.2, 0.0);
    let annulus = annulus.finish();
    let mut vols = Vec::new();
    for (name, p, expected, rel) in [("cube", &cube, 1.0, 1e-12), ("cylinder", &cylinder, 2.0 * PI, 0.01), ("annulus", &annulus, 0.75 * PI, 0.02)] {
        let (mesh, _) = build_program(p, &tol).map_err(|e| format!("{name}: {e}"))?;
        let m = mesh_metrics(&mesh);
        ensure(m.is_manifold, || format!("{name} is not watertight"))?;
        let err = (m.volume - expected).abs() / expected;
        ensure(err <= rel, || format!("{name} volume {} vs {expected} (rel {err:.2e})", m.volume))?;
        vols.push(format!("{name} {:.2e}", err));
    }
    let mut fixtures = 0;
    for f in json_files(&root().join("fixtures/converter")) {
        let p = convert_record(&read_record(&std::fs::read_to_string(&f).unwrap()).unwrap()).unwrap();
        let (mesh, _) = build_program(&p, &tol).map_err(|e| format!("{}: {e}", f.display()))?;
        ensure(mesh_metrics(&mesh).is_manifold, || format!("{} is not watertight", f.display()))?;
        fixtures += 1;
    }
    Ok(format!("relative volume errors: {}; {fixtures} fixture solids watertight", vols.join(", ")))
}

fn voxel_oracle() -> Outcome {
    let t = Instant::now();
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let programs: Vec<CadProgram> = (0..200).map(|_| random_primitive_program(&mut rng, 3)).collect();
    let results: Vec<Result<(f64, bool), String>> = programs
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let solid = AnalyticSolid::from_program(p).ok_or_else(|| format!("program {i}: oracle could not read it"))?;
            let (mesh, solid) = match build_program(p, &tol) {
                Ok((m, _)) => (Some(m), solid),
                Err(BuildError { error: KernelError::EmptyResult { step }, .. }) => (None, solid.prefix(step + 1)),
                Err(e) => return Err(format!("program {i}: {e}")),
            };
            let watertight = mesh.as_ref().is_none_or(|m| mesh_metrics(m).is_manifold);
            let a = voxel_agreement(&solid, mesh.as_ref(), 64, solid.surface_band(tol.chord));
            Ok((a.ratio(), watertight))
        })
        .collect();
    let mut worst = 1.0f64;
    for (i, r) in results.into_iter().enumerate() {
        let (ratio, watertight) = r?;
        ensure(watertight, || format!("program {i} mesh is not watertight"))?;
        ensure(ratio >= 0.995, || format!("program {i} agreement {ratio:.5}:\n{}", serialize_program(&programs[i])))?;
        worst = worst.min(ratio);
    }
    let el = t.elapsed();
    ensure(el < Duration::from_secs(300), || format!("took {el:?}"))?;
    Ok(format!("200 programs at 64^3, worst agreement {:.4}%, {el:.2?}", worst * 100.0))
}

fn line(a: (f64, f64), b: (f64, f64)) -> Curve {
    Curve::line(Vec2::new(a.0, a.1), Vec2::new(b.0, b.1))
}

fn pt(curve: usize, point: PointKind) -> PointRef {
    PointRef::Curve { curve: CurveId(curve), point }
}

fn rectangle_constraints(anchor: bool) -> (Vec<Curve>, Vec<Constraint>) {
    let curves = vec![line((0.1, -0.1), (2.2, 0.1)), line((2.2, 0.1), (1.9, 1.2)), line((1.9, 1.2), (-0.2, 0.9)), line((-0.2, 0.9), (0.1, -0.1))];
    let mut cs = Vec::new();
    for i in 0..4 {
        cs.push(Constraint::Coincident { a: pt(i, PointKind::End), b: pt((i + 1) % 4, PointKind::Start) });
    }
    cs.push(Constraint::Horizontal { line: CurveId(0) });
    cs.push(Constraint::Horizontal { line: CurveId(2) });
    cs.push(Constraint::Vertical { line: CurveId(1) });
    cs.push(Constraint::Vertical { line: CurveId(3) });
    cs.push(Constraint::FixSize { curve: CurveId(0), size: 2.0 });
    cs.push(Constraint::FixSize { curve: CurveId(1), size: 1.0 });
    if anchor {
        cs.push(Constraint::Coincident { a: pt(0, PointKind::Start), b: PointRef::Fixed(Vec2::ZERO) });
    }
    (curves, cs)
}

fn central_jacobian(sys: &ConstraintSystem, x: &[f64], h: f64) -> Vec<Vec<f64>> {
    let m = sys.residuals(x).len();
    let mut cols = Vec::new();
    for k in 0..x.len() {
        let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
        xp[k] += h;
        xm[k] -= h;
        let (rp, rm) = (sys.residuals(&xp), sys.residuals(&xm));
        cols.push((0..m).map(|r| (rp[r] - rm[r]) / (2.0 * h)).collect::<Vec<_>>());
    }
    cols
}

fn constraint_suite() -> Outcome {
    let (curves, cs) = rectangle_constraints(true);
    let r = solve_constraints(&curves, &cs).map_err(|e| e.to_string())?;
    let expected = [(0.0, 0.0), (2.0, 0.0), (2.0, 1.0), (0.0, 1.0)];
    let mut max_err = 0.0f64;
    for (i, c) in r.curves.iter().enumerate() {
        let (ex, ey) = expected[i];
        max_err = max_err.max((c.start().u - ex).abs()).max((c.start().v - ey).abs());
    }
    ensure(max_err <= 1e-6, || format!("rectangle corner error {max_err:.2e}"))?;

    let circle = Curve::circle(Vec2::new(0.3, 0.2), 0.8);
    let arc = Curve::arc(Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0), Vec2::new(0.7, 0.7));
    let l0 = line((0.0, 0.0), (1.0, 0.1));
    let l1 = line((0.2, 1.0), (1.1, 1.3));
    let axis = line((0.0, -1.0), (0.0, 1.0));
    let (rect, rect_cs) = rectangle_constraints(true);
    let (rect_free, rect_free_cs) = rectangle_constraints(false);
    let mut rect_redundant = rect_cs.clone();
    rect_redundant.push(Constraint::Parallel { a: CurveId(0), b: CurveId(2) });
    let cases: Vec<(&str, Vec<Curve>, Vec<Constraint>, usize, DofStatus)> = vec![
        ("free line", vec![l0], vec![], 4, DofStatus::UnderConstrained),
        ("free circle", vec![circle], vec![], 3, DofStatus::UnderConstrained),
        ("free arc", vec![arc], vec![], 6, DofStatus::UnderConstrained),
        (
            "horizontal line of fixed length",
            vec![l0],
            vec![Constraint::Horizontal { line: CurveId(0) }, Constraint::FixSize { curve: CurveId(0), size: 1.0 }],
            2,
            DofStatus::UnderConstrained,
        ),
        ("anchored line start", vec![l0], vec![Constraint::Coincident { a: pt(0, PointKind::Start), b: PointRef::Fixed(Vec2::ZERO) }], 2, DofStatus::UnderConstrained),
        ("parallel lines", vec![l0, l1], vec![Constraint::Parallel { a: CurveId(0), b: CurveId(1) }], 7, DofStatus::UnderConstrained),
        (
            "perpendicular corner",
            vec![l0, l1],
            vec![Constraint::Coincident { a: pt(0, PointKind::End), b: pt(1, PointKind::Start) }, Constraint::Perpendicular { a: CurveId(0), b: CurveId(1) }],
            5,
            DofStatus::UnderConstrained,
        ),
        ("anchored rectangle", rect.clone(), rect_cs, 0, DofStatus::FullyDefined),
        ("floating rectangle", rect_free, rect_free_cs, 2, DofStatus::UnderConstrained),
        ("rectangle with redundant parallel", rect, rect_redundant, 0, DofStatus::OverConstrainedConsistent),
        (
            "pinned circle of fixed radius",
            vec![circle],
            vec![Constraint::Coincident { a: pt(0, PointKind::Center), b: PointRef::Fixed(Vec2::ZERO) }, Constraint::FixSize { curve: CurveId(0), size: 1.0 }],
            0,
            DofStatus::FullyDefined,
        ),
        ("line tangent to circle", vec![l1, circle], vec![Constraint::Tangent { a: CurveId(1), b: CurveId(0) }], 6, DofStatus::UnderConstrained),
        ("mirrored lines", vec![l0, l1, axis], vec![Constraint::Mirror { a: CurveId(0), b: CurveId(1), axis: CurveId(2) }], 8, DofStatus::UnderConstrained),
    ];
    for (name, curves, cs, dof, status) in &cases {
        let r = analyze_dof(curves, cs).map_err(|e| format!("{name}: {e}"))?;
        ensure(r.dof == *dof && r.status == *status, || format!("{name}: dof {} {:?}, expected {dof} {status:?}", r.dof, r.status))?;
    }
    let hv = analyze_dof(&[l0], &[Constraint::Horizontal { line: CurveId(0) }, Constraint::Vertical { line: CurveId(0) }]).map_err(|e| e.to_string())?;
    ensure(hv.status == DofStatus::OverConstrainedInconsistent, || format!("horizontal and vertical line: {:?}", hv.status))?;

    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let (curves, cs) = random_sketch(&mut rng);
        let sys = ConstraintSystem::new(&curves, &cs).map_err(|e| format!("sketch {i}: {e}"))?;
        let x = sys.params().values().to_vec();
        let analytic = sys.jacobian(&x);
        let numeric = central_jacobian(&sys, &x, 1e-6);
        for (k, col) in numeric.iter().enumerate() {
            for (r, v) in col.iter().enumerate() {
                worst = worst.max((analytic[(r, k)] - v).abs());
            }
        }
    }
    ensure(worst <= 1e-5, || format!("Jacobian mismatch {worst:.2e}"))?;
    Ok(format!("rectangle error {max_err:.1e}, {} DOF cases + inconsistency, Jacobian max diff {worst:.1e}", cases.len()))
}

fn plate(hole: bool) -> CadProgram {
    let mut b = extruded(|b| vec![b.rectangle(Vec2::new(-1.0, -1.0), 2.0, 2.0)], 0.5);
    if hole {
        let pl = b.plane(PlaneDef::new(Vec3::new(0.0, 0.0, -0.1), Vec3::X, Vec3::Y));
        let c = b.circle_loop(Vec2::ZERO, 0.4);
        let pr = b.profile(vec![c]);
        let s = b.sketch(pl, pr);
        b.extrude(s, Operation::Cut, ExtentType::OneSided, 0.7, 0.0);
    }
    b.finish()
}

fn brute_best(w: &[Vec<f64>]) -> f64 {
    fn go(w: &[Vec<f64>], i: usize, used: &mut [bool], left: usize) -> f64 {
        if i == w.len() {
            return if left == 0 { 0.0 } else { f64::NEG_INFINITY };
        }
        let mut best = go(w, i + 1, used, left);
        for j in 0..used.len() {
            if !used[j] && left > 0 {
                used[j] = true;
                best = best.max(w[i][j] + go(w, i + 1, used, left - 1));
                used[j] = false;
            }
        }
        best
    }
    let cols = w[0].len();
    go(w, 0, &mut vec![false; cols], w.len().min(cols))
}

fn scorer_laws() -> Outcome {
    let cfg = ScoreConfig::default();
    let tol = Tolerances::default();
    let mut corpus: Vec<CadProgram> = Vec::new();
    for f in json_files(&root().join("fixtures/converter")) {
        corpus.push(convert_record(&read_record(&std::fs::read_to_string(&f).unwrap()).unwrap()).unwrap());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    while corpus.len() < 80 {
        let p = random_primitive_program(&mut rng, 3);
        if build_program(&p, &tol).is_ok() {
            corpus.push(p);
        }
    }
    for (i, p) in corpus.iter().enumerate() {
        let r = Reference::new(p, &cfg).map_err(|e| format!("corpus {i}: {e}"))?;
        let s = r.score(&serialize_program(p), &cfg);
        ensure((s.total - 100.0).abs() <= 1e-6, || format!("corpus {i} self-score {}", s.total))?;
    }
    let cube_ref = Reference::new(&corpus[0], &cfg).map_err(|e| e.to_string())?;
    for bad in ["", "Line0 = add_line((0, 0), (1, 0)\n", "Extrude0 = add_extrude(Sketch0, new_body, one_sided, 1)\n", "not a program at all"] {
        let s = cube_ref.score(bad, &cfg);
        ensure(s.total == 0.0 && s.failure.is_some(), || format!("unrunnable text scored {}", s.total))?;
    }
    let open = std::fs::read_to_string(root().join("fixtures/programs/open_loop.ecad")).unwrap();
    ensure(cube_ref.score(&open, &cfg).total == 0.0, || "open loop program scored above 0".into())?;

    let half = Reference::new(&plate(true), &cfg).map_err(|e| e.to_string())?.score(&serialize_program(&plate(false)), &cfg);
    ensure((half.total - 55.0).abs() <= 1e-6, || format!("one of two pairs scored {}", half.total))?;

    let mut cases = 0;
    for rows in 1..=6 {
        for cols in 1..=6 {
            for _ in 0..25 {
                let w: Vec<Vec<f64>> = (0..rows).map(|_| (0..cols).map(|_| rng.random::<f64>()).collect()).collect();
                let a = max_weight_assignment(&w);
                let got: f64 = a.iter().enumerate().filter_map(|(i, j)| j.map(|j| w[i][j])).sum();
                ensure((got - brute_best(&w)).abs() < 1e-9, || format!("assignment not optimal on {rows}x{cols}"))?;
                cases += 1;
            }
        }
    }

    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..60 {
        let a = &corpus[rng.random_range(0..corpus.len())];
        let b = &corpus[rng.random_range(0..corpus.len())];
        let s = Reference::new(a, &cfg).map_err(|e| e.to_string())?.score(&serialize_program(b), &cfg);
        ensure((0.0..=100.0).contains(&s.total), || format!("total {} out of range", s.total))?;
        lo = lo.min(s.total);
        hi = hi.max(s.total);
    }
    Ok(format!("{} self-scores 100, unrunnable 0, half case {:.6}, {cases} assignments optimal, cross totals in [{lo:.1}, {hi:.1}]", corpus.len(), half.total))
}

fn circle_through(a: Vec2, b: Vec2, c: Vec2) -> (Vec2, f64) {
    let d = 2.0 * (a.u * (b.v - c.v) + b.u * (c.v - a.v) + c.u * (a.v - b.v));
    let sq = |p: Vec2| p.u * p.u + p.v * p.v;
    let ux = (sq(a) * (b.v - c.v) + sq(b) * (c.v - a.v) + sq(c) * (a.v - b.v)) / d;
    let uy = (sq(a) * (c.u - b.u) + sq(b) * (a.u - c.u) + sq(c) * (b.u - a.u)) / d;
    let center = Vec2::new(ux, uy);
    (center, center.distance(a))
}

fn converter_fidelity() -> Outcome {
    let tol = Tolerances::default();
    let files = json_files(&root().join("fixtures/converter"));
    ensure(files.len() >= 20, || format!("only {} fixtures", files.len()))?;
    let mut worst = 1.0f64;
    for f in &files {
        let record = read_record(&std::fs::read_to_string(f).unwrap()).map_err(|e| e.to_string())?;
        let p = convert_record(&record).map_err(|e| format!("{}: {e}", f.display()))?;
        let (mesh, _) = build_program(&p, &tol).map_err(|e| format!("{}: {e}", f.display()))?;
        let solid = AnalyticSolid::from_record(&record).ok_or("oracle could not read record")?;
        let a = voxel_agreement(&solid, Some(&mesh), 64, solid.surface_band(tol.chord));
        ensure(a.ratio() >= 0.995, || format!("{}: agreement {:.5}", f.display(), a.ratio()))?;
        worst = worst.min(a.ratio());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut err = 0.0f64;
    for _ in 0..2000 {
        let c = Vec2::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        let r = rng.random_range(0.05..5.0);
        let a0 = rng.random_range(-PI..PI);
        let sweep = rng.random_range(0.1..TAU - 0.1);
        let ccw = rng.random_bool(0.5);
        let a1 = if ccw { a0 + sweep } else { a0 - sweep };
        let curve = arc_reparam(c, r, a0, a1, ccw).map_err(|e| e.to_string())?;
        let at = |a: f64| c + Vec2::new(a.cos(), a.sin()) * r;
        let (s, e, m) = (curve.start(), curve.end(), curve.point(PointKind::Mid).ok_or("arc has no mid point")?);
        let (cc, rr) = circle_through(s, e, m);
        let signed_mid = (m - c).cross(s - c).signum() * if ccw { -1.0 } else { 1.0 };
        err = err.max(s.distance(at(a0))).max(e.distance(at(a1))).max(cc.distance(c)).max((rr - r).abs());
        let mid_angle = (m.v - c.v).atan2(m.u - c.u);
        let expected_mid = if ccw { a0 + sweep / 2.0 } else { a0 - sweep / 2.0 };
        let dm = (mid_angle - expected_mid).rem_euclid(TAU);
        err = err.max(dm.min(TAU - dm) * r);
        ensure(sweep > PI || signed_mid > 0.0, || "arc mid point on the wrong side".into())?;
    }
    ensure(err <= 1e-9, || format!("arc round trip error {err:.2e}"))?;
    Ok(format!("{} fixtures, worst agreement {:.4}%, arc round trip error {err:.1e}", files.len(), worst * 100.0))
}

fn renderer_views() -> Outcome {
    let p = convert_record(&read_record(&std::fs::read_to_string(root().join("fixtures/converter/mixed_ops.json")).unwrap()).unwrap()).unwrap();
    let (mesh, _) = build_program(&p, &Tolerances::default()).map_err(|e| e.to_string())?;
    let img = render_view(&mesh, &ViewSpec::default()).map_err(|e| e.to_string())?;
    ensure((img.width, img.height) == (640, 400), || format!("default size {}x{}", img.width, img.height))?;
    ensure(img.pixels.len() == 640 * 400 * 3, || "pixel buffer size".into())?;
    let cfg = Config::default();
    ensure((cfg.render.width, cfg.render.height) == (640, 400), || "configured default size".into())?;
    let png = img.to_png().map_err(|e| e.to_string())?;
    let again = render_view(&mesh, &ViewSpec::default()).and_then(|i| i.to_png()).map_err(|e| e.to_string())?;
    let threaded = std::thread::spawn(move || render_view(&mesh, &ViewSpec::default()).and_then(|i| i.to_png()).unwrap()).join().unwrap();
    ensure(png == again && png == threaded, || "re-render differs".into())?;

    let iso = {
        let s = 1.0 / 3f64.sqrt();
        Vec3::new(s, s, s)
    };
    ensure(isometric_axis().distance(iso) < 1e-15, || "isometric axis".into())?;
    let mut spread = Vec::new();
    for max_deg in [15.0, 30.0] {
        let mut widest = 0.0f64;
        for seed in 0..10_000u64 {
            let d = sample_view_dir(seed, f64::to_radians(max_deg));
            ensure((d.dot(d) - 1.0).abs() < 1e-12, || format!("seed {seed}: not unit"))?;
            let ang = d.dot(iso).clamp(-1.0, 1.0).acos().to_degrees();
            ensure(ang <= max_deg + 1e-9, || format!("seed {seed}: {ang:.6} deg outside {max_deg} deg cap"))?;
            widest = widest.max(ang);
        }
        ensure(widest > 0.95 * max_deg, || format!("samples only reach {widest:.2} of {max_deg} deg"))?;
        spread.push(format!("{max_deg} deg cap max {widest:.2}"));
    }
    Ok(format!("640x400 default, byte-identical re-renders, 10^4 seeds in cap ({})", spread.join(", ")))
}

fn pipeline_smoke() -> Outcome {
    let t = Instant::now();
    let dir = std::env::temp_dir().join(format!("ecad-acceptance-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let fixtures = root().join("fixtures/converter");
    let mut listed: Vec<PathBuf> = json_files(&fixtures);
    let valid = listed.len();
    listed.extend(json_files(&fixtures.join("invalid")));
    let manifest = dir.join("manifest.txt");
    let body: String = listed.iter().map(|p| format!("{}\n", p.display())).collect();
    std::fs::write(&manifest, body).map_err(|e| e.to_string())?;
    let out = dir.join("out");
    let mut cfg = Config::default();
    cfg.batch.jobs = 0;
    let summary = dataset_gen(&manifest, &out, &cfg, None).map_err(|e| e.to_string())?;
    ensure(summary.kept.len() == valid, || format!("kept {} of {valid}", summary.kept.len()))?;
    ensure(summary.dropped.len() == listed.len() - valid, || format!("dropped {}", summary.dropped.len()))?;
    let count = |sub: &str, ext: &str| {
        std::fs::read_dir(out.join(sub)).map(|rd| rd.filter(|e| e.as_ref().is_ok_and(|e| e.path().extension().is_some_and(|x| x == ext))).count()).unwrap_or(0)
    };
    ensure(count("images", "png") == valid && count("code", "ecad") == valid, || "image or code file count mismatch".into())?;
    for line in &summary.kept {
        ensure(out.join(&line.image).is_file() && out.join(&line.code).is_file(), || format!("{} missing outputs", line.id))?;
    }
    // extrusions per fixture, counted by hand from the fixture files
    let hand: BTreeMap<usize, usize> = [(1, 17), (2, 6), (3, 1)].into_iter().collect();
    let stats: ecad_core::convert::DatasetStats =
        serde_json::from_str(&std::fs::read_to_string(out.join("stats.json")).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    ensure(stats.pair_histogram == hand, || format!("pair histogram {:?}", stats.pair_histogram))?;
    let _ = std::fs::remove_dir_all(&dir);
    let el = t.elapsed();
    ensure(el < Duration::from_secs(120), || format!("took {el:?}"))?;
    Ok(format!("{valid} kept with image and code, {} dropped, pair histogram {:?}, {el:.2?}", listed.len() - valid, stats.pair_histogram))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("dsl round-trip", dsl_round_trip),
        ("kernel analytic suite", kernel_analytics),
        ("csg voxel oracle", voxel_oracle),
        ("constraint suite", constraint_suite),
        ("scorer laws", scorer_laws),
        ("converter fidelity", converter_fidelity),
        ("renderer determinism and view cap", renderer_views),
        ("pipeline smoke", pipeline_smoke),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match r {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({detail})", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
