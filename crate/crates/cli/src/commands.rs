use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use ecad_core::constraints::{analyze_dof, solve_program};
use ecad_core::convert::{convert_record, dataset_stats, read_record, AnnotationHook, DatasetStats};
use ecad_core::dsl::{parse_program, serialize_program, ParseError};
use ecad_core::kernel::{build_program, export_obj, export_stl_ascii, export_stl_binary, mesh_metrics, SolidMesh};
use ecad_core::model::CadProgram;
use ecad_core::render::{export_image, isometric_axis, render_view, sample_view_dir, ImageFormat, ViewSpec};
use ecad_core::score::{aggregate, BatchAggregate, Reference, ScoreReport};

use crate::{read_text, with_pool, write_bytes, CliError, Config};

fn parse_errors(errs: &[ParseError]) -> CliError {
    let message = errs.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n");
    CliError::domain(message, json!({ "stage": "parse", "errors": errs }))
}

pub fn load_program(path: &Path) -> Result<CadProgram, CliError> {
    parse_program(&read_text(path)?).map_err(|e| parse_errors(&e))
}

fn checked_program(path: &Path, cfg: &Config) -> Result<CadProgram, CliError> {
    let p = load_program(path)?;
    let report = p.validate(&cfg.tolerances());
    if !report.is_ok() {
        let message = report.issues.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n");
        return Err(CliError::domain(message, json!({ "stage": "validate", "issues": report.issues, "warnings": report.warnings })));
    }
    Ok(p)
}

fn built(path: &Path, cfg: &Config) -> Result<(CadProgram, SolidMesh), CliError> {
    let p = checked_program(path, cfg)?;
    let (mesh, _) = build_program(&p, &cfg.tolerances()).map_err(|e| CliError::domain(e.to_string(), json!({ "stage": "build", "step": e.step, "detail": e.error.to_string() })))?;
    Ok((p, mesh))
}

fn to_json(v: &impl Serialize) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

/// Canonical text of the program.
pub fn cmd_parse(path: &Path, as_json: bool) -> Result<String, CliError> {
    let p = load_program(path)?;
    Ok(if as_json { to_json(&p) } else { serialize_program(&p) })
}

pub fn cmd_validate(path: &Path, cfg: &Config, as_json: bool) -> Result<String, CliError> {
    let p = load_program(path)?;
    let report = p.validate(&cfg.tolerances());
    if !report.is_ok() {
        let message = report.issues.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n");
        return Err(CliError::domain(message, json!({ "stage": "validate", "issues": report.issues, "warnings": report.warnings })));
    }
    Ok(if as_json {
        to_json(&json!({ "valid": true, "warnings": report.warnings, "pairs": p.extrusion_count() }))
    } else {
        let mut s = String::from("valid\n");
        for w in &report.warnings {
            s.push_str(&format!("warning: {w}\n"));
        }
        s
    })
}

/// Solves the sketch constraints; writes the solved program to `out` or stdout.
pub fn cmd_solve(path: &Path, out: Option<&Path>, as_json: bool) -> Result<String, CliError> {
    let p = load_program(path)?;
    let curves: Vec<_> = p.curves().copied().collect();
    let constraints: Vec<_> = p.constraints().copied().collect();
    let fail = |e: ecad_core::constraints::ConstraintError| CliError::domain(e.to_string(), json!({ "stage": "solve", "detail": e.to_string() }));
    let dof = analyze_dof(&curves, &constraints).map_err(fail)?;
    let (solved, r) = solve_program(&p).map_err(fail)?;
    let text = serialize_program(&solved);
    if let Some(out) = out {
        write_bytes(out, text.as_bytes())?;
    }
    Ok(if as_json {
        to_json(&json!({ "dof": dof, "residual_norm": r.residual_norm, "iterations": r.iterations, "converged": r.converged }))
    } else if out.is_some() {
        format!("dof {} ({:?}), residual {:.3e} after {} iterations\n", dof.dof, dof.status, r.residual_norm, r.iterations)
    } else {
        text
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum MeshFormat {
    Stl,
    StlAscii,
    Obj,
}

impl MeshFormat {
    fn from_path(p: &Path) -> MeshFormat {
        match p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("obj") => MeshFormat::Obj,
            _ => MeshFormat::Stl,
        }
    }
}

pub fn cmd_build(path: &Path, out: &Path, format: Option<MeshFormat>, cfg: &Config, as_json: bool) -> Result<String, CliError> {
    let (_, mesh) = built(path, cfg)?;
    let bytes = match format.unwrap_or_else(|| MeshFormat::from_path(out)) {
        MeshFormat::Stl => export_stl_binary(&mesh),
        MeshFormat::StlAscii => {
            let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("solid");
            export_stl_ascii(&mesh, name).into_bytes()
        }
        MeshFormat::Obj => export_obj(&mesh).into_bytes(),
    };
    write_bytes(out, &bytes)?;
    let m = mesh_metrics(&mesh);
    Ok(if as_json {
        to_json(&m)
    } else {
        format!("{} triangles, volume {:.6}, watertight {}\n", m.triangles, m.volume, m.is_manifold)
    })
}

fn image_format(p: &Path) -> ImageFormat {
    match p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("ppm") => ImageFormat::Ppm,
        _ => ImageFormat::Png,
    }
}

/// Renders from the isometric direction, or from a seeded direction near it.
pub fn cmd_render(path: &Path, out: &Path, seed: Option<u64>, cfg: &Config) -> Result<String, CliError> {
    let (_, mesh) = built(path, cfg)?;
    let dir = match seed {
        Some(s) => sample_view_dir(s, cfg.render.max_angle_deg.to_radians()),
        None => isometric_axis(),
    };
    let view = ViewSpec::looking_from(dir).map_err(|e| CliError::Usage(e.to_string()))?.with_size(cfg.render.width, cfg.render.height);
    let img = render_view(&mesh, &view).map_err(|e| CliError::domain(e.to_string(), json!({ "stage": "render", "detail": e.to_string() })))?;
    let bytes = export_image(&img, image_format(out)).map_err(|e| CliError::domain(e.to_string(), json!({ "stage": "render", "detail": e.to_string() })))?;
    write_bytes(out, &bytes)?;
    Ok(format!("{}x{} image written to {}\n", img.width, img.height, out.display()))
}

/// Splits a hook command line on whitespace.
pub fn parse_hook(cmd: &str) -> Option<AnnotationHook> {
    let mut it = cmd.split_whitespace().map(str::to_string);
    let program = it.next()?;
    Some(AnnotationHook { program, args: it.collect() })
}

pub fn cmd_convert(path: &Path, out: Option<&Path>, hook: Option<&AnnotationHook>) -> Result<String, CliError> {
    let fail = |e: ecad_core::convert::ConvertError| CliError::domain(e.to_string(), json!({ "stage": "convert", "detail": e.to_string() }));
    let record = read_record(&read_text(path)?).map_err(fail)?;
    let mut p = convert_record(&record).map_err(fail)?;
    if let Some(h) = hook {
        h.annotate(&mut p).map_err(fail)?;
    }
    let text = serialize_program(&p);
    match out {
        Some(o) => {
            write_bytes(o, text.as_bytes())?;
            Ok(format!("{} pairs written to {}\n", p.extrusion_count(), o.display()))
        }
        None => Ok(text),
    }
}

fn reference(path: &Path, cfg: &Config) -> Result<Reference, CliError> {
    let p = load_program(path)?;
    Reference::new(&p, &cfg.score).map_err(|e| CliError::domain(e.to_string(), json!({ "stage": "reference", "detail": e.to_string() })))
}

/// Scores generated text against a reference. A generated program that
/// fails to run is a score of 0, not a command failure.
pub fn cmd_score(gen: &Path, reference_path: &Path, cfg: &Config, as_json: bool) -> Result<String, CliError> {
    let r = reference(reference_path, cfg)?;
    let report = r.score(&read_text(gen)?, &cfg.score);
    Ok(if as_json { to_json(&report) } else { format!("{:.4}\n", report.total) })
}

/// One line of a scoring manifest. Paths are relative to the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchCase {
    #[serde(default)]
    pub id: Option<String>,
    pub gen: PathBuf,
    #[serde(rename = "ref")]
    pub reference: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BatchResult {
    pub id: String,
    pub report: Option<ScoreReport>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BatchSummary {
    pub cases: Vec<BatchResult>,
    pub aggregate: BatchAggregate,
}

fn manifest_lines(path: &Path) -> Result<Vec<(usize, String)>, CliError> {
    Ok(read_text(path)?
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim().to_string()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .collect())
}

pub fn run_batch(manifest: &Path, cfg: &Config) -> Result<BatchSummary, CliError> {
    let base = manifest.parent().unwrap_or(Path::new("")).to_path_buf();
    let cases: Vec<BatchCase> = manifest_lines(manifest)?
        .into_iter()
        .map(|(n, l)| serde_json::from_str(&l).map_err(|e| CliError::Usage(format!("{} line {n}: {e}", manifest.display()))))
        .collect::<Result<_, _>>()?;
    let results: Vec<BatchResult> = with_pool(cfg.batch.jobs, || {
        cases
            .par_iter()
            .enumerate()
            .map(|(i, c)| {
                let id = c.id.clone().unwrap_or_else(|| i.to_string());
                let run = || -> Result<ScoreReport, CliError> {
                    let r = reference(&base.join(&c.reference), cfg)?;
                    Ok(r.score(&read_text(&base.join(&c.gen))?, &cfg.score))
                };
                match run() {
                    Ok(report) => BatchResult { id, report: Some(report), error: None },
                    Err(e) => BatchResult { id, report: None, error: Some(e.to_string()) },
                }
            })
            .collect()
    })?;
    let aggregate = aggregate(results.iter().filter_map(|r| r.report.as_ref()));
    Ok(BatchSummary { cases: results, aggregate })
}

pub fn cmd_batch(manifest: &Path, cfg: &Config, as_json: bool) -> Result<String, CliError> {
    let s = run_batch(manifest, cfg)?;
    Ok(if as_json {
        to_json(&s)
    } else {
        let a = &s.aggregate;
        let mut out = String::new();
        for c in &s.cases {
            match (&c.report, &c.error) {
                (Some(r), _) => out.push_str(&format!("{}\t{:.4}\n", c.id, r.total)),
                (None, Some(e)) => out.push_str(&format!("{}\terror: {e}\n", c.id)),
                (None, None) => {}
            }
        }
        out.push_str(&format!(
            "cases {} overall {:.4} executable {:.4} unfinished {} run_with_errors {} completely_correct {}\n",
            a.cases, a.overall, a.executable, a.unfinished, a.run_with_errors, a.completely_correct
        ));
        out
    })
}

fn ecad_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let rd = std::fs::read_dir(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            let mut found: Vec<PathBuf> = rd.filter_map(|e| e.ok().map(|e| e.path())).filter(|f| f.extension().is_some_and(|e| e == "ecad")).collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

pub fn compute_stats(paths: &[PathBuf]) -> Result<DatasetStats, CliError> {
    let programs = ecad_files(paths)?.iter().map(|p| load_program(p)).collect::<Result<Vec<_>, _>>()?;
    Ok(dataset_stats(&programs))
}

pub fn cmd_stats(paths: &[PathBuf]) -> Result<String, CliError> {
    Ok(to_json(&compute_stats(paths)?))
}
