use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use ecad_core::convert::{apply_filter, convert_record, read_record, AnnotationHook, DatasetStats, DropReason, FilterDecision};
use ecad_core::dsl::{count_tokens, parse_program, serialize_program};
use ecad_core::kernel::build_program;
use ecad_core::model::CadProgram;
use ecad_core::render::{render_view, sample_view_dir, ViewSpec};

use crate::{read_text, with_pool, write_bytes, CliError, Config};

/// One kept design in the index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexLine {
    pub id: String,
    pub image: String,
    pub code: String,
    pub pairs: usize,
    pub tokens: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DropLine {
    pub id: String,
    #[serde(flatten)]
    pub reason: DropReason,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct DatasetSummary {
    pub kept: Vec<IndexLine>,
    pub dropped: Vec<DropLine>,
    pub stats: DatasetStats,
}

struct Kept {
    line: IndexLine,
    program: CadProgram,
    code: String,
    png: Vec<u8>,
}

enum Outcome {
    Kept(Box<Kept>),
    Dropped(DropLine),
}

/// Per-design view seed: the configured seed mixed with the design id.
pub fn design_seed(seed: u64, id: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in id.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h ^ seed.rotate_left(32)
}

fn load_design(path: &Path) -> Result<(Option<String>, CadProgram), DropReason> {
    let fail = |detail: String| DropReason::ConvertFailure { detail };
    let text = read_text(path).map_err(|e| fail(e.to_string()))?;
    let is_record = path.extension().is_some_and(|e| e == "json");
    if is_record {
        let r = read_record(&text).map_err(|e| fail(e.to_string()))?;
        let p = convert_record(&r).map_err(|e| fail(e.to_string()))?;
        Ok((r.id, p))
    } else {
        let p = parse_program(&text).map_err(|e| fail(e.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")))?;
        Ok((None, p))
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("design").to_string()
}

fn process(path: &Path, id: &str, cfg: &Config, hook: Option<&AnnotationHook>) -> Outcome {
    let drop = |reason| Outcome::Dropped(DropLine { id: id.to_string(), reason });
    let mut program = match load_design(path) {
        Ok((_, p)) => p,
        Err(r) => return drop(r),
    };
    let tol = cfg.tolerances();
    if let FilterDecision::Drop(r) = apply_filter(&program, &cfg.filter_policy(), &tol) {
        return drop(r);
    }
    if let Some(h) = hook {
        if let Err(e) = h.annotate(&mut program) {
            return drop(DropReason::ConvertFailure { detail: e.to_string() });
        }
    }
    let mesh = match build_program(&program, &tol) {
        Ok((m, _)) => m,
        Err(e) => return drop(DropReason::BuildFailure { detail: e.to_string() }),
    };
    let dir = sample_view_dir(design_seed(cfg.render.seed, id), cfg.render.max_angle_deg.to_radians());
    let png = ViewSpec::looking_from(dir)
        .map(|v| v.with_size(cfg.render.width, cfg.render.height))
        .and_then(|v| render_view(&mesh, &v))
        .and_then(|img| img.to_png());
    let png = match png {
        Ok(b) => b,
        Err(e) => return drop(DropReason::BuildFailure { detail: format!("render: {e}") }),
    };
    let code = serialize_program(&program);
    let line = IndexLine {
        id: id.to_string(),
        image: format!("images/{id}.png"),
        code: format!("code/{id}.ecad"),
        pairs: program.extrusion_count(),
        tokens: count_tokens(&code),
    };
    Outcome::Kept(Box::new(Kept { line, program, code, png }))
}

/// Reads a manifest: one design path per line, relative to the manifest,
/// with blank lines and `#` comments ignored.
pub fn read_manifest(manifest: &Path) -> Result<Vec<PathBuf>, CliError> {
    let base = manifest.parent().unwrap_or(Path::new(""));
    Ok(read_text(manifest)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| base.join(l))
        .collect())
}

fn safe_id(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' }).collect()
}

/// Assigns ids: the record's own id when it has one, else the file stem.
/// Later duplicates get a numeric suffix.
fn assign_ids(paths: &[PathBuf]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    paths
        .iter()
        .map(|p| {
            let own = if p.extension().is_some_and(|e| e == "json") {
                std::fs::read_to_string(p).ok().and_then(|t| read_record(&t).ok()).and_then(|r| r.id)
            } else {
                None
            };
            let base = safe_id(&own.unwrap_or_else(|| stem(p)));
            let mut id = base.clone();
            let mut k = 1;
            while !seen.insert(id.clone()) {
                k += 1;
                id = format!("{base}-{k}");
            }
            id
        })
        .collect()
}

/// Converts, filters, renders and writes every design of the manifest.
/// Results are ordered by id regardless of the worker count.
pub fn dataset_gen(manifest: &Path, out_dir: &Path, cfg: &Config, hook: Option<&AnnotationHook>) -> Result<DatasetSummary, CliError> {
    let paths = read_manifest(manifest)?;
    let ids = assign_ids(&paths);
    let mut outcomes: Vec<(String, Outcome)> =
        with_pool(cfg.batch.jobs, || paths.par_iter().zip(ids.par_iter()).map(|(p, id)| (id.clone(), process(p, id, cfg, hook))).collect())?;
    outcomes.sort_by(|a, b| a.0.cmp(&b.0));

    let mut summary = DatasetSummary::default();
    let mut index = String::new();
    let mut drops = String::new();
    for (_, o) in outcomes {
        match o {
            Outcome::Kept(k) => {
                write_bytes(&out_dir.join(&k.line.code), k.code.as_bytes())?;
                write_bytes(&out_dir.join(&k.line.image), &k.png)?;
                index.push_str(&serde_json::to_string(&k.line).expect("serializable"));
                index.push('\n');
                summary.stats.add(&k.program);
                summary.kept.push(k.line);
            }
            Outcome::Dropped(d) => {
                eprintln!("dropped {}: {}", d.id, d.reason);
                drops.push_str(&serde_json::to_string(&d).expect("serializable"));
                drops.push('\n');
                summary.dropped.push(d);
            }
        }
    }
    write_bytes(&out_dir.join("index.jsonl"), index.as_bytes())?;
    write_bytes(&out_dir.join("drops.jsonl"), drops.as_bytes())?;
    let stats = serde_json::to_string_pretty(&summary.stats).expect("serializable");
    write_bytes(&out_dir.join("stats.json"), stats.as_bytes())?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_differ_per_design() {
        assert_ne!(design_seed(0, "a"), design_seed(0, "b"));
        assert_ne!(design_seed(0, "a"), design_seed(1, "a"));
        assert_eq!(design_seed(3, "cube"), design_seed(3, "cube"));
    }

    #[test]
    fn ids_are_sanitized_and_unique() {
        let paths = vec![PathBuf::from("x/a b.ecad"), PathBuf::from("y/a b.ecad"), PathBuf::from("c.ecad")];
        assert_eq!(assign_ids(&paths), vec!["a_b", "a_b-2", "c"]);
    }
}
