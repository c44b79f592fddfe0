use std::path::{Path, PathBuf};

use serde::Deserialize;

use ecad_core::convert::FilterPolicy;
use ecad_core::kernel::ChordTol;
use ecad_core::model::Tolerances;
use ecad_core::render::{DEFAULT_HEIGHT, DEFAULT_MAX_ANGLE_DEG, DEFAULT_WIDTH};
use ecad_core::score::ScoreConfig;

use crate::CliError;

pub const CONFIG_ENV: &str = "ECAD_CONFIG";

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    /// Chord tolerance as a fraction of each profile's diagonal.
    pub chord_tol: f64,
    pub eps_join: f64,
}

impl Default for KernelSection {
    fn default() -> Self {
        let t = Tolerances::default();
        let chord_tol = match t.chord {
            ChordTol::Relative(f) => f,
            ChordTol::Absolute(a) => a,
        };
        Self { chord_tol, eps_join: t.eps_join }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSection {
    pub max_tokens: usize,
}

impl Default for FilterSection {
    fn default() -> Self {
        Self { max_tokens: FilterPolicy::default().max_tokens }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderSection {
    pub seed: u64,
    pub max_angle_deg: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for RenderSection {
    fn default() -> Self {
        Self { seed: 0, max_angle_deg: DEFAULT_MAX_ANGLE_DEG, width: DEFAULT_WIDTH, height: DEFAULT_HEIGHT }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatchSection {
    /// Worker threads; 0 picks the number of cores.
    pub jobs: usize,
}

impl Default for BatchSection {
    fn default() -> Self {
        Self { jobs: 1 }
    }
}

/// Settings shared by all sub-commands.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub kernel: KernelSection,
    pub filter: FilterSection,
    pub render: RenderSection,
    pub score: ScoreConfig,
    pub batch: BatchSection,
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!("config: {name} must be a positive number, got {v}")))
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let c: Config = toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    /// Reads `path`, else the file named by `ECAD_CONFIG`, else defaults.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let path: Option<PathBuf> = path.map(Path::to_path_buf).or_else(|| std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty()).map(PathBuf::from));
        match path {
            None => Ok(Config::default()),
            Some(p) => {
                let text = std::fs::read_to_string(&p).map_err(|e| CliError::Usage(format!("config {}: {e}", p.display())))?;
                Self::from_toml(&text)
            }
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        positive("kernel.chord_tol", self.kernel.chord_tol)?;
        positive("kernel.eps_join", self.kernel.eps_join)?;
        positive("render.max_angle_deg", self.render.max_angle_deg)?;
        positive("score.max_normal_deg", self.score.max_normal_deg)?;
        positive("score.max_origin_dist", self.score.max_origin_dist)?;
        positive("score.max_chamfer", self.score.max_chamfer)?;
        positive("score.time_budget_secs", self.score.time_budget_secs)?;
        if self.render.max_angle_deg >= 90.0 {
            return Err(CliError::Usage("config: render.max_angle_deg must be below 90".into()));
        }
        if self.kernel.chord_tol >= 1.0 {
            return Err(CliError::Usage("config: kernel.chord_tol is a fraction of the profile diagonal and must be below 1".into()));
        }
        if self.render.width == 0 || self.render.height == 0 {
            return Err(CliError::Usage("config: render.width and render.height must be nonzero".into()));
        }
        if self.filter.max_tokens == 0 {
            return Err(CliError::Usage("config: filter.max_tokens must be nonzero".into()));
        }
        if self.score.samples < 2 {
            return Err(CliError::Usage("config: score.samples must be at least 2".into()));
        }
        Ok(())
    }

    pub fn tolerances(&self) -> Tolerances {
        Tolerances { eps_join: self.kernel.eps_join, chord: ChordTol::Relative(self.kernel.chord_tol), ..Tolerances::default() }
    }

    pub fn filter_policy(&self) -> FilterPolicy {
        FilterPolicy { max_tokens: self.filter.max_tokens, ..FilterPolicy::default() }
    }
}
