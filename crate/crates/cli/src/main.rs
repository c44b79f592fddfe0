use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ecad_cli::commands::{self, MeshFormat};
use ecad_cli::config::CONFIG_ENV;
use ecad_cli::{dataset, CliError, Config};

#[derive(Parser)]
#[command(name = "ecad", version, about = "Parse, solve, build, render, convert and score sketch-extrude CAD programs")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Machine-readable output and diagnostics.
    #[arg(long, global = true)]
    json: bool,
    /// Worker threads for batch commands (0 = all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Chord tolerance as a fraction of the profile diagonal.
    #[arg(long, global = true)]
    chord_tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the canonical form of a program.
    Parse { file: PathBuf },
    /// Check references, loops and profiles.
    Validate { file: PathBuf },
    /// Solve sketch constraints and report degrees of freedom.
    Solve {
        file: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Build the solid and export a mesh.
    Build {
        file: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, value_enum)]
        format: Option<MeshFormat>,
    },
    /// Render a shaded image (PNG, or PPM by extension).
    Render {
        file: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Sample the view direction near the isometric axis from this seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        width: Option<u32>,
        #[arg(long)]
        height: Option<u32>,
        #[arg(long)]
        max_angle: Option<f64>,
    },
    /// Convert a JSON interchange record into a program.
    Convert {
        file: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Command that describes a program read on stdin.
        #[arg(long)]
        hook: Option<String>,
    },
    /// Score a generated program against a reference.
    Score {
        #[arg(long)]
        gen: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
    },
    /// Score every case of a JSON-lines manifest of {"gen", "ref"} paths.
    Batch { manifest: PathBuf },
    /// Histograms of pairs, curves and constraints over programs or directories.
    Stats {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Build image and code pairs from a manifest of records or programs.
    DatasetGen {
        manifest: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        max_tokens: Option<usize>,
        #[arg(long)]
        hook: Option<String>,
    },
}

fn hook(cmd: Option<&str>) -> Result<Option<ecad_core::convert::AnnotationHook>, CliError> {
    match cmd {
        None => Ok(None),
        Some(c) => commands::parse_hook(c).map(Some).ok_or_else(|| CliError::Usage("empty --hook command".into())),
    }
}

fn run(cli: Cli) -> Result<String, CliError> {
    let mut cfg = Config::load(cli.config.as_deref())?;
    if let Some(j) = cli.jobs {
        cfg.batch.jobs = j;
    }
    if let Some(t) = cli.chord_tol {
        cfg.kernel.chord_tol = t;
    }
    let json = cli.json;
    match cli.command {
        Command::Parse { file } => commands::cmd_parse(&file, json),
        Command::Validate { file } => {
            cfg.validate()?;
            commands::cmd_validate(&file, &cfg, json)
        }
        Command::Solve { file, output } => commands::cmd_solve(&file, output.as_deref(), json),
        Command::Build { file, output, format } => {
            cfg.validate()?;
            commands::cmd_build(&file, &output, format, &cfg, json)
        }
        Command::Render { file, output, seed, width, height, max_angle } => {
            cfg.render.width = width.unwrap_or(cfg.render.width);
            cfg.render.height = height.unwrap_or(cfg.render.height);
            cfg.render.max_angle_deg = max_angle.unwrap_or(cfg.render.max_angle_deg);
            cfg.validate()?;
            commands::cmd_render(&file, &output, seed, &cfg)
        }
        Command::Convert { file, output, hook: h } => commands::cmd_convert(&file, output.as_deref(), hook(h.as_deref())?.as_ref()),
        Command::Score { gen, reference } => commands::cmd_score(&gen, &reference, &cfg, json),
        Command::Batch { manifest } => commands::cmd_batch(&manifest, &cfg, json),
        Command::Stats { paths } => commands::cmd_stats(&paths),
        Command::DatasetGen { manifest, out, seed, max_tokens, hook: h } => {
            cfg.render.seed = seed.unwrap_or(cfg.render.seed);
            cfg.filter.max_tokens = max_tokens.unwrap_or(cfg.filter.max_tokens);
            cfg.validate()?;
            let s = dataset::dataset_gen(&manifest, &out, &cfg, hook(h.as_deref())?.as_ref())?;
            Ok(if json {
                serde_json::to_string_pretty(&s).expect("serializable")
            } else {
                format!("{} kept, {} dropped\n", s.kept.len(), s.dropped.len())
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let json = cli.json;
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            if !out.is_empty() && !out.ends_with('\n') {
                println!();
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let (true, CliError::Domain { diagnostic, .. }) = (json, &e) {
                println!("{}", serde_json::to_string_pretty(diagnostic).expect("serializable"));
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
