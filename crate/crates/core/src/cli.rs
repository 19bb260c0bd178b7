//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 unparsable or invalid system,
//! 3 engine or rendering failure, 4 I/O failure.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::analysis::{run_nmax_sweep, table_nmax_values, SweepOptions};
use crate::io::{
    bundled_system_text, parse_system_file, print_system_file, write_points_csv, write_stats_csv,
    ParseError, BUNDLED_SYSTEMS,
};
use crate::markov::{iterate_with, Engine, RunConfig, RunError};
use crate::render::{overlay_quadtree, rasterize, write_pgm, RenderError, RenderMode};
use crate::system::{MeasureMode, Precision, SystemSpec, DEFAULT_POINT_CAP};

#[derive(Debug, Parser)]
#[command(name = "ifsq", version, about = "Deterministic IFS/GIFS iteration with quadtree point search")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Iterate a system and write points, statistics, a tree dump or an image.
    Run(RunArgs),
    /// Time the quadtree engine over a list of leaf capacities.
    Sweep(SweepArgs),
    /// Print a system in canonical form.
    Print {
        #[arg(long)]
        system: String,
    },
    /// List the bundled systems.
    Systems,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EngineArg {
    Quadtree,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ImageMode {
    /// Intensity from the point weights.
    Measure,
    /// Support only.
    Attractor,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// System file, or the name of a bundled system.
    #[arg(long)]
    pub system: String,
    #[arg(long)]
    pub iters: usize,
    #[arg(long, value_enum, default_value = "quadtree")]
    pub engine: EngineArg,
    /// Leaf capacity of the quadtree.
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u64).range(1..))]
    pub nmax: u64,
    /// Skip weight bookkeeping.
    #[arg(long)]
    pub attractor_only: bool,
    /// Map arithmetic precision (f32 or f64).
    #[arg(long, default_value_t = Precision::default())]
    pub precision: Precision,
    #[arg(long, default_value_t = DEFAULT_POINT_CAP)]
    pub max_points: usize,
    /// Write the final points as CSV.
    #[arg(long)]
    pub points: Option<PathBuf>,
    /// Write per-iteration statistics as CSV.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// Write the final quadtree, one node per line.
    #[arg(long)]
    pub tree_dump: Option<PathBuf>,
    /// Write a PGM image of the final points.
    #[arg(long)]
    pub image: Option<PathBuf>,
    #[arg(long, default_value_t = 800, value_parser = clap::value_parser!(u32).range(1..))]
    pub width: u32,
    #[arg(long, default_value_t = 800, value_parser = clap::value_parser!(u32).range(1..))]
    pub height: u32,
    #[arg(long, value_enum, default_value = "measure")]
    pub image_mode: ImageMode,
    /// Draw the quadtree cells over the image.
    #[arg(long)]
    pub overlay_tree: bool,
    /// Print per-iteration progress to stderr.
    #[arg(short, long)]
    pub verbose: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub system: String,
    #[arg(long)]
    pub iters: usize,
    /// Comma-separated leaf capacities (default 2,4,...,1024).
    #[arg(long, value_delimiter = ',', value_parser = clap::value_parser!(u64).range(1..))]
    pub nmax_list: Vec<u64>,
    /// Also time the linear-search engine once.
    #[arg(long)]
    pub linear_baseline: bool,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    pub repetitions: u64,
    #[arg(long, default_value_t = Precision::default())]
    pub precision: Precision,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Parse { path: String, source: ParseError },
    #[error(transparent)]
    Engine(#[from] RunError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Parse { .. } => 2,
            CliError::Engine(RunError::InvalidSpec(_)) => 2,
            CliError::Engine(_) | CliError::Render(_) => 3,
            CliError::Io { .. } => 4,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Reads a system file, falling back to the bundled systems when no such
/// file exists.
pub fn load_system(arg: &str) -> Result<SystemSpec, CliError> {
    let path = Path::new(arg);
    let text = if path.exists() {
        fs::read_to_string(path).map_err(io_err(path))?
    } else if let Some(text) = bundled_system_text(arg) {
        text.to_string()
    } else {
        return Err(CliError::Io {
            path: arg.to_string(),
            source: io::Error::new(io::ErrorKind::NotFound, "no such file or bundled system"),
        });
    };
    parse_system_file(&text).map_err(|source| CliError::Parse {
        path: arg.to_string(),
        source,
    })
}

fn create(path: &Path) -> Result<File, CliError> {
    File::create(path).map_err(io_err(path))
}

fn cmd_run(args: &RunArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let spec = load_system(&args.system)?;
    let config = RunConfig {
        iterations: args.iters,
        engine: match args.engine {
            EngineArg::Quadtree => Engine::Quadtree,
            EngineArg::Linear => Engine::Linear,
        },
        n_max: args.nmax as usize,
        attractor_only: args.attractor_only,
        point_cap: args.max_points,
        precision: args.precision,
        ..RunConfig::default()
    };
    let verbose = args.verbose;
    let mut hook = |s: &crate::markov::IterationStats, _: &crate::system::PointBuffer| {
        if verbose {
            let _ = writeln!(
                stderr,
                "iter={} points={} height={} time_s={:.3}",
                s.iteration,
                s.points,
                s.tree_height,
                s.wall_time.as_secs_f64()
            );
        }
    };
    let out = iterate_with(&spec, &config, &mut hook)?;

    if let Some(path) = &args.points {
        write_points_csv(&out.points, create(path)?).map_err(io_err(path))?;
    }
    if let Some(path) = &args.stats {
        write_stats_csv(&out.stats, create(path)?).map_err(io_err(path))?;
    }
    let dump = out.tree.as_ref().map(|t| t.dump());
    if let Some(path) = &args.tree_dump {
        fs::write(path, dump.as_deref().unwrap_or("")).map_err(io_err(path))?;
    }
    if let Some(path) = &args.image {
        let mode = match (args.image_mode, spec.mode) {
            _ if args.attractor_only => RenderMode::Attractor,
            (ImageMode::Attractor, _) => RenderMode::Attractor,
            (ImageMode::Measure, MeasureMode::Classic) => RenderMode::Classic,
            (ImageMode::Measure, MeasureMode::Idempotent) => RenderMode::Idempotent,
        };
        let mut image = rasterize(
            &out.points,
            spec.region,
            args.width as usize,
            args.height as usize,
            mode,
        )?;
        if args.overlay_tree {
            if let Some(dump) = &dump {
                overlay_quadtree(&mut image, dump)?;
            }
        }
        write_pgm(&image, create(path)?).map_err(io_err(path))?;
    }

    writeln!(
        stdout,
        "points={} height={} time_s={:.3}",
        out.points.len(),
        out.stats.final_height(),
        out.stats.total_time().as_secs_f64()
    )
    .map_err(io_err(Path::new("<stdout>")))?;
    Ok(())
}

fn cmd_sweep(args: &SweepArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let spec = load_system(&args.system)?;
    let nmax_values = if args.nmax_list.is_empty() {
        table_nmax_values()
    } else {
        args.nmax_list.iter().map(|&n| n as usize).collect()
    };
    let options = SweepOptions {
        with_linear_baseline: args.linear_baseline,
        repetitions: args.repetitions as usize,
        precision: args.precision,
        ..SweepOptions::new(args.iters, nmax_values)
    };
    let report = run_nmax_sweep(&spec, &options);
    match &args.out {
        Some(path) => report.write_csv(create(path)?).map_err(io_err(path))?,
        None => report.write_csv(&mut *stdout).map_err(io_err(Path::new("<stdout>")))?,
    }
    for (n_max, err) in &report.failures {
        let _ = writeln!(stderr, "n_max={n_max}: {err}");
    }
    match report.failures.into_iter().next() {
        Some((_, err)) => Err(err.into()),
        None => Ok(()),
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{e}");
                    CliError::Usage(String::new()).exit_code()
                }
            };
        }
    };
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args, stdout, stderr),
        Command::Sweep(args) => cmd_sweep(args, stdout, stderr),
        Command::Print { system } => load_system(system).and_then(|spec| {
            write!(stdout, "{}", print_system_file(&spec)).map_err(io_err(Path::new("<stdout>")))
        }),
        Command::Systems => {
            for (name, _) in BUNDLED_SYSTEMS {
                let _ = writeln!(stdout, "{name}");
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
