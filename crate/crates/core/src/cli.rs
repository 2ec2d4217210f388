//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 for invalid input or usage, 3 when a fit
//! fails numerically.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use crate::error::{PssaError, Result};
use crate::io::{parse_csv, parse_json, write_csv, write_json, DataFormat, ManifoldKind};
use crate::pipeline::{fit_report, tree_report};
use crate::plot::plot_data;
use crate::report::Report;
use crate::synth::{generate, EXAMPLE_IDS};
use crate::tree::{Dataset, PssaConfig, Selection, SphereTerminal};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "pssa", version, about = "Nested totally geodesic approximations of manifold-valued data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fit the submanifold family of the data's manifold and write a report.
    Fit(FitArgs),
    /// Build the tree of nested approximations and write a report.
    Tree(TreeArgs),
    /// Write a seeded synthetic dataset.
    Synth(SynthArgs),
    /// Sample fitted submanifolds from a report as CSV.
    Plotdata(PlotArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ManifoldArg {
    Sphere,
    #[value(alias = "grassmannian")]
    Grassmann,
    Torus,
    Polysphere,
}

impl From<ManifoldArg> for ManifoldKind {
    fn from(m: ManifoldArg) -> Self {
        match m {
            ManifoldArg::Sphere => ManifoldKind::Sphere,
            ManifoldArg::Grassmann => ManifoldKind::Grassmann,
            ManifoldArg::Torus => ManifoldKind::Torus,
            ManifoldArg::Polysphere => ManifoldKind::Polysphere,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SelectionArg {
    Loo,
    TrainingError,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TerminalArg {
    AntipodalPair,
    Mean,
}

#[derive(Args, Debug, Clone)]
pub struct InputArgs {
    /// Manifold family of the input data.
    #[arg(long, value_enum)]
    pub manifold: ManifoldArg,
    /// Dataset file (.json, otherwise CSV).
    #[arg(long)]
    pub input: PathBuf,
    /// Overrides the format implied by the file extension.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Rows per Grassmannian frame, instead of blank-line separators.
    #[arg(long)]
    pub plane_dim: Option<usize>,
    /// Rescale sphere and polysphere rows to unit norm instead of rejecting them.
    #[arg(long)]
    pub renormalize: bool,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Resonance entries lie strictly inside (-bound, bound).
    #[arg(long, default_value_t = 10)]
    pub resonance_bound: u32,
    #[arg(long, value_enum, default_value_t = SelectionArg::Loo)]
    pub selection: SelectionArg,
    /// Recorded in the report; all fits are deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest number of sphere pairs tried for coupling at one step.
    #[arg(long, default_value_t = 8)]
    pub max_couplings: usize,
    /// Also try coupling spheres that are already coupled to others.
    #[arg(long)]
    pub group_couplings: bool,
    /// Also try collapsing a whole sphere to a point.
    #[arg(long)]
    pub sphere_to_point: bool,
    /// Ranking entries kept in selection reports.
    #[arg(long, default_value_t = 100)]
    pub top: usize,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Number of resonance relations for torus data.
    #[arg(long, default_value_t = 1)]
    pub codim: usize,
    /// Report path; standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TreeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 3)]
    pub max_children: usize,
    /// Nodes below this dimension are not built.
    #[arg(long, default_value_t = 0)]
    pub min_dim: usize,
    /// End of sphere chains.
    #[arg(long, value_enum, default_value_t = TerminalArg::AntipodalPair)]
    pub sphere_terminal: TerminalArg,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// One of: sphere-1, sphere-2, sphere-3, torus-25, torus-123,
    /// polysphere-coupled, polysphere-torus.
    #[arg(long)]
    pub example: String,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PlotArgs {
    /// Report written by `fit` or `tree`.
    #[arg(long)]
    pub report: PathBuf,
    /// Section to sample, e.g. great-circle, subtorus, circles, angles, nodes.
    #[arg(long)]
    pub what: String,
    /// Dataset of the report, for sections of projected points.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    #[arg(long)]
    pub plane_dim: Option<usize>,
    #[arg(long)]
    pub renormalize: bool,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| PssaError::Io(format!("{}: {e}", path.display())))
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => fs::write(p, text).map_err(|e| PssaError::Io(format!("{}: {e}", p.display()))),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| PssaError::Io(e.to_string())),
    }
}

fn load(
    path: &Path,
    kind: ManifoldKind,
    format: Option<FormatArg>,
    plane_dim: Option<usize>,
    renormalize: bool,
) -> Result<Dataset> {
    let format = match format {
        Some(FormatArg::Csv) => DataFormat::Csv,
        Some(FormatArg::Json) => DataFormat::Json,
        None => DataFormat::from_path(path),
    };
    let text = read(path)?;
    let data = match format {
        DataFormat::Csv => parse_csv(&text, kind, plane_dim, renormalize)?,
        DataFormat::Json => parse_json(&text, Some(kind), renormalize)?,
    };
    info!("read {} points from {}", data.len(), path.display());
    Ok(data)
}

fn config(model: &ModelArgs) -> PssaConfig {
    PssaConfig {
        resonance_bound: model.resonance_bound,
        selection: match model.selection {
            SelectionArg::Loo => Selection::Loo,
            SelectionArg::TrainingError => Selection::TrainingError,
        },
        seed: model.seed,
        max_couplings: model.max_couplings,
        group_couplings: model.group_couplings,
        sphere_to_point: model.sphere_to_point,
        ranking_limit: model.top,
        ..PssaConfig::default()
    }
}

fn run_fit(args: &FitArgs) -> Result<()> {
    let i = &args.input;
    let data = load(&i.input, i.manifold.into(), i.format, i.plane_dim, i.renormalize)?;
    let report = fit_report(&data, &config(&args.model), args.codim)?;
    emit(args.output.as_deref(), &report.to_json()?)
}

fn run_tree(args: &TreeArgs) -> Result<()> {
    let i = &args.input;
    let data = load(&i.input, i.manifold.into(), i.format, i.plane_dim, i.renormalize)?;
    let cfg = PssaConfig {
        max_children_per_node: args.max_children,
        min_dim: args.min_dim,
        sphere_terminal: match args.sphere_terminal {
            TerminalArg::AntipodalPair => SphereTerminal::AntipodalPair,
            TerminalArg::Mean => SphereTerminal::Mean,
        },
        ..config(&args.model)
    };
    let report = tree_report(&data, &cfg)?;
    if let crate::report::ReportBody::Tree { root, .. } = &report.body {
        info!("tree has {} nodes", root.node_count());
    }
    emit(args.output.as_deref(), &report.to_json()?)
}

fn run_synth(args: &SynthArgs) -> Result<()> {
    let s = generate(&args.example, args.seed)?;
    let mut header = vec![
        format!("example: {}", s.id),
        format!("seed: {}", s.seed),
        format!("manifold: {}", s.manifold.label()),
    ];
    header.extend(s.header);
    let text = match args.format {
        FormatArg::Csv => write_csv(&s.data, &header),
        FormatArg::Json => write_json(&s.data, &header)?,
    };
    emit(args.output.as_deref(), &text)
}

fn run_plot(args: &PlotArgs) -> Result<()> {
    let report = Report::from_json(&read(&args.report)?)?;
    let data = match &args.input {
        Some(p) => {
            let kind = ManifoldKind::of(&report.body.manifold());
            Some(load(p, kind, args.format, args.plane_dim, args.renormalize)?)
        }
        None => None,
    };
    emit(args.output.as_deref(), &plot_data(&report, &args.what, data.as_ref())?)
}

/// Caps the worker pool at `PSSA_THREADS` when set.
fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("PSSA_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| PssaError::Validation(format!("PSSA_THREADS must be a positive integer, got `{v}`")))?;
    if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
        warn!("worker pool already initialized; PSSA_THREADS ignored");
    }
    Ok(())
}

pub fn exit_code(err: &PssaError) -> i32 {
    if err.is_validation() {
        EXIT_INVALID
    } else {
        EXIT_NUMERICAL
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let result = configure_threads().and_then(|_| match &cli.command {
        Command::Fit(a) => run_fit(a),
        Command::Tree(a) => run_tree(a),
        Command::Synth(a) => run_synth(a),
        Command::Plotdata(a) => run_plot(a),
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if let PssaError::UnknownExample(_) = e {
                eprintln!("known examples: {}", EXAMPLE_IDS.join(", "));
            }
            exit_code(&e)
        }
    }
}

/// Entry point of the `pssa` binary.
pub fn main() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    run(&cli)
}
