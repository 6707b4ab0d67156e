//! Command-line experiments: analytical curves, Monte Carlo sweeps, hash-count
//! optimization, figure reproduction and single-packet traces.

pub mod commands;
pub mod error;
pub mod scenario;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use clbf::analytics::Backend;
use clbf::segmentation::SeqLenMode;

use crate::commands::{
    cmd_analyze, cmd_figure, cmd_optimize, cmd_simulate, cmd_trace, fj_comparison_csv, Artifact,
};
pub use crate::error::CliError;
use crate::scenario::{Hop, Preset, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    #[value(name = "closed_form")]
    ClosedForm,
    #[value(name = "oracle")]
    Oracle,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::ClosedForm => Backend::ClosedForm,
            BackendArg::Oracle => Backend::Oracle,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "clbf", version, about = "Spatial provenance with correlated linear Bloom filters")]
pub struct Cli {
    /// Overrides the experiment base seed (and the filter seed for `trace`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the trial count per grid point.
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    #[arg(long, global = true, value_enum, default_value = "closed_form")]
    pub backend: BackendArg,
    /// Write artifacts here instead of printing them.
    #[arg(long, global = true, env = "CLBF_OUT_DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Source {
    /// Scenario file (TOML).
    #[arg(required_unless_present = "preset")]
    pub scenario: Option<PathBuf>,
    /// Built-in scenario: FIG3_D8, FIG3_D16, FIG4 or FIG5.
    #[arg(long, conflicts_with = "scenario")]
    pub preset: Option<Preset>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analytical false-positive probability over the scenario's sweep.
    Analyze(Source),
    /// Monte Carlo false-positive rate over the scenario's sweep.
    Simulate(Source),
    /// Optimal k2 (and edge/location split when `total_bits` is set).
    Optimize(Source),
    /// Paired analytical/empirical curves and gnuplot scripts for presets.
    Figures {
        /// Presets to emit (default: all).
        #[arg(long)]
        preset: Vec<Preset>,
    },
    /// Embeds and recovers one declared path, reporting each step.
    Trace {
        scenario: PathBuf,
        /// Source-first hops, e.g. `I4@A3,I3@A2,I2@A2,I1@A1`; overrides [trace].path.
        #[arg(long)]
        path: Option<String>,
    },
}

impl Cli {
    fn apply_overrides(&self, scenario: &mut Scenario) {
        if let Some(seed) = self.seed {
            scenario.config.base_seed = seed;
            scenario.filter_seed = seed;
        }
        if let Some(trials) = self.trials {
            scenario.config.trials = trials;
        }
    }

    fn load(&self, source: &Source) -> Result<Scenario, CliError> {
        let mut s = match (&source.scenario, source.preset) {
            (Some(path), _) => Scenario::load(path)?,
            (None, Some(p)) => p.scenario(),
            (None, None) => return Err(CliError::Usage("a scenario file or --preset is required".into())),
        };
        self.apply_overrides(&mut s);
        Ok(s)
    }
}

/// Runs a parsed command line. Returns the text for stdout; artifacts go to
/// `--out` when set (always for `figures`, defaulting to the working directory).
pub fn execute(cli: &Cli) -> Result<String, CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("--threads: {e}")))?;
    }
    let backend = Backend::from(cli.backend);
    match &cli.command {
        Command::Analyze(src) => {
            let s = cli.load(src)?;
            let csv = cmd_analyze(&s, backend)?;
            emit(cli.out.as_deref(), vec![Artifact { name: format!("analyze_{}.csv", file_stem(&s)), contents: csv }])
        }
        Command::Simulate(src) => {
            let s = cli.load(src)?;
            let csv = cmd_simulate(&s)?;
            emit(cli.out.as_deref(), vec![Artifact { name: format!("simulate_{}.csv", file_stem(&s)), contents: csv }])
        }
        Command::Optimize(src) => {
            let s = cli.load(src)?;
            let r = cmd_optimize(&s, backend)?;
            let curve = Artifact { name: format!("optimize_{}_curve.csv", file_stem(&s)), contents: r.curve_csv };
            match &cli.out {
                Some(dir) => {
                    let written = write_artifacts(dir, &[curve])?;
                    Ok(format!("{}curve: {}\n", r.report, written[0].display()))
                }
                None => Ok(format!("{}\n{}", r.report, curve.contents)),
            }
        }
        Command::Figures { preset } => {
            let presets = if preset.is_empty() { Preset::ALL.to_vec() } else { preset.clone() };
            let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
            let mut summary = String::new();
            let mut artifacts = Vec::new();
            for p in presets {
                let mut s = p.scenario();
                cli.apply_overrides(&mut s);
                let fig = cmd_figure(&s, p, backend)?;
                writeln!(
                    summary,
                    "{p}: argmin analytical = {}, argmin empirical = {}",
                    fig.argmin_analytical(),
                    fig.argmin_empirical()
                )
                .unwrap();
                artifacts.push(fig.csv);
                artifacts.push(fig.script);
            }
            for mode in [SeqLenMode::H, SeqLenMode::HPlus1] {
                artifacts.push(fj_comparison_csv(6, 8, mode)?);
            }
            for path in write_artifacts(&dir, &artifacts)? {
                writeln!(summary, "wrote {}", path.display()).unwrap();
            }
            Ok(summary)
        }
        Command::Trace { scenario, path } => {
            let mut s = Scenario::load(scenario)?;
            cli.apply_overrides(&mut s);
            let declared = s.trace.clone();
            let hops: Vec<Hop> = match path {
                Some(p) => p.split(',').map(str::parse).collect::<Result<_, _>>().map_err(CliError::Usage)?,
                None => declared
                    .as_ref()
                    .map(|t| t.path.clone())
                    .ok_or_else(|| CliError::Usage("no path: add [trace] path or pass --path".into()))?,
            };
            let pid = declared.map_or(1, |t| t.pid);
            let report = cmd_trace(&s, &hops, pid)?;
            emit(cli.out.as_deref(), vec![Artifact { name: format!("trace_{}.txt", file_stem(&s)), contents: report }])
        }
    }
}

fn file_stem(s: &Scenario) -> String {
    s.name.to_ascii_lowercase()
}

fn emit(out: Option<&Path>, artifacts: Vec<Artifact>) -> Result<String, CliError> {
    match out {
        Some(dir) => Ok(write_artifacts(dir, &artifacts)?
            .into_iter()
            .map(|p| format!("wrote {}\n", p.display()))
            .collect()),
        None => Ok(artifacts.into_iter().map(|a| a.contents).collect()),
    }
}

fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir)?;
    artifacts
        .iter()
        .map(|a| {
            let path = dir.join(&a.name);
            std::fs::write(&path, &a.contents)?;
            Ok(path)
        })
        .collect()
}
