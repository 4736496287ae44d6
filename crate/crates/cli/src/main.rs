mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Builds temporal dependency graphs of CocoaPods, Carthage and Swift PM
/// libraries and reports how vulnerabilities propagate through them.
#[derive(Debug, Parser)]
#[command(name = "vulnprop", version)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Write warnings as NDJSON here instead of stderr.
    #[arg(long, global = true)]
    pub warnings: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a graph from a version index and persist it.
    Ingest {
        /// NDJSON index, one record per library version.
        #[arg(long)]
        index: PathBuf,
        /// NDJSON library metadata (library, language).
        #[arg(long)]
        metadata: Option<PathBuf>,
        /// Where to write the graph.
        #[arg(long)]
        graph: PathBuf,
    },
    /// Attach vulnerabilities from NVD feeds or NDJSON records to a graph.
    ImportVulns {
        #[arg(long)]
        graph: PathBuf,
        /// NVD 1.1 JSON feed; repeatable.
        #[arg(long)]
        feed: Vec<PathBuf>,
        /// NDJSON product mapping (product_key, library). Required with --feed.
        #[arg(long)]
        mapping: Option<PathBuf>,
        /// NDJSON vulnerability records; repeatable.
        #[arg(long)]
        records: Vec<PathBuf>,
        /// Where to write the matched graph; defaults to overwriting --graph.
        #[arg(long)]
        graph_out: Option<PathBuf>,
    },
    /// Ecosystem-wide counts and affected fractions.
    Stats {
        #[arg(long)]
        graph: PathBuf,
    },
    /// Histogram of dependency levels at which libraries reach vulnerabilities.
    Propagation {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, value_enum, default_value_t = LevelMode::Shortest)]
        mode: LevelMode,
        #[arg(long, value_enum, default_value_t = StratifyArg::None)]
        stratify: StratifyArg,
        /// With --mode all, count every walk length instead of only minimal ones.
        #[arg(long)]
        all_path_lengths: bool,
        /// Also write a level,count,stratum CSV for plotting.
        #[arg(long)]
        plot_data: Option<PathBuf>,
    },
    /// Whether upgrading the direct dependency would have fixed each vulnerable chain.
    Upgrades {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, value_enum, default_value_t = ScopeArg::All)]
        scope: ScopeArg,
        #[arg(long, value_enum, default_value_t = ModeArg::Strict)]
        mode: ModeArg,
        #[arg(long, value_enum, default_value_t = GroupArg::Level)]
        group: GroupArg,
        /// Also write a group,fixed,not_fixed CSV for plotting.
        #[arg(long)]
        plot_data: Option<PathBuf>,
    },
    /// Scan vulnerability descriptions and references for code locations.
    Precision {
        #[arg(long)]
        graph: PathBuf,
        /// JSON pattern set replacing the defaults.
        #[arg(long)]
        patterns: Option<PathBuf>,
        /// Directory of `<vuln id>.patch` files to scan as well.
        #[arg(long)]
        patch_dir: Option<PathBuf>,
        /// Report counts per language instead of one row per vulnerability.
        #[arg(long)]
        by_language: bool,
    },
    /// Generate a seeded synthetic ecosystem and persist it.
    Synth {
        #[arg(long, default_value_t = 30)]
        libraries: usize,
        #[arg(long, default_value_t = 6)]
        max_versions: usize,
        #[arg(long, default_value_t = 0.1)]
        dependency_probability: f64,
        #[arg(long, default_value_t = 5)]
        vulns: usize,
        #[arg(long, default_value_t = 0.7)]
        fix_probability: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Where to write the graph.
        #[arg(long)]
        graph: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LevelMode {
    Shortest,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StratifyArg {
    None,
    Language,
    Severity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScopeArg {
    All,
    Latest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Strict,
    VulnAware,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GroupArg {
    Level,
    Severity,
    Language,
}

/// Marks an error as a bug or environment failure rather than bad input.
#[derive(Debug)]
pub struct Internal;

impl std::fmt::Display for Internal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("internal error")
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match std::panic::catch_unwind(|| commands::run(&cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Internal>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
        Err(_) => ExitCode::from(2),
    }
}
