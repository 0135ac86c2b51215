//! `acls` — cluster transaction streams under the multi-input heuristic and
//! reproduce the measurement suite: per-window counts and ratios, size
//! histograms, merge-increase quantiles, super-cluster statistics, anomaly
//! flags, bipartite structure graphs and inter-cluster flow graphs.

mod config;

use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use acls_core::analytics::AnalyticsError;
use acls_core::codec::{BinaryWriter, CodecError, SynthGenerator, TextWriter};
use acls_core::engine::{ClusterEngine, EngineError};
use acls_core::graphs::{self, GraphError};
use acls_core::model::TxRecord;
use acls_core::pipeline::{
    build_artifacts, open_stream, run_stream, sniff_format, Artifact, InputFormat, PipelineError,
};

use config::{CommonOpts, FileConfig, Format, Settings};

// Exit codes, also listed in the README.
const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_PARSE: u8 = 4;
const EXIT_VALIDATION: u8 = 5;
const EXIT_ENGINE: u8 = 6;
const EXIT_SNAPSHOT: u8 = 7;
const EXIT_GRAPH: u8 = 8;
const EXIT_ANALYTICS: u8 = 9;

#[derive(Parser)]
#[command(
    name = "acls",
    version,
    about = "Address clustering over transaction streams, with merge instrumentation and analytics"
)]
struct Cli {
    /// TOML config file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    opts: CommonOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic stream file.
    Synth {
        /// Stream file to write (format from --format, default binary).
        #[arg(long)]
        output: PathBuf,
    },
    /// Parse and validate a stream, printing totals.
    IngestCheck,
    /// Run the engine and print the headline summary.
    Cluster,
    /// Full pipeline: cluster, then write every report artifact to --out.
    Run,
    /// Restore --snapshot, process the --input suffix, then run like `run`.
    Resume,
    /// Per-window counts and ratio series.
    Metrics,
    /// Cluster-size histogram.
    Histogram,
    /// Merge-increase quantile table.
    Quantiles,
    /// Super-cluster statistics.
    Superclusters,
    /// Flag anomalous transactions and clusters.
    Flag,
    /// Bipartite structure graph of one cluster.
    Structure,
    /// Inter-cluster flow graph.
    Flows,
    /// Print what a snapshot file contains.
    Snapshot,
}

struct CliError {
    code: u8,
    msg: String,
}

impl CliError {
    fn config(msg: impl Into<String>) -> Self {
        CliError {
            code: EXIT_CONFIG,
            msg: msg.into(),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        let code = match &e {
            PipelineError::Config(_) => EXIT_CONFIG,
            PipelineError::Io(_) => EXIT_IO,
            PipelineError::Codec(c) => match c {
                CodecError::Io(_) => EXIT_IO,
                CodecError::InvalidParams(_) => EXIT_CONFIG,
                CodecError::Validation { .. } | CodecError::BinaryValidation { .. } => {
                    EXIT_VALIDATION
                }
                _ => EXIT_PARSE,
            },
            PipelineError::Engine(en) => match en {
                EngineError::CorruptSnapshot(_) | EngineError::VersionMismatch { .. } => {
                    EXIT_SNAPSHOT
                }
                EngineError::Io(_) => EXIT_IO,
                _ => EXIT_ENGINE,
            },
            PipelineError::Analytics(a) => match a {
                AnalyticsError::InvalidQ(_) | AnalyticsError::InvalidFraction(_) => EXIT_CONFIG,
                AnalyticsError::EmptyRange => EXIT_ANALYTICS,
            },
            PipelineError::Graph(g) => match g {
                GraphError::MalformedTagFile { .. } => EXIT_GRAPH,
                GraphError::UnknownCluster(_) => EXIT_GRAPH,
            },
        };
        CliError {
            code,
            msg: e.to_string(),
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        CliError::from(PipelineError::Engine(e))
    }
}

impl From<CodecError> for CliError {
    fn from(e: CodecError) -> Self {
        CliError::from(PipelineError::Codec(e))
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError {
            code: EXIT_IO,
            msg: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.msg);
            ExitCode::from(e.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file_config = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            toml::from_str::<FileConfig>(&text)
                .map_err(|e| CliError::config(format!("config file: {e}")))?
        }
        None => FileConfig::default(),
    };
    let mut settings = Settings::resolve(&cli.opts, &file_config).map_err(CliError::config)?;
    if let Some(path) = &settings.tags_path {
        let file = fs::File::open(path)?;
        settings.analysis.tags = graphs::parse_tag_file(BufReader::new(file))
            .map_err(|e| CliError::from(PipelineError::Graph(e)))?;
    }

    match cli.command {
        Command::Synth { output } => cmd_synth(&settings, &output),
        Command::IngestCheck => cmd_ingest_check(&settings),
        Command::Cluster => cmd_cluster(&settings),
        Command::Run => cmd_run(&settings, false),
        Command::Resume => cmd_run(&settings, true),
        Command::Metrics => cmd_subset(&settings, &["counts.csv", "ratios.csv"]),
        Command::Histogram => cmd_subset(&settings, &["sizes.csv"]),
        Command::Quantiles => cmd_subset(&settings, &["quantiles.csv"]),
        Command::Superclusters => cmd_subset(
            &settings,
            &["superclusters.csv", "supercluster_excluded.csv"],
        ),
        Command::Flag => cmd_subset(
            &settings,
            &["flagged_transactions.csv", "flagged_clusters.csv"],
        ),
        Command::Structure => cmd_subset(&settings, &["structure.dot", "structure.graphml"]),
        Command::Flows => cmd_subset(&settings, &["flows.dot", "flows.graphml"]),
        Command::Snapshot => cmd_snapshot_info(&settings),
    }
}

/// The stream a command works on: a file, or the seeded generator.
fn input_records(
    settings: &Settings,
) -> Result<Box<dyn Iterator<Item = Result<TxRecord, CodecError>>>, CliError> {
    if settings.format == Format::Synthetic {
        let gen = SynthGenerator::new(settings.synth.clone())?;
        return Ok(Box::new(gen.map(Ok)));
    }
    let path = settings
        .input
        .as_deref()
        .ok_or_else(|| CliError::config("an --input file is required"))?;
    let format = match settings.format {
        Format::Text => InputFormat::Text,
        Format::Binary => InputFormat::Binary,
        Format::Auto => sniff_format(path)?,
        Format::Synthetic => unreachable!(),
    };
    Ok(open_stream(path, format)?)
}

/// Build the engine state a reporting command runs on: restore the snapshot
/// when asked to, then process the input stream when given.
fn load_engine(settings: &Settings, restore_snapshot: bool) -> Result<ClusterEngine, CliError> {
    let restore = restore_snapshot
        .then_some(settings.snapshot.as_ref())
        .flatten();
    let mut engine = match restore {
        Some(path) => ClusterEngine::restore_file(path)?,
        None => ClusterEngine::new(settings.mode),
    };
    let have_input = settings.input.is_some() || settings.format == Format::Synthetic;
    if have_input {
        run_stream(&mut engine, input_records(settings)?)?;
    } else if restore.is_none() {
        return Err(CliError::config(
            "nothing to analyze: pass --input (or --format synthetic), or --snapshot",
        ));
    }
    Ok(engine)
}

fn write_artifacts(out_dir: &Path, artifacts: &[Artifact]) -> Result<(), CliError> {
    fs::create_dir_all(out_dir)?;
    for artifact in artifacts {
        fs::write(out_dir.join(&artifact.name), &artifact.bytes)?;
    }
    Ok(())
}

fn cmd_synth(settings: &Settings, output: &Path) -> Result<(), CliError> {
    let mut gen = SynthGenerator::new(settings.synth.clone())?;
    let file = fs::File::create(output)?;
    let writer = BufWriter::new(file);
    let mut count = 0u64;
    match settings.format {
        Format::Text => {
            let mut w = TextWriter::new(writer);
            for tx in &mut gen {
                w.write_record(&tx).map_err(CodecError::from)?;
                count += 1;
            }
            w.finish().map_err(CodecError::from)?;
        }
        _ => {
            let mut w = BinaryWriter::new(writer, Some(settings.synth.num_transactions))
                .map_err(CodecError::from)?;
            for tx in &mut gen {
                w.write_record(&tx).map_err(CodecError::from)?;
                count += 1;
            }
            w.finish().map_err(CodecError::from)?;
        }
    }
    println!("records={count}");
    if !gen.injected_ordinals().is_empty() {
        let ordinals: Vec<String> = gen.injected_ordinals().iter().map(u64::to_string).collect();
        println!("injected_ordinals={}", ordinals.join(","));
    }
    Ok(())
}

fn cmd_ingest_check(settings: &Settings) -> Result<(), CliError> {
    let mut transactions = 0u64;
    let mut inputs = 0u64;
    let mut outputs = 0u64;
    let mut coinbase = 0u64;
    for record in input_records(settings)? {
        let tx = record?;
        transactions += 1;
        outputs += tx.outputs.len() as u64;
        if tx.is_coinbase() {
            coinbase += 1;
        } else {
            inputs += tx.inputs.len() as u64;
        }
    }
    println!("transactions={transactions}");
    println!("coinbase={coinbase}");
    println!("inputs={inputs}");
    println!("outputs={outputs}");
    Ok(())
}

fn cmd_cluster(settings: &Settings) -> Result<(), CliError> {
    let engine = load_engine(settings, false)?;
    let (_, summary) = build_artifacts(&engine, &settings.analysis)?;
    println!("{summary}");
    if let Some(path) = settings
        .snapshot_out
        .as_ref()
        .or(settings.snapshot.as_ref())
    {
        engine.snapshot_file(path)?;
    }
    Ok(())
}

fn cmd_run(settings: &Settings, resume: bool) -> Result<(), CliError> {
    if resume && settings.snapshot.is_none() {
        return Err(CliError::config("resume needs --snapshot"));
    }
    let mut engine = match (&settings.snapshot, resume) {
        (Some(path), true) => ClusterEngine::restore_file(path)?,
        _ => ClusterEngine::new(settings.mode),
    };
    run_stream(&mut engine, input_records(settings)?)?;
    let (artifacts, summary) = build_artifacts(&engine, &settings.analysis)?;
    write_artifacts(&settings.out, &artifacts)?;
    let snapshot_path = if resume {
        settings
            .snapshot_out
            .clone()
            .unwrap_or_else(|| settings.out.join("snapshot.acsn"))
    } else {
        settings
            .snapshot
            .clone()
            .unwrap_or_else(|| settings.out.join("snapshot.acsn"))
    };
    engine.snapshot_file(&snapshot_path)?;
    println!("{summary}");
    println!("artifacts={}", settings.out.display());
    Ok(())
}

/// Run (or restore) the engine, then write just the named artifacts. Without
/// --out, the first artifact prints to stdout.
fn cmd_subset(settings: &Settings, names: &[&str]) -> Result<(), CliError> {
    let engine = load_engine(settings, true)?;
    let (artifacts, _) = build_artifacts(&engine, &settings.analysis)?;
    let chosen: Vec<Artifact> = artifacts
        .into_iter()
        .filter(|a| names.contains(&a.name.as_str()))
        .collect();
    if chosen
        .iter()
        .map(|a| a.name.as_str())
        .ne(names.iter().copied())
    {
        // structure.* may be absent on an empty stream.
        if chosen.is_empty() {
            return Err(CliError::config("no data to report"));
        }
    }
    match &cli_out(settings) {
        Some(dir) => write_artifacts(dir, &chosen)?,
        None => {
            let first = &chosen[0];
            print!("{}", String::from_utf8_lossy(&first.bytes));
        }
    }
    Ok(())
}

/// --out only counts as "write files" when the user actually set it.
fn cli_out(settings: &Settings) -> Option<PathBuf> {
    if settings.out == Path::new("out") {
        None
    } else {
        Some(settings.out.clone())
    }
}

fn cmd_snapshot_info(settings: &Settings) -> Result<(), CliError> {
    let path = settings
        .snapshot
        .as_deref()
        .ok_or_else(|| CliError::config("pass --snapshot FILE"))?;
    let engine = ClusterEngine::restore_file(path)?;
    println!("transactions={}", engine.processed());
    println!("addresses={}", engine.num_addresses());
    println!("clusters_ge2={}", engine.state().clusters_ge2());
    println!("outpoints={}", engine.index().len());
    println!("merge_events={}", engine.log().merge_events().len());
    println!(
        "mode={}",
        match engine.mode() {
            acls_core::engine::ResolutionMode::Strict => "strict",
            acls_core::engine::ResolutionMode::Lenient => "lenient",
        }
    );
    Ok(())
}
