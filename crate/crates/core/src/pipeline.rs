//! One-shot orchestration: feed a record stream through the engine, then
//! derive every report artifact as deterministic bytes. The CLI is a thin
//! wrapper around this module, and the resume-equivalence tests compare the
//! artifact bytes it produces.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use thiserror::Error;

use crate::analytics::{
    self, csv, AnalyticsError, EventRange, WindowSpec, DEFAULT_QUANTILE_WINDOW, DEFAULT_Q_LIST,
    SUPERCLUSTER_MAX_SIZE, SUPERCLUSTER_MIN_SIZE,
};
use crate::codec::{BinaryReader, CodecError, TextReader};
use crate::engine::{ClusterEngine, EngineError};
use crate::graphs::{self, ClusterSelection, GraphError};
use crate::model::{TagEntry, TxRecord};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Config(String),
}

/// Everything the analysis stage needs beyond the engine state.
#[derive(Debug, Clone)]
pub struct AnalysisParams {
    pub window: WindowSpec,
    pub quantile_window: u64,
    pub q_list: Vec<u64>,
    pub anomaly_fraction: f64,
    pub anomaly_range: EventRange,
    pub large_threshold: u64,
    pub supercluster_min: u64,
    pub supercluster_max: u64,
    pub selection: ClusterSelection,
    pub min_flow: u64,
    pub include_self_loops: bool,
    /// External form of any member of the cluster to export structure for;
    /// defaults to the largest cluster.
    pub structure_member: Option<String>,
    pub tags: Vec<TagEntry>,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        AnalysisParams {
            window: WindowSpec::Month,
            quantile_window: DEFAULT_QUANTILE_WINDOW,
            q_list: DEFAULT_Q_LIST.to_vec(),
            anomaly_fraction: 0.0001,
            anomaly_range: EventRange::All,
            large_threshold: 1000,
            supercluster_min: SUPERCLUSTER_MIN_SIZE,
            supercluster_max: SUPERCLUSTER_MAX_SIZE,
            selection: ClusterSelection::TopBySize(20),
            min_flow: 0,
            include_self_loops: false,
            structure_member: None,
            tags: Vec::new(),
        }
    }
}

/// A named report file, produced in memory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

/// Headline statistics printed after a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSummary {
    pub transactions: u64,
    pub addresses: u64,
    pub clusters_ge2: u64,
    pub merge_events: u64,
    pub outputs_created: u64,
    pub inputs_resolved: u64,
    pub superclusters: u64,
    pub supercluster_excluded: u64,
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "transactions={}", self.transactions)?;
        writeln!(f, "addresses={}", self.addresses)?;
        writeln!(f, "clusters_ge2={}", self.clusters_ge2)?;
        writeln!(f, "merge_events={}", self.merge_events)?;
        writeln!(f, "outputs_created={}", self.outputs_created)?;
        writeln!(f, "inputs_resolved={}", self.inputs_resolved)?;
        writeln!(f, "superclusters={}", self.superclusters)?;
        write!(f, "supercluster_excluded={}", self.supercluster_excluded)
    }
}

/// Drive a record stream through the engine. Returns the number of records
/// processed by this call.
pub fn run_stream<I>(engine: &mut ClusterEngine, records: I) -> Result<u64, PipelineError>
where
    I: IntoIterator<Item = Result<TxRecord, CodecError>>,
{
    let mut n = 0u64;
    for record in records {
        engine.process_transaction(&record?)?;
        n += 1;
    }
    Ok(n)
}

/// Stream input format for files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Text,
    Binary,
}

/// Open a stream file as a record iterator.
pub fn open_stream(
    path: &Path,
    format: InputFormat,
) -> Result<Box<dyn Iterator<Item = Result<TxRecord, CodecError>>>, PipelineError> {
    let file = File::open(path)?;
    Ok(match format {
        InputFormat::Text => Box::new(TextReader::new(BufReader::new(file))),
        InputFormat::Binary => Box::new(BinaryReader::new(BufReader::new(file))?),
    })
}

/// Sniff text vs binary from the leading bytes (`ACLS` magic => binary).
pub fn sniff_format(path: &Path) -> Result<InputFormat, PipelineError> {
    let mut file = File::open(path)?;
    let mut magic = [0u8; 4];
    let n = file.read(&mut magic)?;
    Ok(if n == 4 && magic == crate::codec::STREAM_MAGIC {
        InputFormat::Binary
    } else {
        InputFormat::Text
    })
}

/// Compute every report artifact from a quiescent engine.
pub fn build_artifacts(
    engine: &ClusterEngine,
    params: &AnalysisParams,
) -> Result<(Vec<Artifact>, RunSummary), PipelineError> {
    let log = engine.log();
    let mut artifacts = Vec::new();
    let mut push = |name: &str, text: String| {
        artifacts.push(Artifact {
            name: name.to_string(),
            bytes: text.into_bytes(),
        });
    };

    let counts = analytics::window_counts(log, params.window);
    push("counts.csv", csv::window_counts_csv(&counts));

    let ratios = analytics::ratio_series(log, params.window);
    push("ratios.csv", csv::ratio_series_csv(&ratios));

    let hist = analytics::size_histogram(engine.state());
    push("sizes.csv", csv::size_histogram_csv(&hist));

    let quantiles = analytics::merge_increase_quantiles(
        log.merge_events(),
        engine.processed(),
        params.quantile_window,
        &params.q_list,
    )?;
    push(
        "quantiles.csv",
        csv::quantiles_csv(&quantiles, &params.q_list),
    );

    let superclusters = analytics::supercluster_stats(
        engine.state(),
        engine.index(),
        engine.stats(),
        params.supercluster_min,
        params.supercluster_max,
    );
    push("superclusters.csv", csv::supercluster_csv(&superclusters));
    push(
        "supercluster_excluded.csv",
        csv::supercluster_excluded_csv(&superclusters),
    );

    let flagged_txs = if engine.processed() > 0 {
        analytics::flag_anomalous_transactions(log, params.anomaly_fraction, params.anomaly_range)?
    } else {
        Vec::new()
    };
    push(
        "flagged_transactions.csv",
        csv::flagged_txs_csv(&flagged_txs),
    );

    let flagged_clusters =
        analytics::flag_anomalous_clusters(log, engine.state(), params.large_threshold);
    push(
        "flagged_clusters.csv",
        csv::flagged_clusters_csv(&flagged_clusters),
    );

    let mut flows = graphs::flow_graph(
        engine,
        &params.selection,
        params.min_flow,
        params.include_self_loops,
    )?;
    graphs::apply_tags(&mut flows, engine, &params.tags);
    push("flows.dot", flows.to_dot());
    push("flows.graphml", flows.to_graphml());

    let structure_member = match &params.structure_member {
        Some(external) => Some(
            engine
                .find(external)
                .map_err(|_| PipelineError::Graph(GraphError::UnknownCluster(external.clone())))?,
        ),
        None => engine
            .state()
            .clusters()
            .into_iter()
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|(rep, _)| rep),
    };
    if let Some(member) = structure_member {
        let structure = graphs::bipartite_subgraph(engine, member)?;
        push("structure.dot", structure.to_dot());
        push("structure.graphml", structure.to_graphml());
    }

    let summary = RunSummary {
        transactions: engine.processed(),
        addresses: engine.num_addresses(),
        clusters_ge2: engine.state().clusters_ge2(),
        merge_events: log.merge_events().len() as u64,
        outputs_created: engine.stats().outputs_created,
        inputs_resolved: engine.stats().inputs_resolved,
        superclusters: superclusters.count,
        supercluster_excluded: superclusters.excluded.len() as u64,
    };
    push("summary.txt", format!("{summary}\n"));

    Ok((artifacts, summary))
}
