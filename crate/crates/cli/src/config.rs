//! Flag and config-file merging. Every knob can come from the command line
//! or from a TOML config file; flags win, then the file, then defaults.

use std::path::PathBuf;

use clap::Args;
use serde::Deserialize;

use acls_core::analytics::{EventRange, WindowSpec, DEFAULT_QUANTILE_WINDOW, DEFAULT_Q_LIST};
use acls_core::analytics::{SUPERCLUSTER_MAX_SIZE, SUPERCLUSTER_MIN_SIZE};
use acls_core::codec::{AnomalyParams, SynthParams};
use acls_core::engine::ResolutionMode;
use acls_core::graphs::ClusterSelection;
use acls_core::pipeline::AnalysisParams;

#[derive(Debug, Args)]
pub struct CommonOpts {
    /// Input stream file.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Input format: text, binary, auto (sniff) or synthetic.
    #[arg(long, global = true)]
    pub format: Option<String>,
    /// Fail on inputs that reference unknown outpoints (default).
    #[arg(long, global = true, conflicts_with = "lenient")]
    pub strict: bool,
    /// Skip unresolvable inputs instead of failing (truncated extracts).
    #[arg(long, global = true)]
    pub lenient: bool,
    /// Series windowing: "month" or a transaction count.
    #[arg(long, global = true)]
    pub window: Option<String>,
    /// Transactions per merge-increase quantile window.
    #[arg(long, global = true)]
    pub quantile_window: Option<u64>,
    /// Quantile orders, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub q: Option<Vec<u64>>,
    /// Fraction of transactions to flag as anomalous.
    #[arg(long, global = true)]
    pub fraction: Option<f64>,
    /// Component size that counts as "large" for cluster flagging.
    #[arg(long, global = true)]
    pub large_threshold: Option<u64>,
    /// Restrict anomaly flagging to ordinals [start, end).
    #[arg(long, global = true)]
    pub range_start: Option<u64>,
    #[arg(long, global = true)]
    pub range_end: Option<u64>,
    /// Interpret --range-start/--range-end as unix timestamps.
    #[arg(long, global = true)]
    pub range_time: bool,
    /// Number of clusters in the flow graph.
    #[arg(long, global = true)]
    pub top_n: Option<usize>,
    /// Flow-graph ranking: "size" (addresses) or "received" (total satoshis).
    #[arg(long, global = true)]
    pub rank_by: Option<String>,
    /// Drop aggregated flow edges below this satoshi total.
    #[arg(long, global = true)]
    pub min_flow: Option<u64>,
    /// Keep change flows (self-loops) in the flow graph.
    #[arg(long, global = true)]
    pub self_loops: bool,
    /// CSV tag file: address,label,category.
    #[arg(long, global = true)]
    pub tags: Option<PathBuf>,
    /// Output directory for report artifacts.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Snapshot file (written by run/cluster, read by resume/analytics).
    #[arg(long, global = true)]
    pub snapshot: Option<PathBuf>,
    /// Where resume writes the updated snapshot.
    #[arg(long, global = true)]
    pub snapshot_out: Option<PathBuf>,
    /// Any member address of the cluster to export structure for.
    #[arg(long, global = true)]
    pub structure_cluster: Option<String>,
    /// Super-cluster size bounds.
    #[arg(long, global = true)]
    pub supercluster_min: Option<u64>,
    #[arg(long, global = true)]
    pub supercluster_max: Option<u64>,

    // Synthetic generator knobs.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub num_tx: Option<u64>,
    #[arg(long, global = true)]
    pub p_reuse: Option<f64>,
    #[arg(long, global = true)]
    pub mean_inputs: Option<f64>,
    #[arg(long, global = true)]
    pub mean_outputs: Option<f64>,
    #[arg(long, global = true)]
    pub op_return_frac: Option<f64>,
    #[arg(long, global = true)]
    pub multisig_frac: Option<f64>,
    #[arg(long, global = true)]
    pub ts_start: Option<u64>,
    #[arg(long, global = true)]
    pub mean_gap: Option<u64>,
    #[arg(long, global = true)]
    pub coinbase_interval: Option<u64>,
    /// Inject this many large-large merge transactions.
    #[arg(long, global = true)]
    pub anomaly_pairs: Option<u32>,
    #[arg(long, global = true)]
    pub anomaly_family_size: Option<u32>,
}

/// TOML config file; same knobs as the flags.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub input: Option<PathBuf>,
    pub format: Option<String>,
    pub lenient: Option<bool>,
    pub window: Option<String>,
    pub quantile_window: Option<u64>,
    pub q: Option<Vec<u64>>,
    pub fraction: Option<f64>,
    pub large_threshold: Option<u64>,
    pub top_n: Option<usize>,
    pub rank_by: Option<String>,
    pub min_flow: Option<u64>,
    pub self_loops: Option<bool>,
    pub tags: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub snapshot: Option<PathBuf>,
    pub snapshot_out: Option<PathBuf>,
    pub structure_cluster: Option<String>,
    pub supercluster_min: Option<u64>,
    pub supercluster_max: Option<u64>,
    pub seed: Option<u64>,
    pub num_tx: Option<u64>,
    pub p_reuse: Option<f64>,
    pub mean_inputs: Option<f64>,
    pub mean_outputs: Option<f64>,
    pub op_return_frac: Option<f64>,
    pub multisig_frac: Option<f64>,
    pub ts_start: Option<u64>,
    pub mean_gap: Option<u64>,
    pub coinbase_interval: Option<u64>,
    pub anomaly_pairs: Option<u32>,
    pub anomaly_family_size: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Auto,
    Text,
    Binary,
    Synthetic,
}

/// Fully resolved settings for one invocation.
#[derive(Debug)]
pub struct Settings {
    pub input: Option<PathBuf>,
    pub format: Format,
    pub mode: ResolutionMode,
    pub out: PathBuf,
    pub snapshot: Option<PathBuf>,
    pub snapshot_out: Option<PathBuf>,
    pub tags_path: Option<PathBuf>,
    pub analysis: AnalysisParams,
    pub synth: SynthParams,
}

fn parse_window(s: &str) -> Result<WindowSpec, String> {
    if s.eq_ignore_ascii_case("month") {
        return Ok(WindowSpec::Month);
    }
    match s.parse::<u64>() {
        Ok(n) if n >= 1 => Ok(WindowSpec::TxCount(n)),
        _ => Err(format!(
            "--window must be \"month\" or a positive count, got {s:?}"
        )),
    }
}

impl Settings {
    pub fn resolve(opts: &CommonOpts, file: &FileConfig) -> Result<Settings, String> {
        let format = match opts
            .format
            .clone()
            .or_else(|| file.format.clone())
            .unwrap_or_else(|| "auto".to_string())
            .as_str()
        {
            "auto" => Format::Auto,
            "text" => Format::Text,
            "binary" => Format::Binary,
            "synthetic" => Format::Synthetic,
            other => return Err(format!("unknown format {other:?}")),
        };
        let mode = if opts.lenient || (!opts.strict && file.lenient == Some(true)) {
            ResolutionMode::Lenient
        } else {
            ResolutionMode::Strict
        };
        let window = match opts.window.clone().or_else(|| file.window.clone()) {
            Some(s) => parse_window(&s)?,
            None => WindowSpec::Month,
        };
        let quantile_window = opts
            .quantile_window
            .or(file.quantile_window)
            .unwrap_or(DEFAULT_QUANTILE_WINDOW);
        if quantile_window == 0 {
            return Err("--quantile-window must be at least 1".to_string());
        }
        let q_list = opts
            .q
            .clone()
            .or_else(|| file.q.clone())
            .unwrap_or_else(|| DEFAULT_Q_LIST.to_vec());
        let top_n = opts.top_n.or(file.top_n).unwrap_or(20);
        let selection = match opts
            .rank_by
            .clone()
            .or_else(|| file.rank_by.clone())
            .unwrap_or_else(|| "size".to_string())
            .as_str()
        {
            "size" => ClusterSelection::TopBySize(top_n),
            "received" => ClusterSelection::TopByReceived(top_n),
            other => return Err(format!("--rank-by must be size or received, got {other:?}")),
        };
        let anomaly_range = match (opts.range_start, opts.range_end, opts.range_time) {
            (None, None, _) => EventRange::All,
            (start, end, false) => EventRange::Ordinals {
                start: start.unwrap_or(0),
                end: end.unwrap_or(u64::MAX),
            },
            (start, end, true) => EventRange::Timestamps {
                start: start.unwrap_or(0),
                end: end.unwrap_or(u64::MAX),
            },
        };

        let analysis = AnalysisParams {
            window,
            quantile_window,
            q_list,
            anomaly_fraction: opts.fraction.or(file.fraction).unwrap_or(0.0001),
            anomaly_range,
            large_threshold: opts
                .large_threshold
                .or(file.large_threshold)
                .unwrap_or(1000),
            supercluster_min: opts
                .supercluster_min
                .or(file.supercluster_min)
                .unwrap_or(SUPERCLUSTER_MIN_SIZE),
            supercluster_max: opts
                .supercluster_max
                .or(file.supercluster_max)
                .unwrap_or(SUPERCLUSTER_MAX_SIZE),
            selection,
            min_flow: opts.min_flow.or(file.min_flow).unwrap_or(0),
            include_self_loops: opts.self_loops || file.self_loops.unwrap_or(false),
            structure_member: opts
                .structure_cluster
                .clone()
                .or_else(|| file.structure_cluster.clone()),
            tags: Vec::new(),
        };

        let defaults = SynthParams::default();
        let anomaly = match (
            opts.anomaly_pairs.or(file.anomaly_pairs),
            opts.anomaly_family_size.or(file.anomaly_family_size),
        ) {
            (None, None) => None,
            (pairs, family) => Some(AnomalyParams {
                pairs: pairs.unwrap_or(1),
                family_size: family.unwrap_or(100),
            }),
        };
        let synth = SynthParams {
            seed: opts.seed.or(file.seed).unwrap_or(defaults.seed),
            num_transactions: opts
                .num_tx
                .or(file.num_tx)
                .unwrap_or(defaults.num_transactions),
            p_reuse: opts.p_reuse.or(file.p_reuse).unwrap_or(defaults.p_reuse),
            mean_inputs: opts
                .mean_inputs
                .or(file.mean_inputs)
                .unwrap_or(defaults.mean_inputs),
            mean_outputs: opts
                .mean_outputs
                .or(file.mean_outputs)
                .unwrap_or(defaults.mean_outputs),
            op_return_fraction: opts
                .op_return_frac
                .or(file.op_return_frac)
                .unwrap_or(defaults.op_return_fraction),
            multisig_fraction: opts
                .multisig_frac
                .or(file.multisig_frac)
                .unwrap_or(defaults.multisig_fraction),
            timestamp_start: opts
                .ts_start
                .or(file.ts_start)
                .unwrap_or(defaults.timestamp_start),
            mean_gap_secs: opts
                .mean_gap
                .or(file.mean_gap)
                .unwrap_or(defaults.mean_gap_secs),
            coinbase_interval: opts
                .coinbase_interval
                .or(file.coinbase_interval)
                .unwrap_or(defaults.coinbase_interval),
            anomaly,
        };

        Ok(Settings {
            input: opts.input.clone().or_else(|| file.input.clone()),
            format,
            mode,
            out: opts
                .out
                .clone()
                .or_else(|| file.out.clone())
                .unwrap_or_else(|| PathBuf::from("out")),
            snapshot: opts.snapshot.clone().or_else(|| file.snapshot.clone()),
            snapshot_out: opts
                .snapshot_out
                .clone()
                .or_else(|| file.snapshot_out.clone()),
            tags_path: opts.tags.clone().or_else(|| file.tags.clone()),
            analysis,
            synth,
        })
    }
}
