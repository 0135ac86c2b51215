//! Pure computations over the engine log and cluster state: per-window count
//! and ratio series, cluster-size histograms, super-cluster statistics,
//! merge-increase quantiles and anomaly flags. Same log in, same bytes out.

pub mod csv;

use std::collections::{BTreeMap, HashSet};

use chrono::{Datelike, TimeZone, Utc};
use thiserror::Error;

use crate::engine::{
    ClusterState, EngineError, EngineLog, EngineStats, OutpointIndex, ResolutionMode,
};
use crate::model::{AddressId, MergeEvent, ScriptClass, TxId, TxRecord};

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticsError {
    #[error("quantile parameter q must be at least 2, got {0}")]
    InvalidQ(u64),
    #[error("fraction must lie in (0, 1], got {0}")]
    InvalidFraction(f64),
    #[error("range selects no transactions")]
    EmptyRange,
}

/// Windowing for the count and ratio series: calendar months (UTC) or fixed
/// transaction-count blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowSpec {
    Month,
    TxCount(u64),
}

impl WindowSpec {
    fn key(&self, ordinal: u64, timestamp: u64) -> i64 {
        match *self {
            WindowSpec::Month => {
                let t = Utc
                    .timestamp_opt(timestamp as i64, 0)
                    .single()
                    .expect("unix seconds fit chrono's range");
                i64::from(t.year()) * 12 + i64::from(t.month0())
            }
            WindowSpec::TxCount(n) => {
                assert!(n >= 1, "window size must be at least 1");
                (ordinal / n) as i64
            }
        }
    }

    /// Half-open `[start, end)` bounds of a window key: unix seconds in month
    /// mode, ordinals in count mode.
    fn bounds(&self, key: i64) -> (u64, u64) {
        match *self {
            WindowSpec::Month => {
                let (year, month0) = (key.div_euclid(12), key.rem_euclid(12));
                let start = Utc
                    .with_ymd_and_hms(year as i32, month0 as u32 + 1, 1, 0, 0, 0)
                    .single()
                    .expect("valid month start");
                let (ny, nm) = if month0 == 11 {
                    (year + 1, 1)
                } else {
                    (year, month0 as u32 + 2)
                };
                let end = Utc
                    .with_ymd_and_hms(ny as i32, nm, 1, 0, 0, 0)
                    .single()
                    .expect("valid month end");
                (start.timestamp() as u64, end.timestamp() as u64)
            }
            WindowSpec::TxCount(n) => (key as u64 * n, (key as u64 + 1) * n),
        }
    }
}

/// One window of the count series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowCounts {
    pub window_start: u64,
    pub window_end: u64,
    pub transactions: u64,
    pub new_addresses: u64,
    /// Clusters that first reached two addresses in this window.
    pub clusters_new_ge2: u64,
    /// Clusters with at least two addresses existing at window end
    /// (cumulative, accounts for large-large merges collapsing two into one).
    pub clusters_ge2_total: u64,
}

/// Per-window transaction, new-address and cluster-formation counts. Windows
/// without transactions are skipped.
pub fn window_counts(log: &EngineLog, spec: WindowSpec) -> Vec<WindowCounts> {
    #[derive(Default)]
    struct Acc {
        transactions: u64,
        new_addresses: u64,
        new_ge2: u64,
        ge2_delta: i64,
    }
    let mut windows: BTreeMap<i64, Acc> = BTreeMap::new();
    for (ordinal, meta) in log.tx_meta().iter().enumerate() {
        let acc = windows
            .entry(spec.key(ordinal as u64, meta.timestamp))
            .or_default();
        acc.transactions += 1;
        acc.new_addresses += u64::from(meta.new_addresses);
    }
    for event in log.merge_events() {
        let meta = &log.tx_meta()[event.tx_ordinal as usize];
        let acc = windows
            .entry(spec.key(event.tx_ordinal, meta.timestamp))
            .or_default();
        let big = event.large_component_count() as i64;
        acc.ge2_delta += 1 - big;
        if big == 0 {
            acc.new_ge2 += 1;
        }
    }
    let mut total: i64 = 0;
    windows
        .into_iter()
        .map(|(key, acc)| {
            total += acc.ge2_delta;
            let (window_start, window_end) = spec.bounds(key);
            WindowCounts {
                window_start,
                window_end,
                transactions: acc.transactions,
                new_addresses: acc.new_addresses,
                clusters_new_ge2: acc.new_ge2,
                clusters_ge2_total: total as u64,
            }
        })
        .collect()
}

/// One window of the ratio series with its raw counts.
///
/// `new_addresses <= addressable_outputs` and `merging_txs <= nontrivial_txs`
/// hold on every stream; both pairs are equal when every output address is
/// fresh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioWindow {
    pub window_start: u64,
    pub window_end: u64,
    pub transactions: u64,
    pub new_addresses: u64,
    pub merging_txs: u64,
    pub addressable_outputs: u64,
    pub nontrivial_txs: u64,
}

impl RatioWindow {
    pub fn new_addresses_per_tx(&self) -> f64 {
        self.new_addresses as f64 / self.transactions as f64
    }

    pub fn merging_txs_per_tx(&self) -> f64 {
        self.merging_txs as f64 / self.transactions as f64
    }

    pub fn addressable_outputs_per_tx(&self) -> f64 {
        self.addressable_outputs as f64 / self.transactions as f64
    }

    pub fn nontrivial_txs_per_tx(&self) -> f64 {
        self.nontrivial_txs as f64 / self.transactions as f64
    }

    /// Address-reuse measure: gap between the output bound and observed new
    /// addresses. Wider means more reuse.
    pub fn reuse_gap(&self) -> f64 {
        self.addressable_outputs_per_tx() - self.new_addresses_per_tx()
    }

    /// Merge-avoidance measure: gap between non-trivial transactions and
    /// actual merges.
    pub fn merge_gap(&self) -> f64 {
        self.nontrivial_txs_per_tx() - self.merging_txs_per_tx()
    }
}

/// Per-window ratios of new addresses and merging transactions per
/// transaction together with their upper bounds. Empty windows are skipped.
pub fn ratio_series(log: &EngineLog, spec: WindowSpec) -> Vec<RatioWindow> {
    #[derive(Default)]
    struct Acc {
        transactions: u64,
        new_addresses: u64,
        merging: u64,
        addressable: u64,
        nontrivial: u64,
    }
    let mut windows: BTreeMap<i64, Acc> = BTreeMap::new();
    for (ordinal, meta) in log.tx_meta().iter().enumerate() {
        let acc = windows
            .entry(spec.key(ordinal as u64, meta.timestamp))
            .or_default();
        acc.transactions += 1;
        acc.new_addresses += u64::from(meta.new_addresses);
        acc.addressable += u64::from(meta.addressable_outputs);
        acc.merging += u64::from(meta.caused_merge);
        acc.nontrivial += u64::from(meta.is_nontrivial);
    }
    windows
        .into_iter()
        .filter(|(_, acc)| acc.transactions > 0)
        .map(|(key, acc)| {
            let (window_start, window_end) = spec.bounds(key);
            RatioWindow {
                window_start,
                window_end,
                transactions: acc.transactions,
                new_addresses: acc.new_addresses,
                merging_txs: acc.merging,
                addressable_outputs: acc.addressable,
                nontrivial_txs: acc.nontrivial,
            }
        })
        .collect()
}

/// Upper bound on the new addresses a transaction can introduce: outputs
/// adjusted for their script class. OP_RETURN counts nothing, multisig counts
/// its `n` keys, known P2SH counts the script-hash address plus the resolved
/// inner addresses carried by the record.
pub fn addressable_output_count(tx: &TxRecord) -> u64 {
    tx.outputs
        .iter()
        .map(|out| match out.script_class {
            ScriptClass::OpReturn => 0,
            ScriptClass::P2pk | ScriptClass::P2pkh | ScriptClass::P2shUnknown => 1,
            ScriptClass::Multisig { n, .. } => u64::from(n),
            ScriptClass::P2shKnown => out.addresses.len() as u64,
            ScriptClass::Unknown => out.addresses.len().min(1) as u64,
        })
        .sum()
}

/// True when the transaction spends outputs assigned to at least two distinct
/// addresses. Coinbase transactions are trivial by definition.
pub fn is_nontrivial(
    tx: &TxRecord,
    index: &OutpointIndex,
    mode: ResolutionMode,
) -> Result<bool, EngineError> {
    if tx.is_coinbase() {
        return Ok(false);
    }
    let mut seen: Option<AddressId> = None;
    for op in &tx.inputs {
        match index.get(op) {
            Some(entry) => {
                for &addr in &entry.addresses {
                    match seen {
                        None => seen = Some(addr),
                        Some(first) if first != addr => return Ok(true),
                        Some(_) => {}
                    }
                }
            }
            None => match mode {
                ResolutionMode::Strict => return Err(EngineError::UnknownOutpoint(*op)),
                ResolutionMode::Lenient => {}
            },
        }
    }
    Ok(false)
}

/// Decade-binned sizes of clusters with at least two addresses:
/// `bins[k]` counts clusters with size in `[10^k, 10^(k+1))`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SizeHistogram {
    pub bins: Vec<u64>,
}

impl SizeHistogram {
    /// `(lower, upper, count)` rows, zero-count bins included up to the
    /// largest occupied decade.
    pub fn rows(&self) -> Vec<(u64, u64, u64)> {
        self.bins
            .iter()
            .enumerate()
            .map(|(k, &count)| (10u64.pow(k as u32), 10u64.pow(k as u32 + 1), count))
            .collect()
    }

    pub fn total(&self) -> u64 {
        self.bins.iter().sum()
    }
}

pub fn size_histogram(state: &ClusterState) -> SizeHistogram {
    let mut bins: Vec<u64> = Vec::new();
    for (_, size) in state.clusters() {
        if size < 2 {
            continue;
        }
        let k = size.ilog10() as usize;
        if bins.len() <= k {
            bins.resize(k + 1, 0);
        }
        bins[k] += 1;
    }
    SizeHistogram { bins }
}

/// Super-cluster statistics: clusters with `min_size <= size < max_size`,
/// their address shares (of all addresses and of addresses in clusters with
/// at least two members) and the shares of all transaction outputs/inputs
/// they are involved in. An output counts toward a cluster when any of its
/// addresses lies in the cluster; an input via its spent output's addresses.
/// Clusters at or above `max_size` are excluded and reported separately.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperclusterStats {
    pub min_size: u64,
    pub max_size: u64,
    pub count: u64,
    pub supercluster_addresses: u64,
    pub total_addresses: u64,
    pub addresses_in_ge2: u64,
    pub address_share_all: f64,
    pub address_share_ge2: f64,
    pub outputs_attributed: u64,
    pub total_outputs: u64,
    pub output_share: f64,
    pub inputs_attributed: u64,
    pub total_inputs: u64,
    pub input_share: f64,
    /// `(representative, size)` of clusters excluded for being too large.
    pub excluded: Vec<(AddressId, u64)>,
}

pub const SUPERCLUSTER_MIN_SIZE: u64 = 1000;
pub const SUPERCLUSTER_MAX_SIZE: u64 = 10_000_000;

pub fn supercluster_stats(
    state: &ClusterState,
    index: &OutpointIndex,
    stats: &EngineStats,
    min_size: u64,
    max_size: u64,
) -> SuperclusterStats {
    let mut count = 0u64;
    let mut supercluster_addresses = 0u64;
    let mut addresses_in_ge2 = 0u64;
    let mut excluded = Vec::new();
    let mut super_reps: HashSet<AddressId> = HashSet::new();
    for (rep, size) in state.clusters() {
        if size >= 2 {
            addresses_in_ge2 += size;
        }
        if size >= max_size {
            excluded.push((rep, size));
        } else if size >= min_size {
            count += 1;
            supercluster_addresses += size;
            super_reps.insert(rep);
        }
    }

    let mut outputs_attributed = 0u64;
    let mut inputs_attributed = 0u64;
    for (_, entry) in index.iter() {
        let touches_super = entry
            .addresses
            .iter()
            .any(|&a| super_reps.contains(&state.find(a).expect("indexed address")));
        if touches_super {
            outputs_attributed += 1;
            if entry.is_spent() {
                inputs_attributed += 1;
            }
        }
    }

    let share = |part: u64, whole: u64| {
        if whole == 0 {
            0.0
        } else {
            part as f64 / whole as f64
        }
    };
    let total_addresses = state.len() as u64;
    SuperclusterStats {
        min_size,
        max_size,
        count,
        supercluster_addresses,
        total_addresses,
        addresses_in_ge2,
        address_share_all: share(supercluster_addresses, total_addresses),
        address_share_ge2: share(supercluster_addresses, addresses_in_ge2),
        outputs_attributed,
        total_outputs: stats.outputs_created,
        output_share: share(outputs_attributed, stats.outputs_created),
        inputs_attributed,
        total_inputs: stats.inputs_resolved,
        input_share: share(inputs_attributed, stats.inputs_resolved),
        excluded,
    }
}

/// Quantiles of the merge-increase distribution for one block of
/// `window_size` transactions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantileWindow {
    pub window_index: u64,
    /// Number of pooled increases in the window; zero means no merges and all
    /// quantile values absent.
    pub n: u64,
    /// One value per requested `q`, in `q_list` order.
    pub values: Vec<Option<u64>>,
}

pub const DEFAULT_QUANTILE_WINDOW: u64 = 250_000;
pub const DEFAULT_Q_LIST: [u64; 4] = [100, 1000, 10_000, 100_000];

/// Nearest-rank `(q-1)`-th `q`-quantile: `rank = ceil(((q-1)/q) * n)` on the
/// ascending sort, 1-based.
fn nearest_rank(sorted: &[u64], q: u64) -> u64 {
    let n = sorted.len() as u128;
    let rank = ((u128::from(q) - 1) * n).div_ceil(u128::from(q));
    sorted[(rank as usize).max(1) - 1]
}

/// Pool the increases of every merge event per window of `window_size`
/// transactions and report nearest-rank quantiles for each `q` in `q_list`.
/// Windows covered by the stream but containing no merges emit absent values.
pub fn merge_increase_quantiles(
    events: &[MergeEvent],
    total_transactions: u64,
    window_size: u64,
    q_list: &[u64],
) -> Result<Vec<QuantileWindow>, AnalyticsError> {
    assert!(window_size >= 1, "window size must be at least 1");
    for &q in q_list {
        if q < 2 {
            return Err(AnalyticsError::InvalidQ(q));
        }
    }
    let window_count = total_transactions.div_ceil(window_size);
    let mut pools: Vec<Vec<u64>> = vec![Vec::new(); window_count as usize];
    for event in events {
        let w = (event.tx_ordinal / window_size) as usize;
        pools[w].extend_from_slice(&event.increases);
    }
    Ok(pools
        .into_iter()
        .enumerate()
        .map(|(window_index, mut pool)| {
            pool.sort_unstable();
            let values = q_list
                .iter()
                .map(|&q| {
                    if pool.is_empty() {
                        None
                    } else {
                        Some(nearest_rank(&pool, q))
                    }
                })
                .collect();
            QuantileWindow {
                window_index: window_index as u64,
                n: pool.len() as u64,
                values,
            }
        })
        .collect())
}

/// Ordinal or timestamp interval, half-open.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventRange {
    All,
    Ordinals { start: u64, end: u64 },
    Timestamps { start: u64, end: u64 },
}

impl EventRange {
    fn contains(&self, ordinal: u64, timestamp: u64) -> bool {
        match *self {
            EventRange::All => true,
            EventRange::Ordinals { start, end } => ordinal >= start && ordinal < end,
            EventRange::Timestamps { start, end } => timestamp >= start && timestamp < end,
        }
    }
}

/// A transaction flagged for an unusually large cluster-size increase.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlaggedTx {
    pub ordinal: u64,
    pub txid: TxId,
    pub max_increase: u64,
    /// Cluster whose outputs the transaction spent, as of the merge.
    pub cluster_rep: AddressId,
    pub resulting_size: u64,
}

/// Rank the merging transactions inside `range` by their largest single
/// increase and return the top `ceil(fraction * transactions_in_range)`,
/// ties broken by smaller ordinal.
pub fn flag_anomalous_transactions(
    log: &EngineLog,
    fraction: f64,
    range: EventRange,
) -> Result<Vec<FlaggedTx>, AnalyticsError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(AnalyticsError::InvalidFraction(fraction));
    }
    let in_range = log
        .tx_meta()
        .iter()
        .enumerate()
        .filter(|(ordinal, meta)| range.contains(*ordinal as u64, meta.timestamp))
        .count() as u64;
    if in_range == 0 {
        return Err(AnalyticsError::EmptyRange);
    }
    let take = (fraction * in_range as f64).ceil() as usize;

    let mut candidates: Vec<FlaggedTx> = log
        .merge_events()
        .iter()
        .filter(|ev| {
            let meta = &log.tx_meta()[ev.tx_ordinal as usize];
            range.contains(ev.tx_ordinal, meta.timestamp)
        })
        .map(|ev| FlaggedTx {
            ordinal: ev.tx_ordinal,
            txid: ev.txid,
            max_increase: ev.max_increase(),
            cluster_rep: ev.resulting_rep,
            resulting_size: ev.resulting_size,
        })
        .collect();
    candidates.sort_by(|a, b| {
        b.max_increase
            .cmp(&a.max_increase)
            .then(a.ordinal.cmp(&b.ordinal))
    });
    candidates.truncate(take);
    Ok(candidates)
}

/// A cluster formed by at least one merge of two or more large components.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlaggedCluster {
    /// Current representative of the cluster containing the merged addresses.
    pub representative: AddressId,
    pub size: u64,
    /// Ordinals of the triggering merge events, ascending.
    pub event_ordinals: Vec<u64>,
}

/// Flag clusters that were ever produced by merging two or more components of
/// size `large_threshold` or more. With the multi-input heuristic this is
/// rare; such clusters are candidates for containing more than one entity.
pub fn flag_anomalous_clusters(
    log: &EngineLog,
    state: &ClusterState,
    large_threshold: u64,
) -> Vec<FlaggedCluster> {
    assert!(
        large_threshold >= 2,
        "threshold below 2 would flag every merge"
    );
    let mut by_cluster: BTreeMap<AddressId, Vec<u64>> = BTreeMap::new();
    for event in log.merge_events() {
        let large = event
            .component_sizes
            .iter()
            .filter(|&&s| s >= large_threshold)
            .count();
        if large >= 2 {
            let current = state
                .find(event.resulting_rep)
                .expect("event representative is a known address");
            by_cluster
                .entry(current)
                .or_default()
                .push(event.tx_ordinal);
        }
    }
    by_cluster
        .into_iter()
        .map(|(representative, event_ordinals)| FlaggedCluster {
            size: state
                .cluster_size(representative)
                .expect("current representative"),
            representative,
            event_ordinals,
        })
        .collect()
}
