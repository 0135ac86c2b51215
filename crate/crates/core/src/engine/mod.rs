//! The clustering engine: outpoint resolution, incremental union-find under
//! the multi-input heuristic, merge-event logging, balance tracking and
//! snapshot/resume.
//!
//! Single-writer: one caller feeds transactions in stream order. Reads are
//! fine between transactions; the engine can be handed between threads at
//! quiescent points.

mod cluster_state;
mod log;
mod outpoint_index;
mod snapshot;

pub use cluster_state::ClusterState;
pub use log::{EngineLog, FirstReach, TxMeta};
pub use outpoint_index::{EntryAddresses, OutpointIndex, OutputEntry};
pub use snapshot::{SNAPSHOT_MAGIC, SNAPSHOT_VERSION};

use std::collections::HashSet;

use indexmap::IndexMap;
use thiserror::Error;

use crate::analytics::addressable_output_count;
use crate::hash::FastBuild;
use crate::model::{AddressId, BalanceRecord, MergeEvent, OutPoint, TxRecord};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("input references unknown outpoint {0}")]
    UnknownOutpoint(OutPoint),
    #[error("outpoint {0} is already spent")]
    DoubleSpend(OutPoint),
    #[error("unknown address {0:?}")]
    UnknownAddress(String),
    #[error("address {0} is not a cluster representative")]
    NotARepresentative(AddressId),
    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),
    #[error("snapshot version {found} not supported (expected {expected})")]
    VersionMismatch { found: u16, expected: u16 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How unresolvable inputs are treated.
///
/// Strict mode is for complete streams: an input that does not resolve to a
/// live index entry aborts the transaction. Lenient mode is for truncated
/// extracts: unknown outpoints are skipped for clustering while outputs are
/// still registered. A resolvable but already-spent outpoint is an error in
/// both modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResolutionMode {
    #[default]
    Strict,
    Lenient,
}

/// Running totals over the processed stream.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EngineStats {
    /// All declared outputs, addressless ones included.
    pub outputs_created: u64,
    /// Non-sentinel inputs that resolved to an index entry.
    pub inputs_resolved: u64,
    /// Non-sentinel inputs skipped in lenient mode.
    pub inputs_skipped: u64,
    pub coinbase_count: u64,
}

/// Bijection between external address forms and dense indices, in
/// first-observation order.
#[derive(Debug, Clone, Default)]
pub struct AddressTable {
    map: IndexMap<String, u32, FastBuild>,
}

impl AddressTable {
    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get(&self, external: &str) -> Option<AddressId> {
        self.map.get(external).copied().map(AddressId)
    }

    /// External form for a dense index.
    pub fn external(&self, id: AddressId) -> Option<&str> {
        self.map.get_index(id.index()).map(|(k, _)| k.as_str())
    }

    fn lookup_or_insert(&mut self, external: &str) -> (AddressId, bool) {
        if let Some(&id) = self.map.get(external) {
            return (AddressId(id), false);
        }
        let id = self.map.len() as u32;
        self.map.insert(external.to_string(), id);
        (AddressId(id), true)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, AddressId)> {
        self.map.iter().map(|(k, &v)| (k.as_str(), AddressId(v)))
    }
}

pub struct ClusterEngine {
    mode: ResolutionMode,
    addresses: AddressTable,
    state: ClusterState,
    index: OutpointIndex,
    balances: Vec<BalanceRecord>,
    log: EngineLog,
    stats: EngineStats,
    processed: u64,
    // Per-transaction scratch, reused to keep the hot path allocation-free.
    scratch_slots: Vec<usize>,
    scratch_addrs: Vec<u32>,
    scratch_roots: Vec<u32>,
}

impl ClusterEngine {
    pub fn new(mode: ResolutionMode) -> Self {
        ClusterEngine {
            mode,
            addresses: AddressTable::default(),
            state: ClusterState::new(),
            index: OutpointIndex::new(),
            balances: Vec::new(),
            log: EngineLog::new(),
            stats: EngineStats::default(),
            processed: 0,
            scratch_slots: Vec::new(),
            scratch_addrs: Vec::new(),
            scratch_roots: Vec::new(),
        }
    }

    pub fn mode(&self) -> ResolutionMode {
        self.mode
    }

    pub fn processed(&self) -> u64 {
        self.processed
    }

    pub fn num_addresses(&self) -> u64 {
        self.addresses.len() as u64
    }

    pub fn state(&self) -> &ClusterState {
        &self.state
    }

    pub fn index(&self) -> &OutpointIndex {
        &self.index
    }

    pub fn log(&self) -> &EngineLog {
        &self.log
    }

    pub fn stats(&self) -> &EngineStats {
        &self.stats
    }

    pub fn addresses(&self) -> &AddressTable {
        &self.addresses
    }

    /// Process one validated transaction in stream order.
    ///
    /// Unites all distinct addresses across the resolved inputs, logs and
    /// returns a [`MergeEvent`] when two or more clusters were united, marks
    /// inputs spent, debits/credits balances and registers outputs. On error
    /// the engine state is exactly as before the call.
    ///
    /// The record's `ordinal` field is ignored; the engine numbers
    /// transactions by its own running count so that resumed suffix streams
    /// need no renumbering.
    pub fn process_transaction(
        &mut self,
        tx: &TxRecord,
    ) -> Result<Option<MergeEvent>, EngineError> {
        let ordinal = self.processed;
        let coinbase = tx.is_coinbase();
        self.scratch_slots.clear();
        self.scratch_addrs.clear();
        self.scratch_roots.clear();

        // Resolution phase: every fallible check happens before any mutation.
        let mut skipped = 0u64;
        if !coinbase {
            // Duplicate inputs scan linearly; txs with very many inputs get
            // a set instead.
            let big = tx.inputs.len() > 64;
            let mut seen: HashSet<usize, FastBuild> = HashSet::default();
            if big {
                seen.reserve(tx.inputs.len());
            }
            for op in &tx.inputs {
                debug_assert!(!op.is_coinbase(), "record was validated");
                match self.index.slot_of(op) {
                    None => match self.mode {
                        ResolutionMode::Strict => return Err(EngineError::UnknownOutpoint(*op)),
                        ResolutionMode::Lenient => skipped += 1,
                    },
                    Some(slot) => {
                        let duplicate = if big {
                            !seen.insert(slot)
                        } else {
                            self.scratch_slots.contains(&slot)
                        };
                        if duplicate || self.index.entry_at(slot).is_spent() {
                            return Err(EngineError::DoubleSpend(*op));
                        }
                        self.scratch_slots.push(slot);
                    }
                }
            }
        }

        // Distinct addresses across resolved inputs.
        for i in 0..self.scratch_slots.len() {
            let entry = self.index.entry_at(self.scratch_slots[i]);
            self.scratch_addrs
                .extend(entry.addresses.iter().map(|a| a.0));
        }
        self.scratch_addrs.sort_unstable();
        self.scratch_addrs.dedup();
        let nontrivial = self.scratch_addrs.len() >= 2;

        for i in 0..self.scratch_addrs.len() {
            let root = self.state.find_root_mut(self.scratch_addrs[i]);
            self.scratch_roots.push(root);
        }
        self.scratch_roots.sort_unstable();
        self.scratch_roots.dedup();

        let event = if self.scratch_roots.len() >= 2 {
            Some(self.merge(ordinal, tx.txid))
        } else {
            None
        };

        // Spend inputs: debit first, outputs are credited afterwards.
        for i in 0..self.scratch_slots.len() {
            let (primary, value) = self.index.mark_spent_at(self.scratch_slots[i], ordinal);
            self.balances[primary.index()].debit(value);
        }

        // Register outputs, assigning dense ids in first-observation order.
        let mut new_addresses = 0u32;
        let mut output_value_sat = 0u64;
        for (vout, out) in tx.outputs.iter().enumerate() {
            output_value_sat += out.value;
            let mut dense = outpoint_index::EntryAddresses::new();
            for external in &out.addresses {
                let (id, fresh) = self.addresses.lookup_or_insert(external);
                if fresh {
                    let added = self.state.add_singleton();
                    debug_assert_eq!(added, id.0);
                    self.balances.push(BalanceRecord::default());
                    new_addresses += 1;
                }
                dense.push(id);
            }
            if let Some(&primary) = dense.first() {
                self.balances[primary.index()].credit(out.value);
                self.index.insert(
                    OutPoint {
                        txid: tx.txid,
                        vout: vout as u32,
                    },
                    OutputEntry {
                        addresses: dense,
                        value: out.value,
                        script_class: out.script_class,
                        creating_ordinal: ordinal,
                        spent_by: None,
                    },
                );
            }
        }

        self.stats.outputs_created += tx.outputs.len() as u64;
        self.stats.inputs_resolved += self.scratch_slots.len() as u64;
        self.stats.inputs_skipped += skipped;
        if coinbase {
            self.stats.coinbase_count += 1;
        }
        self.log.push_tx(TxMeta {
            txid: tx.txid,
            timestamp: tx.timestamp,
            new_addresses,
            addressable_outputs: addressable_output_count(tx) as u32,
            output_count: tx.outputs.len() as u32,
            input_count: if coinbase { 0 } else { tx.inputs.len() as u32 },
            resolved_input_count: self.scratch_slots.len() as u32,
            output_value_sat,
            is_coinbase: coinbase,
            caused_merge: event.is_some(),
            is_nontrivial: nontrivial,
        });
        if let Some(ev) = &event {
            self.log.push_merge(ev.clone(), tx.timestamp);
        }
        self.processed += 1;
        Ok(event)
    }

    /// Unite the clusters in `scratch_roots` and build the event.
    fn merge(&mut self, ordinal: u64, txid: crate::model::TxId) -> MergeEvent {
        let comps: Vec<(u32, u64)> = self
            .scratch_roots
            .iter()
            .map(|&r| (self.state.min_label_of_root(r), self.state.size_of_root(r)))
            .collect();
        // Drop one maximal component from the increases; ties go to the one
        // with the smallest representative.
        let mut drop_at = 0usize;
        for (i, &(rep, size)) in comps.iter().enumerate() {
            let (best_rep, best_size) = comps[drop_at];
            if size > best_size || (size == best_size && rep < best_rep) {
                drop_at = i;
            }
        }
        let mut component_sizes: Vec<u64> = comps.iter().map(|&(_, s)| s).collect();
        let mut increases: Vec<u64> = comps
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != drop_at)
            .map(|(_, &(_, s))| s)
            .collect();
        component_sizes.sort_unstable();
        increases.sort_unstable();
        let resulting_rep = AddressId(comps.iter().map(|&(rep, _)| rep).min().expect("k >= 2"));
        let resulting_size = component_sizes.iter().sum();

        self.state.union_roots(&self.scratch_roots);
        debug_assert_eq!(self.state.cluster_size(resulting_rep), Some(resulting_size));

        MergeEvent {
            tx_ordinal: ordinal,
            txid,
            component_sizes,
            increases,
            resulting_rep,
            resulting_size,
        }
    }

    /// Addresses across a transaction's resolved inputs, deduplicated. In
    /// strict mode an unknown outpoint is an error; spent entries resolve
    /// (spends stay in the index), so this also works after processing.
    pub fn resolved_input_addresses(&self, tx: &TxRecord) -> Result<Vec<AddressId>, EngineError> {
        if tx.is_coinbase() {
            return Ok(Vec::new());
        }
        let mut out: Vec<AddressId> = Vec::new();
        for op in &tx.inputs {
            match self.index.get(op) {
                Some(entry) => out.extend(entry.addresses.iter().copied()),
                None => match self.mode {
                    ResolutionMode::Strict => return Err(EngineError::UnknownOutpoint(*op)),
                    ResolutionMode::Lenient => {}
                },
            }
        }
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    /// Cluster representative of an observed address (external form).
    pub fn find(&self, external: &str) -> Result<AddressId, EngineError> {
        let id = self
            .addresses
            .get(external)
            .ok_or_else(|| EngineError::UnknownAddress(external.to_string()))?;
        Ok(self.state.find(id).expect("table and forest stay in sync"))
    }

    /// Cluster representative of an observed address (dense id).
    pub fn find_id(&self, id: AddressId) -> Result<AddressId, EngineError> {
        self.state
            .find(id)
            .ok_or_else(|| EngineError::UnknownAddress(id.to_string()))
    }

    /// Component cardinality for a representative.
    pub fn cluster_size(&self, rep: AddressId) -> Result<u64, EngineError> {
        self.state
            .cluster_size(rep)
            .ok_or(EngineError::NotARepresentative(rep))
    }

    pub fn balance(&self, external: &str) -> Result<BalanceRecord, EngineError> {
        let id = self
            .addresses
            .get(external)
            .ok_or_else(|| EngineError::UnknownAddress(external.to_string()))?;
        Ok(self.balances[id.index()])
    }

    pub fn balance_id(&self, id: AddressId) -> Result<BalanceRecord, EngineError> {
        self.balances
            .get(id.index())
            .copied()
            .ok_or_else(|| EngineError::UnknownAddress(id.to_string()))
    }

    pub(crate) fn balances(&self) -> &[BalanceRecord] {
        &self.balances
    }
}

#[cfg(test)]
mod tests;
