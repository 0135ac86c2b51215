//! Append-only instrumentation written while the engine processes a stream.
//! Everything the analytics and graph modules compute is derived from this
//! log plus the cluster state and outpoint index.

use crate::model::{AddressId, MergeEvent, TxId};

/// Per-transaction facts, one entry per processed transaction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxMeta {
    pub txid: TxId,
    pub timestamp: u64,
    pub new_addresses: u32,
    pub addressable_outputs: u32,
    pub output_count: u32,
    /// Declared non-sentinel inputs.
    pub input_count: u32,
    /// Inputs that resolved to an index entry (differs from `input_count`
    /// only in lenient mode).
    pub resolved_input_count: u32,
    pub output_value_sat: u64,
    pub is_coinbase: bool,
    pub caused_merge: bool,
    pub is_nontrivial: bool,
}

/// Moment a cluster first reached two addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FirstReach {
    /// Representative of the newly formed cluster at formation time.
    pub rep: AddressId,
    pub tx_ordinal: u64,
    pub timestamp: u64,
}

#[derive(Debug, Clone, Default)]
pub struct EngineLog {
    tx_meta: Vec<TxMeta>,
    merge_events: Vec<MergeEvent>,
    first_reach: Vec<FirstReach>,
}

impl EngineLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub(crate) fn from_parts(
        tx_meta: Vec<TxMeta>,
        merge_events: Vec<MergeEvent>,
        first_reach: Vec<FirstReach>,
    ) -> Self {
        EngineLog {
            tx_meta,
            merge_events,
            first_reach,
        }
    }

    pub(crate) fn push_tx(&mut self, meta: TxMeta) {
        self.tx_meta.push(meta);
    }

    pub(crate) fn push_merge(&mut self, event: MergeEvent, timestamp: u64) {
        // A merge of singletons only is the birth of a >= 2 cluster.
        if event.large_component_count() == 0 {
            self.first_reach.push(FirstReach {
                rep: event.resulting_rep,
                tx_ordinal: event.tx_ordinal,
                timestamp,
            });
        }
        self.merge_events.push(event);
    }

    /// Number of processed transactions.
    pub fn tx_count(&self) -> u64 {
        self.tx_meta.len() as u64
    }

    pub fn tx_meta(&self) -> &[TxMeta] {
        &self.tx_meta
    }

    pub fn merge_events(&self) -> &[MergeEvent] {
        &self.merge_events
    }

    pub fn first_reach(&self) -> &[FirstReach] {
        &self.first_reach
    }
}
