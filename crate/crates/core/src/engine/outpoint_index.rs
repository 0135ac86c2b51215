//! Map from outpoints to the output data needed to resolve spends.
//!
//! Entries are never removed; a spend records the spending ordinal. Backed by
//! an insertion-ordered map so every scan over the index is deterministic for
//! a given processing history. Outputs with no addresses (OP_RETURN and bare
//! UNKNOWN) are unspendable and are not indexed.
//!
//! The engine's hot path resolves each input to a slot once and works with
//! slots from then on, so each input costs one hash lookup.

use indexmap::IndexMap;
use smallvec::SmallVec;

use crate::hash::FastBuild;
use crate::model::{AddressId, OutPoint, ScriptClass};

/// Address list of one output; almost always one or two entries, kept inline.
pub type EntryAddresses = SmallVec<[AddressId; 2]>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputEntry {
    pub addresses: EntryAddresses,
    pub value: u64,
    pub script_class: ScriptClass,
    pub creating_ordinal: u64,
    /// Ordinal of the spending transaction, when spent.
    pub spent_by: Option<u64>,
}

impl OutputEntry {
    #[inline]
    pub fn primary(&self) -> AddressId {
        self.addresses[0]
    }

    #[inline]
    pub fn is_spent(&self) -> bool {
        self.spent_by.is_some()
    }
}

#[derive(Debug, Clone, Default)]
pub struct OutpointIndex {
    entries: IndexMap<OutPoint, OutputEntry, FastBuild>,
}

impl OutpointIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, outpoint: &OutPoint) -> Option<&OutputEntry> {
        self.entries.get(outpoint)
    }

    #[inline]
    pub(crate) fn slot_of(&self, outpoint: &OutPoint) -> Option<usize> {
        self.entries.get_index_of(outpoint)
    }

    #[inline]
    pub(crate) fn entry_at(&self, slot: usize) -> &OutputEntry {
        self.entries
            .get_index(slot)
            .expect("slot came from slot_of")
            .1
    }

    /// Mark a slot spent, returning the primary address and value for the
    /// balance debit.
    pub(crate) fn mark_spent_at(&mut self, slot: usize, ordinal: u64) -> (AddressId, u64) {
        let (_, entry) = self
            .entries
            .get_index_mut(slot)
            .expect("slot came from slot_of");
        debug_assert!(entry.spent_by.is_none());
        entry.spent_by = Some(ordinal);
        (entry.primary(), entry.value)
    }

    pub(crate) fn insert(&mut self, outpoint: OutPoint, entry: OutputEntry) {
        debug_assert!(
            !entry.addresses.is_empty(),
            "addressless outputs are not indexed"
        );
        let prior = self.entries.insert(outpoint, entry);
        debug_assert!(prior.is_none(), "txids are unique within a stream");
    }

    /// Insertion-ordered iteration; deterministic for a given history.
    pub fn iter(&self) -> impl Iterator<Item = (&OutPoint, &OutputEntry)> {
        self.entries.iter()
    }
}
