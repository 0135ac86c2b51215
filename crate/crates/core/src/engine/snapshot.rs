//! Engine persistence.
//!
//! Snapshot layout, little-endian throughout:
//!
//! ```text
//! "ACSN" | version u16
//! then five sections, each u64 byte-length followed by the payload:
//!   meta      mode u8 | processed u64 | outputs_created u64
//!             | inputs_resolved u64 | inputs_skipped u64 | coinbase_count u64
//!   addresses count u64 | per address: len varint + bytes (dense order)
//!   clusters  n u64 | parent u32*n | size u32*n | min_label u32*n
//!             | clusters_ge2 u64 | balances: (current u64, max u64)*n
//!   index     count u64 | per entry: txid 32B | vout u32 | value u64
//!             | cls u8 (m u8, n u8 when multisig) | addr_count varint
//!             | dense u32 per addr | creating_ordinal u64
//!             | spent_by u64 (u64::MAX = unspent)
//!   log       tx count u64 | per tx: txid 32B | time u64 | new u32
//!             | addressable u32 | outs u32 | ins u32 | resolved u32
//!             | out_value u64 | flags u8 (1 coinbase, 2 merge, 4 nontrivial)
//!             | event count u64 | per event: ordinal u64 | txid 32B
//!             | rep u32 | size u64 | sizes: varint count + u64 each
//!             | increases: varint count + u64 each
//!             | first-reach count u64 | per: rep u32 | ordinal u64 | time u64
//! ```
//!
//! Entries are written in insertion order, so a snapshot is a pure function
//! of the processing history. Restoring and processing a suffix yields the
//! same state as processing the whole stream in one run.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::codec::{
    CLS_MULTISIG, CLS_OP_RETURN, CLS_P2PK, CLS_P2PKH, CLS_P2SH_KNOWN, CLS_P2SH_UNKNOWN, CLS_UNKNOWN,
};
use crate::engine::{
    ClusterEngine, ClusterState, EngineError, EngineLog, EngineStats, FirstReach, OutpointIndex,
    OutputEntry, ResolutionMode, TxMeta,
};
use crate::model::{AddressId, BalanceRecord, MergeEvent, OutPoint, ScriptClass, TxId};
use crate::wire::{
    read_exact_32, read_u16, read_u32, read_u64, read_varint, write_u16, write_u32, write_u64,
    write_varint,
};

pub const SNAPSHOT_MAGIC: [u8; 4] = *b"ACSN";
pub const SNAPSHOT_VERSION: u16 = 1;

const FLAG_COINBASE: u8 = 1;
const FLAG_MERGE: u8 = 2;
const FLAG_NONTRIVIAL: u8 = 4;

fn corrupt(msg: &str) -> EngineError {
    EngineError::CorruptSnapshot(msg.to_string())
}

fn write_section<W: Write>(w: &mut W, payload: &[u8]) -> Result<(), EngineError> {
    write_u64(w, payload.len() as u64)?;
    w.write_all(payload)?;
    Ok(())
}

fn read_section<R: Read>(r: &mut R, what: &str) -> Result<Vec<u8>, EngineError> {
    let len = read_u64(r).map_err(|_| corrupt(&format!("missing {what} section")))?;
    let mut buf = vec![0u8; usize::try_from(len).map_err(|_| corrupt("section too large"))?];
    r.read_exact(&mut buf)
        .map_err(|_| corrupt(&format!("truncated {what} section")))?;
    Ok(buf)
}

fn write_class<W: Write>(w: &mut W, class: ScriptClass) -> Result<(), EngineError> {
    match class {
        ScriptClass::P2pk => w.write_all(&[CLS_P2PK])?,
        ScriptClass::P2pkh => w.write_all(&[CLS_P2PKH])?,
        ScriptClass::P2shKnown => w.write_all(&[CLS_P2SH_KNOWN])?,
        ScriptClass::P2shUnknown => w.write_all(&[CLS_P2SH_UNKNOWN])?,
        ScriptClass::Multisig { m, n } => w.write_all(&[CLS_MULTISIG, m, n])?,
        ScriptClass::OpReturn => w.write_all(&[CLS_OP_RETURN])?,
        ScriptClass::Unknown => w.write_all(&[CLS_UNKNOWN])?,
    }
    Ok(())
}

fn read_class<R: Read>(r: &mut R) -> Result<ScriptClass, EngineError> {
    let mut tag = [0u8; 1];
    r.read_exact(&mut tag)
        .map_err(|_| corrupt("script class"))?;
    Ok(match tag[0] {
        CLS_P2PK => ScriptClass::P2pk,
        CLS_P2PKH => ScriptClass::P2pkh,
        CLS_P2SH_KNOWN => ScriptClass::P2shKnown,
        CLS_P2SH_UNKNOWN => ScriptClass::P2shUnknown,
        CLS_MULTISIG => {
            let mut mn = [0u8; 2];
            r.read_exact(&mut mn)
                .map_err(|_| corrupt("multisig pair"))?;
            ScriptClass::Multisig { m: mn[0], n: mn[1] }
        }
        CLS_OP_RETURN => ScriptClass::OpReturn,
        CLS_UNKNOWN => ScriptClass::Unknown,
        other => return Err(corrupt(&format!("unknown script class tag {other}"))),
    })
}

impl ClusterEngine {
    /// Serialize the full engine state. The engine must be quiescent.
    pub fn snapshot_to<W: Write>(&self, w: &mut W) -> Result<(), EngineError> {
        w.write_all(&SNAPSHOT_MAGIC)?;
        write_u16(w, SNAPSHOT_VERSION)?;

        let mut meta = Vec::new();
        meta.push(match self.mode {
            ResolutionMode::Strict => 0u8,
            ResolutionMode::Lenient => 1u8,
        });
        write_u64(&mut meta, self.processed)?;
        write_u64(&mut meta, self.stats.outputs_created)?;
        write_u64(&mut meta, self.stats.inputs_resolved)?;
        write_u64(&mut meta, self.stats.inputs_skipped)?;
        write_u64(&mut meta, self.stats.coinbase_count)?;
        write_section(w, &meta)?;

        let mut addrs = Vec::new();
        write_u64(&mut addrs, self.addresses.len() as u64)?;
        for (external, _) in self.addresses.iter() {
            write_varint(&mut addrs, external.len() as u64)?;
            addrs.extend_from_slice(external.as_bytes());
        }
        write_section(w, &addrs)?;

        let mut clusters = Vec::new();
        let (parent, size, min_label, ge2) = self.state.parts();
        write_u64(&mut clusters, parent.len() as u64)?;
        for &p in parent {
            write_u32(&mut clusters, p)?;
        }
        for &s in size {
            write_u32(&mut clusters, s)?;
        }
        for &m in min_label {
            write_u32(&mut clusters, m)?;
        }
        write_u64(&mut clusters, ge2)?;
        for b in self.balances() {
            write_u64(&mut clusters, b.current)?;
            write_u64(&mut clusters, b.alltime_max)?;
        }
        write_section(w, &clusters)?;

        let mut index = Vec::new();
        write_u64(&mut index, self.index.len() as u64)?;
        for (op, entry) in self.index.iter() {
            index.extend_from_slice(&op.txid.0);
            write_u32(&mut index, op.vout)?;
            write_u64(&mut index, entry.value)?;
            write_class(&mut index, entry.script_class)?;
            write_varint(&mut index, entry.addresses.len() as u64)?;
            for a in &entry.addresses {
                write_u32(&mut index, a.0)?;
            }
            write_u64(&mut index, entry.creating_ordinal)?;
            write_u64(&mut index, entry.spent_by.unwrap_or(u64::MAX))?;
        }
        write_section(w, &index)?;

        let mut log = Vec::new();
        write_u64(&mut log, self.log.tx_count())?;
        for meta in self.log.tx_meta() {
            log.extend_from_slice(&meta.txid.0);
            write_u64(&mut log, meta.timestamp)?;
            write_u32(&mut log, meta.new_addresses)?;
            write_u32(&mut log, meta.addressable_outputs)?;
            write_u32(&mut log, meta.output_count)?;
            write_u32(&mut log, meta.input_count)?;
            write_u32(&mut log, meta.resolved_input_count)?;
            write_u64(&mut log, meta.output_value_sat)?;
            let mut flags = 0u8;
            if meta.is_coinbase {
                flags |= FLAG_COINBASE;
            }
            if meta.caused_merge {
                flags |= FLAG_MERGE;
            }
            if meta.is_nontrivial {
                flags |= FLAG_NONTRIVIAL;
            }
            log.push(flags);
        }
        write_u64(&mut log, self.log.merge_events().len() as u64)?;
        for ev in self.log.merge_events() {
            write_u64(&mut log, ev.tx_ordinal)?;
            log.extend_from_slice(&ev.txid.0);
            write_u32(&mut log, ev.resulting_rep.0)?;
            write_u64(&mut log, ev.resulting_size)?;
            write_varint(&mut log, ev.component_sizes.len() as u64)?;
            for &s in &ev.component_sizes {
                write_u64(&mut log, s)?;
            }
            write_varint(&mut log, ev.increases.len() as u64)?;
            for &s in &ev.increases {
                write_u64(&mut log, s)?;
            }
        }
        write_u64(&mut log, self.log.first_reach().len() as u64)?;
        for fr in self.log.first_reach() {
            write_u32(&mut log, fr.rep.0)?;
            write_u64(&mut log, fr.tx_ordinal)?;
            write_u64(&mut log, fr.timestamp)?;
        }
        write_section(w, &log)?;
        w.flush()?;
        Ok(())
    }

    /// Rebuild an engine from a snapshot stream.
    pub fn restore_from<R: Read>(r: &mut R) -> Result<ClusterEngine, EngineError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)
            .map_err(|_| corrupt("missing magic"))?;
        if magic != SNAPSHOT_MAGIC {
            return Err(corrupt("bad magic"));
        }
        let version = read_u16(r).map_err(|_| corrupt("missing version"))?;
        if version != SNAPSHOT_VERSION {
            return Err(EngineError::VersionMismatch {
                found: version,
                expected: SNAPSHOT_VERSION,
            });
        }

        let meta = read_section(r, "meta")?;
        let m = &mut meta.as_slice();
        let mut mode_byte = [0u8; 1];
        m.read_exact(&mut mode_byte).map_err(|_| corrupt("mode"))?;
        let mode = match mode_byte[0] {
            0 => ResolutionMode::Strict,
            1 => ResolutionMode::Lenient,
            other => return Err(corrupt(&format!("unknown resolution mode {other}"))),
        };
        let processed = read_u64(m).map_err(|_| corrupt("meta"))?;
        let stats = EngineStats {
            outputs_created: read_u64(m).map_err(|_| corrupt("meta"))?,
            inputs_resolved: read_u64(m).map_err(|_| corrupt("meta"))?,
            inputs_skipped: read_u64(m).map_err(|_| corrupt("meta"))?,
            coinbase_count: read_u64(m).map_err(|_| corrupt("meta"))?,
        };
        if !m.is_empty() {
            return Err(corrupt("trailing bytes in meta section"));
        }

        let addrs_buf = read_section(r, "address table")?;
        let a = &mut addrs_buf.as_slice();
        let addr_count = read_u64(a).map_err(|_| corrupt("address count"))?;
        let mut addresses = AddressTableBuilder::with_capacity(addr_count as usize);
        for _ in 0..addr_count {
            let len = read_varint(a).map_err(|_| corrupt("address length"))?;
            let mut buf = vec![0u8; len as usize];
            a.read_exact(&mut buf)
                .map_err(|_| corrupt("address bytes"))?;
            let s = String::from_utf8(buf).map_err(|_| corrupt("address is not UTF-8"))?;
            addresses.push(s)?;
        }
        if !a.is_empty() {
            return Err(corrupt("trailing bytes in address section"));
        }
        let addresses = addresses.finish();

        let clusters_buf = read_section(r, "cluster state")?;
        let c = &mut clusters_buf.as_slice();
        let n = read_u64(c).map_err(|_| corrupt("cluster count"))? as usize;
        if n != addr_count as usize {
            return Err(corrupt("cluster arrays disagree with address table"));
        }
        let mut parent = Vec::with_capacity(n);
        for _ in 0..n {
            parent.push(read_u32(c).map_err(|_| corrupt("parent array"))?);
        }
        let mut size = Vec::with_capacity(n);
        for _ in 0..n {
            size.push(read_u32(c).map_err(|_| corrupt("size array"))?);
        }
        let mut min_label = Vec::with_capacity(n);
        for _ in 0..n {
            min_label.push(read_u32(c).map_err(|_| corrupt("label array"))?);
        }
        if parent.iter().any(|&p| p as usize >= n) || min_label.iter().any(|&l| l as usize >= n) {
            return Err(corrupt("cluster arrays reference out-of-range ids"));
        }
        let ge2 = read_u64(c).map_err(|_| corrupt("cluster count"))?;
        let mut balances = Vec::with_capacity(n);
        for _ in 0..n {
            let current = read_u64(c).map_err(|_| corrupt("balances"))?;
            let alltime_max = read_u64(c).map_err(|_| corrupt("balances"))?;
            if alltime_max < current {
                return Err(corrupt("balance maximum below current"));
            }
            balances.push(BalanceRecord {
                current,
                alltime_max,
            });
        }
        if !c.is_empty() {
            return Err(corrupt("trailing bytes in cluster section"));
        }
        let state = ClusterState::from_parts(parent, size, min_label, ge2);

        let index_buf = read_section(r, "outpoint index")?;
        let i = &mut index_buf.as_slice();
        let entry_count = read_u64(i).map_err(|_| corrupt("index count"))?;
        let mut index = OutpointIndex::new();
        for _ in 0..entry_count {
            let txid = TxId(read_exact_32(i).map_err(|_| corrupt("index txid"))?);
            let vout = read_u32(i).map_err(|_| corrupt("index vout"))?;
            let value = read_u64(i).map_err(|_| corrupt("index value"))?;
            let script_class = read_class(i)?;
            let na = read_varint(i).map_err(|_| corrupt("index addr count"))?;
            let mut entry_addrs = crate::engine::EntryAddresses::new();
            for _ in 0..na {
                let id = read_u32(i).map_err(|_| corrupt("index addr"))?;
                if id as usize >= n {
                    return Err(corrupt("index references unknown address"));
                }
                entry_addrs.push(AddressId(id));
            }
            if entry_addrs.is_empty() {
                return Err(corrupt("index entry without addresses"));
            }
            let creating_ordinal = read_u64(i).map_err(|_| corrupt("index ordinal"))?;
            let spent_raw = read_u64(i).map_err(|_| corrupt("index spent flag"))?;
            index.insert(
                OutPoint { txid, vout },
                OutputEntry {
                    addresses: entry_addrs,
                    value,
                    script_class,
                    creating_ordinal,
                    spent_by: if spent_raw == u64::MAX {
                        None
                    } else {
                        Some(spent_raw)
                    },
                },
            );
        }
        if !i.is_empty() {
            return Err(corrupt("trailing bytes in index section"));
        }

        let log_buf = read_section(r, "log")?;
        let l = &mut log_buf.as_slice();
        let tx_count = read_u64(l).map_err(|_| corrupt("log tx count"))?;
        if tx_count != processed {
            return Err(corrupt("log length disagrees with processed count"));
        }
        let mut tx_meta = Vec::with_capacity(tx_count as usize);
        for _ in 0..tx_count {
            let txid = TxId(read_exact_32(l).map_err(|_| corrupt("log txid"))?);
            let timestamp = read_u64(l).map_err(|_| corrupt("log time"))?;
            let new_addresses = read_u32(l).map_err(|_| corrupt("log"))?;
            let addressable_outputs = read_u32(l).map_err(|_| corrupt("log"))?;
            let output_count = read_u32(l).map_err(|_| corrupt("log"))?;
            let input_count = read_u32(l).map_err(|_| corrupt("log"))?;
            let resolved_input_count = read_u32(l).map_err(|_| corrupt("log"))?;
            let output_value_sat = read_u64(l).map_err(|_| corrupt("log"))?;
            let mut flags = [0u8; 1];
            l.read_exact(&mut flags).map_err(|_| corrupt("log flags"))?;
            tx_meta.push(TxMeta {
                txid,
                timestamp,
                new_addresses,
                addressable_outputs,
                output_count,
                input_count,
                resolved_input_count,
                output_value_sat,
                is_coinbase: flags[0] & FLAG_COINBASE != 0,
                caused_merge: flags[0] & FLAG_MERGE != 0,
                is_nontrivial: flags[0] & FLAG_NONTRIVIAL != 0,
            });
        }
        let event_count = read_u64(l).map_err(|_| corrupt("event count"))?;
        let mut merge_events = Vec::with_capacity(event_count as usize);
        for _ in 0..event_count {
            let tx_ordinal = read_u64(l).map_err(|_| corrupt("event"))?;
            let txid = TxId(read_exact_32(l).map_err(|_| corrupt("event txid"))?);
            let resulting_rep = AddressId(read_u32(l).map_err(|_| corrupt("event"))?);
            let resulting_size = read_u64(l).map_err(|_| corrupt("event"))?;
            let nc = read_varint(l).map_err(|_| corrupt("event sizes"))?;
            let mut component_sizes = Vec::with_capacity(nc as usize);
            for _ in 0..nc {
                component_sizes.push(read_u64(l).map_err(|_| corrupt("event sizes"))?);
            }
            let ni = read_varint(l).map_err(|_| corrupt("event increases"))?;
            let mut increases = Vec::with_capacity(ni as usize);
            for _ in 0..ni {
                increases.push(read_u64(l).map_err(|_| corrupt("event increases"))?);
            }
            if component_sizes.len() < 2 || increases.len() + 1 != component_sizes.len() {
                return Err(corrupt("inconsistent merge event"));
            }
            merge_events.push(MergeEvent {
                tx_ordinal,
                txid,
                component_sizes,
                increases,
                resulting_rep,
                resulting_size,
            });
        }
        let fr_count = read_u64(l).map_err(|_| corrupt("first-reach count"))?;
        let mut first_reach = Vec::with_capacity(fr_count as usize);
        for _ in 0..fr_count {
            first_reach.push(FirstReach {
                rep: AddressId(read_u32(l).map_err(|_| corrupt("first-reach"))?),
                tx_ordinal: read_u64(l).map_err(|_| corrupt("first-reach"))?,
                timestamp: read_u64(l).map_err(|_| corrupt("first-reach"))?,
            });
        }
        if !l.is_empty() {
            return Err(corrupt("trailing bytes in log section"));
        }
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(corrupt("trailing bytes after last section"));
        }

        let mut engine = ClusterEngine::new(mode);
        engine.addresses = addresses;
        engine.state = state;
        engine.index = index;
        engine.balances = balances;
        engine.log = EngineLog::from_parts(tx_meta, merge_events, first_reach);
        engine.stats = stats;
        engine.processed = processed;
        Ok(engine)
    }

    pub fn snapshot_file<P: AsRef<Path>>(&self, path: P) -> Result<(), EngineError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.snapshot_to(&mut w)
    }

    pub fn restore_file<P: AsRef<Path>>(path: P) -> Result<ClusterEngine, EngineError> {
        let mut r = BufReader::new(File::open(path)?);
        Self::restore_from(&mut r)
    }
}

use crate::engine::AddressTable;

/// Rebuilds the dense-order table, rejecting duplicates.
struct AddressTableBuilder {
    table: AddressTable,
}

impl AddressTableBuilder {
    fn with_capacity(_n: usize) -> Self {
        AddressTableBuilder {
            table: AddressTable::default(),
        }
    }

    fn push(&mut self, external: String) -> Result<(), EngineError> {
        let (_, fresh) = self.table.lookup_or_insert(&external);
        if !fresh {
            return Err(corrupt("duplicate address in table"));
        }
        Ok(())
    }

    fn finish(self) -> AddressTable {
        self.table
    }
}
