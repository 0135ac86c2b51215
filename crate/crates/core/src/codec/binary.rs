//! Packed binary stream format.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "ACLS" | version u16 | record_count u64 (0 = unknown)
//! per record:
//!   txid 32B | time u32 | in_count varint
//!   per input: txid 32B | vout u32
//!   out_count varint
//!   per output: sat u64 | cls u8 (m u8, n u8 follow when cls = multisig)
//!               | addr_count varint | per addr: len varint + bytes
//! ```
//!
//! Varints are unsigned LEB128. The `time` field caps timestamps at
//! `u32::MAX`; encoding a later timestamp is an error.

use std::collections::HashSet;
use std::io::{self, ErrorKind, Read, Write};

use crate::codec::{
    CodecError, CLS_MULTISIG, CLS_OP_RETURN, CLS_P2PK, CLS_P2PKH, CLS_P2SH_KNOWN, CLS_P2SH_UNKNOWN,
    CLS_UNKNOWN, STREAM_MAGIC, STREAM_VERSION,
};
use crate::model::{self, OutPoint, ScriptClass, TxId, TxOutputDecl, TxRecord};
use crate::wire::{
    read_exact_32, read_u16, read_u32, read_u64, read_varint, write_u16, write_u32, write_u64,
    write_varint,
};

fn write_record<W: Write>(w: &mut W, tx: &TxRecord) -> io::Result<()> {
    w.write_all(&tx.txid.0)?;
    let time = u32::try_from(tx.timestamp).map_err(|_| {
        io::Error::new(
            ErrorKind::InvalidData,
            format!(
                "timestamp {} exceeds the binary format's u32 range",
                tx.timestamp
            ),
        )
    })?;
    write_u32(w, time)?;
    write_varint(w, tx.inputs.len() as u64)?;
    for input in &tx.inputs {
        w.write_all(&input.txid.0)?;
        write_u32(w, input.vout)?;
    }
    write_varint(w, tx.outputs.len() as u64)?;
    for out in &tx.outputs {
        write_u64(w, out.value)?;
        match out.script_class {
            ScriptClass::P2pk => w.write_all(&[CLS_P2PK])?,
            ScriptClass::P2pkh => w.write_all(&[CLS_P2PKH])?,
            ScriptClass::P2shKnown => w.write_all(&[CLS_P2SH_KNOWN])?,
            ScriptClass::P2shUnknown => w.write_all(&[CLS_P2SH_UNKNOWN])?,
            ScriptClass::Multisig { m, n } => w.write_all(&[CLS_MULTISIG, m, n])?,
            ScriptClass::OpReturn => w.write_all(&[CLS_OP_RETURN])?,
            ScriptClass::Unknown => w.write_all(&[CLS_UNKNOWN])?,
        }
        write_varint(w, out.addresses.len() as u64)?;
        for addr in &out.addresses {
            write_varint(w, addr.len() as u64)?;
            w.write_all(addr.as_bytes())?;
        }
    }
    Ok(())
}

/// Incremental binary encoder. `record_count` goes into the header; pass
/// `None` when the count is not known up front (written as zero).
pub struct BinaryWriter<W: Write> {
    writer: W,
}

impl<W: Write> BinaryWriter<W> {
    pub fn new(mut writer: W, record_count: Option<u64>) -> io::Result<Self> {
        writer.write_all(&STREAM_MAGIC)?;
        write_u16(&mut writer, STREAM_VERSION)?;
        write_u64(&mut writer, record_count.unwrap_or(0))?;
        Ok(BinaryWriter { writer })
    }

    pub fn write_record(&mut self, tx: &TxRecord) -> io::Result<()> {
        write_record(&mut self.writer, tx)
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.writer.flush()?;
        Ok(self.writer)
    }
}

/// Streaming reader over the binary format. The header is checked eagerly in
/// [`BinaryReader::new`].
pub struct BinaryReader<R: Read> {
    reader: R,
    declared: u64,
    ordinal: u64,
    seen: HashSet<TxId>,
    failed: bool,
}

impl<R: Read> BinaryReader<R> {
    pub fn new(mut reader: R) -> Result<Self, CodecError> {
        let mut magic = [0u8; 4];
        reader
            .read_exact(&mut magic)
            .map_err(|_| CodecError::BadMagic)?;
        if magic != STREAM_MAGIC {
            return Err(CodecError::BadMagic);
        }
        let version = read_u16(&mut reader).map_err(|_| CodecError::BadVersion(0))?;
        if version != STREAM_VERSION {
            return Err(CodecError::BadVersion(version));
        }
        let declared =
            read_u64(&mut reader).map_err(|_| CodecError::TruncatedRecord { ordinal: 0 })?;
        Ok(BinaryReader {
            reader,
            declared,
            ordinal: 0,
            seen: HashSet::new(),
            failed: false,
        })
    }

    /// Record count declared in the header; zero means unknown.
    pub fn declared_count(&self) -> u64 {
        self.declared
    }

    fn truncated(&self) -> CodecError {
        CodecError::TruncatedRecord {
            ordinal: self.ordinal,
        }
    }

    fn read_record(&mut self) -> Result<Option<TxRecord>, CodecError> {
        if self.declared > 0 && self.ordinal == self.declared {
            return Ok(None);
        }
        // Distinguish clean EOF from truncation by probing the first byte.
        let mut first = [0u8; 1];
        match self.reader.read(&mut first)? {
            0 => {
                return if self.declared > 0 {
                    Err(self.truncated())
                } else {
                    Ok(None)
                }
            }
            1 => {}
            _ => unreachable!(),
        }
        let mut txid = [0u8; 32];
        txid[0] = first[0];
        self.reader
            .read_exact(&mut txid[1..])
            .map_err(|_| self.truncated())?;

        let time = read_u32(&mut self.reader).map_err(|_| self.truncated())?;
        let in_count = read_varint(&mut self.reader).map_err(|_| self.truncated())?;
        let mut inputs = Vec::with_capacity(in_count.min(1024) as usize);
        for _ in 0..in_count {
            let id = read_exact_32(&mut self.reader).map_err(|_| self.truncated())?;
            let vout = read_u32(&mut self.reader).map_err(|_| self.truncated())?;
            inputs.push(OutPoint {
                txid: TxId(id),
                vout,
            });
        }
        let out_count = read_varint(&mut self.reader).map_err(|_| self.truncated())?;
        let mut outputs = Vec::with_capacity(out_count.min(1024) as usize);
        for _ in 0..out_count {
            let value = read_u64(&mut self.reader).map_err(|_| self.truncated())?;
            let mut tag = [0u8; 1];
            self.reader
                .read_exact(&mut tag)
                .map_err(|_| self.truncated())?;
            let script_class = match tag[0] {
                CLS_P2PK => ScriptClass::P2pk,
                CLS_P2PKH => ScriptClass::P2pkh,
                CLS_P2SH_KNOWN => ScriptClass::P2shKnown,
                CLS_P2SH_UNKNOWN => ScriptClass::P2shUnknown,
                CLS_MULTISIG => {
                    let mut mn = [0u8; 2];
                    self.reader
                        .read_exact(&mut mn)
                        .map_err(|_| self.truncated())?;
                    ScriptClass::Multisig { m: mn[0], n: mn[1] }
                }
                CLS_OP_RETURN => ScriptClass::OpReturn,
                CLS_UNKNOWN => ScriptClass::Unknown,
                other => {
                    return Err(CodecError::Syntax {
                        line: self.ordinal,
                        msg: format!("unknown script class tag {other}"),
                    })
                }
            };
            let addr_count = read_varint(&mut self.reader).map_err(|_| self.truncated())?;
            let mut addresses = Vec::with_capacity(addr_count.min(1024) as usize);
            for _ in 0..addr_count {
                let len = read_varint(&mut self.reader).map_err(|_| self.truncated())?;
                let mut buf = vec![0u8; len as usize];
                self.reader
                    .read_exact(&mut buf)
                    .map_err(|_| self.truncated())?;
                let addr = String::from_utf8(buf).map_err(|_| CodecError::Syntax {
                    line: self.ordinal,
                    msg: "address is not valid UTF-8".to_string(),
                })?;
                addresses.push(addr);
            }
            outputs.push(TxOutputDecl {
                value,
                script_class,
                addresses,
            });
        }

        let ordinal = self.ordinal;
        let record = model::validate(TxRecord {
            txid: TxId(txid),
            timestamp: u64::from(time),
            ordinal,
            inputs,
            outputs,
        })
        .map_err(|source| CodecError::BinaryValidation { ordinal, source })?;
        if !self.seen.insert(record.txid) {
            return Err(CodecError::DuplicateTxid {
                ordinal,
                txid: record.txid,
            });
        }
        self.ordinal += 1;
        Ok(Some(record))
    }
}

impl<R: Read> Iterator for BinaryReader<R> {
    type Item = Result<TxRecord, CodecError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        match self.read_record() {
            Ok(Some(tx)) => Some(Ok(tx)),
            Ok(None) => None,
            Err(e) => {
                self.failed = true;
                Some(Err(e))
            }
        }
    }
}

/// Parse a whole binary stream into memory.
pub fn parse_binary<R: Read>(reader: R) -> Result<Vec<TxRecord>, CodecError> {
    BinaryReader::new(reader)?.collect()
}

/// Canonical binary serialization with the record count in the header.
pub fn encode_binary(records: &[TxRecord]) -> Vec<u8> {
    let mut w =
        BinaryWriter::new(Vec::new(), Some(records.len() as u64)).expect("vec write cannot fail");
    for tx in records {
        w.write_record(tx).expect("vec write cannot fail");
    }
    w.finish().expect("vec flush cannot fail")
}
