//! Line-delimited text format: one JSON object per record.
//!
//! Canonical form (what [`encode_text`] emits) is compact JSON with the key
//! order `txid`, `time`, `in`, `out` and lower-case hex ids, one record per
//! line, `\n` terminated. The parser accepts any JSON whitespace and key
//! order, so `encode ∘ parse` is the identity on canonically formatted input
//! only.

use std::collections::HashSet;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::codec::{class_from_string, class_to_string, CodecError};
use crate::model::{self, OutPoint, TxId, TxOutputDecl, TxRecord};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TxWire {
    txid: String,
    time: u64,
    #[serde(rename = "in")]
    inputs: Vec<InWire>,
    #[serde(rename = "out")]
    outputs: Vec<OutWire>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InWire {
    txid: String,
    vout: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutWire {
    sat: u64,
    cls: String,
    addr: Vec<String>,
}

fn to_wire(tx: &TxRecord) -> TxWire {
    TxWire {
        txid: tx.txid.to_string(),
        time: tx.timestamp,
        inputs: tx
            .inputs
            .iter()
            .map(|i| InWire {
                txid: i.txid.to_string(),
                vout: i.vout,
            })
            .collect(),
        outputs: tx
            .outputs
            .iter()
            .map(|o| OutWire {
                sat: o.value,
                cls: class_to_string(&o.script_class),
                addr: o.addresses.clone(),
            })
            .collect(),
    }
}

fn from_wire(wire: TxWire, line: u64, ordinal: u64) -> Result<TxRecord, CodecError> {
    let syntax = |msg: String| CodecError::Syntax { line, msg };
    let txid =
        TxId::from_hex(&wire.txid).ok_or_else(|| syntax(format!("bad txid {:?}", wire.txid)))?;
    let mut inputs = Vec::with_capacity(wire.inputs.len());
    for i in &wire.inputs {
        let in_txid = TxId::from_hex(&i.txid)
            .ok_or_else(|| syntax(format!("bad input txid {:?}", i.txid)))?;
        inputs.push(OutPoint {
            txid: in_txid,
            vout: i.vout,
        });
    }
    let mut outputs = Vec::with_capacity(wire.outputs.len());
    for o in wire.outputs {
        let script_class = class_from_string(&o.cls)
            .ok_or_else(|| syntax(format!("bad script class {:?}", o.cls)))?;
        outputs.push(TxOutputDecl {
            value: o.sat,
            script_class,
            addresses: o.addr,
        });
    }
    model::validate(TxRecord {
        txid,
        timestamp: wire.time,
        ordinal,
        inputs,
        outputs,
    })
    .map_err(|source| CodecError::Validation { line, source })
}

/// Streaming reader over the text format. Yields validated records in file
/// order with ordinals assigned from zero.
pub struct TextReader<R: BufRead> {
    reader: R,
    line: u64,
    ordinal: u64,
    seen: HashSet<TxId>,
    failed: bool,
}

impl<R: BufRead> TextReader<R> {
    pub fn new(reader: R) -> Self {
        TextReader {
            reader,
            line: 0,
            ordinal: 0,
            seen: HashSet::new(),
            failed: false,
        }
    }

    fn next_record(&mut self) -> Result<Option<TxRecord>, CodecError> {
        let mut buf = String::new();
        let n = self.reader.read_line(&mut buf)?;
        if n == 0 {
            return Ok(None);
        }
        self.line += 1;
        let trimmed = buf.trim_end_matches(['\n', '\r']);
        let wire: TxWire = serde_json::from_str(trimmed).map_err(|e| CodecError::Syntax {
            line: self.line,
            msg: e.to_string(),
        })?;
        let record = from_wire(wire, self.line, self.ordinal)?;
        if !self.seen.insert(record.txid) {
            return Err(CodecError::DuplicateTxid {
                ordinal: self.ordinal,
                txid: record.txid,
            });
        }
        self.ordinal += 1;
        Ok(Some(record))
    }
}

impl<R: BufRead> Iterator for TextReader<R> {
    type Item = Result<TxRecord, CodecError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        match self.next_record() {
            Ok(Some(tx)) => Some(Ok(tx)),
            Ok(None) => None,
            Err(e) => {
                self.failed = true;
                Some(Err(e))
            }
        }
    }
}

/// Incremental canonical text encoder.
pub struct TextWriter<W: Write> {
    writer: W,
}

impl<W: Write> TextWriter<W> {
    pub fn new(writer: W) -> Self {
        TextWriter { writer }
    }

    pub fn write_record(&mut self, tx: &TxRecord) -> io::Result<()> {
        let wire = to_wire(tx);
        serde_json::to_writer(&mut self.writer, &wire)?;
        self.writer.write_all(b"\n")
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.writer.flush()?;
        Ok(self.writer)
    }
}

/// Parse a whole text stream into memory.
pub fn parse_text<R: BufRead>(reader: R) -> Result<Vec<TxRecord>, CodecError> {
    TextReader::new(reader).collect()
}

/// Canonical text serialization of a record sequence.
pub fn encode_text<'a>(records: impl IntoIterator<Item = &'a TxRecord>) -> Vec<u8> {
    let mut w = TextWriter::new(Vec::new());
    for tx in records {
        w.write_record(tx).expect("vec write cannot fail");
    }
    w.finish().expect("vec flush cannot fail")
}
