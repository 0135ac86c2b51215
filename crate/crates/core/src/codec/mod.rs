//! Bit-exact parsers and encoders for the canonical transaction-stream
//! formats, plus a seeded synthetic-chain generator.
//!
//! Two formats carry identical record semantics:
//!
//! * text — one JSON object per line with a fixed key set (`txid`, `time`,
//!   `in`, `out`); canonical output is compact, keys in that order, hex in
//!   lower case.
//! * binary — `"ACLS"` magic, version `u16` LE, record count `u64` LE (zero
//!   when unknown), then packed records (little-endian, LEB128 counts).

mod binary;
mod synth;
mod text;

pub use binary::{encode_binary, parse_binary, BinaryReader, BinaryWriter};
pub use synth::{generate_synthetic, AnomalyParams, SynthGenerator, SynthParams, SynthStream};
pub use text::{encode_text, parse_text, TextReader, TextWriter};

use thiserror::Error;

use crate::model::{ModelError, ScriptClass, TxId};

/// Stream magic for the binary format.
pub const STREAM_MAGIC: [u8; 4] = *b"ACLS";
/// Current binary stream version.
pub const STREAM_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("line {line}: syntax error: {msg}")]
    Syntax { line: u64, msg: String },
    #[error("line {line}: invalid record: {source}")]
    Validation {
        line: u64,
        #[source]
        source: ModelError,
    },
    #[error("record {ordinal}: invalid record: {source}")]
    BinaryValidation {
        ordinal: u64,
        #[source]
        source: ModelError,
    },
    #[error("duplicate txid {txid} (record {ordinal})")]
    DuplicateTxid { ordinal: u64, txid: TxId },
    #[error("bad stream magic")]
    BadMagic,
    #[error("unsupported stream version {0}")]
    BadVersion(u16),
    #[error("stream truncated inside record {ordinal}")]
    TruncatedRecord { ordinal: u64 },
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Binary tags for [`ScriptClass`]. `Multisig` is followed by the `m`,`n`
/// byte pair.
pub(crate) const CLS_P2PK: u8 = 0;
pub(crate) const CLS_P2PKH: u8 = 1;
pub(crate) const CLS_P2SH_KNOWN: u8 = 2;
pub(crate) const CLS_P2SH_UNKNOWN: u8 = 3;
pub(crate) const CLS_MULTISIG: u8 = 4;
pub(crate) const CLS_OP_RETURN: u8 = 5;
pub(crate) const CLS_UNKNOWN: u8 = 6;

pub(crate) fn class_to_string(class: &ScriptClass) -> String {
    match *class {
        ScriptClass::P2pk => "p2pk".to_string(),
        ScriptClass::P2pkh => "p2pkh".to_string(),
        ScriptClass::P2shKnown => "p2sh_known".to_string(),
        ScriptClass::P2shUnknown => "p2sh".to_string(),
        ScriptClass::Multisig { m, n } => format!("ms({m},{n})"),
        ScriptClass::OpReturn => "op_return".to_string(),
        ScriptClass::Unknown => "unknown".to_string(),
    }
}

pub(crate) fn class_from_string(s: &str) -> Option<ScriptClass> {
    Some(match s {
        "p2pk" => ScriptClass::P2pk,
        "p2pkh" => ScriptClass::P2pkh,
        "p2sh_known" => ScriptClass::P2shKnown,
        "p2sh" => ScriptClass::P2shUnknown,
        "op_return" => ScriptClass::OpReturn,
        "unknown" => ScriptClass::Unknown,
        _ => {
            let body = s.strip_prefix("ms(")?.strip_suffix(')')?;
            let (m, n) = body.split_once(',')?;
            ScriptClass::Multisig {
                m: m.parse().ok()?,
                n: n.parse().ok()?,
            }
        }
    })
}
