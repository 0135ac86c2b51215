//! Core domain types shared by every other module. No I/O and no clustering
//! logic lives here; everything is immutable once validated and safe to share
//! across threads.

use std::fmt;

use thiserror::Error;

/// Dense index assigned to an address at first observation. Assignment is a
/// bijection onto `[0, num_addresses)` in first-observation order; the opaque
/// external form is kept in the engine's address table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AddressId(pub u32);

impl AddressId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for AddressId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// 32-byte transaction id. Rendered as 64 lower-case hex digits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TxId(pub [u8; 32]);

impl TxId {
    pub const ZERO: TxId = TxId([0u8; 32]);

    pub fn from_hex(s: &str) -> Option<TxId> {
        if s.len() != 64 || !s.is_ascii() {
            return None;
        }
        let mut out = [0u8; 32];
        let bytes = s.as_bytes();
        for (i, chunk) in bytes.chunks_exact(2).enumerate() {
            let hi = (chunk[0] as char).to_digit(16)?;
            let lo = (chunk[1] as char).to_digit(16)?;
            out[i] = ((hi << 4) | lo) as u8;
        }
        Some(TxId(out))
    }
}

impl fmt::Display for TxId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for byte in self.0 {
            write!(f, "{byte:02x}")?;
        }
        Ok(())
    }
}

/// Reference to a spendable output: `(txid, vout)`.
///
/// The coinbase sentinel (`txid` of all zeros, `vout` `0xffffffff`) appears
/// only as an input reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OutPoint {
    pub txid: TxId,
    pub vout: u32,
}

impl OutPoint {
    pub const COINBASE: OutPoint = OutPoint {
        txid: TxId::ZERO,
        vout: u32::MAX,
    };

    #[inline]
    pub fn is_coinbase(&self) -> bool {
        *self == Self::COINBASE
    }
}

impl fmt::Display for OutPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.txid, self.vout)
    }
}

/// Output script classification carried by the ingest formats. Script bytes
/// themselves are out of scope; the class fixes how many addresses an output
/// may introduce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScriptClass {
    P2pk,
    P2pkh,
    /// Pay-to-script-hash whose redemption script is known to the ingest side:
    /// the record carries the script-hash address first, then any resolved
    /// inner addresses.
    P2shKnown,
    /// Pay-to-script-hash with an unknown redemption script.
    P2shUnknown,
    Multisig {
        m: u8,
        n: u8,
    },
    OpReturn,
    Unknown,
}

impl ScriptClass {
    /// True when `count` addresses are an admissible list for this class.
    pub fn arity_ok(&self, count: usize) -> bool {
        match *self {
            ScriptClass::OpReturn => count == 0,
            ScriptClass::P2pk | ScriptClass::P2pkh | ScriptClass::P2shUnknown => count == 1,
            // Script-hash address plus zero or more resolved inner addresses.
            ScriptClass::P2shKnown => count >= 1,
            ScriptClass::Multisig { n, .. } => count == n as usize,
            ScriptClass::Unknown => count <= 1,
        }
    }
}

/// One declared transaction output: value, script class and the addresses the
/// output is assigned to. The first listed address is the output's primary
/// address for value accounting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxOutputDecl {
    pub value: u64,
    pub script_class: ScriptClass,
    pub addresses: Vec<String>,
}

impl TxOutputDecl {
    #[inline]
    pub fn primary_address(&self) -> Option<&str> {
        self.addresses.first().map(String::as_str)
    }
}

/// One transaction in stream order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxRecord {
    pub txid: TxId,
    pub timestamp: u64,
    /// Position in the stream, assigned at ingest (0-based).
    pub ordinal: u64,
    pub inputs: Vec<OutPoint>,
    pub outputs: Vec<TxOutputDecl>,
}

impl TxRecord {
    #[inline]
    pub fn is_coinbase(&self) -> bool {
        self.inputs.len() == 1 && self.inputs[0].is_coinbase()
    }
}

/// Instrumentation for one merging transaction: the sizes of the distinct
/// clusters it united and the derived increases multiset.
///
/// `increases` is `component_sizes` minus one maximal element; when several
/// components tie for the maximum, the one whose representative has the
/// smallest dense index is the one dropped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeEvent {
    pub tx_ordinal: u64,
    pub txid: TxId,
    /// Sizes of the united clusters, ascending. Length is always >= 2.
    pub component_sizes: Vec<u64>,
    /// Ascending; always one element shorter than `component_sizes`.
    pub increases: Vec<u64>,
    /// Representative (minimum dense index) of the resulting cluster at the
    /// time of the merge.
    pub resulting_rep: AddressId,
    /// Size of the resulting cluster; equals the sum of `component_sizes`.
    pub resulting_size: u64,
}

impl MergeEvent {
    pub fn max_increase(&self) -> u64 {
        self.increases.last().copied().unwrap_or(0)
    }

    /// Number of united components that already had two or more addresses.
    pub fn large_component_count(&self) -> usize {
        self.component_sizes.iter().filter(|&&s| s >= 2).count()
    }
}

/// Satoshi balance of one address: current holdings and the all-time maximum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BalanceRecord {
    pub current: u64,
    pub alltime_max: u64,
}

impl BalanceRecord {
    pub fn credit(&mut self, value: u64) {
        self.current += value;
        if self.current > self.alltime_max {
            self.alltime_max = self.current;
        }
    }

    pub fn debit(&mut self, value: u64) {
        self.current = self
            .current
            .checked_sub(value)
            .expect("balance debit exceeds credited value");
    }
}

/// Externally supplied real-world label for an address.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagEntry {
    pub address: String,
    pub label: String,
    pub category: TagCategory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TagCategory {
    DarknetMarket,
    Gambling,
    Exchange,
    MiningPool,
    PaymentProcessor,
    Other,
}

impl TagCategory {
    pub fn parse(s: &str) -> Option<TagCategory> {
        Some(match s {
            "darknet-market" => TagCategory::DarknetMarket,
            "gambling" => TagCategory::Gambling,
            "exchange" => TagCategory::Exchange,
            "mining-pool" => TagCategory::MiningPool,
            "payment-processor" => TagCategory::PaymentProcessor,
            "other" => TagCategory::Other,
            _ => return None,
        })
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            TagCategory::DarknetMarket => "darknet-market",
            TagCategory::Gambling => "gambling",
            TagCategory::Exchange => "exchange",
            TagCategory::MiningPool => "mining-pool",
            TagCategory::PaymentProcessor => "payment-processor",
            TagCategory::Other => "other",
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("output {vout}: {class:?} cannot carry {count} addresses")]
    ScriptArityViolation {
        vout: u32,
        class: ScriptClass,
        count: usize,
    },
    #[error("invalid coinbase/input shape: {0}")]
    CoinbaseShapeViolation(String),
    #[error("transaction has no outputs")]
    EmptyOutputs,
}

/// Check every `TxRecord` and `TxOutputDecl` invariant and hand the record
/// back unchanged.
pub fn validate(tx: TxRecord) -> Result<TxRecord, ModelError> {
    if tx.outputs.is_empty() {
        return Err(ModelError::EmptyOutputs);
    }
    let sentinel_count = tx.inputs.iter().filter(|i| i.is_coinbase()).count();
    if sentinel_count > 0 {
        if tx.inputs.len() != 1 {
            return Err(ModelError::CoinbaseShapeViolation(format!(
                "coinbase sentinel mixed with {} other input(s)",
                tx.inputs.len() - 1
            )));
        }
    } else if tx.inputs.is_empty() {
        return Err(ModelError::CoinbaseShapeViolation(
            "non-coinbase transaction has no inputs".to_string(),
        ));
    }
    for (vout, out) in tx.outputs.iter().enumerate() {
        if let ScriptClass::Multisig { m, n } = out.script_class {
            if m == 0 || m > n {
                return Err(ModelError::ScriptArityViolation {
                    vout: vout as u32,
                    class: out.script_class,
                    count: out.addresses.len(),
                });
            }
        }
        if !out.script_class.arity_ok(out.addresses.len()) {
            return Err(ModelError::ScriptArityViolation {
                vout: vout as u32,
                class: out.script_class,
                count: out.addresses.len(),
            });
        }
    }
    Ok(tx)
}
