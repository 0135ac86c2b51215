//! Seeded synthetic-chain generator.
//!
//! Produces streams that always validate and are topologically consistent:
//! every non-coinbase input spends a previously generated, still-unspent
//! outpoint, and a coinbase every `coinbase_interval` transactions injects the
//! subsidy so value is conserved (OP_RETURN outputs carry zero value).
//!
//! Output is a pure function of the parameters: all randomness flows through
//! one ChaCha stream and geometric draws use integer Bernoulli loops, so the
//! same seed yields byte-identical encodings.
//!
//! When [`AnomalyParams`] is set the generator also grows `2 * pairs`
//! disjoint address families through repeated internal co-spends and then, at
//! evenly spaced known ordinals, emits transactions that co-spend two built
//! families — the large-large merges a private-key-import service would
//! produce. The emitted ordinals are reported as ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codec::CodecError;
use crate::model::{OutPoint, ScriptClass, TxId, TxOutputDecl, TxRecord};

/// Block subsidy injected by each synthetic coinbase, in satoshis.
pub const SUBSIDY_SAT: u64 = 50_0000_0000;

const MAX_GEOMETRIC: u64 = 64;
const MAX_OUTPUTS: u64 = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnomalyParams {
    /// Number of injected large-large merge transactions. Each one co-spends
    /// a distinct pair of address families, so `2 * pairs` families are grown.
    pub pairs: u32,
    /// Target number of addresses per family before its pair is merged.
    pub family_size: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub seed: u64,
    pub num_transactions: u64,
    /// Probability that an output reuses an existing address.
    pub p_reuse: f64,
    /// Mean of the geometric inputs-per-transaction distribution (>= 1).
    pub mean_inputs: f64,
    /// Mean of the geometric outputs-per-transaction distribution (>= 1).
    pub mean_outputs: f64,
    pub op_return_fraction: f64,
    pub multisig_fraction: f64,
    pub timestamp_start: u64,
    pub mean_gap_secs: u64,
    /// Every k-th transaction (ordinals 0, k, 2k, ...) is a coinbase.
    pub coinbase_interval: u64,
    pub anomaly: Option<AnomalyParams>,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            seed: 0,
            num_transactions: 1000,
            p_reuse: 0.3,
            mean_inputs: 2.0,
            mean_outputs: 2.0,
            op_return_fraction: 0.02,
            multisig_fraction: 0.02,
            timestamp_start: 1_293_840_000, // 2011-01-01T00:00:00Z
            mean_gap_secs: 300,
            coinbase_interval: 25,
            anomaly: None,
        }
    }
}

impl SynthParams {
    fn check(&self) -> Result<(), CodecError> {
        let bad = |msg: &str| Err(CodecError::InvalidParams(msg.to_string()));
        if !(0.0..=1.0).contains(&self.p_reuse) {
            return bad("p_reuse must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.op_return_fraction)
            || !(0.0..=1.0).contains(&self.multisig_fraction)
            || self.op_return_fraction + self.multisig_fraction > 1.0
        {
            return bad("output class fractions must lie in [0, 1] and sum to at most 1");
        }
        if self.mean_inputs < 1.0 || self.mean_outputs < 1.0 {
            return bad("mean_inputs and mean_outputs must be at least 1");
        }
        if self.coinbase_interval == 0 {
            return bad("coinbase_interval must be at least 1");
        }
        if let Some(a) = self.anomaly {
            if a.pairs == 0 || a.family_size < 4 {
                return bad("anomaly injection needs pairs >= 1 and family_size >= 4");
            }
            // One bootstrap plus one co-spend per member beyond the hub.
            let growth_txs = u64::from(a.pairs) * 2 * u64::from(a.family_size);
            // Families are grown inside [5%, 65%) of the stream and merged
            // inside [70%, 95%); both windows must fit.
            if self.num_transactions / 2 < growth_txs + u64::from(a.pairs) {
                return bad("num_transactions too small for the requested anomaly injections");
            }
        }
        Ok(())
    }
}

/// A generated stream plus the anomaly ground truth.
#[derive(Debug, Clone)]
pub struct SynthStream {
    pub records: Vec<TxRecord>,
    /// Ordinals of the injected large-large merge transactions.
    pub injected_ordinals: Vec<u64>,
}

struct PoolEntry {
    outpoint: OutPoint,
    value: u64,
}

struct Family {
    /// The family's fixed, reused address; co-spending through it chains
    /// every member into one cluster.
    hub_addr: Option<u64>,
    /// Outpoints paying the hub address.
    hub_pool: Vec<PoolEntry>,
    /// Outpoints paying fresh members not yet co-spent into the cluster.
    member_pool: Vec<PoolEntry>,
    /// Current size of the united family cluster.
    united: u32,
}

/// Streaming generator; iterate to pull records one at a time.
pub struct SynthGenerator {
    params: SynthParams,
    rng: ChaCha8Rng,
    next_ordinal: u64,
    timestamp: u64,
    addr_counter: u64,
    /// Addresses eligible for reuse sampling (family addresses excluded).
    organic_addrs: Vec<u64>,
    organic_pool: Vec<PoolEntry>,
    families: Vec<Family>,
    growth_window: (u64, u64),
    injection_ordinals: Vec<(u64, u32)>, // (ordinal, pair index), ascending
    injected: Vec<u64>,
}

impl SynthGenerator {
    pub fn new(params: SynthParams) -> Result<Self, CodecError> {
        params.check()?;
        let n = params.num_transactions;
        let mut families = Vec::new();
        let mut injection_ordinals = Vec::new();
        let mut growth_window = (0, 0);
        if let Some(a) = params.anomaly {
            families = (0..2 * a.pairs)
                .map(|_| Family {
                    hub_addr: None,
                    hub_pool: Vec::new(),
                    member_pool: Vec::new(),
                    united: 0,
                })
                .collect();
            growth_window = (n / 20, n * 13 / 20);
            let first = n * 7 / 10;
            let span = n * 19 / 20 - first;
            let mut used = first.saturating_sub(1);
            for pair in 0..a.pairs {
                let mut at = first + span * u64::from(pair) / u64::from(a.pairs);
                // Keep injection ordinals off the coinbase grid and strictly
                // increasing.
                while at.is_multiple_of(params.coinbase_interval) || at <= used {
                    at += 1;
                }
                used = at;
                injection_ordinals.push((at, pair));
            }
        }
        Ok(SynthGenerator {
            rng: ChaCha8Rng::seed_from_u64(params.seed),
            next_ordinal: 0,
            timestamp: params.timestamp_start,
            addr_counter: 0,
            organic_addrs: Vec::new(),
            organic_pool: Vec::new(),
            families,
            growth_window,
            injection_ordinals,
            injected: Vec::new(),
            params,
        })
    }

    /// Ordinals of the anomaly transactions emitted so far. Complete once the
    /// iterator is exhausted.
    pub fn injected_ordinals(&self) -> &[u64] {
        &self.injected
    }

    fn sample_geometric(&mut self, mean: f64) -> u64 {
        if mean <= 1.0 {
            return 1;
        }
        let p = 1.0 / mean;
        let mut n = 1;
        while n < MAX_GEOMETRIC && self.rng.gen::<f64>() >= p {
            n += 1;
        }
        n
    }

    fn fresh_addr(&mut self) -> u64 {
        let id = self.addr_counter;
        self.addr_counter += 1;
        id
    }

    /// Reuse an organic address with probability `p_reuse`, else mint one.
    fn pick_organic_addr(&mut self) -> u64 {
        if !self.organic_addrs.is_empty() && self.rng.gen::<f64>() < self.params.p_reuse {
            self.organic_addrs[self.rng.gen_range(0..self.organic_addrs.len())]
        } else {
            let id = self.fresh_addr();
            self.organic_addrs.push(id);
            id
        }
    }

    /// Build the output list for an organic or coinbase transaction and
    /// register spendable outputs in the organic pool.
    fn make_organic_outputs(&mut self, txid: TxId, total_value: u64) -> Vec<TxOutputDecl> {
        let n_out = self
            .sample_geometric(self.params.mean_outputs)
            .min(MAX_OUTPUTS);
        let mut classes = Vec::with_capacity(n_out as usize);
        for slot in 0..n_out {
            let roll: f64 = self.rng.gen();
            let class = if roll < self.params.op_return_fraction {
                // Slot 0 always stays addressed so the value has somewhere
                // to live.
                if slot > 0 {
                    ScriptClass::OpReturn
                } else {
                    ScriptClass::P2pkh
                }
            } else if roll < self.params.op_return_fraction + self.params.multisig_fraction {
                let n = self.rng.gen_range(2..=3u8);
                let m = self.rng.gen_range(1..=n);
                ScriptClass::Multisig { m, n }
            } else {
                ScriptClass::P2pkh
            };
            classes.push(class);
        }
        let addressed = classes
            .iter()
            .filter(|c| !matches!(c, ScriptClass::OpReturn))
            .count() as u64;
        debug_assert!(addressed >= 1, "slot 0 is always addressed");
        let mut remaining = total_value;
        let mut seen_addressed = 0u64;
        let mut outputs = Vec::with_capacity(classes.len());
        for (vout, class) in classes.into_iter().enumerate() {
            let (value, addr_ids) = match class {
                ScriptClass::OpReturn => (0, Vec::new()),
                ScriptClass::Multisig { n, .. } => {
                    let ids = (0..n).map(|_| self.pick_organic_addr()).collect();
                    (
                        self.take_value(&mut remaining, &mut seen_addressed, addressed),
                        ids,
                    )
                }
                _ => {
                    let id = self.pick_organic_addr();
                    (
                        self.take_value(&mut remaining, &mut seen_addressed, addressed),
                        vec![id],
                    )
                }
            };
            if !addr_ids.is_empty() {
                self.organic_pool.push(PoolEntry {
                    outpoint: OutPoint {
                        txid,
                        vout: vout as u32,
                    },
                    value,
                });
            }
            outputs.push(TxOutputDecl {
                value,
                script_class: class,
                addresses: addr_ids.iter().map(|&id| external_form(id)).collect(),
            });
        }
        outputs
    }

    fn take_value(&mut self, remaining: &mut u64, seen: &mut u64, addressed: u64) -> u64 {
        *seen += 1;
        let value = if *seen == addressed {
            *remaining
        } else {
            self.rng.gen_range(0..=*remaining)
        };
        *remaining -= value;
        value
    }

    fn take_pool_inputs(
        pool: &mut Vec<PoolEntry>,
        rng: &mut ChaCha8Rng,
        n: usize,
    ) -> Vec<PoolEntry> {
        let n = n.min(pool.len());
        let mut taken = Vec::with_capacity(n);
        for _ in 0..n {
            let at = rng.gen_range(0..pool.len());
            taken.push(pool.swap_remove(at));
        }
        taken
    }

    fn advance_time(&mut self) -> u64 {
        let t = self.timestamp;
        let gap = if self.params.mean_gap_secs == 0 {
            0
        } else {
            self.rng.gen_range(0..=2 * self.params.mean_gap_secs)
        };
        self.timestamp += gap;
        t
    }

    fn coinbase_tx(&mut self, ordinal: u64) -> TxRecord {
        let txid = synth_txid(self.params.seed, ordinal);
        let timestamp = self.advance_time();
        let outputs = self.make_organic_outputs(txid, SUBSIDY_SAT);
        TxRecord {
            txid,
            timestamp,
            ordinal,
            inputs: vec![OutPoint::COINBASE],
            outputs,
        }
    }

    fn organic_tx(&mut self, ordinal: u64) -> TxRecord {
        let txid = synth_txid(self.params.seed, ordinal);
        let timestamp = self.advance_time();
        let want = self.sample_geometric(self.params.mean_inputs) as usize;
        let spent = Self::take_pool_inputs(&mut self.organic_pool, &mut self.rng, want);
        let total: u64 = spent.iter().map(|e| e.value).sum();
        let inputs = spent.iter().map(|e| e.outpoint).collect();
        let outputs = self.make_organic_outputs(txid, total);
        TxRecord {
            txid,
            timestamp,
            ordinal,
            inputs,
            outputs,
        }
    }

    /// One step of family growth. The bootstrap converts one organic
    /// outpoint into a hub output plus two fresh members; each later step
    /// co-spends a hub outpoint with one member, pulling that member into
    /// the united family cluster and minting replacements.
    fn family_growth_tx(&mut self, ordinal: u64, fam: usize) -> Option<TxRecord> {
        let txid = synth_txid(self.params.seed, ordinal);
        if self.families[fam].hub_pool.is_empty() {
            // Bootstrap from organic funds; a single input keeps the family
            // disjoint from organic clusters.
            let spent = Self::take_pool_inputs(&mut self.organic_pool, &mut self.rng, 1);
            if spent.is_empty() {
                return None;
            }
            let timestamp = self.advance_time();
            let total = spent[0].value;
            let inputs = vec![spent[0].outpoint];
            let outputs = self.family_outputs(txid, fam, total);
            self.families[fam].united = 1;
            return Some(TxRecord {
                txid,
                timestamp,
                ordinal,
                inputs,
                outputs,
            });
        }
        let mut spent = Self::take_pool_inputs(&mut self.families[fam].hub_pool, &mut self.rng, 1);
        spent.extend(Self::take_pool_inputs(
            &mut self.families[fam].member_pool,
            &mut self.rng,
            1,
        ));
        debug_assert_eq!(spent.len(), 2, "member pool never runs dry");
        let timestamp = self.advance_time();
        let total: u64 = spent.iter().map(|e| e.value).sum();
        let inputs = spent.iter().map(|e| e.outpoint).collect();
        let outputs = self.family_outputs(txid, fam, total);
        // The co-spend united the hub cluster with one fresh member.
        self.families[fam].united += 1;
        Some(TxRecord {
            txid,
            timestamp,
            ordinal,
            inputs,
            outputs,
        })
    }

    /// One output back to the family's reused hub address plus two fresh
    /// members awaiting absorption.
    fn family_outputs(&mut self, txid: TxId, fam: usize, total_value: u64) -> Vec<TxOutputDecl> {
        if self.families[fam].hub_addr.is_none() {
            self.families[fam].hub_addr = Some(self.fresh_addr());
        }
        let hub_addr = self.families[fam].hub_addr.expect("just set");
        let mut remaining = total_value;
        let mut outputs = Vec::with_capacity(3);
        for vout in 0..3u32 {
            let id = if vout == 0 {
                hub_addr
            } else {
                self.fresh_addr()
            };
            let value = if vout == 2 { remaining } else { remaining / 2 };
            remaining -= value;
            let entry = PoolEntry {
                outpoint: OutPoint { txid, vout },
                value,
            };
            if vout == 0 {
                self.families[fam].hub_pool.push(entry);
            } else {
                self.families[fam].member_pool.push(entry);
            }
            outputs.push(TxOutputDecl {
                value,
                script_class: ScriptClass::P2pkh,
                addresses: vec![external_form(id)],
            });
        }
        outputs
    }

    /// The injected anomaly: one hub input from each family of the pair, so
    /// the two united clusters merge.
    fn injection_tx(&mut self, ordinal: u64, pair: u32) -> Option<TxRecord> {
        let (a, b) = (2 * pair as usize, 2 * pair as usize + 1);
        if self.families[a].hub_pool.is_empty() || self.families[b].hub_pool.is_empty() {
            return None;
        }
        let txid = synth_txid(self.params.seed, ordinal);
        let mut spent = Self::take_pool_inputs(&mut self.families[a].hub_pool, &mut self.rng, 1);
        spent.extend(Self::take_pool_inputs(
            &mut self.families[b].hub_pool,
            &mut self.rng,
            1,
        ));
        let timestamp = self.advance_time();
        let total: u64 = spent.iter().map(|e| e.value).sum();
        let inputs = spent.iter().map(|e| e.outpoint).collect();
        // Proceeds return to general circulation under fresh addresses.
        let id = self.fresh_addr();
        self.organic_addrs.push(id);
        self.organic_pool.push(PoolEntry {
            outpoint: OutPoint { txid, vout: 0 },
            value: total,
        });
        let outputs = vec![TxOutputDecl {
            value: total,
            script_class: ScriptClass::P2pkh,
            addresses: vec![external_form(id)],
        }];
        self.injected.push(ordinal);
        Some(TxRecord {
            txid,
            timestamp,
            ordinal,
            inputs,
            outputs,
        })
    }

    fn next_growth_family(&mut self) -> Option<usize> {
        let target = self.params.anomaly?.family_size;
        let start = (self.next_ordinal as usize) % self.families.len().max(1);
        (0..self.families.len())
            .map(|i| (start + i) % self.families.len())
            .find(|&f| self.families[f].united < target)
    }
}

impl Iterator for SynthGenerator {
    type Item = TxRecord;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next_ordinal >= self.params.num_transactions {
            return None;
        }
        let ordinal = self.next_ordinal;
        self.next_ordinal += 1;

        if ordinal.is_multiple_of(self.params.coinbase_interval) {
            return Some(self.coinbase_tx(ordinal));
        }
        if let Some(&(at, pair)) = self.injection_ordinals.first() {
            if at == ordinal {
                self.injection_ordinals.remove(0);
                if let Some(tx) = self.injection_tx(ordinal, pair) {
                    return Some(tx);
                }
            }
        }
        let in_growth_window = ordinal >= self.growth_window.0 && ordinal < self.growth_window.1;
        if in_growth_window {
            if let Some(fam) = self.next_growth_family() {
                if let Some(tx) = self.family_growth_tx(ordinal, fam) {
                    return Some(tx);
                }
            }
        }
        if self.organic_pool.is_empty() {
            // Nothing spendable yet; keep the stream going with a subsidy.
            return Some(self.coinbase_tx(ordinal));
        }
        Some(self.organic_tx(ordinal))
    }
}

/// Generate a full stream with anomaly ground truth.
pub fn generate_synthetic(params: &SynthParams) -> Result<SynthStream, CodecError> {
    let mut gen = SynthGenerator::new(params.clone())?;
    let mut records = Vec::with_capacity(params.num_transactions.min(1 << 20) as usize);
    for tx in &mut gen {
        records.push(tx);
    }
    Ok(SynthStream {
        records,
        injected_ordinals: gen.injected,
    })
}

const BASE58_ALPHABET: &[u8; 58] = b"123456789ABCDEFGHJKLMNPQRSTUVWXYZabcdefghijkmnopqrstuvwxyz";

/// Base58-looking external form for a synthetic address id.
fn external_form(id: u64) -> String {
    let mut digits = Vec::with_capacity(12);
    let mut v = id;
    loop {
        digits.push(BASE58_ALPHABET[(v % 58) as usize]);
        v /= 58;
        if v == 0 {
            break;
        }
    }
    digits.push(b'1');
    digits.reverse();
    String::from_utf8(digits).expect("base58 alphabet is ASCII")
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic synthetic txid. The first word is a bijection of the
/// ordinal, so ids are unique within a stream by construction.
fn synth_txid(seed: u64, ordinal: u64) -> TxId {
    let mut bytes = [0u8; 32];
    let salt = mix64(seed ^ 0x9e37_79b9_7f4a_7c15);
    bytes[0..8].copy_from_slice(&mix64(ordinal).to_le_bytes());
    bytes[8..16].copy_from_slice(&mix64(ordinal ^ salt).to_le_bytes());
    bytes[16..24].copy_from_slice(&mix64(salt.wrapping_add(ordinal)).to_le_bytes());
    bytes[24..32].copy_from_slice(&mix64(seed.wrapping_add(ordinal).rotate_left(17)).to_le_bytes());
    TxId(bytes)
}
