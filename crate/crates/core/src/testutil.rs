//! Hand-built chains for unit tests.

use crate::engine::ClusterEngine;
use crate::model::{OutPoint, ScriptClass, TxId, TxOutputDecl, TxRecord};

/// Builds small valid streams by hand. Outputs are P2PKH unless stated;
/// txids are sequential byte fills.
pub struct ChainBuilder {
    next_id: u8,
    timestamp: u64,
}

impl ChainBuilder {
    pub fn new() -> Self {
        ChainBuilder {
            next_id: 1,
            timestamp: 1_300_000_000,
        }
    }

    pub fn txid(&mut self) -> TxId {
        let id = TxId([self.next_id; 32]);
        self.next_id += 1;
        id
    }

    pub fn at(&mut self, timestamp: u64) -> &mut Self {
        self.timestamp = timestamp;
        self
    }

    pub fn coinbase(&mut self, outputs: &[(&str, u64)]) -> TxRecord {
        let txid = self.txid();
        TxRecord {
            txid,
            timestamp: self.timestamp,
            ordinal: 0,
            inputs: vec![OutPoint::COINBASE],
            outputs: Self::p2pkh_outputs(outputs),
        }
    }

    pub fn spend(&mut self, inputs: &[(TxId, u32)], outputs: &[(&str, u64)]) -> TxRecord {
        let txid = self.txid();
        TxRecord {
            txid,
            timestamp: self.timestamp,
            ordinal: 0,
            inputs: inputs
                .iter()
                .map(|&(txid, vout)| OutPoint { txid, vout })
                .collect(),
            outputs: Self::p2pkh_outputs(outputs),
        }
    }

    pub fn with_outputs(&mut self, inputs: &[(TxId, u32)], outputs: Vec<TxOutputDecl>) -> TxRecord {
        let txid = self.txid();
        TxRecord {
            txid,
            timestamp: self.timestamp,
            ordinal: 0,
            inputs: if inputs.is_empty() {
                vec![OutPoint::COINBASE]
            } else {
                inputs
                    .iter()
                    .map(|&(txid, vout)| OutPoint { txid, vout })
                    .collect()
            },
            outputs,
        }
    }

    fn p2pkh_outputs(outputs: &[(&str, u64)]) -> Vec<TxOutputDecl> {
        outputs
            .iter()
            .map(|&(addr, value)| TxOutputDecl {
                value,
                script_class: ScriptClass::P2pkh,
                addresses: vec![addr.to_string()],
            })
            .collect()
    }
}

impl Default for ChainBuilder {
    fn default() -> Self {
        Self::new()
    }
}

pub fn run(engine: &mut ClusterEngine, txs: &[TxRecord]) {
    for tx in txs {
        engine
            .process_transaction(tx)
            .expect("stream is well formed");
    }
}

/// Engine preloaded with `k` clusters of the given sizes plus one spare
/// spendable output per cluster (paying the cluster's first address), so a
/// follow-up transaction can merge any subset. Returns the funding txid of
/// the spares: spare for cluster `i` is `(txid, i as u32)`.
pub fn engine_with_clusters(builder: &mut ChainBuilder, sizes: &[u64]) -> (ClusterEngine, TxId) {
    let mut engine = ClusterEngine::new(crate::engine::ResolutionMode::Strict);
    let mut spare_outputs: Vec<(String, u64)> = Vec::new();
    for (c, &size) in sizes.iter().enumerate() {
        let addrs: Vec<String> = (0..size).map(|i| format!("k{c}_{i}")).collect();
        let outs: Vec<(&str, u64)> = addrs.iter().map(|a| (a.as_str(), 10)).collect();
        let cb = builder.coinbase(&outs);
        let cb_id = cb.txid;
        run(&mut engine, &[cb]);
        if size >= 2 {
            let unite = builder.spend(
                &(0..size as u32).map(|v| (cb_id, v)).collect::<Vec<_>>(),
                &[(&format!("k{c}_0"), 10 * size)],
            );
            run(&mut engine, &[unite]);
        }
        spare_outputs.push((format!("k{c}_0"), 1));
    }
    let spares: Vec<(&str, u64)> = spare_outputs
        .iter()
        .map(|(a, v)| (a.as_str(), *v))
        .collect();
    let funding = builder.coinbase(&spares);
    let funding_id = funding.txid;
    run(&mut engine, &[funding]);
    (engine, funding_id)
}
