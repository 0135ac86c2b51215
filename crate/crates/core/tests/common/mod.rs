// Each integration test binary compiles this module separately and uses a
// different slice of it.
#![allow(dead_code)]

//! Independent oracles and stream builders for the integration tests.
//!
//! Nothing here touches the engine's union-find, balance, or quantile code
//! paths: components come from breadth-first search over an explicitly built
//! co-spend graph, balances from a direct replay, quantiles from a counting
//! scan.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use acls_core::model::{OutPoint, ScriptClass, TxId, TxOutputDecl, TxRecord};

/// Ground truth computed by replaying the raw records.
pub struct Oracle {
    /// Dense id per external form, assigned at first observation in outputs.
    pub dense: HashMap<String, u32>,
    /// Component representative (minimum dense id) per dense id.
    pub rep_of: Vec<u32>,
    /// Component size per representative.
    pub size_of: HashMap<u32, u64>,
    /// Replay balances per dense id: (current, alltime_max).
    pub balances: Vec<(u64, u64)>,
}

/// Brute-force connected components of the co-spend graph plus a balance
/// replay. Inputs must resolve (strict-mode streams).
pub fn brute_force(records: &[TxRecord]) -> Oracle {
    let mut dense: HashMap<String, u32> = HashMap::new();
    let mut adjacency: Vec<Vec<u32>> = Vec::new();
    let mut balances: Vec<(u64, u64)> = Vec::new();
    // outpoint -> (addresses, value), consumed on spend
    let mut live: HashMap<OutPoint, (Vec<u32>, u64)> = HashMap::new();

    for tx in records {
        if !tx.is_coinbase() {
            let mut spent_addrs: Vec<u32> = Vec::new();
            for input in &tx.inputs {
                let (addrs, value) = live.remove(input).expect("oracle: input resolves");
                if let Some(&primary) = addrs.first() {
                    let bal = &mut balances[primary as usize];
                    bal.0 -= value;
                }
                spent_addrs.extend(addrs);
            }
            spent_addrs.sort_unstable();
            spent_addrs.dedup();
            // A star around the first address connects the whole set.
            if let Some((&first, rest)) = spent_addrs.split_first() {
                for &other in rest {
                    adjacency[first as usize].push(other);
                    adjacency[other as usize].push(first);
                }
            }
        }
        for (vout, out) in tx.outputs.iter().enumerate() {
            let mut ids = Vec::with_capacity(out.addresses.len());
            for external in &out.addresses {
                let next = dense.len() as u32;
                let id = *dense.entry(external.clone()).or_insert(next);
                if id == next {
                    adjacency.push(Vec::new());
                    balances.push((0, 0));
                }
                ids.push(id);
            }
            if let Some(&primary) = ids.first() {
                let bal = &mut balances[primary as usize];
                bal.0 += out.value;
                bal.1 = bal.1.max(bal.0);
                live.insert(
                    OutPoint {
                        txid: tx.txid,
                        vout: vout as u32,
                    },
                    (ids, out.value),
                );
            }
        }
    }

    // BFS components.
    let n = adjacency.len();
    let mut rep_of = vec![u32::MAX; n];
    let mut size_of = HashMap::new();
    for start in 0..n as u32 {
        if rep_of[start as usize] != u32::MAX {
            continue;
        }
        let mut members = vec![start];
        let mut queue = vec![start];
        rep_of[start as usize] = start; // provisional
        while let Some(v) = queue.pop() {
            for &w in &adjacency[v as usize] {
                if rep_of[w as usize] == u32::MAX {
                    rep_of[w as usize] = start;
                    members.push(w);
                    queue.push(w);
                }
            }
        }
        // Representative is the component minimum; `start` ascends, so it
        // already is the minimum.
        size_of.insert(start, members.len() as u64);
    }

    Oracle {
        dense,
        rep_of,
        size_of,
        balances,
    }
}

/// Independent nearest-rank quantile: the smallest value whose cumulative
/// count reaches `ceil((q-1) * n / q)`.
pub fn quantile_oracle(pool: &[u64], q: u64) -> Option<u64> {
    if pool.is_empty() {
        return None;
    }
    let mut sorted = pool.to_vec();
    sorted.sort_unstable();
    let n = sorted.len() as u128;
    let target = (u128::from(q - 1) * n).div_ceil(u128::from(q)).max(1);
    let mut seen: u128 = 0;
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == v {
            j += 1;
        }
        seen += (j - i) as u128;
        if seen >= target {
            return Some(v);
        }
        i = j;
    }
    Some(*sorted.last().unwrap())
}

/// Adversarial but valid stream builder: heavy address reuse (including the
/// same address several times in one transaction), multisig with duplicate
/// keys, OP_RETURN outputs that burn value, bare UNKNOWN outputs, and spends
/// of arbitrary live outpoints.
pub fn fuzz_stream(seed: u64, n: usize) -> Vec<TxRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_f0cc_ac1d_beef);
    let mut records = Vec::with_capacity(n);
    let mut live: Vec<(OutPoint, u64)> = Vec::new(); // spendable, with value
    let mut seen_addrs: Vec<String> = Vec::new();
    let mut fresh_counter = 0u64;

    for ordinal in 0..n as u64 {
        let txid = fuzz_txid(seed, ordinal);
        let coinbase = live.is_empty() || rng.gen_bool(0.12);
        let (inputs, mut budget) = if coinbase {
            (vec![OutPoint::COINBASE], 1_000_000u64)
        } else {
            let k = rng.gen_range(1..=live.len().min(6));
            let mut ins = Vec::with_capacity(k);
            let mut total = 0;
            for _ in 0..k {
                let at = rng.gen_range(0..live.len());
                let (op, value) = live.swap_remove(at);
                ins.push(op);
                total += value;
            }
            (ins, total)
        };

        let n_out = rng.gen_range(1..=4usize);
        let mut outputs = Vec::with_capacity(n_out);
        for slot in 0..n_out {
            let value = if slot + 1 == n_out {
                budget
            } else {
                let v = rng.gen_range(0..=budget);
                budget -= v;
                v
            };
            let mut pick_addr = |rng: &mut ChaCha8Rng, seen: &mut Vec<String>| {
                if !seen.is_empty() && rng.gen_bool(0.6) {
                    seen[rng.gen_range(0..seen.len())].clone()
                } else {
                    fresh_counter += 1;
                    let a = format!("fz{fresh_counter}");
                    seen.push(a.clone());
                    a
                }
            };
            let (class, addresses) = match rng.gen_range(0..10) {
                0 => (ScriptClass::OpReturn, vec![]),
                1 => {
                    let n_keys = rng.gen_range(2..=3u8);
                    let m = rng.gen_range(1..=n_keys);
                    // Duplicate keys are deliberately possible here.
                    let addrs = (0..n_keys)
                        .map(|_| pick_addr(&mut rng, &mut seen_addrs))
                        .collect();
                    (ScriptClass::Multisig { m, n: n_keys }, addrs)
                }
                2 => (ScriptClass::Unknown, vec![]),
                3 => (
                    ScriptClass::P2shKnown,
                    (0..rng.gen_range(1..=3))
                        .map(|_| pick_addr(&mut rng, &mut seen_addrs))
                        .collect(),
                ),
                4 => (
                    ScriptClass::P2shUnknown,
                    vec![pick_addr(&mut rng, &mut seen_addrs)],
                ),
                5 => (
                    ScriptClass::P2pk,
                    vec![pick_addr(&mut rng, &mut seen_addrs)],
                ),
                _ => (
                    ScriptClass::P2pkh,
                    vec![pick_addr(&mut rng, &mut seen_addrs)],
                ),
            };
            if !addresses.is_empty() {
                live.push((
                    OutPoint {
                        txid,
                        vout: slot as u32,
                    },
                    value,
                ));
            }
            outputs.push(TxOutputDecl {
                value,
                script_class: class,
                addresses,
            });
        }
        records.push(
            acls_core::model::validate(TxRecord {
                txid,
                timestamp: 1_300_000_000 + ordinal * 13,
                ordinal,
                inputs,
                outputs,
            })
            .expect("fuzz stream must be valid"),
        );
    }
    records
}

fn fuzz_txid(seed: u64, ordinal: u64) -> TxId {
    // Embedding the ordinal makes ids unique by construction; the marker
    // byte keeps them disjoint from generator txids.
    let mut bytes = [0u8; 32];
    bytes[0..8].copy_from_slice(&ordinal.to_le_bytes());
    bytes[8..16].copy_from_slice(&seed.to_le_bytes());
    bytes[16] = 0xfd;
    TxId(bytes)
}
