//! Structure and flow graphs over engine state: per-cluster bipartite
//! address–transaction graphs with balance annotations, and the inter-cluster
//! value-flow summary with tagging. Read-only over the engine; all outputs
//! are deterministically ordered.

mod export;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::BufRead;

use thiserror::Error;

use crate::engine::ClusterEngine;
use crate::model::{AddressId, BalanceRecord, TagCategory, TagEntry, TxId};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("unknown cluster {0}")]
    UnknownCluster(String),
    #[error("tag file line {line}: {msg}")]
    MalformedTagFile { line: u64, msg: String },
}

/// Address vertex of a bipartite structure graph, annotated with balances at
/// export time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AddrVertex {
    pub id: AddressId,
    pub external: String,
    pub balance: BalanceRecord,
}

/// Transaction vertex of a bipartite structure graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TxVertex {
    pub txid: TxId,
    pub ordinal: u64,
}

/// Bipartite graph of one address cluster: an edge connects a transaction to
/// an address when the transaction spends an output assigned to the address.
/// The address-vertex set is exactly the cluster's membership.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BipartiteGraph {
    pub cluster_rep: AddressId,
    /// Ascending by dense id.
    pub addresses: Vec<AddrVertex>,
    /// Ascending by ordinal.
    pub transactions: Vec<TxVertex>,
    /// `(transaction index, address index)` pairs, sorted.
    pub edges: Vec<(usize, usize)>,
}

/// Build the structure graph of the cluster containing `member` (any member
/// address normalizes to its representative).
pub fn bipartite_subgraph(
    engine: &ClusterEngine,
    member: AddressId,
) -> Result<BipartiteGraph, GraphError> {
    let rep = engine
        .find_id(member)
        .map_err(|_| GraphError::UnknownCluster(member.to_string()))?;
    let state = engine.state();

    let mut addresses = Vec::new();
    let mut addr_slot: HashMap<AddressId, usize> = HashMap::new();
    for dense in 0..engine.num_addresses() as u32 {
        let id = AddressId(dense);
        if state.find(id) == Some(rep) {
            addr_slot.insert(id, addresses.len());
            addresses.push(AddrVertex {
                id,
                external: engine
                    .addresses()
                    .external(id)
                    .expect("dense ids are contiguous")
                    .to_string(),
                balance: engine.balance_id(id).expect("dense ids are contiguous"),
            });
        }
    }

    let mut tx_ordinals: BTreeSet<u64> = BTreeSet::new();
    let mut raw_edges: BTreeSet<(u64, AddressId)> = BTreeSet::new();
    for (_, entry) in engine.index().iter() {
        let Some(spender) = entry.spent_by else {
            continue;
        };
        if state.find(entry.primary()) != Some(rep) {
            continue;
        }
        tx_ordinals.insert(spender);
        for &addr in &entry.addresses {
            // The spend united every address of the entry into this cluster.
            debug_assert_eq!(state.find(addr), Some(rep));
            raw_edges.insert((spender, addr));
        }
    }

    let tx_slot: HashMap<u64, usize> = tx_ordinals
        .iter()
        .enumerate()
        .map(|(slot, &ord)| (ord, slot))
        .collect();
    let transactions = tx_ordinals
        .iter()
        .map(|&ordinal| TxVertex {
            txid: engine.log().tx_meta()[ordinal as usize].txid,
            ordinal,
        })
        .collect();
    let edges = raw_edges
        .into_iter()
        .map(|(ord, addr)| (tx_slot[&ord], addr_slot[&addr]))
        .collect();

    Ok(BipartiteGraph {
        cluster_rep: rep,
        addresses,
        transactions,
        edges,
    })
}

/// How flow-graph vertices are chosen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClusterSelection {
    /// Largest by address count, ties to the smaller representative.
    TopBySize(usize),
    /// Largest by total satoshis ever received.
    TopByReceived(usize),
    /// Explicit members; each normalizes to its cluster representative.
    Explicit(Vec<AddressId>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowVertex {
    pub rep: AddressId,
    pub size: u64,
    pub total_received_sat: u64,
    pub label: Option<String>,
    pub category: Option<TagCategory>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlowEdge {
    /// Index into `vertices`.
    pub from: usize,
    pub to: usize,
    pub weight_sat: u64,
}

/// Where every non-coinbase output satoshi went during flow construction.
/// `exported + filtered_below_min + self_loops_excluded + to_unselected +
/// addressless + unresolved_inputs == covered_outputs` exactly.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FlowTotals {
    pub exported_sat: u64,
    pub filtered_below_min_sat: u64,
    pub self_loops_excluded_sat: u64,
    pub to_unselected_sat: u64,
    /// Outputs that carry no addresses (OP_RETURN and bare UNKNOWN).
    pub addressless_sat: u64,
    /// Outputs of transactions whose inputs were all skipped (lenient mode).
    pub unresolved_input_sat: u64,
    /// Coinbase outputs; outside the conservation equation by definition.
    pub coinbase_output_sat: u64,
    /// Total non-coinbase output value.
    pub covered_output_sat: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowGraph {
    /// Ascending by representative.
    pub vertices: Vec<FlowVertex>,
    /// Sorted by `(from, to)`.
    pub edges: Vec<FlowEdge>,
    pub totals: FlowTotals,
    pub min_flow: u64,
    pub include_self_loops: bool,
}

/// A cluster whose member addresses carry more than one distinct tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagConflict {
    pub representative: AddressId,
    pub existing_label: String,
    pub conflicting_label: String,
}

/// Build the inter-cluster flow graph. Each non-coinbase transaction's input
/// cluster contributes every output's value to the edge from it to the
/// output's cluster; an output belongs to the cluster of its first listed
/// address. Edges aggregate over all transactions and are dropped when the
/// aggregate is below `min_flow`; self-loops (change) are kept only when
/// requested.
pub fn flow_graph(
    engine: &ClusterEngine,
    selection: &ClusterSelection,
    min_flow: u64,
    include_self_loops: bool,
) -> Result<FlowGraph, GraphError> {
    let state = engine.state();
    let log = engine.log();
    let n_tx = log.tx_count() as usize;

    // One pass over the index fixes each transaction's input cluster, each
    // output's destination cluster value, and per-cluster receive totals.
    let mut input_cluster: Vec<Option<AddressId>> = vec![None; n_tx];
    let mut addressed_value: Vec<u64> = vec![0; n_tx];
    let mut received: HashMap<AddressId, u64> = HashMap::new();
    for (_, entry) in engine.index().iter() {
        let cluster = state.find(entry.primary()).expect("indexed address");
        *received.entry(cluster).or_default() += entry.value;
        addressed_value[entry.creating_ordinal as usize] += entry.value;
        if let Some(spender) = entry.spent_by {
            match input_cluster[spender as usize] {
                None => input_cluster[spender as usize] = Some(cluster),
                // The multi-input heuristic united them; anything else is a
                // broken engine.
                Some(prev) => assert_eq!(
                    prev, cluster,
                    "resolved inputs of one transaction span clusters"
                ),
            }
        }
    }

    let selected = select_clusters(engine, &received, selection)?;
    let vertex_slot: HashMap<AddressId, usize> = selected
        .iter()
        .enumerate()
        .map(|(slot, &rep)| (rep, slot))
        .collect();

    let mut totals = FlowTotals::default();
    for meta in log.tx_meta() {
        if meta.is_coinbase {
            totals.coinbase_output_sat += meta.output_value_sat;
        } else {
            totals.covered_output_sat += meta.output_value_sat;
        }
    }

    let mut weights: BTreeMap<(AddressId, AddressId), u64> = BTreeMap::new();
    for (_, entry) in engine.index().iter() {
        let ord = entry.creating_ordinal as usize;
        let meta = &log.tx_meta()[ord];
        if meta.is_coinbase {
            continue;
        }
        let Some(src) = input_cluster[ord] else {
            totals.unresolved_input_sat += entry.value;
            continue;
        };
        let dst = state.find(entry.primary()).expect("indexed address");
        if !vertex_slot.contains_key(&src) || !vertex_slot.contains_key(&dst) {
            totals.to_unselected_sat += entry.value;
            continue;
        }
        if src == dst && !include_self_loops {
            totals.self_loops_excluded_sat += entry.value;
            continue;
        }
        *weights.entry((src, dst)).or_default() += entry.value;
    }
    // Addressless outputs never enter the index; account for them per tx.
    for (ord, meta) in log.tx_meta().iter().enumerate() {
        if !meta.is_coinbase {
            totals.addressless_sat += meta.output_value_sat - addressed_value[ord];
        }
    }

    let mut edges = Vec::with_capacity(weights.len());
    for ((src, dst), weight_sat) in weights {
        if weight_sat < min_flow {
            totals.filtered_below_min_sat += weight_sat;
        } else {
            totals.exported_sat += weight_sat;
            edges.push(FlowEdge {
                from: vertex_slot[&src],
                to: vertex_slot[&dst],
                weight_sat,
            });
        }
    }
    edges.sort_unstable_by_key(|e| (e.from, e.to));

    let vertices = selected
        .iter()
        .map(|&rep| FlowVertex {
            rep,
            size: state.cluster_size(rep).expect("representative"),
            total_received_sat: received.get(&rep).copied().unwrap_or(0),
            label: None,
            category: None,
        })
        .collect();

    Ok(FlowGraph {
        vertices,
        edges,
        totals,
        min_flow,
        include_self_loops,
    })
}

fn select_clusters(
    engine: &ClusterEngine,
    received: &HashMap<AddressId, u64>,
    selection: &ClusterSelection,
) -> Result<Vec<AddressId>, GraphError> {
    let mut reps: Vec<AddressId> = match selection {
        ClusterSelection::TopBySize(n) => {
            let mut clusters = engine.state().clusters();
            clusters.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            clusters.into_iter().take(*n).map(|(rep, _)| rep).collect()
        }
        ClusterSelection::TopByReceived(n) => {
            let mut clusters: Vec<(AddressId, u64)> = engine
                .state()
                .clusters()
                .into_iter()
                .map(|(rep, _)| (rep, received.get(&rep).copied().unwrap_or(0)))
                .collect();
            clusters.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            clusters.into_iter().take(*n).map(|(rep, _)| rep).collect()
        }
        ClusterSelection::Explicit(members) => {
            let mut reps = Vec::with_capacity(members.len());
            for &member in members {
                reps.push(
                    engine
                        .find_id(member)
                        .map_err(|_| GraphError::UnknownCluster(member.to_string()))?,
                );
            }
            reps
        }
    };
    reps.sort_unstable();
    reps.dedup();
    Ok(reps)
}

/// Parse the `address,label,category` tag file. No quoting; an address may
/// appear at most once.
pub fn parse_tag_file<R: BufRead>(reader: R) -> Result<Vec<TagEntry>, GraphError> {
    let mut entries = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx as u64 + 1;
        let line = line.map_err(|e| GraphError::MalformedTagFile {
            line: line_no,
            msg: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let (address, label, category) =
            match (fields.next(), fields.next(), fields.next(), fields.next()) {
                (Some(a), Some(l), Some(c), None) => (a.trim(), l.trim(), c.trim()),
                _ => {
                    return Err(GraphError::MalformedTagFile {
                        line: line_no,
                        msg: "expected exactly three comma-separated fields".to_string(),
                    })
                }
            };
        if address.is_empty() {
            return Err(GraphError::MalformedTagFile {
                line: line_no,
                msg: "empty address".to_string(),
            });
        }
        let category =
            TagCategory::parse(category).ok_or_else(|| GraphError::MalformedTagFile {
                line: line_no,
                msg: format!("unknown category {category:?}"),
            })?;
        if !seen.insert(address.to_string()) {
            return Err(GraphError::MalformedTagFile {
                line: line_no,
                msg: format!("duplicate tag for address {address:?}"),
            });
        }
        entries.push(TagEntry {
            address: address.to_string(),
            label: label.to_string(),
            category,
        });
    }
    Ok(entries)
}

/// Lift address tags to flow-graph clusters. A cluster takes the tag of any
/// member address; clusters with conflicting member tags are reported and
/// left untagged. Tags for addresses outside the selected clusters are
/// ignored.
pub fn apply_tags(
    graph: &mut FlowGraph,
    engine: &ClusterEngine,
    tags: &[TagEntry],
) -> Vec<TagConflict> {
    let slot_of: HashMap<AddressId, usize> = graph
        .vertices
        .iter()
        .enumerate()
        .map(|(slot, v)| (v.rep, slot))
        .collect();
    let mut conflicts = Vec::new();
    let mut conflicted: BTreeSet<usize> = BTreeSet::new();
    for tag in tags {
        let Some(id) = engine.addresses().get(&tag.address) else {
            continue;
        };
        let rep = engine.find_id(id).expect("known address");
        let Some(&slot) = slot_of.get(&rep) else {
            continue;
        };
        if conflicted.contains(&slot) {
            continue;
        }
        let vertex = &mut graph.vertices[slot];
        match (&vertex.label, vertex.category) {
            (None, _) => {
                vertex.label = Some(tag.label.clone());
                vertex.category = Some(tag.category);
            }
            (Some(existing), category)
                if *existing == tag.label && category == Some(tag.category) => {}
            (Some(existing), _) => {
                conflicts.push(TagConflict {
                    representative: vertex.rep,
                    existing_label: existing.clone(),
                    conflicting_label: tag.label.clone(),
                });
                vertex.label = None;
                vertex.category = None;
                conflicted.insert(slot);
            }
        }
    }
    conflicts
}
