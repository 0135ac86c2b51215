//! CSV emission with fixed, documented headers. Plain comma separation; no
//! field in these tables can contain a comma.

use std::fmt::Write;

use crate::analytics::{
    FlaggedCluster, FlaggedTx, QuantileWindow, RatioWindow, SizeHistogram, SuperclusterStats,
    WindowCounts,
};

pub fn window_counts_csv(rows: &[WindowCounts]) -> String {
    let mut out = String::from(
        "window_start,window_end,transactions,new_addresses,clusters_new_ge2,clusters_ge2_total\n",
    );
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.window_start,
            r.window_end,
            r.transactions,
            r.new_addresses,
            r.clusters_new_ge2,
            r.clusters_ge2_total
        )
        .unwrap();
    }
    out
}

pub fn ratio_series_csv(rows: &[RatioWindow]) -> String {
    let mut out = String::from(
        "window_start,window_end,transactions,new_addresses_per_tx,merging_txs_per_tx,\
         addressable_outputs_per_tx,nontrivial_txs_per_tx,reuse_gap,merge_gap\n",
    );
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.window_start,
            r.window_end,
            r.transactions,
            r.new_addresses_per_tx(),
            r.merging_txs_per_tx(),
            r.addressable_outputs_per_tx(),
            r.nontrivial_txs_per_tx(),
            r.reuse_gap(),
            r.merge_gap()
        )
        .unwrap();
    }
    out
}

pub fn size_histogram_csv(hist: &SizeHistogram) -> String {
    let mut out = String::from("bin_lower,bin_upper,clusters\n");
    for (lower, upper, count) in hist.rows() {
        writeln!(out, "{lower},{upper},{count}").unwrap();
    }
    out
}

pub fn quantiles_csv(rows: &[QuantileWindow], q_list: &[u64]) -> String {
    let mut out = String::from("window_index,n");
    for q in q_list {
        write!(out, ",q{q}").unwrap();
    }
    out.push('\n');
    for r in rows {
        write!(out, "{},{}", r.window_index, r.n).unwrap();
        for v in &r.values {
            match v {
                Some(v) => write!(out, ",{v}").unwrap(),
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

pub fn supercluster_csv(stats: &SuperclusterStats) -> String {
    let mut out = String::from(
        "min_size,max_size,count,supercluster_addresses,total_addresses,addresses_in_ge2,\
         address_share_all,address_share_ge2,outputs_attributed,total_outputs,output_share,\
         inputs_attributed,total_inputs,input_share,excluded_clusters\n",
    );
    writeln!(
        out,
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        stats.min_size,
        stats.max_size,
        stats.count,
        stats.supercluster_addresses,
        stats.total_addresses,
        stats.addresses_in_ge2,
        stats.address_share_all,
        stats.address_share_ge2,
        stats.outputs_attributed,
        stats.total_outputs,
        stats.output_share,
        stats.inputs_attributed,
        stats.total_inputs,
        stats.input_share,
        stats.excluded.len()
    )
    .unwrap();
    out
}

pub fn supercluster_excluded_csv(stats: &SuperclusterStats) -> String {
    let mut out = String::from("representative,size\n");
    for (rep, size) in &stats.excluded {
        writeln!(out, "{rep},{size}").unwrap();
    }
    out
}

pub fn flagged_txs_csv(rows: &[FlaggedTx]) -> String {
    let mut out =
        String::from("rank,ordinal,txid,max_increase,cluster_representative,resulting_size\n");
    for (rank, r) in rows.iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            rank + 1,
            r.ordinal,
            r.txid,
            r.max_increase,
            r.cluster_rep,
            r.resulting_size
        )
        .unwrap();
    }
    out
}

pub fn flagged_clusters_csv(rows: &[FlaggedCluster]) -> String {
    let mut out = String::from("representative,size,event_ordinals\n");
    for r in rows {
        let ordinals: Vec<String> = r.event_ordinals.iter().map(u64::to_string).collect();
        writeln!(
            out,
            "{},{},{}",
            r.representative,
            r.size,
            ordinals.join(";")
        )
        .unwrap();
    }
    out
}
