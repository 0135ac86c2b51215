//! DOT and GraphML serialization. Vertex and edge order is fixed by the
//! graph builders, so exports are byte-identical across runs on the same
//! state. Bipartite exports style address vertices white and transaction
//! vertices gray; flow exports color vertices by tag category.

use std::fmt::Write;

use crate::graphs::{BipartiteGraph, FlowGraph};
use crate::model::TagCategory;

fn category_color(category: Option<TagCategory>) -> &'static str {
    match category {
        Some(TagCategory::DarknetMarket) => "red",
        Some(TagCategory::Gambling) => "purple",
        Some(TagCategory::Exchange) => "green",
        Some(TagCategory::MiningPool) => "blue",
        Some(TagCategory::PaymentProcessor) => "orange",
        Some(TagCategory::Other) => "lightgray",
        None => "gray",
    }
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

impl BipartiteGraph {
    pub fn to_dot(&self) -> String {
        let mut out = String::new();
        writeln!(out, "graph cluster_{} {{", self.cluster_rep).unwrap();
        writeln!(out, "  node [style=filled];").unwrap();
        for addr in &self.addresses {
            let mut label = dot_escape(&addr.external);
            if addr.balance.current > 0 {
                write!(
                    label,
                    "\\ncur={} max={}",
                    addr.balance.current, addr.balance.alltime_max
                )
                .unwrap();
            }
            writeln!(
                out,
                "  a{} [label=\"{}\", fillcolor=white, shape=ellipse];",
                addr.id, label
            )
            .unwrap();
        }
        for tx in &self.transactions {
            writeln!(
                out,
                "  t{} [label=\"tx {}\", fillcolor=gray, shape=box];",
                tx.ordinal, tx.ordinal
            )
            .unwrap();
        }
        for &(tx, addr) in &self.edges {
            writeln!(
                out,
                "  t{} -- a{};",
                self.transactions[tx].ordinal, self.addresses[addr].id
            )
            .unwrap();
        }
        out.push_str("}\n");
        out
    }

    pub fn to_graphml(&self) -> String {
        let mut out = String::from(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
             <graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n\
             <key id=\"label\" for=\"node\" attr.name=\"label\" attr.type=\"string\"/>\n\
             <key id=\"kind\" for=\"node\" attr.name=\"kind\" attr.type=\"string\"/>\n\
             <key id=\"current_sat\" for=\"node\" attr.name=\"current_sat\" attr.type=\"long\"/>\n\
             <key id=\"max_sat\" for=\"node\" attr.name=\"max_sat\" attr.type=\"long\"/>\n",
        );
        writeln!(
            out,
            "<graph id=\"cluster_{}\" edgedefault=\"undirected\">",
            self.cluster_rep
        )
        .unwrap();
        for addr in &self.addresses {
            writeln!(
                out,
                "  <node id=\"a{}\"><data key=\"label\">{}</data><data key=\"kind\">address</data>\
                 <data key=\"current_sat\">{}</data><data key=\"max_sat\">{}</data></node>",
                addr.id,
                xml_escape(&addr.external),
                addr.balance.current,
                addr.balance.alltime_max
            )
            .unwrap();
        }
        for tx in &self.transactions {
            writeln!(
                out,
                "  <node id=\"t{}\"><data key=\"label\">{}</data><data key=\"kind\">transaction</data></node>",
                tx.ordinal, tx.txid
            )
            .unwrap();
        }
        for &(tx, addr) in &self.edges {
            writeln!(
                out,
                "  <edge source=\"t{}\" target=\"a{}\"/>",
                self.transactions[tx].ordinal, self.addresses[addr].id
            )
            .unwrap();
        }
        out.push_str("</graph>\n</graphml>\n");
        out
    }
}

impl FlowGraph {
    pub fn to_dot(&self) -> String {
        let mut out = String::new();
        out.push_str("digraph flows {\n");
        writeln!(out, "  node [style=filled];").unwrap();
        for v in &self.vertices {
            let label = match &v.label {
                Some(l) => format!("{} (c{})", dot_escape(l), v.rep),
                None => format!("c{}", v.rep),
            };
            writeln!(
                out,
                "  c{} [label=\"{}\\nsize={}\", fillcolor={}];",
                v.rep,
                label,
                v.size,
                category_color(v.category)
            )
            .unwrap();
        }
        for e in &self.edges {
            writeln!(
                out,
                "  c{} -> c{} [label=\"{}\", weight_sat={}];",
                self.vertices[e.from].rep, self.vertices[e.to].rep, e.weight_sat, e.weight_sat
            )
            .unwrap();
        }
        out.push_str("}\n");
        out
    }

    pub fn to_graphml(&self) -> String {
        let mut out = String::from(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
             <graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n\
             <key id=\"label\" for=\"node\" attr.name=\"label\" attr.type=\"string\"/>\n\
             <key id=\"size\" for=\"node\" attr.name=\"size\" attr.type=\"long\"/>\n\
             <key id=\"category\" for=\"node\" attr.name=\"category\" attr.type=\"string\"/>\n\
             <key id=\"received_sat\" for=\"node\" attr.name=\"received_sat\" attr.type=\"long\"/>\n\
             <key id=\"weight_sat\" for=\"edge\" attr.name=\"weight_sat\" attr.type=\"long\"/>\n\
             <graph id=\"flows\" edgedefault=\"directed\">\n",
        );
        for v in &self.vertices {
            let category = v.category.map(|c| c.as_str()).unwrap_or("untagged");
            writeln!(
                out,
                "  <node id=\"c{}\"><data key=\"label\">{}</data><data key=\"size\">{}</data>\
                 <data key=\"category\">{}</data><data key=\"received_sat\">{}</data></node>",
                v.rep,
                xml_escape(v.label.as_deref().unwrap_or("")),
                v.size,
                category,
                v.total_received_sat
            )
            .unwrap();
        }
        for e in &self.edges {
            writeln!(
                out,
                "  <edge source=\"c{}\" target=\"c{}\"><data key=\"weight_sat\">{}</data></edge>",
                self.vertices[e.from].rep, self.vertices[e.to].rep, e.weight_sat
            )
            .unwrap();
        }
        out.push_str("</graph>\n</graphml>\n");
        out
    }
}
