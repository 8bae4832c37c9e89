//! Following a routing table.
//!
//! A bundle that reaches node `n` at time `t` commits to `next_hop[n][t]` and
//! waits for that contact. Following the table from a source therefore gives
//! a delivery distribution of its own, plus the probability of each node
//! being visited on the way.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::Serialize;

use crate::distribution::DeliveryDistribution;
use crate::error::{Error, Result};
use crate::network::{Network, NodeId};
use crate::routing::{RouteInterval, RoutingState};

fn links(net: &Network, state: &RoutingState) -> HashMap<(usize, usize), DeliveryDistribution> {
    let mut out = HashMap::new();
    for x in 0..state.nodes().len() {
        for &hop in state.next_hop(x).iter().flatten() {
            if hop != x {
                out.entry((x, hop)).or_insert_with(|| net.delivery(x, hop));
            }
        }
    }
    out
}

/// Arrival masses per node after following the table from `source` at
/// `send`, at most `hop_limit` transfers.
struct Walk {
    delivered: Vec<f64>,
    visits: Vec<f64>,
}

fn walk(
    state: &RoutingState,
    links: &HashMap<(usize, usize), DeliveryDistribution>,
    source: usize,
    send: usize,
    hop_limit: usize,
) -> Walk {
    let h = state.horizon();
    let n = state.nodes().len();
    let dest = state.dest();
    let mut delivered = vec![0.0; h];
    let mut visits = vec![0.0; n];
    visits[source] = 1.0;
    if source == dest {
        delivered[0] = 1.0;
        return Walk { delivered, visits };
    }
    let mut frontier = vec![vec![0.0; h]; n];
    frontier[source][send] = 1.0;
    for _ in 0..hop_limit {
        let mut next = vec![vec![0.0; h]; n];
        let mut any = false;
        for (x, arrivals) in frontier.iter().enumerate() {
            if x == dest {
                continue;
            }
            for (t, &m) in arrivals.iter().enumerate() {
                if m == 0.0 {
                    continue;
                }
                let Some(hop) = state.next_hop(x)[t] else {
                    continue;
                };
                let Some(link) = links.get(&(x, hop)) else {
                    continue;
                };
                for (u, &p) in link.row(t)[..h - t].iter().enumerate() {
                    if p > 0.0 {
                        next[hop][t + u] += m * p;
                        any = true;
                    }
                }
            }
        }
        for (x, arrivals) in next.iter().enumerate() {
            visits[x] += arrivals.iter().sum::<f64>();
        }
        for (t, &m) in next[dest].iter().enumerate().skip(send) {
            delivered[t - send] += m;
        }
        if !any {
            break;
        }
        frontier = next;
    }
    Walk { delivered, visits }
}

/// Delivery distribution obtained by following the table from `source`,
/// allowing at most `hop_limit` transfers.
pub fn routed_delivery(
    net: &Network,
    state: &RoutingState,
    source: usize,
    hop_limit: usize,
) -> Result<DeliveryDistribution> {
    check_source(state, source)?;
    let links = links(net, state);
    let h = state.horizon();
    let rows: Vec<Vec<f64>> = (0..h)
        .into_par_iter()
        .map(|send| walk(state, &links, source, send, hop_limit).delivered)
        .collect();
    let mut data = Vec::with_capacity(h * h);
    for r in rows {
        data.extend(r);
    }
    Ok(DeliveryDistribution::from_raw(net.grid(), data))
}

/// Expected number of arrivals at each node (the source counts once) when the
/// bundle leaves `source` at `send`.
pub fn visit_expectations(
    net: &Network,
    state: &RoutingState,
    source: usize,
    send: usize,
    hop_limit: usize,
) -> Result<Vec<f64>> {
    check_source(state, source)?;
    net.grid().ensure_bin(send)?;
    let links = links(net, state);
    Ok(walk(state, &links, source, send, hop_limit).visits)
}

fn check_source(state: &RoutingState, source: usize) -> Result<()> {
    if source >= state.nodes().len() {
        return Err(Error::InvalidNetwork(format!("no node with index {source}")));
    }
    Ok(())
}

/// One node of the unrolled forwarding tree.
#[derive(Debug, Clone, Serialize)]
pub struct GraphEntry {
    pub node: NodeId,
    pub depth: usize,
    pub parent: Option<usize>,
    /// Send bins of the parent that lead here, inclusive.
    pub interval: Option<(usize, usize)>,
    /// Arrival mass per absolute time bin.
    pub arrival: Vec<f64>,
    pub probability: f64,
    pub children: Vec<usize>,
}

/// The routing table of every node unrolled from one source and send bin.
/// Entry 0 is the root.
#[derive(Debug, Clone, Serialize)]
pub struct ForwardingGraph {
    pub send_bin: usize,
    pub dest: NodeId,
    pub entries: Vec<GraphEntry>,
}

impl ForwardingGraph {
    pub fn root(&self) -> &GraphEntry {
        &self.entries[0]
    }

    /// Follows a label path from the root, e.g. `["a", "b", "d"]`.
    pub fn find(&self, path: &[&str]) -> Option<&GraphEntry> {
        let (first, rest) = path.split_first()?;
        let mut cur = &self.entries[0];
        if cur.node.as_str() != *first {
            return None;
        }
        for label in rest {
            cur = cur
                .children
                .iter()
                .map(|&c| &self.entries[c])
                .find(|e| e.node.as_str() == *label)?;
        }
        Some(cur)
    }

    /// Probability of the path, 0 when it is not in the graph.
    pub fn path_probability(&self, path: &[&str]) -> f64 {
        self.find(path).map_or(0.0, |e| e.probability)
    }

    /// Total receive probability per node, summed over the node's entries.
    pub fn node_probabilities(&self) -> BTreeMap<NodeId, f64> {
        let mut out = BTreeMap::new();
        for e in &self.entries {
            *out.entry(e.node.clone()).or_insert(0.0) += e.probability;
        }
        out
    }

    pub fn delivery_probability(&self) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.node == self.dest)
            .map(|e| e.probability)
            .sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Unrolls the routing table from `source` at `send`. Every non-gap routing
/// interval of a node becomes a child; nodes with zero probability are kept
/// but not expanded, and the depth is capped at `max_depth`.
pub fn receive_probabilities(
    net: &Network,
    state: &RoutingState,
    source: usize,
    send: usize,
    max_depth: usize,
) -> Result<ForwardingGraph> {
    check_source(state, source)?;
    net.grid().ensure_bin(send)?;
    let h = state.horizon();
    let links = links(net, state);
    let mut arrival = vec![0.0; h];
    arrival[send] = 1.0;
    let mut entries = vec![GraphEntry {
        node: state.node(source).clone(),
        depth: 0,
        parent: None,
        interval: None,
        arrival,
        probability: 1.0,
        children: Vec::new(),
    }];
    let intervals: Vec<Vec<RouteInterval>> =
        (0..state.nodes().len()).map(|x| state.intervals(x)).collect();

    let mut stack = vec![(0usize, source)];
    while let Some((idx, x)) = stack.pop() {
        let depth = entries[idx].depth;
        if x == state.dest() || depth >= max_depth || entries[idx].probability <= 0.0 {
            continue;
        }
        for iv in &intervals[x] {
            let Some(hop) = iv.next_hop else { continue };
            let mut out = vec![0.0; h];
            if let Some(link) = links.get(&(x, hop)) {
                let parent = &entries[idx].arrival;
                for t in iv.start..=iv.end {
                    let m = parent[t];
                    if m == 0.0 {
                        continue;
                    }
                    for (u, &p) in link.row(t)[..h - t].iter().enumerate() {
                        out[t + u] += m * p;
                    }
                }
            }
            let probability = out.iter().sum();
            let child = entries.len();
            entries.push(GraphEntry {
                node: state.node(hop).clone(),
                depth: depth + 1,
                parent: Some(idx),
                interval: Some((iv.start, iv.end)),
                arrival: out,
                probability,
                children: Vec::new(),
            });
            entries[idx].children.push(child);
            stack.push((child, hop));
        }
    }
    Ok(ForwardingGraph {
        send_bin: send,
        dest: state.node(state.dest()).clone(),
        entries,
    })
}
