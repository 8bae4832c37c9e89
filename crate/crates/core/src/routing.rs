//! Probabilistic Bellman-Ford towards one destination.
//!
//! Every node keeps the best delivery distribution found so far. A sweep
//! visits every ordered pair `(x, y)` and offers `x` the candidate "meet `y`,
//! then follow `y`'s best distribution". Candidate rows replace current rows
//! only where they strictly dominate, and the winning neighbour is recorded
//! as the next hop for that send bin. The sweep repeats until nothing changes.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::Serialize;

use crate::distribution::DeliveryDistribution;
use crate::error::{Error, Result};
use crate::network::{Network, NodeId};
use crate::operators::{forward, schedule, Choice};

#[derive(Debug, Clone, Default)]
pub struct RouteOptions {
    /// Node visiting order for both loops. Defaults to ascending label order.
    pub order: Option<Vec<NodeId>>,
    /// Hard stop on the number of sweeps. Defaults to `|nodes|²`.
    pub max_iterations: Option<usize>,
    /// Restrict routing to these nodes. The destination is always included.
    pub nodes: Option<BTreeSet<NodeId>>,
    /// Pairs whose contacts may not be used.
    pub excluded_pairs: Vec<(NodeId, NodeId)>,
    /// Keep a copy of every best distribution after each sweep.
    pub record_snapshots: bool,
}

/// What happened during one sweep.
#[derive(Debug, Clone)]
pub struct Sweep {
    pub updated: Vec<usize>,
    pub snapshot: Option<Vec<DeliveryDistribution>>,
}

#[derive(Debug, Clone)]
pub struct RoutingState {
    dest: usize,
    nodes: Vec<NodeId>,
    active: Vec<bool>,
    best: Vec<DeliveryDistribution>,
    next_hop: Vec<Vec<Option<usize>>>,
    sweeps: Vec<Sweep>,
    converged: bool,
}

/// A maximal run of send bins sharing one next hop. `next_hop == None` is a
/// gap: no route from those bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RouteInterval {
    pub start: usize,
    pub end: usize,
    pub next_hop: Option<usize>,
}

impl RoutingState {
    pub fn dest(&self) -> usize {
        self.dest
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn node(&self, index: usize) -> &NodeId {
        &self.nodes[index]
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.nodes
            .iter()
            .position(|n| n.as_str() == label)
            .ok_or_else(|| Error::UnknownNode(label.to_string()))
    }

    /// Whether the node took part in routing.
    pub fn is_active(&self, node: usize) -> bool {
        self.active[node]
    }

    /// Best delivery distribution from `node` to the destination.
    pub fn best(&self, node: usize) -> &DeliveryDistribution {
        &self.best[node]
    }

    /// Next hop per send bin; the destination maps to itself.
    pub fn next_hop(&self, node: usize) -> &[Option<usize>] {
        &self.next_hop[node]
    }

    pub fn sweeps(&self) -> &[Sweep] {
        &self.sweeps
    }

    pub fn iterations(&self) -> usize {
        self.sweeps.len()
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn horizon(&self) -> usize {
        self.best[self.dest].horizon()
    }

    pub fn intervals(&self, node: usize) -> Vec<RouteInterval> {
        let mut out: Vec<RouteInterval> = Vec::new();
        for (bin, &hop) in self.next_hop[node].iter().enumerate() {
            match out.last_mut() {
                Some(last) if last.next_hop == hop => last.end = bin,
                _ => out.push(RouteInterval {
                    start: bin,
                    end: bin,
                    next_hop: hop,
                }),
            }
        }
        out
    }

    /// CSV with columns `node,start_bin,end_bin,next_hop`; gaps leave
    /// `next_hop` empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("node,start_bin,end_bin,next_hop\n");
        for (i, node) in self.nodes.iter().enumerate() {
            if !self.active[i] {
                continue;
            }
            for iv in self.intervals(i) {
                let hop = iv.next_hop.map(|h| self.nodes[h].to_string()).unwrap_or_default();
                let _ = writeln!(out, "{node},{},{},{hop}", iv.start, iv.end);
            }
        }
        out
    }
}

/// Maximal runs of identical next hops for `node`, in time order.
pub fn routing_intervals(state: &RoutingState, node: &str) -> Result<Vec<RouteInterval>> {
    Ok(state.intervals(state.index_of(node)?))
}

pub fn bellman_ford(net: &Network, dest: &str, opts: &RouteOptions) -> Result<RoutingState> {
    let dest = net.index_of(dest)?;
    let n = net.len();
    let h = net.horizon();

    let mut active = vec![true; n];
    if let Some(allowed) = &opts.nodes {
        for id in allowed {
            net.index_of_id(id)?;
        }
        for (i, flag) in active.iter_mut().enumerate() {
            *flag = allowed.contains(net.node(i));
        }
        active[dest] = true;
    }
    let mut excluded = BTreeSet::new();
    for (a, b) in &opts.excluded_pairs {
        let (a, b) = (net.index_of_id(a)?, net.index_of_id(b)?);
        excluded.insert((a.min(b), a.max(b)));
    }

    let order: Vec<usize> = match &opts.order {
        Some(ids) => {
            let idx = ids
                .iter()
                .map(|id| net.index_of_id(id))
                .collect::<Result<Vec<_>>>()?;
            let unique: BTreeSet<_> = idx.iter().copied().collect();
            if unique.len() != idx.len() || unique.len() != n {
                return Err(Error::InvalidNetwork(
                    "node order must list every node exactly once".into(),
                ));
            }
            idx.into_iter().filter(|&i| active[i]).collect()
        }
        None => {
            let mut idx: Vec<usize> = (0..n).filter(|&i| active[i]).collect();
            idx.sort_by(|&a, &b| net.node(a).cmp(net.node(b)));
            idx
        }
    };

    let mut links: HashMap<(usize, usize), DeliveryDistribution> = HashMap::new();
    for ((a, b), profile) in net.pairs() {
        if active[a] && active[b] && !excluded.contains(&(a, b)) {
            links.insert((a, b), profile.delivery());
        }
    }

    let grid = net.grid();
    let mut best = vec![DeliveryDistribution::bottom(grid); n];
    best[dest] = DeliveryDistribution::top(grid);
    let mut next_hop = vec![vec![None; h]; n];
    next_hop[dest] = vec![Some(dest); h];

    let max_iterations = opts.max_iterations.unwrap_or(n * n).max(1);
    let mut sweeps = Vec::new();
    let mut converged = false;

    while sweeps.len() < max_iterations {
        let mut updated = Vec::new();
        for &x in &order {
            if x == dest {
                continue;
            }
            for &y in &order {
                if y == x || best[y].is_bottom() {
                    continue;
                }
                let Some(link) = links.get(&(x.min(y), x.max(y))) else {
                    continue;
                };
                let candidate = forward(link, &best[y])?;
                let scheduled = schedule(&best[x], &candidate)?;
                let mut changed = false;
                for (bin, choice) in scheduled.choices.iter().enumerate() {
                    if *choice == Choice::Second {
                        next_hop[x][bin] = Some(y);
                        changed = true;
                    }
                }
                if changed {
                    best[x] = scheduled.distribution;
                    if updated.last() != Some(&x) {
                        updated.push(x);
                    }
                }
            }
        }
        let done = updated.is_empty();
        sweeps.push(Sweep {
            updated,
            snapshot: opts.record_snapshots.then(|| best.clone()),
        });
        if done {
            converged = true;
            break;
        }
    }

    Ok(RoutingState {
        dest,
        nodes: net.nodes().to_vec(),
        active,
        best,
        next_hop,
        sweeps,
        converged,
    })
}
