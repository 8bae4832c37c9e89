//! Greedy duplication planning.
//!
//! Route one copy along the best table, then remove every relay that copy can
//! visit and route the next copy through what is left. Copies therefore never
//! share a relay, which keeps the independence assumed by duplication. Stops
//! as soon as the combined distribution meets the condition.

use std::collections::BTreeSet;
use std::ops::Range;

use serde::Serialize;

use crate::conditions::DeliveryCondition;
use crate::distribution::{row, DeliveryDistribution, Dominance};
use crate::error::{Error, Result};
use crate::forwarding::{routed_delivery, visit_expectations};
use crate::network::{Network, NodeId};
use crate::operators::duplicate;
use crate::routing::{bellman_ford, RouteOptions};
use crate::scheme::{DeliveryScheme, Expr, Routed};

#[derive(Debug, Clone, Default)]
pub struct PlanOptions {
    /// Send bins the condition must hold for. Defaults to every bin.
    pub send_window: Option<Range<usize>>,
    /// A relay counts as used by a copy when its expected number of visits
    /// exceeds this, for some send bin in the window.
    pub visit_threshold: f64,
    pub max_copies: Option<usize>,
    /// Transfer cap when following a table. Defaults to the node count.
    pub hop_limit: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Satisfied,
    /// Only the endpoints are left and no direct contact remains unused.
    Exhausted,
    NoRoute,
    NoProgress,
    CopyLimit,
}

#[derive(Debug, Clone, Serialize)]
pub struct PlanStep {
    pub copy: Expr,
    pub relays: Vec<NodeId>,
    #[serde(skip)]
    pub distribution: DeliveryDistribution,
    #[serde(skip)]
    pub combined: DeliveryDistribution,
}

#[derive(Debug, Clone, Serialize)]
pub struct Plan {
    pub scheme: Option<DeliveryScheme>,
    #[serde(skip)]
    pub distribution: DeliveryDistribution,
    pub satisfied: bool,
    pub stop: StopReason,
    pub steps: Vec<PlanStep>,
    pub remaining: BTreeSet<NodeId>,
}

impl Plan {
    pub fn copies(&self) -> usize {
        self.steps.len()
    }
}

pub fn plan(
    net: &Network,
    source: &str,
    dest: &str,
    condition: &DeliveryCondition,
    opts: &PlanOptions,
) -> Result<Plan> {
    let s = net.index_of(source)?;
    let d = net.index_of(dest)?;
    if s == d {
        return Err(Error::InvalidScheme("source and destination coincide".into()));
    }
    let h = net.horizon();
    let window = opts.send_window.clone().unwrap_or(0..h);
    if window.is_empty() || window.end > h {
        return Err(Error::BinOutOfRange {
            bin: window.end,
            horizon: h,
        });
    }
    let hop_limit = opts.hop_limit.unwrap_or(net.len());
    let (sid, did) = (net.node(s).clone(), net.node(d).clone());

    let mut active: BTreeSet<NodeId> = net.nodes().iter().cloned().collect();
    let mut excluded: Vec<(NodeId, NodeId)> = Vec::new();
    let mut combined = DeliveryDistribution::bottom(net.grid());
    let mut steps: Vec<PlanStep> = Vec::new();

    // At least one copy is routed before the condition is looked at.
    let stop = loop {
        if !steps.is_empty() {
            if condition.eval_delivery_in(&combined, window.clone())? {
                break StopReason::Satisfied;
            }
            let direct_left = net.profile(s, d).is_some() && excluded.is_empty();
            if active.len() == 2 && !direct_left {
                break StopReason::Exhausted;
            }
        }
        if opts.max_copies.is_some_and(|m| steps.len() >= m) {
            break StopReason::CopyLimit;
        }

        let route_opts = RouteOptions {
            nodes: Some(active.clone()),
            excluded_pairs: excluded.clone(),
            ..Default::default()
        };
        let state = bellman_ford(net, dest, &route_opts)?;
        let copy = routed_delivery(net, &state, s, hop_limit)?;
        if window.clone().all(|t| row::is_zero(copy.row(t))) {
            break StopReason::NoRoute;
        }
        let next = duplicate(&combined, &copy)?;
        let improved = window
            .clone()
            .any(|t| row::compare(next.row(t), combined.row(t)) == Dominance::Greater);
        if !improved {
            break StopReason::NoProgress;
        }

        let mut used = BTreeSet::new();
        for send in window.clone() {
            let visits = visit_expectations(net, &state, s, send, hop_limit)?;
            for (i, &v) in visits.iter().enumerate() {
                if v > opts.visit_threshold && i != s && i != d {
                    used.insert(i);
                }
            }
        }
        let relays: Vec<NodeId> = used.iter().map(|&i| net.node(i).clone()).collect();
        let leaf = Expr::Routed(Routed {
            dest: did.clone(),
            source: Some(sid.clone()),
            nodes: Some(active.clone()),
            exclude: excluded.clone(),
            hop_limit: opts.hop_limit,
        });
        for r in &relays {
            active.remove(r);
        }
        if relays.is_empty() {
            // The copy went over the direct contact; a second copy on the
            // same contact would not be independent.
            excluded.push((sid.clone(), did.clone()));
        }
        steps.push(PlanStep {
            copy: leaf,
            relays,
            distribution: copy,
            combined: next.clone(),
        });
        combined = next;
    };

    let scheme = match steps.len() {
        0 => None,
        1 => Some(DeliveryScheme::with_endpoints(
            sid.clone(),
            did.clone(),
            steps[0].copy.clone(),
        )?),
        _ => Some(DeliveryScheme::with_endpoints(
            sid.clone(),
            did.clone(),
            Expr::Dup(steps.iter().map(|st| st.copy.clone()).collect()),
        )?),
    };
    Ok(Plan {
        scheme,
        satisfied: condition.eval_delivery_in(&combined, window)?,
        distribution: combined,
        stop,
        steps,
        remaining: active,
    })
}
