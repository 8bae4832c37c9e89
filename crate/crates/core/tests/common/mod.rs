//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

use std::collections::BTreeMap;

use num_rational::Ratio;
use pdtn::{DeliveryDistribution, Network, TimeGrid};
use proptest::prelude::*;

pub type Q = Ratio<i64>;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(n, d)
}

pub fn to_f64(x: Q) -> f64 {
    *x.numer() as f64 / *x.denom() as f64
}

pub const DAYS: [&str; 7] = ["Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"];

pub fn weekly_path() -> String {
    format!("{}/tests/fixtures/weekly.json", env!("CARGO_MANIFEST_DIR"))
}

pub fn weekly() -> Network {
    pdtn::load_network(weekly_path()).unwrap()
}

/// Contact probabilities of a network as exact fractions, one vector of `H`
/// bins per pair.
pub struct ExactNet {
    pub horizon: usize,
    pub nodes: Vec<&'static str>,
    pub pairs: Vec<(usize, usize, Vec<Q>)>,
}

impl ExactNet {
    pub fn index(&self, label: &str) -> usize {
        self.nodes.iter().position(|n| *n == label).unwrap()
    }

    fn pair(&self, a: usize, b: usize) -> Option<usize> {
        self.pairs
            .iter()
            .position(|(x, y, _)| (*x == a && *y == b) || (*x == b && *y == a))
    }
}

/// The weekly example written down by hand, independently of the fixture.
pub fn weekly_exact() -> ExactNet {
    let z = q(0, 1);
    let week = |entries: &[(usize, Q)]| {
        let mut v = vec![z; 7];
        for &(d, p) in entries {
            v[d] = p;
        }
        v
    };
    ExactNet {
        horizon: 7,
        nodes: vec!["a", "b", "c", "d", "e"],
        pairs: vec![
            (0, 1, week(&[(0, q(3, 4)), (2, q(1, 1))])),
            (0, 3, week(&[(4, q(1, 3))])),
            (1, 2, week(&[(3, q(1, 4)), (4, q(1, 2))])),
            (1, 3, week(&[(1, q(1, 2)), (3, q(1, 2))])),
            (2, 4, week(&[(5, q(4, 5)), (6, q(1, 2))])),
            (3, 4, week(&[(2, q(3, 4)), (5, q(1, 1))])),
        ],
    }
}

/// One joint outcome of every contact slot, with its probability.
pub struct Realization {
    pub prob: Q,
    pub contact: Vec<Vec<bool>>,
}

/// Every contact realization of the network, enumerated exactly.
pub fn realizations(net: &ExactNet) -> Vec<Realization> {
    let h = net.horizon;
    let mut out = vec![Realization {
        prob: q(1, 1),
        contact: vec![vec![false; h]; net.pairs.len()],
    }];
    for (pi, (_, _, p)) in net.pairs.iter().enumerate() {
        for (t, &c) in p.iter().enumerate() {
            if c == q(0, 1) {
                continue;
            }
            let mut next = Vec::with_capacity(out.len() * 2);
            for r in out {
                if c != q(1, 1) {
                    next.push(Realization {
                        prob: r.prob * (q(1, 1) - c),
                        contact: r.contact.clone(),
                    });
                }
                let mut contact = r.contact;
                contact[pi][t] = true;
                next.push(Realization {
                    prob: r.prob * c,
                    contact,
                });
            }
            out = next;
        }
    }
    out
}

/// Follows a next-hop table in one realization: the holder picks the hop for
/// its arrival bin and waits for that pair's next contact. Returns the
/// arrival time at `dest` and the visited node sequence.
pub fn follow_commit(
    net: &ExactNet,
    real: &Realization,
    next_hop: &dyn Fn(usize, usize) -> Option<usize>,
    source: usize,
    send: usize,
    dest: usize,
    hop_limit: usize,
) -> (Option<usize>, Vec<usize>) {
    let (mut at, mut t) = (source, send);
    let mut path = vec![at];
    for _ in 0..hop_limit {
        if at == dest {
            return (Some(t), path);
        }
        let Some(hop) = next_hop(at, t) else {
            return (None, path);
        };
        let Some(pair) = net.pair(at, hop) else {
            return (None, path);
        };
        let Some(when) = (t..net.horizon).find(|&u| real.contact[pair][u]) else {
            return (None, path);
        };
        at = hop;
        t = when;
        path.push(at);
    }
    ((at == dest).then_some(t), path)
}

// ---------------------------------------------------------------------------
// Exact operator trees.

#[derive(Debug, Clone)]
pub enum Tree {
    Leaf(usize),
    Fwd(Box<Tree>, Box<Tree>),
    Dup(Box<Tree>, Box<Tree>),
    Sched(Box<Tree>, Box<Tree>),
}

impl Tree {
    pub fn depth(&self) -> usize {
        match self {
            Tree::Leaf(_) => 1,
            Tree::Fwd(a, b) | Tree::Dup(a, b) | Tree::Sched(a, b) => 1 + a.depth().max(b.depth()),
        }
    }
}

/// Every tree of depth at most 3 over `leaves` leaf indices.
pub fn all_trees(leaves: usize) -> Vec<Tree> {
    let ops: [fn(Box<Tree>, Box<Tree>) -> Tree; 3] = [Tree::Fwd, Tree::Dup, Tree::Sched];
    let level1: Vec<Tree> = (0..leaves).map(Tree::Leaf).collect();
    let mut level2 = Vec::new();
    for op in ops {
        for a in &level1 {
            for b in &level1 {
                level2.push(op(Box::new(a.clone()), Box::new(b.clone())));
            }
        }
    }
    let upto2: Vec<Tree> = level1.iter().chain(&level2).cloned().collect();
    let mut out = upto2.clone();
    for op in ops {
        for a in &upto2 {
            for b in &upto2 {
                if a.depth() == 2 || b.depth() == 2 {
                    out.push(op(Box::new(a.clone()), Box::new(b.clone())));
                }
            }
        }
    }
    out
}

/// Delay law of one row as `delay -> probability`; missing mass is loss.
type Law = BTreeMap<usize, Q>;

fn cumulative(law: &Law, h: usize) -> Vec<Q> {
    let mut acc = q(0, 1);
    (0..h)
        .map(|t| {
            acc += law.get(&t).copied().unwrap_or(q(0, 1));
            acc
        })
        .collect()
}

/// Exact law of the tree for a bundle sent at `send`, found by enumerating
/// joint outcomes of the sub-trees.
pub fn exact_law(tree: &Tree, leaves: &[Vec<Vec<Q>>], h: usize, send: usize) -> Law {
    let zero = q(0, 1);
    let mut out = Law::new();
    match tree {
        Tree::Leaf(i) => {
            for (t, &m) in leaves[*i][send].iter().enumerate() {
                if m != zero {
                    out.insert(t, m);
                }
            }
        }
        Tree::Fwd(a, b) => {
            for (&x, &p) in &exact_law(a, leaves, h, send) {
                if send + x >= h {
                    continue;
                }
                for (&y, &r) in &exact_law(b, leaves, h, send + x) {
                    if x + y < h {
                        *out.entry(x + y).or_insert(zero) += p * r;
                    }
                }
            }
        }
        Tree::Dup(a, b) => {
            let with_loss = |law: Law| {
                let lost = q(1, 1) - law.values().copied().sum::<Q>();
                let mut v: Vec<(Option<usize>, Q)> =
                    law.into_iter().map(|(t, p)| (Some(t), p)).collect();
                v.push((None, lost));
                v
            };
            let la = with_loss(exact_law(a, leaves, h, send));
            let lb = with_loss(exact_law(b, leaves, h, send));
            for &(x, p) in &la {
                for &(y, r) in &lb {
                    let first = match (x, y) {
                        (Some(x), Some(y)) => Some(x.min(y)),
                        (Some(x), None) => Some(x),
                        (None, Some(y)) => Some(y),
                        (None, None) => None,
                    };
                    if let Some(t) = first {
                        *out.entry(t).or_insert(zero) += p * r;
                    }
                }
            }
        }
        Tree::Sched(a, b) => {
            let la = exact_law(a, leaves, h, send);
            let lb = exact_law(b, leaves, h, send);
            let (ca, cb) = (cumulative(&la, h), cumulative(&lb, h));
            let ge = ca.iter().zip(&cb).all(|(x, y)| y >= x);
            let gt = ca.iter().zip(&cb).any(|(x, y)| y > x);
            out = if ge && gt { lb } else { la };
        }
    }
    out.retain(|_, p| *p != zero);
    out
}

pub fn float_eval(tree: &Tree, leaves: &[DeliveryDistribution]) -> DeliveryDistribution {
    match tree {
        Tree::Leaf(i) => leaves[*i].clone(),
        Tree::Fwd(a, b) => pdtn::forward(&float_eval(a, leaves), &float_eval(b, leaves)).unwrap(),
        Tree::Dup(a, b) => {
            pdtn::duplicate(&float_eval(a, leaves), &float_eval(b, leaves)).unwrap()
        }
        Tree::Sched(a, b) => {
            pdtn::schedule(&float_eval(a, leaves), &float_eval(b, leaves))
                .unwrap()
                .distribution
        }
    }
}

/// Five fixed distributions on four bins with masses in quarters.
pub fn quarter_leaves() -> Vec<Vec<Vec<Q>>> {
    let rows: [[[i64; 4]; 4]; 5] = [
        [[4, 0, 0, 0], [4, 0, 0, 0], [4, 0, 0, 0], [4, 0, 0, 0]],
        [[0, 2, 1, 0], [1, 1, 0, 1], [0, 0, 3, 0], [2, 0, 0, 0]],
        [[1, 0, 1, 1], [0, 3, 0, 0], [1, 1, 0, 0], [0, 0, 0, 0]],
        [[0, 0, 0, 4], [0, 0, 2, 0], [3, 0, 0, 0], [1, 0, 0, 0]],
        [[2, 2, 0, 0], [0, 0, 0, 0], [0, 1, 1, 1], [4, 0, 0, 0]],
    ];
    rows.iter()
        .map(|d| d.iter().map(|r| r.iter().map(|&m| q(m, 4)).collect()).collect())
        .collect()
}

pub fn float_leaves(leaves: &[Vec<Vec<Q>>]) -> Vec<DeliveryDistribution> {
    leaves
        .iter()
        .map(|d| {
            let h = d.len();
            let rows = d.iter().map(|r| r.iter().map(|&m| to_f64(m)).collect()).collect();
            DeliveryDistribution::new(TimeGrid::new(h).unwrap(), rows).unwrap()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Deterministic networks.

/// Earliest arrival at `dest` from `(source, send)` over simple paths, taking
/// the first contact at or after the current time on every hop.
pub fn earliest_arrival(
    n: usize,
    h: usize,
    contact: &dyn Fn(usize, usize, usize) -> bool,
    source: usize,
    send: usize,
    dest: usize,
) -> Option<usize> {
    fn go(
        n: usize,
        h: usize,
        contact: &dyn Fn(usize, usize, usize) -> bool,
        at: usize,
        t: usize,
        dest: usize,
        seen: &mut Vec<bool>,
    ) -> Option<usize> {
        if at == dest {
            return Some(t);
        }
        let mut best: Option<usize> = None;
        for next in 0..n {
            if seen[next] {
                continue;
            }
            let Some(when) = (t..h).find(|&u| contact(at, next, u)) else {
                continue;
            };
            seen[next] = true;
            if let Some(a) = go(n, h, contact, next, when, dest, seen) {
                best = Some(best.map_or(a, |b| b.min(a)));
            }
            seen[next] = false;
        }
        best
    }
    let mut seen = vec![false; n];
    seen[source] = true;
    go(n, h, contact, source, send, dest, &mut seen)
}

// ---------------------------------------------------------------------------
// Random generators.

/// A row of non-negative masses summing to at most one, with frequent zeros.
pub fn mass_row(h: usize) -> impl Strategy<Value = Vec<f64>> {
    (
        prop::collection::vec(prop_oneof![2 => Just(0.0), 3 => 0.0..1.0f64], h),
        0.0..1.0f64,
    )
        .prop_map(|(w, lost)| {
            let s: f64 = w.iter().sum::<f64>() + lost;
            if s == 0.0 {
                w
            } else {
                w.iter().map(|x| x / s).collect()
            }
        })
}

/// A delivery distribution whose arrivals all fall inside the horizon, as
/// every distribution derived from contact profiles does.
pub fn delivery(h: usize) -> impl Strategy<Value = DeliveryDistribution> {
    let rows: Vec<_> = (0..h)
        .map(|send| {
            mass_row(h - send).prop_map(move |mut r| {
                r.resize(h, 0.0);
                r
            })
        })
        .collect();
    rows.prop_map(move |rows| DeliveryDistribution::new(TimeGrid::new(h).unwrap(), rows).unwrap())
}

/// Like [`delivery`] but with mass allowed at any delay.
pub fn loose_delivery(h: usize) -> impl Strategy<Value = DeliveryDistribution> {
    prop::collection::vec(mass_row(h), h)
        .prop_map(move |rows| DeliveryDistribution::new(TimeGrid::new(h).unwrap(), rows).unwrap())
}

/// A random contact profile for every pair with probability `density`.
pub fn random_network(
    n: usize,
    h: usize,
    density: f64,
    deterministic: bool,
) -> impl Strategy<Value = Network> {
    let pairs = n * (n - 1) / 2;
    let bin = if deterministic {
        prop_oneof![3 => Just(0.0), 1 => Just(1.0)].boxed()
    } else {
        prop_oneof![1 => Just(0.0), 1 => 0.05..1.0f64].boxed()
    };
    prop::collection::vec(
        (0.0..1.0f64, prop::collection::vec(bin, h)),
        pairs,
    )
    .prop_map(move |profiles| {
        let labels: Vec<String> = (0..n).map(|i| format!("n{i}")).collect();
        let mut net = Network::with_labels(TimeGrid::new(h).unwrap(), &labels).unwrap();
        let mut k = 0;
        for a in 0..n {
            for b in a + 1..n {
                let (keep, p) = &profiles[k];
                k += 1;
                if *keep < density {
                    net.add_pair(&labels[a], &labels[b], None, p.clone()).unwrap();
                }
            }
        }
        net
    })
}
