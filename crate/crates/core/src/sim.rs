//! Monte-Carlo checks for the analytic distributions.
//!
//! Each sample draws one contact realization: pair `(a, b)` meets in bin `t`
//! when a uniform draw keyed by `(seed, sample, pair, t)` falls below
//! `C_ab(t)`. The draw is a pure function of that key, so the realization is
//! the same whichever thread evaluates the sample, and counts are merged by
//! summation. Reports are therefore identical for any thread count.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::distribution::row;
use crate::error::{Error, Result};
use crate::network::{Network, NodeId};
use crate::operators::Choice;
use crate::routing::RoutingState;
use crate::scheme::{Compiled, CompiledKind, DeliveryScheme};

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform in `[0, 1)` keyed by its arguments.
pub fn keyed_uniform(seed: u64, sample: u64, pair: usize, bin: usize) -> f64 {
    let key = splitmix64(seed ^ splitmix64(sample));
    let slot = ((pair as u64) << 32) | bin as u64;
    let v = splitmix64(key ^ splitmix64(slot.wrapping_add(0x632B_E59B_D9B4_E019)));
    (v >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// The contacts of one sample, drawn lazily.
#[derive(Debug, Clone, Copy)]
pub struct ContactRealization<'a> {
    net: &'a Network,
    seed: u64,
    sample: u64,
}

impl<'a> ContactRealization<'a> {
    pub fn new(net: &'a Network, seed: u64, sample: u64) -> Self {
        Self { net, seed, sample }
    }

    pub fn contact(&self, a: usize, b: usize, bin: usize) -> bool {
        match (self.net.profile(a, b), self.net.pair_index(a, b)) {
            (Some(p), Some(pair)) => keyed_uniform(self.seed, self.sample, pair, bin) < p.at(bin),
            _ => false,
        }
    }

    /// First bin at or after `from` in which `a` and `b` meet.
    pub fn next_contact(&self, a: usize, b: usize, from: usize) -> Option<usize> {
        let (profile, pair) = (self.net.profile(a, b)?, self.net.pair_index(a, b)?);
        (from..self.net.horizon()).find(|&t| {
            let c = profile.at(t);
            c > 0.0 && keyed_uniform(self.seed, self.sample, pair, t) < c
        })
    }
}

/// How a holder treats its routing table while waiting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WaitPolicy {
    /// Pick the hop for the arrival bin and wait for that contact. This is
    /// the behaviour the analytic tables describe.
    #[default]
    Commit,
    /// Look the hop up again in every bin spent waiting.
    Reconsult,
}

#[derive(Debug, Clone)]
pub struct SimulationOptions {
    pub samples: u64,
    pub seed: u64,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
    pub wait: WaitPolicy,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            samples: 100_000,
            seed: 0,
            threads: None,
            wait: WaitPolicy::Commit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub source: NodeId,
    pub dest: NodeId,
    pub send_bin: usize,
    pub samples: u64,
    pub seed: u64,
    /// Samples delivered with each delay.
    pub delivered: Vec<u64>,
    pub undelivered: u64,
    /// Analytic mass per delay for the same send bin.
    pub analytic: Vec<f64>,
    /// Node sequence of each sample joined by `/`, when recorded.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub paths: BTreeMap<String, u64>,
}

impl SimulationReport {
    pub fn empirical_mass(&self) -> Vec<f64> {
        let n = self.samples as f64;
        self.delivered.iter().map(|&c| c as f64 / n).collect()
    }

    pub fn empirical_cumulative(&self) -> Vec<f64> {
        row::cumulative(&self.empirical_mass())
    }

    pub fn delivery_ratio(&self) -> f64 {
        self.delivered.iter().sum::<u64>() as f64 / self.samples as f64
    }

    /// Largest gap between the empirical and analytic cumulatives.
    pub fn cdf_deviation(&self) -> f64 {
        row::cumulative_distance(&self.empirical_mass(), &self.analytic)
    }

    /// Fraction of samples whose node sequence starts with `prefix`.
    pub fn path_frequency(&self, prefix: &[&str]) -> f64 {
        let hits: u64 = self
            .paths
            .iter()
            .filter(|(path, _)| {
                let labels: Vec<&str> = path.split('/').collect();
                labels.len() >= prefix.len() && labels[..prefix.len()] == *prefix
            })
            .map(|(_, &c)| c)
            .sum();
        hits as f64 / self.samples as f64
    }

    /// Samples in which each node held the bundle at least once.
    pub fn visit_counts(&self) -> BTreeMap<String, u64> {
        let mut out = BTreeMap::new();
        for (path, &c) in &self.paths {
            let mut seen: Vec<&str> = path.split('/').collect();
            seen.sort_unstable();
            seen.dedup();
            for n in seen {
                *out.entry(n.to_string()).or_insert(0) += c;
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `bin,analytic_mass,empirical_mass`, one line per delay.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin,analytic_mass,empirical_mass\n");
        for (t, (a, e)) in self.analytic.iter().zip(self.empirical_mass()).enumerate() {
            let _ = writeln!(out, "{t},{a},{e}");
        }
        out
    }
}

struct Tally {
    delivered: Vec<u64>,
    undelivered: u64,
    paths: BTreeMap<String, u64>,
}

impl Tally {
    fn zero(h: usize) -> Self {
        Self {
            delivered: vec![0; h],
            undelivered: 0,
            paths: BTreeMap::new(),
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        for (a, b) in self.delivered.iter_mut().zip(&other.delivered) {
            *a += b;
        }
        self.undelivered += other.undelivered;
        for (k, v) in other.paths {
            *self.paths.entry(k).or_insert(0) += v;
        }
        self
    }
}

fn run<F>(net: &Network, send_bin: usize, opts: &SimulationOptions, sample: F) -> Result<Tally>
where
    F: Fn(&ContactRealization<'_>) -> (Option<usize>, Option<String>) + Sync,
{
    if opts.samples == 0 {
        return Err(Error::InvalidSimulation("sample count must be positive".into()));
    }
    net.grid().ensure_bin(send_bin)?;
    let h = net.horizon();
    let body = || {
        (0..opts.samples)
            .into_par_iter()
            .fold(
                || Tally::zero(h),
                |mut tally, i| {
                    let real = ContactRealization::new(net, opts.seed, i);
                    let (arrival, path) = sample(&real);
                    match arrival {
                        Some(t) => tally.delivered[t - send_bin] += 1,
                        None => tally.undelivered += 1,
                    }
                    if let Some(p) = path {
                        *tally.paths.entry(p).or_insert(0) += 1;
                    }
                    tally
                },
            )
            .reduce(|| Tally::zero(h), Tally::merge)
    };
    let tally = match opts.threads {
        Some(0) => return Err(Error::InvalidSimulation("thread count must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidSimulation(e.to_string()))?
            .install(body),
        None => body(),
    };
    Ok(tally)
}

fn follow_table(
    real: &ContactRealization<'_>,
    state: &RoutingState,
    source: usize,
    send: usize,
    hop_limit: usize,
    wait: WaitPolicy,
    mut visit: impl FnMut(usize),
) -> Option<usize> {
    let h = state.horizon();
    let (mut at, mut t) = (source, send);
    visit(at);
    for _ in 0..hop_limit {
        if at == state.dest() {
            return Some(t);
        }
        let (hop, when) = match wait {
            WaitPolicy::Commit => {
                let hop = state.next_hop(at)[t]?;
                (hop, real.next_contact(at, hop, t)?)
            }
            WaitPolicy::Reconsult => (t..h).find_map(|u| {
                let hop = state.next_hop(at)[u]?;
                real.contact(at, hop, u).then_some((hop, u))
            })?,
        };
        at = hop;
        t = when;
        visit(at);
    }
    (at == state.dest()).then_some(t)
}

fn arrival(c: &Compiled, real: &ContactRealization<'_>, t: usize) -> Option<usize> {
    match &c.kind {
        CompiledKind::Hop => real.next_contact(c.source, c.dest, t),
        CompiledKind::Fwd(parts) => parts.iter().try_fold(t, |t, p| arrival(p, real, t)),
        CompiledKind::Dup(parts) => parts.iter().filter_map(|p| arrival(p, real, t)).min(),
        CompiledKind::Sched {
            first,
            second,
            choices,
        } => match choices[t] {
            Choice::First => arrival(first, real, t),
            Choice::Second => arrival(second, real, t),
        },
        CompiledKind::Routed { state, hop_limit } => {
            follow_table(real, state, c.source, t, *hop_limit, WaitPolicy::Commit, |_| {})
        }
    }
}

/// Samples the arrival time of the scheme and compares it with its analytic
/// distribution.
pub fn simulate_scheme(
    net: &Network,
    scheme: &DeliveryScheme,
    send_bin: usize,
    opts: &SimulationOptions,
) -> Result<SimulationReport> {
    let compiled = scheme.compile(net)?;
    let tally = run(net, send_bin, opts, |real| {
        (arrival(&compiled, real, send_bin), None)
    })?;
    Ok(SimulationReport {
        source: scheme.source.clone(),
        dest: scheme.dest.clone(),
        send_bin,
        samples: opts.samples,
        seed: opts.seed,
        delivered: tally.delivered,
        undelivered: tally.undelivered,
        analytic: compiled.distribution.row(send_bin).to_vec(),
        paths: tally.paths,
    })
}

/// Follows the routing table in every sample and records the node sequence.
/// `analytic` is the row the sampled distribution is compared with, usually
/// the source's best distribution.
pub fn simulate_routed(
    net: &Network,
    state: &RoutingState,
    source: &str,
    send_bin: usize,
    hop_limit: usize,
    opts: &SimulationOptions,
) -> Result<SimulationReport> {
    let s = state.index_of(source)?;
    let tally = run(net, send_bin, opts, |real| {
        let mut path = Vec::new();
        let arrival = follow_table(real, state, s, send_bin, hop_limit, opts.wait, |n| {
            path.push(state.node(n).as_str())
        });
        (arrival, Some(path.join("/")))
    })?;
    Ok(SimulationReport {
        source: state.node(s).clone(),
        dest: state.node(state.dest()).clone(),
        send_bin,
        samples: opts.samples,
        seed: opts.seed,
        delivered: tally.delivered,
        undelivered: tally.undelivered,
        analytic: state.best(s).row(send_bin).to_vec(),
        paths: tally.paths,
    })
}
