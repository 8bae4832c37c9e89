//! Delivery schemes: expressions over contacts and routing tables.
//!
//! JSON form, one key per node:
//!
//! ```json
//! {"dup": [
//!   {"fwd": [{"hop": ["s", "a"]}, {"hop": ["a", "d"]}]},
//!   {"routed": {"dest": "d", "nodes": ["s", "b", "d"]}}
//! ]}
//! ```
//!
//! `sched` takes exactly two operands, `fwd` chains left to right and every
//! operand of `dup` or `sched` must share the same endpoints.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::distribution::DeliveryDistribution;
use crate::error::{Error, Result};
use crate::forwarding::{routed_delivery, visit_expectations};
use crate::network::{Network, NodeId};
use crate::operators::{duplicate, forward, schedule, Choice};
use crate::routing::{bellman_ford, RouteOptions, RoutingState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expr {
    Hop(NodeId, NodeId),
    Fwd(Vec<Expr>),
    Dup(Vec<Expr>),
    Sched(Box<Expr>, Box<Expr>),
    Routed(Routed),
}

/// Follow the routing table computed for `dest`, optionally on a subset of
/// nodes and without some pairs. The source is taken from the context when
/// omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Routed {
    pub dest: NodeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<BTreeSet<NodeId>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exclude: Vec<(NodeId, NodeId)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hop_limit: Option<usize>,
}

impl Routed {
    pub fn to(dest: NodeId) -> Self {
        Self {
            dest,
            source: None,
            nodes: None,
            exclude: Vec::new(),
            hop_limit: None,
        }
    }
}

impl Expr {
    pub fn hop(a: &str, b: &str) -> Result<Self> {
        Ok(Expr::Hop(NodeId::new(a)?, NodeId::new(b)?))
    }

    /// A chain of hops through the given labels.
    pub fn path(labels: &[&str]) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::InvalidScheme("a path needs at least two nodes".into()));
        }
        let hops = labels
            .windows(2)
            .map(|w| Expr::hop(w[0], w[1]))
            .collect::<Result<Vec<_>>>()?;
        Ok(if hops.len() == 1 {
            hops.into_iter().next().unwrap()
        } else {
            Expr::Fwd(hops)
        })
    }

    fn endpoints(&self, start: Option<&NodeId>) -> Result<(NodeId, NodeId)> {
        let mismatch = |expected: &NodeId, got: &NodeId| {
            Error::InvalidScheme(format!("expected a part starting at {expected}, found {got}"))
        };
        match self {
            Expr::Hop(a, b) => {
                if a == b {
                    return Err(Error::InvalidScheme(format!("hop from {a} to itself")));
                }
                if let Some(s) = start {
                    if s != a {
                        return Err(mismatch(s, a));
                    }
                }
                Ok((a.clone(), b.clone()))
            }
            Expr::Fwd(parts) => {
                let (first, rest) = parts
                    .split_first()
                    .ok_or_else(|| Error::InvalidScheme("empty fwd".into()))?;
                let (source, mut end) = first.endpoints(start)?;
                for p in rest {
                    end = p.endpoints(Some(&end))?.1;
                }
                Ok((source, end))
            }
            Expr::Dup(parts) => {
                let (first, rest) = parts
                    .split_first()
                    .ok_or_else(|| Error::InvalidScheme("empty dup".into()))?;
                let ends = first.endpoints(start)?;
                for p in rest {
                    same_ends(&ends, &p.endpoints(Some(&ends.0))?)?;
                }
                Ok(ends)
            }
            Expr::Sched(a, b) => {
                let ends = a.endpoints(start)?;
                same_ends(&ends, &b.endpoints(Some(&ends.0))?)?;
                Ok(ends)
            }
            Expr::Routed(r) => {
                let source = match (&r.source, start) {
                    (Some(s), Some(ctx)) if s != ctx => return Err(mismatch(ctx, s)),
                    (Some(s), _) => s.clone(),
                    (None, Some(ctx)) => ctx.clone(),
                    (None, None) => {
                        return Err(Error::InvalidScheme(
                            "routed part without a known source".into(),
                        ))
                    }
                };
                Ok((source, r.dest.clone()))
            }
        }
    }
}

fn same_ends(a: &(NodeId, NodeId), b: &(NodeId, NodeId)) -> Result<()> {
    if a != b {
        return Err(Error::InvalidScheme(format!(
            "alternatives disagree on endpoints: {}->{} vs {}->{}",
            a.0, a.1, b.0, b.1
        )));
    }
    Ok(())
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |f: &mut fmt::Formatter<'_>, parts: &[Expr], op: &str| {
            write!(f, "(")?;
            for (i, p) in parts.iter().enumerate() {
                if i > 0 {
                    write!(f, " {op} ")?;
                }
                write!(f, "{p}")?;
            }
            write!(f, ")")
        };
        match self {
            Expr::Hop(a, b) => write!(f, "{a}>{b}"),
            Expr::Fwd(p) => join(f, p, "*"),
            Expr::Dup(p) => join(f, p, "+"),
            Expr::Sched(a, b) => write!(f, "({a} / {b})"),
            Expr::Routed(r) => match &r.source {
                Some(s) => write!(f, "route({s}>{})", r.dest),
                None => write!(f, "route({})", r.dest),
            },
        }
    }
}

/// An expression together with its endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliveryScheme {
    pub source: NodeId,
    pub dest: NodeId,
    pub expr: Expr,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SchemeFile {
    Full(DeliveryScheme),
    Bare(Expr),
}

impl DeliveryScheme {
    /// Infers the endpoints from the expression.
    pub fn new(expr: Expr) -> Result<Self> {
        let (source, dest) = expr.endpoints(None)?;
        Ok(Self { source, dest, expr })
    }

    pub fn with_endpoints(source: NodeId, dest: NodeId, expr: Expr) -> Result<Self> {
        let ends = expr.endpoints(Some(&source))?;
        same_ends(&(source.clone(), dest.clone()), &ends)?;
        Ok(Self { source, dest, expr })
    }

    /// Accepts either `{"source", "dest", "expr"}` or a bare expression.
    pub fn from_json_str(text: &str) -> Result<Self> {
        match serde_json::from_str::<SchemeFile>(text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })? {
            SchemeFile::Full(s) => Self::with_endpoints(s.source, s.dest, s.expr),
            SchemeFile::Bare(e) => Self::new(e),
        }
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn compile(&self, net: &Network) -> Result<Compiled> {
        let source = net.index_of_id(&self.source)?;
        compile(&self.expr, net, Some(source))
    }

    pub fn evaluate(&self, net: &Network) -> Result<DeliveryDistribution> {
        Ok(self.compile(net)?.distribution)
    }

    /// Hops whose pair has no contact profile; they deliver nothing.
    pub fn unprofiled_hops(&self, net: &Network) -> Result<Vec<(NodeId, NodeId)>> {
        let mut out = Vec::new();
        let mut stack = vec![&self.expr];
        while let Some(e) = stack.pop() {
            match e {
                Expr::Hop(a, b) => {
                    if net.profile(net.index_of_id(a)?, net.index_of_id(b)?).is_none() {
                        out.push((a.clone(), b.clone()));
                    }
                }
                Expr::Fwd(p) | Expr::Dup(p) => stack.extend(p),
                Expr::Sched(a, b) => stack.extend([a.as_ref(), b.as_ref()]),
                Expr::Routed(_) => {}
            }
        }
        Ok(out)
    }

    /// Nodes the bundle can reach under this scheme, by label.
    pub fn involved_nodes(&self, net: &Network) -> Result<BTreeSet<NodeId>> {
        let compiled = self.compile(net)?;
        Ok(compiled
            .involved(net)?
            .into_iter()
            .map(|i| net.node(i).clone())
            .collect())
    }
}

impl fmt::Display for DeliveryScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.expr)
    }
}

/// True when the two schemes connect the same endpoints and share no other
/// node, which is what duplicating them with independent copies assumes.
pub fn validate_disjoint(net: &Network, a: &DeliveryScheme, b: &DeliveryScheme) -> Result<bool> {
    if a.source != b.source || a.dest != b.dest {
        return Err(Error::InvalidScheme("schemes have different endpoints".into()));
    }
    let ia = a.involved_nodes(net)?;
    let ib = b.involved_nodes(net)?;
    Ok(ia
        .intersection(&ib)
        .all(|n| *n == a.source || *n == a.dest))
}

/// An expression resolved against a network, with every intermediate
/// distribution, scheduling choice and routing table kept for inspection and
/// simulation.
#[derive(Debug, Clone)]
pub struct Compiled {
    pub source: usize,
    pub dest: usize,
    pub distribution: DeliveryDistribution,
    pub kind: CompiledKind,
}

#[derive(Debug, Clone)]
pub enum CompiledKind {
    Hop,
    Fwd(Vec<Compiled>),
    Dup(Vec<Compiled>),
    Sched {
        first: Box<Compiled>,
        second: Box<Compiled>,
        choices: Vec<Choice>,
    },
    Routed {
        state: Box<RoutingState>,
        hop_limit: usize,
    },
}

impl Compiled {
    /// Node indices with positive probability of holding the bundle at some
    /// send bin.
    pub fn involved(&self, net: &Network) -> Result<BTreeSet<usize>> {
        let mut out = BTreeSet::from([self.source, self.dest]);
        match &self.kind {
            CompiledKind::Hop => {}
            CompiledKind::Fwd(parts) | CompiledKind::Dup(parts) => {
                for p in parts {
                    out.extend(p.involved(net)?);
                }
            }
            CompiledKind::Sched { first, second, .. } => {
                out.extend(first.involved(net)?);
                out.extend(second.involved(net)?);
            }
            CompiledKind::Routed { state, hop_limit } => {
                for send in 0..net.horizon() {
                    let visits = visit_expectations(net, state, self.source, send, *hop_limit)?;
                    out.extend(visits.iter().enumerate().filter(|(_, &v)| v > 0.0).map(|(i, _)| i));
                }
            }
        }
        Ok(out)
    }
}

fn compile(expr: &Expr, net: &Network, start: Option<usize>) -> Result<Compiled> {
    let start_id = start.map(|s| net.node(s).clone());
    let (source, dest) = expr.endpoints(start_id.as_ref())?;
    let (source, dest) = (net.index_of_id(&source)?, net.index_of_id(&dest)?);
    let (distribution, kind) = match expr {
        Expr::Hop(..) => (net.delivery(source, dest), CompiledKind::Hop),
        Expr::Fwd(parts) => {
            let mut at = source;
            let mut compiled = Vec::with_capacity(parts.len());
            for p in parts {
                let c = compile(p, net, Some(at))?;
                at = c.dest;
                compiled.push(c);
            }
            let mut acc = compiled[0].distribution.clone();
            for c in &compiled[1..] {
                acc = forward(&acc, &c.distribution)?;
            }
            (acc, CompiledKind::Fwd(compiled))
        }
        Expr::Dup(parts) => {
            let compiled = parts
                .iter()
                .map(|p| compile(p, net, Some(source)))
                .collect::<Result<Vec<_>>>()?;
            let mut acc = compiled[0].distribution.clone();
            for c in &compiled[1..] {
                acc = duplicate(&acc, &c.distribution)?;
            }
            (acc, CompiledKind::Dup(compiled))
        }
        Expr::Sched(a, b) => {
            let first = compile(a, net, Some(source))?;
            let second = compile(b, net, Some(source))?;
            let s = schedule(&first.distribution, &second.distribution)?;
            (
                s.distribution,
                CompiledKind::Sched {
                    first: Box::new(first),
                    second: Box::new(second),
                    choices: s.choices,
                },
            )
        }
        Expr::Routed(r) => {
            if let Some(nodes) = &r.nodes {
                if !nodes.contains(net.node(source)) {
                    return Err(Error::InvalidScheme(format!(
                        "routed node set does not contain the source {}",
                        net.node(source)
                    )));
                }
            }
            let opts = RouteOptions {
                nodes: r.nodes.clone(),
                excluded_pairs: r.exclude.clone(),
                ..Default::default()
            };
            let state = bellman_ford(net, r.dest.as_str(), &opts)?;
            let hop_limit = r.hop_limit.unwrap_or(net.len());
            let d = routed_delivery(net, &state, source, hop_limit)?;
            (
                d,
                CompiledKind::Routed {
                    state: Box::new(state),
                    hop_limit,
                },
            )
        }
    };
    Ok(Compiled {
        source,
        dest,
        distribution,
        kind,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::{TimeGrid, EPS_NUM};

    fn net() -> Network {
        let g = TimeGrid::new(4).unwrap();
        let mut net = Network::with_labels(g, &["a", "b", "d", "s"]).unwrap();
        net.add_pair("s", "a", None, vec![0.8, 0.0, 0.0, 0.0]).unwrap();
        net.add_pair("a", "d", None, vec![0.0, 0.75, 0.0, 0.0]).unwrap();
        net.add_pair("s", "b", None, vec![0.5, 0.0, 0.0, 0.0]).unwrap();
        net.add_pair("b", "d", None, vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        net
    }

    #[test]
    fn json_round_trip_and_bare_expressions() {
        let text = r#"{"dup": [{"fwd": [{"hop": ["s","a"]}, {"hop": ["a","d"]}]},
                              {"routed": {"dest": "d", "nodes": ["s","b","d"]}}]}"#;
        let s = DeliveryScheme::from_json_str(text).unwrap();
        assert_eq!(s.source.as_str(), "s");
        assert_eq!(s.dest.as_str(), "d");
        let back = DeliveryScheme::from_json_str(&s.to_json_string().unwrap()).unwrap();
        assert_eq!(back, s);
        assert_eq!(s.to_string(), "((s>a * a>d) + route(d))");
    }

    #[test]
    fn malformed_schemes() {
        for text in [
            r#"{"fwd": []}"#,
            r#"{"fwd": [{"hop": ["s","a"]}, {"hop": ["b","d"]}]}"#,
            r#"{"dup": [{"hop": ["s","a"]}, {"hop": ["s","b"]}]}"#,
            r#"{"hop": ["s","s"]}"#,
            r#"{"routed": {"dest": "d"}}"#,
        ] {
            assert!(
                matches!(DeliveryScheme::from_json_str(text), Err(Error::InvalidScheme(_))),
                "{text}"
            );
        }
        assert!(matches!(
            DeliveryScheme::from_json_str(r#"{"hop": ["s"]}"#),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn evaluation_of_parallel_paths() {
        let net = net();
        let p1 = DeliveryScheme::new(Expr::path(&["s", "a", "d"]).unwrap()).unwrap();
        let p2 = DeliveryScheme::new(Expr::path(&["s", "b", "d"]).unwrap()).unwrap();
        let both = DeliveryScheme::new(Expr::Dup(vec![p1.expr.clone(), p2.expr.clone()])).unwrap();
        let d = both.evaluate(&net).unwrap();
        assert!((d.get(0, 1) - 0.8).abs() < EPS_NUM);
        assert!(validate_disjoint(&net, &p1, &p2).unwrap());
        assert!(!validate_disjoint(&net, &p2, &p2).unwrap());
    }

    #[test]
    fn routed_leaf_uses_context_source() {
        let net = net();
        let expr = Expr::Fwd(vec![
            Expr::hop("s", "b").unwrap(),
            Expr::Routed(Routed::to(NodeId::new("d").unwrap())),
        ]);
        let s = DeliveryScheme::new(expr).unwrap();
        let d = s.evaluate(&net).unwrap();
        assert!((d.get(0, 1) - 0.5).abs() < EPS_NUM);
        let involved = s.involved_nodes(&net).unwrap();
        assert!(involved.contains("b"));
        assert!(!involved.contains("a"));
    }

    #[test]
    fn schedule_keeps_choices() {
        let net = net();
        let expr = Expr::Sched(
            Box::new(Expr::path(&["s", "b", "d"]).unwrap()),
            Box::new(Expr::path(&["s", "a", "d"]).unwrap()),
        );
        let c = DeliveryScheme::new(expr).unwrap().compile(&net).unwrap();
        let CompiledKind::Sched { choices, .. } = &c.kind else {
            panic!("expected sched");
        };
        assert_eq!(choices[0], Choice::Second);
    }

    #[test]
    fn unprofiled_hops_are_reported() {
        let net = net();
        let s = DeliveryScheme::new(Expr::path(&["s", "d"]).unwrap()).unwrap();
        assert_eq!(s.unprofiled_hops(&net).unwrap().len(), 1);
        assert!(s.evaluate(&net).unwrap().is_bottom());
    }
}
