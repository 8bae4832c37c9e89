//! Contact profiles, networks and the JSON network file.
//!
//! A contact profile gives, for every time bin, the probability that a node
//! pair meets at least once during that bin. Bins are independent. Pairs
//! without a profile never meet.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distribution::{DeliveryDistribution, FirstContactDistribution, TimeGrid};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        if label.trim().is_empty() {
            return Err(Error::InvalidNetwork("node labels must be non-empty".into()));
        }
        Ok(Self(label))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::borrow::Borrow<str> for NodeId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl AsRef<str> for NodeId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// Per-bin contact probabilities for one node pair, optionally periodic.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactProfile {
    grid: TimeGrid,
    period: Option<usize>,
    p: Vec<f64>,
    unrolled: Vec<f64>,
}

impl ContactProfile {
    /// `p` has one entry per period bin when `period` is set, else one per
    /// horizon bin.
    pub fn new(grid: TimeGrid, period: Option<usize>, p: Vec<f64>) -> Result<Self> {
        let h = grid.horizon();
        let expected = match period {
            Some(0) => return Err(profile_error("period must be positive")),
            Some(l) if l > h => {
                return Err(profile_error(format!(
                    "period {l} exceeds the horizon of {h} bins"
                )))
            }
            Some(l) => l,
            None => h,
        };
        if p.len() != expected {
            return Err(profile_error(format!(
                "expected {expected} probabilities, got {}",
                p.len()
            )));
        }
        if let Some((i, v)) = p
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && (0.0..=1.0).contains(*v)))
        {
            return Err(profile_error(format!("p[{i}] = {v} is not a probability")));
        }
        let unrolled = (0..h).map(|t| p[t % expected]).collect();
        Ok(Self {
            grid,
            period,
            p,
            unrolled,
        })
    }

    /// The same probability in every bin.
    pub fn constant(grid: TimeGrid, probability: f64) -> Result<Self> {
        Self::new(grid, Some(1), vec![probability])
    }

    /// Never meet.
    pub fn null(grid: TimeGrid) -> Self {
        Self::constant(grid, 0.0).expect("zero is a probability")
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn period(&self) -> Option<usize> {
        self.period
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    /// One probability per horizon bin.
    pub fn unrolled(&self) -> &[f64] {
        &self.unrolled
    }

    /// Contact probability in bin `t`; zero past the horizon.
    pub fn at(&self, t: usize) -> f64 {
        self.unrolled.get(t).copied().unwrap_or(0.0)
    }

    /// `mass[t] = C(t) · Π_{i<t} (1 − C(i))`.
    pub fn first_contact(&self) -> FirstContactDistribution {
        FirstContactDistribution::from_parts(self.grid, self.shifted_first_contact(0))
    }

    /// Row `T` is the first-contact distribution of the profile seen from bin `T`.
    pub fn delivery(&self) -> DeliveryDistribution {
        let h = self.grid.horizon();
        let data = (0..h).flat_map(|s| self.shifted_first_contact(s)).collect();
        DeliveryDistribution::from_raw(self.grid, data)
    }

    fn shifted_first_contact(&self, send: usize) -> Vec<f64> {
        let h = self.grid.horizon();
        let mut out = vec![0.0; h];
        let mut miss = 1.0;
        for (t, slot) in out.iter_mut().enumerate() {
            let c = self.at(send + t);
            *slot = c * miss;
            miss *= 1.0 - c;
        }
        out
    }
}

fn profile_error(reason: impl Into<String>) -> Error {
    Error::InvalidProfile {
        pair: "?".into(),
        reason: reason.into(),
    }
}

fn with_pair(err: Error, a: &str, b: &str) -> Error {
    match err {
        Error::InvalidProfile { reason, .. } => Error::InvalidProfile {
            pair: format!("{a}-{b}"),
            reason,
        },
        other => other,
    }
}

/// Nodes and the contact profiles between them, all on one time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    grid: TimeGrid,
    period: Option<usize>,
    nodes: Vec<NodeId>,
    index: HashMap<NodeId, usize>,
    profiles: BTreeMap<(usize, usize), ContactProfile>,
}

impl Network {
    pub fn new(grid: TimeGrid, nodes: Vec<NodeId>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidNetwork("node list is empty".into()));
        }
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.clone(), i).is_some() {
                return Err(Error::InvalidNetwork(format!("duplicate node `{n}`")));
            }
        }
        Ok(Self {
            grid,
            period: None,
            nodes,
            index,
            profiles: BTreeMap::new(),
        })
    }

    /// Convenience constructor from plain labels.
    pub fn with_labels<S: AsRef<str>>(grid: TimeGrid, labels: &[S]) -> Result<Self> {
        let nodes = labels
            .iter()
            .map(|l| NodeId::new(l.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, nodes)
    }

    /// Default period used by the network file for profiles that do not set one.
    pub fn set_default_period(&mut self, period: Option<usize>) {
        self.period = period;
    }

    pub fn default_period(&self) -> Option<usize> {
        self.period
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn horizon(&self) -> usize {
        self.grid.horizon()
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, index: usize) -> &NodeId {
        &self.nodes[index]
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.index
            .get(label)
            .copied()
            .ok_or_else(|| Error::UnknownNode(label.to_string()))
    }

    pub fn index_of_id(&self, id: &NodeId) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownNode(id.to_string()))
    }

    pub fn add_profile(&mut self, a: &str, b: &str, profile: ContactProfile) -> Result<()> {
        let (ia, ib) = (self.index_of(a)?, self.index_of(b)?);
        if ia == ib {
            return Err(Error::InvalidNetwork(format!("self-pair profile for `{a}`")));
        }
        self.grid.ensure_same(&profile.grid())?;
        let key = ordered(ia, ib);
        if self.profiles.contains_key(&key) {
            return Err(Error::InvalidNetwork(format!("duplicate profile for pair {a}-{b}")));
        }
        self.profiles.insert(key, profile);
        Ok(())
    }

    /// Adds a profile from raw probabilities, validating them.
    pub fn add_pair(&mut self, a: &str, b: &str, period: Option<usize>, p: Vec<f64>) -> Result<()> {
        let profile = ContactProfile::new(self.grid, period, p).map_err(|e| with_pair(e, a, b))?;
        self.add_profile(a, b, profile)
    }

    pub fn profile(&self, a: usize, b: usize) -> Option<&ContactProfile> {
        self.profiles.get(&ordered(a, b))
    }

    /// Profiled pairs by index, each with `a < b`, in ascending order.
    pub fn pairs(&self) -> impl Iterator<Item = ((usize, usize), &ContactProfile)> {
        self.profiles.iter().map(|(k, v)| (*k, v))
    }

    /// Position of the pair in [`Network::pairs`].
    pub fn pair_index(&self, a: usize, b: usize) -> Option<usize> {
        let key = ordered(a, b);
        self.profiles.keys().position(|k| *k == key)
    }

    pub fn pair_count(&self) -> usize {
        self.profiles.len()
    }

    pub fn first_contact(&self, a: usize, b: usize) -> FirstContactDistribution {
        match self.profile(a, b) {
            Some(p) => p.first_contact(),
            None => FirstContactDistribution::bottom(self.grid),
        }
    }

    /// Direct delivery distribution; bottom for unprofiled pairs.
    pub fn delivery(&self, a: usize, b: usize) -> DeliveryDistribution {
        match self.profile(a, b) {
            Some(p) => p.delivery(),
            None => DeliveryDistribution::bottom(self.grid),
        }
    }

    pub fn delivery_by_label(&self, a: &str, b: &str) -> Result<DeliveryDistribution> {
        Ok(self.delivery(self.index_of(a)?, self.index_of(b)?))
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: NetworkFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        file.into_network()
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&NetworkFile::from_network(self))?)
    }
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

pub fn load_network(path: impl AsRef<Path>) -> Result<Network> {
    Network::from_json_str(&std::fs::read_to_string(path)?)
}

pub fn save_network(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    let mut text = net.to_json_string()?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    horizon: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    step_duration_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    period: Option<usize>,
    nodes: Vec<String>,
    #[serde(default)]
    profiles: Vec<ProfileEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileEntry {
    a: String,
    b: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    period: Option<usize>,
    p: Vec<f64>,
}

impl NetworkFile {
    fn into_network(self) -> Result<Network> {
        let grid = match self.step_duration_s {
            Some(s) => TimeGrid::with_step(self.horizon, s)?,
            None => TimeGrid::new(self.horizon)?,
        };
        let nodes = self
            .nodes
            .into_iter()
            .map(NodeId::new)
            .collect::<Result<Vec<_>>>()?;
        let mut net = Network::new(grid, nodes)?;
        net.set_default_period(self.period);
        for entry in self.profiles {
            net.index_of(&entry.a)?;
            net.index_of(&entry.b)?;
            net.add_pair(&entry.a, &entry.b, entry.period.or(self.period), entry.p)?;
        }
        Ok(net)
    }

    fn from_network(net: &Network) -> Self {
        let profiles = net
            .pairs()
            .map(|((a, b), prof)| ProfileEntry {
                a: net.node(a).to_string(),
                b: net.node(b).to_string(),
                period: prof.period().filter(|_| prof.period() != net.period),
                p: prof.probabilities().to_vec(),
            })
            .collect();
        Self {
            horizon: net.horizon(),
            step_duration_s: net.grid.step_duration(),
            period: net.period,
            nodes: net.nodes.iter().map(|n| n.to_string()).collect(),
            profiles,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::EPS_NUM;

    fn grid(h: usize) -> TimeGrid {
        TimeGrid::new(h).unwrap()
    }

    #[test]
    fn constant_profile_is_geometric() {
        let g = grid(60);
        let k = 1.0 / 30.0;
        let d = ContactProfile::constant(g, k).unwrap().first_contact();
        assert!((d.mass()[0] - 1.0 / 30.0).abs() < EPS_NUM);
        for (t, &m) in d.mass().iter().enumerate() {
            assert!((m - k * (1.0 - k).powi(t as i32)).abs() < EPS_NUM);
        }
    }

    #[test]
    fn deterministic_and_null_profiles() {
        let g = grid(4);
        let d = ContactProfile::new(g, None, vec![0.0, 1.0, 0.0, 1.0])
            .unwrap()
            .first_contact();
        assert_eq!(d.mass(), &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(ContactProfile::null(g).first_contact(), FirstContactDistribution::bottom(g));
    }

    #[test]
    fn delivery_row_zero_matches_first_contact() {
        let g = grid(10);
        let prof = ContactProfile::new(g, Some(3), vec![0.2, 0.0, 0.7]).unwrap();
        let d = prof.delivery();
        assert_eq!(d.row(0), prof.first_contact().mass());
    }

    #[test]
    fn weekly_pair_from_wednesday() {
        // Thursday 1/4, Friday 1/2 on a weekly period, seen from Wednesday.
        let g = grid(7);
        let prof = ContactProfile::new(g, Some(7), vec![0.0, 0.0, 0.0, 0.25, 0.5, 0.0, 0.0]).unwrap();
        let d = prof.delivery();
        let expected = [0.0, 0.25, 0.375, 0.0, 0.0];
        for (t, e) in expected.iter().enumerate() {
            assert!((d.get(2, t) - e).abs() < EPS_NUM);
        }
        // Seen from Saturday nothing is left in the week.
        assert!(d.row(5).iter().all(|&m| m == 0.0));
    }

    #[test]
    fn delivery_ignores_bins_past_horizon() {
        let g = grid(3);
        let prof = ContactProfile::constant(g, 0.5).unwrap();
        let d = prof.delivery();
        assert_eq!(d.row(2), &[0.5, 0.0, 0.0]);
        assert_eq!(d.row(1), &[0.5, 0.25, 0.0]);
    }

    #[test]
    fn profile_validation() {
        let g = grid(4);
        assert!(ContactProfile::new(g, None, vec![0.0, 1.5, 0.0, 0.0]).is_err());
        assert!(ContactProfile::new(g, None, vec![0.0, 0.5]).is_err());
        assert!(ContactProfile::new(g, Some(0), vec![]).is_err());
        assert!(ContactProfile::new(g, Some(5), vec![0.0; 5]).is_err());
        assert!(ContactProfile::new(g, Some(2), vec![0.0, -0.1]).is_err());
    }

    #[test]
    fn network_validation() {
        let g = grid(4);
        assert!(Network::with_labels::<&str>(g, &[]).is_err());
        assert!(Network::with_labels(g, &["a", "a"]).is_err());
        assert!(Network::with_labels(g, &["a", ""]).is_err());
        let mut net = Network::with_labels(g, &["a", "b"]).unwrap();
        assert!(net.add_pair("a", "a", Some(1), vec![0.5]).is_err());
        assert!(net.add_pair("a", "z", Some(1), vec![0.5]).is_err());
        net.add_pair("a", "b", Some(1), vec![0.5]).unwrap();
        let err = net.add_pair("b", "a", Some(1), vec![0.5]).unwrap_err();
        assert!(err.to_string().contains("duplicate"));
        let err = net.add_pair("a", "b", Some(1), vec![2.0]).unwrap_err();
        assert!(err.to_string().contains("a-b"), "{err}");
    }

    #[test]
    fn absent_pair_is_bottom() {
        let net = Network::with_labels(grid(3), &["a", "b"]).unwrap();
        assert!(net.delivery(0, 1).is_bottom());
        assert!(net.profile(1, 0).is_none());
    }

    #[test]
    fn file_errors_carry_location() {
        let err = Network::from_json_str("{\n  \"horizon\": 3,\n  \"nodes\": [\"a\",]\n}").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn file_rejects_bad_content() {
        let bad_p = r#"{"horizon": 2, "nodes": ["a","b"], "profiles": [{"a":"a","b":"b","p":[0.5,1.5]}]}"#;
        let err = Network::from_json_str(bad_p).unwrap_err();
        assert!(err.to_string().contains("a-b"), "{err}");
        let empty = r#"{"horizon": 2, "nodes": []}"#;
        assert!(matches!(Network::from_json_str(empty), Err(Error::InvalidNetwork(_))));
        let unknown = r#"{"horizon": 2, "nodes": ["a"], "profiles": [{"a":"a","b":"q","p":[0.5,0.5]}]}"#;
        assert!(matches!(Network::from_json_str(unknown), Err(Error::UnknownNode(_))));
        let dup = r#"{"horizon": 1, "nodes": ["a","b"], "profiles": [
            {"a":"a","b":"b","p":[0.5]}, {"a":"b","b":"a","p":[0.5]}]}"#;
        assert!(Network::from_json_str(dup).is_err());
    }

    #[test]
    fn file_round_trip() {
        let text = r#"{"horizon": 6, "step_duration_s": 3600, "period": 3, "nodes": ["x","y","z"],
            "profiles": [{"a":"y","b":"x","p":[0.1,0.2,0.3]},
                         {"a":"x","b":"z","period":2,"p":[1.0,0.0]}]}"#;
        let net = Network::from_json_str(text).unwrap();
        let again = Network::from_json_str(&net.to_json_string().unwrap()).unwrap();
        assert_eq!(net, again);
        assert_eq!(net.profile(0, 2).unwrap().unrolled(), &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        assert_eq!(net.grid().step_duration(), Some(3600.0));
    }
}
