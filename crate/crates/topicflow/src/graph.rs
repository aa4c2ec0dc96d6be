//! Social graph storage: users with attribute records plus undirected friend
//! edges, attribute-filtered subgraphs, and connected components.
//!
//! The graph is immutable once loaded, so it can be shared read-only across
//! workers. Friend edges are mutual by construction: when the input edge list
//! is declared directed (follow links), a pair is kept only if both directions
//! are present; undirected input treats every pair as a friendship.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::attributes::{ContentRole, Continent, Role};
use crate::error::{Error, Result};

/// Opaque user identifier. Ordering is lexicographic and used wherever a
/// deterministic tie-break is required.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserId(pub String);

impl UserId {
    pub fn new(id: impl Into<String>) -> Self {
        UserId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for UserId {
    fn from(s: &str) -> Self {
        UserId(s.to_owned())
    }
}

/// Per-user record. Attribute fields are optional: a user missing an
/// attribute is excluded from that attribute's subgraphs rather than being
/// assigned a default.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRecord {
    pub id: UserId,
    pub timezone: Option<String>,
    pub location: Option<Continent>,
    pub info_role: Option<Role>,
    pub content_role: Option<ContentRole>,
    pub activity_cluster: Option<u32>,
}

impl UserRecord {
    pub fn new(id: impl Into<String>) -> Self {
        UserRecord {
            id: UserId::new(id),
            ..Default::default()
        }
    }
}

/// The four attributes a subgraph can be filtered on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    Location,
    InfoRole,
    ContentRole,
    ActivityCluster,
}

impl Attribute {
    pub const ALL: [Attribute; 4] = [
        Attribute::Location,
        Attribute::InfoRole,
        Attribute::ContentRole,
        Attribute::ActivityCluster,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Attribute::Location => "location",
            Attribute::InfoRole => "info_role",
            Attribute::ContentRole => "content_role",
            Attribute::ActivityCluster => "activity_cluster",
        }
    }

    pub fn parse(name: &str) -> Result<Attribute> {
        match name {
            "location" => Ok(Attribute::Location),
            "info_role" => Ok(Attribute::InfoRole),
            "content_role" => Ok(Attribute::ContentRole),
            "activity_cluster" => Ok(Attribute::ActivityCluster),
            other => Err(Error::Config(format!(
                "unknown attribute {other:?}; expected one of location, info_role, content_role, activity_cluster"
            ))),
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How the raw edge list is to be interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeMode {
    /// Each input pair is already an undirected friendship.
    #[default]
    Friends,
    /// Input pairs are one-way follow links; only mutual pairs become
    /// friendships, the rest are dropped with a warning.
    Follows,
}

/// Undirected social graph over user records.
#[derive(Debug, Clone, Default)]
pub struct SocialGraph {
    users: BTreeMap<UserId, UserRecord>,
    adjacency: BTreeMap<UserId, BTreeSet<UserId>>,
    edge_count: usize,
}

impl SocialGraph {
    /// Build a graph from an edge list and user records.
    ///
    /// Self-loops and (in `Follows` mode) unreciprocated links are dropped,
    /// each with a warning pushed onto `warnings`. Duplicate user ids and
    /// edges naming unknown users are hard errors.
    pub fn load(
        edges: &[(UserId, UserId)],
        user_records: Vec<UserRecord>,
        mode: EdgeMode,
        warnings: &mut Vec<String>,
    ) -> Result<SocialGraph> {
        let mut users = BTreeMap::new();
        for rec in user_records {
            if rec.id.as_str().is_empty() {
                return Err(Error::Validation("empty user id".into()));
            }
            let id = rec.id.clone();
            if users.insert(id.clone(), rec).is_some() {
                return Err(Error::Validation(format!("duplicate user id {:?}", id.0)));
            }
        }
        let mut graph = SocialGraph {
            adjacency: users.keys().map(|u| (u.clone(), BTreeSet::new())).collect(),
            users,
            edge_count: 0,
        };

        let mut accepted: BTreeSet<(UserId, UserId)> = BTreeSet::new();
        let mut directed_seen: BTreeSet<(UserId, UserId)> = BTreeSet::new();
        for (src, dst) in edges {
            if !graph.users.contains_key(src) {
                return Err(Error::Validation(format!(
                    "edge references unknown user {:?}",
                    src.0
                )));
            }
            if !graph.users.contains_key(dst) {
                return Err(Error::Validation(format!(
                    "edge references unknown user {:?}",
                    dst.0
                )));
            }
            if src == dst {
                warnings.push(format!("dropped self-loop on user {:?}", src.0));
                continue;
            }
            match mode {
                EdgeMode::Friends => {
                    accepted.insert(ordered(src.clone(), dst.clone()));
                }
                EdgeMode::Follows => {
                    directed_seen.insert((src.clone(), dst.clone()));
                }
            }
        }
        if mode == EdgeMode::Follows {
            for (src, dst) in &directed_seen {
                if directed_seen.contains(&(dst.clone(), src.clone())) {
                    accepted.insert(ordered(src.clone(), dst.clone()));
                } else {
                    warnings.push(format!(
                        "dropped one-way follow {} -> {} (no reverse link)",
                        src, dst
                    ));
                }
            }
        }
        for (a, b) in accepted {
            graph.adjacency.get_mut(&a).unwrap().insert(b.clone());
            graph.adjacency.get_mut(&b).unwrap().insert(a);
            graph.edge_count += 1;
        }
        Ok(graph)
    }

    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn contains(&self, user: &UserId) -> bool {
        self.users.contains_key(user)
    }

    pub fn user(&self, id: &UserId) -> Option<&UserRecord> {
        self.users.get(id)
    }

    pub fn users(&self) -> impl Iterator<Item = &UserRecord> {
        self.users.values()
    }

    pub fn user_ids(&self) -> impl Iterator<Item = &UserId> {
        self.users.keys()
    }

    /// Neighbors of `user` in deterministic (sorted) order. Unknown users
    /// have no neighbors.
    pub fn friends(&self, user: &UserId) -> impl Iterator<Item = &UserId> {
        self.adjacency.get(user).into_iter().flatten()
    }

    pub fn degree(&self, user: &UserId) -> usize {
        self.adjacency.get(user).map_or(0, |s| s.len())
    }

    pub fn are_friends(&self, a: &UserId, b: &UserId) -> bool {
        self.adjacency.get(a).is_some_and(|s| s.contains(b))
    }

    /// All undirected edges as ordered (min, max) pairs.
    pub fn edges(&self) -> Vec<(UserId, UserId)> {
        let mut out = Vec::with_capacity(self.edge_count);
        for (u, nbrs) in &self.adjacency {
            for v in nbrs {
                if u < v {
                    out.push((u.clone(), v.clone()));
                }
            }
        }
        out
    }

    /// The value a user carries for `attribute`, canonicalized to the string
    /// form used in reports, or None when the attribute is absent.
    pub fn attribute_value(&self, user: &UserId, attribute: Attribute) -> Option<String> {
        let rec = self.users.get(user)?;
        match attribute {
            Attribute::Location => rec.location.map(|c| c.name().to_owned()),
            Attribute::InfoRole => rec.info_role.map(|r| r.name().to_owned()),
            Attribute::ContentRole => rec.content_role.map(|r| r.name().to_owned()),
            Attribute::ActivityCluster => rec.activity_cluster.map(|c| c.to_string()),
        }
    }

    /// Distinct values present for `attribute`, sorted.
    pub fn attribute_values(&self, attribute: Attribute) -> Vec<String> {
        let mut vals: BTreeSet<String> = BTreeSet::new();
        for id in self.users.keys() {
            if let Some(v) = self.attribute_value(id, attribute) {
                vals.insert(v);
            }
        }
        vals.into_iter().collect()
    }

    /// Induced subgraph of users whose `attribute` equals `value`. An edge
    /// survives iff both endpoints are retained. Users lacking the attribute
    /// are excluded.
    pub fn attribute_subgraph(&self, attribute: Attribute, value: &str) -> SocialGraph {
        let keep: BTreeSet<UserId> = self
            .users
            .keys()
            .filter(|u| self.attribute_value(u, attribute).as_deref() == Some(value))
            .cloned()
            .collect();
        self.induced(&keep)
    }

    fn induced(&self, keep: &BTreeSet<UserId>) -> SocialGraph {
        let users: BTreeMap<UserId, UserRecord> = keep
            .iter()
            .filter_map(|u| self.users.get(u).map(|r| (u.clone(), r.clone())))
            .collect();
        let mut edge_count = 0;
        let adjacency: BTreeMap<UserId, BTreeSet<UserId>> = users
            .keys()
            .map(|u| {
                let nbrs: BTreeSet<UserId> = self
                    .friends(u)
                    .filter(|v| users.contains_key(*v))
                    .cloned()
                    .collect();
                edge_count += nbrs.len();
                (u.clone(), nbrs)
            })
            .collect();
        SocialGraph {
            users,
            adjacency,
            edge_count: edge_count / 2,
        }
    }

    /// Number of connected components under undirected reachability.
    pub fn connected_component_count(&self) -> usize {
        let mut seen: BTreeSet<&UserId> = BTreeSet::new();
        let mut count = 0;
        for start in self.users.keys() {
            if seen.contains(start) {
                continue;
            }
            count += 1;
            let mut stack = vec![start];
            seen.insert(start);
            while let Some(u) = stack.pop() {
                for v in self.friends(u) {
                    if seen.insert(v) {
                        stack.push(v);
                    }
                }
            }
        }
        count
    }
}

fn ordered(a: UserId, b: UserId) -> (UserId, UserId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}
