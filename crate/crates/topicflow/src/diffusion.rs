//! Reconstruction of topic-diffusion structure from a slotted action log.
//!
//! A collection is a forest of series: DAGs over (user, slot) nodes where an
//! edge v@(m−1) → u@m exists iff v and u are friends and both acted on the
//! topic in those slots. A node with no qualifying parent opens a new series;
//! a node whose parents belong to different series merges them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{SlotIndex, SlottedLog};
use crate::graph::{SocialGraph, UserId};

/// One (user, slot) occurrence. `parents`/`children` are indices into the
/// collection's node vector, always one slot away.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffusionNode {
    pub user: UserId,
    pub slot: SlotIndex,
    pub parents: Vec<usize>,
    pub children: Vec<usize>,
    /// Sorted on-topic action times within the slot window.
    pub action_times: Vec<i64>,
}

/// A weakly connected DAG of diffusion nodes, stored as indices into the
/// owning collection, sorted by (slot, user).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffusionSeries {
    pub nodes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionCollection {
    pub topic: String,
    pub horizon: SlotIndex,
    pub nodes: Vec<DiffusionNode>,
    pub series: Vec<DiffusionSeries>,
}

/// Build the diffusion collection for `topic` over slots 1..=`horizon`.
///
/// Only users present in `g` become nodes; a horizon beyond the populated
/// slots yields a truncation warning, not an error.
pub fn build_collection(
    g: &SocialGraph,
    log: &SlottedLog,
    topic: &str,
    horizon: SlotIndex,
    warnings: &mut Vec<String>,
) -> Result<DiffusionCollection> {
    if horizon < 1 {
        return Err(Error::Config("diffusion horizon must be at least 1".into()));
    }
    if horizon > log.max_slot() {
        warnings.push(format!(
            "horizon {horizon} exceeds populated slots ({}); later slots are empty",
            log.max_slot()
        ));
    }

    let mut nodes: Vec<DiffusionNode> = Vec::new();
    let mut index: BTreeMap<(SlotIndex, UserId), usize> = BTreeMap::new();

    for m in 1..=horizon {
        for (user, times) in log.actors_on_topic(m, topic) {
            if !g.contains(&user) {
                continue;
            }
            let mut parents: Vec<usize> = if m >= 2 {
                g.friends(&user)
                    .filter_map(|v| index.get(&(m - 1, v.clone())).copied())
                    .collect()
            } else {
                Vec::new()
            };
            parents.sort_unstable();
            index.insert((m, user.clone()), nodes.len());
            nodes.push(DiffusionNode {
                user,
                slot: m,
                parents,
                children: Vec::new(),
                action_times: times,
            });
        }
    }

    Ok(assemble(topic.to_owned(), horizon, nodes))
}

/// Wire children and group nodes into series from their parent links alone.
/// Shared by the builder and by collection extension so merge semantics
/// stay identical. Node order must be (slot, user)-sorted.
pub(crate) fn assemble(
    topic: String,
    horizon: SlotIndex,
    mut nodes: Vec<DiffusionNode>,
) -> DiffusionCollection {
    let mut uf = UnionFind::default();
    for i in 0..nodes.len() {
        nodes[i].children.clear();
        uf.push();
        let parents = nodes[i].parents.clone();
        for p in parents {
            uf.union(p, i);
            nodes[p].children.push(i);
        }
    }

    // Series in first-node order; node ids are already (slot, user)-sorted.
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..nodes.len() {
        groups.entry(uf.find(i)).or_default().push(i);
    }
    let mut series: Vec<DiffusionSeries> = groups
        .into_values()
        .map(|nodes| DiffusionSeries { nodes })
        .collect();
    series.sort_by_key(|s| s.nodes[0]);

    DiffusionCollection {
        topic,
        horizon,
        nodes,
        series,
    }
}

impl DiffusionCollection {
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Distinct users across the whole collection.
    pub fn distinct_users(&self) -> BTreeSet<&UserId> {
        self.nodes.iter().map(|n| &n.user).collect()
    }

    pub fn parentless_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.parents.is_empty()).count()
    }

    pub fn non_leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| !n.children.is_empty()).count()
    }

    /// Node indices of one series grouped by slot, ascending.
    pub fn series_by_slot(&self, series: &DiffusionSeries) -> BTreeMap<SlotIndex, Vec<usize>> {
        let mut out: BTreeMap<SlotIndex, Vec<usize>> = BTreeMap::new();
        for &i in &series.nodes {
            out.entry(self.nodes[i].slot).or_default().push(i);
        }
        out
    }

    /// Total slot count L = Σ over series of the number of distinct slots.
    pub fn total_slots(&self) -> usize {
        self.series
            .iter()
            .map(|s| self.series_by_slot(s).len())
            .sum()
    }

    /// Users appearing at a slot of the collection, with node occurrences.
    pub fn users_at_slot(&self, m: SlotIndex) -> BTreeSet<&UserId> {
        self.nodes
            .iter()
            .filter(|n| n.slot == m)
            .map(|n| &n.user)
            .collect()
    }

    /// Node occurrences per slot over 1..=horizon (for volume curves).
    pub fn slot_volumes(&self) -> Vec<usize> {
        let mut v = vec![0usize; self.horizon as usize];
        for n in &self.nodes {
            v[(n.slot - 1) as usize] += 1;
        }
        v
    }

    /// Structural sanity: parents sit exactly one slot earlier, are friends
    /// of the child in `g`, children mirror parents, and series form a
    /// node-disjoint cover.
    pub fn validate(&self, g: &SocialGraph) -> Result<()> {
        for (i, n) in self.nodes.iter().enumerate() {
            for &p in &n.parents {
                let parent = self
                    .nodes
                    .get(p)
                    .ok_or_else(|| Error::Consistency(format!("node {i}: bad parent index {p}")))?;
                if parent.slot + 1 != n.slot {
                    return Err(Error::Consistency(format!(
                        "node {i}: parent {p} not in previous slot"
                    )));
                }
                if !g.are_friends(&n.user, &parent.user) {
                    return Err(Error::Consistency(format!(
                        "node {i}: parent {p} is not a friend of {}",
                        n.user
                    )));
                }
                if !parent.children.contains(&i) {
                    return Err(Error::Consistency(format!(
                        "node {i}: parent {p} does not list it as a child"
                    )));
                }
            }
            if n.action_times.is_empty() {
                return Err(Error::Consistency(format!("node {i}: no action times")));
            }
        }
        let mut seen = BTreeSet::new();
        for s in &self.series {
            for &i in &s.nodes {
                if i >= self.nodes.len() {
                    return Err(Error::Consistency(format!("series holds bad index {i}")));
                }
                if !seen.insert(i) {
                    return Err(Error::Consistency(format!(
                        "node {i} appears in more than one series"
                    )));
                }
            }
        }
        if seen.len() != self.nodes.len() {
            return Err(Error::Consistency(
                "series do not cover every node".into(),
            ));
        }
        Ok(())
    }

    /// Deterministic text form (series, slot, user, parents) for diffing.
    pub fn text_report(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# topic={} horizon={}", self.topic, self.horizon);
        for (sid, s) in self.series.iter().enumerate() {
            for &i in &s.nodes {
                let n = &self.nodes[i];
                let parents = if n.parents.is_empty() {
                    "-".to_owned()
                } else {
                    n.parents
                        .iter()
                        .map(|&p| format!("{}@{}", self.nodes[p].user, self.nodes[p].slot))
                        .collect::<Vec<_>>()
                        .join(",")
                };
                let _ = writeln!(out, "{}\t{}\t{}\t{}", sid + 1, n.slot, n.user, parents);
            }
        }
        out
    }
}

#[derive(Debug, Default)]
struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn push(&mut self) {
        self.parent.push(self.parent.len());
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra != rb {
            // Attach the younger root under the older so series keep the
            // identity of their earliest node.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}
