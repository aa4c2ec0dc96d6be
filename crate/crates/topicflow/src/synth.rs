//! Synthetic graph + cascade generator with homophily planted along one
//! attribute.
//!
//! Users are split round-robin into balanced groups; a stochastic block
//! model wires dense edges within groups and sparse ones across. One
//! attribute (the planted one) encodes the group exactly; the others are
//! uniform noise. Propagation is slotted: every slot, each edge from an
//! active user to an inactive friend fires independently, succeeding with
//! the homophilous probability when the two share the planted value and
//! with the (lower) generic probability otherwise. Every activation emits
//! a single on-topic post at its slot midpoint.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attributes::{ContentRole, Continent, Role};
use crate::error::{Error, Result};
use crate::events::{ActionEvent, SlotIndex, DEFAULT_SLICE_SECONDS};
use crate::graph::{Attribute, EdgeMode, SocialGraph, UserId, UserRecord};

/// Topic tag carried by every generated post.
pub const SYNTH_TOPIC: &str = "synthetic";

const EMPTY_GRAPH_RETRIES: usize = 5;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_users: usize,
    /// Distinct values per attribute; the planted attribute's entry is the
    /// group count.
    pub cardinalities: BTreeMap<Attribute, usize>,
    pub planted: Attribute,
    pub within_group_edge_prob: f64,
    pub cross_group_edge_prob: f64,
    pub propagation_homophilous: f64,
    pub propagation_other: f64,
    pub n_slots: SlotIndex,
    pub n_seeds: usize,
    pub rng_seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let cardinalities = [
            (Attribute::Location, 4),
            (Attribute::InfoRole, 3),
            (Attribute::ContentRole, 2),
            (Attribute::ActivityCluster, 3),
        ]
        .into_iter()
        .collect();
        SynthConfig {
            n_users: 200,
            cardinalities,
            planted: Attribute::Location,
            within_group_edge_prob: 0.1,
            cross_group_edge_prob: 0.01,
            propagation_homophilous: 0.4,
            propagation_other: 0.05,
            n_slots: 8,
            n_seeds: 4,
            rng_seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn group_count(&self) -> usize {
        self.cardinalities.get(&self.planted).copied().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_users == 0 {
            return Err(Error::Config("need at least one user".into()));
        }
        let groups = self.group_count();
        if groups < 2 {
            return Err(Error::Config(
                "planted attribute needs at least 2 values".into(),
            ));
        }
        for (attr, card) in &self.cardinalities {
            let max = match attr {
                Attribute::Location => 7,
                Attribute::InfoRole => 3,
                Attribute::ContentRole => 2,
                Attribute::ActivityCluster => usize::MAX,
            };
            if *card == 0 || *card > max {
                return Err(Error::Config(format!(
                    "attribute {} supports 1..={} values, got {}",
                    attr.name(),
                    max,
                    card
                )));
            }
        }
        for (label, p) in [
            ("within_group_edge_prob", self.within_group_edge_prob),
            ("cross_group_edge_prob", self.cross_group_edge_prob),
            ("propagation_homophilous", self.propagation_homophilous),
            ("propagation_other", self.propagation_other),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!(
                    "{label} must lie in [0,1], got {p}"
                )));
            }
        }
        if self.within_group_edge_prob < self.cross_group_edge_prob {
            return Err(Error::Config(
                "within-group edge probability must be >= cross-group".into(),
            ));
        }
        if self.propagation_homophilous < self.propagation_other {
            return Err(Error::Config(
                "homophilous propagation must be >= generic propagation".into(),
            ));
        }
        if self.n_slots == 0 {
            return Err(Error::Config("need at least one slot".into()));
        }
        if self.n_seeds == 0 || self.n_seeds > self.n_users {
            return Err(Error::Config(format!(
                "seed count must lie in 1..={}, got {}",
                self.n_users, self.n_seeds
            )));
        }
        Ok(())
    }
}

/// Generated world plus the ground truth the generator knows.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub graph: SocialGraph,
    pub events: Vec<ActionEvent>,
    pub topic: String,
    /// Planted group index per user.
    pub groups: BTreeMap<UserId, usize>,
    /// (infector, infectee, infectee's activation slot) for every
    /// successful propagation coin.
    pub diffusion_edges: Vec<(UserId, UserId, SlotIndex)>,
    /// Activation slot per activated user (seeds at slot 1).
    pub activations: BTreeMap<UserId, SlotIndex>,
}

fn attribute_value_pool(attr: Attribute, cardinality: usize) -> Vec<AttrValue> {
    match attr {
        Attribute::Location => {
            const ORDER: [Continent; 7] = [
                Continent::NorthAmerica,
                Continent::SouthAmerica,
                Continent::Europe,
                Continent::Asia,
                Continent::Africa,
                Continent::Oceania,
                Continent::Other,
            ];
            ORDER[..cardinality]
                .iter()
                .map(|c| AttrValue::Location(*c))
                .collect()
        }
        Attribute::InfoRole => {
            const ORDER: [Role; 3] = [Role::Generator, Role::Mediator, Role::Receptor];
            ORDER[..cardinality]
                .iter()
                .map(|r| AttrValue::InfoRole(*r))
                .collect()
        }
        Attribute::ContentRole => {
            const ORDER: [ContentRole; 2] = [ContentRole::Meformer, ContentRole::Informer];
            ORDER[..cardinality]
                .iter()
                .map(|r| AttrValue::ContentRole(*r))
                .collect()
        }
        Attribute::ActivityCluster => (0..cardinality)
            .map(|c| AttrValue::ActivityCluster(c as u32))
            .collect(),
    }
}

#[derive(Debug, Clone, Copy)]
enum AttrValue {
    Location(Continent),
    InfoRole(Role),
    ContentRole(ContentRole),
    ActivityCluster(u32),
}

impl AttrValue {
    fn apply(self, rec: &mut UserRecord) {
        match self {
            AttrValue::Location(c) => rec.location = Some(c),
            AttrValue::InfoRole(r) => rec.info_role = Some(r),
            AttrValue::ContentRole(r) => rec.content_role = Some(r),
            AttrValue::ActivityCluster(c) => rec.activity_cluster = Some(c),
        }
    }
}

pub fn generate(config: &SynthConfig) -> Result<SynthOutput> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let groups_n = config.group_count();

    // Balanced round-robin group assignment over zero-padded ids.
    let ids: Vec<UserId> = (0..config.n_users)
        .map(|i| UserId::new(format!("u{i:04}")))
        .collect();
    let group_of: Vec<usize> = (0..config.n_users).map(|i| i % groups_n).collect();
    let groups: BTreeMap<UserId, usize> = ids
        .iter()
        .cloned()
        .zip(group_of.iter().copied())
        .collect();

    // Attribute assignment: planted = group, others uniform noise.
    let mut records: Vec<UserRecord> = Vec::with_capacity(config.n_users);
    let planted_pool = attribute_value_pool(config.planted, groups_n);
    let noise_pools: Vec<(Attribute, Vec<AttrValue>)> = config
        .cardinalities
        .iter()
        .filter(|(attr, _)| **attr != config.planted)
        .map(|(attr, card)| (*attr, attribute_value_pool(*attr, *card)))
        .collect();
    for (i, id) in ids.iter().enumerate() {
        let mut rec = UserRecord::new(id.as_str());
        rec.timezone = Some("Etc/UTC".into());
        planted_pool[group_of[i]].apply(&mut rec);
        for (_, pool) in &noise_pools {
            pool[rng.gen_range(0..pool.len())].apply(&mut rec);
        }
        records.push(rec);
    }

    // Stochastic block edges, retrying the coin phase when the draw comes
    // out empty (possible under tiny probabilities).
    let mut edges: Vec<(UserId, UserId)> = Vec::new();
    let mut attempts = 0;
    loop {
        attempts += 1;
        edges.clear();
        for i in 0..config.n_users {
            for j in i + 1..config.n_users {
                let p = if group_of[i] == group_of[j] {
                    config.within_group_edge_prob
                } else {
                    config.cross_group_edge_prob
                };
                if rng.gen::<f64>() < p {
                    edges.push((ids[i].clone(), ids[j].clone()));
                }
            }
        }
        if !edges.is_empty() {
            break;
        }
        if attempts >= EMPTY_GRAPH_RETRIES {
            return Err(Error::Generation(format!(
                "edge draw produced an empty graph {attempts} times; raise the edge probabilities"
            )));
        }
    }
    let mut warnings = Vec::new();
    let graph = SocialGraph::load(&edges, records, EdgeMode::Friends, &mut warnings)?;

    // Seeds: groups visited round-robin, a uniform not-yet-seeded member
    // drawn from each.
    let mut per_group: Vec<Vec<&UserId>> = vec![Vec::new(); groups_n];
    for (i, id) in ids.iter().enumerate() {
        per_group[group_of[i]].push(id);
    }
    let mut seeds: Vec<UserId> = Vec::with_capacity(config.n_seeds);
    let mut seeded: BTreeSet<&UserId> = BTreeSet::new();
    let mut g = 0;
    while seeds.len() < config.n_seeds {
        let pool: Vec<&&UserId> = per_group[g % groups_n]
            .iter()
            .filter(|id| !seeded.contains(**id))
            .collect();
        if let Some(pick) = pool.as_slice().choose(&mut rng) {
            seeded.insert(**pick);
            seeds.push((***pick).clone());
        }
        g += 1;
        // A fully seeded group just skips its turn; n_seeds ≤ n_users
        // guarantees progress overall.
    }
    seeds.sort();

    // Slotted cascade rollout: every active user presses on every inactive
    // friend each slot, so exposure accumulates instead of expiring after
    // one round.
    let mut activations: BTreeMap<UserId, SlotIndex> = BTreeMap::new();
    let mut diffusion_edges: Vec<(UserId, UserId, SlotIndex)> = Vec::new();
    for s in &seeds {
        activations.insert(s.clone(), 1);
    }
    for slot in 1..config.n_slots {
        let active: Vec<UserId> = activations.keys().cloned().collect();
        let mut next: Vec<UserId> = Vec::new();
        for u in &active {
            for v in graph.friends(u) {
                if activations.contains_key(v) {
                    continue;
                }
                let p = if groups[u] == groups[v] {
                    config.propagation_homophilous
                } else {
                    config.propagation_other
                };
                if rng.gen::<f64>() < p {
                    diffusion_edges.push((u.clone(), v.clone(), slot + 1));
                    if !next.contains(v) {
                        next.push(v.clone());
                    }
                }
            }
        }
        // Mark the new cohort active only after the whole slot resolves so
        // same-slot activations cannot infect each other.
        for v in &next {
            activations.insert(v.clone(), slot + 1);
        }
    }

    let events: Vec<ActionEvent> = activations
        .iter()
        .map(|(user, slot)| {
            let midpoint =
                (i64::from(*slot) - 1) * DEFAULT_SLICE_SECONDS + DEFAULT_SLICE_SECONDS / 2;
            ActionEvent {
                user: user.clone(),
                timestamp: midpoint,
                topics: [SYNTH_TOPIC.to_owned()].into_iter().collect(),
                has_url: false,
                is_retweet: false,
                mentions: BTreeSet::new(),
            }
        })
        .collect();

    Ok(SynthOutput {
        graph,
        events,
        topic: SYNTH_TOPIC.to_owned(),
        groups,
        diffusion_edges,
        activations,
    })
}
