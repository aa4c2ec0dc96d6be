//! The eight diffusion characteristics of a collection at a horizon:
//! volume, participation, dissemination, reach, spread, cascade instances,
//! collection size, and rate.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::diffusion::{DiffusionCollection, DiffusionSeries};
use crate::error::{Error, Result};
use crate::graph::SocialGraph;

/// Seconds per rate unit when gaps are expressed in days.
pub const DAY_SECONDS: f64 = 86_400.0;

/// Inputs shared by the metric computations. `topic_active_users` is η: how
/// many distinct users acted on the topic in the observation window,
/// regardless of whether they entered the collection.
#[derive(Debug, Clone, Copy)]
pub struct MetricContext<'a> {
    pub collection: &'a DiffusionCollection,
    pub graph: &'a SocialGraph,
    pub topic_active_users: usize,
    /// Seconds per unit in which inter-slot gaps are measured.
    pub time_unit: f64,
}

/// d = (v, p, δ, r, s, c, α, γ) in that order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionFeatureVector {
    pub volume: f64,
    pub participation: f64,
    pub dissemination: f64,
    pub reach: f64,
    pub spread: f64,
    pub cascade_instances: f64,
    pub collection_size: f64,
    pub rate: f64,
}

impl DiffusionFeatureVector {
    pub const COMPONENT_NAMES: [&'static str; 8] = [
        "volume",
        "participation",
        "dissemination",
        "reach",
        "spread",
        "cascade_instances",
        "collection_size",
        "rate",
    ];

    pub fn as_array(&self) -> [f64; 8] {
        [
            self.volume,
            self.participation,
            self.dissemination,
            self.reach,
            self.spread,
            self.cascade_instances,
            self.collection_size,
            self.rate,
        ]
    }

    pub fn from_array(a: [f64; 8]) -> Self {
        DiffusionFeatureVector {
            volume: a[0],
            participation: a[1],
            dissemination: a[2],
            reach: a[3],
            spread: a[4],
            cascade_instances: a[5],
            collection_size: a[6],
            rate: a[7],
        }
    }

    pub fn zero() -> Self {
        Self::from_array([0.0; 8])
    }
}

/// (v, p, δ): distinct collection users, non-leaf nodes, and parentless
/// nodes, each over η.
pub fn compute_user_metrics(ctx: &MetricContext) -> Result<(f64, f64, f64)> {
    let col = ctx.collection;
    if ctx.topic_active_users == 0 {
        if col.is_empty() {
            return Ok((0.0, 0.0, 0.0));
        }
        return Err(Error::Consistency(
            "collection has nodes but the topic-active user count is zero".into(),
        ));
    }
    let eta = ctx.topic_active_users as f64;
    let n = col.distinct_users().len() as f64;
    let v = n / eta;
    let p = col.non_leaf_count() as f64 / eta;
    let d = col.parentless_count() as f64 / eta;
    Ok((v, p, d))
}

/// (r, s, c, α): reach, spread, cascade instances, collection size.
pub fn compute_topology_metrics(ctx: &MetricContext) -> Result<(f64, f64, f64, f64)> {
    let col = ctx.collection;
    if col.is_empty() {
        return Ok((0.0, 0.0, 0.0, 0.0));
    }
    let components = ctx.graph.connected_component_count();
    if components == 0 {
        return Err(Error::Consistency(
            "collection has nodes but the graph has no components".into(),
        ));
    }

    let slots_per_series: Vec<usize> = col
        .series
        .iter()
        .map(|s| col.series_by_slot(s).len())
        .collect();
    let total: usize = slots_per_series.iter().sum();
    let mean = total as f64 / slots_per_series.len() as f64;
    let r = mean / total as f64;

    let n = col.distinct_users().len() as f64;
    let max_at_slot = col
        .series
        .iter()
        .flat_map(|s| col.series_by_slot(s).into_values())
        .map(|nodes| nodes.len())
        .max()
        .unwrap_or(0);
    let s = max_at_slot as f64 / n;

    let mut increases = 0usize;
    for series in &col.series {
        let news = new_user_counts(col, series);
        for pair in news.windows(2) {
            if pair[1] > pair[0] {
                increases += 1;
            }
        }
    }
    let c = increases as f64 / total as f64;

    let alpha = col.series.len() as f64 / components as f64;
    Ok((r, s, c, alpha))
}

/// Count of series users new at each successive slot of the series.
fn new_user_counts(col: &DiffusionCollection, series: &DiffusionSeries) -> Vec<usize> {
    let mut seen: BTreeSet<&crate::graph::UserId> = BTreeSet::new();
    let mut out = Vec::new();
    for (_, nodes) in col.series_by_slot(series) {
        let mut fresh = 0usize;
        for &i in &nodes {
            if seen.insert(&col.nodes[i].user) {
                fresh += 1;
            }
        }
        out.push(fresh);
    }
    out
}

/// γ = 1/(1 + mean inter-slot gap), gaps between pooled per-slot median
/// action times of each series, expressed in `time_unit` seconds.
pub fn compute_rate(collection: &DiffusionCollection, time_unit: f64) -> Result<f64> {
    if time_unit <= 0.0 || !time_unit.is_finite() {
        return Err(Error::Config(format!(
            "rate time unit must be positive and finite, got {time_unit}"
        )));
    }
    let total_slots = collection.total_slots();
    if total_slots == 0 {
        return Ok(1.0);
    }
    let mut gap_sum = 0.0;
    for series in &collection.series {
        let by_slot = collection.series_by_slot(series);
        let medians: Vec<f64> = by_slot
            .values()
            .map(|nodes| {
                let mut times: Vec<i64> = nodes
                    .iter()
                    .flat_map(|&i| collection.nodes[i].action_times.iter().copied())
                    .collect();
                times.sort_unstable();
                median(&times)
            })
            .collect();
        for pair in medians.windows(2) {
            let gap = (pair[1] - pair[0]) / time_unit;
            if gap < 0.0 {
                return Err(Error::Data(format!(
                    "negative inter-slot gap {gap}: action times out of order"
                )));
            }
            gap_sum += gap;
        }
    }
    let avg = gap_sum / total_slots as f64;
    Ok(1.0 / (1.0 + avg))
}

fn median(sorted: &[i64]) -> f64 {
    let n = sorted.len();
    debug_assert!(n > 0);
    if n % 2 == 1 {
        sorted[n / 2] as f64
    } else {
        (sorted[n / 2 - 1] as f64 + sorted[n / 2] as f64) / 2.0
    }
}

/// All eight metrics in canonical order.
pub fn assemble_feature_vector(ctx: &MetricContext) -> Result<DiffusionFeatureVector> {
    let (v, p, d) = compute_user_metrics(ctx)?;
    let (r, s, c, a) = compute_topology_metrics(ctx)?;
    let g = compute_rate(ctx.collection, ctx.time_unit)?;
    Ok(DiffusionFeatureVector {
        volume: v,
        participation: p,
        dissemination: d,
        reach: r,
        spread: s,
        cascade_instances: c,
        collection_size: a,
        rate: g,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::fixtures::{chain4, chain_graph, events_to_log, DAY};
    use crate::diffusion::build_collection;
    use crate::events::topic_event;
    use crate::graph::{EdgeMode, SocialGraph, UserId, UserRecord};

    fn ctx<'a>(
        col: &'a DiffusionCollection,
        g: &'a SocialGraph,
        eta: usize,
    ) -> MetricContext<'a> {
        MetricContext {
            collection: col,
            graph: g,
            topic_active_users: eta,
            time_unit: DAY_SECONDS,
        }
    }

    fn empty_collection() -> (SocialGraph, DiffusionCollection) {
        let g = chain_graph(&["A", "B"]);
        let mut w = Vec::new();
        let log = events_to_log(vec![topic_event("A", 0, "other")]);
        let col = build_collection(&g, &log, "t", 1, &mut w).unwrap();
        (g, col)
    }

    #[test]
    fn empty_collection_is_all_zero_except_rate() {
        let (g, col) = empty_collection();
        let v = assemble_feature_vector(&ctx(&col, &g, 0)).unwrap();
        assert_eq!(
            v.as_array(),
            [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]
        );
    }

    #[test]
    fn nonempty_collection_with_zero_eta_is_inconsistent() {
        let (g, _, col) = chain4();
        assert_eq!(
            compute_user_metrics(&ctx(&col, &g, 0)).unwrap_err().category(),
            "consistency"
        );
    }

    #[test]
    fn chain4_vector_matches_hand_enumeration() {
        // n=4 distinct users over η=4; non-leaves {A@1,B@2,C@3}; seeds
        // {A@1,B@3}; series slot counts (4,1); every slot holds one node;
        // no new-user increase anywhere; 2 series on 1 component; day-unit
        // gaps 1,1,1 over L=5.
        let (g, _, col) = chain4();
        let v = assemble_feature_vector(&ctx(&col, &g, 4)).unwrap();
        let expected = [1.0, 0.75, 0.5, 0.5, 0.25, 0.0, 2.0, 0.625];
        for (got, want) in v.as_array().iter().zip(expected.iter()) {
            assert!(
                (got - want).abs() < 1e-12,
                "component mismatch: got {got}, want {want}"
            );
        }
    }

    #[test]
    fn chain4_rate_in_seconds_is_tiny() {
        let (_, _, col) = chain4();
        let g = compute_rate(&col, 1.0).unwrap();
        // Gaps of 86400 s × 3 over L=5 → 1/(1+51840).
        assert!((g - 1.0 / 51_841.0).abs() < 1e-18);
        assert!((g - 1.929e-5).abs() < 1e-8);
    }

    #[test]
    fn single_seed_degenerate_vector() {
        let g = chain_graph(&["A"]);
        let mut w = Vec::new();
        let log = events_to_log(vec![topic_event("A", 0, "t")]);
        let col = build_collection(&g, &log, "t", 1, &mut w).unwrap();
        let (v, p, d) = compute_user_metrics(&ctx(&col, &g, 1)).unwrap();
        assert_eq!((v, p, d), (1.0, 0.0, 1.0));
        let (r, s, c, a) = compute_topology_metrics(&ctx(&col, &g, 1)).unwrap();
        assert_eq!((r, s, c, a), (1.0, 1.0, 0.0, 1.0));
        assert_eq!(compute_rate(&col, DAY_SECONDS).unwrap(), 1.0);
    }

    #[test]
    fn star_fanout_spread_and_cascade() {
        // X seeds, three friends join at slot 2: slot sizes (1,3), so
        // spread = 3/4 and the single adjacent pair increases → c = 1/2.
        let mut w = Vec::new();
        let ids = ["X", "Y1", "Y2", "Y3"];
        let edges: Vec<(UserId, UserId)> = ids[1..]
            .iter()
            .map(|y| (UserId::from("X"), UserId::from(*y)))
            .collect();
        let g = SocialGraph::load(
            &edges,
            ids.iter().map(|i| UserRecord::new(*i)).collect(),
            EdgeMode::Friends,
            &mut w,
        )
        .unwrap();
        let mut events = vec![topic_event("X", 0, "t")];
        for y in &ids[1..] {
            events.push(topic_event(y, DAY, "t"));
        }
        let log = events_to_log(events);
        let col = build_collection(&g, &log, "t", 2, &mut w).unwrap();
        assert_eq!(col.series.len(), 1);
        let (r, s, c, a) = compute_topology_metrics(&ctx(&col, &g, 4)).unwrap();
        assert_eq!(r, 1.0, "single series always has reach 1");
        assert_eq!(s, 0.75);
        assert_eq!(c, 0.5);
        assert_eq!(a, 1.0);
    }

    #[test]
    fn rate_decreases_as_a_gap_grows() {
        let g = chain_graph(&["A", "B"]);
        let mut w = Vec::new();
        let mut gammas = Vec::new();
        for offset in [0, 1000, 40_000] {
            let events = vec![
                topic_event("A", 0, "t"),
                topic_event("B", DAY + offset, "t"),
            ];
            let log = events_to_log(events);
            let col = build_collection(&g, &log, "t", 2, &mut w).unwrap();
            gammas.push(compute_rate(&col, DAY_SECONDS).unwrap());
        }
        assert!(gammas[0] > gammas[1] && gammas[1] > gammas[2]);
    }

    #[test]
    fn pooled_median_uses_all_action_times_at_a_slot() {
        // B and C both act at slot 2 with different times; the slot median
        // is the midpoint of their two posts.
        let mut w = Vec::new();
        let edges = vec![
            (UserId::from("A"), UserId::from("B")),
            (UserId::from("A"), UserId::from("C")),
        ];
        let g = SocialGraph::load(
            &edges,
            vec![
                UserRecord::new("A"),
                UserRecord::new("B"),
                UserRecord::new("C"),
            ],
            EdgeMode::Friends,
            &mut w,
        )
        .unwrap();
        let events = vec![
            topic_event("A", 0, "t"),
            topic_event("B", DAY, "t"),
            topic_event("C", DAY + 2000, "t"),
        ];
        let log = events_to_log(events);
        let col = build_collection(&g, &log, "t", 2, &mut w).unwrap();
        let gamma = compute_rate(&col, 1.0).unwrap();
        let gap = (DAY as f64 + 1000.0) - 0.0;
        assert!((gamma - 1.0 / (1.0 + gap / 2.0)).abs() < 1e-15);
    }

    #[test]
    fn leaf_accounting_and_seed_bounds_hold() {
        let (g, _, col) = chain4();
        let leaves = col.node_count() - col.non_leaf_count();
        assert_eq!(leaves + col.non_leaf_count(), col.node_count());
        let (_, _, d) = compute_user_metrics(&ctx(&col, &g, 4)).unwrap();
        assert!(d * 4.0 >= col.series.len() as f64);
    }
}
