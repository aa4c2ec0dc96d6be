//! Action-log events and their assignment to discrete time slots.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::UserId;

/// Default slot width: one day.
pub const DEFAULT_SLICE_SECONDS: i64 = 86_400;

/// 1-based index of a time slice.
pub type SlotIndex = u32;

/// One post from the action log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionEvent {
    pub user: UserId,
    /// Epoch seconds UTC.
    pub timestamp: i64,
    #[serde(default)]
    pub topics: BTreeSet<String>,
    #[serde(default)]
    pub has_url: bool,
    #[serde(default)]
    pub is_retweet: bool,
    #[serde(default)]
    pub mentions: BTreeSet<UserId>,
}

impl ActionEvent {
    pub fn on_topic(&self, topic: &str) -> bool {
        self.topics.contains(topic)
    }
}

/// Events bucketed into half-open slot windows
/// [origin + (m−1)·Δ, origin + m·Δ), m ≥ 1.
#[derive(Debug, Clone)]
pub struct SlottedLog {
    origin: i64,
    slice_duration: i64,
    slots: BTreeMap<SlotIndex, BTreeMap<UserId, Vec<ActionEvent>>>,
    max_slot: SlotIndex,
}

/// Assign each event to its slot. Events before `origin` are dropped and
/// reported through one aggregate warning.
pub fn slice_events(
    events: &[ActionEvent],
    origin: i64,
    slice_duration: i64,
    warnings: &mut Vec<String>,
) -> Result<SlottedLog> {
    if slice_duration <= 0 {
        return Err(Error::Config(format!(
            "slice duration must be positive, got {slice_duration}"
        )));
    }
    let mut slots: BTreeMap<SlotIndex, BTreeMap<UserId, Vec<ActionEvent>>> = BTreeMap::new();
    let mut max_slot = 0;
    let mut dropped = 0usize;
    for ev in events {
        if ev.timestamp < origin {
            dropped += 1;
            continue;
        }
        let offset = ev.timestamp - origin;
        let slot = (offset.div_euclid(slice_duration) + 1) as SlotIndex;
        max_slot = max_slot.max(slot);
        slots
            .entry(slot)
            .or_default()
            .entry(ev.user.clone())
            .or_default()
            .push(ev.clone());
    }
    if dropped > 0 {
        warnings.push(format!("dropped {dropped} event(s) before the slicing origin"));
    }
    for per_user in slots.values_mut() {
        for evs in per_user.values_mut() {
            evs.sort_by_key(|e| e.timestamp);
        }
    }
    Ok(SlottedLog {
        origin,
        slice_duration,
        slots,
        max_slot,
    })
}

impl SlottedLog {
    pub fn origin(&self) -> i64 {
        self.origin
    }

    pub fn slice_duration(&self) -> i64 {
        self.slice_duration
    }

    /// Highest populated slot; 0 when no events survived slicing.
    pub fn max_slot(&self) -> SlotIndex {
        self.max_slot
    }

    /// Half-open window [start, end) covered by slot `m`.
    pub fn slot_window(&self, m: SlotIndex) -> (i64, i64) {
        let start = self.origin + (m as i64 - 1) * self.slice_duration;
        (start, start + self.slice_duration)
    }

    /// Midpoint of slot `m`, used as the synthetic action time for
    /// predicted participants.
    pub fn slot_midpoint(&self, m: SlotIndex) -> i64 {
        let (start, end) = self.slot_window(m);
        start + (end - start) / 2
    }

    /// All events in slot `m`, grouped per user.
    pub fn events_at(&self, m: SlotIndex) -> Option<&BTreeMap<UserId, Vec<ActionEvent>>> {
        self.slots.get(&m)
    }

    /// Users acting on `topic` in slot `m`, with their sorted action times.
    pub fn actors_on_topic(&self, m: SlotIndex, topic: &str) -> BTreeMap<UserId, Vec<i64>> {
        let mut out = BTreeMap::new();
        if let Some(per_user) = self.slots.get(&m) {
            for (user, evs) in per_user {
                let times: Vec<i64> = evs
                    .iter()
                    .filter(|e| e.on_topic(topic))
                    .map(|e| e.timestamp)
                    .collect();
                if !times.is_empty() {
                    out.insert(user.clone(), times);
                }
            }
        }
        out
    }

    /// Distinct users with at least one on-topic event in slots 1..=n.
    pub fn topic_active_users(&self, topic: &str, n: SlotIndex) -> BTreeSet<UserId> {
        let mut out = BTreeSet::new();
        for (slot, per_user) in &self.slots {
            if *slot > n {
                break;
            }
            for (user, evs) in per_user {
                if evs.iter().any(|e| e.on_topic(topic)) {
                    out.insert(user.clone());
                }
            }
        }
        out
    }

    /// Per-user (total posts, on-topic posts) over the slot range.
    pub fn post_counts(
        &self,
        range: RangeInclusive<SlotIndex>,
        topic: &str,
    ) -> BTreeMap<UserId, (u64, u64)> {
        let mut out: BTreeMap<UserId, (u64, u64)> = BTreeMap::new();
        for (slot, per_user) in &self.slots {
            if !range.contains(slot) {
                continue;
            }
            for (user, evs) in per_user {
                let entry = out.entry(user.clone()).or_default();
                entry.0 += evs.len() as u64;
                entry.1 += evs.iter().filter(|e| e.on_topic(topic)).count() as u64;
            }
        }
        out
    }

    /// (total posts, on-topic posts) aggregated over one slot.
    pub fn slot_totals(&self, m: SlotIndex, topic: &str) -> (u64, u64) {
        let mut total = 0;
        let mut on_topic = 0;
        if let Some(per_user) = self.slots.get(&m) {
            for evs in per_user.values() {
                total += evs.len() as u64;
                on_topic += evs.iter().filter(|e| e.on_topic(topic)).count() as u64;
            }
        }
        (total, on_topic)
    }

    /// Distinct topics seen anywhere in the log, sorted.
    pub fn topics(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for per_user in self.slots.values() {
            for evs in per_user.values() {
                for ev in evs {
                    out.extend(ev.topics.iter().cloned());
                }
            }
        }
        out
    }

    /// View of the log keeping only `members`' events. The slot calendar
    /// (origin, duration, max slot) is preserved so restricted and full
    /// logs stay aligned.
    pub fn restricted(&self, members: &BTreeSet<UserId>) -> SlottedLog {
        let slots = self
            .slots
            .iter()
            .map(|(m, per_user)| {
                let kept: BTreeMap<UserId, Vec<ActionEvent>> = per_user
                    .iter()
                    .filter(|(u, _)| members.contains(*u))
                    .map(|(u, evs)| (u.clone(), evs.clone()))
                    .collect();
                (*m, kept)
            })
            .filter(|(_, kept)| !kept.is_empty())
            .collect();
        SlottedLog {
            origin: self.origin,
            slice_duration: self.slice_duration,
            slots,
            max_slot: self.max_slot,
        }
    }

    /// Fold extra events into the log (used to extend a log with predicted
    /// synthetic actions).
    pub fn absorb(&mut self, events: &[ActionEvent], warnings: &mut Vec<String>) {
        let mut dropped = 0usize;
        for ev in events {
            if ev.timestamp < self.origin {
                dropped += 1;
                continue;
            }
            let offset = ev.timestamp - self.origin;
            let slot = (offset.div_euclid(self.slice_duration) + 1) as SlotIndex;
            self.max_slot = self.max_slot.max(slot);
            let bucket = self
                .slots
                .entry(slot)
                .or_default()
                .entry(ev.user.clone())
                .or_default();
            bucket.push(ev.clone());
            bucket.sort_by_key(|e| e.timestamp);
        }
        if dropped > 0 {
            warnings.push(format!("dropped {dropped} absorbed event(s) before the origin"));
        }
    }
}

/// Convenience constructor used across tests and the synthetic generator.
pub fn topic_event(user: &str, timestamp: i64, topic: &str) -> ActionEvent {
    ActionEvent {
        user: UserId::from(user),
        timestamp,
        topics: BTreeSet::from([topic.to_owned()]),
        has_url: false,
        is_retweet: false,
        mentions: BTreeSet::new(),
    }
}
