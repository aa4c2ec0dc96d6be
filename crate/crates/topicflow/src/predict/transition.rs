//! State-transition model conditioned on environmental features: a
//! Dirichlet-MAP 2×2 transition table plus per-state multinomials over
//! jointly quantile-binned features.
//!
//! Training pairs are lagged: the features observed at slot m are treated
//! as evidence for the state entered at slot m+1, so at prediction time
//! P(S′|S, F) ∝ P(F-bin|S′) · P(S′|S), normalized over S′. Dropping the
//! feature factor recovers the plain learned transition row, which is
//! exactly the feature-free variant used as a baseline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predict::EnvFeatures;

pub const DEFAULT_BINS: usize = 5;
pub const DEFAULT_LAMBDA: f64 = 1.0;

/// One training step: the state at slot m and the features observed at m.
#[derive(Debug, Clone, Copy)]
pub struct StateObservation {
    /// 0 = indifferent, 1 = vulnerable.
    pub state: usize,
    pub features: EnvFeatures,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionModel {
    pub bins: usize,
    /// Per-feature quantile cut points (bins − 1 each).
    pub boundaries: [Vec<f64>; 3],
    /// Per next-state multinomial over the bins³ joint feature bins.
    pub feature_emission: [Vec<f64>; 2],
    /// P(S′|S), rows indexed by S.
    pub transition: [[f64; 2]; 2],
    pub lambda: f64,
}

/// Fit from per-user sequences of (state, features). Each adjacent pair
/// (m, m+1) contributes one transition count S_m → S_{m+1} and one feature
/// count (F_m, S_{m+1}).
pub fn fit_transition_model(
    sequences: &[Vec<StateObservation>],
    bins: usize,
    lambda: f64,
) -> Result<TransitionModel> {
    if bins < 2 {
        return Err(Error::Config(format!(
            "feature binning needs at least 2 bins, got {bins}"
        )));
    }
    if !(lambda > 0.0) {
        return Err(Error::Config(format!(
            "Dirichlet prior strength must be positive, got {lambda}"
        )));
    }
    let mut pairs: Vec<(usize, usize, EnvFeatures)> = Vec::new();
    for seq in sequences {
        for w in seq.windows(2) {
            if w[0].state > 1 || w[1].state > 1 {
                return Err(Error::Model("states must be 0 or 1".into()));
            }
            pairs.push((w[0].state, w[1].state, w[0].features));
        }
    }
    if pairs.is_empty() {
        return Err(Error::Model(
            "no observed transitions to fit the transition model".into(),
        ));
    }

    let boundaries = [
        quantile_boundaries(pairs.iter().map(|p| p.2.own_activity), bins),
        quantile_boundaries(pairs.iter().map(|p| p.2.friends_activity), bins),
        quantile_boundaries(pairs.iter().map(|p| p.2.topic_popularity), bins),
    ];

    let n_joint = bins * bins * bins;
    let mut trans_counts = [[0u64; 2]; 2];
    let mut feat_counts = [vec![0u64; n_joint], vec![0u64; n_joint]];
    for (s, s_next, f) in &pairs {
        trans_counts[*s][*s_next] += 1;
        let j = joint_bin(&boundaries, bins, f);
        feat_counts[*s_next][j] += 1;
    }

    let mut transition = [[0.0f64; 2]; 2];
    for s in 0..2 {
        let total: u64 = trans_counts[s].iter().sum();
        for s2 in 0..2 {
            transition[s][s2] =
                (trans_counts[s][s2] as f64 + lambda) / (total as f64 + 2.0 * lambda);
        }
    }
    let feature_emission = feat_counts.map(|counts| {
        let total: u64 = counts.iter().sum();
        counts
            .iter()
            .map(|&c| (c as f64 + 1.0) / (total as f64 + n_joint as f64))
            .collect()
    });

    Ok(TransitionModel {
        bins,
        boundaries,
        feature_emission,
        transition,
        lambda,
    })
}

impl TransitionModel {
    /// P(S′ | S, F) ∝ P(F-bin|S′)·P(S′|S). Returns the normalized
    /// distribution; the boolean is true when normalization degenerated and
    /// a uniform fallback was used.
    pub fn feature_conditioned(&self, state: usize, f: &EnvFeatures) -> ([f64; 2], bool) {
        let j = joint_bin(&self.boundaries, self.bins, f);
        let mut w = [0.0f64; 2];
        for (s_next, out) in w.iter_mut().enumerate() {
            *out = self.feature_emission[s_next][j] * self.transition[state][s_next];
        }
        let total = w[0] + w[1];
        if total <= 1e-300 || !total.is_finite() {
            return ([0.5, 0.5], true);
        }
        ([w[0] / total, w[1] / total], false)
    }

    /// The plain learned row P(S′|S), features ignored.
    pub fn plain_row(&self, state: usize) -> [f64; 2] {
        self.transition[state]
    }

    pub fn joint_bin_of(&self, f: &EnvFeatures) -> usize {
        joint_bin(&self.boundaries, self.bins, f)
    }
}

/// Nearest-rank quantile cut points: boundary k (1-based, k < bins) is the
/// ⌈k·n/bins⌉-th smallest value.
fn quantile_boundaries(values: impl Iterator<Item = f64>, bins: usize) -> Vec<f64> {
    let mut sorted: Vec<f64> = values.collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    (1..bins)
        .map(|k| {
            let rank = (k * n).div_ceil(bins);
            sorted[rank.saturating_sub(1).min(n - 1)]
        })
        .collect()
}

/// A value falls in the bin counting how many boundaries it strictly
/// exceeds, so x ≤ b₁ → bin 0 and x > b_last → bin (bins − 1).
fn scalar_bin(boundaries: &[f64], x: f64) -> usize {
    boundaries.iter().filter(|b| x > **b).count()
}

fn joint_bin(boundaries: &[Vec<f64>; 3], bins: usize, f: &EnvFeatures) -> usize {
    let b0 = scalar_bin(&boundaries[0], f.own_activity);
    let b1 = scalar_bin(&boundaries[1], f.friends_activity);
    let b2 = scalar_bin(&boundaries[2], f.topic_popularity);
    (b0 * bins + b1) * bins + b2
}
