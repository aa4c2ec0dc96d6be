//! Next-slot participation prediction.
//!
//! The main model is a two-layer construction: per-user binary observation
//! sequences (acted / did not act per slot) feed two class-conditional HMMs,
//! while a feature-conditioned transition table maps the current hidden
//! state plus environmental features to a distribution over the next state.
//! The expected action probability marginalizes the next state:
//!
//!   Ô = Σ_{S′} P(O=1|S′) · P(S′|S_N, F_N)
//!
//! Five simpler baselines live in [`baselines`].

pub mod baselines;
pub mod hmm;
pub mod transition;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::diffusion::{self, DiffusionCollection, DiffusionNode};
use crate::error::{Error, Result};
use crate::events::{SlotIndex, SlottedLog};
use crate::graph::{SocialGraph, UserId};
use hmm::BinaryHmm;
use transition::{StateObservation, TransitionModel};

/// Hidden-state indices used throughout: 0 = indifferent, 1 = vulnerable.
pub const INDIFFERENT: usize = 0;
pub const VULNERABLE: usize = 1;

/// The environmental context conditioning a user's next-state transition.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnvFeatures {
    /// User's on-topic share of their own posts over the window.
    pub own_activity: f64,
    /// Friends' pooled on-topic share of their posts over the window.
    pub friends_activity: f64,
    /// On-topic share of all posts in the final slot of the window.
    pub topic_popularity: f64,
}

impl EnvFeatures {
    pub fn as_array(&self) -> [f64; 3] {
        [
            self.own_activity,
            self.friends_activity,
            self.topic_popularity,
        ]
    }
}

/// Predictor hyperparameters with the defaults used by the harness.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictorConfig {
    /// Quantile bins per feature dimension.
    pub bins: usize,
    /// Dirichlet prior strength for transition rows.
    pub lambda: f64,
    /// Inclusion threshold on Ô.
    pub tau: f64,
    /// Cascade activation threshold φ.
    pub phi: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig {
            bins: transition::DEFAULT_BINS,
            lambda: transition::DEFAULT_LAMBDA,
            tau: 0.5,
            phi: 0.1,
            max_iters: hmm::DEFAULT_MAX_ITERS,
            tol: hmm::DEFAULT_TOL,
            seed: 1,
        }
    }
}

impl PredictorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::Config(format!(
                "inclusion threshold must lie in [0,1], got {}",
                self.tau
            )));
        }
        if !(0.0..=1.0).contains(&self.phi) {
            return Err(Error::Config(format!(
                "cascade threshold must lie in [0,1], got {}",
                self.phi
            )));
        }
        if self.bins < 2 {
            return Err(Error::Config("feature bins must be at least 2".into()));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::Config("prior strength must be positive".into()));
        }
        Ok(())
    }
}

/// The two class-conditional sequence models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionModel {
    pub acts: BinaryHmm,
    pub not_acts: BinaryHmm,
}

/// Everything needed to score users at prediction time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModels {
    pub transition: TransitionModel,
    pub emission: EmissionModel,
}

/// Environmental features for `user` over slots 1..=n: own on-topic ratio,
/// friends' pooled on-topic ratio, and the final slot's topic share. Each
/// component is 0 when its denominator is 0.
pub fn extract_env_features(
    user: &UserId,
    topic: &str,
    n: SlotIndex,
    g: &SocialGraph,
    log: &SlottedLog,
) -> EnvFeatures {
    let counts = log.post_counts(1..=n, topic);
    let ratio = |pair: Option<&(u64, u64)>| -> f64 {
        match pair {
            Some((total, on_topic)) if *total > 0 => *on_topic as f64 / *total as f64,
            _ => 0.0,
        }
    };
    let own_activity = ratio(counts.get(user));

    let mut friend_total = 0u64;
    let mut friend_topic = 0u64;
    for v in g.friends(user) {
        if let Some((total, on_topic)) = counts.get(v) {
            friend_total += total;
            friend_topic += on_topic;
        }
    }
    let friends_activity = if friend_total > 0 {
        friend_topic as f64 / friend_total as f64
    } else {
        0.0
    };

    let (slot_total, slot_topic) = log.slot_totals(n, topic);
    let topic_popularity = if slot_total > 0 {
        slot_topic as f64 / slot_total as f64
    } else {
        0.0
    };

    EnvFeatures {
        own_activity,
        friends_activity,
        topic_popularity,
    }
}

/// State sequence S_1..S_n for a user: vulnerable at slot m iff at least one
/// friend acted on the topic at slot m−1; slot 1 is always indifferent.
pub fn label_states(
    user: &UserId,
    topic: &str,
    g: &SocialGraph,
    log: &SlottedLog,
    n: SlotIndex,
) -> Vec<usize> {
    let mut states = Vec::with_capacity(n as usize);
    for m in 1..=n {
        if m == 1 {
            states.push(INDIFFERENT);
            continue;
        }
        let prev_actors = log.actors_on_topic(m - 1, topic);
        let vulnerable = g.friends(user).any(|v| prev_actors.contains_key(v));
        states.push(if vulnerable { VULNERABLE } else { INDIFFERENT });
    }
    states
}

/// Binary observation sequence O_1..O_n: 1 iff the user acted on the topic
/// in that slot.
pub fn observation_sequence(
    user: &UserId,
    topic: &str,
    log: &SlottedLog,
    n: SlotIndex,
) -> Vec<u8> {
    (1..=n)
        .map(|m| u8::from(log.actors_on_topic(m, topic).contains_key(user)))
        .collect()
}

/// Fit the transition model and both class HMMs from all users of `g` over
/// slots 1..=n. Needs n ≥ 3 so at least one labeled prefix exists.
pub fn fit_models(
    g: &SocialGraph,
    log: &SlottedLog,
    topic: &str,
    n: SlotIndex,
    cfg: &PredictorConfig,
) -> Result<FittedModels> {
    cfg.validate()?;
    if n < 3 {
        return Err(Error::Model(format!(
            "training window of {n} slot(s) is too short; need at least 3"
        )));
    }
    let mut state_sequences: Vec<Vec<StateObservation>> = Vec::new();
    let mut acts_seqs: Vec<Vec<u8>> = Vec::new();
    let mut not_acts_seqs: Vec<Vec<u8>> = Vec::new();
    for user in g.user_ids() {
        let states = label_states(user, topic, g, log, n);
        let seq: Vec<StateObservation> = (1..=n)
            .map(|m| StateObservation {
                state: states[(m - 1) as usize],
                features: extract_env_features(user, topic, m, g, log),
            })
            .collect();
        state_sequences.push(seq);

        // Every prefix O_1..m (m ≥ 2) becomes a training sequence for the
        // class that matches what the user did at m+1.
        let obs = observation_sequence(user, topic, log, n);
        for m in 2..n {
            let prefix = obs[..m as usize].to_vec();
            if obs[m as usize] == 1 {
                acts_seqs.push(prefix);
            } else {
                not_acts_seqs.push(prefix);
            }
        }
    }
    let transition = transition::fit_transition_model(&state_sequences, cfg.bins, cfg.lambda)?;
    let emission = fit_emission_hmms(&acts_seqs, &not_acts_seqs, cfg)?;
    Ok(FittedModels {
        transition,
        emission,
    })
}

/// Train the two class HMMs; errors name the class that has no data.
pub fn fit_emission_hmms(
    acts: &[Vec<u8>],
    not_acts: &[Vec<u8>],
    cfg: &PredictorConfig,
) -> Result<EmissionModel> {
    if acts.is_empty() {
        return Err(Error::Model(
            "no training sequences for class `acts`".into(),
        ));
    }
    if not_acts.is_empty() {
        return Err(Error::Model(
            "no training sequences for class `not-acts`".into(),
        ));
    }
    let (acts_model, _) = hmm::fit_baum_welch(
        acts,
        BinaryHmm::seeded_init(cfg.seed),
        cfg.max_iters,
        cfg.tol,
    )?;
    let (not_acts_model, _) = hmm::fit_baum_welch(
        not_acts,
        BinaryHmm::seeded_init(cfg.seed.wrapping_add(1)),
        cfg.max_iters,
        cfg.tol,
    )?;
    Ok(EmissionModel {
        acts: acts_model,
        not_acts: not_acts_model,
    })
}

/// Select the class HMM with the higher forward likelihood over the
/// history; ties go to the acting class.
fn select_class<'a>(emission: &'a EmissionModel, history: &[u8]) -> Result<&'a BinaryHmm> {
    let ll_acts = emission.acts.forward_log_likelihood(history)?;
    let ll_not = emission.not_acts.forward_log_likelihood(history)?;
    Ok(if ll_acts >= ll_not {
        &emission.acts
    } else {
        &emission.not_acts
    })
}

/// Expected next-slot action probability for one user: pick the class HMM,
/// estimate S_N from the Viterbi path, condition the transition on the
/// features, and marginalize the next state over the HMM's emission of 1.
///
/// A degenerate transition normalization falls back to a uniform next-state
/// distribution and pushes a warning.
pub fn predict_action(
    models: &FittedModels,
    history: &[u8],
    features: &EnvFeatures,
    warnings: &mut Vec<String>,
) -> Result<f64> {
    let chosen = select_class(&models.emission, history)?;
    let s_n = *chosen
        .viterbi(history)?
        .last()
        .expect("history validated non-empty");
    let (next_dist, fell_back) = models.transition.feature_conditioned(s_n, features);
    if fell_back {
        warnings.push("degenerate transition normalization; used uniform next-state".into());
    }
    Ok(expected_action(chosen, next_dist))
}

/// Feature-free variant: identical machinery, but the next-state
/// distribution is the plain learned transition row.
pub fn predict_action_featureless(
    models: &FittedModels,
    history: &[u8],
    warnings: &mut Vec<String>,
) -> Result<f64> {
    let _ = &warnings;
    let chosen = select_class(&models.emission, history)?;
    let s_n = *chosen
        .viterbi(history)?
        .last()
        .expect("history validated non-empty");
    let next_dist = models.transition.plain_row(s_n);
    Ok(expected_action(chosen, next_dist))
}

fn expected_action(model: &BinaryHmm, next_dist: [f64; 2]) -> f64 {
    (0..2)
        .map(|s| model.emission[s][1] * next_dist[s])
        .sum::<f64>()
        .clamp(0.0, 1.0)
}

/// Extend a collection one slot: users scoring Ô ≥ τ enter slot N+1 with a
/// single synthetic action at `action_time`, attached to all friend nodes
/// at slot N under the builder's merge rules.
pub fn extend_collection(
    collection: &DiffusionCollection,
    predicted: &BTreeMap<UserId, f64>,
    tau: f64,
    g: &SocialGraph,
    action_time: i64,
) -> DiffusionCollection {
    let n = collection.horizon;
    let mut nodes = collection.nodes.clone();
    let last_slot: BTreeMap<&UserId, usize> = collection
        .nodes
        .iter()
        .enumerate()
        .filter(|(_, node)| node.slot == n)
        .map(|(i, node)| (&node.user, i))
        .collect();
    for (user, score) in predicted {
        if *score < tau || !g.contains(user) {
            continue;
        }
        let mut parents: Vec<usize> = g
            .friends(user)
            .filter_map(|v| last_slot.get(v).copied())
            .collect();
        parents.sort_unstable();
        nodes.push(DiffusionNode {
            user: user.clone(),
            slot: n + 1,
            parents,
            children: Vec::new(),
            action_times: vec![action_time],
        });
    }
    diffusion::assemble(collection.topic.clone(), n + 1, nodes)
}
