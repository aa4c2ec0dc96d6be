//! Reference predictors the main model is compared against.
//!
//! All of them map every user of the graph to a probability-like score in
//! [0,1] so the same inclusion threshold can gate each method. The
//! feature-free variant of the main model lives in the parent module
//! (`predict_action_featureless`) since it shares the fitted machinery.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::events::{SlotIndex, SlottedLog};
use crate::graph::{SocialGraph, UserId};
use crate::predict::extract_env_features;

/// Threshold cascade: 1 when the fraction of friends active on the topic at
/// slot `n` reaches `phi`, else 0. Users without friends score 0.
pub fn cascade(
    g: &SocialGraph,
    log: &SlottedLog,
    topic: &str,
    n: SlotIndex,
    phi: f64,
) -> Result<BTreeMap<UserId, f64>> {
    if !(0.0..=1.0).contains(&phi) {
        return Err(Error::Config(format!(
            "cascade threshold must lie in [0,1], got {phi}"
        )));
    }
    let actors = log.actors_on_topic(n, topic);
    let mut out = BTreeMap::new();
    for user in g.user_ids() {
        let degree = g.degree(user);
        let score = if degree == 0 {
            0.0
        } else {
            let active = g.friends(user).filter(|v| actors.contains_key(v)).count();
            if active as f64 / degree as f64 >= phi {
                1.0
            } else {
                0.0
            }
        };
        out.insert(user.clone(), score);
    }
    Ok(out)
}

/// Ordinary least squares of next-slot participation on the three
/// environmental features plus an intercept, clamped to [0,1] at
/// prediction time. Training pairs: features over 1..=m against the m+1
/// observation, for every user and every m < n.
pub fn lin_regress(
    g: &SocialGraph,
    log: &SlottedLog,
    topic: &str,
    n: SlotIndex,
) -> Result<BTreeMap<UserId, f64>> {
    if n < 2 {
        return Err(Error::Model(
            "linear baseline needs at least 2 slots of history".into(),
        ));
    }
    let mut rows: Vec<([f64; 3], f64)> = Vec::new();
    for user in g.user_ids() {
        for m in 1..n {
            let x = extract_env_features(user, topic, m, g, log).as_array();
            let acted = log.actors_on_topic(m + 1, topic).contains_key(user);
            rows.push((x, f64::from(u8::from(acted))));
        }
    }
    let beta = fit_linear(&rows)?;
    let mut out = BTreeMap::new();
    for user in g.user_ids() {
        let x = extract_env_features(user, topic, n, g, log).as_array();
        let y = beta[0] * x[0] + beta[1] * x[1] + beta[2] * x[2] + beta[3];
        out.insert(user.clone(), y.clamp(0.0, 1.0));
    }
    Ok(out)
}

/// Solve the normal equations for y ≈ β0·x0 + β1·x1 + β2·x2 + β3. A tiny
/// ridge term keeps the system well-posed when features are collinear
/// (e.g. a constant column duplicating the intercept).
pub(crate) fn fit_linear(rows: &[([f64; 3], f64)]) -> Result<[f64; 4]> {
    const RIDGE: f64 = 1e-9;
    if rows.is_empty() {
        return Err(Error::Model("no training rows for linear baseline".into()));
    }
    let mut a = [[0.0f64; 4]; 4];
    let mut b = [0.0f64; 4];
    for (x, y) in rows {
        let xv = [x[0], x[1], x[2], 1.0];
        for i in 0..4 {
            for j in 0..4 {
                a[i][j] += xv[i] * xv[j];
            }
            b[i] += xv[i] * y;
        }
    }
    for (i, row) in a.iter_mut().enumerate() {
        row[i] += RIDGE;
    }
    solve4(a, b)
}

/// Gaussian elimination with partial pivoting on a 4×4 system.
fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Result<[f64; 4]> {
    for col in 0..4 {
        let pivot = (col..4)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty range");
        if a[pivot][col].abs() < 1e-300 {
            return Err(Error::Model("singular design matrix".into()));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..4 {
            let factor = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = [0.0f64; 4];
    for row in (0..4).rev() {
        let mut acc = b[row];
        for k in row + 1..4 {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}

/// Activity ranking: each user's post count (any topic) in slot `n`,
/// normalized by the slot's maximum count. An idle slot scores everyone 0.
pub fn deg_act(g: &SocialGraph, log: &SlottedLog, n: SlotIndex) -> BTreeMap<UserId, f64> {
    let slot = log.events_at(n);
    let mut counts: BTreeMap<&UserId, u64> = BTreeMap::new();
    let mut max = 0u64;
    for user in g.user_ids() {
        let c = slot
            .and_then(|per_user| per_user.get(user))
            .map_or(0, |evs| evs.len() as u64);
        max = max.max(c);
        counts.insert(user, c);
    }
    counts
        .into_iter()
        .map(|(user, c)| {
            let score = if max == 0 { 0.0 } else { c as f64 / max as f64 };
            (user.clone(), score)
        })
        .collect()
}

/// Seeded i.i.d. uniform scores; users are drawn in sorted id order so a
/// fixed seed reproduces byte-identical output.
pub fn random_uniform(g: &SocialGraph, seed: u64) -> BTreeMap<UserId, f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    g.user_ids()
        .map(|user| (user.clone(), rng.gen::<f64>()))
        .collect()
}
