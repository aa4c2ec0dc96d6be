//! Two-state hidden Markov model over binary observations: scaled forward,
//! Viterbi, and multi-sequence Baum-Welch training.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probabilities below this are floored after each update so unseen symbols
/// never zero out a likelihood.
pub const PROB_FLOOR: f64 = 1e-6;

pub const DEFAULT_MAX_ITERS: usize = 200;
pub const DEFAULT_TOL: f64 = 1e-6;

/// π, A, B for two hidden states and binary observations. By construction
/// state 1 is tilted toward emitting 1 at initialization, which is what lets
/// downstream code read state 1 as "action-prone".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryHmm {
    pub initial: [f64; 2],
    pub transition: [[f64; 2]; 2],
    pub emission: [[f64; 2]; 2],
}

impl BinaryHmm {
    /// Uniform parameters with small seeded jitter, plus a fixed tilt that
    /// identifies state 1 with emitting 1 (and state 0 with 0).
    pub fn seeded_init(seed: u64) -> BinaryHmm {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut jitter = |base: f64| base + rng.gen_range(-0.05..0.05);
        let mut model = BinaryHmm {
            initial: [jitter(0.5), jitter(0.5)],
            transition: [
                [jitter(0.5), jitter(0.5)],
                [jitter(0.5), jitter(0.5)],
            ],
            emission: [
                [jitter(0.6), jitter(0.4)],
                [jitter(0.4), jitter(0.6)],
            ],
        };
        model.normalize();
        model
    }

    fn normalize(&mut self) {
        normalize_row(&mut self.initial);
        for row in &mut self.transition {
            normalize_row(row);
        }
        for row in &mut self.emission {
            normalize_row(row);
        }
    }

    /// Log-likelihood of a sequence via the scaled forward recursion.
    pub fn forward_log_likelihood(&self, obs: &[u8]) -> Result<f64> {
        let (_, log_likelihood) = self.forward_scaled(obs)?;
        Ok(log_likelihood)
    }

    /// Scaled forward pass: per-step normalized α plus total log-likelihood.
    fn forward_scaled(&self, obs: &[u8]) -> Result<(Vec<[f64; 2]>, f64)> {
        if obs.is_empty() {
            return Err(Error::Model("cannot score an empty sequence".into()));
        }
        check_binary(obs)?;
        let mut alphas = Vec::with_capacity(obs.len());
        let mut log_likelihood = 0.0;
        let mut alpha = [0.0f64; 2];
        for s in 0..2 {
            alpha[s] = self.initial[s] * self.emission[s][obs[0] as usize];
        }
        log_likelihood += scale(&mut alpha)?;
        alphas.push(alpha);
        for &o in &obs[1..] {
            let prev = alpha;
            for (s_next, a) in alpha.iter_mut().enumerate() {
                let flow: f64 = (0..2).map(|s| prev[s] * self.transition[s][s_next]).sum();
                *a = flow * self.emission[s_next][o as usize];
            }
            log_likelihood += scale(&mut alpha)?;
            alphas.push(alpha);
        }
        Ok((alphas, log_likelihood))
    }

    /// Most likely state path; ties prefer the lower state index.
    pub fn viterbi(&self, obs: &[u8]) -> Result<Vec<usize>> {
        if obs.is_empty() {
            return Err(Error::Model("cannot decode an empty sequence".into()));
        }
        check_binary(obs)?;
        let t_len = obs.len();
        let mut delta = [0.0f64; 2];
        let mut backptr = vec![[0usize; 2]; t_len];
        for s in 0..2 {
            delta[s] = self.initial[s].ln() + self.emission[s][obs[0] as usize].ln();
        }
        for (t, &o) in obs.iter().enumerate().skip(1) {
            let prev = delta;
            for s_next in 0..2 {
                let mut best_s = 0;
                let mut best = prev[0] + self.transition[0][s_next].ln();
                let alt = prev[1] + self.transition[1][s_next].ln();
                if alt > best {
                    best = alt;
                    best_s = 1;
                }
                delta[s_next] = best + self.emission[s_next][o as usize].ln();
                backptr[t][s_next] = best_s;
            }
        }
        let mut state = if delta[1] > delta[0] { 1 } else { 0 };
        let mut path = vec![0usize; t_len];
        path[t_len - 1] = state;
        for t in (1..t_len).rev() {
            state = backptr[t][state];
            path[t - 1] = state;
        }
        Ok(path)
    }

    /// Draw a sequence of observations of the given length.
    pub fn sample(&self, len: usize, rng: &mut impl Rng) -> Vec<u8> {
        let mut obs = Vec::with_capacity(len);
        let mut state = if rng.gen_bool(self.initial[1].clamp(0.0, 1.0)) {
            1
        } else {
            0
        };
        for _ in 0..len {
            let o = u8::from(rng.gen_bool(self.emission[state][1].clamp(0.0, 1.0)));
            obs.push(o);
            state = if rng.gen_bool(self.transition[state][1].clamp(0.0, 1.0)) {
                1
            } else {
                0
            };
        }
        obs
    }
}

/// Baum-Welch over multiple sequences. Returns the trained model and the
/// per-iteration log-likelihood trace (non-decreasing up to float noise).
pub fn fit_baum_welch(
    sequences: &[Vec<u8>],
    init: BinaryHmm,
    max_iters: usize,
    tol: f64,
) -> Result<(BinaryHmm, Vec<f64>)> {
    if sequences.is_empty() {
        return Err(Error::Model("no training sequences".into()));
    }
    for (i, s) in sequences.iter().enumerate() {
        if s.len() < 2 {
            return Err(Error::Model(format!(
                "training sequence {i} has length {} (need at least 2)",
                s.len()
            )));
        }
        check_binary(s)?;
    }
    let mut model = init;
    let mut trace = Vec::new();
    for _ in 0..max_iters {
        let mut pi_acc = [0.0f64; 2];
        let mut a_num = [[0.0f64; 2]; 2];
        let mut a_den = [0.0f64; 2];
        let mut b_num = [[0.0f64; 2]; 2];
        let mut b_den = [0.0f64; 2];
        let mut total_ll = 0.0;

        for obs in sequences {
            let (alphas, ll) = model.forward_scaled(obs)?;
            total_ll += ll;
            let t_len = obs.len();

            // Backward pass, renormalized per step; γ and ξ are normalized
            // per time step, which sidesteps scaling-convention pitfalls.
            let mut betas = vec![[0.0f64; 2]; t_len];
            betas[t_len - 1] = [1.0, 1.0];
            for t in (0..t_len - 1).rev() {
                let o_next = obs[t + 1] as usize;
                for s in 0..2 {
                    betas[t][s] = (0..2)
                        .map(|s2| {
                            model.transition[s][s2] * model.emission[s2][o_next] * betas[t + 1][s2]
                        })
                        .sum();
                }
                scale(&mut betas[t])?;
            }

            for t in 0..t_len {
                let mut gamma = [alphas[t][0] * betas[t][0], alphas[t][1] * betas[t][1]];
                scale(&mut gamma)?;
                let o = obs[t] as usize;
                for s in 0..2 {
                    if t == 0 {
                        pi_acc[s] += gamma[s];
                    }
                    b_num[s][o] += gamma[s];
                    b_den[s] += gamma[s];
                    if t < t_len - 1 {
                        a_den[s] += gamma[s];
                    }
                }
                if t < t_len - 1 {
                    let o_next = obs[t + 1] as usize;
                    let mut xi = [[0.0f64; 2]; 2];
                    let mut xi_total = 0.0;
                    for s in 0..2 {
                        for s2 in 0..2 {
                            xi[s][s2] = alphas[t][s]
                                * model.transition[s][s2]
                                * model.emission[s2][o_next]
                                * betas[t + 1][s2];
                            xi_total += xi[s][s2];
                        }
                    }
                    if xi_total <= 0.0 {
                        return Err(Error::Model("vanishing transition posterior".into()));
                    }
                    for s in 0..2 {
                        for s2 in 0..2 {
                            a_num[s][s2] += xi[s][s2] / xi_total;
                        }
                    }
                }
            }
        }

        trace.push(total_ll);
        if trace.len() >= 2 && (total_ll - trace[trace.len() - 2]).abs() < tol {
            break;
        }

        let mut next = model.clone();
        normalize_row(&mut pi_acc);
        next.initial = floor_row(pi_acc);
        for s in 0..2 {
            if a_den[s] > 1e-12 {
                next.transition[s] = floor_row([a_num[s][0] / a_den[s], a_num[s][1] / a_den[s]]);
            }
            if b_den[s] > 1e-12 {
                next.emission[s] = floor_row([b_num[s][0] / b_den[s], b_num[s][1] / b_den[s]]);
            }
        }
        model = next;
    }
    Ok((model, trace))
}

fn normalize_row(row: &mut [f64; 2]) {
    let total = row[0] + row[1];
    if total > 0.0 {
        row[0] /= total;
        row[1] /= total;
    } else {
        *row = [0.5, 0.5];
    }
}

fn floor_row(mut row: [f64; 2]) -> [f64; 2] {
    normalize_row(&mut row);
    row[0] = row[0].max(PROB_FLOOR);
    row[1] = row[1].max(PROB_FLOOR);
    normalize_row(&mut row);
    row
}

fn scale(row: &mut [f64; 2]) -> Result<f64> {
    let total = row[0] + row[1];
    if total <= 0.0 || !total.is_finite() {
        return Err(Error::Model(
            "numeric underflow in forward-backward scaling".into(),
        ));
    }
    row[0] /= total;
    row[1] /= total;
    Ok(total.ln())
}

fn check_binary(obs: &[u8]) -> Result<()> {
    if obs.iter().any(|&o| o > 1) {
        return Err(Error::Model("observations must be 0 or 1".into()));
    }
    Ok(())
}
