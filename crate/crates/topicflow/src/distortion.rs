//! Distortion scoring: how closely a predicted diffusion tracks the actual
//! one (saturation) and external interest trends (utility).
//!
//! Both scores are 1 − D where D is the component-wise max absolute
//! difference between two aligned vectors — over the eight-component
//! feature vectors for saturation, over per-slot volume CDFs for utility.
//! 1 means perfect agreement, 0 maximal distortion; results are clamped
//! because a couple of feature components can exceed 1 on toy graphs.

use serde::{Deserialize, Serialize};

use crate::diffusion::DiffusionCollection;
use crate::error::{Error, Result};
use crate::metrics::DiffusionFeatureVector;

/// Where a trend series came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendKind {
    Search,
    News,
}

impl TrendKind {
    pub fn name(&self) -> &'static str {
        match self {
            TrendKind::Search => "search",
            TrendKind::News => "news",
        }
    }
}

/// External per-slot interest volumes for one topic, aligned to the slot
/// calendar of the log under study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendSeries {
    pub topic: String,
    pub kind: TrendKind,
    pub values: Vec<f64>,
}

impl TrendSeries {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Validation(format!(
                "trend series for topic `{}` is empty",
                self.topic
            )));
        }
        if let Some(bad) = self.values.iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::Validation(format!(
                "trend series for topic `{}` has a negative or non-finite value {bad}",
                self.topic
            )));
        }
        if self.values.iter().all(|v| *v == 0.0) {
            return Err(Error::Validation(format!(
                "trend series for topic `{}` has no positive value",
                self.topic
            )));
        }
        Ok(())
    }
}

/// Max over components of |a_i − b_i|.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Dimension {
            expected: a.len().max(1),
            actual: b.len(),
        });
    }
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

/// 1 − max-component distance between two feature vectors, clamped to
/// [0,1].
pub fn saturation(predicted: &DiffusionFeatureVector, actual: &DiffusionFeatureVector) -> f64 {
    let d = ks_statistic(&predicted.as_array(), &actual.as_array())
        .expect("feature vectors have fixed equal length");
    (1.0 - d).clamp(0.0, 1.0)
}

/// Arithmetic mean over per-attribute-value scores; `None` when there are
/// no values to average.
pub fn average_scores(scores: &[f64]) -> Option<f64> {
    if scores.is_empty() {
        None
    } else {
        Some(scores.iter().sum::<f64>() / scores.len() as f64)
    }
}

/// Running sum normalized by the total. Errors when the series carries no
/// mass (or would divide by zero).
pub fn trend_cdf(per_slot: &[f64]) -> Result<Vec<f64>> {
    if per_slot.is_empty() {
        return Err(Error::DegenerateSeries("empty per-slot series".into()));
    }
    if let Some(bad) = per_slot.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::Domain(format!(
            "per-slot volume must be non-negative and finite, got {bad}"
        )));
    }
    let total: f64 = per_slot.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegenerateSeries(
            "per-slot series sums to zero; no CDF exists".into(),
        ));
    }
    let mut acc = 0.0;
    Ok(per_slot
        .iter()
        .map(|v| {
            acc += v;
            acc / total
        })
        .collect())
}

/// 1 − max CDF separation between the collection's per-slot node volumes
/// and the trend's volumes, clamped to [0,1]. The trend must cover exactly
/// the collection's horizon.
pub fn utility(collection: &DiffusionCollection, trend: &TrendSeries) -> Result<f64> {
    trend.validate()?;
    let volumes: Vec<f64> = collection
        .slot_volumes()
        .into_iter()
        .map(|c| c as f64)
        .collect();
    if trend.values.len() != volumes.len() {
        return Err(Error::Alignment(format!(
            "trend series for topic `{}` covers {} slot(s) but the collection spans {}",
            trend.topic,
            trend.values.len(),
            volumes.len()
        )));
    }
    let d = ks_statistic(&trend_cdf(&volumes)?, &trend_cdf(&trend.values)?)?;
    Ok((1.0 - d).clamp(0.0, 1.0))
}
