//! Batch experiment driver: incrementally train on slots 1..=N, predict
//! slot N+1, and score the prediction for every configured
//! (topic, graph, method, horizon) cell.
//!
//! Graphs are the baseline plus one entry per configured attribute; an
//! attribute's score is the arithmetic mean over its value subgraphs. All
//! cells share one frame of reference: the collection built from the full
//! graph through slot N, and the actual full-graph vector at N+1. A cell
//! changes only who gets predicted and how they attach — its models are
//! conditioned on the value subgraph (and the log restricted to its
//! members, on the global slot calendar), and its predicted users join the
//! shared collection along that subgraph's edges. Value subgraphs that
//! cannot produce a score (no members, no training signal) are skipped and
//! logged, never zero-scored.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::diffusion::{build_collection, DiffusionCollection};
use crate::distortion::{self, TrendKind, TrendSeries};
use crate::error::{Error, Result};
use crate::events::{slice_events, ActionEvent, SlotIndex, SlottedLog, DEFAULT_SLICE_SECONDS};
use crate::graph::{Attribute, SocialGraph, UserId};
use crate::io;
use crate::metrics::{assemble_feature_vector, MetricContext, DAY_SECONDS};
use crate::predict::{
    self, baselines, extract_env_features, observation_sequence, FittedModels, PredictorConfig,
};

/// Prediction methods the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Dbn,
    GenModel,
    Cascade,
    LinRegress,
    DegAct,
    Random,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Dbn,
        Method::GenModel,
        Method::Cascade,
        Method::LinRegress,
        Method::DegAct,
        Method::Random,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Dbn => "dbn",
            Method::GenModel => "gen_model",
            Method::Cascade => "cascade",
            Method::LinRegress => "lin_regress",
            Method::DegAct => "deg_act",
            Method::Random => "random",
        }
    }

    pub fn parse(s: &str) -> Result<Method> {
        match s {
            "dbn" => Ok(Method::Dbn),
            "gen_model" => Ok(Method::GenModel),
            "cascade" => Ok(Method::Cascade),
            "lin_regress" => Ok(Method::LinRegress),
            "deg_act" => Ok(Method::DegAct),
            "random" => Ok(Method::Random),
            other => Err(Error::Config(format!(
                "unknown method {other:?}; expected one of dbn, gen_model, cascade, lin_regress, deg_act, random"
            ))),
        }
    }

    fn needs_fit(&self) -> bool {
        matches!(self, Method::Dbn | Method::GenModel)
    }
}

/// Incremental train/predict schedule: horizons `base_window`,
/// `base_window + 1`, … (`steps` of them); horizon N trains on slots
/// 1..=N and predicts slot N+1.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Schedule {
    pub base_window: SlotIndex,
    pub steps: u32,
}

impl Schedule {
    pub fn horizons(&self) -> Vec<SlotIndex> {
        (0..self.steps).map(|k| self.base_window + k).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub topics: Vec<String>,
    /// Attribute graphs to evaluate alongside the baseline graph.
    pub attributes: Vec<Attribute>,
    pub methods: Vec<Method>,
    pub slice_duration: i64,
    /// Slicing origin; defaults to the earliest event timestamp.
    pub origin: Option<i64>,
    pub schedule: Schedule,
    pub predictor: PredictorConfig,
    /// Seconds per unit for the rate metric.
    pub time_unit: f64,
    pub rng_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            topics: Vec::new(),
            attributes: Attribute::ALL.to_vec(),
            methods: Method::ALL.to_vec(),
            slice_duration: DEFAULT_SLICE_SECONDS,
            origin: None,
            schedule: Schedule {
                base_window: 5,
                steps: 2,
            },
            predictor: PredictorConfig::default(),
            time_unit: DAY_SECONDS,
            rng_seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.topics.is_empty() || self.topics.iter().any(String::is_empty) {
            return Err(Error::Config("need at least one non-empty topic".into()));
        }
        let unique: BTreeSet<&String> = self.topics.iter().collect();
        if unique.len() != self.topics.len() {
            return Err(Error::Config("duplicate topic in topic list".into()));
        }
        let attrs: BTreeSet<Attribute> = self.attributes.iter().copied().collect();
        if attrs.len() != self.attributes.len() {
            return Err(Error::Config("duplicate attribute in attribute list".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("need at least one method".into()));
        }
        let methods: BTreeSet<Method> = self.methods.iter().copied().collect();
        if methods.len() != self.methods.len() {
            return Err(Error::Config("duplicate method in method list".into()));
        }
        if self.slice_duration <= 0 {
            return Err(Error::Config(format!(
                "slice duration must be positive, got {}",
                self.slice_duration
            )));
        }
        if self.schedule.base_window < 3 {
            return Err(Error::Config(
                "training window must start at 3 slots or more".into(),
            ));
        }
        if self.schedule.steps == 0 {
            return Err(Error::Config("schedule needs at least one step".into()));
        }
        if !(self.time_unit > 0.0) || !self.time_unit.is_finite() {
            return Err(Error::Config(format!(
                "time unit must be positive and finite, got {}",
                self.time_unit
            )));
        }
        self.predictor.validate()
    }
}

/// One scored experiment cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub topic: String,
    /// "baseline" or the attribute name.
    pub graph: String,
    pub method: String,
    /// Training horizon N; the row scores the slot-(N+1) prediction.
    pub horizon: SlotIndex,
    pub saturation: f64,
    pub utility_search: Option<f64>,
    pub utility_news: Option<f64>,
    /// Value subgraphs averaged into this row (1 for the baseline graph).
    pub cells: usize,
    /// Value subgraphs skipped for lack of data.
    pub skipped: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

impl Report {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            out.push_str(&serde_json::to_string(row).expect("rows serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Report> {
        let mut rows = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            rows.push(serde_json::from_str(line).map_err(|e| Error::Parse {
                path: "<report>".into(),
                line: idx + 1,
                message: e.to_string(),
            })?);
        }
        Ok(Report { rows })
    }
}

/// Mean scores per (graph, method) across topics and horizons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub graph: String,
    pub method: String,
    pub mean_saturation: f64,
    pub mean_utility_search: Option<f64>,
    pub mean_utility_news: Option<f64>,
    pub rows: usize,
}

pub fn summarize(report: &Report) -> Result<Vec<SummaryRow>> {
    if report.rows.is_empty() {
        return Err(Error::Validation("cannot summarize an empty report".into()));
    }
    let mut order: Vec<(String, String)> = Vec::new();
    let mut acc: BTreeMap<(String, String), (Vec<f64>, Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for row in &report.rows {
        let key = (row.graph.clone(), row.method.clone());
        if !acc.contains_key(&key) {
            order.push(key.clone());
        }
        let entry = acc.entry(key).or_default();
        entry.0.push(row.saturation);
        if let Some(u) = row.utility_search {
            entry.1.push(u);
        }
        if let Some(u) = row.utility_news {
            entry.2.push(u);
        }
    }
    Ok(order
        .into_iter()
        .map(|key| {
            let (sat, us, un) = &acc[&key];
            SummaryRow {
                graph: key.0,
                method: key.1,
                mean_saturation: distortion::average_scores(sat).expect("non-empty group"),
                mean_utility_search: distortion::average_scores(us),
                mean_utility_news: distortion::average_scores(un),
                rows: sat.len(),
            }
        })
        .collect())
}

/// Tab-separated table of summary rows (stable column order, 6 decimals).
pub fn summary_table(rows: &[SummaryRow]) -> String {
    let mut out = String::from("graph\tmethod\tmean_saturation\tmean_utility_search\tmean_utility_news\trows\n");
    let fmt = |o: &Option<f64>| o.map_or("-".to_owned(), |v| format!("{v:.6}"));
    for r in rows {
        out.push_str(&format!(
            "{}\t{}\t{:.6}\t{}\t{}\t{}\n",
            r.graph,
            r.method,
            r.mean_saturation,
            fmt(&r.mean_utility_search),
            fmt(&r.mean_utility_news),
            r.rows
        ));
    }
    out
}

/// FNV-1a over the cell key, folded with the run seed: stable per-cell
/// randomness independent of evaluation order (the std hasher is not
/// guaranteed stable across releases, so it is not used here).
fn cell_seed(run_seed: u64, parts: &[&str]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in run_seed.to_le_bytes() {
        h ^= u64::from(byte);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    for part in parts {
        for byte in part.as_bytes() {
            h ^= u64::from(*byte);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h ^= 0xff;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// External trend rows per (topic, kind), raw as loaded from disk.
pub type TrendRows = BTreeMap<(String, TrendKind), Vec<(i64, f64)>>;

struct CellScore {
    saturation: f64,
    utility_search: Option<f64>,
    utility_news: Option<f64>,
}

struct CellWorld {
    graph: SocialGraph,
    log: SlottedLog,
    key: String,
}

impl CellWorld {
    fn new(graph: SocialGraph, full_log: &SlottedLog, key: String) -> CellWorld {
        let members: BTreeSet<UserId> = graph.user_ids().cloned().collect();
        CellWorld {
            log: full_log.restricted(&members),
            graph,
            key,
        }
    }
}

pub fn run_experiment(
    config: &ExperimentConfig,
    graph: &SocialGraph,
    events: &[ActionEvent],
    trends: &TrendRows,
    warnings: &mut Vec<String>,
) -> Result<Report> {
    config.validate()?;
    let origin = config
        .origin
        .or_else(|| events.iter().map(|e| e.timestamp).min())
        .unwrap_or(0);
    let log = slice_events(events, origin, config.slice_duration, warnings)?;

    // Cell worlds: baseline plus one world per attribute value, shared
    // across methods and horizons. A world conditions the predictors; the
    // evaluation frame stays the full graph.
    let baseline = CellWorld::new(graph.clone(), &log, "baseline".to_owned());
    let mut attribute_worlds: Vec<(Attribute, Vec<CellWorld>)> = Vec::new();
    for attr in &config.attributes {
        let values = graph.attribute_values(*attr);
        if values.is_empty() {
            warnings.push(format!(
                "attribute {} has no values in the graph; skipping its rows",
                attr.name()
            ));
        }
        let worlds: Vec<CellWorld> = values
            .iter()
            .map(|v| {
                CellWorld::new(
                    graph.attribute_subgraph(*attr, v),
                    &log,
                    format!("{}={v}", attr.name()),
                )
            })
            .collect();
        attribute_worlds.push((*attr, worlds));
    }

    // Fit cache: one Option<FittedModels> per (world, topic, horizon),
    // shared by the two model-backed methods; None records a failed fit so
    // the skip is consistent.
    let mut fit_cache: BTreeMap<(String, String, SlotIndex), Option<FittedModels>> =
        BTreeMap::new();

    let mut rows = Vec::new();
    for topic in &config.topics {
        for horizon in config.schedule.horizons() {
            let base = build_collection(graph, &log, topic, horizon, warnings)?;
            if base.nodes.is_empty() {
                warnings.push(format!(
                    "skipping every cell of {topic} · N={horizon}: empty collection over the training window"
                ));
                continue;
            }
            let actual = build_collection(graph, &log, topic, horizon + 1, warnings)?;
            let actual_vec = assemble_feature_vector(&MetricContext {
                collection: &actual,
                graph,
                topic_active_users: log.topic_active_users(topic, horizon + 1).len(),
                time_unit: config.time_unit,
            })?;
            let ctx = EvalContext {
                full_graph: graph,
                full_log: &log,
                topic,
                horizon,
                base: &base,
                actual_vec: &actual_vec,
                trend_pair: aligned_trends(trends, topic, origin, config, horizon, warnings),
            };
            for method in &config.methods {
                // Baseline row.
                match score_cell(&ctx, &baseline, *method, config, &mut fit_cache, warnings) {
                    Ok(score) => rows.push(ReportRow {
                        topic: topic.clone(),
                        graph: "baseline".to_owned(),
                        method: method.name().to_owned(),
                        horizon,
                        saturation: score.saturation,
                        utility_search: score.utility_search,
                        utility_news: score.utility_news,
                        cells: 1,
                        skipped: 0,
                    }),
                    Err(reason) => warnings.push(format!(
                        "skipping baseline · {topic} · {} · N={horizon}: {reason}",
                        method.name()
                    )),
                }

                // Attribute rows: mean over value-subgraph cells.
                for (attr, worlds) in &attribute_worlds {
                    let mut sats = Vec::new();
                    let mut searches = Vec::new();
                    let mut newses = Vec::new();
                    let mut skipped = 0usize;
                    for world in worlds {
                        match score_cell(&ctx, world, *method, config, &mut fit_cache, warnings) {
                            Ok(score) => {
                                sats.push(score.saturation);
                                if let Some(u) = score.utility_search {
                                    searches.push(u);
                                }
                                if let Some(u) = score.utility_news {
                                    newses.push(u);
                                }
                            }
                            Err(reason) => {
                                skipped += 1;
                                warnings.push(format!(
                                    "skipping {} · {topic} · {} · N={horizon}: {reason}",
                                    world.key,
                                    method.name()
                                ));
                            }
                        }
                    }
                    match distortion::average_scores(&sats) {
                        Some(mean_sat) => rows.push(ReportRow {
                            topic: topic.clone(),
                            graph: attr.name().to_owned(),
                            method: method.name().to_owned(),
                            horizon,
                            saturation: mean_sat,
                            utility_search: distortion::average_scores(&searches),
                            utility_news: distortion::average_scores(&newses),
                            cells: sats.len(),
                            skipped,
                        }),
                        None => warnings.push(format!(
                            "skipping {} · {topic} · {} · N={horizon}: every value subgraph was skipped",
                            attr.name(),
                            method.name()
                        )),
                    }
                }
            }
        }
    }
    Ok(Report { rows })
}

/// Align both trend kinds for one topic to the slot calendar, horizon N+1.
fn aligned_trends(
    trends: &TrendRows,
    topic: &str,
    origin: i64,
    config: &ExperimentConfig,
    horizon: SlotIndex,
    warnings: &mut Vec<String>,
) -> (Option<TrendSeries>, Option<TrendSeries>) {
    let mut pick = |kind: TrendKind| -> Option<TrendSeries> {
        let rows = trends.get(&(topic.to_owned(), kind))?;
        match io::align_trend(
            rows,
            origin,
            config.slice_duration,
            horizon + 1,
            topic,
            kind,
            warnings,
        ) {
            Ok(series) => match series.validate() {
                Ok(()) => Some(series),
                Err(e) => {
                    warnings.push(format!(
                        "{} trend for topic `{topic}` unusable at N={horizon}: {e}",
                        kind.name()
                    ));
                    None
                }
            },
            Err(e) => {
                warnings.push(format!(
                    "{} trend for topic `{topic}` unusable at N={horizon}: {e}",
                    kind.name()
                ));
                None
            }
        }
    };
    (pick(TrendKind::Search), pick(TrendKind::News))
}

/// Shared per-(topic, horizon) evaluation frame: the full-graph collection
/// through slot N and the actual vector at N+1 every cell is scored
/// against.
struct EvalContext<'a> {
    full_graph: &'a SocialGraph,
    full_log: &'a SlottedLog,
    topic: &'a str,
    horizon: SlotIndex,
    base: &'a DiffusionCollection,
    actual_vec: &'a crate::metrics::DiffusionFeatureVector,
    trend_pair: (Option<TrendSeries>, Option<TrendSeries>),
}

/// Score one cell, or explain the skip. The cell world decides who gets
/// predicted and along which edges they attach; the extension, the user
/// count η̂, and the comparison all live in the shared full-graph frame.
fn score_cell(
    ctx: &EvalContext,
    world: &CellWorld,
    method: Method,
    config: &ExperimentConfig,
    fit_cache: &mut BTreeMap<(String, String, SlotIndex), Option<FittedModels>>,
    warnings: &mut Vec<String>,
) -> Result<CellScore> {
    if world.graph.user_count() == 0 {
        return Err(Error::Model("empty subgraph".into()));
    }

    let scores = predict_scores(world, ctx.topic, ctx.horizon, method, config, fit_cache, warnings)?;
    let tau = config.predictor.tau;
    let predicted: BTreeSet<&UserId> = scores
        .iter()
        .filter(|(u, s)| **s >= tau && world.graph.contains(u))
        .map(|(u, _)| u)
        .collect();
    let extended = predict::extend_collection(
        ctx.base,
        &scores,
        tau,
        &world.graph,
        ctx.full_log.slot_midpoint(ctx.horizon + 1),
    );

    let mut predicted_users = ctx.full_log.topic_active_users(ctx.topic, ctx.horizon);
    predicted_users.extend(predicted.iter().map(|u| (*u).clone()));
    let predicted_vec = assemble_feature_vector(&MetricContext {
        collection: &extended,
        graph: ctx.full_graph,
        topic_active_users: predicted_users.len(),
        time_unit: config.time_unit,
    })?;

    let mut utility = |trend: &Option<TrendSeries>| -> Option<f64> {
        let trend = trend.as_ref()?;
        match distortion::utility(&extended, trend) {
            Ok(u) => Some(u),
            Err(e) => {
                warnings.push(format!(
                    "utility unavailable for {} · {} · {} · N={}: {e}",
                    world.key,
                    ctx.topic,
                    method.name(),
                    ctx.horizon
                ));
                None
            }
        }
    };
    let utility_search = utility(&ctx.trend_pair.0);
    let utility_news = utility(&ctx.trend_pair.1);

    Ok(CellScore {
        saturation: distortion::saturation(&predicted_vec, ctx.actual_vec),
        utility_search,
        utility_news,
    })
}

fn predict_scores(
    world: &CellWorld,
    topic: &str,
    horizon: SlotIndex,
    method: Method,
    config: &ExperimentConfig,
    fit_cache: &mut BTreeMap<(String, String, SlotIndex), Option<FittedModels>>,
    warnings: &mut Vec<String>,
) -> Result<BTreeMap<UserId, f64>> {
    let fitted = if method.needs_fit() {
        let key = (world.key.clone(), topic.to_owned(), horizon);
        if !fit_cache.contains_key(&key) {
            let fit_seed = cell_seed(
                config.rng_seed,
                &["fit", topic, &world.key, &horizon.to_string()],
            );
            let cell_cfg = PredictorConfig {
                seed: fit_seed,
                ..config.predictor.clone()
            };
            let result = predict::fit_models(&world.graph, &world.log, topic, horizon, &cell_cfg);
            fit_cache.insert(key.clone(), result.ok());
        }
        match fit_cache[&key].as_ref() {
            Some(models) => Some(models.clone()),
            None => {
                return Err(Error::Model(
                    "no training signal for the sequence models".into(),
                ))
            }
        }
    } else {
        None
    };
    let random_seed = cell_seed(config.rng_seed, &[topic, &world.key, &horizon.to_string()]);
    method_scores(
        method,
        &world.graph,
        &world.log,
        topic,
        horizon,
        &config.predictor,
        random_seed,
        fitted.as_ref(),
        warnings,
    )
}

/// Score every user for slot `n + 1` with one method. The two model-backed
/// methods need `fitted`; the rest ignore it. `random_seed` only feeds the
/// random baseline.
#[allow(clippy::too_many_arguments)]
pub fn method_scores(
    method: Method,
    g: &SocialGraph,
    log: &SlottedLog,
    topic: &str,
    n: SlotIndex,
    cfg: &PredictorConfig,
    random_seed: u64,
    fitted: Option<&FittedModels>,
    warnings: &mut Vec<String>,
) -> Result<BTreeMap<UserId, f64>> {
    match method {
        Method::Cascade => baselines::cascade(g, log, topic, n, cfg.phi),
        Method::LinRegress => baselines::lin_regress(g, log, topic, n),
        Method::DegAct => Ok(baselines::deg_act(g, log, n)),
        Method::Random => Ok(baselines::random_uniform(g, random_seed)),
        Method::Dbn | Method::GenModel => {
            let models = fitted.ok_or_else(|| {
                Error::Model(format!("method {} needs fitted models", method.name()))
            })?;
            let mut out = BTreeMap::new();
            for user in g.user_ids() {
                let history = observation_sequence(user, topic, log, n);
                let score = match method {
                    Method::Dbn => {
                        let features = extract_env_features(user, topic, n, g, log);
                        predict::predict_action(models, &history, &features, warnings)?
                    }
                    _ => predict::predict_action_featureless(models, &history, warnings)?,
                };
                out.insert(user.clone(), score);
            }
            Ok(out)
        }
    }
}

/// Convenience: the actual collection and feature vector at `horizon`,
/// used by the CLI's build/metrics commands.
pub fn observed_vector(
    graph: &SocialGraph,
    log: &SlottedLog,
    topic: &str,
    horizon: SlotIndex,
    time_unit: f64,
    warnings: &mut Vec<String>,
) -> Result<(DiffusionCollection, crate::metrics::DiffusionFeatureVector)> {
    let collection = build_collection(graph, log, topic, horizon, warnings)?;
    let vector = assemble_feature_vector(&MetricContext {
        collection: &collection,
        graph,
        topic_active_users: log.topic_active_users(topic, horizon).len(),
        time_unit,
    })?;
    Ok((collection, vector))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::fixtures::{chain4, DAY};
    use crate::synth::{generate, SynthConfig, SYNTH_TOPIC};

    fn chain_config() -> ExperimentConfig {
        ExperimentConfig {
            topics: vec!["t".into()],
            attributes: vec![],
            methods: vec![Method::Cascade],
            origin: Some(0),
            schedule: Schedule {
                base_window: 3,
                steps: 1,
            },
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn chain_fixture_cascade_row_matches_hand_computation() {
        // At N=3 every user's active-friend fraction reaches φ=0.1, so all
        // four join slot 4. Extended vs actual day-4 vectors differ most in
        // participation (1.0 vs 0.75) and spread (0.5 vs 0.25):
        // saturation = 1 − 0.25.
        let (g, log, _) = chain4();
        let events: Vec<ActionEvent> = (1..=log.max_slot())
            .flat_map(|m| {
                log.actors_on_topic(m, "t")
                    .into_iter()
                    .flat_map(|(u, times)| {
                        times
                            .into_iter()
                            .map(move |ts| crate::events::topic_event(u.as_str(), ts, "t"))
                    })
            })
            .collect();
        let mut w = Vec::new();
        let report =
            run_experiment(&chain_config(), &g, &events, &TrendRows::new(), &mut w).unwrap();
        assert_eq!(report.rows.len(), 1);
        let row = &report.rows[0];
        assert_eq!(row.graph, "baseline");
        assert_eq!(row.method, "cascade");
        assert_eq!(row.horizon, 3);
        assert_eq!(row.cells, 1);
        assert!((row.saturation - 0.75).abs() < 1e-12, "{}", row.saturation);
        assert_eq!(row.utility_search, None);
    }

    #[test]
    fn trend_rows_add_utility_columns() {
        let (g, _, _) = chain4();
        let events = vec![
            crate::events::topic_event("A", 0, "t"),
            crate::events::topic_event("B", DAY, "t"),
            crate::events::topic_event("B", 2 * DAY, "t"),
            crate::events::topic_event("C", 2 * DAY, "t"),
            crate::events::topic_event("D", 3 * DAY, "t"),
        ];
        let mut trends = TrendRows::new();
        trends.insert(
            ("t".into(), TrendKind::Search),
            vec![(0, 2.0), (DAY, 2.0), (2 * DAY, 2.0), (3 * DAY, 2.0)],
        );
        let mut w = Vec::new();
        let report = run_experiment(&chain_config(), &g, &events, &trends, &mut w).unwrap();
        let row = &report.rows[0];
        assert!(row.utility_search.is_some());
        assert_eq!(row.utility_news, None);
        let u = row.utility_search.unwrap();
        assert!((0.0..=1.0).contains(&u));
    }

    #[test]
    fn synth_world_fills_the_full_cartesian_product() {
        let synth = generate(&SynthConfig {
            n_users: 80,
            within_group_edge_prob: 0.25,
            propagation_homophilous: 0.5,
            rng_seed: 3,
            ..SynthConfig::default()
        })
        .unwrap();
        let config = ExperimentConfig {
            topics: vec![SYNTH_TOPIC.into()],
            attributes: vec![Attribute::Location, Attribute::ContentRole],
            methods: vec![Method::Cascade, Method::DegAct, Method::Random],
            origin: Some(0),
            schedule: Schedule {
                base_window: 4,
                steps: 2,
            },
            ..ExperimentConfig::default()
        };
        let mut w = Vec::new();
        let report =
            run_experiment(&config, &synth.graph, &synth.events, &TrendRows::new(), &mut w)
                .unwrap();
        // 1 topic × 2 horizons × 3 methods × (baseline + 2 attributes).
        assert_eq!(report.rows.len(), 2 * 3 * 3);
        for row in &report.rows {
            assert!((0.0..=1.0).contains(&row.saturation));
            assert_eq!(row.skipped, 0, "unexpected skip in {row:?}");
        }
        let location_rows: Vec<_> =
            report.rows.iter().filter(|r| r.graph == "location").collect();
        assert!(location_rows.iter().all(|r| r.cells == 4));
    }

    #[test]
    fn reports_are_deterministic() {
        let synth = generate(&SynthConfig {
            n_users: 80,
            within_group_edge_prob: 0.25,
            propagation_homophilous: 0.5,
            rng_seed: 11,
            ..SynthConfig::default()
        })
        .unwrap();
        let config = ExperimentConfig {
            topics: vec![SYNTH_TOPIC.into()],
            attributes: vec![Attribute::Location],
            methods: Method::ALL.to_vec(),
            origin: Some(0),
            schedule: Schedule {
                base_window: 4,
                steps: 1,
            },
            rng_seed: 7,
            ..ExperimentConfig::default()
        };
        let mut w1 = Vec::new();
        let r1 = run_experiment(&config, &synth.graph, &synth.events, &TrendRows::new(), &mut w1)
            .unwrap();
        let mut w2 = Vec::new();
        let r2 = run_experiment(&config, &synth.graph, &synth.events, &TrendRows::new(), &mut w2)
            .unwrap();
        assert_eq!(r1.to_jsonl(), r2.to_jsonl());
        assert_eq!(w1, w2);

        let shifted = ExperimentConfig {
            rng_seed: 8,
            ..config
        };
        let mut w3 = Vec::new();
        let r3 = run_experiment(&shifted, &synth.graph, &synth.events, &TrendRows::new(), &mut w3)
            .unwrap();
        let random_differs = r1
            .rows
            .iter()
            .zip(&r3.rows)
            .any(|(a, b)| a.method == "random" && a.saturation != b.saturation);
        assert!(random_differs, "random baseline should react to the seed");
    }

    #[test]
    fn jsonl_roundtrip_preserves_rows() {
        let report = Report {
            rows: vec![ReportRow {
                topic: "t".into(),
                graph: "baseline".into(),
                method: "dbn".into(),
                horizon: 5,
                saturation: 0.875,
                utility_search: Some(0.5),
                utility_news: None,
                cells: 1,
                skipped: 0,
            }],
        };
        let text = report.to_jsonl();
        assert_eq!(Report::from_jsonl(&text).unwrap(), report);
    }

    #[test]
    fn summarize_means_and_errors() {
        let row = |graph: &str, sat: f64| ReportRow {
            topic: "t".into(),
            graph: graph.into(),
            method: "dbn".into(),
            horizon: 4,
            saturation: sat,
            utility_search: None,
            utility_news: None,
            cells: 1,
            skipped: 0,
        };
        let single = Report {
            rows: vec![row("baseline", 0.7)],
        };
        let s = summarize(&single).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].mean_saturation, 0.7);
        assert_eq!(s[0].rows, 1);

        let pair = Report {
            rows: vec![row("baseline", 0.4), row("baseline", 0.6)],
        };
        let s = summarize(&pair).unwrap();
        assert_eq!(s.len(), 1);
        assert!((s[0].mean_saturation - 0.5).abs() < 1e-15);

        assert_eq!(
            summarize(&Report::default()).unwrap_err().category(),
            "validation"
        );
        let table = summary_table(&s);
        assert!(table.starts_with("graph\tmethod\t"));
        assert!(table.contains("0.500000"));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let ok = chain_config();
        assert!(ok.validate().is_ok());
        let cases = [
            ExperimentConfig {
                topics: vec![],
                ..ok.clone()
            },
            ExperimentConfig {
                topics: vec!["a".into(), "a".into()],
                ..ok.clone()
            },
            ExperimentConfig {
                methods: vec![],
                ..ok.clone()
            },
            ExperimentConfig {
                methods: vec![Method::Dbn, Method::Dbn],
                ..ok.clone()
            },
            ExperimentConfig {
                slice_duration: 0,
                ..ok.clone()
            },
            ExperimentConfig {
                schedule: Schedule {
                    base_window: 2,
                    steps: 1,
                },
                ..ok.clone()
            },
            ExperimentConfig {
                schedule: Schedule {
                    base_window: 5,
                    steps: 0,
                },
                ..ok.clone()
            },
            ExperimentConfig {
                attributes: vec![Attribute::Location, Attribute::Location],
                ..ok.clone()
            },
            ExperimentConfig {
                time_unit: 0.0,
                ..ok
            },
        ];
        for cfg in cases {
            assert_eq!(cfg.validate().unwrap_err().category(), "config");
        }
    }

    #[test]
    fn dbn_runs_end_to_end_on_synthetic_data() {
        let synth = generate(&SynthConfig {
            n_users: 100,
            within_group_edge_prob: 0.2,
            propagation_homophilous: 0.5,
            rng_seed: 5,
            ..SynthConfig::default()
        })
        .unwrap();
        let config = ExperimentConfig {
            topics: vec![SYNTH_TOPIC.into()],
            attributes: vec![Attribute::Location],
            methods: vec![Method::Dbn, Method::GenModel],
            origin: Some(0),
            schedule: Schedule {
                base_window: 5,
                steps: 1,
            },
            ..ExperimentConfig::default()
        };
        let mut w = Vec::new();
        let report =
            run_experiment(&config, &synth.graph, &synth.events, &TrendRows::new(), &mut w)
                .unwrap();
        assert_eq!(report.rows.len(), 4);
        for row in &report.rows {
            assert!(
                (0.0..=1.0).contains(&row.saturation),
                "row out of range: {row:?}"
            );
        }
    }
}
