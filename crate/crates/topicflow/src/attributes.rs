//! Derivation of the four user attributes used for homophily analysis:
//! continent (from timezone), information role (from response/post ratio),
//! content role (from informational-post fraction), and activity cluster
//! (k-medoids over hourly posting distributions with symmetrized KL).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::ActionEvent;
use crate::graph::{UserId, UserRecord};

/// Continent a timezone resolves to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Continent {
    NorthAmerica,
    SouthAmerica,
    Europe,
    Asia,
    Africa,
    Oceania,
    Other,
}

impl Continent {
    pub fn name(&self) -> &'static str {
        match self {
            Continent::NorthAmerica => "NorthAmerica",
            Continent::SouthAmerica => "SouthAmerica",
            Continent::Europe => "Europe",
            Continent::Asia => "Asia",
            Continent::Africa => "Africa",
            Continent::Oceania => "Oceania",
            Continent::Other => "Other",
        }
    }

    pub fn parse(s: &str) -> Result<Continent> {
        match s.trim() {
            "NorthAmerica" => Ok(Continent::NorthAmerica),
            "SouthAmerica" => Ok(Continent::SouthAmerica),
            "Europe" => Ok(Continent::Europe),
            "Asia" => Ok(Continent::Asia),
            "Africa" => Ok(Continent::Africa),
            "Oceania" => Ok(Continent::Oceania),
            "Other" => Ok(Continent::Other),
            other => Err(Error::Parse {
                path: String::new(),
                line: 0,
                message: format!("unknown continent {other:?}"),
            }),
        }
    }
}

impl fmt::Display for Continent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Information role from the response-to-post ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    Generator,
    Mediator,
    Receptor,
}

impl Role {
    pub fn name(&self) -> &'static str {
        match self {
            Role::Generator => "Generator",
            Role::Mediator => "Mediator",
            Role::Receptor => "Receptor",
        }
    }

    pub fn parse(s: &str) -> Result<Role> {
        match s.trim() {
            "Generator" => Ok(Role::Generator),
            "Mediator" => Ok(Role::Mediator),
            "Receptor" => Ok(Role::Receptor),
            other => Err(Error::Parse {
                path: String::new(),
                line: 0,
                message: format!("unknown information role {other:?}"),
            }),
        }
    }
}

/// Content-creation role from the informational-post fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ContentRole {
    Meformer,
    Informer,
}

impl ContentRole {
    pub fn name(&self) -> &'static str {
        match self {
            ContentRole::Meformer => "Meformer",
            ContentRole::Informer => "Informer",
        }
    }

    pub fn parse(s: &str) -> Result<ContentRole> {
        match s.trim() {
            "Meformer" => Ok(ContentRole::Meformer),
            "Informer" => Ok(ContentRole::Informer),
            other => Err(Error::Parse {
                path: String::new(),
                line: 0,
                message: format!("unknown content role {other:?}"),
            }),
        }
    }
}

/// Human-readable timezone labels (the common web-app picker set) mapped to
/// continents, used before the IANA prefix fallback.
const TIMEZONE_TABLE: &[(&str, Continent)] = &[
    // Pacific islands and associated zones
    ("International Date Line West", Continent::Other),
    ("Midway Island", Continent::Oceania),
    ("American Samoa", Continent::Oceania),
    ("Samoa", Continent::Oceania),
    ("Hawaii", Continent::Oceania),
    ("Guam", Continent::Oceania),
    ("Port Moresby", Continent::Oceania),
    ("Solomon Is.", Continent::Oceania),
    ("New Caledonia", Continent::Oceania),
    ("Fiji", Continent::Oceania),
    ("Marshall Is.", Continent::Oceania),
    ("Auckland", Continent::Oceania),
    ("Wellington", Continent::Oceania),
    ("Nuku'alofa", Continent::Oceania),
    ("Tokelau Is.", Continent::Oceania),
    ("Chatham Is.", Continent::Oceania),
    // Australia
    ("Perth", Continent::Oceania),
    ("Darwin", Continent::Oceania),
    ("Adelaide", Continent::Oceania),
    ("Canberra", Continent::Oceania),
    ("Melbourne", Continent::Oceania),
    ("Sydney", Continent::Oceania),
    ("Brisbane", Continent::Oceania),
    ("Hobart", Continent::Oceania),
    // North and Central America
    ("Alaska", Continent::NorthAmerica),
    ("Pacific Time (US & Canada)", Continent::NorthAmerica),
    ("Tijuana", Continent::NorthAmerica),
    ("Mountain Time (US & Canada)", Continent::NorthAmerica),
    ("Arizona", Continent::NorthAmerica),
    ("Chihuahua", Continent::NorthAmerica),
    ("Mazatlan", Continent::NorthAmerica),
    ("Central Time (US & Canada)", Continent::NorthAmerica),
    ("Saskatchewan", Continent::NorthAmerica),
    ("Guadalajara", Continent::NorthAmerica),
    ("Mexico City", Continent::NorthAmerica),
    ("Monterrey", Continent::NorthAmerica),
    ("Central America", Continent::NorthAmerica),
    ("Eastern Time (US & Canada)", Continent::NorthAmerica),
    ("Indiana (East)", Continent::NorthAmerica),
    ("Atlantic Time (Canada)", Continent::NorthAmerica),
    ("Newfoundland", Continent::NorthAmerica),
    ("Greenland", Continent::NorthAmerica),
    // South America
    ("Bogota", Continent::SouthAmerica),
    ("Lima", Continent::SouthAmerica),
    ("Quito", Continent::SouthAmerica),
    ("Caracas", Continent::SouthAmerica),
    ("La Paz", Continent::SouthAmerica),
    ("Santiago", Continent::SouthAmerica),
    ("Brasilia", Continent::SouthAmerica),
    ("Buenos Aires", Continent::SouthAmerica),
    ("Georgetown", Continent::SouthAmerica),
    ("Montevideo", Continent::SouthAmerica),
    // Atlantic / unresolved
    ("Mid-Atlantic", Continent::Other),
    ("UTC", Continent::Other),
    // Europe
    ("Azores", Continent::Europe),
    ("Dublin", Continent::Europe),
    ("Edinburgh", Continent::Europe),
    ("Lisbon", Continent::Europe),
    ("London", Continent::Europe),
    ("Belgrade", Continent::Europe),
    ("Bratislava", Continent::Europe),
    ("Budapest", Continent::Europe),
    ("Ljubljana", Continent::Europe),
    ("Prague", Continent::Europe),
    ("Sarajevo", Continent::Europe),
    ("Skopje", Continent::Europe),
    ("Warsaw", Continent::Europe),
    ("Zagreb", Continent::Europe),
    ("Brussels", Continent::Europe),
    ("Copenhagen", Continent::Europe),
    ("Madrid", Continent::Europe),
    ("Paris", Continent::Europe),
    ("Amsterdam", Continent::Europe),
    ("Berlin", Continent::Europe),
    ("Bern", Continent::Europe),
    ("Zurich", Continent::Europe),
    ("Rome", Continent::Europe),
    ("Stockholm", Continent::Europe),
    ("Vienna", Continent::Europe),
    ("Bucharest", Continent::Europe),
    ("Helsinki", Continent::Europe),
    ("Kyiv", Continent::Europe),
    ("Riga", Continent::Europe),
    ("Sofia", Continent::Europe),
    ("Tallinn", Continent::Europe),
    ("Vilnius", Continent::Europe),
    ("Athens", Continent::Europe),
    ("Istanbul", Continent::Europe),
    ("Minsk", Continent::Europe),
    ("Kaliningrad", Continent::Europe),
    ("Moscow", Continent::Europe),
    ("St. Petersburg", Continent::Europe),
    ("Volgograd", Continent::Europe),
    ("Samara", Continent::Europe),
    // Africa
    ("Casablanca", Continent::Africa),
    ("Monrovia", Continent::Africa),
    ("West Central Africa", Continent::Africa),
    ("Cairo", Continent::Africa),
    ("Harare", Continent::Africa),
    ("Pretoria", Continent::Africa),
    ("Nairobi", Continent::Africa),
    ("Cape Verde Is.", Continent::Africa),
    // Asia and the Middle East
    ("Jerusalem", Continent::Asia),
    ("Kuwait", Continent::Asia),
    ("Riyadh", Continent::Asia),
    ("Baghdad", Continent::Asia),
    ("Tehran", Continent::Asia),
    ("Abu Dhabi", Continent::Asia),
    ("Muscat", Continent::Asia),
    ("Baku", Continent::Asia),
    ("Tbilisi", Continent::Asia),
    ("Yerevan", Continent::Asia),
    ("Kabul", Continent::Asia),
    ("Ekaterinburg", Continent::Asia),
    ("Islamabad", Continent::Asia),
    ("Karachi", Continent::Asia),
    ("Tashkent", Continent::Asia),
    ("Chennai", Continent::Asia),
    ("Kolkata", Continent::Asia),
    ("Mumbai", Continent::Asia),
    ("New Delhi", Continent::Asia),
    ("Kathmandu", Continent::Asia),
    ("Astana", Continent::Asia),
    ("Dhaka", Continent::Asia),
    ("Sri Jayawardenepura", Continent::Asia),
    ("Almaty", Continent::Asia),
    ("Novosibirsk", Continent::Asia),
    ("Rangoon", Continent::Asia),
    ("Bangkok", Continent::Asia),
    ("Hanoi", Continent::Asia),
    ("Jakarta", Continent::Asia),
    ("Krasnoyarsk", Continent::Asia),
    ("Beijing", Continent::Asia),
    ("Chongqing", Continent::Asia),
    ("Urumqi", Continent::Asia),
    ("Hong Kong", Continent::Asia),
    ("Kuala Lumpur", Continent::Asia),
    ("Singapore", Continent::Asia),
    ("Taipei", Continent::Asia),
    ("Irkutsk", Continent::Asia),
    ("Ulaanbaatar", Continent::Asia),
    ("Seoul", Continent::Asia),
    ("Osaka", Continent::Asia),
    ("Sapporo", Continent::Asia),
    ("Tokyo", Continent::Asia),
    ("Yakutsk", Continent::Asia),
    ("Vladivostok", Continent::Asia),
    ("Magadan", Continent::Asia),
    ("Srednekolymsk", Continent::Asia),
    ("Kamchatka", Continent::Asia),
];

/// IANA zone names under `America/` that sit on the South American continent;
/// everything else under that prefix resolves to North America.
const SOUTH_AMERICA_ZONES: &[&str] = &[
    "Araguaina",
    "Asuncion",
    "Bahia",
    "Belem",
    "Boa_Vista",
    "Bogota",
    "Campo_Grande",
    "Caracas",
    "Cayenne",
    "Cuiaba",
    "Eirunepe",
    "Fortaleza",
    "Guayaquil",
    "Guyana",
    "La_Paz",
    "Lima",
    "Maceio",
    "Manaus",
    "Montevideo",
    "Noronha",
    "Paramaribo",
    "Porto_Velho",
    "Punta_Arenas",
    "Recife",
    "Rio_Branco",
    "Santarem",
    "Santiago",
    "Sao_Paulo",
];

/// Resolves timezone strings to continents: user overrides first, then the
/// shipped label table, then IANA prefix rules; anything else is Other.
#[derive(Debug, Clone, Default)]
pub struct TimezoneMapper {
    overrides: BTreeMap<String, Continent>,
}

impl TimezoneMapper {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_overrides(overrides: BTreeMap<String, Continent>) -> Self {
        TimezoneMapper { overrides }
    }

    pub fn continent(&self, timezone: &str) -> Continent {
        let tz = timezone.trim();
        if let Some(c) = self.overrides.get(tz) {
            return *c;
        }
        if let Some((_, c)) = TIMEZONE_TABLE.iter().find(|(name, _)| *name == tz) {
            return *c;
        }
        if let Some(rest) = tz.strip_prefix("America/") {
            let city = rest.split('/').next().unwrap_or(rest);
            if rest.starts_with("Argentina/") || SOUTH_AMERICA_ZONES.contains(&city) {
                return Continent::SouthAmerica;
            }
            return Continent::NorthAmerica;
        }
        match tz.split('/').next() {
            Some("Europe") => Continent::Europe,
            Some("Asia") => Continent::Asia,
            Some("Africa") => Continent::Africa,
            Some("Australia") | Some("Pacific") => Continent::Oceania,
            _ => Continent::Other,
        }
    }
}

/// Timezone → continent. Total: unrecognized input maps to Other.
pub fn derive_location(timezone: &str, mapper: &TimezoneMapper) -> Continent {
    mapper.continent(timezone)
}

/// ρ = responses/posts; below `low` → Generator, above `high` → Receptor,
/// else Mediator.
pub fn derive_info_role(
    posts_created: u64,
    responses_received: u64,
    thresholds: (f64, f64),
) -> Result<Role> {
    let (low, high) = thresholds;
    if !(low <= high) {
        return Err(Error::Config(format!(
            "info-role thresholds must satisfy low <= high, got ({low}, {high})"
        )));
    }
    if posts_created == 0 {
        return Err(Error::Domain(
            "information role undefined for a user with no posts".into(),
        ));
    }
    let rho = responses_received as f64 / posts_created as f64;
    Ok(if rho < low {
        Role::Generator
    } else if rho > high {
        Role::Receptor
    } else {
        Role::Mediator
    })
}

/// Population tercile cut points: with the values sorted ascending,
/// low = v[floor(n/3)] and high = v[n - floor(n/3) - 1], so strict
/// comparisons against them split n=3m distinct values into thirds.
pub fn tercile_thresholds(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Data(
            "cannot compute tercile thresholds of an empty population".into(),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite value in tercile input".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let cut = n / 3;
    Ok((sorted[cut], sorted[n - cut - 1]))
}

/// Informer iff informational/total ≥ threshold (inclusive), else Meformer.
pub fn derive_content_role(
    posts_total: u64,
    posts_informational: u64,
    threshold: f64,
) -> Result<ContentRole> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::Config(format!(
            "content-role threshold must lie in [0,1], got {threshold}"
        )));
    }
    if posts_total == 0 {
        return Err(Error::Domain(
            "content role undefined for a user with no posts".into(),
        ));
    }
    if posts_informational > posts_total {
        return Err(Error::Validation(format!(
            "informational post count {posts_informational} exceeds total {posts_total}"
        )));
    }
    let frac = posts_informational as f64 / posts_total as f64;
    Ok(if frac >= threshold {
        ContentRole::Informer
    } else {
        ContentRole::Meformer
    })
}

pub const ACTIVITY_SMOOTHING: f64 = 1e-6;

/// Normalized 24-bucket hour-of-day posting profile, ε-smoothed so every
/// entry is strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityDistribution {
    entries: [f64; 24],
}

impl ActivityDistribution {
    /// Smooth and normalize raw non-negative bucket weights.
    pub fn from_weights(weights: &[f64; 24]) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Domain(
                "activity weights must be finite and non-negative".into(),
            ));
        }
        let total: f64 = weights.iter().sum::<f64>() + 24.0 * ACTIVITY_SMOOTHING;
        let mut entries = [0.0; 24];
        for (e, w) in entries.iter_mut().zip(weights) {
            *e = (w + ACTIVITY_SMOOTHING) / total;
        }
        Ok(ActivityDistribution { entries })
    }

    /// Bucket UTC hours of day (each in 0..24).
    pub fn from_hours(hours: &[u8]) -> Result<Self> {
        if hours.is_empty() {
            return Err(Error::Domain(
                "activity distribution undefined with no events".into(),
            ));
        }
        let mut weights = [0.0; 24];
        for h in hours {
            let h = *h as usize;
            if h >= 24 {
                return Err(Error::Validation(format!("hour of day out of range: {h}")));
            }
            weights[h] += 1.0;
        }
        Self::from_weights(&weights)
    }

    /// Bucket epoch-second timestamps by UTC hour of day.
    pub fn from_timestamps(timestamps: &[i64]) -> Result<Self> {
        let hours: Vec<u8> = timestamps
            .iter()
            .map(|t| (t.div_euclid(3600)).rem_euclid(24) as u8)
            .collect();
        Self::from_hours(&hours)
    }

    pub fn entries(&self) -> &[f64; 24] {
        &self.entries
    }
}

/// KL divergence Σ p·ln(p/q); both inputs must be strictly positive.
pub fn kl_divergence(p: &ActivityDistribution, q: &ActivityDistribution) -> Result<f64> {
    let mut sum = 0.0;
    for (pi, qi) in p.entries.iter().zip(q.entries.iter()) {
        if *pi <= 0.0 || *qi <= 0.0 {
            return Err(Error::Domain(
                "KL divergence requires strictly positive entries".into(),
            ));
        }
        sum += pi * (pi / qi).ln();
    }
    Ok(sum)
}

/// Symmetrized divergence KL(p,q) + KL(q,p).
pub fn kl_symmetric(p: &ActivityDistribution, q: &ActivityDistribution) -> Result<f64> {
    Ok(kl_divergence(p, q)? + kl_divergence(q, p)?)
}

/// Partition users into k clusters by k-medoids (greedy build + swap) under
/// symmetrized KL distance. The procedure is fully deterministic — ties fall
/// to the lowest UserId — so the seed only pins the interface.
pub fn cluster_activity(
    distributions: &BTreeMap<UserId, ActivityDistribution>,
    k: usize,
    seed: u64,
) -> Result<BTreeMap<UserId, u32>> {
    Ok(cluster_activity_detailed(distributions, k, seed)?.0)
}

/// As `cluster_activity`, also returning the medoid users in cluster order.
pub fn cluster_activity_detailed(
    distributions: &BTreeMap<UserId, ActivityDistribution>,
    k: usize,
    _seed: u64,
) -> Result<(BTreeMap<UserId, u32>, Vec<UserId>)> {
    if k == 0 {
        return Err(Error::Config("cluster count k must be at least 1".into()));
    }
    let users: Vec<&UserId> = distributions.keys().collect();
    let n = users.len();
    if n < k {
        return Err(Error::Config(format!(
            "cannot form {k} clusters from {n} users"
        )));
    }

    let dists: Vec<&ActivityDistribution> = distributions.values().collect();
    let mut d = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = kl_symmetric(dists[i], dists[j])?;
            d[i][j] = v;
            d[j][i] = v;
        }
    }

    // Greedy build: start from the 1-medoid optimum, then add whichever
    // candidate most reduces total distance-to-nearest-medoid.
    let mut medoids: Vec<usize> = Vec::with_capacity(k);
    let mut nearest: Vec<f64> = vec![f64::INFINITY; n];
    {
        let mut best = 0usize;
        let mut best_cost = f64::INFINITY;
        for i in 0..n {
            let cost: f64 = (0..n).map(|j| d[i][j]).sum();
            if cost < best_cost {
                best_cost = cost;
                best = i;
            }
        }
        medoids.push(best);
        for j in 0..n {
            nearest[j] = d[best][j];
        }
    }
    while medoids.len() < k {
        let mut best: Option<usize> = None;
        let mut best_gain = f64::NEG_INFINITY;
        for c in 0..n {
            if medoids.contains(&c) {
                continue;
            }
            let gain: f64 = (0..n).map(|j| (nearest[j] - d[c][j]).max(0.0)).sum();
            if gain > best_gain {
                best_gain = gain;
                best = Some(c);
            }
        }
        let c = best.expect("n >= k guarantees a candidate");
        medoids.push(c);
        for j in 0..n {
            nearest[j] = nearest[j].min(d[c][j]);
        }
    }

    // Swap phase: take the best strictly improving (medoid, candidate) swap
    // until none remains.
    let total_cost = |meds: &[usize]| -> f64 {
        (0..n)
            .map(|j| meds.iter().map(|&m| d[m][j]).fold(f64::INFINITY, f64::min))
            .sum()
    };
    let mut cost = total_cost(&medoids);
    for _ in 0..(10 * n.max(1)) {
        let mut best_swap: Option<(usize, usize, f64)> = None;
        for mi in 0..medoids.len() {
            for h in 0..n {
                if medoids.contains(&h) {
                    continue;
                }
                let mut trial = medoids.clone();
                trial[mi] = h;
                let c = total_cost(&trial);
                if c + 1e-12 < cost && best_swap.is_none_or(|(_, _, bc)| c < bc) {
                    best_swap = Some((mi, h, c));
                }
            }
        }
        match best_swap {
            Some((mi, h, c)) => {
                medoids[mi] = h;
                cost = c;
            }
            None => break,
        }
    }

    medoids.sort_unstable();
    let medoid_users: Vec<UserId> = medoids.iter().map(|&m| users[m].clone()).collect();
    let mut assignment = BTreeMap::new();
    for j in 0..n {
        let mut best_cluster = 0u32;
        let mut best_dist = f64::INFINITY;
        for (ci, &m) in medoids.iter().enumerate() {
            if d[m][j] < best_dist {
                best_dist = d[m][j];
                best_cluster = ci as u32;
            }
        }
        assignment.insert(users[j].clone(), best_cluster);
    }
    Ok((assignment, medoid_users))
}

/// Knobs for bulk attribute derivation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DerivationConfig {
    /// Explicit (low, high) ρ cut points; None → population terciles.
    pub info_thresholds: Option<(f64, f64)>,
    /// Informer fraction cut point (inclusive).
    pub content_threshold: f64,
    /// Number of activity clusters.
    pub activity_clusters: usize,
    /// Seed handed to the clustering step.
    pub cluster_seed: u64,
}

impl Default for DerivationConfig {
    fn default() -> Self {
        DerivationConfig {
            info_thresholds: None,
            content_threshold: 0.5,
            activity_clusters: 3,
            cluster_seed: 17,
        }
    }
}

/// Fill every unset attribute field on `records` from the action log.
/// Pre-populated fields are left untouched; users without posts are skipped
/// for the log-derived attributes (with one aggregate warning).
pub fn derive_attributes(
    records: &mut [UserRecord],
    events: &[ActionEvent],
    mapper: &TimezoneMapper,
    cfg: &DerivationConfig,
    warnings: &mut Vec<String>,
) -> Result<()> {
    let known: BTreeSet<UserId> = records.iter().map(|r| r.id.clone()).collect();
    let mut posts: BTreeMap<UserId, u64> = BTreeMap::new();
    let mut responses: BTreeMap<UserId, u64> = BTreeMap::new();
    let mut informational: BTreeMap<UserId, u64> = BTreeMap::new();
    let mut hours: BTreeMap<UserId, Vec<u8>> = BTreeMap::new();
    for ev in events {
        if !known.contains(&ev.user) {
            continue;
        }
        *posts.entry(ev.user.clone()).or_default() += 1;
        if ev.has_url || ev.is_retweet {
            *informational.entry(ev.user.clone()).or_default() += 1;
        }
        hours
            .entry(ev.user.clone())
            .or_default()
            .push((ev.timestamp.div_euclid(3600)).rem_euclid(24) as u8);
        for m in &ev.mentions {
            if *m != ev.user && known.contains(m) {
                *responses.entry(m.clone()).or_default() += 1;
            }
        }
    }

    for rec in records.iter_mut() {
        if rec.location.is_none() {
            if let Some(tz) = &rec.timezone {
                rec.location = Some(mapper.continent(tz));
            }
        }
    }

    let posted: Vec<&UserId> = records
        .iter()
        .filter(|r| posts.get(&r.id).copied().unwrap_or(0) > 0)
        .map(|r| &r.id)
        .collect();
    let silent = records
        .iter()
        .filter(|r| posts.get(&r.id).copied().unwrap_or(0) == 0)
        .filter(|r| {
            r.info_role.is_none() || r.content_role.is_none() || r.activity_cluster.is_none()
        })
        .count();
    if silent > 0 {
        warnings.push(format!(
            "{silent} user(s) have no posts; information/content roles and activity clusters left unset for them"
        ));
    }

    if !posted.is_empty() {
        let thresholds = match cfg.info_thresholds {
            Some(t) => t,
            None => {
                let rhos: Vec<f64> = posted
                    .iter()
                    .map(|u| {
                        responses.get(*u).copied().unwrap_or(0) as f64 / posts[*u] as f64
                    })
                    .collect();
                tercile_thresholds(&rhos)?
            }
        };
        for rec in records.iter_mut() {
            let n_posts = posts.get(&rec.id).copied().unwrap_or(0);
            if n_posts == 0 {
                continue;
            }
            if rec.info_role.is_none() {
                let resp = responses.get(&rec.id).copied().unwrap_or(0);
                rec.info_role = Some(derive_info_role(n_posts, resp, thresholds)?);
            }
            if rec.content_role.is_none() {
                let info = informational.get(&rec.id).copied().unwrap_or(0);
                rec.content_role = Some(derive_content_role(n_posts, info, cfg.content_threshold)?);
            }
        }
    }

    let need_cluster: BTreeMap<UserId, ActivityDistribution> = records
        .iter()
        .filter(|r| r.activity_cluster.is_none())
        .filter_map(|r| {
            hours
                .get(&r.id)
                .map(|h| ActivityDistribution::from_hours(h).map(|d| (r.id.clone(), d)))
        })
        .collect::<Result<_>>()?;
    if !need_cluster.is_empty() {
        if need_cluster.len() < cfg.activity_clusters {
            warnings.push(format!(
                "{} user(s) need activity clusters but k={}; clustering skipped",
                need_cluster.len(),
                cfg.activity_clusters
            ));
        } else {
            let assignment =
                cluster_activity(&need_cluster, cfg.activity_clusters, cfg.cluster_seed)?;
            for rec in records.iter_mut() {
                if let Some(c) = assignment.get(&rec.id) {
                    rec.activity_cluster = Some(*c);
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timezone_labels_resolve_to_continents() {
        let m = TimezoneMapper::new();
        assert_eq!(
            m.continent("Eastern Time (US & Canada)"),
            Continent::NorthAmerica
        );
        assert_eq!(m.continent("Tokyo"), Continent::Asia);
        assert_eq!(m.continent(""), Continent::Other);
        assert_eq!(m.continent("no such zone"), Continent::Other);
        assert_eq!(m.continent("Buenos Aires"), Continent::SouthAmerica);
        assert_eq!(m.continent("Nairobi"), Continent::Africa);
        assert_eq!(m.continent("Sydney"), Continent::Oceania);
        assert_eq!(m.continent("Paris"), Continent::Europe);
    }

    #[test]
    fn iana_names_resolve_via_prefix_rules() {
        let m = TimezoneMapper::new();
        assert_eq!(m.continent("Europe/Berlin"), Continent::Europe);
        assert_eq!(m.continent("Asia/Kolkata"), Continent::Asia);
        assert_eq!(m.continent("Africa/Lagos"), Continent::Africa);
        assert_eq!(m.continent("Australia/Perth"), Continent::Oceania);
        assert_eq!(m.continent("Pacific/Auckland"), Continent::Oceania);
        assert_eq!(m.continent("America/Chicago"), Continent::NorthAmerica);
        assert_eq!(m.continent("America/Sao_Paulo"), Continent::SouthAmerica);
        assert_eq!(
            m.continent("America/Argentina/Buenos_Aires"),
            Continent::SouthAmerica
        );
        assert_eq!(
            m.continent("America/Indiana/Indianapolis"),
            Continent::NorthAmerica
        );
        assert_eq!(m.continent("Etc/UTC"), Continent::Other);
        assert_eq!(m.continent("Atlantic/South_Georgia"), Continent::Other);
    }

    #[test]
    fn override_table_wins_over_shipped_table() {
        let mut o = BTreeMap::new();
        o.insert("Tokyo".to_owned(), Continent::Other);
        o.insert("Gondor".to_owned(), Continent::Europe);
        let m = TimezoneMapper::with_overrides(o);
        assert_eq!(m.continent("Tokyo"), Continent::Other);
        assert_eq!(m.continent("Gondor"), Continent::Europe);
        assert_eq!(m.continent("Berlin"), Continent::Europe);
    }

    #[test]
    fn info_role_threshold_cases() {
        assert_eq!(
            derive_info_role(100, 2, (0.2, 1.0)).unwrap(),
            Role::Generator
        );
        assert_eq!(derive_info_role(5, 50, (0.2, 1.0)).unwrap(), Role::Receptor);
        assert_eq!(derive_info_role(10, 5, (0.2, 1.0)).unwrap(), Role::Mediator);
        assert_eq!(
            derive_info_role(0, 5, (0.2, 1.0)).unwrap_err().category(),
            "domain"
        );
        assert_eq!(
            derive_info_role(1, 1, (2.0, 1.0)).unwrap_err().category(),
            "config"
        );
    }

    #[test]
    fn tercile_split_is_three_three_three_on_nine_users() {
        // Nine distinct ρ values: cut points v[3]=0.4 and v[5]=0.6 put three
        // users in each role under the strict comparisons.
        let rhos: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
        let (low, high) = tercile_thresholds(&rhos).unwrap();
        assert_eq!((low, high), (0.4, 0.6));
        let mut counts = BTreeMap::new();
        for i in 0..rhos.len() {
            // responses i+1 over 10 posts gives ρ = (i+1)/10.
            let role = derive_info_role(10, i as u64 + 1, (low, high));
            *counts.entry(role.unwrap()).or_insert(0) += 1;
        }
        assert_eq!(counts[&Role::Generator], 3);
        assert_eq!(counts[&Role::Mediator], 3);
        assert_eq!(counts[&Role::Receptor], 3);
    }

    #[test]
    fn content_role_boundary_is_inclusive() {
        assert_eq!(
            derive_content_role(10, 10, 0.5).unwrap(),
            ContentRole::Informer
        );
        assert_eq!(
            derive_content_role(10, 0, 0.5).unwrap(),
            ContentRole::Meformer
        );
        assert_eq!(
            derive_content_role(10, 5, 0.5).unwrap(),
            ContentRole::Informer
        );
        assert_eq!(
            derive_content_role(0, 0, 0.5).unwrap_err().category(),
            "domain"
        );
        assert_eq!(
            derive_content_role(10, 11, 0.5).unwrap_err().category(),
            "validation"
        );
        assert_eq!(
            derive_content_role(10, 5, 1.5).unwrap_err().category(),
            "config"
        );
    }

    #[test]
    fn activity_distribution_shapes() {
        let all_zero = ActivityDistribution::from_hours(&[0, 0, 0, 0]).unwrap();
        assert!(all_zero.entries()[0] > 0.99);
        assert!(all_zero.entries()[1] < 1e-5);
        assert!((all_zero.entries().iter().sum::<f64>() - 1.0).abs() < 1e-9);

        let uniform = ActivityDistribution::from_hours(&(0..24).collect::<Vec<u8>>()).unwrap();
        for e in uniform.entries() {
            assert!((e - 1.0 / 24.0).abs() < 1e-9);
        }

        // Hand count: hours {1,1,13} → bucket weights (2+ε) and (1+ε) over
        // a (3+24ε) total, ε elsewhere.
        let d = ActivityDistribution::from_hours(&[1, 1, 13]).unwrap();
        let eps = ACTIVITY_SMOOTHING;
        let total = 3.0 + 24.0 * eps;
        assert!((d.entries()[1] - (2.0 + eps) / total).abs() < 1e-12);
        assert!((d.entries()[13] - (1.0 + eps) / total).abs() < 1e-12);
        assert!((d.entries()[0] - eps / total).abs() < 1e-12);

        assert_eq!(
            ActivityDistribution::from_hours(&[]).unwrap_err().category(),
            "domain"
        );
        assert_eq!(
            ActivityDistribution::from_hours(&[24]).unwrap_err().category(),
            "validation"
        );
    }

    #[test]
    fn timestamps_bucket_by_utc_hour() {
        // 1970-01-01 00:30 → hour 0; 13:59 → hour 13; negative epoch wraps.
        let d = ActivityDistribution::from_timestamps(&[1800, 13 * 3600 + 3540]).unwrap();
        assert!(d.entries()[0] > 0.4);
        assert!(d.entries()[13] > 0.4);
        let neg = ActivityDistribution::from_timestamps(&[-3600]).unwrap();
        assert!(neg.entries()[23] > 0.99);
    }

    #[test]
    fn kl_identity_and_symmetry() {
        let p = ActivityDistribution::from_hours(&[0, 1, 2, 2]).unwrap();
        let q = ActivityDistribution::from_hours(&[3, 3, 4]).unwrap();
        assert!(kl_divergence(&p, &p).unwrap().abs() < 1e-12);
        let s1 = kl_symmetric(&p, &q).unwrap();
        let s2 = kl_symmetric(&q, &p).unwrap();
        assert!((s1 - s2).abs() < 1e-12);
        assert!(s1 > 0.0);
    }

    #[test]
    fn kl_matches_direct_summation() {
        let mut wp = [0.0; 24];
        wp[0] = 0.5;
        wp[1] = 0.5;
        let mut wq = [0.0; 24];
        wq[0] = 0.25;
        wq[1] = 0.75;
        let p = ActivityDistribution::from_weights(&wp).unwrap();
        let q = ActivityDistribution::from_weights(&wq).unwrap();
        let expected: f64 = p
            .entries()
            .iter()
            .zip(q.entries())
            .map(|(a, b)| a * (a / b).ln())
            .sum();
        assert!((kl_divergence(&p, &q).unwrap() - expected).abs() < 1e-12);
        assert!(expected > 0.0);
    }

    fn dist_map(specs: &[(&str, &[u8])]) -> BTreeMap<UserId, ActivityDistribution> {
        specs
            .iter()
            .map(|(id, hours)| {
                (
                    UserId::from(*id),
                    ActivityDistribution::from_hours(hours).unwrap(),
                )
            })
            .collect()
    }

    #[test]
    fn single_cluster_covers_everyone() {
        let dists = dist_map(&[("a", &[1, 2]), ("b", &[20, 21]), ("c", &[5])]);
        let got = cluster_activity(&dists, 1, 0).unwrap();
        assert_eq!(got.len(), 3);
        assert!(got.values().all(|c| *c == 0));
    }

    #[test]
    fn planted_day_night_groups_recovered() {
        let dists = dist_map(&[
            ("day1", &[9, 10, 11]),
            ("day2", &[10, 11, 12]),
            ("day3", &[9, 11, 13]),
            ("night1", &[22, 23, 0]),
            ("night2", &[23, 0, 1]),
            ("night3", &[22, 0, 2]),
        ]);
        let got = cluster_activity(&dists, 2, 99).unwrap();
        let day = got[&UserId::from("day1")];
        let night = got[&UserId::from("night1")];
        assert_ne!(day, night);
        assert_eq!(got[&UserId::from("day2")], day);
        assert_eq!(got[&UserId::from("day3")], day);
        assert_eq!(got[&UserId::from("night2")], night);
        assert_eq!(got[&UserId::from("night3")], night);
    }

    #[test]
    fn identical_distributions_tie_break_on_lowest_ids() {
        let dists = dist_map(&[("u1", &[4]), ("u2", &[4]), ("u3", &[4]), ("u4", &[4])]);
        let (assignment, medoids) = cluster_activity_detailed(&dists, 2, 5).unwrap();
        assert_eq!(medoids, vec![UserId::from("u1"), UserId::from("u2")]);
        // All pairwise distances are zero, so everyone falls to cluster 0.
        assert!(assignment.values().all(|c| *c == 0));
        let again = cluster_activity_detailed(&dists, 2, 123456).unwrap();
        assert_eq!(again.0, assignment);
        assert_eq!(again.1, medoids);
    }

    #[test]
    fn too_few_users_for_k_is_config_error() {
        let dists = dist_map(&[("a", &[1])]);
        assert_eq!(
            cluster_activity(&dists, 2, 0).unwrap_err().category(),
            "config"
        );
        assert_eq!(
            cluster_activity(&dists, 0, 0).unwrap_err().category(),
            "config"
        );
    }

    #[test]
    fn bulk_derivation_fills_only_missing_fields() {
        use crate::events::ActionEvent;
        let mut records = vec![
            UserRecord {
                id: UserId::from("a"),
                timezone: Some("Tokyo".into()),
                ..Default::default()
            },
            UserRecord {
                id: UserId::from("b"),
                timezone: Some("Paris".into()),
                location: Some(Continent::Other), // precomputed, must survive
                ..Default::default()
            },
            UserRecord {
                id: UserId::from("c"),
                timezone: None,
                ..Default::default()
            },
        ];
        let mk = |user: &str, ts: i64, url: bool, mentions: &[&str]| ActionEvent {
            user: UserId::from(user),
            timestamp: ts,
            topics: BTreeSet::new(),
            has_url: url,
            is_retweet: false,
            mentions: mentions.iter().map(|m| UserId::from(*m)).collect(),
        };
        let events = vec![
            mk("a", 3600, true, &["b"]),
            mk("a", 7200, true, &[]),
            mk("b", 3600 * 30, false, &["a", "a_unknown"]),
            mk("c", 3600 * 50, false, &["a"]),
        ];
        let cfg = DerivationConfig {
            info_thresholds: Some((0.5, 1.5)),
            activity_clusters: 2,
            ..Default::default()
        };
        let mut warnings = Vec::new();
        derive_attributes(
            &mut records,
            &events,
            &TimezoneMapper::new(),
            &cfg,
            &mut warnings,
        )
        .unwrap();

        assert_eq!(records[0].location, Some(Continent::Asia));
        assert_eq!(records[1].location, Some(Continent::Other));
        assert_eq!(records[2].location, None);

        // a: 2 posts, 2 responses (one from b, one from c) → ρ=1.0 → Mediator.
        assert_eq!(records[0].info_role, Some(Role::Mediator));
        // b: 1 post, 1 response → ρ=1.0 → Mediator; c: 1 post, 0 → Generator.
        assert_eq!(records[1].info_role, Some(Role::Mediator));
        assert_eq!(records[2].info_role, Some(Role::Generator));

        // a: 2/2 informational → Informer; b and c: 0 → Meformer.
        assert_eq!(records[0].content_role, Some(ContentRole::Informer));
        assert_eq!(records[1].content_role, Some(ContentRole::Meformer));
        assert_eq!(records[2].content_role, Some(ContentRole::Meformer));

        assert!(records.iter().all(|r| r.activity_cluster.is_some()));
    }
}
