//! File ingestion and model persistence.
//!
//! Formats:
//! - edge list: two delimited columns per line (comma when present,
//!   whitespace otherwise); `#` comments, blank lines, and one recognized
//!   header line are skipped
//! - user records: CSV with a header; `id` required, `timezone` and
//!   precomputed attribute columns optional
//! - action log: one JSON record per line
//! - trend file: CSV `date,value` with ISO-8601 dates
//! - timezone overrides: CSV `timezone,continent`
//! - fitted models: a single JSON document

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::NaiveDate;

use crate::attributes::{ContentRole, Continent, Role};
use crate::distortion::{TrendKind, TrendSeries};
use crate::error::{Error, Result};
use crate::events::{ActionEvent, SlotIndex};
use crate::graph::{UserId, UserRecord};
use crate::predict::FittedModels;

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Split one edge line on comma when present, whitespace otherwise.
fn split_pair(line: &str) -> Option<(&str, &str)> {
    let mut parts = if line.contains(',') {
        let mut it = line.split(',');
        let a = it.next()?.trim();
        let b = it.next()?.trim();
        if it.next().is_some() {
            return None;
        }
        vec![a, b].into_iter()
    } else {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return None;
        }
        fields.into_iter()
    };
    let a = parts.next()?;
    let b = parts.next()?;
    (!a.is_empty() && !b.is_empty()).then_some((a, b))
}

const EDGE_HEADERS: [(&str, &str); 3] = [("src", "dst"), ("source", "target"), ("from", "to")];

pub fn read_edge_list(path: &Path) -> Result<Vec<(UserId, UserId)>> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut edges = Vec::new();
    let mut first_data_line = true;
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| io_err(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((a, b)) = split_pair(trimmed) else {
            return Err(parse_err(
                path,
                line_no,
                format!("expected two delimited columns, got {trimmed:?}"),
            ));
        };
        if first_data_line {
            first_data_line = false;
            let pair = (a.to_ascii_lowercase(), b.to_ascii_lowercase());
            if EDGE_HEADERS
                .iter()
                .any(|(x, y)| pair.0 == *x && pair.1 == *y)
            {
                continue;
            }
        }
        edges.push((UserId::from(a), UserId::from(b)));
    }
    Ok(edges)
}

pub fn read_user_records(path: &Path, warnings: &mut Vec<String>) -> Result<Vec<UserRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => io_err(path, io),
            other => parse_err(path, 1, format!("{other:?}")),
        })?;
    let headers = reader
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .clone();
    let mut col = BTreeMap::new();
    const KNOWN: [&str; 6] = [
        "id",
        "timezone",
        "location",
        "info_role",
        "content_role",
        "activity_cluster",
    ];
    for (i, name) in headers.iter().enumerate() {
        if KNOWN.contains(&name) {
            col.insert(name.to_owned(), i);
        } else {
            warnings.push(format!(
                "user records {}: ignoring unknown column {name:?}",
                path.display()
            ));
        }
    }
    if !col.contains_key("id") {
        return Err(parse_err(path, 1, "user records need an `id` column"));
    }

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| parse_err(path, 0, e.to_string()))?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let field = |name: &str| -> Option<&str> {
            col.get(name)
                .and_then(|i| row.get(*i))
                .map(str::trim)
                .filter(|s| !s.is_empty())
        };
        let Some(id) = field("id") else {
            return Err(parse_err(path, line, "empty user id"));
        };
        let mut rec = UserRecord::new(id);
        rec.timezone = field("timezone").map(str::to_owned);
        let relocate = |e: Error| match e {
            Error::Parse { message, .. } => parse_err(path, line, message),
            other => other,
        };
        if let Some(v) = field("location") {
            rec.location = Some(Continent::parse(v).map_err(relocate)?);
        }
        if let Some(v) = field("info_role") {
            rec.info_role = Some(Role::parse(v).map_err(relocate)?);
        }
        if let Some(v) = field("content_role") {
            rec.content_role = Some(ContentRole::parse(v).map_err(relocate)?);
        }
        if let Some(v) = field("activity_cluster") {
            rec.activity_cluster = Some(v.parse::<u32>().map_err(|e| {
                parse_err(path, line, format!("bad activity cluster {v:?}: {e}"))
            })?);
        }
        records.push(rec);
    }
    Ok(records)
}

pub fn read_action_log(path: &Path) -> Result<Vec<ActionEvent>> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut events = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let ev: ActionEvent = serde_json::from_str(&line)
            .map_err(|e| parse_err(path, idx + 1, e.to_string()))?;
        if ev.user.as_str().is_empty() {
            return Err(parse_err(path, idx + 1, "event with empty user id"));
        }
        events.push(ev);
    }
    Ok(events)
}

pub fn write_action_log(path: &Path, events: &[ActionEvent]) -> Result<()> {
    let mut out = fs::File::create(path).map_err(|e| io_err(path, e))?;
    for ev in events {
        let line = serde_json::to_string(ev).expect("events serialize");
        writeln!(out, "{line}").map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

pub fn write_edge_list(path: &Path, edges: &[(UserId, UserId)]) -> Result<()> {
    let mut out = fs::File::create(path).map_err(|e| io_err(path, e))?;
    writeln!(out, "src,dst").map_err(|e| io_err(path, e))?;
    for (a, b) in edges {
        writeln!(out, "{a},{b}").map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

pub fn write_user_records(path: &Path, records: &[UserRecord]) -> Result<()> {
    let mut out = fs::File::create(path).map_err(|e| io_err(path, e))?;
    writeln!(
        out,
        "id,timezone,location,info_role,content_role,activity_cluster"
    )
    .map_err(|e| io_err(path, e))?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.id,
            r.timezone.as_deref().unwrap_or(""),
            r.location.map(|v| v.name()).unwrap_or(""),
            r.info_role.map(|v| v.name()).unwrap_or(""),
            r.content_role.map(|v| v.name()).unwrap_or(""),
            r.activity_cluster.map_or(String::new(), |v| v.to_string()),
        )
        .map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

/// Raw `(midnight-UTC timestamp, volume)` rows of one trend file, sorted by
/// date.
pub fn read_trend_rows(path: &Path) -> Result<Vec<(i64, f64)>> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut rows = Vec::new();
    let mut first_data_line = true;
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| io_err(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut parts = trimmed.split(',');
        let (Some(date_s), Some(value_s), None) = (parts.next(), parts.next(), parts.next())
        else {
            return Err(parse_err(path, line_no, "expected `date,value`"));
        };
        let (date_s, value_s) = (date_s.trim(), value_s.trim());
        if first_data_line {
            first_data_line = false;
            if date_s.eq_ignore_ascii_case("date") {
                continue;
            }
        }
        let date = NaiveDate::parse_from_str(date_s, "%Y-%m-%d")
            .map_err(|e| parse_err(path, line_no, format!("bad date {date_s:?}: {e}")))?;
        let value: f64 = value_s
            .parse()
            .map_err(|e| parse_err(path, line_no, format!("bad value {value_s:?}: {e}")))?;
        if !(value >= 0.0) {
            return Err(parse_err(
                path,
                line_no,
                format!("trend volume must be non-negative, got {value}"),
            ));
        }
        let ts = date
            .and_hms_opt(0, 0, 0)
            .expect("midnight exists")
            .and_utc()
            .timestamp();
        rows.push((ts, value));
    }
    rows.sort_by_key(|(ts, _)| *ts);
    Ok(rows)
}

/// Bucket raw trend rows onto the slot calendar `[origin, origin+N·Δ)`.
/// Slots no row falls into get 0 with one aggregate warning; rows outside
/// the horizon are ignored.
pub fn align_trend(
    rows: &[(i64, f64)],
    origin: i64,
    slice_duration: i64,
    horizon: SlotIndex,
    topic: &str,
    kind: TrendKind,
    warnings: &mut Vec<String>,
) -> Result<TrendSeries> {
    if slice_duration <= 0 {
        return Err(Error::Config(format!(
            "slice duration must be positive, got {slice_duration}"
        )));
    }
    if horizon == 0 {
        return Err(Error::Config("trend horizon must be at least 1".into()));
    }
    let mut values = vec![0.0f64; horizon as usize];
    let mut covered = vec![false; horizon as usize];
    for (ts, value) in rows {
        let slot = (ts - origin).div_euclid(slice_duration) + 1;
        if slot < 1 || slot > i64::from(horizon) {
            continue;
        }
        values[(slot - 1) as usize] += value;
        covered[(slot - 1) as usize] = true;
    }
    let missing = covered.iter().filter(|c| !**c).count();
    if missing > 0 {
        warnings.push(format!(
            "{kind} trend for topic `{topic}`: {missing} of {horizon} slot(s) have no data, treated as 0",
            kind = kind.name()
        ));
    }
    Ok(TrendSeries {
        topic: topic.to_owned(),
        kind,
        values,
    })
}

pub fn read_timezone_overrides(path: &Path) -> Result<BTreeMap<String, Continent>> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut map = BTreeMap::new();
    let mut first_data_line = true;
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| io_err(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut parts = trimmed.splitn(2, ',');
        let (Some(tz), Some(continent_s)) = (parts.next(), parts.next()) else {
            return Err(parse_err(path, line_no, "expected `timezone,continent`"));
        };
        let (tz, continent_s) = (tz.trim(), continent_s.trim());
        if first_data_line {
            first_data_line = false;
            if tz.eq_ignore_ascii_case("timezone") {
                continue;
            }
        }
        let continent = Continent::parse(continent_s).map_err(|e| match e {
            Error::Parse { message, .. } => parse_err(path, line_no, message),
            other => other,
        })?;
        map.insert(tz.to_owned(), continent);
    }
    Ok(map)
}

pub fn save_models(path: &Path, models: &FittedModels) -> Result<()> {
    let json = serde_json::to_string_pretty(models).expect("models serialize");
    fs::write(path, json).map_err(|e| io_err(path, e))
}

pub fn load_models(path: &Path) -> Result<FittedModels> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| parse_err(path, e.line(), e.to_string()))
}
