//! Event logs and their CSV form.
//!
//! Mandatory columns are `case, activity, start, complete`; `resource` is
//! optional and every other column is an event attribute whose type is
//! inferred over the whole column. Empty cells mean "no value".

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};

use crate::error::{Error, Result};
use crate::value::{AttrType, Time, Value};

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub case_id: String,
    pub label: String,
    pub start: Time,
    pub complete: Time,
    pub resource: Option<String>,
    pub attrs: BTreeMap<String, Value>,
}

impl Event {
    pub fn new(case_id: impl Into<String>, label: impl Into<String>, start: Time, complete: Time) -> Self {
        Event {
            case_id: case_id.into(),
            label: label.into(),
            start,
            complete,
            resource: None,
            attrs: BTreeMap::new(),
        }
    }

    pub fn with_attr(mut self, name: impl Into<String>, value: Value) -> Self {
        self.attrs.insert(name.into(), value);
        self
    }

    pub fn with_resource(mut self, r: impl Into<String>) -> Self {
        self.resource = Some(r.into());
        self
    }

    fn order(&self, other: &Event) -> std::cmp::Ordering {
        self.complete
            .total_cmp(&other.complete)
            .then(self.start.total_cmp(&other.start))
            .then_with(|| self.case_id.cmp(&other.case_id))
    }
}

/// How `start`/`complete` cells are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimeFormat {
    /// Plain numbers in model time units.
    #[default]
    Numeric,
    /// ISO-8601 date-times converted to fractional minutes since the Unix epoch.
    Iso8601,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Log {
    events: Vec<Event>,
    schema: Vec<(String, AttrType)>,
}

const MANDATORY: [&str; 4] = ["case", "activity", "start", "complete"];

impl Log {
    /// Builds a log, sorting events into the global order and inferring the
    /// attribute schema from the values present.
    pub fn from_events(mut events: Vec<Event>) -> Log {
        events.sort_by(Event::order);
        let mut types: BTreeMap<String, Option<AttrType>> = BTreeMap::new();
        for e in &events {
            for (k, v) in &e.attrs {
                let slot = types.entry(k.clone()).or_insert(Some(v.attr_type()));
                if *slot != Some(v.attr_type()) {
                    *slot = Some(AttrType::Text);
                }
            }
        }
        let schema = types.into_iter().map(|(k, t)| (k, t.unwrap_or(AttrType::Text))).collect();
        Log { events, schema }
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn schema(&self) -> &[(String, AttrType)] {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Events grouped by case, each trace in completion order.
    pub fn traces(&self) -> BTreeMap<&str, Vec<&Event>> {
        let mut out: BTreeMap<&str, Vec<&Event>> = BTreeMap::new();
        for e in &self.events {
            out.entry(e.case_id.as_str()).or_default().push(e);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Log> {
        Log::parse_with(text, TimeFormat::Numeric)
    }

    pub fn parse_with(text: &str, time_format: TimeFormat) -> Result<Log> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if headers.iter().all(String::is_empty) {
            return Err(Error::LogFormat("missing header row".into()));
        }
        let col = |name: &str| headers.iter().position(|h| h == name);
        let mut idx = [0usize; 4];
        for (slot, name) in idx.iter_mut().zip(MANDATORY) {
            *slot = col(name).ok_or_else(|| Error::LogFormat(format!("missing mandatory column `{name}`")))?;
        }
        let resource_col = col("resource");
        let attr_cols: Vec<(usize, &str)> = headers
            .iter()
            .enumerate()
            .filter(|(_, h)| !MANDATORY.contains(&h.as_str()) && h.as_str() != "resource")
            .map(|(i, h)| (i, h.as_str()))
            .collect();

        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            rows.push((line, rec));
        }

        let types: Vec<AttrType> = attr_cols
            .iter()
            .map(|&(i, _)| infer_type(rows.iter().map(|(_, r)| r.get(i).unwrap_or(""))))
            .collect();

        let mut events = Vec::with_capacity(rows.len());
        for (line, rec) in &rows {
            let row_err = |message: String| Error::LogRow { row: *line, message };
            let cell = |i: usize| rec.get(i).unwrap_or("");
            let case_id = cell(idx[0]);
            let label = cell(idx[1]);
            if case_id.is_empty() {
                return Err(row_err("empty case id".into()));
            }
            if label.is_empty() {
                return Err(row_err("empty activity".into()));
            }
            let start = parse_time(cell(idx[2]), time_format).map_err(|m| row_err(format!("start: {m}")))?;
            let complete = parse_time(cell(idx[3]), time_format).map_err(|m| row_err(format!("complete: {m}")))?;
            if start > complete {
                return Err(row_err(format!("start {start} is after complete {complete}")));
            }
            let mut e = Event::new(case_id, label, start, complete);
            e.resource = resource_col.map(cell).filter(|s| !s.is_empty()).map(str::to_string);
            for (&(i, name), ty) in attr_cols.iter().zip(&types) {
                let raw = cell(i);
                if raw.is_empty() {
                    continue;
                }
                e.attrs.insert(name.to_string(), typed_value(raw, *ty));
            }
            events.push(e);
        }
        events.sort_by(Event::order);
        let schema = attr_cols.iter().map(|(_, n)| n.to_string()).zip(types).collect();
        Ok(Log { events, schema })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Log> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Log::parse(&text)
    }

    pub fn to_csv(&self) -> String {
        let with_resource = self.events.iter().any(|e| e.resource.is_some());
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        let mut header: Vec<&str> = MANDATORY.to_vec();
        if with_resource {
            header.push("resource");
        }
        header.extend(self.schema.iter().map(|(n, _)| n.as_str()));
        w.write_record(&header).expect("in-memory write");
        for e in &self.events {
            let mut row = vec![e.case_id.clone(), e.label.clone(), e.start.to_string(), e.complete.to_string()];
            if with_resource {
                row.push(e.resource.clone().unwrap_or_default());
            }
            for (name, _) in &self.schema {
                row.push(e.attrs.get(name).map(Value::to_string).unwrap_or_default());
            }
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path.display().to_string(), e))
    }
}

fn infer_type<'a>(cells: impl Iterator<Item = &'a str> + Clone) -> AttrType {
    let present = cells.filter(|c| !c.is_empty());
    if present.clone().all(|c| c.parse::<f64>().is_ok_and(f64::is_finite)) {
        AttrType::Number
    } else if present.clone().all(|c| c == "true" || c == "false") {
        AttrType::Boolean
    } else {
        AttrType::Text
    }
}

fn typed_value(raw: &str, ty: AttrType) -> Value {
    match ty {
        AttrType::Number => Value::Number(raw.parse().expect("inferred numeric")),
        AttrType::Boolean => Value::Bool(raw == "true"),
        AttrType::Text => Value::Text(raw.to_string()),
    }
}

fn parse_time(raw: &str, fmt: TimeFormat) -> std::result::Result<Time, String> {
    match fmt {
        TimeFormat::Numeric => match raw.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(x),
            _ => Err(format!("`{raw}` is not a number")),
        },
        TimeFormat::Iso8601 => {
            let millis = if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
                dt.timestamp_millis()
            } else {
                ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"]
                    .iter()
                    .find_map(|f| NaiveDateTime::parse_from_str(raw, f).ok())
                    .map(|dt| dt.and_utc().timestamp_millis())
                    .ok_or_else(|| format!("`{raw}` is not an ISO-8601 timestamp"))?
            };
            Ok(millis as f64 / 60_000.0)
        }
    }
}
