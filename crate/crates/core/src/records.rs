//! Line-delimited JSON sequence records.
//!
//! One record per line:
//!
//! ```text
//! {"id":"s1","label":[1],"events":[{"t":0.0,"x":[1.5,null],"c":1}]}
//! ```
//!
//! `label` is a list of 0/1 entries, a single number, `null` or absent.
//! `null` in `x` marks an unobserved value; `c` defaults to 1. Numbers are
//! written in shortest round-trip form, so reading back is exact.

use std::io::{BufRead, Write};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::{validate_with, Event, EventSequence, Label, LabeledSequence};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvent {
    t: f64,
    x: Vec<Option<f64>>,
    #[serde(default = "one")]
    c: u32,
}

fn one() -> u32 {
    1
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<Label>,
    events: Vec<RawEvent>,
}

#[derive(Serialize)]
struct RawFeatures<'a> {
    id: &'a str,
    rows: Vec<Vec<f64>>,
}

/// A sequence with an optional label, as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceRecord {
    pub sequence: EventSequence,
    pub label: Option<Label>,
}

impl From<LabeledSequence> for SequenceRecord {
    fn from(l: LabeledSequence) -> Self {
        Self { sequence: l.sequence, label: Some(l.label) }
    }
}

impl SequenceRecord {
    pub fn with_sequence(&self, sequence: EventSequence) -> Self {
        Self { sequence, label: self.label.clone() }
    }
}

/// Parses one record. Empty grid cells (`c = 0`, nothing observed) are
/// accepted so coarsened output can be read back.
pub fn parse_record(line: &str, line_no: usize) -> Result<SequenceRecord> {
    let err = |msg: String| Error::Parse { line: line_no, msg };
    let raw: RawRecord = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
    if let Some(Label::Binary(v)) = &raw.label {
        if v.iter().any(|&b| b > 1) {
            return Err(err("binary label entries must be 0 or 1".into()));
        }
    }
    let events = raw
        .events
        .into_iter()
        .map(|e| Event::from_options(e.t, &e.x, e.c))
        .collect();
    let sequence = EventSequence::new(raw.id, events);
    let violations = validate_with(&sequence, true);
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(ToString::to_string).collect();
        return Err(err(format!("sequence {}: {}", sequence.id, list.join("; "))));
    }
    Ok(SequenceRecord { sequence, label: raw.label })
}

/// Reads every non-blank line as a record.
pub fn read_records(reader: impl BufRead) -> Result<Vec<SequenceRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_record(&line, i + 1)?);
    }
    Ok(out)
}

pub fn parse_records(text: &str) -> Result<Vec<SequenceRecord>> {
    read_records(text.as_bytes())
}

pub fn format_record(record: &SequenceRecord) -> String {
    let raw = RawRecord {
        id: record.sequence.id.clone(),
        label: record.label.clone(),
        events: record
            .sequence
            .events
            .iter()
            .map(|e| RawEvent { t: e.t, x: (0..e.dim()).map(|j| e.value(j)).collect(), c: e.c })
            .collect(),
    };
    serde_json::to_string(&raw).expect("records serialize")
}

pub fn write_records<'a>(mut writer: impl Write, records: impl IntoIterator<Item = &'a SequenceRecord>) -> Result<()> {
    for r in records {
        writeln!(writer, "{}", format_record(r))?;
    }
    Ok(())
}

pub fn format_records<'a>(records: impl IntoIterator<Item = &'a SequenceRecord>) -> String {
    let mut buf = Vec::new();
    write_records(&mut buf, records).expect("writing to memory");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

/// `{"id": ..., "rows": [[...], ...]}` for one featurized sequence.
pub fn format_features(id: &str, features: &Array2<f64>) -> String {
    let rows = features.rows().into_iter().map(|r| r.to_vec()).collect();
    serde_json::to_string(&RawFeatures { id, rows }).expect("features serialize")
}

/// Pairs every record with its label, failing on the first unlabeled one.
pub fn labeled(records: Vec<SequenceRecord>) -> Result<Vec<LabeledSequence>> {
    records
        .into_iter()
        .map(|r| match r.label {
            Some(label) => Ok(LabeledSequence { sequence: r.sequence, label }),
            None => Err(Error::LabelMismatch(format!("sequence {} has no label", r.sequence.id))),
        })
        .collect()
}
