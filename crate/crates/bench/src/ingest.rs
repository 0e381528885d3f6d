//! Issue-tracker export ingestion (JSON-lines and CSV).
//!
//! Both formats carry `id`, `created_at`, `title`, `description`,
//! `assignee` and an optional integer `interactions`. Records without an
//! assignee or timestamp are dropped and counted; other malformed records
//! are skipped and counted up to an optional tolerance. A duplicate id is
//! always fatal.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use triage_core::{Corpus, DeveloperId, IssueReport};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputFormat {
    JsonLines,
    Csv,
}

impl InputFormat {
    /// `.csv` is CSV, everything else JSON-lines.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => InputFormat::Csv,
            _ => InputFormat::JsonLines,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestOptions {
    /// Maximum malformed records tolerated before ingestion fails; `None`
    /// skips and counts any number.
    pub max_malformed: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestOutcome {
    pub corpus: Corpus,
    /// Records lacking an assignee or a timestamp.
    pub dropped: usize,
    /// Records that could not be parsed.
    pub malformed: usize,
}

/// Parses an ISO-8601 timestamp into UTC seconds. Offsets are honoured,
/// naive values are taken as UTC, fractional seconds are discarded.
pub fn parse_timestamp(text: &str) -> Option<i64> {
    let text = text.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(text) {
        return Some(dt.timestamp());
    }
    for fmt in ["%Y-%m-%d %H:%M:%S%.f %z", "%Y-%m-%dT%H:%M:%S%.f%z", "%Y-%m-%d %H:%M:%S%.f%z"] {
        if let Ok(dt) = DateTime::parse_from_str(text, fmt) {
            return Some(dt.timestamp());
        }
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(text, fmt) {
            return Some(dt.and_utc().timestamp());
        }
    }
    NaiveDate::parse_from_str(text, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc().timestamp())
}

enum Parsed {
    Report(IssueReport),
    Dropped,
    Malformed(String),
}

struct Fields<'a> {
    id: Option<String>,
    created_at: Option<&'a str>,
    created_at_epoch: Option<i64>,
    title: Option<&'a str>,
    description: Option<&'a str>,
    assignee: Option<&'a str>,
    interactions: Option<std::result::Result<u64, String>>,
}

fn build(fields: Fields<'_>) -> Parsed {
    let Some(id) = fields.id.filter(|s| !s.trim().is_empty()) else {
        return Parsed::Malformed("missing id".into());
    };
    let assignee = match fields.assignee.map(DeveloperId::normalize) {
        Some(Ok(a)) => a,
        _ => return Parsed::Dropped,
    };
    let created_at = match (fields.created_at_epoch, fields.created_at) {
        (Some(epoch), _) => epoch,
        (None, None) => return Parsed::Dropped,
        (None, Some(s)) if s.trim().is_empty() => return Parsed::Dropped,
        (None, Some(s)) => match parse_timestamp(s) {
            Some(t) => t,
            None => return Parsed::Malformed(format!("unparseable timestamp `{s}`")),
        },
    };
    let Some(title) = fields.title else {
        return Parsed::Malformed("missing title".into());
    };
    let interactions = match fields.interactions {
        None => None,
        Some(Ok(n)) => Some(n),
        Some(Err(e)) => return Parsed::Malformed(e),
    };
    Parsed::Report(IssueReport {
        id: id.trim().to_string(),
        created_at,
        title: title.to_string(),
        description: fields.description.unwrap_or_default().to_string(),
        assignee,
        interactions,
    })
}

fn json_record(line: &str) -> Parsed {
    let value: Value = match serde_json::from_str(line) {
        Ok(Value::Object(map)) => Value::Object(map),
        Ok(_) => return Parsed::Malformed("record is not a JSON object".into()),
        Err(e) => return Parsed::Malformed(e.to_string()),
    };
    let id = match &value["id"] {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    };
    let interactions = match &value["interactions"] {
        Value::Null => None,
        v => Some(v.as_u64().ok_or_else(|| format!("interactions `{v}` is not a non-negative integer"))),
    };
    build(Fields {
        id,
        created_at: value["created_at"].as_str(),
        created_at_epoch: value["created_at"].as_i64(),
        title: value["title"].as_str(),
        description: value["description"].as_str(),
        assignee: value["assignee"].as_str(),
        interactions,
    })
}

struct Tally<'p> {
    path: &'p Path,
    options: &'p IngestOptions,
    reports: Vec<IssueReport>,
    ids: HashSet<String>,
    dropped: usize,
    malformed: usize,
}

impl Tally<'_> {
    fn push(&mut self, parsed: Parsed, line: usize) -> Result<()> {
        match parsed {
            Parsed::Report(r) => {
                if !self.ids.insert(r.id.clone()) {
                    return Err(BenchError::Record {
                        path: self.path.to_path_buf(),
                        line,
                        message: format!("duplicate id `{}`", r.id),
                    });
                }
                self.reports.push(r);
            }
            Parsed::Dropped => self.dropped += 1,
            Parsed::Malformed(message) => {
                self.malformed += 1;
                if self.options.max_malformed.is_some_and(|max| self.malformed > max) {
                    return Err(BenchError::Record {
                        path: self.path.to_path_buf(),
                        line,
                        message,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Loads an export into a corpus named `project`, preserving file order.
pub fn ingest(path: &Path, format: InputFormat, project: &str, options: &IngestOptions) -> Result<IngestOutcome> {
    let file = File::open(path).map_err(|e| BenchError::io(path, e))?;
    let mut tally = Tally {
        path,
        options,
        reports: Vec::new(),
        ids: HashSet::new(),
        dropped: 0,
        malformed: 0,
    };
    match format {
        InputFormat::JsonLines => {
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| BenchError::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                tally.push(json_record(&line), i + 1)?;
            }
        }
        InputFormat::Csv => {
            let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(file);
            let headers = reader
                .headers()
                .map_err(|e| BenchError::format(path, e))?
                .clone();
            let col = |name: &str| headers.iter().position(|h| h.trim() == name);
            let (id, created, title, desc, assignee, inter) = (
                col("id"),
                col("created_at"),
                col("title"),
                col("description"),
                col("assignee"),
                col("interactions"),
            );
            if id.is_none() || created.is_none() || title.is_none() || assignee.is_none() {
                return Err(BenchError::format(
                    path,
                    "CSV header must name id, created_at, title, description and assignee",
                ));
            }
            for record in reader.records() {
                let (parsed, line) = match record {
                    Ok(rec) => {
                        let line = rec.position().map_or(0, |p| p.line() as usize);
                        let get = |c: Option<usize>| c.and_then(|c| rec.get(c));
                        let interactions = get(inter).filter(|s| !s.trim().is_empty()).map(|s| {
                            s.trim()
                                .parse::<u64>()
                                .map_err(|_| format!("interactions `{s}` is not a non-negative integer"))
                        });
                        let parsed = build(Fields {
                            id: get(id).map(str::to_string),
                            created_at: get(created),
                            created_at_epoch: None,
                            title: get(title),
                            description: get(desc),
                            assignee: get(assignee).filter(|s| !s.trim().is_empty()),
                            interactions,
                        });
                        (parsed, line)
                    }
                    Err(e) => {
                        let line = e.position().map_or(0, |p| p.line() as usize);
                        (Parsed::Malformed(e.to_string()), line)
                    }
                };
                tally.push(parsed, line)?;
            }
        }
    }
    let corpus = Corpus::new(project, tally.reports)?;
    Ok(IngestOutcome {
        corpus,
        dropped: tally.dropped,
        malformed: tally.malformed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(content: &str, ext: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(ext).tempfile().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    const THREE: &str = r#"{"id":"1","created_at":"2020-01-01T00:00:00Z","title":"a","description":"x","assignee":"A@x.org"}
{"id":"2","created_at":"2020-01-02T00:00:00Z","title":"b","description":"y","assignee":"b@x.org"}
{"id":"3","created_at":"2020-01-03T00:00:00Z","title":"c","description":"z","assignee":"a@x.org"}
"#;

    #[test]
    fn three_valid_records() {
        let f = write(THREE, ".jsonl");
        let out = ingest(f.path(), InputFormat::JsonLines, "p", &IngestOptions::default()).unwrap();
        assert_eq!(out.corpus.len(), 3);
        assert_eq!(out.dropped, 0);
        assert_eq!(out.corpus.developers().len(), 2);
        assert_eq!(out.corpus.reports()[0].created_at, 1_577_836_800);
    }

    #[test]
    fn missing_assignee_is_dropped() {
        let text = THREE.replace(r#","assignee":"b@x.org""#, "");
        let f = write(&text, ".jsonl");
        let out = ingest(f.path(), InputFormat::JsonLines, "p", &IngestOptions::default()).unwrap();
        assert_eq!(out.corpus.len(), 2);
        assert_eq!(out.dropped, 1);
    }

    #[test]
    fn malformed_lines_are_counted_or_fatal() {
        let text = format!("{THREE}not json\n");
        let f = write(&text, ".jsonl");
        let out = ingest(f.path(), InputFormat::JsonLines, "p", &IngestOptions::default()).unwrap();
        assert_eq!((out.corpus.len(), out.malformed), (3, 1));
        let strict = IngestOptions { max_malformed: Some(0) };
        let err = ingest(f.path(), InputFormat::JsonLines, "p", &strict).unwrap_err();
        assert!(matches!(err, BenchError::Record { line: 4, .. }));
    }

    #[test]
    fn duplicate_id_is_fatal() {
        let text = THREE.replace(r#""id":"2""#, r#""id":"1""#);
        let f = write(&text, ".jsonl");
        let err = ingest(f.path(), InputFormat::JsonLines, "p", &IngestOptions::default()).unwrap_err();
        assert!(matches!(err, BenchError::Record { line: 2, .. }), "{err}");
    }

    #[test]
    fn csv_with_quoting() {
        let text = "id,created_at,title,description,assignee,interactions\n\
                    1,2020-01-01 10:00:00,\"crash, badly\",\"line one\nline \"\"two\"\"\",a@x,3\n\
                    2,2020-01-02,t,d,,\n\
                    3,2020-01-03T00:00:00+02:00,t,d,b@x,4\n";
        let f = write(text, ".csv");
        assert_eq!(InputFormat::from_path(f.path()), InputFormat::Csv);
        let out = ingest(f.path(), InputFormat::Csv, "p", &IngestOptions::default()).unwrap();
        assert_eq!(out.corpus.len(), 2);
        assert_eq!(out.dropped, 1);
        let r = &out.corpus.reports()[0];
        assert_eq!(r.title, "crash, badly");
        assert_eq!(r.description, "line one\nline \"two\"");
        assert_eq!(r.interactions, Some(3));
        assert_eq!(out.corpus.reports()[1].created_at, 1_578_009_600 - 7200);
    }

    #[test]
    fn csv_requires_header() {
        let f = write("1,2,3\n", ".csv");
        assert!(ingest(f.path(), InputFormat::Csv, "p", &IngestOptions::default()).is_err());
    }

    #[test]
    fn timestamps() {
        assert_eq!(parse_timestamp("1970-01-01T00:00:01Z"), Some(1));
        assert_eq!(parse_timestamp("1970-01-01T00:00:01.900Z"), Some(1));
        assert_eq!(parse_timestamp("1970-01-01 01:00:00 +0100"), Some(0));
        assert_eq!(parse_timestamp("1970-01-02"), Some(86_400));
        assert_eq!(parse_timestamp("yesterday"), None);
    }

    #[test]
    fn unreadable_file() {
        let err = ingest(Path::new("/nonexistent/x.jsonl"), InputFormat::JsonLines, "p", &IngestOptions::default());
        assert!(matches!(err, Err(BenchError::Io { .. })));
    }
}
