//! Sensitive / non-sensitive CSV reports.
//!
//! Schema: `token,entity_type,count,Is_Analysis_Correct`, RFC-4180 quoting,
//! rows sorted by descending count, then token, then entity type. Encrypted
//! reports are `"KRPT" || nonce || AES-256-GCM ciphertext` of the CSV bytes.

use std::path::{Path, PathBuf};

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::keys::{KeyError, RunKey};

pub const UNIDENTIFIED: &str = "UNIDENTIFIED";
pub const REPORT_HEADER: [&str; 4] = ["token", "entity_type", "count", "Is_Analysis_Correct"];
pub const SEALED_MAGIC: &[u8; 4] = b"KRPT";

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("report header mismatch: expected {expected:?}, found {found:?}")]
    BadHeader { expected: String, found: String },
    #[error("line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("report is encrypted but no key was supplied")]
    MissingKey,
    #[error(transparent)]
    Key(#[from] KeyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Mark {
    #[default]
    Y,
    N,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ReportRow {
    pub token: String,
    pub entity_type: String,
    pub count: u64,
    #[serde(rename = "Is_Analysis_Correct")]
    pub is_analysis_correct: Mark,
}

/// Occurrence counts keyed by (token, entity type).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Tally {
    counts: FxHashMap<(String, String), u64>,
}

impl Tally {
    pub fn add(&mut self, token: &str, entity: &str, n: u64) {
        *self
            .counts
            .entry((token.to_string(), entity.to_string()))
            .or_default() += n;
    }

    pub fn merge(&mut self, other: Tally) {
        for (k, v) in other.counts {
            *self.counts.entry(k).or_default() += v;
        }
    }

    pub fn get(&self, token: &str, entity: &str) -> u64 {
        self.counts
            .get(&(token.to_string(), entity.to_string()))
            .copied()
            .unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.counts.keys().map(|(t, _)| t.as_str())
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn into_rows(self) -> Vec<ReportRow> {
        let mut rows: Vec<ReportRow> = self
            .counts
            .into_iter()
            .map(|((token, entity_type), count)| ReportRow {
                token,
                entity_type,
                count,
                is_analysis_correct: Mark::Y,
            })
            .collect();
        sort_rows(&mut rows);
        rows
    }
}

pub fn sort_rows(rows: &mut [ReportRow]) {
    rows.sort_by(|a, b| {
        b.count
            .cmp(&a.count)
            .then_with(|| a.token.cmp(&b.token))
            .then_with(|| a.entity_type.cmp(&b.entity_type))
    });
}

pub fn render_report(rows: &[ReportRow]) -> Result<Vec<u8>, ReportError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(REPORT_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner()
        .map_err(|e| ReportError::Csv(csv::Error::from(e.into_error())))
}

/// Parses a plaintext report, validating the header.
pub fn parse_report(bytes: &[u8]) -> Result<Vec<ReportRow>, ReportError> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(bytes);
    let header = r.headers()?.clone();
    if header.iter().map(str::trim).ne(REPORT_HEADER.iter().copied()) {
        return Err(ReportError::BadHeader {
            expected: REPORT_HEADER.join(","),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            ReportError::MalformedRow {
                line,
                reason: e.to_string(),
            }
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let bad = |reason: String| ReportError::MalformedRow { line, reason };
        let count: u64 = rec[2]
            .trim()
            .parse()
            .map_err(|_| bad(format!("count {:?} is not a positive integer", &rec[2])))?;
        if count == 0 {
            return Err(bad("count must be at least 1".into()));
        }
        let mark = match rec[3].trim() {
            "Y" | "y" => Mark::Y,
            "N" | "n" => Mark::N,
            other => return Err(bad(format!("Is_Analysis_Correct must be Y or N, found {other:?}"))),
        };
        rows.push(ReportRow {
            token: rec[0].to_string(),
            entity_type: rec[1].to_string(),
            count,
            is_analysis_correct: mark,
        });
    }
    Ok(rows)
}

/// Opens a report that may be sealed. Plaintext passes through unchanged.
pub fn unseal_report(bytes: &[u8], key: Option<&RunKey>) -> Result<Vec<u8>, ReportError> {
    match bytes.strip_prefix(SEALED_MAGIC.as_slice()) {
        Some(sealed) => Ok(key.ok_or(ReportError::MissingKey)?.open(sealed)?),
        None => Ok(bytes.to_vec()),
    }
}

pub fn seal_report(csv: &[u8], key: &RunKey) -> Vec<u8> {
    let mut out = SEALED_MAGIC.to_vec();
    out.extend(key.seal_random(csv));
    out
}

/// Rows the reviewer marked as misclassified (`Is_Analysis_Correct = N`).
pub fn parse_marked_report(bytes: &[u8], key: Option<&RunKey>) -> Result<Vec<ReportRow>, ReportError> {
    let plain = unseal_report(bytes, key)?;
    Ok(parse_report(&plain)?
        .into_iter()
        .filter(|r| r.is_analysis_correct == Mark::N)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportPaths {
    pub sensitive: PathBuf,
    pub non_sensitive: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Reports {
    pub sensitive: Vec<ReportRow>,
    pub non_sensitive: Vec<ReportRow>,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ReportError> {
    std::fs::write(path, bytes).map_err(|source| ReportError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Writes both reports; when `seal_with` is set the files are encrypted.
pub fn write_reports(
    reports: &Reports,
    paths: &ReportPaths,
    seal_with: Option<&RunKey>,
) -> Result<(), ReportError> {
    for (rows, path) in [
        (&reports.sensitive, &paths.sensitive),
        (&reports.non_sensitive, &paths.non_sensitive),
    ] {
        let csv = render_report(rows)?;
        match seal_with {
            Some(k) => write_file(path, &seal_report(&csv, k))?,
            None => write_file(path, &csv)?,
        }
    }
    Ok(())
}
