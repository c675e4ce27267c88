//! Parsers for the review (Amazon JSON-lines) and view (TSV) logs.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ReviewRecord, ViewRecord};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The subset of the public Amazon review schema we consume. Other keys
/// (reviewText, summary, ...) are ignored.
#[derive(Serialize, Deserialize)]
struct AmazonReview {
    #[serde(rename = "reviewerID")]
    reviewer_id: String,
    asin: String,
    overall: f64,
    #[serde(default)]
    helpful: Option<[u32; 2]>,
    #[serde(rename = "unixReviewTime")]
    unix_review_time: i64,
}

/// Parse JSON-lines reviews. Blank lines are skipped.
pub fn parse_reviews_jsonl<R: BufRead>(reader: R) -> Result<Vec<ReviewRecord>, IngestError> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: AmazonReview = serde_json::from_str(&line)
            .map_err(|e| IngestError::Malformed { line: line_no, message: e.to_string() })?;
        if raw.overall.fract() != 0.0 || !(1.0..=5.0).contains(&raw.overall) {
            return Err(IngestError::Malformed {
                line: line_no,
                message: format!("rating {} is not an integer in 1..=5", raw.overall),
            });
        }
        let [yes, total] = raw.helpful.unwrap_or([0, 0]);
        out.push(ReviewRecord {
            user_id: raw.reviewer_id,
            item_id: raw.asin,
            rating: raw.overall as u8,
            helpful_yes: yes,
            helpful_total: total,
            timestamp: raw.unix_review_time,
        });
    }
    Ok(out)
}

/// Parse `user \t item [\t timestamp]` view lines. Blank lines are skipped.
pub fn parse_views_tsv<R: BufRead>(reader: R) -> Result<Vec<ViewRecord>, IngestError> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let malformed = |message: String| IngestError::Malformed { line: line_no, message };
        let timestamp = match fields.as_slice() {
            [_, _] => None,
            [_, _, ts] => Some(ts.trim().parse::<i64>().map_err(|e| malformed(format!("timestamp: {e}")))?),
            _ => return Err(malformed(format!("expected 2 or 3 tab-separated fields, got {}", fields.len()))),
        };
        let (user, item) = (fields[0].trim(), fields[1].trim());
        if user.is_empty() || item.is_empty() {
            return Err(malformed("empty user or item id".into()));
        }
        out.push(ViewRecord { user_id: user.to_owned(), item_id: item.to_owned(), timestamp });
    }
    Ok(out)
}

pub fn read_reviews(path: &Path) -> Result<Vec<ReviewRecord>, IngestError> {
    parse_reviews_jsonl(BufReader::new(File::open(path)?))
}

pub fn read_views(path: &Path) -> Result<Vec<ViewRecord>, IngestError> {
    parse_views_tsv(BufReader::new(File::open(path)?))
}

/// Write reviews in the JSON-lines schema [`parse_reviews_jsonl`] reads.
pub fn write_reviews_jsonl<W: Write>(reviews: &[ReviewRecord], mut out: W) -> io::Result<()> {
    for r in reviews {
        let raw = AmazonReview {
            reviewer_id: r.user_id.clone(),
            asin: r.item_id.clone(),
            overall: f64::from(r.rating),
            helpful: Some([r.helpful_yes, r.helpful_total]),
            unix_review_time: r.timestamp,
        };
        serde_json::to_writer(&mut out, &raw)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_views_tsv<W: Write>(views: &[ViewRecord], mut out: W) -> io::Result<()> {
    for v in views {
        match v.timestamp {
            Some(t) => writeln!(out, "{}\t{}\t{t}", v.user_id, v.item_id)?,
            None => writeln!(out, "{}\t{}", v.user_id, v.item_id)?,
        }
    }
    Ok(())
}
