//! Report files: the per-token statistics CSV, the top-k token list, the
//! per-token accuracy CSV and JSON reports.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::TokenAccuracyRow;
use crate::label::LabelSet;
use crate::stats::{rank_order, CountBounds, TokenStats, TopTokens};

/// Writes `token,n,count_0..count_{C-1},p_star,z_star,majority_label`, rows in
/// ranking order (highest `z*` first).
pub fn write_stats_csv(stats: &[TokenStats], label_set: &LabelSet, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut wtr = csv::Writer::from_writer(BufWriter::new(file));

    let mut header = vec!["token".to_string(), "n".to_string()];
    header.extend((0..label_set.len()).map(|i| format!("count_{i}")));
    header.extend(["p_star", "z_star", "majority_label"].map(String::from));
    wtr.write_record(&header)?;

    let mut ordered: Vec<&TokenStats> = stats.iter().collect();
    ordered.sort_by(|a, b| rank_order(a, b));
    for s in ordered {
        let mut row = vec![s.token.clone(), s.n.to_string()];
        row.extend(s.counts.iter().map(u64::to_string));
        row.push(s.p_star.to_string());
        row.push(s.z_star.to_string());
        row.push(label_set.name(s.majority_label).to_string());
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads a stats CSV back. Statistics are recomputed from the count columns;
/// the stored majority label must agree with the recomputed one.
pub fn read_stats_csv(path: &Path, label_set: &LabelSet) -> Result<Vec<TokenStats>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let headers = rdr.headers()?.clone();
    let malformed = |line: usize, message: String| Error::MalformedRow {
        path: path.to_path_buf(),
        line,
        message,
    };
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| malformed(1, format!("header lacks column `{name}`")))
    };
    let token_col = col("token")?;
    let count_cols = (0..label_set.len())
        .map(|i| col(&format!("count_{i}")))
        .collect::<Result<Vec<_>>>()?;
    let majority_col = col("majority_label")?;

    let mut stats = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let counts = count_cols
            .iter()
            .map(|&c| {
                row.get(c)
                    .and_then(|v| v.parse::<u64>().ok())
                    .ok_or_else(|| malformed(line, format!("bad count in column {c}")))
            })
            .collect::<Result<Vec<u64>>>()?;
        if counts.iter().sum::<u64>() == 0 {
            return Err(malformed(line, "token with zero occurrences".into()));
        }
        let token = row.get(token_col).unwrap_or_default();
        let s = TokenStats::from_counts(token, &counts);
        let stored = row.get(majority_col).unwrap_or_default();
        if label_set.by_name(stored) != Some(s.majority_label) {
            return Err(malformed(
                line,
                format!("majority label {stored:?} disagrees with counts for {token:?}"),
            ));
        }
        stats.push(s);
    }
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopTokenEntry {
    pub token: String,
    pub n: u64,
    pub counts: Vec<u64>,
    pub p_star: f64,
    pub z_star: f64,
    pub majority_label: String,
}

/// Contents of the top-k JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopTokensFile {
    pub k: usize,
    pub min_count: u64,
    pub max_count: Option<u64>,
    /// Fewer than `k` tokens were eligible.
    pub short: bool,
    pub tokens: Vec<TopTokenEntry>,
}

impl TopTokensFile {
    pub fn new(top: &TopTokens, bounds: CountBounds, label_set: &LabelSet) -> Self {
        TopTokensFile {
            k: top.requested,
            min_count: bounds.min,
            max_count: bounds.max,
            short: top.is_short(),
            tokens: top
                .selected
                .iter()
                .map(|s| TopTokenEntry {
                    token: s.token.clone(),
                    n: s.n,
                    counts: s.counts.clone(),
                    p_star: s.p_star,
                    z_star: s.z_star,
                    majority_label: label_set.name(s.majority_label).to_string(),
                })
                .collect(),
        }
    }

    pub fn token_names(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.token.clone()).collect()
    }
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}

/// Writes `token,n_major,n_minor,acc_major,acc_minor,acc_overall`; absent
/// accuracies are empty fields.
pub fn write_accuracy_csv(rows: &[TokenAccuracyRow], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut wtr = csv::Writer::from_writer(BufWriter::new(file));
    wtr.write_record(["token", "n_major", "n_minor", "acc_major", "acc_minor", "acc_overall"])?;
    let fmt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        wtr.write_record([
            r.token.clone(),
            r.n_majority.to_string(),
            r.n_minority.to_string(),
            fmt(r.acc_majority),
            fmt(r.acc_minority),
            fmt(r.acc_overall),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
