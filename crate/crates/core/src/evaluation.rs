//! Scoring external model predictions on the majority and minority label
//! subsets of biased tokens.
//!
//! For a token, the majority label comes from the *training* statistics. Test
//! records containing the token split into those whose gold label equals it
//! (majority set) and the rest (minority set).

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::corpus::{Dataset, Record};
use crate::error::{Error, Result};
use crate::label::{Label, LabelSet, ParsedLabel};
use crate::stats::{tokenize_dataset, TokenStats};
use crate::tokenizer::{tokenize_record, TokenSet, TokenizerConfig};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionSet {
    pub model_name: String,
    predictions: HashMap<String, Label>,
}

impl PredictionSet {
    pub fn new(model_name: impl Into<String>, predictions: impl IntoIterator<Item = (String, Label)>) -> Self {
        PredictionSet {
            model_name: model_name.into(),
            predictions: predictions.into_iter().collect(),
        }
    }

    pub fn get(&self, id: &str) -> Option<Label> {
        self.predictions.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.predictions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predictions.is_empty()
    }
}

/// Loads predictions from CSV (`id,predicted_label`, chosen by a `.csv`
/// extension) or JSONL (keys `id`, `predicted_label`).
pub fn load_predictions(path: &Path, label_set: &LabelSet) -> Result<PredictionSet> {
    let model_name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("model")
        .to_string();
    let is_csv = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));

    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows: Vec<(usize, String, String)> = Vec::new();
    if is_csv {
        let mut rdr = csv::Reader::from_reader(BufReader::new(file));
        let headers = rdr.headers()?.clone();
        let col = |name: &str| {
            headers.iter().position(|h| h.trim() == name).ok_or_else(|| Error::MalformedRow {
                path: path.to_path_buf(),
                line: 1,
                message: format!("header lacks column `{name}`"),
            })
        };
        let (id_col, pred_col) = (col("id")?, col("predicted_label")?);
        for row in rdr.records() {
            let row = row?;
            let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
            let get = |c: usize| row.get(c).map(str::to_string).ok_or_else(|| Error::MalformedRow {
                path: path.to_path_buf(),
                line,
                message: "missing column".into(),
            });
            rows.push((line, get(id_col)?, get(pred_col)?));
        }
    } else {
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let malformed = |message: String| Error::MalformedRow {
                path: path.to_path_buf(),
                line: idx + 1,
                message,
            };
            let obj: Map<String, Value> = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
            let text = |key: &str| match obj.get(key) {
                Some(Value::String(s)) => Ok(s.clone()),
                Some(Value::Number(n)) => Ok(n.to_string()),
                _ => Err(malformed(format!("missing or invalid `{key}`"))),
            };
            rows.push((idx + 1, text("id")?, text("predicted_label")?));
        }
    }

    let mut predictions = HashMap::with_capacity(rows.len());
    for (line, id, raw) in rows {
        let label = match label_set.parse(&raw) {
            Some(ParsedLabel::Known(l)) => l,
            _ => {
                return Err(Error::UnknownLabel {
                    path: path.to_path_buf(),
                    line,
                    label: raw,
                })
            }
        };
        if predictions.insert(id.clone(), label).is_some() {
            return Err(Error::DuplicateId {
                path: PathBuf::from(path),
                line,
                id,
            });
        }
    }
    Ok(PredictionSet {
        model_name,
        predictions,
    })
}

/// Fraction of `subset` predicted correctly; `None` for an empty subset.
pub fn accuracy<'a>(predictions: &PredictionSet, subset: impl IntoIterator<Item = &'a Record>) -> Result<Option<f64>> {
    let (correct, total) = tally(predictions, subset)?;
    Ok((total > 0).then(|| correct as f64 / total as f64))
}

fn tally<'a>(predictions: &PredictionSet, subset: impl IntoIterator<Item = &'a Record>) -> Result<(usize, usize)> {
    let mut correct = 0;
    let mut total = 0;
    for r in subset {
        let predicted = predictions
            .get(&r.id)
            .ok_or_else(|| Error::MissingPrediction(r.id.clone()))?;
        total += 1;
        if predicted == r.label {
            correct += 1;
        }
    }
    Ok((correct, total))
}

fn majority_of(train_stats: &[TokenStats], token: &str) -> Result<Label> {
    train_stats
        .iter()
        .find(|s| s.token == token)
        .map(|s| s.majority_label)
        .ok_or_else(|| Error::UnknownToken(token.to_string()))
}

fn partition<'a>(
    records: &'a [Record],
    sets: &[TokenSet],
    token: &str,
    majority: Label,
) -> (Vec<&'a Record>, Vec<&'a Record>) {
    records
        .iter()
        .zip(sets)
        .filter(|(_, set)| set.contains(token))
        .map(|(r, _)| r)
        .partition(|r| r.label == majority)
}

/// Splits the test records containing `token` by whether their gold label is
/// the token's training majority label.
pub fn split_majority_minority<'a>(
    test: &'a Dataset,
    train_stats: &[TokenStats],
    token: &str,
    config: &TokenizerConfig,
) -> Result<(Vec<&'a Record>, Vec<&'a Record>)> {
    let majority = majority_of(train_stats, token)?;
    let sets: Vec<TokenSet> = test.records.iter().map(|r| tokenize_record(r, config)).collect();
    Ok(partition(&test.records, &sets, token, majority))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenAccuracyRow {
    pub token: String,
    pub majority_label: Label,
    pub n_majority: usize,
    pub n_minority: usize,
    pub acc_majority: Option<f64>,
    pub acc_minority: Option<f64>,
    pub acc_overall: Option<f64>,
}

pub fn token_accuracy_table(
    test: &Dataset,
    predictions: &PredictionSet,
    train_stats: &[TokenStats],
    tokens: &[String],
    config: &TokenizerConfig,
) -> Result<Vec<TokenAccuracyRow>> {
    let sets = tokenize_dataset(test, config);
    tokens
        .iter()
        .map(|token| {
            let majority = majority_of(train_stats, token)?;
            let (major, minor) = partition(&test.records, &sets, token, majority);
            let (c_major, n_major) = tally(predictions, major.iter().copied())?;
            let (c_minor, n_minor) = tally(predictions, minor.iter().copied())?;
            let ratio = |c: usize, n: usize| (n > 0).then(|| c as f64 / n as f64);
            Ok(TokenAccuracyRow {
                token: token.clone(),
                majority_label: majority,
                n_majority: n_major,
                n_minority: n_minor,
                acc_majority: ratio(c_major, n_major),
                acc_minority: ratio(c_minor, n_minor),
                acc_overall: ratio(c_major + c_minor, n_major + n_minor),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsetAccuracy {
    pub n: usize,
    pub accuracy: Option<f64>,
}

/// Overall accuracy, plus the split between records containing any of the
/// given tokens and the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub model_name: String,
    pub overall: SubsetAccuracy,
    pub with_tokens: SubsetAccuracy,
    pub without_tokens: SubsetAccuracy,
    pub tokens: Vec<String>,
}

pub fn evaluation_summary(
    test: &Dataset,
    predictions: &PredictionSet,
    tokens: &[String],
    config: &TokenizerConfig,
) -> Result<EvaluationSummary> {
    let sets = tokenize_dataset(test, config);
    let wanted: HashSet<&str> = tokens.iter().map(String::as_str).collect();
    let mut with = Vec::new();
    let mut without = Vec::new();
    for (r, set) in test.records.iter().zip(&sets) {
        if set.iter().any(|t| wanted.contains(t)) {
            with.push(r);
        } else {
            without.push(r);
        }
    }
    let subset = |records: &[&Record]| -> Result<SubsetAccuracy> {
        Ok(SubsetAccuracy {
            n: records.len(),
            accuracy: accuracy(predictions, records.iter().copied())?,
        })
    };
    Ok(EvaluationSummary {
        model_name: predictions.model_name.clone(),
        overall: SubsetAccuracy {
            n: test.len(),
            accuracy: accuracy(predictions, &test.records)?,
        },
        with_tokens: subset(&with)?,
        without_tokens: subset(&without)?,
        tokens: tokens.to_vec(),
    })
}

fn pair(before: Option<f64>, after: Option<f64>) -> String {
    let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.2}"));
    format!("({}, {})", fmt(before), fmt(after))
}

fn percent(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{:.3}%", v * 100.0))
}

/// Before/after comparison text: overall and token-subset accuracies as
/// percentages, then one row per token with `(before, after)` pairs.
/// Tokens are taken from `after`; a token missing from `before` shows `n/a`.
pub fn format_comparison(
    before: &EvaluationSummary,
    after: &EvaluationSummary,
    before_rows: &[TokenAccuracyRow],
    after_rows: &[TokenAccuracyRow],
) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "overall accuracy: {} -> {}\n",
        percent(before.overall.accuracy),
        percent(after.overall.accuracy)
    ));
    out.push_str(&format!(
        "accuracy on records with corrected tokens: {} -> {}\n",
        percent(before.with_tokens.accuracy),
        percent(after.with_tokens.accuracy)
    ));
    out.push_str(&format!(
        "accuracy on remaining records: {} -> {}\n\n",
        percent(before.without_tokens.accuracy),
        percent(after.without_tokens.accuracy)
    ));
    out.push_str("token\taccuracy|major\taccuracy|minor\toverall\n");
    for row in after_rows {
        let prev = before_rows.iter().find(|r| r.token == row.token);
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            row.token,
            pair(prev.and_then(|p| p.acc_majority), row.acc_majority),
            pair(prev.and_then(|p| p.acc_minority), row.acc_minority),
            pair(prev.and_then(|p| p.acc_overall), row.acc_overall),
        ));
    }
    out
}
