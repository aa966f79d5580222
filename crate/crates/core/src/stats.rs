//! Token–label co-occurrence counts and the `p*` / `z*` bias statistics.
//!
//! For a token occurring in `n` records with empirical label distribution `p̂`,
//!
//! ```text
//! p* = max_l p̂_l
//! z* = max_l (p̂_l − 1/C) / sqrt((1/C)(1 − 1/C) / n)
//! ```
//!
//! where `C` is the number of labels. Under no spurious correlation `p*` is near
//! `1/C` and `z*` near zero; `z*` grows with `sqrt(n)` for a fixed skew.

use std::cmp::Ordering;
use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::label::Label;
use crate::tokenizer::{tokenize_record, TokenSet, TokenizerConfig};

const CHUNK: usize = 4096;

/// Per-token counts of records containing the token, split by label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenLabelCounts {
    counts: HashMap<String, Vec<u64>>,
    num_labels: usize,
    total_records: u64,
}

impl TokenLabelCounts {
    pub fn new(num_labels: usize) -> Self {
        TokenLabelCounts {
            counts: HashMap::new(),
            num_labels,
            total_records: 0,
        }
    }

    pub fn add_record<'a>(&mut self, tokens: impl IntoIterator<Item = &'a str>, label: Label) {
        self.total_records += 1;
        for tok in tokens {
            match self.counts.get_mut(tok) {
                Some(v) => v[label.code()] += 1,
                None => {
                    let mut v = vec![0; self.num_labels];
                    v[label.code()] = 1;
                    self.counts.insert(tok.to_string(), v);
                }
            }
        }
    }

    /// Folds `other` into `self`. Associative and commutative.
    pub fn merge(&mut self, other: TokenLabelCounts) {
        assert_eq!(self.num_labels, other.num_labels, "label count mismatch");
        self.total_records += other.total_records;
        for (tok, v) in other.counts {
            match self.counts.get_mut(&tok) {
                Some(mine) => mine.iter_mut().zip(&v).for_each(|(a, b)| *a += b),
                None => {
                    self.counts.insert(tok, v);
                }
            }
        }
    }

    pub fn get(&self, token: &str) -> Option<&[u64]> {
        self.counts.get(token).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[u64])> {
        self.counts.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn num_tokens(&self) -> usize {
        self.counts.len()
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn total_records(&self) -> u64 {
        self.total_records
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Counts from pre-tokenized records.
pub fn count_token_sets(token_sets: &[TokenSet], labels: &[Label], num_labels: usize) -> TokenLabelCounts {
    assert_eq!(token_sets.len(), labels.len());
    token_sets
        .par_chunks(CHUNK)
        .zip(labels.par_chunks(CHUNK))
        .map(|(sets, labels)| {
            let mut counts = TokenLabelCounts::new(num_labels);
            for (set, &label) in sets.iter().zip(labels) {
                counts.add_record(set.iter(), label);
            }
            counts
        })
        .reduce(|| TokenLabelCounts::new(num_labels), |mut a, b| {
            a.merge(b);
            a
        })
}

pub fn tokenize_dataset(dataset: &Dataset, config: &TokenizerConfig) -> Vec<TokenSet> {
    dataset
        .records
        .par_iter()
        .map(|r| tokenize_record(r, config))
        .collect()
}

pub fn count_token_labels(dataset: &Dataset, config: &TokenizerConfig) -> Result<TokenLabelCounts> {
    dataset.ensure_non_empty()?;
    let sets = tokenize_dataset(dataset, config);
    let labels: Vec<Label> = dataset.records.iter().map(|r| r.label).collect();
    Ok(count_token_sets(&sets, &labels, dataset.num_labels()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenStats {
    pub token: String,
    /// Number of records containing the token.
    pub n: u64,
    pub counts: Vec<u64>,
    pub p_hat: Vec<f64>,
    pub p_star: f64,
    pub z_star: f64,
    pub majority_label: Label,
}

impl TokenStats {
    /// Statistics for one token under the uniform null `p_l = 1/C`.
    ///
    /// Panics if `counts` has fewer than two labels or sums to zero.
    pub fn from_counts(token: impl Into<String>, counts: &[u64]) -> TokenStats {
        let c = counts.len();
        assert!(c >= 2, "need at least two labels");
        let n: u64 = counts.iter().sum();
        assert!(n > 0, "token with zero occurrences");

        let nf = n as f64;
        let null = 1.0 / c as f64;
        let sd = (null * (1.0 - null) / nf).sqrt();
        let p_hat: Vec<f64> = counts.iter().map(|&k| k as f64 / nf).collect();

        // First maximal count wins, so ties go to the smallest label code.
        let (majority, &max_count) = counts
            .iter()
            .enumerate()
            .fold((0, &counts[0]), |best, cur| if cur.1 > best.1 { cur } else { best });
        let p_star = max_count as f64 / nf;
        let z_star = p_hat
            .iter()
            .map(|&p| (p - null) / sd)
            .fold(f64::NEG_INFINITY, f64::max);

        TokenStats {
            token: token.into(),
            n,
            counts: counts.to_vec(),
            p_hat,
            p_star,
            z_star,
            majority_label: Label(majority as u16),
        }
    }
}

/// Per-token statistics sorted by token.
pub fn compute_stats(counts: &TokenLabelCounts) -> Result<Vec<TokenStats>> {
    if counts.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if counts.num_labels() < 2 {
        return Err(Error::InvalidParam("need at least two labels".into()));
    }
    let mut stats: Vec<TokenStats> = counts
        .counts
        .par_iter()
        .map(|(tok, v)| TokenStats::from_counts(tok.clone(), v))
        .collect();
    stats.sort_unstable_by(|a, b| a.token.cmp(&b.token));
    Ok(stats)
}

/// Ranking order: `z*` descending, then `n` descending, then token.
pub fn rank_order(a: &TokenStats, b: &TokenStats) -> Ordering {
    b.z_star
        .total_cmp(&a.z_star)
        .then(b.n.cmp(&a.n))
        .then_with(|| a.token.cmp(&b.token))
}

/// Inclusive occurrence-count window for top-k selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountBounds {
    pub min: u64,
    pub max: Option<u64>,
}

impl CountBounds {
    pub fn new(min: u64, max: Option<u64>) -> Result<Self> {
        if min < 1 {
            return Err(Error::InvalidParam("min_count must be at least 1".into()));
        }
        if let Some(max) = max {
            if max < min {
                return Err(Error::InvalidParam(format!("max_count {max} is below min_count {min}")));
            }
        }
        Ok(CountBounds { min, max })
    }

    pub fn unbounded() -> Self {
        CountBounds { min: 1, max: None }
    }

    pub fn contains(&self, n: u64) -> bool {
        n >= self.min && self.max.is_none_or(|max| n <= max)
    }
}

impl Default for CountBounds {
    fn default() -> Self {
        CountBounds { min: 1000, max: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopTokens {
    pub selected: Vec<TokenStats>,
    pub requested: usize,
}

impl TopTokens {
    /// Fewer than `k` tokens were eligible.
    pub fn is_short(&self) -> bool {
        self.selected.len() < self.requested
    }

    pub fn tokens(&self) -> Vec<String> {
        self.selected.iter().map(|s| s.token.clone()).collect()
    }
}

pub fn top_biased_tokens(stats: &[TokenStats], k: usize, bounds: CountBounds) -> Result<TopTokens> {
    if k < 1 {
        return Err(Error::InvalidParam("k must be at least 1".into()));
    }
    let mut eligible: Vec<&TokenStats> = stats.iter().filter(|s| bounds.contains(s.n)).collect();
    eligible.sort_unstable_by(|a, b| rank_order(a, b));
    Ok(TopTokens {
        selected: eligible.into_iter().take(k).cloned().collect(),
        requested: k,
    })
}
