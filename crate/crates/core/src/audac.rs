//! Adaptive up-sampling correction of token–label artifacts.
//!
//! The corrector selects the top-k biased tokens `S`, computes per-label deficits
//! `D[s][l] = max(c_s) − c_s[l]` and an index `B[s][l]` of records containing `s`
//! with label `l`. It then makes round-robin passes over `S`. For each token and
//! each label still in deficit it draws `min(D, max(1, ceil(D · step)))` records
//! uniformly with replacement from `B[s][l]` and appends copies to the corpus.
//! Counts for every target token are updated after each draw, so a shared
//! record sampled for one token shifts the deficits of the others before their
//! turn comes. The loop stops once every residual deficit is within tolerance,
//! or after `max_iters` passes.
//!
//! Only originals are ever sampled. A token–label pair with no source record
//! cannot be created by duplication; such labels are frozen and reported.

use std::collections::{BTreeSet, HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Record};
use crate::error::{Error, Result};
use crate::label::Label;
use crate::stats::{compute_stats, count_token_sets, tokenize_dataset, top_biased_tokens, CountBounds, TokenLabelCounts};
use crate::tokenizer::{TokenSet, TokenizerConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudacParams {
    /// Number of top biased tokens to correct.
    pub k: usize,
    /// Fraction of the current deficit drawn per pass, in `(0, 1]`.
    pub step_size: f64,
    pub max_iters: usize,
    pub seed: u64,
    /// Residual deficit per label accepted as converged.
    pub tolerance: u64,
    pub count_bounds: CountBounds,
    /// Stop sampling once the corpus has grown by this fraction of its
    /// original size. Tokens sharing records can feed each other's deficits
    /// without bound, so this guards against runaway growth.
    #[serde(default)]
    pub max_growth: Option<f64>,
}

impl Default for AudacParams {
    fn default() -> Self {
        AudacParams {
            k: 10,
            step_size: 0.2,
            max_iters: 50,
            seed: 42,
            tolerance: 0,
            count_bounds: CountBounds::default(),
            max_growth: None,
        }
    }
}

impl AudacParams {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::InvalidParam("k must be at least 1".into()));
        }
        if !(self.step_size > 0.0 && self.step_size <= 1.0) {
            return Err(Error::InvalidParam(format!(
                "step size must lie in (0, 1], got {}",
                self.step_size
            )));
        }
        if self.max_iters < 1 {
            return Err(Error::InvalidParam("max_iters must be at least 1".into()));
        }
        CountBounds::new(self.count_bounds.min, self.count_bounds.max)?;
        if let Some(g) = self.max_growth {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(Error::InvalidParam(format!("max growth must be a non-negative fraction, got {g}")));
            }
        }
        Ok(())
    }

    /// Records to draw for a deficit of `deficit` in one pass.
    pub fn draw_size(&self, deficit: u64) -> u64 {
        if deficit == 0 {
            return 0;
        }
        let scaled = (deficit as f64 * self.step_size).ceil() as u64;
        scaled.clamp(1, deficit)
    }
}

/// Deficit of every label against the token's largest label count.
pub fn label_deficits(counts: &[u64]) -> Vec<u64> {
    let max = counts.iter().copied().max().unwrap_or(0);
    counts.iter().map(|&c| max - c).collect()
}

/// Initial per-label deficits for each of `tokens`, in the given order.
pub fn compute_targets(tokens: &[String], counts: &TokenLabelCounts) -> Result<Vec<Vec<u64>>> {
    tokens
        .iter()
        .map(|t| {
            counts
                .get(t)
                .map(label_deficits)
                .ok_or_else(|| Error::UnknownToken(t.clone()))
        })
        .collect()
}

/// Positions of the records containing one token, bucketed by label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenIndex {
    pub token: String,
    pub by_label: Vec<Vec<usize>>,
}

impl TokenIndex {
    /// True when the token occurs in no record.
    pub fn is_empty(&self) -> bool {
        self.by_label.iter().all(Vec::is_empty)
    }

    pub fn pool(&self, label: Label) -> &[usize] {
        &self.by_label[label.code()]
    }
}

fn index_token_sets(sets: &[TokenSet], labels: &[Label], tokens: &[String], num_labels: usize) -> Vec<TokenIndex> {
    let mut index: Vec<TokenIndex> = tokens
        .iter()
        .map(|t| TokenIndex {
            token: t.clone(),
            by_label: vec![Vec::new(); num_labels],
        })
        .collect();
    for (pos, (set, label)) in sets.iter().zip(labels).enumerate() {
        for entry in index.iter_mut() {
            if set.contains(&entry.token) {
                entry.by_label[label.code()].push(pos);
            }
        }
    }
    index
}

/// Builds the token → per-label record index. Tokens absent from the corpus get
/// an all-empty entry (see [`TokenIndex::is_empty`]).
pub fn build_token_index(dataset: &Dataset, tokens: &[String], config: &TokenizerConfig) -> Result<Vec<TokenIndex>> {
    if tokens.is_empty() {
        return Err(Error::InvalidParam("no tokens to index".into()));
    }
    let sets = tokenize_dataset(dataset, config);
    let labels: Vec<Label> = dataset.records.iter().map(|r| r.label).collect();
    Ok(index_token_sets(&sets, &labels, tokens, dataset.num_labels()))
}

/// Targets of one correction run: tokens in round-robin order with their
/// starting deficits and record index.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionPlan {
    pub tokens: Vec<String>,
    pub deficits: Vec<Vec<u64>>,
    pub index: Vec<TokenIndex>,
    /// Fewer than `k` tokens were eligible for selection.
    pub selection_short: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub token: String,
    pub label: String,
    pub deficit_before: u64,
    pub added: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenOutcome {
    pub token: String,
    pub initial_counts: Vec<u64>,
    pub final_counts: Vec<u64>,
    pub initial_deficits: Vec<u64>,
    pub final_deficits: Vec<u64>,
    /// Labels in deficit with no source record to copy.
    pub frozen_labels: Vec<String>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudacReport {
    pub params: AudacParams,
    pub tokenizer: String,
    pub tokens: Vec<String>,
    pub selection_short: bool,
    pub iterations_run: usize,
    pub initial_size: usize,
    pub final_size: usize,
    pub growth_fraction: f64,
    pub converged: bool,
    /// Sampling stopped at the `max_growth` limit.
    pub growth_capped: bool,
    pub unsatisfiable_tokens: BTreeSet<String>,
    pub token_outcomes: Vec<TokenOutcome>,
    pub trace: Vec<TraceEntry>,
}

impl AudacReport {
    pub fn records_added(&self) -> usize {
        self.final_size - self.initial_size
    }
}

/// State exposed to an observer after each completed pass.
#[derive(Debug)]
pub struct IterationView<'a> {
    pub iteration: usize,
    /// Current corpus: originals followed by all copies so far.
    pub records: &'a [Record],
    pub tokens: &'a [String],
    /// Incrementally maintained per-label counts of each target token.
    pub live_counts: &'a [Vec<u64>],
}

/// Selects the top-k tokens and builds their plan, returning the tokenized corpus
/// alongside so it need not be recomputed.
fn plan_with_sets(
    dataset: &Dataset,
    params: &AudacParams,
    config: &TokenizerConfig,
) -> Result<(CorrectionPlan, Vec<TokenSet>, TokenLabelCounts)> {
    dataset.ensure_non_empty()?;
    params.validate()?;
    let sets = tokenize_dataset(dataset, config);
    let labels: Vec<Label> = dataset.records.iter().map(|r| r.label).collect();
    let counts = count_token_sets(&sets, &labels, dataset.num_labels());
    let stats = compute_stats(&counts)?;
    let top = top_biased_tokens(&stats, params.k, params.count_bounds)?;
    let tokens = top.tokens();
    let deficits = compute_targets(&tokens, &counts)?;
    let index = index_token_sets(&sets, &labels, &tokens, dataset.num_labels());
    Ok((
        CorrectionPlan {
            tokens,
            deficits,
            index,
            selection_short: top.is_short(),
        },
        sets,
        counts,
    ))
}

pub fn plan_correction(dataset: &Dataset, params: &AudacParams, config: &TokenizerConfig) -> Result<CorrectionPlan> {
    plan_with_sets(dataset, params, config).map(|(plan, _, _)| plan)
}

/// Runs the correction and returns the grown corpus with its report.
pub fn run_audac(dataset: &Dataset, params: &AudacParams, config: &TokenizerConfig) -> Result<(Dataset, AudacReport)> {
    run_audac_observed(dataset, params, config, |_| {})
}

/// As [`run_audac`], calling `observer` after every pass.
pub fn run_audac_observed(
    dataset: &Dataset,
    params: &AudacParams,
    config: &TokenizerConfig,
    observer: impl FnMut(&IterationView<'_>),
) -> Result<(Dataset, AudacReport)> {
    let (plan, sets, counts) = plan_with_sets(dataset, params, config)?;
    Corrector::new(dataset, params, config, plan, &sets, &counts).run(observer)
}

/// Runs the correction on an explicit token list instead of the top-k selection.
/// The tokens are visited in the given order.
pub fn run_audac_on_tokens(
    dataset: &Dataset,
    tokens: &[String],
    params: &AudacParams,
    config: &TokenizerConfig,
    observer: impl FnMut(&IterationView<'_>),
) -> Result<(Dataset, AudacReport)> {
    dataset.ensure_non_empty()?;
    params.validate()?;
    if tokens.is_empty() {
        return Err(Error::InvalidParam("no tokens to correct".into()));
    }
    let sets = tokenize_dataset(dataset, config);
    let labels: Vec<Label> = dataset.records.iter().map(|r| r.label).collect();
    let counts = count_token_sets(&sets, &labels, dataset.num_labels());
    let plan = CorrectionPlan {
        deficits: compute_targets(tokens, &counts)?,
        index: index_token_sets(&sets, &labels, tokens, dataset.num_labels()),
        tokens: tokens.to_vec(),
        selection_short: false,
    };
    Corrector::new(dataset, params, config, plan, &sets, &counts).run(observer)
}

struct Corrector<'a> {
    dataset: &'a Dataset,
    params: &'a AudacParams,
    tokenizer: &'static str,
    plan: CorrectionPlan,
    /// Target-token indices contained in each original record.
    record_targets: Vec<Vec<usize>>,
    live: Vec<Vec<u64>>,
    initial: Vec<Vec<u64>>,
    frozen: Vec<Vec<bool>>,
    records: Vec<Record>,
    /// Original position of every appended copy.
    origins: Vec<usize>,
    copies: HashMap<usize, usize>,
    ids: HashSet<String>,
    rng: ChaCha8Rng,
    trace: Vec<TraceEntry>,
    record_limit: Option<usize>,
    capped: bool,
}

impl<'a> Corrector<'a> {
    fn new(
        dataset: &'a Dataset,
        params: &'a AudacParams,
        config: &TokenizerConfig,
        plan: CorrectionPlan,
        sets: &[TokenSet],
        counts: &TokenLabelCounts,
    ) -> Self {
        let c = dataset.num_labels();
        let record_targets = sets
            .iter()
            .map(|set| {
                plan.tokens
                    .iter()
                    .enumerate()
                    .filter(|(_, t)| set.contains(t))
                    .map(|(i, _)| i)
                    .collect()
            })
            .collect();
        let live: Vec<Vec<u64>> = plan
            .tokens
            .iter()
            .map(|t| counts.get(t).map(<[u64]>::to_vec).unwrap_or_else(|| vec![0; c]))
            .collect();

        // Labels in deficit with nothing to copy can never be filled.
        let frozen = plan
            .index
            .iter()
            .zip(&live)
            .map(|(entry, counts)| {
                label_deficits(counts)
                    .iter()
                    .zip(&entry.by_label)
                    .map(|(&d, pool)| d > params.tolerance && pool.is_empty())
                    .collect()
            })
            .collect();

        Corrector {
            dataset,
            params,
            tokenizer: config.mode().name(),
            record_targets,
            initial: live.clone(),
            live,
            frozen,
            plan,
            records: dataset.records.clone(),
            origins: Vec::new(),
            copies: HashMap::new(),
            ids: dataset.records.iter().map(|r| r.id.clone()).collect(),
            rng: ChaCha8Rng::seed_from_u64(params.seed),
            trace: Vec::new(),
            record_limit: params
                .max_growth
                .map(|g| dataset.len() + (dataset.len() as f64 * g).floor() as usize),
            capped: false,
        }
    }

    fn token_converged(&self, ti: usize) -> bool {
        label_deficits(&self.live[ti])
            .iter()
            .zip(&self.frozen[ti])
            .all(|(&d, &frozen)| frozen || d <= self.params.tolerance)
    }

    fn all_converged(&self) -> bool {
        (0..self.plan.tokens.len()).all(|ti| self.token_converged(ti))
    }

    fn append_copy(&mut self, pos: usize) {
        let original = &self.dataset.records[pos];
        let counter = self.copies.entry(pos).or_insert(0);
        let copy = loop {
            *counter += 1;
            let candidate = original.duplicate(*counter);
            if !self.ids.contains(&candidate.id) {
                break candidate;
            }
        };
        self.ids.insert(copy.id.clone());
        for &tj in &self.record_targets[pos] {
            self.live[tj][original.label.code()] += 1;
        }
        self.records.push(copy);
        self.origins.push(pos);
    }

    fn correct_token(&mut self, iteration: usize, ti: usize) {
        let deficits = label_deficits(&self.live[ti]);
        for (l, &deficit) in deficits.iter().enumerate() {
            if self.frozen[ti][l] || deficit <= self.params.tolerance {
                continue;
            }
            let pool_len = self.plan.index[ti].by_label[l].len();
            if pool_len == 0 {
                // Deficit opened up later through other tokens' copies.
                self.frozen[ti][l] = true;
                continue;
            }
            let mut take = self.params.draw_size(deficit);
            if let Some(limit) = self.record_limit {
                let room = limit.saturating_sub(self.records.len()) as u64;
                if room < take {
                    take = room;
                    self.capped = true;
                }
                if take == 0 {
                    return;
                }
            }
            for _ in 0..take {
                let pos = self.plan.index[ti].by_label[l][self.rng.gen_range(0..pool_len)];
                self.append_copy(pos);
            }
            self.trace.push(TraceEntry {
                iteration,
                token: self.plan.tokens[ti].clone(),
                label: self.dataset.label_set.name(Label(l as u16)).to_string(),
                deficit_before: deficit,
                added: take,
            });
        }
        debug_assert!(
            label_deficits(&self.live[ti])
                .iter()
                .zip(&deficits)
                .all(|(after, before)| after <= before),
            "own sampling step increased a residual deficit"
        );
    }

    /// Counts of every target token over the current corpus, from scratch.
    fn recount(&self) -> Vec<Vec<u64>> {
        let mut counts = vec![vec![0u64; self.dataset.num_labels()]; self.plan.tokens.len()];
        let positions = (0..self.dataset.len()).chain(self.origins.iter().copied());
        for pos in positions {
            let label = self.dataset.records[pos].label.code();
            for &tj in &self.record_targets[pos] {
                counts[tj][label] += 1;
            }
        }
        counts
    }

    fn run(mut self, mut observer: impl FnMut(&IterationView<'_>)) -> Result<(Dataset, AudacReport)> {
        let mut iterations_run = 0;
        for iteration in 1..=self.params.max_iters {
            if self.all_converged() {
                break;
            }
            iterations_run = iteration;
            for ti in 0..self.plan.tokens.len() {
                self.correct_token(iteration, ti);
            }
            let capped = self.capped;
            debug_assert_eq!(self.recount(), self.live, "incremental counts diverged from recount");
            observer(&IterationView {
                iteration,
                records: &self.records,
                tokens: &self.plan.tokens,
                live_counts: &self.live,
            });
            if capped {
                break;
            }
        }

        let converged = self.all_converged();
        let label_set = &self.dataset.label_set;
        let mut unsatisfiable_tokens = BTreeSet::new();
        let token_outcomes = (0..self.plan.tokens.len())
            .map(|ti| {
                let frozen_labels: Vec<String> = self.frozen[ti]
                    .iter()
                    .enumerate()
                    .filter(|(_, &f)| f)
                    .map(|(l, _)| label_set.name(Label(l as u16)).to_string())
                    .collect();
                if !frozen_labels.is_empty() {
                    unsatisfiable_tokens.insert(self.plan.tokens[ti].clone());
                }
                TokenOutcome {
                    token: self.plan.tokens[ti].clone(),
                    initial_counts: self.initial[ti].clone(),
                    final_counts: self.live[ti].clone(),
                    initial_deficits: label_deficits(&self.initial[ti]),
                    final_deficits: label_deficits(&self.live[ti]),
                    frozen_labels,
                    converged: self.token_converged(ti),
                }
            })
            .collect();

        let initial_size = self.dataset.len();
        let final_size = self.records.len();
        let report = AudacReport {
            params: self.params.clone(),
            tokenizer: self.tokenizer.to_string(),
            tokens: self.plan.tokens.clone(),
            selection_short: self.plan.selection_short,
            iterations_run,
            initial_size,
            final_size,
            growth_fraction: (final_size - initial_size) as f64 / initial_size as f64,
            converged,
            growth_capped: self.capped,
            unsatisfiable_tokens,
            token_outcomes,
            trace: self.trace,
        };
        let corrected = Dataset::new(self.records, self.dataset.split_name.clone(), label_set.clone());
        Ok((corrected, report))
    }
}
