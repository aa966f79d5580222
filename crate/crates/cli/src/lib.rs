//! Subcommands of the `artifact-audit` binary.
//!
//! Each subcommand is a plain function over its parsed arguments so it can be
//! driven from tests without spawning a process.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use artifact_audit::evaluation::{evaluation_summary, format_comparison, EvaluationSummary};
use artifact_audit::report::{read_json, read_stats_csv, write_accuracy_csv, write_json, write_stats_csv, TopTokensFile};
use artifact_audit::tokenizer::{read_word_list, TokenizerKind, DEFAULT_STOPWORDS};
use artifact_audit::{
    compute_stats, count_token_labels, load_dataset, load_predictions, run_audac, run_audac_on_tokens, token_accuracy_table,
    top_biased_tokens, write_dataset, AudacParams, AudacReport, CountBounds, DataFormat, Dataset, LabelSet,
    TokenAccuracyRow, TokenStats, TokenizerConfig, TokenizerMode,
};

#[derive(Debug, Parser)]
#[command(name = "artifact-audit", version, about = "Detect and correct token-label artifacts in labeled sentence-pair corpora")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute per-token p*/z* statistics and the top-k biased tokens.
    Analyze(AnalyzeArgs),
    /// Up-sample minority-label records of the top-k biased tokens.
    Correct(CorrectArgs),
    /// Score a prediction file on majority/minority subsets of biased tokens.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CorpusArgs {
    /// Input format; guessed from the extension when omitted (.tsv/.txt = tsv).
    #[arg(long)]
    pub format: Option<DataFormat>,
    /// Comma-separated label names in code order.
    #[arg(long, default_value = "entailment,neutral,contradiction")]
    pub labels: String,
    #[arg(long, default_value = "whitespace")]
    pub tokenizer: TokenizerKind,
    /// Stopword list replacing the built-in one (one word per line, `#` comments).
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    /// Stem dictionary for `--tokenizer prefix_stem` (one stem per line).
    #[arg(long)]
    pub stem_dict: Option<PathBuf>,
}

impl CorpusArgs {
    pub fn label_set(&self) -> Result<LabelSet> {
        Ok(LabelSet::new(self.labels.split(','))?)
    }

    pub fn tokenizer_config(&self) -> Result<TokenizerConfig> {
        let stopwords: Vec<String> = match &self.stopwords {
            Some(path) => read_word_list(path)?,
            None => DEFAULT_STOPWORDS.iter().map(|s| s.to_string()).collect(),
        };
        let mode = match (self.tokenizer, &self.stem_dict) {
            (TokenizerKind::Whitespace, _) => TokenizerMode::Whitespace,
            (TokenizerKind::PrefixStem, Some(path)) => TokenizerMode::PrefixStem {
                stems: Arc::new(read_word_list(path)?),
            },
            (TokenizerKind::PrefixStem, None) => bail!("--tokenizer prefix_stem requires --stem-dict"),
        };
        Ok(TokenizerConfig::new(mode, stopwords))
    }

    pub fn load(&self, path: &Path) -> Result<Dataset> {
        let format = self.format.unwrap_or_else(|| DataFormat::from_path(path));
        let loaded = load_dataset(path, format, &self.label_set()?)
            .with_context(|| format!("loading {}", path.display()))?;
        if loaded.skipped_unlabeled > 0 {
            eprintln!(
                "{}: skipped {} of {} rows without a gold label",
                path.display(),
                loaded.skipped_unlabeled,
                loaded.total_rows
            );
        }
        Ok(loaded.dataset)
    }
}

#[derive(Debug, Clone, Args)]
pub struct SelectionArgs {
    /// Number of top biased tokens.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Minimum record-occurrence count for a token to be eligible.
    #[arg(long, default_value_t = 1000)]
    pub min_count: u64,
    /// Maximum record-occurrence count (unbounded when omitted).
    #[arg(long)]
    pub max_count: Option<u64>,
}

impl SelectionArgs {
    pub fn bounds(&self) -> Result<CountBounds> {
        Ok(CountBounds::new(self.min_count, self.max_count)?)
    }
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub stats_out: PathBuf,
    #[arg(long)]
    pub topk_out: PathBuf,
    #[command(flatten)]
    pub selection: SelectionArgs,
    #[command(flatten)]
    pub corpus: CorpusArgs,
}

#[derive(Debug, Clone)]
pub struct AnalyzeOutcome {
    pub stats: Vec<TokenStats>,
    pub top: TopTokensFile,
    /// Token with the largest `z*` overall, ignoring count bounds.
    pub highest: Option<TokenStats>,
}

pub fn analyze(args: &AnalyzeArgs) -> Result<AnalyzeOutcome> {
    let labels = args.corpus.label_set()?;
    let config = args.corpus.tokenizer_config()?;
    let bounds = args.selection.bounds()?;
    let dataset = args.corpus.load(&args.input)?;

    let stats = compute_stats(&count_token_labels(&dataset, &config)?)?;
    let top = top_biased_tokens(&stats, args.selection.k, bounds)?;
    let top = TopTokensFile::new(&top, bounds, &labels);
    write_stats_csv(&stats, &labels, &args.stats_out)?;
    write_json(&top, &args.topk_out)?;

    let highest = top_biased_tokens(&stats, 1, CountBounds::unbounded())?.selected.pop();
    Ok(AnalyzeOutcome { stats, top, highest })
}

#[derive(Debug, Clone, Args)]
pub struct CorrectArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub report_out: PathBuf,
    /// Output format; guessed from the output extension when omitted.
    #[arg(long)]
    pub output_format: Option<DataFormat>,
    #[arg(long, default_value_t = 0.2)]
    pub step_size: f64,
    #[arg(long, default_value_t = 50)]
    pub max_iters: usize,
    /// Residual per-label deficit accepted as converged.
    #[arg(long, default_value_t = 0)]
    pub tolerance: u64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Stop once the corpus has grown by this fraction (e.g. 0.5 = +50%).
    #[arg(long)]
    pub max_growth: Option<f64>,
    /// Correct the tokens listed in a top-k JSON file instead of selecting them.
    #[arg(long)]
    pub tokens: Option<PathBuf>,
    #[command(flatten)]
    pub selection: SelectionArgs,
    #[command(flatten)]
    pub corpus: CorpusArgs,
}

impl CorrectArgs {
    pub fn params(&self) -> Result<AudacParams> {
        let params = AudacParams {
            k: self.selection.k,
            step_size: self.step_size,
            max_iters: self.max_iters,
            seed: self.seed,
            tolerance: self.tolerance,
            count_bounds: self.selection.bounds()?,
            max_growth: self.max_growth,
        };
        params.validate()?;
        Ok(params)
    }
}

/// Runs the correction and writes the corrected dataset and report. The report
/// is written whether or not the run converged.
pub fn correct(args: &CorrectArgs) -> Result<AudacReport> {
    let params = args.params()?;
    let config = args.corpus.tokenizer_config()?;
    let dataset = args.corpus.load(&args.input)?;

    let (corrected, report) = match &args.tokens {
        Some(path) => {
            let file: TopTokensFile = read_json(path).with_context(|| format!("reading {}", path.display()))?;
            run_audac_on_tokens(&dataset, &file.token_names(), &params, &config, |_| {})?
        }
        None => run_audac(&dataset, &params, &config)?,
    };

    write_json(&report, &args.report_out)?;
    let format = args.output_format.unwrap_or_else(|| DataFormat::from_path(&args.output));
    write_dataset(&corrected, &args.output, format)?;
    Ok(report)
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub test: PathBuf,
    /// Predictions as JSONL (`id`, `predicted_label`) or CSV (`.csv`).
    #[arg(long)]
    pub predictions: PathBuf,
    /// Statistics CSV written by `analyze` on the training split.
    #[arg(long)]
    pub train_stats: PathBuf,
    /// Per-token accuracy CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Tokens to score, from a top-k JSON file; otherwise selected from the
    /// training statistics.
    #[arg(long)]
    pub tokens: Option<PathBuf>,
    /// JSON with overall accuracy and the with/without-token split.
    #[arg(long)]
    pub summary_out: Option<PathBuf>,
    /// Predictions of a baseline model for a before/after comparison.
    #[arg(long)]
    pub baseline_predictions: Option<PathBuf>,
    /// Where to write the before/after comparison text (stdout when omitted).
    #[arg(long, requires = "baseline_predictions")]
    pub comparison_out: Option<PathBuf>,
    #[command(flatten)]
    pub selection: SelectionArgs,
    #[command(flatten)]
    pub corpus: CorpusArgs,
}

#[derive(Debug, Clone)]
pub struct EvaluateOutcome {
    pub summary: EvaluationSummary,
    pub rows: Vec<TokenAccuracyRow>,
    pub comparison: Option<String>,
}

pub fn evaluate(args: &EvaluateArgs) -> Result<EvaluateOutcome> {
    let labels = args.corpus.label_set()?;
    let config = args.corpus.tokenizer_config()?;
    let test = args.corpus.load(&args.test)?;
    let train_stats = read_stats_csv(&args.train_stats, &labels)
        .with_context(|| format!("reading {}", args.train_stats.display()))?;

    let tokens = match &args.tokens {
        Some(path) => read_json::<TopTokensFile>(path)?.token_names(),
        None => top_biased_tokens(&train_stats, args.selection.k, args.selection.bounds()?)?.tokens(),
    };

    let score = |path: &Path| -> Result<(EvaluationSummary, Vec<TokenAccuracyRow>)> {
        let predictions = load_predictions(path, &labels).with_context(|| format!("reading {}", path.display()))?;
        let rows = token_accuracy_table(&test, &predictions, &train_stats, &tokens, &config)?;
        let summary = evaluation_summary(&test, &predictions, &tokens, &config)?;
        Ok((summary, rows))
    };

    let (summary, rows) = score(&args.predictions)?;
    write_accuracy_csv(&rows, &args.out)?;
    if let Some(path) = &args.summary_out {
        write_json(&summary, path)?;
    }

    let comparison = match &args.baseline_predictions {
        Some(path) => {
            let (base_summary, base_rows) = score(path)?;
            let text = format_comparison(&base_summary, &summary, &base_rows, &rows);
            if let Some(out) = &args.comparison_out {
                std::fs::write(out, &text).with_context(|| format!("writing {}", out.display()))?;
            }
            Some(text)
        }
        None => None,
    };

    Ok(EvaluateOutcome { summary, rows, comparison })
}
