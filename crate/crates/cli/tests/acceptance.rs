//! Acceptance suite: one PASS/FAIL/SKIP line per criterion, non-zero exit on
//! any failure.
//!
//! The SNLI checks need the released training split on disk. Point
//! `ARTIFACT_AUDIT_SNLI_DIR` at the directory holding `snli_1.0_train.jsonl`
//! (or `.txt`); set `ARTIFACT_AUDIT_STEM_DICT` to also rank under the
//! prefix-stem tokenizer.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::{bail, ensure, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use artifact_audit::audac::label_deficits;
use artifact_audit::synth::{planted_corpus, random_corpus, vocab_word};
use artifact_audit::tokenizer::read_word_list;
use artifact_audit::{
    compute_stats, count_token_labels, load_dataset, run_audac, run_audac_observed, token_accuracy_table,
    top_biased_tokens, write_dataset, AudacParams, CountBounds, DataFormat, Dataset, Label, LabelSet, PredictionSet,
    Record, TokenStats, TokenizerConfig, TokenizerMode,
};

type Criterion = (&'static str, fn() -> Result<Verdict>);

enum Verdict {
    Pass(String),
    Skip(String),
}

/// Per-label counts of `token` by scanning space-separated words of every record.
/// Only valid for fixtures whose words are already normalized.
fn naive_counts(records: &[Record], token: &str, num_labels: usize) -> Vec<u64> {
    let mut counts = vec![0u64; num_labels];
    for r in records {
        if r.premise.split(' ').chain(r.hypothesis.split(' ')).any(|w| w == token) {
            counts[r.label.code()] += 1;
        }
    }
    counts
}

fn counting_oracle() -> Result<Verdict> {
    let start = Instant::now();
    let ds = random_corpus(1000, 200, &LabelSet::snli(), 2024);
    let counts = count_token_labels(&ds, &TokenizerConfig::default())?;
    let mut oracle = BTreeMap::new();
    for w in 0..200 {
        let word = vocab_word(w);
        let c = naive_counts(&ds.records, &word, 3);
        if c.iter().any(|&x| x > 0) {
            oracle.insert(word, c);
        }
    }
    ensure!(counts.num_tokens() == oracle.len(), "{} tokens counted, oracle has {}", counts.num_tokens(), oracle.len());
    for (token, expected) in &oracle {
        ensure!(counts.get(token) == Some(expected.as_slice()), "token {token}: {:?} vs {expected:?}", counts.get(token));
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(Verdict::Pass(format!("{} tokens match exactly in {elapsed:.2?}", oracle.len())))
}

fn statistic_correctness() -> Result<Verdict> {
    let s = TokenStats::from_counts("t", &[80, 10, 10]);
    ensure!((s.z_star - 9.8995).abs() <= 1e-4, "z* = {}", s.z_star);
    ensure!(s.p_star == 0.8, "p* = {}", s.p_star);
    let flat = TokenStats::from_counts("t", &[10, 10, 10]);
    ensure!(flat.z_star.abs() < 1e-12, "uniform z* = {}", flat.z_star);

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0f64;
    for _ in 0..100 {
        let mut counts: Vec<u64> = (0..3).map(|_| rng.gen_range(0..500)).collect();
        counts[rng.gen_range(0..3)] += 1;
        let doubled: Vec<u64> = counts.iter().map(|c| 2 * c).collect();
        let a = TokenStats::from_counts("t", &counts);
        let b = TokenStats::from_counts("t", &doubled);
        let err = (b.z_star - a.z_star * 2f64.sqrt()).abs();
        ensure!(err <= 1e-9, "{counts:?}: |{} - sqrt2*{}| = {err:e}", b.z_star, a.z_star);
        worst = worst.max(err);
    }
    Ok(Verdict::Pass(format!("z*(80,10,10)={:.6}, p*=0.8, max scaling error {worst:.1e}", s.z_star)))
}

fn convergence_certificate() -> Result<Verdict> {
    let start = Instant::now();
    let ds = planted_corpus("xenon", &[900, 50, 50], 2000, 200, &LabelSet::snli(), 31);
    let before = naive_counts(&ds.records, "xenon", 3);
    let predicted: u64 = label_deficits(&before).iter().sum();
    ensure!(predicted == 1700, "oracle deficit {predicted}");

    let params = AudacParams {
        k: 1,
        step_size: 0.2,
        tolerance: 0,
        count_bounds: CountBounds::unbounded(),
        ..AudacParams::default()
    };
    let (out, report) = run_audac(&ds, &params, &TokenizerConfig::default())?;
    ensure!(report.tokens == ["xenon"], "selected {:?}", report.tokens);
    ensure!(report.converged, "not converged after {} passes", report.iterations_run);
    let after = naive_counts(&out.records, "xenon", 3);
    ensure!(after.iter().all(|&c| c == after[0]), "recounted {after:?}");
    ensure!(report.records_added() as u64 == predicted, "added {} records", report.records_added());
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(Verdict::Pass(format!(
        "{before:?} -> {after:?}, +{} records in {} passes, {elapsed:.2?}",
        report.records_added(),
        report.iterations_run
    )))
}

fn cross_token_adaptivity() -> Result<Verdict> {
    // alpha: E12 N3 C2, beta: E3 N12 C6. Both C counts include the two shared
    // records, which are also alpha's only contradiction source.
    let mut records = Vec::new();
    let mut push = |text: &str, label: u16, times: usize| {
        for _ in 0..times {
            records.push(Record::new(format!("r{}", records.len()), text, "", Label(label)));
        }
    };
    push("alpha", 0, 12);
    push("alpha", 1, 3);
    push("beta", 0, 3);
    push("beta", 1, 12);
    push("beta", 2, 4);
    push("alpha beta", 2, 2);
    let ds = Dataset::new(records, "train", LabelSet::snli());

    let params = AudacParams { k: 2, count_bounds: CountBounds::unbounded(), ..AudacParams::default() };
    let mut passes = 0;
    let mut mismatch = None;
    let (out, report) = run_audac_observed(&ds, &params, &TokenizerConfig::default(), |view| {
        passes += 1;
        for (token, live) in view.tokens.iter().zip(view.live_counts) {
            let recount = naive_counts(view.records, token, 3);
            if &recount != live && mismatch.is_none() {
                mismatch = Some(format!("pass {}: {token} live {live:?} recount {recount:?}", view.iteration));
            }
        }
    })?;
    if let Some(m) = mismatch {
        bail!(m);
    }
    ensure!(report.tokens == ["alpha", "beta"], "selected {:?}", report.tokens);
    ensure!(report.converged, "not converged after {} passes", report.iterations_run);
    ensure!(passes == report.iterations_run && passes > 1, "observer saw {passes} passes");
    let mut finals = Vec::new();
    for token in ["alpha", "beta"] {
        let c = naive_counts(&out.records, token, 3);
        ensure!(c.iter().all(|&x| x == c[0]), "{token} recounted {c:?}");
        finals.push(c);
    }
    let shared_copies = out.records.iter().filter(|r| r.is_duplicate() && r.premise == "alpha beta").count();
    ensure!(shared_copies > 0, "no shared record was duplicated");
    ensure!(finals[1][0] > 12, "beta max count did not move: {:?}", finals[1]);
    Ok(Verdict::Pass(format!(
        "alpha {:?}, beta {:?}, {shared_copies} shared copies, recount equal over {passes} passes",
        finals[0], finals[1]
    )))
}

fn run_correct(input: &Path, output: &Path, report: &Path, seed: u64) -> Result<()> {
    let status = Command::new(env!("CARGO_BIN_EXE_artifact-audit"))
        .args(["correct", "--k", "6", "--min-count", "50", "--seed", &seed.to_string()])
        .arg("--input")
        .arg(input)
        .arg("--output")
        .arg(output)
        .arg("--report-out")
        .arg(report)
        .output()
        .context("spawning artifact-audit")?;
    ensure!(
        matches!(status.status.code(), Some(0 | 2)),
        "correct failed: {}",
        String::from_utf8_lossy(&status.stderr)
    );
    Ok(())
}

fn determinism() -> Result<Verdict> {
    let dir = tempfile::tempdir()?;
    let input = dir.path().join("train.jsonl");
    let ds = planted_corpus("kiwi", &[300, 80, 40], 3000, 80, &LabelSet::snli(), 99);
    write_dataset(&ds, &input, DataFormat::Jsonl)?;

    let mut outputs = Vec::new();
    for run in 0..2 {
        let out = dir.path().join(format!("out{run}.jsonl"));
        let report = dir.path().join(format!("report{run}.json"));
        run_correct(&input, &out, &report, 1234)?;
        outputs.push((std::fs::read(&out)?, std::fs::read(&report)?));
    }
    ensure!(outputs[0].0 == outputs[1].0, "corrected datasets differ");
    ensure!(outputs[0].1 == outputs[1].1, "reports differ");
    let rows = outputs[0].0.iter().filter(|&&b| b == b'\n').count();
    ensure!(rows > ds.len(), "nothing was added ({rows} rows)");
    Ok(Verdict::Pass(format!("{rows} rows and report byte-identical across two runs")))
}

const PAPER_TOKENS: [&str; 10] =
    ["sleeping", "outdoors", "cat", "friends", "alone", "tv", "asleep", "inside", "swimming", "nobody"];

fn snli_train_file(dir: &Path) -> Option<PathBuf> {
    ["snli_1.0_train.jsonl", "snli_1.0_train.txt", "train.jsonl", "train.tsv"]
        .iter()
        .map(|name| dir.join(name))
        .find(|p| p.is_file())
}

fn snli_checks() -> Result<Verdict> {
    let Some(dir) = std::env::var_os("ARTIFACT_AUDIT_SNLI_DIR") else {
        return Ok(Verdict::Skip("ARTIFACT_AUDIT_SNLI_DIR not set".into()));
    };
    let start = Instant::now();
    let path = snli_train_file(Path::new(&dir)).with_context(|| format!("no SNLI train file in {dir:?}"))?;
    let loaded = load_dataset(&path, DataFormat::from_path(&path), &LabelSet::snli())?;
    let ds = loaded.dataset;
    ensure!(
        loaded.total_rows == 550152 || ds.len() == 550152,
        "(a) {} rows, {} usable",
        loaded.total_rows,
        ds.len()
    );

    let bounds = CountBounds::default();
    let mut configs = vec![TokenizerConfig::default()];
    if let Some(dict) = std::env::var_os("ARTIFACT_AUDIT_STEM_DICT") {
        let stems = read_word_list(Path::new(&dict))?;
        configs.push(TokenizerConfig::default().with_mode(TokenizerMode::PrefixStem { stems: Arc::new(stems) }));
    }
    let mut best_hits = 0;
    for config in &configs {
        let stats = compute_stats(&count_token_labels(&ds, config)?)?;
        let top: BTreeSet<String> = top_biased_tokens(&stats, 20, bounds)?.tokens().into_iter().collect();
        best_hits = best_hits.max(PAPER_TOKENS.iter().filter(|t| top.contains(**t)).count());
    }
    ensure!(best_hits >= 6, "(b) only {best_hits} of the 10 reference tokens in the top 20");

    let config = TokenizerConfig::default();
    let (corrected, report) = run_audac(&ds, &AudacParams::default(), &config)?;
    let growth = report.growth_fraction;
    ensure!((0.04..=0.12).contains(&growth), "(c) growth {:.2}%", growth * 100.0);

    let stats = compute_stats(&count_token_labels(&corrected, &config)?)?;
    let global_max = stats.iter().filter(|s| bounds.contains(s.n)).map(|s| s.z_star).fold(f64::MIN, f64::max);
    for token in &report.tokens {
        let z = stats.iter().find(|s| &s.token == token).map_or(0.0, |s| s.z_star);
        ensure!(z < global_max, "(d) {token} z*={z:.2} not below max {global_max:.2}");
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(600), "took {elapsed:?}");
    Ok(Verdict::Pass(format!(
        "{} rows ({} usable), {best_hits}/10 tokens in top 20, growth {:.2}%, {elapsed:.0?}",
        loaded.total_rows,
        ds.len(),
        growth * 100.0
    )))
}

fn evaluation_harness() -> Result<Verdict> {
    let tokens: Vec<String> = ["alpha", "bravo", "charlie", "delta"].map(String::from).to_vec();
    let majorities = [0u16, 1, 2, 0];
    let mut rng = ChaCha8Rng::seed_from_u64(5);

    let mut train = Vec::new();
    for (t, &major) in tokens.iter().zip(&majorities) {
        for l in 0..3u16 {
            let times = if l == major { 30 } else { 5 };
            for _ in 0..times {
                let text = format!("{t} {}", vocab_word(rng.gen_range(0..50)));
                train.push(Record::new(format!("tr{}", train.len()), text, "", Label(l)));
            }
        }
    }
    let train = Dataset::new(train, "train", LabelSet::snli());
    let config = TokenizerConfig::default();
    let train_stats = compute_stats(&count_token_labels(&train, &config)?)?;

    // Each test record carries at most one scored token; the predictor answers
    // that token's training majority label, or the gold label when none.
    let mut test = Vec::new();
    let mut predictions = Vec::new();
    for i in 0..400 {
        let label = Label(rng.gen_range(0..3));
        let which = rng.gen_range(0..5usize);
        let filler = vocab_word(rng.gen_range(0..50));
        let (premise, predicted) = match tokens.get(which) {
            Some(t) => (format!("{t} {filler}"), Label(majorities[which])),
            None => (filler, label),
        };
        let id = format!("te{i}");
        predictions.push((id.clone(), predicted));
        test.push(Record::new(id, premise, vocab_word(rng.gen_range(0..50)), label));
    }
    let test = Dataset::new(test, "test", LabelSet::snli());
    let predictions = PredictionSet::new("majority-only", predictions);

    let rows = token_accuracy_table(&test, &predictions, &train_stats, &tokens, &config)?;
    ensure!(rows.len() == tokens.len(), "{} rows", rows.len());
    for row in &rows {
        ensure!(row.n_majority > 0 && row.n_minority > 0, "{}: empty subset", row.token);
        ensure!(
            row.acc_majority == Some(1.0) && row.acc_minority == Some(0.0),
            "{}: ({:?}, {:?})",
            row.token,
            row.acc_majority,
            row.acc_minority
        );
        let (nm, nn) = (row.n_majority as f64, row.n_minority as f64);
        let combined = (nm * 1.0 + nn * 0.0) / (nm + nn);
        let overall = row.acc_overall.context("missing overall accuracy")?;
        ensure!((overall - combined).abs() <= 1e-9, "{}: overall {overall} vs {combined}", row.token);
    }
    Ok(Verdict::Pass(format!("{} rows at (1.0, 0.0), overall identity holds", rows.len())))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("counting oracle equivalence", counting_oracle),
        ("statistic correctness", statistic_correctness),
        ("convergence certificate", convergence_certificate),
        ("cross-token adaptivity", cross_token_adaptivity),
        ("determinism", determinism),
        ("SNLI data-dependent checks", snli_checks),
        ("evaluation harness", evaluation_harness),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(anyhow::anyhow!("panicked: {msg}"))
        });
        match outcome {
            Ok(Verdict::Pass(detail)) => println!("PASS {} {name}: {detail}", i + 1),
            Ok(Verdict::Skip(reason)) => println!("SKIP {} {name}: {reason}", i + 1),
            Err(err) => {
                failed += 1;
                println!("FAIL {} {name}: {err:#}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
