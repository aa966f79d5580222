use std::process::ExitCode;

use clap::Parser;

use artifact_audit_cli::{analyze, correct, evaluate, Cli, Command};

/// Exit status of `correct` when the run stopped before every deficit closed.
const EXIT_NOT_CONVERGED: u8 = 2;

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Analyze(args) => {
            let outcome = analyze(&args)?;
            println!(
                "{} tokens; {} selected for top-{}{}",
                outcome.stats.len(),
                outcome.top.tokens.len(),
                outcome.top.k,
                if outcome.top.short { " (fewer eligible than requested)" } else { "" }
            );
            if let Some(top) = outcome.highest {
                let labels = args.corpus.label_set()?;
                println!(
                    "highest z*: {} z*={:.2} p*={:.3} label={} n={}",
                    top.token,
                    top.z_star,
                    top.p_star,
                    labels.name(top.majority_label),
                    top.n
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Correct(args) => {
            let report = correct(&args)?;
            println!(
                "corrected tokens: {}\nrows: {} -> {} (+{:.2}%) after {} iteration(s)",
                report.tokens.join(", "),
                report.initial_size,
                report.final_size,
                report.growth_fraction * 100.0,
                report.iterations_run
            );
            if !report.unsatisfiable_tokens.is_empty() {
                eprintln!(
                    "warning: no source records for some labels of: {}",
                    report.unsatisfiable_tokens.iter().cloned().collect::<Vec<_>>().join(", ")
                );
            }
            if report.converged {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!(
                    "warning: did not converge{}",
                    if report.growth_capped { " (growth limit reached)" } else { "" }
                );
                Ok(ExitCode::from(EXIT_NOT_CONVERGED))
            }
        }
        Command::Evaluate(args) => {
            let outcome = evaluate(&args)?;
            let pct = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{:.3}%", v * 100.0));
            println!(
                "overall accuracy: {} on {} records",
                pct(outcome.summary.overall.accuracy),
                outcome.summary.overall.n
            );
            println!(
                "with scored tokens: {} ({} records); without: {} ({} records)",
                pct(outcome.summary.with_tokens.accuracy),
                outcome.summary.with_tokens.n,
                pct(outcome.summary.without_tokens.accuracy),
                outcome.summary.without_tokens.n
            );
            if let (Some(text), None) = (&outcome.comparison, &args.comparison_out) {
                print!("\n{text}");
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
