use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tokenpress::dump::read_dump;
use tokenpress::eval::{aggregate_by_method, read_results, turn_counts, Cell, Report, ReportFormat, ResultsFile};
use tokenpress::oracle::{run_all, run_suite, SUITES};
use tokenpress::pipeline::{load_config, run, write_outputs};
use tokenpress::PipelineError;

const EXIT_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;

#[derive(Parser)]
#[command(name = "tokenpress", version, about = "Visual token reduction, segmentation and quantization over dumped VLM features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a pipeline config and write its reports.
    Run {
        config: PathBuf,
        /// Worker threads; overrides the config.
        #[arg(long)]
        workers: Option<usize>,
        /// Master seed; overrides the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; overrides the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the header and shape of a token dump.
    Inspect { dump: PathBuf },
    /// Check operators against brute-force references.
    Oracle {
        /// One of the suite names, or `all`.
        #[arg(default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print every failure instead of the first five.
        #[arg(long)]
        verbose: bool,
    },
    /// Summarize an upstream results CSV.
    Report {
        results: PathBuf,
        /// Write the summary here; `.json` selects JSON, anything else CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn fail(code: u8, message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(code)
}

fn run_command(config: &Path, workers: Option<usize>, seed: Option<u64>, out: Option<PathBuf>) -> ExitCode {
    let mut config = match load_config(config) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    if let Some(w) = workers {
        if w == 0 {
            return fail(EXIT_CONFIG, "--workers must be positive");
        }
        config.workers = w;
    }
    if let Some(s) = seed {
        config.seed = s;
    }
    if let Some(o) = out {
        config.output = o;
    }
    let report = match run(&config) {
        Ok(r) => r,
        Err(e) if e.is_config() => return fail(EXIT_CONFIG, e),
        Err(e) => return fail(EXIT_DATA, e),
    };
    let written = match write_outputs(&config, &report, &config.output) {
        Ok(w) => w,
        Err(e) => return fail(EXIT_DATA, e),
    };
    println!("{:<20} {:>8} {:>8} {:>8} {:>9}", "input", "budget", "tokens", "rr", "coverage");
    for job in &report.jobs {
        println!(
            "{:<20} {:>8} {:>8} {:>8.4} {:>9.4}",
            job.input,
            job.budget,
            job.rate.final_tokens,
            job.rate.retention_rate(),
            job.coverage
        );
    }
    for (method, agg) in &report.aggregates {
        println!("{method}: acc {:.1} rel {:.1}%", agg.acc_rounded(), agg.rel_rounded());
    }
    println!("wrote {} to {}", written.join(", "), config.output.display());
    ExitCode::SUCCESS
}

fn inspect_command(path: &Path) -> ExitCode {
    let (tokens, bundle) = match read_dump(path) {
        Ok(d) => d,
        Err(e) => return fail(EXIT_DATA, PipelineError::Input {
            input: path.display().to_string(),
            source: e,
        }),
    };
    println!("tokens      {}", tokens.len());
    println!("dim         {}", tokens.dim());
    println!("frames      {}", tokens.frames());
    match tokens.grid() {
        Some(g) => println!("grid        {}x{}", g.rows, g.cols),
        None => println!("grid        none"),
    }
    let bundle = bundle.unwrap_or_else(tokenpress::AttentionBundle::empty);
    println!("cls attn    {}", if bundle.cls_to_patch().is_some() { "yes" } else { "no" });
    match bundle.text_to_visual() {
        Some(t) => println!("text attn   {} queries", t.n_text),
        None => println!("text attn   no"),
    }
    ExitCode::SUCCESS
}

fn oracle_command(suite: &str, seed: u64, verbose: bool) -> ExitCode {
    let reports = if suite == "all" {
        run_all(seed)
    } else {
        match run_suite(suite, seed) {
            Some(r) => vec![r],
            None => {
                return fail(
                    EXIT_CONFIG,
                    format!("unknown suite {suite:?}; expected all or one of {}", SUITES.join(", ")),
                )
            }
        }
    };
    let mut ok = true;
    for r in &reports {
        println!("{r}");
        for note in &r.notes {
            println!("    {note}");
        }
        let shown = if verbose { r.failures.len() } else { 5 };
        for f in r.failures.iter().take(shown) {
            println!("    {f}");
        }
        if r.failures.len() > shown {
            println!("    ... {} more", r.failures.len() - shown);
        }
        ok &= r.passed();
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAILED)
    }
}

fn report_command(path: &Path, out: Option<PathBuf>) -> ExitCode {
    let results = match read_results(path) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_DATA, e),
    };
    let report = match results {
        ResultsFile::Benchmarks(rows) => {
            let aggs = match aggregate_by_method(&rows) {
                Ok(a) => a,
                Err(e) => return fail(EXIT_DATA, e),
            };
            let mut report = Report::new(["method", "benchmarks", "acc", "rel_percent"]);
            for (method, agg) in aggs {
                report.push(vec![
                    Cell::from(method),
                    Cell::from(agg.benchmarks as u64),
                    Cell::from(agg.acc),
                    Cell::from(agg.rel_percent),
                ]);
            }
            report
        }
        ResultsFile::MultiTurn(records) => {
            let (original, swapped, all) = turn_counts(&records);
            let mut report = Report::new(["order", "records", "first_correct", "both_correct", "conditional_accuracy"]);
            for (label, c) in [("original", original), ("swapped", swapped), ("all", all)] {
                report.push(vec![
                    Cell::from(label),
                    Cell::from(c.records),
                    Cell::from(c.first_correct),
                    Cell::from(c.both_correct),
                    c.accuracy().value().map_or(Cell::Missing, Cell::from),
                ]);
            }
            report
        }
    };
    let format = out.as_deref().map_or(ReportFormat::Csv, ReportFormat::from_path);
    let text = match report.render(format) {
        Ok(t) => t,
        Err(e) => return fail(EXIT_DATA, e),
    };
    match out {
        Some(p) => {
            if let Err(e) = std::fs::write(&p, &text) {
                return fail(EXIT_DATA, format!("{}: {e}", p.display()));
            }
            println!("wrote {}", p.display());
        }
        None => print!("{text}"),
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            workers,
            seed,
            out,
        } => run_command(&config, workers, seed, out),
        Command::Inspect { dump } => inspect_command(&dump),
        Command::Oracle { suite, seed, verbose } => oracle_command(&suite, seed, verbose),
        Command::Report { results, out } => report_command(&results, out),
    }
}
