use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use preictal::eval::render_general;
use preictal::experiment::{
    load_report_set, load_samples, patient_ids, prepare_archive, render_available, run_architecture_comparison,
    run_evaluate, run_general, run_personalization_all, save_report_set, synthesize_corpus, write_comparison,
    write_general, write_personalization, ExperimentConfig,
};
use preictal::eval::{write_report_files, ReportSet};
use preictal::{Error, Result};

#[derive(Parser)]
#[command(name = "preictal", version, about = "Pre-ictal window classification experiments")]
struct Cli {
    /// Experiment config file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; defaults to the config's output_dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic corpus described by data.profile into data.corpus_dir.
    Synth,
    /// Ingest, window and split the corpus into the sample archive.
    Prepare,
    /// Train the configured architecture on the pooled split and report on the test part.
    Train,
    /// Train every architecture on one split and tabulate them.
    Compare,
    /// Leave-one-patient-out personalization.
    Personalize {
        #[arg(long, required_unless_present = "all", conflicts_with = "all")]
        patient: Option<String>,
        /// Run every patient and emit the before/after summary.
        #[arg(long)]
        all: bool,
    },
    /// Score a checkpoint on the test part of the configured split.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Re-render the CSV layouts from a saved reports.toml.
    Report {
        /// Directory holding reports.toml.
        #[arg(long)]
        from: PathBuf,
    },
}

fn config(cli: &Cli, check_source: bool) -> Result<ExperimentConfig> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("--config <path> is required for this command".into()))?;
    let mut cfg = if check_source {
        ExperimentConfig::load(path)?
    } else {
        ExperimentConfig::load_unchecked(path)?
    };
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: &ExperimentConfig, sub: &str) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| cfg.output_dir()).join(sub)
}

fn print_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn show(path: &Path) {
    if let Ok(text) = std::fs::read_to_string(path) {
        print!("{text}");
    }
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth => {
            let cfg = config(cli, false)?;
            let ids = synthesize_corpus(&cfg)?;
            println!("generated {} patients into {}", ids.len(), cfg.corpus_dir().display());
        }
        Command::Prepare => {
            let cfg = config(cli, false)?;
            let m = prepare_archive(&cfg)?;
            println!(
                "archived {} train, {} validation, {} test windows into {}",
                m.train,
                m.validation,
                m.test,
                cfg.archive_dir().display()
            );
        }
        Command::Train => {
            let cfg = config(cli, true)?;
            let samples = load_samples(&cfg)?;
            let run = run_general(&cfg, &samples)?;
            let dir = out_dir(cli, &cfg, "general");
            let written = write_general(&dir, &run)?;
            print!("{}", render_general(&run.report.summary()));
            print_written(&written);
        }
        Command::Compare => {
            let cfg = config(cli, true)?;
            let samples = load_samples(&cfg)?;
            let runs = run_architecture_comparison(&cfg, &samples)?;
            let written = write_comparison(&out_dir(cli, &cfg, "compare"), &runs)?;
            written.iter().for_each(|p| show(p));
            print_written(&written);
        }
        Command::Personalize { patient, all } => {
            let cfg = config(cli, true)?;
            let samples = load_samples(&cfg)?;
            let ids = if *all {
                patient_ids(&samples)
            } else {
                vec![patient.clone().expect("clap requires --patient without --all")]
            };
            let runs = run_personalization_all(&cfg, &samples, &ids)?;
            let written = write_personalization(&out_dir(cli, &cfg, "personalize"), &runs)?;
            if let Some(summary) = written.first() {
                show(summary);
            }
            print_written(&written);
        }
        Command::Evaluate { checkpoint } => {
            let cfg = config(cli, true)?;
            let samples = load_samples(&cfg)?;
            let report = run_evaluate(&cfg, &samples, checkpoint)?;
            let set = ReportSet {
                general: Some(report.clone()),
                ..ReportSet::default()
            };
            let dir = out_dir(cli, &cfg, "evaluate");
            let files = render_available(&set)?;
            write_report_files(&dir, &files)?;
            save_report_set(&dir, &set)?;
            print!("{}", render_general(&report.summary()));
        }
        Command::Report { from } => {
            let set = load_report_set(from)?;
            let dir = cli.out.clone().unwrap_or_else(|| from.clone());
            let files = render_available(&set)?;
            write_report_files(&dir, &files)?;
            for f in &files {
                println!("wrote {}", dir.join(&f.name).display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
