use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use page_core::game::{fse_diagnostic, FseConfig};
use page_core::orchestrator::{replicate_seeds, run_replicated_with, Algorithm, ExperimentConfig, FlGame, Simulation};
use page_core::report::{config_hash, write_rounds_csv, write_trajectory_csv, SummaryDoc};
use page_core::Error;

use crate::manifest::{unix_now, version_string, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "page", version, about = "Simulate game-theoretic federated learning and its baselines")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an experiment and write per-round CSVs, a summary and a manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Master seed; run k uses seed + k.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_parser = ["page", "fedavg", "fedprox"])]
        algo: Option<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        runs: Option<usize>,
        /// Also save a checkpoint directory per run.
        #[arg(long)]
        checkpoint: bool,
    },
    /// Tabulate final accuracies and convergence rounds of several summaries.
    Compare {
        #[arg(required = true, num_args = 2..)]
        summaries: Vec<PathBuf>,
        /// Write the table as CSV here as well.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Probe a checkpoint with unilateral deviations.
    FseCheck {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 20)]
        probes: usize,
        #[arg(long, default_value_t = 5)]
        horizon: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Report path; defaults to fse_report.json inside the checkpoint.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(io) => CliError::Io(io.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            config,
            seed,
            algo,
            out,
            runs,
            checkpoint,
        } => cmd_run(&config, seed, algo.as_deref(), runs, &out, checkpoint),
        Command::Compare { summaries, out } => cmd_compare(&summaries, out.as_deref()),
        Command::FseCheck {
            checkpoint,
            probes,
            horizon,
            seed,
            out,
        } => cmd_fse_check(&checkpoint, probes, horizon, seed, out.as_deref()),
    }
}

/// Read and validate a config; any failure here is a usage error.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    Ok(ExperimentConfig::from_json(&text)?)
}

fn write_file(path: &Path, write: impl FnOnce(&mut BufWriter<File>) -> Result<(), Error>) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    write(&mut w)?;
    w.flush().map_err(io_err(path))
}

fn cmd_run(
    config: &Path,
    seed: Option<u64>,
    algo: Option<&str>,
    runs: Option<usize>,
    out: &Path,
    checkpoint: bool,
) -> Result<(), CliError> {
    let started_at = unix_now();
    let mut cfg = load_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(a) = algo {
        cfg.algorithm = a.parse::<Algorithm>()?;
    }
    if let Some(r) = runs {
        cfg.runs = r;
    }
    cfg.validate()?;
    fs::create_dir_all(out).map_err(io_err(out))?;

    let mut outputs = Vec::new();
    let (outcomes, summary) = run_replicated_with(&cfg, |sim: &Simulation| {
        if checkpoint {
            let dir = out.join(format!("checkpoint_seed{}", sim.seed()));
            sim.save_checkpoint(&dir)?;
        }
        Ok(())
    })?;
    if checkpoint {
        outputs.extend(replicate_seeds(&cfg).iter().map(|s| format!("checkpoint_seed{s}")));
    }
    for o in &outcomes {
        let name = format!("rounds_seed{}.csv", o.seed);
        write_file(&out.join(&name), |w| write_rounds_csv(w, &o.history))?;
        outputs.push(name);
        if cfg.algorithm == Algorithm::Page {
            let name = format!("trajectory_seed{}.csv", o.seed);
            write_file(&out.join(&name), |w| write_trajectory_csv(w, &o.history))?;
            outputs.push(name);
        }
    }
    let doc = SummaryDoc::new(&cfg, summary);
    let summary_path = out.join("summary.json");
    fs::write(&summary_path, doc.to_json()).map_err(io_err(&summary_path))?;
    outputs.push("summary.json".into());
    outputs.push("manifest.json".into());

    let manifest = RunManifest {
        version: version_string(),
        config_hash: config_hash(&cfg),
        seeds: doc.summary.seeds.clone(),
        config: cfg,
        outputs,
        started_at,
        finished_at: unix_now(),
    };
    let manifest_path = out.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&manifest_path, text).map_err(io_err(&manifest_path))?;

    println!(
        "{} x{}: global acc {:.4} (var {:.2e}), local acc {:.4} (var {:.2e}), convergence round {:.1}",
        doc.algorithm().name(),
        doc.summary.runs.len(),
        doc.summary.global_acc.mean,
        doc.summary.global_acc.variance,
        doc.summary.local_acc.mean,
        doc.summary.local_acc.variance,
        doc.summary.convergence_round.mean,
    );
    println!("wrote {}", out.display());
    Ok(())
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CompareRow {
    pub source: String,
    pub algorithm: String,
    pub global_acc: f64,
    pub global_acc_var: f64,
    pub local_acc: f64,
    pub local_acc_var: f64,
    pub convergence_round: f64,
    pub delta_global_acc: f64,
    pub delta_local_acc: f64,
    pub global_improvement_pct: Option<f64>,
    pub local_improvement_pct: Option<f64>,
}

fn improvement(page: f64, best: Option<f64>) -> Option<f64> {
    best.filter(|b| *b != 0.0).map(|b| (page - b) / b * 100.0)
}

/// Rows of the comparison table. Deltas are relative to the first summary;
/// improvements compare PAGE rows to the best non-PAGE row.
pub fn compare_rows(docs: &[(String, SummaryDoc)]) -> Vec<CompareRow> {
    let best = |f: fn(&SummaryDoc) -> f64| {
        docs.iter()
            .filter(|(_, d)| d.algorithm() != Algorithm::Page)
            .map(|(_, d)| f(d))
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
    };
    let best_global = best(|d| d.summary.global_acc.mean);
    let best_local = best(|d| d.summary.local_acc.mean);
    let reference = &docs[0].1.summary;
    docs.iter()
        .map(|(source, d)| {
            let s = &d.summary;
            let is_page = d.algorithm() == Algorithm::Page;
            CompareRow {
                source: source.clone(),
                algorithm: d.algorithm().name().into(),
                global_acc: s.global_acc.mean,
                global_acc_var: s.global_acc.variance,
                local_acc: s.local_acc.mean,
                local_acc_var: s.local_acc.variance,
                convergence_round: s.convergence_round.mean,
                delta_global_acc: s.global_acc.mean - reference.global_acc.mean,
                delta_local_acc: s.local_acc.mean - reference.local_acc.mean,
                global_improvement_pct: if is_page { improvement(s.global_acc.mean, best_global) } else { None },
                local_improvement_pct: if is_page { improvement(s.local_acc.mean, best_local) } else { None },
            }
        })
        .collect()
}

fn cmd_compare(paths: &[PathBuf], out: Option<&Path>) -> Result<(), CliError> {
    if paths.len() < 2 {
        return Err(CliError::Usage("compare needs at least two summaries".into()));
    }
    let mut docs = Vec::with_capacity(paths.len());
    for p in paths {
        let text = fs::read_to_string(p).map_err(io_err(p))?;
        let doc = SummaryDoc::from_json(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
        docs.push((p.display().to_string(), doc));
    }
    let rows = compare_rows(&docs);
    let fmt_opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:+.2}%"));
    println!(
        "{:<10} {:>10} {:>10} {:>10} {:>10} {:>10}  source",
        "algorithm", "global", "local", "round", "d_global", "d_local"
    );
    for r in &rows {
        println!(
            "{:<10} {:>10.4} {:>10.4} {:>10.1} {:>10} {:>10}  {}",
            r.algorithm,
            r.global_acc,
            r.local_acc,
            r.convergence_round,
            fmt_opt(r.global_improvement_pct),
            fmt_opt(r.local_improvement_pct),
            r.source
        );
    }
    if let Some(path) = out {
        let mut text = String::from(
            "source,algorithm,global_acc,global_acc_var,local_acc,local_acc_var,convergence_round,\
             delta_global_acc,delta_local_acc,global_improvement_pct,local_improvement_pct\n",
        );
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        for r in &rows {
            text += &format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                r.source.replace(',', "_"),
                r.algorithm,
                r.global_acc,
                r.global_acc_var,
                r.local_acc,
                r.local_acc_var,
                r.convergence_round,
                r.delta_global_acc,
                r.delta_local_acc,
                opt(r.global_improvement_pct),
                opt(r.local_improvement_pct)
            );
        }
        fs::write(path, text).map_err(io_err(path))?;
    }
    Ok(())
}

fn cmd_fse_check(dir: &Path, probes: usize, horizon: usize, seed: u64, out: Option<&Path>) -> Result<(), CliError> {
    if !dir.is_dir() {
        return Err(CliError::Usage(format!("no checkpoint at {}", dir.display())));
    }
    let sim = Simulation::load_checkpoint(dir).map_err(|e| match e {
        Error::Io(io) => CliError::Usage(format!("{}: incomplete checkpoint: {io}", dir.display())),
        other => other.into(),
    })?;
    let game = FlGame::new(sim)?;
    let cfg = FseConfig {
        probes,
        horizon,
        seed,
        ..FseConfig::default()
    };
    let report = fse_diagnostic(&game, &cfg)?;
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    println!("{text}");
    let path = out.map_or_else(|| dir.join("fse_report.json"), Path::to_path_buf);
    fs::write(&path, text).map_err(io_err(&path))
}
