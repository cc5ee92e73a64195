use std::path::{Path, PathBuf};
use std::process::{Child, Command, ExitCode};

use clap::{Parser, Subcommand};
use pearl::harness::{report, run_experiment, write_atomic, ExperimentConfig, Method, ReportFormat, RunRecord};

#[derive(Parser)]
#[command(name = "pearl", version, about = "Dynamic-rank adapter continual learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment and write its record as JSON.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// pearl_dynamic, static_rank:R, complete_isolation or sequential_ft
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Defaults to the config's `output`, else stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a saved record.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        /// json, csv or text_table
        #[arg(long, default_value = "text_table")]
        format: String,
    },
    /// Run every *.toml in a directory, each in its own process.
    Batch {
        #[arg(long)]
        configs: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<(), Box<dyn std::error::Error>> {
    match cmd {
        Cmd::Run { config, method, seed, out } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            if let Some(m) = method {
                cfg.method = m.parse::<Method>()?;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let record = run_experiment(&cfg)?;
            let json = record.to_json()?;
            match out.or(cfg.output) {
                Some(path) => {
                    write_atomic(&path, json.as_bytes())?;
                    eprintln!("{}: {} wrote {}", config.display(), cfg.method, path.display());
                }
                None => print!("{json}"),
            }
        }
        Cmd::Report { input, format } => {
            let format: ReportFormat = format.parse()?;
            let record = RunRecord::from_json(&std::fs::read_to_string(&input)?)?;
            print!("{}", report(&record, format)?);
        }
        Cmd::Batch { configs, jobs } => batch(&configs, jobs.max(1))?,
    }
    Ok(())
}

fn batch(dir: &Path, jobs: usize) -> Result<(), Box<dyn std::error::Error>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    files.sort();
    let exe = std::env::current_exe()?;
    let mut pending = files.into_iter();
    let mut running: Vec<(PathBuf, Child)> = Vec::new();
    let mut failed = 0usize;
    loop {
        while running.len() < jobs {
            let Some(cfg) = pending.next() else { break };
            // each config writes next to itself unless it names an output
            let out = ExperimentConfig::from_file(&cfg)
                .ok()
                .and_then(|c| c.output)
                .unwrap_or_else(|| cfg.with_extension("json"));
            let child = Command::new(&exe).arg("run").arg("--config").arg(&cfg).arg("--out").arg(out).spawn()?;
            running.push((cfg, child));
        }
        let Some((cfg, mut child)) = (!running.is_empty()).then(|| running.remove(0)) else { break };
        if !child.wait()?.success() {
            eprintln!("{} failed", cfg.display());
            failed += 1;
        }
    }
    if failed > 0 {
        return Err(format!("{failed} run(s) failed").into());
    }
    Ok(())
}
