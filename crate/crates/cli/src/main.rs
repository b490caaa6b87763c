//! `c2poly`: runs one configured experiment and writes `<prefix>.csv` and
//! `<prefix>.json` into the output directory.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 numerical
//! failure. Errors are printed to stderr as one JSON object.

mod config;
mod run;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde_json::json;

use config::{ExperimentConfig, EXPERIMENTS};

#[derive(Debug, Parser)]
#[command(name = "c2poly", version = env!("C2POLY_VERSION"), about = "Polynomial inequality experiments on planar C2 domains")]
struct Args {
    /// Experiment configuration (JSON).
    #[arg(long, value_name = "PATH", required_unless_present = "list_experiments")]
    config: Option<PathBuf>,
    /// Overrides the seed in the configuration.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Overrides the output directory in the configuration.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads; defaults to one per core.
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// Prints the experiment kinds and exits.
    #[arg(long)]
    list_experiments: bool,
}

fn fail(code: u8, kind: &str, message: String) -> ExitCode {
    eprintln!("{}", json!({ "error": kind, "message": message }));
    ExitCode::from(code)
}

fn write_csv(path: &PathBuf, report: &run::Report) -> Result<(), String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| e.to_string())?;
    w.write_record(&report.header).map_err(|e| e.to_string())?;
    for row in &report.rows {
        w.write_record(row).map_err(|e| e.to_string())?;
    }
    w.flush().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let args = Args::parse();
    if args.list_experiments {
        for (kind, about) in EXPERIMENTS {
            println!("{kind:<16}{about}");
        }
        return ExitCode::SUCCESS;
    }
    let path = args.config.expect("clap enforces --config");
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) => return fail(2, "config", format!("{}: {e}", path.display())),
    };
    let mut cfg = match ExperimentConfig::parse(&text) {
        Ok(c) => c,
        Err(e) => return fail(2, "config", e),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = args.out {
        cfg.output.dir = out;
    }
    if let Some(n) = args.threads {
        if n == 0 {
            return fail(2, "config", "--threads must be at least 1".into());
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(1, "io", format!("thread pool: {e}"));
        }
    }

    let start = Instant::now();
    let report = match run::run(&cfg) {
        Ok(r) => r,
        Err(run::RunError(m)) => return fail(3, "numerical", m),
    };
    let wall = start.elapsed().as_secs_f64();

    if let Err(e) = fs::create_dir_all(&cfg.output.dir) {
        return fail(1, "io", format!("{}: {e}", cfg.output.dir.display()));
    }
    let prefix = cfg.prefix();
    let csv_path = cfg.output.dir.join(format!("{prefix}.csv"));
    let json_path = cfg.output.dir.join(format!("{prefix}.json"));
    if let Err(e) = write_csv(&csv_path, &report) {
        return fail(1, "io", format!("{}: {e}", csv_path.display()));
    }
    // wall time goes to stderr only, so the report files stay reproducible
    let summary = json!({
        "version": env!("C2POLY_VERSION"),
        "experiment": cfg.experiment.kind(),
        "seed": cfg.seed,
        "config": cfg,
        "csv": csv_path.file_name().map(|f| f.to_string_lossy().into_owned()),
        "summary": report.summary,
    });
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    if let Err(e) = fs::write(&json_path, text) {
        return fail(1, "io", format!("{}: {e}", json_path.display()));
    }
    eprintln!("{}", json!({ "experiment": cfg.experiment.kind(), "wall_time_s": wall, "rows": report.rows.len() }));
    ExitCode::SUCCESS
}
