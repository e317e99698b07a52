mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use jumplev::dle::{self, DleResult};
use jumplev::io::{self, Ingested};
use jumplev::pipeline::{self, PipelineConfig};
use jumplev::{mc, simkit};
use log::info;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

const THREADS_VAR: &str = "JUMPLEV_THREADS";

#[derive(Parser)]
#[command(name = "jumplev", version, about = "Price jumps, volatility jumps and discontinuous leverage from tick data")]
struct Cli {
    /// Flat TOML file; any flag given on the command line overrides it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one path of the benchmark model.
    Simulate {
        /// Write only `time,logprice`, ready for `detect`.
        #[arg(long)]
        ticks: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        run: RunConfig,
    },
    /// Validate a tick file and print a summary.
    IngestCheck {
        input: PathBuf,
        #[command(flatten)]
        run: RunConfig,
    },
    /// Detect jumps in one day of ticks.
    Detect {
        input: PathBuf,
        /// Event CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the day's DLE row here.
        #[arg(long)]
        dle_out: Option<PathBuf>,
        #[command(flatten)]
        run: RunConfig,
    },
    /// DLE per day over a set of tick files.
    Dle {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        run: RunConfig,
    },
    /// Size and power of the local jump tests.
    McTable1 {
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        run: RunConfig,
    },
    /// RMSE of the two jump-size estimators.
    McTable2 {
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        run: RunConfig,
    },
    /// Monte Carlo study of the DLE estimator and test.
    McDle {
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-replication statistics for QQ plots.
        #[arg(long)]
        runs_out: Option<PathBuf>,
        #[command(flatten)]
        run: RunConfig,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::IngestCheck { .. } => "ingest-check",
            Command::Detect { .. } => "detect",
            Command::Dle { .. } => "dle",
            Command::McTable1 { .. } => "mc-table1",
            Command::McTable2 { .. } => "mc-table2",
            Command::McDle { .. } => "mc-dle",
        }
    }

    fn flags(&self) -> &RunConfig {
        match self {
            Command::Simulate { run, .. }
            | Command::IngestCheck { run, .. }
            | Command::Detect { run, .. }
            | Command::Dle { run, .. }
            | Command::McTable1 { run, .. }
            | Command::McTable2 { run, .. }
            | Command::McDle { run, .. } => run,
        }
    }
}

struct Failure {
    code: u8,
    err: anyhow::Error,
}

type Outcome<T> = std::result::Result<T, Failure>;

trait Classify<T> {
    /// Input, output or configuration problem: exit code 2.
    fn io(self) -> Outcome<T>;
    /// The estimators could not produce a result: exit code 1.
    fn est(self) -> Outcome<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for std::result::Result<T, E> {
    fn io(self) -> Outcome<T> {
        self.map_err(|e| Failure { code: 2, err: e.into() })
    }

    fn est(self) -> Outcome<T> {
        self.map_err(|e| Failure { code: 1, err: e.into() })
    }
}

#[derive(Serialize)]
struct Sidecar<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config_hash: String,
    seed: Option<u64>,
    inputs: Vec<String>,
    config: &'a RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    time_mapping: Option<io::TimeMapping>,
    /// Simulated window length in trading days.
    #[serde(skip_serializing_if = "Option::is_none")]
    time_scale: Option<f64>,
}

struct Ctx<'a> {
    command: &'a str,
    cfg: &'a RunConfig,
    hash: String,
}

impl Ctx<'_> {
    fn sidecar(&self, seed: Option<u64>, inputs: &[PathBuf], mapping: Option<io::TimeMapping>) -> Sidecar<'_> {
        Sidecar {
            tool: "jumplev",
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            config_hash: self.hash.clone(),
            seed,
            inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
            config: self.cfg,
            time_mapping: mapping,
            time_scale: None,
        }
    }
}

fn config_hash(command: &str, cfg: &RunConfig) -> String {
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update(serde_json::to_vec(cfg).expect("config serializes"));
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Writes a CSV to `path` (stdout when `None`) and, for files, its metadata
/// sidecar next to it.
fn emit(
    path: Option<&Path>,
    meta: &Sidecar<'_>,
    write: impl FnOnce(&mut dyn Write) -> jumplev::Result<()>,
) -> Outcome<()> {
    match path {
        Some(p) => {
            let file = File::create(p).with_context(|| format!("cannot create {}", p.display())).io()?;
            let mut w = BufWriter::new(file);
            write(&mut w).with_context(|| format!("writing {}", p.display())).io()?;
            w.flush().io()?;
            let side = sidecar_path(p);
            let json = serde_json::to_string_pretty(meta).expect("sidecar serializes");
            std::fs::write(&side, json + "\n")
                .with_context(|| format!("cannot write {}", side.display()))
                .io()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            write(&mut w).io()?;
            w.flush().io()?;
        }
    }
    Ok(())
}

fn ingest(path: &Path, cfg: &RunConfig) -> Outcome<Ingested> {
    let got = io::ingest_ticks(path, &cfg.ingest())
        .with_context(|| format!("cannot read ticks from {}", path.display()))
        .io()?;
    info!("{}: {} ticks, {} collapsed", path.display(), got.series.n() + 1, got.collapsed);
    Ok(got)
}

fn day_name(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

/// DLE rows of one day: all events, and optionally only those whose
/// volatility jump survives BH.
fn dle_rows(day: &str, events: &[pipeline::JumpEvent], cfg: &RunConfig, a: f64) -> Vec<(String, String, DleResult)> {
    let mut rows = vec![(day.to_string(), "all".to_string(), dle::estimate_dle(events, a))];
    if cfg.significant_only.unwrap_or(false) {
        let kept = dle::significant_vol_jumps(events, cfg.bh_alpha.unwrap_or(0.1));
        rows.push((day.to_string(), "significant".to_string(), dle::estimate_dle(&kept, a)));
    }
    rows
}

fn run(cmd: &Command, cx: &Ctx<'_>) -> Outcome<()> {
    let cfg = cx.cfg;
    match cmd {
        Command::Simulate { ticks, out, .. } => {
            let sim = cfg.sim();
            sim.validate().io()?;
            let path = simkit::simulate_path(&sim).est()?;
            let meta = Sidecar {
                time_scale: Some(sim.time_scale),
                ..cx.sidecar(Some(sim.seed), &[], None)
            };
            if *ticks {
                let ts = path.ticks();
                emit(out.as_deref(), &meta, |w| io::write_ticks(&ts, w))
            } else {
                emit(out.as_deref(), &meta, |w| io::write_sim_path(&path, w))
            }
        }
        Command::IngestCheck { input, .. } => {
            let got = ingest(input, cfg)?;
            let times = got.series.times();
            let summary = serde_json::json!({
                "file": input.display().to_string(),
                "ticks": times.len(),
                "collapsed": got.collapsed,
                "first_time": times[0],
                "last_time": times[times.len() - 1],
                "time_mapping": got.mapping,
            });
            println!("{summary}");
            Ok(())
        }
        Command::Detect { input, out, dle_out, .. } => {
            let got = ingest(input, cfg)?;
            let pc = cfg.pipeline(PipelineConfig::default());
            let det = pipeline::detect_events(&got.series, &pc)
                .with_context(|| format!("detection failed on {}", input.display()))
                .est()?;
            info!("{} bins flagged, {} events", det.flagged.len(), det.events.len());
            let day = day_name(input);
            let meta = cx.sidecar(None, std::slice::from_ref(input), Some(got.mapping));
            emit(out.as_deref(), &meta, |w| io::write_events(&day, &det.events, w))?;
            if let Some(p) = dle_out {
                let rows = dle_rows(&day, &det.events, cfg, pc.a);
                emit(Some(p), &meta, |w| io::write_dle_rows(&rows, w))?;
            }
            Ok(())
        }
        Command::Dle { inputs, out, .. } => {
            let pc = cfg.pipeline(PipelineConfig::default());
            let mut rows = Vec::new();
            for input in inputs {
                let got = ingest(input, cfg)?;
                let det = pipeline::detect_events(&got.series, &pc)
                    .with_context(|| format!("detection failed on {}", input.display()))
                    .est()?;
                rows.extend(dle_rows(&day_name(input), &det.events, cfg, pc.a));
            }
            let meta = cx.sidecar(None, inputs, None);
            emit(out.as_deref(), &meta, |w| io::write_dle_rows(&rows, w))
        }
        Command::McTable1 { out, .. } | Command::McTable2 { out, .. } => {
            let table = cfg.table();
            let rmse = matches!(cmd, Command::McTable2 { .. });
            info!("{} replications per cell", table.reps);
            let cells = if rmse { mc::run_mc_table2(&table) } else { mc::run_mc_table1(&table) };
            eprint!("{}", io::render_cells(&cells, rmse));
            let meta = Sidecar {
                time_scale: Some(table.time_scale),
                ..cx.sidecar(Some(table.seed), &[], None)
            };
            emit(out.as_deref(), &meta, |w| io::write_cells(&cells, w))
        }
        Command::McDle { out, runs_out, .. } => {
            let study = cfg.dle_study();
            info!("{} replications, n = {}", study.reps, study.n);
            let res = mc::run_mc_dle(&study);
            if res.reps == 0 {
                return Err(Failure {
                    code: 1,
                    err: anyhow!("all {} replications failed", res.failed),
                });
            }
            let meta = Sidecar {
                time_scale: Some(study.time_scale),
                ..cx.sidecar(Some(study.seed), &[], None)
            };
            emit(out.as_deref(), &meta, |w| io::write_dle_study(&res, w))?;
            if let Some(p) = runs_out {
                emit(Some(p), &meta, |w| io::write_dle_runs(&res, w))?;
            }
            Ok(())
        }
    }
}

fn setup_threads() -> Outcome<()> {
    let Ok(v) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| anyhow!("{THREADS_VAR} must be a positive integer, got {v:?}"))
        .io()?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().io()
}

fn load_config(cli: &Cli) -> Outcome<RunConfig> {
    let file = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("cannot read config {}", p.display()))
                .io()?;
            RunConfig::from_toml(&text)
                .with_context(|| format!("invalid config {}", p.display()))
                .io()?
        }
        None => RunConfig::default(),
    };
    let cfg = cli.cmd.flags().over(&file);
    cfg.validate().io()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = setup_threads().and_then(|()| {
        let cfg = load_config(&cli)?;
        let command = cli.cmd.name();
        let cx = Ctx {
            command,
            cfg: &cfg,
            hash: config_hash(command, &cfg),
        };
        run(&cli.cmd, &cx)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}
