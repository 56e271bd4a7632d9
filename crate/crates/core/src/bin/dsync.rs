use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use dsync::config::RunConfig;
use dsync::extract::discover;
use dsync::replay::replay_checked;
use dsync::report::{render_markdown, Report};
use dsync::sim::simulate;
use dsync::{Error, Log, Net};

#[derive(Parser)]
#[command(name = "dsync", version, about = "Discover decision synchronization patterns in event logs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate a guarded net and write its event log.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Total number of cases; 0 means unbounded and needs --horizon.
        #[arg(long)]
        max_cases: Option<usize>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Mine guard constraints from a log replayed on an (unguarded) net.
    Discover {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        log: PathBuf,
        /// JSON report path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for one CSV per pattern-transition log.
        #[arg(long)]
        dump_ptlogs: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Replay a log on a guarded net; exits 1 if any event does not fit.
    Check {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        log: PathBuf,
    },
    /// Render a discovery report as a markdown table.
    Report {
        /// JSON report written by `discover --out`.
        report: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    tau_s: Option<usize>,
    #[arg(long)]
    tau_g: Option<f64>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    min_samples_leaf: Option<usize>,
    #[arg(long)]
    min_impurity_decrease: Option<f64>,
}

fn load_config(path: Option<&Path>) -> dsync::Result<RunConfig> {
    path.map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
}

fn write(path: &Path, text: &str) -> dsync::Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn run(cli: Cli) -> dsync::Result<ExitCode> {
    match cli.cmd {
        Cmd::Simulate {
            model,
            seed,
            max_cases,
            horizon,
            out,
            config,
        } => {
            let mut cfg = load_config(config.as_deref())?.simulation;
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.max_cases = max_cases.unwrap_or(cfg.max_cases);
            cfg.horizon = horizon.or(cfg.horizon);
            cfg.validate()?;
            let net = Net::load(&model)?;
            let log = simulate(&net, &cfg)?;
            log.save(&out)?;
            eprintln!("wrote {} events of {} cases to {}", log.len(), log.traces().len(), out.display());
        }
        Cmd::Discover {
            model,
            log,
            out,
            dump_ptlogs,
            config,
            overrides,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            let o = overrides;
            cfg.extraction.tau_s = o.tau_s.unwrap_or(cfg.extraction.tau_s);
            cfg.extraction.tau_g = o.tau_g.unwrap_or(cfg.extraction.tau_g);
            cfg.tree.max_depth = o.max_depth.unwrap_or(cfg.tree.max_depth);
            cfg.tree.min_samples_leaf = o.min_samples_leaf.unwrap_or(cfg.tree.min_samples_leaf);
            cfg.tree.min_impurity_decrease = o.min_impurity_decrease.unwrap_or(cfg.tree.min_impurity_decrease);
            let net = Net::load(&model)?;
            let log = Log::load(&log)?;
            let started = Instant::now();
            let d = discover(&log, &net, &cfg.tree, &cfg.extraction)?;
            log::info!("discovery took {:.2?}", started.elapsed());
            if let Some(dir) = dump_ptlogs {
                fs::create_dir_all(&dir).map_err(|e| Error::Io {
                    path: dir.display().to_string(),
                    source: e,
                })?;
                for c in &d.candidates {
                    let name = c.candidate.key().replace(['/', '\\', ' '], "_");
                    write(&dir.join(format!("{name}.csv")), &c.ptlog.to_csv())?;
                }
            }
            let report = Report::build(&net, &log, &d, &cfg)?;
            print!("{}", report.summary());
            if let Some(path) = out {
                write(&path, &report.to_json())?;
            }
        }
        Cmd::Check { model, log } => {
            let net = Net::load(&model)?;
            let log = Log::load(&log)?;
            let r = replay_checked(&log, &net)?.report;
            println!("matched {}/{} ({:.2}%)", r.matched, r.total(), 100.0 * r.matched_fraction());
            for u in &r.unmatched {
                println!("unmatched case {} {} at {}: {}", u.case_id, u.activity, u.start, u.reason);
            }
            if !r.unmatched.is_empty() {
                return Ok(ExitCode::from(1));
            }
        }
        Cmd::Report { report, out } => {
            let text = fs::read_to_string(&report).map_err(|e| Error::Io {
                path: report.display().to_string(),
                source: e,
            })?;
            let json: serde_json::Value = serde_json::from_str(&text)?;
            let md = render_markdown(&json);
            match out {
                Some(path) => write(&path, &md)?,
                None => print!("{md}"),
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 3 } else { 2 })
        }
    }
}
