//! Command-line front end for running and analysing market experiments.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use oligolab_core::agent::GameMode;
use oligolab_core::equilibrium::EquilibriumResult;
use oligolab_core::market::{clearing_price, product_label, MarketModel};
use oligolab_core::runner::log::BaselineProfile;
use oligolab_core::runner::report::SeriesTest;
use oligolab_core::runner::{
    compute_baselines, export_csv, resume_experiment, run_experiment, stats_report, RunConfig, RunLog, RunOptions,
    RunOutcome,
};
use oligolab_core::stats::BootstrapConfig;
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "oligolab", version, about = "Oligopoly experiments with pricing agents")]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file.
    Run {
        config: PathBuf,
        /// Output directory (default: runs/<config name>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated seeds; each gets its own seed-<n> subdirectory.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// Stop after this many rounds; continue later with `resume`.
        #[arg(long)]
        stop_after: Option<usize>,
    },
    /// Continue an interrupted run.
    Resume {
        logdir: PathBuf,
        #[arg(long)]
        stop_after: Option<usize>,
    },
    /// Print Nash and monopoly baselines for a Cournot config.
    Baselines {
        config: PathBuf,
        /// Emit JSON instead of tables.
        #[arg(long)]
        json: bool,
    },
    /// CV series and block-bootstrap tests against the Nash CV; writes stats.json.
    Stats {
        logdir: PathBuf,
        #[command(flatten)]
        bootstrap: BootstrapArgs,
    },
    /// Write CSV tables for a run.
    Export {
        logdir: PathBuf,
        /// Destination directory (default: the log directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config file without running it.
    Validate { config: PathBuf },
}

#[derive(Args)]
struct BootstrapArgs {
    #[arg(long)]
    block_size: Option<usize>,
    #[arg(long)]
    resamples: Option<usize>,
    #[arg(long)]
    significance: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

impl BootstrapArgs {
    fn apply(&self, base: BootstrapConfig) -> BootstrapConfig {
        BootstrapConfig {
            block_size: self.block_size.unwrap_or(base.block_size),
            resamples: self.resamples.unwrap_or(base.resamples),
            significance: self.significance.unwrap_or(base.significance),
            seed: self.seed.unwrap_or(base.seed),
        }
    }
}

/// A path that must exist; missing paths are usage errors.
fn require(path: &Path) -> std::result::Result<(), String> {
    if path.exists() {
        Ok(())
    } else {
        Err(format!("{} does not exist", path.display()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(level)))
        .with_writer(std::io::stderr)
        .init();

    let path = match &cli.command {
        Command::Run { config, .. } | Command::Baselines { config, .. } | Command::Validate { config } => config,
        Command::Resume { logdir, .. } | Command::Stats { logdir, .. } | Command::Export { logdir, .. } => logdir,
    };
    if let Err(msg) = require(path) {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }

    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run {
            config,
            out,
            seeds,
            stop_after,
        } => cmd_run(&config, out, &seeds, stop_after),
        Command::Resume { logdir, stop_after } => {
            let outcome = resume_experiment(&logdir, &RunOptions { stop_after })?;
            report_outcome(&logdir, &outcome);
            Ok(())
        }
        Command::Baselines { config, json } => cmd_baselines(&config, json),
        Command::Stats { logdir, bootstrap } => cmd_stats(&logdir, &bootstrap),
        Command::Export { logdir, out } => {
            let log = RunLog::read_dir(&logdir)?;
            for path in export_csv(&log, out.as_deref().unwrap_or(&logdir))? {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = RunConfig::load(&config)?;
            println!(
                "{}: valid {:?} config, {} firms, {} rounds",
                config.display(),
                cfg.mode,
                cfg.n_firms(),
                cfg.rounds
            );
            Ok(())
        }
    }
}

fn report_outcome(dir: &Path, outcome: &RunOutcome) {
    let done = outcome.log.rounds.len();
    if outcome.completed {
        let profits = outcome
            .log
            .summary
            .as_ref()
            .map(|s| {
                s.cumulative_profits
                    .iter()
                    .map(|p| format!("{p:.2}"))
                    .collect::<Vec<_>>()
                    .join(", ")
            })
            .unwrap_or_default();
        println!(
            "{}: {done} rounds complete; cumulative profits [{profits}]",
            dir.display()
        );
    } else {
        println!(
            "{}: stopped after {done} rounds; continue with `oligolab resume {}`",
            dir.display(),
            dir.display()
        );
    }
}

fn cmd_run(config_path: &Path, out: Option<PathBuf>, seeds: &[u64], stop_after: Option<usize>) -> Result<()> {
    let config = RunConfig::load(config_path)?;
    let out = out.unwrap_or_else(|| {
        let stem = config_path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
        PathBuf::from("runs").join(stem)
    });
    let opts = RunOptions { stop_after };
    if seeds.is_empty() {
        let outcome = run_experiment(&config, &out, &opts)?;
        report_outcome(&out, &outcome);
        return Ok(());
    }
    for &seed in seeds {
        let mut cfg = config.clone();
        cfg.seed = seed;
        let dir = out.join(format!("seed-{seed}"));
        let outcome = run_experiment(&cfg, &dir, &opts).with_context(|| format!("seed {seed}"))?;
        report_outcome(&dir, &outcome);
    }
    Ok(())
}

fn profile_table(title: &str, model: &MarketModel, b: &BaselineProfile) -> String {
    let r: &EquilibriumResult = &b.result;
    let m = model.n_commodities();
    let mut s = format!("{title}\n");
    let labels: Vec<String> = (0..m).map(product_label).collect();
    s.push_str(&format!("{:<6}", "firm"));
    for l in &labels {
        s.push_str(&format!("{l:>12}"));
    }
    s.push_str(&format!("{:>12}{:>10}\n", "profit", "cv"));
    for (i, a) in r.profile.firms().iter().enumerate() {
        s.push_str(&format!("{:<6}", i + 1));
        for q in a.quantities() {
            s.push_str(&format!("{q:>12.4}"));
        }
        let cv = b.cv.get(i).map_or("-".to_string(), |c| format!("{c:.4}"));
        s.push_str(&format!("{:>12.4}{cv:>10}\n", r.firm_profits[i]));
    }
    let totals = r.profile.totals(m, None);
    s.push_str(&format!("{:<6}", "price"));
    for (j, q) in totals.iter().enumerate() {
        let p = clearing_price(&model.demand()[j], *q).unwrap_or(f64::NAN);
        s.push_str(&format!("{p:>12.4}"));
    }
    s.push('\n');
    s
}

fn cmd_baselines(config_path: &Path, json: bool) -> Result<()> {
    let config = RunConfig::load(config_path)?;
    if config.mode != GameMode::Cournot {
        bail!("baselines are defined for Cournot configs only");
    }
    let model = config.cournot_model()?;
    let b = compute_baselines(&config)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&b)?);
        return Ok(());
    }
    match (&b.nash, &b.nash_error) {
        (Some(n), _) => {
            let title = format!(
                "Nash equilibrium ({} iterations, residual {:.1e})",
                n.result.iterations, n.result.residual
            );
            print!("{}", profile_table(&title, &model, n));
        }
        (None, err) => println!(
            "Nash equilibrium: unavailable ({})",
            err.as_deref().unwrap_or("unknown")
        ),
    }
    println!();
    match (&b.monopoly, &b.monopoly_error) {
        (Some(m), _) => print!("{}", profile_table("Monopoly (joint profit)", &model, m)),
        (None, err) => println!("Monopoly: unavailable ({})", err.as_deref().unwrap_or("unknown")),
    }
    Ok(())
}

fn print_test(label: &str, t: &SeriesTest) {
    println!(
        "{label:<8} rounds {:>3}  mean CV {:.4}  null {:.4}  p = {:.4}  {}",
        t.rounds,
        t.mean_cv,
        t.null_cv,
        t.test.p_value,
        if t.test.reject { "reject" } else { "fail to reject" }
    );
}

fn cmd_stats(logdir: &Path, args: &BootstrapArgs) -> Result<()> {
    let log = RunLog::read_dir(logdir)?;
    let cfg = args.apply(log.config.stats);
    let report = stats_report(&log, &cfg)?;
    for t in &report.per_firm {
        print_test(&format!("firm {}", t.firm.unwrap_or(0)), t);
    }
    print_test("pooled", &report.pooled);
    let path = logdir.join("stats.json");
    std::fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}
