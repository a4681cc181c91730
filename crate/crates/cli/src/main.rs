mod args;

use std::io::Write;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::Parser;
use qreservoir::pipeline::io::{self, MbtiRow};
use qreservoir::pipeline::report::REPORT_TXT;
use qreservoir::pipeline::{
    learn_stage, mbti_scan, report_stage, run_dynamics, run_experiment_cached, run_selftest, sweep_stage,
    DynamicsInput, GroundStateCache, SweepConfig,
};

use args::{Cli, Command};

fn cache_for(cfg: &SweepConfig) -> Result<GroundStateCache> {
    Ok(match &cfg.cache_dir {
        Some(dir) => GroundStateCache::with_dir(dir)?,
        None => GroundStateCache::in_memory(),
    })
}

fn print_report(cfg: &SweepConfig) -> Result<()> {
    print!("{}", std::fs::read_to_string(cfg.output_dir.join(REPORT_TXT))?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sweep {
            common,
            model,
            reservoir,
        } => {
            let mut cfg = common.load()?;
            model.apply(&mut cfg);
            reservoir.apply(&mut cfg);
            let out = sweep_stage(&cfg, &cache_for(&cfg)?)?;
            println!(
                "{} points written to {}, {} failed",
                out.points.len(),
                cfg.output_dir.display(),
                out.failures.len()
            );
            if !out.failures.is_empty() {
                bail!("{} grid points failed; see {}", out.failures.len(), io::FAILURES_CSV);
            }
        }
        Command::Evolve {
            common,
            n_sites,
            delta,
            jp,
            reservoir,
            csv,
        } => {
            let mut cfg = common.load()?;
            if let Some(l) = n_sites {
                cfg.n_sites = l;
            }
            reservoir.apply(&mut cfg);
            let input = match (delta, jp) {
                (Some(delta), Some(jp)) => DynamicsInput::Ground { delta, jp },
                _ => DynamicsInput::Polarized,
            };
            let (record, sidecar) = run_dynamics(&cfg, input)?;
            let path = csv.unwrap_or_else(|| cfg.output_dir.join("dynamics.csv"));
            io::write_dynamics(&path, &record, &sidecar)?;
            println!("{} cycles written to {}", record.n_cycles(), path.display());
        }
        Command::Mbti { common, model } => {
            let mut cfg = common.load()?;
            model.apply(&mut cfg);
            let (points, failures) = mbti_scan(&cfg, &cache_for(&cfg)?)?;
            let rows: Vec<MbtiRow> = points.iter().map(MbtiRow::from).collect();
            let stdout = std::io::stdout();
            io::write_mbti_to(stdout.lock(), &rows)?;
            stdout.lock().flush()?;
            if !failures.is_empty() {
                bail!("{} grid points failed", failures.len());
            }
        }
        Command::Learn { common, learn, seed } => {
            let mut cfg = common.load()?;
            learn.apply(&mut cfg);
            if let Some(s) = seed {
                cfg.learner_seed = s;
            }
            for s in learn_stage(&cfg)? {
                println!(
                    "delta={} k={} transitions={:?}",
                    s.summary.delta,
                    s.summary.k,
                    s.transitions.transitions.iter().map(|t| t.at).collect::<Vec<_>>()
                );
            }
        }
        Command::Report { common } => {
            let cfg = common.load()?;
            report_stage(&cfg)?;
            print_report(&cfg)?;
        }
        Command::Experiment {
            common,
            model,
            reservoir,
            learn,
            learner_seed,
        } => {
            let mut cfg = common.load()?;
            model.apply(&mut cfg);
            reservoir.apply(&mut cfg);
            learn.apply(&mut cfg);
            if let Some(s) = learner_seed {
                cfg.learner_seed = s;
            }
            let exp = run_experiment_cached(&cfg, &cache_for(&cfg)?)?;
            print_report(&cfg)?;
            if !exp.succeeded() {
                bail!("{} grid points failed", exp.sweep.failures.len());
            }
        }
        Command::Selftest => {
            let report = run_selftest();
            for c in &report.checks {
                println!(
                    "{} {:<40} {:>8.3}s  {}",
                    if c.passed { "ok  " } else { "FAIL" },
                    c.name,
                    c.elapsed.as_secs_f64(),
                    c.detail
                );
            }
            println!("total {:.3}s", report.elapsed().as_secs_f64());
            if !report.passed() {
                bail!("selftest failed");
            }
        }
        Command::Config {
            common,
            model,
            reservoir,
            learn,
        } => {
            let mut cfg = common.load()?;
            model.apply(&mut cfg);
            reservoir.apply(&mut cfg);
            learn.apply(&mut cfg);
            cfg.validate()?;
            println!("{}", cfg.to_json()?);
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
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::debug!("{e:?}");
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
