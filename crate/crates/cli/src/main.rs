use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use trustcons::bounds::{bound_rows, BOUND_CSV_HEADER};
use trustcons::config::{self, RunConfig};
use trustcons::harness::{self, Manifest, MonteCarloResult, SweepSpec};
use trustcons::{engine, Error, PerronData};

#[derive(Parser)]
#[command(name = "trustcons", version, about = "Trust-weighted resilient consensus: simulation and bounds")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML). Without one, the evaluation network is used.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = "TRUSTCONS_OUT_DIR")]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    trials: Option<u64>,
    #[arg(long, global = true)]
    t0: Option<u64>,
    #[arg(long, global = true)]
    delta: Option<f64>,
    /// Worker threads for trial parallelism.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trial and write its trace.
    Simulate {
        #[arg(long, default_value_t = 0)]
        trial: u64,
    },
    /// Monte Carlo over the `[sweep]` grid of the scenario file.
    Sweep,
    /// Evaluate the analytic bounds over a grid of t / T0 values.
    Bounds {
        /// Grid as `start:stop:step` (inclusive) or a comma list.
        #[arg(long, default_value = "0:500:1")]
        grid: String,
    },
    /// Print the Perron vector, rho_2 and the nominal consensus value.
    Spectral,
    /// The full evaluation grid under both attacks.
    PaperRepro,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}

fn load(c: &Common) -> Result<RunConfig, Error> {
    let mut table = match &c.config {
        // an unreadable scenario file is a config problem, not an output failure
        Some(path) => config::read_table(path).map_err(|e| match e {
            Error::Io { path, source } => Error::Config { key: "--config".into(), reason: format!("{}: {source}", path.display()) },
            other => other,
        })?,
        None => Default::default(),
    };
    if let Some(seed) = c.seed {
        config::set_int(&mut table, "seed", seed)?;
    }
    if let Some(trials) = c.trials {
        config::set_int(&mut table, "trials", trials)?;
    }
    if let Some(t0) = c.t0 {
        config::set_int(&mut table, "t0", t0)?;
    }
    if let Some(delta) = c.delta {
        config::set_float(&mut table, "delta", delta);
    }
    let mut rc = RunConfig::from_table(table)?;
    rc.scenario.jobs = c.jobs;
    Ok(rc)
}

fn out_dir(c: &Common, rc: &RunConfig) -> PathBuf {
    c.out.clone().or_else(|| rc.out_dir.clone()).unwrap_or_else(|| PathBuf::from("out"))
}

fn run(cli: &Cli) -> Result<(), Error> {
    let c = &cli.common;
    let rc = load(c)?;
    match &cli.command {
        Command::Simulate { trial } => simulate(c, &rc, *trial),
        Command::Sweep => {
            let spec = rc.sweep.clone().unwrap_or_else(SweepSpec::paper);
            run_sweep(c, &rc, &spec, "sweep")
        }
        Command::Bounds { grid } => bounds(c, &rc, grid),
        Command::Spectral => spectral(c, &rc),
        Command::PaperRepro => run_sweep(c, &rc, &SweepSpec::paper(), "paper-repro"),
    }
}

fn write_manifest(dir: &Path, command: &str, rc: &RunConfig, outputs: &[&str]) -> Result<(), Error> {
    let m = Manifest::new(command, rc.scenario.config.seed, &rc.effective_text(), outputs.iter().map(|s| s.to_string()).collect());
    harness::write_json(&dir.join("manifest.json"), &m)
}

fn simulate(c: &Common, rc: &RunConfig, trial: u64) -> Result<(), Error> {
    let mut config = rc.scenario.config.clone();
    config.trial = trial;
    let trace = engine::run(&config)?;
    let dir = out_dir(c, rc);
    let summary = harness::trace_summary(&trace);
    let trace_file = match c.format {
        Format::Csv => {
            harness::write_file(&dir.join("trace.csv"), &harness::trace_csv(&trace))?;
            "trace.csv"
        }
        Format::Json => {
            harness::write_json(&dir.join("trace.json"), &trace)?;
            "trace.json"
        }
    };
    harness::write_json(&dir.join("trace_summary.json"), &summary)?;
    write_manifest(&dir, "simulate", rc, &[trace_file, "trace_summary.json"])?;
    println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
    Ok(())
}

fn run_sweep(c: &Common, rc: &RunConfig, spec: &SweepSpec, command: &str) -> Result<(), Error> {
    let dir = out_dir(c, rc);
    let cells = spec.scenarios(&rc.scenario, rc.horizon)?;
    let mut results: Vec<MonteCarloResult> = Vec::with_capacity(cells.len());
    for (k, cell) in cells.iter().enumerate() {
        let cfg = &cell.config;
        log::info!(
            "cell {}/{}: {} |M|={} ell={} T0={}",
            k + 1,
            cells.len(),
            cfg.attack.name(),
            cfg.topology.n_malicious(),
            cfg.trust.width(),
            cfg.t0
        );
        results.push(harness::run_monte_carlo(cell)?);
    }
    let file = match c.format {
        Format::Csv => {
            harness::write_file(&dir.join("summary.csv"), &harness::summary_csv(&results))?;
            "summary.csv"
        }
        Format::Json => {
            harness::write_json(&dir.join("summary.json"), &results)?;
            "summary.json"
        }
    };
    write_manifest(&dir, command, rc, &[file])?;
    for r in &results {
        println!(
            "{:<14} |M|={:<3} ell={:<4} T0={:<4} terminal mean dev {:.3e}  violations {:.3}",
            r.attack,
            r.n_malicious,
            r.ell,
            r.t0,
            r.terminal_mean_deviation(),
            r.violation_fraction
        );
    }
    Ok(())
}

fn parse_grid(grid: &str) -> Result<Vec<usize>, Error> {
    let bad = || Error::Config { key: "--grid".into(), reason: format!("cannot parse {grid:?}") };
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    let parts: Vec<&str> = grid.split(':').collect();
    match parts[..] {
        [a, b, s] => {
            let (a, b, s) = (num(a)?, num(b)?, num(s)?);
            if s == 0 || a > b {
                return Err(bad());
            }
            Ok((a..=b).step_by(s).collect())
        }
        [_] => grid.split(',').map(num).collect(),
        _ => Err(bad()),
    }
}

fn bounds(c: &Common, rc: &RunConfig, grid: &str) -> Result<(), Error> {
    let grid = parse_grid(grid)?;
    let s = &rc.scenario;
    let params = s.bound_params()?;
    let perron = PerronData::compute(&s.config.topology, s.config.kappa)?;
    let rows = bound_rows(&params, perron.rho2, &grid)?;
    let text = match c.format {
        Format::Csv => {
            let mut out = String::from(BOUND_CSV_HEADER);
            out.push('\n');
            for r in &rows {
                out.push_str(&r.csv_line());
                out.push('\n');
            }
            out
        }
        Format::Json => serde_json::to_string_pretty(&rows).expect("rows serialize") + "\n",
    };
    if let Some(dir) = &c.out {
        let name = if c.format == Format::Csv { "bounds.csv" } else { "bounds.json" };
        harness::write_file(&dir.join(name), &text)?;
        write_manifest(dir, "bounds", rc, &[name])?;
    }
    print!("{text}");
    Ok(())
}

fn spectral(c: &Common, rc: &RunConfig) -> Result<(), Error> {
    let cfg = &rc.scenario.config;
    let perron = PerronData::compute(&cfg.topology, cfg.kappa)?;
    let nominal = perron.nominal_value(&cfg.x_legit_init)?;
    match c.format {
        Format::Json => {
            let v = json!({ "v": perron.v, "rho2": perron.rho2, "nominal": nominal });
            println!("{}", serde_json::to_string_pretty(&v).expect("json"));
        }
        Format::Csv => {
            println!("agent,v");
            for (i, v) in perron.v.iter().enumerate() {
                println!("{i},{}", harness::fmt_f64(*v));
            }
            println!("# rho2 = {}", harness::fmt_f64(perron.rho2));
            println!("# nominal = {}", harness::fmt_f64(nominal));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0:10:5").unwrap(), vec![0, 5, 10]);
        assert_eq!(parse_grid("3, 7").unwrap(), vec![3, 7]);
        assert!(parse_grid("1:2").is_err());
        assert!(parse_grid("5:1:1").is_err());
        assert!(parse_grid("0:4:0").is_err());
    }
}
