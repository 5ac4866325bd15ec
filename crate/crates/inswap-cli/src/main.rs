//! `inswap` command-line entry point.
//!
//! Exit codes: 0 success or passing verdict, 1 error (including usage
//! errors), 2 failing verdict.

use clap::{Args, Parser, Subcommand, ValueEnum};
use inswap_cli::verify::{self, Fault, SUITES};
use inswap_cli::{analyze, emit, optimize, parse_grid, simulate, Overrides, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "inswap", version, about = "Infinite-swapping rate analysis and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// JSON run configuration
    #[arg(long)]
    config: PathBuf,
    /// Output directory (stdout when omitted, where allowed)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated temperatures, e.g. 0.4,0.3,0.22
    #[arg(long, value_parser = parse_grid)]
    eps_grid: Option<Vec<f64>>,
    /// Number of temperatures
    #[arg(long = "K")]
    k: Option<usize>,
    /// Franz potential parameter
    #[arg(long)]
    theta: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Rate bounds, h, w, B and the minimal horizon exponent
    Analyze(Common),
    /// Optimal temperature ladder for the configured target
    Optimize(Common),
    /// Run the variance-decay experiment and write its record
    Simulate(Common),
    /// Run the fast invariant suite
    Verify {
        /// Comma-separated suite names (default: all)
        #[arg(long)]
        suite: Option<String>,
        #[arg(long, hide = true, value_enum)]
        inject_fault: Option<FaultArg>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FaultArg {
    CorruptCostTable,
}

fn load(c: &Common) -> inswap::Result<RunConfig> {
    let mut cfg = RunConfig::load(&c.config)?;
    cfg.apply(&Overrides {
        seed: c.seed,
        out: c.out.clone(),
        eps_grid: c.eps_grid.clone(),
        k: c.k,
        theta: c.theta,
    });
    Ok(cfg)
}

fn run(cli: Cli) -> inswap::Result<ExitCode> {
    match cli.command {
        Command::Analyze(c) => {
            let cfg = load(&c)?;
            let a = analyze(&cfg)?;
            if let Some(p) = emit(&a, cfg.out.as_deref(), "analysis.json")? {
                println!("predicted rate {:.6}; report written to {}", a.predicted_rate, p.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Optimize(c) => {
            let cfg = load(&c)?;
            let l = optimize(&cfg)?;
            if let Some(p) = emit(&l, cfg.out.as_deref(), "ladder.json")? {
                println!("ladder {:?}; written to {}", l.alphas, p.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate(c) => {
            if c.seed.is_none() {
                return Err(inswap::Error::config("seed", "--seed is required for simulate"));
            }
            let cfg = load(&c)?;
            let (rec, out) = simulate(&cfg)?;
            for a in &rec.arms {
                match &a.fit {
                    Some(f) => println!(
                        "{}: fitted rate {:.4} [{:.4}, {:.4}], predicted {:?}",
                        a.label, f.rate, f.ci_low, f.ci_high, a.predicted
                    ),
                    None => println!("{}: no slope fit", a.label),
                }
            }
            println!("verdict {}; record in {}", if rec.verdict { "pass" } else { "fail" }, out.display());
            Ok(if rec.verdict { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Verify { suite, inject_fault } => {
            let names: Vec<String> = match suite {
                None => SUITES.iter().map(|s| s.to_string()).collect(),
                Some(s) => s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(String::from).collect(),
            };
            if names.is_empty() {
                return Err(inswap::Error::config("suite", format!("no suite selected; choose from {}", SUITES.join(", "))));
            }
            let fault = inject_fault.map(|f| match f {
                FaultArg::CorruptCostTable => Fault::CorruptCostTable,
            });
            let mut ok = true;
            for n in &names {
                let r = verify::run_suite(n, fault)?;
                println!("{} {}: {}", if r.pass { "PASS" } else { "FAIL" }, r.name, r.detail);
                ok &= r.pass;
            }
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
