use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nullfol_cli::config::{RunConfig, Suite};
use nullfol_cli::runner::{self, exit_code_of, RunOutput, EXIT_CONFIG, EXIT_NUMERIC};

#[derive(Parser)]
#[command(name = "nullfol", version, about = "Evolves null foliations and audits the result")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the configured data and run the suites listed in `[audit]`.
    Run { config: PathBuf },
    /// Compare a homogeneous Minkowski run with the closed-form solution.
    OracleCompare { config: PathBuf },
    /// Evolve and run a single audit suite.
    Audit {
        config: PathBuf,
        #[arg(long, value_parser = parse_suite)]
        suite: Suite,
    },
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse()
}

fn write_outputs(cfg: &RunConfig, out: &RunOutput) -> Result<(), i32> {
    let write = |path: &Option<PathBuf>, text: &str| -> Result<(), i32> {
        let Some(p) = path else { return Ok(()) };
        std::fs::write(p, text).map_err(|e| {
            eprintln!("error: cannot write {}: {e}", p.display());
            EXIT_NUMERIC
        })
    };
    write(&cfg.csv, &out.csv)?;
    write(&cfg.json, &out.report.to_json())
}

fn load(path: &Path) -> Result<RunConfig, i32> {
    RunConfig::from_file(path).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        EXIT_CONFIG
    })
}

fn execute(cmd: Command) -> Result<i32, i32> {
    let fail = |e: nullfol::NullfolError| {
        eprintln!("error: {e}");
        exit_code_of(&e)
    };
    let (cfg, out) = match cmd {
        Command::Run { config } => {
            let cfg = load(&config)?;
            let out = runner::run(&cfg, &cfg.suites).map_err(fail)?;
            (cfg, out)
        }
        Command::Audit { config, suite } => {
            let cfg = load(&config)?;
            let out = runner::run(&cfg, &[suite]).map_err(fail)?;
            (cfg, out)
        }
        Command::OracleCompare { config } => {
            let cfg = load(&config)?;
            let (e, out) = runner::oracle_compare(&cfg).map_err(fail)?;
            println!(
                "oracle: trchi {:e}, |chih| {:e}, v {:e} on [0, {}]",
                e.trchi, e.chih, e.v, e.s_stop
            );
            (cfg, out)
        }
    };
    write_outputs(&cfg, &out)?;
    println!("{}", runner::summary(&out));
    Ok(out.exit_code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG as u8 } else { 0 });
        }
    };
    if let Some(n) = std::env::var("NULLFOL_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // The pool can only be configured once; a second attempt is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let code = execute(cli.command).unwrap_or_else(|c| c);
    ExitCode::from(code as u8)
}
