use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use netcalc_cli::analyze::write_csv;
use netcalc_cli::scenario::Lit;
use netcalc_cli::{analyze, simulate, sweep, Param, Scenario};

#[derive(Parser)]
#[command(name = "netcalc", version, about = "Network-calculus bounds for a flow through a tandem of nodes")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Deterministic and statistical end-to-end bounds.
    Analyze(Common),
    /// Monte-Carlo check of the statistical bounds.
    Simulate(Common),
    /// Bounds over a grid of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Parameter to vary: a, T or ell.
        #[arg(long)]
        param: Param,
        /// Comma-separated values; defaults to `a_grid` for `--param a`.
        #[arg(long)]
        grid: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    /// Output file; standard output if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the scenario run count.
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

impl Common {
    fn load(&self) -> Result<Scenario> {
        let mut scn = Scenario::load(&self.scenario)?;
        if let Some(s) = self.seed {
            scn.seed = s;
        }
        if let Some(r) = self.runs {
            scn.runs = r;
        }
        Ok(scn)
    }

    fn sink(&self) -> Result<Box<dyn Write>> {
        let Format::Csv = self.format;
        Ok(match &self.out {
            Some(p) => Box::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?),
            None => Box::new(io::stdout().lock()),
        })
    }
}

fn notes(list: &[String]) {
    for n in list {
        eprintln!("note: {n}");
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.cmd {
        Cmd::Analyze(c) => {
            let scn = c.load()?;
            let (rows, n) = analyze(&scn)?;
            notes(&n);
            write_csv(&rows, c.sink()?)?;
            Ok(true)
        }
        Cmd::Simulate(c) => {
            let scn = c.load()?;
            let report = simulate(&scn)?;
            c.sink()?.write_all(report.to_csv().as_bytes())?;
            let failed = report.rows.iter().filter(|r| !r.pass).count();
            if failed > 0 {
                eprintln!("{failed} of {} rows exceed their bound", report.rows.len());
            }
            Ok(failed == 0)
        }
        Cmd::Sweep { common, param, grid } => {
            let scn = common.load()?;
            let values: Vec<Lit> = match (grid, param) {
                (Some(g), _) => g
                    .split(',')
                    .map(|x| Lit::parse(x).with_context(|| format!("bad grid value `{}`", x.trim())))
                    .collect::<Result<_>>()?,
                (None, Param::A) if !scn.a_grid.is_empty() => scn.a_grid.clone(),
                (None, _) => bail!("--grid is required"),
            };
            let (rows, n) = sweep(&scn, param, &values)?;
            notes(&n);
            write_csv(&rows, common.sink()?)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
