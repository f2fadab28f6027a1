use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mnar_cli::{cmd_diagnose, cmd_fit, cmd_report, cmd_simulate, CliError, FitFlags, SimulateArgs};

/// Estimation under nonignorable nonresponse with a shadow variable.
#[derive(Parser)]
#[command(name = "mnar", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Diagnose identifiability, then fit the model to a CSV.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// quadrature or fi
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        nodes: Option<usize>,
        /// Imputation size for fi.
        #[arg(long)]
        m: Option<usize>,
        /// Bootstrap replicates; 0 skips standard errors.
        #[arg(long = "bootstrap", short = 'B')]
        bootstrap: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        hajek: bool,
        #[arg(long)]
        percentile: bool,
        #[arg(long)]
        override_identifiability: bool,
    },
    /// Identifiability report for a categorical table, a dataset or a scenario.
    Diagnose {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Monte Carlo study of a scenario preset or a custom scenario config.
    Simulate {
        /// S1, S2, S3 or S4.
        scenario: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        kappa2: Option<f64>,
        /// Response link for S4.
        #[arg(long)]
        link: Option<String>,
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long = "R", short = 'R', default_value_t = 1000)]
        r: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value = "quadrature")]
        method: String,
        #[arg(long, default_value_t = 60)]
        nodes: usize,
        #[arg(long, default_value_t = 1000)]
        m: usize,
        #[arg(long = "B", short = 'B', default_value_t = 200)]
        b: usize,
        #[arg(long)]
        hajek: bool,
        #[arg(long)]
        percentile: bool,
        /// Plug in the true response model instead of estimating it.
        #[arg(long)]
        oracle: bool,
        #[arg(long)]
        emit_dataset: bool,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Collect outputs in a directory into report.md.
    Report {
        #[arg(long, default_value = "out")]
        dir: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fit {
            data,
            config,
            out,
            method,
            nodes,
            m,
            bootstrap,
            seed,
            hajek,
            percentile,
            override_identifiability,
        } => {
            let flags = FitFlags {
                method,
                nodes,
                m,
                bootstrap,
                seed,
                hajek,
                percentile,
                override_identifiability,
            };
            let res = cmd_fit(&data, &config, &flags, &out)?;
            print!("{}", res.result.to_markdown());
            for w in &res.result.warnings {
                eprintln!("warning: {w}");
            }
        }
        Command::Diagnose { config, data, out } => {
            let (verdict, _) = cmd_diagnose(&config, data.as_deref(), &out)?;
            print!("{}", verdict.to_report());
        }
        Command::Simulate {
            scenario,
            config,
            kappa2,
            link,
            n,
            r,
            seed,
            method,
            nodes,
            m,
            b,
            hajek,
            percentile,
            oracle,
            emit_dataset,
            out,
        } => {
            let args = SimulateArgs {
                scenario,
                config,
                kappa2,
                link,
                n,
                r,
                seed,
                method,
                nodes,
                m,
                b,
                hajek,
                percentile,
                oracle,
                emit_dataset,
            };
            let (report, _) = cmd_simulate(&args, &out)?;
            print!("{}", report.to_markdown());
            if report.high_failure_rate {
                eprintln!("warning: replicate failure rate exceeds 5%");
            }
        }
        Command::Report { dir } => {
            let path = cmd_report(&dir)?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
