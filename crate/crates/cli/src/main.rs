use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hmsem_cli::config::RunConfig;
use hmsem_cli::run::{run, RunError};

/// Spectral elements on box unions and transmission eigenvalues.
#[derive(Parser)]
#[command(name = "hmsem", version)]
struct Cli {
    #[command(subcommand)]
    action: Action,
}

#[derive(Subcommand)]
enum Action {
    /// Runs a configuration, writing the CSV and a report.
    Run {
        config: PathBuf,
        /// CSV destination; overrides `output` in the configuration.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Print the report to stderr instead of writing `<output>.report`.
        #[arg(long)]
        quiet: bool,
    },
    /// Validates a configuration and prints it with every default filled.
    Check { config: PathBuf },
}

fn load(path: &Path) -> Result<RunConfig, RunError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RunError::from(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    Ok(RunConfig::parse(&text)?)
}

fn execute(action: Action) -> Result<(), RunError> {
    match action {
        Action::Check { config } => {
            print!("{}", load(&config)?.emit());
            Ok(())
        }
        Action::Run { config, output, quiet } => {
            let c = load(&config)?;
            let dest = output.or_else(|| c.output.as_ref().map(PathBuf::from));
            let out = run(&c, dest.as_deref())?;
            match &dest {
                Some(p) => {
                    std::fs::write(p, &out.csv)?;
                    if quiet {
                        eprint!("{}", out.report);
                    } else {
                        let mut rp = p.as_os_str().to_owned();
                        rp.push(".report");
                        std::fs::write(&rp, &out.report)?;
                    }
                    eprintln!("wrote {}", p.display());
                }
                None => {
                    print!("{}", out.csv);
                    eprint!("{}", out.report);
                }
            }
            for a in &out.artifacts {
                eprintln!("wrote {}", a.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.action) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error [{}]: {}", e.category_name(), e.message);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
