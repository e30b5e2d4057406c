use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "forge", version, about = "Run degeneracy experiments and emit certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write certificate.json, sweep.csv and summary.txt.
    Run {
        name: String,
        /// JSON config; the built-in default is used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed of the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List experiments with their anchors and expected runtimes.
    List,
    /// Print the default config of an experiment.
    Config { name: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            print!("{}", forge_cli::list_table());
            ExitCode::SUCCESS
        }
        Command::Config { name } => match forge_cli::default_config(&name) {
            Ok(v) => {
                println!("{}", serde_json::to_string_pretty(&v).expect("config serializes"));
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
        Command::Run { name, config, out, seed } => {
            let text = match config.as_deref().map(std::fs::read_to_string).transpose() {
                Ok(t) => t,
                Err(e) => return fail(&forge_cli::CliError::Config(format!("{}: {e}", config.unwrap().display()))),
            };
            let report = match forge_cli::run(&name, text.as_deref(), seed) {
                Ok(r) => r,
                Err(e) => return fail(&e),
            };
            if let Err(e) = report.write(&out) {
                return fail(&e);
            }
            print!("{}", report.summary);
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                let names: Vec<&str> = report.failures().iter().map(|c| c.name.as_str()).collect();
                eprintln!("certification failed: {}", names.join(", "));
                ExitCode::from(1)
            }
        }
    }
}

fn fail(e: &forge_cli::CliError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}
