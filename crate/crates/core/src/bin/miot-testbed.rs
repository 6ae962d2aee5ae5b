use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use miot_testbed::bench::ReportFormat;
use miot_testbed::cli::{self, CliError, ScenarioConfig, FIXTURES};

#[derive(Debug, Parser)]
#[command(name = "miot-testbed", version, about = "Simulated-LAN medical IoT telemetry testbed")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario and write its capture, logs, impact report and summary.
    Run(ScenarioArgs),
    /// Run the paired plain/encrypted benchmark and write its reports.
    Bench(ScenarioArgs),
    /// Re-render a bench report from the samples in an output directory.
    Report {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "md")]
        format: FormatArg,
    },
    /// List the bundled scenario configs.
    Fixtures,
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    /// Config file, or the name of a bundled fixture.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    messages: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "md")]
    format: FormatArg,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum FormatArg {
    Md,
    Csv,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Md => ReportFormat::Md,
            FormatArg::Csv => ReportFormat::Csv,
        }
    }
}

fn load(args: &ScenarioArgs) -> Result<ScenarioConfig, CliError> {
    let mut config = cli::load_config(&args.config)?;
    if let Some(n) = args.messages {
        config.messages = n;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run(args) => {
            let config = load(&args)?;
            if config.messages == 0 {
                return Err(CliError::Config {
                    key: "messages".into(),
                    message: "messages must be > 0".into(),
                });
            }
            let out = cli::output_dir(args.out, &config);
            let summary = cli::run(&config, &out)?;
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
            eprintln!("artifacts written to {}", out.display());
        }
        Command::Bench(args) => {
            let config = load(&args)?;
            let out = cli::output_dir(args.out, &config);
            cli::bench(&config, &out)?;
            print!("{}", cli::report(&out, args.format.into())?);
            eprintln!("artifacts written to {}", out.display());
        }
        Command::Report { out, format } => print!("{}", cli::report(&out, format.into())?),
        Command::Fixtures => {
            for (name, _) in FIXTURES {
                println!("{name}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
