use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use gapspec_cli::{presets, run_experiment, validate_config, RunError, RunOptions};

#[derive(Parser)]
#[command(name = "gapspec", version, about = "Gap-spectrum sweeps for self-adjoint block operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the tasks of a JSON experiment config.
    Run {
        config: PathBuf,
        /// Output directory (overrides output.directory).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (overrides workers).
        #[arg(long)]
        workers: Option<usize>,
        /// Also write the assembled matrices at the probe lambdas as CSV.
        #[arg(long)]
        dump_matrices: bool,
    },
    /// Check a config and print it with every default filled in.
    Validate { config: PathBuf },
    /// Write a bundled preset config into the output directory and run it.
    Demo {
        preset: Preset,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Torus,
    Line,
    Plasma,
}

impl Preset {
    fn name(self) -> &'static str {
        match self {
            Preset::Torus => "torus",
            Preset::Line => "line",
            Preset::Plasma => "plasma",
        }
    }
}

fn read(path: &PathBuf) -> Result<String, RunError> {
    std::fs::read_to_string(path).map_err(|e| RunError::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn execute(text: &str, opts: RunOptions) -> Result<(), RunError> {
    let config = validate_config(text)?;
    let written = run_experiment(&config, &opts, &mut io::stdout())?;
    let dir = opts.out.unwrap_or_else(|| PathBuf::from(&config.output.directory));
    println!("wrote {} files to {}", written.len(), dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out, workers, dump_matrices } => {
            read(&config).and_then(|text| execute(&text, RunOptions { out, workers, dump_matrices }))
        }
        Command::Validate { config } => read(&config).and_then(|text| {
            let c = validate_config(&text)?;
            println!("{}", serde_json::to_string_pretty(&c).expect("config serialises"));
            Ok(())
        }),
        Command::Demo { preset, out, workers } => {
            let text = presets::get(preset.name()).expect("bundled preset");
            let out = out.unwrap_or_else(|| PathBuf::from(format!("demo-{}", preset.name())));
            std::fs::create_dir_all(&out)
                .and_then(|_| std::fs::write(out.join("preset.json"), text))
                .map_err(RunError::Io)
                .and_then(|_| execute(text, RunOptions { out: Some(out), workers, dump_matrices: false }))
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
