use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use ris_pkg::experiment::{self, ConfigFile, Format, Scheme};

#[derive(Parser)]
#[command(name = "ris-pkg", version, about = "Key generation rate experiments for RIS-assisted links")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a TOML spec file or a built-in preset.
    Run(RunArgs),
    /// Print a built-in preset as a TOML spec file.
    Preset {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(experiment::PRESETS))]
        name: String,
    },
    /// Horizontal power gap (dB) between two scheme curves in a result file.
    Gain {
        file: PathBuf,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        /// KGR level in bits per probe.
        #[arg(long)]
        level: f64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Experiment spec (TOML).
    #[arg(required_unless_present = "preset", conflicts_with = "preset")]
    spec: Option<PathBuf>,
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(experiment::PRESETS))]
    preset: Option<String>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, default_value = "csv")]
    format: Format,
    /// Monte Carlo trials per row (0 disables, otherwise at least 10000).
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long)]
    threads: Option<usize>,
    /// Also write a gnuplot script next to the data.
    #[arg(long)]
    plot_script: bool,
}

fn format_of(path: &std::path::Path) -> Format {
    match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl") => Format::JsonLines,
        _ => Format::Csv,
    }
}

fn run(args: RunArgs) -> anyhow::Result<()> {
    let mut file = match (&args.spec, &args.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let file: ConfigFile = toml::from_str(&text).map_err(|e| ris_pkg::Error::ConfigSyntax(e.to_string()))?;
            file
        }
        (None, Some(name)) => experiment::preset(name).expect("preset names are checked by clap"),
        (None, None) => bail!("either a spec file or --preset is required"),
    };
    if let Some(t) = args.trials {
        file.trials = t;
    }
    if let Some(s) = args.seed {
        file.seed = s;
    }
    let spec = file.into_spec()?;
    let rows = match args.threads {
        Some(n) => experiment::run_experiment_with_threads(&spec, n)?,
        None => experiment::run_experiment(&spec)?,
    };
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let data = args.out.join(format!("{}.{}", spec.name, args.format.extension()));
    experiment::emit(&rows, &data, args.format)?;
    eprintln!("wrote {} rows to {}", rows.len(), data.display());
    if args.plot_script {
        if args.format != Format::Csv {
            bail!("--plot-script needs --format csv");
        }
        let script = args.out.join(format!("{}.gp", spec.name));
        let name = data.file_name().unwrap().to_string_lossy().into_owned();
        std::fs::write(&script, experiment::plot_script(&spec, &name))
            .with_context(|| format!("writing {}", script.display()))?;
        eprintln!("wrote {}", script.display());
    }
    Ok(())
}

fn scheme(name: &str) -> anyhow::Result<Scheme> {
    Scheme::from_name(name).with_context(|| {
        let all: Vec<_> = Scheme::ALL.iter().map(|s| s.name()).collect();
        format!("unknown scheme `{name}` (expected one of {})", all.join(", "))
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Preset { name } => {
            print!("{}", experiment::preset(&name).expect("checked by clap").to_toml());
            Ok(())
        }
        Command::Gain { file, a, b, level } => (|| {
            let rows = experiment::parse_rows(&file, format_of(&file))?;
            let gain = experiment::dbm_gain(&rows, scheme(&a)?, scheme(&b)?, level)?;
            println!("{gain:.6}");
            Ok(())
        })(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
