use clap::{Args, Parser, Subcommand, ValueEnum};
use cutstack::experiments::{
    build_adversary_to, compression_csv, render_suite, run_all, write_bundle, Artifacts, ExperimentConfig, Suite,
};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const DEFAULT_OUT: &str = "cutstack-out";

#[derive(Parser)]
#[command(name = "cutstack", version, about = "Cutting-and-stacking and randomness experiments")]
struct Cli {
    /// JSON experiment config; unspecified fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for CSV/JSON artifacts.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the construction: construction.csv, construction.json, invariants.csv.
    Build,
    /// Trajectory names, cylinder measures and the entropy bound.
    Simulate,
    /// Solovay test rates, Kraft codes and incompressibility counts.
    Tests,
    /// LZ78 compression curves.
    Compress(CompressArgs),
    /// The adversarial sequence: adversary.csv, phases.csv.
    Adversary,
    /// Every suite plus the acceptance criteria; writes summary.json.
    RunAll {
        /// Comma-separated subset of build,simulate,tests,compress,adversary.
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
    },
    /// Print the effective config as JSON.
    Config,
}

#[derive(Args)]
struct CompressArgs {
    /// File of 0/1 characters; whitespace is ignored.
    #[arg(long, conflicts_with = "generator")]
    input: Option<PathBuf>,
    #[arg(long, value_enum)]
    generator: Option<Generator>,
    /// Length of generated input; defaults to the config horizon.
    #[arg(long)]
    length: Option<u64>,
    #[arg(long, value_enum, default_value = "lz78")]
    coder: Coder,
    /// Row spacing of the CSV.
    #[arg(long, default_value_t = 1024)]
    every: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Generator {
    Zeros,
    Alternating,
    Adversary,
}

#[derive(Clone, Copy, ValueEnum)]
enum Coder {
    Lz78,
}

fn load_config(cli: &Cli) -> cutstack::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.out_dir = cli.out_dir.clone();
    cfg.validate()?;
    Ok(cfg)
}

fn read_bits(path: &Path) -> cutstack::Result<Vec<u8>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        for (col, ch) in line.chars().enumerate() {
            match ch {
                '0' => out.push(0),
                '1' => out.push(1),
                c if c.is_whitespace() => {}
                c => {
                    return Err(cutstack::Error::Config(format!(
                        "{}: line {} column {}: expected 0 or 1, found {c:?}",
                        path.display(),
                        ln + 1,
                        col + 1
                    )))
                }
            }
        }
    }
    Ok(out)
}

fn write_out(dir: &Path, artifacts: &Artifacts) -> cutstack::Result<()> {
    write_bundle(dir, artifacts, None)?;
    for (name, bytes) in artifacts {
        println!("{} ({} bytes)", dir.join(name).display(), bytes.len());
    }
    Ok(())
}

fn suite(cfg: &ExperimentConfig, s: Suite) -> cutstack::Result<ExitCode> {
    let artifacts = render_suite(cfg, s)?;
    write_out(cfg.out_dir.as_deref().unwrap_or(Path::new(DEFAULT_OUT)), &artifacts)?;
    Ok(ExitCode::SUCCESS)
}

fn compress(cfg: &ExperimentConfig, args: &CompressArgs) -> cutstack::Result<ExitCode> {
    let Coder::Lz78 = args.coder;
    if args.every == 0 {
        return Err(cutstack::Error::Config("--every must be positive".into()));
    }
    let n = args.length.unwrap_or(cfg.horizon);
    let bits = match (&args.input, args.generator) {
        (Some(p), _) => read_bits(p)?,
        (None, Some(Generator::Zeros)) => vec![0; n as usize],
        (None, Some(Generator::Alternating)) => (0..n).map(|i| (i % 2) as u8).collect(),
        (None, Some(Generator::Adversary)) => build_adversary_to(cfg, n)?.prefix,
        (None, None) => return suite(cfg, Suite::Compress),
    };
    let csv = compression_csv(&bits, args.every)?;
    match &cfg.out_dir {
        Some(dir) => write_out(dir, &Artifacts::from([("compression.csv".to_string(), csv)]))?,
        None => print!("{}", String::from_utf8_lossy(&csv)),
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: &Cli) -> cutstack::Result<ExitCode> {
    let mut cfg = load_config(cli)?;
    match &cli.command {
        Command::Build => suite(&cfg, Suite::Build),
        Command::Simulate => suite(&cfg, Suite::Simulate),
        Command::Tests => suite(&cfg, Suite::Tests),
        Command::Adversary => suite(&cfg, Suite::Adversary),
        Command::Compress(args) => compress(&cfg, args),
        Command::RunAll { only } => {
            let only: Vec<Suite> = only.iter().map(|s| s.parse()).collect::<cutstack::Result<_>>()?;
            cfg.out_dir.get_or_insert_with(|| PathBuf::from(DEFAULT_OUT));
            let (summary, _) = run_all(&cfg, &only)?;
            for c in &summary.criteria {
                eprintln!("criterion {:>2} {}  {}: {}", c.id, if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            print!("{}", summary.to_json());
            Ok(ExitCode::from(summary.exit_code() as u8))
        }
        Command::Config => {
            println!("{}", cfg.to_json());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
