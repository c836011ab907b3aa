//! `convosim` — run simulated-user evaluations of conversational
//! recommenders, generate synthetic datasets, and render transcripts.

use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use convosim_core::{
    generate, items_csv, ratings_csv, render_aggregate, render_transcript, run_experiment, Error,
    ExperimentConfig, SynthConfig, Transcript,
};

#[derive(Parser)]
#[command(
    name = "convosim",
    version,
    about = "Simulated-user evaluation harness for conversational recommenders"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config file.
    Run(RunArgs),
    /// Generate a synthetic dataset with planted preference structure.
    GenSynth(GenSynthArgs),
    /// Render a transcript JSON file as plain text.
    Render(RenderArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's recommendation list size.
    #[arg(long)]
    k: Option<usize>,
    /// Override the config's output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Override the config's ratings CSV path.
    #[arg(long)]
    ratings: Option<PathBuf>,
    /// Override the config's items CSV path.
    #[arg(long)]
    items: Option<PathBuf>,
    /// Worker threads for dialogue simulation (default: all cores).
    /// The thread count never changes the results.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct GenSynthArgs {
    #[arg(long)]
    users: usize,
    #[arg(long)]
    items: usize,
    #[arg(long)]
    features: usize,
    #[arg(long)]
    seed: u64,
    /// Directory receiving ratings.csv and items.csv.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    /// Transcript JSON file produced by `convosim run`.
    transcript: PathBuf,
}

fn cmd_run(args: RunArgs) -> Result<(), Error> {
    let text = fs::read_to_string(&args.config).map_err(|e| Error::io(&args.config, e))?;
    let mut config: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| Error::validation(format!("{}: {e}", args.config.display())))?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(k) = args.k {
        config.k = k;
    }
    if let Some(out_dir) = args.out_dir {
        config.out_dir = out_dir;
    }
    if let Some(ratings) = args.ratings {
        config.ratings_path = ratings;
    }
    if let Some(items) = args.items {
        config.items_path = items;
    }
    if args.jobs == Some(0) {
        return Err(Error::validation("--jobs must be at least 1"));
    }

    let recommender = config.baseline();
    let outcome = run_experiment(&config, &recommender, args.jobs)?;
    if !outcome.skipped.is_empty() {
        println!(
            "skipped {} test user(s) with too little history",
            outcome.skipped.len()
        );
    }
    print!("{}", render_aggregate(&outcome.report));
    println!("report: {}", config.out_dir.join("report.json").display());
    Ok(())
}

fn cmd_gen_synth(args: GenSynthArgs) -> Result<(), Error> {
    let config = SynthConfig::new(args.users, args.items, args.features, args.seed);
    let data = generate(&config)?;
    fs::create_dir_all(&args.out_dir).map_err(|e| Error::io(&args.out_dir, e))?;
    let ratings_path = args.out_dir.join("ratings.csv");
    let items_path = args.out_dir.join("items.csv");
    fs::write(&ratings_path, ratings_csv(&data.ratings))
        .map_err(|e| Error::io(&ratings_path, e))?;
    fs::write(&items_path, items_csv(&data.catalog)).map_err(|e| Error::io(&items_path, e))?;
    println!(
        "wrote {} ratings to {} and {} items to {}",
        data.ratings.len(),
        ratings_path.display(),
        data.catalog.len(),
        items_path.display()
    );
    Ok(())
}

fn cmd_render(args: RenderArgs) -> Result<(), Error> {
    let text = fs::read_to_string(&args.transcript).map_err(|e| Error::io(&args.transcript, e))?;
    let transcript: Transcript = serde_json::from_str(&text)
        .map_err(|e| Error::validation(format!("{}: {e}", args.transcript.display())))?;
    print!("{}", render_transcript(&transcript));
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version arrive here as "errors" but exit clean
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::GenSynth(args) => cmd_gen_synth(args),
        Command::Render(args) => cmd_render(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
