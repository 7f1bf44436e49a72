mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hitadv_core::Error;

#[derive(Parser)]
#[command(name = "hitadv", version, about = "Shape-based adversarial point clouds: data, training, attacks, defences and reports")]
struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct Common {
    /// Experiment config (TOML). Defaults apply when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output directory [default: $HITADV_OUT_DIR, else `out`].
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    HitAdv,
    Ifgm,
    HitAdvHardened,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DefenseArg {
    None,
    Srs,
    Sor,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic dataset as XYZ files plus a manifest.
    GenData {
        #[command(flatten)]
        common: Common,
    },
    /// Train the classifier (and the robust variant if configured).
    Train {
        #[command(flatten)]
        common: Common,
        /// Dataset directory from gen-data; generated in memory if omitted.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Attack one or more clouds; writes `<stem>_adv.ply` and `<stem>_adv.json`.
    Attack {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        /// XYZ, OFF or PLY files.
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        /// True label; the model's prediction is used when omitted.
        #[arg(long)]
        label: Option<usize>,
        #[arg(long, value_enum, default_value = "hit-adv")]
        method: Method,
    },
    /// Apply a preprocessing defence to clouds; writes `<stem>_<defence>.xyz`.
    Defend {
        #[command(flatten)]
        common: Common,
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "sor")]
        defense: DefenseArg,
        /// Seed for random sampling.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Attack the test split and write one metric report per (attack, defence).
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        /// Robust model to attack and judge instead of `--model`.
        #[arg(long)]
        robust_model: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_enum, num_args = 1.., default_values = ["hit-adv", "ifgm"])]
        attack: Vec<Method>,
    },
    /// Merge metric reports (files or directories) into a CSV table.
    Report {
        #[arg(required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        /// CSV path; stdout when omitted.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn print_error(err: &anyhow::Error) {
    match err.downcast_ref::<Error>() {
        Some(Error::Config(list)) => {
            eprintln!("error: invalid configuration ({} problem{})", list.len(), if list.len() == 1 { "" } else { "s" });
            for item in list {
                eprintln!("  - {item}");
            }
        }
        _ => {
            eprintln!("error: {err}");
            for cause in err.chain().skip(1) {
                eprintln!("  caused by: {cause}");
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::GenData { common } => commands::gen_data(&common),
        Command::Train { common, data } => commands::train(&common, data.as_deref()),
        Command::Attack {
            common,
            model,
            input,
            label,
            method,
        } => commands::attack(&common, &model, &input, label, method),
        Command::Defend {
            common,
            input,
            defense,
            seed,
        } => commands::defend(&common, &input, defense, seed),
        Command::Evaluate {
            common,
            model,
            robust_model,
            data,
            attack,
        } => commands::evaluate(&common, &model, robust_model.as_deref(), data.as_deref(), &attack),
        Command::Report { inputs, csv } => commands::report(&inputs, csv.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            print_error(&e);
            let config_error = matches!(e.downcast_ref::<Error>(), Some(Error::Config(_)));
            ExitCode::from(if config_error { 2 } else { 1 })
        }
    }
}
