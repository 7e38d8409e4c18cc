mod check;
mod commands;
mod paper;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Optimal selling mechanisms and equilibrium learning for bundled goods.
#[derive(Debug, Parser)]
#[command(name = "bundle-eq", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Options,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimal mechanism and certificate for a scenario and learning direction.
    Mech,
    /// Buyer's best learning direction against a menu.
    BrBuyer,
    /// Simultaneous-move equilibrium by best-response iteration.
    Equilibrium,
    /// Seller commits to a deterministic menu first.
    CommitmentSeller,
    /// Buyer commits to a learning direction first.
    CommitmentBuyer,
    /// Reproduce a worked example and compare with the printed values.
    Paper {
        #[arg(long, value_enum)]
        example: Example,
    },
    /// Invariant and certificate suite; exits with status 4 on failure.
    Check,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Example {
    Intro,
    Fig2,
    Fig3,
    Fig4,
    Fig6,
    Fig7,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct Options {
    /// Scenario JSON file, or a preset name (intro, perturbed, fig2_right,
    /// fig3, fig4, fig6, buyer_first).
    #[arg(long, global = true)]
    scenario: Option<String>,
    /// Learning direction as comma-separated weights. Also seeds `equilibrium`.
    #[arg(long, global = true, value_parser = parse_weights, allow_hyphen_values = true)]
    alpha: Option<Weights>,
    /// Menu JSON file: an option array, `{"options": [..]}`, or any document
    /// with a `menu` field such as the output of `mech`.
    #[arg(long, global = true)]
    menu: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Monte Carlo and oracle seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Angles in the buyer's direction grid.
    #[arg(long, global = true)]
    grid_angles: Option<usize>,
    /// Price step of the brute-force searches.
    #[arg(long, global = true)]
    price_step: Option<f64>,
    /// Points along the type line in CSV figure output.
    #[arg(long, global = true, default_value_t = 201)]
    points: usize,
}

#[derive(Debug, Clone)]
pub struct Weights(pub Vec<f64>);

fn parse_weights(s: &str) -> Result<Weights, String> {
    s.split(',')
        .map(|x| {
            let x = x.trim();
            x.parse::<f64>()
                .map_err(|_| format!("`{x}` is not a number"))
                .and_then(|v| if v.is_finite() { Ok(v) } else { Err(format!("`{x}` is not finite")) })
        })
        .collect::<Result<_, _>>()
        .map(Weights)
}

/// A check in `check` did not hold.
#[derive(Debug)]
pub struct CheckFailed(pub usize);

impl std::fmt::Display for CheckFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} check(s) failed", self.0)
    }
}

impl std::error::Error for CheckFailed {}

/// Bad command-line input detected outside the library.
#[derive(Debug)]
pub struct InputError(pub String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("BUNDLE_EQ_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| InputError(format!("BUNDLE_EQ_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("configuring the worker pool")?;
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<CheckFailed>() {
            return 4;
        }
        if cause.is::<InputError>() || cause.is::<std::io::Error>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<bundle_eq::Error>() {
            return if e.is_input_error() { 2 } else { 3 };
        }
    }
    3
}

fn run(cli: Cli) -> anyhow::Result<()> {
    configure_threads()?;
    let opts = &cli.opts;
    match cli.command {
        Command::Mech => commands::mech(opts),
        Command::BrBuyer => commands::br_buyer(opts),
        Command::Equilibrium => commands::equilibrium(opts),
        Command::CommitmentSeller => commands::commitment_seller(opts),
        Command::CommitmentBuyer => commands::commitment_buyer(opts),
        Command::Paper { example } => paper::run(example, opts),
        Command::Check => check::run(opts),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_kind() {
        let numeric = bundle_eq::Error::Numeric {
            module: "ironing",
            detail: "hull".into(),
        };
        assert_eq!(exit_code(&anyhow::Error::new(numeric).context("mech")), 3);
        assert_eq!(exit_code(&bundle_eq::Error::Argument("x".into()).into()), 2);
        assert_eq!(exit_code(&InputError("x".into()).into()), 2);
        assert_eq!(exit_code(&CheckFailed(1).into()), 4);
    }

    #[test]
    fn weights_parse_with_signs_and_spaces() {
        assert_eq!(parse_weights("1, -2.5").unwrap().0, vec![1.0, -2.5]);
        assert!(parse_weights("1,nan").is_err());
        assert!(parse_weights("1,").is_err());
    }
}
