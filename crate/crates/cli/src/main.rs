use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use steinpp::io::Format;
use steinpp_cli::{cmd_bound, cmd_sample, cmd_verify, load_config};

#[derive(Parser)]
#[command(name = "steinpp", version, about = "Point-process samplers, GNZ checks and Stein bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment JSON (schema "steinpp/1").
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "STEINPP_JOBS")]
    jobs: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
}

#[derive(Subcommand)]
enum Command {
    /// Write realizations of the configured models.
    Sample,
    /// Run the configured checks; exits 1 if any fails.
    Verify,
    /// Bound-vs-empirical dominance table; exits 1 if any pair fails.
    Bound,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

fn run(cli: Cli) -> steinpp_cli::Result<bool> {
    let Some(path) = cli.config.as_deref() else {
        return Err(steinpp::Error::Config("--config is required".into()).into());
    };
    let cfg = load_config(path, cli.seed)?;
    let format = cli.format.into();
    match cli.command {
        Command::Sample => {
            for p in cmd_sample(&cfg, &cli.out, format)? {
                println!("{}", p.display());
            }
            Ok(true)
        }
        Command::Verify => {
            let out = cmd_verify(&cfg, &cli.out, format)?;
            let failed: Vec<_> = out.checks.iter().filter(|r| !r.pass).collect();
            for r in &failed {
                eprintln!("FAIL {} {}: lhs {} rhs {} stderr {}", r.model_id, r.check_id, r.lhs, r.rhs, r.stderr);
            }
            println!("{} checks, {} failed", out.checks.len(), failed.len());
            Ok(failed.is_empty())
        }
        Command::Bound => {
            let out = cmd_bound(&cfg, &cli.out, format)?;
            println!("{:<22} {:<20} {:>10} {:>10} {:>10} pass", "pair_id", "bound_id", "bound", "kr_lower", "margin");
            for r in &out.dominance {
                println!(
                    "{:<22} {:<20} {:>10.5} {:>10.5} {:>10.5} {}",
                    r.pair_id, r.bound_id, r.bound, r.kr_lower, r.margin, r.pass
                );
            }
            Ok(out.all_pass())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
