//! Command-line front end of the `bciphs` simulator.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::{Console, Context, Status};

#[derive(Debug, Parser)]
#[command(
    name = "bciphs",
    version,
    about = "Simulate and audit boundary-controlled irreversible port-Hamiltonian systems"
)]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `[output].dir` and BCIPHS_OUT_DIR.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed of the closure sampling used by the validator.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Replaces the audit tolerance scale.
    #[arg(long = "tol-scale", global = true)]
    pub tol_scale: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Check structure, closure, port parametrization and boundary inputs.
    Validate,
    /// Simulate, write the trajectory and balance report, and audit both principles.
    Run,
    /// Run the `[sweep]` section in parallel.
    Sweep,
    /// Print the built-in models with their parameters and ports.
    ListModels,
}

/// Parses arguments and runs a command. Returns the exit status together
/// with the text meant for stdout and stderr.
pub fn execute<I, T>(args: I, env_out: Option<PathBuf>) -> (Status, Console)
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let mut con = Console::default();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                con.err = text;
                return (Status::Config, con);
            }
            con.out = text;
            return (Status::Ok, con);
        }
    };
    let ctx = Context {
        out: cli.out.clone(),
        env_out,
        seed: cli.seed,
        tol_scale: cli.tol_scale,
    };
    if cli.command == Command::ListModels {
        let st = commands::list_models(&mut con);
        return (st, con);
    }
    let Some(path) = &cli.config else {
        con.err = "error: --config is required\n".into();
        return (Status::Config, con);
    };
    let mut cfg = match config::parse_config(path) {
        Ok(c) => c,
        Err(e) => {
            con.err = format!("error: {e}\n");
            return (Status::Config, con);
        }
    };
    ctx.apply(&mut cfg);
    let st = match cli.command {
        Command::Validate => commands::validate(&cfg, &mut con),
        Command::Run => commands::run(&cfg, &ctx, &mut con),
        Command::Sweep => commands::sweep(&cfg, &ctx, &mut con),
        Command::ListModels => unreachable!(),
    };
    (st, con)
}
