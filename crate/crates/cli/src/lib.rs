//! The `factoid` command line: argument parsing, layered configuration and
//! the exit-code contract (0 ok, 1 usage, 2 input, 3 provider, 4 internal).

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod providers;
pub mod review;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::{BufRead, Write};

use clap::Parser;

use args::{Cli, Command, FeEvalCommand};
use commands::{Globals, Io};
pub use error::CliError;

/// Run with the process environment.
pub fn run<I, T>(argv: I, stdin: &mut (dyn BufRead + Send), stdout: &mut dyn Write, stderr: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let env: BTreeMap<String, String> = std::env::vars().filter(|(k, _)| k.starts_with("FACTOID_")).collect();
    run_with_env(argv, &env, stdin, stdout, stderr)
}

/// Run with an explicit environment, for tests.
pub fn run_with_env<I, T>(
    argv: I,
    env: &BTreeMap<String, String>,
    stdin: &mut (dyn BufRead + Send),
    stdout: &mut dyn Write,
    stderr: &mut (dyn Write + Send),
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let out: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = write!(out, "{}", e.render());
            return code;
        }
    };
    let g = Globals { cli: &cli, env };
    let mut io = Io { stdin, stdout, stderr };
    let result = match &cli.command {
        Command::Forge(a) => commands::forge(&g, a, &mut io),
        Command::Gate(a) => commands::gate(&g, a, &mut io),
        Command::EvalParaphrasers(a) => commands::eval_paraphrasers(&g, a, &mut io),
        Command::Hvi(a) => commands::hvi(&g, a, &mut io),
        Command::Stats(a) => commands::stats(&g, a, &mut io),
        Command::FeEval(FeEvalCommand::Score(a)) => commands::fe_score(&g, a, &mut io),
        Command::FeEval(FeEvalCommand::Compare(a)) => commands::fe_compare(&g, a, &mut io),
        Command::Embed(a) => commands::embed(&g, a, &mut io),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(io.stderr, "error: {e}");
            e.exit_code()
        }
    }
}
