//! Command-line front end: experiment drivers, configuration and output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod parse;

use std::io::Write;

use clap::Parser;

use crate::commands::{execute, Cli};
use crate::config::Config;
use crate::error::{CliError, EXIT_OK, EXIT_PARSE, EXIT_VERIFICATION};
use crate::output::write_outputs;

/// Parses `args`, runs the command and writes its outputs. Returns the
/// process exit code; human-readable text goes to `stdout`, diagnostics to
/// `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
            let text = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = write!(sink, "{text}");
            return code;
        }
    };
    let json = cli.common.json;
    match run_cli(&cli, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            if json {
                let v = serde_json::json!({"error": {"category": e.category(), "message": e.to_string()}});
                let _ = writeln!(stdout, "{v}");
            }
            let _ = writeln!(stderr, "error[{}]: {e}", e.category());
            e.exit_code()
        }
    }
}

fn run_cli(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, CliError> {
    let config = match &cli.common.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let threads = config.resolve("threads", cli.common.threads, config::parse_from_str::<usize>, 0)?;
    if threads > 0 {
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let mut rep = execute(cli, &config)?;
    let out_dir = config.resolve_opt("out", cli.common.out.clone(), |s| Ok(s.into()))?;
    if let Some(dir) = out_dir {
        write_outputs(&dir, &mut rep.manifest, &rep.tables)?;
    }
    for w in &rep.warnings {
        writeln!(stderr, "warning: {w}")?;
    }
    if cli.common.json {
        let mut v = serde_json::to_value(&rep.manifest)?;
        v["result"] = rep.result.clone();
        writeln!(stdout, "{v}")?;
    } else {
        writeln!(stdout, "{}", rep.text)?;
    }
    match rep.failure {
        Some(msg) => {
            writeln!(stderr, "error[VERIFICATION_FAILURE]: {msg}")?;
            Ok(EXIT_VERIFICATION)
        }
        None => Ok(EXIT_OK),
    }
}
