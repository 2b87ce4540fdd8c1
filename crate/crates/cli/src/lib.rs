pub mod args;
pub mod commands;
pub mod config;
pub mod run;

use std::io::Write;

use args::{Cli, Command};
use config::RunConfig;

fn dispatch(cli: &Cli, out: &mut dyn Write) -> anyhow::Result<i32> {
    match &cli.command {
        Command::Ingest(a) => {
            let mut c = match &a.config {
                Some(path) => RunConfig::from_toml_file(path)?,
                None => RunConfig::default(),
            };
            a.store.apply(&mut c);
            commands::ingest::ingest(&c.datastore.files(), out)
        }
        Command::Synth(a) => commands::ingest::synth(a, out),
        Command::Translate(a) => commands::translate::translate(&a.resolve()?, out),
        Command::Caption(a) => commands::caption::caption(&a.resolve()?, out),
        Command::Evaluate(a) => commands::evaluate::evaluate(a, out),
        Command::Replay(a) => commands::replay::replay(a, out),
    }
}

/// The error chain joined by ": ", skipping causes whose text the previous
/// message already ends with.
pub fn render_error(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if out.ends_with(&text) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&text);
    }
    out
}

/// Runs a parsed command line and returns the process exit code: 0 on
/// success, 1 on partial failure, 2 on a fatal error.
pub fn run(cli: &Cli, out: &mut dyn Write) -> i32 {
    match dispatch(cli, out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", render_error(&e));
            2
        }
    }
}
