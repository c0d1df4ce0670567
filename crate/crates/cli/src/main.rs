mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::Parser;
use qudio::Error;

use args::{Cli, Command};
use manifest::RunManifest;

const EXIT_USAGE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::ZeroShots => EXIT_USAGE,
        Error::Parse { .. }
        | Error::InvalidHamiltonian(_)
        | Error::IdxFormat { .. }
        | Error::Dataset(_)
        | Error::ZeroNorm
        | Error::Fetch(_)
        | Error::Io(_)
        | Error::Json(_) => EXIT_INPUT,
        _ => EXIT_INTERNAL,
    }
}

fn parse(argv: &[String]) -> Result<Cli, ExitCode> {
    Cli::try_parse_from(std::iter::once("qudio".to_string()).chain(argv.iter().cloned())).map_err(|e| {
        let _ = e.print();
        if e.use_stderr() {
            ExitCode::from(EXIT_USAGE)
        } else {
            ExitCode::SUCCESS
        }
    })
}

fn dispatch(cli: Cli, argv: Vec<String>) -> qudio::Result<()> {
    match cli.command {
        Command::QnnTrain(a) => commands::qnn_train(&a, argv),
        Command::Vqe(a) => commands::vqe(&a, argv),
        Command::BiasCheck(a) => commands::bias_check_cmd(&a),
        Command::Bench(a) => commands::bench(&a, argv),
        Command::FetchMnist(a) => commands::fetch_mnist(&a),
        Command::Replay(a) => {
            let recorded = RunManifest::read(&a.manifest)?;
            let mut argv = recorded.argv;
            if let Some(out) = a.out {
                argv.retain_out_removed();
                argv.push("--out".into());
                argv.push(out.display().to_string());
            }
            let cli = parse(&argv).map_err(|_| Error::Config("manifest holds an unparsable command line".into()))?;
            if matches!(cli.command, Command::Replay(_)) {
                return Err(Error::Config("a manifest cannot replay another replay".into()));
            }
            dispatch(cli, argv)
        }
    }
}

trait StripOut {
    fn retain_out_removed(&mut self);
}

impl StripOut for Vec<String> {
    /// Drops `--out DIR` and `--out=DIR`.
    fn retain_out_removed(&mut self) {
        let mut i = 0;
        while i < self.len() {
            if self[i] == "--out" {
                self.drain(i..(i + 2).min(self.len()));
            } else if self[i].starts_with("--out=") {
                self.remove(i);
            } else {
                i += 1;
            }
        }
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let cli = match parse(&argv) {
        Ok(cli) => cli,
        Err(code) => return code,
    };
    match dispatch(cli, argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
