//! `evidential`: belief networks from the command line.

mod session;

use std::io::{self, BufRead, IsTerminal, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use session::{Command, Line, Outcome, Session};

#[derive(Debug, Parser)]
#[command(name = "evidential", version, about = "Belief networks with probabilistic and Dempster-Shafer valuations")]
struct Cli {
    /// Network document to load first
    #[arg(long, global = true)]
    net: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

fn usage_message(e: &clap::Error) -> String {
    let text = e.kind().as_str().map(String::from).unwrap_or_else(|| e.to_string());
    let detail = e.to_string();
    let first = detail.lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
    if first.is_empty() {
        text
    } else {
        first
    }
}

fn repl(session: &mut Session) -> i32 {
    let stdin = io::stdin();
    let interactive = stdin.is_terminal();
    let mut out = io::stdout().lock();
    let mut lines = stdin.lock().lines();
    loop {
        if interactive {
            let _ = write!(out, "> ");
            let _ = out.flush();
        }
        let Some(Ok(line)) = lines.next() else { return 0 };
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some(words) = shlex::split(line) else {
            let _ = writeln!(out, "E_USAGE: unbalanced quotes");
            continue;
        };
        let command = match Line::try_parse_from(words) {
            Ok(l) => l.command,
            Err(e) => {
                let _ = writeln!(out, "E_USAGE: {}", usage_message(&e));
                continue;
            }
        };
        match session.execute(command) {
            Ok(Outcome::Quit) => return 0,
            Ok(Outcome::Continue(text)) => {
                let _ = write!(out, "{text}");
            }
            Err(f) => {
                let _ = writeln!(out, "{}", f.render());
            }
        }
        let _ = out.flush();
    }
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            eprintln!("E_USAGE: {}", usage_message(&e));
            return 2;
        }
    };
    let mut session = Session::new();
    if let Some(path) = &cli.net {
        match session.load(path) {
            Ok(text) => {
                // only warnings are worth showing before a one-shot command
                for line in text.lines().filter(|l| l.starts_with("warning:")) {
                    eprintln!("{line}");
                }
            }
            Err(f) => {
                eprintln!("{}", f.render());
                return f.exit_code();
            }
        }
    }
    match cli.command {
        None | Some(Command::Repl) => repl(&mut session),
        Some(command) => match session.execute(command) {
            Ok(Outcome::Continue(text)) => {
                print!("{text}");
                0
            }
            Ok(Outcome::Quit) => 0,
            Err(f) => {
                eprintln!("{}", f.render());
                f.exit_code()
            }
        },
    }
}

fn main() -> ExitCode {
    ExitCode::from(run() as u8)
}
