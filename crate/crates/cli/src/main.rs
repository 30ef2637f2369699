use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use codata_cli::{load, Report, Session};
use codata_core::typecheck::Options;

#[derive(Parser)]
#[command(name = "codata", version, about = "Check, run and elaborate .pol programs")]
struct Cli {
    /// Reduction steps allowed per normalization or conversion problem.
    #[arg(long, global = true, default_value_t = 1_000_000, value_parser = clap::value_parser!(u64).range(1..))]
    fuel: u64,
    /// Print diagnostics as JSON, one object per line.
    #[arg(long, global = true)]
    json: bool,
    /// Print the rules applied while checking conversions.
    #[arg(long, global = true)]
    explain_conv: bool,
    /// Print the steps of index unification for every (co)case.
    #[arg(long, global = true)]
    explain_unify: bool,
    /// Print conversion rule applications as JSON lines on stderr.
    #[arg(long, global = true)]
    trace_json: bool,
    /// Do not prepend the standard prelude.
    #[arg(long, global = true)]
    no_prelude: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Type check the given files.
    Check {
        #[arg(required = true)]
        files: Vec<String>,
    },
    /// Check, then normalize the top-level let NAME and print it.
    Run {
        /// Files followed by the name of a top-level let.
        #[arg(required = true, num_args = 2..)]
        files_then_name: Vec<String>,
    },
    /// Check, then print the program with all implicit arguments filled in.
    Elaborate {
        #[arg(required = true)]
        files: Vec<String>,
    },
}

fn read_files(paths: &[String]) -> Result<Vec<(String, String)>, String> {
    paths
        .iter()
        .map(|p| std::fs::read_to_string(p).map(|t| (p.clone(), t)).map_err(|e| format!("cannot read `{p}`: {e}")))
        .collect()
}

fn emit(cli: &Cli, reports: &[Report]) {
    let mut err = std::io::stderr().lock();
    for r in reports {
        let line = if cli.json { serde_json::to_string(r).expect("serializable") } else { r.human() };
        let _ = writeln!(err, "{line}");
    }
}

fn emit_traces(cli: &Cli, s: &Session) {
    let mut err = std::io::stderr().lock();
    if cli.explain_unify {
        for l in &s.checker.unify_trace {
            let _ = writeln!(err, "{l}");
        }
    }
    if cli.explain_conv || cli.trace_json {
        for e in &s.checker.conv_trace {
            if cli.trace_json {
                let v = serde_json::json!({ "rule": e.rule, "lhs": e.lhs, "rhs": e.rhs });
                let _ = writeln!(err, "{v}");
            } else {
                let _ = writeln!(err, "{}: {} = {}", e.rule, e.lhs, e.rhs);
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (paths, target) = match &cli.command {
        Command::Check { files } | Command::Elaborate { files } => (files.clone(), None),
        Command::Run { files_then_name } => {
            let (name, files) = files_then_name.split_last().expect("at least two values");
            (files.to_vec(), Some(name.clone()))
        }
    };
    let files = match read_files(&paths) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let opts = Options {
        fuel: cli.fuel,
        trace_conv: cli.explain_conv || cli.trace_json,
        trace_unify: cli.explain_unify,
        log_constraints: false,
    };
    let session = match load(&files, !cli.no_prelude, opts) {
        Ok(s) => s,
        Err((_, reports)) => {
            emit(&cli, &reports);
            return ExitCode::from(1);
        }
    };
    emit_traces(&cli, &session);
    if !session.ok() {
        emit(&cli, &session.reports());
        return ExitCode::from(1);
    }
    let mut out = std::io::stdout().lock();
    match &cli.command {
        Command::Check { .. } => {}
        Command::Elaborate { .. } => {
            let _ = write!(out, "{}", session.elaborate());
        }
        Command::Run { .. } => {
            let name = target.expect("run has a target");
            match session.run(&name, cli.fuel) {
                Ok(t) => {
                    let _ = writeln!(out, "{}", session.show(&t));
                }
                Err(r) => {
                    emit(&cli, &[r]);
                    return ExitCode::from(1);
                }
            }
        }
    }
    ExitCode::SUCCESS
}
