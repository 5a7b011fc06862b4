mod args;
mod commands;
mod error;
mod output;

use std::ffi::OsString;

use clap::{ArgMatches, CommandFactory, FromArgMatches};
use ricker_allee::sweep::SweepRunner;

use crate::args::{usage, Cli, Command};
use crate::commands::Run;
use crate::error::{CliError, CliResult};
use crate::output::Manifest;

fn main() {
    let argv: Vec<OsString> = std::env::args_os().collect();
    std::process::exit(execute(argv, true));
}

/// Parses and runs one command line, returning the exit code.
fn execute(argv: Vec<OsString>, allow_replay: bool) -> i32 {
    let matches = match Cli::command().try_get_matches_from(&argv) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = Cli::from_arg_matches(&matches)
        .map_err(|e| CliError::Usage(e.to_string()))
        .and_then(|cli| dispatch(cli, &matches, &argv[1..], allow_replay));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn raw_values(m: &ArgMatches, id: &str) -> Option<String> {
    let vals: Vec<String> = m
        .get_raw(id)?
        .map(|v| v.to_string_lossy().into_owned())
        .collect();
    Some(vals.join(";"))
}

fn manifest_for(matches: &ArgMatches, args: &[OsString]) -> Manifest {
    let mut m = Manifest::default();
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    m.push("command", name);
    m.push("version", env!("CARGO_PKG_VERSION"));
    for (i, a) in args.iter().enumerate() {
        m.push(format!("arg.{i}"), a.to_string_lossy());
    }
    let cmd = Cli::command();
    let mut keys: Vec<(String, String)> = cmd
        .find_subcommand(name)
        .into_iter()
        .flat_map(|c| c.get_arguments())
        .chain(cmd.get_arguments())
        .filter_map(|arg| {
            let key = arg.get_long()?.to_string();
            Some((key, raw_values(sub, arg.get_id().as_str())?))
        })
        .collect();
    keys.sort();
    keys.dedup();
    for (k, v) in keys {
        m.push(format!("param.{k}"), v);
    }
    m
}

fn dispatch(
    cli: Cli,
    matches: &ArgMatches,
    args: &[OsString],
    allow_replay: bool,
) -> CliResult<()> {
    let runner = if cli.workers == 0 {
        SweepRunner::default()
    } else {
        SweepRunner::new(cli.workers)
    };
    let run = Run::new(runner, manifest_for(matches, args));
    match &cli.command {
        Command::Regime(a) => commands::regime(a),
        Command::Rth(a) => commands::rth(a),
        Command::Orbit(a) => commands::orbit(run, a),
        Command::Attractor(a) => commands::attractor(a),
        Command::Census(a) => commands::census_cmd(run, a),
        Command::Bifurcation(a) => commands::bifurcation(run, a),
        Command::Plane(a) => commands::plane(run, a),
        Command::RegionProbe(a) => commands::region_probe(run, a),
        Command::Basin(a) => commands::basin(run, a),
        Command::ExtTime(a) => commands::ext_time(run, a),
        Command::Nullclines(a) => commands::nullclines_cmd(run, a),
        Command::FixedPoints(a) => commands::fixed_points_cmd(run, a),
        Command::Transient(a) => commands::transient(run, a),
        Command::Replay(a) => {
            if !allow_replay {
                return Err(usage("a manifest cannot record a replay"));
            }
            replay(a)
        }
    }
}

fn replay(a: &args::ReplayArgs) -> CliResult<()> {
    let manifest = Manifest::read(&a.manifest)?;
    let mut argv = manifest.argv();
    if argv.is_empty() || manifest.get("command") != Some(argv[0].as_str()) {
        return Err(usage(format!(
            "{} records no usable command line",
            a.manifest.display()
        )));
    }
    if let Some(new_out) = &a.out {
        let new_out = new_out.display().to_string();
        let pos = argv
            .iter()
            .position(|x| x == "--out")
            .ok_or_else(|| usage("recorded command has no --out"))?;
        match argv.get_mut(pos + 1) {
            Some(v) => *v = new_out,
            None => return Err(usage("recorded --out has no value")),
        }
    }
    let mut full: Vec<OsString> = vec![OsString::from("ricker-allee")];
    full.extend(argv.into_iter().map(OsString::from));
    match execute(full, false) {
        0 => Ok(()),
        code => Err(CliError::Replay(code)),
    }
}
