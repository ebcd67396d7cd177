//! Command-line front end: run systems under their aspects, validate aspect
//! files, and query the syntactic analyses of bare process terms.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use aspectke::analysis::{act_set, fv_set, fv_set_cap, lc_set, lc_set_cap, loc_set, SetItem, SetValue};
use aspectke::ast::Capability;
use aspectke::runtime::Outcome;
use aspectke::{parse_aspect_file, parse_process_file, parse_system, render_net_item, run};

#[derive(Parser)]
#[command(name = "aspectke", version, about = "Tuple-space processes under aspect-woven security policies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a system until quiescence or the step budget
    ///
    /// Exits 0 when the net goes quiescent, 2 when the budget runs out.
    Run {
        /// System file: `let` declarations `in` net
        system: PathBuf,
        /// Additional aspect file, woven after the system's own aspects;
        /// repeatable, applied in argument order
        #[arg(long = "aspects", value_name = "FILE")]
        aspects: Vec<PathBuf>,
        /// Scheduler seed; equal seeds replay equal runs
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Maximum number of steps before giving up
        #[arg(long = "max-steps", default_value_t = 10_000)]
        max_steps: u64,
        /// Write the trace to this file instead of stdout
        #[arg(long, value_name = "PATH")]
        trace: Option<PathBuf>,
        /// Print the final net, one sorted line per located item
        #[arg(long = "dump-final")]
        dump_final: bool,
    },
    /// Parse and validate aspect files
    Check {
        /// Aspect files to validate
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Print one syntactic analysis of a process file
    ///
    /// Functions: Act, LC, FV (no capability); Loc, LCc, FVc (capability
    /// required). The process file may open with `free a, b.` to mark names
    /// that should read as variables.
    Analyze {
        /// Process file
        process: PathBuf,
        /// Analysis to apply: Act | Loc | LC | LCc | FV | FVc
        function: String,
        /// Capability for the filtered forms: out | in | read | eval | newloc
        capability: Option<String>,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode, String> {
    match command {
        Command::Run { system, aspects, seed, max_steps, trace, dump_final } => {
            cmd_run(&system, &aspects, seed, max_steps, trace.as_deref(), dump_final)
        }
        Command::Check { paths } => cmd_check(&paths),
        Command::Analyze { process, function, capability } => {
            cmd_analyze(&process, &function, capability.as_deref())
        }
    }
}

fn read(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn cmd_run(
    system: &Path,
    aspect_files: &[PathBuf],
    seed: u64,
    max_steps: u64,
    trace_path: Option<&Path>,
    dump_final: bool,
) -> Result<ExitCode, String> {
    let mut state =
        parse_system(&read(system)?).map_err(|e| format!("{}: {e}", system.display()))?;
    for path in aspect_files {
        let extra =
            parse_aspect_file(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))?;
        state.aspects.extend(extra);
    }

    let result = run(&mut state, seed, max_steps).map_err(|e| format!("advice failed: {e}"))?;

    let mut trace_text = String::new();
    for event in &result.trace {
        trace_text.push_str(&event.to_string());
        trace_text.push('\n');
    }
    match trace_path {
        Some(path) => fs::write(path, trace_text).map_err(|e| format!("{}: {e}", path.display()))?,
        None => print!("{trace_text}"),
    }

    let steps = result.steps;
    let plural = if steps == 1 { "step" } else { "steps" };
    match result.outcome {
        Outcome::Quiescent => println!("quiescent after {steps} {plural}"),
        Outcome::StepBudget => println!("step budget exhausted after {steps} {plural}"),
    }

    if dump_final {
        println!("== final ==");
        let mut lines: Vec<_> = state.net.items.iter().map(render_net_item).collect();
        lines.sort();
        for line in lines {
            println!("{line}");
        }
    }

    Ok(match result.outcome {
        Outcome::Quiescent => ExitCode::SUCCESS,
        Outcome::StepBudget => ExitCode::from(2),
    })
}

fn cmd_check(paths: &[PathBuf]) -> Result<ExitCode, String> {
    let mut failed = false;
    for path in paths {
        match read(path).and_then(|src| {
            parse_aspect_file(&src).map_err(|e| format!("{}: {e}", path.display()))
        }) {
            Ok(aspects) => {
                let plural = if aspects.len() == 1 { "aspect" } else { "aspects" };
                println!("ok: {} ({} {plural})", path.display(), aspects.len());
            }
            Err(message) => {
                eprintln!("error: {message}");
                failed = true;
            }
        }
    }
    Ok(if failed { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

fn cmd_analyze(
    process: &Path,
    function: &str,
    capability: Option<&str>,
) -> Result<ExitCode, String> {
    let proc =
        parse_process_file(&read(process)?).map_err(|e| format!("{}: {e}", process.display()))?;

    let needs_cap = matches!(function, "Loc" | "LCc" | "FVc");
    let cap = match (needs_cap, capability) {
        (true, Some(word)) => Some(Capability::from_keyword(word).ok_or_else(|| {
            format!("unknown capability `{word}` (expected out, in, read, eval, or newloc)")
        })?),
        (true, None) => return Err(format!("{function} needs a capability argument")),
        (false, Some(word)) => {
            return Err(format!("{function} takes no capability argument, got `{word}`"))
        }
        (false, None) => None,
    };

    let items: std::collections::BTreeSet<SetItem> = match function {
        "Act" => act_set(&proc).into_iter().map(SetItem::Cap).collect(),
        "Loc" => loc_set(cap.unwrap(), &proc),
        "LC" => lc_set(&proc).into_iter().map(SetItem::Constant).collect(),
        "LCc" => lc_set_cap(cap.unwrap(), &proc).into_iter().map(SetItem::Constant).collect(),
        "FV" => fv_set(&proc).into_iter().map(SetItem::Variable).collect(),
        "FVc" => fv_set_cap(cap.unwrap(), &proc).into_iter().map(SetItem::Variable).collect(),
        other => {
            return Err(format!(
                "unknown analysis `{other}` (expected Act, Loc, LC, LCc, FV, or FVc)"
            ))
        }
    };

    let rendered = SetValue::Finite(items).render().expect("finite sets always render");
    println!("{rendered}");
    Ok(ExitCode::SUCCESS)
}
