//! `relfix`: detect and repair faults in `.rspec` specifications.
//!
//! Exit codes: 0 = repair found a fix (patch written) or `check` found
//! faults; 2 = candidate space exhausted; 3 = timeout; 4 = no fault
//! detected; 1 = usage, parse, or type errors.

use clap::{Args, Parser, Subcommand};
use relfix_core::loc;
use relfix_core::mutate;
use relfix_core::repair::{
    apply_config_scopes, detect_faults, repair, RepairConfig, RepairError, Verdict,
};
use relfix_core::report;
use relfix_core::solve::SolveError;
use relfix_core::{parse, print_spec, Location, Spec};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

#[derive(Parser)]
#[command(name = "relfix", version, about = "Bounded-exhaustive repair for relational specs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Search for a patch that makes every oracle command pass.
    Repair(RepairArgs),
    /// Run the oracle commands and report which fail.
    Check(CheckArgs),
}

#[derive(Args)]
struct RepairArgs {
    /// Input specification.
    file: PathBuf,
    /// Marker file, one location per line (`Name` or `Name/i/j...`; `#`
    /// comments). Without it, inline `//@loc` markers are used.
    #[arg(long)]
    locs: Option<PathBuf>,
    /// Mutation budget per location.
    #[arg(long, default_value_t = 2)]
    max_depth: usize,
    /// Wall-clock budget in seconds.
    #[arg(long, default_value_t = 3600)]
    timeout: u64,
    /// `all`, `none`, or a comma list of `partial`,`variabilization`.
    #[arg(long, default_value = "all")]
    prune: String,
    /// Scope override `SIG=N` (append `!` for exact), repeatable.
    #[arg(long)]
    scope: Vec<String>,
    /// Integer bitwidth override for every command.
    #[arg(long)]
    bitwidth: Option<u32>,
    /// Single-threaded in-order search; timing scrubbed from the report.
    #[arg(long)]
    deterministic: bool,
    /// Candidate evaluation threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Write the run report here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Print the mutants of one location marker and exit.
    #[arg(long, value_name = "MARKER")]
    dump_mutants: Option<String>,
}

#[derive(Args)]
struct CheckArgs {
    /// Input specification.
    file: PathBuf,
    /// Scope override `SIG=N` (append `!` for exact), repeatable.
    #[arg(long)]
    scope: Vec<String>,
    /// Integer bitwidth override for every command.
    #[arg(long)]
    bitwidth: Option<u32>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // clap renders its own help/usage text; route errors to code 1.
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let code = match cli.cmd {
        Cmd::Repair(a) => run_repair(&a),
        Cmd::Check(a) => run_check(&a),
    };
    match code {
        Ok(c) => ExitCode::from(c),
        Err(msg) => {
            eprintln!("relfix: {msg}");
            ExitCode::from(1)
        }
    }
}

fn load_spec(path: &Path) -> Result<Spec, String> {
    let src = std::fs::read_to_string(path)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    let spec = parse(&src).map_err(|e| format!("{}: {e}", path.display()))?;
    relfix_core::types::typecheck_spec(&spec)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(spec)
}

fn parse_scopes(specs: &[String]) -> Result<Vec<(String, u32, bool)>, String> {
    specs
        .iter()
        .map(|s| {
            let (name, rest) = s
                .split_once('=')
                .ok_or_else(|| format!("bad --scope `{s}`, expected SIG=N or SIG=N!"))?;
            let (num, exact) = match rest.strip_suffix('!') {
                Some(n) => (n, true),
                None => (rest, false),
            };
            let n: u32 = num
                .parse()
                .map_err(|_| format!("bad --scope `{s}`, count is not a number"))?;
            Ok((name.to_string(), n, exact))
        })
        .collect()
}

fn parse_prune(s: &str) -> Result<(bool, bool), String> {
    match s {
        "all" => return Ok((true, true)),
        "none" => return Ok((false, false)),
        _ => {}
    }
    let (mut partial, mut variab) = (false, false);
    for part in s.split(',') {
        match part.trim() {
            "partial" => partial = true,
            "variabilization" => variab = true,
            other => return Err(format!("unknown prune mode `{other}`")),
        }
    }
    Ok((partial, variab))
}

fn load_locations(spec: &Spec, locs: &Option<PathBuf>) -> Result<Vec<Location>, String> {
    match locs {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("{}: {e}", path.display()))?;
            let markers: Vec<String> = text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_string)
                .collect();
            loc::resolve_markers(spec, &markers).map_err(|e| e.to_string())
        }
        None => loc::validate_inline_markers(spec).map_err(|e| e.to_string()),
    }
}

fn run_repair(a: &RepairArgs) -> Result<u8, String> {
    let spec = load_spec(&a.file)?;
    let (prune_partial, prune_variabilization) = parse_prune(&a.prune)?;
    let mut cfg = RepairConfig {
        max_depth: a.max_depth,
        timeout: Duration::from_secs(a.timeout),
        prune_partial,
        prune_variabilization,
        deterministic: a.deterministic,
        scope_overrides: parse_scopes(&a.scope)?,
        bitwidth: a.bitwidth,
        ..Default::default()
    };
    if let Some(j) = a.jobs {
        if j == 0 {
            return Err("--jobs must be at least 1".into());
        }
        cfg.jobs = j;
    }

    if let Some(marker) = &a.dump_mutants {
        let l = loc::resolve_marker(&spec, marker).map_err(|e| e.to_string())?;
        let scoped = apply_config_scopes(&spec, &cfg);
        for m in mutate::mutant_stream(&scoped, &l, a.max_depth) {
            let ops: Vec<&str> = m.lineage.iter().map(|o| o.name()).collect();
            let text = match &m.replacement {
                relfix_core::Subtree::E(e) => relfix_core::print::print_expr(e),
                relfix_core::Subtree::F(f) => relfix_core::print::print_formula(f),
            };
            println!("depth {} via {}: {text}", m.depth, ops.join(","));
        }
        return Ok(0);
    }

    let locs = load_locations(&spec, &a.locs)?;
    let mut out = match repair(&spec, &locs, &cfg) {
        Ok(out) => out,
        Err(RepairError::NoFaults) => {
            println!("no fault detected: every oracle passes");
            return Ok(4);
        }
        Err(e) => return Err(e.to_string()),
    };
    if cfg.deterministic {
        out.stats.wall_ms = 0;
    }

    let mut patched: Option<Spec> = None;
    let code = match &out.verdict {
        Verdict::Fixed { assignment, .. } => {
            // Re-apply the replacements to the pristine parse so the emitted
            // file carries the fix but not the scope overrides.
            let patch: Vec<_> = out
                .locs
                .iter()
                .zip(assignment)
                .filter_map(|(l, m)| m.as_ref().map(|m| (l.clone(), m.replacement.clone())))
                .collect();
            let fixed = loc::apply_patch(&spec, &patch).map_err(|e| e.to_string())?;
            let path = fixed_path(&a.file);
            std::fs::write(&path, print_spec(&fixed))
                .map_err(|e| format!("{}: {e}", path.display()))?;
            println!("fixed: patch written to {}", path.display());
            for (i, slot) in assignment.iter().enumerate() {
                if let Some(m) = slot {
                    let text = match &m.replacement {
                        relfix_core::Subtree::E(e) => relfix_core::print::print_expr(e),
                        relfix_core::Subtree::F(f) => relfix_core::print::print_formula(f),
                    };
                    println!(
                        "  {} -> {text}",
                        spec.decl_name(out.locs[i].decl)
                    );
                }
            }
            patched = Some(fixed);
            0
        }
        Verdict::SpaceExhausted => {
            println!("space exhausted: no fix within depth {}", cfg.max_depth);
            2
        }
        Verdict::Timeout { cause } => {
            println!("timeout: {cause}");
            3
        }
    };
    println!(
        "stats: generated={} visited={} pruned={} solver-calls={} wall-ms={}",
        out.stats.generated,
        out.stats.visited,
        out.stats.pruned,
        out.stats.solver_calls,
        out.stats.wall_ms
    );

    if let Some(path) = &a.report {
        let text = report::render(
            &a.file.display().to_string(),
            &cfg,
            &out,
            &spec,
            patched.as_ref(),
        );
        std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    Ok(code)
}

fn fixed_path(input: &Path) -> PathBuf {
    match input.extension().and_then(|e| e.to_str()) {
        Some("rspec") => input.with_extension("fixed.rspec"),
        _ => {
            let mut s = input.as_os_str().to_owned();
            s.push(".fixed.rspec");
            PathBuf::from(s)
        }
    }
}

fn run_check(a: &CheckArgs) -> Result<u8, String> {
    let spec = load_spec(&a.file)?;
    let cfg = RepairConfig {
        scope_overrides: parse_scopes(&a.scope)?,
        bitwidth: a.bitwidth,
        ..Default::default()
    };
    let scoped = apply_config_scopes(&spec, &cfg);
    let faults = match detect_faults(&scoped, &cfg.solve) {
        Ok(f) => f,
        Err(RepairError::Solve(SolveError::Resource { limit })) => {
            println!("timeout: work limit {limit} exceeded");
            return Ok(3);
        }
        Err(e) => return Err(e.to_string()),
    };
    for (i, cmd) in scoped.commands.iter().enumerate() {
        if !cmd.is_oracle {
            continue;
        }
        let failed = faults.iter().any(|f| f.cmd == i);
        println!(
            "{}: {}",
            cmd.display_name(),
            if failed { "fail" } else { "pass" }
        );
    }
    if faults.is_empty() {
        println!("no fault detected");
        Ok(4)
    } else {
        Ok(0)
    }
}
