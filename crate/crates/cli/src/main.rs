use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use equidiff::io::{
    gen_graph, initial_field, load_config, rep_space, run, save_graph, selfcheck, step_equivariance, write_file,
    FieldInit, RepEntry, RunConfig, ScheduleMode, Suite,
};
use equidiff::manifold::{KernelSpec, Manifold};
use equidiff::message::{band_limit_sweep, expand_kernel, higher_order_message};
use equidiff::{Error, Result};

/// Equivariant heat-kernel diffusion and message passing on discretized
/// manifolds.
#[derive(Parser, Debug)]
#[command(name = "equidiff", version)]
struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Caps the worker threads used by compute phases.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for output files.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the configured schedule; writes the trace CSV and final-state JSON.
    Run,
    /// Run numerical self-checks and print a JSON report.
    Selfcheck {
        #[arg(default_value = "all")]
        suite: Suite,
    },
    /// Sample a graph with initialized features and write it as JSON.
    GenGraph(GenGraphArgs),
    /// Harmonic expansion of the base kernel, optionally with a band-limit
    /// sweep of the two message paths.
    ExpandKernel(ExpandArgs),
    /// Equivariance of one iteration of the configured schedule.
    CheckEquivariance {
        #[arg(long, default_value_t = 20)]
        transforms: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
}

#[derive(Args, Debug)]
struct GenGraphArgs {
    /// circle, sphere2, euclidean2 or euclidean3.
    #[arg(long, value_parser = parse_manifold)]
    manifold: Option<Manifold>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    cutoff: Option<f64>,
    /// Irrep multiplicities, e.g. `0:2,1:1`.
    #[arg(long, value_parser = parse_rep_entry, value_delimiter = ',')]
    rep: Option<Vec<RepEntry>>,
    /// zeros, random or test-pattern.
    #[arg(long)]
    init: Option<FieldInit>,
    /// Defaults to `graph.json` in the output directory.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExpandArgs {
    #[arg(long, value_parser = parse_manifold)]
    manifold: Option<Manifold>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    l_base: Option<u32>,
    /// Expansion degree; defaults to the base band limit, or the group band
    /// limit on Euclidean(3).
    #[arg(long)]
    l_max: Option<u32>,
    /// Radii of the Euclidean(3) radial table.
    #[arg(long, value_delimiter = ',')]
    radii: Option<Vec<f64>>,
    /// Compare the quadrature and closed-form message paths over rule band
    /// limits 0..=certified+2; needs a message schedule on Euclidean(3).
    #[arg(long)]
    sweep: bool,
}

fn parse_manifold(s: &str) -> std::result::Result<Manifold, String> {
    match s.to_ascii_lowercase().as_str() {
        "circle" | "s1" => Ok(Manifold::Circle),
        "sphere2" | "sphere" | "s2" => Ok(Manifold::Sphere2),
        "euclidean2" | "e2" | "r2" => Ok(Manifold::Euclidean { dim: 2 }),
        "euclidean3" | "e3" | "r3" => Ok(Manifold::Euclidean { dim: 3 }),
        _ => Err(format!("unknown manifold `{s}`; expected circle, sphere2, euclidean2 or euclidean3")),
    }
}

fn parse_rep_entry(s: &str) -> std::result::Result<RepEntry, String> {
    let (irrep, mult) = s.trim().split_once(':').ok_or_else(|| format!("expected `irrep:multiplicity`, got `{s}`"))?;
    Ok(RepEntry {
        irrep: irrep.trim().parse().map_err(|e| format!("irrep `{irrep}`: {e}"))?,
        multiplicity: mult.trim().parse().map_err(|e| format!("multiplicity `{mult}`: {e}"))?,
    })
}

/// Failure of a numerical check, as opposed to an error.
enum Outcome {
    Ok,
    CheckFailed,
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("values serialize"));
}

fn config(cli: &Cli) -> Result<Option<RunConfig>> {
    let Some(path) = &cli.config else { return Ok(None) };
    let mut cfg = load_config(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(Some(cfg))
}

fn require_config(cli: &Cli) -> Result<RunConfig> {
    config(cli)?.ok_or_else(|| Error::Validation { field: "--config".into(), message: "this command needs a run configuration".into() })
}

fn out_dir(cli: &Cli) -> &Path {
    cli.out_dir.as_deref().unwrap_or(Path::new("."))
}

fn missing(flag: &str) -> Error {
    Error::Validation { field: flag.into(), message: format!("{flag} is required without --config") }
}

fn cmd_run(cli: &Cli) -> Result<Outcome> {
    let cfg = require_config(cli)?;
    let dir = out_dir(cli);
    let summary = run(&cfg, dir)?;
    print_json(&json!({
        "trace": dir.join(&cfg.output.trace),
        "final_state": dir.join(&cfg.output.final_state),
        "steps": summary.steps,
        "energy": summary.energy.total,
    }));
    Ok(Outcome::Ok)
}

fn cmd_selfcheck(cli: &Cli, suite: Suite) -> Result<Outcome> {
    let report = selfcheck(suite)?;
    let text = report.to_json();
    if let Some(dir) = &cli.out_dir {
        write_file(&dir.join("selfcheck.json"), &text)?;
    }
    print!("{text}");
    for c in report.checks.iter().filter(|c| !c.pass) {
        log::error!("{} / {}: residual {:e} above {:e}", c.suite, c.name, c.residual, c.tol);
    }
    Ok(if report.pass { Outcome::Ok } else { Outcome::CheckFailed })
}

fn cmd_gen_graph(cli: &Cli, args: &GenGraphArgs) -> Result<Outcome> {
    let cfg = config(cli)?;
    let manifold = args.manifold.or(cfg.as_ref().map(|c| c.manifold)).ok_or_else(|| missing("--manifold"))?;
    let n = args.n.or(cfg.as_ref().map(|c| c.generate.n)).unwrap_or(16);
    let cutoff = args.cutoff.or(cfg.as_ref().map(|c| c.cutoff)).ok_or_else(|| missing("--cutoff"))?;
    let rep = args.rep.clone().or(cfg.as_ref().map(|c| c.rep.clone())).ok_or_else(|| missing("--rep"))?;
    let init = args.init.or(cfg.as_ref().map(|c| c.generate.init)).unwrap_or_default();
    let seed = cli.seed.or(cfg.as_ref().map(|c| c.seed)).unwrap_or(0);
    if let Manifold::Euclidean { dim } = manifold {
        Manifold::euclidean(dim)?;
    }
    let space = rep_space(manifold.structure_group(), &rep)?;
    let field = gen_graph(manifold, n, cutoff, seed, &space, init)?;
    let path = args.output.clone().unwrap_or_else(|| out_dir(cli).join("graph.json"));
    save_graph(&path, &field)?;
    print_json(&json!({ "graph": path, "nodes": field.len(), "edges": field.graph().edge_count() }));
    Ok(Outcome::Ok)
}

fn cmd_expand(cli: &Cli, args: &ExpandArgs) -> Result<Outcome> {
    let cfg = config(cli)?;
    let manifold = args.manifold.or(cfg.as_ref().map(|c| c.manifold)).ok_or_else(|| missing("--manifold"))?;
    let mut spec = cfg.as_ref().map(|c| c.kernel.clone()).unwrap_or(KernelSpec::new(1.0, 16, 2)?);
    if let Some(t) = args.t {
        spec.t = t;
    }
    if let Some(l) = args.l_base {
        spec.l_base = l;
    }
    let l_max = args.l_max.unwrap_or(if manifold.dim() == 3 { spec.l_grp } else { spec.l_base });
    let radii = args.radii.clone().unwrap_or_else(|| (1..=10).map(|k| 0.1 * k as f64).collect());
    let expansion = expand_kernel(&spec, &manifold, l_max, &radii)?;
    let tails: Vec<f64> = (0..=l_max).map(|l| expansion.tail_bound(l)).collect();
    let mut out = json!({
        "manifold": manifold,
        "kernel": spec,
        "l_max": l_max,
        "expansion": expansion,
        "tail_bound": tails,
    });

    if args.sweep {
        let cfg = require_config(cli)?;
        let ScheduleMode::Message(msg) = &cfg.schedule.mode else {
            return Err(Error::Validation {
                field: "schedule.mode".into(),
                message: "the band-limit sweep needs a message schedule".into(),
            });
        };
        let field = initial_field(&cfg)?;
        let certified = higher_order_message(&field, &cfg.kernel, msg)?.quadrature_order;
        let sweep = band_limit_sweep(&field, &cfg.kernel, msg, 0..=certified + 2)?;
        let mut csv = String::from("order,max_abs_diff\n");
        for (q, d) in &sweep {
            csv.push_str(&format!("{q},{d}\n"));
        }
        write_file(&out_dir(cli).join("sweep.csv"), &csv)?;
        out["sweep"] = json!({ "certified_order": certified, "orders": sweep });
    }
    print_json(&out);
    Ok(Outcome::Ok)
}

fn cmd_check(cli: &Cli, transforms: usize, tol: f64) -> Result<Outcome> {
    let cfg = require_config(cli)?;
    let field = initial_field(&cfg)?;
    let report = step_equivariance(&cfg, &field, transforms, tol)?;
    print_json(&json!({
        "transforms": transforms,
        "tol": report.tol,
        "max_deviation": report.max_deviation,
        "deviations": report.deviations,
        "pass": report.pass,
    }));
    Ok(if report.pass { Outcome::Ok } else { Outcome::CheckFailed })
}

fn dispatch(cli: &Cli) -> Result<Outcome> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Validation { field: "--threads".into(), message: "need at least one thread".into() });
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Validation { field: "--threads".into(), message: e.to_string() })?;
    }
    match &cli.command {
        Command::Run => cmd_run(cli),
        Command::Selfcheck { suite } => cmd_selfcheck(cli, *suite),
        Command::GenGraph(args) => cmd_gen_graph(cli, args),
        Command::ExpandKernel(args) => cmd_expand(cli, args),
        Command::CheckEquivariance { transforms, tol } => cmd_check(cli, *transforms, *tol),
    }
}

fn report_error(e: &Error) {
    let mut v = json!({ "error": e.kind(), "message": e.to_string() });
    match e {
        Error::Validation { field, .. } => v["field"] = json!(field),
        Error::Parse { source_name, line, column, .. } => {
            v["source"] = json!(source_name);
            v["line"] = json!(line);
            v["column"] = json!(column);
        }
        Error::Io { path, .. } => v["path"] = json!(path),
        _ => {}
    }
    eprintln!("{}", serde_json::to_string(&v).expect("values serialize"));
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Usage errors count as validation errors.
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(&cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::CheckFailed) => ExitCode::from(2),
        Err(e) => {
            report_error(&e);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
