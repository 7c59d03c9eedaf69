use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::builder::PossibleValuesParser;
use clap::{Args, Parser, Subcommand, ValueEnum};

use rmcfence_core::arch::{builtin_profile, load_costs, ArchProfile, CostTable, ARCH_NAMES};
use rmcfence_core::compile::{compile, prepare, CompileError, CompileOptions, Prepared};
use rmcfence_core::constraints::{ConstraintEdge, Origin, Side};
use rmcfence_core::deps::Deps;
use rmcfence_core::emit::{annotate, from_json, to_json, PlacementPlan, PlanDocument};
use rmcfence_core::encode::{mode_name, EncodeOptions};
use rmcfence_core::graph::{simple_paths, DEFAULT_MAX_PATHS};
use rmcfence_core::ir::{parse, validate, BlockId, EdgeKind, Function, NormalizedCfg};
use rmcfence_core::solver::{solve_min, SolveStatus};
use rmcfence_core::verify::{brute_min, check_prepared, greedy, DEFAULT_BRUTE_CAP};

const COSTS_ENV: &str = "RMCFENCE_COSTS";

#[derive(Parser)]
#[command(name = "rmcfence", version, about = "Place barriers and dependencies for RMC constraint edges")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a minimum-cost placement for every function in INPUT.
    Compile(CompileArgs),
    /// Check a plan document against INPUT.
    Check(CheckArgs),
    /// Show constraints, paths, dependency facts and the problem.
    Explain(ExplainArgs),
    /// Compare the solver against exhaustive search.
    Oracle(OracleArgs),
}

#[derive(Args, Clone)]
struct Setup {
    #[arg(long, value_parser = PossibleValuesParser::new(ARCH_NAMES))]
    arch: String,
    /// Cost overrides, `key = integer` per line. Defaults to $RMCFENCE_COSTS.
    #[arg(long)]
    costs: Option<PathBuf>,
    #[arg(long)]
    no_data_deps: bool,
    #[arg(long)]
    no_ctrl_deps: bool,
    /// Allow adding bogus branches on read values.
    #[arg(long)]
    synth_deps: bool,
    #[arg(long, default_value_t = DEFAULT_MAX_PATHS)]
    max_paths: usize,
    #[arg(long)]
    loop_factor: Option<u64>,
}

#[derive(Copy, Clone, ValueEnum)]
enum Format {
    Json,
    Annotated,
}

#[derive(Args)]
struct CompileArgs {
    #[command(flatten)]
    setup: Setup,
    #[arg(long)]
    budget_ms: Option<u64>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
    input: PathBuf,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long, value_parser = PossibleValuesParser::new(ARCH_NAMES))]
    arch: String,
    input: PathBuf,
    plan: PathBuf,
}

#[derive(Args)]
struct ExplainArgs {
    #[command(flatten)]
    setup: Setup,
    #[arg(long)]
    dump_problem: bool,
    input: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    setup: Setup,
    #[arg(long, default_value_t = DEFAULT_BRUTE_CAP)]
    max_vars: usize,
    input: PathBuf,
}

/// Failure with its exit code.
#[derive(Debug)]
enum Fail {
    Input(String),
    Paths(String),
    Budget,
    PlanInvalid,
}

impl Fail {
    fn code(&self) -> u8 {
        match self {
            Fail::Input(_) => 1,
            Fail::Paths(_) => 2,
            Fail::Budget => 3,
            Fail::PlanInvalid => 4,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Compile(a) => run_compile(a),
        Command::Check(a) => run_check(a),
        Command::Explain(a) => run_explain(a),
        Command::Oracle(a) => run_oracle(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Fail::Input(m) | Fail::Paths(m) => eprintln!("error: {m}"),
                Fail::Budget => eprintln!("error: search budget exhausted; the plan is valid but may not be minimal"),
                Fail::PlanInvalid => {}
            }
            ExitCode::from(f.code())
        }
    }
}

fn read(path: &Path) -> Result<String, Fail> {
    std::fs::read_to_string(path).map_err(|e| Fail::Input(format!("{}: {e}", path.display())))
}

fn load_functions(path: &Path) -> Result<Vec<Function>, Fail> {
    let text = read(path)?;
    let module = parse(&text).map_err(|ds| diag_fail(path, &ds))?;
    for f in &module.functions {
        let ds = validate(f);
        if !ds.is_empty() {
            return Err(diag_fail(path, &ds));
        }
    }
    Ok(module.functions)
}

fn diag_fail(path: &Path, ds: &[rmcfence_core::ir::Diagnostic]) -> Fail {
    let lines: Vec<String> = ds.iter().map(|d| format!("{}:{d}", path.display())).collect();
    Fail::Input(lines.join("\n"))
}

fn profile_and_costs(setup: &Setup) -> Result<(ArchProfile, CostTable), Fail> {
    let profile = builtin_profile(&setup.arch).map_err(|e| Fail::Input(e.to_string()))?;
    let file = match &setup.costs {
        Some(p) => Some(p.clone()),
        None => std::env::var_os(COSTS_ENV).filter(|v| !v.is_empty()).map(PathBuf::from),
    };
    let text = file.as_deref().map(read).transpose()?;
    let (costs, warnings) = load_costs(&profile, text.as_deref()).map_err(|e| {
        let where_ = file.as_deref().map(|p| p.display().to_string()).unwrap_or_default();
        Fail::Input(format!("{where_}: {e}"))
    })?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    Ok((profile, costs))
}

fn options(setup: &Setup, budget_ms: Option<u64>) -> CompileOptions {
    CompileOptions {
        encode: EncodeOptions {
            data_deps: !setup.no_data_deps,
            ctrl_deps: !setup.no_ctrl_deps,
            synth_deps: setup.synth_deps,
            max_paths: setup.max_paths,
            ..Default::default()
        },
        loop_factor: setup.loop_factor,
        budget: budget_ms.map(Duration::from_millis),
        ..Default::default()
    }
}

fn compile_fail(f: &Function, e: CompileError) -> Fail {
    match e {
        CompileError::Invalid(ds) => {
            let lines: Vec<String> = ds.iter().map(|d| format!("in `{}`: {d}", f.name)).collect();
            Fail::Input(lines.join("\n"))
        }
        CompileError::PathExplosion(p) => Fail::Paths(format!("in `{}`: {p}", f.name)),
        CompileError::Internal(e) => Fail::Input(format!("in `{}`: {e}", f.name)),
    }
}

fn write_out(out: Option<&Path>, text: &str) -> Result<(), Fail> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Fail::Input(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_compile(a: &CompileArgs) -> Result<(), Fail> {
    let funcs = load_functions(&a.input)?;
    let (profile, costs) = profile_and_costs(&a.setup)?;
    let opts = options(&a.setup, a.budget_ms);
    let mut plans = Vec::new();
    let mut annotated = Vec::new();
    let mut over_budget = false;
    for f in &funcs {
        let c = compile(f, &profile, &costs, &opts).map_err(|e| compile_fail(f, e))?;
        over_budget |= c.solution.status == SolveStatus::BudgetExceeded;
        annotated.push(annotate(f, &c.prepared.cfg, &c.plan));
        plans.push(c.plan);
    }
    let text = match a.format {
        Format::Json => to_json(&PlanDocument { plans }),
        Format::Annotated => annotated.join("\n"),
    };
    write_out(a.out.as_deref(), &text)?;
    if over_budget {
        return Err(Fail::Budget);
    }
    Ok(())
}

fn run_check(a: &CheckArgs) -> Result<(), Fail> {
    let funcs = load_functions(&a.input)?;
    let text = read(&a.plan)?;
    let doc = from_json(&text).map_err(|e| Fail::Input(format!("{}: {e}", a.plan.display())))?;
    for p in &doc.plans {
        if !funcs.iter().any(|f| f.name == p.function) {
            return Err(Fail::Input(format!("plan for unknown function `{}`", p.function)));
        }
    }
    let profile = builtin_profile(&a.arch).map_err(|e| Fail::Input(e.to_string()))?;
    let costs = rmcfence_core::arch::default_costs(&profile);
    let mut all_valid = true;
    for f in &funcs {
        let prep = prepare(f, &profile, &costs, &CompileOptions::default()).map_err(|e| compile_fail(f, e))?;
        // A function without a plan gets the empty plan.
        let plan = doc
            .plans
            .iter()
            .find(|p| p.function == f.name)
            .cloned()
            .unwrap_or_else(|| PlacementPlan::empty(&f.name, profile.name));
        let v = check_prepared(&prep, &plan).map_err(|e| Fail::Input(format!("in `{}`: {e}", f.name)))?;
        if v.valid {
            println!("{}: valid", f.name);
        } else {
            all_valid = false;
            println!("{}: invalid", f.name);
            for line in &v.violations {
                println!("{line}");
            }
        }
    }
    if all_valid {
        Ok(())
    } else {
        Err(Fail::PlanInvalid)
    }
}

fn bind_name(cfg: &NormalizedCfg, b: Option<BlockId>) -> String {
    let Some(b) = b else { return "-".to_string() };
    let names: Vec<&str> = cfg
        .func
        .binds
        .iter()
        .enumerate()
        .filter(|(i, _)| cfg.bind_block[*i] == b)
        .map(|(_, n)| n.as_str())
        .collect();
    format!("{}@{}", names.join(","), cfg.block_name(b))
}

fn origin_text(cfg: &NormalizedCfg, o: &Origin) -> String {
    match o {
        Origin::Declared(i) => format!("declared #{i}"),
        Origin::Derived(chain) => {
            let f = &cfg.func;
            let steps: Vec<String> =
                chain.iter().map(|l| format!("{} {}->{}", l.kind, f.action_name(l.src), f.action_name(l.dst))).collect();
            format!("derived [{}]", steps.join(", "))
        }
    }
}

fn explain_function(prep: &Prepared, opts: &CompileOptions, dump: bool) -> Result<String, Fail> {
    let cfg = &prep.cfg;
    let f = &cfg.func;
    let mut out = String::new();
    let _ = writeln!(out, "function {} ({})", f.name, prep.profile.name);
    let _ = writeln!(out, "constraints:");
    let _ = writeln!(out, "  {:<4} {:<12} {:<12} {:<12} origin", "kind", "source", "dest", "binding");
    for e in &prep.edges {
        let _ = writeln!(
            out,
            "  {:<4} {:<12} {:<12} {:<12} {}",
            e.kind.to_string(),
            f.action_name(e.src),
            f.action_name(e.dst),
            bind_name(cfg, e.binding),
            origin_text(cfg, &e.origin)
        );
    }
    for b in &prep.bounds {
        let a = f.action_name(b.action);
        let (src, dst) = match b.side {
            Side::Pre => ("pre".to_string(), a),
            Side::Post => (a, "post".to_string()),
        };
        let _ = writeln!(out, "  {:<4} {:<12} {:<12} {:<12} {}", b.kind.to_string(), src, dst, "-", origin_text(cfg, &b.origin));
    }
    if prep.edges.iter().any(|e| matches!(e.origin, Origin::Derived(_))) {
        let _ = writeln!(out, "  note: derived edges join strengths through noops and pushes");
    }

    let _ = writeln!(out, "paths:");
    let mut deps = Deps::new(cfg, opts.encode.synth_deps);
    let mut show_edge = |out: &mut String, e: &ConstraintEdge, label: &str| -> Result<(), Fail> {
        let (sb, tb) = (cfg.block_of(e.src), cfg.block_of(e.dst));
        let paths = simple_paths(cfg, sb, tb, e.binding, opts.encode.max_paths)
            .map_err(|p| Fail::Paths(format!("in `{}`: {p}", f.name)))?;
        let _ = writeln!(out, "  {label}: {} path(s)", paths.len());
        for p in &paths {
            let blocks: Vec<&str> = p.blocks.iter().map(|b| cfg.block_name(*b)).collect();
            let mut facts = Vec::new();
            if e.kind == EdgeKind::Xo {
                let data = opts.encode.data_deps && deps.can_data(e.binding, e.src, e.dst, p);
                facts.push(format!("data={}", if data { "yes" } else { "no" }));
                if f.action(e.dst).is_write() && opts.encode.ctrl_deps {
                    let ctrl: Vec<String> = p
                        .edges
                        .iter()
                        .filter_map(|pe| {
                            deps.ctrl_mode(e.src, *pe).map(|m| {
                                let ce = cfg.edge(*pe);
                                format!("{}->{} {}", cfg.block_name(ce.src), cfg.block_name(ce.dst), mode_name(m))
                            })
                        })
                        .collect();
                    facts.push(format!("ctrl=[{}]", ctrl.join(", ")));
                }
            }
            let _ = writeln!(out, "    [{}] {}", blocks.join(","), facts.join(" "));
        }
        Ok(())
    };
    for e in &prep.edges {
        let label = format!("{} {}->{}", e.kind, f.action_name(e.src), f.action_name(e.dst));
        show_edge(&mut out, e, &label)?;
    }
    // Cycles behind the self-ordering side conditions.
    let mut selfs: Vec<(Option<BlockId>, rmcfence_core::ir::ActionId)> =
        prep.edges.iter().filter(|e| e.kind == EdgeKind::Xo).map(|e| (e.binding, e.src)).collect();
    selfs.sort();
    selfs.dedup();
    for (binding, s) in selfs {
        let e = ConstraintEdge { kind: EdgeKind::Xo, src: s, dst: s, binding, origin: Origin::Derived(Vec::new()) };
        let label = format!("self {}->{} (binding {})", f.action_name(s), f.action_name(s), bind_name(cfg, binding));
        show_edge(&mut out, &e, &label)?;
    }
    let _ = writeln!(out, "notes:");
    let _ = writeln!(out, "  a control use of s needs ctrl(s,s) or xcut(s,s); a data use needs xcut(s,s)");
    let _ = writeln!(out, "  xcut(s,s) may rest on data uses that need xcut(s,s) itself (greatest fixpoint)");
    let _ = writeln!(out, "  ctrl(s,s) counts only control uses on every cycle through s");
    if dump {
        let problem = prep.problem(&opts.encode).map_err(|p| Fail::Paths(format!("in `{}`: {p}", f.name)))?;
        let _ = writeln!(out, "problem:");
        out.push_str(&problem.dump());
    }
    Ok(out)
}

fn run_explain(a: &ExplainArgs) -> Result<(), Fail> {
    let funcs = load_functions(&a.input)?;
    let (profile, costs) = profile_and_costs(&a.setup)?;
    let opts = options(&a.setup, None);
    let mut parts = Vec::new();
    for f in &funcs {
        let prep = prepare(f, &profile, &costs, &opts).map_err(|e| compile_fail(f, e))?;
        parts.push(explain_function(&prep, &opts, a.dump_problem)?);
    }
    print!("{}", parts.join("\n"));
    Ok(())
}

fn run_oracle(a: &OracleArgs) -> Result<(), Fail> {
    let funcs = load_functions(&a.input)?;
    let (profile, costs) = profile_and_costs(&a.setup)?;
    let opts = options(&a.setup, None);
    let mut ok = true;
    for f in &funcs {
        let prep = prepare(f, &profile, &costs, &opts).map_err(|e| compile_fail(f, e))?;
        let problem = prep.problem(&opts.encode).map_err(|p| Fail::Paths(format!("in `{}`: {p}", f.name)))?;
        let sol = solve_min(&problem, None).map_err(|e| Fail::Input(format!("in `{}`: {e}", f.name)))?;
        let g = greedy(&prep);
        let brute = match brute_min(&problem, a.max_vars) {
            Ok(b) => {
                ok &= b == sol.cost;
                format!("brute={b} {}", if b == sol.cost { "agree" } else { "DISAGREE" })
            }
            Err(e) => format!("brute=skipped ({e})"),
        };
        ok &= g.total_cost >= sol.cost;
        println!("{}: vars={} solver={} greedy={} {brute}", f.name, problem.vars.len(), sol.cost, g.total_cost);
    }
    if ok {
        Ok(())
    } else {
        Err(Fail::PlanInvalid)
    }
}
