//! One line per acceptance criterion. Runs without the test harness so
//! the lines always show; exits nonzero if any criterion fails.

use std::process::Command;
use std::time::{Duration, Instant};

use rmcfence_core::arch::{builtin_profile, default_costs, load_costs, ARCH_NAMES};
use rmcfence_core::compile::{compile, prepare, CompileOptions, Compiled, Prepared};
use rmcfence_core::corpus;
use rmcfence_core::encode::EncodeOptions;
use rmcfence_core::graph::{dominators, simple_paths};
use rmcfence_core::ir::{BlockId, EdgeKind, Function, Terminator};
use rmcfence_core::solver::solve_min;
use rmcfence_core::verify::{brute_min, check_prepared, greedy, greedy_in_order, random_problem};

type Outcome = Result<String, String>;

/// Name, time limit and check.
type Criterion = (&'static str, Option<Duration>, fn() -> Outcome);

fn func(file: &str, name: &str) -> Function {
    corpus::functions(file).into_iter().find(|f| f.name == name).unwrap()
}

fn run(f: &Function, arch: &str, encode: EncodeOptions) -> Result<Compiled, String> {
    let p = builtin_profile(arch).unwrap();
    let opts = CompileOptions { encode, ..Default::default() };
    compile(f, &p, &default_costs(&p), &opts).map_err(|e| format!("{}: {e}", f.name))
}

fn default_run(file: &str, name: &str, arch: &str) -> Result<Compiled, String> {
    run(&func(file, name), arch, EncodeOptions::default())
}

fn block(c: &Compiled, name: &str) -> BlockId {
    c.prepared.cfg.func.block_by_name(name).unwrap()
}

fn action_block(c: &Compiled, action: &str) -> BlockId {
    let cfg = &c.prepared.cfg;
    cfg.block_of(cfg.func.action_by_name(action).unwrap())
}

fn ensure(ok: bool, why: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(why())
    }
}

fn overlap() -> Outcome {
    let c = default_run("overlap", "overlap", "armv7")?;
    let b = &c.plan.barriers;
    ensure(b.len() == 1 && b[0].kind == "dmb", || format!("barriers {b:?}"))?;
    let cfg = &c.prepared.cfg;
    let (wb, wc) = (action_block(&c, "wb"), action_block(&c, "wc"));
    let e = cfg.find_edge(block(&c, &b[0].source), block(&c, &b[0].dest)).ok_or("barrier off the graph")?;
    let between = simple_paths(cfg, wb, wc, None, 16).unwrap();
    ensure(between.iter().all(|p| p.edges.contains(&e)), || "barrier not between wb and wc".into())?;
    let mut rev = c.prepared.edges.clone();
    rev.reverse();
    let g = greedy_in_order(&c.prepared, &rev);
    ensure(c.plan.total_cost < g.total_cost, || format!("solver {} vs reversed greedy {}", c.plan.total_cost, g.total_cost))?;
    Ok(format!("dmb on {}->{}, cost {} < reversed greedy {}", b[0].source, b[0].dest, c.plan.total_cost, g.total_cost))
}

fn conditional() -> Outcome {
    let c = default_run("cond", "cond", "armv7")?;
    let cfg = &c.prepared.cfg;
    let b = &c.plan.barriers;
    ensure(b.len() == 1, || format!("barriers {b:?}"))?;
    let (src, dst) = (block(&c, &b[0].source), block(&c, &b[0].dest));
    let branch = (0..cfg.num_blocks())
        .map(|i| BlockId(i as u32))
        .find(|x| matches!(cfg.func.block(*x).term, Terminator::Br { .. }))
        .ok_or("no branch")?;
    let Terminator::Br { then_to, .. } = cfg.func.block(branch).term else { unreachable!() };
    let dom = dominators(cfg);
    ensure(dom.dominates(branch, src) && dom.dominates(then_to, dst), || format!("{}->{} is outside the arm", b[0].source, b[0].dest))?;
    Ok(format!("dmb on {}->{} inside the arm of {}", b[0].source, b[0].dest, cfg.block_name(branch)))
}

fn loop_example() -> Outcome {
    let c = default_run("loop", "loop", "armv7")?;
    let cfg = &c.prepared.cfg;
    let b = &c.plan.barriers;
    ensure(b.len() == 1, || format!("barriers {b:?}"))?;
    let e = cfg.find_edge(block(&c, &b[0].source), block(&c, &b[0].dest)).unwrap();
    let header = cfg
        .edge_ids()
        .find(|x| c.prepared.loops.loop_closing[x.index()] && !cfg.edge(*x).pseudo)
        .map(|x| cfg.edge(x).dst)
        .ok_or("no loop")?;
    let depth = c.prepared.loops.depth[e.index()];
    let dom = dominators(cfg);
    let src = cfg.edge(e).src;
    ensure(depth == 0 && src != header && dom.dominates(src, header), || {
        format!("{}->{} has depth {depth}", b[0].source, b[0].dest)
    })?;
    Ok(format!("dmb on {}->{} at depth 0 before header {}", b[0].source, b[0].dest, cfg.block_name(header)))
}

fn x86() -> Outcome {
    let mut empty = 0;
    for (file, f) in corpus::all() {
        let c = run(&f, "x86", EncodeOptions::default())?;
        let has_pu = c.prepared.edges.iter().any(|e| e.kind == EdgeKind::Pu);
        if !has_pu {
            ensure(c.plan.is_empty() && c.plan.total_cost == 0, || format!("{file}/{} not free", f.name))?;
            empty += 1;
        }
    }
    let mut fences = 0;
    for f in corpus::functions("sb_push") {
        let c = run(&f, "x86", EncodeOptions::default())?;
        ensure(!c.plan.barriers.is_empty(), || format!("{} has no fence", f.name))?;
        ensure(c.plan.barriers.iter().all(|b| b.kind == "mfence"), || format!("{}: {:?}", f.name, c.plan.barriers))?;
        ensure(c.plan.ctrl_uses.is_empty() && c.plan.data_uses.is_empty() && c.plan.action_modes.is_empty(), || {
            format!("{}: non-barrier entries", f.name)
        })?;
        fences += c.plan.barriers.len();
    }
    Ok(format!("{empty} functions free, sb_push uses {fences} mfence(s)"))
}

fn widget() -> Outcome {
    let mut scoped = 0;
    for arch in ["armv7", "power"] {
        let c = default_run("widget", "use_widget", arch)?;
        ensure(c.plan.barriers.is_empty() && c.plan.data_uses.len() == 2, || format!("{arch}: {:?}", c.plan))?;
        if arch == "armv7" {
            scoped = c.plan.total_cost;
        }
    }
    let u = default_run("widget_unscoped", "use_widget", "armv7")?;
    ensure(u.plan.total_cost > scoped, || format!("unscoped {} vs scoped {scoped}", u.plan.total_cost))?;
    Ok(format!("no barriers, 2 data uses; unscoped cost {} > scoped {scoped}", u.plan.total_cost))
}

fn self_dependency() -> Outcome {
    let f = func("selfdep", "selfdep");
    for arch in ARCH_NAMES {
        for synth in [false, true] {
            let c = run(&f, arch, EncodeOptions { synth_deps: synth, ..Default::default() })?;
            let v = check_prepared(&c.prepared, &c.plan).map_err(|e| e.to_string())?;
            ensure(v.valid, || format!("{arch}: {:?}", v.violations))?;
        }
    }
    let loose = run(&f, "armv7", EncodeOptions { self_order: false, ..Default::default() })?;
    ensure(!loose.plan.ctrl_uses.is_empty(), || "without the side condition no control use is chosen".into())?;
    let v = check_prepared(&loose.prepared, &loose.plan).map_err(|e| e.to_string())?;
    ensure(!v.valid, || "plan without the side condition was accepted".into())?;
    Ok(format!(
        "valid with the side condition; without it ({} ctrl use, cost {}) check_plan reports {}",
        loose.plan.ctrl_uses.len(),
        loose.plan.total_cost,
        v.violations.first().cloned().unwrap_or_default()
    ))
}

fn armv8() -> Outcome {
    let profile = builtin_profile("armv8").unwrap();
    let mut seen = Vec::new();
    for config in ["", "acquire = 5\nrelease = 5\n", "acquire = 200\nrelease = 200\n"] {
        let (costs, _) = load_costs(&profile, Some(config)).map_err(|e| e.to_string())?;
        for (name, allowed, mode) in [("mp_recv", ["dmb_ld"].as_slice(), "acquire"), ("mp_send", ["dmb_ld", "dmb_ldst"].as_slice(), "release")] {
            let c = compile(&func("mp", name), &profile, &costs, &CompileOptions::default()).map_err(|e| e.to_string())?;
            ensure(!c.plan.is_empty(), || format!("{name}: empty plan"))?;
            ensure(c.plan.barriers.iter().all(|b| allowed.contains(&b.kind.as_str())), || format!("{name}: {:?}", c.plan.barriers))?;
            ensure(c.plan.action_modes.iter().all(|m| m.mode == mode), || format!("{name}: {:?}", c.plan.action_modes))?;
            let used: Vec<String> = c.plan.barriers.iter().map(|b| b.kind.clone()).chain(c.plan.action_modes.iter().map(|m| m.mode.clone())).collect();
            seen.push(format!("{name}={}", used.join("+")));
        }
    }
    seen.dedup();
    Ok(seen.join(" "))
}

fn oracle() -> Outcome {
    let mut corpus_checked = 0;
    for (file, f) in corpus::all() {
        for arch in ARCH_NAMES {
            let c = run(&f, arch, EncodeOptions::default())?;
            if let Ok(b) = brute_min(&c.problem, 16) {
                ensure(b == c.solution.cost, || format!("{file}/{} {arch}: brute {b} solver {}", f.name, c.solution.cost))?;
                corpus_checked += 1;
            }
        }
    }
    for seed in 0..200 {
        let p = random_problem(seed, 14);
        let s = solve_min(&p, None).map_err(|e| format!("seed {seed}: {e}"))?;
        let b = brute_min(&p, 16).unwrap();
        ensure(b == s.cost, || format!("seed {seed}: brute {b} solver {}", s.cost))?;
    }
    Ok(format!("{corpus_checked} corpus problems and 200 random problems agree"))
}

fn soundness() -> Outcome {
    let (mut plans, mut mutants) = (0, 0);
    for (file, f) in corpus::all() {
        for arch in ARCH_NAMES {
            let at = format!("{file}/{} {arch}", f.name);
            let c = run(&f, arch, EncodeOptions::default())?;
            let prep: &Prepared = &c.prepared;
            let v = check_prepared(prep, &c.plan).map_err(|e| e.to_string())?;
            ensure(v.valid, || format!("{at}: solver plan {:?}", v.violations))?;
            let g = greedy(prep);
            ensure(check_prepared(prep, &g).map_err(|e| e.to_string())?.valid, || format!("{at}: greedy plan"))?;
            plans += 2;
            for m in c.plan.without_each() {
                ensure(!check_prepared(prep, &m).map_err(|e| e.to_string())?.valid, || format!("{at}: mutant {m:?} valid"))?;
                mutants += 1;
            }
        }
    }
    Ok(format!("{plans} plans valid, {mutants} single-deletion mutants invalid"))
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_rmcfence");
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/corpus");
    let mut runs = 0;
    for (file, _) in corpus::FILES {
        for arch in ARCH_NAMES {
            let path = format!("{dir}/{file}.rmcir");
            let once = || Command::new(bin).args(["compile", "--arch", arch, &path]).env_remove("RMCFENCE_COSTS").output();
            let (a, b) = (once().map_err(|e| e.to_string())?, once().map_err(|e| e.to_string())?);
            ensure(a.status.success(), || format!("{file} {arch}: {}", String::from_utf8_lossy(&a.stderr)))?;
            ensure(a.stdout == b.stdout, || format!("{file} {arch}: outputs differ"))?;
            runs += 1;
        }
    }
    Ok(format!("{runs} file/arch pairs byte-identical across two runs"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("overlap example", Some(Duration::from_secs(1)), overlap),
        ("conditional example", Some(Duration::from_secs(1)), conditional),
        ("loop example", Some(Duration::from_secs(1)), loop_example),
        ("x86 comes for free", None, x86),
        ("widget data dependencies", None, widget),
        ("self-dependency side condition", None, self_dependency),
        ("armv8 lighter barriers", None, armv8),
        ("oracle equivalence", Some(Duration::from_secs(60)), oracle),
        ("soundness and mutation", Some(Duration::from_secs(30)), soundness),
        ("determinism", None, determinism),
    ];
    // Warm the prepared pipeline so the first timed criterion does not pay
    // for lazy initialization.
    let _ = prepare(&func("overlap", "overlap"), &builtin_profile("armv7").unwrap(), &default_costs(&builtin_profile("armv7").unwrap()), &CompileOptions::default());
    let mut failed = 0;
    for (i, (name, limit, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let took = start.elapsed();
        let outcome = match (outcome, limit) {
            (Ok(_), Some(l)) if took > *l => Err(format!("took {took:?}, limit {l:?}")),
            (o, _) => o,
        };
        let limit = limit.map(|l| format!(" limit {l:?}")).unwrap_or_default();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} ({} ms{limit})", i + 1, took.as_millis()),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why} ({} ms{limit})", i + 1, took.as_millis());
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
