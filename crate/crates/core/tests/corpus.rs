use rmcfence_core::arch::{builtin_profile, default_costs, ARCH_NAMES};
use rmcfence_core::compile::{compile, CompileOptions, Compiled};
use rmcfence_core::corpus;
use rmcfence_core::emit::{to_json, PlanDocument};
use rmcfence_core::encode::EncodeOptions;
use rmcfence_core::ir::Function;
use rmcfence_core::verify::{all_barriers, brute_min, check_prepared, greedy, plan_cost};

fn run(f: &Function, arch: &str, encode: EncodeOptions) -> Compiled {
    let p = builtin_profile(arch).unwrap();
    let opts = CompileOptions { encode, ..Default::default() };
    compile(f, &p, &default_costs(&p), &opts).unwrap()
}

#[test]
fn solver_and_greedy_plans_verify() {
    for (file, f) in corpus::all() {
        for arch in ARCH_NAMES {
            let c = run(&f, arch, EncodeOptions::default());
            let at = format!("{file}/{} on {arch}", f.name);
            let v = check_prepared(&c.prepared, &c.plan).unwrap();
            assert!(v.valid, "{at}: {:?}", v.violations);
            assert_eq!(plan_cost(&c.prepared, &c.plan).unwrap(), c.plan.total_cost, "{at}");
            let g = greedy(&c.prepared);
            assert!(check_prepared(&c.prepared, &g).unwrap().valid, "{at}: greedy");
            assert!(g.total_cost >= c.plan.total_cost, "{at}: greedy beat the solver");
            assert!(all_barriers(&c.prepared).total_cost >= c.plan.total_cost, "{at}");
        }
    }
}

#[test]
fn dropping_any_element_of_an_optimal_plan_breaks_it() {
    for (file, f) in corpus::all() {
        for arch in ARCH_NAMES {
            let c = run(&f, arch, EncodeOptions::default());
            for m in c.plan.without_each() {
                let v = check_prepared(&c.prepared, &m).unwrap();
                assert!(!v.valid, "{file}/{} on {arch}: {m:?}", f.name);
            }
        }
    }
}

#[test]
fn small_problems_match_exhaustive_search() {
    let mut checked = 0;
    for (file, f) in corpus::all() {
        for arch in ARCH_NAMES {
            let c = run(&f, arch, EncodeOptions::default());
            if let Ok(best) = brute_min(&c.problem, 16) {
                assert_eq!(best, c.solution.cost, "{file}/{} on {arch}", f.name);
                checked += 1;
            }
        }
    }
    assert!(checked > 40);
}

#[test]
fn fewer_options_never_cost_less() {
    let off = EncodeOptions { data_deps: false, ctrl_deps: false, ..Default::default() };
    let synth = EncodeOptions { synth_deps: true, ..Default::default() };
    for (file, f) in corpus::all() {
        for arch in ARCH_NAMES {
            let base = run(&f, arch, EncodeOptions::default()).plan.total_cost;
            let at = format!("{file}/{} on {arch}", f.name);
            assert!(run(&f, arch, off.clone()).plan.total_cost >= base, "{at}");
            let s = run(&f, arch, synth.clone());
            assert!(s.plan.total_cost <= base, "{at}");
            assert!(check_prepared(&s.prepared, &s.plan).unwrap().valid, "{at}: synth");
        }
    }
}

#[test]
fn plans_are_deterministic() {
    for (_, f) in corpus::all() {
        for arch in ARCH_NAMES {
            let a = to_json(&PlanDocument { plans: vec![run(&f, arch, EncodeOptions::default()).plan] });
            let b = to_json(&PlanDocument { plans: vec![run(&f, arch, EncodeOptions::default()).plan] });
            assert_eq!(a, b);
        }
    }
}
