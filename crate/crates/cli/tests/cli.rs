use std::path::PathBuf;
use std::process::{Command, Output};

fn corpus(name: &str) -> String {
    format!("{}/../core/corpus/{name}.rmcir", env!("CARGO_MANIFEST_DIR"))
}

fn rmcfence(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rmcfence")).args(args).env_remove("RMCFENCE_COSTS").output().unwrap()
}

fn scratch(name: &str, contents: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("rmcfence-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, contents).unwrap();
    p
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn overlap_on_armv7_has_one_dmb() {
    let o = rmcfence(&["compile", "--arch", "armv7", &corpus("overlap")]);
    assert_eq!(o.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let barriers = doc["plans"][0]["barriers"].as_array().unwrap();
    assert_eq!(barriers.len(), 1);
    assert_eq!(barriers[0]["kind"], "dmb");
    assert_eq!(doc["plans"][0]["solver_status"]["status"], "optimal");
}

#[test]
fn empty_plan_checks_on_x86() {
    let plan = scratch("empty.json", "{\"plans\": []}");
    let o = rmcfence(&["check", "--arch", "x86", &corpus("mp"), plan.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "mp_send: valid\nmp_recv: valid\n");
}

#[test]
fn empty_plan_fails_on_armv7() {
    let plan = scratch("empty7.json", "{\"plans\": []}");
    let o = rmcfence(&["check", "--arch", "armv7", &corpus("overlap"), plan.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(
        stdout(&o),
        "overlap: invalid\nUNCUT vo wa->wc via [entry.1,entry.2,entry.3]\nUNCUT vo wb->wd via [entry.2,entry.3,entry.4]\n"
    );
}

#[test]
fn compiled_plans_check() {
    for arch in ["armv7", "armv8", "power"] {
        let out = std::env::temp_dir().join(format!("rmcfence-ringbuf-{arch}-{}.json", std::process::id()));
        let o = rmcfence(&["compile", "--arch", arch, "--out", out.to_str().unwrap(), &corpus("ringbuf")]);
        assert_eq!(o.status.code(), Some(0));
        assert!(o.stdout.is_empty());
        let c = rmcfence(&["check", "--arch", arch, &corpus("ringbuf"), out.to_str().unwrap()]);
        assert_eq!(c.status.code(), Some(0), "{}", stdout(&c));
    }
}

#[test]
fn path_cap_exits_2() {
    let o = rmcfence(&["compile", "--arch", "armv7", "--max-paths", "1", &corpus("widget")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("more than 1 simple paths"));
}

#[test]
fn zero_budget_exits_3_with_a_valid_plan() {
    let out = std::env::temp_dir().join(format!("rmcfence-budget-{}.json", std::process::id()));
    let o = rmcfence(&["compile", "--arch", "armv7", "--budget-ms", "0", "--out", out.to_str().unwrap(), &corpus("overlap")]);
    assert_eq!(o.status.code(), Some(3));
    let c = rmcfence(&["check", "--arch", "armv7", &corpus("overlap"), out.to_str().unwrap()]);
    assert_eq!(c.status.code(), Some(0));
}

#[test]
fn bad_input_exits_1() {
    let bad = scratch("bad.rmcir", "func f {\n  block e:\n    %x = op id(%y)\n    ret\n}\n");
    let o = rmcfence(&["compile", "--arch", "armv7", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("undefined value"), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(rmcfence(&["compile", "--arch", "sparc", &corpus("mp")]).status.code(), Some(1));
    assert_eq!(rmcfence(&["compile", "--arch", "armv7", "/nonexistent.rmcir"]).status.code(), Some(1));
}

#[test]
fn costs_come_from_flag_or_environment() {
    let cheap = scratch("cheap.costs", "# modes are nearly free\nrelease = 1\nacquire = 1\n");
    let mode = |o: &Output| {
        let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        doc["plans"][0]["action_modes"].as_array().unwrap().len()
    };
    let base = rmcfence(&["compile", "--arch", "armv8", &corpus("overlap")]);
    assert_eq!(mode(&base), 2);
    let expensive = scratch("dear.costs", "release = 1000\n");
    let flag = rmcfence(&["compile", "--arch", "armv8", "--costs", expensive.to_str().unwrap(), &corpus("overlap")]);
    assert_eq!(mode(&flag), 0);
    let env = Command::new(env!("CARGO_BIN_EXE_rmcfence"))
        .args(["compile", "--arch", "armv8", &corpus("overlap")])
        .env("RMCFENCE_COSTS", expensive.to_str().unwrap())
        .output()
        .unwrap();
    assert_eq!(mode(&env), 0);
    // The flag wins over the environment.
    let both = Command::new(env!("CARGO_BIN_EXE_rmcfence"))
        .args(["compile", "--arch", "armv8", "--costs", cheap.to_str().unwrap(), &corpus("overlap")])
        .env("RMCFENCE_COSTS", expensive.to_str().unwrap())
        .output()
        .unwrap();
    assert_eq!(mode(&both), 2);
    let broken = scratch("broken.costs", "dmb = -3\n");
    let o = rmcfence(&["compile", "--arch", "armv7", "--costs", broken.to_str().unwrap(), &corpus("overlap")]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn dependency_flags_never_lower_cost() {
    let cost = |extra: &[&str]| {
        let mut args = vec!["compile", "--arch", "armv7"];
        args.extend_from_slice(extra);
        let path = corpus("widget");
        args.push(&path);
        let o = rmcfence(&args);
        let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        doc["plans"].as_array().unwrap().iter().map(|p| p["total_cost"].as_u64().unwrap()).sum::<u64>()
    };
    let base = cost(&[]);
    assert!(cost(&["--no-data-deps"]) > base);
    assert!(cost(&["--no-ctrl-deps"]) >= base);
}

#[test]
fn annotated_output_marks_realization_points() {
    let o = rmcfence(&["compile", "--arch", "armv7", "--format", "annotated", &corpus("widget")]);
    let text = stdout(&o);
    assert_eq!(text.matches(";; USE-DATA lookup->r").count(), 2);
    assert_eq!(text.matches(";; BARRIER dmb").count(), 1);
}

#[test]
fn explain_lists_constraints_and_the_problem() {
    let o = rmcfence(&["explain", "--arch", "armv7", "--dump-problem", &corpus("sb_push")]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("pu   wx           ry           -            derived [vo wx->p, xo p->ry]"), "{text}");
    assert!(text.contains("objective:"));
    let o = rmcfence(&["explain", "--arch", "armv7", &corpus("widget")]);
    assert!(stdout(&o).contains("data=yes"));
}

#[test]
fn oracle_agrees_on_small_problems() {
    let o = rmcfence(&["oracle", "--arch", "power", &corpus("mp")]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).matches("agree").count(), 2);
}
