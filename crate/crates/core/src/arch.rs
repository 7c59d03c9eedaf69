//! Architecture profiles and cost tables.

use std::collections::BTreeMap;
use std::fmt;

/// What a barrier orders. Each level includes the ones below it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Strength {
    /// Prior reads before all later actions.
    ExecFromRead,
    /// All prior actions execute before all later ones.
    ExecAny,
    /// Prior writes visible before later actions.
    Vis,
    /// Full push: globally visible on execution.
    Push,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BarrierKind {
    pub name: &'static str,
    pub strength: Strength,
}

impl BarrierKind {
    pub fn cuts_push(&self) -> bool {
        self.strength >= Strength::Push
    }

    pub fn cuts_vis(&self) -> bool {
        self.strength >= Strength::Vis
    }

    pub fn cuts_exec_any(&self) -> bool {
        self.strength >= Strength::ExecAny
    }

    pub fn cuts_exec_from_read(&self) -> bool {
        self.strength >= Strength::ExecFromRead
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ActionMode {
    Acquire,
    Release,
}

impl ActionMode {
    pub fn name(self) -> &'static str {
        match self {
            ActionMode::Acquire => "acquire",
            ActionMode::Release => "release",
        }
    }
}

impl fmt::Display for ActionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArchProfile {
    pub name: &'static str,
    /// Ordered from weakest to strongest.
    pub kinds: Vec<BarrierKind>,
    pub modes: Vec<ActionMode>,
    /// Visibility and execution order are free (x86).
    pub vis_exec_free: bool,
}

pub const ARCH_NAMES: [&str; 4] = ["x86", "armv7", "armv8", "power"];

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("unknown architecture `{0}` (expected one of x86, armv7, armv8, power)")]
pub struct UnknownArch(pub String);

const fn kind(name: &'static str, strength: Strength) -> BarrierKind {
    BarrierKind { name, strength }
}

pub fn builtin_profile(name: &str) -> Result<ArchProfile, UnknownArch> {
    let (name, kinds, modes, free) = match name {
        "x86" => ("x86", vec![kind("mfence", Strength::Push)], vec![], true),
        "armv7" => ("armv7", vec![kind("dmb", Strength::Push)], vec![], false),
        "armv8" => (
            "armv8",
            vec![
                kind("dmb_ld", Strength::ExecFromRead),
                kind("dmb_ldst", Strength::Vis),
                kind("dmb", Strength::Push),
            ],
            vec![ActionMode::Acquire, ActionMode::Release],
            false,
        ),
        "power" => ("power", vec![kind("lwsync", Strength::Vis), kind("sync", Strength::Push)], vec![], false),
        other => return Err(UnknownArch(other.to_string())),
    };
    Ok(ArchProfile { name, kinds, modes, vis_exec_free: free })
}

impl ArchProfile {
    pub fn kind(&self, name: &str) -> Option<&BarrierKind> {
        self.kinds.iter().find(|k| k.name == name)
    }

    pub fn strongest(&self) -> &BarrierKind {
        self.kinds.last().expect("profile without barriers")
    }

    pub fn has_mode(&self, m: ActionMode) -> bool {
        self.modes.contains(&m)
    }
}

/// Keys accepted in a cost file.
pub const COST_KEYS: [&str; 12] = [
    "mfence",
    "sync",
    "lwsync",
    "dmb",
    "dmb_ldst",
    "dmb_ld",
    "acquire",
    "release",
    "data_existing",
    "ctrl_existing",
    "ctrl_synth",
    "loop_factor",
];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostTable {
    pub kinds: BTreeMap<&'static str, u64>,
    pub acquire: u64,
    pub release: u64,
    pub data_existing: u64,
    pub ctrl_existing: u64,
    pub ctrl_synth: u64,
    pub loop_factor: u64,
}

impl CostTable {
    pub fn kind(&self, name: &str) -> u64 {
        self.kinds[name]
    }

    pub fn mode(&self, m: ActionMode) -> u64 {
        match m {
            ActionMode::Acquire => self.acquire,
            ActionMode::Release => self.release,
        }
    }
}

fn default_cost(key: &str) -> u64 {
    match key {
        "mfence" => 40,
        "sync" => 80,
        "lwsync" => 45,
        "dmb" => 65,
        "dmb_ldst" => 50,
        "dmb_ld" => 35,
        "acquire" | "release" => 25,
        "data_existing" => 1,
        "ctrl_existing" => 2,
        "ctrl_synth" => 8,
        "loop_factor" => 4,
        _ => unreachable!("no default for {key}"),
    }
}

pub fn default_costs(profile: &ArchProfile) -> CostTable {
    CostTable {
        kinds: profile.kinds.iter().map(|k| (k.name, default_cost(k.name))).collect(),
        acquire: default_cost("acquire"),
        release: default_cost("release"),
        data_existing: default_cost("data_existing"),
        ctrl_existing: default_cost("ctrl_existing"),
        ctrl_synth: default_cost("ctrl_synth"),
        loop_factor: default_cost("loop_factor"),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum CostError {
    #[error("line {line}: expected `key = integer`")]
    Syntax { line: usize },
    #[error("line {line}: unknown cost key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: cost `{key}` must be a positive integer")]
    NotPositive { line: usize, key: String },
}

/// Defaults for `profile` merged with the overrides in `config`. Keys for
/// kinds the profile lacks are accepted and ignored. The second component
/// lists warnings about costs that break the strength hierarchy.
pub fn load_costs(profile: &ArchProfile, config: Option<&str>) -> Result<(CostTable, Vec<String>), CostError> {
    let mut table = default_costs(profile);
    for (i, raw) in config.unwrap_or("").lines().enumerate() {
        let line = i + 1;
        let text = raw.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        let Some((k, v)) = text.split_once('=') else {
            return Err(CostError::Syntax { line });
        };
        let (k, v) = (k.trim(), v.trim());
        let Some(key) = COST_KEYS.iter().copied().find(|c| *c == k) else {
            return Err(CostError::UnknownKey { line, key: k.to_string() });
        };
        let v: i64 = v.parse().map_err(|_| CostError::Syntax { line })?;
        if v <= 0 {
            return Err(CostError::NotPositive { line, key: key.to_string() });
        }
        let v = v as u64;
        match key {
            "acquire" => table.acquire = v,
            "release" => table.release = v,
            "data_existing" => table.data_existing = v,
            "ctrl_existing" => table.ctrl_existing = v,
            "ctrl_synth" => table.ctrl_synth = v,
            "loop_factor" => table.loop_factor = v,
            kind => {
                if let Some(slot) = table.kinds.get_mut(kind) {
                    *slot = v;
                }
            }
        }
    }
    let warnings = hierarchy_warnings(profile, &table);
    Ok((table, warnings))
}

fn hierarchy_warnings(profile: &ArchProfile, t: &CostTable) -> Vec<String> {
    let mut out = Vec::new();
    for pair in profile.kinds.windows(2) {
        let (weak, strong) = (pair[0].name, pair[1].name);
        if t.kind(strong) < t.kind(weak) {
            out.push(format!("cost of `{strong}` ({}) is below the weaker `{weak}` ({})", t.kind(strong), t.kind(weak)));
        }
    }
    let cheapest = profile.kinds.iter().map(|k| t.kind(k.name)).min().unwrap_or(u64::MAX);
    for (name, c) in [("data_existing", t.data_existing), ("ctrl_existing", t.ctrl_existing), ("ctrl_synth", t.ctrl_synth)] {
        if c > cheapest {
            out.push(format!("dependency cost `{name}` ({c}) exceeds the cheapest barrier ({cheapest})"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_profiles() {
        let x86 = builtin_profile("x86").unwrap();
        assert!(x86.vis_exec_free);
        let power = builtin_profile("power").unwrap();
        let lw = power.kind("lwsync").unwrap();
        assert!(lw.cuts_vis() && !lw.cuts_push());
        let v8 = builtin_profile("armv8").unwrap();
        let ld = v8.kind("dmb_ld").unwrap();
        assert!(ld.cuts_exec_from_read() && !ld.cuts_exec_any());
        assert!(v8.has_mode(ActionMode::Acquire) && v8.has_mode(ActionMode::Release));
        assert!(builtin_profile("riscv").is_err());
    }

    #[test]
    fn every_profile_can_push_and_is_ordered() {
        for name in ARCH_NAMES {
            let p = builtin_profile(name).unwrap();
            assert!(p.kinds.iter().any(|k| k.cuts_push()), "{name}");
            assert!(p.kinds.windows(2).all(|w| w[0].strength < w[1].strength), "{name}");
            for k in &p.kinds {
                assert!(!k.cuts_push() || k.cuts_vis());
                assert!(!k.cuts_vis() || k.cuts_exec_any());
                assert!(!k.cuts_exec_any() || k.cuts_exec_from_read());
            }
            let (_, warnings) = load_costs(&p, None).unwrap();
            assert!(warnings.is_empty(), "{name}: {warnings:?}");
        }
    }

    #[test]
    fn defaults_and_overrides() {
        let power = builtin_profile("power").unwrap();
        let (t, w) = load_costs(&power, None).unwrap();
        assert_eq!((t.kind("sync"), t.kind("lwsync"), t.loop_factor), (80, 45, 4));
        assert!(w.is_empty());
        let (t2, _) = load_costs(&power, Some("")).unwrap();
        assert_eq!(t, t2);

        let (t, w) = load_costs(&power, Some("# tuned\nlwsync = 100\n")).unwrap();
        assert_eq!((t.kind("sync"), t.kind("lwsync")), (80, 100));
        assert_eq!(w.len(), 1);

        // Kinds from other profiles are accepted and ignored.
        let (t, _) = load_costs(&power, Some("dmb_ld = 3")).unwrap();
        assert!(!t.kinds.contains_key("dmb_ld"));
    }

    #[test]
    fn bad_cost_files() {
        let p = builtin_profile("armv7").unwrap();
        assert_eq!(load_costs(&p, Some("dmb = 0")), Err(CostError::NotPositive { line: 1, key: "dmb".into() }));
        assert!(matches!(load_costs(&p, Some("\ndmb = -3")), Err(CostError::NotPositive { line: 2, .. })));
        assert!(matches!(load_costs(&p, Some("isync = 3")), Err(CostError::UnknownKey { .. })));
        assert!(matches!(load_costs(&p, Some("dmb 3")), Err(CostError::Syntax { line: 1 })));
        assert!(matches!(load_costs(&p, Some("dmb = x")), Err(CostError::Syntax { line: 1 })));
    }
}
