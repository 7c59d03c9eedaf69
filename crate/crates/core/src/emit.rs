//! Placement plans and annotated IR.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::compile::Prepared;
use crate::encode::{mode_name, OutputVar, Problem};
use crate::ir::{print, BlockId, Function, NormalizedCfg, Segment};
use crate::solver::Solution;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Realization {
    #[serde(rename = "src-end")]
    SrcEnd,
    #[serde(rename = "dst-begin")]
    DstBegin,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeRef {
    pub source: String,
    pub dest: String,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BarrierEntry {
    pub source: String,
    pub dest: String,
    pub kind: String,
    pub realization: Realization,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CtrlUse {
    pub source: String,
    pub edge: EdgeRef,
    pub mode: String,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DataUse {
    pub source: String,
    pub dest: String,
    pub path: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ModeEntry {
    pub action: String,
    pub mode: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverStatus {
    pub status: String,
    pub nodes: u64,
}

/// Barriers, dependency uses and action modes for one function. Block
/// names refer to the normalized function.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlacementPlan {
    pub function: String,
    pub arch: String,
    pub total_cost: u64,
    pub barriers: Vec<BarrierEntry>,
    pub ctrl_uses: Vec<CtrlUse>,
    pub data_uses: Vec<DataUse>,
    pub action_modes: Vec<ModeEntry>,
    pub solver_status: SolverStatus,
}

impl PlacementPlan {
    pub fn empty(function: &str, arch: &str) -> Self {
        PlacementPlan {
            function: function.to_string(),
            arch: arch.to_string(),
            total_cost: 0,
            barriers: Vec::new(),
            ctrl_uses: Vec::new(),
            data_uses: Vec::new(),
            action_modes: Vec::new(),
            solver_status: SolverStatus { status: "none".to_string(), nodes: 0 },
        }
    }

    /// Number of barriers, uses and modes.
    pub fn len(&self) -> usize {
        self.barriers.len() + self.ctrl_uses.len() + self.data_uses.len() + self.action_modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Copies of the plan, each missing one element.
    pub fn without_each(&self) -> Vec<PlacementPlan> {
        let mut out = Vec::new();
        for i in 0..self.barriers.len() {
            let mut p = self.clone();
            p.barriers.remove(i);
            out.push(p);
        }
        for i in 0..self.ctrl_uses.len() {
            let mut p = self.clone();
            p.ctrl_uses.remove(i);
            out.push(p);
        }
        for i in 0..self.data_uses.len() {
            let mut p = self.clone();
            p.data_uses.remove(i);
            out.push(p);
        }
        for i in 0..self.action_modes.len() {
            let mut p = self.clone();
            p.action_modes.remove(i);
            out.push(p);
        }
        out
    }
}

/// Where a barrier on `src -> dst` goes.
pub fn realization(cfg: &NormalizedCfg, src: BlockId) -> Realization {
    if cfg.succs[src.index()].len() == 1 {
        Realization::SrcEnd
    } else {
        Realization::DstBegin
    }
}

pub fn to_plan(prep: &Prepared, problem: &Problem, sol: &Solution) -> PlacementPlan {
    let cfg = &prep.cfg;
    let f = &cfg.func;
    let mut plan = PlacementPlan::empty(&f.name, prep.profile.name);
    plan.total_cost = sol.cost;
    plan.solver_status = SolverStatus { status: sol.status.name().to_string(), nodes: sol.nodes };
    let edge_ref = |e: crate::ir::EdgeId| {
        let ce = cfg.edge(e);
        EdgeRef { source: cfg.block_name(ce.src).to_string(), dest: cfg.block_name(ce.dst).to_string() }
    };
    for (v, on) in problem.vars.iter().zip(&sol.assignment) {
        if !on {
            continue;
        }
        match v {
            OutputVar::Barrier { edge, kind } => {
                let r = edge_ref(*edge);
                plan.barriers.push(BarrierEntry {
                    source: r.source,
                    dest: r.dest,
                    kind: prep.profile.kinds[*kind].name.to_string(),
                    realization: realization(cfg, cfg.edge(*edge).src),
                });
            }
            OutputVar::UseCtrl { src, edge, mode } => plan.ctrl_uses.push(CtrlUse {
                source: f.action_name(*src),
                edge: edge_ref(*edge),
                mode: mode_name(*mode).to_string(),
            }),
            OutputVar::UseData { src, dst, path, .. } => plan.data_uses.push(DataUse {
                source: f.action_name(*src),
                dest: f.action_name(*dst),
                path: path.iter().map(|b| cfg.block_name(*b).to_string()).collect(),
            }),
            OutputVar::Acquire(a) => plan.action_modes.push(ModeEntry { action: f.action_name(*a), mode: "acquire".into() }),
            OutputVar::Release(a) => plan.action_modes.push(ModeEntry { action: f.action_name(*a), mode: "release".into() }),
        }
    }
    plan.data_uses.dedup();
    plan
}

/// The JSON document holding the plans of a file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanDocument {
    pub plans: Vec<PlacementPlan>,
}

pub fn to_json(doc: &PlanDocument) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("plan serialization");
    s.push('\n');
    s
}

pub fn from_json(text: &str) -> Result<PlanDocument, serde_json::Error> {
    serde_json::from_str(text)
}

/// The original function with the plan as `;;` comments at the points
/// where each element takes effect.
pub fn annotate(f: &Function, cfg: &NormalizedCfg, plan: &PlacementPlan) -> String {
    let mut notes: BTreeMap<(BlockId, usize), Vec<String>> = BTreeMap::new();
    let block = |name: &str| cfg.func.block_by_name(name);
    let sites = f.action_sites();
    let at_end_of_edge = |notes: &mut BTreeMap<(BlockId, usize), Vec<String>>, src: BlockId, dst: BlockId, text: String| {
        // Place `text` where code on the normalized edge src -> dst runs.
        let (key, text) = match (cfg.segments[src.index()], cfg.segments[dst.index()]) {
            (Segment::EdgeSplit { from, to }, _) | (_, Segment::EdgeSplit { from, to }) => (
                (from, f.block(from).instrs.len()),
                format!("{text} on edge {} -> {}", f.block(from).name, f.block(to).name),
            ),
            (Segment::Orig { block, end, .. }, _) if cfg.succs[src.index()].len() == 1 => ((block, end), text),
            (_, Segment::Orig { block, start, .. }) => ((block, start), text),
        };
        notes.entry(key).or_default().push(text);
    };
    for b in &plan.barriers {
        if let (Some(s), Some(d)) = (block(&b.source), block(&b.dest)) {
            at_end_of_edge(&mut notes, s, d, format!("BARRIER {}", b.kind));
        }
    }
    for c in &plan.ctrl_uses {
        if let (Some(s), Some(d)) = (block(&c.edge.source), block(&c.edge.dest)) {
            at_end_of_edge(&mut notes, s, d, format!("USE-CTRL {} ({})", c.source, c.mode));
        }
    }
    let mut data: Vec<(&str, &str)> = plan.data_uses.iter().map(|d| (d.source.as_str(), d.dest.as_str())).collect();
    data.dedup();
    for (s, t) in data {
        if let Some(a) = f.action_by_name(t) {
            let site = sites[a.index()];
            notes.entry((site.block, site.index)).or_default().push(format!("USE-DATA {s}->{t}"));
        }
    }
    for m in &plan.action_modes {
        if let Some(a) = f.action_by_name(&m.action) {
            let site = sites[a.index()];
            notes.entry((site.block, site.index)).or_default().push(format!("{} {}", m.mode.to_uppercase(), m.action));
        }
    }
    if notes.is_empty() {
        return print(f);
    }
    crate::ir::print_annotated(f, &notes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::{builtin_profile, default_costs};
    use crate::compile::{compile, CompileOptions, Compiled};
    use crate::corpus;

    fn run(file: &str, func: usize, arch: &str) -> (Function, Compiled) {
        let f = corpus::functions(file).remove(func);
        let p = builtin_profile(arch).unwrap();
        let c = compile(&f, &p, &default_costs(&p), &CompileOptions::default()).unwrap();
        (f, c)
    }

    #[test]
    fn overlap_plan_has_one_dmb_between_wb_and_wc() {
        let (_, c) = run("overlap", 0, "armv7");
        let cfg = &c.prepared.cfg;
        let blk = |n: &str| cfg.func.action_by_name(n).map(|a| cfg.block_name(cfg.block_of(a)).to_string()).unwrap();
        assert_eq!(
            c.plan.barriers,
            vec![BarrierEntry { source: blk("wb"), dest: blk("wc"), kind: "dmb".into(), realization: Realization::SrcEnd }]
        );
        assert_eq!(c.plan.total_cost, 65);
        assert!(c.plan.ctrl_uses.is_empty() && c.plan.data_uses.is_empty() && c.plan.action_modes.is_empty());
    }

    #[test]
    fn overlap_annotation_places_the_barrier() {
        let (f, c) = run("overlap", 0, "armv7");
        let text = annotate(&f, &c.prepared.cfg, &c.plan);
        assert_eq!(text.matches(";; BARRIER dmb").count(), 1);
        let lines: Vec<&str> = text.lines().map(str::trim).collect();
        let at = lines.iter().position(|l| *l == ";; BARRIER dmb").unwrap();
        assert!(lines[at - 1].ends_with("label wb"));
        assert!(lines[at + 1].ends_with("label wc"));
    }

    #[test]
    fn widget_reader_uses_two_data_deps() {
        let (f, c) = run("widget", 1, "armv7");
        assert!(c.plan.barriers.is_empty());
        assert_eq!(c.plan.data_uses.len(), 2);
        let text = annotate(&f, &c.prepared.cfg, &c.plan);
        assert_eq!(text.matches(";; USE-DATA lookup->r").count(), 2);
    }

    #[test]
    fn branch_edges_are_realized_at_the_destination() {
        let (f, c) = run("cond", 0, "armv7");
        let (_, c2) = run("ringbuf", 0, "armv7");
        assert_eq!(c.plan.barriers[0].realization, Realization::SrcEnd);
        let ctrl = &c2.plan.ctrl_uses[0];
        assert_eq!(ctrl.mode, "existing");
        assert_eq!(realization(&c2.prepared.cfg, c2.prepared.cfg.func.block_by_name(&ctrl.edge.source).unwrap()), Realization::DstBegin);
        let text = annotate(&f, &c.prepared.cfg, &c.plan);
        assert!(text.contains(";; BARRIER dmb\n    write @b 2 label wb"));
    }

    #[test]
    fn split_edges_name_the_original_edge() {
        let (f, c) = run("ringbuf", 0, "armv7");
        let text = annotate(&f, &c.prepared.cfg, &c.plan);
        assert!(text.contains(";; USE-CTRL echeck (existing) on edge entry -> done"), "{text}");
    }

    #[test]
    fn json_round_trip() {
        let (_, c) = run("ringbuf", 1, "armv8");
        let doc = PlanDocument { plans: vec![c.plan.clone()] };
        let text = to_json(&doc);
        assert!(text.contains("\"realization\": \"dst-begin\"") || text.contains("\"realization\": \"src-end\""));
        assert_eq!(from_json(&text).unwrap(), doc);
    }

    #[test]
    fn without_each_drops_one_element() {
        let (_, c) = run("ringbuf", 0, "armv7");
        let n = c.plan.len();
        let muts = c.plan.without_each();
        assert_eq!(muts.len(), n);
        assert!(muts.iter().all(|m| m.len() == n - 1));
    }
}
