//! Independent plan checking, a brute-force minimality oracle and the
//! greedy baseline.
//!
//! Nothing here uses the path enumerator, dependency analysis or encoder:
//! paths come from a plain recursive search and dependence from a direct
//! walk over executions.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use crate::arch::{ArchProfile, Strength};
use crate::compile::Prepared;
use crate::constraints::{BoundaryConstraint, ConstraintEdge, Side};
use crate::emit::{realization, BarrierEntry, PlacementPlan, SolverStatus};
use crate::encode::Problem;
use crate::ir::{ActionId, ActionKind, BlockId, EdgeKind, Instr, NormalizedCfg, Operand, Terminator};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub valid: bool,
    /// `UNCUT kind s->t via [b0,b1,...]`, one per uncut path.
    pub violations: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum PlanError {
    #[error("plan is for function `{0}`")]
    WrongFunction(String),
    #[error("plan names unknown block `{0}`")]
    UnknownBlock(String),
    #[error("plan names missing edge `{0} -> {1}`")]
    UnknownEdge(String, String),
    #[error("barrier kind `{0}` does not exist on this architecture")]
    UnknownKind(String),
    #[error("plan names unknown action `{0}`")]
    UnknownAction(String),
    #[error("mode `{0}` cannot apply to action `{1}`")]
    BadMode(String, String),
    #[error("more than {0} paths between two actions")]
    TooManyPaths(usize),
}

pub const CHECK_MAX_PATHS: usize = 1 << 16;

/// The plan's elements resolved against the normalized function.
struct Applied<'a> {
    cfg: &'a NormalizedCfg,
    profile: &'a ArchProfile,
    strength: BTreeMap<(BlockId, BlockId), Strength>,
    ctrl: BTreeSet<(ActionId, BlockId, BlockId)>,
    data: BTreeSet<(ActionId, ActionId, Vec<BlockId>)>,
    acquire: BTreeSet<ActionId>,
    release: BTreeSet<ActionId>,
}

fn find_block(cfg: &NormalizedCfg, name: &str) -> Result<BlockId, PlanError> {
    cfg.func.block_by_name(name).ok_or_else(|| PlanError::UnknownBlock(name.to_string()))
}

fn find_action(cfg: &NormalizedCfg, name: &str) -> Result<ActionId, PlanError> {
    cfg.func.action_by_name(name).ok_or_else(|| PlanError::UnknownAction(name.to_string()))
}

fn has_edge(cfg: &NormalizedCfg, a: BlockId, b: BlockId) -> bool {
    cfg.edges.iter().any(|e| e.src == a && e.dst == b)
}

fn apply<'a>(cfg: &'a NormalizedCfg, profile: &'a ArchProfile, plan: &PlacementPlan) -> Result<Applied<'a>, PlanError> {
    if plan.function != cfg.func.name {
        return Err(PlanError::WrongFunction(plan.function.clone()));
    }
    let mut ap = Applied {
        cfg,
        profile,
        strength: BTreeMap::new(),
        ctrl: BTreeSet::new(),
        data: BTreeSet::new(),
        acquire: BTreeSet::new(),
        release: BTreeSet::new(),
    };
    for b in &plan.barriers {
        let (s, d) = (find_block(cfg, &b.source)?, find_block(cfg, &b.dest)?);
        if !has_edge(cfg, s, d) {
            return Err(PlanError::UnknownEdge(b.source.clone(), b.dest.clone()));
        }
        let k = profile.kind(&b.kind).ok_or_else(|| PlanError::UnknownKind(b.kind.clone()))?;
        let slot = ap.strength.entry((s, d)).or_insert(k.strength);
        *slot = (*slot).max(k.strength);
    }
    for c in &plan.ctrl_uses {
        let a = find_action(cfg, &c.source)?;
        let (s, d) = (find_block(cfg, &c.edge.source)?, find_block(cfg, &c.edge.dest)?);
        if !has_edge(cfg, s, d) {
            return Err(PlanError::UnknownEdge(c.edge.source.clone(), c.edge.dest.clone()));
        }
        // A use that the code cannot provide orders nothing.
        let ok = match c.mode.as_str() {
            "existing" => branch_on(cfg, a, s),
            "synth" => branch_on(cfg, a, s) || naive_strict_dom(cfg, block_of(cfg, a), s),
            other => return Err(PlanError::BadMode(other.to_string(), c.source.clone())),
        };
        let pseudo = cfg.edges.iter().any(|e| e.src == s && e.dst == d && e.pseudo);
        if ok && !pseudo {
            ap.ctrl.insert((a, s, d));
        }
    }
    for u in &plan.data_uses {
        let (s, t) = (find_action(cfg, &u.source)?, find_action(cfg, &u.dest)?);
        let path = u.path.iter().map(|n| find_block(cfg, n)).collect::<Result<Vec<_>, _>>()?;
        ap.data.insert((s, t, path));
    }
    for m in &plan.action_modes {
        let a = find_action(cfg, &m.action)?;
        let act = cfg.func.action(a);
        let bad = || PlanError::BadMode(m.mode.clone(), m.action.clone());
        match m.mode.as_str() {
            "acquire" if act.reads() && profile.modes.contains(&crate::arch::ActionMode::Acquire) => {
                ap.acquire.insert(a);
            }
            "release" if act.kind == ActionKind::Write && profile.modes.contains(&crate::arch::ActionMode::Release) => {
                ap.release.insert(a);
            }
            _ => return Err(bad()),
        }
    }
    Ok(ap)
}

fn block_of(cfg: &NormalizedCfg, a: ActionId) -> BlockId {
    for (bi, b) in cfg.func.blocks.iter().enumerate() {
        if b.instrs.contains(&Instr::Action(a)) {
            return BlockId::from_index(bi);
        }
    }
    unreachable!("action without a block")
}

fn out_edges(cfg: &NormalizedCfg, u: BlockId) -> Vec<BlockId> {
    let mut v: Vec<BlockId> = cfg.edges.iter().filter(|e| e.src == u).map(|e| e.dst).collect();
    v.sort();
    v
}

/// All simple paths (cycles when `from == to`), by recursive search.
fn paths(cfg: &NormalizedCfg, from: BlockId, to: BlockId, avoid: Option<BlockId>) -> Result<Vec<Vec<BlockId>>, PlanError> {
    fn go(
        cfg: &NormalizedCfg,
        u: BlockId,
        to: BlockId,
        path: &mut Vec<BlockId>,
        banned: &mut Vec<bool>,
        out: &mut Vec<Vec<BlockId>>,
    ) -> Result<(), PlanError> {
        for v in out_edges(cfg, u) {
            if v == to {
                let mut p = path.clone();
                p.push(v);
                out.push(p);
                if out.len() > CHECK_MAX_PATHS {
                    return Err(PlanError::TooManyPaths(CHECK_MAX_PATHS));
                }
            } else if !banned[v.index()] {
                banned[v.index()] = true;
                path.push(v);
                go(cfg, v, to, path, banned, out)?;
                path.pop();
                banned[v.index()] = false;
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    if avoid == Some(from) || avoid == Some(to) {
        return Ok(out);
    }
    let mut banned = vec![false; cfg.func.blocks.len()];
    banned[from.index()] = true;
    if let Some(a) = avoid {
        banned[a.index()] = true;
    }
    go(cfg, from, to, &mut vec![from], &mut banned, &mut out)?;
    Ok(out)
}

/// Strict dominance by deleting `a` and testing reachability of `b`.
fn naive_strict_dom(cfg: &NormalizedCfg, a: BlockId, b: BlockId) -> bool {
    if a == b {
        return false;
    }
    let entry = BlockId(0);
    if b == entry {
        return false;
    }
    if a == entry {
        return true;
    }
    let mut seen = vec![false; cfg.func.blocks.len()];
    seen[a.index()] = true;
    seen[entry.index()] = true;
    let mut stack = vec![entry];
    while let Some(u) = stack.pop() {
        if u == b {
            return false;
        }
        for e in cfg.edges.iter().filter(|e| e.src == u && !e.pseudo) {
            if !seen[e.dst.index()] {
                seen[e.dst.index()] = true;
                stack.push(e.dst);
            }
        }
    }
    true
}

/// Dependence state: which values currently derive from `s`.
type Dep = Vec<bool>;

/// Run block `b` entered from `pred`; `None` when the block runs `s`.
fn run_block(cfg: &NormalizedCfg, b: BlockId, pred: BlockId, s: ActionId, dep: &Dep, phis_only: bool) -> Option<Dep> {
    let f = &cfg.func;
    let mut next = dep.clone();
    let operand = |d: &Dep, o: &Operand| matches!(o, Operand::Value(v) if d[v.index()]);
    for ins in &f.block(b).instrs {
        if let Instr::Phi { dest, incoming } = ins {
            let arm = incoming.iter().find(|(p, _)| *p == pred);
            next[dest.index()] = arm.is_some_and(|(_, o)| operand(dep, o));
        }
    }
    if phis_only {
        return Some(next);
    }
    for ins in &f.block(b).instrs {
        match ins {
            Instr::Op { dest, args, .. } => {
                let d = args.iter().any(|o| operand(&next, o));
                next[dest.index()] = d;
            }
            Instr::Action(a) => {
                if *a == s {
                    return None;
                }
                if let Some(v) = f.action(*a).def {
                    next[v.index()] = false;
                }
            }
            _ => {}
        }
    }
    Some(next)
}

fn start_dep(cfg: &NormalizedCfg, s: ActionId) -> Dep {
    let mut d = vec![false; cfg.func.values.len()];
    if let Some(v) = cfg.func.action(s).def {
        d[v.index()] = true;
    }
    d
}

/// Every walk from `s` reaching the branch at the end of `br` tests a
/// value derived from `s`.
fn branch_on(cfg: &NormalizedCfg, s: ActionId, br: BlockId) -> bool {
    let Terminator::Br { cond: Operand::Value(c), .. } = cfg.func.block(br).term else {
        return false;
    };
    if !cfg.func.action(s).reads() {
        return false;
    }
    #[allow(clippy::too_many_arguments)]
    fn visit(
        cfg: &NormalizedCfg,
        u: BlockId,
        dep: Dep,
        s: ActionId,
        br: BlockId,
        c: usize,
        seen: &mut HashSet<(BlockId, Dep)>,
        hit: &mut bool,
    ) -> bool {
        if !seen.insert((u, dep.clone())) {
            return true;
        }
        if u == br {
            *hit = true;
            if !dep[c] {
                return false;
            }
        }
        for v in out_edges(cfg, u) {
            if let Some(d) = run_block(cfg, v, u, s, &dep, false) {
                if !visit(cfg, v, d, s, br, c, seen, hit) {
                    return false;
                }
            }
        }
        true
    }
    let mut hit = false;
    let ok = visit(cfg, block_of(cfg, s), start_dep(cfg, s), s, br, c.index(), &mut HashSet::new(), &mut hit);
    ok && hit
}

/// Every execution following `path` (with closed detours that avoid
/// `avoid` and stay between the path's ends) reaches `t` with an address
/// (or, for writes and rmws, address or data) derived from `s`.
fn data_on(cfg: &NormalizedCfg, s: ActionId, t: ActionId, path: &[BlockId], avoid: Option<BlockId>) -> bool {
    let f = &cfg.func;
    if !f.action(s).reads() || path.len() < 2 {
        return false;
    }
    let ta = f.action(t);
    let ops: Vec<usize> = match ta.kind {
        ActionKind::Read => ta.address().into_iter().map(|v| v.index()).collect(),
        _ => ta.operands().map(|v| v.index()).collect(),
    };
    if ops.is_empty() {
        return false;
    }
    let n = f.blocks.len();
    let reach = |from: BlockId, forward: bool| {
        let mut seen = vec![false; n];
        if Some(from) == avoid {
            return seen;
        }
        seen[from.index()] = true;
        let mut stack = vec![from];
        while let Some(u) = stack.pop() {
            for e in &cfg.edges {
                let (a, b) = if forward { (e.src, e.dst) } else { (e.dst, e.src) };
                if a == u && Some(b) != avoid && !seen[b.index()] {
                    seen[b.index()] = true;
                    stack.push(b);
                }
            }
        }
        seen
    };
    let (fwd, bwd) = (reach(path[0], true), reach(*path.last().unwrap(), false));
    let allowed: Vec<bool> = (0..n).map(|i| (fwd[i] && bwd[i]) || path.contains(&BlockId::from_index(i))).collect();
    let last = path.len() - 1;
    let good = |d: &Dep| ops.iter().any(|&v| d[v]);

    let mut seen: HashSet<(usize, BlockId, Dep)> = HashSet::new();
    let mut todo = vec![(0usize, path[0], start_dep(cfg, s))];
    while let Some((i, u, dep)) = todo.pop() {
        if !seen.insert((i, u, dep.clone())) {
            continue;
        }
        let mut moves: Vec<(usize, BlockId)> = Vec::new();
        if i < last && u == path[i] {
            moves.push((i + 1, path[i + 1]));
        }
        for v in out_edges(cfg, u) {
            if allowed[v.index()] {
                moves.push((i, v));
            }
        }
        for (j, v) in moves {
            if j == last && v == path[last] {
                let at = run_block(cfg, v, u, s, &dep, true).unwrap();
                if !good(&at) {
                    return false;
                }
            }
            if let Some(d) = run_block(cfg, v, u, s, &dep, false) {
                todo.push((j, v, d));
            }
        }
    }
    true
}

impl Applied<'_> {
    fn strength_on(&self, a: BlockId, b: BlockId) -> Option<Strength> {
        self.strength.get(&(a, b)).copied()
    }

    fn any_edge(&self, p: &[BlockId], min: Strength) -> bool {
        p.windows(2).any(|w| self.strength_on(w[0], w[1]).is_some_and(|k| k >= min))
    }

    fn reads(&self, a: ActionId) -> bool {
        self.cfg.func.action(a).reads()
    }

    fn writes_only(&self, a: ActionId) -> bool {
        self.cfg.func.action(a).kind == ActionKind::Write
    }

    fn vis_cut(&self, t: ActionId, p: &[BlockId]) -> bool {
        self.profile.vis_exec_free || self.any_edge(p, Strength::Vis) || self.release.contains(&t)
    }

    fn exec_cut(&self, s: ActionId, p: &[BlockId]) -> bool {
        let min = if self.reads(s) { Strength::ExecFromRead } else { Strength::ExecAny };
        self.any_edge(p, min) || self.acquire.contains(&s)
    }

    fn ctrl_cut(&self, s: ActionId, p: &[BlockId]) -> bool {
        p.windows(2).any(|w| self.ctrl.contains(&(s, w[0], w[1])))
    }

    fn xcut_path(&self, b: Option<BlockId>, s: ActionId, t: ActionId, p: &[BlockId], self_ok: &dyn Fn() -> (bool, bool)) -> bool {
        if self.vis_cut(t, p) || self.exec_cut(s, p) {
            return true;
        }
        let data = self.data.contains(&(s, t, p.to_vec())) && data_on(self.cfg, s, t, p, b);
        let ctrl = self.writes_only(t) && self.ctrl_cut(s, p);
        if !data && !ctrl {
            return false;
        }
        let (ctrl_ss, xcut_ss) = self_ok();
        (ctrl && (ctrl_ss || xcut_ss)) || (data && xcut_ss)
    }

    /// Greatest fixpoint of `xcut(b,s,s)` for every pair in `keys`.
    fn self_cuts(&self, keys: &BTreeSet<(Option<BlockId>, ActionId)>) -> Result<BTreeMap<(Option<BlockId>, ActionId), bool>, PlanError> {
        let mut cycles = BTreeMap::new();
        let mut ctrl_ss = BTreeMap::new();
        for &(b, s) in keys {
            let sb = block_of(self.cfg, s);
            let cs = paths(self.cfg, sb, sb, b)?;
            ctrl_ss.insert((b, s), cs.iter().all(|p| self.ctrl_cut(s, p)));
            cycles.insert((b, s), cs);
        }
        let mut x: BTreeMap<(Option<BlockId>, ActionId), bool> = keys.iter().map(|k| (*k, true)).collect();
        loop {
            let mut changed = false;
            for &(b, s) in keys {
                if !x[&(b, s)] {
                    continue;
                }
                let cur = x[&(b, s)];
                let c = ctrl_ss[&(b, s)];
                let holds = cycles[&(b, s)].iter().all(|p| self.xcut_path(b, s, s, p, &|| (c, cur)));
                if !holds {
                    x.insert((b, s), false);
                    changed = true;
                }
            }
            if !changed {
                return Ok(x);
            }
        }
    }
}

fn names(cfg: &NormalizedCfg, p: &[BlockId]) -> String {
    p.iter().map(|b| cfg.block_name(*b)).collect::<Vec<_>>().join(",")
}

/// Re-derive every requirement and test it against the plan.
pub fn check_plan(
    cfg: &NormalizedCfg,
    edges: &[ConstraintEdge],
    bounds: &[BoundaryConstraint],
    profile: &ArchProfile,
    plan: &PlacementPlan,
) -> Result<Verdict, PlanError> {
    let ap = apply(cfg, profile, plan)?;
    let f = &cfg.func;
    let keys: BTreeSet<(Option<BlockId>, ActionId)> =
        edges.iter().filter(|e| e.kind == EdgeKind::Xo).map(|e| (e.binding, e.src)).collect();
    let selfs = ap.self_cuts(&keys)?;
    let mut violations = Vec::new();
    for e in edges {
        let (sb, tb) = (block_of(cfg, e.src), block_of(cfg, e.dst));
        let ctrl_ss = || -> Result<bool, PlanError> {
            Ok(paths(cfg, sb, sb, e.binding)?.iter().all(|p| ap.ctrl_cut(e.src, p)))
        };
        let c_ss = if e.kind == EdgeKind::Xo { ctrl_ss()? } else { false };
        for p in paths(cfg, sb, tb, e.binding)? {
            let ok = match e.kind {
                EdgeKind::Pu => ap.any_edge(&p, Strength::Push),
                EdgeKind::Vo => ap.vis_cut(e.dst, &p),
                EdgeKind::Xo => {
                    let x = selfs[&(e.binding, e.src)];
                    ap.xcut_path(e.binding, e.src, e.dst, &p, &|| (c_ss, x))
                }
            };
            if !ok {
                violations.push(format!(
                    "UNCUT {} {}->{} via [{}]",
                    e.kind,
                    f.action_name(e.src),
                    f.action_name(e.dst),
                    names(cfg, &p)
                ));
            }
        }
    }
    for bc in bounds {
        let blk = block_of(cfg, bc.action);
        let adjacent: Vec<(BlockId, BlockId)> = match bc.side {
            Side::Pre => cfg.edges.iter().filter(|e| e.dst == blk).map(|e| (e.src, e.dst)).collect(),
            Side::Post => cfg.edges.iter().filter(|e| e.src == blk).map(|e| (e.src, e.dst)).collect(),
        };
        for (a, b) in adjacent {
            let k = ap.strength_on(a, b);
            let at_least = |m: Strength| k.is_some_and(|k| k >= m);
            let ok = profile.vis_exec_free
                || match (bc.side, bc.kind) {
                    (Side::Pre, EdgeKind::Vo) => at_least(Strength::Vis) || ap.release.contains(&bc.action),
                    (Side::Pre, _) => at_least(Strength::ExecAny) || ap.release.contains(&bc.action),
                    (Side::Post, EdgeKind::Vo) => at_least(Strength::Vis),
                    (Side::Post, _) => {
                        at_least(Strength::ExecAny)
                            || (ap.reads(bc.action) && (at_least(Strength::ExecFromRead) || ap.acquire.contains(&bc.action)))
                    }
                };
            if !ok {
                let name = f.action_name(bc.action);
                let what = match bc.side {
                    Side::Pre => format!("pre->{name}"),
                    Side::Post => format!("{name}->post"),
                };
                violations.push(format!("UNCUT {} {what} via [{}]", bc.kind, names(cfg, &[a, b])));
            }
        }
    }
    Ok(Verdict { valid: violations.is_empty(), violations })
}

pub fn check_prepared(prep: &Prepared, plan: &PlacementPlan) -> Result<Verdict, PlanError> {
    check_plan(&prep.cfg, &prep.edges, &prep.bounds, &prep.profile, plan)
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{vars} output variables exceed the enumeration cap of {cap}")]
pub struct CapExceeded {
    pub vars: usize,
    pub cap: usize,
}

pub const DEFAULT_BRUTE_CAP: usize = 16;

/// Minimum cost over all output assignments accepted by the evaluator.
pub fn brute_min(problem: &Problem, cap: usize) -> Result<u64, CapExceeded> {
    let n = problem.vars.len();
    if n > cap || n >= 63 {
        return Err(CapExceeded { vars: n, cap });
    }
    let mut best = u64::MAX;
    let mut outs = vec![false; n];
    for mask in 0u64..(1u64 << n) {
        for (i, o) in outs.iter_mut().enumerate() {
            *o = mask >> i & 1 == 1;
        }
        let c = problem.cost(&outs);
        if c < best && problem.satisfied(&outs) {
            best = c;
        }
    }
    Ok(best)
}

/// Cost of a plan under the prepared weights and costs.
pub fn plan_cost(prep: &Prepared, plan: &PlacementPlan) -> Result<u64, PlanError> {
    let cfg = &prep.cfg;
    let weight = |a: &str, b: &str| -> Result<u64, PlanError> {
        let (s, d) = (find_block(cfg, a)?, find_block(cfg, b)?);
        cfg.find_edge(s, d)
            .map(|e| prep.weights[e.index()])
            .ok_or_else(|| PlanError::UnknownEdge(a.to_string(), b.to_string()))
    };
    let mut total = 0u64;
    for b in &plan.barriers {
        let c = prep.costs.kinds.get(b.kind.as_str()).ok_or_else(|| PlanError::UnknownKind(b.kind.clone()))?;
        total = total.saturating_add(weight(&b.source, &b.dest)?.saturating_mul(*c));
    }
    for c in &plan.ctrl_uses {
        let unit = if c.mode == "synth" { prep.costs.ctrl_synth } else { prep.costs.ctrl_existing };
        total = total.saturating_add(weight(&c.edge.source, &c.edge.dest)?.saturating_mul(unit));
    }
    let chains: BTreeSet<(&str, &str)> = plan.data_uses.iter().map(|d| (d.source.as_str(), d.dest.as_str())).collect();
    total = total.saturating_add(prep.costs.data_existing.saturating_mul(chains.len() as u64));
    for m in &plan.action_modes {
        let a = find_action(cfg, &m.action)?;
        let blk = block_of(cfg, a);
        let w = cfg.edges.iter().enumerate().filter(|(_, e)| e.dst == blk).map(|(i, _)| prep.weights[i]).max().unwrap_or(1);
        let unit = if m.mode == "acquire" { prep.costs.acquire } else { prep.costs.release };
        total = total.saturating_add(w.saturating_mul(unit));
    }
    Ok(total)
}

/// Insert, for each requirement not yet met, the cheapest sufficient
/// barrier on the edges entering the destination (or leaving the source,
/// for `post`). Barriers placed earlier are reused.
pub fn greedy(prep: &Prepared) -> PlacementPlan {
    greedy_in_order(prep, &prep.edges)
}

/// [`greedy`] over the constraint edges in the given order.
pub fn greedy_in_order(prep: &Prepared, edges: &[ConstraintEdge]) -> PlacementPlan {
    let cfg = &prep.cfg;
    let profile = &prep.profile;
    let mut plan = PlacementPlan::empty(&cfg.func.name, profile.name);
    plan.solver_status = SolverStatus { status: "greedy".to_string(), nodes: 0 };
    let cheapest = |min: Strength| {
        profile
            .kinds
            .iter()
            .filter(|k| k.strength >= min)
            .min_by_key(|k| (prep.costs.kind(k.name), k.strength))
            .expect("every profile has a push barrier")
    };
    let place = |plan: &mut PlacementPlan, on: Vec<(BlockId, BlockId)>, min: Strength| {
        let k = cheapest(min);
        for (a, b) in on {
            let (sa, sb) = (cfg.block_name(a).to_string(), cfg.block_name(b).to_string());
            if let Some(old) = plan.barriers.iter_mut().find(|x| x.source == sa && x.dest == sb) {
                let old_k = profile.kind(&old.kind).unwrap();
                if old_k.strength < min {
                    old.kind = k.name.to_string();
                }
                continue;
            }
            plan.barriers.push(BarrierEntry { source: sa, dest: sb, kind: k.name.to_string(), realization: realization(cfg, a) });
        }
    };
    let in_edges = |b: BlockId| cfg.edges.iter().filter(|e| e.dst == b).map(|e| (e.src, e.dst)).collect::<Vec<_>>();
    let out_edges = |b: BlockId| cfg.edges.iter().filter(|e| e.src == b).map(|e| (e.src, e.dst)).collect::<Vec<_>>();
    let needed = |kind: EdgeKind, src: ActionId| match kind {
        EdgeKind::Pu => Strength::Push,
        EdgeKind::Vo => Strength::Vis,
        EdgeKind::Xo if cfg.func.action(src).reads() => Strength::ExecFromRead,
        EdgeKind::Xo => Strength::ExecAny,
    };
    for e in edges {
        let cut = check_plan(cfg, std::slice::from_ref(e), &[], profile, &plan).map(|v| v.valid).unwrap_or(false);
        if !cut {
            place(&mut plan, in_edges(block_of(cfg, e.dst)), needed(e.kind, e.src));
        }
    }
    for bc in &prep.bounds {
        let cut = check_plan(cfg, &[], std::slice::from_ref(bc), profile, &plan).map(|v| v.valid).unwrap_or(false);
        if cut {
            continue;
        }
        let blk = block_of(cfg, bc.action);
        match (bc.side, bc.kind) {
            (Side::Pre, EdgeKind::Vo) => place(&mut plan, in_edges(blk), Strength::Vis),
            (Side::Pre, _) => place(&mut plan, in_edges(blk), Strength::ExecAny),
            (Side::Post, EdgeKind::Vo) => place(&mut plan, out_edges(blk), Strength::Vis),
            (Side::Post, _) => {
                let min = if cfg.func.action(bc.action).reads() { Strength::ExecFromRead } else { Strength::ExecAny };
                place(&mut plan, out_edges(blk), min)
            }
        }
    }
    plan.barriers.sort_by_key(|b| {
        let s = cfg.func.block_by_name(&b.source).unwrap();
        let d = cfg.func.block_by_name(&b.dest).unwrap();
        (s, d)
    });
    plan.total_cost = plan_cost(prep, &plan).expect("greedy plan names known entities");
    plan
}

/// The plan setting every barrier of the strongest kind on every edge.
pub fn all_barriers(prep: &Prepared) -> PlacementPlan {
    let cfg = &prep.cfg;
    let mut plan = PlacementPlan::empty(&cfg.func.name, prep.profile.name);
    let k = prep.profile.strongest().name;
    for e in &cfg.edges {
        plan.barriers.push(BarrierEntry {
            source: cfg.block_name(e.src).to_string(),
            dest: cfg.block_name(e.dst).to_string(),
            kind: k.to_string(),
            realization: realization(cfg, e.src),
        });
    }
    plan.total_cost = plan_cost(prep, &plan).expect("known entities");
    plan
}

/// A random problem over at most `max_vars` output variables whose
/// all-true assignment is accepted: expressions are monotone and never
/// `false`, and definitions may refer to each other and to themselves.
pub fn random_problem(seed: u64, max_vars: usize) -> Problem {
    use crate::encode::{CostGroup, DefKey, Expr, OutputVar, Root, RootOf};
    use crate::ir::EdgeId;
    use rand::{Rng, SeedableRng};

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=max_vars.max(1));
    let n_defs = rng.gen_range(0..=4);
    fn leaf(rng: &mut impl Rng, n: usize, n_defs: usize) -> Expr {
        if n_defs > 0 && rng.gen_bool(0.25) {
            Expr::Def(rng.gen_range(0..n_defs))
        } else {
            Expr::Out(rng.gen_range(0..n))
        }
    }
    fn expr(rng: &mut impl Rng, n: usize, n_defs: usize, depth: u32) -> Expr {
        if depth == 0 || rng.gen_bool(0.3) {
            return leaf(rng, n, n_defs);
        }
        let k = rng.gen_range(1..=3);
        let items: Vec<Expr> = (0..k).map(|_| expr(rng, n, n_defs, depth - 1)).collect();
        if rng.gen_bool(0.6) {
            Expr::or(items)
        } else {
            Expr::and(items)
        }
    }
    let defs: Vec<(DefKey, Expr)> = (0..n_defs)
        .map(|i| {
            let key = DefKey::Ctrl { binding: None, src: ActionId(i as u32), dst: ActionId(i as u32) };
            (key, expr(&mut rng, n, n_defs, 3))
        })
        .collect();
    let n_roots = rng.gen_range(1..=6);
    let roots: Vec<Root> = (0..n_roots)
        .map(|i| {
            let k = rng.gen_range(1..=4);
            let e = Expr::or((0..k).map(|_| expr(&mut rng, n, n_defs, 2)));
            Root { of: RootOf::Edge(i), expr: e }
        })
        .collect();
    let mut groups: Vec<CostGroup> = Vec::new();
    let mut var_group = Vec::with_capacity(n);
    for v in 0..n {
        if !groups.is_empty() && rng.gen_bool(0.15) {
            let g = rng.gen_range(0..groups.len());
            groups[g].vars.push(v);
            var_group.push(g);
        } else {
            var_group.push(groups.len());
            groups.push(CostGroup { cost: rng.gen_range(1..=100), vars: vec![v] });
        }
    }
    Problem {
        vars: (0..n).map(|i| OutputVar::Barrier { edge: EdgeId(i as u32), kind: 0 }).collect(),
        var_names: (0..n).map(|i| format!("x{i}")).collect(),
        groups,
        var_group,
        def_names: (0..n_defs).map(|i| format!("d{i}")).collect(),
        defs,
        root_names: (0..n_roots).map(|i| format!("r{i}")).collect(),
        roots,
    }
}
