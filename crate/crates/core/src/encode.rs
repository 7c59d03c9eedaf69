//! Boolean encoding of the cut requirements with a cost objective.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write;
use std::rc::Rc;

use crate::arch::{ActionMode, ArchProfile, BarrierKind, CostTable};
use crate::constraints::{BoundaryConstraint, ConstraintEdge, Side};
use crate::deps::{CtrlMode, Deps};
use crate::graph::{simple_paths, Path, PathExplosion};
use crate::ir::{ActionId, BlockId, EdgeId, EdgeKind, NormalizedCfg};

pub type VarId = usize;
pub type DefId = usize;

/// A decision the optimizer makes. The derived order is the canonical
/// order used for tie-breaking.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OutputVar {
    /// Barrier of profile kind index `kind` (weakest first) on `edge`.
    Barrier { edge: EdgeId, kind: usize },
    UseCtrl { src: ActionId, edge: EdgeId, mode: CtrlMode },
    UseData { binding: Option<BlockId>, src: ActionId, dst: ActionId, path: Vec<BlockId> },
    Acquire(ActionId),
    Release(ActionId),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DefKey {
    PCut { binding: Option<BlockId>, src: ActionId, dst: ActionId },
    VCut { binding: Option<BlockId>, src: ActionId, dst: ActionId },
    XCut { binding: Option<BlockId>, src: ActionId, dst: ActionId },
    Ctrl { binding: Option<BlockId>, src: ActionId, dst: ActionId },
    Boundary { action: ActionId, side: Side, kind: EdgeKind },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    True,
    False,
    Out(VarId),
    Def(DefId),
    And(Vec<Expr>),
    Or(Vec<Expr>),
}

impl Expr {
    pub fn or(items: impl IntoIterator<Item = Expr>) -> Expr {
        let mut out = Vec::new();
        for e in items {
            match e {
                Expr::True => return Expr::True,
                Expr::False => {}
                Expr::Or(xs) => out.extend(xs),
                other => out.push(other),
            }
        }
        dedup(&mut out);
        match out.len() {
            0 => Expr::False,
            1 => out.pop().unwrap(),
            _ => Expr::Or(out),
        }
    }

    pub fn and(items: impl IntoIterator<Item = Expr>) -> Expr {
        let mut out = Vec::new();
        for e in items {
            match e {
                Expr::False => return Expr::False,
                Expr::True => {}
                Expr::And(xs) => out.extend(xs),
                other => out.push(other),
            }
        }
        dedup(&mut out);
        match out.len() {
            0 => Expr::True,
            1 => out.pop().unwrap(),
            _ => Expr::And(out),
        }
    }

    pub fn eval(&self, outs: &[bool], defs: &[bool]) -> bool {
        match self {
            Expr::True => true,
            Expr::False => false,
            Expr::Out(v) => outs[*v],
            Expr::Def(d) => defs[*d],
            Expr::And(xs) => xs.iter().all(|x| x.eval(outs, defs)),
            Expr::Or(xs) => xs.iter().any(|x| x.eval(outs, defs)),
        }
    }

    fn remap(self, map: &[VarId]) -> Expr {
        match self {
            Expr::Out(v) => Expr::Out(map[v]),
            Expr::And(xs) => Expr::And(xs.into_iter().map(|x| x.remap(map)).collect()),
            Expr::Or(xs) => Expr::Or(xs.into_iter().map(|x| x.remap(map)).collect()),
            other => other,
        }
    }
}

/// Drop repeated items, keeping the first occurrence.
fn dedup(items: &mut Vec<Expr>) {
    let mut seen = HashSet::new();
    items.retain(|e| seen.insert(e.clone()));
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RootOf {
    /// Index into the closed constraint edges.
    Edge(usize),
    /// Index into the closed boundary constraints.
    Boundary(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Root {
    pub of: RootOf,
    pub expr: Expr,
}

/// Output variables sharing one cost term; the term is paid once if any
/// member is true.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostGroup {
    pub cost: u64,
    pub vars: Vec<VarId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Problem {
    pub vars: Vec<OutputVar>,
    pub var_names: Vec<String>,
    pub groups: Vec<CostGroup>,
    pub var_group: Vec<usize>,
    pub defs: Vec<(DefKey, Expr)>,
    pub def_names: Vec<String>,
    pub roots: Vec<Root>,
    pub root_names: Vec<String>,
}

impl Problem {
    /// Values of all defined variables: the greatest fixpoint of their
    /// equations under the output assignment.
    pub fn eval_defs(&self, outs: &[bool]) -> Vec<bool> {
        let mut defs = vec![true; self.defs.len()];
        loop {
            let mut changed = false;
            for (i, (_, e)) in self.defs.iter().enumerate() {
                if defs[i] && !e.eval(outs, &defs) {
                    defs[i] = false;
                    changed = true;
                }
            }
            if !changed {
                return defs;
            }
        }
    }

    /// Truth of each root assertion.
    pub fn eval_roots(&self, outs: &[bool]) -> Vec<bool> {
        let defs = self.eval_defs(outs);
        self.roots.iter().map(|r| r.expr.eval(outs, &defs)).collect()
    }

    pub fn satisfied(&self, outs: &[bool]) -> bool {
        self.eval_roots(outs).into_iter().all(|b| b)
    }

    pub fn cost(&self, outs: &[bool]) -> u64 {
        self.groups
            .iter()
            .filter(|g| g.vars.iter().any(|v| outs[*v]))
            .fold(0u64, |acc, g| acc.saturating_add(g.cost))
    }

    /// Stable textual form: catalog, equations, assertions, objective.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "outputs:");
        for (i, n) in self.var_names.iter().enumerate() {
            let _ = writeln!(out, "  v{i} = {n}");
        }
        let _ = writeln!(out, "definitions:");
        for (i, (_, e)) in self.defs.iter().enumerate() {
            let _ = writeln!(out, "  d{i} {} := {}", self.def_names[i], self.show(e));
        }
        let _ = writeln!(out, "assertions:");
        for (r, n) in self.roots.iter().zip(&self.root_names) {
            let _ = writeln!(out, "  {n}: {}", self.show(&r.expr));
        }
        let _ = writeln!(out, "objective:");
        for g in &self.groups {
            let vs: Vec<String> = g.vars.iter().map(|v| format!("v{v}")).collect();
            let _ = writeln!(out, "  {} * any({})", g.cost, vs.join(", "));
        }
        out
    }

    pub fn show(&self, e: &Expr) -> String {
        match e {
            Expr::True => "true".into(),
            Expr::False => "false".into(),
            Expr::Out(v) => format!("v{v}"),
            Expr::Def(d) => format!("d{d}"),
            Expr::And(xs) => format!("({})", xs.iter().map(|x| self.show(x)).collect::<Vec<_>>().join(" & ")),
            Expr::Or(xs) => format!("({})", xs.iter().map(|x| self.show(x)).collect::<Vec<_>>().join(" | ")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodeOptions {
    pub data_deps: bool,
    pub ctrl_deps: bool,
    pub synth_deps: bool,
    /// Require `ctrl(s,s) | xcut(s,s)` next to a control cut and
    /// `xcut(s,s)` next to a data cut. Only tests turn this off.
    pub self_order: bool,
    pub max_paths: usize,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        EncodeOptions {
            data_deps: true,
            ctrl_deps: true,
            synth_deps: false,
            self_order: true,
            max_paths: crate::graph::DEFAULT_MAX_PATHS,
        }
    }
}

/// Everything the encoder reads.
pub struct EncodeInput<'a> {
    pub cfg: &'a NormalizedCfg,
    pub edges: &'a [ConstraintEdge],
    pub bounds: &'a [BoundaryConstraint],
    pub profile: &'a ArchProfile,
    pub costs: &'a CostTable,
    pub weights: &'a [u64],
}

pub fn build(input: &EncodeInput<'_>, opts: &EncodeOptions) -> Result<Problem, PathExplosion> {
    let mut b = Builder {
        input,
        opts,
        deps: Deps::new(input.cfg, opts.synth_deps),
        paths: HashMap::new(),
        vars: HashMap::new(),
        var_list: Vec::new(),
        defs: Vec::new(),
        def_ids: HashMap::new(),
        pending: Vec::new(),
    };
    let mut roots = Vec::new();
    let mut root_names = Vec::new();
    for (i, e) in input.edges.iter().enumerate() {
        let key = match e.kind {
            EdgeKind::Pu => DefKey::PCut { binding: e.binding, src: e.src, dst: e.dst },
            EdgeKind::Vo => DefKey::VCut { binding: e.binding, src: e.src, dst: e.dst },
            EdgeKind::Xo => DefKey::XCut { binding: e.binding, src: e.src, dst: e.dst },
        };
        let d = b.def(key);
        roots.push(Root { of: RootOf::Edge(i), expr: Expr::Def(d) });
        root_names.push(edge_name(input.cfg, e));
    }
    for (i, bc) in input.bounds.iter().enumerate() {
        let d = b.def(DefKey::Boundary { action: bc.action, side: bc.side, kind: bc.kind });
        roots.push(Root { of: RootOf::Boundary(i), expr: Expr::Def(d) });
        root_names.push(boundary_name(input.cfg, bc));
    }
    while let Some(id) = b.pending.pop() {
        let key = b.defs[id].0.clone();
        let e = b.define(&key)?;
        b.defs[id].1 = e;
    }
    Ok(b.finish(roots, root_names))
}

pub fn edge_name(cfg: &NormalizedCfg, e: &ConstraintEdge) -> String {
    let f = &cfg.func;
    let here = e.binding.map(|b| format!(" here({})", cfg.block_name(b))).unwrap_or_default();
    format!("{}{here} {}->{}", e.kind, f.action_name(e.src), f.action_name(e.dst))
}

pub fn boundary_name(cfg: &NormalizedCfg, b: &BoundaryConstraint) -> String {
    let a = cfg.func.action_name(b.action);
    match b.side {
        Side::Pre => format!("{} pre->{a}", b.kind),
        Side::Post => format!("{} {a}->post", b.kind),
    }
}

pub fn var_name(cfg: &NormalizedCfg, profile: &ArchProfile, v: &OutputVar) -> String {
    let f = &cfg.func;
    let edge = |e: EdgeId| {
        let ce = cfg.edge(e);
        format!("{}->{}", cfg.block_name(ce.src), cfg.block_name(ce.dst))
    };
    match v {
        OutputVar::Barrier { edge: e, kind } => format!("barrier {} on {}", profile.kinds[*kind].name, edge(*e)),
        OutputVar::UseCtrl { src, edge: e, mode } => {
            format!("use-ctrl {} on {} ({})", f.action_name(*src), edge(*e), mode_name(*mode))
        }
        OutputVar::UseData { binding, src, dst, path } => {
            let here = binding.map(|b| format!(" here({})", cfg.block_name(b))).unwrap_or_default();
            let blocks: Vec<&str> = path.iter().map(|b| cfg.block_name(*b)).collect();
            format!("use-data{here} {}->{} via [{}]", f.action_name(*src), f.action_name(*dst), blocks.join(","))
        }
        OutputVar::Acquire(a) => format!("acquire {}", f.action_name(*a)),
        OutputVar::Release(a) => format!("release {}", f.action_name(*a)),
    }
}

pub fn mode_name(m: CtrlMode) -> &'static str {
    match m {
        CtrlMode::Existing => "existing",
        CtrlMode::Synth => "synth",
    }
}

struct Builder<'a, 'b> {
    input: &'b EncodeInput<'a>,
    opts: &'b EncodeOptions,
    deps: Deps<'a>,
    paths: HashMap<(BlockId, BlockId, Option<BlockId>), Rc<Vec<Path>>>,
    vars: HashMap<OutputVar, VarId>,
    var_list: Vec<OutputVar>,
    defs: Vec<(DefKey, Expr)>,
    def_ids: HashMap<DefKey, DefId>,
    pending: Vec<DefId>,
}

impl<'a, 'b> Builder<'a, 'b> {
    fn cfg(&self) -> &'a NormalizedCfg {
        self.input.cfg
    }

    fn out(&mut self, v: OutputVar) -> Expr {
        let next = self.var_list.len();
        let id = *self.vars.entry(v.clone()).or_insert(next);
        if id == next {
            self.var_list.push(v);
        }
        Expr::Out(id)
    }

    fn def(&mut self, key: DefKey) -> DefId {
        if let Some(&d) = self.def_ids.get(&key) {
            return d;
        }
        let d = self.defs.len();
        self.defs.push((key.clone(), Expr::True));
        self.def_ids.insert(key, d);
        self.pending.push(d);
        d
    }

    fn paths(&mut self, s: ActionId, t: ActionId, b: Option<BlockId>) -> Result<Rc<Vec<Path>>, PathExplosion> {
        let cfg = self.cfg();
        let key = (cfg.block_of(s), cfg.block_of(t), b);
        if let Some(p) = self.paths.get(&key) {
            return Ok(p.clone());
        }
        let p = Rc::new(simple_paths(cfg, key.0, key.1, b, self.opts.max_paths)?);
        self.paths.insert(key, p.clone());
        Ok(p)
    }

    fn kinds(&self, pred: impl Fn(&BarrierKind) -> bool) -> Vec<usize> {
        self.input.profile.kinds.iter().enumerate().filter(|(_, k)| pred(k)).map(|(i, _)| i).collect()
    }

    fn barriers_on(&mut self, edges: &[EdgeId], kinds: &[usize]) -> Vec<Expr> {
        let mut out = Vec::new();
        for &e in edges {
            for &k in kinds {
                out.push(self.out(OutputVar::Barrier { edge: e, kind: k }));
            }
        }
        out
    }

    fn release(&mut self, t: ActionId) -> Expr {
        if self.cfg().func.action(t).is_write() && self.input.profile.has_mode(ActionMode::Release) {
            self.out(OutputVar::Release(t))
        } else {
            Expr::False
        }
    }

    fn acquire(&mut self, s: ActionId) -> Expr {
        if self.cfg().func.action(s).reads() && self.input.profile.has_mode(ActionMode::Acquire) {
            self.out(OutputVar::Acquire(s))
        } else {
            Expr::False
        }
    }

    fn vcut_path(&mut self, t: ActionId, p: &Path) -> Expr {
        if self.input.profile.vis_exec_free {
            return Expr::True;
        }
        let vis = self.kinds(BarrierKind::cuts_vis);
        let mut terms = self.barriers_on(&p.edges, &vis);
        terms.push(self.release(t));
        Expr::or(terms)
    }

    fn exec_barrier_cut(&mut self, s: ActionId, p: &Path) -> Expr {
        let reads = self.cfg().func.action(s).reads();
        let kinds = self.kinds(|k| k.cuts_exec_any() || (reads && k.cuts_exec_from_read()));
        Expr::or(self.barriers_on(&p.edges, &kinds))
    }

    fn ctrl_path(&mut self, s: ActionId, p: &Path) -> Expr {
        if !self.opts.ctrl_deps {
            return Expr::False;
        }
        let mut terms = Vec::new();
        for &e in &p.edges {
            if let Some(mode) = self.deps.ctrl_mode(s, e) {
                terms.push(self.out(OutputVar::UseCtrl { src: s, edge: e, mode }));
            }
        }
        Expr::or(terms)
    }

    fn datacut_path(&mut self, b: Option<BlockId>, s: ActionId, t: ActionId, p: &Path) -> Expr {
        if !self.opts.data_deps || !self.deps.can_data(b, s, t, p) {
            return Expr::False;
        }
        self.out(OutputVar::UseData { binding: b, src: s, dst: t, path: p.blocks.clone() })
    }

    fn xcut_path(&mut self, b: Option<BlockId>, s: ActionId, t: ActionId, p: &Path) -> Expr {
        let vcut = self.vcut_path(t, p);
        if vcut == Expr::True {
            return Expr::True;
        }
        let exec = self.exec_barrier_cut(s, p);
        let acq = self.acquire(s);
        let ctrl = if self.cfg().func.action(t).is_write() { self.ctrl_path(s, p) } else { Expr::False };
        let data = self.datacut_path(b, s, t, p);
        let mut terms = vec![vcut, exec, acq];
        let self_key = DefKey::XCut { binding: b, src: s, dst: s };
        if ctrl != Expr::False {
            if self.opts.self_order {
                let c = self.def(DefKey::Ctrl { binding: b, src: s, dst: s });
                let x = self.def(self_key.clone());
                terms.push(Expr::and([ctrl, Expr::or([Expr::Def(c), Expr::Def(x)])]));
            } else {
                terms.push(ctrl);
            }
        }
        if data != Expr::False {
            if self.opts.self_order {
                let x = self.def(self_key);
                terms.push(Expr::and([data, Expr::Def(x)]));
            } else {
                terms.push(data);
            }
        }
        Expr::or(terms)
    }

    fn define(&mut self, key: &DefKey) -> Result<Expr, PathExplosion> {
        let profile = self.input.profile;
        Ok(match *key {
            DefKey::PCut { binding, src, dst } => {
                let push = self.kinds(BarrierKind::cuts_push);
                let paths = self.paths(src, dst, binding)?;
                let mut conj = Vec::new();
                for p in paths.iter() {
                    let terms = self.barriers_on(&p.edges, &push);
                    conj.push(Expr::or(terms));
                }
                Expr::and(conj)
            }
            DefKey::VCut { binding, src, dst } => {
                let paths = self.paths(src, dst, binding)?;
                let conj: Vec<Expr> = paths.iter().map(|p| self.vcut_path(dst, p)).collect();
                Expr::and(conj)
            }
            DefKey::XCut { binding, src, dst } => {
                let paths = self.paths(src, dst, binding)?;
                let conj: Vec<Expr> = paths.iter().map(|p| self.xcut_path(binding, src, dst, p)).collect();
                Expr::and(conj)
            }
            DefKey::Ctrl { binding, src, dst } => {
                let paths = self.paths(src, dst, binding)?;
                let conj: Vec<Expr> = paths.iter().map(|p| self.ctrl_path(src, p)).collect();
                Expr::and(conj)
            }
            DefKey::Boundary { action, side, kind } => {
                if profile.vis_exec_free {
                    return Ok(Expr::True);
                }
                let cfg = self.cfg();
                let block = cfg.block_of(action);
                let reads = cfg.func.action(action).reads();
                let (edges, kinds, extra) = match (side, kind) {
                    (Side::Pre, EdgeKind::Vo) => (&cfg.preds[block.index()], self.kinds(BarrierKind::cuts_vis), self.release(action)),
                    (Side::Pre, _) => (&cfg.preds[block.index()], self.kinds(BarrierKind::cuts_exec_any), self.release(action)),
                    (Side::Post, EdgeKind::Vo) => (&cfg.succs[block.index()], self.kinds(BarrierKind::cuts_vis), Expr::False),
                    (Side::Post, _) => (
                        &cfg.succs[block.index()],
                        self.kinds(|k| k.cuts_exec_any() || (reads && k.cuts_exec_from_read())),
                        self.acquire(action),
                    ),
                };
                let mut conj = Vec::new();
                for &e in edges {
                    let mut terms = self.barriers_on(&[e], &kinds);
                    terms.push(extra.clone());
                    conj.push(Expr::or(terms));
                }
                Expr::and(conj)
            }
        })
    }

    fn finish(self, roots: Vec<Root>, root_names: Vec<String>) -> Problem {
        let cfg = self.input.cfg;
        let profile = self.input.profile;
        let costs = self.input.costs;
        let weights = self.input.weights;

        let mut order: Vec<VarId> = (0..self.var_list.len()).collect();
        order.sort_by(|a, b| self.var_list[*a].cmp(&self.var_list[*b]));
        let mut remap = vec![0; order.len()];
        for (new, &old) in order.iter().enumerate() {
            remap[old] = new;
        }
        let vars: Vec<OutputVar> = order.iter().map(|&i| self.var_list[i].clone()).collect();

        let max_in = |a: ActionId| -> u64 {
            let b = cfg.block_of(a);
            cfg.preds[b.index()].iter().map(|e| weights[e.index()]).max().unwrap_or(1)
        };
        let mut groups: Vec<CostGroup> = Vec::new();
        let mut data_groups: BTreeMap<(ActionId, ActionId), usize> = BTreeMap::new();
        let mut var_group = Vec::with_capacity(vars.len());
        for (i, v) in vars.iter().enumerate() {
            let cost = match v {
                OutputVar::Barrier { edge, kind } => weights[edge.index()].saturating_mul(costs.kind(profile.kinds[*kind].name)),
                OutputVar::UseCtrl { edge, mode, .. } => weights[edge.index()].saturating_mul(match mode {
                    CtrlMode::Existing => costs.ctrl_existing,
                    CtrlMode::Synth => costs.ctrl_synth,
                }),
                OutputVar::UseData { src, dst, .. } => {
                    if let Some(&g) = data_groups.get(&(*src, *dst)) {
                        groups[g].vars.push(i);
                        var_group.push(g);
                        continue;
                    }
                    data_groups.insert((*src, *dst), groups.len());
                    costs.data_existing
                }
                OutputVar::Acquire(a) => max_in(*a).saturating_mul(costs.acquire),
                OutputVar::Release(a) => max_in(*a).saturating_mul(costs.release),
            };
            var_group.push(groups.len());
            groups.push(CostGroup { cost, vars: vec![i] });
        }

        let var_names = vars.iter().map(|v| var_name(cfg, profile, v)).collect();
        let def_names = self.defs.iter().map(|(k, _)| def_name(cfg, k)).collect();
        let defs = self.defs.into_iter().map(|(k, e)| (k, e.remap(&remap))).collect();
        let roots = roots.into_iter().map(|r| Root { of: r.of, expr: r.expr.remap(&remap) }).collect();
        Problem { vars, var_names, groups, var_group, defs, def_names, roots, root_names }
    }
}

fn def_name(cfg: &NormalizedCfg, k: &DefKey) -> String {
    let f = &cfg.func;
    let b = |b: &Option<BlockId>| b.map(|b| format!("{},", cfg.block_name(b))).unwrap_or_default();
    match k {
        DefKey::PCut { binding, src, dst } => format!("pcut({}{},{})", b(binding), f.action_name(*src), f.action_name(*dst)),
        DefKey::VCut { binding, src, dst } => format!("vcut({}{},{})", b(binding), f.action_name(*src), f.action_name(*dst)),
        DefKey::XCut { binding, src, dst } => format!("xcut({}{},{})", b(binding), f.action_name(*src), f.action_name(*dst)),
        DefKey::Ctrl { binding, src, dst } => format!("ctrl({}{},{})", b(binding), f.action_name(*src), f.action_name(*dst)),
        DefKey::Boundary { action, side, kind } => {
            let side = match side {
                Side::Pre => "pre",
                Side::Post => "post",
            };
            format!("{side}_{kind}({})", f.action_name(*action))
        }
    }
}
