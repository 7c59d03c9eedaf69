//! Control and data dependency facts.
//!
//! A value depends on an action `s` in an execution when it is computed
//! from the value `s` read, through pure ops and phis, in that execution.
//! Values loaded by other reads start fresh chains. Facts are decided over
//! all executions of interest: every walk that follows a path and may leave
//! it for closed detours inside the admissible region. A walk that runs `s`
//! again is dropped; from there on it is a walk from the later instance,
//! which the analysis of some other path covers.

use std::collections::{HashMap, HashSet};

use fixedbitset::FixedBitSet;

use crate::graph::{Dominators, Path};
use crate::ir::{ActionId, ActionKind, BlockId, EdgeId, Instr, NormalizedCfg, Operand, Terminator, ValueId};

/// Blocks an execution may visit while following a path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdmissibleRegion {
    pub path: Path,
    pub binding: Option<BlockId>,
    pub blocks: Vec<bool>,
}

impl AdmissibleRegion {
    pub fn contains(&self, b: BlockId) -> bool {
        self.blocks[b.index()]
    }
}

/// Blocks reachable from the head of `p` and reaching its tail, both
/// without touching `binding`, plus the blocks of `p`.
pub fn admissible_region(cfg: &NormalizedCfg, p: &Path, binding: Option<BlockId>) -> AdmissibleRegion {
    let n = cfg.num_blocks();
    let fwd = reach(n, p.head(), binding, |u| cfg.succs[u].iter().map(|e| cfg.edge(*e).dst.index()).collect());
    let bwd = reach(n, p.tail(), binding, |u| cfg.preds[u].iter().map(|e| cfg.edge(*e).src.index()).collect());
    let mut blocks: Vec<bool> = (0..n).map(|i| fwd[i] && bwd[i]).collect();
    for b in &p.blocks {
        blocks[b.index()] = true;
    }
    AdmissibleRegion { path: p.clone(), binding, blocks }
}

fn reach(n: usize, from: BlockId, avoid: Option<BlockId>, next: impl Fn(usize) -> Vec<usize>) -> Vec<bool> {
    let mut seen = vec![false; n];
    if avoid == Some(from) {
        return seen;
    }
    seen[from.index()] = true;
    let mut stack = vec![from.index()];
    while let Some(u) = stack.pop() {
        for v in next(u) {
            if !seen[v] && avoid.map(|a| a.index()) != Some(v) {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CtrlMode {
    /// A branch already in the function tests a dependent value.
    Existing,
    /// A bogus branch on the read value is added.
    Synth,
}

/// Dependency oracle for one normalized function, memoized.
pub struct Deps<'a> {
    cfg: &'a NormalizedCfg,
    dom: Dominators,
    synth: bool,
    ctrl_memo: HashMap<(ActionId, BlockId), bool>,
    data_memo: HashMap<(Option<BlockId>, ActionId, ActionId, Vec<BlockId>), bool>,
}

impl<'a> Deps<'a> {
    pub fn new(cfg: &'a NormalizedCfg, synth: bool) -> Self {
        let dom = crate::graph::dominators(cfg);
        Deps { cfg, dom, synth, ctrl_memo: HashMap::new(), data_memo: HashMap::new() }
    }

    pub fn dominators(&self) -> &Dominators {
        &self.dom
    }

    /// Whether `v`, evaluated on arrival at the tail of the region's path
    /// (before the tail block runs), depends on `s` on every admissible walk.
    pub fn value_depends(&self, s: ActionId, v: ValueId, region: &AdmissibleRegion) -> bool {
        self.on_arrival(s, region, |deps| deps[v.index()])
    }

    /// Whether `t`'s address (reads) or address or data (writes, rmws)
    /// depends on `s` on every execution following `p` avoiding `binding`.
    pub fn can_data(&mut self, binding: Option<BlockId>, s: ActionId, t: ActionId, p: &Path) -> bool {
        let key = (binding, s, t, p.blocks.clone());
        if let Some(&r) = self.data_memo.get(&key) {
            return r;
        }
        let r = self.can_data_uncached(binding, s, t, p);
        self.data_memo.insert(key, r);
        r
    }

    fn can_data_uncached(&self, binding: Option<BlockId>, s: ActionId, t: ActionId, p: &Path) -> bool {
        let f = &self.cfg.func;
        if !f.action(s).reads() {
            return false;
        }
        let ta = f.action(t);
        let ops: Vec<ValueId> = match ta.kind {
            ActionKind::Read => ta.address().into_iter().collect(),
            _ => ta.operands().collect(),
        };
        if ops.is_empty() {
            return false;
        }
        let region = admissible_region(self.cfg, p, binding);
        self.on_arrival(s, &region, |deps| ops.iter().any(|v| deps[v.index()]))
    }

    /// How `s` can order the edge `e` through a control dependency.
    pub fn ctrl_mode(&mut self, s: ActionId, e: EdgeId) -> Option<CtrlMode> {
        if self.can_ctrl(s, e, false) {
            Some(CtrlMode::Existing)
        } else if self.synth && self.can_ctrl(s, e, true) {
            Some(CtrlMode::Synth)
        } else {
            None
        }
    }

    /// Existing mode: `e` leaves a conditional branch whose condition
    /// depends on `s` whenever the branch is reached after `s`. Synth mode
    /// also accepts any edge whose source `s`'s block strictly dominates.
    pub fn can_ctrl(&mut self, s: ActionId, e: EdgeId, synth: bool) -> bool {
        let edge = *self.cfg.edge(e);
        if edge.pseudo || !self.cfg.func.action(s).reads() {
            return false;
        }
        let sb = self.cfg.block_of(s);
        if synth && self.dom.strictly_dominates(sb, edge.src) {
            return true;
        }
        if let Some(&r) = self.ctrl_memo.get(&(s, edge.src)) {
            return r;
        }
        let r = self.branch_depends(s, edge.src);
        self.ctrl_memo.insert((s, edge.src), r);
        r
    }

    fn branch_depends(&self, s: ActionId, br: BlockId) -> bool {
        let cond = match &self.cfg.func.block(br).term {
            Terminator::Br { cond: Operand::Value(v), .. } => *v,
            _ => return false,
        };
        let n = self.cfg.func.values.len();
        let start = (self.cfg.block_of(s), self.initial(s, n));
        let mut seen: HashSet<(BlockId, FixedBitSet)> = HashSet::new();
        let mut stack = vec![start.clone()];
        seen.insert(start);
        let mut arrived = false;
        while let Some((u, deps)) = stack.pop() {
            if u == br {
                arrived = true;
                if !deps[cond.index()] {
                    return false;
                }
            }
            for e in &self.cfg.succs[u.index()] {
                let v = self.cfg.edge(*e).dst;
                let mut d = deps.clone();
                if self.exec_block(v, u, s, &mut d) && seen.insert((v, d.clone())) {
                    stack.push((v, d));
                }
            }
        }
        arrived
    }

    fn initial(&self, s: ActionId, n: usize) -> FixedBitSet {
        let mut deps = FixedBitSet::with_capacity(n);
        if let Some(v) = self.cfg.func.action(s).def {
            deps.insert(v.index());
        }
        deps
    }

    /// Explore walks along the region's path with closed detours and
    /// require `check` on every arrival at the tail.
    fn on_arrival(&self, s: ActionId, region: &AdmissibleRegion, check: impl Fn(&FixedBitSet) -> bool) -> bool {
        let p = &region.path;
        let last = p.blocks.len() - 1;
        if last == 0 {
            return false;
        }
        let n = self.cfg.func.values.len();
        // State: (position on path, current block, dependent values).
        let start = (0usize, p.blocks[0], self.initial(s, n));
        let mut seen: HashSet<(usize, BlockId, FixedBitSet)> = HashSet::new();
        let mut stack = vec![start.clone()];
        seen.insert(start);
        let mut push = |st: (usize, BlockId, FixedBitSet), stack: &mut Vec<_>| {
            if seen.insert(st.clone()) {
                stack.push(st);
            }
        };
        while let Some((i, u, deps)) = stack.pop() {
            if i < last && u == p.blocks[i] {
                // Step along the path.
                let next = p.blocks[i + 1];
                let mut d = deps.clone();
                if i + 1 == last {
                    self.enter_phis(next, u, &mut d);
                    if !check(&d) {
                        return false;
                    }
                    if self.exec_rest(next, s, &mut d) {
                        push((last, next, d), &mut stack);
                    }
                } else if self.exec_block(next, u, s, &mut d) {
                    push((i + 1, next, d), &mut stack);
                }
            }
            // Detour, or continue a detour, within the region. After the
            // tail has run, later arrivals at the tail are checked too.
            for e in &self.cfg.succs[u.index()] {
                let v = self.cfg.edge(*e).dst;
                if !region.contains(v) {
                    continue;
                }
                let mut d = deps.clone();
                if i == last && v == p.blocks[last] {
                    self.enter_phis(v, u, &mut d);
                    if !check(&d) {
                        return false;
                    }
                    if self.exec_rest(v, s, &mut d) {
                        push((i, v, d), &mut stack);
                    }
                } else if self.exec_block(v, u, s, &mut d) {
                    push((i, v, d), &mut stack);
                }
            }
        }
        true
    }

    fn enter_phis(&self, b: BlockId, from: BlockId, deps: &mut FixedBitSet) {
        let updates: Vec<(ValueId, bool)> = self
            .cfg
            .func
            .block(b)
            .instrs
            .iter()
            .map_while(|ins| match ins {
                Instr::Phi { dest, incoming } => {
                    let dep = incoming
                        .iter()
                        .find(|(p, _)| *p == from)
                        .and_then(|(_, o)| o.value())
                        .is_some_and(|v| deps[v.index()]);
                    Some((*dest, dep))
                }
                _ => None,
            })
            .collect();
        for (v, d) in updates {
            deps.set(v.index(), d);
        }
    }

    /// Run block `b` entered from `from`. False when the block runs `s`.
    fn exec_block(&self, b: BlockId, from: BlockId, s: ActionId, deps: &mut FixedBitSet) -> bool {
        self.enter_phis(b, from, deps);
        self.exec_rest(b, s, deps)
    }

    /// Run the non-phi instructions of `b`. False when the block runs `s`.
    fn exec_rest(&self, b: BlockId, s: ActionId, deps: &mut FixedBitSet) -> bool {
        let f = &self.cfg.func;
        for ins in &f.block(b).instrs {
            match ins {
                Instr::Phi { .. } | Instr::Bind(_) => {}
                Instr::Op { dest, args, .. } => {
                    let d = args.iter().filter_map(Operand::value).any(|v| deps[v.index()]);
                    deps.set(dest.index(), d);
                }
                Instr::Action(a) if *a == s => return false,
                Instr::Action(a) => {
                    if let Some(v) = f.action(*a).def {
                        deps.set(v.index(), false);
                    }
                }
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::simple_paths;
    use crate::ir::{normalize, parse_function};

    fn setup(src: &str) -> NormalizedCfg {
        normalize(&parse_function(src).unwrap())
    }

    fn act(c: &NormalizedCfg, name: &str) -> ActionId {
        c.func.action_by_name(name).unwrap()
    }

    fn paths(c: &NormalizedCfg, s: ActionId, t: ActionId, b: Option<BlockId>) -> Vec<Path> {
        simple_paths(c, c.block_of(s), c.block_of(t), b, 100).unwrap()
    }

    #[test]
    fn region_of_straight_line_is_the_path() {
        let c = setup("func f { block a: jmp b block b: jmp c block c: ret }");
        let p = &simple_paths(&c, BlockId(0), BlockId(2), None, 10).unwrap()[0];
        let r = admissible_region(&c, p, Some(BlockId(0)));
        assert_eq!(r.blocks, vec![true, true, true]);
    }

    #[test]
    fn region_includes_skipped_arm_unless_binding_blocks_it() {
        let c = setup(
            "func f { block e: jmp a
               block a: %c = op c() br %c ? l : r
               block l: jmp d
               block r: jmp d
               block d: ret }",
        );
        let (a, l, d) = (BlockId(1), BlockId(2), BlockId(4));
        let p = simple_paths(&c, a, d, Some(l), 10).unwrap().remove(0);
        assert!(admissible_region(&c, &p, None).contains(l));
        assert!(!admissible_region(&c, &p, Some(l)).contains(l));
        // The pseudo edge makes the entry reachable from the path too.
        assert!(admissible_region(&c, &p, None).contains(BlockId(0)));
    }

    const WIDGET: &str = "func use_widget {
        edge xo here(h) lookup -> r;
        block entry:
          bind h
          %key = op arg0()
          %slot = op index(%key)
          %w = read *%slot label lookup
          %foo_p = op field_foo(%w)
          %foo = read *%foo_p label r
          %bar_p = op field_bar(%w)
          %bar = read *%bar_p label r
          %sum = op add(%foo, %bar)
          ret %sum }";

    #[test]
    fn widget_field_loads_depend_on_lookup() {
        let c = setup(WIDGET);
        let mut d = Deps::new(&c, false);
        let h = c.bind_block(crate::ir::BindId(0));
        let s = act(&c, "lookup");
        for t in c.func.tagged("r") {
            let ps = paths(&c, s, t, Some(h));
            assert_eq!(ps.len(), 1);
            assert!(d.can_data(Some(h), s, t, &ps[0]));
            // Without the scope, walks around the exit-to-entry cycle run
            // lookup again and are left to the analysis of other paths.
            let region = admissible_region(&c, &ps[0], None);
            let addr = c.func.action(t).address().unwrap();
            assert!(d.value_depends(s, addr, &region));
        }
    }

    #[test]
    fn global_addresses_never_depend() {
        let c = setup(
            "func recv { edge xo rflag -> rdata;
               block e: jmp l
               block l: %f = read @flag label rflag br %f ? done : l
               block done: %d = read @data label rdata ret %d }",
        );
        let mut d = Deps::new(&c, false);
        let (s, t) = (act(&c, "rflag"), act(&c, "rdata"));
        for p in paths(&c, s, t, None) {
            assert!(!d.can_data(None, s, t, &p));
        }
        // The loop exit edge is controlled by the flag read.
        let done = c.block_of(t);
        let exit = c.preds[done.index()][0];
        assert_eq!(d.ctrl_mode(s, exit), Some(CtrlMode::Existing));
    }

    #[test]
    fn phi_mixing_dependent_and_literal_is_independent() {
        let c = setup(
            "func f { edge xo s -> t;
               block e: jmp a
               block a: %x = read @x label s %c = op c() br %c ? l : j
               block l: jmp j
               block j: %m = phi [a: 0], [l: %x] write *%m 1 label t ret }",
        );
        let mut d = Deps::new(&c, false);
        let (s, t) = (act(&c, "s"), act(&c, "t"));
        let ps = paths(&c, s, t, None);
        assert_eq!(ps.len(), 2);
        // Through `l` the address is %x; through the direct edge it is 0.
        let through_l: Vec<bool> = ps
            .iter()
            .map(|p| p.blocks.iter().any(|b| c.block_name(*b) == "l"))
            .collect();
        for (p, via_l) in ps.iter().zip(through_l) {
            assert_eq!(d.can_data(None, s, t, p), via_l, "{:?}", p.blocks);
        }
    }

    #[test]
    fn ringbuf_update_does_not_depend_on_the_data_read() {
        let c = setup(
            "func dequeue { edge xo dread -> dupdate;
               block e:
                 %front = read @front
                 %slot = op index(%front)
                 jmp r
               block r:
                 %v = read *%slot label dread
                 %nf = op inc(%front)
                 write @front %nf label dupdate
                 ret %v }",
        );
        let mut d = Deps::new(&c, false);
        let (s, t) = (act(&c, "dread"), act(&c, "dupdate"));
        for p in paths(&c, s, t, None) {
            assert!(!d.can_data(None, s, t, &p));
        }
    }

    #[test]
    fn parameter_branch_is_no_control_dependency_but_synth_is() {
        let c = setup(
            "func f { edge xo ra -> wb;
               block e: %b = op arg() jmp a
               block a: %r = read @a label ra br %b ? out : w
               block w: write @b 1 label wb jmp out
               block out: ret }",
        );
        let s = act(&c, "ra");
        let br = c.func.block_by_name("a.1").unwrap();
        let mut d = Deps::new(&c, false);
        for e in c.succs[br.index()].clone() {
            assert!(!d.can_ctrl(s, e, false));
            assert!(d.can_ctrl(s, e, true));
            assert_eq!(d.ctrl_mode(s, e), None);
        }
        let mut d = Deps::new(&c, true);
        let e = c.succs[br.index()][0];
        assert_eq!(d.ctrl_mode(s, e), Some(CtrlMode::Synth));
    }
}
