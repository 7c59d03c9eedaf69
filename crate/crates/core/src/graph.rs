//! Dominators, loop structure, edge weights and simple-path enumeration.

use petgraph::algo::{dominators, tarjan_scc};
use petgraph::graph::{DiGraph, NodeIndex};

use crate::ir::{BlockId, EdgeId, NormalizedCfg};

pub const DEFAULT_MAX_PATHS: usize = 4096;
pub const DEFAULT_WEIGHT_CAP: u64 = 1 << 20;

/// Dominator tree of a graph given as successor lists.
#[derive(Clone, Debug)]
pub struct Dominators {
    entry: BlockId,
    idom: Vec<Option<BlockId>>,
}

impl Dominators {
    pub fn compute(n: usize, entry: BlockId, succs: &[Vec<BlockId>]) -> Self {
        let mut g = DiGraph::<(), ()>::with_capacity(n, 0);
        for _ in 0..n {
            g.add_node(());
        }
        for (u, ss) in succs.iter().enumerate() {
            for v in ss {
                g.add_edge(NodeIndex::new(u), NodeIndex::new(v.index()), ());
            }
        }
        let d = dominators::simple_fast(&g, NodeIndex::new(entry.index()));
        let idom = (0..n)
            .map(|i| d.immediate_dominator(NodeIndex::new(i)).map(|x| BlockId::from_index(x.index())))
            .collect();
        Dominators { entry, idom }
    }

    pub fn reachable(&self, b: BlockId) -> bool {
        b == self.entry || self.idom[b.index()].is_some()
    }

    pub fn idom(&self, b: BlockId) -> Option<BlockId> {
        self.idom[b.index()]
    }

    /// Reflexive dominance; false when either block is unreachable.
    pub fn dominates(&self, a: BlockId, b: BlockId) -> bool {
        if !self.reachable(a) || !self.reachable(b) {
            return false;
        }
        let mut x = Some(b);
        while let Some(y) = x {
            if y == a {
                return true;
            }
            x = self.idom(y);
        }
        false
    }

    pub fn strictly_dominates(&self, a: BlockId, b: BlockId) -> bool {
        a != b && self.dominates(a, b)
    }
}

/// Dominators of a normalized CFG over its real edges.
pub fn dominators(cfg: &NormalizedCfg) -> Dominators {
    Dominators::compute(cfg.num_blocks(), cfg.entry(), &cfg.real_succs())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoopInfo {
    /// Loop depth per edge; pseudo edges are 0.
    pub depth: Vec<u32>,
    /// Edges closing a cycle (back edges, or their stand-ins in
    /// irreducible regions). Removing them leaves the real edges acyclic.
    pub loop_closing: Vec<bool>,
    pub irreducible: bool,
}

pub fn loop_depths(cfg: &NormalizedCfg) -> LoopInfo {
    let n = cfg.num_blocks();
    let dom = dominators(cfg);
    let real: Vec<EdgeId> = cfg.edge_ids().filter(|e| !cfg.edge(*e).pseudo).collect();
    let mut loop_closing = vec![false; cfg.edges.len()];
    for &e in &real {
        let ce = cfg.edge(e);
        loop_closing[e.index()] = dom.dominates(ce.dst, ce.src);
    }
    if !acyclic_without(cfg, &loop_closing) {
        return scc_loop_depths(cfg);
    }

    // Natural loops, merged per header.
    let mut headers: Vec<BlockId> = real
        .iter()
        .filter(|e| loop_closing[e.index()])
        .map(|e| cfg.edge(*e).dst)
        .collect();
    headers.sort();
    headers.dedup();
    let mut bodies: Vec<Vec<bool>> = Vec::new();
    for &h in &headers {
        let mut body = vec![false; n];
        body[h.index()] = true;
        let mut stack: Vec<BlockId> = real
            .iter()
            .filter(|e| loop_closing[e.index()] && cfg.edge(**e).dst == h)
            .map(|e| cfg.edge(*e).src)
            .collect();
        while let Some(x) = stack.pop() {
            if body[x.index()] {
                continue;
            }
            body[x.index()] = true;
            for p in &cfg.preds[x.index()] {
                let pe = cfg.edge(*p);
                if !pe.pseudo && dom.reachable(pe.src) {
                    stack.push(pe.src);
                }
            }
        }
        bodies.push(body);
    }
    let mut depth = vec![0u32; cfg.edges.len()];
    for &e in &real {
        let ce = cfg.edge(e);
        depth[e.index()] = bodies.iter().filter(|b| b[ce.src.index()] && b[ce.dst.index()]).count() as u32;
    }
    LoopInfo { depth, loop_closing, irreducible: false }
}

fn acyclic_without(cfg: &NormalizedCfg, removed: &[bool]) -> bool {
    let n = cfg.num_blocks();
    let mut indeg = vec![0usize; n];
    for (i, e) in cfg.edges.iter().enumerate() {
        if !e.pseudo && !removed[i] {
            indeg[e.dst.index()] += 1;
        }
    }
    let mut ready: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut seen = 0;
    while let Some(u) = ready.pop() {
        seen += 1;
        for e in &cfg.succs[u] {
            let ce = cfg.edge(*e);
            if ce.pseudo || removed[e.index()] {
                continue;
            }
            indeg[ce.dst.index()] -= 1;
            if indeg[ce.dst.index()] == 0 {
                ready.push(ce.dst.index());
            }
        }
    }
    seen == n
}

/// Loop nesting from strongly connected components: every non-trivial
/// component is a loop; edges into its entry blocks from inside are
/// removed and the component is analysed again for inner loops.
fn scc_loop_depths(cfg: &NormalizedCfg) -> LoopInfo {
    let mut depth = vec![0u32; cfg.edges.len()];
    let mut loop_closing = vec![false; cfg.edges.len()];
    let mut removed: Vec<bool> = cfg.edges.iter().map(|e| e.pseudo).collect();
    let mut work: Vec<Vec<usize>> = vec![(0..cfg.num_blocks()).collect()];
    while let Some(nodes) = work.pop() {
        let mut inside = vec![false; cfg.num_blocks()];
        for &u in &nodes {
            inside[u] = true;
        }
        let mut g = DiGraph::<usize, usize>::new();
        let idx: Vec<Option<NodeIndex>> = (0..cfg.num_blocks())
            .map(|u| inside[u].then(|| g.add_node(u)))
            .collect();
        for (i, e) in cfg.edges.iter().enumerate() {
            if removed[i] {
                continue;
            }
            if let (Some(a), Some(b)) = (idx[e.src.index()], idx[e.dst.index()]) {
                g.add_edge(a, b, i);
            }
        }
        for comp in tarjan_scc(&g) {
            let members: Vec<usize> = comp.iter().map(|x| g[*x]).collect();
            let mut in_comp = vec![false; cfg.num_blocks()];
            for &u in &members {
                in_comp[u] = true;
            }
            let internal: Vec<usize> = (0..cfg.edges.len())
                .filter(|&i| {
                    let e = &cfg.edges[i];
                    !removed[i] && in_comp[e.src.index()] && in_comp[e.dst.index()]
                })
                .collect();
            if internal.is_empty() {
                continue;
            }
            for &i in &internal {
                depth[i] += 1;
            }
            let mut entries: Vec<usize> = members
                .iter()
                .copied()
                .filter(|&u| {
                    u == cfg.entry().index()
                        || cfg.preds[u].iter().any(|p| {
                            let pe = cfg.edge(*p);
                            !pe.pseudo && !in_comp[pe.src.index()]
                        })
                })
                .collect();
            if entries.is_empty() {
                entries.push(*members.iter().min().unwrap());
            }
            for &i in &internal {
                if entries.contains(&cfg.edges[i].dst.index()) {
                    removed[i] = true;
                    loop_closing[i] = true;
                }
            }
            work.push(members);
        }
    }
    LoopInfo { depth, loop_closing, irreducible: true }
}

/// Execution-frequency weight of every edge:
/// `max(1, pathcount) * loop_factor^depth`, saturated at `cap`.
///
/// `pathcount` counts entry-to-sink paths through the edge in the acyclic
/// graph left after removing pseudo and loop-closing edges. Removed edges
/// count the paths reaching their source.
pub fn edge_weights(cfg: &NormalizedCfg, loops: &LoopInfo, loop_factor: u64, cap: u64) -> Vec<u64> {
    let n = cfg.num_blocks();
    let in_dag = |e: EdgeId| !cfg.edge(e).pseudo && !loops.loop_closing[e.index()];

    let order = topo_order(cfg, &in_dag);
    let mut from_entry = vec![0u64; n];
    from_entry[cfg.entry().index()] = 1;
    for &u in &order {
        for e in &cfg.succs[u] {
            if in_dag(*e) {
                let v = cfg.edge(*e).dst.index();
                from_entry[v] = from_entry[v].saturating_add(from_entry[u]);
            }
        }
    }
    let mut to_sink = vec![0u64; n];
    for &u in order.iter().rev() {
        let outs: Vec<EdgeId> = cfg.succs[u].iter().copied().filter(|e| in_dag(*e)).collect();
        to_sink[u] = if outs.is_empty() {
            1
        } else {
            outs.iter().fold(0u64, |acc, e| acc.saturating_add(to_sink[cfg.edge(*e).dst.index()]))
        };
    }

    cfg.edge_ids()
        .map(|e| {
            let ce = cfg.edge(e);
            let pc = if in_dag(e) {
                from_entry[ce.src.index()].saturating_mul(to_sink[ce.dst.index()])
            } else {
                from_entry[ce.src.index()]
            };
            let mut w = pc.max(1);
            for _ in 0..loops.depth[e.index()] {
                w = w.saturating_mul(loop_factor);
            }
            w.min(cap).max(1)
        })
        .collect()
}

fn topo_order(cfg: &NormalizedCfg, in_dag: &dyn Fn(EdgeId) -> bool) -> Vec<usize> {
    let n = cfg.num_blocks();
    let mut indeg = vec![0usize; n];
    for e in cfg.edge_ids() {
        if in_dag(e) {
            indeg[cfg.edge(e).dst.index()] += 1;
        }
    }
    let mut ready: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).rev().collect();
    let mut order = Vec::with_capacity(n);
    while let Some(u) = ready.pop() {
        order.push(u);
        for e in &cfg.succs[u] {
            if in_dag(*e) {
                let v = cfg.edge(*e).dst.index();
                indeg[v] -= 1;
                if indeg[v] == 0 {
                    ready.push(v);
                }
            }
        }
    }
    order
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Path {
    pub blocks: Vec<BlockId>,
    pub edges: Vec<EdgeId>,
}

impl Path {
    pub fn head(&self) -> BlockId {
        self.blocks[0]
    }

    pub fn tail(&self) -> BlockId {
        *self.blocks.last().unwrap()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("more than {cap} simple paths from block `{from}` to block `{to}`")]
pub struct PathExplosion {
    pub from: String,
    pub to: String,
    pub cap: usize,
}

/// Simple paths from `from` to `to` over real and pseudo edges, avoiding
/// `excluded`. When `from == to` the result is the simple cycles through
/// that block. Paths come out in lexicographic order of block ids.
pub fn simple_paths(
    cfg: &NormalizedCfg,
    from: BlockId,
    to: BlockId,
    excluded: Option<BlockId>,
    cap: usize,
) -> Result<Vec<Path>, PathExplosion> {
    let mut out = Vec::new();
    if excluded == Some(from) || excluded == Some(to) {
        return Ok(out);
    }
    let mut on_path = vec![false; cfg.num_blocks()];
    if let Some(x) = excluded {
        on_path[x.index()] = true;
    }
    let mut blocks = vec![from];
    let mut edges = Vec::new();
    on_path[from.index()] = true;
    // Explicit stack of (block, next successor index).
    let mut stack: Vec<(BlockId, usize)> = vec![(from, 0)];
    while let Some(top) = stack.last_mut() {
        let (u, i) = *top;
        let succ = &cfg.succs[u.index()];
        if i == succ.len() {
            stack.pop();
            if stack.is_empty() {
                break;
            }
            on_path[u.index()] = false;
            blocks.pop();
            edges.pop();
            continue;
        }
        top.1 += 1;
        let e = succ[i];
        let v = cfg.edge(e).dst;
        if v == to {
            let mut p = Path { blocks: blocks.clone(), edges: edges.clone() };
            p.blocks.push(v);
            p.edges.push(e);
            out.push(p);
            if out.len() > cap {
                return Err(PathExplosion {
                    from: cfg.block_name(from).to_string(),
                    to: cfg.block_name(to).to_string(),
                    cap,
                });
            }
            continue;
        }
        if on_path[v.index()] {
            continue;
        }
        on_path[v.index()] = true;
        blocks.push(v);
        edges.push(e);
        stack.push((v, 0));
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{normalize, parse_function};

    fn cfg(src: &str) -> NormalizedCfg {
        normalize(&parse_function(src).unwrap())
    }

    fn b(c: &NormalizedCfg, name: &str) -> BlockId {
        c.func.block_by_name(name).unwrap()
    }

    fn w_of(c: &NormalizedCfg, w: &[u64], s: &str, d: &str) -> u64 {
        w[c.find_edge(b(c, s), b(c, d)).unwrap().index()]
    }

    fn d_of(c: &NormalizedCfg, l: &LoopInfo, s: &str, d: &str) -> u32 {
        l.depth[c.find_edge(b(c, s), b(c, d)).unwrap().index()]
    }

    const WHILE: &str = "func f { block e: jmp h
        block h: %c = op c() br %c ? body : x
        block body: jmp h
        block x: ret }";

    #[test]
    fn straight_line_has_depth_zero_and_unit_weight() {
        let c = cfg("func f { block a: jmp b block b: jmp c block c: ret }");
        let l = loop_depths(&c);
        assert!(l.depth.iter().all(|&d| d == 0));
        assert!(edge_weights(&c, &l, 4, DEFAULT_WEIGHT_CAP).iter().all(|&w| w == 1));
    }

    #[test]
    fn while_loop_depths_and_weights() {
        let c = cfg(WHILE);
        let l = loop_depths(&c);
        assert!(!l.irreducible);
        assert_eq!(d_of(&c, &l, "e", "h"), 0);
        assert_eq!(d_of(&c, &l, "h", "body"), 1);
        assert_eq!(d_of(&c, &l, "body", "h"), 1);
        assert_eq!(d_of(&c, &l, "h", "x"), 0);
        let w = edge_weights(&c, &l, 4, DEFAULT_WEIGHT_CAP);
        // DAG paths: e-h-body and e-h-x; the body edge lies on one of them.
        assert_eq!(w_of(&c, &w, "h", "body"), 4);
        assert_eq!(w_of(&c, &w, "e", "h"), 2);
        assert_eq!(w_of(&c, &w, "body", "h"), 4);
    }

    #[test]
    fn nested_loops() {
        let c = cfg(
            "func f { block e: jmp h1
               block h1: %c = op c() br %c ? h2 : x
               block h2: %d = op d() br %d ? in : l1
               block in: jmp h2
               block l1: jmp h1
               block x: ret }",
        );
        let l = loop_depths(&c);
        assert_eq!(d_of(&c, &l, "h2", "in"), 2);
        assert_eq!(d_of(&c, &l, "in", "h2"), 2);
        assert_eq!(d_of(&c, &l, "h2", "l1"), 1);
        assert_eq!(d_of(&c, &l, "e", "h1"), 0);
    }

    #[test]
    fn diamond_weights() {
        let c = cfg(
            "func f { block p: jmp a
               block a: %c = op c() br %c ? l : r
               block l: jmp d
               block r: jmp d
               block d: ret }",
        );
        let l = loop_depths(&c);
        let w = edge_weights(&c, &l, 4, DEFAULT_WEIGHT_CAP);
        assert_eq!(w_of(&c, &w, "p", "a"), 2);
        assert_eq!(w_of(&c, &w, "a", "l"), 1);
        assert_eq!(w_of(&c, &w, "r", "d"), 1);
    }

    #[test]
    fn irreducible_falls_back_to_components() {
        let c = cfg(
            "func f { block e: %c = op c() br %c ? a : b
               block a: %x = op c() br %x ? b : out
               block b: jmp a
               block out: ret }",
        );
        let l = loop_depths(&c);
        assert!(l.irreducible);
        assert_eq!(d_of(&c, &l, "b", "a"), 1);
        assert_eq!(l.loop_closing.iter().filter(|x| **x).count(), 2);
        let w = edge_weights(&c, &l, 4, DEFAULT_WEIGHT_CAP);
        assert!(w.iter().all(|&x| x >= 1));
    }

    #[test]
    fn weight_cap_saturates() {
        let c = cfg(WHILE);
        let l = loop_depths(&c);
        let w = edge_weights(&c, &l, 1 << 30, 1000);
        assert_eq!(w_of(&c, &w, "h", "body"), 1000);
    }

    #[test]
    fn chain_and_diamond_paths() {
        let c = cfg("func f { block a: jmp b block b: jmp c block c: ret }");
        let p = simple_paths(&c, b(&c, "a"), b(&c, "c"), None, 10).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].blocks, vec![BlockId(0), BlockId(1), BlockId(2)]);

        let c = cfg(
            "func f { block p: jmp a
               block a: %c = op c() br %c ? l : r
               block l: jmp d block r: jmp d block d: ret }",
        );
        let (a, d) = (b(&c, "a"), b(&c, "d"));
        assert_eq!(simple_paths(&c, a, d, None, 10).unwrap().len(), 2);
        assert_eq!(simple_paths(&c, a, d, Some(b(&c, "l")), 10).unwrap().len(), 1);
        assert!(matches!(simple_paths(&c, a, d, None, 1), Err(PathExplosion { cap: 1, .. })));
    }

    #[test]
    fn cycles_through_loop_and_pseudo_edge() {
        let c = cfg(
            "func recv {
               block e: jmp l
               block l: %f = read @flag label rflag br %f ? done : l
               block done: %d = read @data label rdata ret %d }",
        );
        let r = c.block_of(crate::ir::ActionId(0));
        let cycles = simple_paths(&c, r, r, None, 100).unwrap();
        assert_eq!(cycles.len(), 2);
        assert!(cycles.iter().all(|p| p.head() == r && p.tail() == r));
        let pseudo = cycles.iter().filter(|p| p.edges.iter().any(|e| c.edge(*e).pseudo)).count();
        assert_eq!(pseudo, 1);
    }
}
