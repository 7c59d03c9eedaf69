use std::collections::HashSet;

use super::{ActionId, BindId, Block, BlockId, Function, Instr, Terminator};

/// Index into [`NormalizedCfg::edges`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId(pub u32);

impl EdgeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CfgEdge {
    pub src: BlockId,
    pub dst: BlockId,
    /// Exit-to-entry edge standing for a later invocation of the function.
    pub pseudo: bool,
}

/// Where a normalized block came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Segment {
    /// Instructions `start..end` of an original block.
    Orig { block: BlockId, start: usize, end: usize },
    /// Empty block inserted on the original edge `from -> to`.
    EdgeSplit { from: BlockId, to: BlockId },
}

/// A function whose labeled actions sit alone in their blocks, whose
/// critical edges are split, and whose exits loop back to the entry.
#[derive(Clone, Debug)]
pub struct NormalizedCfg {
    pub func: Function,
    /// Sorted by `(src, dst)`; no two edges share both endpoints.
    pub edges: Vec<CfgEdge>,
    pub succs: Vec<Vec<EdgeId>>,
    pub preds: Vec<Vec<EdgeId>>,
    pub action_block: Vec<BlockId>,
    pub bind_block: Vec<BlockId>,
    pub segments: Vec<Segment>,
    /// New block of every original instruction, indexed `[block][instr]`.
    pub instr_map: Vec<Vec<BlockId>>,
}

impl NormalizedCfg {
    pub fn num_blocks(&self) -> usize {
        self.func.blocks.len()
    }

    pub fn entry(&self) -> BlockId {
        BlockId(0)
    }

    pub fn edge(&self, e: EdgeId) -> &CfgEdge {
        &self.edges[e.index()]
    }

    pub fn edge_ids(&self) -> impl Iterator<Item = EdgeId> {
        (0..self.edges.len() as u32).map(EdgeId)
    }

    pub fn find_edge(&self, src: BlockId, dst: BlockId) -> Option<EdgeId> {
        self.succs[src.index()].iter().copied().find(|e| self.edges[e.index()].dst == dst)
    }

    pub fn block_of(&self, a: ActionId) -> BlockId {
        self.action_block[a.index()]
    }

    pub fn bind_block(&self, b: BindId) -> BlockId {
        self.bind_block[b.index()]
    }

    pub fn block_name(&self, b: BlockId) -> &str {
        &self.func.blocks[b.index()].name
    }

    /// Successor lists over real edges only.
    pub fn real_succs(&self) -> Vec<Vec<BlockId>> {
        self.succs
            .iter()
            .map(|es| es.iter().filter(|e| !self.edge(**e).pseudo).map(|e| self.edge(*e).dst).collect())
            .collect()
    }
}

struct Piece {
    start: usize,
    end: usize,
    instrs: Vec<Instr>,
    /// Set when this piece ends with the original terminator.
    keeps_term: bool,
}

/// Normalize a validated function.
pub fn normalize(f: &Function) -> NormalizedCfg {
    let labeled = |ins: &Instr| matches!(ins, Instr::Action(a) if f.action(*a).is_labeled());

    // 1. Split blocks so that every labeled action is alone.
    let mut pieces: Vec<Vec<Piece>> = Vec::with_capacity(f.blocks.len());
    for (bi, b) in f.blocks.iter().enumerate() {
        let mut ps: Vec<Piece> = Vec::new();
        let mut cur = Piece { start: 0, end: 0, instrs: Vec::new(), keeps_term: false };
        for (ii, ins) in b.instrs.iter().enumerate() {
            if !labeled(ins) {
                cur.instrs.push(ins.clone());
                continue;
            }
            // The entry block stays free of labeled actions so that they
            // always have a real in-edge.
            if !cur.instrs.is_empty() || (bi == 0 && ps.is_empty()) {
                cur.end = ii;
                ps.push(cur);
            }
            let last = ii + 1 == b.instrs.len();
            let alone = Piece {
                start: ii,
                end: ii + 1,
                instrs: vec![ins.clone()],
                keeps_term: last && matches!(b.term, Terminator::Jmp(_)),
            };
            let done = alone.keeps_term;
            ps.push(alone);
            cur = Piece { start: ii + 1, end: ii + 1, instrs: Vec::new(), keeps_term: false };
            if done {
                break;
            }
        }
        if !ps.last().is_some_and(|p| p.keeps_term) {
            cur.end = b.instrs.len();
            cur.keeps_term = true;
            ps.push(cur);
        }
        pieces.push(ps);
    }

    let mut first_piece = Vec::with_capacity(f.blocks.len());
    let mut last_piece = Vec::with_capacity(f.blocks.len());
    let mut next = 0u32;
    for ps in &pieces {
        first_piece.push(BlockId(next));
        next += ps.len() as u32;
        last_piece.push(BlockId(next - 1));
    }

    let mut used: HashSet<String> = f.blocks.iter().map(|b| b.name.clone()).collect();
    let mut fresh = |base: String| -> String {
        let mut name = base.clone();
        let mut k = 1;
        while !used.insert(name.clone()) {
            name = format!("{base}.{k}");
            k += 1;
        }
        name
    };

    let remap_term = |t: &Terminator| -> Terminator {
        match t {
            Terminator::Jmp(b) => Terminator::Jmp(first_piece[b.index()]),
            Terminator::Br { cond, then_to, else_to } => Terminator::Br {
                cond: cond.clone(),
                then_to: first_piece[then_to.index()],
                else_to: first_piece[else_to.index()],
            },
            Terminator::Ret(v) => Terminator::Ret(v.clone()),
        }
    };

    let mut blocks = Vec::new();
    let mut segments = Vec::new();
    let mut instr_map: Vec<Vec<BlockId>> =
        f.blocks.iter().map(|b| vec![BlockId(0); b.instrs.len()]).collect();
    for (bi, ps) in pieces.into_iter().enumerate() {
        let orig = &f.blocks[bi];
        let n = ps.len();
        for (k, p) in ps.into_iter().enumerate() {
            let id = BlockId(first_piece[bi].0 + k as u32);
            let name = if k == 0 { orig.name.clone() } else { fresh(format!("{}.{k}", orig.name)) };
            let term = if p.keeps_term {
                debug_assert_eq!(k + 1, n);
                remap_term(&orig.term)
            } else {
                Terminator::Jmp(BlockId(id.0 + 1))
            };
            let instrs = p
                .instrs
                .into_iter()
                .map(|ins| match ins {
                    Instr::Phi { dest, incoming } => Instr::Phi {
                        dest,
                        incoming: incoming.into_iter().map(|(b, v)| (last_piece[b.index()], v)).collect(),
                    },
                    other => other,
                })
                .collect();
            for slot in &mut instr_map[bi][p.start..p.end] {
                *slot = id;
            }
            segments.push(Segment::Orig { block: BlockId::from_index(bi), start: p.start, end: p.end });
            blocks.push(Block { name, instrs, term });
        }
    }

    // 2. Split critical edges.
    let mut pred_count = vec![0usize; blocks.len()];
    for b in &blocks {
        for s in b.term.successors() {
            pred_count[s.index()] += 1;
        }
    }
    let orig_of = |segs: &[Segment], b: BlockId| match segs[b.index()] {
        Segment::Orig { block, .. } => block,
        Segment::EdgeSplit { from, .. } => from,
    };
    let n_before = blocks.len();
    for bi in 0..n_before {
        let succs = blocks[bi].term.successors();
        if succs.len() < 2 {
            continue;
        }
        for s in succs {
            if pred_count[s.index()] < 2 {
                continue;
            }
            let nid = BlockId::from_index(blocks.len());
            let name = fresh(format!("{}.to.{}", blocks[bi].name, blocks[s.index()].name));
            blocks[bi].term.retarget(s, nid);
            for ins in &mut blocks[s.index()].instrs {
                if let Instr::Phi { incoming, .. } = ins {
                    for (p, _) in incoming.iter_mut() {
                        if p.index() == bi {
                            *p = nid;
                        }
                    }
                }
            }
            let from = orig_of(&segments, BlockId::from_index(bi));
            let to = orig_of(&segments, s);
            segments.push(Segment::EdgeSplit { from, to });
            blocks.push(Block { name, instrs: Vec::new(), term: Terminator::Jmp(s) });
        }
    }

    let func = Function {
        name: f.name.clone(),
        blocks,
        actions: f.actions.clone(),
        values: f.values.clone(),
        binds: f.binds.clone(),
        decls: f.decls.clone(),
    };

    // 3. Edge list with exit-to-entry pseudo edges.
    let mut edges = Vec::new();
    for (bi, b) in func.blocks.iter().enumerate() {
        let src = BlockId::from_index(bi);
        match b.term {
            Terminator::Ret(_) => edges.push(CfgEdge { src, dst: BlockId(0), pseudo: true }),
            _ => edges.extend(b.term.successors().into_iter().map(|dst| CfgEdge { src, dst, pseudo: false })),
        }
    }
    edges.sort_by_key(|e| (e.src, e.dst));
    let mut succs = vec![Vec::new(); func.blocks.len()];
    let mut preds = vec![Vec::new(); func.blocks.len()];
    for (i, e) in edges.iter().enumerate() {
        succs[e.src.index()].push(EdgeId(i as u32));
        preds[e.dst.index()].push(EdgeId(i as u32));
    }

    let action_block = func.action_sites().into_iter().map(|s| s.block).collect();
    let bind_block = func.bind_sites().into_iter().map(|s| s.map_or(BlockId(0), |s| s.block)).collect();

    NormalizedCfg { func, edges, succs, preds, action_block, bind_block, segments, instr_map }
}
