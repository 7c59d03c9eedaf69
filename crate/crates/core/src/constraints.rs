//! Constraint edges between actions: tag resolution and closure through
//! instruction-free ordering points (noops and pushes).

use std::collections::{BTreeMap, BTreeSet};

use crate::ir::{ActionId, ActionKind, BlockId, Diagnostic, EdgeKind, Function, NormalizedCfg, TagRef};

/// One step of a justification chain.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Link {
    pub kind: EdgeKind,
    pub src: ActionId,
    pub dst: ActionId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Origin {
    /// Index of the declaration in the function.
    Declared(usize),
    Derived(Vec<Link>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstraintEdge {
    pub kind: EdgeKind,
    pub src: ActionId,
    pub dst: ActionId,
    pub binding: Option<BlockId>,
    pub origin: Origin,
}

impl ConstraintEdge {
    fn link(&self) -> Link {
        Link { kind: self.kind, src: self.src, dst: self.dst }
    }

    fn chain(&self) -> Vec<Link> {
        match &self.origin {
            Origin::Declared(_) => vec![self.link()],
            Origin::Derived(c) => c.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    /// All program-order predecessors before the action.
    Pre,
    /// The action before all program-order successors.
    Post,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundaryConstraint {
    /// `Vo` or `Xo`.
    pub kind: EdgeKind,
    pub action: ActionId,
    pub side: Side,
    pub origin: Origin,
}

/// Expand declarations into action-level edges and boundary constraints.
pub fn resolve(cfg: &NormalizedCfg) -> Result<(Vec<ConstraintEdge>, Vec<BoundaryConstraint>), Vec<Diagnostic>> {
    let f = &cfg.func;
    let mut edges = Vec::new();
    let mut bounds = Vec::new();
    let mut diags = Vec::new();
    for (i, d) in f.decls.iter().enumerate() {
        let binding = d.binding.map(|b| cfg.bind_block(b));
        match (&d.src, &d.dst) {
            (TagRef::Tag(s), TagRef::Tag(t)) => {
                for src in f.tagged(s) {
                    for dst in f.tagged(t) {
                        edges.push(ConstraintEdge { kind: d.kind, src, dst, binding, origin: Origin::Declared(i) });
                    }
                }
            }
            (TagRef::Pre, TagRef::Tag(t)) | (TagRef::Tag(t), TagRef::Post) => {
                if d.kind == EdgeKind::Pu {
                    diags.push(unsupported_push(f, &d.src, &d.dst));
                    continue;
                }
                let side = if d.src == TagRef::Pre { Side::Pre } else { Side::Post };
                for action in f.tagged(t) {
                    bounds.push(BoundaryConstraint { kind: d.kind, action, side, origin: Origin::Declared(i) });
                }
            }
            _ => diags.push(Diagnostic::new(format!(
                "in `{}`: declaration `{} -> {}` is not supported",
                f.name, d.src, d.dst
            ))),
        }
    }
    if diags.is_empty() {
        Ok((edges, bounds))
    } else {
        Err(diags)
    }
}

fn unsupported_push(f: &Function, src: &dyn std::fmt::Display, dst: &dyn std::fmt::Display) -> Diagnostic {
    Diagnostic::new(format!("in `{}`: push edge `{src} -> {dst}` with pre/post is not supported", f.name))
}

fn is_point(f: &Function, a: ActionId) -> bool {
    f.action(a).is_point()
}

/// Kind of `a -k1-> n -k2-> c`. Passing a push after a visibility
/// requirement yields a push requirement.
fn compose(f: &Function, k1: EdgeKind, n: ActionId, k2: EdgeKind) -> EdgeKind {
    if f.action(n).kind == ActionKind::Push && k1 >= EdgeKind::Vo {
        EdgeKind::Pu
    } else {
        k1.max(k2)
    }
}

type Key = (ActionId, ActionId, Option<BlockId>, EdgeKind);

/// Transitive closure through noops and pushes.
///
/// The result holds every input edge whose endpoints are memory actions,
/// in input order, followed by the derived edges between memory actions
/// that are not implied by a stronger edge with the same endpoints and
/// binding, in canonical order.
pub fn close(f: &Function, edges: &[ConstraintEdge]) -> Vec<ConstraintEdge> {
    let mut facts: BTreeMap<Key, ConstraintEdge> = BTreeMap::new();
    let mut work: Vec<Key> = Vec::new();
    for e in edges {
        let key = (e.src, e.dst, e.binding, e.kind);
        if let std::collections::btree_map::Entry::Vacant(slot) = facts.entry(key) {
            slot.insert(e.clone());
            work.push(key);
        }
    }
    while let Some(key) = work.pop() {
        let e = facts[&key].clone();
        let mut new = Vec::new();
        if is_point(f, e.dst) {
            for g in facts.values().filter(|g| g.src == e.dst && g.binding == e.binding) {
                new.push(join(f, &e, g));
            }
        }
        if is_point(f, e.src) {
            for g in facts.values().filter(|g| g.dst == e.src && g.binding == e.binding) {
                new.push(join(f, g, &e));
            }
        }
        new.sort_by_key(|g| (g.src, g.dst, g.binding, g.kind));
        for g in new {
            let k = (g.src, g.dst, g.binding, g.kind);
            if let std::collections::btree_map::Entry::Vacant(slot) = facts.entry(k) {
                slot.insert(g);
                work.push(k);
            }
        }
    }

    let memory = |e: &ConstraintEdge| !is_point(f, e.src) && !is_point(f, e.dst);
    let mut out: Vec<ConstraintEdge> = edges.iter().filter(|e| memory(e)).cloned().collect();
    let mut strongest: BTreeMap<(ActionId, ActionId, Option<BlockId>), EdgeKind> = BTreeMap::new();
    for e in &out {
        let s = strongest.entry((e.src, e.dst, e.binding)).or_insert(e.kind);
        *s = (*s).max(e.kind);
    }
    let mut derived: BTreeMap<(ActionId, ActionId, Option<BlockId>), ConstraintEdge> = BTreeMap::new();
    for e in facts.into_values() {
        if !memory(&e) || !matches!(e.origin, Origin::Derived(_)) {
            continue;
        }
        let key = (e.src, e.dst, e.binding);
        if strongest.get(&key).is_some_and(|k| *k >= e.kind) {
            continue;
        }
        // Facts iterate in increasing kind, so the last one is the strongest.
        derived.insert(key, e);
    }
    out.extend(derived.into_values());
    out
}

fn join(f: &Function, a: &ConstraintEdge, b: &ConstraintEdge) -> ConstraintEdge {
    let mut chain = a.chain();
    chain.extend(b.chain());
    ConstraintEdge {
        kind: compose(f, a.kind, a.dst, b.kind),
        src: a.src,
        dst: b.dst,
        binding: a.binding,
        origin: Origin::Derived(chain),
    }
}

/// Move boundary constraints on noops and pushes onto the memory actions
/// they are connected to by unscoped edges. Returns the closed boundary
/// list and diagnostics for compositions that would need a push.
pub fn close_boundaries(
    f: &Function,
    edges: &[ConstraintEdge],
    bounds: &[BoundaryConstraint],
) -> (Vec<BoundaryConstraint>, Vec<Diagnostic>) {
    let mut seen: BTreeSet<(ActionId, Side, EdgeKind)> = BTreeSet::new();
    let mut all: Vec<BoundaryConstraint> = Vec::new();
    let mut work: Vec<BoundaryConstraint> = Vec::new();
    let mut diags = Vec::new();
    for b in bounds {
        if seen.insert((b.action, b.side, b.kind)) {
            all.push(b.clone());
            work.push(b.clone());
        }
    }
    while let Some(b) = work.pop() {
        if !is_point(f, b.action) {
            continue;
        }
        let next: Vec<(ActionId, EdgeKind, Link)> = match b.side {
            Side::Pre => edges
                .iter()
                .filter(|e| e.src == b.action && e.binding.is_none())
                .map(|e| (e.dst, compose(f, b.kind, b.action, e.kind), e.link()))
                .collect(),
            Side::Post => edges
                .iter()
                .filter(|e| e.dst == b.action && e.binding.is_none())
                .map(|e| (e.src, compose(f, e.kind, b.action, b.kind), e.link()))
                .collect(),
        };
        for (action, kind, link) in next {
            let mut chain = match &b.origin {
                Origin::Derived(c) => c.clone(),
                Origin::Declared(_) => Vec::new(),
            };
            chain.push(link);
            if kind == EdgeKind::Pu {
                diags.push(Diagnostic::new(format!(
                    "in `{}`: pre/post constraint through push `{}` would need a push edge, which is not supported",
                    f.name,
                    f.action_name(b.action)
                )));
                continue;
            }
            if seen.insert((action, b.side, kind)) {
                let nb = BoundaryConstraint { kind, action, side: b.side, origin: Origin::Derived(chain) };
                all.push(nb.clone());
                work.push(nb);
            }
        }
    }
    let mut out: Vec<BoundaryConstraint> = all.into_iter().filter(|b| !is_point(f, b.action)).collect();
    // A stronger boundary on the same action and side implies the weaker one.
    let strongest: BTreeMap<(ActionId, Side), EdgeKind> =
        out.iter().fold(BTreeMap::new(), |mut m, b| {
            let k = m.entry((b.action, b.side)).or_insert(b.kind);
            *k = (*k).max(b.kind);
            m
        });
    out.retain(|b| strongest[&(b.action, b.side)] == b.kind);
    let mut kept = BTreeSet::new();
    out.retain(|b| kept.insert((b.action, b.side)));
    (out, diags)
}
