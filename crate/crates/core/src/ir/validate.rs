use std::collections::BTreeSet;

use super::{BlockId, Diagnostic, Function, Instr, Operand, Site, TagRef, Terminator, ValueId};
use crate::graph::Dominators;

/// Structural and SSA checks. An empty result means the function can be
/// normalized and compiled.
pub fn validate(f: &Function) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let here = |msg: String| Diagnostic::new(format!("in `{}`: {msg}", f.name));
    let preds = f.predecessors();

    if !preds[0].is_empty() {
        diags.push(here(format!("entry block `{}` has predecessors", f.blocks[0].name)));
    }

    for b in &f.blocks {
        if let Terminator::Br { then_to, else_to, .. } = &b.term {
            if then_to == else_to {
                diags.push(here(format!("block `{}` branches to `{}` on both arms", b.name, f.blocks[then_to.index()].name)));
            }
        }
        let mut seen_other = false;
        for ins in &b.instrs {
            match ins {
                Instr::Phi { .. } if seen_other => {
                    diags.push(here(format!("phi in block `{}` is not at the start of the block", b.name)));
                }
                Instr::Phi { .. } => {}
                _ => seen_other = true,
            }
        }
    }

    let succs: Vec<Vec<BlockId>> = f.blocks.iter().map(|b| b.term.successors()).collect();
    let dom = Dominators::compute(f.blocks.len(), BlockId(0), &succs);
    let unreachable: Vec<usize> = (0..f.blocks.len()).filter(|&i| !dom.reachable(BlockId::from_index(i))).collect();
    for &i in &unreachable {
        diags.push(here(format!("block `{}` is unreachable", f.blocks[i].name)));
    }

    for a in &f.actions {
        if a.kind == super::ActionKind::Noop && a.labels.is_empty() {
            diags.push(here("noop without a label".to_string()));
        }
    }

    let mut used_tags = BTreeSet::new();
    for d in &f.decls {
        for t in [&d.src, &d.dst] {
            if let TagRef::Tag(t) = t {
                used_tags.insert(t.clone());
            }
        }
    }
    for t in used_tags {
        if f.tagged(&t).is_empty() {
            diags.push(here(format!("edge declaration names tag `{t}`, which labels no action")));
        }
    }

    if !unreachable.is_empty() {
        return diags;
    }

    // SSA dominance.
    let sites = f.value_sites();
    let name = |v: ValueId| format!("%{}", f.values[v.index()]);
    let check_use = |diags: &mut Vec<Diagnostic>, v: ValueId, at: Site| {
        let Some(def) = sites[v.index()] else {
            diags.push(here(format!("value {} has no definition", name(v))));
            return;
        };
        let ok = if def.block == at.block { def.index < at.index } else { dom.dominates(def.block, at.block) };
        if !ok {
            diags.push(here(format!(
                "use of {} in block `{}` is not dominated by its definition",
                name(v),
                f.blocks[at.block.index()].name
            )));
        }
    };

    for (bi, b) in f.blocks.iter().enumerate() {
        let bid = BlockId::from_index(bi);
        for (ii, ins) in b.instrs.iter().enumerate() {
            let at = Site { block: bid, index: ii };
            match ins {
                Instr::Action(a) => {
                    for v in f.action(*a).operands() {
                        check_use(&mut diags, v, at);
                    }
                }
                Instr::Op { args, .. } => {
                    for v in args.iter().filter_map(Operand::value) {
                        check_use(&mut diags, v, at);
                    }
                }
                Instr::Phi { incoming, .. } => {
                    let mut arms: Vec<BlockId> = incoming.iter().map(|(p, _)| *p).collect();
                    for (p, v) in incoming {
                        if !preds[bi].contains(p) {
                            diags.push(here(format!(
                                "phi in block `{}` names `{}`, which is not a predecessor",
                                b.name,
                                f.blocks[p.index()].name
                            )));
                            continue;
                        }
                        if let Some(v) = v.value() {
                            // The value must be available at the end of the predecessor.
                            let end = Site { block: *p, index: f.blocks[p.index()].instrs.len() + 1 };
                            check_use(&mut diags, v, end);
                        }
                    }
                    arms.sort();
                    let before = arms.len();
                    arms.dedup();
                    if arms.len() != before {
                        diags.push(here(format!("phi in block `{}` lists a predecessor twice", b.name)));
                    }
                    for p in &preds[bi] {
                        if !arms.contains(p) {
                            diags.push(here(format!(
                                "phi in block `{}` has no incoming value for predecessor `{}`",
                                b.name,
                                f.blocks[p.index()].name
                            )));
                        }
                    }
                }
                Instr::Bind(_) => {}
            }
        }
        let at = Site { block: bid, index: b.instrs.len() };
        match &b.term {
            Terminator::Br { cond: Operand::Value(v), .. } | Terminator::Ret(Some(Operand::Value(v))) => {
                check_use(&mut diags, *v, at)
            }
            _ => {}
        }
    }
    diags
}
