use std::collections::BTreeMap;
use std::fmt::Write;

use super::{
    ActionKind, BlockId, Function, Instr, Location, Operand, TagRef, Terminator,
};

/// Pretty-print a function in the textual IR syntax.
pub fn print(f: &Function) -> String {
    print_annotated(f, &BTreeMap::new())
}

/// Pretty-print with comment lines inserted before instruction `index` of
/// `block`; `index == instrs.len()` places them before the terminator.
pub(crate) fn print_annotated(f: &Function, notes: &BTreeMap<(BlockId, usize), Vec<String>>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "func {} {{", f.name);
    for d in &f.decls {
        let here = match d.binding {
            Some(b) => format!(" here({})", f.binds[b.index()]),
            None => String::new(),
        };
        let _ = writeln!(out, "  edge {}{} {} -> {};", d.kind, here, tag(&d.src), tag(&d.dst));
    }
    for (bi, b) in f.blocks.iter().enumerate() {
        let bid = BlockId::from_index(bi);
        let _ = writeln!(out, "  block {}:", b.name);
        for (ii, ins) in b.instrs.iter().enumerate() {
            emit_notes(&mut out, notes, bid, ii);
            let _ = writeln!(out, "    {}", instr(f, ins));
        }
        emit_notes(&mut out, notes, bid, b.instrs.len());
        let _ = writeln!(out, "    {}", term(f, &b.term));
    }
    out.push_str("}\n");
    out
}

fn emit_notes(out: &mut String, notes: &BTreeMap<(BlockId, usize), Vec<String>>, b: BlockId, i: usize) {
    if let Some(lines) = notes.get(&(b, i)) {
        for l in lines {
            let _ = writeln!(out, "    ;; {l}");
        }
    }
}

fn tag(t: &TagRef) -> String {
    t.to_string()
}

fn opnd(f: &Function, o: &Operand) -> String {
    match o {
        Operand::Value(v) => format!("%{}", f.values[v.index()]),
        Operand::Int(i) => i.to_string(),
    }
}

fn loc(f: &Function, l: &Option<Location>) -> String {
    match l {
        Some(Location::Global(g)) => format!("@{g}"),
        Some(Location::Pointer(v)) => format!("*%{}", f.values[v.index()]),
        None => String::new(),
    }
}

fn labels(ls: &[String]) -> String {
    ls.iter().map(|l| format!(" label {l}")).collect()
}

pub(crate) fn instr(f: &Function, ins: &Instr) -> String {
    match ins {
        Instr::Action(a) => {
            let act = f.action(*a);
            let def = act.def.map(|v| format!("%{} = ", f.values[v.index()])).unwrap_or_default();
            match act.kind {
                ActionKind::Read => format!("{def}read {}{}", loc(f, &act.location), labels(&act.labels)),
                ActionKind::Write => format!(
                    "write {} {}{}",
                    loc(f, &act.location),
                    opnd(f, act.data.as_ref().expect("write without data")),
                    labels(&act.labels)
                ),
                ActionKind::Rmw(op) => format!(
                    "{def}rmw {} {} {}{}",
                    loc(f, &act.location),
                    op.name(),
                    opnd(f, act.data.as_ref().expect("rmw without operand")),
                    labels(&act.labels)
                ),
                ActionKind::Push => format!("push{}", labels(&act.labels)),
                ActionKind::Noop => format!("noop{}", labels(&act.labels)),
            }
        }
        Instr::Op { dest, name, args } => {
            let args: Vec<String> = args.iter().map(|a| opnd(f, a)).collect();
            format!("%{} = op {}({})", f.values[dest.index()], name, args.join(", "))
        }
        Instr::Phi { dest, incoming } => {
            let arms: Vec<String> = incoming
                .iter()
                .map(|(b, v)| format!("[{}: {}]", f.blocks[b.index()].name, opnd(f, v)))
                .collect();
            format!("%{} = phi {}", f.values[dest.index()], arms.join(", "))
        }
        Instr::Bind(b) => format!("bind {}", f.binds[b.index()]),
    }
}

fn term(f: &Function, t: &Terminator) -> String {
    match t {
        Terminator::Jmp(b) => format!("jmp {}", f.blocks[b.index()].name),
        Terminator::Br { cond, then_to, else_to } => format!(
            "br {} ? {} : {}",
            opnd(f, cond),
            f.blocks[then_to.index()].name,
            f.blocks[else_to.index()].name
        ),
        Terminator::Ret(Some(v)) => format!("ret {}", opnd(f, v)),
        Terminator::Ret(None) => "ret".to_string(),
    }
}

#[cfg(test)]
mod tests {
    use crate::ir::parse_function;

    use super::*;

    #[test]
    fn round_trip() {
        let src = "func w {
            edge xo here(h) lookup -> r;
            edge vo pre -> lookup;
            block entry:
              bind h
              %k = op arg()
              %w = read *%k label lookup
              %p = op add(%w, 8)
              %f = read *%p label r
              %o = rmw @c add -1
              br %f ? a : b
            block a:
              write @x %f label s label t
              jmp b
            block b:
              %m = phi [entry: 0], [a: %o]
              push
              ret %m
        }";
        let f = parse_function(src).unwrap();
        let printed = print(&f);
        let g = parse_function(&printed).unwrap();
        assert_eq!(f, g);
        assert_eq!(printed, print(&g));
    }
}
