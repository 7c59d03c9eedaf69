//! Textual intermediate representation for functions annotated with
//! ordering constraints.
//!
//! A [`Function`] is an SSA control-flow graph whose memory actions carry
//! tags. Edge declarations between tags ask for visibility (`vo`),
//! execution (`xo`) or push (`pu`) ordering between the tagged actions.

mod normalize;
mod parse;
mod print;
mod validate;

use std::fmt;

pub use normalize::{normalize, CfgEdge, EdgeId, NormalizedCfg, Segment};
pub use parse::{parse, parse_function};
pub use print::print;
pub(crate) use print::print_annotated;
pub use validate::validate;

macro_rules! id_type {
    ($(#[$m:meta])* $name:ident) => {
        $(#[$m])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }

            #[inline]
            pub fn from_index(i: usize) -> Self {
                Self(i as u32)
            }
        }
    };
}

id_type!(
    /// Index into [`Function::blocks`].
    BlockId
);
id_type!(
    /// Index into [`Function::values`].
    ValueId
);
id_type!(
    /// Index into [`Function::actions`].
    ActionId
);
id_type!(
    /// Index into [`Function::binds`].
    BindId
);

/// Source position, 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub pos: Option<Pos>,
    pub message: String,
}

impl Diagnostic {
    pub fn at(pos: Pos, message: impl Into<String>) -> Self {
        Self { pos: Some(pos), message: message.into() }
    }

    pub fn new(message: impl Into<String>) -> Self {
        Self { pos: None, message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.pos {
            Some(p) => write!(f, "{}:{}: {}", p.line, p.col, self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Operand {
    Value(ValueId),
    Int(i64),
}

impl Operand {
    pub fn value(&self) -> Option<ValueId> {
        match self {
            Operand::Value(v) => Some(*v),
            Operand::Int(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Location {
    /// `@name`
    Global(String),
    /// `*%v`
    Pointer(ValueId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RmwOp {
    Xchg,
    Add,
}

impl RmwOp {
    pub fn name(self) -> &'static str {
        match self {
            RmwOp::Xchg => "xchg",
            RmwOp::Add => "add",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ActionKind {
    Read,
    Write,
    Rmw(RmwOp),
    Push,
    Noop,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Action {
    pub kind: ActionKind,
    pub location: Option<Location>,
    /// Stored value for writes, operand for rmws.
    pub data: Option<Operand>,
    /// Value defined by reads and rmws.
    pub def: Option<ValueId>,
    pub labels: Vec<String>,
}

impl Action {
    /// True for actions that consist only of writes. An rmw is not one.
    pub fn is_write(&self) -> bool {
        self.kind == ActionKind::Write
    }

    /// Reads and rmws: the action observes memory and defines a value.
    pub fn reads(&self) -> bool {
        matches!(self.kind, ActionKind::Read | ActionKind::Rmw(_))
    }

    /// Noops and pushes are ordering points without a memory access.
    pub fn is_point(&self) -> bool {
        matches!(self.kind, ActionKind::Push | ActionKind::Noop)
    }

    pub fn is_labeled(&self) -> bool {
        !self.labels.is_empty()
    }

    pub fn address(&self) -> Option<ValueId> {
        match &self.location {
            Some(Location::Pointer(v)) => Some(*v),
            _ => None,
        }
    }

    /// Value operands read by the action (address first, then data).
    pub fn operands(&self) -> impl Iterator<Item = ValueId> + '_ {
        self.address().into_iter().chain(self.data.as_ref().and_then(Operand::value))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Instr {
    Action(ActionId),
    Op { dest: ValueId, name: String, args: Vec<Operand> },
    Phi { dest: ValueId, incoming: Vec<(BlockId, Operand)> },
    Bind(BindId),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Terminator {
    Jmp(BlockId),
    Br { cond: Operand, then_to: BlockId, else_to: BlockId },
    Ret(Option<Operand>),
}

impl Terminator {
    pub fn successors(&self) -> Vec<BlockId> {
        match self {
            Terminator::Jmp(b) => vec![*b],
            Terminator::Br { then_to, else_to, .. } => vec![*then_to, *else_to],
            Terminator::Ret(_) => Vec::new(),
        }
    }

    pub(crate) fn retarget(&mut self, from: BlockId, to: BlockId) {
        match self {
            Terminator::Jmp(b) => {
                if *b == from {
                    *b = to;
                }
            }
            Terminator::Br { then_to, else_to, .. } => {
                if *then_to == from {
                    *then_to = to;
                }
                if *else_to == from {
                    *else_to = to;
                }
            }
            Terminator::Ret(_) => {}
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub name: String,
    pub instrs: Vec<Instr>,
    pub term: Terminator,
}

/// Constraint strength; the derived order is `Xo < Vo < Pu`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeKind {
    Xo,
    Vo,
    Pu,
}

impl EdgeKind {
    pub fn name(self) -> &'static str {
        match self {
            EdgeKind::Xo => "xo",
            EdgeKind::Vo => "vo",
            EdgeKind::Pu => "pu",
        }
    }
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum TagRef {
    Tag(String),
    Pre,
    Post,
}

impl fmt::Display for TagRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TagRef::Tag(t) => f.write_str(t),
            TagRef::Pre => f.write_str("pre"),
            TagRef::Post => f.write_str("post"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstraintDecl {
    pub kind: EdgeKind,
    pub src: TagRef,
    pub dst: TagRef,
    pub binding: Option<BindId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Function {
    pub name: String,
    /// `blocks[0]` is the entry block.
    pub blocks: Vec<Block>,
    pub actions: Vec<Action>,
    /// Value names without the leading `%`.
    pub values: Vec<String>,
    pub binds: Vec<String>,
    pub decls: Vec<ConstraintDecl>,
}

/// Where a value or action lives: block and instruction index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Site {
    pub block: BlockId,
    pub index: usize,
}

impl Function {
    pub fn entry(&self) -> BlockId {
        BlockId(0)
    }

    pub fn block(&self, b: BlockId) -> &Block {
        &self.blocks[b.index()]
    }

    pub fn action(&self, a: ActionId) -> &Action {
        &self.actions[a.index()]
    }

    pub fn block_by_name(&self, name: &str) -> Option<BlockId> {
        self.blocks.iter().position(|b| b.name == name).map(BlockId::from_index)
    }

    pub fn successors(&self, b: BlockId) -> Vec<BlockId> {
        self.block(b).term.successors()
    }

    /// Predecessor lists over real edges, one entry per edge.
    pub fn predecessors(&self) -> Vec<Vec<BlockId>> {
        let mut preds = vec![Vec::new(); self.blocks.len()];
        for (i, b) in self.blocks.iter().enumerate() {
            for s in b.term.successors() {
                preds[s.index()].push(BlockId::from_index(i));
            }
        }
        preds
    }

    /// Defining site of each value; `None` for values with no definition.
    pub fn value_sites(&self) -> Vec<Option<Site>> {
        let mut sites = vec![None; self.values.len()];
        for (bi, b) in self.blocks.iter().enumerate() {
            for (ii, ins) in b.instrs.iter().enumerate() {
                let def = match ins {
                    Instr::Op { dest, .. } | Instr::Phi { dest, .. } => Some(*dest),
                    Instr::Action(a) => self.action(*a).def,
                    Instr::Bind(_) => None,
                };
                if let Some(v) = def {
                    sites[v.index()] = Some(Site { block: BlockId::from_index(bi), index: ii });
                }
            }
        }
        sites
    }

    pub fn action_sites(&self) -> Vec<Site> {
        let mut sites = vec![Site { block: BlockId(0), index: 0 }; self.actions.len()];
        for (bi, b) in self.blocks.iter().enumerate() {
            for (ii, ins) in b.instrs.iter().enumerate() {
                if let Instr::Action(a) = ins {
                    sites[a.index()] = Site { block: BlockId::from_index(bi), index: ii };
                }
            }
        }
        sites
    }

    pub fn bind_sites(&self) -> Vec<Option<Site>> {
        let mut sites = vec![None; self.binds.len()];
        for (bi, b) in self.blocks.iter().enumerate() {
            for (ii, ins) in b.instrs.iter().enumerate() {
                if let Instr::Bind(id) = ins {
                    sites[id.index()] = Some(Site { block: BlockId::from_index(bi), index: ii });
                }
            }
        }
        sites
    }

    /// Actions carrying `tag`, in program (index) order.
    pub fn tagged(&self, tag: &str) -> Vec<ActionId> {
        self.actions
            .iter()
            .enumerate()
            .filter(|(_, a)| a.labels.iter().any(|l| l == tag))
            .map(|(i, _)| ActionId::from_index(i))
            .collect()
    }

    /// Stable display name of an action: its first label, suffixed with
    /// `.k` when several actions share that first label.
    pub fn action_name(&self, a: ActionId) -> String {
        let act = self.action(a);
        let Some(first) = act.labels.first() else {
            return format!("#{}", a.0);
        };
        let same: Vec<usize> = self
            .actions
            .iter()
            .enumerate()
            .filter(|(_, x)| x.labels.first() == Some(first))
            .map(|(i, _)| i)
            .collect();
        if same.len() == 1 {
            first.clone()
        } else {
            let k = same.iter().position(|&i| i == a.index()).unwrap_or(0);
            format!("{first}.{k}")
        }
    }

    pub fn action_by_name(&self, name: &str) -> Option<ActionId> {
        (0..self.actions.len())
            .map(ActionId::from_index)
            .find(|&a| self.actions[a.index()].is_labeled() && self.action_name(a) == name)
    }
}

/// A parsed source file.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Module {
    pub functions: Vec<Function>,
}
