use std::collections::HashMap;

use super::{
    Action, ActionId, ActionKind, BindId, Block, BlockId, ConstraintDecl, Diagnostic, EdgeKind,
    Function, Instr, Location, Module, Operand, Pos, RmwOp, TagRef, Terminator, ValueId,
};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Value(String),
    Global(String),
    Int(i64),
    Punct(&'static str),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Value(s) => format!("`%{s}`"),
            Tok::Global(s) => format!("`@{s}`"),
            Tok::Int(i) => format!("`{i}`"),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '.'
}

fn lex(src: &str) -> Result<Vec<(Tok, Pos)>, Diagnostic> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        if c.is_whitespace() {
            bump!();
            continue;
        }
        // `#` and `;;` start line comments; annotated output uses the latter.
        if c == '#' || (c == ';' && chars.get(i + 1) == Some(&';')) {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        let word = |start: usize| -> (String, usize) {
            let mut j = start;
            while j < chars.len() && is_ident_char(chars[j]) {
                j += 1;
            }
            (chars[start..j].iter().collect(), j)
        };
        if c == '%' || c == '@' {
            let (w, j) = word(i + 1);
            if w.is_empty() {
                return Err(Diagnostic::at(pos, format!("expected a name after `{c}`")));
            }
            while i < j {
                bump!();
            }
            out.push((if c == '%' { Tok::Value(w) } else { Tok::Global(w) }, pos));
            continue;
        }
        if is_ident_start(c) {
            let (w, j) = word(i);
            while i < j {
                bump!();
            }
            out.push((Tok::Ident(w), pos));
            continue;
        }
        if c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let mut j = i + 1;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            let text: String = chars[i..j].iter().collect();
            let n = text
                .parse::<i64>()
                .map_err(|_| Diagnostic::at(pos, format!("integer literal `{text}` out of range")))?;
            while i < j {
                bump!();
            }
            out.push((Tok::Int(n), pos));
            continue;
        }
        if c == '-' && chars.get(i + 1) == Some(&'>') {
            bump!();
            bump!();
            out.push((Tok::Punct("->"), pos));
            continue;
        }
        let p = match c {
            '{' => "{",
            '}' => "}",
            ':' => ":",
            ';' => ";",
            '(' => "(",
            ')' => ")",
            '[' => "[",
            ']' => "]",
            ',' => ",",
            '?' => "?",
            '=' => "=",
            '*' => "*",
            _ => return Err(Diagnostic::at(pos, format!("unexpected character `{c}`"))),
        };
        bump!();
        out.push((Tok::Punct(p), pos));
    }
    out.push((Tok::Eof, Pos { line, col }));
    Ok(out)
}

/// Unresolved operand as written in the source.
#[derive(Clone, Debug)]
enum RawOpnd {
    Value(String, Pos),
    Int(i64),
}

#[derive(Clone, Debug)]
enum RawLoc {
    Global(String),
    Pointer(String, Pos),
}

#[derive(Clone, Debug)]
enum RawInstr {
    Read { dest: (String, Pos), loc: RawLoc, labels: Vec<String> },
    Write { loc: RawLoc, data: RawOpnd, labels: Vec<String> },
    Rmw { dest: (String, Pos), loc: RawLoc, op: RmwOp, data: RawOpnd, labels: Vec<String> },
    Push { labels: Vec<String> },
    Noop { labels: Vec<String> },
    Op { dest: (String, Pos), name: String, args: Vec<RawOpnd> },
    Phi { dest: (String, Pos), incoming: Vec<((String, Pos), RawOpnd)> },
    Bind(String, Pos),
}

#[derive(Clone, Debug)]
enum RawTerm {
    Jmp((String, Pos)),
    Br { cond: RawOpnd, then_to: (String, Pos), else_to: (String, Pos) },
    Ret(Option<RawOpnd>),
}

#[derive(Clone, Debug)]
struct RawBlock {
    name: String,
    pos: Pos,
    instrs: Vec<RawInstr>,
    term: RawTerm,
}

#[derive(Clone, Debug)]
struct RawDecl {
    kind: EdgeKind,
    binding: Option<(String, Pos)>,
    src: (String, Pos),
    dst: (String, Pos),
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
}

type PResult<T> = Result<T, Diagnostic>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn next(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn unexpected<T>(&self, wanted: &str) -> PResult<T> {
        Err(Diagnostic::at(self.pos(), format!("expected {wanted}, found {}", self.peek().describe())))
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.is_kw(kw) {
            self.next();
            Ok(())
        } else {
            self.unexpected(&format!("`{kw}`"))
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<()> {
        if matches!(self.peek(), Tok::Punct(q) if *q == p) {
            self.next();
            Ok(())
        } else {
            self.unexpected(&format!("`{p}`"))
        }
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if matches!(self.peek(), Tok::Punct(q) if *q == p) {
            self.next();
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> PResult<(String, Pos)> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                let p = self.pos();
                self.next();
                Ok((s, p))
            }
            _ => self.unexpected("an identifier"),
        }
    }

    fn value(&mut self) -> PResult<(String, Pos)> {
        match self.peek().clone() {
            Tok::Value(s) => {
                let p = self.pos();
                self.next();
                Ok((s, p))
            }
            _ => self.unexpected("a value `%name`"),
        }
    }

    fn operand(&mut self) -> PResult<RawOpnd> {
        match self.peek().clone() {
            Tok::Value(s) => {
                let p = self.pos();
                self.next();
                Ok(RawOpnd::Value(s, p))
            }
            Tok::Int(n) => {
                self.next();
                Ok(RawOpnd::Int(n))
            }
            _ => self.unexpected("an operand"),
        }
    }

    fn location(&mut self) -> PResult<RawLoc> {
        match self.peek().clone() {
            Tok::Global(g) => {
                self.next();
                Ok(RawLoc::Global(g))
            }
            Tok::Punct("*") => {
                self.next();
                let (v, p) = self.value()?;
                Ok(RawLoc::Pointer(v, p))
            }
            _ => self.unexpected("a location (`@global` or `*%ptr`)"),
        }
    }

    fn labels(&mut self) -> PResult<Vec<String>> {
        let mut out = Vec::new();
        while self.is_kw("label") {
            self.next();
            let (tag, pos) = self.ident()?;
            if tag == "pre" || tag == "post" {
                return Err(Diagnostic::at(pos, format!("`{tag}` is reserved and cannot label an action")));
            }
            if !out.contains(&tag) {
                out.push(tag);
            }
        }
        Ok(out)
    }

    fn tag(&mut self) -> PResult<(String, Pos)> {
        self.ident()
    }

    fn decl(&mut self) -> PResult<RawDecl> {
        self.expect_kw("edge")?;
        let (k, kpos) = self.ident()?;
        let kind = match k.as_str() {
            "vo" => EdgeKind::Vo,
            "xo" => EdgeKind::Xo,
            "pu" => EdgeKind::Pu,
            _ => return Err(Diagnostic::at(kpos, format!("unknown edge kind `{k}`, expected vo, xo or pu"))),
        };
        let binding = if self.is_kw("here") {
            self.next();
            self.expect_punct("(")?;
            let b = self.ident()?;
            self.expect_punct(")")?;
            Some(b)
        } else {
            None
        };
        let src = self.tag()?;
        self.expect_punct("->")?;
        let dst = self.tag()?;
        self.expect_punct(";")?;
        Ok(RawDecl { kind, binding, src, dst })
    }

    fn instr(&mut self) -> PResult<RawInstr> {
        if let Tok::Value(_) = self.peek() {
            let dest = self.value()?;
            self.expect_punct("=")?;
            let (op, opos) = self.ident()?;
            return match op.as_str() {
                "read" => {
                    let loc = self.location()?;
                    let labels = self.labels()?;
                    Ok(RawInstr::Read { dest, loc, labels })
                }
                "rmw" => {
                    let loc = self.location()?;
                    let (o, p) = self.ident()?;
                    let op = match o.as_str() {
                        "xchg" => RmwOp::Xchg,
                        "add" => RmwOp::Add,
                        _ => return Err(Diagnostic::at(p, format!("unknown rmw operator `{o}`"))),
                    };
                    let data = self.operand()?;
                    let labels = self.labels()?;
                    Ok(RawInstr::Rmw { dest, loc, op, data, labels })
                }
                "op" => {
                    let (name, _) = self.ident()?;
                    self.expect_punct("(")?;
                    let mut args = Vec::new();
                    if !self.eat_punct(")") {
                        loop {
                            args.push(self.operand()?);
                            if self.eat_punct(")") {
                                break;
                            }
                            self.expect_punct(",")?;
                        }
                    }
                    Ok(RawInstr::Op { dest, name, args })
                }
                "phi" => {
                    let mut incoming = Vec::new();
                    loop {
                        self.expect_punct("[")?;
                        let b = self.ident()?;
                        self.expect_punct(":")?;
                        let v = self.operand()?;
                        self.expect_punct("]")?;
                        incoming.push((b, v));
                        if !self.eat_punct(",") {
                            break;
                        }
                    }
                    Ok(RawInstr::Phi { dest, incoming })
                }
                _ => Err(Diagnostic::at(opos, format!("unknown instruction `{op}`"))),
            };
        }
        let (kw, pos) = self.ident()?;
        match kw.as_str() {
            "write" => {
                let loc = self.location()?;
                let data = self.operand()?;
                let labels = self.labels()?;
                Ok(RawInstr::Write { loc, data, labels })
            }
            "push" => Ok(RawInstr::Push { labels: self.labels()? }),
            "noop" => {
                let labels = self.labels()?;
                if labels.is_empty() {
                    return Err(Diagnostic::at(pos, "`noop` requires a label"));
                }
                Ok(RawInstr::Noop { labels })
            }
            "bind" => {
                let (b, p) = self.ident()?;
                Ok(RawInstr::Bind(b, p))
            }
            _ => Err(Diagnostic::at(pos, format!("unknown instruction `{kw}`"))),
        }
    }

    fn terminator(&mut self) -> PResult<RawTerm> {
        let (kw, _) = self.ident()?;
        match kw.as_str() {
            "jmp" => Ok(RawTerm::Jmp(self.ident()?)),
            "br" => {
                let cond = self.operand()?;
                self.expect_punct("?")?;
                let then_to = self.ident()?;
                self.expect_punct(":")?;
                let else_to = self.ident()?;
                Ok(RawTerm::Br { cond, then_to, else_to })
            }
            "ret" => {
                let v = match self.peek() {
                    Tok::Value(_) | Tok::Int(_) => Some(self.operand()?),
                    _ => None,
                };
                Ok(RawTerm::Ret(v))
            }
            _ => unreachable!("terminator() called on a non-terminator"),
        }
    }

    fn at_terminator(&self) -> bool {
        self.is_kw("jmp") || self.is_kw("br") || self.is_kw("ret")
    }

    fn block(&mut self) -> PResult<RawBlock> {
        self.expect_kw("block")?;
        let (name, pos) = self.ident()?;
        self.expect_punct(":")?;
        let mut instrs = Vec::new();
        loop {
            if self.at_terminator() {
                break;
            }
            if self.is_kw("block") || *self.peek() == Tok::Punct("}") || *self.peek() == Tok::Eof {
                return self.unexpected("an instruction or terminator");
            }
            instrs.push(self.instr()?);
        }
        let term = self.terminator()?;
        Ok(RawBlock { name, pos, instrs, term })
    }

    fn function(&mut self) -> PResult<(String, Pos, Vec<RawDecl>, Vec<RawBlock>)> {
        self.expect_kw("func")?;
        let (name, pos) = self.ident()?;
        self.expect_punct("{")?;
        let mut decls = Vec::new();
        while self.is_kw("edge") {
            decls.push(self.decl()?);
        }
        let mut blocks = Vec::new();
        while self.is_kw("block") {
            blocks.push(self.block()?);
        }
        if blocks.is_empty() {
            return self.unexpected("`block`");
        }
        self.expect_punct("}")?;
        Ok((name, pos, decls, blocks))
    }
}

/// Parse a source file into its functions.
///
/// Syntax errors stop at the first problem; name-resolution problems are
/// collected per function and reported together.
pub fn parse(src: &str) -> Result<Module, Vec<Diagnostic>> {
    let toks = lex(src).map_err(|d| vec![d])?;
    let mut p = Parser { toks, at: 0 };
    let mut functions = Vec::new();
    let mut diags = Vec::new();
    let mut names: HashMap<String, Pos> = HashMap::new();
    while *p.peek() != Tok::Eof {
        let (name, pos, decls, blocks) = p.function().map_err(|d| vec![d])?;
        if let Some(prev) = names.insert(name.clone(), pos) {
            diags.push(Diagnostic::at(
                pos,
                format!("duplicate function `{name}` (first defined at {}:{})", prev.line, prev.col),
            ));
        }
        match resolve(name, decls, blocks) {
            Ok(f) => functions.push(f),
            Err(mut ds) => diags.append(&mut ds),
        }
    }
    if diags.is_empty() {
        Ok(Module { functions })
    } else {
        Err(diags)
    }
}

/// Parse a source file that must contain exactly one function.
pub fn parse_function(src: &str) -> Result<Function, Vec<Diagnostic>> {
    let m = parse(src)?;
    match m.functions.len() {
        1 => Ok(m.functions.into_iter().next().unwrap()),
        n => Err(vec![Diagnostic::new(format!("expected exactly one function, found {n}"))]),
    }
}

struct Resolver {
    diags: Vec<Diagnostic>,
    blocks: HashMap<String, BlockId>,
    values: HashMap<String, ValueId>,
    binds: HashMap<String, BindId>,
}

impl Resolver {
    fn block(&mut self, (name, pos): &(String, Pos)) -> BlockId {
        match self.blocks.get(name) {
            Some(b) => *b,
            None => {
                self.diags.push(Diagnostic::at(*pos, format!("undefined block `{name}`")));
                BlockId(0)
            }
        }
    }

    fn value(&mut self, name: &str, pos: Pos) -> ValueId {
        match self.values.get(name) {
            Some(v) => *v,
            None => {
                self.diags.push(Diagnostic::at(pos, format!("undefined value `%{name}`")));
                ValueId(0)
            }
        }
    }

    fn operand(&mut self, o: &RawOpnd) -> Operand {
        match o {
            RawOpnd::Value(n, p) => Operand::Value(self.value(n, *p)),
            RawOpnd::Int(i) => Operand::Int(*i),
        }
    }

    fn location(&mut self, l: &RawLoc) -> Location {
        match l {
            RawLoc::Global(g) => Location::Global(g.clone()),
            RawLoc::Pointer(v, p) => Location::Pointer(self.value(v, *p)),
        }
    }
}

fn resolve(name: String, decls: Vec<RawDecl>, raw: Vec<RawBlock>) -> Result<Function, Vec<Diagnostic>> {
    let mut r = Resolver {
        diags: Vec::new(),
        blocks: HashMap::new(),
        values: HashMap::new(),
        binds: HashMap::new(),
    };
    let mut value_names = Vec::new();
    let mut bind_names = Vec::new();

    for (i, b) in raw.iter().enumerate() {
        if r.blocks.insert(b.name.clone(), BlockId::from_index(i)).is_some() {
            r.diags.push(Diagnostic::at(b.pos, format!("duplicate block `{}`", b.name)));
        }
        for ins in &b.instrs {
            let dest = match ins {
                RawInstr::Read { dest, .. }
                | RawInstr::Rmw { dest, .. }
                | RawInstr::Op { dest, .. }
                | RawInstr::Phi { dest, .. } => Some(dest),
                RawInstr::Bind(n, p) => {
                    let id = BindId::from_index(bind_names.len());
                    if r.binds.insert(n.clone(), id).is_some() {
                        r.diags.push(Diagnostic::at(*p, format!("duplicate bind point `{n}`")));
                    } else {
                        bind_names.push(n.clone());
                    }
                    None
                }
                _ => None,
            };
            if let Some((v, p)) = dest {
                let id = ValueId::from_index(value_names.len());
                if r.values.insert(v.clone(), id).is_some() {
                    r.diags.push(Diagnostic::at(*p, format!("duplicate definition of value `%{v}`")));
                } else {
                    value_names.push(v.clone());
                }
            }
        }
    }

    let mut actions = Vec::new();
    let mut blocks = Vec::new();
    for b in &raw {
        let mut instrs = Vec::new();
        for ins in &b.instrs {
            let mut push_action = |a: Action| {
                actions.push(a);
                Instr::Action(ActionId::from_index(actions.len() - 1))
            };
            let resolved = match ins {
                RawInstr::Read { dest, loc, labels } => {
                    let a = Action {
                        kind: ActionKind::Read,
                        location: Some(r.location(loc)),
                        data: None,
                        def: Some(r.value(&dest.0, dest.1)),
                        labels: labels.clone(),
                    };
                    push_action(a)
                }
                RawInstr::Write { loc, data, labels } => {
                    let a = Action {
                        kind: ActionKind::Write,
                        location: Some(r.location(loc)),
                        data: Some(r.operand(data)),
                        def: None,
                        labels: labels.clone(),
                    };
                    push_action(a)
                }
                RawInstr::Rmw { dest, loc, op, data, labels } => {
                    let a = Action {
                        kind: ActionKind::Rmw(*op),
                        location: Some(r.location(loc)),
                        data: Some(r.operand(data)),
                        def: Some(r.value(&dest.0, dest.1)),
                        labels: labels.clone(),
                    };
                    push_action(a)
                }
                RawInstr::Push { labels } => push_action(Action {
                    kind: ActionKind::Push,
                    location: None,
                    data: None,
                    def: None,
                    labels: labels.clone(),
                }),
                RawInstr::Noop { labels } => push_action(Action {
                    kind: ActionKind::Noop,
                    location: None,
                    data: None,
                    def: None,
                    labels: labels.clone(),
                }),
                RawInstr::Op { dest, name, args } => Instr::Op {
                    dest: r.value(&dest.0, dest.1),
                    name: name.clone(),
                    args: args.iter().map(|a| r.operand(a)).collect(),
                },
                RawInstr::Phi { dest, incoming } => Instr::Phi {
                    dest: r.value(&dest.0, dest.1),
                    incoming: incoming.iter().map(|(b, v)| (r.block(b), r.operand(v))).collect(),
                },
                RawInstr::Bind(n, _) => Instr::Bind(r.binds[n]),
            };
            instrs.push(resolved);
        }
        let term = match &b.term {
            RawTerm::Jmp(t) => Terminator::Jmp(r.block(t)),
            RawTerm::Br { cond, then_to, else_to } => Terminator::Br {
                cond: r.operand(cond),
                then_to: r.block(then_to),
                else_to: r.block(else_to),
            },
            RawTerm::Ret(v) => Terminator::Ret(v.as_ref().map(|v| r.operand(v))),
        };
        blocks.push(Block { name: b.name.clone(), instrs, term });
    }

    let mut out_decls = Vec::new();
    for d in &decls {
        let src = tag_ref(&d.src.0);
        let dst = tag_ref(&d.dst.0);
        if src == TagRef::Post {
            r.diags.push(Diagnostic::at(d.src.1, "`post` may only appear as an edge destination"));
        }
        if dst == TagRef::Pre {
            r.diags.push(Diagnostic::at(d.dst.1, "`pre` may only appear as an edge source"));
        }
        if src == TagRef::Pre && dst == TagRef::Post {
            r.diags.push(Diagnostic::at(d.src.1, "an edge cannot relate `pre` to `post`"));
        }
        let boundary = matches!(src, TagRef::Pre | TagRef::Post) || matches!(dst, TagRef::Pre | TagRef::Post);
        let binding = match &d.binding {
            Some((b, p)) => {
                if boundary {
                    r.diags.push(Diagnostic::at(*p, "`pre`/`post` edges cannot be scoped with `here`"));
                }
                match r.binds.get(b) {
                    Some(id) => Some(*id),
                    None => {
                        r.diags.push(Diagnostic::at(*p, format!("undefined bind point `{b}`")));
                        None
                    }
                }
            }
            None => None,
        };
        out_decls.push(ConstraintDecl { kind: d.kind, src, dst, binding });
    }

    if r.diags.is_empty() {
        Ok(Function { name, blocks, actions, values: value_names, binds: bind_names, decls: out_decls })
    } else {
        Err(r.diags)
    }
}

fn tag_ref(s: &str) -> TagRef {
    match s {
        "pre" => TagRef::Pre,
        "post" => TagRef::Post,
        _ => TagRef::Tag(s.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MP_SEND: &str = "
        func send {
          edge vo wdata -> wflag;
          block e:
            write @data 42 label wdata
            write @flag 1 label wflag
            ret
        }";

    #[test]
    fn message_passing_sender() {
        let f = parse_function(MP_SEND).unwrap();
        assert_eq!(f.blocks.len(), 1);
        assert_eq!(f.actions.len(), 2);
        assert_eq!(f.decls.len(), 1);
        assert_eq!(f.decls[0].kind, EdgeKind::Vo);
        assert_eq!(f.decls[0].src, TagRef::Tag("wdata".into()));
    }

    #[test]
    fn degenerate_function() {
        let f = parse_function("func f { block e: ret }").unwrap();
        assert_eq!(f.blocks.len(), 1);
        assert!(f.blocks[0].instrs.is_empty());
        assert_eq!(f.blocks[0].term, Terminator::Ret(None));
    }

    #[test]
    fn undefined_value_is_reported() {
        let err = parse("func f { block e: write @x %v ret }").unwrap_err();
        assert_eq!(err.len(), 1);
        assert!(err[0].message.contains("undefined value `%v`"), "{}", err[0]);
        assert_eq!(err[0].pos, Some(Pos { line: 1, col: 28 }));
    }

    #[test]
    fn duplicates_are_reported() {
        let err = parse(
            "func f { block a: %x = op g() %x = op h() bind b bind b jmp a block a: ret }",
        )
        .unwrap_err();
        let msgs: Vec<_> = err.iter().map(|d| d.message.as_str()).collect();
        assert!(msgs.iter().any(|m| m.contains("duplicate definition of value `%x`")));
        assert!(msgs.iter().any(|m| m.contains("duplicate bind point `b`")));
        assert!(msgs.iter().any(|m| m.contains("duplicate block `a`")));
    }

    #[test]
    fn pre_post_misuse() {
        for src in [
            "func f { edge vo a -> pre; block e: write @x 1 label a ret }",
            "func f { edge vo post -> a; block e: write @x 1 label a ret }",
            "func f { edge vo pre -> post; block e: ret }",
            "func f { edge xo here(h) pre -> a; block e: bind h write @x 1 label a ret }",
        ] {
            assert!(parse(src).is_err(), "{src}");
        }
        assert!(parse("func f { block e: write @x 1 label pre ret }").is_err());
    }

    #[test]
    fn syntax_error_has_position() {
        let err = parse("func f {\n  block e:\n    bogus\n    ret\n}").unwrap_err();
        assert_eq!(err[0].pos, Some(Pos { line: 3, col: 5 }));
    }

    #[test]
    fn comments_are_ignored() {
        let f = parse_function(
            "# leading\nfunc f { block e: ;; BARRIER dmb\n write @x 1 # trailing\n ret }",
        )
        .unwrap();
        assert_eq!(f.actions.len(), 1);
    }

    #[test]
    fn multiple_labels_and_shared_tags() {
        let f = parse_function(
            "func f { edge xo a -> r; block e:
               %p = read @p label a
               %x = read *%p label r label extra
               %y = read *%p label r
               ret }",
        )
        .unwrap();
        assert_eq!(f.tagged("r").len(), 2);
        assert_eq!(f.actions[1].labels, vec!["r".to_string(), "extra".to_string()]);
        assert_eq!(f.action_name(ActionId(1)), "r.0");
        assert_eq!(f.action_name(ActionId(0)), "a");
    }
}
