//! Exact minimum-cost solving by branch and bound.
//!
//! The problem is positive in every variable, so each defined variable
//! only needs the implication `d -> expr`, and assignments that satisfy the
//! resulting clauses correspond to assignments whose greatest-fixpoint
//! evaluation satisfies the roots. Variables left open are false.

use std::time::{Duration, Instant};

use crate::encode::{Expr, Problem};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    /// Budget ran out; the assignment is the best one found.
    BudgetExceeded,
}

impl SolveStatus {
    pub fn name(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::BudgetExceeded => "budget-exceeded",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Solution {
    /// One entry per output variable of the problem.
    pub assignment: Vec<bool>,
    pub cost: u64,
    pub status: SolveStatus,
    /// Search nodes visited.
    pub nodes: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("internal error: the all-true assignment does not satisfy the problem")]
pub struct InternalUnsat;

/// Clause `neg -> (pos[0] | pos[1] | ...)`; without `neg` it is asserted.
#[derive(Clone, Debug)]
struct Clause {
    neg: Option<usize>,
    pos: Vec<usize>,
}

struct Cnf {
    nvars: usize,
    n_out: usize,
    clauses: Vec<Clause>,
    cost: Vec<u64>,
    /// Clauses whose `neg` is the variable.
    owned: Vec<Vec<usize>>,
    /// A variable that is always false.
    false_var: usize,
}

impl Cnf {
    fn from_problem(p: &Problem) -> Cnf {
        let n_out = p.vars.len();
        let n_def = p.defs.len();
        let mut b = CnfBuilder { nvars: n_out + n_def + 1, clauses: Vec::new() };
        let false_var = n_out + n_def;
        let mut cost = Vec::new();
        for (d, (_, e)) in p.defs.iter().enumerate() {
            b.imply(Some(n_out + d), e, n_out, false_var);
        }
        for r in &p.roots {
            b.imply(None, &r.expr, n_out, false_var);
        }
        b.clauses.push(Clause { neg: Some(false_var), pos: Vec::new() });
        let mut var_cost = vec![0u64; n_out];
        let mut group_vars = Vec::new();
        for g in &p.groups {
            if g.vars.len() == 1 {
                var_cost[g.vars[0]] = g.cost;
            } else {
                let gv = b.fresh();
                group_vars.push((gv, g.cost));
                for &u in &g.vars {
                    b.clauses.push(Clause { neg: Some(u), pos: vec![gv] });
                }
            }
        }
        cost.extend(var_cost);
        cost.resize(b.nvars, 0);
        for (gv, c) in group_vars {
            cost[gv] = c;
        }
        let mut owned = vec![Vec::new(); b.nvars];
        for (i, c) in b.clauses.iter().enumerate() {
            if let Some(n) = c.neg {
                owned[n].push(i);
            }
        }
        Cnf { nvars: b.nvars, n_out, clauses: b.clauses, cost, owned, false_var }
    }
}

struct CnfBuilder {
    nvars: usize,
    clauses: Vec<Clause>,
}

impl CnfBuilder {
    fn fresh(&mut self) -> usize {
        self.nvars += 1;
        self.nvars - 1
    }

    /// Add clauses for `neg -> e`.
    fn imply(&mut self, neg: Option<usize>, e: &Expr, n_out: usize, false_var: usize) {
        match e {
            Expr::True => {}
            Expr::And(xs) => {
                for x in xs {
                    self.imply(neg, x, n_out, false_var);
                }
            }
            Expr::Or(xs) => {
                let pos = xs.iter().map(|x| self.lit(x, n_out, false_var)).collect();
                self.clauses.push(Clause { neg, pos });
            }
            other => {
                let l = self.lit(other, n_out, false_var);
                self.clauses.push(Clause { neg, pos: vec![l] });
            }
        }
    }

    /// A variable that implies `e`.
    fn lit(&mut self, e: &Expr, n_out: usize, false_var: usize) -> usize {
        match e {
            Expr::Out(v) => *v,
            Expr::Def(d) => n_out + d,
            Expr::False => false_var,
            _ => {
                let a = self.fresh();
                self.imply(Some(a), e, n_out, false_var);
                a
            }
        }
    }
}

const INF: u64 = u64::MAX;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Val {
    Open,
    T,
    F,
}

struct Search<'a> {
    cnf: &'a Cnf,
    nodes: u64,
    deadline: Option<Instant>,
    out_of_time: bool,
    /// Best cost known; only strictly cheaper solutions are accepted.
    bound: u64,
    best: Option<Vec<bool>>,
    /// Stop at the first accepted solution.
    first_only: bool,
}

impl<'a> Search<'a> {
    fn propagate(&self, a: &mut [Val]) -> bool {
        let cnf = self.cnf;
        loop {
            let mut changed = false;
            for c in &cnf.clauses {
                let active = c.neg.is_none_or(|n| a[n] == Val::T);
                if c.pos.iter().any(|v| a[*v] == Val::T) {
                    continue;
                }
                let mut open = c.pos.iter().filter(|v| a[**v] == Val::Open);
                let first = open.next();
                let more = open.next().is_some();
                match (first, more) {
                    (None, _) => {
                        if active {
                            return false;
                        }
                        if let Some(n) = c.neg {
                            if a[n] == Val::Open {
                                a[n] = Val::F;
                                changed = true;
                            }
                        }
                    }
                    (Some(&v), false) if active => {
                        a[v] = Val::T;
                        changed = true;
                    }
                    _ => {}
                }
            }
            if !changed {
                return true;
            }
        }
    }

    /// Least-fixpoint estimate of the cost of making each variable true.
    fn heuristic(&self, a: &[Val]) -> Vec<u64> {
        let cnf = self.cnf;
        let base: Vec<u64> = (0..cnf.nvars)
            .map(|v| match a[v] {
                Val::T => 0,
                Val::F => INF,
                Val::Open => cnf.cost[v],
            })
            .collect();
        let mut h = vec![0u64; cnf.nvars];
        for v in 0..cnf.nvars {
            if a[v] == Val::F {
                h[v] = INF;
            }
        }
        for _ in 0..64 {
            let mut changed = false;
            for v in 0..cnf.nvars {
                if a[v] != Val::Open {
                    continue;
                }
                let mut need = 0u64;
                for &ci in &cnf.owned[v] {
                    let m = cnf.clauses[ci].pos.iter().map(|x| h[*x]).min().unwrap_or(INF);
                    need = need.max(m);
                }
                let nv = base[v].saturating_add(need);
                if nv > h[v] {
                    h[v] = nv;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        h
    }

    fn lower_bound(&self, a: &[Val], h: &[u64]) -> u64 {
        let cnf = self.cnf;
        let mut single = 0u64;
        let mut disjoint: Vec<(u64, &Clause)> = Vec::new();
        for c in &cnf.clauses {
            let active = c.neg.is_none_or(|n| a[n] == Val::T);
            if !active || c.pos.iter().any(|v| a[*v] == Val::T) {
                continue;
            }
            let m = c.pos.iter().map(|v| h[*v]).min().unwrap_or(INF);
            single = single.max(m);
            if c.pos.iter().all(|v| cnf.owned[*v].is_empty()) {
                disjoint.push((m, c));
            }
        }
        disjoint.sort_by_key(|x| std::cmp::Reverse(x.0));
        let mut used = vec![false; cnf.nvars];
        let mut sum = 0u64;
        for (m, c) in disjoint {
            if c.pos.iter().any(|v| used[*v]) {
                continue;
            }
            for &v in &c.pos {
                used[v] = true;
            }
            sum = sum.saturating_add(m);
        }
        single.max(sum)
    }

    fn cost(&self, a: &[Val]) -> u64 {
        (0..self.cnf.nvars)
            .filter(|v| a[*v] == Val::T)
            .fold(0u64, |acc, v| acc.saturating_add(self.cnf.cost[v]))
    }

    fn done(&self) -> bool {
        self.out_of_time || (self.first_only && self.best.is_some())
    }

    fn run(&mut self, mut a: Vec<Val>) {
        if self.done() {
            return;
        }
        self.nodes += 1;
        if self.nodes % 256 == 1 {
            if let Some(d) = self.deadline {
                if Instant::now() >= d {
                    self.out_of_time = true;
                    return;
                }
            }
        }
        if !self.propagate(&mut a) {
            return;
        }
        let cost = self.cost(&a);
        if cost >= self.bound {
            return;
        }
        let h = self.heuristic(&a);
        if cost.saturating_add(self.lower_bound(&a, &h)) >= self.bound {
            return;
        }
        // Most constrained open clause.
        let cnf = self.cnf;
        let mut pick: Option<(usize, usize)> = None;
        for (i, c) in cnf.clauses.iter().enumerate() {
            let active = c.neg.is_none_or(|n| a[n] == Val::T);
            if !active || c.pos.iter().any(|v| a[*v] == Val::T) {
                continue;
            }
            let open = c.pos.iter().filter(|v| a[**v] == Val::Open).count();
            if pick.is_none_or(|(_, k)| open < k) {
                pick = Some((i, open));
            }
        }
        let Some((ci, _)) = pick else {
            self.bound = cost;
            self.best = Some((0..cnf.n_out).map(|v| a[v] == Val::T).collect());
            return;
        };
        let mut lits: Vec<usize> = cnf.clauses[ci].pos.iter().copied().filter(|v| a[*v] == Val::Open).collect();
        lits.sort_by_key(|v| (h[*v], *v));
        lits.dedup();
        for j in 0..lits.len() {
            let mut b = a.clone();
            for &x in &lits[..j] {
                b[x] = Val::F;
            }
            b[lits[j]] = Val::T;
            self.run(b);
            if self.done() {
                return;
            }
        }
    }
}

/// Minimum-cost assignment; among minimal ones, the lexicographically
/// smallest in output-variable order (false before true).
pub fn solve_min(p: &Problem, budget: Option<Duration>) -> Result<Solution, InternalUnsat> {
    let all = vec![true; p.vars.len()];
    if !p.satisfied(&all) {
        return Err(InternalUnsat);
    }
    let cnf = Cnf::from_problem(p);
    let deadline = budget.map(|b| Instant::now() + b);
    let mut start = vec![Val::Open; cnf.nvars];
    start[cnf.false_var] = Val::F;

    let mut s = Search { cnf: &cnf, nodes: 0, deadline, out_of_time: false, bound: INF, best: None, first_only: false };
    s.run(start.clone());
    let mut nodes = s.nodes;
    let Some(mut best) = s.best.take() else {
        if s.out_of_time {
            return Ok(Solution { cost: p.cost(&all), assignment: all, status: SolveStatus::BudgetExceeded, nodes });
        }
        return Err(InternalUnsat);
    };
    if s.out_of_time {
        return Ok(Solution { cost: p.cost(&best), assignment: best, status: SolveStatus::BudgetExceeded, nodes });
    }
    let opt = p.cost(&best);

    // Lexicographic minimization among optimal assignments.
    let mut fixed = start;
    for v in 0..cnf.n_out {
        if !best[v] {
            fixed[v] = Val::F;
            continue;
        }
        let mut trial = fixed.clone();
        trial[v] = Val::F;
        let mut s = Search {
            cnf: &cnf,
            nodes: 0,
            deadline,
            out_of_time: false,
            bound: opt.saturating_add(1),
            best: None,
            first_only: true,
        };
        s.run(trial.clone());
        nodes += s.nodes;
        if s.out_of_time {
            return Ok(Solution { cost: opt, assignment: best, status: SolveStatus::BudgetExceeded, nodes });
        }
        match s.best {
            Some(w) => {
                best = w;
                fixed = trial;
            }
            None => fixed[v] = Val::T,
        }
    }
    debug_assert!(p.satisfied(&best));
    Ok(Solution { cost: p.cost(&best), assignment: best, status: SolveStatus::Optimal, nodes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encode::{CostGroup, DefKey, OutputVar, Root, RootOf};
    use crate::ir::{ActionId, EdgeId};

    /// A problem over `n` barrier vars with the given costs and roots.
    fn problem(costs: &[u64], defs: Vec<Expr>, roots: Vec<Expr>) -> Problem {
        let n = costs.len();
        Problem {
            vars: (0..n).map(|i| OutputVar::Barrier { edge: EdgeId(i as u32), kind: 0 }).collect(),
            var_names: (0..n).map(|i| format!("x{i}")).collect(),
            groups: costs.iter().enumerate().map(|(i, c)| CostGroup { cost: *c, vars: vec![i] }).collect(),
            var_group: (0..n).collect(),
            defs: defs
                .into_iter()
                .enumerate()
                .map(|(i, e)| (DefKey::Ctrl { binding: None, src: ActionId(i as u32), dst: ActionId(0) }, e))
                .collect(),
            def_names: Vec::new(),
            root_names: roots.iter().map(|_| String::new()).collect(),
            roots: roots.into_iter().enumerate().map(|(i, expr)| Root { of: RootOf::Edge(i), expr }).collect(),
        }
    }

    fn or(xs: &[usize]) -> Expr {
        Expr::or(xs.iter().map(|x| Expr::Out(*x)))
    }

    #[test]
    fn picks_the_shared_edge() {
        let p = problem(&[65, 65, 65], vec![], vec![or(&[0, 1]), or(&[1, 2])]);
        let s = solve_min(&p, None).unwrap();
        assert_eq!(s.assignment, vec![false, true, false]);
        assert_eq!(s.cost, 65);
        assert_eq!(s.status, SolveStatus::Optimal);
    }

    #[test]
    fn cheaper_pair_beats_one_expensive() {
        let p = problem(&[10, 10, 25], vec![], vec![or(&[0, 2]), or(&[1, 2])]);
        assert_eq!(solve_min(&p, None).unwrap().cost, 20);
    }

    #[test]
    fn ties_break_toward_later_vars() {
        let p = problem(&[5, 5], vec![], vec![or(&[0, 1])]);
        assert_eq!(solve_min(&p, None).unwrap().assignment, vec![false, true]);
    }

    #[test]
    fn self_referential_defs_are_greatest_fixpoints() {
        // d0 := x0 & d0 holds whenever x0 does.
        let d = Expr::and([Expr::Out(0), Expr::Def(0)]);
        let p = problem(&[3, 1], vec![d], vec![Expr::or([Expr::Def(0), Expr::and([Expr::Out(1), Expr::Out(0)])])]);
        let s = solve_min(&p, None).unwrap();
        assert_eq!(s.assignment, vec![true, false]);
    }

    #[test]
    fn grouped_vars_are_paid_once() {
        let mut p = problem(&[4, 4, 7], vec![], vec![or(&[0, 2]), or(&[1, 2])]);
        p.groups = vec![CostGroup { cost: 4, vars: vec![0, 1] }, CostGroup { cost: 7, vars: vec![2] }];
        p.var_group = vec![0, 0, 1];
        let s = solve_min(&p, None).unwrap();
        assert_eq!((s.cost, s.assignment), (4, vec![true, true, false]));
    }

    #[test]
    fn unsatisfiable_with_everything_is_an_internal_error() {
        let p = problem(&[1], vec![], vec![Expr::False]);
        assert_eq!(solve_min(&p, None).unwrap_err(), InternalUnsat);
    }

    #[test]
    fn empty_problem() {
        let p = problem(&[], vec![], vec![]);
        let s = solve_min(&p, None).unwrap();
        assert_eq!((s.cost, s.assignment.len()), (0, 0));
    }
}
