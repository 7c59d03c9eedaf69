//! The whole pipeline for one function.

use std::time::Duration;

use crate::arch::{ArchProfile, CostTable};
use crate::constraints::{close, close_boundaries, resolve, BoundaryConstraint, ConstraintEdge};
use crate::emit::{to_plan, PlacementPlan};
use crate::encode::{build, EncodeInput, EncodeOptions, Problem};
use crate::graph::{edge_weights, loop_depths, LoopInfo, PathExplosion, DEFAULT_WEIGHT_CAP};
use crate::ir::{normalize, validate, Diagnostic, Function, NormalizedCfg};
use crate::solver::{solve_min, InternalUnsat, Solution};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompileOptions {
    pub encode: EncodeOptions,
    /// Overrides the cost table's loop factor.
    pub loop_factor: Option<u64>,
    pub weight_cap: u64,
    pub budget: Option<Duration>,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions { encode: EncodeOptions::default(), loop_factor: None, weight_cap: DEFAULT_WEIGHT_CAP, budget: None }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CompileError {
    #[error("invalid input")]
    Invalid(Vec<Diagnostic>),
    #[error(transparent)]
    PathExplosion(#[from] PathExplosion),
    #[error(transparent)]
    Internal(#[from] InternalUnsat),
}

/// A function made ready for encoding under one architecture.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub cfg: NormalizedCfg,
    /// Closed constraint edges between memory actions.
    pub edges: Vec<ConstraintEdge>,
    pub bounds: Vec<BoundaryConstraint>,
    pub loops: LoopInfo,
    pub weights: Vec<u64>,
    pub profile: ArchProfile,
    pub costs: CostTable,
}

pub fn prepare(f: &Function, profile: &ArchProfile, costs: &CostTable, opts: &CompileOptions) -> Result<Prepared, CompileError> {
    let diags = validate(f);
    if !diags.is_empty() {
        return Err(CompileError::Invalid(diags));
    }
    let cfg = normalize(f);
    let (edges, bounds) = resolve(&cfg).map_err(CompileError::Invalid)?;
    let closed = close(&cfg.func, &edges);
    let (bounds, diags) = close_boundaries(&cfg.func, &edges, &bounds);
    if !diags.is_empty() {
        return Err(CompileError::Invalid(diags));
    }
    let loops = loop_depths(&cfg);
    let factor = opts.loop_factor.unwrap_or(costs.loop_factor).max(1);
    let weights = edge_weights(&cfg, &loops, factor, opts.weight_cap);
    Ok(Prepared { cfg, edges: closed, bounds, loops, weights, profile: profile.clone(), costs: costs.clone() })
}

impl Prepared {
    pub fn input(&self) -> EncodeInput<'_> {
        EncodeInput {
            cfg: &self.cfg,
            edges: &self.edges,
            bounds: &self.bounds,
            profile: &self.profile,
            costs: &self.costs,
            weights: &self.weights,
        }
    }

    pub fn problem(&self, opts: &EncodeOptions) -> Result<Problem, PathExplosion> {
        build(&self.input(), opts)
    }
}

#[derive(Clone, Debug)]
pub struct Compiled {
    pub prepared: Prepared,
    pub problem: Problem,
    pub solution: Solution,
    pub plan: PlacementPlan,
}

pub fn compile(f: &Function, profile: &ArchProfile, costs: &CostTable, opts: &CompileOptions) -> Result<Compiled, CompileError> {
    let prepared = prepare(f, profile, costs, opts)?;
    let problem = prepared.problem(&opts.encode)?;
    let solution = solve_min(&problem, opts.budget)?;
    let plan = to_plan(&prepared, &problem, &solution);
    Ok(Compiled { prepared, problem, solution, plan })
}
