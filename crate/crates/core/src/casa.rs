//! Dual-objective local search over container distributions.
//!
//! The loop alternates two optimizers. While the current plan's average
//! violation rate exceeds the constraint, the SLO optimizer searches the id
//! with the most violations; otherwise the carbon optimizer searches ids in
//! decreasing request intensity. An id that fails `K` consecutive searches
//! is blacklisted for that optimizer. Every candidate is scored by a full
//! epoch simulation on one fixed set of sampled arrivals.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::envmodel::{hour_of, ClusterSpec, EnvironmentSeries, HourEnv};
use crate::simcore::{
    simulate_epoch, ClusterState, Placement, Plan, SimConfig, SimError, TransitionLedger,
};
use crate::workload::{synthesize_arrivals, EpochInput, ProfileSet, Request, WorkloadError};
use crate::FunctionId;

pub const DEFAULT_BUDGET_S: f64 = 180.0;

#[derive(Debug, Error)]
pub enum CasaError {
    #[error("invalid optimizer context: {0}")]
    Context(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error("step log {path}: {source}")]
    Log { path: String, source: csv::Error },
}

/// Everything a policy sees when deciding one epoch.
#[derive(Debug, Clone)]
pub struct OptimizerContext {
    pub epoch_input: EpochInput,
    /// Cluster as the previous epoch left it; its live containers are D_{e-1}.
    pub prev_state: ClusterState,
    pub env: EnvironmentSeries,
    pub cluster: ClusterSpec,
    pub profiles: ProfileSet,
    pub sim: SimConfig,
    /// Seeds the sampled arrivals and the neighborhood shuffles.
    pub seed: u64,
    pub wall_clock_budget: f64,
}

impl OptimizerContext {
    pub fn validate(&self) -> Result<(), CasaError> {
        if !(self.wall_clock_budget > 0.0) {
            return Err(CasaError::Context(format!(
                "wall_clock_budget must be positive, got {}",
                self.wall_clock_budget
            )));
        }
        self.epoch_input.params.validate()?;
        self.sim.validate()?;
        self.cluster.validate().map_err(SimError::from)?;
        for id in &self.epoch_input.function_ids {
            self.profiles.require(id)?;
        }
        Ok(())
    }

    pub fn prev_distribution(&self) -> Plan {
        Plan::from_state(&self.prev_state, self.epoch_input.epoch_index)
    }

    /// Carbon intensity and price in force at the epoch start.
    pub fn hour_env(&self) -> Result<&HourEnv, CasaError> {
        Ok(self
            .env
            .hour(hour_of(self.prev_state.clock))
            .map_err(SimError::from)?)
    }

    pub fn slo_constraint(&self) -> f64 {
        self.epoch_input.params.slo_constraint
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Objectives {
    pub slo_average: f64,
    pub carbon: f64,
    pub cost: f64,
    pub load: f64,
}

impl Objectives {
    pub fn feasible(&self, cstr: f64) -> bool {
        self.slo_average <= cstr
    }
}

/// Feasibility-first ordering: feasible before infeasible, then lower carbon
/// among feasible and lower violation rate among infeasible. `Less` means
/// `a` is better.
pub fn feasibility_order(a: &Objectives, b: &Objectives, cstr: f64) -> Ordering {
    match (a.feasible(cstr), b.feasible(cstr)) {
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
        (true, true) => a
            .carbon
            .total_cmp(&b.carbon)
            .then(a.slo_average.total_cmp(&b.slo_average)),
        (false, false) => a
            .slo_average
            .total_cmp(&b.slo_average)
            .then(a.carbon.total_cmp(&b.carbon)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub objectives: Objectives,
    /// Per-id violation rates of the evaluated plan.
    pub slo_rates: BTreeMap<FunctionId, f64>,
}

/// Scores plans against one fixed sample of the epoch's arrivals.
#[derive(Debug)]
pub struct Evaluator<'c> {
    ctx: &'c OptimizerContext,
    arrivals: Vec<Request>,
    evaluations: usize,
}

impl<'c> Evaluator<'c> {
    pub fn new(ctx: &'c OptimizerContext) -> Result<Self, CasaError> {
        let arrivals = synthesize_arrivals(
            &ctx.epoch_input,
            &ctx.profiles,
            ctx.cluster.epoch_length,
            ctx.seed,
        )?;
        Ok(Evaluator {
            ctx,
            arrivals,
            evaluations: 0,
        })
    }

    pub fn arrivals(&self) -> &[Request] {
        &self.arrivals
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn evaluate(&mut self, plan: &Plan) -> Result<Evaluation, SimError> {
        self.evaluations += 1;
        let ctx = self.ctx;
        let out = simulate_epoch(
            ctx.prev_state.clone(),
            plan,
            &self.arrivals,
            &ctx.cluster,
            &ctx.env,
            &ctx.profiles,
            &ctx.sim,
        )?;
        let m = out.metrics;
        Ok(Evaluation {
            objectives: Objectives {
                slo_average: m.slo_average,
                carbon: m.carbon,
                cost: m.cost,
                load: m.avg_load,
            },
            slo_rates: m.slo_rates,
        })
    }
}

/// One-shot evaluation of `plan`.
pub fn evaluate(plan: &Plan, ctx: &OptimizerContext) -> Result<Objectives, CasaError> {
    Ok(Evaluator::new(ctx)?.evaluate(plan)?.objectives)
}

/// Inherits D_{e-1}, drops ids with no forecast requests and gives each new
/// id one base container on the least-allocated node that can hold it.
pub fn initial_plan(ctx: &OptimizerContext) -> Result<Plan, CasaError> {
    let active = ctx.epoch_input.id_set();
    let mut plan = ctx.prev_distribution();
    plan.epoch_index = ctx.epoch_input.epoch_index;
    plan.placements.retain(|id, _| active.contains(id));
    let mut ledger = TransitionLedger::for_plan(&ctx.prev_state, &plan, &ctx.cluster, &ctx.profiles)?;
    for id in &ctx.epoch_input.function_ids {
        if plan.placements.contains_key(id) {
            continue;
        }
        let p = ctx.profiles.require(id)?;
        ledger.set_base(id, p.base_cores, p.base_dram);
        let mut nodes: Vec<usize> = (0..ledger.node_count()).collect();
        nodes.sort_by_key(|&n| (ledger.used(n).0, n));
        let placed = nodes.into_iter().map(|node| Placement { node, units: 1 }).find(|&pl| {
            ledger.try_add(id, pl)
        });
        if let Some(pl) = placed {
            plan.push(id.clone(), pl);
        }
    }
    Ok(plan)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Initial,
    Slo,
    Carbon,
}

impl fmt::Display for Optimizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Optimizer::Initial => "initial",
            Optimizer::Slo => "slo",
            Optimizer::Carbon => "carbon",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMode {
    Slo,
    Carbon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Move {
    Add { node: usize },
    Grow { from: Placement },
    Remove { from: Placement },
    Shrink { from: Placement },
    Relocate { from: Placement, to: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub mv: Move,
    pub plan: Plan,
}

fn with_list(plan: &Plan, f: &FunctionId, list: Vec<Placement>) -> Plan {
    let mut out = plan.clone();
    let mut list = list;
    list.sort_unstable();
    if list.is_empty() {
        out.placements.remove(f);
    } else {
        out.placements.insert(f.clone(), list);
    }
    out
}

/// Moves for `f` in the given mode, filtered by capacity (shutting-down
/// containers included) and shuffled by `rng`. Duplicate plans are kept
/// once.
pub fn neighborhood(
    plan: &Plan,
    f: &FunctionId,
    mode: SearchMode,
    ctx: &OptimizerContext,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Candidate>, CasaError> {
    let ledger = TransitionLedger::for_plan(&ctx.prev_state, plan, &ctx.cluster, &ctx.profiles)?;
    let n_nodes = ledger.node_count();
    let list = plan.containers(f).to_vec();
    let mut raw: Vec<(Move, Vec<Placement>)> = Vec::new();
    let mut seen = BTreeSet::new();
    let mut distinct = list.clone();
    distinct.dedup();

    match mode {
        SearchMode::Slo => {
            for node in 0..n_nodes {
                let mut l = list.clone();
                l.push(Placement { node, units: 1 });
                raw.push((Move::Add { node }, l));
            }
            for &from in &distinct {
                let mut l = list.clone();
                let at = l.iter().position(|&p| p == from).expect("present");
                l[at].units += 1;
                raw.push((Move::Grow { from }, l));
            }
            for &from in &distinct {
                for to in 0..n_nodes {
                    if to != from.node && ledger.free_cores(to) > ledger.free_cores(from.node) {
                        let mut l = list.clone();
                        let at = l.iter().position(|&p| p == from).expect("present");
                        l[at].node = to;
                        raw.push((Move::Relocate { from, to }, l));
                    }
                }
            }
        }
        SearchMode::Carbon => {
            let floor = if ctx.epoch_input.intensity(f) > 0 { 1 } else { 0 };
            if list.len() > floor {
                for &from in &distinct {
                    let mut l = list.clone();
                    let at = l.iter().position(|&p| p == from).expect("present");
                    l.remove(at);
                    raw.push((Move::Remove { from }, l));
                }
            }
            for &from in distinct.iter().filter(|p| p.units > 1) {
                let mut l = list.clone();
                let at = l.iter().position(|&p| p == from).expect("present");
                l[at].units -= 1;
                raw.push((Move::Shrink { from }, l));
            }
            for &from in &distinct {
                for to in 0..n_nodes {
                    // equal allocations count the lower node id as fuller
                    let fuller = (ledger.used(to).0, Reverse(to)) > (ledger.used(from.node).0, Reverse(from.node));
                    if to != from.node && fuller {
                        let mut l = list.clone();
                        let at = l.iter().position(|&p| p == from).expect("present");
                        l[at].node = to;
                        raw.push((Move::Relocate { from, to }, l));
                    }
                }
            }
        }
    }

    let mut out = Vec::with_capacity(raw.len());
    for (mv, l) in raw {
        let cand = with_list(plan, f, l);
        if &cand == plan || !seen.insert(cand.placements.get(f).cloned()) {
            continue;
        }
        if TransitionLedger::for_plan(&ctx.prev_state, &cand, &ctx.cluster, &ctx.profiles).is_ok() {
            out.push(Candidate { mv, plan: cand });
        }
    }
    out.shuffle(rng);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub iteration: usize,
    pub optimizer: Optimizer,
    pub function_id: Option<FunctionId>,
    pub accepted: bool,
    /// Objectives of the current plan after the step.
    pub slo_avg: f64,
    pub carbon_g: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    IterationCeiling,
    Budget,
    /// The optimizer the current plan calls for has every id blacklisted.
    Exhausted,
}

#[derive(Debug, Clone)]
pub struct SearchState {
    pub current: Plan,
    pub objectives: Objectives,
    /// S(f): per-id violation rates of `current`.
    pub violation_scores: BTreeMap<FunctionId, f64>,
    /// R(f) for the epoch.
    pub intensities: BTreeMap<FunctionId, u64>,
    /// Search order of the carbon optimizer, fixed at epoch start.
    pub carbon_order: Vec<FunctionId>,
    pub blacklist_slo: BTreeSet<FunctionId>,
    pub blacklist_carbon: BTreeSet<FunctionId>,
    pub failures_slo: BTreeMap<FunctionId, usize>,
    pub failures_carbon: BTreeMap<FunctionId, usize>,
    pub iterations_used: usize,
    pub initial: Plan,
    pub initial_objectives: Objectives,
    pub best: Plan,
    pub best_objectives: Objectives,
    pub log: Vec<StepRecord>,
    pub evaluations: usize,
    pub stop: Option<StopReason>,
}

impl SearchState {
    fn new(ctx: &OptimizerContext, plan: Plan, eval: Evaluation) -> Self {
        let intensities = ctx.epoch_input.intensities.clone();
        let mut carbon_order = ctx.epoch_input.function_ids.clone();
        carbon_order.sort_by(|a, b| intensities[b].cmp(&intensities[a]).then(a.cmp(b)));
        let log = vec![StepRecord {
            iteration: 0,
            optimizer: Optimizer::Initial,
            function_id: None,
            accepted: true,
            slo_avg: eval.objectives.slo_average,
            carbon_g: eval.objectives.carbon,
        }];
        SearchState {
            initial: plan.clone(),
            initial_objectives: eval.objectives,
            best: plan.clone(),
            best_objectives: eval.objectives,
            current: plan,
            objectives: eval.objectives,
            violation_scores: eval.slo_rates,
            intensities,
            carbon_order,
            blacklist_slo: BTreeSet::new(),
            blacklist_carbon: BTreeSet::new(),
            failures_slo: BTreeMap::new(),
            failures_carbon: BTreeMap::new(),
            iterations_used: 0,
            log,
            evaluations: 1,
            stop: None,
        }
    }

    /// Id the SLO optimizer would search next: highest S(f), then lowest id.
    pub fn next_slo_target(&self) -> Option<&FunctionId> {
        self.carbon_order
            .iter()
            .filter(|f| !self.blacklist_slo.contains(*f))
            .min_by(|a, b| {
                let (sa, sb) = (self.score(a), self.score(b));
                sb.total_cmp(&sa).then(a.cmp(b))
            })
    }

    /// Id the carbon optimizer would search next.
    pub fn next_carbon_target(&self) -> Option<&FunctionId> {
        self.carbon_order
            .iter()
            .find(|f| !self.blacklist_carbon.contains(*f))
    }

    fn score(&self, f: &str) -> f64 {
        self.violation_scores.get(f).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone)]
pub struct CasaOutcome {
    pub plan: Plan,
    pub objectives: Objectives,
    pub state: SearchState,
    pub elapsed: Duration,
}

struct Search<'c> {
    ctx: &'c OptimizerContext,
    evaluator: Evaluator<'c>,
    rng: ChaCha8Rng,
    started: Instant,
    budget: Duration,
    slowest_eval: Duration,
    out_of_time: bool,
}

impl<'c> Search<'c> {
    fn timed_eval(&mut self, plan: &Plan) -> Result<Option<Evaluation>, CasaError> {
        // headroom of two evaluations absorbs timing noise
        if self.started.elapsed() + 2 * self.slowest_eval > self.budget {
            self.out_of_time = true;
            return Ok(None);
        }
        let t = Instant::now();
        let e = self.evaluator.evaluate(plan)?;
        self.slowest_eval = self.slowest_eval.max(t.elapsed());
        Ok(Some(e))
    }

    fn step(&mut self, st: &mut SearchState, mode: SearchMode, f: FunctionId) -> Result<(), CasaError> {
        let cands = neighborhood(&st.current, &f, mode, self.ctx, &mut self.rng)?;
        let mut best: Option<(Plan, Evaluation)> = None;
        for c in cands {
            let Some(e) = self.timed_eval(&c.plan)? else {
                break;
            };
            let better = match &best {
                None => true,
                Some((_, b)) => key(mode, &e.objectives) < key(mode, &b.objectives),
            };
            if better {
                best = Some((c.plan, e));
            }
        }
        let adopted = match best {
            Some((plan, e)) if improves(mode, &e.objectives, &st.objectives) => {
                st.current = plan;
                st.objectives = e.objectives;
                st.violation_scores = e.slo_rates;
                true
            }
            _ => false,
        };
        let k = self.ctx.epoch_input.params.local_search_limit;
        let (failures, blacklist, optimizer) = match mode {
            SearchMode::Slo => (&mut st.failures_slo, &mut st.blacklist_slo, Optimizer::Slo),
            SearchMode::Carbon => (&mut st.failures_carbon, &mut st.blacklist_carbon, Optimizer::Carbon),
        };
        let count = failures.entry(f.clone()).or_insert(0);
        if adopted {
            *count = 0;
        } else {
            *count += 1;
            if *count >= k {
                blacklist.insert(f.clone());
            }
        }
        st.iterations_used += 1;
        if adopted
            && feasibility_order(&st.objectives, &st.best_objectives, self.ctx.slo_constraint())
                == Ordering::Less
        {
            st.best = st.current.clone();
            st.best_objectives = st.objectives;
        }
        st.log.push(StepRecord {
            iteration: st.iterations_used,
            optimizer,
            function_id: Some(f),
            accepted: adopted,
            slo_avg: st.objectives.slo_average,
            carbon_g: st.objectives.carbon,
        });
        Ok(())
    }
}

fn key(mode: SearchMode, o: &Objectives) -> (ordered_float::OrderedFloat<f64>, ordered_float::OrderedFloat<f64>) {
    use ordered_float::OrderedFloat as F;
    match mode {
        SearchMode::Slo => (F(o.slo_average), F(o.carbon)),
        SearchMode::Carbon => (F(o.carbon), F(o.slo_average)),
    }
}

fn improves(mode: SearchMode, cand: &Objectives, cur: &Objectives) -> bool {
    match mode {
        SearchMode::Slo => cand.slo_average < cur.slo_average,
        SearchMode::Carbon => cand.carbon < cur.carbon,
    }
}

/// Runs the optimizer loop from the initial plan until the iteration
/// ceiling, the wall-clock budget, or the active optimizer runs out of ids.
/// Returns the best plan seen under [`feasibility_order`].
pub fn optimize_epoch(ctx: &OptimizerContext) -> Result<CasaOutcome, CasaError> {
    ctx.validate()?;
    let started = Instant::now();
    let mut search = Search {
        ctx,
        evaluator: Evaluator::new(ctx)?,
        rng: ChaCha8Rng::seed_from_u64(ctx.seed ^ 0x5eed_ca5a),
        started,
        budget: Duration::from_secs_f64(ctx.wall_clock_budget),
        slowest_eval: Duration::ZERO,
        out_of_time: false,
    };
    let plan = initial_plan(ctx)?;
    let t = Instant::now();
    let eval = search.evaluator.evaluate(&plan)?;
    search.slowest_eval = t.elapsed();
    let mut st = SearchState::new(ctx, plan, eval);
    let gen = ctx.epoch_input.params.iteration_ceiling;
    let cstr = ctx.slo_constraint();

    loop {
        if st.iterations_used >= gen {
            st.stop = Some(StopReason::IterationCeiling);
            break;
        }
        if search.out_of_time || started.elapsed() >= search.budget {
            st.stop = Some(StopReason::Budget);
            break;
        }
        let (mode, target) = if st.objectives.slo_average > cstr {
            (SearchMode::Slo, st.next_slo_target().cloned())
        } else {
            (SearchMode::Carbon, st.next_carbon_target().cloned())
        };
        let Some(f) = target else {
            st.stop = Some(StopReason::Exhausted);
            break;
        };
        search.step(&mut st, mode, f)?;
    }
    if search.out_of_time {
        st.stop = Some(StopReason::Budget);
    }
    st.evaluations = search.evaluator.evaluations();
    Ok(CasaOutcome {
        plan: st.best.clone(),
        objectives: st.best_objectives,
        elapsed: started.elapsed(),
        state: st,
    })
}

pub fn write_step_log(path: impl AsRef<Path>, log: &[StepRecord]) -> Result<(), CasaError> {
    let path = path.as_ref();
    let err = |source| CasaError::Log {
        path: path.display().to_string(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    for r in log {
        w.serialize(r).map_err(err)?;
    }
    w.flush().map_err(|e| err(e.into()))?;
    Ok(())
}
