//! Comparison policies and a brute-force oracle for tiny instances.
//!
//! The three provisioning baselines size every id the same way: enough
//! base containers to carry the forecast load plus one spare. They differ
//! only in where containers go.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::casa::{feasibility_order, CasaError, Evaluator, Objectives, OptimizerContext};
use crate::simcore::{Placement, Plan, TransitionLedger};
use crate::FunctionId;

pub const DEFAULT_ORACLE_BOUND: u64 = 1_000_000;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("oracle would enumerate {count} plans, above the bound of {bound}")]
    TooLarge { count: u64, bound: u64 },
    #[error("unknown policy `{0}` (expected casa, score, roundrobin, random or oracle)")]
    UnknownPolicy(String),
    #[error(transparent)]
    Casa(#[from] CasaError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Casa,
    Score,
    #[serde(alias = "roundrobin")]
    RoundRobin,
    Random,
    Oracle,
}

impl FromStr for PolicyKind {
    type Err = BaselineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "casa" => Ok(PolicyKind::Casa),
            "score" => Ok(PolicyKind::Score),
            "roundrobin" | "round_robin" | "round-robin" => Ok(PolicyKind::RoundRobin),
            "random" => Ok(PolicyKind::Random),
            "oracle" => Ok(PolicyKind::Oracle),
            _ => Err(BaselineError::UnknownPolicy(s.to_string())),
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyKind::Casa => "casa",
            PolicyKind::Score => "score",
            PolicyKind::RoundRobin => "roundrobin",
            PolicyKind::Random => "random",
            PolicyKind::Oracle => "oracle",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselinePlan {
    pub plan: Plan,
    /// Some container could not be placed anywhere.
    pub saturated: bool,
}

/// `ceil(R * T_ave / (L * concurrency)) + 1`.
pub fn provision_count(ctx: &OptimizerContext, id: &FunctionId) -> usize {
    let r = ctx.epoch_input.intensity(id) as f64;
    let t = ctx.profiles.get(id).map(|p| p.avg_exec_time).unwrap_or(0.0);
    let slots = ctx.cluster.epoch_length * ctx.sim.concurrency_per_unit as f64;
    (r * t / slots).ceil() as usize + 1
}

/// Ids by decreasing forecast intensity, ties by id.
fn by_intensity(ctx: &OptimizerContext) -> Vec<FunctionId> {
    let mut ids = ctx.epoch_input.function_ids.clone();
    ids.sort_by(|a, b| {
        ctx.epoch_input
            .intensity(b)
            .cmp(&ctx.epoch_input.intensity(a))
            .then(a.cmp(b))
    });
    ids
}

fn provision(
    ctx: &OptimizerContext,
    ids: &[FunctionId],
    mut pick: impl FnMut(&TransitionLedger, &FunctionId) -> Option<usize>,
) -> Result<BaselinePlan, BaselineError> {
    let mut plan = Plan::new(ctx.epoch_input.epoch_index);
    let mut ledger = TransitionLedger::new(&ctx.prev_state, &ctx.cluster);
    let mut saturated = false;
    for id in ids {
        let p = ctx.profiles.require(id).map_err(CasaError::from)?;
        ledger.set_base(id, p.base_cores, p.base_dram);
        for _ in 0..provision_count(ctx, id) {
            match pick(&ledger, id) {
                Some(node) => {
                    let pl = Placement { node, units: 1 };
                    let ok = ledger.try_add(id, pl);
                    debug_assert!(ok);
                    plan.push(id.clone(), pl);
                }
                None => saturated = true,
            }
        }
    }
    Ok(BaselinePlan { plan, saturated })
}

fn fits(ledger: &TransitionLedger, id: &FunctionId, node: usize) -> bool {
    ledger.fits(id, Placement { node, units: 1 })
}

/// Spreads each container onto the node left with the most free cores.
pub fn score_plan(ctx: &OptimizerContext) -> Result<BaselinePlan, BaselineError> {
    provision(ctx, &by_intensity(ctx), |ledger, id| {
        (0..ledger.node_count())
            .filter(|&n| fits(ledger, id, n))
            .map(|n| {
                let left = ledger.free_cores(n) as i64 - ledger.cost_of(id, Placement { node: n, units: 1 }).0;
                (n, left)
            })
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|(n, _)| n)
    })
}

/// Cycles nodes 0, 1, ..., N-1 over containers in id order, skipping nodes
/// that are full.
pub fn round_robin_plan(ctx: &OptimizerContext) -> Result<BaselinePlan, BaselineError> {
    let mut cursor = 0usize;
    provision(ctx, &ctx.epoch_input.function_ids, |ledger, id| {
        let n = ledger.node_count();
        let found = (0..n).map(|k| (cursor + k) % n).find(|&node| fits(ledger, id, node));
        if let Some(node) = found {
            cursor = (node + 1) % n;
        }
        found
    })
}

/// Uniformly random feasible node per container.
pub fn random_plan(ctx: &OptimizerContext, seed: u64) -> Result<BaselinePlan, BaselineError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    provision(ctx, &ctx.epoch_input.function_ids, |ledger, id| {
        let nodes: Vec<usize> = (0..ledger.node_count()).filter(|&n| fits(ledger, id, n)).collect();
        nodes.choose(&mut rng).copied()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleLimits {
    pub max_containers: usize,
    pub max_units: u32,
    pub bound: u64,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits {
            max_containers: 2,
            max_units: 2,
            bound: DEFAULT_ORACLE_BOUND,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub plan: Plan,
    pub objectives: Objectives,
    /// Plans in the enumeration.
    pub enumerated: u64,
    /// Plans that fit the cluster and were simulated.
    pub evaluated: u64,
}

/// Placement lists for one id: every multiset of 1..=max_containers
/// (node, units) pairs, as sorted lists.
fn id_choices(n_nodes: usize, limits: &OracleLimits) -> Vec<Vec<Placement>> {
    let items: Vec<Placement> = (0..n_nodes)
        .flat_map(|node| (1..=limits.max_units).map(move |units| Placement { node, units }))
        .collect();
    let mut out = Vec::new();
    fn grow(items: &[Placement], from: usize, cur: &mut Vec<Placement>, left: usize, out: &mut Vec<Vec<Placement>>) {
        if !cur.is_empty() {
            out.push(cur.clone());
        }
        if left == 0 {
            return;
        }
        for i in from..items.len() {
            cur.push(items[i]);
            grow(items, i, cur, left - 1, out);
            cur.pop();
        }
    }
    grow(&items, 0, &mut Vec::new(), limits.max_containers, &mut out);
    out
}

/// Size of the oracle's enumeration; saturates at `u64::MAX`.
pub fn plan_count(ctx: &OptimizerContext, limits: &OracleLimits) -> u64 {
    let m = (ctx.cluster.nodes.len() as u64).saturating_mul(limits.max_units as u64);
    // multisets of size k from m items: C(m + k - 1, k)
    let mut per_id = 0u64;
    let mut c = 1u64;
    for k in 1..=limits.max_containers as u64 {
        c = c.saturating_mul(m + k - 1) / k;
        per_id = per_id.saturating_add(c);
    }
    let mut total = 1u64;
    for _ in &ctx.epoch_input.function_ids {
        total = total.saturating_mul(per_id);
    }
    total
}

/// Evaluates every plan in the enumeration and returns the best one under
/// the feasibility-first ordering. Ties keep the earliest plan.
pub fn exhaustive_oracle(ctx: &OptimizerContext, limits: &OracleLimits) -> Result<OracleResult, BaselineError> {
    let count = plan_count(ctx, limits);
    if count > limits.bound {
        return Err(BaselineError::TooLarge {
            count,
            bound: limits.bound,
        });
    }
    let choices = id_choices(ctx.cluster.nodes.len(), limits);
    let ids = &ctx.epoch_input.function_ids;
    let cstr = ctx.slo_constraint();
    let mut evaluator = Evaluator::new(ctx)?;
    let mut best: Option<(Plan, Objectives)> = None;
    let mut evaluated = 0;
    for index in 0..count {
        let mut plan = Plan::new(ctx.epoch_input.epoch_index);
        let mut rest = index;
        for id in ids {
            let k = (rest % choices.len() as u64) as usize;
            rest /= choices.len() as u64;
            plan.placements.insert(id.clone(), choices[k].clone());
        }
        if TransitionLedger::for_plan(&ctx.prev_state, &plan, &ctx.cluster, &ctx.profiles).is_err() {
            continue;
        }
        evaluated += 1;
        let o = evaluator.evaluate(&plan).map_err(CasaError::from)?.objectives;
        let better = match &best {
            None => true,
            Some((_, b)) => feasibility_order(&o, b, cstr) == Ordering::Less,
        };
        if better {
            best = Some((plan, o));
        }
    }
    let (plan, objectives) = match best {
        Some(b) => b,
        None => {
            let plan = Plan::new(ctx.epoch_input.epoch_index);
            let o = evaluator.evaluate(&plan).map_err(CasaError::from)?.objectives;
            (plan, o)
        }
    };
    Ok(OracleResult {
        plan,
        objectives,
        enumerated: count,
        evaluated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envmodel::{ClusterSpec, EnvironmentSeries, HourEnv, PowerCoeffs};
    use crate::simcore::{ClusterState, SimConfig};
    use crate::workload::{EpochInput, EpochParams, FunctionProfile, ProfileSet};

    fn ctx(n_nodes: usize, cores: u32, ids: &[(&str, u64, f64)]) -> OptimizerContext {
        let mut profiles = ProfileSet::new();
        for &(id, _, t) in ids {
            profiles
                .insert(FunctionProfile {
                    function_id: id.into(),
                    avg_exec_time: t,
                    image_size: 10.0,
                    base_cores: 2,
                    base_dram: 150,
                })
                .unwrap();
        }
        let cluster = ClusterSpec::homogeneous(n_nodes, cores, 65536, PowerCoeffs::LINEAR, 125.0, &[1]);
        OptimizerContext {
            epoch_input: EpochInput::from_intensities(
                0,
                ids.iter().map(|&(id, r, _)| (FunctionId::from(id), r)),
                EpochParams::default(),
            ),
            prev_state: ClusterState::empty(&cluster),
            env: EnvironmentSeries::constant(HourEnv {
                carbon_intensity: 300.0,
                energy_price: 0.1,
                cooling_eff: 0.2,
                water_factor: 0.0,
            }),
            cluster,
            profiles,
            sim: SimConfig::default(),
            seed: 11,
            wall_clock_budget: 10.0,
        }
    }

    fn per_node(plan: &Plan, n: usize) -> Vec<usize> {
        let mut v = vec![0; n];
        for p in plan.placements.values().flatten() {
            v[p.node] += 1;
        }
        v
    }

    #[test]
    fn provisioning_rule() {
        let c = ctx(1, 64, &[("a", 900, 3.0), ("b", 1, 0.5), ("c", 901, 1.0)]);
        assert_eq!(provision_count(&c, &"a".into()), 3 + 1);
        assert_eq!(provision_count(&c, &"b".into()), 1 + 1);
        assert_eq!(provision_count(&c, &"c".into()), 2 + 1);
    }

    #[test]
    fn score_tiny_demand_uses_two_emptiest_nodes() {
        let c = ctx(3, 16, &[("a", 1, 1.0)]);
        let b = score_plan(&c).unwrap();
        assert!(!b.saturated);
        assert_eq!(b.plan.containers("a"), &[Placement { node: 0, units: 1 }, Placement { node: 1, units: 1 }]);
    }

    #[test]
    fn score_spreads_evenly() {
        // 4 containers: ceil(1350 * 2 / 900) + 1 = 4
        let c = ctx(2, 16, &[("a", 1350, 2.0)]);
        let b = score_plan(&c).unwrap();
        assert_eq!(per_node(&b.plan, 2), vec![2, 2]);
    }

    #[test]
    fn saturated_demand_fills_every_node() {
        let c = ctx(2, 8, &[("a", 100_000, 1.0)]);
        for b in [score_plan(&c).unwrap(), round_robin_plan(&c).unwrap(), random_plan(&c, 3).unwrap()] {
            assert!(b.saturated);
            assert_eq!(per_node(&b.plan, 2), vec![4, 4]);
        }
    }

    #[test]
    fn round_robin_cycles() {
        // 1 + 1 and 1 + 1: four containers over three nodes
        let c = ctx(3, 64, &[("a", 1, 1.0), ("b", 1, 1.0)]);
        let b = round_robin_plan(&c).unwrap();
        assert_eq!(per_node(&b.plan, 3), vec![2, 1, 1]);
        let c = ctx(3, 64, &[("a", 900, 2.0)]);
        assert_eq!(per_node(&round_robin_plan(&c).unwrap().plan, 3), vec![1, 1, 1]);
        let c = ctx(1, 64, &[("a", 900, 2.0), ("b", 3, 1.0)]);
        assert_eq!(per_node(&round_robin_plan(&c).unwrap().plan, 1), vec![5]);
        assert_eq!(random_plan(&c, 9).unwrap(), round_robin_plan(&c).unwrap());
    }

    #[test]
    fn random_is_seeded() {
        let c = ctx(4, 64, &[("a", 4000, 2.0), ("b", 100, 1.0)]);
        assert_eq!(random_plan(&c, 5).unwrap(), random_plan(&c, 5).unwrap());
    }

    #[test]
    fn oracle_counts() {
        let mut c = ctx(1, 64, &[("a", 1, 1.0)]);
        let limits = OracleLimits { max_containers: 1, max_units: 3, bound: 100 };
        assert_eq!(plan_count(&c, &limits), 3);
        let r = exhaustive_oracle(&c, &limits).unwrap();
        assert_eq!((r.enumerated, r.evaluated), (3, 3));

        c = ctx(2, 64, &[("a", 1, 1.0), ("b", 1, 1.0), ("c", 1, 1.0)]);
        let limits = OracleLimits { max_containers: 2, max_units: 1, bound: 1000 };
        // per id: 2 singletons + 3 pairs
        assert_eq!(plan_count(&c, &limits), 5 * 5 * 5);
        assert_eq!(id_choices(2, &limits).len(), 5);
        assert_eq!(id_choices(2, &OracleLimits::default()).len(), 14);

        let small = OracleLimits { bound: 10, ..limits };
        assert!(matches!(exhaustive_oracle(&c, &small), Err(BaselineError::TooLarge { count: 125, .. })));
    }

    #[test]
    fn policy_names() {
        assert_eq!("roundrobin".parse::<PolicyKind>().unwrap(), PolicyKind::RoundRobin);
        assert_eq!("CASA".parse::<PolicyKind>().unwrap(), PolicyKind::Casa);
        assert!("fifo".parse::<PolicyKind>().is_err());
    }
}
