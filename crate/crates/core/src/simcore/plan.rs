use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ClusterState, ContainerState, SimError};
use crate::envmodel::ClusterSpec;
use crate::workload::ProfileSet;
use crate::FunctionId;

/// One planned container: its node and its size in base-allocation units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Placement {
    pub node: usize,
    pub units: u32,
}

/// Container distribution for an epoch: per function id, the containers to
/// run. Placement lists are kept sorted so equal plans compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Plan {
    pub epoch_index: usize,
    pub placements: BTreeMap<FunctionId, Vec<Placement>>,
}

impl Plan {
    pub fn new(epoch_index: usize) -> Self {
        Plan {
            epoch_index,
            placements: BTreeMap::new(),
        }
    }

    /// Live (not shutting down) containers of `state` as a plan.
    pub fn from_state(state: &ClusterState, epoch_index: usize) -> Self {
        let mut plan = Plan::new(epoch_index);
        for c in state
            .containers
            .iter()
            .filter(|c| !c.released && c.state != ContainerState::ShuttingDown)
        {
            plan.placements
                .entry(c.function_id.clone())
                .or_default()
                .push(Placement {
                    node: c.node,
                    units: c.units,
                });
        }
        plan.canonicalize();
        plan
    }

    pub fn canonicalize(&mut self) {
        for list in self.placements.values_mut() {
            list.sort_unstable();
        }
    }

    pub fn push(&mut self, id: FunctionId, placement: Placement) {
        let list = self.placements.entry(id).or_default();
        let at = list.partition_point(|p| *p <= placement);
        list.insert(at, placement);
    }

    pub fn containers(&self, id: &str) -> &[Placement] {
        self.placements.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn container_count(&self) -> usize {
        self.placements.values().map(Vec::len).sum()
    }

    pub fn total_units(&self) -> u64 {
        self.placements
            .values()
            .flatten()
            .map(|p| p.units as u64)
            .sum()
    }
}

/// How the next plan maps onto containers already present.
///
/// Within each (function id, node) group, existing containers sorted by
/// decreasing size are paired with planned containers sorted by decreasing
/// size. Paired containers stay warm and are resized in place; surplus
/// existing containers shut down; surplus planned containers cold-start.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Transition {
    /// (existing container index, new units)
    pub kept: Vec<(usize, u32)>,
    pub removed: Vec<usize>,
    pub created: Vec<(FunctionId, Placement)>,
}

pub(crate) fn diff(state: &ClusterState, plan: &Plan) -> Transition {
    let mut groups: BTreeMap<(FunctionId, usize), (Vec<usize>, Vec<u32>)> = BTreeMap::new();
    for (i, c) in state.containers.iter().enumerate() {
        if !c.released && c.state != ContainerState::ShuttingDown {
            groups.entry((c.function_id.clone(), c.node)).or_default().0.push(i);
        }
    }
    for (id, list) in &plan.placements {
        for p in list {
            groups.entry((id.clone(), p.node)).or_default().1.push(p.units);
        }
    }
    let mut t = Transition::default();
    for ((id, node), (mut old, mut new)) in groups {
        old.sort_by(|&a, &b| {
            let (ca, cb) = (&state.containers[a], &state.containers[b]);
            cb.units.cmp(&ca.units).then(ca.id.cmp(&cb.id))
        });
        new.sort_unstable_by(|a, b| b.cmp(a));
        let k = old.len().min(new.len());
        t.kept.extend(old[..k].iter().copied().zip(new[..k].iter().copied()));
        t.removed.extend_from_slice(&old[k..]);
        t.created
            .extend(new[k..].iter().map(|&units| (id.clone(), Placement { node, units })));
    }
    t
}

/// Per-node resource accounting for a transition from an existing state to
/// a plan, including resources still held by containers that shut down.
///
/// Planners use it incrementally ([`TransitionLedger::try_add`]); the
/// simulator uses it to validate whole plans.
#[derive(Debug, Clone)]
pub struct TransitionLedger {
    capacity: Vec<(u64, u64)>,
    held: Vec<(u64, u64)>,
    groups: BTreeMap<(FunctionId, usize), Group>,
    base: BTreeMap<FunctionId, (u64, u64)>,
}

#[derive(Debug, Clone, Default)]
struct Group {
    /// Existing container sizes, decreasing.
    old: Vec<u32>,
    /// Planned sizes, decreasing.
    new: Vec<u32>,
    base: (u64, u64),
}

impl Group {
    fn footprint(&self) -> (u64, u64) {
        let k = self.old.len().min(self.new.len());
        let units: u64 = self.new.iter().map(|&u| u as u64).sum::<u64>()
            + self.old[k..].iter().map(|&u| u as u64).sum::<u64>();
        (units * self.base.0, units * self.base.1)
    }
}

impl TransitionLedger {
    pub fn new(state: &ClusterState, cluster: &ClusterSpec) -> Self {
        let capacity = cluster
            .nodes
            .iter()
            .map(|n| (n.total_cores as u64, n.total_dram as u64))
            .collect();
        let mut ledger = TransitionLedger {
            capacity,
            held: vec![(0, 0); cluster.nodes.len()],
            groups: BTreeMap::new(),
            base: BTreeMap::new(),
        };
        for c in state.containers.iter().filter(|c| !c.released) {
            let base = (c.base_cores as u64, c.base_dram as u64);
            if c.state == ContainerState::ShuttingDown {
                let held = &mut ledger.held[c.node];
                held.0 += c.units as u64 * base.0;
                held.1 += c.units as u64 * base.1;
                continue;
            }
            let g = ledger.groups.entry((c.function_id.clone(), c.node)).or_default();
            g.base = base;
            let at = g.old.partition_point(|&u| u >= c.units);
            g.old.insert(at, c.units);
        }
        for (key, g) in &ledger.groups {
            let fp = g.footprint();
            let held = &mut ledger.held[key.1];
            held.0 += fp.0;
            held.1 += fp.1;
        }
        ledger
    }

    /// Seeds the ledger with every placement of `plan` and checks the
    /// resulting per-node footprint against capacity.
    pub fn for_plan(
        state: &ClusterState,
        plan: &Plan,
        cluster: &ClusterSpec,
        profiles: &ProfileSet,
    ) -> Result<Self, SimError> {
        let mut ledger = TransitionLedger::new(state, cluster);
        for (id, list) in &plan.placements {
            let p = profiles
                .get(id)
                .ok_or_else(|| SimError::UnknownFunction(id.clone()))?;
            ledger.set_base(id, p.base_cores, p.base_dram);
            for placement in list {
                if placement.node >= cluster.nodes.len() || placement.units == 0 {
                    return Err(SimError::InvalidPlan(format!(
                        "{id}: bad placement {placement:?}"
                    )));
                }
                ledger.add(id, *placement);
            }
        }
        for (node, (&(cores, dram), &(used_c, used_d))) in
            ledger.capacity.iter().zip(&ledger.held).enumerate()
        {
            if used_c > cores || used_d > dram {
                return Err(SimError::Capacity { node, cores, dram });
            }
        }
        Ok(ledger)
    }

    pub fn set_base(&mut self, id: &FunctionId, cores: u32, dram: u32) {
        self.base.insert(id.clone(), (cores as u64, dram as u64));
    }

    fn base_of(&self, id: &FunctionId, node: usize) -> (u64, u64) {
        if let Some(b) = self.base.get(id) {
            return *b;
        }
        self.groups
            .get(&(id.clone(), node))
            .map(|g| g.base)
            .unwrap_or((0, 0))
    }

    /// Change in (cores, DRAM) committed on the node if `p` were placed.
    /// Negative when `p` replaces a larger existing container.
    pub fn cost_of(&self, id: &FunctionId, p: Placement) -> (i64, i64) {
        let key = (id.clone(), p.node);
        let mut g = self.groups.get(&key).cloned().unwrap_or_default();
        g.base = self.base_of(id, p.node);
        let before = g.footprint();
        let at = g.new.partition_point(|&u| u >= p.units);
        g.new.insert(at, p.units);
        let after = g.footprint();
        (
            after.0 as i64 - before.0 as i64,
            after.1 as i64 - before.1 as i64,
        )
    }

    pub fn fits(&self, id: &FunctionId, p: Placement) -> bool {
        let (dc, dd) = self.cost_of(id, p);
        let (used_c, used_d) = self.held[p.node];
        let (cap_c, cap_d) = self.capacity[p.node];
        used_c as i64 + dc <= cap_c as i64 && used_d as i64 + dd <= cap_d as i64
    }

    /// Adds `p` when it fits and reports whether it did.
    pub fn try_add(&mut self, id: &FunctionId, p: Placement) -> bool {
        if !self.fits(id, p) {
            return false;
        }
        self.add(id, p);
        true
    }

    fn add(&mut self, id: &FunctionId, p: Placement) {
        let (dc, dd) = self.cost_of(id, p);
        let base = self.base_of(id, p.node);
        let g = self.groups.entry((id.clone(), p.node)).or_default();
        g.base = base;
        let at = g.new.partition_point(|&u| u >= p.units);
        g.new.insert(at, p.units);
        let held = &mut self.held[p.node];
        held.0 = held.0.saturating_add_signed(dc);
        held.1 = held.1.saturating_add_signed(dd);
    }

    /// (cores, DRAM) committed on `node` during the transition.
    pub fn used(&self, node: usize) -> (u64, u64) {
        self.held[node]
    }

    pub fn free_cores(&self, node: usize) -> u64 {
        self.capacity[node].0 - self.held[node].0.min(self.capacity[node].0)
    }

    pub fn node_count(&self) -> usize {
        self.capacity.len()
    }
}
