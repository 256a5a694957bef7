//! Deterministic discrete-event simulation of one epoch.
//!
//! A run applies a [`Plan`] to the carried-over [`ClusterState`], pushes
//! the epoch's arrivals through the container lifecycle (cold start, busy,
//! idle, shutdown), autoscales containers in place when requests queue, and
//! integrates power, carbon, cost and load between events.

mod engine;
mod plan;

use std::collections::{BTreeMap, BTreeSet};

use ordered_float::OrderedFloat;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use engine::{
    apply_plan, autoscale, autoscale_by, route_request, simulate_epoch, violation_rate, RouteDecision,
    TransitionSummary,
};
pub use plan::{Placement, Plan, Transition, TransitionLedger};

use crate::envmodel::{ClusterSpec, EnvError, PowerSample};
use crate::workload::ProfileSet;
use crate::FunctionId;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("plan exceeds capacity of node {node} ({cores} cores, {dram} MB)")]
    Capacity { node: usize, cores: u64, dram: u64 },
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("arrivals are not sorted by arrival time (index {0})")]
    UnsortedArrivals(usize),
    #[error("unknown function id `{0}`")]
    UnknownFunction(FunctionId),
    #[error("invalid simulator config: {0}")]
    Config(String),
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// Utilization and concurrency knobs of the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Simultaneous requests one base allocation unit serves.
    pub concurrency_per_unit: u32,
    /// Fraction of an idle slot's cores counted as busy.
    pub idle_util: f64,
    pub startup_util: f64,
    pub shutdown_util: f64,
    /// Keep every power interval in [`SimOutcome::power_trace`].
    pub record_power: bool,
    /// Check resource and causality invariants after every event.
    pub audit: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            concurrency_per_unit: 1,
            idle_util: 0.1,
            startup_util: 1.0,
            shutdown_util: 0.5,
            record_power: false,
            audit: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.concurrency_per_unit == 0 {
            return Err(SimError::Config("concurrency_per_unit must be at least 1".into()));
        }
        for (name, v) in [
            ("idle_util", self.idle_util),
            ("startup_util", self.startup_util),
            ("shutdown_util", self.shutdown_util),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(SimError::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContainerState {
    ColdStarting,
    Idle,
    Busy,
    ShuttingDown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Container {
    pub id: u64,
    pub function_id: FunctionId,
    pub node: usize,
    pub units: u32,
    /// Size the plan asked for; autoscaled units above it are released
    /// once the queue drains.
    pub planned_units: u32,
    pub base_cores: u32,
    pub base_dram: u32,
    pub state: ContainerState,
    pub active_requests: u32,
    /// Waiting request indices keyed by absolute deadline (EDF order).
    #[serde(skip)]
    pub queue: BTreeSet<(OrderedFloat<f64>, usize)>,
    pub state_entered_at: f64,
    /// Absolute time the pending cold start or shutdown completes.
    pub transition_at: Option<f64>,
    /// Set once a shutdown has completed and resources are returned.
    #[serde(skip)]
    pub(crate) released: bool,
}

impl Container {
    pub fn cores(&self) -> u32 {
        self.units * self.base_cores
    }

    pub fn dram(&self) -> u32 {
        self.units * self.base_dram
    }

    pub fn capacity(&self, cfg: &SimConfig) -> u32 {
        self.units * cfg.concurrency_per_unit
    }

    pub fn is_live(&self) -> bool {
        matches!(self.state, ContainerState::Idle | ContainerState::Busy)
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    /// Requests running plus waiting, doomed ones included.
    pub fn demand(&self) -> u32 {
        self.active_requests + self.queue.len() as u32
    }

    /// Effective busy cores for the power model.
    pub(crate) fn power_cores(&self, cfg: &SimConfig) -> f64 {
        let cores = self.cores() as f64;
        match self.state {
            ContainerState::ColdStarting => cores * cfg.startup_util,
            ContainerState::ShuttingDown => cores * cfg.shutdown_util,
            ContainerState::Idle | ContainerState::Busy => {
                let busy = self.active_requests as f64 / self.capacity(cfg) as f64;
                cores * (busy + (1.0 - busy) * cfg.idle_util)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NodeOccupancy {
    pub cores_used: u32,
    pub dram_used: u32,
}

/// Cluster snapshot between events. Pending lifecycle transitions live on
/// the containers themselves (`transition_at`), so a quiescent state needs
/// no separate event queue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterState {
    /// Absolute seconds; the start of the next epoch to simulate.
    pub clock: f64,
    pub nodes: Vec<NodeOccupancy>,
    /// Sorted by container id.
    pub containers: Vec<Container>,
    pub(crate) next_container_id: u64,
}

impl ClusterState {
    pub fn empty(cluster: &ClusterSpec) -> Self {
        ClusterState {
            clock: 0.0,
            nodes: vec![NodeOccupancy::default(); cluster.nodes.len()],
            containers: Vec::new(),
            next_container_id: 0,
        }
    }

    /// State holding `plan`'s containers already warm and idle.
    pub fn warm(plan: &Plan, cluster: &ClusterSpec, profiles: &ProfileSet) -> Result<Self, SimError> {
        let mut state = ClusterState::empty(cluster);
        TransitionLedger::for_plan(&state, plan, cluster, profiles)?;
        for (id, list) in &plan.placements {
            let p = profiles
                .get(id)
                .ok_or_else(|| SimError::UnknownFunction(id.clone()))?;
            for placement in list {
                state.spawn(id.clone(), *placement, p.base_cores, p.base_dram, ContainerState::Idle, None);
            }
        }
        Ok(state)
    }

    pub(crate) fn spawn(
        &mut self,
        function_id: FunctionId,
        placement: Placement,
        base_cores: u32,
        base_dram: u32,
        state: ContainerState,
        transition_at: Option<f64>,
    ) -> usize {
        let c = Container {
            id: self.next_container_id,
            function_id,
            node: placement.node,
            units: placement.units,
            planned_units: placement.units,
            base_cores,
            base_dram,
            state,
            active_requests: 0,
            queue: BTreeSet::new(),
            state_entered_at: self.clock,
            transition_at,
            released: false,
        };
        self.next_container_id += 1;
        let occ = &mut self.nodes[c.node];
        occ.cores_used += c.cores();
        occ.dram_used += c.dram();
        self.containers.push(c);
        self.containers.len() - 1
    }

    pub fn live_container_count(&self) -> usize {
        self.containers
            .iter()
            .filter(|c| !c.released && c.state != ContainerState::ShuttingDown)
            .count()
    }

    /// Checks that every node's tracked occupancy matches its containers and
    /// fits its capacity.
    pub fn check_resources(&self, cluster: &ClusterSpec) -> Result<(), String> {
        let mut sums = vec![(0u64, 0u64); self.nodes.len()];
        for c in self.containers.iter().filter(|c| !c.released) {
            sums[c.node].0 += c.cores() as u64;
            sums[c.node].1 += c.dram() as u64;
        }
        for (i, ((cores, dram), occ)) in sums.iter().zip(&self.nodes).enumerate() {
            let spec = &cluster.nodes[i];
            if *cores != occ.cores_used as u64 || *dram != occ.dram_used as u64 {
                return Err(format!("node {i}: occupancy out of sync"));
            }
            if *cores > spec.total_cores as u64 || *dram > spec.total_dram as u64 {
                return Err(format!("node {i}: {cores} cores / {dram} MB exceed capacity"));
            }
        }
        Ok(())
    }
}

/// Epoch accounting.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub carbon: f64,
    pub cost: f64,
    pub water_carbon: f64,
    pub energy_kwh: f64,
    pub violations: BTreeMap<FunctionId, u64>,
    pub totals: BTreeMap<FunctionId, u64>,
    pub completed: BTreeMap<FunctionId, u64>,
    /// Only ids with at least one request.
    pub slo_rates: BTreeMap<FunctionId, f64>,
    /// Mean of `slo_rates`; 0 when no id had requests.
    pub slo_average: f64,
    pub avg_load: f64,
    pub decision_time: f64,
    /// Simulated seconds, including the drain of in-flight requests past
    /// the end of the epoch.
    pub span: f64,
    pub drain: f64,
    pub cold_starts: usize,
    pub shutdowns: usize,
    /// Highest allocated cores seen on each node (shutting down included).
    pub peak_node_cores: Vec<u32>,
}

impl EpochMetrics {
    pub fn slo_defined(&self) -> bool {
        !self.slo_rates.is_empty()
    }

    pub fn total_requests(&self) -> u64 {
        self.totals.values().sum()
    }

    pub fn total_violations(&self) -> u64 {
        self.violations.values().sum()
    }
}

/// Invariant counters collected when [`SimConfig::audit`] is set.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SimAudit {
    pub events: u64,
    pub causality_violations: u64,
    pub resource_violations: u64,
    pub first_problem: Option<String>,
}

impl SimAudit {
    pub fn clean(&self) -> bool {
        self.causality_violations == 0 && self.resource_violations == 0
    }
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub metrics: EpochMetrics,
    /// Quiescent state at the start of the next epoch.
    pub end_state: ClusterState,
    /// Every request of the epoch with lifecycle fields filled in.
    pub requests: Vec<crate::workload::Request>,
    pub transition: TransitionSummary,
    pub power_trace: Vec<PowerSample>,
    pub audit: SimAudit,
}

/// Time-weighted mean of `(time, load)` samples; each load holds until the
/// next sample, the last until `end`.
pub fn average_load(samples: &[(f64, f64)], end: f64) -> f64 {
    let Some(&(start, _)) = samples.first() else {
        return 0.0;
    };
    if end <= start {
        return 0.0;
    }
    let mut acc = 0.0;
    for (i, &(t, load)) in samples.iter().enumerate() {
        let next = samples.get(i + 1).map(|s| s.0).unwrap_or(end).min(end);
        if next > t {
            acc += load * (next - t);
        }
    }
    acc / (end - start)
}
