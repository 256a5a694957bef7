use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use ordered_float::OrderedFloat;
use serde::{Deserialize, Serialize};

use super::plan::{diff, TransitionLedger};
use super::{
    ClusterState, Container, ContainerState, EpochMetrics, Plan, SimAudit, SimConfig, SimError,
    SimOutcome,
};
use crate::envmodel::{
    cold_start_latency, cooling_power, interval_carbon, interval_cost, node_power, split_hours,
    ClusterSpec, EnvironmentSeries, PowerSample,
};
use crate::workload::{ProfileSet, Request, RequestStatus};
use crate::FunctionId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TransitionSummary {
    pub kept: usize,
    pub resized: usize,
    pub cold_starts: usize,
    pub shutdowns: usize,
}

/// Moves `state` to `plan` at `state.clock`.
///
/// Matching containers stay warm (resized in place when the unit count
/// changes). New containers cold-start; all new containers on a node share
/// its link, so each becomes ready after the node's aggregate image volume
/// has transferred. Dropped containers shut down and keep their resources
/// for `shutdown_duration`.
pub fn apply_plan(
    mut state: ClusterState,
    plan: &Plan,
    cluster: &ClusterSpec,
    profiles: &ProfileSet,
) -> Result<(ClusterState, TransitionSummary), SimError> {
    TransitionLedger::for_plan(&state, plan, cluster, profiles)?;
    let t = diff(&state, plan);
    let now = state.clock;
    let mut summary = TransitionSummary {
        kept: t.kept.len(),
        ..Default::default()
    };

    for &i in &t.removed {
        let c = &mut state.containers[i];
        c.state = ContainerState::ShuttingDown;
        c.state_entered_at = now;
        c.transition_at = Some(now + cluster.shutdown_duration);
        summary.shutdowns += 1;
    }
    for &(i, units) in &t.kept {
        let c = &mut state.containers[i];
        if c.units == units {
            continue;
        }
        let occ = &mut state.nodes[c.node];
        occ.cores_used = occ.cores_used - c.cores() + units * c.base_cores;
        occ.dram_used = occ.dram_used - c.dram() + units * c.base_dram;
        c.units = units;
        c.planned_units = units;
        summary.resized += 1;
    }

    let mut image_per_node: BTreeMap<usize, f64> = BTreeMap::new();
    for (id, p) in &t.created {
        let profile = profiles.require(id).map_err(|_| SimError::UnknownFunction(id.clone()))?;
        *image_per_node.entry(p.node).or_default() += profile.image_size;
    }
    for (id, p) in t.created {
        let profile = profiles.require(&id).map_err(|_| SimError::UnknownFunction(id.clone()))?;
        let latency =
            cold_start_latency(&cluster.nodes[p.node], image_per_node[&p.node], cluster.switch_delay);
        state.spawn(
            id,
            p,
            profile.base_cores,
            profile.base_dram,
            ContainerState::ColdStarting,
            Some(now + latency),
        );
        summary.cold_starts += 1;
    }
    Ok((state, summary))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RouteDecision {
    /// Start immediately on this container (index into `state.containers`).
    Start(usize),
    /// No free slot: wait on this container.
    Enqueue(usize),
    /// The id has no usable container; the request expires at its deadline.
    NoContainer,
}

fn choose_route(
    containers: &[Container],
    candidates: impl Iterator<Item = usize> + Clone,
    cfg: &SimConfig,
) -> RouteDecision {
    let free = |c: &Container| c.capacity(cfg).saturating_sub(c.active_requests);
    let best_live = candidates
        .clone()
        .map(|i| (i, &containers[i]))
        .filter(|(_, c)| c.is_live() && free(c) > 0)
        .min_by_key(|(_, c)| (Reverse(free(c)), c.node, c.id));
    if let Some((i, _)) = best_live {
        return RouteDecision::Start(i);
    }
    candidates
        .map(|i| (i, &containers[i]))
        .filter(|(_, c)| c.state != ContainerState::ShuttingDown)
        .min_by_key(|(_, c)| (c.queue_len(), c.node, c.id))
        .map(|(i, _)| RouteDecision::Enqueue(i))
        .unwrap_or(RouteDecision::NoContainer)
}

/// Routing rule: the live container of the id with the most free slots
/// (ties: lowest node, then lowest container id); otherwise the container
/// with the shortest queue, cold-starting ones included.
pub fn route_request(state: &ClusterState, function_id: &str, cfg: &SimConfig) -> RouteDecision {
    let idx = state
        .containers
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.released && c.function_id.as_str() == function_id)
        .map(|(i, _)| i)
        .collect::<Vec<_>>();
    choose_route(&state.containers, idx.into_iter(), cfg)
}

/// Grows containers on `node` in place while requests are waiting: each
/// round adds one base unit to the container with the largest running plus
/// waiting count whose demand exceeds its capacity (ties: lowest id), until
/// no such container remains or the node cannot fit another unit.
///
/// Returns the index of the grown container for every unit added.
pub fn autoscale(
    state: &mut ClusterState,
    node: usize,
    cluster: &ClusterSpec,
    cfg: &SimConfig,
) -> Vec<usize> {
    autoscale_by(state, node, cluster, cfg, |c| c.demand())
}

/// [`autoscale`] with a caller-supplied demand per container.
pub fn autoscale_by(
    state: &mut ClusterState,
    node: usize,
    cluster: &ClusterSpec,
    cfg: &SimConfig,
    demand: impl Fn(&Container) -> u32,
) -> Vec<usize> {
    let spec = &cluster.nodes[node];
    let mut grown = Vec::new();
    loop {
        let occ = state.nodes[node];
        let pick = state
            .containers
            .iter()
            .enumerate()
            .filter(|(_, c)| {
                c.node == node
                    && !c.released
                    && c.state != ContainerState::ShuttingDown
                    && demand(c) > c.capacity(cfg)
            })
            .min_by_key(|(_, c)| (Reverse(demand(c)), c.id))
            .map(|(i, _)| i);
        let Some(i) = pick else { break };
        let c = &state.containers[i];
        if occ.cores_used + c.base_cores > spec.total_cores
            || occ.dram_used + c.base_dram > spec.total_dram
        {
            break;
        }
        let (bc, bd) = (c.base_cores, c.base_dram);
        state.containers[i].units += 1;
        let occ = &mut state.nodes[node];
        occ.cores_used += bc;
        occ.dram_used += bd;
        grown.push(i);
    }
    grown
}

/// `V / N` for one id, `None` when it had no requests.
pub fn violation_rate(metrics: &EpochMetrics, function_id: &str) -> Option<f64> {
    let total = metrics.totals.get(function_id).copied().unwrap_or(0);
    if total == 0 {
        return None;
    }
    let v = metrics.violations.get(function_id).copied().unwrap_or(0);
    Some(v as f64 / total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    Completion { request: usize },
    ColdStartDone { container: usize },
    ShutdownDone { container: usize },
    Deadline { request: usize },
    Arrival { request: usize },
}

impl EventKind {
    fn rank(&self) -> u8 {
        match self {
            EventKind::Completion { .. } => 0,
            EventKind::ColdStartDone { .. } => 1,
            EventKind::ShutdownDone { .. } => 2,
            EventKind::Deadline { .. } => 3,
            EventKind::Arrival { .. } => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Event {
    time: OrderedFloat<f64>,
    rank: u8,
    seq: u64,
    kind: EventKind,
}

#[derive(Debug, Default)]
struct Totals {
    carbon: f64,
    cost: f64,
    water: f64,
    energy: f64,
    load_integral: f64,
}

struct Engine<'a> {
    cluster: &'a ClusterSpec,
    env: &'a EnvironmentSeries,
    cfg: &'a SimConfig,
    state: ClusterState,
    /// Absolute time of the epoch start; engine times are relative to it.
    t0: f64,
    requests: Vec<Request>,
    exec_time: Vec<f64>,
    queued_on: Vec<Option<usize>>,
    by_fn: HashMap<FunctionId, Vec<usize>>,
    by_node: Vec<Vec<usize>>,
    ready: Vec<Option<f64>>,
    events: BinaryHeap<Reverse<Event>>,
    seq: u64,
    now: f64,
    last_t: f64,
    node_power_cores: Vec<f64>,
    node_load_cores: Vec<f64>,
    /// Cores the node would draw with every live container idle.
    node_idle_cores: Vec<f64>,
    dirty: Vec<bool>,
    totals: Totals,
    trace: Vec<PowerSample>,
    audit: SimAudit,
    peak: Vec<u32>,
}

impl<'a> Engine<'a> {
    fn schedule(&mut self, time: f64, kind: EventKind) {
        if self.cfg.audit && time < self.now {
            self.audit.causality_violations += 1;
            self.audit
                .first_problem
                .get_or_insert_with(|| format!("{kind:?} scheduled at {time} < {}", self.now));
        }
        self.seq += 1;
        self.events.push(Reverse(Event {
            time: OrderedFloat(time),
            rank: kind.rank(),
            seq: self.seq,
            kind,
        }));
    }

    fn register(&mut self, i: usize) {
        let c = &self.state.containers[i];
        if c.state != ContainerState::ShuttingDown {
            self.by_fn.entry(c.function_id.clone()).or_default().push(i);
        }
        self.by_node[c.node].push(i);
    }

    fn refresh(&mut self, node: usize) {
        let mut power = 0.0;
        let mut load = 0.0;
        let mut idle = 0.0;
        for &i in &self.by_node[node] {
            let c = &self.state.containers[i];
            if c.released {
                continue;
            }
            let eff = c.power_cores(self.cfg);
            power += eff;
            if c.state != ContainerState::ShuttingDown {
                load += eff;
                idle += c.cores() as f64 * self.cfg.idle_util;
            }
        }
        let total = self.cluster.nodes[node].total_cores as f64;
        self.node_power_cores[node] = power.min(total);
        self.node_load_cores[node] = load.min(total);
        self.node_idle_cores[node] = idle.min(power).min(total);
        self.dirty[node] = false;
    }

    fn integrate(&mut self, to: f64) -> Result<(), SimError> {
        let window = self.cluster.epoch_length;
        if self.last_t < window && to > window {
            self.integrate_span(window)?;
        }
        self.integrate_span(to)
    }

    /// Inside the window the whole cluster is charged. Past it the next
    /// epoch already pays for the idle cluster, so the drain only adds the
    /// cores drawn above the all-idle level.
    fn integrate_span(&mut self, to: f64) -> Result<(), SimError> {
        if to <= self.last_t {
            return Ok(());
        }
        for n in 0..self.dirty.len() {
            if self.dirty[n] {
                self.refresh(n);
            }
        }
        let drain = self.last_t >= self.cluster.epoch_length;
        let mut p_it = 0.0;
        if !drain {
            p_it += self.cluster.storage_power + self.cluster.network_power;
        }
        for (n, spec) in self.cluster.nodes.iter().enumerate() {
            let u = self.node_power_cores[n];
            if drain {
                // priced from zero so idle containers never change it
                let extra = (u - self.node_idle_cores[n]).max(0.0);
                p_it += node_power(spec, extra)? - node_power(spec, 0.0)?;
            } else {
                p_it += node_power(spec, u)?;
            }
        }
        let p_it = p_it.max(0.0);
        let load_cores: f64 = if drain { 0.0 } else { self.node_load_cores.iter().sum() };
        for (hour, start, dt) in split_hours(self.t0 + self.last_t, self.t0 + to) {
            let p_cool = cooling_power(p_it, hour, self.env)?;
            self.totals.carbon += interval_carbon(p_it, p_cool, hour, self.env, dt)?;
            let cost = interval_cost(p_it, p_cool, hour, self.env, dt)?;
            self.totals.cost += cost.money;
            self.totals.water += cost.water_carbon;
            self.totals.energy += (p_it + p_cool) * (dt / 3600.0) / 1000.0;
            self.totals.load_integral += load_cores * dt;
            if self.cfg.record_power {
                self.trace.push(PowerSample {
                    timestamp: start,
                    dt,
                    p_it,
                    p_cooling: p_cool,
                });
            }
        }
        self.last_t = to;
        Ok(())
    }

    fn touch(&mut self, i: usize) {
        let c = &self.state.containers[i];
        self.dirty[c.node] = true;
        let used = self.state.nodes[c.node].cores_used;
        let peak = &mut self.peak[c.node];
        *peak = (*peak).max(used);
    }

    fn set_state(&mut self, i: usize, state: ContainerState) {
        let c = &mut self.state.containers[i];
        if c.state != state {
            c.state = state;
            c.state_entered_at = self.t0 + self.now;
        }
        self.touch(i);
    }

    /// Starts request `r` on container `i`, or drops it when it can no
    /// longer meet its deadline. Returns whether it started.
    fn start(&mut self, r: usize, i: usize) -> bool {
        let exec = self.exec_time[r];
        let req = &mut self.requests[r];
        let cold = match self.ready[i] {
            Some(ready) if ready > req.arrival => ready.min(self.now) - req.arrival,
            _ => 0.0,
        };
        let wait = ((self.now - req.arrival) - cold).max(0.0);
        let finish = req.arrival + wait + cold + exec;
        if finish > req.deadline {
            req.status = RequestStatus::Violated;
            return false;
        }
        req.wait = wait;
        req.cold_start = cold;
        req.finish = Some(finish);
        req.status = RequestStatus::Running;
        self.queued_on[r] = Some(i);
        self.state.containers[i].active_requests += 1;
        self.set_state(i, ContainerState::Busy);
        self.schedule(finish, EventKind::Completion { request: r });
        true
    }

    fn dispatch(&mut self, i: usize) {
        loop {
            let c = &self.state.containers[i];
            if !c.is_live() || c.active_requests >= c.capacity(self.cfg) {
                break;
            }
            let Some(&(_, r)) = c.queue.iter().next() else { break };
            self.state.containers[i].queue.remove(&(OrderedFloat(self.requests[r].deadline), r));
            self.queued_on[r] = None;
            self.start(r, i);
        }
        let c = &self.state.containers[i];
        if c.is_live() && c.active_requests == 0 {
            self.set_state(i, ContainerState::Idle);
        }
        self.release_surplus(i);
    }

    /// Running requests plus queued ones that can still finish in time if
    /// started once the container is ready.
    fn viable_demand(&self, i: usize) -> u32 {
        let c = &self.state.containers[i];
        if c.released || c.state == ContainerState::ShuttingDown {
            return c.demand();
        }
        let start = self.ready[i].map_or(self.now, |t| t.max(self.now));
        let queued = c
            .queue
            .iter()
            .filter(|&&(deadline, r)| start + self.exec_time[r] <= deadline.0)
            .count() as u32;
        c.active_requests + queued
    }

    /// Shrinks an autoscaled container back toward its planned size once
    /// nothing waits on it.
    fn release_surplus(&mut self, i: usize) {
        let cfg = self.cfg;
        let c = &mut self.state.containers[i];
        if !c.is_live() || !c.queue.is_empty() || c.units <= c.planned_units {
            return;
        }
        let needed = c.active_requests.div_ceil(cfg.concurrency_per_unit);
        let target = needed.max(c.planned_units);
        if target >= c.units {
            return;
        }
        let freed = c.units - target;
        c.units = target;
        let (bc, bd, node) = (c.base_cores, c.base_dram, c.node);
        let occ = &mut self.state.nodes[node];
        occ.cores_used -= freed * bc;
        occ.dram_used -= freed * bd;
        self.touch(i);
    }

    fn arrival(&mut self, r: usize) {
        let id = self.requests[r].function_id.clone();
        let decision = match self.by_fn.get(&id) {
            Some(list) => choose_route(&self.state.containers, list.iter().copied(), self.cfg),
            None => RouteDecision::NoContainer,
        };
        let deadline = self.requests[r].deadline;
        match decision {
            RouteDecision::Start(i) => {
                self.start(r, i);
            }
            RouteDecision::Enqueue(i) => {
                self.state.containers[i].queue.insert((OrderedFloat(deadline), r));
                self.queued_on[r] = Some(i);
                self.schedule(deadline, EventKind::Deadline { request: r });
                let node = self.state.containers[i].node;
                let viable: HashMap<u64, u32> = self.by_node[node]
                    .iter()
                    .map(|&j| (self.state.containers[j].id, self.viable_demand(j)))
                    .collect();
                let grown = autoscale_by(&mut self.state, node, self.cluster, self.cfg, |c| {
                    viable.get(&c.id).copied().unwrap_or(0)
                });
                let mut seen = Vec::new();
                for g in grown {
                    self.touch(g);
                    if !seen.contains(&g) {
                        seen.push(g);
                    }
                }
                for g in seen {
                    self.dispatch(g);
                }
            }
            RouteDecision::NoContainer => {
                self.schedule(deadline, EventKind::Deadline { request: r });
            }
        }
    }

    fn handle(&mut self, kind: EventKind) {
        match kind {
            EventKind::Arrival { request } => self.arrival(request),
            EventKind::Completion { request } => {
                self.requests[request].status = RequestStatus::Completed;
                let i = self.queued_on[request].take().expect("running request has a container");
                self.state.containers[i].active_requests -= 1;
                self.touch(i);
                self.dispatch(i);
            }
            EventKind::ColdStartDone { container } => {
                let c = &mut self.state.containers[container];
                c.transition_at = None;
                self.set_state(container, ContainerState::Idle);
                self.dispatch(container);
            }
            EventKind::ShutdownDone { container } => {
                let c = &mut self.state.containers[container];
                c.released = true;
                c.transition_at = None;
                let (node, cores, dram) = (c.node, c.cores(), c.dram());
                let occ = &mut self.state.nodes[node];
                occ.cores_used -= cores;
                occ.dram_used -= dram;
                self.dirty[node] = true;
            }
            EventKind::Deadline { request } => {
                if self.requests[request].status != RequestStatus::Pending {
                    return;
                }
                if let Some(i) = self.queued_on[request].take() {
                    let key = (OrderedFloat(self.requests[request].deadline), request);
                    self.state.containers[i].queue.remove(&key);
                }
                self.requests[request].status = RequestStatus::Violated;
            }
        }
    }

    fn check(&mut self) {
        if let Err(problem) = self.state.check_resources(self.cluster) {
            self.audit.resource_violations += 1;
            self.audit.first_problem.get_or_insert(problem);
        }
    }
}

/// Simulates one epoch starting at `state.clock`: applies `plan`, processes
/// `arrivals` (seconds from epoch start, sorted), then keeps going past the
/// end of the epoch until every request has completed or expired. Power is
/// integrated over the whole simulated span.
pub fn simulate_epoch(
    state: ClusterState,
    plan: &Plan,
    arrivals: &[Request],
    cluster: &ClusterSpec,
    env: &EnvironmentSeries,
    profiles: &ProfileSet,
    cfg: &SimConfig,
) -> Result<SimOutcome, SimError> {
    cfg.validate()?;
    if let Some(i) = arrivals
        .windows(2)
        .position(|w| w[1].arrival < w[0].arrival)
    {
        return Err(SimError::UnsortedArrivals(i + 1));
    }
    let mut exec_time = Vec::with_capacity(arrivals.len());
    for r in arrivals {
        let p = profiles
            .get(&r.function_id)
            .ok_or_else(|| SimError::UnknownFunction(r.function_id.clone()))?;
        exec_time.push(p.avg_exec_time);
    }

    let (state, transition) = apply_plan(state, plan, cluster, profiles)?;
    let t0 = state.clock;
    let n_nodes = cluster.nodes.len();
    let mut requests: Vec<Request> = arrivals.to_vec();
    for (i, r) in requests.iter_mut().enumerate() {
        r.id = i;
        r.status = RequestStatus::Pending;
        r.wait = 0.0;
        r.cold_start = 0.0;
        r.finish = None;
    }
    let mut engine = Engine {
        cluster,
        env,
        cfg,
        t0,
        exec_time,
        queued_on: vec![None; requests.len()],
        requests,
        by_fn: HashMap::new(),
        by_node: vec![Vec::new(); n_nodes],
        ready: vec![None; state.containers.len()],
        events: BinaryHeap::new(),
        seq: 0,
        now: 0.0,
        last_t: 0.0,
        node_power_cores: vec![0.0; n_nodes],
        node_load_cores: vec![0.0; n_nodes],
        node_idle_cores: vec![0.0; n_nodes],
        dirty: vec![true; n_nodes],
        totals: Totals::default(),
        trace: Vec::new(),
        audit: SimAudit::default(),
        peak: state.nodes.iter().map(|o| o.cores_used).collect(),
        state,
    };

    for i in 0..engine.state.containers.len() {
        let c = &engine.state.containers[i];
        if c.released {
            continue;
        }
        let at = c.transition_at.map(|t| (t - t0).max(0.0));
        match (c.state, at) {
            (ContainerState::ColdStarting, Some(at)) => {
                engine.ready[i] = Some(at);
                engine.schedule(at, EventKind::ColdStartDone { container: i });
            }
            (ContainerState::ShuttingDown, Some(at)) => {
                engine.schedule(at, EventKind::ShutdownDone { container: i });
            }
            _ => {}
        }
        engine.register(i);
    }
    for (r, req) in arrivals.iter().enumerate() {
        engine.schedule(req.arrival, EventKind::Arrival { request: r });
    }
    if cfg.audit {
        engine.check();
    }

    while let Some(Reverse(ev)) = engine.events.pop() {
        let t = ev.time.into_inner();
        if cfg.audit {
            engine.audit.events += 1;
            if t < engine.now {
                engine.audit.causality_violations += 1;
                engine
                    .audit
                    .first_problem
                    .get_or_insert_with(|| format!("event at {t} after clock {}", engine.now));
            }
        }
        engine.integrate(t)?;
        engine.now = engine.now.max(t);
        engine.handle(ev.kind);
        if cfg.audit {
            engine.check();
        }
    }
    let window = cluster.epoch_length;
    let end = engine.now.max(window);
    engine.integrate(end)?;

    let mut metrics = EpochMetrics {
        carbon: engine.totals.carbon,
        cost: engine.totals.cost,
        water_carbon: engine.totals.water,
        energy_kwh: engine.totals.energy,
        span: end,
        drain: end - window,
        cold_starts: transition.cold_starts,
        shutdowns: transition.shutdowns,
        peak_node_cores: engine.peak.clone(),
        avg_load: engine.totals.load_integral / (window * cluster.total_cores() as f64),
        ..Default::default()
    };
    for r in &engine.requests {
        *metrics.totals.entry(r.function_id.clone()).or_default() += 1;
        match r.status {
            RequestStatus::Completed => {
                *metrics.completed.entry(r.function_id.clone()).or_default() += 1
            }
            _ => *metrics.violations.entry(r.function_id.clone()).or_default() += 1,
        }
    }
    for id in metrics.totals.keys() {
        if let Some(rate) = violation_rate(&metrics, id) {
            metrics.slo_rates.insert(id.clone(), rate);
        }
    }
    if !metrics.slo_rates.is_empty() {
        metrics.slo_average =
            metrics.slo_rates.values().sum::<f64>() / metrics.slo_rates.len() as f64;
    }

    let mut end_state = engine.state;
    end_state.containers.retain(|c| !c.released);
    for c in &mut end_state.containers {
        debug_assert!(c.queue.is_empty() && c.active_requests == 0);
        c.transition_at = None;
        if c.state != ContainerState::Idle {
            c.state = ContainerState::Idle;
            c.state_entered_at = t0 + end;
        }
    }
    end_state.clock = t0 + window;

    Ok(SimOutcome {
        metrics,
        end_state,
        requests: engine.requests,
        transition,
        power_trace: engine.trace,
        audit: engine.audit,
    })
}
