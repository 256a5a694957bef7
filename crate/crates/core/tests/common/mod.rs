#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use carbon_faas::casa::OptimizerContext;
use carbon_faas::envmodel::{ClusterSpec, EnvironmentSeries, HourEnv, PowerCoeffs};
use carbon_faas::simcore::{simulate_epoch, ClusterState, Placement, Plan, SimConfig, TransitionLedger};
use carbon_faas::workload::{
    synthesize_arrivals, EpochInput, EpochParams, FunctionProfile, ProfileSet, Request,
    RequestStatus,
};
use carbon_faas::FunctionId;

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn flat_env(ci: f64) -> EnvironmentSeries {
    EnvironmentSeries::constant(HourEnv {
        carbon_intensity: ci,
        energy_price: 0.1,
        cooling_eff: 0.3,
        water_factor: 5.0,
    })
}

pub fn profile(id: &str, t: f64, image: f64) -> FunctionProfile {
    FunctionProfile {
        function_id: id.into(),
        avg_exec_time: t,
        image_size: image,
        base_cores: 2,
        base_dram: 150,
    }
}

/// 2 nodes x 8 cores, 3 ids with moderate load, empty previous state.
pub fn tiny_instance(seed: u64) -> OptimizerContext {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cluster = ClusterSpec::homogeneous(2, 8, 4096, PowerCoeffs::QUARTIC_DEMO, 125.0, &[1]);
    cluster.storage_power = 20.0;
    cluster.network_power = 10.0;
    cluster.switch_delay = 0.05;
    let mut profiles = ProfileSet::new();
    let mut intensities = Vec::new();
    for name in ["fa", "fb", "fc"] {
        let t = rng.random_range(0.5..4.0);
        let image = rng.random_range(20.0..200.0);
        profiles.insert(profile(name, t, image)).unwrap();
        let conc = rng.random_range(0.2..1.2);
        intensities.push((FunctionId::from(name), (conc * 900.0 / t).round() as u64));
    }
    let params = EpochParams {
        iteration_ceiling: 200,
        ..EpochParams::default()
    };
    OptimizerContext {
        epoch_input: EpochInput::from_intensities(0, intensities, params),
        prev_state: ClusterState::empty(&cluster),
        env: flat_env(400.0),
        cluster,
        profiles,
        sim: SimConfig::default(),
        seed: seed.wrapping_add(100),
        wall_clock_budget: 30.0,
    }
}

/// A randomized single-epoch simulator instance.
#[derive(Debug, Clone)]
pub struct SimInstance {
    pub cluster: ClusterSpec,
    pub profiles: ProfileSet,
    pub env: EnvironmentSeries,
    pub prev: ClusterState,
    pub plan: Plan,
    pub arrivals: Vec<Request>,
    pub cfg: SimConfig,
}

fn random_plan(
    rng: &mut ChaCha8Rng,
    state: &ClusterState,
    cluster: &ClusterSpec,
    profiles: &ProfileSet,
    ids: &[FunctionId],
    max_containers: usize,
) -> Plan {
    let mut ledger = TransitionLedger::new(state, cluster);
    let mut plan = Plan::new(0);
    for id in ids {
        let p = profiles.get(id).unwrap();
        ledger.set_base(id, p.base_cores, p.base_dram);
        for _ in 0..rng.random_range(0..=max_containers) {
            let pl = Placement {
                node: rng.random_range(0..cluster.nodes.len()),
                units: rng.random_range(1..=3),
            };
            if ledger.try_add(id, pl) {
                plan.push(id.clone(), pl);
            }
        }
    }
    plan
}

pub fn sim_instance(seed: u64) -> SimInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_nodes = rng.random_range(1..=3);
    let cores = [8, 16, 32][rng.random_range(0..3)];
    let coeffs = if rng.random_bool(0.5) {
        PowerCoeffs::LINEAR
    } else {
        PowerCoeffs::QUARTIC_DEMO
    };
    let mut cluster = ClusterSpec::homogeneous(n_nodes, cores, 4096, coeffs, rng.random_range(50.0..500.0), &[1, 2]);
    cluster.storage_power = 30.0;
    cluster.network_power = 20.0;
    cluster.switch_delay = rng.random_range(0.0..0.2);
    // start mid-day so hour boundaries fall inside some epochs
    let clock = 900.0 * rng.random_range(0..96) as f64;

    let n_ids = rng.random_range(1..=4);
    let ids: Vec<FunctionId> = (0..n_ids).map(|i| FunctionId::from(format!("f{i}"))).collect();
    let mut profiles = ProfileSet::new();
    for id in &ids {
        profiles
            .insert(profile(id, rng.random_range(0.1..20.0), rng.random_range(10.0..500.0)))
            .unwrap();
    }
    let mut prev = ClusterState::empty(&cluster);
    let prev_plan = random_plan(&mut rng, &prev, &cluster, &profiles, &ids, 2);
    prev = ClusterState::warm(&prev_plan, &cluster, &profiles).unwrap();
    prev.clock = clock;
    let plan = random_plan(&mut rng, &prev, &cluster, &profiles, &ids, 3);

    let params = EpochParams {
        laxity: rng.random_range(1.5..20.0),
        ..EpochParams::default()
    };
    let counts: Vec<(FunctionId, u64)> = ids.iter().map(|id| (id.clone(), rng.random_range(0..40))).collect();
    let input = EpochInput::from_intensities(0, counts, params);
    let arrivals = synthesize_arrivals(&input, &profiles, cluster.epoch_length, rng.random()).unwrap();
    let cfg = SimConfig {
        concurrency_per_unit: rng.random_range(1..=2),
        audit: true,
        ..SimConfig::default()
    };
    let hours = (0..24)
        .map(|_| HourEnv {
            carbon_intensity: rng.random_range(100.0..600.0),
            energy_price: rng.random_range(0.05..0.2),
            cooling_eff: rng.random_range(0.1..0.6),
            water_factor: rng.random_range(0.0..40.0),
        })
        .collect();
    SimInstance {
        cluster,
        profiles,
        env: EnvironmentSeries::new(hours).unwrap(),
        prev,
        plan,
        arrivals,
        cfg,
    }
}

/// Runs the instance and checks determinism, causality, resource safety,
/// request conservation and the finish-time identity.
pub fn check_sim_invariants(inst: &SimInstance) -> Result<(), String> {
    let run = || {
        simulate_epoch(
            inst.prev.clone(),
            &inst.plan,
            &inst.arrivals,
            &inst.cluster,
            &inst.env,
            &inst.profiles,
            &inst.cfg,
        )
        .map_err(|e| e.to_string())
    };
    let a = run()?;
    let b = run()?;
    if a.metrics != b.metrics || a.requests != b.requests || a.end_state != b.end_state {
        return Err("two runs differ".into());
    }
    if !a.audit.clean() {
        return Err(format!("audit: {:?}", a.audit));
    }
    a.end_state.check_resources(&inst.cluster)?;
    let m = &a.metrics;
    let mut expected: BTreeMap<FunctionId, u64> = BTreeMap::new();
    for r in &inst.arrivals {
        *expected.entry(r.function_id.clone()).or_default() += 1;
    }
    if m.totals != expected {
        return Err(format!("totals {:?} != arrivals {:?}", m.totals, expected));
    }
    for (id, &n) in &m.totals {
        let done = m.completed.get(id).copied().unwrap_or(0);
        let bad = m.violations.get(id).copied().unwrap_or(0);
        if done + bad != n {
            return Err(format!("{id}: {done} + {bad} != {n}"));
        }
    }
    for r in &a.requests {
        let t = inst.profiles.get(&r.function_id).unwrap().avg_exec_time;
        match r.status {
            RequestStatus::Completed => {
                let f = r.finish.ok_or("completed without finish")?;
                if f != r.arrival + r.wait + r.cold_start + t {
                    return Err(format!("request {}: finish {f} breaks the identity", r.id));
                }
                if f > r.deadline || r.wait < 0.0 || r.cold_start < 0.0 {
                    return Err(format!("request {}: bad timing {r:?}", r.id));
                }
            }
            RequestStatus::Violated => {}
            other => return Err(format!("request {} left in {other:?}", r.id)),
        }
    }
    if !(m.carbon.is_finite() && m.carbon > 0.0 && m.avg_load >= 0.0 && m.avg_load <= 1.0 + 1e-12) {
        return Err(format!("bad metrics {m:?}"));
    }
    Ok(())
}

/// Adds one container of an id without arrivals on a node that keeps room
/// for it at the plan's peak, and checks carbon does not drop. Returns
/// `Ok(false)` when no such node exists.
pub fn check_carbon_monotone(inst: &SimInstance) -> Result<bool, String> {
    let mut profiles = inst.profiles.clone();
    let idle: FunctionId = "idle-extra".into();
    profiles.insert(profile(&idle, 1.0, 100.0)).unwrap();
    let base = simulate_epoch(
        inst.prev.clone(),
        &inst.plan,
        &inst.arrivals,
        &inst.cluster,
        &inst.env,
        &profiles,
        &inst.cfg,
    )
    .map_err(|e| e.to_string())?;
    let peak = &base.metrics.peak_node_cores;
    let Some(node) = (0..inst.cluster.nodes.len())
        .find(|&n| peak[n] + 2 <= inst.cluster.nodes[n].total_cores)
    else {
        return Ok(false);
    };
    let mut plan = inst.plan.clone();
    plan.push(idle, Placement { node, units: 1 });
    if TransitionLedger::for_plan(&inst.prev, &plan, &inst.cluster, &profiles).is_err() {
        return Ok(false);
    }
    let more = simulate_epoch(
        inst.prev.clone(),
        &plan,
        &inst.arrivals,
        &inst.cluster,
        &inst.env,
        &profiles,
        &inst.cfg,
    )
    .map_err(|e| e.to_string())?;
    if more.metrics.carbon + 1e-9 * base.metrics.carbon < base.metrics.carbon {
        return Err(format!(
            "adding an idle container lowered carbon: {} -> {}",
            base.metrics.carbon, more.metrics.carbon
        ));
    }
    Ok(true)
}
