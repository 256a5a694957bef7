//! Experiment runner: config parsing, the epoch loop and output files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{
    exhaustive_oracle, random_plan, round_robin_plan, score_plan, OracleLimits, PolicyKind,
};
use crate::casa::{optimize_epoch, write_step_log, OptimizerContext, DEFAULT_BUDGET_S};
use crate::envmodel::{load_environment, ClusterSpec, EnvironmentSeries, PowerCoeffs};
use crate::simcore::{simulate_epoch, ClusterState, Plan, SimConfig};
use crate::workload::{
    epoch_forecast, load_function_profiles, load_trace, scale_intensity, synthesize_arrivals,
    ArrivalSchedule, BaseAllocation, EpochParams, ProfileSet,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config {path}: {message}")]
    Parse { path: String, message: String },
    #[error("config key `{key}`: {message}")]
    Key { key: String, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("epoch {epoch}: {message}")]
    Epoch { epoch: usize, message: String },
    #[error("{0}")]
    Input(String),
}

fn key_err(key: &str, message: impl Into<String>) -> HarnessError {
    HarnessError::Key {
        key: key.to_string(),
        message: message.into(),
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    pub trace: PathBuf,
    pub profiles: PathBuf,
    pub environment: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterConfig {
    pub nodes: usize,
    pub cores_per_node: u32,
    pub dram_per_node_mb: u32,
    /// Node power polynomial `[A, B, C, D, E]` in watts over busy cores.
    pub power_coeffs: [f64; 5],
    pub bandwidth_mb_s: f64,
    /// Hop count per node; a single value applies to every node.
    pub hops_per_node: Vec<u32>,
    pub storage_power_w: f64,
    pub network_power_w: f64,
    pub switch_delay_s: f64,
    pub shutdown_s: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            nodes: 4,
            cores_per_node: 128,
            dram_per_node_mb: 65536,
            power_coeffs: PowerCoeffs::QUARTIC_DEMO.0,
            bandwidth_mb_s: 125.0,
            hops_per_node: vec![1],
            storage_power_w: 100.0,
            network_power_w: 50.0,
            switch_delay_s: 0.05,
            shutdown_s: 15.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub policy: PolicyKind,
    pub seed: u64,
    pub intensity: f64,
    pub laxity: f64,
    pub cstr: f64,
    pub gen: usize,
    pub k: usize,
    pub epoch_length_s: f64,
    pub budget_s: f64,
    /// Epochs to run; defaults to the trace horizon.
    pub epochs: Option<usize>,
    pub base_cores: u32,
    pub base_dram_mb: u32,
    /// Write wall-clock decision times; when off they are reported as 0 so
    /// repeated runs produce identical files.
    pub record_decision_time: bool,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        let p = EpochParams::default();
        let base = BaseAllocation::default();
        ExperimentSection {
            policy: PolicyKind::Casa,
            seed: 0,
            intensity: 1.0,
            laxity: p.laxity,
            cstr: p.slo_constraint,
            gen: p.iteration_ceiling,
            k: p.local_search_limit,
            epoch_length_s: 900.0,
            budget_s: DEFAULT_BUDGET_S,
            epochs: None,
            base_cores: base.cores,
            base_dram_mb: base.dram_mb,
            record_decision_time: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub metrics: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    /// Directory for per-epoch optimizer step logs.
    pub step_logs: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub paths: PathsConfig,
    #[serde(default)]
    pub cluster: ClusterConfig,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub simulator: SimConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Command-line values that replace config keys.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub policy: Option<PolicyKind>,
    pub seed: Option<u64>,
    pub intensity: Option<f64>,
    pub laxity: Option<f64>,
    pub cstr: Option<f64>,
    pub nodes: Option<usize>,
    pub metrics: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn with_paths(trace: PathBuf, profiles: PathBuf, environment: PathBuf) -> Self {
        ExperimentConfig {
            paths: PathsConfig {
                trace,
                profiles,
                environment,
            },
            cluster: ClusterConfig::default(),
            experiment: ExperimentSection::default(),
            simulator: SimConfig::default(),
            output: OutputConfig::default(),
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        let e = &mut self.experiment;
        if let Some(v) = o.policy {
            e.policy = v;
        }
        if let Some(v) = o.seed {
            e.seed = v;
        }
        if let Some(v) = o.intensity {
            e.intensity = v;
        }
        if let Some(v) = o.laxity {
            e.laxity = v;
        }
        if let Some(v) = o.cstr {
            e.cstr = v;
        }
        if let Some(v) = o.nodes {
            self.cluster.nodes = v;
        }
        if let Some(v) = &o.metrics {
            self.output.metrics = Some(v.clone());
        }
        if let Some(v) = &o.summary {
            self.output.summary = Some(v.clone());
        }
    }

    pub fn epoch_params(&self) -> EpochParams {
        let e = &self.experiment;
        EpochParams {
            slo_constraint: e.cstr,
            laxity: e.laxity,
            iteration_ceiling: e.gen,
            local_search_limit: e.k,
        }
    }

    /// Range checks; each error names its key.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let e = &self.experiment;
        let c = &self.cluster;
        if !(e.cstr > 0.0 && e.cstr < 1.0) {
            return Err(key_err("experiment.cstr", format!("must lie in (0, 1), got {}", e.cstr)));
        }
        if !(e.laxity > 1.0) || !e.laxity.is_finite() {
            return Err(key_err("experiment.laxity", format!("must exceed 1, got {}", e.laxity)));
        }
        if e.k == 0 {
            return Err(key_err("experiment.k", "must be at least 1"));
        }
        if !(e.intensity > 0.0) || !e.intensity.is_finite() {
            return Err(key_err("experiment.intensity", format!("must be positive, got {}", e.intensity)));
        }
        if !(e.epoch_length_s > 0.0) || !e.epoch_length_s.is_finite() {
            return Err(key_err("experiment.epoch_length_s", "must be positive"));
        }
        if !(e.budget_s > 0.0) || !e.budget_s.is_finite() {
            return Err(key_err("experiment.budget_s", "must be positive"));
        }
        if e.base_cores == 0 {
            return Err(key_err("experiment.base_cores", "must be at least 1"));
        }
        if e.base_dram_mb == 0 {
            return Err(key_err("experiment.base_dram_mb", "must be at least 1"));
        }
        if c.nodes == 0 {
            return Err(key_err("cluster.nodes", "must be at least 1"));
        }
        if c.cores_per_node == 0 || c.dram_per_node_mb == 0 {
            return Err(key_err("cluster.cores_per_node", "node capacity must be positive"));
        }
        if !(c.bandwidth_mb_s > 0.0) {
            return Err(key_err("cluster.bandwidth_mb_s", "must be positive"));
        }
        if c.hops_per_node.len() != 1 && c.hops_per_node.len() != c.nodes {
            return Err(key_err(
                "cluster.hops_per_node",
                format!("needs 1 or {} entries, got {}", c.nodes, c.hops_per_node.len()),
            ));
        }
        for (key, v) in [
            ("cluster.storage_power_w", c.storage_power_w),
            ("cluster.network_power_w", c.network_power_w),
            ("cluster.switch_delay_s", c.switch_delay_s),
            ("cluster.shutdown_s", c.shutdown_s),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(key_err(key, format!("must be nonnegative, got {v}")));
            }
        }
        self.cluster_spec()
            .validate()
            .map_err(|err| key_err("cluster.power_coeffs", err.to_string()))?;
        self.simulator
            .validate()
            .map_err(|err| key_err("simulator", err.to_string()))?;
        for (key, p) in [
            ("paths.trace", &self.paths.trace),
            ("paths.profiles", &self.paths.profiles),
            ("paths.environment", &self.paths.environment),
        ] {
            if !p.is_file() {
                return Err(key_err(key, format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn cluster_spec(&self) -> ClusterSpec {
        let c = &self.cluster;
        let mut spec = ClusterSpec::homogeneous(
            c.nodes,
            c.cores_per_node,
            c.dram_per_node_mb,
            PowerCoeffs(c.power_coeffs),
            c.bandwidth_mb_s,
            &c.hops_per_node,
        );
        spec.storage_power = c.storage_power_w;
        spec.network_power = c.network_power_w;
        spec.switch_delay = c.switch_delay_s;
        spec.shutdown_duration = c.shutdown_s;
        spec.epoch_length = self.experiment.epoch_length_s;
        spec
    }
}

/// Parses a TOML config from text. Relative paths resolve against `base`.
pub fn parse_config_str(text: &str, base: &Path) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| HarnessError::Parse {
        path: base.display().to_string(),
        message: e.to_string(),
    })?;
    let o = &mut cfg.output;
    let outputs = [&mut o.metrics, &mut o.summary, &mut o.step_logs].into_iter().flatten();
    for p in [
        &mut cfg.paths.trace,
        &mut cfg.paths.profiles,
        &mut cfg.paths.environment,
    ]
    .into_iter()
    .chain(outputs)
    {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    Ok(cfg)
}

/// Reads and validates a config file.
pub fn parse_config(path: impl AsRef<Path>) -> Result<ExperimentConfig, HarnessError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let cfg = parse_config_str(&text, base).map_err(|e| match e {
        HarnessError::Parse { message, .. } => HarnessError::Parse {
            path: path.display().to_string(),
            message,
        },
        other => other,
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Loaded inputs of an experiment.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub profiles: ProfileSet,
    pub schedule: ArrivalSchedule,
    pub env: EnvironmentSeries,
}

pub fn load_inputs(cfg: &ExperimentConfig) -> Result<Inputs, HarnessError> {
    let base = BaseAllocation {
        cores: cfg.experiment.base_cores,
        dram_mb: cfg.experiment.base_dram_mb,
    };
    let profiles = load_function_profiles(&cfg.paths.profiles, base)
        .map_err(|e| io_err(&cfg.paths.profiles, e))?;
    let schedule = load_trace(&cfg.paths.trace, &profiles, None).map_err(|e| io_err(&cfg.paths.trace, e))?;
    let env = load_environment(&cfg.paths.environment).map_err(|e| io_err(&cfg.paths.environment, e))?;
    Ok(Inputs {
        profiles,
        schedule,
        env,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub epoch: usize,
    pub carbon_g: f64,
    pub cost: f64,
    pub water_carbon_g: f64,
    pub energy_kwh: f64,
    /// Empty when the epoch had no requests.
    pub slo_avg: Option<f64>,
    pub load_avg: f64,
    pub decision_s: f64,
    pub containers_end: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub policy: String,
    pub seed: u64,
    pub epochs: usize,
    pub ca_cum_g: f64,
    pub co_total: f64,
    pub water_carbon_g: f64,
    pub energy_kwh: f64,
    /// Mean of the defined per-epoch violation rates.
    pub sl_ave: f64,
    pub lo_mean: f64,
    pub decision_s: Vec<f64>,
    pub saturated_epochs: usize,
}

impl Summary {
    pub fn from_rows(rows: &[MetricsRow], policy: PolicyKind, seed: u64) -> Self {
        let defined: Vec<f64> = rows.iter().filter_map(|r| r.slo_avg).collect();
        let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
        let loads: Vec<f64> = rows.iter().map(|r| r.load_avg).collect();
        Summary {
            policy: policy.to_string(),
            seed,
            epochs: rows.len(),
            ca_cum_g: rows.iter().map(|r| r.carbon_g).sum(),
            co_total: rows.iter().map(|r| r.cost).sum(),
            water_carbon_g: rows.iter().map(|r| r.water_carbon_g).sum(),
            energy_kwh: rows.iter().map(|r| r.energy_kwh).sum(),
            sl_ave: mean(&defined),
            lo_mean: mean(&loads),
            decision_s: rows.iter().map(|r| r.decision_s).collect(),
            saturated_epochs: 0,
        }
    }
}

/// Per-epoch detail kept alongside the metrics rows.
#[derive(Debug, Clone)]
pub struct EpochRecord {
    pub plan: Plan,
    pub start_state: ClusterState,
    pub end_state: ClusterState,
    /// Wall-clock seconds the policy took, whether or not it is written.
    pub decision_time: f64,
    /// Best plan was no worse than the initial plan (CASA only).
    pub anytime_ok: Option<bool>,
    pub saturated: bool,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub rows: Vec<MetricsRow>,
    pub summary: Summary,
    pub epochs: Vec<EpochRecord>,
}

/// Seed for epoch `e`: drives both the sampled and the realized arrivals.
pub fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (epoch as u64).wrapping_add(1).wrapping_mul(0xD1B5_4A32_D192_ED03)
}

/// Runs every epoch with already loaded inputs. Writes no files.
pub fn run_with_inputs(cfg: &ExperimentConfig, inputs: &Inputs) -> Result<ExperimentReport, HarnessError> {
    let cluster = cfg.cluster_spec();
    let schedule = scale_intensity(&inputs.schedule, cfg.experiment.intensity)
        .map_err(|e| key_err("experiment.intensity", e.to_string()))?;
    let horizon = cfg.experiment.epochs.unwrap_or(schedule.horizon());
    let params = cfg.epoch_params();
    let policy = cfg.experiment.policy;
    let mut state = ClusterState::empty(&cluster);
    let mut rows = Vec::with_capacity(horizon);
    let mut epochs = Vec::with_capacity(horizon);
    let mut saturated_epochs = 0;

    for e in 0..horizon {
        let fail = |message: String| HarnessError::Epoch { epoch: e, message };
        let input = if e < schedule.horizon() {
            epoch_forecast(&schedule, e, params).map_err(|x| fail(x.to_string()))?
        } else {
            crate::workload::EpochInput::from_intensities(e, std::iter::empty(), params)
        };
        let seed = epoch_seed(cfg.experiment.seed, e);
        let ctx = OptimizerContext {
            epoch_input: input,
            prev_state: state.clone(),
            env: inputs.env.clone(),
            cluster: cluster.clone(),
            profiles: inputs.profiles.clone(),
            sim: cfg.simulator,
            seed,
            wall_clock_budget: cfg.experiment.budget_s,
        };
        let started = Instant::now();
        let mut anytime_ok = None;
        let mut saturated = false;
        let plan = match policy {
            PolicyKind::Casa => {
                let out = optimize_epoch(&ctx).map_err(|x| fail(x.to_string()))?;
                anytime_ok = Some(
                    crate::casa::feasibility_order(
                        &out.objectives,
                        &out.state.initial_objectives,
                        params.slo_constraint,
                    ) != std::cmp::Ordering::Greater,
                );
                if let Some(dir) = &cfg.output.step_logs {
                    fs::create_dir_all(dir).map_err(|x| io_err(dir, x))?;
                    write_step_log(dir.join(format!("steps_e{e:03}.csv")), &out.state.log)
                        .map_err(|x| fail(x.to_string()))?;
                }
                out.plan
            }
            PolicyKind::Score | PolicyKind::RoundRobin | PolicyKind::Random => {
                let b = match policy {
                    PolicyKind::Score => score_plan(&ctx),
                    PolicyKind::RoundRobin => round_robin_plan(&ctx),
                    _ => random_plan(&ctx, seed ^ 0xBA5E),
                }
                .map_err(|x| fail(x.to_string()))?;
                saturated = b.saturated;
                b.plan
            }
            PolicyKind::Oracle => {
                exhaustive_oracle(&ctx, &OracleLimits::default())
                    .map_err(|x| fail(x.to_string()))?
                    .plan
            }
        };
        let decision_time = started.elapsed().as_secs_f64();
        if saturated {
            saturated_epochs += 1;
        }
        let arrivals = synthesize_arrivals(&ctx.epoch_input, &inputs.profiles, cluster.epoch_length, seed)
            .map_err(|x| fail(x.to_string()))?;
        let out = simulate_epoch(
            state.clone(),
            &plan,
            &arrivals,
            &cluster,
            &inputs.env,
            &inputs.profiles,
            &cfg.simulator,
        )
        .map_err(|x| fail(x.to_string()))?;
        let m = &out.metrics;
        rows.push(MetricsRow {
            epoch: e,
            carbon_g: m.carbon,
            cost: m.cost,
            water_carbon_g: m.water_carbon,
            energy_kwh: m.energy_kwh,
            slo_avg: m.slo_defined().then_some(m.slo_average),
            load_avg: m.avg_load,
            decision_s: if cfg.experiment.record_decision_time { decision_time } else { 0.0 },
            containers_end: out.end_state.containers.len(),
        });
        epochs.push(EpochRecord {
            plan,
            start_state: std::mem::replace(&mut state, out.end_state.clone()),
            end_state: out.end_state,
            decision_time,
            anytime_ok,
            saturated,
        });
    }
    let mut summary = Summary::from_rows(&rows, policy, cfg.experiment.seed);
    summary.saturated_epochs = saturated_epochs;
    Ok(ExperimentReport { rows, summary, epochs })
}

/// Loads inputs, runs every epoch and writes the configured output files.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    cfg.validate()?;
    let inputs = load_inputs(cfg)?;
    let report = run_with_inputs(cfg, &inputs)?;
    write_metrics(
        &report.rows,
        &report.summary,
        cfg.output.metrics.as_deref(),
        cfg.output.summary.as_deref(),
    )?;
    Ok(report)
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(path, e))?;
    tmp.write_all(bytes).map_err(|e| io_err(path, e))?;
    tmp.as_file().sync_all().map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

pub fn metrics_csv(rows: &[MetricsRow]) -> Result<Vec<u8>, HarnessError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    let header = [
        "epoch",
        "carbon_g",
        "cost",
        "water_carbon_g",
        "energy_kwh",
        "slo_avg",
        "load_avg",
        "decision_s",
        "containers_end",
    ];
    let csv_err = |e: csv::Error| HarnessError::Input(e.to_string());
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| HarnessError::Input(e.to_string()))
}

/// Writes the metrics CSV and the JSON summary, each via write-then-rename.
pub fn write_metrics(
    rows: &[MetricsRow],
    summary: &Summary,
    metrics_path: Option<&Path>,
    summary_path: Option<&Path>,
) -> Result<(), HarnessError> {
    if let Some(p) = metrics_path {
        atomic_write(p, &metrics_csv(rows)?)?;
    }
    if let Some(p) = summary_path {
        let mut json = serde_json::to_vec_pretty(summary).map_err(|e| io_err(p, e))?;
        json.push(b'\n');
        atomic_write(p, &json)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    fn fixture(dir: &Path, trace: &str) -> PathBuf {
        write(dir, "profiles.csv", "function_id,avg_exec_s,image_mb\nf1,1.0,50\nf2,2.5,120\n");
        write(dir, "trace.csv", trace);
        let mut env = String::from("hour,ci_g_per_kwh,price_per_kwh,cooling_eff,water_factor\n");
        for h in 0..24 {
            env.push_str(&format!("{h},{},0.1,0.3,5\n", 300 + 10 * h));
        }
        write(dir, "env.csv", &env);
        write(
            dir,
            "exp.toml",
            "[paths]\ntrace = \"trace.csv\"\nprofiles = \"profiles.csv\"\nenvironment = \"env.csv\"\n\
             [cluster]\nnodes = 2\ncores_per_node = 16\n[experiment]\nbudget_s = 2.0\ngen = 20\n\
             record_decision_time = false\n",
        )
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let p = fixture(dir.path(), "epoch,function_id,invocations\n");
        let cfg = parse_config(&p).unwrap();
        assert_eq!(cfg.experiment.k, 5);
        assert_eq!(cfg.experiment.cstr, 0.05);
        assert_eq!(cfg.experiment.epoch_length_s, 900.0);
        let bare = write(
            dir.path(),
            "bare.toml",
            "[paths]\ntrace = \"trace.csv\"\nprofiles = \"profiles.csv\"\nenvironment = \"env.csv\"\n",
        );
        let cfg = parse_config(&bare).unwrap();
        assert_eq!(cfg.experiment.gen, 500);
        assert_eq!(cfg.experiment.budget_s, 180.0);
    }

    #[test]
    fn config_errors_name_the_key() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path(), "epoch,function_id,invocations\n");
        let paths = "[paths]\ntrace = \"trace.csv\"\nprofiles = \"profiles.csv\"\nenvironment = \"env.csv\"\n";
        let bad = write(dir.path(), "a.toml", &format!("{paths}[experiment]\ncstr = 1.5\n"));
        assert!(parse_config(&bad).unwrap_err().to_string().contains("experiment.cstr"));
        let bad = write(dir.path(), "b.toml", &format!("{paths}foo = 1\n"));
        assert!(parse_config(&bad).unwrap_err().to_string().contains("foo"));
        let bad = write(dir.path(), "c.toml", &format!("{paths}[cluster]\nnodes = \"four\"\n"));
        assert!(parse_config(&bad).unwrap_err().to_string().contains("nodes"));
        let bad = write(dir.path(), "d.toml", "[paths]\ntrace = \"trace.csv\"\n");
        assert!(parse_config(&bad).unwrap_err().to_string().contains("profiles"));
        let bad = write(dir.path(), "e.toml", &format!("{paths}[cluster]\nnodes = 3\nhops_per_node = [1, 2]\n"));
        assert!(parse_config(&bad).unwrap_err().to_string().contains("hops_per_node"));
    }

    #[test]
    fn empty_trace_gives_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = fixture(dir.path(), "epoch,function_id,invocations\n");
        let mut cfg = parse_config(&p).unwrap();
        cfg.output.metrics = Some(dir.path().join("m.csv"));
        cfg.output.summary = Some(dir.path().join("s.json"));
        let report = run_experiment(&cfg).unwrap();
        assert!(report.rows.is_empty());
        let text = fs::read_to_string(dir.path().join("m.csv")).unwrap();
        assert_eq!(
            text,
            "epoch,carbon_g,cost,water_carbon_g,energy_kwh,slo_avg,load_avg,decision_s,containers_end\n"
        );
        let s: Summary = serde_json::from_str(&fs::read_to_string(dir.path().join("s.json")).unwrap()).unwrap();
        assert_eq!((s.epochs, s.ca_cum_g, s.sl_ave), (0, 0.0, 0.0));
    }

    #[test]
    fn one_row_and_continuity() {
        let dir = tempfile::tempdir().unwrap();
        let p = fixture(dir.path(), "epoch,function_id,invocations\n0,f1,20\n0,f2,5\n1,f1,10\n");
        let mut cfg = parse_config(&p).unwrap();
        let report = run_with_inputs(&cfg, &load_inputs(&cfg).unwrap()).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert_eq!(report.epochs[1].start_state, report.epochs[0].end_state);
        assert_eq!(report.epochs[1].start_state.clock, 900.0);
        cfg.experiment.epochs = Some(1);
        let one = run_with_inputs(&cfg, &load_inputs(&cfg).unwrap()).unwrap();
        let text = String::from_utf8(metrics_csv(&one.rows).unwrap()).unwrap();
        assert_eq!(text.lines().count(), 2);
        let s = &report.summary;
        let col: f64 = report.rows.iter().map(|r| r.carbon_g).sum();
        approx::assert_relative_eq!(s.ca_cum_g, col, max_relative = 1e-9);
    }

    #[test]
    fn undefined_slo_is_blank() {
        let row = MetricsRow {
            epoch: 3,
            carbon_g: 1.5,
            cost: 0.25,
            water_carbon_g: 0.0,
            energy_kwh: 0.5,
            slo_avg: None,
            load_avg: 0.0,
            decision_s: 0.0,
            containers_end: 0,
        };
        let text = String::from_utf8(metrics_csv(&[row]).unwrap()).unwrap();
        assert_eq!(text.lines().nth(1), Some("3,1.5,0.25,0.0,0.5,,0.0,0.0,0"));
    }

    #[test]
    fn overrides_replace_keys() {
        let dir = tempfile::tempdir().unwrap();
        let p = fixture(dir.path(), "epoch,function_id,invocations\n");
        let mut cfg = parse_config(&p).unwrap();
        cfg.apply(&Overrides {
            policy: Some(PolicyKind::Score),
            nodes: Some(8),
            cstr: Some(0.1),
            ..Default::default()
        });
        assert_eq!(cfg.experiment.policy, PolicyKind::Score);
        assert_eq!(cfg.cluster_spec().nodes.len(), 8);
        assert_eq!(cfg.epoch_params().slo_constraint, 0.1);
    }
}
