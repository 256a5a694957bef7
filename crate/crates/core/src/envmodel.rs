//! Physical models of the cluster: node power, IT and cooling power,
//! carbon, monetary cost, water-related carbon and cold-start latency.
//!
//! Energy terms are integrated piecewise. Callers split every interval at
//! hour boundaries (see [`split_hours`]) because carbon intensity, price,
//! cooling efficiency and water factor are hourly series.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const HOURS_PER_DAY: usize = 24;
pub const SECONDS_PER_HOUR: f64 = 3600.0;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("environment series must have exactly 24 hourly rows (0..=23): {0}")]
    Hours(String),
    #[error("hour {0} out of range 0..=23")]
    HourOutOfRange(usize),
    #[error("core usage {usage} outside [0, {total}] on node {node}")]
    UsageOutOfRange { node: usize, usage: f64, total: u32 },
    #[error("node {node}: power model is {problem} at {cores} cores")]
    BadPowerModel {
        node: usize,
        cores: u32,
        problem: &'static str,
    },
    #[error("invalid cluster spec: {0}")]
    Cluster(String),
    #[error("expected {expected} usages, got {got}")]
    UsageCount { expected: usize, got: usize },
    #[error("interval [{start}, {start}+{dt}) crosses an hour boundary")]
    CrossesHour { start: f64, dt: f64 },
    #[error("interval length must be positive, got {0}")]
    BadInterval(f64),
}

/// Quartic node power model `A u^4 + B u^3 + C u^2 + D u + E` (watts).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerCoeffs(pub [f64; 5]);

impl PowerCoeffs {
    /// Synthetic linear preset: 120 W idle, 1.5 W per busy core.
    pub const LINEAR: PowerCoeffs = PowerCoeffs([0.0, 0.0, 0.0, 1.5, 120.0]);

    /// Synthetic concave quartic preset for 128-core nodes: power rises
    /// steeply over the first cores and flattens towards full load
    /// (90 W idle, about 343 W at 128 cores). Not a measured fit.
    pub const QUARTIC_DEMO: PowerCoeffs = PowerCoeffs([-2.0e-7, 1.0e-4, -0.03, 4.6, 90.0]);

    pub fn eval(&self, u: f64) -> f64 {
        let [a, b, c, d, e] = self.0;
        (((a * u + b) * u + c) * u + d) * u + e
    }

    pub fn idle(&self) -> f64 {
        self.0[4]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub node_id: usize,
    pub total_cores: u32,
    pub total_dram: u32,
    pub power_coeffs: PowerCoeffs,
    /// Image fetch bandwidth from persistent storage, MB/s.
    pub bandwidth: f64,
    /// Switch hops between this node and persistent storage.
    pub hop_count: u32,
}

impl NodeSpec {
    /// Rejects coefficient sets whose power is negative or decreasing at any
    /// whole-core usage in `[0, total_cores]`.
    pub fn validate(&self) -> Result<(), EnvError> {
        if self.total_cores == 0 || self.total_dram == 0 {
            return Err(EnvError::Cluster(format!(
                "node {} needs positive cores and DRAM",
                self.node_id
            )));
        }
        if !(self.bandwidth > 0.0) {
            return Err(EnvError::Cluster(format!(
                "node {} needs positive bandwidth",
                self.node_id
            )));
        }
        let mut prev = f64::NEG_INFINITY;
        for cores in 0..=self.total_cores {
            let p = self.power_coeffs.eval(cores as f64);
            let problem = if !p.is_finite() || p < 0.0 {
                "negative"
            } else if p < prev {
                "decreasing"
            } else {
                prev = p;
                continue;
            };
            return Err(EnvError::BadPowerModel {
                node: self.node_id,
                cores,
                problem,
            });
        }
        Ok(())
    }
}

/// Power of one node at `usage` busy cores.
pub fn node_power(spec: &NodeSpec, usage: f64) -> Result<f64, EnvError> {
    if !(0.0..=spec.total_cores as f64).contains(&usage) {
        return Err(EnvError::UsageOutOfRange {
            node: spec.node_id,
            usage,
            total: spec.total_cores,
        });
    }
    Ok(spec.power_coeffs.eval(usage).max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub nodes: Vec<NodeSpec>,
    pub storage_power: f64,
    pub network_power: f64,
    /// Per-hop switch delay, seconds.
    pub switch_delay: f64,
    pub epoch_length: f64,
    pub shutdown_duration: f64,
}

impl ClusterSpec {
    /// `n` identical nodes with the given power model.
    pub fn homogeneous(
        n: usize,
        cores: u32,
        dram_mb: u32,
        coeffs: PowerCoeffs,
        bandwidth: f64,
        hops: &[u32],
    ) -> Self {
        let nodes = (0..n)
            .map(|i| NodeSpec {
                node_id: i,
                total_cores: cores,
                total_dram: dram_mb,
                power_coeffs: coeffs,
                bandwidth,
                hop_count: if hops.is_empty() { 0 } else { hops[i % hops.len()] },
            })
            .collect();
        ClusterSpec {
            nodes,
            storage_power: 0.0,
            network_power: 0.0,
            switch_delay: 0.0,
            epoch_length: 900.0,
            shutdown_duration: 15.0,
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if self.nodes.is_empty() {
            return Err(EnvError::Cluster("at least one node is required".into()));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if node.node_id != i {
                return Err(EnvError::Cluster(format!(
                    "node at position {i} has id {}",
                    node.node_id
                )));
            }
            node.validate()?;
        }
        for (name, v) in [
            ("storage_power", self.storage_power),
            ("network_power", self.network_power),
            ("switch_delay", self.switch_delay),
            ("shutdown_duration", self.shutdown_duration),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(EnvError::Cluster(format!("{name} must be nonnegative")));
            }
        }
        if !(self.epoch_length > 0.0) {
            return Err(EnvError::Cluster("epoch_length must be positive".into()));
        }
        Ok(())
    }

    pub fn total_cores(&self) -> u64 {
        self.nodes.iter().map(|n| n.total_cores as u64).sum()
    }

    /// Storage plus network overhead plus every node's idle term.
    pub fn idle_it_power(&self) -> f64 {
        self.storage_power
            + self.network_power
            + self.nodes.iter().map(|n| n.power_coeffs.eval(0.0).max(0.0)).sum::<f64>()
    }
}

/// Total IT power for the given per-node core usages.
pub fn it_power(cluster: &ClusterSpec, usages: &[f64]) -> Result<f64, EnvError> {
    if usages.len() != cluster.nodes.len() {
        return Err(EnvError::UsageCount {
            expected: cluster.nodes.len(),
            got: usages.len(),
        });
    }
    let mut total = cluster.storage_power + cluster.network_power;
    for (node, &u) in cluster.nodes.iter().zip(usages) {
        total += node_power(node, u)?;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HourEnv {
    /// gCO2 per kWh.
    pub carbon_intensity: f64,
    /// Currency per kWh.
    pub energy_price: f64,
    pub cooling_eff: f64,
    /// gCO2 per kWh of cooling energy.
    pub water_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSeries {
    hours: Vec<HourEnv>,
}

impl EnvironmentSeries {
    pub fn new(hours: Vec<HourEnv>) -> Result<Self, EnvError> {
        if hours.len() != HOURS_PER_DAY {
            return Err(EnvError::Hours(format!("got {} rows", hours.len())));
        }
        for (h, e) in hours.iter().enumerate() {
            let fields = [e.carbon_intensity, e.energy_price, e.cooling_eff, e.water_factor];
            if fields.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(EnvError::Hours(format!("hour {h} has a negative or non-finite value")));
            }
        }
        Ok(EnvironmentSeries { hours })
    }

    /// Same values for every hour.
    pub fn constant(hour: HourEnv) -> Self {
        EnvironmentSeries {
            hours: vec![hour; HOURS_PER_DAY],
        }
    }

    pub fn hour(&self, h: usize) -> Result<&HourEnv, EnvError> {
        self.hours.get(h).ok_or(EnvError::HourOutOfRange(h))
    }

    pub fn hours(&self) -> &[HourEnv] {
        &self.hours
    }

    /// Returns a copy with every carbon intensity multiplied by `factor`.
    pub fn scale_carbon(&self, factor: f64) -> Self {
        let hours = self
            .hours
            .iter()
            .map(|h| HourEnv {
                carbon_intensity: h.carbon_intensity * factor,
                ..*h
            })
            .collect();
        EnvironmentSeries { hours }
    }
}

const ENV_HEADER: [&str; 5] = ["hour", "ci_g_per_kwh", "price_per_kwh", "cooling_eff", "water_factor"];

pub fn load_environment(path: impl AsRef<Path>) -> Result<EnvironmentSeries, EnvError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| EnvError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_environment(file)
}

pub fn parse_environment<R: Read>(input: R) -> Result<EnvironmentSeries, EnvError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers().map_err(|e| EnvError::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    if headers.iter().collect::<Vec<_>>() != ENV_HEADER {
        return Err(EnvError::Parse {
            line: 1,
            message: format!("expected header `{}`", ENV_HEADER.join(",")),
        });
    }
    let mut slots: Vec<Option<HourEnv>> = vec![None; HOURS_PER_DAY];
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| EnvError::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        rows += 1;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let num = |i: usize| -> Result<f64, EnvError> {
            let raw = record.get(i).unwrap_or("");
            raw.parse().map_err(|_| EnvError::Parse {
                line,
                message: format!("cannot parse `{}` from `{raw}`", ENV_HEADER[i]),
            })
        };
        let hour: usize = record.get(0).unwrap_or("").parse().map_err(|_| EnvError::Parse {
            line,
            message: "cannot parse `hour`".into(),
        })?;
        if hour >= HOURS_PER_DAY {
            return Err(EnvError::HourOutOfRange(hour));
        }
        if slots[hour].is_some() {
            return Err(EnvError::Hours(format!("hour {hour} appears twice")));
        }
        slots[hour] = Some(HourEnv {
            carbon_intensity: num(1)?,
            energy_price: num(2)?,
            cooling_eff: num(3)?,
            water_factor: num(4)?,
        });
    }
    if rows != HOURS_PER_DAY {
        return Err(EnvError::Hours(format!("got {rows} rows")));
    }
    EnvironmentSeries::new(slots.into_iter().map(|s| s.expect("all hours present")).collect())
}

pub fn cooling_power(p_it: f64, hour: usize, env: &EnvironmentSeries) -> Result<f64, EnvError> {
    Ok(env.hour(hour)?.cooling_eff * p_it)
}

fn kwh(watts: f64, dt: f64) -> f64 {
    watts * (dt / SECONDS_PER_HOUR) / 1000.0
}

fn check_dt(dt: f64) -> Result<(), EnvError> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(EnvError::BadInterval(dt));
    }
    if dt > SECONDS_PER_HOUR {
        return Err(EnvError::CrossesHour { start: 0.0, dt });
    }
    Ok(())
}

/// Carbon in grams emitted over `dt` seconds inside hour `hour`.
pub fn interval_carbon(
    p_it: f64,
    p_cooling: f64,
    hour: usize,
    env: &EnvironmentSeries,
    dt: f64,
) -> Result<f64, EnvError> {
    check_dt(dt)?;
    Ok(env.hour(hour)?.carbon_intensity * kwh(p_it + p_cooling, dt))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct IntervalCost {
    pub money: f64,
    /// Water-related carbon in grams, attributed to the cooling energy.
    pub water_carbon: f64,
}

pub fn interval_cost(
    p_it: f64,
    p_cooling: f64,
    hour: usize,
    env: &EnvironmentSeries,
    dt: f64,
) -> Result<IntervalCost, EnvError> {
    check_dt(dt)?;
    let h = env.hour(hour)?;
    Ok(IntervalCost {
        money: h.energy_price * kwh(p_it + p_cooling, dt),
        water_carbon: h.water_factor * kwh(p_cooling, dt),
    })
}

/// Hour of day for an absolute time in seconds.
pub fn hour_of(t: f64) -> usize {
    ((t / SECONDS_PER_HOUR).floor() as i64).rem_euclid(HOURS_PER_DAY as i64) as usize
}

/// Validates that `[start, start + dt)` stays inside one hour and returns it.
pub fn hour_slice(start: f64, dt: f64) -> Result<usize, EnvError> {
    if !(dt > 0.0) {
        return Err(EnvError::BadInterval(dt));
    }
    let boundary = ((start / SECONDS_PER_HOUR).floor() + 1.0) * SECONDS_PER_HOUR;
    if start + dt > boundary {
        return Err(EnvError::CrossesHour { start, dt });
    }
    Ok(hour_of(start))
}

/// Splits `[start, end)` into `(hour, slice_start, dt)` pieces at hour
/// boundaries.
pub fn split_hours(start: f64, end: f64) -> impl Iterator<Item = (usize, f64, f64)> {
    let mut t = start;
    std::iter::from_fn(move || {
        if t >= end {
            return None;
        }
        let boundary = ((t / SECONDS_PER_HOUR).floor() + 1.0) * SECONDS_PER_HOUR;
        let stop = boundary.min(end);
        let piece = (hour_of(t), t, stop - t);
        t = stop;
        Some(piece)
    })
}

/// Power drawn over an interval, as recorded by the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerSample {
    pub timestamp: f64,
    pub dt: f64,
    pub p_it: f64,
    pub p_cooling: f64,
}

/// Cold-start latency for `queued_image_mb` of images sharing the node link.
pub fn cold_start_latency(spec: &NodeSpec, queued_image_mb: f64, switch_delay: f64) -> f64 {
    queued_image_mb / spec.bandwidth + spec.hop_count as f64 * switch_delay
}
