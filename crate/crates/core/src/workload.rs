//! Function profiles, invocation traces, per-epoch forecasts and request
//! synthesis.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::FunctionId;

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("expected header `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("line {line}: duplicate function id `{id}`")]
    DuplicateId { line: u64, id: String },
    #[error("line {line}: unknown function id `{id}`")]
    UnknownId { line: u64, id: String },
    #[error("unknown function id `{0}`")]
    MissingProfile(FunctionId),
    #[error("line {line}: field `{field}` must be positive, got {value}")]
    NonPositive {
        line: u64,
        field: &'static str,
        value: f64,
    },
    #[error("line {line}: negative invocation count {value}")]
    NegativeCount { line: u64, value: i64 },
    #[error("line {line}: epoch {epoch} outside horizon {horizon}")]
    EpochOutOfHorizon { line: u64, epoch: usize, horizon: usize },
    #[error("scale factor must be positive, got {0}")]
    InvalidFactor(f64),
    #[error("epoch {epoch} out of range (horizon {horizon})")]
    EpochOutOfRange { epoch: usize, horizon: usize },
    #[error("invalid epoch parameter `{name}`: {message}")]
    InvalidParam { name: &'static str, message: String },
}

/// Per-container base allocation, shared by every function id.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseAllocation {
    pub cores: u32,
    pub dram_mb: u32,
}

impl Default for BaseAllocation {
    fn default() -> Self {
        BaseAllocation {
            cores: 2,
            dram_mb: 150,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionProfile {
    pub function_id: FunctionId,
    /// Mean execution time in seconds.
    pub avg_exec_time: f64,
    /// Container image footprint in megabytes, fetched on every cold start.
    pub image_size: f64,
    pub base_cores: u32,
    pub base_dram: u32,
}

/// Profiles keyed by function id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProfileSet {
    profiles: BTreeMap<FunctionId, FunctionProfile>,
}

impl ProfileSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a profile, rejecting duplicate ids and non-positive fields.
    pub fn insert(&mut self, profile: FunctionProfile) -> Result<(), WorkloadError> {
        validate_profile(&profile, 0)?;
        if self.profiles.contains_key(&profile.function_id) {
            return Err(WorkloadError::DuplicateId {
                line: 0,
                id: profile.function_id.to_string(),
            });
        }
        self.profiles.insert(profile.function_id.clone(), profile);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&FunctionProfile> {
        self.profiles.get(id)
    }

    pub fn require(&self, id: &FunctionId) -> Result<&FunctionProfile, WorkloadError> {
        self.profiles
            .get(id)
            .ok_or_else(|| WorkloadError::MissingProfile(id.clone()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.profiles.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &FunctionProfile> {
        self.profiles.values()
    }

    /// Looks up the canonical (interned) id for a string.
    pub fn id(&self, id: &str) -> Option<&FunctionId> {
        self.profiles.get_key_value(id).map(|(k, _)| k)
    }
}

fn validate_profile(p: &FunctionProfile, line: u64) -> Result<(), WorkloadError> {
    for (field, value) in [
        ("avg_exec_s", p.avg_exec_time),
        ("image_mb", p.image_size),
        ("base_cores", p.base_cores as f64),
        ("base_dram", p.base_dram as f64),
    ] {
        if !(value > 0.0) || !value.is_finite() {
            return Err(WorkloadError::NonPositive { line, field, value });
        }
    }
    Ok(())
}

const PROFILE_HEADER: [&str; 3] = ["function_id", "avg_exec_s", "image_mb"];
const TRACE_HEADER: [&str; 3] = ["epoch", "function_id", "invocations"];

fn open(path: &Path) -> Result<std::fs::File, WorkloadError> {
    std::fs::File::open(path).map_err(|source| WorkloadError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn check_header<R: Read>(
    reader: &mut csv::Reader<R>,
    expected: &[&str],
) -> Result<(), WorkloadError> {
    let headers = reader.headers().map_err(|e| WorkloadError::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    let found: Vec<&str> = headers.iter().map(str::trim).collect();
    if found != expected {
        return Err(WorkloadError::Header {
            expected: expected.join(","),
            found: found.join(","),
        });
    }
    Ok(())
}

fn parse_field<T: std::str::FromStr>(
    record: &csv::StringRecord,
    idx: usize,
    line: u64,
    name: &str,
) -> Result<T, WorkloadError> {
    let raw = record.get(idx).unwrap_or("").trim();
    raw.parse().map_err(|_| WorkloadError::Parse {
        line,
        message: format!("cannot parse `{name}` from `{raw}`"),
    })
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

/// Reads a `function_id,avg_exec_s,image_mb` CSV.
pub fn load_function_profiles(
    path: impl AsRef<Path>,
    base: BaseAllocation,
) -> Result<ProfileSet, WorkloadError> {
    parse_function_profiles(open(path.as_ref())?, base)
}

pub fn parse_function_profiles<R: Read>(
    input: R,
    base: BaseAllocation,
) -> Result<ProfileSet, WorkloadError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    check_header(&mut reader, &PROFILE_HEADER)?;
    let mut set = ProfileSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| WorkloadError::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record_line(&record);
        let id = record.get(0).unwrap_or("").trim();
        if id.is_empty() {
            return Err(WorkloadError::Parse {
                line,
                message: "empty function_id".into(),
            });
        }
        let profile = FunctionProfile {
            function_id: FunctionId::new(id),
            avg_exec_time: parse_field(&record, 1, line, "avg_exec_s")?,
            image_size: parse_field(&record, 2, line, "image_mb")?,
            base_cores: base.cores,
            base_dram: base.dram_mb,
        };
        validate_profile(&profile, line)?;
        if set.contains(id) {
            return Err(WorkloadError::DuplicateId {
                line,
                id: id.to_string(),
            });
        }
        set.profiles.insert(profile.function_id.clone(), profile);
    }
    Ok(set)
}

/// Invocation counts per epoch and function id. Missing entries mean zero.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ArrivalSchedule {
    entries: Vec<BTreeMap<FunctionId, u64>>,
}

impl ArrivalSchedule {
    pub fn new(horizon: usize) -> Self {
        ArrivalSchedule {
            entries: vec![BTreeMap::new(); horizon],
        }
    }

    pub fn horizon(&self) -> usize {
        self.entries.len()
    }

    pub fn count(&self, epoch: usize, id: &str) -> u64 {
        self.entries
            .get(epoch)
            .and_then(|m| m.get(id))
            .copied()
            .unwrap_or(0)
    }

    /// Sets a count; the horizon grows to cover `epoch`.
    pub fn set(&mut self, epoch: usize, id: FunctionId, count: u64) {
        if epoch >= self.entries.len() {
            self.entries.resize(epoch + 1, BTreeMap::new());
        }
        if count == 0 {
            self.entries[epoch].remove(&id);
        } else {
            self.entries[epoch].insert(id, count);
        }
    }

    pub fn epoch(&self, epoch: usize) -> Option<&BTreeMap<FunctionId, u64>> {
        self.entries.get(epoch)
    }

    pub fn epoch_total(&self, epoch: usize) -> u64 {
        self.entries.get(epoch).map(|m| m.values().sum()).unwrap_or(0)
    }
}

/// Reads an `epoch,function_id,invocations` CSV. With `horizon = None` the
/// horizon is one past the largest epoch present.
pub fn load_trace(
    path: impl AsRef<Path>,
    profiles: &ProfileSet,
    horizon: Option<usize>,
) -> Result<ArrivalSchedule, WorkloadError> {
    parse_trace(open(path.as_ref())?, profiles, horizon)
}

pub fn parse_trace<R: Read>(
    input: R,
    profiles: &ProfileSet,
    horizon: Option<usize>,
) -> Result<ArrivalSchedule, WorkloadError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    check_header(&mut reader, &TRACE_HEADER)?;
    let mut schedule = ArrivalSchedule::new(horizon.unwrap_or(0));
    for record in reader.records() {
        let record = record.map_err(|e| WorkloadError::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record_line(&record);
        let epoch: usize = parse_field(&record, 0, line, "epoch")?;
        let id = record.get(1).unwrap_or("").trim();
        let count: i64 = parse_field(&record, 2, line, "invocations")?;
        if count < 0 {
            return Err(WorkloadError::NegativeCount { line, value: count });
        }
        let Some(fid) = profiles.id(id) else {
            return Err(WorkloadError::UnknownId {
                line,
                id: id.to_string(),
            });
        };
        if let Some(h) = horizon {
            if epoch >= h {
                return Err(WorkloadError::EpochOutOfHorizon {
                    line,
                    epoch,
                    horizon: h,
                });
            }
        }
        let total = schedule.count(epoch, id) + count as u64;
        schedule.set(epoch, fid.clone(), total);
    }
    Ok(schedule)
}

/// Multiplies every count by `factor`, rounding half-up.
pub fn scale_intensity(
    schedule: &ArrivalSchedule,
    factor: f64,
) -> Result<ArrivalSchedule, WorkloadError> {
    if !(factor > 0.0) || !factor.is_finite() {
        return Err(WorkloadError::InvalidFactor(factor));
    }
    let entries = schedule
        .entries
        .iter()
        .map(|epoch| {
            epoch
                .iter()
                .map(|(id, &count)| (id.clone(), (count as f64 * factor + 0.5).floor() as u64))
                .filter(|&(_, c)| c > 0)
                .collect()
        })
        .collect();
    Ok(ArrivalSchedule { entries })
}

/// Knobs copied into every [`EpochInput`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochParams {
    /// SLO violation rate constraint (Cstr).
    pub slo_constraint: f64,
    pub laxity: f64,
    /// Iteration ceiling for the optimizer (gen).
    pub iteration_ceiling: usize,
    /// Consecutive failed searches before an id is blacklisted (K).
    pub local_search_limit: usize,
}

impl Default for EpochParams {
    fn default() -> Self {
        EpochParams {
            slo_constraint: 0.05,
            laxity: 10.0,
            iteration_ceiling: 500,
            local_search_limit: 5,
        }
    }
}

impl EpochParams {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        if !(self.slo_constraint > 0.0 && self.slo_constraint < 1.0) {
            return Err(WorkloadError::InvalidParam {
                name: "cstr",
                message: format!("must lie in (0, 1), got {}", self.slo_constraint),
            });
        }
        if !(self.laxity > 1.0) || !self.laxity.is_finite() {
            return Err(WorkloadError::InvalidParam {
                name: "laxity",
                message: format!("must exceed 1, got {}", self.laxity),
            });
        }
        if self.local_search_limit == 0 {
            return Err(WorkloadError::InvalidParam {
                name: "k",
                message: "must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// Forecast handed to a policy at the start of an epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochInput {
    pub epoch_index: usize,
    /// Active ids, sorted lexicographically.
    pub function_ids: Vec<FunctionId>,
    pub intensities: BTreeMap<FunctionId, u64>,
    pub params: EpochParams,
}

impl EpochInput {
    pub fn from_intensities(
        epoch_index: usize,
        intensities: impl IntoIterator<Item = (FunctionId, u64)>,
        params: EpochParams,
    ) -> Self {
        let intensities: BTreeMap<_, _> =
            intensities.into_iter().filter(|&(_, c)| c > 0).collect();
        EpochInput {
            epoch_index,
            function_ids: intensities.keys().cloned().collect(),
            intensities,
            params,
        }
    }

    pub fn intensity(&self, id: &str) -> u64 {
        self.intensities.get(id).copied().unwrap_or(0)
    }

    pub fn total_requests(&self) -> u64 {
        self.intensities.values().sum()
    }

    pub fn id_set(&self) -> BTreeSet<FunctionId> {
        self.function_ids.iter().cloned().collect()
    }
}

pub fn epoch_forecast(
    schedule: &ArrivalSchedule,
    epoch: usize,
    params: EpochParams,
) -> Result<EpochInput, WorkloadError> {
    params.validate()?;
    let counts = schedule
        .epoch(epoch)
        .ok_or(WorkloadError::EpochOutOfRange {
            epoch,
            horizon: schedule.horizon(),
        })?;
    Ok(EpochInput::from_intensities(
        epoch,
        counts.iter().map(|(k, &v)| (k.clone(), v)),
        params,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestStatus {
    Pending,
    Running,
    Completed,
    Violated,
}

/// One invocation. Times are seconds from the start of its epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: usize,
    pub function_id: FunctionId,
    pub arrival: f64,
    pub deadline: f64,
    pub wait: f64,
    pub cold_start: f64,
    pub finish: Option<f64>,
    pub status: RequestStatus,
}

impl Request {
    pub fn new(id: usize, function_id: FunctionId, arrival: f64) -> Self {
        Request {
            id,
            function_id,
            arrival,
            deadline: arrival,
            wait: 0.0,
            cold_start: 0.0,
            finish: None,
            status: RequestStatus::Pending,
        }
    }

    /// Deadline laxity implied by this request's window.
    pub fn laxity(&self, profile: &FunctionProfile) -> f64 {
        (self.deadline - self.arrival) / profile.avg_exec_time
    }
}

pub fn assign_deadline(mut request: Request, profile: &FunctionProfile, laxity: f64) -> Request {
    request.deadline = request.arrival + laxity * profile.avg_exec_time;
    request
}

/// Draws `R_e(f)` uniform arrivals in `[0, epoch_length)` per id, sorted by
/// arrival time. Ties keep id order. Fully determined by `seed`.
pub fn synthesize_arrivals(
    input: &EpochInput,
    profiles: &ProfileSet,
    epoch_length: f64,
    seed: u64,
) -> Result<Vec<Request>, WorkloadError> {
    if !(epoch_length > 0.0) {
        return Err(WorkloadError::InvalidParam {
            name: "epoch_length",
            message: format!("must be positive, got {epoch_length}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(input.total_requests() as usize);
    for id in &input.function_ids {
        let profile = profiles.require(id)?;
        let id = profiles.id(id).cloned().unwrap_or_else(|| id.clone());
        for _ in 0..input.intensity(&id) {
            let arrival = rng.random_range(0.0..epoch_length);
            let request = Request::new(0, id.clone(), arrival);
            out.push(assign_deadline(request, profile, input.params.laxity));
        }
    }
    out.sort_by(|a, b| a.arrival.total_cmp(&b.arrival));
    for (i, r) in out.iter_mut().enumerate() {
        r.id = i;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profiles(rows: &str) -> Result<ProfileSet, WorkloadError> {
        let text = format!("function_id,avg_exec_s,image_mb\n{rows}");
        parse_function_profiles(text.as_bytes(), BaseAllocation::default())
    }

    fn profile(id: &str, t: f64) -> FunctionProfile {
        FunctionProfile {
            function_id: id.into(),
            avg_exec_time: t,
            image_size: 100.0,
            base_cores: 2,
            base_dram: 150,
        }
    }

    #[test]
    fn single_profile_row() {
        let set = profiles("f1,3.0,125\n").unwrap();
        assert_eq!(set.len(), 1);
        let p = set.get("f1").unwrap();
        assert_eq!(p.avg_exec_time, 3.0);
        assert_eq!(p.image_size, 125.0);
        assert_eq!((p.base_cores, p.base_dram), (2, 150));
    }

    #[test]
    fn duplicate_profile_rejected() {
        let err = profiles("f1,3.0,125\nf1,2.0,100\n").unwrap_err();
        assert!(matches!(err, WorkloadError::DuplicateId { line: 3, .. }), "{err}");
    }

    #[test]
    fn bad_profile_rows() {
        assert!(matches!(
            profiles("f1,0,125\n").unwrap_err(),
            WorkloadError::NonPositive { field: "avg_exec_s", .. }
        ));
        assert!(matches!(
            profiles("f1,1,-3\n").unwrap_err(),
            WorkloadError::NonPositive { field: "image_mb", .. }
        ));
        match profiles("f1,1,1\nf2,abc,1\n").unwrap_err() {
            WorkloadError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("{other}"),
        }
        let err = parse_function_profiles("id,t,m\n".as_bytes(), BaseAllocation::default());
        assert!(matches!(err, Err(WorkloadError::Header { .. })));
    }

    #[test]
    fn many_profiles() {
        let rows: String = (0..424).map(|i| format!("fn{i:03},{}.5,{}\n", i % 7 + 1, 50 + i)).collect();
        assert_eq!(profiles(&rows).unwrap().len(), 424);
    }

    fn trace(rows: &str, set: &ProfileSet, horizon: Option<usize>) -> Result<ArrivalSchedule, WorkloadError> {
        let text = format!("epoch,function_id,invocations\n{rows}");
        parse_trace(text.as_bytes(), set, horizon)
    }

    #[test]
    fn trace_loading() {
        let set = profiles("f1,1,1\nf2,1,1\n").unwrap();
        let s = trace("0,f1,10\n", &set, None).unwrap();
        assert_eq!(s.count(0, "f1"), 10);
        assert_eq!(s.count(0, "f2"), 0);

        let empty = trace("", &set, Some(4)).unwrap();
        assert_eq!(empty.horizon(), 4);
        assert!((0..4).all(|e| empty.epoch_total(e) == 0));

        let spiky = trace("0,f1,1\n1,f1,13\n", &set, None).unwrap();
        assert_eq!(spiky.epoch_total(1), 13 * spiky.epoch_total(0));

        assert!(matches!(
            trace("0,f9,1\n", &set, None),
            Err(WorkloadError::UnknownId { .. })
        ));
        assert!(matches!(
            trace("0,f1,-1\n", &set, None),
            Err(WorkloadError::NegativeCount { .. })
        ));
        assert!(matches!(
            trace("5,f1,1\n", &set, Some(2)),
            Err(WorkloadError::EpochOutOfHorizon { .. })
        ));
    }

    #[test]
    fn scaling() {
        let mut s = ArrivalSchedule::new(1);
        s.set(0, "a".into(), 10);
        s.set(0, "b".into(), 3);
        let x20 = scale_intensity(&s, 20.0).unwrap();
        assert_eq!(x20.count(0, "a"), 200);
        assert_eq!(scale_intensity(&s, 1.0).unwrap(), s);
        assert_eq!(scale_intensity(&s, 0.5).unwrap().count(0, "b"), 2);
        assert!(scale_intensity(&s, 0.0).is_err());
        assert!(scale_intensity(&s, -1.0).is_err());
    }

    #[test]
    fn forecast() {
        let mut s = ArrivalSchedule::new(3);
        s.set(2, "f1".into(), 5);
        s.set(2, "f2".into(), 0);
        let p = EpochParams::default();
        let input = epoch_forecast(&s, 2, p).unwrap();
        assert_eq!(input.function_ids, vec![FunctionId::from("f1")]);
        assert_eq!(input.intensity("f1"), 5);
        assert_eq!(input.params, p);
        assert!(epoch_forecast(&s, 0, p).unwrap().function_ids.is_empty());
        assert!(matches!(
            epoch_forecast(&s, 3, p),
            Err(WorkloadError::EpochOutOfRange { .. })
        ));

        let mut wide = ArrivalSchedule::new(1);
        for i in 0..62 {
            wide.set(0, format!("id{i:02}").into(), 1 + i as u64);
        }
        let input = epoch_forecast(&wide, 0, p).unwrap();
        assert_eq!(input.function_ids.len(), 62);
        assert!(input.function_ids.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn forecast_param_ranges() {
        let s = ArrivalSchedule::new(1);
        for bad in [
            EpochParams { slo_constraint: 1.5, ..Default::default() },
            EpochParams { slo_constraint: 0.0, ..Default::default() },
            EpochParams { laxity: 1.0, ..Default::default() },
        ] {
            assert!(epoch_forecast(&s, 0, bad).is_err());
        }
    }

    #[test]
    fn deadlines() {
        let p = profile("f", 3.0);
        let r = assign_deadline(Request::new(0, "f".into(), 0.0), &p, 10.0);
        assert_eq!(r.deadline, 30.0);
        let r = assign_deadline(Request::new(0, "f".into(), 100.0), &profile("f", 1.0), 1.0);
        assert_eq!(r.deadline, 101.0);
        let r = assign_deadline(Request::new(0, "f".into(), 5.0), &profile("f", 2.5), 12.0);
        assert_eq!(r.deadline, 35.0);
        assert_eq!(r.laxity(&profile("f", 2.5)), 12.0);
    }

    fn input(counts: &[(&str, u64)]) -> EpochInput {
        EpochInput::from_intensities(
            0,
            counts.iter().map(|&(k, v)| (FunctionId::from(k), v)),
            EpochParams::default(),
        )
    }

    #[test]
    fn arrivals_empty_and_deterministic() {
        let set = profiles("f1,2,10\n").unwrap();
        assert!(synthesize_arrivals(&input(&[]), &set, 900.0, 1).unwrap().is_empty());
        let a = synthesize_arrivals(&input(&[("f1", 100)]), &set, 900.0, 7).unwrap();
        let b = synthesize_arrivals(&input(&[("f1", 100)]), &set, 900.0, 7).unwrap();
        assert_eq!(a.len(), 100);
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0].arrival <= w[1].arrival));
        assert!(a.iter().all(|r| (0.0..900.0).contains(&r.arrival)));
        assert!(a.iter().all(|r| r.deadline == r.arrival + 10.0 * 2.0));
    }

    #[test]
    fn arrivals_uniform_mean() {
        let set = profiles("f1,2,10\n").unwrap();
        let a = synthesize_arrivals(&input(&[("f1", 10_000)]), &set, 900.0, 99).unwrap();
        let mean = a.iter().map(|r| r.arrival).sum::<f64>() / a.len() as f64;
        assert!((mean - 450.0).abs() <= 0.03 * 450.0, "mean {mean}");
    }

    #[test]
    fn arrivals_unknown_profile() {
        let set = profiles("f1,2,10\n").unwrap();
        assert!(synthesize_arrivals(&input(&[("zz", 1)]), &set, 900.0, 1).is_err());
        assert!(synthesize_arrivals(&input(&[]), &set, 0.0, 1).is_err());
    }
}
