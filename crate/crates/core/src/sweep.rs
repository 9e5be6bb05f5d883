//! Multi-snapshot benchmark sweeps over energy, device count or blocklength.
//!
//! Every (axis value, snapshot) cell draws a fresh random drop and runs each
//! requested algorithm on it. The drop seed depends only on the snapshot
//! index, so all axis values and all algorithms see the same device
//! positions and weights (common random numbers), and the first `K` devices
//! of a `K + 1` device drop coincide with the `K` device drop.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocator::{
    AlgorithmRegistry, AllocationResult, AllocationStatus, Conventional, OptimizeOptions,
};
use crate::error::{domain, Error, Result};
use crate::receiver::{ReceiverKind, ZF_MAX_DEVICES};
use crate::rng::derive_seed;
use crate::scenario::{Scenario, ScenarioTemplate, DEFAULT_CELL_RADIUS_M};

pub const DESK_SNAPSHOTS: usize = 20;
pub const PAPER_SNAPSHOTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Energy,
    DeviceCount,
    Blocklength,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 3] = [SweepAxis::Energy, SweepAxis::DeviceCount, SweepAxis::Blocklength];

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Energy => "energy",
            SweepAxis::DeviceCount => "device_count",
            SweepAxis::Blocklength => "blocklength",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "energy" => Ok(SweepAxis::Energy),
            "device_count" | "devices" | "k" => Ok(SweepAxis::DeviceCount),
            "blocklength" | "l" => Ok(SweepAxis::Blocklength),
            _ => Err(Error::Unknown { kind: "sweep axis", name: s.to_string() }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub snapshots: usize,
    pub base_seed: u64,
    pub receiver: ReceiverKind,
    /// Device count when the axis is not `device_count`.
    pub devices: usize,
    pub cell_radius_m: f64,
    /// Everything else held fixed; the swept field is overwritten per cell.
    pub template: ScenarioTemplate,
}

impl SweepSpec {
    /// Default setup for this axis and receiver:
    /// energy sweeps use `R = 1` (MRC) / `R = 4` (ZF); device-count sweeps
    /// `R = 1, E = 2` (MRC) / `R = 2, E = 1` (ZF); blocklength sweeps
    /// `R = 2` (MRC) / `R = 4` (ZF) at `E = 2`.
    pub fn preset(axis: SweepAxis, receiver: ReceiverKind) -> Self {
        let mut template = ScenarioTemplate::default();
        let zf = receiver == ReceiverKind::Zf;
        let values = match axis {
            SweepAxis::Energy => {
                template.rate_req = if zf { 4.0 } else { 1.0 };
                vec![0.25, 0.5, 1.0, 2.0, 4.0]
            }
            SweepAxis::DeviceCount => {
                template.rate_req = if zf { 2.0 } else { 1.0 };
                template.energy = if zf { 1.0 } else { 2.0 };
                vec![2.0, 4.0, 6.0, 8.0, 10.0, 12.0]
            }
            SweepAxis::Blocklength => {
                template.rate_req = if zf { 4.0 } else { 2.0 };
                vec![50.0, 100.0, 150.0, 200.0]
            }
        };
        Self {
            axis,
            values,
            snapshots: DESK_SNAPSHOTS,
            base_seed: 0,
            receiver,
            devices: 10,
            cell_radius_m: DEFAULT_CELL_RADIUS_M,
            template,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(domain("sweep needs at least one axis value"));
        }
        if self.snapshots == 0 {
            return Err(domain("sweep needs at least one snapshot"));
        }
        for &v in &self.values {
            if !(v.is_finite() && v > 0.0) {
                return Err(domain(format!("{} value {v} must be positive", self.axis)));
            }
            if matches!(self.axis, SweepAxis::DeviceCount | SweepAxis::Blocklength) && v.fract() != 0.0 {
                return Err(domain(format!("{} value {v} must be an integer", self.axis)));
            }
            if self.axis == SweepAxis::DeviceCount && self.receiver == ReceiverKind::Zf && v as usize > ZF_MAX_DEVICES {
                return Err(Error::Capacity(format!(
                    "zf sweeps support at most {ZF_MAX_DEVICES} devices, got {v}"
                )));
            }
        }
        // Building one scenario per value surfaces schema errors up front
        // (e.g. a blocklength not exceeding the pilot length).
        for &v in &self.values {
            self.scenario(v, 0)?;
        }
        Ok(())
    }

    pub fn scenario(&self, value: f64, snapshot: usize) -> Result<Scenario> {
        let mut template = self.template.clone();
        let mut devices = self.devices;
        match self.axis {
            SweepAxis::Energy => template.energy = value,
            SweepAxis::DeviceCount => devices = value as usize,
            SweepAxis::Blocklength => template.blocklength = value as usize,
        }
        let seed = derive_seed(self.base_seed, snapshot as u64);
        template.generate(seed, devices, self.cell_radius_m)
    }
}

/// Outcome of one algorithm on one drop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub value: f64,
    pub algorithm: String,
    pub snapshot: usize,
    /// `None` when the algorithm returned an error; the row then scores zero.
    pub status: Option<AllocationStatus>,
    pub weighted_sum: f64,
    pub shannon_sum: f64,
    /// Devices whose target is not met, hence scored zero (all of them when
    /// the snapshot is infeasible or failed).
    pub infeasible_count: usize,
    pub devices: usize,
}

impl SweepRow {
    /// True when the algorithm produced an allocation at all.
    pub fn allocated(&self) -> bool {
        matches!(self.status, Some(AllocationStatus::Converged | AllocationStatus::MaxIter))
    }

    fn from_result(axis: SweepAxis, value: f64, snapshot: usize, res: &AllocationResult) -> Self {
        Self {
            axis,
            value,
            algorithm: res.algorithm.clone(),
            snapshot,
            status: Some(res.status),
            weighted_sum: res.weighted_sum,
            shannon_sum: res.shannon_sum,
            infeasible_count: res.violation_count(),
            devices: res.violations.len(),
        }
    }
}

/// Per (axis value, algorithm) aggregate over snapshots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub axis: SweepAxis,
    pub value: f64,
    pub algorithm: String,
    pub snapshots: usize,
    pub mean_weighted_sum: f64,
    pub stderr_weighted_sum: f64,
    pub mean_shannon_sum: f64,
    /// Snapshots without an allocation (infeasible or failed).
    pub unallocated: usize,
    pub failed: usize,
    /// Devices below target among snapshots that produced an allocation,
    /// divided by the devices in those snapshots.
    pub violation_rate: f64,
    /// Devices scored zero over all devices, unallocated snapshots included.
    pub zeroed_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub algorithms: Vec<String>,
    pub rows: Vec<SweepRow>,
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

impl SweepResult {
    pub fn rows_for<'a>(&'a self, value: f64, algorithm: &'a str) -> impl Iterator<Item = &'a SweepRow> + 'a {
        self.rows.iter().filter(move |r| r.value == value && r.algorithm == algorithm)
    }

    pub fn summary(&self) -> Vec<SweepSummary> {
        let mut out = Vec::new();
        for &value in &self.spec.values {
            for alg in &self.algorithms {
                let rows: Vec<&SweepRow> = self.rows_for(value, alg).collect();
                let ws: Vec<f64> = rows.iter().map(|r| r.weighted_sum).collect();
                let sh: Vec<f64> = rows.iter().map(|r| r.shannon_sum).collect();
                let (mean, stderr) = mean_stderr(&ws);
                let allocated: Vec<&&SweepRow> = rows.iter().filter(|r| r.allocated()).collect();
                let alloc_devices: usize = allocated.iter().map(|r| r.devices).sum();
                let alloc_viol: usize = allocated.iter().map(|r| r.infeasible_count).sum();
                let all_devices: usize = rows.iter().map(|r| r.devices).sum();
                let all_zeroed: usize = rows.iter().map(|r| r.infeasible_count).sum();
                let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
                out.push(SweepSummary {
                    axis: self.spec.axis,
                    value,
                    algorithm: alg.clone(),
                    snapshots: rows.len(),
                    mean_weighted_sum: mean,
                    stderr_weighted_sum: stderr,
                    mean_shannon_sum: mean_stderr(&sh).0,
                    unallocated: rows.len() - allocated.len(),
                    failed: rows.iter().filter(|r| r.status.is_none()).count(),
                    violation_rate: ratio(alloc_viol, alloc_devices),
                    zeroed_rate: ratio(all_zeroed, all_devices),
                });
            }
        }
        out
    }

    pub fn find(&self, value: f64, algorithm: &str) -> Option<SweepSummary> {
        self.summary().into_iter().find(|s| s.value == value && s.algorithm == algorithm)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("axis,value,algorithm,snapshot,weighted_sum,infeasible_count\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.axis, r.value, r.algorithm, r.snapshot, r.weighted_sum, r.infeasible_count
            ));
        }
        s
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary()).expect("summary serializes")
    }
}

fn run_cell(
    spec: &SweepSpec,
    registry: &AlgorithmRegistry,
    algorithms: &[String],
    opts: &OptimizeOptions,
    value: f64,
    snapshot: usize,
) -> Result<Vec<SweepRow>> {
    let scenario = spec.scenario(value, snapshot)?;
    let receiver = spec.receiver.receiver();
    let k = scenario.k();
    let mut upper: Option<Result<AllocationResult>> = None;
    let mut rows = Vec::with_capacity(algorithms.len());
    for name in algorithms {
        let outcome = match name.as_str() {
            "upper_bound" | "conventional" => {
                let ub = upper
                    .get_or_insert_with(|| registry.get("upper_bound")?.allocate(&scenario, &*receiver, opts));
                match (name.as_str(), ub) {
                    ("upper_bound", Ok(r)) => Ok(r.clone()),
                    (_, Ok(r)) => Conventional::from_upper_bound(&scenario, &*receiver, r.clone()),
                    (_, Err(e)) => Err(Error::Domain(e.to_string())),
                }
            }
            _ => registry.get(name)?.allocate(&scenario, &*receiver, opts),
        };
        rows.push(match outcome {
            Ok(res) => SweepRow::from_result(spec.axis, value, snapshot, &res),
            Err(e) => {
                log::warn!("{name} failed on {}={value} snapshot {snapshot}: {e}", spec.axis);
                SweepRow {
                    axis: spec.axis,
                    value,
                    algorithm: name.clone(),
                    snapshot,
                    status: None,
                    weighted_sum: 0.0,
                    shannon_sum: 0.0,
                    infeasible_count: k,
                    devices: k,
                }
            }
        });
    }
    Ok(rows)
}

/// Runs every algorithm on every (value, snapshot) cell. Cells are
/// processed in parallel; rows come back ordered by value, then snapshot,
/// then the order of `algorithms`.
pub fn run_sweep(spec: &SweepSpec, algorithms: &[&str], opts: &OptimizeOptions) -> Result<SweepResult> {
    run_sweep_with(spec, &AlgorithmRegistry::standard(), algorithms, opts)
}

pub fn run_sweep_with(
    spec: &SweepSpec,
    registry: &AlgorithmRegistry,
    algorithms: &[&str],
    opts: &OptimizeOptions,
) -> Result<SweepResult> {
    spec.validate()?;
    if algorithms.is_empty() {
        return Err(domain("sweep needs at least one algorithm"));
    }
    for a in algorithms {
        registry.get(a)?;
    }
    if algorithms.contains(&"conventional") {
        registry.get("upper_bound")?;
    }
    let names: Vec<String> = algorithms.iter().map(|s| s.to_string()).collect();
    let cells: Vec<(f64, usize)> = spec
        .values
        .iter()
        .flat_map(|&v| (0..spec.snapshots).map(move |s| (v, s)))
        .collect();
    let per_cell: Vec<Result<Vec<SweepRow>>> = cells
        .par_iter()
        .map(|&(v, s)| run_cell(spec, registry, &names, opts, v, s))
        .collect();
    let mut rows = Vec::with_capacity(cells.len() * names.len());
    for cell in per_cell {
        rows.extend(cell?);
    }
    Ok(SweepResult { spec: spec.clone(), algorithms: names, rows })
}
