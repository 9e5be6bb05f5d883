use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{finalize, optimize, AllocationResult, AllocationStatus, Metric, OptimizeOptions};
use crate::error::{Error, Result};
use crate::receiver::Receiver;
use crate::scenario::Scenario;

/// An allocation scheme selectable by name.
pub trait PowerAllocator: Send + Sync {
    fn name(&self) -> &'static str;

    fn allocate(
        &self,
        scenario: &Scenario,
        receiver: &dyn Receiver,
        opts: &OptimizeOptions,
    ) -> Result<AllocationResult>;
}

/// Successive GP with the finite-blocklength penalty.
pub struct Proposed;

impl PowerAllocator for Proposed {
    fn name(&self) -> &'static str {
        "proposed"
    }

    fn allocate(&self, scenario: &Scenario, receiver: &dyn Receiver, opts: &OptimizeOptions) -> Result<AllocationResult> {
        let opts = OptimizeOptions { penalty: true, fixed_pilot: false, ..*opts };
        optimize(scenario, receiver, &opts, self.name())
    }
}

/// Penalty dropped from objective and targets: the Shannon-rate optimum.
pub struct UpperBound;

impl PowerAllocator for UpperBound {
    fn name(&self) -> &'static str {
        "upper_bound"
    }

    fn allocate(&self, scenario: &Scenario, receiver: &dyn Receiver, opts: &OptimizeOptions) -> Result<AllocationResult> {
        let opts = OptimizeOptions { penalty: false, fixed_pilot: false, ..*opts };
        optimize(scenario, receiver, &opts, self.name())
    }
}

/// Upper-bound powers scored with the finite-blocklength rate; devices
/// falling short of their target are zeroed.
pub struct Conventional;

impl Conventional {
    /// Re-scores an already computed upper-bound result.
    pub fn from_upper_bound(
        scenario: &Scenario,
        receiver: &dyn Receiver,
        ub: AllocationResult,
    ) -> Result<AllocationResult> {
        if ub.status == AllocationStatus::Infeasible {
            return Ok(AllocationResult { algorithm: "conventional".into(), metric: Metric::FblLb, ..ub });
        }
        finalize(
            scenario,
            receiver,
            "conventional",
            ub.status,
            ub.phi,
            ub.allocation,
            Metric::FblLb,
            ub.trace,
        )
    }
}

impl PowerAllocator for Conventional {
    fn name(&self) -> &'static str {
        "conventional"
    }

    fn allocate(&self, scenario: &Scenario, receiver: &dyn Receiver, opts: &OptimizeOptions) -> Result<AllocationResult> {
        let ub = UpperBound.allocate(scenario, receiver, opts)?;
        Self::from_upper_bound(scenario, receiver, ub)
    }
}

/// Successive GP over payload power only, pilots frozen at `E_k / L`.
pub struct FixedPilot;

impl PowerAllocator for FixedPilot {
    fn name(&self) -> &'static str {
        "fixed_pilot"
    }

    fn allocate(&self, scenario: &Scenario, receiver: &dyn Receiver, opts: &OptimizeOptions) -> Result<AllocationResult> {
        let opts = OptimizeOptions { penalty: true, fixed_pilot: true, ..*opts };
        optimize(scenario, receiver, &opts, self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    UpperBound,
    Conventional,
    FixedPilot,
}

pub fn run_baseline(
    scenario: &Scenario,
    receiver: &dyn Receiver,
    kind: BaselineKind,
    opts: &OptimizeOptions,
) -> Result<AllocationResult> {
    match kind {
        BaselineKind::UpperBound => UpperBound.allocate(scenario, receiver, opts),
        BaselineKind::Conventional => Conventional.allocate(scenario, receiver, opts),
        BaselineKind::FixedPilot => FixedPilot.allocate(scenario, receiver, opts),
    }
}

/// Name-indexed set of allocation schemes.
#[derive(Clone, Default)]
pub struct AlgorithmRegistry {
    entries: BTreeMap<&'static str, Arc<dyn PowerAllocator>>,
}

impl AlgorithmRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The proposed scheme and the three baselines.
    pub fn standard() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(Proposed));
        r.register(Arc::new(UpperBound));
        r.register(Arc::new(Conventional));
        r.register(Arc::new(FixedPilot));
        r
    }

    pub fn register(&mut self, alg: Arc<dyn PowerAllocator>) {
        self.entries.insert(alg.name(), alg);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn PowerAllocator>> {
        self.entries
            .get(name)
            .cloned()
            .ok_or_else(|| Error::Unknown { kind: "algorithm", name: name.to_string() })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }
}
