//! Successive-GP power allocation and the baseline schemes.
//!
//! Each round fixes anchors at the current SINR lower bounds, replaces the
//! nonconvex rate objective by a product-form minorant that is tight at the
//! anchors, and solves the resulting GP. Because the minorant touches the
//! true objective at the previous iterate, which stays feasible, the
//! objective never decreases from round to round.

mod builders;
mod registry;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use builders::{
    build_feasibility_gp, build_gp, build_gp_mrc, build_gp_zf, AllocationGp, TARGET_FLOOR,
};
pub use registry::{
    run_baseline, AlgorithmRegistry, BaselineKind, Conventional, FixedPilot, PowerAllocator,
    Proposed, UpperBound,
};

use crate::approx::surrogate_weights;
use crate::error::{Error, Result};
use crate::fbl::FblParams;
use crate::gp::{solve, GpSolution, GpStatus, SolverOptions};
use crate::receiver::{Receiver, ReceiverKind};
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    pub p_pilot: Vec<f64>,
    pub p_data: Vec<f64>,
    /// SINR auxiliaries of the last GP round (empty when no round ran).
    pub chi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub objective: f64,
    pub anchors: Vec<f64>,
    pub gp_status: GpStatus,
    pub newton_steps: usize,
    pub wall_time_s: f64,
}

/// Objective history. Entry 0 is the starting point produced by the
/// feasibility stage; every later entry follows one GP round.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
}

impl IterationTrace {
    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective).collect()
    }

    /// GP rounds performed.
    pub fn rounds(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    /// True if no step loses more than `slack` relative to the previous value.
    pub fn is_monotone(&self, slack: f64) -> bool {
        self.records
            .windows(2)
            .all(|w| w[1].objective >= w[0].objective - slack * w[0].objective.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AllocationStatus {
    Converged,
    Infeasible,
    MaxIter,
}

/// Rate used to score an allocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    /// Finite-blocklength lower bound.
    FblLb,
    Shannon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationResult {
    pub algorithm: String,
    pub receiver: ReceiverKind,
    pub status: AllocationStatus,
    /// Optimal value of the feasibility problem.
    pub phi: f64,
    pub allocation: PowerAllocation,
    pub sinr_lb: Vec<f64>,
    /// Finite-blocklength rate lower bound per device (unclamped).
    pub rate_lb: Vec<f64>,
    pub shannon_rate: Vec<f64>,
    pub metric: Metric,
    /// Per-device rate under `metric`, zeroed where it misses the target.
    pub scored_rate: Vec<f64>,
    pub violations: Vec<bool>,
    /// `sum w_k scored_rate_k`.
    pub weighted_sum: f64,
    /// `sum w_k shannon_rate_k`, without zeroing.
    pub shannon_sum: f64,
    pub trace: IterationTrace,
}

impl AllocationResult {
    pub fn violation_count(&self) -> usize {
        self.violations.iter().filter(|v| **v).count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("allocation result serializes")
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OptimizeOptions {
    /// Relative objective change that ends the loop.
    pub xi: f64,
    pub max_outer: usize,
    /// Keep the dispersion penalty in objective and rate targets; switching
    /// it off gives the Shannon upper bound.
    pub penalty: bool,
    /// Freeze pilot powers at `E_k / L`.
    pub fixed_pilot: bool,
    pub solver: SolverOptions,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            xi: 1e-4,
            max_outer: 50,
            penalty: true,
            fixed_pilot: false,
            solver: SolverOptions::default(),
        }
    }
}

/// Rate parameters per device, with or without the dispersion penalty.
pub fn rate_params(scenario: &Scenario, penalty: bool) -> Result<Vec<FblParams>> {
    let (l, k) = (scenario.system.blocklength, scenario.k());
    scenario
        .devices
        .iter()
        .map(|d| {
            if penalty {
                FblParams::new(d.epsilon, l, k)
            } else {
                Ok(FblParams::shannon(l, k))
            }
        })
        .collect()
}

/// SINR each device needs to reach its rate target.
pub fn sinr_thresholds(scenario: &Scenario, params: &[FblParams]) -> Result<Vec<f64>> {
    scenario
        .devices
        .iter()
        .zip(params)
        .map(|(d, p)| p.sinr_threshold(d.rate_req))
        .collect()
}

/// `sum w_k R_k(sinr_lb_k(p))`.
pub fn weighted_objective(
    scenario: &Scenario,
    receiver: &dyn Receiver,
    params: &[FblParams],
    p_pilot: &[f64],
    p_data: &[f64],
) -> Result<f64> {
    let gamma = receiver.sinr_lb(scenario, p_pilot, p_data)?;
    Ok(scenario
        .devices
        .iter()
        .zip(params)
        .zip(&gamma)
        .map(|((d, p), g)| d.weight * p.rate(*g))
        .sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feasibility {
    pub phi: f64,
    pub p_pilot: Vec<f64>,
    pub p_data: Vec<f64>,
    pub rounds: usize,
}

impl Feasibility {
    pub fn feasible(&self) -> bool {
        self.phi >= 1.0
    }
}

const PHI_TOL: f64 = 1e-4;
const INTERIOR: f64 = 0.99;

fn frozen_pilot(scenario: &Scenario) -> Vec<f64> {
    let l = scenario.system.blocklength as f64;
    scenario.devices.iter().map(|d| d.energy / l).collect()
}

fn solve_round(
    gp: &AllocationGp,
    x0: &[f64],
    opts: &SolverOptions,
    round: usize,
) -> Result<GpSolution> {
    let sol = solve(&gp.problem, Some(x0), opts).map_err(|e| match e {
        Error::Solver { reason, .. } => Error::Solver { iteration: round, reason },
        other => other,
    })?;
    match sol.status {
        GpStatus::Optimal => Ok(sol),
        GpStatus::MaxIter if gp.problem.max_violation(&sol.values) <= 1e-8 => {
            log::warn!("round {round}: GP stopped at the Newton step limit; using its feasible point");
            Ok(sol)
        }
        status => Err(Error::Solver {
            iteration: round,
            reason: format!("GP round ended with status {status}"),
        }),
    }
}

/// Largest common scaling `phi` of the rate-target SINRs that the energy
/// budgets allow, starting from uniform power `E_k / L`. For ZF the
/// product bound is re-anchored until `phi` settles.
pub fn check_feasibility(
    scenario: &Scenario,
    receiver: &dyn Receiver,
    thresholds: &[f64],
    opts: &OptimizeOptions,
) -> Result<Feasibility> {
    let k = scenario.k();
    if scenario.devices.iter().any(|d| d.energy <= 0.0) {
        return Ok(Feasibility { phi: 0.0, p_pilot: vec![0.0; k], p_data: vec![0.0; k], rounds: 0 });
    }
    let fixed = opts.fixed_pilot.then(|| frozen_pilot(scenario));
    let l = scenario.system.blocklength as f64;
    let uniform: Vec<f64> = scenario.devices.iter().map(|d| INTERIOR * d.energy / l).collect();
    let mut p_pilot = fixed.clone().unwrap_or_else(|| uniform.clone());
    let mut p_data = uniform;
    let targets: Vec<f64> = thresholds.iter().map(|t| t.max(TARGET_FLOOR)).collect();
    let gamma = receiver.sinr_lb(scenario, &p_pilot, &p_data)?;
    let mut phi = INTERIOR * gamma.iter().zip(&targets).map(|(g, t)| g / t).fold(f64::INFINITY, f64::min);
    let mut rounds = 0;
    let mut prev = f64::NAN;
    for round in 1..=opts.max_outer {
        let gp = build_feasibility_gp(scenario, receiver, thresholds, &p_pilot, fixed.as_deref())?;
        let x0 = gp.point(&p_pilot, &p_data, &[phi]);
        let sol = solve_round(&gp, &x0, &opts.solver, round)?;
        log::debug!("feasibility round {round}: phi {:.6} ({} Newton steps)", sol.value(gp.phi.expect("phi variable")), sol.newton_steps);
        rounds = round;
        phi = sol.value(gp.phi.expect("phi variable"));
        p_pilot = gp.pilot_powers(&sol);
        p_data = gp.data_powers(&sol);
        let settled = (phi - prev).abs() <= PHI_TOL * phi.abs();
        // MRC and frozen-pilot problems are exact, so one round suffices.
        if receiver.kind() == ReceiverKind::Mrc || fixed.is_some() || settled {
            break;
        }
        prev = phi;
        // The previous optimum is on the boundary; back off slightly so the
        // next round starts strictly inside.
        phi *= 1.0 - 1e-6;
    }
    Ok(Feasibility { phi, p_pilot, p_data, rounds })
}

/// Runs the successive-GP allocation.
pub fn optimize(
    scenario: &Scenario,
    receiver: &dyn Receiver,
    opts: &OptimizeOptions,
    algorithm: &str,
) -> Result<AllocationResult> {
    scenario.validate()?;
    let params = rate_params(scenario, opts.penalty)?;
    let thresholds = sinr_thresholds(scenario, &params)?;
    let a: Vec<f64> = params.iter().map(|p| p.a).collect();
    let beta = scenario.system.beta();
    let weights = scenario.weights();
    let metric = if opts.penalty { Metric::FblLb } else { Metric::Shannon };

    let feas = check_feasibility(scenario, receiver, &thresholds, opts)?;
    log::info!("{algorithm}/{}: feasibility phi = {:.6}", receiver.name(), feas.phi);
    if !feas.feasible() {
        return finalize(
            scenario,
            receiver,
            algorithm,
            AllocationStatus::Infeasible,
            feas.phi,
            PowerAllocation { p_pilot: feas.p_pilot, p_data: feas.p_data, chi: Vec::new() },
            metric,
            IterationTrace::default(),
        );
    }

    let fixed = opts.fixed_pilot.then(|| frozen_pilot(scenario));
    let mut p_pilot = feas.p_pilot;
    let mut p_data = feas.p_data;
    let mut chi = Vec::new();
    let mut obj = weighted_objective(scenario, receiver, &params, &p_pilot, &p_data)?;
    let mut trace = IterationTrace::default();
    trace.records.push(IterationRecord {
        objective: obj,
        anchors: Vec::new(),
        gp_status: GpStatus::Optimal,
        newton_steps: 0,
        wall_time_s: 0.0,
    });
    let mut status = AllocationStatus::MaxIter;
    for round in 1..=opts.max_outer {
        let started = Instant::now();
        let anchors = receiver.sinr_lb(scenario, &p_pilot, &p_data)?;
        let sw = surrogate_weights(&weights, &a, beta, &anchors)?;
        let gp = build_gp(scenario, receiver, &thresholds, &sw.w_hat, &p_pilot, fixed.as_deref())?;
        let chi0: Vec<f64> = anchors
            .iter()
            .zip(&thresholds)
            .map(|(&g, &t)| {
                let lo = t.max(TARGET_FLOOR);
                if g * (1.0 - 1e-6) > lo {
                    g * (1.0 - 1e-6)
                } else {
                    (lo * g).sqrt()
                }
            })
            .collect();
        let x0 = gp.point(&p_pilot, &p_data, &chi0);
        let sol = solve_round(&gp, &x0, &opts.solver, round)?;
        p_pilot = gp.pilot_powers(&sol);
        p_data = gp.data_powers(&sol);
        chi = gp.chi_values(&sol);
        let next = weighted_objective(scenario, receiver, &params, &p_pilot, &p_data)?;
        trace.records.push(IterationRecord {
            objective: next,
            anchors,
            gp_status: sol.status,
            newton_steps: sol.newton_steps,
            wall_time_s: started.elapsed().as_secs_f64(),
        });
        let change = (next - obj).abs() / next.abs().max(f64::MIN_POSITIVE);
        log::debug!(
            "{algorithm}/{} round {round}: objective {next:.9} (change {change:.2e}, {} Newton steps)",
            receiver.name(),
            sol.newton_steps
        );
        obj = next;
        if change < opts.xi {
            status = AllocationStatus::Converged;
            break;
        }
    }
    finalize(
        scenario,
        receiver,
        algorithm,
        status,
        feas.phi,
        PowerAllocation { p_pilot, p_data, chi },
        metric,
        trace,
    )
}

/// Evaluates an allocation: SINR and rate lower bounds, Shannon rates and
/// the per-device zeroing of rates that miss their target.
#[allow(clippy::too_many_arguments)]
pub fn finalize(
    scenario: &Scenario,
    receiver: &dyn Receiver,
    algorithm: &str,
    status: AllocationStatus,
    phi: f64,
    allocation: PowerAllocation,
    metric: Metric,
    trace: IterationTrace,
) -> Result<AllocationResult> {
    let k = scenario.k();
    let weights = scenario.weights();
    if status == AllocationStatus::Infeasible {
        return Ok(AllocationResult {
            algorithm: algorithm.to_string(),
            receiver: receiver.kind(),
            status,
            phi,
            allocation,
            sinr_lb: vec![0.0; k],
            rate_lb: vec![0.0; k],
            shannon_rate: vec![0.0; k],
            metric,
            scored_rate: vec![0.0; k],
            violations: vec![true; k],
            weighted_sum: 0.0,
            shannon_sum: 0.0,
            trace,
        });
    }
    let gamma = receiver.sinr_lb(scenario, &allocation.p_pilot, &allocation.p_data)?;
    let fbl = rate_params(scenario, true)?;
    let shannon = rate_params(scenario, false)?;
    let rate_lb: Vec<f64> = fbl.iter().zip(&gamma).map(|(p, g)| p.rate(*g)).collect();
    let shannon_rate: Vec<f64> = shannon.iter().zip(&gamma).map(|(p, g)| p.rate(*g)).collect();
    let metric_rate = match metric {
        Metric::FblLb => &rate_lb,
        Metric::Shannon => &shannon_rate,
    };
    let violations: Vec<bool> = metric_rate
        .iter()
        .zip(&scenario.devices)
        .map(|(r, d)| *r < d.rate_req * (1.0 - 1e-9) - 1e-12)
        .collect();
    let scored_rate: Vec<f64> = metric_rate
        .iter()
        .zip(&violations)
        .map(|(r, v)| if *v { 0.0 } else { r.max(0.0) })
        .collect();
    let weighted_sum = weights.iter().zip(&scored_rate).map(|(w, r)| w * r).sum();
    let shannon_sum = weights.iter().zip(&shannon_rate).map(|(w, r)| w * r).sum();
    Ok(AllocationResult {
        algorithm: algorithm.to_string(),
        receiver: receiver.kind(),
        status,
        phi,
        allocation,
        sinr_lb: gamma,
        rate_lb,
        shannon_rate,
        metric,
        scored_rate,
        violations,
        weighted_sum,
        shannon_sum,
        trace,
    })
}
