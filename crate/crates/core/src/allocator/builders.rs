//! GP instances solved in each round of the allocator.

use crate::error::{domain, Result};
use crate::gp::{Constraint, GpProblem, GpSolution, Monomial, Posynomial, VarId};
use crate::receiver::{Mrc, PowerVars, Receiver, Zf};
use crate::scenario::Scenario;

/// Floor on SINR targets that are otherwise zero, so every variable stays
/// bounded away from the origin.
pub const TARGET_FLOOR: f64 = 1e-9;

/// A built GP together with the ids of its power variables.
#[derive(Debug, Clone)]
pub struct AllocationGp {
    pub problem: GpProblem,
    /// `chi_k`; empty for the feasibility problem.
    pub chi: Vec<VarId>,
    /// The feasibility scale `phi`, if this is the feasibility problem.
    pub phi: Option<VarId>,
    /// `None` where the pilot power is frozen.
    pub pilot: Vec<Option<VarId>>,
    pub data: Vec<VarId>,
    fixed_pilot: Option<Vec<f64>>,
}

impl AllocationGp {
    /// Variable vector for a candidate point. `chi` (or `phi`, in the
    /// feasibility problem, passed as a one-element slice) fills the
    /// auxiliary variables.
    pub fn point(&self, p_pilot: &[f64], p_data: &[f64], aux: &[f64]) -> Vec<f64> {
        let mut x = vec![1.0; self.problem.num_vars()];
        for (v, c) in self.chi.iter().zip(aux) {
            x[v.0] = *c;
        }
        if let (Some(v), Some(c)) = (self.phi, aux.first()) {
            x[v.0] = *c;
        }
        for (v, p) in self.pilot.iter().zip(p_pilot) {
            if let Some(v) = v {
                x[v.0] = *p;
            }
        }
        for (v, p) in self.data.iter().zip(p_data) {
            x[v.0] = *p;
        }
        x
    }

    pub fn pilot_powers(&self, sol: &GpSolution) -> Vec<f64> {
        match &self.fixed_pilot {
            Some(p) => p.clone(),
            None => self.pilot.iter().map(|v| sol.value(v.expect("pilot variable"))).collect(),
        }
    }

    pub fn data_powers(&self, sol: &GpSolution) -> Vec<f64> {
        self.data.iter().map(|v| sol.value(*v)).collect()
    }

    pub fn chi_values(&self, sol: &GpSolution) -> Vec<f64> {
        self.chi.iter().map(|v| sol.value(*v)).collect()
    }
}

fn power_vars(
    gp: &mut GpProblem,
    scenario: &Scenario,
    fixed_pilot: Option<&[f64]>,
) -> Result<(PowerVars, Vec<Option<VarId>>, Vec<VarId>)> {
    let k = scenario.k();
    let (pilot, pilot_ids): (Vec<Monomial>, Vec<Option<VarId>>) = match fixed_pilot {
        Some(p) => {
            if p.len() != k || p.iter().any(|v| !(*v > 0.0)) {
                return Err(domain("fixed pilot powers must be positive, one per device"));
            }
            (p.iter().map(|v| Monomial::constant(*v)).collect(), vec![None; k])
        }
        None => (0..k)
            .map(|i| {
                let v = gp.add_var(format!("pp{i}"));
                (Monomial::var(v), Some(v))
            })
            .unzip(),
    };
    let data_ids: Vec<VarId> = (0..k).map(|i| gp.add_var(format!("pd{i}"))).collect();
    let data = data_ids.iter().map(|v| Monomial::var(*v)).collect();
    Ok((PowerVars { pilot, data }, pilot_ids, data_ids))
}

/// `K pp_k + (L - K) pd_k <= E_k`.
fn energy_constraints(scenario: &Scenario, vars: &PowerVars) -> Result<Vec<Constraint>> {
    let kk = scenario.system.pilot_len() as f64;
    let ld = scenario.system.data_len() as f64;
    scenario
        .devices
        .iter()
        .enumerate()
        .map(|(k, d)| {
            if !(d.energy > 0.0) {
                return Err(domain(format!("device {k} has no energy budget")));
            }
            let lhs = Posynomial::new([vars.pilot[k].scale(kk), vars.data[k].scale(ld)]);
            Ok(Constraint::new(format!("energy{k}"), lhs, Monomial::constant(d.energy)))
        })
        .collect()
}

/// One successive-approximation round: maximize `prod chi_k^w_hat_k`
/// subject to `chi_k <= sinr_lb_k(p)`, `chi_k >= t_k` and the energy budgets.
pub fn build_gp(
    scenario: &Scenario,
    receiver: &dyn Receiver,
    thresholds: &[f64],
    w_hat: &[f64],
    pilot_anchor: &[f64],
    fixed_pilot: Option<&[f64]>,
) -> Result<AllocationGp> {
    let k = scenario.k();
    if thresholds.len() != k || w_hat.len() != k {
        return Err(domain(format!("expected {k} thresholds and weights")));
    }
    let mut gp = GpProblem::new();
    let chi: Vec<VarId> = (0..k).map(|i| gp.add_var(format!("chi{i}"))).collect();
    let (vars, pilot, data) = power_vars(&mut gp, scenario, fixed_pilot)?;
    gp.maximize(chi.iter().zip(w_hat).map(|(v, w)| (*v, *w)));
    let targets: Vec<Monomial> = chi.iter().map(|v| Monomial::var(*v)).collect();
    for c in receiver.sinr_constraints(scenario, &vars, &targets, pilot_anchor)? {
        gp.push(c);
    }
    for (i, (&v, &t)) in chi.iter().zip(thresholds).enumerate() {
        let t = t.max(TARGET_FLOOR);
        gp.push(Constraint::new(format!("target{i}"), Monomial::constant(t).into(), Monomial::var(v)));
    }
    for c in energy_constraints(scenario, &vars)? {
        gp.push(c);
    }
    Ok(AllocationGp {
        problem: gp,
        chi,
        phi: None,
        pilot,
        data,
        fixed_pilot: fixed_pilot.map(<[f64]>::to_vec),
    })
}

pub fn build_gp_mrc(
    scenario: &Scenario,
    thresholds: &[f64],
    w_hat: &[f64],
    fixed_pilot: Option<&[f64]>,
) -> Result<AllocationGp> {
    build_gp(scenario, &Mrc, thresholds, w_hat, &[], fixed_pilot)
}

pub fn build_gp_zf(
    scenario: &Scenario,
    thresholds: &[f64],
    w_hat: &[f64],
    pilot_anchor: &[f64],
    fixed_pilot: Option<&[f64]>,
) -> Result<AllocationGp> {
    build_gp(scenario, &Zf, thresholds, w_hat, pilot_anchor, fixed_pilot)
}

/// Maximize `phi` subject to `sinr_lb_k(p) >= phi t_k` and the energy
/// budgets; the rate targets are jointly attainable iff the optimum is at
/// least one.
pub fn build_feasibility_gp(
    scenario: &Scenario,
    receiver: &dyn Receiver,
    thresholds: &[f64],
    pilot_anchor: &[f64],
    fixed_pilot: Option<&[f64]>,
) -> Result<AllocationGp> {
    let k = scenario.k();
    if thresholds.len() != k {
        return Err(domain(format!("expected {k} thresholds")));
    }
    let mut gp = GpProblem::new();
    let phi = gp.add_var("phi");
    let (vars, pilot, data) = power_vars(&mut gp, scenario, fixed_pilot)?;
    gp.maximize([(phi, 1.0)]);
    let targets: Vec<Monomial> = thresholds
        .iter()
        .map(|t| Monomial::var(phi).scale(t.max(TARGET_FLOOR)))
        .collect();
    for c in receiver.sinr_constraints(scenario, &vars, &targets, pilot_anchor)? {
        gp.push(c);
    }
    for c in energy_constraints(scenario, &vars)? {
        gp.push(c);
    }
    Ok(AllocationGp {
        problem: gp,
        chi: Vec::new(),
        phi: Some(phi),
        pilot,
        data,
        fixed_pilot: fixed_pilot.map(<[f64]>::to_vec),
    })
}
