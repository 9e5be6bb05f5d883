//! Linear detectors. Each receiver knows its closed-form SINR lower bound,
//! how to express that bound as GP constraints, and how to form its
//! combining matrix from channel estimates.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::approx::monomial_minorant_coeffs;
use crate::chanmodel::all_stats;
use crate::error::{domain, Error, Result};
use crate::fbl::{sinr_lb_mrc, sinr_lb_zf};
use crate::gp::{Constraint, Monomial, Posynomial};
use crate::scenario::Scenario;

/// Largest device count for which the ZF constraints are built.
pub const ZF_MAX_DEVICES: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReceiverKind {
    Mrc,
    Zf,
}

impl ReceiverKind {
    pub const ALL: [ReceiverKind; 2] = [ReceiverKind::Mrc, ReceiverKind::Zf];

    pub fn name(self) -> &'static str {
        match self {
            ReceiverKind::Mrc => "mrc",
            ReceiverKind::Zf => "zf",
        }
    }

    pub fn receiver(self) -> Arc<dyn Receiver> {
        match self {
            ReceiverKind::Mrc => Arc::new(Mrc),
            ReceiverKind::Zf => Arc::new(Zf),
        }
    }
}

impl fmt::Display for ReceiverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ReceiverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Unknown { kind: "receiver", name: s.to_string() })
    }
}

pub fn receiver_by_name(name: &str) -> Result<Arc<dyn Receiver>> {
    Ok(name.parse::<ReceiverKind>()?.receiver())
}

/// Powers as GP expressions. A pilot power frozen to a constant is a
/// constant monomial, so the same builders serve both cases.
#[derive(Debug, Clone)]
pub struct PowerVars {
    pub pilot: Vec<Monomial>,
    pub data: Vec<Monomial>,
}

pub trait Receiver: Send + Sync {
    fn kind(&self) -> ReceiverKind;

    fn name(&self) -> &'static str {
        self.kind().name()
    }

    /// Closed-form SINR lower bound for every device.
    fn sinr_lb(&self, scenario: &Scenario, p_pilot: &[f64], p_data: &[f64]) -> Result<Vec<f64>>;

    /// Constraints `target_k <= sinr_lb_k(p)` in GP form. `pilot_anchor`
    /// is where any local bound on the right side is made tight; receivers
    /// whose constraints are exact ignore it.
    fn sinr_constraints(
        &self,
        scenario: &Scenario,
        vars: &PowerVars,
        targets: &[Monomial],
        pilot_anchor: &[f64],
    ) -> Result<Vec<Constraint>>;

    /// `M x K` combining matrix for the given channel estimate.
    fn combiner(&self, h_hat: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>>;
}

fn check_vars(scenario: &Scenario, vars: &PowerVars, targets: &[Monomial]) -> Result<()> {
    let k = scenario.k();
    if vars.pilot.len() != k || vars.data.len() != k || targets.len() != k {
        return Err(domain(format!("expected {k} pilot, payload and target expressions")));
    }
    Ok(())
}

pub struct Mrc;

impl Receiver for Mrc {
    fn kind(&self) -> ReceiverKind {
        ReceiverKind::Mrc
    }

    fn sinr_lb(&self, scenario: &Scenario, p_pilot: &[f64], p_data: &[f64]) -> Result<Vec<f64>> {
        let stats = all_stats(&scenario.alphas(), p_pilot)?;
        sinr_lb_mrc(p_data, &stats, scenario.system.antennas)
    }

    /// With `sigma + delta = alpha`, clearing the bound's denominator gives
    /// `t_k (sum_{i!=k} a_i a_k K pp_k pd_i + sum_i a_i pd_i + a_k K pp_k + 1)
    ///  <= (M-1) K a_k^2 pp_k pd_k`.
    fn sinr_constraints(
        &self,
        scenario: &Scenario,
        vars: &PowerVars,
        targets: &[Monomial],
        _pilot_anchor: &[f64],
    ) -> Result<Vec<Constraint>> {
        check_vars(scenario, vars, targets)?;
        let alpha = scenario.alphas();
        let kk = scenario.k() as f64;
        let m = scenario.system.antennas as f64;
        let mut out = Vec::with_capacity(alpha.len());
        for k in 0..alpha.len() {
            let mut terms = Vec::new();
            for i in 0..alpha.len() {
                if i != k {
                    terms.push(vars.pilot[k].mul(&vars.data[i]).scale(alpha[i] * alpha[k] * kk));
                }
            }
            terms.extend(vars.data.iter().zip(&alpha).map(|(pd, a)| pd.scale(*a)));
            terms.push(vars.pilot[k].scale(alpha[k] * kk));
            terms.push(Monomial::constant(1.0));
            let lhs = Posynomial::new(terms).mul_mono(&targets[k]);
            let rhs = vars.pilot[k].mul(&vars.data[k]).scale((m - 1.0) * kk * alpha[k] * alpha[k]);
            out.push(Constraint::new(format!("sinr{k}"), lhs, rhs));
        }
        Ok(out)
    }

    fn combiner(&self, h_hat: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
        Ok(h_hat.clone())
    }
}

pub struct Zf;

impl Zf {
    /// `x_i = a_i K pp_i`.
    fn pilot_snr(scenario: &Scenario, vars: &PowerVars) -> Vec<Monomial> {
        let kk = scenario.k() as f64;
        vars.pilot
            .iter()
            .zip(scenario.alphas())
            .map(|(p, a)| p.scale(a * kk))
            .collect()
    }

    fn one_plus(x: &Monomial) -> Posynomial {
        Posynomial::new([Monomial::constant(1.0), x.clone()])
    }
}

impl Receiver for Zf {
    fn kind(&self) -> ReceiverKind {
        ReceiverKind::Zf
    }

    fn sinr_lb(&self, scenario: &Scenario, p_pilot: &[f64], p_data: &[f64]) -> Result<Vec<f64>> {
        let stats = all_stats(&scenario.alphas(), p_pilot)?;
        sinr_lb_zf(p_data, &stats, scenario.system.antennas)
    }

    /// Multiplying the bound through by `prod_j (1 + x_j)` gives
    /// `t_k (1 + x_k) P <= (M-K) a_k x_k pd_k prod_j (1 + x_j)` with
    /// `P = sum_i a_i pd_i prod_{j!=i} (1 + x_j) + prod_j (1 + x_j)`.
    /// The product on the right is replaced by its monomial minorant
    /// anchored at `pilot_anchor`, which keeps the constraint conservative.
    fn sinr_constraints(
        &self,
        scenario: &Scenario,
        vars: &PowerVars,
        targets: &[Monomial],
        pilot_anchor: &[f64],
    ) -> Result<Vec<Constraint>> {
        check_vars(scenario, vars, targets)?;
        let n = scenario.k();
        if n > ZF_MAX_DEVICES {
            return Err(Error::Capacity(format!(
                "ZF constraints are expanded exactly only for K <= {ZF_MAX_DEVICES}, got {n}"
            )));
        }
        if pilot_anchor.len() != n {
            return Err(domain(format!("expected {n} pilot anchors")));
        }
        let alpha = scenario.alphas();
        let kk = n as f64;
        let m = scenario.system.antennas as f64;
        let x = Self::pilot_snr(scenario, vars);
        let factors: Vec<Posynomial> = x.iter().map(Self::one_plus).collect();
        let product_except = |skip: Option<usize>| {
            factors
                .iter()
                .enumerate()
                .filter(|(j, _)| Some(*j) != skip)
                .fold(Posynomial::from(Monomial::constant(1.0)), |acc, (_, f)| acc.mul(f))
        };
        let mut p_terms = product_except(None).terms;
        for i in 0..n {
            let scaled = product_except(Some(i)).mul_mono(&vars.data[i].scale(alpha[i]));
            p_terms.extend(scaled.terms);
        }
        let shared = Arc::new(Posynomial::new(p_terms));

        let anchor_snr: Vec<f64> = pilot_anchor.iter().zip(&alpha).map(|(p, a)| a * kk * p).collect();
        let bound = monomial_minorant_coeffs(&anchor_snr)?;
        let minorant = x
            .iter()
            .zip(&bound.tau)
            .fold(Monomial::constant(bound.lambda), |acc, (xi, t)| acc.mul(&xi.pow(*t)));

        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            let lhs = vec![
                Arc::new(Posynomial::from(targets[k].clone())),
                Arc::new(factors[k].clone()),
                Arc::clone(&shared),
            ];
            let rhs = x[k].mul(&vars.data[k]).mul(&minorant).scale((m - kk) * alpha[k]);
            out.push(Constraint::factored(format!("sinr{k}"), lhs, rhs));
        }
        Ok(out)
    }

    fn combiner(&self, h_hat: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
        let gram = h_hat.adjoint() * h_hat;
        let chol = gram.cholesky().ok_or(Error::SingularGram)?;
        let a = h_hat * chol.inverse();
        let k = h_hat.ncols();
        let check = a.adjoint() * h_hat - DMatrix::<Complex64>::identity(k, k);
        let err = check.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        if !(err < 1e-8) {
            return Err(Error::SingularGram);
        }
        Ok(a)
    }
}
