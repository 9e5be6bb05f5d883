//! Local bounds that turn each round of the allocation problem into a
//! geometric program.
//!
//! * `G(x) = sqrt(1 - 1/(1+x)^2) <= rho ln x + eta` for `x >= (sqrt(17) - 3)/4`
//! * `ln(1 + x) >= rho_hat ln x + eta_hat` for `x > 0`
//! * `prod (1 + x_i) >= lambda prod x_i^tau_i` for `x_i > 0`
//!
//! Each bound is tight, with matching gradient, at its anchor.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Smallest anchor for which the log upper bound on `G` holds.
pub fn majorant_threshold() -> f64 {
    (17f64.sqrt() - 3.0) / 4.0
}

pub fn g_dispersion(x: f64) -> f64 {
    (1.0 - 1.0 / ((1.0 + x) * (1.0 + x))).sqrt()
}

/// `rho ln x + eta`, tight at `anchor`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogBoundCoeffs {
    pub rho: f64,
    pub eta: f64,
    pub anchor: f64,
}

impl LogBoundCoeffs {
    pub fn eval(&self, x: f64) -> f64 {
        self.rho * x.ln() + self.eta
    }
}

/// Log-linear upper bound on `G`.
pub fn log_majorant_coeffs(anchor: f64) -> Result<LogBoundCoeffs> {
    if !(anchor >= majorant_threshold()) || !anchor.is_finite() {
        return Err(domain(format!(
            "log bound on G needs anchor >= {:.6}, got {anchor}",
            majorant_threshold()
        )));
    }
    let s = (anchor * anchor + 2.0 * anchor).sqrt();
    let rho = anchor / s - anchor * s / ((1.0 + anchor) * (1.0 + anchor));
    Ok(LogBoundCoeffs {
        rho,
        eta: g_dispersion(anchor) - rho * anchor.ln(),
        anchor,
    })
}

/// Log-linear lower bound on `ln(1 + x)`.
pub fn log_minorant_coeffs(anchor: f64) -> Result<LogBoundCoeffs> {
    if !(anchor > 0.0) || !anchor.is_finite() {
        return Err(domain(format!("log bound on ln(1+x) needs anchor > 0, got {anchor}")));
    }
    let rho = anchor / (1.0 + anchor);
    Ok(LogBoundCoeffs {
        rho,
        eta: anchor.ln_1p() - rho * anchor.ln(),
        anchor,
    })
}

/// Monomial minorant `lambda prod x_i^tau_i` of `prod (1 + x_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonomialBoundCoeffs {
    pub lambda: f64,
    pub tau: Vec<f64>,
    pub anchor: Vec<f64>,
}

impl MonomialBoundCoeffs {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.lambda * x.iter().zip(&self.tau).map(|(xi, t)| xi.powf(*t)).product::<f64>()
    }

    pub fn ln_lambda(&self) -> f64 {
        self.lambda.ln()
    }
}

pub fn product_one_plus(x: &[f64]) -> f64 {
    x.iter().map(|v| 1.0 + v).product()
}

pub fn monomial_minorant_coeffs(anchor: &[f64]) -> Result<MonomialBoundCoeffs> {
    if let Some(bad) = anchor.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(domain(format!("monomial bound needs positive anchors, got {bad}")));
    }
    let tau: Vec<f64> = anchor.iter().map(|x| x / (1.0 + x)).collect();
    // Accumulate in log space: the product can overflow for large K.
    let ln_lambda: f64 = anchor
        .iter()
        .zip(&tau)
        .map(|(x, t)| x.ln_1p() - t * x.ln())
        .sum();
    Ok(MonomialBoundCoeffs {
        lambda: ln_lambda.exp(),
        tau,
        anchor: anchor.to_vec(),
    })
}

/// Objective weights of one successive-approximation round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateWeights {
    /// Exponent of `chi_k` in the round's GP objective.
    pub w_hat: Vec<f64>,
    /// Dropped constant: surrogate = `sum w_hat ln chi + constant`.
    pub constant: f64,
}

impl SurrogateWeights {
    pub fn surrogate(&self, chi: &[f64]) -> f64 {
        self.w_hat.iter().zip(chi).map(|(w, c)| w * c.ln()).sum::<f64>() + self.constant
    }
}

/// Weighted objective `sum w~_k [ln(1 + chi_k) - a_k G(chi_k)]` with
/// `w~_k = (1 - beta) w_k / ln 2`; equals the weighted sum rate in bit/s/Hz.
pub fn true_objective(weights: &[f64], a: &[f64], beta: f64, chi: &[f64]) -> f64 {
    let scale = (1.0 - beta) / std::f64::consts::LN_2;
    weights
        .iter()
        .zip(a)
        .zip(chi)
        .map(|((w, a), c)| scale * w * (c.ln_1p() - a * g_dispersion(*c)))
        .sum()
}

/// `w_hat_k = w~_k (rho_hat_k - a_k rho_k)` from bounds anchored at `chi_anchor`.
/// The bound on `G` is only formed where `a_k > 0`.
pub fn surrogate_weights(weights: &[f64], a: &[f64], beta: f64, chi_anchor: &[f64]) -> Result<SurrogateWeights> {
    let scale = (1.0 - beta) / std::f64::consts::LN_2;
    let mut w_hat = Vec::with_capacity(weights.len());
    let mut constant = 0.0;
    for ((&w, &ak), &chi) in weights.iter().zip(a).zip(chi_anchor) {
        let wt = scale * w;
        let lower = log_minorant_coeffs(chi)?;
        let (rho, eta) = if ak > 0.0 {
            let upper = log_majorant_coeffs(chi)?;
            (upper.rho, upper.eta)
        } else {
            (0.0, 0.0)
        };
        let wk = wt * (lower.rho - ak * rho);
        if wk <= 0.0 && w > 0.0 {
            log::warn!("non-positive surrogate weight {wk:.3e} at anchor {chi:.3e}");
        }
        w_hat.push(wk);
        constant += wt * (lower.eta - ak * eta);
    }
    Ok(SurrogateWeights { w_hat, constant })
}
