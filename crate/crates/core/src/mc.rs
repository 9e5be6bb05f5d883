//! Monte Carlo evaluation of the ergodic rate under simulated channel
//! estimation, for comparison with the closed-form lower bounds.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocator::rate_params;
use crate::chanmodel::draw_estimated_channels;
use crate::error::{domain, Error, Result};
use crate::receiver::{Receiver, ReceiverKind};
use crate::rng;
use crate::scenario::Scenario;

/// Redraws allowed per trial when the ZF Gram matrix is unusable.
const MAX_REDRAWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_trials: usize,
    pub base_seed: u64,
    pub receiver: ReceiverKind,
}

impl McConfig {
    pub const DESK_TRIALS: usize = 2000;
    pub const PAPER_TRIALS: usize = 5000;

    pub fn new(n_trials: usize, base_seed: u64, receiver: ReceiverKind) -> Result<Self> {
        if n_trials == 0 {
            return Err(domain("at least one Monte Carlo trial is required"));
        }
        Ok(Self { n_trials, base_seed, receiver })
    }
}

/// `gamma_k = p_k |a_k^H h_k|^2 / (sum_{i!=k} p_i |a_k^H h_i|^2
///  + sum_i p_i |a_k^H e_i|^2 + ||a_k||^2)` with `A` the receiver's combiner,
/// `h` the estimates and `e` the estimation errors.
pub fn instantaneous_sinr(
    h_hat: &DMatrix<Complex64>,
    h_tilde: &DMatrix<Complex64>,
    p_data: &[f64],
    receiver: &dyn Receiver,
) -> Result<Vec<f64>> {
    let k = h_hat.ncols();
    if h_tilde.shape() != h_hat.shape() || p_data.len() != k {
        return Err(domain("channel matrices and powers disagree in size"));
    }
    let a = receiver.combiner(h_hat)?;
    let signal = a.adjoint() * h_hat;
    let leak = a.adjoint() * h_tilde;
    Ok((0..k)
        .map(|row| {
            let mut interference = a.column(row).norm_squared();
            for i in 0..k {
                interference += p_data[i] * leak[(row, i)].norm_sqr();
                if i != row {
                    interference += p_data[i] * signal[(row, i)].norm_sqr();
                }
            }
            p_data[row] * signal[(row, row)].norm_sqr() / interference
        })
        .collect())
}

/// Per-device comparison of simulated and closed-form rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub receiver: ReceiverKind,
    pub trials: usize,
    pub sinr_lb: Vec<f64>,
    pub rate_lb: Vec<f64>,
    /// Whether the lower bound meets the device's rate target.
    pub feasible: Vec<bool>,
    /// Mean instantaneous rate, negative values clamped to zero.
    pub empirical: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Mean of `1 / gamma_k`.
    pub mean_inv_sinr: Vec<f64>,
    /// Instantaneous rates that were negative and clamped.
    pub clamped: usize,
    /// Trials redrawn because the Gram matrix was singular.
    pub redrawn: usize,
}

impl RateReport {
    /// `(empirical - lb) / empirical`, per device.
    pub fn relative_gap(&self) -> Vec<f64> {
        self.empirical
            .iter()
            .zip(&self.rate_lb)
            .map(|(e, lb)| (e - lb) / e)
            .collect()
    }

    pub fn mean_relative_gap(&self) -> f64 {
        let g = self.relative_gap();
        g.iter().sum::<f64>() / g.len() as f64
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("device,sinr_lb,lb,empirical,stderr,gap\n");
        for (k, gap) in self.relative_gap().iter().enumerate() {
            s.push_str(&format!(
                "{k},{},{},{},{},{}\n",
                self.sinr_lb[k], self.rate_lb[k], self.empirical[k], self.stderr[k], gap
            ));
        }
        s
    }
}

struct Trial {
    rate: Vec<f64>,
    inv_sinr: Vec<f64>,
    clamped: usize,
    redrawn: usize,
}

fn run_trial(
    scenario: &Scenario,
    receiver: &dyn Receiver,
    p_pilot: &[f64],
    p_data: &[f64],
    params: &[crate::fbl::FblParams],
    cfg: &McConfig,
    trial: usize,
) -> Result<Trial> {
    let mut r = rng::stream(cfg.base_seed, trial as u64);
    let alphas = scenario.alphas();
    for redrawn in 0..=MAX_REDRAWS {
        let draw = draw_estimated_channels(&mut r, &alphas, p_pilot, scenario.system.antennas)?;
        let gamma = match instantaneous_sinr(&draw.h_hat, &draw.h_tilde, p_data, receiver) {
            Ok(g) => g,
            Err(Error::SingularGram) => continue,
            Err(e) => return Err(e),
        };
        let mut clamped = 0;
        let rate = gamma
            .iter()
            .zip(params)
            .map(|(g, p)| {
                let v = p.rate(*g);
                if v < 0.0 {
                    clamped += 1;
                    0.0
                } else {
                    v
                }
            })
            .collect();
        let inv_sinr = gamma.iter().map(|g| 1.0 / g).collect();
        return Ok(Trial { rate, inv_sinr, clamped, redrawn });
    }
    Err(Error::SingularGram)
}

/// Simulates `cfg.n_trials` channel draws (true channel, pilot observation,
/// MMSE estimate) and averages the instantaneous finite-blocklength rate.
/// Trials run in parallel on the current rayon pool; each has its own
/// seed, and the reduction is in trial order, so the result does not depend
/// on the number of threads.
pub fn empirical_ergodic_rate(
    scenario: &Scenario,
    p_pilot: &[f64],
    p_data: &[f64],
    cfg: &McConfig,
) -> Result<RateReport> {
    scenario.validate()?;
    let k = scenario.k();
    if p_pilot.len() != k || p_data.len() != k {
        return Err(domain(format!("expected {k} pilot and payload powers")));
    }
    if p_pilot.iter().any(|p| !(*p > 0.0)) {
        return Err(Error::DegeneratePilot);
    }
    if cfg.n_trials == 0 {
        return Err(domain("at least one Monte Carlo trial is required"));
    }
    let receiver = cfg.receiver.receiver();
    let params = rate_params(scenario, true)?;
    let trials: Vec<Trial> = (0..cfg.n_trials)
        .into_par_iter()
        .map(|t| run_trial(scenario, receiver.as_ref(), p_pilot, p_data, &params, cfg, t))
        .collect::<Result<_>>()?;

    let n = trials.len() as f64;
    let mut sum = vec![0.0; k];
    let mut sum_sq = vec![0.0; k];
    let mut inv = vec![0.0; k];
    let (mut clamped, mut redrawn) = (0, 0);
    for t in &trials {
        for j in 0..k {
            sum[j] += t.rate[j];
            sum_sq[j] += t.rate[j] * t.rate[j];
            inv[j] += t.inv_sinr[j];
        }
        clamped += t.clamped;
        redrawn += t.redrawn;
    }
    let empirical: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let stderr = sum_sq
        .iter()
        .zip(&empirical)
        .map(|(sq, m)| {
            if trials.len() < 2 {
                return 0.0;
            }
            let var = ((sq - n * m * m) / (n - 1.0)).max(0.0);
            (var / n).sqrt()
        })
        .collect();
    let sinr_lb = receiver.sinr_lb(scenario, p_pilot, p_data)?;
    let rate_lb: Vec<f64> = params.iter().zip(&sinr_lb).map(|(p, g)| p.rate(*g)).collect();
    let feasible = rate_lb
        .iter()
        .zip(&scenario.devices)
        .map(|(r, d)| *r >= d.rate_req)
        .collect();
    if redrawn > 0 {
        log::warn!("{redrawn} of {} trials redrawn for a singular Gram matrix", cfg.n_trials);
    }
    Ok(RateReport {
        receiver: cfg.receiver,
        trials: cfg.n_trials,
        sinr_lb,
        rate_lb,
        feasible,
        empirical,
        stderr,
        mean_inv_sinr: inv.iter().map(|s| s / n).collect(),
        clamped,
        redrawn,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chanmodel::draw_true_channels;
    use crate::receiver::{Mrc, Zf};

    #[test]
    fn single_device_mrc_matches_formula() {
        let mut r = rng::stream(3, 0);
        let h_hat = draw_true_channels(&mut r, &[2.0], 16);
        let h_tilde = draw_true_channels(&mut r, &[0.3], 16);
        let p = 0.7;
        let g = instantaneous_sinr(&h_hat, &h_tilde, &[p], &Mrc).unwrap()[0];
        let n2 = h_hat.column(0).norm_squared();
        let cross = h_hat.column(0).dotc(&h_tilde.column(0)).norm_sqr();
        let expect = p * n2 * n2 / (p * cross + n2);
        assert!((g - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn zf_without_estimation_error_is_interference_free() {
        let mut r = rng::stream(4, 0);
        let h_hat = draw_true_channels(&mut r, &[1.0, 2.0, 0.5], 12);
        let zero = DMatrix::zeros(12, 3);
        let p = [0.5, 1.0, 2.0];
        let g = instantaneous_sinr(&h_hat, &zero, &p, &Zf).unwrap();
        let a = Zf.combiner(&h_hat).unwrap();
        for k in 0..3 {
            let expect = p[k] / a.column(k).norm_squared();
            assert!((g[k] - expect).abs() < 1e-9 * expect);
        }
    }

    #[test]
    fn zf_rejects_rank_deficient_estimates() {
        let mut r = rng::stream(5, 0);
        let mut h = draw_true_channels(&mut r, &[1.0, 1.0], 8);
        let c0 = h.column(0).into_owned();
        h.set_column(1, &c0);
        assert!(matches!(Zf.combiner(&h), Err(Error::SingularGram)));
    }
}
