//! Channel-estimation statistics and channel sampling.
//!
//! Complex Gaussian entries `CN(0, v)` are drawn as two independent real
//! normals of variance `v / 2`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Per-entry variances of the MMSE estimate (`sigma`) and of its error
/// (`delta`); `sigma + delta = alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationStats {
    pub sigma: f64,
    pub delta: f64,
}

/// `sigma = alpha^2 K p / (alpha K p + 1)`, `delta = alpha / (alpha K p + 1)`.
pub fn mmse_stats(alpha: f64, devices: usize, p_pilot: f64) -> Result<EstimationStats> {
    if !(alpha > 0.0) {
        return Err(domain(format!("alpha must be positive, got {alpha}")));
    }
    if !(p_pilot >= 0.0) {
        return Err(domain(format!("pilot power must be non-negative, got {p_pilot}")));
    }
    let snr = alpha * devices as f64 * p_pilot;
    Ok(EstimationStats {
        sigma: alpha * snr / (snr + 1.0),
        delta: alpha / (snr + 1.0),
    })
}

pub fn all_stats(alphas: &[f64], p_pilot: &[f64]) -> Result<Vec<EstimationStats>> {
    let k = alphas.len();
    alphas
        .iter()
        .zip(p_pilot)
        .map(|(&a, &p)| mmse_stats(a, k, p))
        .collect()
}

pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// `M x K` matrix whose column `k` has i.i.d. `CN(0, alpha_k)` entries.
/// Entries are drawn column by column.
pub fn draw_true_channels<R: Rng + ?Sized>(rng: &mut R, alphas: &[f64], antennas: usize) -> DMatrix<Complex64> {
    let mut h = DMatrix::zeros(antennas, alphas.len());
    for (k, &alpha) in alphas.iter().enumerate() {
        for m in 0..antennas {
            h[(m, k)] = complex_normal(rng, alpha);
        }
    }
    h
}

/// Observes `h + n` with `n ~ CN(0, I / (K p))` and returns the MMSE estimate
/// and its error `(h_hat, h - h_hat)`.
pub fn simulate_pilot_estimation<R: Rng + ?Sized>(
    rng: &mut R,
    h: &DVector<Complex64>,
    alpha: f64,
    devices: usize,
    p_pilot: f64,
) -> Result<(DVector<Complex64>, DVector<Complex64>)> {
    if !(p_pilot > 0.0) {
        return Err(Error::DegeneratePilot);
    }
    let energy = devices as f64 * p_pilot;
    let gain = alpha * energy / (alpha * energy + 1.0);
    let noise_var = 1.0 / energy;
    let h_hat = h.map(|x| (x + complex_normal(rng, noise_var)) * gain);
    let h_tilde = h - &h_hat;
    Ok((h_hat, h_tilde))
}

/// One realisation of true channels, estimates and errors.
#[derive(Debug, Clone)]
pub struct ChannelDraw {
    pub h: DMatrix<Complex64>,
    pub h_hat: DMatrix<Complex64>,
    pub h_tilde: DMatrix<Complex64>,
}

pub fn draw_estimated_channels<R: Rng + ?Sized>(
    rng: &mut R,
    alphas: &[f64],
    p_pilot: &[f64],
    antennas: usize,
) -> Result<ChannelDraw> {
    let k = alphas.len();
    let h = draw_true_channels(rng, alphas, antennas);
    let mut h_hat = DMatrix::zeros(antennas, k);
    let mut h_tilde = DMatrix::zeros(antennas, k);
    for i in 0..k {
        let col = h.column(i).into_owned();
        let (est, err) = simulate_pilot_estimation(rng, &col, alphas[i], k, p_pilot[i])?;
        h_hat.set_column(i, &est);
        h_tilde.set_column(i, &err);
    }
    Ok(ChannelDraw { h, h_hat, h_tilde })
}
