//! Finite-blocklength rate mathematics.
//!
//! With `x = 1 / SINR` the normal-approximation rate is
//! `R = (1 - beta) / ln 2 * f(x, a)` where
//! `f(x, a) = ln(1 + 1/x) - a * sqrt((2x + 1) / (x + 1)^2)` and
//! `a = Q^-1(eps) / sqrt(L (1 - beta))`. `f` is non-negative exactly on
//! `(0, g^-1(a)]` with `g(x) = (x + 1) ln(1 + 1/x) / sqrt(2x + 1)`.

use std::f64::consts::{LN_2, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::chanmodel::EstimationStats;
use crate::error::{domain, Error, Result};

// Wichura, AS241 (PPND16) coefficients.
const A: [f64; 8] = [
    3.387_132_872_796_366_608_0,
    1.331_416_678_917_843_774_5e2,
    1.971_590_950_306_551_442_7e3,
    1.373_169_376_550_946_112_5e4,
    4.592_195_393_154_987_145_7e4,
    6.726_577_092_700_870_085_3e4,
    3.343_057_558_358_812_810_5e4,
    2.509_080_928_730_122_672_7e3,
];
const B: [f64; 8] = [
    1.0,
    4.231_333_070_160_091_125_2e1,
    6.871_870_074_920_579_083_0e2,
    5.394_196_021_424_751_107_7e3,
    2.121_379_430_158_659_586_7e4,
    3.930_789_580_009_271_061_0e4,
    2.872_908_573_572_194_267_4e4,
    5.226_495_278_852_854_561_0e3,
];
const C: [f64; 8] = [
    1.423_437_110_749_683_577_34,
    4.630_337_846_156_545_295_90,
    5.769_497_221_460_691_405_50,
    3.647_848_324_763_204_605_04,
    1.270_458_252_452_368_382_58,
    2.417_807_251_774_506_117_70e-1,
    2.272_384_498_926_918_458_33e-2,
    7.745_450_142_783_414_076_40e-4,
];
const D: [f64; 8] = [
    1.0,
    2.053_191_626_637_758_821_87,
    1.676_384_830_183_803_849_40,
    6.897_673_349_851_000_045_50e-1,
    1.481_039_764_274_800_745_90e-1,
    1.519_866_656_361_645_719_66e-2,
    5.475_938_084_995_344_946_00e-4,
    1.050_750_071_644_416_843_24e-9,
];
const E: [f64; 8] = [
    6.657_904_643_501_103_777_20,
    5.463_784_911_164_114_369_90,
    1.784_826_539_917_291_335_80,
    2.965_605_718_285_048_912_30e-1,
    2.653_218_952_657_612_309_30e-2,
    1.242_660_947_388_078_438_60e-3,
    2.711_555_568_743_487_578_15e-5,
    2.010_334_399_292_288_132_65e-7,
];
const F: [f64; 8] = [
    1.0,
    5.998_322_065_558_879_376_90e-1,
    1.369_298_809_227_358_053_10e-1,
    1.487_536_129_085_061_485_25e-2,
    7.868_691_311_456_132_591_00e-4,
    1.846_318_317_510_054_681_80e-5,
    1.421_511_758_316_445_888_70e-7,
    2.044_263_103_389_939_785_64e-15,
];

fn horner(c: &[f64; 8], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
}

/// Standard normal quantile `Phi^-1(p)` for `p` in (0, 1).
fn normal_quantile(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * horner(&A, r) / horner(&B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        let r = r - 1.6;
        horner(&C, r) / horner(&D, r)
    } else {
        let r = r - 5.0;
        horner(&E, r) / horner(&F, r)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// Gaussian tail probability `Q(x)`.
pub fn q_func(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// Inverse Gaussian tail: the `x` with `Q(x) = eps`, for `eps` in (0, 0.5).
pub fn q_inv(eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(domain(format!("Q^-1 needs eps in (0, 0.5), got {eps}")));
    }
    let x = -normal_quantile(eps);
    // One Newton step on Q(x) - eps; Q'(x) = -phi(x).
    let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    Ok(x + (q_func(x) - eps) / pdf)
}

/// Penalty coefficient `a = Q^-1(eps) / sqrt(L (1 - K/L))`.
pub fn a_coeff(eps: f64, blocklength: usize, devices: usize) -> Result<f64> {
    if devices < 1 || blocklength <= devices {
        return Err(domain(format!("need L > K >= 1, got L = {blocklength}, K = {devices}")));
    }
    Ok(q_inv(eps)? / ((blocklength - devices) as f64).sqrt())
}

pub fn g_eval(x: f64) -> f64 {
    (x + 1.0) * (1.0 / x).ln_1p() / (2.0 * x + 1.0).sqrt()
}

/// Bisection for a decreasing function: returns the root of `h(x) = 0` in
/// `[lo, hi]` given `h(lo) >= 0 >= h(hi)`.
fn bisect_decreasing(h: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// The unique `x > 0` with `g(x) = a`.
pub fn g_inv(a: f64) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(domain(format!("g^-1 needs a > 0, got {a}")));
    }
    let (mut lo, mut hi) = (1.0, 1.0);
    while g_eval(lo) < a {
        lo *= 0.5;
        if lo < 1e-300 {
            return Err(Error::Bracket(format!("g^-1({a}): no lower bracket")));
        }
    }
    while g_eval(hi) > a {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::Bracket(format!("g^-1({a}): no upper bracket")));
        }
    }
    Ok(bisect_decreasing(|x| g_eval(x) - a, lo, hi))
}

pub fn f_eval(x: f64, a: f64) -> f64 {
    (1.0 / x).ln_1p() - a * ((2.0 * x + 1.0) / ((x + 1.0) * (x + 1.0))).sqrt()
}

/// The unique `x` in `(0, g^-1(a)]` with `f(x, a) = c`. For `a = 0` this is
/// `1 / (e^c - 1)`, which is infinite at `c = 0`.
pub fn f_inv(c: f64, a: f64) -> Result<f64> {
    if !(c >= 0.0) {
        return Err(domain(format!("f^-1 needs c >= 0, got {c}")));
    }
    if a < 0.0 {
        return Err(domain(format!("f^-1 needs a >= 0, got {a}")));
    }
    if a == 0.0 {
        return Ok(1.0 / c.exp_m1());
    }
    let hi = g_inv(a)?;
    if c == 0.0 {
        return Ok(hi);
    }
    let mut lo = hi;
    while f_eval(lo, a) <= c {
        lo *= 0.5;
        if lo < 1e-300 {
            return Err(Error::Bracket(format!("f^-1({c}, {a}): no lower bracket")));
        }
    }
    Ok(bisect_decreasing(|x| f_eval(x, a) - c, lo, hi))
}

/// Finite-blocklength parameters of one device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FblParams {
    pub blocklength: usize,
    pub beta: f64,
    pub epsilon: f64,
    /// Penalty coefficient; zero selects the Shannon rate.
    pub a: f64,
    /// Upper edge `g^-1(a)` of the region where `f >= 0` (infinite when `a = 0`).
    pub x_max: f64,
}

impl FblParams {
    pub fn new(epsilon: f64, blocklength: usize, devices: usize) -> Result<Self> {
        let a = a_coeff(epsilon, blocklength, devices)?;
        Ok(Self {
            blocklength,
            beta: devices as f64 / blocklength as f64,
            epsilon,
            a,
            x_max: g_inv(a)?,
        })
    }

    /// Same blocklength with the dispersion penalty switched off.
    pub fn shannon(blocklength: usize, devices: usize) -> Self {
        Self {
            blocklength,
            beta: devices as f64 / blocklength as f64,
            epsilon: 0.5,
            a: 0.0,
            x_max: f64::INFINITY,
        }
    }

    /// Rate in bit/s/Hz at linear SINR `gamma`; may be negative.
    pub fn rate(&self, gamma: f64) -> f64 {
        if gamma <= 0.0 {
            return 0.0;
        }
        (1.0 - self.beta) / LN_2 * f_eval(1.0 / gamma, self.a)
    }

    /// Smallest SINR meeting `rate_req`; never below `1 / g^-1(a)`.
    pub fn sinr_threshold(&self, rate_req: f64) -> Result<f64> {
        let c = rate_req * LN_2 / (1.0 - self.beta);
        Ok(1.0 / f_inv(c, self.a)?)
    }
}

/// Normal-approximation rate in bit/s/Hz. Not clamped: small SINRs give
/// negative values.
pub fn rate_fbl(gamma: f64, beta: f64, blocklength: usize, eps: f64) -> Result<f64> {
    if !(gamma >= 0.0) {
        return Err(domain(format!("SINR must be non-negative, got {gamma}")));
    }
    let dispersion = 1.0 - (1.0 + gamma).powi(-2);
    let penalty = ((1.0 - beta) * dispersion / blocklength as f64).sqrt() * q_inv(eps)? / LN_2;
    Ok((1.0 - beta) * gamma.ln_1p() / LN_2 - penalty)
}

/// Rate lower bound from an SINR lower bound; identical to [`rate_fbl`].
pub fn rate_lb(gamma_hat: f64, beta: f64, blocklength: usize, eps: f64) -> Result<f64> {
    rate_fbl(gamma_hat, beta, blocklength, eps)
}

/// MRC SINR lower bound:
/// `p_k (M-1) sigma_k / (sum_{i != k} p_i sigma_i + sum_i p_i delta_i + 1)`.
pub fn sinr_lb_mrc(p_data: &[f64], stats: &[EstimationStats], antennas: usize) -> Result<Vec<f64>> {
    if antennas < 2 {
        return Err(domain(format!("MRC bound needs M >= 2, got {antennas}")));
    }
    check_lengths(p_data, stats)?;
    let total_sigma: f64 = p_data.iter().zip(stats).map(|(p, s)| p * s.sigma).sum();
    let total_delta: f64 = p_data.iter().zip(stats).map(|(p, s)| p * s.delta).sum();
    Ok(p_data
        .iter()
        .zip(stats)
        .map(|(&p, s)| {
            let interference = (total_sigma - p * s.sigma).max(0.0);
            p * (antennas - 1) as f64 * s.sigma / (interference + total_delta + 1.0)
        })
        .collect())
}

/// ZF SINR lower bound: `(M-K) sigma_k p_k / (sum_i p_i delta_i + 1)`.
pub fn sinr_lb_zf(p_data: &[f64], stats: &[EstimationStats], antennas: usize) -> Result<Vec<f64>> {
    let k = stats.len();
    if antennas <= k {
        return Err(domain(format!("ZF bound needs M > K, got M = {antennas}, K = {k}")));
    }
    check_lengths(p_data, stats)?;
    let total_delta: f64 = p_data.iter().zip(stats).map(|(p, s)| p * s.delta).sum();
    Ok(p_data
        .iter()
        .zip(stats)
        .map(|(&p, s)| (antennas - k) as f64 * s.sigma * p / (total_delta + 1.0))
        .collect())
}

fn check_lengths(p_data: &[f64], stats: &[EstimationStats]) -> Result<()> {
    if p_data.len() != stats.len() {
        return Err(domain(format!(
            "{} payload powers for {} devices",
            p_data.len(),
            stats.len()
        )));
    }
    Ok(())
}

/// Per-device SINR and rate lower bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinrLbReport {
    pub gamma_hat: Vec<f64>,
    pub rate_lb: Vec<f64>,
    /// `gamma_hat >= 1 / g^-1(a)`, i.e. the rate bound is non-negative.
    pub feasible: Vec<bool>,
}

impl SinrLbReport {
    pub fn new(gamma_hat: Vec<f64>, params: &[FblParams]) -> Self {
        let rate_lb = gamma_hat.iter().zip(params).map(|(&g, p)| p.rate(g)).collect();
        let feasible = gamma_hat.iter().zip(params).map(|(&g, p)| g * p.x_max >= 1.0).collect();
        Self { gamma_hat, rate_lb, feasible }
    }
}
