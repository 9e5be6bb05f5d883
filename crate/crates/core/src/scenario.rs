//! Problem instances: system constants, per-device parameters and the JSON
//! scenario file format.
//!
//! Powers throughout the crate are in watts. The physical noise power over
//! the system bandwidth is folded into the large-scale gain `alpha`, so the
//! receiver noise has unit variance and SINR expressions need no extra
//! scaling.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::rng;

/// Path loss in dB at `distance_m` metres: `35.3 + 37.6 log10(d)`.
pub fn path_loss_db(distance_m: f64) -> Result<f64> {
    if !(distance_m > 0.0) || !distance_m.is_finite() {
        return Err(domain(format!("distance must be positive, got {distance_m}")));
    }
    Ok(35.3 + 37.6 * distance_m.log10())
}

/// Thermal noise power in dBm over `bandwidth_hz`.
pub fn noise_power_dbm(noise_psd_dbm_hz: f64, bandwidth_hz: f64) -> Result<f64> {
    if !(bandwidth_hz > 0.0) || !bandwidth_hz.is_finite() {
        return Err(domain(format!("bandwidth must be positive, got {bandwidth_hz}")));
    }
    Ok(noise_psd_dbm_hz + 10.0 * bandwidth_hz.log10())
}

/// Noise-normalized large-scale gain for a device at `distance_m`.
pub fn derive_alpha(distance_m: f64, noise_psd_dbm_hz: f64, bandwidth_hz: f64) -> Result<f64> {
    let pl = path_loss_db(distance_m)?;
    let noise_w = 10f64.powf((noise_power_dbm(noise_psd_dbm_hz, bandwidth_hz)? - 30.0) / 10.0);
    Ok(10f64.powf(-pl / 10.0) / noise_w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Base-station antennas `M`.
    pub antennas: usize,
    /// Devices `K`; also the pilot length.
    pub devices: usize,
    pub bandwidth_hz: f64,
    /// Total blocklength `L` in symbols.
    pub blocklength: usize,
    pub noise_psd_dbm_hz: f64,
}

impl SystemParams {
    pub fn pilot_len(&self) -> usize {
        self.devices
    }

    pub fn data_len(&self) -> usize {
        self.blocklength - self.devices
    }

    /// Pilot overhead `K / L`.
    pub fn beta(&self) -> f64 {
        self.devices as f64 / self.blocklength as f64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: String| Error::InvalidScenario {
            field: format!("system.{field}"),
            device: None,
            reason,
        };
        if self.devices < 1 {
            return Err(bad("K", "at least one device is required".into()));
        }
        if self.antennas < 2 {
            return Err(bad("M", format!("need M >= 2, got {}", self.antennas)));
        }
        if self.antennas <= self.devices {
            return Err(bad(
                "M",
                format!("need M > K, got M = {} and K = {}", self.antennas, self.devices),
            ));
        }
        if self.blocklength <= self.devices {
            return Err(bad(
                "blocklength",
                format!("need L > K, got L = {} and K = {}", self.blocklength, self.devices),
            ));
        }
        if !(self.bandwidth_hz > 0.0) || !self.bandwidth_hz.is_finite() {
            return Err(bad("bandwidth_hz", "must be positive".into()));
        }
        if !self.noise_psd_dbm_hz.is_finite() {
            return Err(bad("noise_psd_dbm_hz", "must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    /// Large-scale gain, noise-normalized.
    pub alpha: f64,
    pub weight: f64,
    /// Decoding error probability target.
    pub epsilon: f64,
    /// Energy budget per frame: `K p_pilot + (L - K) p_data <= energy`.
    pub energy: f64,
    /// Minimum rate in bit/s/Hz.
    pub rate_req: f64,
}

impl DeviceParams {
    pub fn validate(&self, index: usize) -> Result<()> {
        let bad = |field: &str, reason: &str| Error::InvalidScenario {
            field: field.to_string(),
            device: Some(index),
            reason: reason.to_string(),
        };
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(bad("alpha", "must be positive and finite"));
        }
        if !(0.0..=1.0).contains(&self.weight) {
            return Err(bad("weight", "must lie in [0, 1]"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(bad("epsilon", "must lie in (0, 0.5)"));
        }
        // A zero budget is accepted so that the allocator can report it as infeasible.
        if !(self.energy >= 0.0) || !self.energy.is_finite() {
            return Err(bad("energy", "must be non-negative and finite"));
        }
        if !(self.rate_req >= 0.0) || !self.rate_req.is_finite() {
            return Err(bad("rate_req", "must be non-negative and finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub system: SystemParams,
    pub devices: Vec<DeviceParams>,
    pub seed: u64,
}

impl Scenario {
    pub fn new(system: SystemParams, devices: Vec<DeviceParams>, seed: u64) -> Result<Self> {
        let s = Self { system, devices, seed };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        if self.devices.len() != self.system.devices {
            return Err(Error::InvalidScenario {
                field: "devices".into(),
                device: None,
                reason: format!(
                    "expected {} devices, found {}",
                    self.system.devices,
                    self.devices.len()
                ),
            });
        }
        for (i, d) in self.devices.iter().enumerate() {
            d.validate(i)?;
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.system.devices
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.devices.iter().map(|d| d.alpha).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.devices.iter().map(|d| d.weight).collect()
    }

    /// Returns a copy with every device's energy budget replaced.
    pub fn with_energy(&self, energy: f64) -> Self {
        let mut s = self.clone();
        s.devices.iter_mut().for_each(|d| d.energy = energy);
        s
    }

    pub fn with_rate_req(&self, rate_req: f64) -> Self {
        let mut s = self.clone();
        s.devices.iter_mut().for_each(|d| d.rate_req = rate_req);
        s
    }

    pub fn to_file(&self) -> ScenarioFile {
        ScenarioFile {
            system: SystemSection {
                m: self.system.antennas,
                k: self.system.devices,
                bandwidth_hz: self.system.bandwidth_hz,
                blocklength: self.system.blocklength,
                noise_psd_dbm_hz: self.system.noise_psd_dbm_hz,
            },
            defaults: None,
            devices: self
                .devices
                .iter()
                .map(|d| DeviceEntry {
                    distance_m: None,
                    alpha: Some(d.alpha),
                    weight: Some(d.weight),
                    epsilon: Some(d.epsilon),
                    energy: Some(d.energy),
                    rate_req: Some(d.rate_req),
                })
                .collect(),
            seed: self.seed,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("scenario serializes")
    }
}

// ---------------------------------------------------------------------------
// File format

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub bandwidth_hz: f64,
    pub blocklength: usize,
    pub noise_psd_dbm_hz: f64,
}

/// Values applied to every device that does not override them.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceDefaults {
    pub weight: Option<f64>,
    pub epsilon: Option<f64>,
    pub energy: Option<f64>,
    pub rate_req: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceEntry {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distance_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_req: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub system: SystemSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub defaults: Option<DeviceDefaults>,
    pub devices: Vec<DeviceEntry>,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioFile {
    pub fn into_scenario(self) -> Result<Scenario> {
        let system = SystemParams {
            antennas: self.system.m,
            devices: self.system.k,
            bandwidth_hz: self.system.bandwidth_hz,
            blocklength: self.system.blocklength,
            noise_psd_dbm_hz: self.system.noise_psd_dbm_hz,
        };
        system.validate()?;
        let defaults = self.defaults.unwrap_or_default();
        let missing = |field: &str, i: usize| Error::InvalidScenario {
            field: field.to_string(),
            device: Some(i),
            reason: "missing and no default given".into(),
        };
        let mut devices = Vec::with_capacity(self.devices.len());
        for (i, e) in self.devices.into_iter().enumerate() {
            let alpha = match (e.alpha, e.distance_m) {
                (Some(_), Some(_)) => {
                    return Err(Error::InvalidScenario {
                        field: "alpha".into(),
                        device: Some(i),
                        reason: "give either alpha or distance_m, not both".into(),
                    })
                }
                (Some(a), None) => a,
                (None, Some(d)) => derive_alpha(d, system.noise_psd_dbm_hz, system.bandwidth_hz)
                    .map_err(|err| Error::InvalidScenario {
                        field: "distance_m".into(),
                        device: Some(i),
                        reason: err.to_string(),
                    })?,
                (None, None) => return Err(missing("alpha", i)),
            };
            devices.push(DeviceParams {
                alpha,
                weight: e.weight.or(defaults.weight).ok_or_else(|| missing("weight", i))?,
                epsilon: e.epsilon.or(defaults.epsilon).ok_or_else(|| missing("epsilon", i))?,
                energy: e.energy.or(defaults.energy).ok_or_else(|| missing("energy", i))?,
                rate_req: e.rate_req.or(defaults.rate_req).ok_or_else(|| missing("rate_req", i))?,
            });
        }
        Scenario::new(system, devices, self.seed)
    }
}

pub fn parse_scenario(json: &str) -> Result<Scenario> {
    let file: ScenarioFile = serde_json::from_str(json)?;
    file.into_scenario()
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    parse_scenario(&std::fs::read_to_string(path)?)
}

// ---------------------------------------------------------------------------
// Random drops

/// Default cell radius for random drops.
pub const DEFAULT_CELL_RADIUS_M: f64 = 350.0;
/// Devices are never dropped closer than this to the base station.
pub const MIN_DISTANCE_M: f64 = 10.0;

/// System and per-device settings shared by all devices of a random drop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTemplate {
    pub antennas: usize,
    pub bandwidth_hz: f64,
    pub blocklength: usize,
    pub noise_psd_dbm_hz: f64,
    pub epsilon: f64,
    pub energy: f64,
    pub rate_req: f64,
    pub min_distance_m: f64,
}

impl Default for ScenarioTemplate {
    fn default() -> Self {
        Self {
            antennas: 100,
            bandwidth_hz: 0.2e6,
            blocklength: 100,
            noise_psd_dbm_hz: -174.0,
            epsilon: 1e-9,
            energy: 2.0,
            rate_req: 1.0,
            min_distance_m: MIN_DISTANCE_M,
        }
    }
}

impl ScenarioTemplate {
    /// Drops `devices` uniformly over the annulus between `min_distance_m`
    /// and `cell_radius_m`; weights are uniform on [0, 1].
    pub fn generate(&self, seed: u64, devices: usize, cell_radius_m: f64) -> Result<Scenario> {
        if devices < 1 {
            return Err(domain("at least one device is required"));
        }
        if !(cell_radius_m > self.min_distance_m) {
            return Err(domain(format!(
                "cell radius {cell_radius_m} must exceed the minimum distance {}",
                self.min_distance_m
            )));
        }
        let mut rng = rng::stream(seed, 0);
        let (r0, r1) = (self.min_distance_m.powi(2), cell_radius_m.powi(2));
        let mut out = Vec::with_capacity(devices);
        for _ in 0..devices {
            let r = (r0 + (r1 - r0) * rng.random::<f64>()).sqrt();
            let weight = rng.random::<f64>();
            out.push(DeviceParams {
                alpha: derive_alpha(r, self.noise_psd_dbm_hz, self.bandwidth_hz)?,
                weight,
                epsilon: self.epsilon,
                energy: self.energy,
                rate_req: self.rate_req,
            });
        }
        let system = SystemParams {
            antennas: self.antennas,
            devices,
            bandwidth_hz: self.bandwidth_hz,
            blocklength: self.blocklength,
            noise_psd_dbm_hz: self.noise_psd_dbm_hz,
        };
        Scenario::new(system, out, seed)
    }
}

pub fn random_scenario(seed: u64, devices: usize, cell_radius_m: f64) -> Result<Scenario> {
    ScenarioTemplate::default().generate(seed, devices, cell_radius_m)
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEFAULTS: &str = r#"{
        "system": {"M": 100, "K": 10, "bandwidth_hz": 200000.0, "blocklength": 100, "noise_psd_dbm_hz": -174.0},
        "defaults": {"epsilon": 1e-9, "energy": 2.0, "rate_req": 1.0},
        "devices": [
            {"distance_m": 50.0, "weight": 0.1}, {"distance_m": 80.0, "weight": 0.9},
            {"distance_m": 120.0, "weight": 0.5}, {"distance_m": 150.0, "weight": 0.3},
            {"distance_m": 60.0, "weight": 0.7}, {"distance_m": 200.0, "weight": 0.2},
            {"distance_m": 90.0, "weight": 0.8}, {"distance_m": 110.0, "weight": 0.4},
            {"distance_m": 170.0, "weight": 0.6}, {"distance_m": 30.0, "weight": 1.0}
        ],
        "seed": 1
    }"#;

    #[test]
    fn path_loss_values() {
        assert!((path_loss_db(100.0).unwrap() - 110.5).abs() < 1e-12);
        assert!((path_loss_db(1.0).unwrap() - 35.3).abs() < 1e-12);
        assert!((noise_power_dbm(-174.0, 2e5).unwrap() + 120.9897).abs() < 1e-4);
        assert!(path_loss_db(0.0).is_err());
        assert!(derive_alpha(10.0, -174.0, 0.0).is_err());
    }

    #[test]
    fn alpha_folds_noise_power() {
        let a = derive_alpha(100.0, -174.0, 2e5).unwrap();
        let expected = 10f64.powf(-11.05) / 10f64.powf((-174.0 + 10.0 * 2e5f64.log10() - 30.0) / 10.0);
        assert!((a / expected - 1.0).abs() < 1e-12);
    }

    #[test]
    fn alpha_strictly_decreasing_in_distance() {
        let mut prev = f64::INFINITY;
        for i in 1..500 {
            let a = derive_alpha(i as f64 * 1.7, -174.0, 2e5).unwrap();
            assert!(a < prev);
            prev = a;
        }
    }

    #[test]
    fn defaults_file_loads() {
        let s = parse_scenario(DEFAULTS).unwrap();
        assert_eq!(s.system.antennas, 100);
        assert_eq!(s.k(), 10);
        assert_eq!(s.system.blocklength, 100);
        assert!((s.system.beta() - 0.1).abs() < 1e-15);
        assert_eq!(s.system.pilot_len(), 10);
        assert_eq!(s.system.data_len(), 90);
        assert!(s.devices.iter().all(|d| d.epsilon == 1e-9 && d.energy == 2.0));
        // Energy coefficients: 10 p_pilot + 90 p_data <= E.
        assert_eq!((s.system.pilot_len(), s.system.data_len()), (10, 90));
        s.validate().unwrap();
    }

    #[test]
    fn rejects_m_equal_k() {
        let bad = DEFAULTS.replace(r#""M": 100"#, r#""M": 10"#);
        let err = parse_scenario(&bad).unwrap_err();
        assert!(err.to_string().contains("system.M"), "{err}");
    }

    #[test]
    fn rejects_large_epsilon_with_device_index() {
        let bad = DEFAULTS.replace(
            r#"{"distance_m": 120.0, "weight": 0.5}"#,
            r#"{"distance_m": 120.0, "weight": 0.5, "epsilon": 0.6}"#,
        );
        let err = parse_scenario(&bad).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("epsilon") && msg.contains("device 2"), "{msg}");
    }

    #[test]
    fn rejects_unknown_keys_and_count_mismatch() {
        let bad = DEFAULTS.replace(r#""seed": 1"#, r#""seed": 1, "colour": "red""#);
        assert!(matches!(parse_scenario(&bad), Err(Error::ScenarioParse(_))));
        let bad = DEFAULTS.replace(r#""K": 10"#, r#""K": 9"#);
        assert!(parse_scenario(&bad).is_err());
    }

    #[test]
    fn json_round_trip_preserves_scenario() {
        let s = parse_scenario(DEFAULTS).unwrap();
        let back = parse_scenario(&s.to_json()).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn random_scenarios_are_deterministic() {
        let a = random_scenario(1, 10, 100.0).unwrap();
        let b = random_scenario(1, 10, 100.0).unwrap();
        assert_eq!(a, b);
        assert!(a.devices.iter().all(|d| d.alpha > 0.0 && (0.0..=1.0).contains(&d.weight)));
    }

    #[test]
    fn different_seeds_give_different_drops() {
        let base = random_scenario(0, 10, 100.0).unwrap();
        for seed in 1..100 {
            let other = random_scenario(seed, 10, 100.0).unwrap();
            assert_ne!(base.alphas(), other.alphas(), "seed {seed}");
        }
    }
}
