//! Scenario configuration, read from TOML.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

const MAX_SUBCARRIERS: usize = 4096;
const MAX_USERS: usize = 512;
const MAX_ANTENNAS: usize = 16;
const MAX_HORIZON: u64 = 100_000_000;
/// Above this value of `δ·f_d` the channel is no longer slowly varying.
pub const DOPPLER_WARNING: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Regret,
    Tracking,
    StaticMac,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Axl,
    Uniform,
    Randomized,
    Iwf,
    Swf,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Axl => "axl",
            PolicyKind::Uniform => "uniform",
            PolicyKind::Randomized => "randomized",
            PolicyKind::Iwf => "iwf",
            PolicyKind::Swf => "swf",
        }
    }
}

/// A fixed value or an inclusive `[min, max]` range sampled per user.
#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Spread<T> {
    Fixed(T),
    Range([T; 2]),
}

impl<T: Copy + PartialOrd> Spread<T> {
    pub fn bounds(&self) -> (T, T) {
        match *self {
            Spread::Fixed(v) => (v, v),
            Spread::Range([a, b]) => (a, b),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum CapSpec {
    Uniform(f64),
    PerCarrier(Vec<f64>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    #[default]
    None,
    BoundedUniform,
    TruncatedGaussian,
}

#[derive(Clone, Debug, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModelConfig {
    #[serde(default)]
    pub kind: NoiseKind,
    /// Absolute magnitude.
    pub sigma: Option<f64>,
    /// Magnitude as a fraction of `‖M_k‖`.
    pub relative_level: Option<f64>,
}

/// Forbidden transmit directions `U_k` of one secondary user.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NullShapingSpec {
    pub user: usize,
    /// Carriers the constraint applies to; all of them when omitted.
    pub carriers: Option<Vec<usize>>,
    /// Columns of `U_k`, each a list of `[re, im]` antenna weights.
    pub directions: Vec<Vec<[f64; 2]>>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub kind: ExperimentKind,
    pub policy: PolicyKind,
    pub subcarriers: usize,
    pub num_pu: usize,
    pub num_su: usize,
    pub tx_antennas: Spread<usize>,
    pub rx_antennas: usize,
    pub pu_tx_antennas: usize,
    /// Contiguous carriers licensed to each primary user; defaults to a
    /// quarter of the band per user, packed from carrier 0.
    pub pu_band_width: Option<usize>,
    pub carrier_frequency: f64,
    pub epoch_duration: f64,
    /// Transmitter speed in m/s.
    pub user_speed: Spread<f64>,
    pub pu_arrival_rate: f64,
    pub pu_departure_rate: f64,
    pub noise_power: f64,
    /// Per-carrier transmit power of an active primary user.
    pub pu_power: f64,
    /// Amplitude gain of secondary-to-secondary interfering links.
    pub cross_gain: f64,
    pub total_power: f64,
    pub carrier_caps: Option<CapSpec>,
    pub null_shaping: Vec<NullShapingSpec>,
    pub noise_model: NoiseModelConfig,
    pub eta: f64,
    pub randomized_discount: f64,
    pub correlated_subcarriers: bool,
    pub rng_seed: u64,
    pub horizon: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::Regret,
            policy: PolicyKind::Axl,
            subcarriers: 8,
            num_pu: 2,
            num_su: 4,
            tx_antennas: Spread::Fixed(2),
            rx_antennas: 2,
            pu_tx_antennas: 2,
            pu_band_width: None,
            carrier_frequency: 2e9,
            epoch_duration: 5e-3,
            user_speed: Spread::Range([3.0 / 3.6, 5.0 / 3.6]),
            pu_arrival_rate: 1.0,
            pu_departure_rate: 1.0,
            noise_power: 0.1,
            pu_power: 1.0,
            cross_gain: 0.3,
            total_power: 1.0,
            carrier_caps: None,
            null_shaping: Vec::new(),
            noise_model: NoiseModelConfig::default(),
            eta: 1.0,
            randomized_discount: 0.9,
            correlated_subcarriers: false,
            rng_seed: 0,
            horizon: 5000,
        }
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be positive and finite, got {v}")))
    }
}

fn non_negative(field: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be non-negative and finite, got {v}")))
    }
}

fn count(field: &str, v: usize, lo: usize, hi: usize) -> Result<()> {
    if (lo..=hi).contains(&v) {
        Ok(())
    } else {
        Err(Error::config(field, format!("must lie in [{lo}, {hi}], got {v}")))
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| {
            let field = e
                .span()
                .map(|s| format!("byte {}..{}", s.start, s.end))
                .unwrap_or_else(|| "<document>".into());
            Error::config(field, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Band licensed to each primary user, in carriers.
    pub fn pu_band(&self) -> usize {
        self.pu_band_width
            .unwrap_or_else(|| (self.subcarriers / 4).max(1))
            .min(self.subcarriers)
    }

    pub fn caps(&self) -> Vec<f64> {
        match &self.carrier_caps {
            None => vec![self.total_power; self.subcarriers],
            Some(CapSpec::Uniform(c)) => vec![*c; self.subcarriers],
            Some(CapSpec::PerCarrier(v)) => v.clone(),
        }
    }

    /// Largest `δ·f_d` over all configured speeds.
    pub fn max_normalized_doppler(&self) -> f64 {
        let (_, vmax) = self.user_speed.bounds();
        vmax * self.carrier_frequency / SPEED_OF_LIGHT * self.epoch_duration
    }

    /// Non-fatal diagnostics.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let fd = self.max_normalized_doppler();
        if fd > DOPPLER_WARNING {
            out.push(format!(
                "normalized Doppler δ·f_d = {fd:.3} exceeds {DOPPLER_WARNING}; channels change substantially within one epoch"
            ));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        count("subcarriers", self.subcarriers, 1, MAX_SUBCARRIERS)?;
        count("num_su", self.num_su, 1, MAX_USERS)?;
        count("num_pu", self.num_pu, 0, MAX_USERS)?;
        let (mlo, mhi) = self.tx_antennas.bounds();
        count("tx_antennas", mlo, 1, MAX_ANTENNAS)?;
        count("tx_antennas", mhi, mlo, MAX_ANTENNAS)?;
        count("rx_antennas", self.rx_antennas, 1, MAX_ANTENNAS)?;
        count("pu_tx_antennas", self.pu_tx_antennas, 1, MAX_ANTENNAS)?;
        if let Some(w) = self.pu_band_width {
            count("pu_band_width", w, 1, self.subcarriers)?;
        }
        positive("carrier_frequency", self.carrier_frequency)?;
        positive("epoch_duration", self.epoch_duration)?;
        let (vlo, vhi) = self.user_speed.bounds();
        non_negative("user_speed", vlo)?;
        non_negative("user_speed", vhi)?;
        if vhi < vlo {
            return Err(Error::config("user_speed", "range is reversed"));
        }
        positive("pu_arrival_rate", self.pu_arrival_rate)?;
        positive("pu_departure_rate", self.pu_departure_rate)?;
        positive("noise_power", self.noise_power)?;
        positive("pu_power", self.pu_power)?;
        non_negative("cross_gain", self.cross_gain)?;
        positive("total_power", self.total_power)?;
        positive("eta", self.eta)?;
        if !(0.0..=1.0).contains(&self.randomized_discount) {
            return Err(Error::config(
                "randomized_discount",
                format!("must lie in [0, 1], got {}", self.randomized_discount),
            ));
        }
        if self.horizon > MAX_HORIZON {
            return Err(Error::config(
                "horizon",
                format!("at most {MAX_HORIZON} epochs, got {}", self.horizon),
            ));
        }
        let caps = self.caps();
        if caps.len() != self.subcarriers {
            return Err(Error::config(
                "carrier_caps",
                format!("{} caps for {} subcarriers", caps.len(), self.subcarriers),
            ));
        }
        for &c in &caps {
            positive("carrier_caps", c)?;
        }
        let cap_sum: f64 = caps.iter().sum();
        if self.total_power > cap_sum * (1.0 + 1e-12) {
            return Err(Error::config(
                "carrier_caps",
                format!("caps sum to {cap_sum}, below total_power {}", self.total_power),
            ));
        }
        self.validate_noise()?;
        for (i, ns) in self.null_shaping.iter().enumerate() {
            let field = format!("null_shaping[{i}]");
            if ns.user >= self.num_su {
                return Err(Error::config(field, format!("user {} out of range", ns.user)));
            }
            if let Some(cs) = &ns.carriers {
                if let Some(&k) = cs.iter().find(|&&k| k >= self.subcarriers) {
                    return Err(Error::config(field, format!("carrier {k} out of range")));
                }
            }
            if ns.directions.is_empty() {
                return Err(Error::config(field, "needs at least one direction"));
            }
            if ns
                .directions
                .iter()
                .flatten()
                .any(|z| !z[0].is_finite() || !z[1].is_finite())
            {
                return Err(Error::config(field, "directions must be finite"));
            }
        }
        Ok(())
    }

    fn validate_noise(&self) -> Result<()> {
        let nm = &self.noise_model;
        match nm.kind {
            NoiseKind::None => Ok(()),
            _ => match (nm.sigma, nm.relative_level) {
                (Some(s), None) => non_negative("noise_model.sigma", s),
                (None, Some(r)) => non_negative("noise_model.relative_level", r),
                _ => Err(Error::config(
                    "noise_model",
                    "exactly one of `sigma` and `relative_level` must be set",
                )),
            },
        }
    }
}
