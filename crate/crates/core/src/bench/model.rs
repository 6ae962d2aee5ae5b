use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::endpoints::TransportMode;

use super::BenchError;

/// One value per transport mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerMode<T> {
    pub plain: T,
    pub encrypted: T,
}

impl<T> PerMode<T> {
    pub fn get(&self, mode: TransportMode) -> &T {
        match mode {
            TransportMode::Plain => &self.plain,
            TransportMode::Encrypted => &self.encrypted,
        }
    }
}

/// Network delay between the device and the server.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum NetworkDelay {
    Fixed { ms: f64 },
    /// Normal distribution with negative draws rejected and redrawn.
    TruncatedNormal { mean_ms: f64, sd_ms: f64 },
}

impl NetworkDelay {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            NetworkDelay::Fixed { ms } => ms,
            NetworkDelay::TruncatedNormal { mean_ms, sd_ms } => {
                let normal = Normal::new(mean_ms, sd_ms).expect("validated sd");
                loop {
                    let x = normal.sample(rng);
                    if x >= 0.0 {
                        return x;
                    }
                }
            }
        }
    }

    fn validate(&self) -> Result<(), String> {
        match *self {
            NetworkDelay::Fixed { ms } if ms >= 0.0 => Ok(()),
            NetworkDelay::TruncatedNormal { mean_ms, sd_ms } if sd_ms >= 0.0 && sd_ms.is_finite() && mean_ms.is_finite() => {
                if mean_ms <= 0.0 && sd_ms == 0.0 {
                    Err("truncated normal with no mass above 0".into())
                } else {
                    Ok(())
                }
            }
            _ => Err("network delay parameters out of range".into()),
        }
    }
}

/// Cost components of one end-to-end transmission, in milliseconds, from
/// sensor read to server reception.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyModel {
    pub sensor_read_ms: f64,
    pub serialize_ms: f64,
    pub crypto_per_block_ms: f64,
    pub per_byte_ms: f64,
    pub server_ms: f64,
    pub network: NetworkDelay,
}

impl LatencyModel {
    pub fn zero() -> Self {
        Self {
            sensor_read_ms: 0.0,
            serialize_ms: 0.0,
            crypto_per_block_ms: 0.0,
            per_byte_ms: 0.0,
            server_ms: 0.0,
            network: NetworkDelay::Fixed { ms: 0.0 },
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let costs = [
            ("sensor_read_ms", self.sensor_read_ms),
            ("serialize_ms", self.serialize_ms),
            ("crypto_per_block_ms", self.crypto_per_block_ms),
            ("per_byte_ms", self.per_byte_ms),
            ("server_ms", self.server_ms),
        ];
        for (name, v) in costs {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(BenchError::Preset(format!("{name} must be a finite cost >= 0")));
            }
        }
        self.network.validate().map_err(BenchError::Preset)
    }
}

/// Latency of one delivered transmission of `bytes` request bytes whose
/// envelope holds `blocks` cipher blocks (0 for plaintext).
pub fn draw_latency<R: Rng + ?Sized>(model: &LatencyModel, bytes: usize, blocks: usize, rng: &mut R) -> f64 {
    model.sensor_read_ms
        + model.serialize_ms
        + model.crypto_per_block_ms * blocks as f64
        + model.per_byte_ms * bytes as f64
        + model.network.sample(rng)
        + model.server_ms
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetryPolicy {
    pub timeout_ms: u64,
    pub max_retries: u32,
}

/// Static resource figures echoed into reports. They are not computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourcePreset {
    pub cpu_pct: f64,
    pub memory_kb: f64,
    pub flash_kb: f64,
    pub power_ma: f64,
}

/// Complete benchmark calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchPreset {
    pub latency: PerMode<LatencyModel>,
    /// Per-transmission drop probability.
    pub loss: PerMode<f64>,
    pub retry: PerMode<RetryPolicy>,
    /// Per-message probability of a long reporting gap.
    pub long_gap_rate: PerMode<f64>,
    pub resources: PerMode<ResourcePreset>,
}

const PAPER_PRESET: &str = include_str!("../../presets/paper.json");

impl BenchPreset {
    /// The bundled calibration reproducing the published performance tables.
    pub fn paper() -> Self {
        serde_json::from_str(PAPER_PRESET).expect("bundled preset parses")
    }

    pub fn named(name: &str) -> Result<Self, BenchError> {
        match name {
            "paper" => Ok(Self::paper()),
            other => Err(BenchError::Preset(format!("unknown preset {other:?}"))),
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        self.latency.plain.validate()?;
        self.latency.encrypted.validate()?;
        for (name, p) in [
            ("loss.plain", self.loss.plain),
            ("loss.encrypted", self.loss.encrypted),
            ("long_gap_rate.plain", self.long_gap_rate.plain),
            ("long_gap_rate.encrypted", self.long_gap_rate.encrypted),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(BenchError::Preset(format!("{name} must lie in [0, 1]")));
            }
        }
        if self.loss.plain >= 1.0 || self.loss.encrypted >= 1.0 {
            return Err(BenchError::Preset("loss of 1 never delivers".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    #[test]
    fn zero_model_is_zero() {
        let mut rng = stream(1, Stream::BenchNetwork);
        assert_eq!(draw_latency(&LatencyModel::zero(), 265, 4, &mut rng), 0.0);
    }

    #[test]
    fn additive_in_blocks() {
        let model = LatencyModel {
            crypto_per_block_ms: 7.5,
            network: NetworkDelay::Fixed { ms: 50.0 },
            ..LatencyModel::zero()
        };
        let mut rng = stream(1, Stream::BenchNetwork);
        let two = draw_latency(&model, 100, 2, &mut rng);
        let four = draw_latency(&model, 100, 4, &mut rng);
        assert_eq!(four - two, 7.5 * 2.0);
    }

    #[test]
    fn truncated_normal_never_negative() {
        let delay = NetworkDelay::TruncatedNormal { mean_ms: 1.0, sd_ms: 5.0 };
        let mut rng = stream(2, Stream::BenchNetwork);
        assert!((0..10_000).all(|_| delay.sample(&mut rng) >= 0.0));
    }

    #[test]
    fn paper_preset_loads_and_validates() {
        let p = BenchPreset::paper();
        p.validate().unwrap();
        assert_eq!(p.loss.plain, 0.015);
        assert_eq!(p.retry.encrypted.timeout_ms, 2600);
        assert_eq!(p.resources.encrypted.memory_kb, 32.1);
        assert!(BenchPreset::named("fast").is_err());
    }

    #[test]
    fn negative_cost_rejected() {
        let mut p = BenchPreset::paper();
        p.latency.plain.server_ms = -1.0;
        assert!(p.validate().is_err());
    }
}
