use std::io::{self, BufRead, Write};
use std::net::Ipv4Addr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::crypto::{seal, seal_with_iv, Key128, TextEncoding};
use crate::endpoints::{SensorModel, TransportMode};
use crate::rng::{stream, Stream};
use crate::wire::{encode_encrypted, encode_plain, BodyFraming, TelemetryMessage};

use super::{draw_latency, latency_stats, BenchError, BenchPreset, LatencyStats, PerMode, ResourcePreset};

/// Workload a benchmark replays in both modes.
#[derive(Debug, Clone)]
pub struct BenchParams {
    pub seed: u64,
    pub messages: u64,
    pub device_id: String,
    pub server_ip: Ipv4Addr,
    pub hr_range: (u32, u32),
    pub temp_range: (u32, u32),
    pub key: Key128,
    pub encoding: TextEncoding,
    pub framing: BodyFraming,
}

impl BenchParams {
    pub fn new(seed: u64, messages: u64) -> Self {
        Self {
            seed,
            messages,
            device_id: "miot-01".into(),
            server_ip: Ipv4Addr::new(192, 168, 1, 100),
            hr_range: (60, 100),
            temp_range: (970, 995),
            key: Key128::new(*b"miot-bench-key16"),
            encoding: TextEncoding::Hex,
            framing: BodyFraming::Canonical,
        }
    }
}

/// One message of a benchmark run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencySample {
    pub mode: TransportMode,
    pub seq: u64,
    /// Latency of the transmission that got through; `None` when lost.
    pub latency_ms: Option<f64>,
    /// Every attempt was dropped.
    pub dropped: bool,
    /// First send to the retransmission that got through, when one was needed.
    pub recovery_ms: Option<f64>,
    pub attempts: u32,
    /// The message opened a long reporting gap (counted against stability).
    pub long_gap: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeSummary {
    pub latency: Option<LatencyStats>,
    pub messages: u64,
    pub transmissions: u64,
    pub delivered_transmissions: u64,
    pub lost_messages: u64,
    /// Delivered transmissions over all transmissions.
    pub success_rate: f64,
    pub mean_recovery_ms: Option<f64>,
    pub recoveries: u64,
    /// 1 - long gaps / messages.
    pub stability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub messages: u64,
    pub plain: Option<ModeSummary>,
    pub encrypted: Option<ModeSummary>,
    pub resources: PerMode<ResourcePreset>,
}

impl BenchReport {
    pub fn mode(&self, mode: TransportMode) -> Option<&ModeSummary> {
        match mode {
            TransportMode::Plain => self.plain.as_ref(),
            TransportMode::Encrypted => self.encrypted.as_ref(),
        }
    }

    /// (encrypted - plain) / plain in percent.
    pub fn latency_increase_pct(&self) -> Option<f64> {
        let plain = self.plain.as_ref()?.latency?;
        let enc = self.encrypted.as_ref()?.latency?;
        Some(pct_increase(plain.mean, enc.mean))
    }
}

pub fn pct_increase(base: f64, new: f64) -> f64 {
    (new - base) / base * 100.0
}

fn request_shape(
    params: &BenchParams,
    mode: TransportMode,
    msg: &TelemetryMessage,
    iv_rng: &mut impl rand::RngCore,
) -> (usize, usize) {
    match mode {
        TransportMode::Plain => (encode_plain(&msg.vitals, params.server_ip).len(), 0),
        TransportMode::Encrypted => {
            let plaintext = msg.to_json();
            let envelope = match params.framing {
                BodyFraming::Canonical => seal(&params.key, plaintext.as_bytes(), iv_rng),
                BodyFraming::Fidelity(iv) => seal_with_iv(&params.key, iv, plaintext.as_bytes()),
            };
            let request = encode_encrypted(&envelope, params.server_ip, params.encoding, params.framing);
            (request.len(), envelope.block_count())
        }
    }
}

/// Replays `params.messages` readings through the cost and loss model of
/// one mode. Both modes see the same readings and the same network draws.
pub fn run_mode(preset: &BenchPreset, params: &BenchParams, mode: TransportMode) -> Vec<LatencySample> {
    let model = preset.latency.get(mode);
    let p_drop = *preset.loss.get(mode);
    let retry = *preset.retry.get(mode);
    let gap_rate = *preset.long_gap_rate.get(mode);
    let mut sensor = SensorModel::new(stream(params.seed, Stream::Sensor), params.hr_range, params.temp_range);
    let mut iv_rng = stream(params.seed, Stream::Iv);
    let mut net_rng = stream(params.seed, Stream::BenchNetwork);
    let mut loss_rng = stream(params.seed, Stream::BenchLoss);
    let mut gap_rng = stream(params.seed, Stream::BenchGap);

    (1..=params.messages)
        .map(|seq| {
            let msg = TelemetryMessage {
                vitals: sensor.sample_vitals(),
                device_id: params.device_id.clone(),
                seq,
            };
            let (bytes, blocks) = request_shape(params, mode, &msg, &mut iv_rng);
            let latency = draw_latency(model, bytes, blocks, &mut net_rng);
            let mut attempts = 0;
            let delivered = loop {
                attempts += 1;
                if !loss_rng.gen_bool(p_drop) {
                    break true;
                }
                if attempts > retry.max_retries {
                    break false;
                }
            };
            let long_gap = gap_rng.gen_bool(gap_rate) || !delivered;
            LatencySample {
                mode,
                seq,
                latency_ms: delivered.then_some(latency),
                dropped: !delivered,
                recovery_ms: (delivered && attempts > 1)
                    .then(|| f64::from(attempts - 1) * retry.timeout_ms as f64),
                attempts,
                long_gap,
            }
        })
        .collect()
}

pub fn summarize(samples: &[LatencySample]) -> Option<ModeSummary> {
    if samples.is_empty() {
        return None;
    }
    let latencies: Vec<f64> = samples.iter().filter_map(|s| s.latency_ms).collect();
    let recoveries: Vec<f64> = samples.iter().filter_map(|s| s.recovery_ms).collect();
    let transmissions: u64 = samples.iter().map(|s| u64::from(s.attempts)).sum();
    let delivered = samples.iter().filter(|s| !s.dropped).count() as u64;
    let gaps = samples.iter().filter(|s| s.long_gap).count() as f64;
    let messages = samples.len() as u64;
    Some(ModeSummary {
        latency: latency_stats(&latencies).ok(),
        messages,
        transmissions,
        delivered_transmissions: delivered,
        lost_messages: messages - delivered,
        success_rate: delivered as f64 / transmissions as f64,
        mean_recovery_ms: (!recoveries.is_empty()).then(|| recoveries.iter().sum::<f64>() / recoveries.len() as f64),
        recoveries: recoveries.len() as u64,
        stability: 1.0 - gaps / messages as f64,
    })
}

/// Builds a report from raw samples of either or both modes.
pub fn report_from_samples(samples: &[LatencySample], preset: &BenchPreset) -> BenchReport {
    let of = |mode| samples.iter().filter(|s| s.mode == mode).cloned().collect::<Vec<_>>();
    let (plain, encrypted) = (of(TransportMode::Plain), of(TransportMode::Encrypted));
    BenchReport {
        messages: plain.len().max(encrypted.len()) as u64,
        plain: summarize(&plain),
        encrypted: summarize(&encrypted),
        resources: preset.resources,
    }
}

/// Paired plain and encrypted runs with the same seed.
pub fn run_bench(preset: &BenchPreset, params: &BenchParams) -> Result<(BenchReport, Vec<LatencySample>), BenchError> {
    if params.messages == 0 {
        return Err(BenchError::Config("messages must be > 0".into()));
    }
    preset.validate()?;
    let mut samples = run_mode(preset, params, TransportMode::Plain);
    samples.extend(run_mode(preset, params, TransportMode::Encrypted));
    Ok((report_from_samples(&samples, preset), samples))
}

pub fn write_samples<W: Write>(samples: &[LatencySample], mut out: W) -> io::Result<()> {
    for s in samples {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_samples<R: BufRead>(input: R) -> Result<Vec<LatencySample>, BenchError> {
    let mut samples = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| BenchError::Samples(format!("line {}: {e}", i + 1)))?;
        if line.trim().is_empty() {
            continue;
        }
        samples.push(serde_json::from_str(&line).map_err(|e| BenchError::Samples(format!("line {}: {e}", i + 1)))?);
    }
    Ok(samples)
}
