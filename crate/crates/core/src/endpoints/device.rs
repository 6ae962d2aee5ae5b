use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::crypto::{seal, seal_with_iv, Key128, TextEncoding};
use crate::netsim::{Datagram, IpAddr4, MacAddr, Network, NodeId};
use crate::rng::{stream, Stream};
use crate::wire::{encode_encrypted, encode_plain, BodyFraming, TelemetryMessage, VitalSigns, ACK_RESPONSE};

use super::{EndpointError, SensorModel, TransportMode, SERVER_PORT};

const TICK: u64 = 0;
const RETRY: u64 = 1 << 32;
const EPHEMERAL_BASE: u16 = 49152;

#[derive(Debug, Clone)]
pub struct DeviceConfig {
    pub device_id: String,
    pub mode: TransportMode,
    pub sample_interval_ms: u64,
    pub key: Option<Key128>,
    pub encoding: TextEncoding,
    pub framing: BodyFraming,
    pub hr_range: (u32, u32),
    /// Tenths of °F.
    pub temp_range: (u32, u32),
    pub retry_timeout_ms: u64,
    pub max_retries: u32,
    /// Readings emitted before the sensor model takes over.
    pub script: Vec<VitalSigns>,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        Self {
            device_id: "miot-01".into(),
            mode: TransportMode::Plain,
            sample_interval_ms: 2000,
            key: None,
            encoding: TextEncoding::Hex,
            framing: BodyFraming::Canonical,
            hr_range: (60, 100),
            temp_range: (970, 995),
            retry_timeout_ms: 2300,
            max_retries: 3,
            script: Vec::new(),
        }
    }
}

impl DeviceConfig {
    pub fn validate(&self) -> Result<(), EndpointError> {
        if self.sample_interval_ms == 0 {
            return Err(EndpointError::Config("sample_interval_ms must be > 0".into()));
        }
        if self.hr_range.0 > self.hr_range.1 {
            return Err(EndpointError::Config("hr_range min exceeds max".into()));
        }
        if self.temp_range.0 > self.temp_range.1 {
            return Err(EndpointError::Config("temp_range min exceeds max".into()));
        }
        if self.mode == TransportMode::Encrypted && self.key.is_none() {
            return Err(EndpointError::Config("encrypted mode requires a key".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum DeviceEvent {
    Sent { t_ms: u64, seq: u64, attempt: u32, dst_mac: MacAddr },
    Acked { t_ms: u64, seq: u64, rtt_ms: u64 },
    Recovered { t_ms: u64, seq: u64, recovery_ms: u64 },
    Lost { t_ms: u64, seq: u64 },
    Skipped { t_ms: u64, reason: String },
}

/// What one sampling tick put on the wire.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransmissionEvent {
    pub t_ms: u64,
    pub seq: u64,
    pub port: u16,
    pub dst_mac: MacAddr,
    pub vitals: VitalSigns,
    pub bytes_len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetryOutcome {
    /// Already acknowledged, or unknown port.
    Idle,
    Retransmitted { attempt: u32 },
    Lost,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SentMessage {
    pub seq: u64,
    pub vitals: VitalSigns,
    pub sent_at: u64,
}

#[derive(Debug, Clone)]
struct Outstanding {
    seq: u64,
    request: Vec<u8>,
    first_sent: u64,
    last_sent: u64,
    attempts: u32,
}

/// The emulated bedside device: samples, encodes (and optionally seals),
/// sends to the server through whatever its ARP cache says, and
/// retransmits unacknowledged requests.
pub struct Device {
    cfg: DeviceConfig,
    node: NodeId,
    server_ip: IpAddr4,
    sensor: SensorModel,
    iv_rng: ChaCha8Rng,
    limit: u64,
    ticks: u64,
    next_seq: u64,
    ident: u16,
    outstanding: BTreeMap<u16, Outstanding>,
    sent: Vec<SentMessage>,
    log: Vec<DeviceEvent>,
}

impl Device {
    pub fn new(cfg: DeviceConfig, node: NodeId, server_ip: IpAddr4, seed: u64, limit: u64) -> Result<Self, EndpointError> {
        cfg.validate()?;
        let sensor = SensorModel::new(stream(seed, Stream::Sensor), cfg.hr_range, cfg.temp_range)
            .with_script(cfg.script.iter().copied());
        Ok(Self {
            cfg,
            node,
            server_ip,
            sensor,
            iv_rng: stream(seed, Stream::Iv),
            limit,
            ticks: 0,
            next_seq: 1,
            ident: 0,
            outstanding: BTreeMap::new(),
            sent: Vec::new(),
            log: Vec::new(),
        })
    }

    pub fn node(&self) -> NodeId {
        self.node
    }

    pub fn config(&self) -> &DeviceConfig {
        &self.cfg
    }

    /// Joins the network: learns the server's MAC and schedules the first sample.
    pub fn boot(&mut self, net: &mut Network, first_tick_at: u64) {
        if let Err(e) = net.arp_resolve(self.node, self.server_ip) {
            self.log.push(DeviceEvent::Skipped {
                t_ms: net.now(),
                reason: e.to_string(),
            });
        }
        if self.limit > 0 {
            net.schedule_timer(self.node, first_tick_at, TICK);
        }
    }

    pub fn on_timer(&mut self, net: &mut Network, token: u64) -> Result<(), EndpointError> {
        if token == TICK {
            let next = net.now() + self.cfg.sample_interval_ms;
            self.device_tick(net)?;
            if self.ticks < self.limit {
                net.schedule_timer(self.node, next, TICK);
            }
        } else if token & RETRY != 0 {
            self.retry_loop(net, (token & 0xffff) as u16)?;
        }
        Ok(())
    }

    fn build_request(&mut self, vitals: VitalSigns, seq: u64) -> Vec<u8> {
        match self.cfg.mode {
            TransportMode::Plain => encode_plain(&vitals, self.server_ip),
            TransportMode::Encrypted => {
                let key = self.cfg.key.expect("validated");
                let plaintext = TelemetryMessage {
                    vitals,
                    device_id: self.cfg.device_id.clone(),
                    seq,
                }
                .to_json();
                let envelope = match self.cfg.framing {
                    BodyFraming::Canonical => seal(&key, plaintext.as_bytes(), &mut self.iv_rng),
                    BodyFraming::Fidelity(iv) => seal_with_iv(&key, iv, plaintext.as_bytes()),
                };
                encode_encrypted(&envelope, self.server_ip, self.cfg.encoding, self.cfg.framing)
            }
        }
    }

    fn transmit(&mut self, net: &mut Network, port: u16) -> Result<MacAddr, EndpointError> {
        let dst_mac = net.arp_resolve(self.node, self.server_ip)?;
        let pending = self.outstanding.get(&port).expect("outstanding request");
        self.ident = self.ident.wrapping_add(1);
        let datagram = Datagram {
            src_ip: net.host(self.node).ip,
            dst_ip: self.server_ip,
            ident: self.ident,
            src_port: port,
            dst_port: SERVER_PORT,
            payload: pending.request.clone(),
        };
        net.send_datagram(self.node, dst_mac, &datagram)?;
        net.schedule_timer(self.node, net.now() + self.cfg.retry_timeout_ms, RETRY | u64::from(port));
        Ok(dst_mac)
    }

    /// Samples once and sends. Returns `None` when the server address could
    /// not be resolved; the skip is logged.
    pub fn device_tick(&mut self, net: &mut Network) -> Result<Option<TransmissionEvent>, EndpointError> {
        self.ticks += 1;
        let vitals = self.sensor.sample_vitals();
        if let Err(e) = net.arp_resolve(self.node, self.server_ip) {
            self.log.push(DeviceEvent::Skipped {
                t_ms: net.now(),
                reason: e.to_string(),
            });
            return Ok(None);
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        let request = self.build_request(vitals, seq);
        let bytes_len = request.len();
        let port = EPHEMERAL_BASE + (seq % 16384) as u16;
        let now = net.now();
        self.outstanding.insert(
            port,
            Outstanding {
                seq,
                request,
                first_sent: now,
                last_sent: now,
                attempts: 1,
            },
        );
        let dst_mac = self.transmit(net, port)?;
        self.sent.push(SentMessage { seq, vitals, sent_at: now });
        self.log.push(DeviceEvent::Sent {
            t_ms: now,
            seq,
            attempt: 1,
            dst_mac,
        });
        Ok(Some(TransmissionEvent {
            t_ms: now,
            seq,
            port,
            dst_mac,
            vitals,
            bytes_len,
        }))
    }

    /// Retransmits an unacknowledged request, or gives up after `max_retries`.
    pub fn retry_loop(&mut self, net: &mut Network, port: u16) -> Result<RetryOutcome, EndpointError> {
        let Some(pending) = self.outstanding.get_mut(&port) else {
            return Ok(RetryOutcome::Idle);
        };
        let now = net.now();
        if pending.attempts > self.cfg.max_retries {
            let seq = pending.seq;
            self.outstanding.remove(&port);
            self.log.push(DeviceEvent::Lost { t_ms: now, seq });
            return Ok(RetryOutcome::Lost);
        }
        pending.attempts += 1;
        pending.last_sent = now;
        let (seq, attempt) = (pending.seq, pending.attempts);
        let dst_mac = self.transmit(net, port)?;
        self.log.push(DeviceEvent::Sent {
            t_ms: now,
            seq,
            attempt,
            dst_mac,
        });
        Ok(RetryOutcome::Retransmitted { attempt })
    }

    /// Handles a datagram addressed to the device (server acknowledgments).
    pub fn on_datagram(&mut self, now: u64, datagram: &Datagram) {
        if datagram.payload != ACK_RESPONSE {
            return;
        }
        let Some(done) = self.outstanding.remove(&datagram.dst_port) else {
            return;
        };
        self.log.push(DeviceEvent::Acked {
            t_ms: now,
            seq: done.seq,
            rtt_ms: now - done.last_sent,
        });
        if done.attempts > 1 {
            self.log.push(DeviceEvent::Recovered {
                t_ms: now,
                seq: done.seq,
                recovery_ms: done.last_sent - done.first_sent,
            });
        }
    }

    pub fn is_finished(&self) -> bool {
        self.ticks >= self.limit && self.outstanding.is_empty()
    }

    pub fn sent(&self) -> &[SentMessage] {
        &self.sent
    }

    pub fn log(&self) -> &[DeviceEvent] {
        &self.log
    }
}
