use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};

use serde::{Serialize, Serializer};

use crate::crypto::{open, CryptoError, Key128, TextEncoding};
use crate::netsim::IpAddr4;
use crate::wire::{decode_encrypted_body, parse_plain, BodyFraming, TelemetryMessage, VitalSigns};

use super::{EndpointError, TransportMode};

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub mode: TransportMode,
    pub key: Option<Key128>,
    pub encoding: TextEncoding,
    pub framing: BodyFraming,
    /// Plausibility checks on decoded vitals. Off reproduces the original
    /// server, which accepted anything that parsed.
    pub validate_ranges: bool,
    /// Reject any Seq not strictly above the last accepted one per device.
    pub replay_defense: bool,
    pub hr_bounds: (u32, u32),
    /// Tenths of °F.
    pub temp_bounds: (u32, u32),
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            mode: TransportMode::Plain,
            key: None,
            encoding: TextEncoding::Hex,
            framing: BodyFraming::Canonical,
            validate_ranges: false,
            replay_defense: false,
            hr_bounds: (20, 250),
            temp_bounds: (850, 1100),
        }
    }
}

impl ServerConfig {
    pub fn validate(&self) -> Result<(), EndpointError> {
        if self.mode == TransportMode::Encrypted && self.key.is_none() {
            return Err(EndpointError::Config("encrypted mode requires a key".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Accepted,
    Rejected(String),
}

impl Verdict {
    pub fn is_accepted(&self) -> bool {
        matches!(self, Verdict::Accepted)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Accepted => f.write_str("Accepted"),
            Verdict::Rejected(reason) => write!(f, "Rejected: {reason}"),
        }
    }
}

impl Serialize for Verdict {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Detection {
    None,
    PaddingError,
    ParseError,
    RangeViolation,
    SeqReplay,
}

impl fmt::Display for Detection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Detection::None => "None",
            Detection::PaddingError => "PaddingError",
            Detection::ParseError => "ParseError",
            Detection::RangeViolation => "RangeViolation",
            Detection::SeqReplay => "SeqReplay",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RequestMeta {
    pub received_at: u64,
    pub source_ip: IpAddr4,
}

/// One server-side log entry. `Accepted` always carries `Detection::None`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TelemetryRecord {
    pub received_at: u64,
    pub source_ip: IpAddr4,
    pub device_id: Option<String>,
    pub seq: Option<u64>,
    pub vitals: Option<VitalSigns>,
    pub verdict: Verdict,
    pub detection: Detection,
}

#[derive(Serialize)]
struct RecordLine<'a> {
    received_at_ms: u64,
    source_ip: IpAddr4,
    device_id: Option<&'a str>,
    heart_rate_bpm: Option<u32>,
    temperature_f: Option<f64>,
    verdict: &'a Verdict,
    detection: Detection,
}

impl TelemetryRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&RecordLine {
            received_at_ms: self.received_at,
            source_ip: self.source_ip,
            device_id: self.device_id.as_deref(),
            heart_rate_bpm: self.vitals.map(|v| v.heart_rate_bpm),
            temperature_f: self.vitals.map(|v| v.temperature_f()),
            verdict: &self.verdict,
            detection: self.detection,
        })
        .expect("record serializes")
    }
}

struct Rejection {
    detection: Detection,
    reason: String,
    vitals: Option<VitalSigns>,
    decoded: Option<TelemetryMessage>,
}

impl Rejection {
    fn new(detection: Detection, reason: impl ToString) -> Self {
        Self {
            detection,
            reason: reason.to_string(),
            vitals: None,
            decoded: None,
        }
    }
}

/// Receiving server: decodes each request, classifies failures, logs everything.
pub struct Server {
    cfg: ServerConfig,
    log: Vec<TelemetryRecord>,
    last_seq: BTreeMap<String, u64>,
}

impl Server {
    pub fn new(cfg: ServerConfig) -> Result<Self, EndpointError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            log: Vec::new(),
            last_seq: BTreeMap::new(),
        })
    }

    pub fn config(&self) -> &ServerConfig {
        &self.cfg
    }

    fn in_bounds(&self, v: &VitalSigns) -> bool {
        let (hr_lo, hr_hi) = self.cfg.hr_bounds;
        let (t_lo, t_hi) = self.cfg.temp_bounds;
        (hr_lo..=hr_hi).contains(&v.heart_rate_bpm) && (t_lo..=t_hi).contains(&v.temperature_tenths)
    }

    fn open_encrypted(&self, bytes: &[u8]) -> Result<TelemetryMessage, Rejection> {
        let parse = |e: &dyn fmt::Display| Rejection::new(Detection::ParseError, e);
        let body = decode_encrypted_body(bytes, self.cfg.encoding).map_err(|e| parse(&e))?;
        let envelope = body.to_envelope(self.cfg.framing).map_err(|e| parse(&e))?;
        let key = self.cfg.key.as_ref().expect("validated");
        let plaintext = open(key, &envelope).map_err(|e| match e {
            CryptoError::Padding => Rejection::new(Detection::PaddingError, e),
            other => parse(&other),
        })?;
        TelemetryMessage::from_json(&plaintext).map_err(|e| parse(&e))
    }

    fn evaluate(&mut self, bytes: &[u8]) -> Result<(VitalSigns, Option<TelemetryMessage>), Rejection> {
        let (vitals, message) = match self.cfg.mode {
            TransportMode::Plain => (
                parse_plain(bytes).map_err(|e| Rejection::new(Detection::ParseError, e))?,
                None,
            ),
            TransportMode::Encrypted => {
                let msg = self.open_encrypted(bytes)?;
                (msg.vitals, Some(msg))
            }
        };
        let with_decoded = |mut r: Rejection| {
            r.vitals = Some(vitals);
            r.decoded = message.clone();
            r
        };
        if self.cfg.validate_ranges && !self.in_bounds(&vitals) {
            return Err(with_decoded(Rejection::new(
                Detection::RangeViolation,
                format!("implausible reading {vitals}"),
            )));
        }
        if let (true, Some(msg)) = (self.cfg.replay_defense, &message) {
            if let Some(&last) = self.last_seq.get(&msg.device_id) {
                if msg.seq <= last {
                    return Err(with_decoded(Rejection::new(
                        Detection::SeqReplay,
                        format!("seq {} not above {last}", msg.seq),
                    )));
                }
            }
            self.last_seq.insert(msg.device_id.clone(), msg.seq);
        }
        Ok((vitals, message))
    }

    /// Processes one complete request and appends the outcome to the log.
    pub fn handle_request(&mut self, bytes: &[u8], meta: RequestMeta) -> TelemetryRecord {
        let record = match self.evaluate(bytes) {
            Ok((vitals, message)) => TelemetryRecord {
                received_at: meta.received_at,
                source_ip: meta.source_ip,
                device_id: message.as_ref().map(|m| m.device_id.clone()),
                seq: message.as_ref().map(|m| m.seq),
                vitals: Some(vitals),
                verdict: Verdict::Accepted,
                detection: Detection::None,
            },
            Err(rej) => TelemetryRecord {
                received_at: meta.received_at,
                source_ip: meta.source_ip,
                device_id: rej.decoded.as_ref().map(|m| m.device_id.clone()),
                seq: rej.decoded.as_ref().map(|m| m.seq),
                vitals: rej.vitals,
                verdict: Verdict::Rejected(rej.reason),
                detection: rej.detection,
            },
        };
        self.log.push(record.clone());
        record
    }

    pub fn log(&self) -> &[TelemetryRecord] {
        &self.log
    }

    pub fn export_log<W: Write>(&self, mut out: W) -> io::Result<()> {
        for record in &self.log {
            out.write_all(record.to_json_line().as_bytes())?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}
