//! The emulated medical device and the receiving server.

mod device;
mod sensor;
mod server;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netsim::NetError;

pub use self::device::{Device, DeviceConfig, DeviceEvent, RetryOutcome, SentMessage, TransmissionEvent};
pub use self::sensor::SensorModel;
pub use self::server::{Detection, RequestMeta, Server, ServerConfig, TelemetryRecord, Verdict};

pub const SERVER_PORT: u16 = 80;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransportMode {
    #[default]
    Plain,
    Encrypted,
}

impl std::fmt::Display for TransportMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TransportMode::Plain => "plain",
            TransportMode::Encrypted => "encrypted",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EndpointError {
    #[error("endpoint config: {0}")]
    Config(String),
    #[error(transparent)]
    Net(#[from] NetError),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{seal, Iv, Key128, TextEncoding};
    use crate::netsim::{Datagram, EventKind, IpAddr4, MacAddr, NetConfig, Network};
    use crate::rng::{stream, Stream};
    use crate::wire::{encode_encrypted, encode_plain, tamper_query, BodyFraming, TelemetryMessage, VitalSigns};
    use rand::Rng;

    const KEY: Key128 = Key128::new(*b"0123456789abcdef");
    const DEVICE_IP: IpAddr4 = IpAddr4::new(192, 168, 1, 50);
    const SERVER_IP: IpAddr4 = IpAddr4::new(192, 168, 1, 100);

    fn meta() -> RequestMeta {
        RequestMeta {
            received_at: 10,
            source_ip: DEVICE_IP,
        }
    }

    fn encrypted_server(replay_defense: bool) -> Server {
        Server::new(ServerConfig {
            mode: TransportMode::Encrypted,
            key: Some(KEY),
            replay_defense,
            ..ServerConfig::default()
        })
        .unwrap()
    }

    fn sealed_request(seq: u64, seed: u64) -> Vec<u8> {
        let msg = TelemetryMessage {
            vitals: VitalSigns::new(78, 986),
            device_id: "miot-01".into(),
            seq,
        };
        let env = seal(&KEY, msg.to_json().as_bytes(), &mut stream(seed, Stream::Iv));
        encode_encrypted(&env, SERVER_IP, TextEncoding::Hex, BodyFraming::Canonical)
    }

    #[test]
    fn plain_tampered_reading_is_accepted_without_detection() {
        let mut server = Server::new(ServerConfig::default()).unwrap();
        let pkt = encode_plain(&VitalSigns::new(72, 986), SERVER_IP);
        let tampered = tamper_query(&pkt, "HeartRate", "180").unwrap();
        let rec = server.handle_request(&tampered, meta());
        assert_eq!(rec.verdict, Verdict::Accepted);
        assert_eq!(rec.detection, Detection::None);
        assert_eq!(rec.vitals, Some(VitalSigns::new(180, 986)));
        assert_eq!(server.log().len(), 1);
    }

    #[test]
    fn range_validation_extension() {
        let mut server = Server::new(ServerConfig {
            validate_ranges: true,
            ..ServerConfig::default()
        })
        .unwrap();
        let rec = server.handle_request(&encode_plain(&VitalSigns::new(300, 986), SERVER_IP), meta());
        assert_eq!(rec.detection, Detection::RangeViolation);
        assert_eq!(rec.vitals, Some(VitalSigns::new(300, 986)));
        let ok = server.handle_request(&encode_plain(&VitalSigns::new(250, 1100), SERVER_IP), meta());
        assert!(ok.verdict.is_accepted());
    }

    #[test]
    fn garbage_plain_is_parse_error() {
        let mut server = Server::new(ServerConfig::default()).unwrap();
        let rec = server.handle_request(b"GET /data?HeartRate=x&Temperature=1.0 HTTP/1.1\r\n\r\n", meta());
        assert_eq!(rec.detection, Detection::ParseError);
        assert!(!rec.verdict.is_accepted());
    }

    #[test]
    fn sealed_roundtrip_accepted() {
        let mut server = encrypted_server(false);
        let rec = server.handle_request(&sealed_request(1, 1), meta());
        assert_eq!(rec.verdict, Verdict::Accepted);
        assert_eq!(rec.vitals, Some(VitalSigns::new(78, 986)));
        assert_eq!(rec.device_id.as_deref(), Some("miot-01"));
        assert_eq!(rec.seq, Some(1));
    }

    #[test]
    fn random_single_byte_ciphertext_tampers_never_accepted() {
        let mut server = encrypted_server(false);
        let mut rng = stream(99, Stream::Attacker);
        let request = sealed_request(1, 5);
        let body_start = request.len() - 160;
        for _ in 0..10_000 {
            let mut bytes = hex::decode(&request[body_start..]).unwrap();
            let pos = rng.gen_range(16..bytes.len());
            let delta = rng.gen_range(1..=255u8);
            bytes[pos] ^= delta;
            let mut tampered = request[..body_start].to_vec();
            tampered.extend_from_slice(hex::encode(bytes).as_bytes());
            let rec = server.handle_request(&tampered, meta());
            assert!(!rec.verdict.is_accepted());
            assert!(matches!(rec.detection, Detection::PaddingError | Detection::ParseError));
        }
    }

    #[test]
    fn replay_defense() {
        let mut server = encrypted_server(true);
        let first = sealed_request(1, 1);
        assert!(server.handle_request(&first, meta()).verdict.is_accepted());
        assert_eq!(server.handle_request(&first, meta()).detection, Detection::SeqReplay);
        assert!(server.handle_request(&sealed_request(2, 2), meta()).verdict.is_accepted());
        // Without the defense a replay is accepted.
        let mut open_server = encrypted_server(false);
        assert!(open_server.handle_request(&first, meta()).verdict.is_accepted());
        assert!(open_server.handle_request(&first, meta()).verdict.is_accepted());
    }

    #[test]
    fn fidelity_framing_roundtrip() {
        let iv = Iv([4; 16]);
        let mut server = Server::new(ServerConfig {
            mode: TransportMode::Encrypted,
            key: Some(KEY),
            framing: BodyFraming::Fidelity(iv),
            ..ServerConfig::default()
        })
        .unwrap();
        let msg = TelemetryMessage {
            vitals: VitalSigns::new(70, 980),
            device_id: "d".into(),
            seq: 3,
        };
        let env = crate::crypto::seal_with_iv(&KEY, iv, msg.to_json().as_bytes());
        let req = encode_encrypted(&env, SERVER_IP, TextEncoding::Hex, BodyFraming::Fidelity(iv));
        assert!(server.handle_request(&req, meta()).verdict.is_accepted());
    }

    #[test]
    fn log_line_shape() {
        let mut server = Server::new(ServerConfig::default()).unwrap();
        server.handle_request(&encode_plain(&VitalSigns::new(78, 986), SERVER_IP), meta());
        let mut out = Vec::new();
        server.export_log(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "{\"received_at_ms\":10,\"source_ip\":\"192.168.1.50\",\"device_id\":null,\"heart_rate_bpm\":78,\
             \"temperature_f\":98.6,\"verdict\":\"Accepted\",\"detection\":\"None\"}\n"
        );
    }

    #[test]
    fn encrypted_requires_key() {
        assert!(Server::new(ServerConfig {
            mode: TransportMode::Encrypted,
            ..ServerConfig::default()
        })
        .is_err());
        let cfg = DeviceConfig {
            mode: TransportMode::Encrypted,
            ..DeviceConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert!(DeviceConfig { sample_interval_ms: 0, ..DeviceConfig::default() }.validate().is_err());
        assert!(DeviceConfig { hr_range: (90, 80), ..DeviceConfig::default() }.validate().is_err());
    }

    fn two_node_net() -> Network {
        let mut net = Network::new(NetConfig::default());
        net.add_host("device", MacAddr([2, 0, 0, 0, 0, 50]), DEVICE_IP).unwrap();
        net.add_host("server", MacAddr([2, 0, 0, 0, 0, 100]), SERVER_IP).unwrap();
        net
    }

    #[test]
    fn plain_tick_emits_captured_packet() {
        let mut net = two_node_net();
        let cfg = DeviceConfig {
            script: vec![VitalSigns::new(78, 986)],
            ..DeviceConfig::default()
        };
        let mut device = Device::new(cfg, 0, SERVER_IP, 1, 1).unwrap();
        let tx = device.device_tick(&mut net).unwrap().unwrap();
        assert_eq!(tx.dst_mac, MacAddr([2, 0, 0, 0, 0, 100]));
        assert_eq!(tx.seq, 1);
        let last = net.medium().capture().last().unwrap().clone();
        let datagram = Datagram::decode(&last.payload()).unwrap();
        assert_eq!(datagram.payload, encode_plain(&VitalSigns::new(78, 986), SERVER_IP));
    }

    #[test]
    fn encrypted_tick_hides_field_names() {
        let mut net = two_node_net();
        let cfg = DeviceConfig {
            mode: TransportMode::Encrypted,
            key: Some(KEY),
            ..DeviceConfig::default()
        };
        let mut device = Device::new(cfg, 0, SERVER_IP, 1, 1).unwrap();
        device.device_tick(&mut net).unwrap().unwrap();
        let payload = net.medium().capture().last().unwrap().payload();
        assert!(!payload.windows(9).any(|w| w == b"HeartRate"));
    }

    #[test]
    fn unresolvable_server_skips_transmission() {
        let mut net = two_node_net();
        let mut device = Device::new(DeviceConfig::default(), 0, IpAddr4::new(192, 168, 1, 200), 1, 1).unwrap();
        assert_eq!(device.device_tick(&mut net).unwrap(), None);
        assert!(matches!(device.log().last(), Some(DeviceEvent::Skipped { .. })));
        assert!(device.sent().is_empty());
    }

    fn ack_for(port: u16) -> Datagram {
        Datagram {
            src_ip: SERVER_IP,
            dst_ip: DEVICE_IP,
            ident: 0,
            src_port: SERVER_PORT,
            dst_port: port,
            payload: crate::wire::ACK_RESPONSE.to_vec(),
        }
    }

    /// Drains the network, answering nothing, and returns retry timer tokens.
    fn fire_next_timer(net: &mut Network) -> u64 {
        loop {
            match net.step().unwrap().expect("timer pending").kind {
                EventKind::Timer { token, .. } => return token,
                EventKind::Deliver { .. } => continue,
            }
        }
    }

    #[test]
    fn drop_then_success_recovers_after_timeout() {
        let mut net = two_node_net();
        let mut device = Device::new(DeviceConfig::default(), 0, SERVER_IP, 1, 1).unwrap();
        let tx = device.device_tick(&mut net).unwrap().unwrap();
        // First attempt unanswered: the retry timer fires at +2300.
        let token = fire_next_timer(&mut net);
        device.on_timer(&mut net, token).unwrap();
        assert_eq!(net.now(), tx.t_ms + 2300);
        device.on_datagram(net.now() + 2, &ack_for(tx.port));
        let recovered = device
            .log()
            .iter()
            .find_map(|e| match e {
                DeviceEvent::Recovered { recovery_ms, .. } => Some(*recovery_ms),
                _ => None,
            })
            .unwrap();
        assert_eq!(recovered, 2300);
        assert!(device.is_finished());
    }

    #[test]
    fn acked_first_try_has_no_recovery() {
        let mut net = two_node_net();
        let mut device = Device::new(DeviceConfig::default(), 0, SERVER_IP, 1, 1).unwrap();
        let tx = device.device_tick(&mut net).unwrap().unwrap();
        device.on_datagram(tx.t_ms + 2, &ack_for(tx.port));
        assert!(!device.log().iter().any(|e| matches!(e, DeviceEvent::Recovered { .. })));
        assert_eq!(device.retry_loop(&mut net, tx.port).unwrap(), RetryOutcome::Idle);
    }

    #[test]
    fn exhausted_retries_lose_message() {
        let mut net = two_node_net();
        let cfg = DeviceConfig {
            max_retries: 2,
            ..DeviceConfig::default()
        };
        let mut device = Device::new(cfg, 0, SERVER_IP, 1, 1).unwrap();
        let tx = device.device_tick(&mut net).unwrap().unwrap();
        assert_eq!(device.retry_loop(&mut net, tx.port).unwrap(), RetryOutcome::Retransmitted { attempt: 2 });
        assert_eq!(device.retry_loop(&mut net, tx.port).unwrap(), RetryOutcome::Retransmitted { attempt: 3 });
        assert_eq!(device.retry_loop(&mut net, tx.port).unwrap(), RetryOutcome::Lost);
        assert!(matches!(device.log().last(), Some(DeviceEvent::Lost { seq: 1, .. })));
        assert!(device.is_finished());
    }
}
