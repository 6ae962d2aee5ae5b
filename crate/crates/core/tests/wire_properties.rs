use std::net::Ipv4Addr;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use miot_testbed::crypto::{seal, Key128, TextEncoding};
use miot_testbed::endpoints::{Detection, RequestMeta, Server, ServerConfig, TransportMode};
use miot_testbed::wire::{encode_encrypted, encode_plain, parse_plain, tamper_query, BodyFraming, TelemetryMessage, VitalSigns};

const SERVER: Ipv4Addr = Ipv4Addr::new(192, 168, 1, 100);

fn vitals() -> impl Strategy<Value = VitalSigns> {
    (0u32..400, 0u32..1500).prop_map(|(hr, t)| VitalSigns::new(hr, t))
}

fn encoding() -> impl Strategy<Value = TextEncoding> {
    prop_oneof![Just(TextEncoding::Hex), Just(TextEncoding::Base64)]
}

proptest! {
    #[test]
    fn plain_parse_inverts_encode(v in vitals(), last in 1u8..255) {
        let ip = Ipv4Addr::new(10, 0, 0, last);
        prop_assert_eq!(parse_plain(&encode_plain(&v, ip)).unwrap(), v);
    }

    #[test]
    fn heart_rate_tamper_is_local(v in vitals(), new_hr in 0u32..100_000) {
        let original = encode_plain(&v, SERVER);
        let tampered = tamper_query(&original, "HeartRate", &new_hr.to_string()).unwrap();
        let parsed = parse_plain(&tampered).unwrap();
        prop_assert_eq!(parsed.heart_rate_bpm, new_hr);
        prop_assert_eq!(parsed.temperature_tenths, v.temperature_tenths);

        let value_start = original.windows(10).position(|w| w == b"HeartRate=").unwrap() + 10;
        let value_len = v.heart_rate_bpm.to_string().len();
        prop_assert_eq!(&tampered[..value_start], &original[..value_start]);
        prop_assert_eq!(&tampered[tampered.len() - (original.len() - value_start - value_len)..], &original[value_start + value_len..]);
    }

    #[test]
    fn temperature_tamper_keeps_heart_rate(v in vitals(), tenths in 0u32..2000) {
        let value = format!("{}.{}", tenths / 10, tenths % 10);
        let tampered = tamper_query(&encode_plain(&v, SERVER), "Temperature", &value).unwrap();
        let parsed = parse_plain(&tampered).unwrap();
        prop_assert_eq!(parsed, VitalSigns::new(v.heart_rate_bpm, tenths));
    }

    #[test]
    fn sealed_request_is_accepted_verbatim(v in vitals(), seq in 1u64..1_000_000, seed: u64, enc in encoding()) {
        let key = Key128::new(*b"property-key-16b");
        let msg = TelemetryMessage { vitals: v, device_id: "miot-01".into(), seq };
        let envelope = seal(&key, msg.to_json().as_bytes(), &mut ChaCha8Rng::seed_from_u64(seed));
        let request = encode_encrypted(&envelope, SERVER, enc, BodyFraming::Canonical);
        let mut server = Server::new(ServerConfig {
            mode: TransportMode::Encrypted,
            key: Some(key),
            encoding: enc,
            ..ServerConfig::default()
        }).unwrap();
        let record = server.handle_request(&request, RequestMeta { received_at: 0, source_ip: Ipv4Addr::new(192, 168, 1, 50) });
        prop_assert!(record.verdict.is_accepted());
        prop_assert_eq!(record.detection, Detection::None);
        prop_assert_eq!(record.vitals, Some(v));
        prop_assert_eq!(record.seq, Some(seq));
    }
}
