use std::net::Ipv4Addr;

use crate::crypto::{decode_text, encode_text, Envelope, Iv, TextEncoding};

use super::vitals::{parse_bpm, parse_tenths};
use super::{parse_http, HttpRequest, VitalSigns, WireError, OCTET_STREAM, TELEMETRY_PATH, USER_AGENT};

pub const HEART_RATE_KEY: &str = "HeartRate";
pub const TEMPERATURE_KEY: &str = "Temperature";

/// How the envelope is laid out in a POST body.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BodyFraming {
    /// `encode(IV ‖ ciphertext)`.
    Canonical,
    /// `encode(ciphertext)` only; both ends share this fixed IV. Reproduces
    /// the 64-character body of a two-block capture, at the cost of IV reuse.
    Fidelity(Iv),
}

/// Text body of an encrypted POST.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncryptedBody {
    pub encoding: TextEncoding,
    pub text: String,
}

impl EncryptedBody {
    pub fn from_envelope(envelope: &Envelope, encoding: TextEncoding, framing: BodyFraming) -> Self {
        let bytes = match framing {
            BodyFraming::Canonical => envelope.to_prefixed(),
            BodyFraming::Fidelity(_) => envelope.ciphertext().to_vec(),
        };
        Self {
            encoding,
            text: encode_text(&bytes, encoding),
        }
    }

    pub fn to_envelope(&self, framing: BodyFraming) -> Result<Envelope, WireError> {
        let bytes = decode_text(&self.text, self.encoding).map_err(|e| WireError::Body(e.to_string()))?;
        let envelope = match framing {
            BodyFraming::Canonical => Envelope::from_prefixed(&bytes),
            BodyFraming::Fidelity(iv) => Envelope::new(iv, bytes),
        };
        envelope.map_err(|e| WireError::Body(e.to_string()))
    }
}

/// Serializes a reading as the plaintext GET the device firmware sends.
pub fn encode_plain(vitals: &VitalSigns, server_ip: Ipv4Addr) -> Vec<u8> {
    format!(
        "GET {TELEMETRY_PATH}?{HEART_RATE_KEY}={}&{TEMPERATURE_KEY}={} HTTP/1.1\r\n\
         Host: {server_ip}\r\n\
         User-Agent: {USER_AGENT}\r\n\
         \r\n",
        vitals.heart_rate_bpm,
        vitals.temperature_text()
    )
    .into_bytes()
}

fn expect_target(req: &HttpRequest, method: &str) -> Result<(), WireError> {
    if req.method != method || req.path != TELEMETRY_PATH {
        return Err(WireError::WrongTarget {
            method: req.method.clone(),
            path: req.path.clone(),
        });
    }
    Ok(())
}

fn vitals_from_query(req: &HttpRequest) -> Result<VitalSigns, WireError> {
    let get = |key: &str| {
        req.query_value(key)
            .ok_or_else(|| WireError::MissingField(key.to_string()))
    };
    let hr = parse_bpm(HEART_RATE_KEY, get(HEART_RATE_KEY)?)?;
    let temp = parse_tenths(TEMPERATURE_KEY, get(TEMPERATURE_KEY)?)?;
    Ok(VitalSigns::new(hr, temp))
}

/// Extracts the reading from a plaintext GET. Query key order does not matter.
pub fn parse_plain(bytes: &[u8]) -> Result<VitalSigns, WireError> {
    let req = parse_http(bytes)?;
    expect_target(&req, "GET")?;
    vitals_from_query(&req)
}

pub fn encode_encrypted(
    envelope: &Envelope,
    server_ip: Ipv4Addr,
    encoding: TextEncoding,
    framing: BodyFraming,
) -> Vec<u8> {
    let body = EncryptedBody::from_envelope(envelope, encoding, framing);
    let mut out = format!(
        "POST {TELEMETRY_PATH} HTTP/1.1\r\n\
         Host: {server_ip}\r\n\
         Content-Type: {OCTET_STREAM}\r\n\
         Content-Length: {}\r\n\
         \r\n",
        body.text.len()
    )
    .into_bytes();
    out.extend_from_slice(body.text.as_bytes());
    out
}

/// Parses an encrypted POST down to its text body. Decoding the envelope is
/// left to the caller so decoding failures can be classified separately.
pub fn decode_encrypted_body(bytes: &[u8], encoding: TextEncoding) -> Result<EncryptedBody, WireError> {
    let req = parse_http(bytes)?;
    expect_target(&req, "POST")?;
    match req.header("Content-Type") {
        Some(ct) if ct.eq_ignore_ascii_case(OCTET_STREAM) => {}
        other => return Err(WireError::Body(format!("unexpected content type {other:?}"))),
    }
    let text = String::from_utf8(req.body).map_err(|_| WireError::Body("body is not text".into()))?;
    Ok(EncryptedBody { encoding, text })
}

/// Rewrites one query value in place. Every byte outside the value
/// substring is preserved.
pub fn tamper_query(bytes: &[u8], field: &str, new_value: &str) -> Result<Vec<u8>, WireError> {
    parse_plain(bytes)?;
    if new_value
        .bytes()
        .any(|b| matches!(b, b'&' | b'=' | b'#' | b'?') || b.is_ascii_whitespace() || b.is_ascii_control())
    {
        return Err(WireError::BadValue(new_value.to_string()));
    }
    let line_end = bytes
        .windows(2)
        .position(|w| w == b"\r\n")
        .ok_or(WireError::RequestLine)?;
    let line = &bytes[..line_end];
    let q_start = line.iter().position(|&b| b == b'?').ok_or_else(|| WireError::FieldAbsent(field.to_string()))? + 1;
    let q_end = q_start
        + line[q_start..]
            .iter()
            .position(|&b| b == b' ')
            .ok_or(WireError::RequestLine)?;

    let mut offset = q_start;
    for pair in line[q_start..q_end].split(|&b| b == b'&') {
        if let Some(eq) = pair.iter().position(|&b| b == b'=') {
            if &pair[..eq] == field.as_bytes() {
                let value_start = offset + eq + 1;
                let value_end = offset + pair.len();
                let mut out = Vec::with_capacity(bytes.len() + new_value.len());
                out.extend_from_slice(&bytes[..value_start]);
                out.extend_from_slice(new_value.as_bytes());
                out.extend_from_slice(&bytes[value_end..]);
                parse_plain(&out)?;
                return Ok(out);
            }
        }
        offset += pair.len() + 1;
    }
    Err(WireError::FieldAbsent(field.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{seal_with_iv, Key128};

    const SERVER: Ipv4Addr = Ipv4Addr::new(192, 168, 1, 100);
    const CAPTURED_GET: &[u8] =
        b"GET /data?HeartRate=78&Temperature=98.6 HTTP/1.1\r\nHost: 192.168.1.100\r\nUser-Agent: ESP8266HTTPClient\r\n\r\n";

    #[test]
    fn encode_matches_capture() {
        assert_eq!(encode_plain(&VitalSigns::new(78, 986), SERVER), CAPTURED_GET);
        assert_eq!(parse_plain(CAPTURED_GET).unwrap(), VitalSigns::new(78, 986));
    }

    #[test]
    fn zero_vitals() {
        let bytes = encode_plain(&VitalSigns::new(0, 0), SERVER);
        assert!(String::from_utf8(bytes).unwrap().contains("?HeartRate=0&Temperature=0.0 "));
    }

    #[test]
    fn reordered_query() {
        let raw = b"GET /data?Temperature=98.6&HeartRate=78 HTTP/1.1\r\nHost: 192.168.1.100\r\n\r\n";
        assert_eq!(parse_plain(raw).unwrap(), VitalSigns::new(78, 986));
    }

    #[test]
    fn parse_plain_errors() {
        let bad = b"GET /data?HeartRate=78&Temperature=abc HTTP/1.1\r\n\r\n";
        let err = parse_plain(bad).unwrap_err();
        assert!(err.to_string().starts_with("non-numeric"), "{err}");
        assert_eq!(
            parse_plain(b"GET /data?HeartRate=78 HTTP/1.1\r\n\r\n"),
            Err(WireError::MissingField("Temperature".into()))
        );
        assert!(matches!(
            parse_plain(b"GET /other?HeartRate=78&Temperature=98.6 HTTP/1.1\r\n\r\n"),
            Err(WireError::WrongTarget { .. })
        ));
        assert!(matches!(
            parse_plain(b"PUT /data?HeartRate=78&Temperature=98.6 HTTP/1.1\r\n\r\n"),
            Err(WireError::WrongTarget { .. })
        ));
    }

    fn two_block_envelope() -> Envelope {
        seal_with_iv(&Key128::new([5; 16]), Iv([9; 16]), &[b'x'; 18])
    }

    #[test]
    fn fidelity_body_is_64_hex_chars() {
        let env = two_block_envelope();
        let req = encode_encrypted(&env, SERVER, TextEncoding::Hex, BodyFraming::Fidelity(Iv([9; 16])));
        let text = String::from_utf8(req.clone()).unwrap();
        assert!(text.starts_with(
            "POST /data HTTP/1.1\r\nHost: 192.168.1.100\r\nContent-Type: application/octet-stream\r\nContent-Length: 64\r\n\r\n"
        ));
        let body = decode_encrypted_body(&req, TextEncoding::Hex).unwrap();
        assert_eq!(body.text.len(), 64);
        assert_eq!(body.to_envelope(BodyFraming::Fidelity(Iv([9; 16]))).unwrap(), env);
    }

    #[test]
    fn canonical_body_carries_iv() {
        let env = two_block_envelope();
        let req = encode_encrypted(&env, SERVER, TextEncoding::Hex, BodyFraming::Canonical);
        let parsed = parse_http(&req).unwrap();
        assert_eq!(parsed.header("content-length"), Some("96"));
        let body = decode_encrypted_body(&req, TextEncoding::Hex).unwrap();
        assert_eq!(body.to_envelope(BodyFraming::Canonical).unwrap(), env);

        let b64 = encode_encrypted(&env, SERVER, TextEncoding::Base64, BodyFraming::Canonical);
        let body = decode_encrypted_body(&b64, TextEncoding::Base64).unwrap();
        assert_eq!(body.text.len(), 64);
        assert_eq!(body.to_envelope(BodyFraming::Canonical).unwrap(), env);
    }

    #[test]
    fn encrypted_body_errors() {
        let short = EncryptedBody { encoding: TextEncoding::Hex, text: "00".repeat(20) };
        assert!(short.to_envelope(BodyFraming::Canonical).is_err());
        let odd = EncryptedBody { encoding: TextEncoding::Hex, text: "00".repeat(40) };
        assert!(odd.to_envelope(BodyFraming::Canonical).is_err());
        let bad = EncryptedBody { encoding: TextEncoding::Hex, text: "zz".repeat(48) };
        assert!(bad.to_envelope(BodyFraming::Canonical).is_err());
        assert!(matches!(
            decode_encrypted_body(CAPTURED_GET, TextEncoding::Hex),
            Err(WireError::WrongTarget { .. })
        ));
    }

    #[test]
    fn tamper_table_rows() {
        let pkt = encode_plain(&VitalSigns::new(72, 986), SERVER);
        let t = tamper_query(&pkt, "HeartRate", "180").unwrap();
        assert_eq!(parse_plain(&t).unwrap(), VitalSigns::new(180, 986));

        let pkt = encode_plain(&VitalSigns::new(68, 978), SERVER);
        let t = tamper_query(&pkt, "Temperature", "89.3").unwrap();
        assert_eq!(parse_plain(&t).unwrap(), VitalSigns::new(68, 893));
    }

    #[test]
    fn tamper_same_value_is_noop() {
        let pkt = encode_plain(&VitalSigns::new(72, 986), SERVER);
        assert_eq!(tamper_query(&pkt, "HeartRate", "72").unwrap(), pkt);
    }

    #[test]
    fn tamper_errors() {
        let pkt = encode_plain(&VitalSigns::new(72, 986), SERVER);
        assert_eq!(tamper_query(&pkt, "SpO2", "99"), Err(WireError::FieldAbsent("SpO2".into())));
        assert!(matches!(tamper_query(&pkt, "HeartRate", "1&x=2"), Err(WireError::BadValue(_))));
        assert!(tamper_query(&pkt, "HeartRate", "fast").is_err());
        assert!(tamper_query(b"POST /data HTTP/1.1\r\n\r\n", "HeartRate", "1").is_err());
    }
}
