//! Byte-exact telemetry wire formats.
//!
//! Two request shapes travel over the simulated LAN:
//!
//! ```text
//! GET /data?HeartRate=78&Temperature=98.6 HTTP/1.1
//! Host: 192.168.1.100
//! User-Agent: ESP8266HTTPClient
//!
//! POST /data HTTP/1.1
//! Host: 192.168.1.100
//! Content-Type: application/octet-stream
//! Content-Length: 96
//!
//! <hex or base64 of IV ‖ ciphertext>
//! ```
//!
//! All lines end in CRLF. The server answers every request with [`ACK_RESPONSE`].

mod http;
mod schema;
mod telemetry;
mod vitals;

use thiserror::Error;

pub use self::http::{parse_http, HttpRequest};
pub use self::schema::TelemetryMessage;
pub use self::telemetry::{
    decode_encrypted_body, encode_encrypted, encode_plain, parse_plain, tamper_query,
    BodyFraming, EncryptedBody,
};
pub use self::vitals::VitalSigns;

pub const TELEMETRY_PATH: &str = "/data";
pub const USER_AGENT: &str = "ESP8266HTTPClient";
pub const OCTET_STREAM: &str = "application/octet-stream";

/// Fixed acknowledgment the server returns for every request.
pub const ACK_RESPONSE: &[u8] = b"HTTP/1.1 200 OK\r\n\r\n";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("malformed request line")]
    RequestLine,
    #[error("bad header syntax: {0:?}")]
    Header(String),
    #[error("missing blank line after headers")]
    Unterminated,
    #[error("length mismatch: declared {declared}, body has {actual}")]
    LengthMismatch { declared: usize, actual: usize },
    #[error("unexpected request {method} {path}")]
    WrongTarget { method: String, path: String },
    #[error("missing field {0}")]
    MissingField(String),
    #[error("non-numeric value for {field}: {value:?}")]
    NonNumeric { field: String, value: String },
    #[error("field {0} not present in query")]
    FieldAbsent(String),
    #[error("replacement value {0:?} would break the request line")]
    BadValue(String),
    #[error("bad body: {0}")]
    Body(String),
    #[error("bad telemetry json: {0}")]
    Schema(String),
}
