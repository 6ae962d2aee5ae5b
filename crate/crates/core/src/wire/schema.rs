use serde::Deserialize;

use super::vitals::format_tenths;
use super::{VitalSigns, WireError};

/// JSON plaintext sealed inside an encrypted request:
/// `{"HeartRate":78,"Temperature":98.6,"Id":"miot-01","Seq":1}`.
///
/// Key order is fixed and there is no whitespace, so serialization is a
/// function of the fields alone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TelemetryMessage {
    pub vitals: VitalSigns,
    pub device_id: String,
    pub seq: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Repr {
    #[serde(rename = "HeartRate")]
    heart_rate: u32,
    #[serde(rename = "Temperature")]
    temperature: f64,
    #[serde(rename = "Id")]
    id: String,
    #[serde(rename = "Seq")]
    seq: u64,
}

impl TelemetryMessage {
    pub fn to_json(&self) -> String {
        let id = serde_json::to_string(&self.device_id).expect("string serialization");
        format!(
            r#"{{"HeartRate":{},"Temperature":{},"Id":{},"Seq":{}}}"#,
            self.vitals.heart_rate_bpm,
            format_tenths(self.vitals.temperature_tenths),
            id,
            self.seq
        )
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, WireError> {
        let repr: Repr = serde_json::from_slice(bytes).map_err(|e| WireError::Schema(e.to_string()))?;
        let tenths = repr.temperature * 10.0;
        if !(0.0..=f64::from(u32::MAX)).contains(&tenths) || (tenths - tenths.round()).abs() > 1e-6 {
            return Err(WireError::Schema(format!(
                "Temperature {} is not a one-decimal value",
                repr.temperature
            )));
        }
        Ok(Self {
            vitals: VitalSigns::new(repr.heart_rate, tenths.round() as u32),
            device_id: repr.id,
            seq: repr.seq,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn canonical_layout() {
        let msg = TelemetryMessage {
            vitals: VitalSigns::new(78, 986),
            device_id: "miot-01".into(),
            seq: 1,
        };
        let json = msg.to_json();
        assert_eq!(json, r#"{"HeartRate":78,"Temperature":98.6,"Id":"miot-01","Seq":1}"#);
        assert_eq!(json.len(), 58);
        assert_eq!(TelemetryMessage::from_json(json.as_bytes()).unwrap(), msg);
    }

    #[test]
    fn id_is_escaped() {
        let msg = TelemetryMessage {
            vitals: VitalSigns::new(1, 2),
            device_id: "a\"b\\c".into(),
            seq: 0,
        };
        assert_eq!(TelemetryMessage::from_json(msg.to_json().as_bytes()).unwrap(), msg);
    }

    #[test]
    fn rejects_malformed() {
        for bad in [
            &br#"{"HeartRate":78,"Temperature":98.6,"Id":"x"}"#[..],
            br#"{"HeartRate":78,"Temperature":98.65,"Id":"x","Seq":1}"#,
            br#"{"HeartRate":-1,"Temperature":98.6,"Id":"x","Seq":1}"#,
            br#"{"HeartRate":78,"Temperature":98.6,"Id":"x","Seq":1,"Extra":0}"#,
            b"\xff\xfe garbage",
        ] {
            assert!(TelemetryMessage::from_json(bad).is_err());
        }
    }

    fn message() -> impl Strategy<Value = TelemetryMessage> {
        (0u32..400, 0u32..1500, "[ -~]{0,12}", any::<u64>()).prop_map(|(hr, t, id, seq)| TelemetryMessage {
            vitals: VitalSigns::new(hr, t),
            device_id: id,
            seq,
        })
    }

    proptest! {
        #[test]
        fn roundtrip(msg in message()) {
            prop_assert_eq!(TelemetryMessage::from_json(msg.to_json().as_bytes()).unwrap(), msg);
        }

        #[test]
        fn serialization_is_injective(a in message(), b in message()) {
            prop_assert_eq!(a == b, a.to_json() == b.to_json());
        }
    }
}
