use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::WireError;

/// One sensor reading. Temperature is fixed-point tenths of a degree
/// Fahrenheit so `98.6` round-trips exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VitalSigns {
    pub heart_rate_bpm: u32,
    pub temperature_tenths: u32,
}

impl VitalSigns {
    pub const fn new(heart_rate_bpm: u32, temperature_tenths: u32) -> Self {
        Self {
            heart_rate_bpm,
            temperature_tenths,
        }
    }

    /// Temperature with exactly one decimal digit, e.g. `98.6`.
    pub fn temperature_text(&self) -> String {
        format_tenths(self.temperature_tenths)
    }

    pub fn temperature_f(&self) -> f64 {
        f64::from(self.temperature_tenths) / 10.0
    }
}

impl fmt::Display for VitalSigns {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} BPM / {} F", self.heart_rate_bpm, self.temperature_text())
    }
}

pub(crate) fn format_tenths(tenths: u32) -> String {
    format!("{}.{}", tenths / 10, tenths % 10)
}

/// Accepts `98`, `98.6`; rejects signs, exponents, and more than one decimal.
pub(crate) fn parse_tenths(field: &str, text: &str) -> Result<u32, WireError> {
    let non_numeric = || WireError::NonNumeric {
        field: field.to_string(),
        value: text.to_string(),
    };
    let (int, frac) = match text.split_once('.') {
        Some((i, f)) if f.len() == 1 => (i, f),
        Some(_) => return Err(non_numeric()),
        None => (text, "0"),
    };
    let all_digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    if !all_digits(int) || !all_digits(frac) {
        return Err(non_numeric());
    }
    let int: u32 = int.parse().map_err(|_| non_numeric())?;
    let frac: u32 = frac.parse().map_err(|_| non_numeric())?;
    int.checked_mul(10)
        .and_then(|v| v.checked_add(frac))
        .ok_or_else(non_numeric)
}

pub(crate) fn parse_bpm(field: &str, text: &str) -> Result<u32, WireError> {
    if text.is_empty() || !text.bytes().all(|b| b.is_ascii_digit()) {
        return Err(WireError::NonNumeric {
            field: field.to_string(),
            value: text.to_string(),
        });
    }
    text.parse().map_err(|_| WireError::NonNumeric {
        field: field.to_string(),
        value: text.to_string(),
    })
}

#[derive(Serialize, Deserialize)]
struct VitalsRepr {
    heart_rate_bpm: u32,
    temperature_f: f64,
}

impl Serialize for VitalSigns {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        VitalsRepr {
            heart_rate_bpm: self.heart_rate_bpm,
            temperature_f: self.temperature_f(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for VitalSigns {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = VitalsRepr::deserialize(d)?;
        let tenths = repr.temperature_f * 10.0;
        if !(0.0..=f64::from(u32::MAX)).contains(&tenths) || (tenths - tenths.round()).abs() > 1e-6 {
            return Err(serde::de::Error::custom(
                "temperature_f must be non-negative with at most one decimal",
            ));
        }
        Ok(Self::new(repr.heart_rate_bpm, tenths.round() as u32))
    }
}
