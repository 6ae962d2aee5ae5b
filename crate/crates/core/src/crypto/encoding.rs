use std::fmt;

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use super::CryptoError;

/// Text encoding for binary HTTP bodies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TextEncoding {
    /// Lowercase hex.
    #[default]
    Hex,
    /// Standard alphabet with `=` padding.
    Base64,
}

impl fmt::Display for TextEncoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TextEncoding::Hex => "hex",
            TextEncoding::Base64 => "base64",
        })
    }
}

pub fn encode_text(bytes: &[u8], encoding: TextEncoding) -> String {
    match encoding {
        TextEncoding::Hex => hex::encode(bytes),
        TextEncoding::Base64 => STANDARD.encode(bytes),
    }
}

pub fn decode_text(text: &str, encoding: TextEncoding) -> Result<Vec<u8>, CryptoError> {
    let err = |reason: String| CryptoError::Encoding { encoding, reason };
    match encoding {
        TextEncoding::Hex => hex::decode(text).map_err(|e| err(e.to_string())),
        TextEncoding::Base64 => STANDARD.decode(text).map_err(|e| err(e.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hex_is_lowercase() {
        assert_eq!(encode_text(&[0x3c, 0x4a, 0x8b], TextEncoding::Hex), "3c4a8b");
        assert_eq!(encode_text(&[0xAB, 0xCD], TextEncoding::Hex), "abcd");
    }

    #[test]
    fn empty_both_encodings() {
        for enc in [TextEncoding::Hex, TextEncoding::Base64] {
            assert_eq!(encode_text(&[], enc), "");
            assert_eq!(decode_text("", enc).unwrap(), Vec::<u8>::new());
        }
    }

    #[test]
    fn base64_standard_padded() {
        assert_eq!(encode_text(b"ab", TextEncoding::Base64), "YWI=");
        assert_eq!(encode_text(&[0xfb, 0xff], TextEncoding::Base64), "+/8=");
    }

    #[test]
    fn invalid_text_rejected() {
        assert!(matches!(
            decode_text("3g", TextEncoding::Hex),
            Err(CryptoError::Encoding { encoding: TextEncoding::Hex, .. })
        ));
        assert!(decode_text("abc", TextEncoding::Hex).is_err());
        assert!(decode_text("YWI", TextEncoding::Base64).is_err());
        assert!(decode_text("Y*I=", TextEncoding::Base64).is_err());
    }

    proptest! {
        #[test]
        fn roundtrip(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
            for enc in [TextEncoding::Hex, TextEncoding::Base64] {
                prop_assert_eq!(decode_text(&encode_text(&bytes, enc), enc).unwrap(), bytes.clone());
            }
        }
    }
}
