//! AES-128-CBC telemetry protection: block cipher, chaining mode, PKCS#7
//! padding, per-message IV envelopes and text encodings for HTTP bodies.

mod aes;
mod cbc;
mod encoding;

use std::fmt;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use self::aes::{aes128_decrypt_block, aes128_encrypt_block, KeySchedule};
pub use self::cbc::{cbc_decrypt, cbc_encrypt, pkcs7_pad, pkcs7_unpad};
pub use self::encoding::{decode_text, encode_text, TextEncoding};

pub const BLOCK_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CryptoError {
    #[error("block must be exactly 16 bytes, got {0}")]
    BlockSize(usize),
    #[error("ciphertext length {0} is not a positive multiple of 16")]
    CiphertextSize(usize),
    #[error("invalid padding")]
    Padding,
    #[error("key must be 16 bytes, got {0}")]
    KeySize(usize),
    #[error("invalid {encoding} text: {reason}")]
    Encoding {
        encoding: TextEncoding,
        reason: String,
    },
}

/// Pre-shared 128-bit key.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Key128([u8; 16]);

impl Key128 {
    pub const fn new(bytes: [u8; 16]) -> Self {
        Self(bytes)
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, CryptoError> {
        bytes
            .try_into()
            .map(Self)
            .map_err(|_| CryptoError::KeySize(bytes.len()))
    }

    pub fn from_hex(text: &str) -> Result<Self, CryptoError> {
        Self::from_slice(&decode_text(text, TextEncoding::Hex)?)
    }

    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

// Keys never print their bytes.
impl fmt::Debug for Key128 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Key128(..)")
    }
}

impl Serialize for Key128 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Key128 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        Self::from_hex(&text).map_err(serde::de::Error::custom)
    }
}

/// CBC initialization vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Iv(pub [u8; BLOCK_LEN]);

impl Iv {
    pub fn random<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut bytes = [0u8; BLOCK_LEN];
        rng.fill_bytes(&mut bytes);
        Self(bytes)
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, CryptoError> {
        bytes
            .try_into()
            .map(Self)
            .map_err(|_| CryptoError::BlockSize(bytes.len()))
    }
}

/// IV plus CBC ciphertext. The ciphertext is always a positive multiple of 16 bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    iv: Iv,
    ciphertext: Vec<u8>,
}

impl Envelope {
    pub fn new(iv: Iv, ciphertext: Vec<u8>) -> Result<Self, CryptoError> {
        if ciphertext.is_empty() || !ciphertext.len().is_multiple_of(BLOCK_LEN) {
            return Err(CryptoError::CiphertextSize(ciphertext.len()));
        }
        Ok(Self { iv, ciphertext })
    }

    /// Splits `IV ‖ ciphertext` as carried in a canonical request body.
    pub fn from_prefixed(bytes: &[u8]) -> Result<Self, CryptoError> {
        if bytes.len() < 2 * BLOCK_LEN {
            return Err(CryptoError::CiphertextSize(
                bytes.len().saturating_sub(BLOCK_LEN),
            ));
        }
        let (iv, ct) = bytes.split_at(BLOCK_LEN);
        Self::new(Iv::from_slice(iv)?, ct.to_vec())
    }

    pub fn iv(&self) -> &Iv {
        &self.iv
    }

    pub fn ciphertext(&self) -> &[u8] {
        &self.ciphertext
    }

    pub fn block_count(&self) -> usize {
        self.ciphertext.len() / BLOCK_LEN
    }

    pub fn to_prefixed(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(BLOCK_LEN + self.ciphertext.len());
        out.extend_from_slice(&self.iv.0);
        out.extend_from_slice(&self.ciphertext);
        out
    }
}

/// Encrypts `plaintext` under a fresh IV drawn from `rng`.
pub fn seal<R: RngCore + ?Sized>(key: &Key128, plaintext: &[u8], rng: &mut R) -> Envelope {
    let iv = Iv::random(rng);
    seal_with_iv(key, iv, plaintext)
}

/// Encrypts under a caller-chosen IV. Only the fixed-IV display framing uses this.
pub fn seal_with_iv(key: &Key128, iv: Iv, plaintext: &[u8]) -> Envelope {
    Envelope {
        iv,
        ciphertext: cbc_encrypt(key, &iv, plaintext),
    }
}

pub fn open(key: &Key128, envelope: &Envelope) -> Result<Vec<u8>, CryptoError> {
    cbc_decrypt(key, &envelope.iv, &envelope.ciphertext)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    #[test]
    fn consecutive_seals_differ() {
        let key = Key128::new([3; 16]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = seal(&key, b"same message", &mut rng);
        let b = seal(&key, b"same message", &mut rng);
        assert_ne!(a.iv(), b.iv());
        assert_ne!(a.ciphertext(), b.ciphertext());
    }

    #[test]
    fn seal_open_roundtrip_1000() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for i in 0..1000usize {
            let mut key = [0u8; 16];
            rng.fill_bytes(&mut key);
            let key = Key128::new(key);
            let mut msg = vec![0u8; i % 201];
            rng.fill_bytes(&mut msg);
            let env = seal(&key, &msg, &mut rng);
            assert_eq!(env.ciphertext().len(), (msg.len() / 16 + 1) * 16);
            assert_eq!(open(&key, &env).unwrap(), msg);
        }
    }

    #[test]
    fn single_bit_key_flips_never_recover_message() {
        let key = Key128::from_hex("2b7e151628aed2a6abf7158809cf4f3c").unwrap();
        let msg = br#"{"HeartRate":78,"Temperature":98.6,"Id":"miot-01","Seq":1}"#;
        let env = seal(&key, msg, &mut ChaCha8Rng::seed_from_u64(9));
        for bit in 0..128 {
            let mut flipped = *key.as_bytes();
            flipped[bit / 8] ^= 1 << (bit % 8);
            match open(&Key128::new(flipped), &env) {
                Ok(pt) => assert_ne!(pt.as_slice(), msg.as_slice(), "bit {bit}"),
                Err(e) => assert_eq!(e, CryptoError::Padding),
            }
        }
    }

    #[test]
    fn iv_uniqueness_over_many_seals() {
        let key = Key128::new([0; 16]);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut seen = HashSet::new();
        for _ in 0..100_000 {
            assert!(seen.insert(seal(&key, b"", &mut rng).iv().0));
        }
    }

    #[test]
    fn prefixed_split() {
        let env = Envelope::new(Iv([1; 16]), vec![2; 32]).unwrap();
        let bytes = env.to_prefixed();
        assert_eq!(bytes.len(), 48);
        assert_eq!(Envelope::from_prefixed(&bytes).unwrap(), env);
        assert!(Envelope::from_prefixed(&bytes[..31]).is_err());
        assert!(Envelope::from_prefixed(&bytes[..40]).is_err());
    }

    #[test]
    fn key_debug_is_redacted() {
        assert_eq!(format!("{:?}", Key128::new([9; 16])), "Key128(..)");
    }
}
