//! AES-128 block cipher (FIPS-197), byte-oriented.
//!
//! The S-box and its inverse are derived at compile time from the GF(2^8)
//! multiplicative inverse followed by the affine transform, so there are no
//! hand-copied lookup tables to get wrong.

use super::{CryptoError, Key128, BLOCK_LEN};

const ROUNDS: usize = 10;
const ROUND_KEYS_LEN: usize = BLOCK_LEN * (ROUNDS + 1);

const fn xtime(b: u8) -> u8 {
    (b << 1) ^ if b & 0x80 != 0 { 0x1b } else { 0 }
}

const fn gf_mul(mut a: u8, mut b: u8) -> u8 {
    let mut acc = 0u8;
    while b != 0 {
        if b & 1 != 0 {
            acc ^= a;
        }
        a = xtime(a);
        b >>= 1;
    }
    acc
}

const fn gf_inv(a: u8) -> u8 {
    // a^254 = a^-1 in GF(2^8); 0 maps to 0.
    let mut result = 1u8;
    let mut base = a;
    let mut exp = 254u32;
    while exp != 0 {
        if exp & 1 != 0 {
            result = gf_mul(result, base);
        }
        base = gf_mul(base, base);
        exp >>= 1;
    }
    if a == 0 {
        0
    } else {
        result
    }
}

const fn build_sbox() -> [u8; 256] {
    let mut sbox = [0u8; 256];
    let mut i = 0;
    while i < 256 {
        let inv = gf_inv(i as u8);
        sbox[i] = inv
            ^ inv.rotate_left(1)
            ^ inv.rotate_left(2)
            ^ inv.rotate_left(3)
            ^ inv.rotate_left(4)
            ^ 0x63;
        i += 1;
    }
    sbox
}

const fn invert(table: &[u8; 256]) -> [u8; 256] {
    let mut inv = [0u8; 256];
    let mut i = 0;
    while i < 256 {
        inv[table[i] as usize] = i as u8;
        i += 1;
    }
    inv
}

const SBOX: [u8; 256] = build_sbox();
const INV_SBOX: [u8; 256] = invert(&SBOX);

/// Expanded round keys for one AES-128 key.
#[derive(Clone)]
pub struct KeySchedule {
    round_keys: [u8; ROUND_KEYS_LEN],
}

impl KeySchedule {
    pub fn new(key: &Key128) -> Self {
        let mut rk = [0u8; ROUND_KEYS_LEN];
        rk[..16].copy_from_slice(key.as_bytes());
        let mut rcon = 1u8;
        for word in 4..(ROUND_KEYS_LEN / 4) {
            let mut temp = [
                rk[4 * word - 4],
                rk[4 * word - 3],
                rk[4 * word - 2],
                rk[4 * word - 1],
            ];
            if word % 4 == 0 {
                temp.rotate_left(1);
                for b in temp.iter_mut() {
                    *b = SBOX[*b as usize];
                }
                temp[0] ^= rcon;
                rcon = xtime(rcon);
            }
            for j in 0..4 {
                rk[4 * word + j] = rk[4 * (word - 4) + j] ^ temp[j];
            }
        }
        Self { round_keys: rk }
    }

    fn round_key(&self, round: usize) -> &[u8] {
        &self.round_keys[round * BLOCK_LEN..(round + 1) * BLOCK_LEN]
    }

    pub fn encrypt(&self, block: &mut [u8; BLOCK_LEN]) {
        add_round_key(block, self.round_key(0));
        for round in 1..ROUNDS {
            sub_bytes(block);
            shift_rows(block);
            mix_columns(block);
            add_round_key(block, self.round_key(round));
        }
        sub_bytes(block);
        shift_rows(block);
        add_round_key(block, self.round_key(ROUNDS));
    }

    pub fn decrypt(&self, block: &mut [u8; BLOCK_LEN]) {
        add_round_key(block, self.round_key(ROUNDS));
        for round in (1..ROUNDS).rev() {
            inv_shift_rows(block);
            inv_sub_bytes(block);
            add_round_key(block, self.round_key(round));
            inv_mix_columns(block);
        }
        inv_shift_rows(block);
        inv_sub_bytes(block);
        add_round_key(block, self.round_key(0));
    }
}

// State layout is column-major: byte index = 4 * column + row.

fn add_round_key(state: &mut [u8; BLOCK_LEN], rk: &[u8]) {
    for (s, k) in state.iter_mut().zip(rk) {
        *s ^= k;
    }
}

fn sub_bytes(state: &mut [u8; BLOCK_LEN]) {
    for b in state.iter_mut() {
        *b = SBOX[*b as usize];
    }
}

fn inv_sub_bytes(state: &mut [u8; BLOCK_LEN]) {
    for b in state.iter_mut() {
        *b = INV_SBOX[*b as usize];
    }
}

fn shift_rows(state: &mut [u8; BLOCK_LEN]) {
    let s = *state;
    for row in 1..4 {
        for col in 0..4 {
            state[4 * col + row] = s[4 * ((col + row) % 4) + row];
        }
    }
}

fn inv_shift_rows(state: &mut [u8; BLOCK_LEN]) {
    let s = *state;
    for row in 1..4 {
        for col in 0..4 {
            state[4 * ((col + row) % 4) + row] = s[4 * col + row];
        }
    }
}

fn mix_columns(state: &mut [u8; BLOCK_LEN]) {
    for col in state.chunks_exact_mut(4) {
        let [a0, a1, a2, a3] = [col[0], col[1], col[2], col[3]];
        col[0] = gf_mul(a0, 2) ^ gf_mul(a1, 3) ^ a2 ^ a3;
        col[1] = a0 ^ gf_mul(a1, 2) ^ gf_mul(a2, 3) ^ a3;
        col[2] = a0 ^ a1 ^ gf_mul(a2, 2) ^ gf_mul(a3, 3);
        col[3] = gf_mul(a0, 3) ^ a1 ^ a2 ^ gf_mul(a3, 2);
    }
}

fn inv_mix_columns(state: &mut [u8; BLOCK_LEN]) {
    for col in state.chunks_exact_mut(4) {
        let [a0, a1, a2, a3] = [col[0], col[1], col[2], col[3]];
        col[0] = gf_mul(a0, 14) ^ gf_mul(a1, 11) ^ gf_mul(a2, 13) ^ gf_mul(a3, 9);
        col[1] = gf_mul(a0, 9) ^ gf_mul(a1, 14) ^ gf_mul(a2, 11) ^ gf_mul(a3, 13);
        col[2] = gf_mul(a0, 13) ^ gf_mul(a1, 9) ^ gf_mul(a2, 14) ^ gf_mul(a3, 11);
        col[3] = gf_mul(a0, 11) ^ gf_mul(a1, 13) ^ gf_mul(a2, 9) ^ gf_mul(a3, 14);
    }
}

fn to_block(block: &[u8]) -> Result<[u8; BLOCK_LEN], CryptoError> {
    block
        .try_into()
        .map_err(|_| CryptoError::BlockSize(block.len()))
}

/// Forward AES-128 on exactly one 16-byte block.
pub fn aes128_encrypt_block(key: &Key128, block: &[u8]) -> Result<[u8; BLOCK_LEN], CryptoError> {
    let mut out = to_block(block)?;
    KeySchedule::new(key).encrypt(&mut out);
    Ok(out)
}

/// Inverse AES-128 on exactly one 16-byte block.
pub fn aes128_decrypt_block(key: &Key128, block: &[u8]) -> Result<[u8; BLOCK_LEN], CryptoError> {
    let mut out = to_block(block)?;
    KeySchedule::new(key).decrypt(&mut out);
    Ok(out)
}
