use super::{CryptoError, Iv, Key128, KeySchedule, BLOCK_LEN};

/// PKCS#7: always appends 1..=16 bytes, each equal to the pad length.
pub fn pkcs7_pad(data: &[u8]) -> Vec<u8> {
    let pad = BLOCK_LEN - data.len() % BLOCK_LEN;
    let mut out = Vec::with_capacity(data.len() + pad);
    out.extend_from_slice(data);
    out.resize(data.len() + pad, pad as u8);
    out
}

pub fn pkcs7_unpad(padded: &[u8]) -> Result<&[u8], CryptoError> {
    if padded.is_empty() || !padded.len().is_multiple_of(BLOCK_LEN) {
        return Err(CryptoError::CiphertextSize(padded.len()));
    }
    let pad = *padded.last().expect("non-empty") as usize;
    if pad == 0 || pad > BLOCK_LEN {
        return Err(CryptoError::Padding);
    }
    let (body, tail) = padded.split_at(padded.len() - pad);
    if tail.iter().any(|&b| b as usize != pad) {
        return Err(CryptoError::Padding);
    }
    Ok(body)
}

pub fn cbc_encrypt(key: &Key128, iv: &Iv, plaintext: &[u8]) -> Vec<u8> {
    let schedule = KeySchedule::new(key);
    let mut out = pkcs7_pad(plaintext);
    let mut chain = iv.0;
    for chunk in out.chunks_exact_mut(BLOCK_LEN) {
        let mut block = [0u8; BLOCK_LEN];
        for (b, (p, c)) in block.iter_mut().zip(chunk.iter().zip(chain)) {
            *b = p ^ c;
        }
        schedule.encrypt(&mut block);
        chunk.copy_from_slice(&block);
        chain = block;
    }
    out
}

pub fn cbc_decrypt(key: &Key128, iv: &Iv, ciphertext: &[u8]) -> Result<Vec<u8>, CryptoError> {
    if ciphertext.is_empty() || !ciphertext.len().is_multiple_of(BLOCK_LEN) {
        return Err(CryptoError::CiphertextSize(ciphertext.len()));
    }
    let schedule = KeySchedule::new(key);
    let mut out = Vec::with_capacity(ciphertext.len());
    let mut chain = iv.0;
    for chunk in ciphertext.chunks_exact(BLOCK_LEN) {
        let mut block: [u8; BLOCK_LEN] = chunk.try_into().expect("exact chunk");
        schedule.decrypt(&mut block);
        out.extend(block.iter().zip(chain).map(|(b, c)| b ^ c));
        chain.copy_from_slice(chunk);
    }
    let len = pkcs7_unpad(&out)?.len();
    out.truncate(len);
    Ok(out)
}
