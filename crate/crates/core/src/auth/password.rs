//! Salted, iterated SHA-256 password hashes.
//!
//! Encoding: `$itersha256$<iterations>$<salt>$<digest>` with unpadded standard base64.
//! The digest chain is `d1 = SHA256(salt || pw)`, `d(k+1) = SHA256(d(k) || pw)`.

use base64::engine::general_purpose::STANDARD_NO_PAD;
use base64::Engine;
use rand::RngCore;
use sha2::digest::generic_array::GenericArray;
use sha2::digest::typenum::U64;
use sha2::{compress256, Digest, Sha256};

use super::AuthError;

pub const ALGORITHM_ID: &str = "itersha256";
pub const DEFAULT_ITERATIONS: u32 = 100_000;
pub const MIN_SALT_BYTES: usize = 16;

pub fn random_salt() -> [u8; MIN_SALT_BYTES] {
    let mut salt = [0u8; MIN_SALT_BYTES];
    rand::thread_rng().fill_bytes(&mut salt);
    salt
}

const SHA256_IV: [u32; 8] = [
    0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a, 0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19,
];

fn digest(password: &[u8], salt: &[u8], iterations: u32) -> [u8; 32] {
    let mut d: [u8; 32] = Sha256::new()
        .chain_update(salt)
        .chain_update(password)
        .finalize()
        .into();
    // `d || password` has a fixed length, so its padded blocks are built once and only
    // the leading 32 bytes change per round.
    let len = 32 + password.len();
    let mut flat = vec![0u8; (len + 9).div_ceil(64) * 64];
    flat[32..len].copy_from_slice(password);
    flat[len] = 0x80;
    let end = flat.len();
    flat[end - 8..].copy_from_slice(&((len as u64) * 8).to_be_bytes());
    let mut blocks: Vec<GenericArray<u8, U64>> = flat
        .chunks_exact(64)
        .map(GenericArray::clone_from_slice)
        .collect();
    for _ in 1..iterations {
        blocks[0][..32].copy_from_slice(&d);
        let mut state = SHA256_IV;
        compress256(&mut state, &blocks);
        for (out, word) in d.chunks_exact_mut(4).zip(state) {
            out.copy_from_slice(&word.to_be_bytes());
        }
    }
    d
}

/// # Panics
/// If `salt` is shorter than 16 bytes or `iterations` is zero.
pub fn hash_password(password: &str, salt: &[u8], iterations: u32) -> String {
    assert!(
        salt.len() >= MIN_SALT_BYTES,
        "salt must be at least {MIN_SALT_BYTES} bytes"
    );
    assert!(iterations > 0, "iterations must be positive");
    let d = digest(password.as_bytes(), salt, iterations);
    format!(
        "${ALGORITHM_ID}${iterations}${}${}",
        STANDARD_NO_PAD.encode(salt),
        STANDARD_NO_PAD.encode(d)
    )
}

pub fn verify_password(encoded: &str, password: &str) -> Result<bool, AuthError> {
    let malformed = |why: &str| AuthError::MalformedEncoding(why.to_string());
    let parts: Vec<&str> = encoded.split('$').collect();
    let [empty, algorithm, iterations, salt, expected] = parts[..] else {
        return Err(malformed("expected five '$'-separated parts"));
    };
    if !empty.is_empty() || algorithm != ALGORITHM_ID {
        return Err(malformed("unknown algorithm"));
    }
    let iterations: u32 = iterations
        .parse()
        .map_err(|_| malformed("bad iteration count"))?;
    if iterations == 0 {
        return Err(malformed("bad iteration count"));
    }
    let salt = STANDARD_NO_PAD
        .decode(salt)
        .map_err(|_| malformed("bad salt"))?;
    let expected = STANDARD_NO_PAD
        .decode(expected)
        .map_err(|_| malformed("bad digest"))?;
    if salt.len() < MIN_SALT_BYTES || expected.len() != 32 {
        return Err(malformed("bad salt or digest length"));
    }
    let actual = digest(password.as_bytes(), &salt, iterations);
    Ok(constant_time_eq(&actual, &expected))
}

fn constant_time_eq(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}
