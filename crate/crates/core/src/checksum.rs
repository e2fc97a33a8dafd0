//! Content checksums embedded in pipeline artifacts.

use sha2::{Digest, Sha256};

/// Hex SHA-256 of `bytes`, truncated to 16 hex characters.
pub fn content_checksum(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    hex::encode(&digest[..8])
}
