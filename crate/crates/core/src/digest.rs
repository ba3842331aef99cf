//! Stable 64-bit content fingerprints used to key cached artifacts.

use sha2::{Digest, Sha256};

/// Incremental fingerprint: SHA-256 over little-endian encodings, truncated
/// to the first 8 bytes.
#[derive(Default, Clone)]
pub struct Fingerprint {
    hasher: Sha256,
}

impl Fingerprint {
    pub fn new(domain: &str) -> Self {
        let mut f = Self::default();
        f.write_bytes(domain.as_bytes());
        f
    }

    pub fn write_bytes(&mut self, bytes: &[u8]) {
        self.hasher.update((bytes.len() as u64).to_le_bytes());
        self.hasher.update(bytes);
    }

    pub fn write_u64(&mut self, v: u64) {
        self.hasher.update(v.to_le_bytes());
    }

    pub fn write_f64(&mut self, v: f64) {
        // fold -0.0 into 0.0 so equal values hash equally
        let v = if v == 0.0 { 0.0 } else { v };
        self.hasher.update(v.to_bits().to_le_bytes());
    }

    pub fn finish(self) -> u64 {
        let out = self.hasher.finalize();
        let mut b = [0u8; 8];
        b.copy_from_slice(&out[..8]);
        u64::from_le_bytes(b)
    }
}
