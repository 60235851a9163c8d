//! Short, stable content hashes used to tag artifacts with the
//! configuration that produced them.

use sha2::{Digest, Sha256};

pub(crate) struct Fingerprint(Sha256);

impl Fingerprint {
    /// `domain` separates hashes of different kinds of objects.
    pub fn new(domain: &str) -> Self {
        let mut h = Sha256::new();
        h.update(domain.as_bytes());
        h.update([0u8]);
        Self(h)
    }

    pub fn update(&mut self, bytes: &[u8]) {
        self.0.update(bytes);
    }

    pub fn update_u64(&mut self, v: u64) {
        self.0.update(v.to_le_bytes());
    }

    /// First 8 bytes of the digest as 16 hex characters.
    pub fn finish(self) -> String {
        self.0.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// 32-byte digest, used as an RNG seed.
    pub fn finish_seed(self) -> [u8; 32] {
        self.0.finalize().into()
    }
}
