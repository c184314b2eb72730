//! Run key derivation and authenticated sealing.
//!
//! Key material never lives in configuration: a key file supplies bytes and an
//! optional environment variable supplies a passphrase. The run key is
//! `SHA-256(file bytes || passphrase)`.

use std::path::Path;

use aes_gcm::aead::{Aead, KeyInit};
use aes_gcm::{Aes256Gcm, Nonce};
use sha2::{Digest, Sha256};

pub const NONCE_LEN: usize = 12;

#[derive(Debug, thiserror::Error)]
pub enum KeyError {
    #[error("reading key file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("key file {0} is empty")]
    Empty(String),
    #[error("ciphertext too short")]
    Truncated,
    #[error("authentication failed (wrong key or tampered data)")]
    Authentication,
}

#[derive(Clone, PartialEq, Eq)]
pub struct RunKey([u8; 32]);

impl std::fmt::Debug for RunKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("RunKey(..)")
    }
}

impl RunKey {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        RunKey(bytes)
    }

    pub fn derive(material: &[u8], passphrase: Option<&str>) -> Self {
        let mut h = Sha256::new();
        h.update(material);
        if let Some(p) = passphrase {
            h.update(p.as_bytes());
        }
        RunKey(h.finalize().into())
    }

    /// Loads key material from `path`, mixing in the value of `env_var` when
    /// it is set.
    pub fn load(path: &Path, env_var: Option<&str>) -> Result<Self, KeyError> {
        let material = std::fs::read(path).map_err(|source| KeyError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if material.is_empty() {
            return Err(KeyError::Empty(path.display().to_string()));
        }
        let pass = env_var.and_then(|v| std::env::var(v).ok());
        Ok(Self::derive(&material, pass.as_deref()))
    }

    pub fn bytes(&self) -> &[u8; 32] {
        &self.0
    }

    fn cipher(&self) -> Aes256Gcm {
        Aes256Gcm::new_from_slice(&self.0).expect("32-byte key")
    }

    /// AES-256-GCM with the given nonce; returns `nonce || ciphertext`.
    pub fn seal_with_nonce(&self, nonce: [u8; NONCE_LEN], plaintext: &[u8]) -> Vec<u8> {
        let ct = self
            .cipher()
            .encrypt(Nonce::from_slice(&nonce), plaintext)
            .expect("AES-GCM encryption does not fail for in-memory buffers");
        let mut out = Vec::with_capacity(NONCE_LEN + ct.len());
        out.extend_from_slice(&nonce);
        out.extend_from_slice(&ct);
        out
    }

    /// Deterministic sealing: the nonce is derived from the key and the
    /// plaintext, so equal plaintexts seal to equal ciphertexts.
    pub fn seal_deterministic(&self, plaintext: &[u8]) -> Vec<u8> {
        let mut h = Sha256::new();
        h.update(b"nonce");
        h.update(self.0);
        h.update(plaintext);
        let digest = h.finalize();
        let mut nonce = [0u8; NONCE_LEN];
        nonce.copy_from_slice(&digest[..NONCE_LEN]);
        self.seal_with_nonce(nonce, plaintext)
    }

    pub fn seal_random(&self, plaintext: &[u8]) -> Vec<u8> {
        let nonce: [u8; NONCE_LEN] = rand::random();
        self.seal_with_nonce(nonce, plaintext)
    }

    pub fn open(&self, sealed: &[u8]) -> Result<Vec<u8>, KeyError> {
        if sealed.len() < NONCE_LEN + 16 {
            return Err(KeyError::Truncated);
        }
        let (nonce, ct) = sealed.split_at(NONCE_LEN);
        self.cipher()
            .decrypt(Nonce::from_slice(nonce), ct)
            .map_err(|_| KeyError::Authentication)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seal_open_roundtrip() {
        let k = RunKey::derive(b"material", Some("pass"));
        let sealed = k.seal_random(b"hello");
        assert_eq!(k.open(&sealed).unwrap(), b"hello");
        let other = RunKey::derive(b"material", None);
        assert!(matches!(other.open(&sealed), Err(KeyError::Authentication)));
        assert!(matches!(k.open(&sealed[..10]), Err(KeyError::Truncated)));
    }

    #[test]
    fn deterministic_sealing_is_stable() {
        let k = RunKey::derive(b"m", None);
        assert_eq!(k.seal_deterministic(b"x"), k.seal_deterministic(b"x"));
        assert_ne!(k.seal_deterministic(b"x"), k.seal_deterministic(b"y"));
    }
}
