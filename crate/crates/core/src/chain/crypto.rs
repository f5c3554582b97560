//! Digests and the simulation signature scheme.
//!
//! Signatures here are a keyed-digest stand-in behind the same interface a
//! real scheme would present: the public key is a one-way derivation of the
//! secret key, and a signature binds (public key, message). Within the
//! simulation, producing a valid signature without the secret key is treated
//! as impossible; the framework tests protocol logic, not cryptography.

use std::fmt;

use rand::RngCore;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use super::codec::Encode;
use super::id::VehicleId;

const PK_DOMAIN: &[u8] = b"dualchain/pk";
const SIG_DOMAIN: &[u8] = b"dualchain/sig";

/// 32-byte SHA-256 output.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub const ZERO: Digest = Digest([0u8; 32]);

    pub fn to_hex(self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, CryptoError> {
        let bytes = hex::decode(s).map_err(|_| CryptoError::BadHex)?;
        let arr: [u8; 32] = bytes.try_into().map_err(|_| CryptoError::BadHex)?;
        Ok(Digest(arr))
    }

    /// Seed material for a ChaCha stream.
    pub fn into_seed(self) -> [u8; 32] {
        self.0
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", &self.to_hex()[..12])
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Encode for Digest {
    fn encode_into(&self, out: &mut Vec<u8>) {
        self.0.encode_into(out);
    }
}

impl Serialize for Digest {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Digest::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// Incremental SHA-256 over canonical encodings, with a domain tag.
pub struct Hasher {
    inner: Sha256,
}

impl Hasher {
    pub fn new(domain: &str) -> Self {
        let mut inner = Sha256::new();
        inner.update(domain.as_bytes());
        Hasher { inner }
    }

    pub fn update(&mut self, value: &(impl Encode + ?Sized)) -> &mut Self {
        self.inner.update(value.encoded());
        self
    }

    pub fn finish(self) -> Digest {
        Digest(self.inner.finalize().into())
    }
}

pub fn sha256(bytes: &[u8]) -> Digest {
    let mut h = Sha256::new();
    h.update(bytes);
    Digest(h.finalize().into())
}

#[derive(Clone)]
pub struct SecretKey(pub [u8; 32]);

/// Public key: one-way derivation of the secret key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PublicKey(pub Digest);

impl Encode for PublicKey {
    fn encode_into(&self, out: &mut Vec<u8>) {
        self.0.encode_into(out);
    }
}

/// Signature bytes. Kept as a raw vector so that malformed lengths coming in
/// from external files fail verification instead of failing to parse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature(pub Vec<u8>);

impl Encode for Signature {
    fn encode_into(&self, out: &mut Vec<u8>) {
        self.0.as_slice().encode_into(out);
    }
}

impl Serialize for Signature {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(&self.0))
    }
}

impl<'de> Deserialize<'de> for Signature {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let bytes = hex::decode(s).map_err(serde::de::Error::custom)?;
        Ok(Signature(bytes))
    }
}

#[derive(Clone)]
pub struct Keypair {
    secret: SecretKey,
    public: PublicKey,
}

impl Keypair {
    pub fn generate(rng: &mut impl RngCore) -> Self {
        let mut sk = [0u8; 32];
        rng.fill_bytes(&mut sk);
        Keypair::from_secret(SecretKey(sk))
    }

    pub fn from_secret(secret: SecretKey) -> Self {
        let mut h = Sha256::new();
        h.update(PK_DOMAIN);
        h.update(secret.0);
        let public = PublicKey(Digest(h.finalize().into()));
        Keypair { secret, public }
    }

    pub fn public(&self) -> PublicKey {
        self.public
    }

    pub fn sign(&self, message: &[u8]) -> Signature {
        // The secret key gates the ability to derive this public key; the
        // signature itself binds (pk, message).
        let _ = &self.secret;
        let mut h = Sha256::new();
        h.update(SIG_DOMAIN);
        h.update(self.public.0 .0);
        h.update(message);
        Signature(h.finalize().to_vec())
    }
}

pub fn verify(public: PublicKey, message: &[u8], signature: &Signature) -> bool {
    if signature.0.len() != 32 {
        return false;
    }
    let mut h = Sha256::new();
    h.update(SIG_DOMAIN);
    h.update(public.0 .0);
    h.update(message);
    h.finalize().as_slice() == signature.0.as_slice()
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CryptoError {
    #[error("invalid hex digest")]
    BadHex,
    #[error("vehicle {0} already registered with a different key")]
    AlreadyRegistered(VehicleId),
    #[error("vehicle {0} has no registered key")]
    UnknownVehicle(VehicleId),
}

/// Insert-once association from vehicle to public key. A vehicle's key is
/// stable for its lifetime; re-registering the same key is a no-op.
#[derive(Debug, Clone, Default)]
pub struct KeyRegistry {
    keys: std::collections::BTreeMap<VehicleId, PublicKey>,
}

impl KeyRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, id: VehicleId, key: PublicKey) -> Result<(), CryptoError> {
        match self.keys.get(&id) {
            Some(existing) if *existing == key => Ok(()),
            Some(_) => Err(CryptoError::AlreadyRegistered(id)),
            None => {
                self.keys.insert(id, key);
                Ok(())
            }
        }
    }

    pub fn get(&self, id: VehicleId) -> Option<PublicKey> {
        self.keys.get(&id).copied()
    }

    pub fn contains(&self, id: VehicleId) -> bool {
        self.keys.contains_key(&id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::id::RegionId;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn keypair(seed: u64) -> Keypair {
        Keypair::generate(&mut ChaCha20Rng::seed_from_u64(seed))
    }

    #[test]
    fn sign_verify_round_trip() {
        let kp = keypair(1);
        let sig = kp.sign(b"hello");
        assert!(verify(kp.public(), b"hello", &sig));
    }

    #[test]
    fn single_byte_mutation_fails() {
        let kp = keypair(2);
        let msg = b"payload bytes".to_vec();
        let sig = kp.sign(&msg);
        let mut tampered = msg.clone();
        tampered[3] ^= 0x01;
        assert!(!verify(kp.public(), &tampered, &sig));
        let mut bad_sig = sig.clone();
        bad_sig.0[0] ^= 0x80;
        assert!(!verify(kp.public(), &msg, &bad_sig));
    }

    #[test]
    fn wrong_key_fails() {
        let a = keypair(3);
        let b = keypair(4);
        let sig = a.sign(b"msg");
        assert!(!verify(b.public(), b"msg", &sig));
    }

    #[test]
    fn malformed_signature_length_is_rejected_not_a_crash() {
        let kp = keypair(5);
        assert!(!verify(kp.public(), b"msg", &Signature(vec![1, 2, 3])));
        assert!(!verify(kp.public(), b"msg", &Signature(vec![])));
    }

    #[test]
    fn registry_is_insert_once() {
        let mut reg = KeyRegistry::new();
        let v = VehicleId::new(RegionId(0), 1);
        let kp1 = keypair(6);
        let kp2 = keypair(7);
        reg.register(v, kp1.public()).unwrap();
        reg.register(v, kp1.public()).unwrap();
        assert_eq!(
            reg.register(v, kp2.public()),
            Err(CryptoError::AlreadyRegistered(v))
        );
        assert_eq!(reg.get(v), Some(kp1.public()));
    }

    #[test]
    fn digest_hex_round_trip() {
        let d = sha256(b"abc");
        assert_eq!(Digest::from_hex(&d.to_hex()).unwrap(), d);
        // SHA-256("abc") reference vector.
        assert_eq!(
            d.to_hex(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
