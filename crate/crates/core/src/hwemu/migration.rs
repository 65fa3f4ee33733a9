//! Sealed key migration blobs.
//!
//! The payload is ChaCha20-encrypted under a key derived from the customer's
//! authorization secret; an HMAC-SHA-256 tag under a second derived key
//! covers every field, binding the blob to its source device and target model.

use chacha20::cipher::{KeyIvInit, StreamCipher};
use chacha20::ChaCha20;
use hmac::{Hmac, Mac};
use serde::Serialize;
use sha2::Sha256;

use super::{HwError, HwResult, KeyRecord};
use crate::claims::{DeviceId, ManifestRef};
use crate::crypto::{Digest, SecretKey};
use crate::wire::{Canonical, Reader, WireType};
use crate::{canonical_struct, wire_type};

const NONCE_LEN: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MigrationBlob {
    /// 12-byte stream nonce followed by the ciphertext.
    #[serde(serialize_with = "crate::claims::render::hex_vec")]
    pub payload: Vec<u8>,
    pub source_device: DeviceId,
    pub target_manifest_ref: ManifestRef,
    pub auth_digest: Digest,
    #[serde(serialize_with = "crate::claims::render::hex_bytes")]
    pub integrity_tag: [u8; 32],
}

canonical_struct!(MigrationBlob {
    payload,
    source_device,
    target_manifest_ref,
    auth_digest,
    integrity_tag,
});
wire_type!(MigrationBlob, 0x21);

/// Key material carried inside the encrypted payload.
pub(crate) struct MovedKey {
    pub private_key: SecretKey,
    pub migratable: bool,
}

canonical_struct!(MovedKey {
    private_key,
    migratable
});

pub(crate) fn auth_digest(secret: &[u8]) -> Digest {
    Digest::of_parts(&[b"migration-auth", secret])
}

fn enc_key(secret: &[u8]) -> Digest {
    Digest::of_parts(&[b"migration-enc", secret])
}

fn mac_key(secret: &[u8]) -> Digest {
    Digest::of_parts(&[b"migration-mac", secret])
}

fn tag_input(blob: &MigrationBlob) -> Vec<u8> {
    let mut out = vec![MigrationBlob::TAG];
    blob.payload.write_to(&mut out);
    blob.source_device.write_to(&mut out);
    blob.target_manifest_ref.write_to(&mut out);
    blob.auth_digest.write_to(&mut out);
    out
}

fn mac(secret: &[u8]) -> Hmac<Sha256> {
    Hmac::<Sha256>::new_from_slice(mac_key(secret).as_bytes()).expect("hmac accepts any key length")
}

fn apply_keystream(secret: &[u8], nonce: &[u8; NONCE_LEN], data: &mut [u8]) {
    let mut cipher = ChaCha20::new(enc_key(secret).as_bytes().into(), nonce.into());
    cipher.apply_keystream(data);
}

pub(crate) fn seal(
    key: &KeyRecord,
    source_device: DeviceId,
    manifest_ref: &ManifestRef,
    auth_secret: &[u8],
    nonce_seed: &SecretKey,
) -> MigrationBlob {
    let mut nonce = [0u8; NONCE_LEN];
    nonce.copy_from_slice(&nonce_seed.as_bytes()[..NONCE_LEN]);
    let mut plain = MovedKey {
        private_key: key.private_key.clone(),
        migratable: key.migratable,
    }
    .body_bytes();
    apply_keystream(auth_secret, &nonce, &mut plain);
    let mut payload = nonce.to_vec();
    payload.extend_from_slice(&plain);
    let mut blob = MigrationBlob {
        payload,
        source_device,
        target_manifest_ref: manifest_ref.clone(),
        auth_digest: auth_digest(auth_secret),
        integrity_tag: [0u8; 32],
    };
    let mut m = mac(auth_secret);
    m.update(&tag_input(&blob));
    blob.integrity_tag = m.finalize().into_bytes().into();
    blob
}

pub(crate) fn unseal(blob: &MigrationBlob, auth_secret: &[u8]) -> HwResult<MovedKey> {
    if auth_digest(auth_secret) != blob.auth_digest {
        return Err(HwError::AuthFailure);
    }
    let mut m = mac(auth_secret);
    m.update(&tag_input(blob));
    m.verify_slice(&blob.integrity_tag)
        .map_err(|_| HwError::IntegrityFailure)?;
    if blob.payload.len() < NONCE_LEN {
        return Err(HwError::IntegrityFailure);
    }
    let (nonce, ct) = blob.payload.split_at(NONCE_LEN);
    let nonce: [u8; NONCE_LEN] = nonce.try_into().expect("split at nonce length");
    let mut plain = ct.to_vec();
    apply_keystream(auth_secret, &nonce, &mut plain);
    let mut r = Reader::new(&plain);
    let moved = MovedKey::read_from(&mut r).map_err(|_| HwError::IntegrityFailure)?;
    r.finish().map_err(|_| HwError::IntegrityFailure)?;
    Ok(moved)
}
