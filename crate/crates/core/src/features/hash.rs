//! Hashing trick for base fields and cross features.
//!
//! Every bucket id is `fmix64(fnv1a64(stream)) & (B - 1)`, where `stream` is a
//! canonical little-endian byte sequence:
//!
//! * base field: `seed:u64 | 0x01 | field:u32 | token bytes | token_len:u32`
//! * cross:      `seed:u64 | 0x02 | digest:u64 | b_1:u32 | ... | b_k:u32`
//!
//! with `digest = fmix64(fnv1a64(order:u32 | id_1:u32 | ... | id_k:u32))` and
//! the constituent buckets `b_i` taken in canonical constituent order.
//! `fmix64` is the MurmurHash3 64-bit finalizer.

use serde::{Deserialize, Serialize};

use super::{BaseFieldId, CrossFeature};
use crate::error::{Error, Result};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

const TAG_BASE: u8 = 0x01;
const TAG_CROSS: u8 = 0x02;

#[inline]
fn fnv_bytes(mut h: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

#[inline]
fn fnv_u32(h: u64, v: u32) -> u64 {
    fnv_bytes(h, &v.to_le_bytes())
}

#[inline]
fn fnv_u64(h: u64, v: u64) -> u64 {
    fnv_bytes(h, &v.to_le_bytes())
}

#[inline]
pub(crate) fn fmix64(mut k: u64) -> u64 {
    k ^= k >> 33;
    k = k.wrapping_mul(0xff51_afd7_ed55_8ccd);
    k ^= k >> 33;
    k = k.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    k ^= k >> 33;
    k
}

/// Shared bucket count (a power of two) and hash seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HashConfig {
    pub bucket_count: u32,
    pub seed: u64,
}

impl HashConfig {
    pub fn new(bucket_count: u32, seed: u64) -> Result<Self> {
        let cfg = Self { bucket_count, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bucket_count < 2 || !self.bucket_count.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "bucket_count must be a power of two >= 2, got {}",
                self.bucket_count
            )));
        }
        Ok(())
    }

    #[inline]
    fn mask(&self) -> u64 {
        u64::from(self.bucket_count - 1)
    }

    #[inline]
    fn prefix(&self, tag: u8) -> u64 {
        fnv_bytes(fnv_u64(FNV_OFFSET, self.seed), &[tag])
    }
}

/// Bucket of a categorical token in base field `field`.
pub fn hash_base(field: BaseFieldId, token: &[u8], cfg: &HashConfig) -> u32 {
    let mut h = fnv_u32(cfg.prefix(TAG_BASE), field.0);
    h = fnv_bytes(h, token);
    h = fnv_u32(h, token.len() as u32);
    (fmix64(h) & cfg.mask()) as u32
}

/// Bucket of a discretized value; the token is the bin index as `u32` LE.
#[inline]
pub fn hash_bin(field: BaseFieldId, bin: u32, cfg: &HashConfig) -> u32 {
    hash_base(field, &bin.to_le_bytes(), cfg)
}

fn cross_digest(cross: &CrossFeature) -> u64 {
    let mut h = fnv_u32(FNV_OFFSET, cross.order() as u32);
    for id in cross.constituents() {
        h = fnv_u32(h, id.0);
    }
    fmix64(h)
}

/// Bucket of `cross` for a row whose base-field buckets are `row`
/// (indexed by base field id).
pub fn hash_cross(cross: &CrossFeature, row: &[u32], cfg: &HashConfig) -> Result<u32> {
    if let Some(id) = cross.constituents().iter().find(|id| id.index() >= row.len()) {
        return Err(Error::FieldMismatch(format!(
            "row supplies {} base buckets, cross needs field {}",
            row.len(),
            id.0
        )));
    }
    Ok(CrossHasher::new(cross, cfg).bucket(row))
}

/// Precomputed hashing state for one cross feature.
#[derive(Debug, Clone)]
pub struct CrossHasher {
    start: u64,
    mask: u64,
    constituents: Vec<u32>,
}

impl CrossHasher {
    pub fn new(cross: &CrossFeature, cfg: &HashConfig) -> Self {
        Self {
            start: fnv_u64(cfg.prefix(TAG_CROSS), cross_digest(cross)),
            mask: cfg.mask(),
            constituents: cross.constituents().iter().map(|id| id.0).collect(),
        }
    }

    /// `base` is indexed by base field id; panics if a constituent is out of range.
    #[inline]
    pub fn bucket(&self, base: &[u32]) -> u32 {
        self.bucket_with(|id| base[id as usize])
    }

    /// Same as [`bucket`](Self::bucket) with constituent buckets supplied by `get`.
    #[inline]
    pub fn bucket_with(&self, get: impl Fn(u32) -> u32) -> u32 {
        let mut h = self.start;
        for &id in &self.constituents {
            h = fnv_u32(h, get(id));
        }
        (fmix64(h) & self.mask) as u32
    }
}
