//! Seeded fixed-size Bloom filter shared by the edge and location halves of a
//! [`Clbf`](crate::protocol::Clbf).
//!
//! Index generation starts from two FNV-1a 64-bit digests of the key, `h_a`
//! (standard offset basis) and `h_b` (basis XOR seed XOR `0x5bd1e9955bd1e995`).
//! The `L`-th index is `mix64(h_a + L * h_b) mod m`, where `mix64` is the
//! SplitMix64 finalizer. Finalizing each probe makes the `k` indices behave as
//! independent draws with replacement, which is what the lit-bit distribution
//! used by the analytics assumes.

use thiserror::Error;

const FNV_OFFSET_BASIS: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
const SECOND_BASIS_TWEAK: u64 = 0x5bd1_e995_5bd1_e995;

/// Serialized header: m (u32) + k (u16) + seed (u64), all little-endian.
pub const HEADER_LEN: usize = 4 + 2 + 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BloomError {
    #[error("invalid bloom parameters: m = {m}, k = {k} (need m >= 1 and 1 <= k <= m)")]
    InvalidParams { m: u64, k: u64 },
    #[error("truncated bloom image: expected {expected} bytes, got {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("bloom image has {actual} bytes but header implies {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("padding bits beyond m are set in bloom image")]
    DirtyPadding,
}

/// Canonical byte encoding of a tuple of fields.
///
/// Every field is written as a 16-bit little-endian length followed by its
/// bytes, so distinct tuples never share an encoding.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Key(Vec<u8>);

impl Key {
    pub fn from_fields(fields: &[&[u8]]) -> Self {
        let len = fields.iter().map(|f| 2 + f.len()).sum();
        let mut bytes = Vec::with_capacity(len);
        for field in fields {
            let flen = u16::try_from(field.len()).expect("key field longer than 65535 bytes");
            bytes.extend_from_slice(&flen.to_le_bytes());
            bytes.extend_from_slice(field);
        }
        Key(bytes)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

fn fnv1a(basis: u64, bytes: &[u8]) -> u64 {
    bytes.iter().fold(basis, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BloomFilter {
    words: Vec<u64>,
    m: u32,
    k: u16,
    seed: u64,
}

impl BloomFilter {
    pub fn new(m: u32, k: u16, seed: u64) -> Result<Self, BloomError> {
        if m == 0 || k == 0 || u32::from(k) > m {
            return Err(BloomError::InvalidParams { m: m.into(), k: k.into() });
        }
        Ok(BloomFilter { words: vec![0; (m as usize).div_ceil(64)], m, k, seed })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn k(&self) -> u16 {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn probe(&self, key: &Key) -> Probe {
        let bytes = key.as_bytes();
        let m = u64::from(self.m);
        let h_a = fnv1a(FNV_OFFSET_BASIS, bytes);
        let mut h_b = fnv1a(FNV_OFFSET_BASIS ^ self.seed ^ SECOND_BASIS_TWEAK, bytes);
        if h_b.is_multiple_of(m) {
            h_b = 1;
        }
        Probe { h_a, h_b, m, next: 0, k: self.k }
    }

    /// The `k` bit positions for `key`, in probe order.
    pub fn hash_indices(&self, key: &Key) -> Vec<usize> {
        self.probe(key).collect()
    }

    pub fn insert(&mut self, key: &Key) {
        for idx in self.probe(key) {
            self.words[idx / 64] |= 1u64 << (idx % 64);
        }
    }

    pub fn contains(&self, key: &Key) -> bool {
        self.probe(key).all(|idx| self.bit(idx))
    }

    pub fn bit(&self, idx: usize) -> bool {
        self.words[idx / 64] >> (idx % 64) & 1 == 1
    }

    /// Number of lit bits (alpha).
    pub fn popcount(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    /// Lights every bit; handy for saturation checks.
    pub fn fill(&mut self) {
        for w in &mut self.words {
            *w = u64::MAX;
        }
        self.clear_padding();
    }

    fn clear_padding(&mut self) {
        let tail = self.m as usize % 64;
        if tail != 0 {
            let last = self.words.len() - 1;
            self.words[last] &= (1u64 << tail) - 1;
        }
    }

    /// Packed bit image: ceil(m/8) bytes, LSB-first within each byte.
    pub fn bit_bytes(&self) -> Vec<u8> {
        let nbytes = (self.m as usize).div_ceil(8);
        self.words.iter().flat_map(|w| w.to_le_bytes()).take(nbytes).collect()
    }

    /// Rebuilds a filter from parameters plus a packed bit image.
    pub fn from_bit_bytes(m: u32, k: u16, seed: u64, bits: &[u8]) -> Result<Self, BloomError> {
        let mut filter = BloomFilter::new(m, k, seed)?;
        let expected = (m as usize).div_ceil(8);
        if bits.len() < expected {
            return Err(BloomError::Truncated { expected, actual: bits.len() });
        }
        if bits.len() > expected {
            return Err(BloomError::LengthMismatch { expected, actual: bits.len() });
        }
        for (i, chunk) in bits.chunks(8).enumerate() {
            let mut word = [0u8; 8];
            word[..chunk.len()].copy_from_slice(chunk);
            filter.words[i] = u64::from_le_bytes(word);
        }
        let before = filter.popcount();
        filter.clear_padding();
        if filter.popcount() != before {
            return Err(BloomError::DirtyPadding);
        }
        Ok(filter)
    }

    pub fn serialize(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + (self.m as usize).div_ceil(8));
        out.extend_from_slice(&self.m.to_le_bytes());
        out.extend_from_slice(&self.k.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&self.bit_bytes());
        out
    }

    pub fn deserialize(bytes: &[u8]) -> Result<Self, BloomError> {
        if bytes.len() < HEADER_LEN {
            return Err(BloomError::Truncated { expected: HEADER_LEN, actual: bytes.len() });
        }
        let m = u32::from_le_bytes(bytes[0..4].try_into().unwrap());
        let k = u16::from_le_bytes(bytes[4..6].try_into().unwrap());
        let seed = u64::from_le_bytes(bytes[6..14].try_into().unwrap());
        let body = &bytes[HEADER_LEN..];
        let expected = (m as usize).div_ceil(8);
        if body.len() < expected {
            return Err(BloomError::Truncated { expected: HEADER_LEN + expected, actual: bytes.len() });
        }
        BloomFilter::from_bit_bytes(m, k, seed, body)
    }

    pub fn to_hex(&self) -> String {
        self.bit_bytes().iter().map(|b| format!("{b:02x}")).collect()
    }
}

struct Probe {
    h_a: u64,
    h_b: u64,
    m: u64,
    next: u16,
    k: u16,
}

impl Iterator for Probe {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.next == self.k {
            return None;
        }
        let z = self.h_a.wrapping_add(u64::from(self.next).wrapping_mul(self.h_b));
        self.next += 1;
        Some((mix64(z) % self.m) as usize)
    }
}
