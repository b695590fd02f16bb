//! Succinct set encodings over trit strings.
//!
//! A set `S = {y_1 < ... < y_k} ⊆ {1..N}` is stored as the binary digits of
//! `y_1` and of the successive gaps `y_i - y_{i-1}` (no leading zeros, most
//! significant digit first), each block terminated by the trit `2`, padded
//! with zeros to a capacity that depends only on `(N, k)`.
//!
//! The block encoding splits a sequence into sub-blocks whose sizes follow
//! the binary expansion of the element count; generating and uncomputing
//! those sub-blocks independently is what keeps the set-generation recursion
//! cheap.
//!
//! Reversible-circuit counterparts of the set operations live in [`progs`].

pub mod progs;

use std::fmt;

use num_bigint::BigUint;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EncodingError {
    #[error("element {x} outside 1..={n}")]
    ElementOutOfRange { x: u64, n: u64 },
    #[error("empty set has no encoding")]
    EmptySet,
    #[error("duplicate element {0}")]
    DuplicateElement(u64),
    #[error("k={k} invalid for domain size {n}")]
    InvalidK { k: u64, n: u64 },
    #[error("malformed encoding: {0}")]
    MalformedEncoding(String),
}

/// Exact `floor(mul * log2(num/den))` for `num > den >= 1`, `mul >= 1`.
///
/// A float estimate is verified (and nudged if necessary) with exact big
/// integer comparisons, so boundary cases like integer logs never suffer
/// rounding drift.
fn floor_mul_log2(mul: u64, num: u64, den: u64) -> u64 {
    assert!(den >= 1 && num > den && mul >= 1);
    let est = (mul as f64) * ((num as f64) / (den as f64)).log2();
    let mut t = est.floor().max(0.0) as u64;
    let num_pow = BigUint::from(num).pow(mul as u32);
    let den_pow = BigUint::from(den).pow(mul as u32);
    // want: den_pow << t <= num_pow < den_pow << (t+1)
    let le = |t: u64| (&den_pow << t) <= num_pow;
    while !le(t) {
        t -= 1;
    }
    while le(t + 1) {
        t += 1;
    }
    t
}

/// Trit capacity of the gap encoding of a k-element subset of `{1..N}`.
pub fn capacity(n: u64, k: u64) -> u64 {
    assert!(k >= 1 && k <= n, "capacity requires 1 <= k <= n");
    floor_mul_log2(k, n + k, k) + 2 * k
}

/// Trit bound for the block encoding of k distinct elements of `{1..N}`.
pub fn eff_bound(n: u64, k: u64) -> u64 {
    assert!(k >= 1 && k <= n);
    floor_mul_log2(2 * k, n + k, k) + 8 * k
}

/// Exponents of the binary expansion of `k`, descending.
pub fn binary_expansion(k: u64) -> Vec<u32> {
    assert!(k >= 1);
    (0..64u32).rev().filter(|&a| (k >> a) & 1 == 1).collect()
}

/// A fixed-length string of base-3 cells. Debug/display form is the raw
/// digit string, e.g. `110212112101210200000`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TritString {
    trits: Vec<u8>,
}

impl TritString {
    pub fn from_trits(trits: Vec<u8>) -> Self {
        assert!(trits.iter().all(|&t| t < 3));
        TritString { trits }
    }

    pub fn trits(&self) -> &[u8] {
        &self.trits
    }

    pub fn len(&self) -> usize {
        self.trits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trits.is_empty()
    }

    pub fn parse(s: &str) -> Result<Self, EncodingError> {
        let mut trits = Vec::with_capacity(s.len());
        for ch in s.chars() {
            match ch {
                '0' => trits.push(0),
                '1' => trits.push(1),
                '2' => trits.push(2),
                _ => {
                    return Err(EncodingError::MalformedEncoding(format!(
                        "invalid trit character {ch:?}"
                    )))
                }
            }
        }
        Ok(TritString { trits })
    }
}

impl fmt::Display for TritString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &t in &self.trits {
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

fn push_binary_msb_first(out: &mut Vec<u8>, value: u64) {
    debug_assert!(value >= 1);
    let bits = 64 - value.leading_zeros();
    for i in (0..bits).rev() {
        out.push(((value >> i) & 1) as u8);
    }
}

fn checked_sorted(n: u64, s: &[u64]) -> Result<Vec<u64>, EncodingError> {
    if s.is_empty() {
        return Err(EncodingError::EmptySet);
    }
    for &x in s {
        if x < 1 || x > n {
            return Err(EncodingError::ElementOutOfRange { x, n });
        }
    }
    let mut sorted = s.to_vec();
    sorted.sort_unstable();
    for pair in sorted.windows(2) {
        if pair[0] == pair[1] {
            return Err(EncodingError::DuplicateElement(pair[0]));
        }
    }
    Ok(sorted)
}

/// Gap encoding of a nonempty subset of `{1..N}`, zero-padded to
/// `capacity(N, |S|)` trits.
pub fn encode_basic(n: u64, s: &[u64]) -> Result<TritString, EncodingError> {
    let sorted = checked_sorted(n, s)?;
    let k = sorted.len() as u64;
    let cap = capacity(n, k) as usize;
    let mut trits = Vec::with_capacity(cap);
    let mut prev = 0u64;
    for &y in &sorted {
        push_binary_msb_first(&mut trits, y - prev);
        trits.push(2);
        prev = y;
    }
    assert!(trits.len() <= cap, "encoding exceeded its capacity bound");
    trits.resize(cap, 0);
    Ok(TritString { trits })
}

/// Inverse of [`encode_basic`]; accepts any amount of trailing zero padding.
pub fn decode_basic(n: u64, k: u64, t: &TritString) -> Result<Vec<u64>, EncodingError> {
    if k < 1 || k > n {
        return Err(EncodingError::InvalidK { k, n });
    }
    let trits = &t.trits;
    let mut out = Vec::with_capacity(k as usize);
    let mut pos = 0usize;
    let mut prev = 0u64;
    for block in 0..k {
        let start = pos;
        let mut delta: u64 = 0;
        loop {
            match trits.get(pos) {
                None => {
                    return Err(EncodingError::MalformedEncoding(format!(
                        "missing separator for block {block}"
                    )))
                }
                Some(2) => break,
                Some(&d) => {
                    if pos == start && d == 0 {
                        return Err(EncodingError::MalformedEncoding(format!(
                            "leading zero in block {block}"
                        )));
                    }
                    delta = delta * 2 + d as u64;
                    pos += 1;
                }
            }
        }
        if pos == start {
            return Err(EncodingError::MalformedEncoding(format!(
                "empty digit block {block}"
            )));
        }
        pos += 1; // separator
        prev += delta;
        if prev > n {
            return Err(EncodingError::MalformedEncoding(format!(
                "element {prev} exceeds domain {n}"
            )));
        }
        out.push(prev);
    }
    if trits[pos..].iter().any(|&t| t != 0) {
        return Err(EncodingError::MalformedEncoding(
            "nonzero trits after final block".into(),
        ));
    }
    Ok(out)
}

/// Block encoding of an ordered sequence of distinct elements: one gap
/// encoding per block, block sizes following the binary expansion of the
/// length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EffEncoding {
    n: u64,
    /// (block element count, block encoding) in expansion order.
    blocks: Vec<(u64, TritString)>,
}

impl EffEncoding {
    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn blocks(&self) -> &[(u64, TritString)] {
        &self.blocks
    }

    pub fn total_trits(&self) -> u64 {
        self.blocks.iter().map(|(_, t)| t.len() as u64).sum()
    }
}

pub fn encode_eff(n: u64, z: &[u64]) -> Result<EffEncoding, EncodingError> {
    if z.is_empty() {
        return Err(EncodingError::EmptySet);
    }
    let k = z.len() as u64;
    if k > n {
        return Err(EncodingError::InvalidK { k, n });
    }
    // distinctness across the whole sequence
    let mut seen = z.to_vec();
    seen.sort_unstable();
    for pair in seen.windows(2) {
        if pair[0] == pair[1] {
            return Err(EncodingError::DuplicateElement(pair[0]));
        }
    }
    let mut blocks = Vec::new();
    let mut start = 0usize;
    for a in binary_expansion(k) {
        let size = 1usize << a;
        let slice = &z[start..start + size];
        blocks.push((size as u64, encode_basic(n, slice)?));
        start += size;
    }
    Ok(EffEncoding { n, blocks })
}

/// Per-block element sets (order within a block is not recoverable).
pub fn decode_eff(enc: &EffEncoding) -> Result<Vec<Vec<u64>>, EncodingError> {
    enc.blocks
        .iter()
        .map(|(size, t)| decode_basic(enc.n, *size, t))
        .collect()
}

/// Flattened sorted element set of a block encoding.
pub fn decode_eff_set(enc: &EffEncoding) -> Result<Vec<u64>, EncodingError> {
    let mut all: Vec<u64> = decode_eff(enc)?.into_iter().flatten().collect();
    all.sort_unstable();
    Ok(all)
}
