//! Fixed-length bit strings.
//!
//! Bit 0 is the leftmost character of the text form and the most significant
//! bit of [`BitString::to_index`]. Ordering is lexicographic for equal lengths.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct BitString {
    len: usize,
    // bit k lives in words[k / 64] at position 63 - k % 64
    words: Vec<u64>,
}

fn nwords(len: usize) -> usize {
    len.div_ceil(64)
}

impl BitString {
    pub fn zeros(len: usize) -> Self {
        BitString { len, words: vec![0; nwords(len)] }
    }

    pub fn ones(len: usize) -> Self {
        let mut s = Self::zeros(len);
        for k in 0..len {
            s.set(k, true);
        }
        s
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut s = Self::zeros(bits.len());
        for (k, &b) in bits.iter().enumerate() {
            s.set(k, b);
        }
        s
    }

    /// Builds a string from the low `len` bits of `value`, most significant first.
    pub fn from_index(value: u64, len: usize) -> Self {
        assert!(len <= 64, "from_index supports at most 64 bits");
        let mut s = Self::zeros(len);
        if len > 0 {
            let masked = if len == 64 { value } else { value & ((1u64 << len) - 1) };
            s.words[0] = masked << (64 - len);
        }
        s
    }

    pub fn to_index(&self) -> u64 {
        assert!(self.len <= 64, "to_index supports at most 64 bits");
        if self.len == 0 {
            0
        } else {
            self.words[0] >> (64 - self.len)
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, k: usize) -> bool {
        assert!(k < self.len, "bit index {k} out of range {}", self.len);
        (self.words[k / 64] >> (63 - k % 64)) & 1 == 1
    }

    pub fn set(&mut self, k: usize, v: bool) {
        assert!(k < self.len, "bit index {k} out of range {}", self.len);
        let mask = 1u64 << (63 - k % 64);
        if v {
            self.words[k / 64] |= mask;
        } else {
            self.words[k / 64] &= !mask;
        }
    }

    pub fn flip(&mut self, k: usize) {
        let v = self.get(k);
        self.set(k, !v);
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |k| self.get(k))
    }

    fn check_len(&self, other: &BitString) -> Result<()> {
        if self.len != other.len {
            return Err(Error::LengthMismatch { expected: self.len, got: other.len });
        }
        Ok(())
    }

    /// Bitwise xor. Panics on length mismatch; see [`BitString::try_xor`].
    pub fn xor(&self, other: &BitString) -> BitString {
        self.try_xor(other).expect("xor of bit strings with different lengths")
    }

    pub fn try_xor(&self, other: &BitString) -> Result<BitString> {
        self.check_len(other)?;
        let words = self.words.iter().zip(&other.words).map(|(a, b)| a ^ b).collect();
        Ok(BitString { len: self.len, words })
    }

    pub fn xor_assign(&mut self, other: &BitString) {
        assert_eq!(self.len, other.len, "xor of bit strings with different lengths");
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    pub fn and(&self, other: &BitString) -> BitString {
        assert_eq!(self.len, other.len, "and of bit strings with different lengths");
        let words = self.words.iter().zip(&other.words).map(|(a, b)| a & b).collect();
        BitString { len: self.len, words }
    }

    pub fn not(&self) -> BitString {
        let mut s = self.clone();
        for w in s.words.iter_mut() {
            *w = !*w;
        }
        s.clear_tail();
        s
    }

    fn clear_tail(&mut self) {
        let r = self.len % 64;
        if r != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= !0u64 << (64 - r);
            }
        }
    }

    /// Parity of the bitwise product, i.e. x·y mod 2.
    pub fn dot(&self, other: &BitString) -> bool {
        assert_eq!(self.len, other.len, "dot of bit strings with different lengths");
        let ones: u32 = self.words.iter().zip(&other.words).map(|(a, b)| (a & b).count_ones()).sum();
        ones & 1 == 1
    }

    pub fn weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn concat(&self, other: &BitString) -> BitString {
        let mut out = BitString::zeros(self.len + other.len);
        for k in 0..self.len {
            out.set(k, self.get(k));
        }
        for k in 0..other.len {
            out.set(self.len + k, other.get(k));
        }
        out
    }

    /// Splits into (bits where `s` is 0, bits where `s` is 1), keeping order.
    pub fn split_by(&self, s: &BitString) -> (BitString, BitString) {
        assert_eq!(self.len, s.len, "split mask length mismatch");
        let mut zero = Vec::new();
        let mut one = Vec::new();
        for k in 0..self.len {
            if s.get(k) {
                one.push(self.get(k));
            } else {
                zero.push(self.get(k));
            }
        }
        (BitString::from_bools(&zero), BitString::from_bools(&one))
    }

    /// Inverse of [`BitString::split_by`].
    pub fn merge_by(zero: &BitString, one: &BitString, s: &BitString) -> BitString {
        let w = s.weight();
        assert_eq!(one.len, w, "merge: one-part length mismatch");
        assert_eq!(zero.len, s.len - w, "merge: zero-part length mismatch");
        let mut out = BitString::zeros(s.len);
        let (mut a, mut b) = (0, 0);
        for k in 0..s.len {
            if s.get(k) {
                out.set(k, one.get(b));
                b += 1;
            } else {
                out.set(k, zero.get(a));
                a += 1;
            }
        }
        out
    }

    /// All strings of length `len` in increasing order.
    pub fn all(len: usize) -> impl Iterator<Item = BitString> {
        assert!(len < 64, "enumeration limited to fewer than 64 bits");
        (0..1u64 << len).map(move |v| BitString::from_index(v, len))
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut bits = Vec::with_capacity(s.len());
        for c in s.trim().chars() {
            match c {
                '0' => bits.push(false),
                '1' => bits.push(true),
                _ => return Err(Error::Parse(format!("invalid bit character {c:?} in {s:?}"))),
            }
        }
        Ok(BitString::from_bools(&bits))
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn hamming(x: &BitString, y: &BitString) -> usize {
    x.xor(y).weight()
}
