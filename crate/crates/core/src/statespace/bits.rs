// SPDX-License-Identifier: Apache-2.0

use std::fmt;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use smallvec::{smallvec, SmallVec};

/// Fixed-width bit vector. Bit 0 is the first state element or primary
/// input.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bits {
    width: u32,
    words: SmallVec<[u64; 2]>,
}

impl Bits {
    pub fn zeros(width: usize) -> Self {
        Bits {
            width: width as u32,
            words: smallvec![0; width.div_ceil(64)],
        }
    }

    pub fn from_fn(width: usize, mut f: impl FnMut(usize) -> bool) -> Self {
        let mut b = Bits::zeros(width);
        for i in 0..width {
            if f(i) {
                b.words[i / 64] |= 1 << (i % 64);
            }
        }
        b
    }

    pub fn from_bools(v: &[bool]) -> Self {
        Bits::from_fn(v.len(), |i| v[i])
    }

    /// Enumeration order: bit 0 is the most significant digit of `counter`,
    /// so counting visits vectors in lexicographic order.
    pub fn from_counter(counter: u64, width: usize) -> Self {
        Bits::from_fn(width, |i| (counter >> (width - 1 - i)) & 1 == 1)
    }

    pub fn width(&self) -> usize {
        self.width as usize
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.width(), "bit {i} out of range {}", self.width);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, v: bool) {
        assert!(i < self.width(), "bit {i} out of range {}", self.width);
        if v {
            self.words[i / 64] |= 1 << (i % 64);
        } else {
            self.words[i / 64] &= !(1 << (i % 64));
        }
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.width()).map(|i| self.get(i)).collect()
    }

    pub fn parse(s: &str) -> Option<Self> {
        let v: Option<Vec<bool>> = s
            .chars()
            .map(|c| match c {
                '0' => Some(false),
                '1' => Some(true),
                _ => None,
            })
            .collect();
        v.map(|v| Bits::from_bools(&v))
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.width() {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl Serialize for Bits {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Bits {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Bits::parse(&s).ok_or_else(|| de::Error::custom(format!("bad bit string `{s}`")))
    }
}

impl fmt::Debug for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bits({self})")
    }
}
