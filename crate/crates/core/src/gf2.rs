//! Dense linear algebra over the two-element field.
//!
//! Vectors are packed bitsets; all routines are plain Gaussian elimination and are
//! intended for the small exact computations in [`crate::chain`].

use alloc::vec;
use alloc::vec::Vec;

/// A fixed-length bit vector over GF(2).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitVec {
    len: usize,
    words: Vec<u64>,
}

impl BitVec {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn set(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn flip(&mut self, i: usize) {
        self.words[i / 64] ^= 1 << (i % 64);
    }

    pub fn xor_assign(&mut self, other: &BitVec) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= *b;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    /// Index of the highest set bit.
    pub fn highest(&self) -> Option<usize> {
        for (wi, w) in self.words.iter().enumerate().rev() {
            if *w != 0 {
                return Some(wi * 64 + 63 - w.leading_zeros() as usize);
            }
        }
        None
    }
}

/// Incremental echelon basis keyed by the highest set bit.
#[derive(Clone, Debug, Default)]
pub struct EchelonBasis {
    rows: Vec<Option<BitVec>>,
    rank: usize,
}

impl EchelonBasis {
    pub fn new(len: usize) -> Self {
        Self {
            rows: vec![None; len],
            rank: 0,
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Reduces `v` against the basis; returns the residue.
    pub fn reduce(&self, mut v: BitVec) -> BitVec {
        while let Some(h) = v.highest() {
            match &self.rows[h] {
                Some(row) => v.xor_assign(row),
                None => break,
            }
        }
        v
    }

    /// Inserts `v`; returns true if it was independent of the basis.
    pub fn insert(&mut self, v: BitVec) -> bool {
        let r = self.reduce(v);
        match r.highest() {
            Some(h) => {
                self.rows[h] = Some(r);
                self.rank += 1;
                true
            }
            None => false,
        }
    }

    pub fn contains(&self, v: &BitVec) -> bool {
        self.reduce(v.clone()).is_zero()
    }
}

/// Rank of the span of `cols`.
pub fn rank(len: usize, cols: &[BitVec]) -> usize {
    let mut basis = EchelonBasis::new(len);
    for c in cols {
        basis.insert(c.clone());
    }
    basis.rank()
}

/// Whether `target` lies in the span of `cols`.
pub fn in_span(len: usize, cols: &[BitVec], target: &BitVec) -> bool {
    let mut basis = EchelonBasis::new(len);
    for c in cols {
        basis.insert(c.clone());
    }
    basis.contains(target)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bv(len: usize, bits: &[usize]) -> BitVec {
        let mut v = BitVec::zeros(len);
        for b in bits {
            v.set(*b);
        }
        v
    }

    #[test]
    fn rank_of_dependent_columns() {
        let cols = [bv(3, &[0, 1]), bv(3, &[1, 2]), bv(3, &[0, 2])];
        assert_eq!(rank(3, &cols), 2);
        assert!(in_span(3, &cols, &bv(3, &[0, 2])));
        assert!(!in_span(3, &cols, &bv(3, &[0])));
    }

    #[test]
    fn highest_bit_across_words() {
        let v = bv(130, &[3, 129]);
        assert_eq!(v.highest(), Some(129));
        assert!(BitVec::zeros(70).highest().is_none());
    }
}
