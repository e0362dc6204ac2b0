//! Dense indexing of the weight-k computational basis.
//!
//! A basis state on `n` qubits is stored as a `u64` mask in which qubit `q`
//! occupies bit `n - 1 - q`, so qubit 0 is the leftmost character of the
//! printed bitstring. Weight-k strings are indexed in descending
//! lexicographic order (`110`, `101`, `011` for `n = 3, k = 2`), which is
//! descending numeric order of the masks. Ranking goes through the
//! combinatorial number system: the ascending (colex) rank of a mask with
//! set bit positions `c_1 < ... < c_k` is `sum_t C(c_t, t)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Largest supported qubit count; masks are `u64` and `C(63, k)` fits in `u64`.
pub const MAX_QUBITS: usize = 63;

/// `C(a, b)` for `a <= 64`, saturating at `u64::MAX` (never reached for `a <= 63`).
pub fn binomial(a: usize, b: usize) -> u64 {
    if b > a {
        return 0;
    }
    let b = b.min(a - b);
    let mut acc: u128 = 1;
    for t in 0..b {
        acc = acc * (a - t) as u128 / (t + 1) as u128;
    }
    u64::try_from(acc).unwrap_or(u64::MAX)
}

/// Bijection between weight-`k` bitstrings of length `n` and `0..C(n,k)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "IndexerShape", into = "IndexerShape")]
pub struct BasisIndexer {
    n: usize,
    k: usize,
    dim: usize,
    // binom[a * (k + 1) + b] = C(a, b) for a <= n, b <= k
    binom: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct IndexerShape {
    n: usize,
    k: usize,
}

impl TryFrom<IndexerShape> for BasisIndexer {
    type Error = crate::error::HwError;
    fn try_from(s: IndexerShape) -> Result<Self> {
        BasisIndexer::new(s.n, s.k)
    }
}

impl From<BasisIndexer> for IndexerShape {
    fn from(b: BasisIndexer) -> Self {
        IndexerShape { n: b.n, k: b.k }
    }
}

impl BasisIndexer {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if n == 0 {
            return Err(domain!("qubit count must be at least 1"));
        }
        if n > MAX_QUBITS {
            return Err(domain!("qubit count {n} exceeds the supported maximum {MAX_QUBITS}"));
        }
        if k > n {
            return Err(domain!("Hamming weight {k} exceeds qubit count {n}"));
        }
        let dim = usize::try_from(binomial(n, k))
            .map_err(|_| domain!("C({n},{k}) does not fit in usize"))?;
        let mut binom = vec![0u64; (n + 1) * (k + 1)];
        for a in 0..=n {
            for b in 0..=k {
                binom[a * (k + 1) + b] = binomial(a, b);
            }
        }
        Ok(Self { n, k, dim, binom })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    /// `d_k = C(n, k)`.
    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn c(&self, a: usize, b: usize) -> u64 {
        self.binom[a * (self.k + 1) + b]
    }

    /// Mask bit used for qubit `q`.
    #[inline]
    pub fn qubit_bit(&self, q: usize) -> u64 {
        1u64 << (self.n - 1 - q)
    }

    /// Occupation of qubit `q` in `bits`.
    #[inline]
    pub fn occupied(&self, bits: u64, q: usize) -> bool {
        bits & self.qubit_bit(q) != 0
    }

    pub fn rank(&self, bits: u64) -> Result<usize> {
        if self.n < 64 && bits >> self.n != 0 {
            return Err(domain!("bitstring {bits:#x} has bits beyond qubit count {}", self.n));
        }
        let weight = bits.count_ones() as usize;
        if weight != self.k {
            return Err(domain!("bitstring has weight {weight}, expected {}", self.k));
        }
        Ok(self.rank_unchecked(bits))
    }

    /// Rank without validation; `bits` must have weight `k` within `n` bits.
    #[inline]
    pub fn rank_unchecked(&self, bits: u64) -> usize {
        let mut colex = 0u64;
        let mut rest = bits;
        let mut t = 1;
        while rest != 0 {
            let pos = rest.trailing_zeros() as usize;
            colex += self.c(pos, t);
            rest &= rest - 1;
            t += 1;
        }
        self.dim - 1 - colex as usize
    }

    pub fn unrank(&self, index: usize) -> Result<u64> {
        if index >= self.dim {
            return Err(domain!("index {index} out of range for dimension {}", self.dim));
        }
        Ok(self.unrank_unchecked(index))
    }

    #[inline]
    pub fn unrank_unchecked(&self, index: usize) -> u64 {
        let mut colex = (self.dim - 1 - index) as u64;
        let mut bits = 0u64;
        let mut pos = self.n;
        for t in (1..=self.k).rev() {
            // largest pos with C(pos, t) <= colex; pos >= t - 1 always qualifies
            pos -= 1;
            while self.c(pos, t) > colex {
                pos -= 1;
            }
            bits |= 1u64 << pos;
            colex -= self.c(pos, t);
        }
        bits
    }

    /// All basis masks in index order.
    pub fn states(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.dim).map(move |i| self.unrank_unchecked(i))
    }

    /// Printable bitstring, qubit 0 first.
    pub fn format(&self, bits: u64) -> String {
        (0..self.n)
            .map(|q| if self.occupied(bits, q) { '1' } else { '0' })
            .collect()
    }

    /// Parse a `0`/`1` string of length `n` (qubit 0 first) and check its weight.
    pub fn parse(&self, s: &str) -> Result<u64> {
        let s = s.trim();
        if s.len() != self.n {
            return Err(domain!("bitstring '{s}' has length {}, expected {}", s.len(), self.n));
        }
        let mut bits = 0u64;
        for (q, ch) in s.chars().enumerate() {
            match ch {
                '1' => bits |= self.qubit_bit(q),
                '0' => {}
                _ => return Err(domain!("bitstring '{s}' contains '{ch}'")),
            }
        }
        self.rank(bits)?;
        Ok(bits)
    }

    /// Basis state with the first `k` qubits occupied (index 0 in this ordering).
    pub fn leading_ones(&self) -> u64 {
        (0..self.k).fold(0, |acc, q| acc | self.qubit_bit(q))
    }
}

impl fmt::Display for BasisIndexer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "B(n={}, k={}, d={})", self.n, self.k, self.dim)
    }
}

/// Weight-`k` bitstrings of length `n`, canonical order.
pub fn enumerate_basis(n: usize, k: usize) -> Result<Vec<u64>> {
    let idx = BasisIndexer::new(n, k)?;
    Ok(idx.states().collect())
}
