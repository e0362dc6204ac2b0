use std::fmt::Write as _;

use crate::basis::BasisIndexer;
use crate::error::{dim_mismatch, domain, HwError, Result};

/// Real amplitude vector over the weight-k basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceState {
    indexer: BasisIndexer,
    amplitudes: Vec<f64>,
}

impl SubspaceState {
    /// Basis state `e_index`.
    pub fn basis(indexer: BasisIndexer, index: usize) -> Result<Self> {
        if index >= indexer.dim() {
            return Err(domain!("basis index {index} out of range for {indexer}"));
        }
        let mut amplitudes = vec![0.0; indexer.dim()];
        amplitudes[index] = 1.0;
        Ok(Self { indexer, amplitudes })
    }

    /// Wrap raw amplitudes without normalizing.
    pub fn from_raw(indexer: BasisIndexer, amplitudes: Vec<f64>) -> Result<Self> {
        if amplitudes.len() != indexer.dim() {
            return Err(dim_mismatch!(
                "{} amplitudes supplied for dimension {}",
                amplitudes.len(),
                indexer.dim()
            ));
        }
        Ok(Self { indexer, amplitudes })
    }

    /// Wrap and normalize; rejects non-finite entries and the zero vector.
    pub fn normalized(indexer: BasisIndexer, mut amplitudes: Vec<f64>) -> Result<Self> {
        if amplitudes.iter().any(|a| !a.is_finite()) {
            return Err(HwError::Invalid("amplitudes contain non-finite entries".into()));
        }
        let norm = l2_norm(&amplitudes);
        if norm == 0.0 {
            return Err(HwError::Invalid("cannot normalize the zero vector".into()));
        }
        amplitudes.iter_mut().for_each(|a| *a /= norm);
        Self::from_raw(indexer, amplitudes)
    }

    pub fn indexer(&self) -> &BasisIndexer {
        &self.indexer
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [f64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<f64> {
        self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.amplitudes)
    }

    pub fn dot(&self, other: &SubspaceState) -> Result<f64> {
        self.check_same(other)?;
        Ok(dot(&self.amplitudes, &other.amplitudes))
    }

    pub(crate) fn check_same(&self, other: &SubspaceState) -> Result<()> {
        if self.indexer != other.indexer {
            return Err(dim_mismatch!("states live in {} and {}", self.indexer, other.indexer));
        }
        Ok(())
    }

    /// `bitstring,amplitude` CSV with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bitstring,amplitude\n");
        for (i, a) in self.amplitudes.iter().enumerate() {
            let bits = self.indexer.unrank_unchecked(i);
            let _ = writeln!(out, "{},{:.17e}", self.indexer.format(bits), a);
        }
        out
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn l2_norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
