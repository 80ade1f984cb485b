use serde::{Deserialize, Serialize};

use crate::bvge::{BvgePair, Region};
use crate::em::EmError;

/// A tied observation; `y = x₁ = x₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagObs {
    pub index: usize,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairObs {
    pub index: usize,
    pub x1: f64,
    pub x2: f64,
}

/// Observations split into the diagonal set and the two off-diagonal sets.
/// `index` is the row in the original input.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DataPartition {
    pub diag: Vec<DiagObs>,
    pub lower: Vec<PairObs>,
    pub upper: Vec<PairObs>,
}

impl DataPartition {
    pub fn n0(&self) -> usize {
        self.diag.len()
    }
    pub fn n1(&self) -> usize {
        self.lower.len()
    }
    pub fn n2(&self) -> usize {
        self.upper.len()
    }
    pub fn len(&self) -> usize {
        self.n0() + self.n1() + self.n2()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Back to classified pairs, in partition order (diagonal, lower, upper).
    pub fn pairs(&self) -> Vec<BvgePair> {
        let diag = self.diag.iter().map(|d| BvgePair { x1: d.y, x2: d.y, region: Region::Diagonal });
        let lower = self.lower.iter().map(|o| BvgePair { x1: o.x1, x2: o.x2, region: Region::Lower });
        let upper = self.upper.iter().map(|o| BvgePair { x1: o.x1, x2: o.x2, region: Region::Upper });
        diag.chain(lower).chain(upper).collect()
    }

    /// Partition already-classified pairs (as produced by the sampler).
    pub fn from_classified(pairs: &[BvgePair]) -> Result<Self, EmError> {
        if pairs.is_empty() {
            return Err(EmError::Empty);
        }
        let mut part = DataPartition::default();
        for (index, p) in pairs.iter().enumerate() {
            check_row(index, p.x1, p.x2)?;
            match p.region {
                Region::Diagonal => part.diag.push(DiagObs { index, y: p.x1 }),
                Region::Lower => part.lower.push(PairObs { index, x1: p.x1, x2: p.x2 }),
                Region::Upper => part.upper.push(PairObs { index, x1: p.x1, x2: p.x2 }),
            }
        }
        Ok(part)
    }
}

fn check_row(index: usize, x1: f64, x2: f64) -> Result<(), EmError> {
    if x1.is_finite() && x2.is_finite() && x1 > 0.0 && x2 > 0.0 {
        Ok(())
    } else {
        Err(EmError::InvalidObservation { index, x1, x2 })
    }
}

/// Classify raw pairs into `I₀`, `I₁`, `I₂` using the tie tolerance of
/// [`Region::classify`]. A tie within tolerance is stored with `y = x₁`.
pub fn partition_data(pairs: &[(f64, f64)], tie_tol: f64) -> Result<DataPartition, EmError> {
    if pairs.is_empty() {
        return Err(EmError::Empty);
    }
    let mut part = DataPartition::default();
    for (index, &(x1, x2)) in pairs.iter().enumerate() {
        check_row(index, x1, x2)?;
        match Region::classify(x1, x2, tie_tol) {
            Region::Diagonal => part.diag.push(DiagObs { index, y: x1 }),
            Region::Lower => part.lower.push(PairObs { index, x1, x2 }),
            Region::Upper => part.upper.push(PairObs { index, x1, x2 }),
        }
    }
    Ok(part)
}
