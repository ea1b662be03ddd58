//! Affine feature maps and their composition.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// One invertible affine map `y = A x + b`.
#[derive(Clone, Debug, PartialEq)]
pub enum AffineStep {
    /// `y = scale * x + shift`, element-wise; every scale is positive.
    Diagonal { scale: Vec<f64>, shift: Vec<f64> },
    /// `y = matrix x + shift` with an invertible matrix.
    Full {
        matrix: DMatrix<f64>,
        shift: DVector<f64>,
    },
}

impl AffineStep {
    pub fn identity(dim: usize) -> Self {
        AffineStep::Diagonal {
            scale: vec![1.0; dim],
            shift: vec![0.0; dim],
        }
    }

    pub fn diagonal(scale: Vec<f64>, shift: Vec<f64>) -> Result<Self> {
        if scale.len() != shift.len() {
            return Err(Error::InvalidInput("scale and shift lengths differ".into()));
        }
        if let Some(s) = scale.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::Alignment(format!("affine scale {s} is not positive")));
        }
        Ok(AffineStep::Diagonal { scale, shift })
    }

    pub fn dim(&self) -> usize {
        match self {
            AffineStep::Diagonal { scale, .. } => scale.len(),
            AffineStep::Full { shift, .. } => shift.len(),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            AffineStep::Diagonal { scale, shift } => x
                .iter()
                .zip(scale)
                .zip(shift)
                .map(|((v, a), b)| a * v + b)
                .collect(),
            AffineStep::Full { matrix, shift } => {
                let y = matrix * DVector::from_column_slice(x) + shift;
                y.iter().copied().collect()
            }
        }
    }

    pub fn inverse(&self) -> Result<Self> {
        match self {
            AffineStep::Diagonal { scale, shift } => Ok(AffineStep::Diagonal {
                scale: scale.iter().map(|a| 1.0 / a).collect(),
                shift: shift.iter().zip(scale).map(|(b, a)| -b / a).collect(),
            }),
            AffineStep::Full { matrix, shift } => {
                let inv = matrix
                    .clone()
                    .try_inverse()
                    .ok_or_else(|| Error::Alignment("affine matrix is singular".into()))?;
                let shift = -(&inv * shift);
                Ok(AffineStep::Full { matrix: inv, shift })
            }
        }
    }

    fn as_full(&self) -> (DMatrix<f64>, DVector<f64>) {
        match self {
            AffineStep::Diagonal { scale, shift } => (
                DMatrix::from_diagonal(&DVector::from_column_slice(scale)),
                DVector::from_column_slice(shift),
            ),
            AffineStep::Full { matrix, shift } => (matrix.clone(), shift.clone()),
        }
    }

    /// `then(self)`: apply `self` first, then `next`.
    pub fn then(&self, next: &AffineStep) -> AffineStep {
        match (self, next) {
            (
                AffineStep::Diagonal { scale: a1, shift: b1 },
                AffineStep::Diagonal { scale: a2, shift: b2 },
            ) => AffineStep::Diagonal {
                scale: a1.iter().zip(a2).map(|(x, y)| x * y).collect(),
                shift: b1.iter().zip(a2).zip(b2).map(|((b, a), c)| a * b + c).collect(),
            },
            _ => {
                let (m1, s1) = self.as_full();
                let (m2, s2) = next.as_full();
                AffineStep::Full {
                    matrix: &m2 * m1,
                    shift: &m2 * s1 + s2,
                }
            }
        }
    }
}

/// An ordered chain of affine steps from a target feature frame into a
/// source feature frame. The empty chain is the identity.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TransferMap {
    pub steps: Vec<AffineStep>,
    /// Path parameters of the nodes visited, target first.
    pub nodes: Vec<f64>,
    /// Normalised parameter-space distance covered by each step.
    pub step_distances: Vec<f64>,
}

impl TransferMap {
    pub fn identity() -> Self {
        TransferMap::default()
    }

    pub fn from_step(step: AffineStep) -> Self {
        TransferMap {
            steps: vec![step],
            nodes: vec![0.0, 1.0],
            step_distances: vec![0.0],
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.steps.iter().fold(x.to_vec(), |v, s| s.apply(&v))
    }

    pub fn apply_all(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.apply(r)).collect()
    }

    /// Applies `self`, then `next`.
    pub fn then(&self, next: &TransferMap) -> TransferMap {
        let mut steps = self.steps.clone();
        steps.extend(next.steps.iter().cloned());
        let mut step_distances = self.step_distances.clone();
        step_distances.extend(&next.step_distances);
        TransferMap {
            steps,
            nodes: Vec::new(),
            step_distances,
        }
    }

    pub fn inverse(&self) -> Result<TransferMap> {
        let steps = self
            .steps
            .iter()
            .rev()
            .map(AffineStep::inverse)
            .collect::<Result<Vec<_>>>()?;
        Ok(TransferMap {
            steps,
            nodes: self.nodes.iter().rev().copied().collect(),
            step_distances: self.step_distances.iter().rev().copied().collect(),
        })
    }

    /// The single affine map equal to the whole chain, or `None` if empty.
    pub fn collapse(&self) -> Option<AffineStep> {
        let mut it = self.steps.iter();
        let first = it.next()?.clone();
        Some(it.fold(first, |acc, s| acc.then(s)))
    }

    pub fn total_distance(&self) -> f64 {
        self.step_distances.iter().sum()
    }
}
