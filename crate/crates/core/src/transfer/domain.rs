//! Feature samples of one structure, and normal-condition alignment.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::affine::AffineStep;
use crate::error::{Error, Result};

/// Label of the normal (undamaged) condition.
pub const HEALTHY: usize = 0;

/// A sample matrix with optional labels and its normal-condition rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    pub features: Vec<Vec<f64>>,
    pub labels: Option<Vec<usize>>,
    pub nc_rows: Vec<usize>,
}

/// Per-dimension mean and population standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Domain {
    /// A labelled domain whose normal condition is [`HEALTHY`].
    pub fn labelled(features: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::InvalidInput(format!(
                "{} feature rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        let nc_rows = labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == HEALTHY)
            .map(|(i, _)| i)
            .collect();
        let d = Domain {
            features,
            labels: Some(labels),
            nc_rows,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self
            .features
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidInput("domain has no samples".into()))?;
        if dim == 0 || self.features.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidInput("feature rows have inconsistent width".into()));
        }
        if self.features.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("features contain non-finite values".into()));
        }
        if let Some(&bad) = self.nc_rows.iter().find(|&&i| i >= self.features.len()) {
            return Err(Error::InvalidInput(format!("normal-condition row {bad} out of range")));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// The same samples without labels, as a target domain is seen.
    pub fn unlabelled(&self) -> Domain {
        Domain {
            features: self.features.clone(),
            labels: None,
            nc_rows: self.nc_rows.clone(),
        }
    }

    pub fn nc_features(&self) -> Vec<Vec<f64>> {
        self.nc_rows.iter().map(|&i| self.features[i].clone()).collect()
    }

    pub fn nc_moments(&self) -> Result<Moments> {
        if self.nc_rows.is_empty() {
            return Err(Error::Alignment("no normal-condition samples".into()));
        }
        Ok(moments(self.nc_rows.iter().map(|&i| self.features[i].as_slice()), self.dim()))
    }

    /// Mean of each labelled class, in ascending label order.
    pub fn class_means(&self) -> Vec<(usize, Vec<f64>)> {
        let Some(labels) = &self.labels else {
            return Vec::new();
        };
        let mut classes: Vec<usize> = labels.clone();
        classes.sort_unstable();
        classes.dedup();
        classes
            .into_iter()
            .map(|c| {
                let rows = self
                    .features
                    .iter()
                    .zip(labels)
                    .filter(|(_, &l)| l == c)
                    .map(|(r, _)| r.as_slice());
                (c, moments(rows, self.dim()).mean)
            })
            .collect()
    }
}

pub fn moments<'a>(rows: impl Iterator<Item = &'a [f64]>, dim: usize) -> Moments {
    let rows: Vec<&[f64]> = rows.collect();
    let n = rows.len() as f64;
    let mean: Vec<f64> = (0..dim).map(|d| rows.iter().map(|r| r[d]).sum::<f64>() / n).collect();
    let std = (0..dim)
        .map(|d| (rows.iter().map(|r| (r[d] - mean[d]).powi(2)).sum::<f64>() / n).sqrt())
        .collect();
    Moments { mean, std }
}

/// How alignment treats correlations between feature dimensions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alignment {
    /// Per-dimension mean and standard deviation.
    #[default]
    Diagonal,
    /// Mean and full covariance (whitening).
    Full,
}

/// Standardises `features` by the mean and spread of the rows `nc_rows`.
/// Dimensions with zero spread are only shifted.
pub fn nca(features: &[Vec<f64>], nc_rows: &[usize]) -> Result<(Vec<Vec<f64>>, AffineStep)> {
    nca_with(features, nc_rows, Alignment::Diagonal)
}

pub fn nca_with(
    features: &[Vec<f64>],
    nc_rows: &[usize],
    alignment: Alignment,
) -> Result<(Vec<Vec<f64>>, AffineStep)> {
    if nc_rows.is_empty() {
        return Err(Error::Alignment("empty normal-condition set".into()));
    }
    let dim = features.first().map_or(0, Vec::len);
    if let Some(&bad) = nc_rows.iter().find(|&&i| i >= features.len()) {
        return Err(Error::Alignment(format!("normal-condition row {bad} out of range")));
    }
    let m = moments(nc_rows.iter().map(|&i| features[i].as_slice()), dim);
    let step = match alignment {
        Alignment::Diagonal => {
            let scale: Vec<f64> = m.std.iter().map(|&s| if s > 0.0 { 1.0 / s } else { 1.0 }).collect();
            let shift = m.mean.iter().zip(&scale).map(|(mu, a)| -mu * a).collect();
            AffineStep::Diagonal { scale, shift }
        }
        Alignment::Full => {
            let whiten = whitening(features, nc_rows, &m.mean)?;
            let shift = -(&whiten * DVector::from_column_slice(&m.mean));
            AffineStep::Full {
                matrix: whiten,
                shift,
            }
        }
    };
    let aligned = features.iter().map(|r| step.apply(r)).collect();
    Ok((aligned, step))
}

/// `L^-1` for the Cholesky factor `L` of the normal-condition covariance.
pub(crate) fn whitening(features: &[Vec<f64>], rows: &[usize], mean: &[f64]) -> Result<DMatrix<f64>> {
    colouring(features, rows, mean)?
        .try_inverse()
        .ok_or_else(|| Error::Alignment("covariance factor is singular".into()))
}

/// Cholesky factor of the covariance of `rows`.
pub(crate) fn colouring(features: &[Vec<f64>], rows: &[usize], mean: &[f64]) -> Result<DMatrix<f64>> {
    let dim = mean.len();
    let mut cov = DMatrix::<f64>::zeros(dim, dim);
    for &i in rows {
        let d = DVector::from_iterator(dim, features[i].iter().zip(mean).map(|(x, m)| x - m));
        cov += &d * d.transpose();
    }
    cov /= rows.len() as f64;
    nalgebra::Cholesky::new(cov)
        .map(|c| c.l())
        .ok_or_else(|| Error::Alignment("normal-condition covariance is not positive definite".into()))
}
