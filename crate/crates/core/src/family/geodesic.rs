//! Straight-line paths between instances and interpolating structures.

use std::sync::Arc;

use super::{contract, FamilyTemplate, StructureInstance, ThetaVector};
use crate::error::{Error, Result};

/// A straight segment in one family's coordinates. Coordinates in
/// `zero_set` form the contraction leg; all others form the morph leg. One
/// parameter `s` drives both.
#[derive(Clone, Debug, PartialEq)]
pub struct GeodesicPath {
    family: Arc<FamilyTemplate>,
    start: ThetaVector,
    end: ThetaVector,
    zero_set: Vec<usize>,
    /// True when the zero set is reached at `s = 1`.
    contracts_forward: bool,
}

/// Path from `a` to `b`. Instances of different families are joined in the
/// larger family through its declared contraction; the smaller endpoint is
/// lifted into those coordinates.
pub fn geodesic(a: &StructureInstance, b: &StructureInstance) -> Result<GeodesicPath> {
    let (fa, fb) = (a.family(), b.family());
    if fa.name == fb.name {
        return Ok(GeodesicPath {
            family: Arc::clone(fa),
            start: a.theta().clone(),
            end: b.theta().clone(),
            zero_set: Vec::new(),
            contracts_forward: true,
        });
    }
    if fa.contraction_to(&fb.name).is_some() {
        let map = contract(fa, fb)?;
        return Ok(GeodesicPath {
            family: Arc::clone(fa),
            start: a.theta().clone(),
            end: map.lift(b.theta(), a.theta()),
            zero_set: map.zero_set().to_vec(),
            contracts_forward: true,
        });
    }
    if fb.contraction_to(&fa.name).is_some() {
        let map = contract(fb, fa)?;
        return Ok(GeodesicPath {
            family: Arc::clone(fb),
            start: map.lift(a.theta(), b.theta()),
            end: b.theta().clone(),
            zero_set: map.zero_set().to_vec(),
            contracts_forward: false,
        });
    }
    Err(Error::NoPath(format!(
        "no contraction links families {} and {}",
        fa.name, fb.name
    )))
}

impl GeodesicPath {
    /// The family whose coordinates carry the path.
    pub fn family(&self) -> &Arc<FamilyTemplate> {
        &self.family
    }

    pub fn start(&self) -> &ThetaVector {
        &self.start
    }

    pub fn end(&self) -> &ThetaVector {
        &self.end
    }

    pub fn zero_set(&self) -> &[usize] {
        &self.zero_set
    }

    /// Scale of the contracted coordinates at `s` (1 = untouched, 0 = gone).
    pub fn alpha(&self, s: f64) -> f64 {
        if self.contracts_forward {
            1.0 - s
        } else {
            s
        }
    }

    /// Progress along the morph leg.
    pub fn beta(&self, s: f64) -> f64 {
        s
    }

    pub fn point_at(&self, s: f64) -> ThetaVector {
        if s == 0.0 {
            return self.start.clone();
        }
        if s == 1.0 {
            return self.end.clone();
        }
        ThetaVector(
            self.start
                .0
                .iter()
                .zip(&self.end.0)
                .map(|(a, b)| (1.0 - s) * a + s * b)
                .collect(),
        )
    }

    pub fn instance_at(&self, s: f64) -> Result<StructureInstance> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::InvalidInput(format!("path parameter {s} outside [0, 1]")));
        }
        StructureInstance::new(Arc::clone(&self.family), self.point_at(s)).map_err(|e| {
            Error::PathStep {
                s,
                source: Box::new(e),
            }
        })
    }

    /// Normalised Euclidean length of the path.
    pub fn length(&self) -> f64 {
        family_distance(&self.family, &self.start, &self.end)
    }
}

/// Euclidean distance after scaling each coordinate by its box width.
pub fn family_distance(family: &FamilyTemplate, a: &ThetaVector, b: &ThetaVector) -> f64 {
    a.0.iter()
        .zip(&b.0)
        .enumerate()
        .map(|(i, (x, y))| ((x - y) / family.width(i)).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// The midpoint of the geodesic from `source` to `target`.
pub fn interpolating_structure(
    source: &StructureInstance,
    target: &StructureInstance,
) -> Result<StructureInstance> {
    geodesic(source, target)?.instance_at(0.5)
}
