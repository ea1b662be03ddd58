//! Contractions and embeddings between families.

use std::collections::BTreeSet;
use std::sync::Arc;

use super::{instantiate, FamilyTemplate, StructureInstance, ThetaVector, BLOCK};
use crate::error::{Error, Result};
use crate::graph::mcs_size;

/// A validated contraction of `source` onto `target`.
#[derive(Clone, Debug, PartialEq)]
pub struct ContractionMap {
    source: Arc<FamilyTemplate>,
    target: Arc<FamilyTemplate>,
    zero_set: Vec<usize>,
    /// `(target slot, source slot)` pairs.
    correspondence: Vec<(usize, usize)>,
}

/// Looks up and validates the contraction `src -> dst` declared on `src`.
///
/// Only lengths may be driven to zero: shrinking any other parameter keeps
/// the element in the graph while removing its stiffness or mass, which
/// detaches everything it grounds.
pub fn contract(src: &Arc<FamilyTemplate>, dst: &Arc<FamilyTemplate>) -> Result<ContractionMap> {
    let decl = src.contraction_to(&dst.name).ok_or_else(|| {
        Error::NoPath(format!("family {} declares no contraction onto {}", src.name, dst.name))
    })?;

    let zero_set = decl
        .zero_set
        .iter()
        .map(|z| src.coordinate_index(z))
        .collect::<Result<Vec<_>>>()?;
    if let Some(&bad) = zero_set.iter().find(|&&i| i % BLOCK != 0) {
        let slot = &src.slots[bad / BLOCK].id;
        return Err(Error::Connectivity(format!(
            "zeroing {} leaves {slot} in place without stiffness or mass and would disconnect \
             its neighbours from the ground; only lengths may be contracted",
            src.coordinate_name(bad)
        )));
    }
    let removed: BTreeSet<usize> = zero_set.iter().map(|i| i / BLOCK).collect();

    let mut correspondence = Vec::with_capacity(decl.correspondence.len());
    let mut seen = BTreeSet::new();
    for [t, s] in &decl.correspondence {
        let ti = dst
            .slot_index(t)
            .ok_or_else(|| Error::Configuration(format!("unknown target slot {t}")))?;
        let si = src
            .slot_index(s)
            .ok_or_else(|| Error::Configuration(format!("unknown source slot {s}")))?;
        if removed.contains(&si) {
            return Err(Error::Configuration(format!(
                "source slot {s} is contracted away but also mapped onto {t}"
            )));
        }
        if dst.slots[ti].kind != src.slots[si].kind {
            return Err(Error::Configuration(format!(
                "slot kinds differ in correspondence {t} <- {s}"
            )));
        }
        if !seen.insert(ti) {
            return Err(Error::Configuration(format!("target slot {t} mapped twice")));
        }
        correspondence.push((ti, si));
    }
    if seen.len() != dst.slots.len() || correspondence.len() + removed.len() != src.slots.len() {
        return Err(Error::Configuration(format!(
            "correspondence {} -> {} must cover every surviving slot exactly once",
            src.name, dst.name
        )));
    }

    let map = ContractionMap {
        source: Arc::clone(src),
        target: Arc::clone(dst),
        zero_set,
        correspondence,
    };

    let boundary = instantiate(src, &map.boundary(&src.midpoint()))?;
    let reference = instantiate(dst, &dst.midpoint())?;
    let n = boundary.vertex_count();
    if n != reference.vertex_count() || mcs_size(&boundary, &reference)? != n {
        return Err(Error::Configuration(format!(
            "contracted {} is not isomorphic to {}",
            src.name, dst.name
        )));
    }
    Ok(map)
}

impl ContractionMap {
    pub fn source(&self) -> &Arc<FamilyTemplate> {
        &self.source
    }

    pub fn target(&self) -> &Arc<FamilyTemplate> {
        &self.target
    }

    /// Source coordinates driven to zero.
    pub fn zero_set(&self) -> &[usize] {
        &self.zero_set
    }

    pub fn correspondence(&self) -> &[(usize, usize)] {
        &self.correspondence
    }

    /// The boundary point of `theta`: zero set cleared, all else kept.
    pub fn boundary(&self, theta: &ThetaVector) -> ThetaVector {
        let mut out = theta.clone();
        for &i in &self.zero_set {
            out.0[i] = 0.0;
        }
        out
    }

    /// Reads the target-family coordinates off a source-family vector.
    pub fn to_target(&self, theta: &ThetaVector) -> ThetaVector {
        let mut out = vec![0.0; self.target.dimension()];
        for &(t, s) in &self.correspondence {
            out[t * BLOCK..(t + 1) * BLOCK].copy_from_slice(&theta.0[s * BLOCK..(s + 1) * BLOCK]);
        }
        ThetaVector(out)
    }

    /// Expresses a target-family point in source coordinates. Corresponding
    /// slots take `small`'s values, the zero set is zero, and every other
    /// coordinate is copied from `template`.
    pub fn lift(&self, small: &ThetaVector, template: &ThetaVector) -> ThetaVector {
        let mut out = self.boundary(template);
        for &(t, s) in &self.correspondence {
            out.0[s * BLOCK..(s + 1) * BLOCK].copy_from_slice(&small.0[t * BLOCK..(t + 1) * BLOCK]);
        }
        out
    }

    /// Full application: the target-family instance reached from `instance`.
    pub fn apply(&self, instance: &StructureInstance) -> Result<StructureInstance> {
        if instance.family().name != self.source.name {
            return Err(Error::InvalidInput(format!(
                "instance of {} given to contraction of {}",
                instance.family().name,
                self.source.name
            )));
        }
        StructureInstance::new(Arc::clone(&self.target), self.to_target(instance.theta()))
    }
}

/// Injective linear map from a small family's coordinates into a big one's.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    small: Arc<FamilyTemplate>,
    big: Arc<FamilyTemplate>,
    /// Big-family index of each small-family coordinate.
    index: Vec<usize>,
}

/// Embeds `small` into `big` using the correspondence of `big`'s declared
/// contraction onto `small`.
pub fn embed(small: &Arc<FamilyTemplate>, big: &Arc<FamilyTemplate>) -> Result<Embedding> {
    if !big.contractions.iter().any(|c| c.target == small.name) {
        return Err(Error::Configuration(format!(
            "no slot correspondence declared between {} and {}",
            small.name, big.name
        )));
    }
    let map = contract(big, small)?;
    let mut index = vec![0; small.dimension()];
    for &(t, s) in map.correspondence() {
        for p in 0..BLOCK {
            index[t * BLOCK + p] = s * BLOCK + p;
        }
    }
    Ok(Embedding {
        small: Arc::clone(small),
        big: Arc::clone(big),
        index,
    })
}

impl Embedding {
    pub fn small(&self) -> &Arc<FamilyTemplate> {
        &self.small
    }

    pub fn big(&self) -> &Arc<FamilyTemplate> {
        &self.big
    }

    /// Number of big-family coordinates hit by the embedding.
    pub fn image_dimension(&self) -> usize {
        self.index.iter().collect::<BTreeSet<_>>().len()
    }

    /// Copies corresponding coordinates; all others are zero.
    pub fn apply(&self, theta: &ThetaVector) -> ThetaVector {
        let mut out = vec![0.0; self.big.dimension()];
        for (i, &j) in self.index.iter().enumerate() {
            out[j] = theta.0[i];
        }
        ThetaVector(out)
    }

    pub fn project(&self, theta: &ThetaVector) -> ThetaVector {
        ThetaVector(self.index.iter().map(|&j| theta.0[j]).collect())
    }
}
