//! Direct domain transfer along a geodesic.
//!
//! The path from target (`s = 0`) to source (`s = 1`) is cut into `steps`
//! equal pieces. Every interior node is a simulated structure whose labelled
//! features come from an [`Oracle`]. Consecutive nodes are joined by an
//! affine re-anchoring that sends the earlier node's normal-condition mean
//! onto the later one's:
//!
//! * if both nodes carry labels, each dimension is scaled by the
//!   least-squares ratio of the class-mean offsets from the normal condition;
//! * an unlabelled node followed by two labelled ones borrows the scale of
//!   that next segment;
//! * otherwise the normal-condition spreads are matched.
//!
//! The real target's labels are never consulted. With `steps = 1` the map is
//! plain normal-condition alignment of target onto source.

use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::affine::{AffineStep, TransferMap};
use super::domain::{colouring, Alignment, Domain, HEALTHY};
use crate::error::{Error, Result};
use crate::family::{family_distance, GeodesicPath, StructureInstance};
use crate::par::{self, Execution};
use crate::physics::{derive_seed, populate_fibre, CampaignSettings, Condition, PopulatedFibre};

/// Source of labelled features for structures that exist only as models.
pub trait Oracle: Sync {
    fn simulate(&self, instance: &StructureInstance) -> Result<Domain>;
}

/// Oracle backed by the finite-element model. The seed of each simulation
/// depends on the structure's parameters, so a structure visited by two
/// different paths gets identical data.
#[derive(Clone, Debug)]
pub struct PhysicsOracle {
    pub conditions: Vec<Condition>,
    pub settings: CampaignSettings,
    pub exec: Execution,
}

/// Stable key of a parameter vector, rounded to nine significant digits.
pub fn theta_key(instance: &StructureInstance) -> String {
    let mut key = instance.family().name.clone();
    for v in instance.theta().as_slice() {
        key.push_str(&format!(",{v:.8e}"));
    }
    key
}

impl PhysicsOracle {
    /// Simulated fibre of `instance`, stored under `id`. The data depend
    /// only on the parameters and the campaign seed, never on `id`.
    pub fn populate(&self, id: &str, instance: &StructureInstance) -> Result<PopulatedFibre> {
        let mut settings = self.settings.clone();
        settings.synthesis.seed = derive_seed(settings.synthesis.seed, &theta_key(instance));
        populate_fibre(id, instance, &self.conditions, &settings, self.exec)
    }
}

impl Oracle for PhysicsOracle {
    fn simulate(&self, instance: &StructureInstance) -> Result<Domain> {
        let (x, y) = self.populate(&theta_key(instance), instance)?.features()?;
        Domain::labelled(x, y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DdtOptions {
    pub steps: usize,
    /// Alignment used by spread-matching steps.
    pub alignment: Alignment,
    #[serde(skip)]
    pub exec: Execution,
}

impl Default for DdtOptions {
    fn default() -> Self {
        DdtOptions {
            steps: 4,
            alignment: Alignment::Diagonal,
            exec: Execution::default(),
        }
    }
}

/// Builds the map sending target features into the source frame.
///
/// `path` must run from the target (`s = 0`) to the source (`s = 1`). A
/// path of zero length is covered by a single step.
pub fn ddt_map(
    source: &Domain,
    target: &Domain,
    path: &GeodesicPath,
    oracle: &dyn Oracle,
    opts: &DdtOptions,
) -> Result<TransferMap> {
    chain(source, &target.unlabelled(), path, oracle, opts)
}

/// Like [`ddt_map`] but keeps `from`'s labels; used when the starting
/// structure is itself simulated.
fn chain(
    source: &Domain,
    target: &Domain,
    path: &GeodesicPath,
    oracle: &dyn Oracle,
    opts: &DdtOptions,
) -> Result<TransferMap> {
    if opts.steps == 0 {
        return Err(Error::InvalidInput("transfer needs at least one step".into()));
    }
    source.validate()?;
    target.validate()?;
    if source.dim() != target.dim() {
        return Err(Error::Compatibility(format!(
            "source features have {} dimensions, target {}",
            source.dim(),
            target.dim()
        )));
    }
    let steps = if path.length() == 0.0 { 1 } else { opts.steps };
    let params: Vec<f64> = (0..=steps).map(|i| i as f64 / steps as f64).collect();
    let interior: Vec<f64> = params[1..steps].to_vec();
    let simulated = par::try_map(&interior, opts.exec, |&s| {
        let inst = path.instance_at(s)?;
        oracle.simulate(&inst).map_err(|e| Error::PathStep {
            s,
            source: Box::new(e),
        })
    })?;
    for (d, &s) in simulated.iter().zip(&interior) {
        if d.dim() != source.dim() {
            return Err(Error::PathStep {
                s,
                source: Box::new(Error::Compatibility(format!(
                    "simulated features have {} dimensions, expected {}",
                    d.dim(),
                    source.dim()
                ))),
            });
        }
    }

    let mut nodes: Vec<&Domain> = vec![target];
    nodes.extend(simulated.iter());
    nodes.push(source);

    let mut steps_out = Vec::with_capacity(steps);
    let mut distances = Vec::with_capacity(steps);
    for i in 0..steps {
        // An unlabelled start borrows the scale of the next labelled segment.
        let borrowed = if i + 2 < nodes.len() && offset_scale(nodes[i], nodes[i + 1]).is_none() {
            offset_scale(nodes[i + 1], nodes[i + 2])
        } else {
            None
        };
        let step = match borrowed {
            Some(scale) => anchored(nodes[i], nodes[i + 1], scale)?,
            None => reanchor(nodes[i], nodes[i + 1], opts.alignment)?,
        };
        steps_out.push(step);
        distances.push(family_distance(
            path.family(),
            &path.point_at(params[i]),
            &path.point_at(params[i + 1]),
        ));
    }
    Ok(TransferMap {
        steps: steps_out,
        nodes: params,
        step_distances: distances,
    })
}

/// Diagonal step with the given scale that sends `from`'s normal-condition
/// mean onto `to`'s.
fn anchored(from: &Domain, to: &Domain, scale: Vec<f64>) -> Result<AffineStep> {
    let a = from.nc_moments()?;
    let b = to.nc_moments()?;
    let shift = (0..scale.len()).map(|d| b.mean[d] - scale[d] * a.mean[d]).collect();
    AffineStep::diagonal(scale, shift)
}

/// Affine step taking `from`'s feature frame onto `to`'s.
fn reanchor(from: &Domain, to: &Domain, alignment: Alignment) -> Result<AffineStep> {
    let a = from.nc_moments()?;
    let b = to.nc_moments()?;
    let dim = a.mean.len();

    if let Some(scale) = offset_scale(from, to) {
        return anchored(from, to, scale);
    }
    match alignment {
        Alignment::Diagonal => {
            let scale: Vec<f64> = (0..dim)
                .map(|d| {
                    if a.std[d] > 0.0 && b.std[d] > 0.0 {
                        b.std[d] / a.std[d]
                    } else {
                        1.0
                    }
                })
                .collect();
            let shift = (0..dim).map(|d| b.mean[d] - scale[d] * a.mean[d]).collect();
            AffineStep::diagonal(scale, shift)
        }
        Alignment::Full => {
            let la = colouring(&from.features, &from.nc_rows, &a.mean)?;
            let lb = colouring(&to.features, &to.nc_rows, &b.mean)?;
            let inv = la
                .try_inverse()
                .ok_or_else(|| Error::Alignment("covariance factor is singular".into()))?;
            let matrix = lb * inv;
            let shift = DVector::from_column_slice(&b.mean) - &matrix * DVector::from_column_slice(&a.mean);
            Ok(AffineStep::Full { matrix, shift })
        }
    }
}

/// Per-dimension least-squares ratio of class-mean offsets, when both domains
/// carry labels and share at least one damage class. Dimensions where the
/// ratio is not positive fall back to the spread ratio.
fn offset_scale(from: &Domain, to: &Domain) -> Option<Vec<f64>> {
    let (fa, fb) = (from.class_means(), to.class_means());
    let nc_a = fa.iter().find(|(c, _)| *c == HEALTHY)?.1.clone();
    let nc_b = fb.iter().find(|(c, _)| *c == HEALTHY)?.1.clone();
    let pairs: Vec<(&Vec<f64>, &Vec<f64>)> = fa
        .iter()
        .filter(|(c, _)| *c != HEALTHY)
        .filter_map(|(c, ma)| fb.iter().find(|(cb, _)| cb == c).map(|(_, mb)| (ma, mb)))
        .collect();
    if pairs.is_empty() {
        return None;
    }
    let a = from.nc_moments().ok()?;
    let b = to.nc_moments().ok()?;
    let dim = nc_a.len();
    Some(
        (0..dim)
            .map(|d| {
                let (mut num, mut den) = (0.0, 0.0);
                for (ma, mb) in &pairs {
                    let (x, y) = (ma[d] - nc_a[d], mb[d] - nc_b[d]);
                    num += x * y;
                    den += x * x;
                }
                let ratio = num / den;
                if ratio.is_finite() && ratio > 0.0 {
                    ratio
                } else if a.std[d] > 0.0 && b.std[d] > 0.0 {
                    b.std[d] / a.std[d]
                } else {
                    1.0
                }
            })
            .collect(),
    )
}

/// One structure taking part in a transfer.
#[derive(Clone, Debug)]
pub struct Participant {
    pub id: String,
    pub instance: StructureInstance,
    pub domain: Domain,
}

/// Result of routing a transfer through an interpolating structure.
#[derive(Clone, Debug)]
pub struct TwoStepMap {
    pub interpolant: StructureInstance,
    pub interpolant_domain: Arc<Domain>,
    /// Target into interpolant frame.
    pub first: TransferMap,
    /// Interpolant into source frame.
    pub second: TransferMap,
    pub composed: TransferMap,
    /// Parameter-space lengths of the two legs.
    pub leg_distances: (f64, f64),
}

/// Transfer from `target` into `source` via the midpoint structure `S*`,
/// each leg using `opts.steps` steps.
pub fn two_step_map(
    source: &Participant,
    target: &Participant,
    oracle: &dyn Oracle,
    opts: &DdtOptions,
) -> Result<TwoStepMap> {
    let interpolant = crate::family::interpolating_structure(&source.instance, &target.instance)?;
    let mid = Arc::new(oracle.simulate(&interpolant)?);
    let leg1 = crate::family::geodesic(&target.instance, &interpolant)?;
    let leg2 = crate::family::geodesic(&interpolant, &source.instance)?;
    let first = ddt_map(&mid, &target.domain, &leg1, oracle, opts)?;
    let second = chain(&source.domain, &mid, &leg2, oracle, opts)?;
    let composed = first.then(&second);
    Ok(TwoStepMap {
        leg_distances: (leg1.length(), leg2.length()),
        interpolant,
        interpolant_domain: mid,
        first,
        second,
        composed,
    })
}
