//! Finite-element oracle for deck-and-pillar bridges.
//!
//! Decks are chains of Euler–Bernoulli beam elements (transverse displacement
//! and rotation per node, cubic Hermite shape functions, consistent mass).
//! Consecutive decks share the transverse displacement of their junction node
//! but keep separate rotations, so a junction behaves as a hinge. Pillars are
//! grounded axial springs `k = E w t / l` acting on the junction they carry.
//! A deck at either end of the chain that touches a ground vertex is pinned
//! at its outer end.

mod campaign;
mod synthesis;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::StructureInstance;
use crate::graph::{AttributedGraph, ElementKind};

pub use campaign::{
    acquisition_features, derive_seed, populate_fibre, CampaignConfig, CampaignSettings, Condition,
    ConditionFile, PopulatedFibre, SamplingSpec,
};
pub use synthesis::{synthesize_timeseries, SynthesisConfig};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PillarMass {
    #[default]
    Neglected,
    /// Half the pillar mass lumped on its junction.
    LumpedHalf,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelOptions {
    pub elements_per_deck: usize,
    pub pillar_mass: PillarMass,
}

impl Default for ModelOptions {
    fn default() -> Self {
        ModelOptions {
            elements_per_deck: 8,
            pillar_mass: PillarMass::Neglected,
        }
    }
}

/// Assembled, constrained system matrices of one structure.
#[derive(Clone, Debug)]
pub struct BridgeModel {
    stiffness: DMatrix<f64>,
    mass: DMatrix<f64>,
    /// Longitudinal coordinate of every deck node, deck by deck.
    node_positions: Vec<f64>,
    /// Active transverse DOF read by each sensor; `None` if that point is fixed.
    sensor_dofs: BTreeMap<String, Option<usize>>,
    /// Active DOFs touched by each element slot.
    slot_dofs: BTreeMap<String, Vec<usize>>,
    pillar_springs: BTreeMap<String, f64>,
}

impl BridgeModel {
    pub fn stiffness(&self) -> &DMatrix<f64> {
        &self.stiffness
    }

    pub fn mass(&self) -> &DMatrix<f64> {
        &self.mass
    }

    pub fn dof_count(&self) -> usize {
        self.stiffness.nrows()
    }

    pub fn node_positions(&self) -> &[f64] {
        &self.node_positions
    }

    pub fn sensor_dofs(&self) -> &BTreeMap<String, Option<usize>> {
        &self.sensor_dofs
    }

    pub fn slot_dofs(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.slot_dofs
    }

    /// Spring stiffness contributed by a pillar slot.
    pub fn pillar_stiffness(&self, slot: &str) -> Option<f64> {
        self.pillar_springs.get(slot).copied()
    }

    /// Adds a grounded spring on an active DOF.
    pub fn add_ground_spring(&mut self, dof: usize, k: f64) -> Result<()> {
        if dof >= self.dof_count() || !(k.is_finite() && k >= 0.0) {
            return Err(Error::InvalidInput(format!("cannot add spring {k} on DOF {dof}")));
        }
        self.stiffness[(dof, dof)] += k;
        Ok(())
    }
}

/// First modes of a model.
#[derive(Clone, Debug, PartialEq)]
pub struct ModalResult {
    /// Natural frequencies in Hz, ascending.
    pub frequencies: Vec<f64>,
    /// Sensor ids, in the row order of `shapes`.
    pub sensors: Vec<String>,
    /// Mass-normalised mode shapes at the sensors (sensor x mode).
    pub shapes: DMatrix<f64>,
}

pub fn assemble(instance: &StructureInstance, opts: &ModelOptions) -> Result<BridgeModel> {
    assemble_graph(&instance.graph()?, opts)
}

fn hermite_stiffness(ei: f64, l: f64) -> [[f64; 4]; 4] {
    let c = ei / l.powi(3);
    let l2 = l * l;
    [
        [12.0 * c, 6.0 * l * c, -12.0 * c, 6.0 * l * c],
        [6.0 * l * c, 4.0 * l2 * c, -6.0 * l * c, 2.0 * l2 * c],
        [-12.0 * c, -6.0 * l * c, 12.0 * c, -6.0 * l * c],
        [6.0 * l * c, 2.0 * l2 * c, -6.0 * l * c, 4.0 * l2 * c],
    ]
}

fn hermite_mass(m: f64, l: f64) -> [[f64; 4]; 4] {
    let c = m * l / 420.0;
    let l2 = l * l;
    [
        [156.0 * c, 22.0 * l * c, 54.0 * c, -13.0 * l * c],
        [22.0 * l * c, 4.0 * l2 * c, 13.0 * l * c, -3.0 * l2 * c],
        [54.0 * c, 13.0 * l * c, 156.0 * c, -22.0 * l * c],
        [-13.0 * l * c, -3.0 * l2 * c, -22.0 * l * c, 4.0 * l2 * c],
    ]
}

/// Assembles a model straight from an attributed graph.
pub fn assemble_graph(g: &AttributedGraph, opts: &ModelOptions) -> Result<BridgeModel> {
    let ne = opts.elements_per_deck;
    if ne < 2 {
        return Err(Error::Configuration(format!(
            "need at least 2 elements per deck, got {ne}"
        )));
    }
    let n = g.vertex_count();
    let kind = |v: usize| &g.vertices()[v].kind;
    let mut decks = Vec::new();
    let mut pillars = Vec::new();
    for v in 0..n {
        match kind(v) {
            ElementKind::Deck => decks.push(v),
            ElementKind::Pillar => pillars.push(v),
            ElementKind::Ground => {}
            other => {
                return Err(Error::UnsupportedModel(format!(
                    "element {} of kind {other} has no beam/spring idealisation",
                    g.vertices()[v].id
                )))
            }
        }
    }
    if decks.is_empty() {
        return Err(Error::UnsupportedModel("structure has no deck".into()));
    }
    let deck_neighbours = |v: usize| -> Vec<usize> {
        g.neighbours(v).filter(|&u| *kind(u) == ElementKind::Deck).collect()
    };
    let touches_ground = |v: usize| g.neighbours(v).any(|u| kind(u).is_ground());

    // Order the decks along their chain.
    if decks.iter().any(|&d| deck_neighbours(d).len() > 2) {
        return Err(Error::UnsupportedModel("deck junction with more than two decks".into()));
    }
    let start = *decks
        .iter()
        .find(|&&d| deck_neighbours(d).len() <= 1)
        .ok_or_else(|| Error::UnsupportedModel("decks form a closed loop".into()))?;
    let mut chain = vec![start];
    let mut prev = usize::MAX;
    let mut cur = start;
    while let Some(next) = deck_neighbours(cur).into_iter().find(|&u| u != prev) {
        chain.push(next);
        prev = cur;
        cur = next;
    }
    if chain.len() != decks.len() {
        return Err(Error::UnsupportedModel("decks do not form a single chain".into()));
    }
    let nd = chain.len();
    for (i, &d) in chain.iter().enumerate() {
        if i != 0 && i + 1 != nd && touches_ground(d) {
            return Err(Error::UnsupportedModel(format!(
                "interior deck {} is grounded directly",
                g.vertices()[d].id
            )));
        }
    }
    let position = |v: usize| chain.iter().position(|&d| d == v);

    // Junction index carried by each pillar.
    let mut pillar_junction = Vec::new();
    for &p in &pillars {
        let id = &g.vertices()[p].id;
        if !touches_ground(p) {
            return Err(Error::UnsupportedModel(format!("pillar {id} is not grounded")));
        }
        if g.neighbours(p).any(|u| *kind(u) == ElementKind::Pillar) {
            return Err(Error::UnsupportedModel(format!("pillar {id} is attached to a pillar")));
        }
        let mut at: Vec<usize> = deck_neighbours(p).into_iter().filter_map(position).collect();
        at.sort_unstable();
        let junction = match at.as_slice() {
            [a, b] if b == &(a + 1) => *b,
            [0] => 0,
            [a] if *a + 1 == nd => nd,
            _ => {
                return Err(Error::UnsupportedModel(format!(
                    "pillar {id} does not sit on a deck junction"
                )))
            }
        };
        pillar_junction.push((p, junction));
    }

    // Full DOF numbering: one transverse DOF per junction, then per deck its
    // interior transverse DOFs and all its rotations.
    let mut next = nd + 1;
    let mut deck_w = Vec::with_capacity(nd);
    let mut deck_r = Vec::with_capacity(nd);
    for i in 0..nd {
        let mut w = Vec::with_capacity(ne + 1);
        w.push(i);
        for _ in 1..ne {
            w.push(next);
            next += 1;
        }
        w.push(i + 1);
        let r: Vec<usize> = (next..next + ne + 1).collect();
        next += ne + 1;
        deck_w.push(w);
        deck_r.push(r);
    }
    let total = next;
    let mut fixed = vec![false; total];
    if touches_ground(chain[0]) {
        fixed[0] = true;
    }
    if touches_ground(chain[nd - 1]) {
        fixed[nd] = true;
    }
    let mut active = vec![None; total];
    let mut count = 0;
    for (i, a) in active.iter_mut().enumerate() {
        if !fixed[i] {
            *a = Some(count);
            count += 1;
        }
    }

    let mut k_full = DMatrix::<f64>::zeros(total, total);
    let mut m_full = DMatrix::<f64>::zeros(total, total);
    let mut node_positions = Vec::new();
    let mut slot_dofs = BTreeMap::new();
    let mut sensor_points: BTreeMap<usize, usize> = BTreeMap::new();
    let mut x0 = 0.0;
    for (i, &d) in chain.iter().enumerate() {
        let a = g.vertices()[d].attributes.expect("deck carries attributes");
        let ei = a.youngs_modulus * a.width * a.thickness.powi(3) / 12.0;
        let mpl = a.density * a.width * a.thickness;
        let le = a.length / ne as f64;
        let ke = hermite_stiffness(ei, le);
        let me = hermite_mass(mpl, le);
        for e in 0..ne {
            let dofs = [deck_w[i][e], deck_r[i][e], deck_w[i][e + 1], deck_r[i][e + 1]];
            for r in 0..4 {
                for c in 0..4 {
                    k_full[(dofs[r], dofs[c])] += ke[r][c];
                    m_full[(dofs[r], dofs[c])] += me[r][c];
                }
            }
        }
        for j in 0..=ne {
            node_positions.push(x0 + j as f64 * le);
        }
        x0 += a.length;
        let dofs: Vec<usize> = deck_w[i]
            .iter()
            .chain(&deck_r[i])
            .filter_map(|&f| active[f])
            .collect();
        slot_dofs.insert(g.vertices()[d].id.clone(), dofs);
        sensor_points.insert(d, deck_w[i][(3 * ne / 8).max(1)]);
    }

    let mut pillar_springs = BTreeMap::new();
    for &(p, junction) in &pillar_junction {
        let a = g.vertices()[p].attributes.expect("pillar carries attributes");
        let k = a.youngs_modulus * a.width * a.thickness / a.length;
        k_full[(junction, junction)] += k;
        if opts.pillar_mass == PillarMass::LumpedHalf {
            m_full[(junction, junction)] += 0.5 * a.density * a.width * a.thickness * a.length;
        }
        let id = g.vertices()[p].id.clone();
        pillar_springs.insert(id.clone(), k);
        slot_dofs.insert(id, active[junction].into_iter().collect());
        sensor_points.insert(p, junction);
    }

    let keep: Vec<usize> = (0..total).filter(|&i| !fixed[i]).collect();
    let stiffness = k_full.select_rows(&keep).select_columns(&keep);
    let mass = m_full.select_rows(&keep).select_columns(&keep);

    let sensor_dofs = g
        .sensors()
        .iter()
        .map(|(s, v)| {
            let vi = g.index_of(v).expect("sensor vertex exists");
            let dof = sensor_points.get(&vi).and_then(|&f| active[f]);
            (s.clone(), dof)
        })
        .collect();

    Ok(BridgeModel {
        stiffness,
        mass,
        node_positions,
        sensor_dofs,
        slot_dofs,
        pillar_springs,
    })
}

/// Lowest `n` modes of `K x = w^2 M x`.
///
/// The problem is reduced with the Cholesky factor of `K` and solved as
/// `L^-1 M L^-T y = (1/w^2) y`. Factoring the stiffness rather than the mass
/// keeps the low modes accurate when very short, very stiff elements appear
/// near a contraction boundary.
pub fn natural_frequencies(model: &BridgeModel, n: usize) -> Result<ModalResult> {
    let dofs = model.dof_count();
    if n == 0 || n > dofs {
        return Err(Error::InvalidInput(format!(
            "requested {n} modes from a model with {dofs} DOFs"
        )));
    }
    if Cholesky::new(model.mass.clone()).is_none() {
        return Err(Error::Model("mass matrix is not positive definite".into()));
    }
    let chol = Cholesky::new(model.stiffness.clone()).ok_or_else(|| {
        Error::Model("stiffness matrix is singular; the structure is not restrained".into())
    })?;
    let l = chol.l();
    let x = l
        .solve_lower_triangular(&model.mass)
        .ok_or_else(|| Error::Model("singular stiffness factor".into()))?;
    let mut a = l
        .solve_lower_triangular(&x.transpose())
        .ok_or_else(|| Error::Model("singular stiffness factor".into()))?;
    a = (&a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(a);

    let mut order: Vec<usize> = (0..dofs).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let lt = l.transpose();

    let sensors: Vec<String> = model.sensor_dofs.keys().cloned().collect();
    let mut shapes = DMatrix::zeros(sensors.len(), n);
    let mut frequencies = Vec::with_capacity(n);
    for (col, &i) in order.iter().take(n).enumerate() {
        let mu = eig.eigenvalues[i];
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::Model(format!("non-positive eigenvalue {mu} in mode {}", col + 1)));
        }
        frequencies.push(1.0 / (2.0 * PI * mu.sqrt()));
        let y = eig.eigenvectors.column(i).into_owned();
        let mut phi = lt
            .solve_upper_triangular(&y)
            .ok_or_else(|| Error::Model("singular stiffness factor".into()))?;
        let norm = (phi.transpose() * &model.mass * &phi)[(0, 0)].sqrt();
        phi /= norm;
        // Fix the sign so that the largest entry is positive.
        let (imax, _) = phi.iter().enumerate().fold((0, 0.0), |best, (k, v)| {
            if v.abs() > best.1 {
                (k, v.abs())
            } else {
                best
            }
        });
        if phi[imax] < 0.0 {
            phi = -phi;
        }
        for (r, s) in sensors.iter().enumerate() {
            if let Some(Some(dof)) = model.sensor_dofs.get(s) {
                shapes[(r, col)] = phi[*dof];
            }
        }
    }
    Ok(ModalResult {
        frequencies,
        sensors,
        shapes,
    })
}

/// Stiffness reduction on one element.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DamageState {
    pub slot: String,
    /// Fractional loss of Young's modulus, in `[0, 1)`.
    pub severity: f64,
}

/// Returns `instance` with `E` of the damaged slot scaled by `1 - severity`.
pub fn apply_damage(instance: &StructureInstance, damage: &DamageState) -> Result<StructureInstance> {
    let family = instance.family();
    let slot = family.slot_index(&damage.slot).ok_or_else(|| {
        Error::InvalidTarget(format!(
            "{} is not an element slot of family {}",
            damage.slot, family.name
        ))
    })?;
    if !(0.0..1.0).contains(&damage.severity) {
        return Err(Error::InvalidInput(format!(
            "damage severity {} outside [0, 1)",
            damage.severity
        )));
    }
    if !instance.slot_present(slot) {
        return Err(Error::InvalidTarget(format!(
            "slot {} is contracted away in this instance",
            damage.slot
        )));
    }
    let mut theta = instance.theta().clone();
    theta.0[slot * crate::family::BLOCK + 3] *= 1.0 - damage.severity;
    StructureInstance::new(std::sync::Arc::clone(family), theta)
}
