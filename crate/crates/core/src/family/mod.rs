//! Parametric structure families.
//!
//! A [`FamilyTemplate`] fixes a topology of element slots and an open box of
//! admissible `[l, w, t, E, rho, nu]` values per slot. A point `theta` in
//! that box is a concrete structure ([`StructureInstance`]). Families are
//! linked by declared contractions: driving a set of lengths to zero removes
//! the corresponding slots and re-wires the remainder so that it becomes a
//! member of a smaller family. Geodesics are straight lines in the larger
//! family's coordinates.

mod contraction;
mod geodesic;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AttributedGraph, Attributes, ElementKind, IeVertex, ATTRIBUTE_NAMES};

pub use contraction::{contract, embed, ContractionMap, Embedding};
pub use geodesic::{family_distance, geodesic, interpolating_structure, GeodesicPath};

/// Parameters per slot.
pub const BLOCK: usize = 6;

/// Default open interval for each attribute, in `[l, w, t, E, rho, nu]` order.
pub const DEFAULT_BOUNDS: [(f64, f64); BLOCK] = [
    (1.0, 100.0),
    (0.1, 30.0),
    (0.05, 5.0),
    (1e9, 5e11),
    (500.0, 10_000.0),
    (0.1, 0.45),
];

/// Widths of the default box, used to normalise attribute differences.
pub fn default_attribute_widths() -> [f64; BLOCK] {
    DEFAULT_BOUNDS.map(|(lo, hi)| hi - lo)
}

/// Id of the ground vertex attached to `slot`.
pub fn ground_id(slot: &str) -> String {
    format!("G_{slot}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    pub id: String,
    pub kind: ElementKind,
}

/// A declared way of shrinking this family onto a smaller one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionDecl {
    /// Name of the family reached at the boundary.
    pub target: String,
    /// Coordinates driven to zero, as `slot.param`.
    pub zero_set: Vec<String>,
    /// `[target slot, source slot]` pairs.
    pub correspondence: Vec<[String; 2]>,
    /// Edges added once the zero set is reached, `[slot, ground or slot]`.
    #[serde(default)]
    pub rewire: Vec<[String; 2]>,
}

/// Vector of family coordinates, slot-major then `[l, w, t, E, rho, nu]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ThetaVector(pub Vec<f64>);

impl ThetaVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<f64>> for ThetaVector {
    fn from(v: Vec<f64>) -> Self {
        ThetaVector(v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyTemplate {
    pub name: String,
    pub slots: Vec<Slot>,
    /// Edges between slots.
    #[serde(default)]
    pub edges: Vec<[String; 2]>,
    /// Slots that carry their own ground vertex `G_<slot>`.
    #[serde(default)]
    pub ground_attachments: Vec<String>,
    /// Sensor id to slot id.
    #[serde(default)]
    pub sensors: BTreeMap<String, String>,
    /// Overrides of the default box, keyed `slot.param`.
    #[serde(rename = "box", default)]
    pub bounds: BTreeMap<String, [f64; 2]>,
    #[serde(default)]
    pub contractions: Vec<ContractionDecl>,
}

fn edge(a: &str, b: &str) -> [String; 2] {
    [a.to_string(), b.to_string()]
}

fn slot(id: &str, kind: ElementKind) -> Slot {
    Slot {
        id: id.to_string(),
        kind,
    }
}

/// Two decks on one pillar, each deck grounded at its outer end.
pub fn two_span_family() -> FamilyTemplate {
    FamilyTemplate {
        name: "two_span".into(),
        slots: vec![
            slot("D1", ElementKind::Deck),
            slot("P1", ElementKind::Pillar),
            slot("D2", ElementKind::Deck),
        ],
        edges: vec![edge("D1", "P1"), edge("P1", "D2"), edge("D1", "D2")],
        ground_attachments: vec!["D1".into(), "P1".into(), "D2".into()],
        sensors: [("S1".to_string(), "D1".to_string()), ("S2".to_string(), "D2".to_string())].into(),
        bounds: BTreeMap::new(),
        contractions: Vec::new(),
    }
}

/// Three decks on two pillars, with a declared contraction onto
/// [`two_span_family`] that shrinks the second pillar and the third deck.
pub fn three_span_family() -> FamilyTemplate {
    FamilyTemplate {
        name: "three_span".into(),
        slots: vec![
            slot("D1", ElementKind::Deck),
            slot("P1", ElementKind::Pillar),
            slot("D2", ElementKind::Deck),
            slot("P2", ElementKind::Pillar),
            slot("D3", ElementKind::Deck),
        ],
        edges: vec![
            edge("D1", "P1"),
            edge("P1", "D2"),
            edge("D1", "D2"),
            edge("D2", "P2"),
            edge("P2", "D3"),
            edge("D2", "D3"),
        ],
        ground_attachments: vec!["D1".into(), "P1".into(), "P2".into(), "D3".into()],
        sensors: [("S1".to_string(), "D1".to_string()), ("S2".to_string(), "D2".to_string())].into(),
        bounds: BTreeMap::new(),
        contractions: vec![ContractionDecl {
            target: "two_span".into(),
            zero_set: vec!["P2.l".into(), "D3.l".into()],
            correspondence: vec![edge("D1", "D1"), edge("P1", "P1"), edge("D2", "D2")],
            rewire: vec![edge("D2", &ground_id("D3"))],
        }],
    }
}

/// The built-in families by name.
pub fn builtin_family(name: &str) -> Option<FamilyTemplate> {
    match name {
        "two_span" => Some(two_span_family()),
        "three_span" => Some(three_span_family()),
        _ => None,
    }
}

impl FamilyTemplate {
    /// Reads and validates a family file.
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let family: FamilyTemplate = serde_json::from_str(&text)?;
        family.validate()?;
        Ok(family)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn dimension(&self) -> usize {
        BLOCK * self.slots.len()
    }

    pub fn slot_index(&self, id: &str) -> Option<usize> {
        self.slots.iter().position(|s| s.id == id)
    }

    /// `slot.param` name of coordinate `i`.
    pub fn coordinate_name(&self, i: usize) -> String {
        format!("{}.{}", self.slots[i / BLOCK].id, ATTRIBUTE_NAMES[i % BLOCK])
    }

    /// Index of a `slot.param` coordinate.
    pub fn coordinate_index(&self, name: &str) -> Result<usize> {
        let (slot, param) = name
            .split_once('.')
            .ok_or_else(|| Error::Configuration(format!("malformed coordinate {name}")))?;
        let s = self
            .slot_index(slot)
            .ok_or_else(|| Error::Configuration(format!("unknown slot {slot} in {name}")))?;
        let p = ATTRIBUTE_NAMES
            .iter()
            .position(|&a| a == param)
            .ok_or_else(|| Error::Configuration(format!("unknown parameter {param} in {name}")))?;
        Ok(s * BLOCK + p)
    }

    /// Open interval of coordinate `i`.
    pub fn bounds(&self, i: usize) -> (f64, f64) {
        match self.bounds.get(&self.coordinate_name(i)) {
            Some([lo, hi]) => (*lo, *hi),
            None => DEFAULT_BOUNDS[i % BLOCK],
        }
    }

    pub fn width(&self, i: usize) -> f64 {
        let (lo, hi) = self.bounds(i);
        hi - lo
    }

    pub fn midpoint(&self) -> ThetaVector {
        ThetaVector(
            (0..self.dimension())
                .map(|i| {
                    let (lo, hi) = self.bounds(i);
                    0.5 * (lo + hi)
                })
                .collect(),
        )
    }

    /// Coordinates that some declared contraction may drive to zero.
    pub fn contractible_coordinates(&self) -> BTreeSet<usize> {
        self.contractions
            .iter()
            .flat_map(|c| c.zero_set.iter())
            .filter_map(|name| self.coordinate_index(name).ok())
            .collect()
    }

    pub fn contraction_to(&self, target: &str) -> Option<&ContractionDecl> {
        self.contractions.iter().find(|c| c.target == target)
    }

    /// Structural checks on a template read from a file.
    pub fn validate(&self) -> Result<()> {
        if self.slots.is_empty() {
            return Err(Error::Configuration(format!("family {} has no slots", self.name)));
        }
        let mut ids = BTreeSet::new();
        for s in &self.slots {
            if s.kind.is_ground() {
                return Err(Error::Configuration(format!(
                    "slot {} is a ground; grounds are declared through ground_attachments",
                    s.id
                )));
            }
            if !ids.insert(s.id.as_str()) {
                return Err(Error::Configuration(format!("duplicate slot id {}", s.id)));
            }
        }
        let known = |v: &str| ids.contains(v);
        for [a, b] in &self.edges {
            if !known(a) || !known(b) {
                return Err(Error::Configuration(format!("edge {a}-{b} names an unknown slot")));
            }
        }
        for g in &self.ground_attachments {
            if !known(g) {
                return Err(Error::Configuration(format!("ground attachment on unknown slot {g}")));
            }
        }
        for (sensor, s) in &self.sensors {
            if !known(s) {
                return Err(Error::Configuration(format!("sensor {sensor} on unknown slot {s}")));
            }
        }
        for (name, [lo, hi]) in &self.bounds {
            self.coordinate_index(name)?;
            if !(lo.is_finite() && hi.is_finite() && *lo > 0.0 && lo < hi) {
                return Err(Error::Configuration(format!(
                    "box for {name} must satisfy 0 < lo < hi, got [{lo}, {hi}]"
                )));
            }
        }
        for c in &self.contractions {
            for z in &c.zero_set {
                self.coordinate_index(z)?;
            }
        }
        instantiate(self, &self.midpoint()).map(|_| ())
    }

    /// Checks `theta` against the box and returns the slots that are
    /// present (non-zero length).
    fn check_domain(&self, theta: &ThetaVector) -> Result<Vec<bool>> {
        if theta.len() != self.dimension() {
            return Err(Error::InvalidInput(format!(
                "family {} has dimension {}, theta has {}",
                self.name,
                self.dimension(),
                theta.len()
            )));
        }
        let contractible = self.contractible_coordinates();
        let domain_error = |i: usize| Error::Domain {
            coordinate: self.coordinate_name(i),
            value: theta.0[i],
        };
        let mut present = vec![true; self.slots.len()];
        for (s, p) in present.iter_mut().enumerate() {
            let l = s * BLOCK;
            if contractible.contains(&l) && theta.0[l] == 0.0 {
                *p = false;
            }
        }
        for (i, &v) in theta.0.iter().enumerate() {
            let (lo, hi) = self.bounds(i);
            if !v.is_finite() {
                return Err(domain_error(i));
            }
            let inside = v > lo && v < hi;
            let ok = if contractible.contains(&i) {
                (0.0..hi).contains(&v)
            } else if !present[i / BLOCK] {
                v == 0.0 || inside
            } else {
                inside
            };
            if !ok {
                return Err(domain_error(i));
            }
        }
        Ok(present)
    }
}

/// Builds the attributed graph of `theta`. Zero-length slots are removed,
/// the rewiring of every contraction whose length coordinates are all zero
/// is applied, and grounds left without neighbours are dropped.
pub fn instantiate(family: &FamilyTemplate, theta: &ThetaVector) -> Result<AttributedGraph> {
    let present = family.check_domain(theta)?;
    let alive = |id: &str| family.slot_index(id).is_some_and(|s| present[s]);

    let mut edges: Vec<(String, String)> = family
        .edges
        .iter()
        .filter(|[a, b]| alive(a) && alive(b))
        .map(|[a, b]| (a.clone(), b.clone()))
        .collect();
    for g in &family.ground_attachments {
        if alive(g) {
            edges.push((ground_id(g), g.clone()));
        }
    }
    for c in &family.contractions {
        let reached = c
            .zero_set
            .iter()
            .filter_map(|z| family.coordinate_index(z).ok())
            .filter(|i| i % BLOCK == 0)
            .all(|i| !present[i / BLOCK]);
        if reached {
            for [a, b] in &c.rewire {
                edges.push((a.clone(), b.clone()));
            }
        }
    }

    let mut vertices = Vec::new();
    for (s, slot) in family.slots.iter().enumerate() {
        if present[s] {
            let mut block = [0.0; BLOCK];
            block.copy_from_slice(&theta.0[s * BLOCK..(s + 1) * BLOCK]);
            vertices.push(IeVertex::element(
                slot.id.clone(),
                slot.kind.clone(),
                Attributes::from_array(block),
            ));
        }
    }
    let mut grounds: BTreeSet<String> = BTreeSet::new();
    for (a, b) in &edges {
        for v in [a, b] {
            if v.starts_with("G_") && family.slot_index(v).is_none() {
                grounds.insert(v.clone());
            }
        }
    }
    vertices.extend(grounds.into_iter().map(IeVertex::ground));

    let sensors: Vec<(String, String)> = family
        .sensors
        .iter()
        .filter(|(_, s)| alive(s))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    AttributedGraph::new(vertices, edges, sensors)
}

/// Reads `theta` back from a graph built by [`instantiate`]. Removed slots
/// read as all zeros.
pub fn read_theta(family: &FamilyTemplate, graph: &AttributedGraph) -> ThetaVector {
    let mut theta = vec![0.0; family.dimension()];
    for (s, slot) in family.slots.iter().enumerate() {
        if let Some(a) = graph.vertex(&slot.id).and_then(|v| v.attributes) {
            theta[s * BLOCK..(s + 1) * BLOCK].copy_from_slice(&a.to_array());
        }
    }
    ThetaVector(theta)
}

/// A concrete structure: a family and a point in its box.
#[derive(Clone, Debug, PartialEq)]
pub struct StructureInstance {
    family: Arc<FamilyTemplate>,
    theta: ThetaVector,
}

impl StructureInstance {
    /// Validates `theta` against the family domain.
    pub fn new(family: Arc<FamilyTemplate>, theta: impl Into<ThetaVector>) -> Result<Self> {
        let theta = theta.into();
        family.check_domain(&theta)?;
        Ok(StructureInstance { family, theta })
    }

    pub fn family(&self) -> &Arc<FamilyTemplate> {
        &self.family
    }

    pub fn theta(&self) -> &ThetaVector {
        &self.theta
    }

    pub fn graph(&self) -> Result<AttributedGraph> {
        instantiate(&self.family, &self.theta)
    }

    /// Attribute block of slot `s`.
    pub fn block(&self, s: usize) -> [f64; BLOCK] {
        let mut b = [0.0; BLOCK];
        b.copy_from_slice(&self.theta.0[s * BLOCK..(s + 1) * BLOCK]);
        b
    }

    /// Whether slot `s` is present (non-zero length).
    pub fn slot_present(&self, s: usize) -> bool {
        self.theta.0[s * BLOCK] > 0.0
    }
}

/// Serialised form of an instance: family name plus flat theta.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub id: String,
    pub family: String,
    pub theta: ThetaVector,
}
