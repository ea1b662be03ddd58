//! The base space: structures as attributed graphs of irreducible elements.
//!
//! A structure is an [`AttributedGraph`] whose vertices are irreducible
//! elements (decks, pillars, grounds, ...) carrying a dimension/material
//! attribute block, and whose edges are physical connections. Sensors always
//! sit on vertices. The metric between structures ([`graph_distance`]) is a
//! maximum-common-subgraph topology term refined by a box-normalised
//! attribute term.

mod io;
mod mcs;
mod metric;
mod population;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{StructureFile, VertexFile};
pub use mcs::{maximum_common_subgraph, mcs_size, CommonSubgraph, MatchOptions};
pub use metric::{graph_distance, graph_distance_parts, DistanceParts, MetricConfig};
pub use population::{Member, Population, SourceChoice};

/// Names of the six attribute dimensions, in storage order.
pub const ATTRIBUTE_NAMES: [&str; 6] = ["l", "w", "t", "E", "rho", "nu"];

/// Element type tag of an irreducible element.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ElementKind {
    Ground,
    Deck,
    Pillar,
    Plate,
    Other(String),
}

impl ElementKind {
    pub fn tag(&self) -> &str {
        match self {
            ElementKind::Ground => "ground",
            ElementKind::Deck => "deck",
            ElementKind::Pillar => "pillar",
            ElementKind::Plate => "plate",
            ElementKind::Other(name) => name,
        }
    }

    pub fn parse(tag: &str) -> Self {
        match tag {
            "ground" => ElementKind::Ground,
            "deck" => ElementKind::Deck,
            "pillar" => ElementKind::Pillar,
            "plate" => ElementKind::Plate,
            other => ElementKind::Other(other.to_string()),
        }
    }

    pub fn is_ground(&self) -> bool {
        matches!(self, ElementKind::Ground)
    }
}

impl fmt::Display for ElementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl Serialize for ElementKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.tag())
    }
}

impl<'de> Deserialize<'de> for ElementKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let tag = String::deserialize(d)?;
        Ok(ElementKind::parse(&tag))
    }
}

/// Dimensions and minimal material description of a cuboidal element (SI).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Attributes {
    pub length: f64,
    pub width: f64,
    pub thickness: f64,
    pub youngs_modulus: f64,
    pub density: f64,
    pub poisson: f64,
}

impl Attributes {
    pub fn from_array(a: [f64; 6]) -> Self {
        Attributes {
            length: a[0],
            width: a[1],
            thickness: a[2],
            youngs_modulus: a[3],
            density: a[4],
            poisson: a[5],
        }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.length,
            self.width,
            self.thickness,
            self.youngs_modulus,
            self.density,
            self.poisson,
        ]
    }

    fn validate(&self, vertex: &str) -> Result<()> {
        for (name, v) in ATTRIBUTE_NAMES.iter().zip(self.to_array()) {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "vertex {vertex}: attribute {name} = {v} must be finite and strictly positive"
                )));
            }
        }
        if self.poisson >= 0.5 {
            return Err(Error::InvalidInput(format!(
                "vertex {vertex}: Poisson ratio {} must lie in (0, 0.5)",
                self.poisson
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IeVertex {
    pub id: String,
    pub kind: ElementKind,
    /// `None` exactly for ground vertices.
    pub attributes: Option<Attributes>,
}

impl IeVertex {
    pub fn ground(id: impl Into<String>) -> Self {
        IeVertex {
            id: id.into(),
            kind: ElementKind::Ground,
            attributes: None,
        }
    }

    pub fn element(id: impl Into<String>, kind: ElementKind, attributes: Attributes) -> Self {
        IeVertex {
            id: id.into(),
            kind,
            attributes: Some(attributes),
        }
    }
}

/// A validated attributed graph: connected, at least one ground vertex, every
/// sensor on an existing vertex. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct AttributedGraph {
    vertices: Vec<IeVertex>,
    index: BTreeMap<String, usize>,
    edges: BTreeSet<(usize, usize)>,
    adjacency: Vec<Vec<bool>>,
    sensors: BTreeMap<String, String>,
}

impl AttributedGraph {
    pub fn new<E, S>(vertices: Vec<IeVertex>, edges: E, sensors: S) -> Result<Self>
    where
        E: IntoIterator<Item = (String, String)>,
        S: IntoIterator<Item = (String, String)>,
    {
        if vertices.is_empty() {
            return Err(Error::InvalidInput("graph has no vertices".into()));
        }
        let mut index = BTreeMap::new();
        for (i, v) in vertices.iter().enumerate() {
            if index.insert(v.id.clone(), i).is_some() {
                return Err(Error::InvalidInput(format!("duplicate vertex id {}", v.id)));
            }
            match (&v.kind, &v.attributes) {
                (ElementKind::Ground, Some(_)) => {
                    return Err(Error::InvalidInput(format!(
                        "ground vertex {} must not carry attributes",
                        v.id
                    )))
                }
                (ElementKind::Ground, None) => {}
                (_, None) => {
                    return Err(Error::InvalidInput(format!(
                        "vertex {} ({}) is missing its attribute block",
                        v.id, v.kind
                    )))
                }
                (_, Some(a)) => a.validate(&v.id)?,
            }
        }
        if !vertices.iter().any(|v| v.kind.is_ground()) {
            return Err(Error::InvalidInput("graph has no ground vertex".into()));
        }

        let n = vertices.len();
        let mut edge_set = BTreeSet::new();
        let mut adjacency = vec![vec![false; n]; n];
        for (a, b) in edges {
            let ia = *index
                .get(&a)
                .ok_or_else(|| Error::InvalidInput(format!("edge references unknown vertex {a}")))?;
            let ib = *index
                .get(&b)
                .ok_or_else(|| Error::InvalidInput(format!("edge references unknown vertex {b}")))?;
            if ia == ib {
                return Err(Error::InvalidInput(format!("self-loop on vertex {a}")));
            }
            edge_set.insert((ia.min(ib), ia.max(ib)));
            adjacency[ia][ib] = true;
            adjacency[ib][ia] = true;
        }

        let mut sensor_map = BTreeMap::new();
        for (sensor, vertex) in sensors {
            if !index.contains_key(&vertex) {
                return Err(Error::InvalidInput(format!(
                    "sensor {sensor} is placed on unknown vertex {vertex}"
                )));
            }
            sensor_map.insert(sensor, vertex);
        }

        let graph = AttributedGraph {
            vertices,
            index,
            edges: edge_set,
            adjacency,
            sensors: sensor_map,
        };
        if !graph.is_connected() {
            return Err(Error::Connectivity("attributed graph is not connected".into()));
        }
        Ok(graph)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[IeVertex] {
        &self.vertices
    }

    pub fn vertex(&self, id: &str) -> Option<&IeVertex> {
        self.index.get(id).map(|&i| &self.vertices[i])
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Edges as ordered index pairs `(i, j)` with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_ids(&self) -> Vec<(String, String)> {
        self.edges
            .iter()
            .map(|&(a, b)| (self.vertices[a].id.clone(), self.vertices[b].id.clone()))
            .collect()
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.adjacency[a][b]
    }

    pub fn neighbours(&self, a: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[a]
            .iter()
            .enumerate()
            .filter_map(|(i, &adj)| adj.then_some(i))
    }

    pub fn sensors(&self) -> &BTreeMap<String, String> {
        &self.sensors
    }

    fn is_connected(&self) -> bool {
        let n = self.vertices.len();
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for w in self.neighbours(v) {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == n
    }
}

/// Where a population member's data come from. The framework treats both
/// kinds identically; the flag is bookkeeping only.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Real,
    #[default]
    Simulated,
}
