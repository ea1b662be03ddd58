//! Structure interchange documents.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Attributes, AttributedGraph, ElementKind, IeVertex, Provenance};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexFile {
    pub id: String,
    pub kind: ElementKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attributes: Option<[f64; 6]>,
}

/// On-disk form of one structure: `{id, vertices, edges, sensors, provenance}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureFile {
    pub id: String,
    pub vertices: Vec<VertexFile>,
    pub edges: Vec<[String; 2]>,
    #[serde(default)]
    pub sensors: BTreeMap<String, String>,
    #[serde(default)]
    pub provenance: Provenance,
}

impl StructureFile {
    pub fn from_graph(id: impl Into<String>, graph: &AttributedGraph, provenance: Provenance) -> Self {
        StructureFile {
            id: id.into(),
            vertices: graph
                .vertices()
                .iter()
                .map(|v| VertexFile {
                    id: v.id.clone(),
                    kind: v.kind.clone(),
                    attributes: v.attributes.map(|a| a.to_array()),
                })
                .collect(),
            edges: graph.edge_ids().into_iter().map(|(a, b)| [a, b]).collect(),
            sensors: graph.sensors().clone(),
            provenance,
        }
    }

    pub fn to_graph(&self) -> Result<AttributedGraph> {
        let vertices = self
            .vertices
            .iter()
            .map(|v| IeVertex {
                id: v.id.clone(),
                kind: v.kind.clone(),
                attributes: v.attributes.map(Attributes::from_array),
            })
            .collect();
        AttributedGraph::new(
            vertices,
            self.edges.iter().map(|[a, b]| (a.clone(), b.clone())),
            self.sensors.clone(),
        )
        .map_err(|e| Error::InvalidInput(format!("structure {}: {e}", self.id)))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
