use std::collections::BTreeMap;
use std::sync::Arc;

use super::metric::{graph_distance, MetricConfig};
use super::{AttributedGraph, Provenance};
use crate::error::{Error, Result};
use crate::family::StructureInstance;
use crate::fibre::Fibre;
use crate::par::{self, Execution};

#[derive(Clone, Debug)]
pub struct Member {
    pub graph: AttributedGraph,
    pub instance: Option<StructureInstance>,
    pub fibre: Option<Arc<Fibre>>,
    pub provenance: Provenance,
}

impl Member {
    pub fn has_data(&self) -> bool {
        self.fibre.as_ref().is_some_and(|f| !f.is_empty())
    }
}

/// A set of structures keyed by id. Real and simulated members coexist and
/// are handled identically.
#[derive(Clone, Debug, Default)]
pub struct Population {
    members: BTreeMap<String, Member>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SourceChoice {
    pub id: String,
    pub distance: f64,
}

impl Population {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: impl Into<String>, member: Member) -> Result<()> {
        let id = id.into();
        if self.members.contains_key(&id) {
            return Err(Error::Conflict(format!("structure {id} already in population")));
        }
        self.members.insert(id, member);
        Ok(())
    }

    /// Adds a member built from a family instance.
    pub fn insert_instance(
        &mut self,
        id: impl Into<String>,
        instance: StructureInstance,
        provenance: Provenance,
    ) -> Result<()> {
        let graph = instance.graph()?;
        self.insert(
            id,
            Member {
                graph,
                instance: Some(instance),
                fibre: None,
                provenance,
            },
        )
    }

    pub fn attach_fibre(&mut self, id: &str, fibre: Arc<Fibre>) -> Result<()> {
        self.members
            .get_mut(id)
            .ok_or_else(|| Error::NotFound(format!("structure {id}")))?
            .fibre = Some(fibre);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&Member> {
        self.members.get(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.members.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Member)> {
        self.members.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Nearest data-rich structure to `target`, provided it lies within `d_s`.
    /// Ties go to the lexicographically smallest id.
    pub fn select_source(
        &self,
        target: &str,
        d_s: f64,
        cfg: &MetricConfig,
    ) -> Result<Option<SourceChoice>> {
        let t = self
            .members
            .get(target)
            .ok_or_else(|| Error::NotFound(format!("target structure {target}")))?;
        let mut best: Option<SourceChoice> = None;
        for (id, m) in &self.members {
            if id == target || !m.has_data() {
                continue;
            }
            let d = graph_distance(&m.graph, &t.graph, cfg)?;
            if best.as_ref().is_none_or(|b| d < b.distance) {
                best = Some(SourceChoice {
                    id: id.clone(),
                    distance: d,
                });
            }
        }
        Ok(best.filter(|b| b.distance <= d_s))
    }

    /// Pairwise distance matrix over `ids` (all members if `None`): zero
    /// diagonal, exactly symmetric.
    pub fn distance_matrix(
        &self,
        ids: Option<&[String]>,
        cfg: &MetricConfig,
        exec: Execution,
    ) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
        let ids: Vec<String> = match ids {
            Some(ids) => ids.to_vec(),
            None => self.members.keys().cloned().collect(),
        };
        let graphs: Vec<&AttributedGraph> = ids
            .iter()
            .map(|id| {
                self.members
                    .get(id)
                    .map(|m| &m.graph)
                    .ok_or_else(|| Error::NotFound(format!("structure {id}")))
            })
            .collect::<Result<_>>()?;
        let n = ids.len();
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
        let values = par::try_map(&pairs, exec, |&(i, j)| graph_distance(graphs[i], graphs[j], cfg))?;
        let mut m = vec![vec![0.0; n]; n];
        for (&(i, j), d) in pairs.iter().zip(values) {
            m[i][j] = d;
            m[j][i] = d;
        }
        Ok((ids, m))
    }
}
