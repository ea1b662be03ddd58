use serde::{Deserialize, Serialize};

use super::mcs::{maximum_common_subgraph, MatchOptions};
use super::AttributedGraph;
use crate::error::Result;
use crate::family::default_attribute_widths;

/// Weighting and normalisation of the structure metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricConfig {
    /// Weight of the attribute term relative to the topological term.
    pub lambda_attr: f64,
    /// Per-dimension normalisation widths for `[l, w, t, E, rho, nu]`.
    pub widths: [f64; 6],
    #[serde(skip)]
    pub matching: MatchOptions,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            lambda_attr: 1.0,
            widths: default_attribute_widths(),
            matching: MatchOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistanceParts {
    /// `1 - |mcs| / max(|V1|, |V2|)`.
    pub topological: f64,
    /// Euclidean norm of normalised attribute differences over the matching.
    pub attribute: f64,
    pub total: f64,
    pub common_vertices: usize,
    pub pairs: Vec<(usize, usize)>,
}

pub fn graph_distance(g1: &AttributedGraph, g2: &AttributedGraph, cfg: &MetricConfig) -> Result<f64> {
    Ok(graph_distance_parts(g1, g2, cfg)?.total)
}

pub fn graph_distance_parts(
    g1: &AttributedGraph,
    g2: &AttributedGraph,
    cfg: &MetricConfig,
) -> Result<DistanceParts> {
    let pair_cost = |u: usize, v: usize| -> f64 {
        match (&g1.vertices()[u].attributes, &g2.vertices()[v].attributes) {
            (Some(a), Some(b)) => squared_difference(&a.to_array(), &b.to_array(), &cfg.widths),
            _ => 0.0,
        }
    };
    let common = maximum_common_subgraph(g1, g2, pair_cost, &cfg.matching)?;

    // Sum the per-pair terms in sorted order so that D(g1, g2) and D(g2, g1)
    // accumulate identically.
    let mut terms: Vec<f64> = common.pairs.iter().map(|&(u, v)| pair_cost(u, v)).collect();
    terms.sort_by(f64::total_cmp);
    let attribute = terms.iter().sum::<f64>().sqrt();

    let largest = g1.vertex_count().max(g2.vertex_count());
    let topological = 1.0 - common.size as f64 / largest as f64;
    Ok(DistanceParts {
        topological,
        attribute,
        total: topological + cfg.lambda_attr * attribute,
        common_vertices: common.size,
        pairs: common.pairs,
    })
}

fn squared_difference(a: &[f64; 6], b: &[f64; 6], widths: &[f64; 6]) -> f64 {
    a.iter()
        .zip(b)
        .zip(widths)
        .map(|((x, y), w)| ((x - y) / w).powi(2))
        .sum()
}
