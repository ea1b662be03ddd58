//! Maximum common induced subgraph under kind-equality vertex matching.
//!
//! The search walks the association graph implicitly: vertices of the first
//! graph are visited in a fixed order and each is either mapped to a
//! compatible, still-unused vertex of the second graph or left out. Every
//! remaining vertex keeps a bitmask domain of partners consistent with all
//! pairs chosen so far (same kind, adjacency preserved both ways), and the
//! per-kind domain sizes give the upper bound used for pruning.
//!
//! The objective is lexicographic: largest common subgraph first, then the
//! smallest summed pair cost. The cost hook lets the metric pick the
//! attribute-closest correspondence among all maximum ones.

use std::collections::BTreeMap;

use super::{AttributedGraph, ElementKind};
use crate::error::{Error, Result};

/// Hard ceiling imposed by the `u32` domain masks.
const MASK_BITS: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MatchOptions {
    /// Largest graph (vertex count) accepted by the exact search.
    pub max_exact_vertices: usize,
    /// Fall back to a greedy matching above the exact limit instead of failing.
    pub relaxed: bool,
}

impl Default for MatchOptions {
    fn default() -> Self {
        MatchOptions {
            max_exact_vertices: 12,
            relaxed: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CommonSubgraph {
    pub size: usize,
    /// Matched `(vertex in g1, vertex in g2)` index pairs, sorted by the first.
    pub pairs: Vec<(usize, usize)>,
    /// Summed pair cost of the chosen correspondence.
    pub cost: f64,
    /// False when the greedy fallback produced the result.
    pub exact: bool,
}

/// Vertex count of the maximum common induced subgraph.
pub fn mcs_size(g1: &AttributedGraph, g2: &AttributedGraph) -> Result<usize> {
    Ok(maximum_common_subgraph(g1, g2, |_, _| 0.0, &MatchOptions::default())?.size)
}

pub fn maximum_common_subgraph<C>(
    g1: &AttributedGraph,
    g2: &AttributedGraph,
    cost: C,
    opts: &MatchOptions,
) -> Result<CommonSubgraph>
where
    C: Fn(usize, usize) -> f64,
{
    let n1 = g1.vertex_count();
    let n2 = g2.vertex_count();
    if n1 == 0 || n2 == 0 {
        return Err(Error::InvalidInput("common subgraph of an empty graph".into()));
    }
    let limit = opts.max_exact_vertices.min(MASK_BITS);
    let largest = n1.max(n2);
    if largest > limit {
        if opts.relaxed {
            return Ok(greedy(g1, g2, &cost));
        }
        return Err(Error::GraphTooLarge {
            vertices: largest,
            limit,
        });
    }

    // Kind classes shared between the two graphs.
    let mut classes: BTreeMap<&ElementKind, usize> = BTreeMap::new();
    for v in g1.vertices().iter().chain(g2.vertices()) {
        let next = classes.len();
        classes.entry(&v.kind).or_insert(next);
    }
    let class1: Vec<usize> = g1.vertices().iter().map(|v| classes[&v.kind]).collect();
    let class2: Vec<usize> = g2.vertices().iter().map(|v| classes[&v.kind]).collect();

    let adj2: Vec<u32> = (0..n2)
        .map(|v| {
            (0..n2)
                .filter(|&w| g2.adjacent(v, w))
                .fold(0u32, |m, w| m | (1 << w))
        })
        .collect();
    let all2: u32 = if n2 == 32 { u32::MAX } else { (1u32 << n2) - 1 };

    // Rare kinds and high degree first: they constrain the most.
    let mut order: Vec<usize> = (0..n1).collect();
    let class_count = |c: usize| class1.iter().filter(|&&x| x == c).count();
    order.sort_by_key(|&u| {
        (
            class_count(class1[u]),
            std::cmp::Reverse(g1.neighbours(u).count()),
            u,
        )
    });

    let domains: Vec<u32> = order
        .iter()
        .map(|&u| {
            (0..n2)
                .filter(|&v| class2[v] == class1[u])
                .fold(0u32, |m, v| m | (1 << v))
        })
        .collect();

    let mut search = Search {
        g1,
        order: &order,
        class1: &class1,
        n_classes: classes.len(),
        adj2: &adj2,
        all2,
        cost: &cost,
        current: Vec::with_capacity(n1),
        best: Vec::new(),
        best_cost: 0.0,
    };
    search.run(0, domains, 0, 0.0);

    let mut pairs = search.best;
    pairs.sort_unstable();
    let best_cost = search.best_cost;
    Ok(CommonSubgraph {
        size: pairs.len(),
        pairs,
        cost: best_cost,
        exact: true,
    })
}

struct Search<'a, C> {
    g1: &'a AttributedGraph,
    order: &'a [usize],
    class1: &'a [usize],
    n_classes: usize,
    adj2: &'a [u32],
    all2: u32,
    cost: &'a C,
    current: Vec<(usize, usize)>,
    best: Vec<(usize, usize)>,
    best_cost: f64,
}

impl<C: Fn(usize, usize) -> f64> Search<'_, C> {
    /// `domains[i]` is the candidate mask of `order[depth + i]`.
    fn run(&mut self, depth: usize, domains: Vec<u32>, used: u32, cost: f64) {
        let bound = self.current.len() + self.bound(depth, &domains, used);
        if bound < self.best.len() || (bound == self.best.len() && cost >= self.best_cost && !self.best.is_empty()) {
            return;
        }
        if depth == self.order.len() {
            let size = self.current.len();
            if size > self.best.len() || (size == self.best.len() && cost < self.best_cost) {
                self.best = self.current.clone();
                self.best_cost = cost;
            }
            return;
        }

        let u = self.order[depth];
        let mut candidates = domains[0] & !used;
        while candidates != 0 {
            let v = candidates.trailing_zeros() as usize;
            candidates &= candidates - 1;

            let next: Vec<u32> = self.order[depth + 1..]
                .iter()
                .zip(&domains[1..])
                .map(|(&w, &dom)| {
                    let keep = if self.g1.adjacent(u, w) {
                        self.adj2[v]
                    } else {
                        !self.adj2[v] & self.all2
                    };
                    dom & keep & !(1u32 << v)
                })
                .collect();
            self.current.push((u, v));
            let c = (self.cost)(u, v);
            self.run(depth + 1, next, used | (1 << v), cost + c);
            self.current.pop();
        }

        // Leave `u` unmatched.
        self.run(depth + 1, domains[1..].to_vec(), used, cost);
    }

    fn bound(&self, depth: usize, domains: &[u32], used: u32) -> usize {
        let mut count = vec![0usize; self.n_classes];
        let mut union = vec![0u32; self.n_classes];
        for (&u, &dom) in self.order[depth..].iter().zip(domains) {
            let dom = dom & !used;
            if dom != 0 {
                let c = self.class1[u];
                count[c] += 1;
                union[c] |= dom;
            }
        }
        count
            .iter()
            .zip(&union)
            .map(|(&n, &m)| n.min(m.count_ones() as usize))
            .sum()
    }
}

/// Greedy lower bound used above the exact limit.
fn greedy<C: Fn(usize, usize) -> f64>(
    g1: &AttributedGraph,
    g2: &AttributedGraph,
    cost: &C,
) -> CommonSubgraph {
    let n2 = g2.vertex_count();
    let mut used = vec![false; n2];
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let mut total = 0.0;
    for u in 0..g1.vertex_count() {
        let kind = &g1.vertices()[u].kind;
        let best = (0..n2)
            .filter(|&v| !used[v] && &g2.vertices()[v].kind == kind)
            .filter(|&v| {
                pairs
                    .iter()
                    .all(|&(pu, pv)| g1.adjacent(u, pu) == g2.adjacent(v, pv))
            })
            .map(|v| (cost(u, v), v))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if let Some((c, v)) = best {
            used[v] = true;
            pairs.push((u, v));
            total += c;
        }
    }
    CommonSubgraph {
        size: pairs.len(),
        pairs,
        cost: total,
        exact: false,
    }
}
