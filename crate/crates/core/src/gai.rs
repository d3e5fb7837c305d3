//! GAI bookkeeping: the network of parts sharing features, the degree-based
//! part ordering and the per-part exclusive feature sets `J_k`.
//!
//! Given an ordering `p_1..p_n`, `J_k = I_k \ (I_{k+1} ∪ … ∪ I_n)`. The `J_k`
//! partition the feature indices, so the subutilities `u[J_k]` sum to the full
//! utility, and `u[J_k]` depends only on parts `p_1..p_k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FeatureSet, ProblemModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaiNetwork {
    /// I_p for each basic part, by part id.
    pub nodes: Vec<FeatureSet>,
    /// Unordered edges `(p, q)` with `p < q`, sorted.
    pub edges: Vec<(usize, usize)>,
}

impl GaiNetwork {
    /// Number of distinct neighbours of each part.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.nodes.len()];
        for &(p, q) in &self.edges {
            deg[p] += 1;
            deg[q] += 1;
        }
        deg
    }

    pub fn neighbors(&self, p: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == p {
                    Some(b)
                } else if b == p {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }
}

pub fn build_gai_network(model: &ProblemModel) -> GaiNetwork {
    let nodes: Vec<FeatureSet> = model.parts().iter().map(|p| p.features.clone()).collect();
    let mut edges = Vec::new();
    for p in 0..nodes.len() {
        for q in p + 1..nodes.len() {
            if nodes[p].intersects(&nodes[q]) {
                edges.push((p, q));
            }
        }
    }
    GaiNetwork { nodes, edges }
}

/// Parts sorted by ascending degree; equal degrees keep ascending part id.
pub fn select_ordering(network: &GaiNetwork) -> Vec<usize> {
    let degrees = network.degrees();
    let mut order: Vec<usize> = (0..network.nodes.len()).collect();
    order.sort_by_key(|&p| (degrees[p], p));
    order
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaiDecomposition {
    /// p_1..p_n
    pub ordering: Vec<usize>,
    /// J_k by position in `ordering`.
    pub j_sets: Vec<FeatureSet>,
    /// J by part id (`by_part[ordering[k]] == j_sets[k]`).
    pub by_part: Vec<FeatureSet>,
    /// I by part id.
    pub i_sets: Vec<FeatureSet>,
}

impl GaiDecomposition {
    pub fn j_of(&self, part: usize) -> &FeatureSet {
        &self.by_part[part]
    }

    pub fn i_of(&self, part: usize) -> &FeatureSet {
        &self.i_sets[part]
    }

    /// `|I_p \ J_p|`: features of `p` credited to later parts.
    pub fn overlap(&self, part: usize) -> usize {
        self.i_sets[part].len() - self.by_part[part].len()
    }

    /// Position of a part in the ordering.
    pub fn rank_of(&self, part: usize) -> usize {
        self.ordering
            .iter()
            .position(|&p| p == part)
            .expect("ordering is a permutation")
    }
}

/// Computes `J_k` for the given ordering, which must be a permutation of the part ids.
pub fn compute_j(model: &ProblemModel, ordering: &[usize]) -> Result<GaiDecomposition> {
    let n = model.num_parts();
    let mut seen = vec![false; n];
    if ordering.len() != n {
        return Err(Error::invalid(
            "ordering",
            format!("expected {n} parts, got {}", ordering.len()),
        ));
    }
    for (k, &p) in ordering.iter().enumerate() {
        if p >= n || seen[p] {
            return Err(Error::invalid(
                format!("ordering[{k}]"),
                format!("part {p} is out of range or repeated"),
            ));
        }
        seen[p] = true;
    }
    let mut j_sets = vec![FeatureSet::empty(); n];
    let mut later = FeatureSet::empty();
    for k in (0..n).rev() {
        let ik = &model.parts()[ordering[k]].features;
        j_sets[k] = ik.difference(&later);
        later = later.union(ik);
    }
    let mut by_part = vec![FeatureSet::empty(); n];
    for (k, &p) in ordering.iter().enumerate() {
        by_part[p] = j_sets[k].clone();
    }
    Ok(GaiDecomposition {
        ordering: ordering.to_vec(),
        j_sets,
        by_part,
        i_sets: model.parts().iter().map(|p| p.features.clone()).collect(),
    })
}

/// Network, degree ordering and J sets in one step.
pub fn decompose(model: &ProblemModel) -> GaiDecomposition {
    let ordering = select_ordering(&build_gai_network(model));
    compute_j(model, &ordering).expect("degree ordering is a permutation")
}
