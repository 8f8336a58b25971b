//! Virtual neighborhood size and virtual node degree.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{NodeId, PhysicalGraph};
use crate::protocol::NetworkState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    /// Virtual neighborhood size.
    V,
    /// Virtual node degree.
    K,
}

impl MetricKind {
    pub const ALL: [MetricKind; 2] = [MetricKind::V, MetricKind::K];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::V => "v",
            MetricKind::K => "k",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Number of distinct nodes sharing at least one link with `node`.
pub fn virtual_neighborhood_size(state: &NetworkState, node: NodeId) -> usize {
    let mut others: Vec<NodeId> = state.counterparts(node).collect();
    others.sort_unstable();
    others.dedup();
    others.len()
}

/// Number of links at `node`, counting multiplicity.
pub fn virtual_degree(state: &NetworkState, node: NodeId) -> usize {
    state.degree(node)
}

/// Per-node observation at one time step.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MetricSample {
    pub t: u64,
    pub v: Vec<u32>,
    pub k: Vec<u32>,
}

impl MetricSample {
    pub fn get(&self, metric: MetricKind, node: NodeId) -> u32 {
        match metric {
            MetricKind::V => self.v[node as usize],
            MetricKind::K => self.k[node as usize],
        }
    }
}

/// Observes every node in one pass, reusing `stamp` (sized to the node count)
/// to count distinct counterparts.
pub fn observe_into(state: &NetworkState, sample: &mut MetricSample, stamp: &mut Vec<u32>) {
    let n = state.node_count();
    sample.t = state.t();
    sample.v.clear();
    sample.k.clear();
    stamp.clear();
    stamp.resize(n, u32::MAX);
    for node in 0..n as NodeId {
        let mut v = 0;
        for other in state.counterparts(node) {
            let other = other as usize;
            if stamp[other] != node {
                stamp[other] = node;
                v += 1;
            }
        }
        sample.v.push(v);
        sample.k.push(state.degree(node) as u32);
    }
}

pub fn observe(state: &NetworkState) -> MetricSample {
    let mut sample = MetricSample::default();
    observe_into(state, &mut sample, &mut Vec::new());
    sample
}

/// Upper bounds on `(v, k)` for a node of degree `d` in an infinite lattice.
pub fn metric_bounds(d: usize, t_cut: u32, max_swap_distance: u32) -> Result<(u64, u64)> {
    let (d64, t, m) = (d as u64, t_cut as u64, max_swap_distance as u64);
    let v = match d {
        2 => 2 * t.min(m),
        3 | 4 | 6 => d64 * t.min(m * (m + 1) / 2),
        other => return Err(Error::UnsupportedDegree(other)),
    };
    Ok((v, d64 * t))
}

/// Per-node bounds on one lattice. Periodic lattices use the infinite-lattice
/// table; finite lattices use the node's own degree `d_i` and its reachable
/// potential neighborhood.
#[derive(Clone, Debug)]
pub struct NodeBounds {
    pub v: Vec<u64>,
    pub k: Vec<u64>,
}

impl NodeBounds {
    pub fn new(graph: &PhysicalGraph, t_cut: u32, max_swap_distance: u32) -> Result<Self> {
        let n = graph.node_count();
        let mut v = Vec::with_capacity(n);
        let mut k = Vec::with_capacity(n);
        if graph.boundary().is_periodic() {
            let (bv, bk) = metric_bounds(graph.kind().degree(), t_cut, max_swap_distance)?;
            v.resize(n, bv);
            k.resize(n, bk);
        } else {
            for node in 0..n as NodeId {
                let bk = graph.degree(node) as u64 * t_cut as u64;
                let reach = graph.potential_neighborhood(node, max_swap_distance).len() as u64;
                v.push(bk.min(reach));
                k.push(bk);
            }
        }
        Ok(NodeBounds { v, k })
    }

    pub fn get(&self, metric: MetricKind, node: NodeId) -> u64 {
        match metric {
            MetricKind::V => self.v[node as usize],
            MetricKind::K => self.k[node as usize],
        }
    }

    /// Hard check of `v <= k`, `v <= bound_v` and `k <= bound_k` for every node.
    pub fn check(&self, sample: &MetricSample) -> Result<()> {
        for (node, (&v, &k)) in sample.v.iter().zip(&sample.k).enumerate() {
            if v > k || v as u64 > self.v[node] || k as u64 > self.k[node] {
                return Err(Error::Invariant(format!(
                    "metric bound violated at t={} node={node}: v={v} (<= {}), k={k} (<= {})",
                    sample.t, self.v[node], self.k[node]
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Boundary, Orientation, TopologyKind};
    use crate::protocol::{Endpoint, Link, LinkId};

    fn link(a: NodeId, b: NodeId, birth: u64) -> Link {
        Link {
            id: LinkId(0),
            a: Endpoint {
                node: a,
                orientation: Orientation::East,
            },
            b: Endpoint {
                node: b,
                orientation: Orientation::West,
            },
            m: 1,
            birth_min: birth,
            birth_sum: birth,
        }
    }

    #[test]
    fn empty_node_has_zero_metrics() {
        let state = NetworkState::empty(3);
        assert_eq!(virtual_neighborhood_size(&state, 1), 0);
        assert_eq!(virtual_degree(&state, 1), 0);
    }

    #[test]
    fn parallel_links_count_once_for_v() {
        let state = NetworkState::from_links(2, 3, [link(0, 1, 2), link(0, 1, 3)]);
        assert_eq!(virtual_neighborhood_size(&state, 0), 1);
        assert_eq!(virtual_degree(&state, 0), 2);
        let sample = observe(&state);
        assert_eq!(sample.v, vec![1, 1]);
        assert_eq!(sample.k, vec![2, 2]);
    }

    #[test]
    fn observe_matches_per_node_functions() {
        let state = NetworkState::from_links(
            4,
            0,
            [
                link(0, 1, 0),
                link(0, 2, 0),
                link(0, 1, 0),
                link(2, 3, 0),
                link(3, 1, 0),
            ],
        );
        let sample = observe(&state);
        for node in 0..4 {
            assert_eq!(
                sample.v[node as usize] as usize,
                virtual_neighborhood_size(&state, node)
            );
            assert_eq!(
                sample.k[node as usize] as usize,
                virtual_degree(&state, node)
            );
        }
        assert_eq!(
            sample.k.iter().sum::<u32>() as usize,
            2 * state.links().len()
        );
    }

    #[test]
    fn table_bounds() {
        assert_eq!(metric_bounds(2, 11, 3).unwrap(), (6, 22));
        assert_eq!(metric_bounds(4, 11, 3).unwrap(), (24, 44));
        assert_eq!(metric_bounds(6, 2, 3).unwrap(), (12, 12));
        assert_eq!(metric_bounds(3, 22, 3).unwrap(), (18, 66));
        assert!(matches!(
            metric_bounds(5, 2, 3),
            Err(Error::UnsupportedDegree(5))
        ));
    }

    #[test]
    fn periodic_bounds_agree_with_potential_neighborhood() {
        for kind in TopologyKind::ALL {
            for (t_cut, m) in [(1, 3), (2, 3), (11, 3), (22, 2), (11, 4)] {
                let side = 2 * m as usize + 4;
                let dims = if kind == TopologyKind::Chain {
                    vec![side]
                } else {
                    vec![side, side]
                };
                let g = PhysicalGraph::build(kind, Boundary::Periodic(dims), m).unwrap();
                let reach = g.potential_neighborhood(0, m).len() as u64;
                let (bv, bk) = metric_bounds(kind.degree(), t_cut, m).unwrap();
                assert_eq!(bv, bk.min(reach), "{kind} tcut={t_cut} M={m}");
            }
        }
    }

    #[test]
    fn finite_bounds_shrink_at_the_boundary() {
        let g =
            PhysicalGraph::build(TopologyKind::Square, Boundary::Finite(vec![7, 7]), 3).unwrap();
        let b = NodeBounds::new(&g, 11, 3).unwrap();
        let corner = g.node_at(0, 0);
        let centre = g.node_at(3, 3);
        assert_eq!(b.k[corner as usize], 22);
        assert_eq!(b.v[corner as usize], 9);
        assert_eq!(b.v[centre as usize], 24);
    }
}
