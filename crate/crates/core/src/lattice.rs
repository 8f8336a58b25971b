//! Regular physical topologies: chain, honeycomb, square and triangular
//! lattices, with or without periodic wrap-around.
//!
//! Nodes are indexed row-major, `id = y * nx + x`. Every node carries an
//! ordered list of ports; a port is labelled by the direction of the physical
//! neighbor it faces, and that label is the qubit orientation used by the swap
//! rule.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopologyKind {
    Chain,
    Honeycomb,
    Square,
    Triangular,
}

impl TopologyKind {
    pub const ALL: [TopologyKind; 4] = [
        TopologyKind::Chain,
        TopologyKind::Honeycomb,
        TopologyKind::Square,
        TopologyKind::Triangular,
    ];

    /// Nominal physical node degree `d`.
    pub fn degree(self) -> usize {
        match self {
            TopologyKind::Chain => 2,
            TopologyKind::Honeycomb => 3,
            TopologyKind::Square => 4,
            TopologyKind::Triangular => 6,
        }
    }

    pub fn dimensions(self) -> usize {
        match self {
            TopologyKind::Chain => 1,
            _ => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TopologyKind::Chain => "chain",
            TopologyKind::Honeycomb => "honeycomb",
            TopologyKind::Square => "square",
            TopologyKind::Triangular => "triangular",
        }
    }
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TopologyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "chain" => Ok(TopologyKind::Chain),
            "honeycomb" => Ok(TopologyKind::Honeycomb),
            "square" => Ok(TopologyKind::Square),
            "triangular" => Ok(TopologyKind::Triangular),
            other => Err(Error::ConfigInvalid(format!("unknown topology '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "dims", rename_all = "lowercase")]
pub enum Boundary {
    Finite(Vec<usize>),
    Periodic(Vec<usize>),
}

impl Boundary {
    pub fn dims(&self) -> &[usize] {
        match self {
            Boundary::Finite(d) | Boundary::Periodic(d) => d,
        }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, Boundary::Periodic(_))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Boundary::Finite(_) => "finite",
            Boundary::Periodic(_) => "periodic",
        }
    }

    /// Dimensions rendered as `10x10`.
    pub fn dims_label(&self) -> String {
        self.dims()
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join("x")
    }
}

/// Smallest periodic side length that keeps every chain of at most `m`
/// segments from wrapping onto itself.
pub fn min_periodic_side(max_swap_distance: u32) -> usize {
    2 * max_swap_distance as usize + 2
}

/// Direction of the physical neighbor a port faces.
///
/// The discriminant doubles as a dense index (`0..6`) used by the swap pools.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Orientation {
    West = 0,
    East = 1,
    South = 2,
    North = 3,
    NorthEast = 4,
    SouthWest = 5,
}

impl Orientation {
    pub const COUNT: usize = 6;

    pub fn index(self) -> usize {
        self as usize
    }

    fn offset(self) -> (isize, isize) {
        match self {
            Orientation::West => (-1, 0),
            Orientation::East => (1, 0),
            Orientation::South => (0, -1),
            Orientation::North => (0, 1),
            Orientation::NorthEast => (1, 1),
            Orientation::SouthWest => (-1, -1),
        }
    }

    pub fn opposite(self) -> Orientation {
        match self {
            Orientation::West => Orientation::East,
            Orientation::East => Orientation::West,
            Orientation::South => Orientation::North,
            Orientation::North => Orientation::South,
            Orientation::NorthEast => Orientation::SouthWest,
            Orientation::SouthWest => Orientation::NorthEast,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Port {
    pub orientation: Orientation,
    pub neighbor: NodeId,
}

/// An undirected physical channel, stored with the port label at each end.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Channel {
    pub a: NodeId,
    pub a_orientation: Orientation,
    pub b: NodeId,
    pub b_orientation: Orientation,
}

#[derive(Clone, Debug)]
pub struct PhysicalGraph {
    kind: TopologyKind,
    boundary: Boundary,
    nx: usize,
    ny: usize,
    ports: Vec<Vec<Port>>,
    channels: Vec<Channel>,
}

impl PhysicalGraph {
    /// Builds a lattice. Periodic dimensions are checked against
    /// `max_swap_distance` so that no admissible chain can wrap around.
    pub fn build(kind: TopologyKind, boundary: Boundary, max_swap_distance: u32) -> Result<Self> {
        let dims = boundary.dims();
        if dims.len() != kind.dimensions() {
            return Err(Error::InvalidDims(format!(
                "{kind} lattice expects {} dimension(s), got {}",
                kind.dimensions(),
                dims.len()
            )));
        }
        if dims.contains(&0) {
            return Err(Error::InvalidDims("dimensions must be positive".into()));
        }
        let (nx, ny) = match kind {
            TopologyKind::Chain => (dims[0], 1),
            _ => (dims[0], dims[1]),
        };
        let periodic = boundary.is_periodic();
        if periodic {
            let required = min_periodic_side(max_swap_distance.max(1));
            for &dim in dims {
                if dim < required {
                    return Err(Error::WrapTooSmall {
                        dim,
                        max_swap_distance,
                        required,
                    });
                }
            }
            if kind == TopologyKind::Honeycomb && (nx % 2 != 0 || ny % 2 != 0) {
                return Err(Error::OddHoneycomb(nx, ny));
            }
        }

        let n = nx * ny;
        let mut ports = Vec::with_capacity(n);
        for id in 0..n {
            let (x, y) = ((id % nx) as isize, (id / nx) as isize);
            let mut node_ports = Vec::with_capacity(kind.degree());
            for orientation in port_order(kind, x, y) {
                let (dx, dy) = orientation.offset();
                let (mut px, mut py) = (x + dx, y + dy);
                if periodic {
                    px = px.rem_euclid(nx as isize);
                    py = py.rem_euclid(ny as isize);
                } else if px < 0 || py < 0 || px >= nx as isize || py >= ny as isize {
                    continue;
                }
                node_ports.push(Port {
                    orientation,
                    neighbor: (py as usize * nx + px as usize) as NodeId,
                });
            }
            ports.push(node_ports);
        }

        let mut channels = Vec::new();
        for (a, node_ports) in ports.iter().enumerate() {
            for port in node_ports {
                if (port.neighbor as usize) > a {
                    channels.push(Channel {
                        a: a as NodeId,
                        a_orientation: port.orientation,
                        b: port.neighbor,
                        b_orientation: port.orientation.opposite(),
                    });
                }
            }
        }

        let graph = PhysicalGraph {
            kind,
            boundary,
            nx,
            ny,
            ports,
            channels,
        };
        debug_assert!(graph.check_invariants().is_ok());
        Ok(graph)
    }

    pub fn kind(&self) -> TopologyKind {
        self.kind
    }

    pub fn boundary(&self) -> &Boundary {
        &self.boundary
    }

    pub fn node_count(&self) -> usize {
        self.ports.len()
    }

    pub fn ports(&self, node: NodeId) -> &[Port] {
        &self.ports[node as usize]
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    /// Physical degree `d_i` of one node.
    pub fn degree(&self, node: NodeId) -> usize {
        self.ports[node as usize].len()
    }

    /// Lattice extent as `(nx, ny)`; `ny` is 1 for chains.
    pub fn extent(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn coords(&self, node: NodeId) -> (usize, usize) {
        (node as usize % self.nx, node as usize / self.nx)
    }

    pub fn node_at(&self, x: usize, y: usize) -> NodeId {
        (y * self.nx + x) as NodeId
    }

    /// Hop count of the shortest channel path, or `None` if unreachable.
    pub fn graph_distance(&self, a: NodeId, b: NodeId) -> Option<usize> {
        if a == b {
            return Some(0);
        }
        self.distances_from(a, None)[b as usize]
    }

    /// Nodes `j != i` within `max_swap_distance` hops of `i`, in ascending id order.
    pub fn potential_neighborhood(&self, i: NodeId, max_swap_distance: u32) -> Vec<NodeId> {
        self.distances_from(i, Some(max_swap_distance as usize))
            .iter()
            .enumerate()
            .filter(|&(j, d)| j != i as usize && d.is_some())
            .map(|(j, _)| j as NodeId)
            .collect()
    }

    /// Breadth-first distances from `source`, truncated at `limit` hops.
    pub fn distances_from(&self, source: NodeId, limit: Option<usize>) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.node_count()];
        dist[source as usize] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u as usize].unwrap();
            if limit.is_some_and(|l| du >= l) {
                continue;
            }
            for port in &self.ports[u as usize] {
                let v = port.neighbor as usize;
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(port.neighbor);
                }
            }
        }
        dist
    }

    pub fn check_invariants(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Invariant(msg));
        let degree_sum: usize = self.ports.iter().map(Vec::len).sum();
        if degree_sum != 2 * self.channels.len() {
            return fail(format!(
                "degree sum {degree_sum} != 2 * {} channels",
                self.channels.len()
            ));
        }
        for (a, node_ports) in self.ports.iter().enumerate() {
            for (k, port) in node_ports.iter().enumerate() {
                if node_ports[..k]
                    .iter()
                    .any(|p| p.orientation == port.orientation)
                {
                    return fail(format!(
                        "node {a} repeats orientation {:?}",
                        port.orientation
                    ));
                }
                let back = self.ports[port.neighbor as usize]
                    .iter()
                    .filter(|p| p.neighbor as usize == a)
                    .count();
                if back != 1 {
                    return fail(format!(
                        "node {} has {back} ports back to node {a}",
                        port.neighbor
                    ));
                }
            }
            if self.boundary.is_periodic() && node_ports.len() != self.kind.degree() {
                return fail(format!("periodic node {a} has degree {}", node_ports.len()));
            }
        }
        Ok(())
    }
}

/// Canonical port order at `(x, y)`. Honeycomb nodes keep one vertical bond,
/// chosen by checkerboard parity (brick-wall embedding).
fn port_order(kind: TopologyKind, x: isize, y: isize) -> Vec<Orientation> {
    use Orientation::*;
    match kind {
        TopologyKind::Chain => vec![West, East],
        TopologyKind::Square => vec![West, East, South, North],
        TopologyKind::Triangular => vec![West, East, South, North, NorthEast, SouthWest],
        TopologyKind::Honeycomb => {
            if (x + y).rem_euclid(2) == 0 {
                vec![West, East, North]
            } else {
                vec![West, East, South]
            }
        }
    }
}
