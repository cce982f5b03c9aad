//! Feature positions and the adjacency graph supplying geodesic distances.
//!
//! Distances are graph geodesics (shortest paths over positive edge
//! lengths), which generalizes both a cortical mesh and the synthetic grids
//! used in simulations.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use ndarray::Array2;

use crate::error::{Error, Result};

/// `p` feature positions (in mm) plus an undirected weighted adjacency graph
/// on the features.
#[derive(Debug, Clone)]
pub struct Geometry {
    /// p×d matrix of positions.
    positions: Array2<f64>,
    /// Adjacency list; `adj[j]` holds `(neighbor, edge_length)`.
    adj: Vec<Vec<(usize, f64)>>,
}

/// Max-heap entry ordered so the smallest distance pops first.
#[derive(PartialEq)]
struct HeapItem {
    dist: f64,
    node: usize,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed on distance, then node index for determinism
        other
            .dist
            .partial_cmp(&self.dist)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Geometry {
    /// Build from positions and undirected edges `(j, k, length)`.
    pub fn new(positions: Array2<f64>, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let p = positions.nrows();
        if p == 0 {
            return Err(Error::ShapeMismatch("geometry needs at least one feature".into()));
        }
        if positions.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature positions"));
        }
        let mut adj = vec![Vec::new(); p];
        for &(a, b, len) in edges {
            if a >= p || b >= p {
                return Err(Error::ShapeMismatch(format!(
                    "edge ({a}, {b}) references a feature outside [0, {p})"
                )));
            }
            if a == b {
                return Err(Error::InvalidParam(format!("self-loop on feature {a}")));
            }
            if !(len > 0.0 && len.is_finite()) {
                return Err(Error::InvalidParam(format!(
                    "edge ({a}, {b}) has non-positive length {len}"
                )));
            }
            adj[a].push((b, len));
            adj[b].push((a, len));
        }
        for list in &mut adj {
            list.sort_by(|x, y| x.0.cmp(&y.0));
            list.dedup_by(|x, y| x.0 == y.0);
        }
        Ok(Self { positions, adj })
    }

    pub fn p(&self) -> usize {
        self.positions.nrows()
    }

    pub fn dim(&self) -> usize {
        self.positions.ncols()
    }

    pub fn positions(&self) -> &Array2<f64> {
        &self.positions
    }

    pub fn neighbors(&self, j: usize) -> &[(usize, f64)] {
        &self.adj[j]
    }

    /// Whether the whole adjacency graph is connected.
    pub fn is_connected(&self) -> bool {
        let d = self.distances_from_set(&[0]);
        d.iter().all(|v| v.is_finite())
    }

    /// Geodesic distance between two features. Errors if no path exists.
    pub fn geodesic_distance(&self, j: usize, k: usize) -> Result<f64> {
        self.check_index(j)?;
        self.check_index(k)?;
        if j == k {
            return Ok(0.0);
        }
        let mut dist = vec![f64::INFINITY; self.p()];
        let mut heap = BinaryHeap::new();
        dist[j] = 0.0;
        heap.push(HeapItem { dist: 0.0, node: j });
        while let Some(HeapItem { dist: d, node }) = heap.pop() {
            if node == k {
                return Ok(d);
            }
            if d > dist[node] {
                continue;
            }
            for &(nb, len) in &self.adj[node] {
                let nd = d + len;
                if nd < dist[nb] {
                    dist[nb] = nd;
                    heap.push(HeapItem { dist: nd, node: nb });
                }
            }
        }
        Err(Error::Disconnected { from: j, to: k })
    }

    /// Geodesic distances from one feature to all features (∞ when
    /// unreachable).
    pub fn distances_from(&self, j: usize) -> Vec<f64> {
        self.distances_from_set(&[j])
    }

    /// Multi-source Dijkstra: distance from every feature to the nearest
    /// member of `set` (∞ when unreachable, ∞ everywhere if `set` is empty).
    pub fn distances_from_set(&self, set: &[usize]) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.p()];
        let mut heap = BinaryHeap::new();
        for &s in set {
            if dist[s] > 0.0 {
                dist[s] = 0.0;
                heap.push(HeapItem { dist: 0.0, node: s });
            }
        }
        while let Some(HeapItem { dist: d, node }) = heap.pop() {
            if d > dist[node] {
                continue;
            }
            for &(nb, len) in &self.adj[node] {
                let nd = d + len;
                if nd < dist[nb] {
                    dist[nb] = nd;
                    heap.push(HeapItem { dist: nd, node: nb });
                }
            }
        }
        dist
    }

    /// Features within geodesic distance `< radius` of `center`; the center
    /// itself is always included (so radius 0 yields exactly the center).
    pub fn ball(&self, center: usize, radius: f64) -> Vec<usize> {
        let d = self.distances_from(center);
        (0..self.p()).filter(|&j| j == center || d[j] < radius).collect()
    }

    /// Largest pairwise geodesic distance among `members` (0 for a single
    /// member). Distances are measured in the full graph.
    pub fn diameter_of(&self, members: &[usize]) -> f64 {
        let mut diam: f64 = 0.0;
        for &m in members {
            let d = self.distances_from(m);
            for &o in members {
                diam = diam.max(d[o]);
            }
        }
        diam
    }

    /// Whether `members` induce a connected subgraph.
    pub fn is_connected_subset(&self, members: &[usize]) -> bool {
        if members.is_empty() {
            return false;
        }
        let inset: std::collections::HashSet<usize> = members.iter().copied().collect();
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![members[0]];
        seen.insert(members[0]);
        while let Some(v) = stack.pop() {
            for &(nb, _) in &self.adj[v] {
                if inset.contains(&nb) && seen.insert(nb) {
                    stack.push(nb);
                }
            }
        }
        seen.len() == members.len()
    }

    /// Coordinate-wise (min, max) of the feature positions.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for row in self.positions.rows() {
            for (k, &v) in row.iter().enumerate() {
                lo[k] = lo[k].min(v);
                hi[k] = hi[k].max(v);
            }
        }
        (lo, hi)
    }

    fn check_index(&self, j: usize) -> Result<()> {
        if j >= self.p() {
            return Err(Error::ShapeMismatch(format!(
                "feature index {j} outside [0, {})",
                self.p()
            )));
        }
        Ok(())
    }
}
