//! Weighted graphs and their shortest-path metrics.

use rayon::prelude::*;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::FiniteMetricSpace;
use crate::{Error, Result};

/// An undirected, connected graph with positive edge weights.
///
/// Connectivity is established at construction, so a `WeightedGraph` always
/// induces a genuine finite metric via shortest paths.
#[derive(Clone, Debug)]
pub struct WeightedGraph {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
    adj: Vec<Vec<(usize, f64)>>,
}

impl WeightedGraph {
    /// Builds a graph from an edge list, validating indices, weights, and
    /// connectivity. Parallel edges are allowed (the lighter one wins in any
    /// shortest path); self-loops are not.
    pub fn new(n: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "graph needs at least one vertex".into(),
            ));
        }
        let mut adj = vec![Vec::new(); n];
        for &(u, v, w) in &edges {
            if u >= n || v >= n {
                return Err(Error::InvalidParameter(format!(
                    "edge ({u}, {v}) out of range for {n} vertices"
                )));
            }
            if u == v {
                return Err(Error::InvalidParameter(format!("self-loop at vertex {u}")));
            }
            if !w.is_finite() || w <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "edge ({u}, {v}) has non-positive weight {w}"
                )));
            }
            adj[u].push((v, w));
            adj[v].push((u, w));
        }
        let g = WeightedGraph { n, edges, adj };
        if let Some(v) = g.first_unreachable(0) {
            return Err(Error::Disconnected { u: 0, v });
        }
        Ok(g)
    }

    /// Parses the text format: a header line `n m` followed by `m` lines
    /// `u v w` (0-indexed endpoints, decimal weight). Blank lines and lines
    /// starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let (header_line, header) = lines.next().ok_or_else(|| Error::Parse {
            line: 1,
            msg: "empty input, expected header `n m`".into(),
        })?;
        let mut it = header.split_whitespace();
        let n: usize = parse_field(&mut it, header_line, "vertex count")?;
        let m: usize = parse_field(&mut it, header_line, "edge count")?;
        if it.next().is_some() {
            return Err(Error::Parse {
                line: header_line,
                msg: "trailing tokens after header `n m`".into(),
            });
        }

        let mut edges = Vec::with_capacity(m);
        for _ in 0..m {
            let (line, text) = lines.next().ok_or_else(|| Error::Parse {
                line: header_line,
                msg: format!("expected {m} edge lines, found {}", edges.len()),
            })?;
            let mut it = text.split_whitespace();
            let u: usize = parse_field(&mut it, line, "endpoint u")?;
            let v: usize = parse_field(&mut it, line, "endpoint v")?;
            let w: f64 = parse_field(&mut it, line, "weight w")?;
            if it.next().is_some() {
                return Err(Error::Parse {
                    line,
                    msg: "trailing tokens after `u v w`".into(),
                });
            }
            edges.push((u, v, w));
        }
        if let Some((line, _)) = lines.next() {
            return Err(Error::Parse {
                line,
                msg: "unexpected content after last edge".into(),
            });
        }
        WeightedGraph::new(n, edges)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn neighbors(&self, u: usize) -> &[(usize, f64)] {
        &self.adj[u]
    }

    /// Sum of incident edge weights (counting parallel edges separately).
    pub fn weighted_degree(&self, u: usize) -> f64 {
        self.adj[u].iter().map(|&(_, w)| w).sum()
    }

    /// Single-source shortest-path distances (Dijkstra, binary heap).
    pub fn dijkstra(&self, src: usize) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.n];
        let mut heap = BinaryHeap::new();
        dist[src] = 0.0;
        heap.push(MinEntry {
            dist: 0.0,
            node: src,
        });
        while let Some(MinEntry { dist: d, node: u }) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &(v, w) in &self.adj[u] {
                let nd = d + w;
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(MinEntry { dist: nd, node: v });
                }
            }
        }
        dist
    }

    fn first_unreachable(&self, src: usize) -> Option<usize> {
        let mut seen = vec![false; self.n];
        let mut stack = vec![src];
        seen[src] = true;
        while let Some(u) = stack.pop() {
            for &(v, _) in &self.adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.iter().position(|&s| !s)
    }

    /// All-pairs shortest-path metric, computed source-parallel.
    pub fn shortest_path_metric(&self, provenance: impl Into<String>) -> Result<FiniteMetricSpace> {
        let rows: Vec<Vec<f64>> = (0..self.n)
            .into_par_iter()
            .map(|s| self.dijkstra(s))
            .collect();
        let mut dist = Vec::with_capacity(self.n * self.n);
        for row in rows {
            dist.extend_from_slice(&row);
        }
        FiniteMetricSpace::from_matrix(self.n, dist, provenance)
    }
}

fn parse_field<T: std::str::FromStr>(
    it: &mut std::str::SplitWhitespace,
    line: usize,
    what: &str,
) -> Result<T> {
    let tok = it.next().ok_or_else(|| Error::Parse {
        line,
        msg: format!("missing {what}"),
    })?;
    tok.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("cannot parse {what} from {tok:?}"),
    })
}

/// Heap entry ordered so that the smallest distance pops first. Distances are
/// finite non-NaN by construction, so the total order is sound.
#[derive(Copy, Clone)]
struct MinEntry {
    dist: f64,
    node: usize,
}

impl PartialEq for MinEntry {
    fn eq(&self, other: &Self) -> bool {
        self.dist == other.dist && self.node == other.node
    }
}
impl Eq for MinEntry {}
impl PartialOrd for MinEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for MinEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed on distance for a min-heap; node index breaks ties.
        other
            .dist
            .partial_cmp(&self.dist)
            .expect("no NaN distances")
            .then_with(|| other.node.cmp(&self.node))
    }
}
