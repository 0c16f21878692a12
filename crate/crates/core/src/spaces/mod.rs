//! Finite metric spaces: construction, validation, and transforms.
//!
//! A [`FiniteMetricSpace`] stores the full `n x n` distance matrix. Every
//! construction path — shortest-path metrics, generators, snowflakes,
//! rescalings, JSON loads — funnels through [`FiniteMetricSpace::from_matrix`],
//! which asserts the metric axioms (zero diagonal, positivity, symmetry, and
//! the triangle inequality within an absolute `1e-9` tolerance that absorbs
//! Dijkstra's floating-point noise).

mod doubling;
mod generators;
mod graph;

pub use doubling::{doubling_constant, DoublingEstimate};
pub use generators::{generate, generate_with_cap, SpaceKind, DEFAULT_MAX_POINTS};
pub use graph::WeightedGraph;

use crate::{Error, Result, CHECK_TOL};
use serde::{Deserialize, Serialize};

/// Largest diameter accepted; keeps absolute tolerances meaningful.
pub const MAX_DIAMETER: f64 = 1e6;

/// An immutable finite metric space with a dense distance matrix.
#[derive(Clone, Debug)]
pub struct FiniteMetricSpace {
    n: usize,
    dist: Vec<f64>, // row-major n x n, exactly symmetric after canonicalization
    labels: Option<Vec<String>>,
    provenance: String,
}

#[derive(Serialize, Deserialize)]
struct SpaceFile {
    n: usize,
    provenance: String,
    dist: Vec<f64>,
}

impl FiniteMetricSpace {
    /// Validates and canonicalizes a distance matrix (row-major, length `n*n`).
    ///
    /// Mirror entries may disagree by up to [`CHECK_TOL`] (e.g. two Dijkstra
    /// runs); the upper-triangle value is then copied to both slots so the
    /// stored matrix is exactly symmetric. Axiom violations beyond the
    /// tolerance are errors, as is a diameter above [`MAX_DIAMETER`].
    pub fn from_matrix(
        n: usize,
        mut dist: Vec<f64>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidMetric(
                "a metric space needs at least one point".into(),
            ));
        }
        if dist.len() != n * n {
            return Err(Error::InvalidMetric(format!(
                "matrix length {} does not match n = {n}",
                dist.len()
            )));
        }
        for (k, &d) in dist.iter().enumerate() {
            if !d.is_finite() || d < 0.0 {
                return Err(Error::InvalidMetric(format!(
                    "entry ({}, {}) is {d}, expected finite and nonnegative",
                    k / n,
                    k % n
                )));
            }
        }
        for i in 0..n {
            if dist[i * n + i] != 0.0 {
                if dist[i * n + i].abs() > CHECK_TOL {
                    return Err(Error::InvalidMetric(format!(
                        "diagonal entry ({i}, {i}) is {}",
                        dist[i * n + i]
                    )));
                }
                dist[i * n + i] = 0.0;
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let a = dist[i * n + j];
                let b = dist[j * n + i];
                if (a - b).abs() > CHECK_TOL {
                    return Err(Error::InvalidMetric(format!(
                        "asymmetry at ({i}, {j}): {a} vs {b}"
                    )));
                }
                dist[j * n + i] = a;
                if a <= 0.0 {
                    return Err(Error::InvalidMetric(format!(
                        "distinct points {i}, {j} at distance {a}"
                    )));
                }
            }
        }
        // Triangle inequality, O(n^3) over the canonical matrix.
        for k in 0..n {
            let row_k = &dist[k * n..(k + 1) * n];
            for i in 0..n {
                let dik = dist[i * n + k];
                let row_i = &dist[i * n..(i + 1) * n];
                for j in 0..n {
                    if row_i[j] > dik + row_k[j] + CHECK_TOL {
                        return Err(Error::InvalidMetric(format!(
                            "triangle violation: d({i},{j}) = {} > d({i},{k}) + d({k},{j}) = {}",
                            row_i[j],
                            dik + row_k[j]
                        )));
                    }
                }
            }
        }
        let space = FiniteMetricSpace {
            n,
            dist,
            labels: None,
            provenance: provenance.into(),
        };
        if space.diameter() > MAX_DIAMETER {
            return Err(Error::InvalidMetric(format!(
                "diameter {} exceeds the {MAX_DIAMETER:e} limit",
                space.diameter()
            )));
        }
        Ok(space)
    }

    /// Euclidean metric on a point cloud (all points must share a dimension).
    pub fn from_points(points: &[Vec<f64>], provenance: impl Into<String>) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(Error::InvalidMetric("empty point cloud".into()));
        }
        let dim = points[0].len();
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::InvalidParameter(
                "points have mixed dimensions".into(),
            ));
        }
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = points[i]
                    .iter()
                    .zip(&points[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }
        FiniteMetricSpace::from_matrix(n, dist, provenance)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::InvalidParameter(format!(
                "{} labels for {} points",
                labels.len(),
                self.n
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    pub fn dist_row(&self, i: usize) -> &[f64] {
        &self.dist[i * self.n..(i + 1) * self.n]
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().cloned().fold(0.0, f64::max)
    }

    /// Smallest positive distance; `None` on a single point.
    pub fn min_positive_distance(&self) -> Option<f64> {
        let mut best = f64::INFINITY;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                best = best.min(self.d(i, j));
            }
        }
        best.is_finite().then_some(best)
    }

    /// Indices within distance `r` of `x` (closed ball, row scan).
    pub fn ball(&self, x: usize, r: f64) -> Vec<usize> {
        self.dist_row(x)
            .iter()
            .enumerate()
            .filter(|&(_, &d)| d <= r)
            .map(|(j, _)| j)
            .collect()
    }

    /// All unordered pairs `(i, j)` with `i < j`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> {
        let n = self.n;
        (0..n).flat_map(move |i| ((i + 1)..n).map(move |j| (i, j)))
    }

    /// The snowflake transform `d -> d^(1-eps)`, `eps` in `(0, 1)`.
    ///
    /// A concave power of a metric is again a metric, which `from_matrix`
    /// re-asserts on the transformed entries.
    pub fn snowflake(&self, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "snowflake exponent eps = {eps} outside (0, 1)"
            )));
        }
        let dist = self.dist.iter().map(|&d| d.powf(1.0 - eps)).collect();
        FiniteMetricSpace::from_matrix(
            self.n,
            dist,
            format!("snowflake(eps={eps}) of {}", self.provenance),
        )
    }

    /// Uniform rescaling of all distances by `c > 0`.
    pub fn scale(&self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "scale factor {c} must be positive"
            )));
        }
        let dist = self.dist.iter().map(|&d| c * d).collect();
        FiniteMetricSpace::from_matrix(self.n, dist, format!("scale({c}) of {}", self.provenance))
    }

    /// JSON with fields `{n, provenance, dist}` (row-major matrix).
    pub fn to_json(&self) -> String {
        serde_json::to_string(&SpaceFile {
            n: self.n,
            provenance: self.provenance.clone(),
            dist: self.dist.clone(),
        })
        .expect("plain data serializes")
    }

    /// Parses and fully re-validates the `to_json` format.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: SpaceFile = serde_json::from_str(text)?;
        FiniteMetricSpace::from_matrix(file.n, file.dist, file.provenance)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> FiniteMetricSpace {
        let g = WeightedGraph::new(4, vec![(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)])
            .unwrap();
        g.shortest_path_metric("c4").unwrap()
    }

    #[test]
    fn rejects_axiom_violations() {
        // Asymmetry.
        let bad = vec![0.0, 1.0, 2.0, 0.0];
        assert!(FiniteMetricSpace::from_matrix(2, bad, "bad").is_err());
        // Zero distance between distinct points.
        let bad = vec![0.0, 0.0, 0.0, 0.0];
        assert!(FiniteMetricSpace::from_matrix(2, bad, "bad").is_err());
        // Triangle violation: d(0,2) = 5 > 1 + 1.
        let bad = vec![0.0, 1.0, 5.0, 1.0, 0.0, 1.0, 5.0, 1.0, 0.0];
        assert!(FiniteMetricSpace::from_matrix(3, bad, "bad").is_err());
        // Nonzero diagonal.
        let bad = vec![0.5, 1.0, 1.0, 0.0];
        assert!(FiniteMetricSpace::from_matrix(2, bad, "bad").is_err());
        // Oversized diameter.
        let bad = vec![0.0, 2e6, 2e6, 0.0];
        assert!(FiniteMetricSpace::from_matrix(2, bad, "bad").is_err());
    }

    #[test]
    fn tolerates_fp_asymmetry_and_canonicalizes() {
        let eps = 1e-12;
        let m = FiniteMetricSpace::from_matrix(2, vec![0.0, 1.0, 1.0 + eps, 0.0], "fp").unwrap();
        assert_eq!(m.d(0, 1), m.d(1, 0));
    }

    #[test]
    fn snowflake_three_point_path() {
        // Path with d = (1, 1, 2); eps = 1/2 gives (1, 1, sqrt 2).
        let g = WeightedGraph::new(3, vec![(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let m = g.shortest_path_metric("path3").unwrap();
        let s = m.snowflake(0.5).unwrap();
        assert_eq!(s.d(0, 1), 1.0);
        assert!((s.d(0, 2) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn snowflake_rejects_bad_eps() {
        let m = unit_square();
        assert!(m.snowflake(0.0).is_err());
        assert!(m.snowflake(1.0).is_err());
        assert!(m.snowflake(-0.5).is_err());
        let once = m.snowflake(0.25).unwrap();
        assert!(once.snowflake(0.0).is_err());
    }

    #[test]
    fn snowflake_preserves_extreme_pairs() {
        let g = WeightedGraph::new(4, vec![(0, 1, 1.0), (1, 2, 2.0), (2, 3, 4.0)]).unwrap();
        let m = g.shortest_path_metric("path-weights").unwrap();
        let s = m.snowflake(0.3).unwrap();
        let argmax = |sp: &FiniteMetricSpace| {
            sp.pairs()
                .max_by(|&(a, b), &(c, d)| sp.d(a, b).partial_cmp(&sp.d(c, d)).unwrap())
                .unwrap()
        };
        let argmin = |sp: &FiniteMetricSpace| {
            sp.pairs()
                .min_by(|&(a, b), &(c, d)| sp.d(a, b).partial_cmp(&sp.d(c, d)).unwrap())
                .unwrap()
        };
        assert_eq!(argmax(&m), argmax(&s));
        assert_eq!(argmin(&m), argmin(&s));
    }

    #[test]
    fn scale_and_diameter() {
        let m = unit_square();
        assert_eq!(m.diameter(), 2.0);
        assert_eq!(m.min_positive_distance(), Some(1.0));
        let s = m.scale(3.0).unwrap();
        assert_eq!(s.diameter(), 6.0);
        assert!(m.scale(0.0).is_err());
    }

    #[test]
    fn ball_row_scan() {
        let m = unit_square();
        assert_eq!(m.ball(0, 0.0), vec![0]);
        assert_eq!(m.ball(0, 1.0), vec![0, 1, 3]);
        assert_eq!(m.ball(0, 2.0), vec![0, 1, 2, 3]);
    }

    #[test]
    fn json_round_trip() {
        let m = unit_square();
        let text = m.to_json();
        let back = FiniteMetricSpace::from_json(&text).unwrap();
        assert_eq!(back.n(), m.n());
        assert_eq!(back.provenance(), m.provenance());
        for (i, j) in m.pairs() {
            assert_eq!(m.d(i, j), back.d(i, j));
        }
    }

    #[test]
    fn from_points_is_euclidean() {
        let pts = vec![vec![0.0, 0.0], vec![3.0, 4.0], vec![0.0, 4.0]];
        let m = FiniteMetricSpace::from_points(&pts, "pts").unwrap();
        assert_eq!(m.d(0, 1), 5.0);
        assert_eq!(m.d(0, 2), 4.0);
        assert_eq!(m.d(1, 2), 3.0);
    }
}
