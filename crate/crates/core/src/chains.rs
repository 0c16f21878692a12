//! Stationary reversible Markov chains on finite state spaces, displacement
//! moments, Markov-type ratios, and the hypercube-based Enflo-type checker.
//!
//! A chain is stored as sparse row distributions plus its stationary law π.
//! Reversibility (detailed balance `π_i P_ij = π_j P_ji`) is validated to
//! `1e-12` at construction; when π is not supplied it is derived from the
//! balance ratios along a spanning tree of the support graph, which also
//! establishes irreducibility.
//!
//! The central quantity is the displacement moment
//! `E d(f(Z_0), f(Z_t))^p` under the stationary chain, computed either
//! exactly (t sparse matrix–vector products per source state) or by Monte
//! Carlo, and normalized into `ratio(t) = E d^p(t) / (t · E d^p(1))` — a
//! lower-bound witness for the Markov-type constant of the target space.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::seeding::rng_for;
use crate::spaces::FiniteMetricSpace;
use crate::{pow_p, Error, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Tolerance for stochasticity and detailed-balance checks.
pub const CHAIN_TOL: f64 = 1e-12;

/// Default state-count cap for exact (matrix-power) computations.
pub const DEFAULT_EXACT_CAP: usize = 2048;

#[derive(Clone, Debug)]
pub struct ReversibleChain {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>, // sorted by target state, positive entries only
    pi: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ChainFile {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl ReversibleChain {
    /// Validates a sparse transition matrix and optional stationary law.
    ///
    /// With `pi = None` the stationary law is derived from detailed balance:
    /// fixing `π_0`, each support edge forces `π_j = π_i P_ij / P_ji`. The
    /// support must therefore be symmetric and connected (irreducible
    /// reversible chain); the derived law is then normalized and the balance
    /// residuals checked on every pair.
    pub fn from_parts(
        n: usize,
        rows: Vec<Vec<(usize, f64)>>,
        pi: Option<Vec<f64>>,
    ) -> Result<Self> {
        if n == 0 || rows.len() != n {
            return Err(Error::InvalidChain(format!(
                "{} rows for {n} states",
                rows.len()
            )));
        }
        let mut clean: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
        for (i, row) in rows.into_iter().enumerate() {
            let mut r: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            let mut sum = 0.0;
            for (j, p) in row {
                if j >= n {
                    return Err(Error::InvalidChain(format!("row {i} targets state {j}")));
                }
                if !p.is_finite() || p < 0.0 {
                    return Err(Error::InvalidChain(format!("P[{i},{j}] = {p}")));
                }
                if p > 0.0 {
                    r.push((j, p));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > CHAIN_TOL {
                return Err(Error::InvalidChain(format!("row {i} sums to {sum}")));
            }
            r.sort_by_key(|&(j, _)| j);
            if r.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::InvalidChain(format!(
                    "row {i} has duplicate targets"
                )));
            }
            clean.push(r);
        }
        // Support symmetry: P_ij > 0 iff P_ji > 0 is necessary for detailed
        // balance with a positive stationary law.
        let lookup = |rows: &Vec<Vec<(usize, f64)>>, i: usize, j: usize| -> f64 {
            rows[i]
                .binary_search_by_key(&j, |&(k, _)| k)
                .map(|idx| rows[i][idx].1)
                .unwrap_or(0.0)
        };
        for i in 0..n {
            for &(j, _) in &clean[i] {
                if lookup(&clean, j, i) == 0.0 {
                    return Err(Error::InvalidChain(format!(
                        "support not symmetric: P[{i},{j}] > 0 but P[{j},{i}] = 0"
                    )));
                }
            }
        }
        let pi = match pi {
            Some(pi) => {
                if pi.len() != n || pi.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
                    return Err(Error::InvalidChain(
                        "stationary law must be positive".into(),
                    ));
                }
                let total: f64 = pi.iter().sum();
                if (total - 1.0).abs() > CHAIN_TOL {
                    return Err(Error::InvalidChain(format!(
                        "stationary law sums to {total}"
                    )));
                }
                pi
            }
            None => {
                // Spanning-tree propagation of balance ratios from state 0.
                let mut pi = vec![0.0f64; n];
                pi[0] = 1.0;
                let mut stack = vec![0usize];
                let mut seen = vec![false; n];
                seen[0] = true;
                while let Some(i) = stack.pop() {
                    for &(j, pij) in &clean[i] {
                        if !seen[j] {
                            seen[j] = true;
                            pi[j] = pi[i] * pij / lookup(&clean, j, i);
                            stack.push(j);
                        }
                    }
                }
                if let Some(orphan) = seen.iter().position(|&s| !s) {
                    return Err(Error::InvalidChain(format!(
                        "not irreducible: state {orphan} unreachable from 0"
                    )));
                }
                let total: f64 = pi.iter().sum();
                pi.iter_mut().for_each(|x| *x /= total);
                pi
            }
        };
        for i in 0..n {
            for &(j, pij) in &clean[i] {
                let residual = pi[i] * pij - pi[j] * lookup(&clean, j, i);
                if residual.abs() > CHAIN_TOL {
                    return Err(Error::InvalidChain(format!(
                        "detailed balance fails at ({i},{j}): residual {residual:e}"
                    )));
                }
            }
        }
        Ok(ReversibleChain { n, rows: clean, pi })
    }

    /// Lazy weighted random walk: `P_ij = (1-l)·w_ij/deg_i` off-diagonal and
    /// `P_ii = l`, with `π_i ∝ deg_i` (independent of laziness).
    pub fn random_walk(graph: &crate::spaces::WeightedGraph, laziness: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&laziness) {
            return Err(Error::InvalidParameter(format!(
                "laziness {laziness} outside [0, 1)"
            )));
        }
        let n = graph.n();
        if n == 1 {
            return Err(Error::InvalidChain(
                "random walk needs at least one edge".into(),
            ));
        }
        let mut weight = vec![vec![]; n];
        for u in 0..n {
            // Merge parallel edges into a single conductance.
            let mut merged: std::collections::BTreeMap<usize, f64> = Default::default();
            for &(v, w) in graph.neighbors(u) {
                *merged.entry(v).or_insert(0.0) += w;
            }
            weight[u] = merged.into_iter().collect::<Vec<(usize, f64)>>();
        }
        let deg: Vec<f64> = (0..n)
            .map(|u| weight[u].iter().map(|&(_, w)| w).sum())
            .collect();
        let total: f64 = deg.iter().sum();
        let mut rows = Vec::with_capacity(n);
        for u in 0..n {
            let mut row: Vec<(usize, f64)> = weight[u]
                .iter()
                .map(|&(v, w)| (v, (1.0 - laziness) * w / deg[u]))
                .collect();
            if laziness > 0.0 {
                row.push((u, laziness));
            }
            rows.push(row);
        }
        let pi = deg.iter().map(|&d| d / total).collect();
        ReversibleChain::from_parts(n, rows, Some(pi))
    }

    /// Lazy uniform walk on the nearest-neighbor graph of a metric space.
    ///
    /// Two points are adjacent when their distance equals the smallest
    /// positive distance of the space, so on unit-edge graph metrics this is
    /// the ordinary lazy graph walk. `π_i ∝ deg_i`. Errors if some point has
    /// no nearest neighbor at that common distance (the neighbor graph would
    /// be disconnected).
    pub fn uniform_neighbor_walk(
        space: &crate::spaces::FiniteMetricSpace,
        laziness: f64,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&laziness) {
            return Err(Error::InvalidParameter(format!(
                "laziness {laziness} outside [0, 1)"
            )));
        }
        let step = space
            .min_positive_distance()
            .ok_or_else(|| Error::InvalidChain("walk needs at least two distinct points".into()))?;
        let n = space.n();
        let mut rows = Vec::with_capacity(n);
        let mut deg = Vec::with_capacity(n);
        for i in 0..n {
            let nbrs: Vec<usize> = (0..n)
                .filter(|&j| j != i && (space.d(i, j) - step).abs() <= 1e-12 * step)
                .collect();
            if nbrs.is_empty() {
                return Err(Error::InvalidChain(format!(
                    "point {i} has no neighbor at distance {step}"
                )));
            }
            let mut row: Vec<(usize, f64)> = nbrs
                .iter()
                .map(|&j| (j, (1.0 - laziness) / nbrs.len() as f64))
                .collect();
            if laziness > 0.0 {
                row.push((i, laziness));
                row.sort_by_key(|&(j, _)| j);
            }
            deg.push(nbrs.len() as f64);
            rows.push(row);
        }
        let total: f64 = deg.iter().sum();
        let pi = deg.iter().map(|&d| d / total).collect();
        ReversibleChain::from_parts(n, rows, Some(pi))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    /// `P_ij` by binary search (0 off the support).
    pub fn prob(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .binary_search_by_key(&j, |&(k, _)| k)
            .map(|idx| self.rows[i][idx].1)
            .unwrap_or(0.0)
    }

    /// The time-reversed kernel `π_j P_ji / π_i`. For a valid chain this
    /// equals `P` up to the balance tolerance; it is exposed for sanity
    /// checks rather than as a distinct dynamic, and is built directly (the
    /// source chain was already validated).
    pub fn reversed(&self) -> ReversibleChain {
        let mut rows = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let mut row: Vec<(usize, f64)> = self.rows[i]
                .iter()
                .map(|&(j, _)| (j, self.pi[j] * self.prob(j, i) / self.pi[i]))
                .collect();
            // Renormalize away the fp drift of the ratio products.
            let sum: f64 = row.iter().map(|&(_, p)| p).sum();
            row.iter_mut().for_each(|e| e.1 /= sum);
            rows.push(row);
        }
        ReversibleChain {
            n: self.n,
            rows,
            pi: self.pi.clone(),
        }
    }

    /// One step by inverse CDF over the sparse row, in state order.
    pub fn step(&self, state: usize, rng: &mut ChaCha8Rng) -> usize {
        let x: f64 = rng.gen();
        let mut acc = 0.0;
        for &(j, p) in &self.rows[state] {
            acc += p;
            if x < acc {
                return j;
            }
        }
        self.rows[state].last().expect("rows are non-empty").0
    }

    /// A stationary start state by inverse CDF over π, in state order.
    pub fn sample_stationary(&self, rng: &mut ChaCha8Rng) -> usize {
        let x: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, &p) in self.pi.iter().enumerate() {
            acc += p;
            if x < acc {
                return i;
            }
        }
        self.n - 1
    }

    /// A stationary trajectory `Z_0, ..., Z_t`.
    pub fn trajectory(&self, t: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let mut path = Vec::with_capacity(t + 1);
        let mut z = self.sample_stationary(rng);
        path.push(z);
        for _ in 0..t {
            z = self.step(z, rng);
            path.push(z);
        }
        path
    }

    /// JSON `{n, rows: [[[j, p], ...], ...]}`, fully re-validated on load.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&ChainFile {
            n: self.n,
            rows: self.rows.clone(),
        })
        .expect("plain data serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ChainFile = serde_json::from_str(text)?;
        ReversibleChain::from_parts(file.n, file.rows, None)
    }
}

fn check_point_map(chain: &ReversibleChain, space: &FiniteMetricSpace, f: &[usize]) -> Result<()> {
    if f.len() != chain.n() {
        return Err(Error::InvalidParameter(format!(
            "point map covers {} states, chain has {}",
            f.len(),
            chain.n()
        )));
    }
    if let Some(&bad) = f.iter().find(|&&x| x >= space.n()) {
        return Err(Error::InvalidParameter(format!(
            "point map hits {bad}, space has {} points",
            space.n()
        )));
    }
    Ok(())
}

/// `Σ_i π_i Σ_j (P^t)_ij d(f(i), f(j))^p`, exact.
///
/// Each source row is evolved by `t` sparse matrix–vector products; the cap
/// bounds the `O(n · t · nnz)` cost.
pub fn displacement_moment_exact(
    chain: &ReversibleChain,
    space: &FiniteMetricSpace,
    f: &[usize],
    p: f64,
    t: usize,
) -> Result<f64> {
    displacement_moment_exact_capped(chain, space, f, p, t, DEFAULT_EXACT_CAP)
}

pub fn displacement_moment_exact_capped(
    chain: &ReversibleChain,
    space: &FiniteMetricSpace,
    f: &[usize],
    p: f64,
    t: usize,
    cap: usize,
) -> Result<f64> {
    check_point_map(chain, space, f)?;
    if chain.n() > cap {
        return Err(Error::SizeCap(format!(
            "{} states exceed the exact cap {cap}; use the Monte Carlo method",
            chain.n()
        )));
    }
    let per_source: Vec<f64> = (0..chain.n())
        .into_par_iter()
        .map(|i| {
            let dist = evolve_row(chain, i, t);
            let contrib: f64 = dist
                .iter()
                .enumerate()
                .map(|(j, &w)| w * pow_p(space.d(f[i], f[j]), p))
                .sum();
            chain.pi()[i] * contrib
        })
        .collect();
    Ok(per_source.iter().sum())
}

/// Row `i` of `P^t` via t successive sparse products.
fn evolve_row(chain: &ReversibleChain, i: usize, t: usize) -> Vec<f64> {
    let n = chain.n();
    let mut v = vec![0.0f64; n];
    v[i] = 1.0;
    let mut next = vec![0.0f64; n];
    for _ in 0..t {
        next.iter_mut().for_each(|x| *x = 0.0);
        for (s, &w) in v.iter().enumerate() {
            if w != 0.0 {
                for &(j, pij) in chain.row(s) {
                    next[j] += w * pij;
                }
            }
        }
        std::mem::swap(&mut v, &mut next);
    }
    v
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RatioMethod {
    Exact,
    MonteCarlo { trials: usize },
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RatioEntry {
    pub t: usize,
    pub ratio: f64,
    pub stderr: f64,
}

/// Markov-type ratio table: `ratio(t) = E d^p(t) / (t · E d^p(1))`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TypeRatioReport {
    pub p: f64,
    pub method: String,
    pub entries: Vec<RatioEntry>,
    /// Max over the table; an `M_p^p` lower-bound witness for this chain/map.
    pub max_ratio: f64,
}

impl TypeRatioReport {
    /// CSV rows `t,ratio,stderr,method` (no header).
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{}\n",
                e.t, e.ratio, e.stderr, self.method
            ));
        }
        out
    }
}

/// Computes the ratio table over `t_list` (each `t ≥ 1`).
///
/// The one-step denominator is always exact (it is a single sparse pass);
/// a zero denominator means `f` is constant on the chain's support and is
/// rejected. Monte Carlo runs `trials` stationary trajectories to the
/// largest requested `t`, reading off all requested horizons from the same
/// paths; `stderr` is the sample standard error of the numerator divided by
/// `t · E d^p(1)`, and 0 for the exact method.
pub fn markov_type_ratio(
    chain: &ReversibleChain,
    space: &FiniteMetricSpace,
    f: &[usize],
    p: f64,
    t_list: &[usize],
    method: RatioMethod,
    seed: u64,
) -> Result<TypeRatioReport> {
    check_point_map(chain, space, f)?;
    if t_list.is_empty() {
        return Err(Error::InvalidParameter("empty t list".into()));
    }
    if t_list.contains(&0) {
        return Err(Error::InvalidParameter("ratio undefined at t = 0".into()));
    }
    let denom = one_step_moment(chain, space, f, p);
    if denom <= 0.0 {
        return Err(Error::Degenerate(
            "f is constant on the chain support".into(),
        ));
    }
    let entries = match method {
        RatioMethod::Exact => {
            let max_t = *t_list.iter().max().expect("non-empty");
            // Evolve each source over the full horizon once, recording the
            // displacement moment at every requested t.
            let idx_of: std::collections::BTreeMap<usize, usize> =
                t_list.iter().enumerate().map(|(k, &t)| (t, k)).collect();
            let partials: Vec<Vec<f64>> = (0..chain.n())
                .into_par_iter()
                .map(|i| {
                    let n = chain.n();
                    let mut v = vec![0.0f64; n];
                    v[i] = 1.0;
                    let mut next = vec![0.0f64; n];
                    let mut acc = vec![0.0f64; t_list.len()];
                    for t in 1..=max_t {
                        next.iter_mut().for_each(|x| *x = 0.0);
                        for (s, &w) in v.iter().enumerate() {
                            if w != 0.0 {
                                for &(j, pij) in chain.row(s) {
                                    next[j] += w * pij;
                                }
                            }
                        }
                        std::mem::swap(&mut v, &mut next);
                        if let Some(&k) = idx_of.get(&t) {
                            acc[k] = chain.pi()[i]
                                * v.iter()
                                    .enumerate()
                                    .map(|(j, &w)| w * pow_p(space.d(f[i], f[j]), p))
                                    .sum::<f64>();
                        }
                    }
                    acc
                })
                .collect();
            let mut moments = vec![0.0f64; t_list.len()];
            for acc in &partials {
                for (m, &a) in moments.iter_mut().zip(acc) {
                    *m += a;
                }
            }
            t_list
                .iter()
                .zip(moments)
                .map(|(&t, m)| RatioEntry {
                    t,
                    ratio: m / (t as f64 * denom),
                    stderr: 0.0,
                })
                .collect::<Vec<_>>()
        }
        RatioMethod::MonteCarlo { trials } => {
            if trials == 0 {
                return Err(Error::InvalidParameter(
                    "Monte Carlo needs trials >= 1".into(),
                ));
            }
            let max_t = *t_list.iter().max().expect("non-empty");
            let samples: Vec<Vec<f64>> = (0..trials)
                .into_par_iter()
                .map(|trial| {
                    let mut rng = rng_for(seed, "mc-trial", trial as u64);
                    let path = chain.trajectory(max_t, &mut rng);
                    t_list
                        .iter()
                        .map(|&t| pow_p(space.d(f[path[0]], f[path[t]]), p))
                        .collect()
                })
                .collect();
            t_list
                .iter()
                .enumerate()
                .map(|(k, &t)| {
                    let xs: Vec<f64> = samples.iter().map(|s| s[k]).collect();
                    let mean = xs.iter().sum::<f64>() / trials as f64;
                    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>()
                        / (trials.max(2) - 1) as f64;
                    let se = (var / trials as f64).sqrt();
                    RatioEntry {
                        t,
                        ratio: mean / (t as f64 * denom),
                        stderr: se / (t as f64 * denom),
                    }
                })
                .collect()
        }
    };
    let max_ratio = entries.iter().map(|e| e.ratio).fold(0.0, f64::max);
    Ok(TypeRatioReport {
        p,
        method: match method {
            RatioMethod::Exact => "exact".into(),
            RatioMethod::MonteCarlo { trials } => format!("montecarlo({trials})"),
        },
        entries,
        max_ratio,
    })
}

/// `E d(f(Z_0), f(Z_1))^p = Σ_i π_i Σ_j P_ij d(f(i), f(j))^p`.
pub fn one_step_moment(
    chain: &ReversibleChain,
    space: &FiniteMetricSpace,
    f: &[usize],
    p: f64,
) -> f64 {
    (0..chain.n())
        .map(|i| {
            chain.pi()[i]
                * chain
                    .row(i)
                    .iter()
                    .map(|&(j, pij)| pij * pow_p(space.d(f[i], f[j]), p))
                    .sum::<f64>()
        })
        .sum()
}

/// Enflo-type ratio of a map from the Hamming cube into a space:
/// (sum of `d^p` over ordered antipodal pairs) / (sum over ordered edges).
///
/// `f` must enumerate all `2^b` cube vertices (index = bitmask), `b ≤ 14`.
/// The `p`-th root of the ratio lower-bounds the Enflo-type-`p` constant.
pub fn enflo_ratio(space: &FiniteMetricSpace, f: &[usize], p: f64) -> Result<f64> {
    let size = f.len();
    if size < 2 || !size.is_power_of_two() {
        return Err(Error::InvalidParameter(format!(
            "map domain has {size} points; expected a hypercube 2^b"
        )));
    }
    let bits = size.trailing_zeros();
    if bits > 14 {
        return Err(Error::InvalidParameter(format!(
            "hypercube({bits}) exceeds the b = 14 cap"
        )));
    }
    if let Some(&bad) = f.iter().find(|&&x| x >= space.n()) {
        return Err(Error::InvalidParameter(format!(
            "point map hits {bad}, space has {} points",
            space.n()
        )));
    }
    let full = size - 1;
    let mut diagonal = 0.0f64;
    let mut edges = 0.0f64;
    for x in 0..size {
        diagonal += pow_p(space.d(f[x], f[x ^ full]), p);
        for b in 0..bits {
            edges += pow_p(space.d(f[x], f[x ^ (1 << b)]), p);
        }
    }
    if edges == 0.0 {
        return Err(Error::Degenerate(
            "map is constant on all hypercube edges".into(),
        ));
    }
    Ok(diagonal / edges)
}
