//! Generator families: hypercubes, grids, cycles, diamond and Laakso graphs,
//! and uniform random trees. All are realized as weighted graphs whose
//! shortest-path metric becomes the space, so a single validated code path
//! produces every family.

use std::str::FromStr;

use super::{FiniteMetricSpace, WeightedGraph};
use crate::seeding::rng_for;
use crate::{Error, Result};
use rand::Rng;

/// Default cap on the point count of generated spaces; the recursive families
/// grow geometrically (4^k, 6^k) and this guards against accidental blowups.
pub const DEFAULT_MAX_POINTS: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpaceKind {
    /// `{0,1}^bits` with unit edges between Hamming neighbors.
    Hypercube { bits: u32 },
    /// `w x h` 4-neighbor grid with unit edges.
    Grid { w: usize, h: usize },
    /// Cycle on `n >= 3` vertices, unit edges.
    Cycle { n: usize },
    /// Diamond graph: level-`k` edge substitution, edge length `2^-k`.
    Diamond { level: u32 },
    /// Laakso graph: level-`k` gadget substitution, edge length `4^-k`.
    Laakso { level: u32 },
    /// Uniform random labelled tree on `n` vertices, unit edges.
    RandomTree { n: usize },
}

impl FromStr for SpaceKind {
    type Err = Error;

    /// Accepts `hypercube:4`, `grid:8,8`, `cycle:16`, `diamond:2`,
    /// `laakso:2`, and `tree:64` (alias `random_tree:64`).
    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: String| Error::InvalidParameter(msg);
        let (name, args) = s
            .split_once(':')
            .ok_or_else(|| bad(format!("space spec {s:?} missing `kind:params`")))?;
        let ints: Vec<u64> = args
            .split(',')
            .map(|a| {
                a.trim()
                    .parse::<u64>()
                    .map_err(|_| bad(format!("space spec {s:?}: bad integer {a:?}")))
            })
            .collect::<Result<_>>()?;
        let one = || -> Result<u64> {
            if ints.len() == 1 {
                Ok(ints[0])
            } else {
                Err(bad(format!("space spec {s:?}: expected one parameter")))
            }
        };
        match name {
            "hypercube" => Ok(SpaceKind::Hypercube {
                bits: one()? as u32,
            }),
            "grid" => {
                if ints.len() != 2 {
                    return Err(bad(format!("space spec {s:?}: grid needs w,h")));
                }
                Ok(SpaceKind::Grid {
                    w: ints[0] as usize,
                    h: ints[1] as usize,
                })
            }
            "cycle" => Ok(SpaceKind::Cycle { n: one()? as usize }),
            "diamond" => Ok(SpaceKind::Diamond {
                level: one()? as u32,
            }),
            "laakso" => Ok(SpaceKind::Laakso {
                level: one()? as u32,
            }),
            "tree" | "random_tree" => Ok(SpaceKind::RandomTree { n: one()? as usize }),
            other => Err(bad(format!("unknown space kind {other:?}"))),
        }
    }
}

/// Generates a space with the default size cap. The seed only matters for
/// `RandomTree`; deterministic families ignore it.
pub fn generate(kind: SpaceKind, seed: u64) -> Result<FiniteMetricSpace> {
    generate_with_cap(kind, seed, DEFAULT_MAX_POINTS)
}

pub fn generate_with_cap(kind: SpaceKind, seed: u64, cap: usize) -> Result<FiniteMetricSpace> {
    let check = |n: usize, what: String| -> Result<usize> {
        if n > cap {
            Err(Error::SizeCap(format!(
                "{what} has {n} points, cap is {cap}"
            )))
        } else {
            Ok(n)
        }
    };
    match kind {
        SpaceKind::Hypercube { bits } => {
            if bits == 0 || bits >= usize::BITS {
                return Err(Error::InvalidParameter(format!("hypercube bits = {bits}")));
            }
            let n = check(1usize << bits, format!("hypercube({bits})"))?;
            let mut edges = Vec::with_capacity(n * bits as usize / 2);
            for x in 0..n {
                for b in 0..bits {
                    let y = x ^ (1 << b);
                    if x < y {
                        edges.push((x, y, 1.0));
                    }
                }
            }
            WeightedGraph::new(n, edges)?.shortest_path_metric(format!("hypercube({bits})"))
        }
        SpaceKind::Grid { w, h } => {
            if w == 0 || h == 0 {
                return Err(Error::InvalidParameter(format!("grid({w},{h})")));
            }
            let n = check(w * h, format!("grid({w},{h})"))?;
            let mut edges = Vec::with_capacity(2 * n);
            let id = |x: usize, y: usize| y * w + x;
            for y in 0..h {
                for x in 0..w {
                    if x + 1 < w {
                        edges.push((id(x, y), id(x + 1, y), 1.0));
                    }
                    if y + 1 < h {
                        edges.push((id(x, y), id(x, y + 1), 1.0));
                    }
                }
            }
            WeightedGraph::new(n, edges)?.shortest_path_metric(format!("grid({w},{h})"))
        }
        SpaceKind::Cycle { n } => {
            if n < 3 {
                return Err(Error::InvalidParameter(format!("cycle({n}) needs n >= 3")));
            }
            check(n, format!("cycle({n})"))?;
            let edges = (0..n).map(|i| (i, (i + 1) % n, 1.0)).collect();
            WeightedGraph::new(n, edges)?.shortest_path_metric(format!("cycle({n})"))
        }
        SpaceKind::Diamond { level } => {
            let (n, edges) = substitute(level, cap, "diamond", |edges, next, out| {
                for &(u, v) in edges {
                    let a = next(2);
                    out.push((u, a));
                    out.push((a, v));
                    out.push((u, a + 1));
                    out.push((a + 1, v));
                }
            })?;
            let w = 0.5f64.powi(level as i32);
            let weighted = edges.into_iter().map(|(u, v)| (u, v, w)).collect();
            WeightedGraph::new(n, weighted)?.shortest_path_metric(format!("diamond({level})"))
        }
        SpaceKind::Laakso { level } => {
            let (n, edges) = substitute(level, cap, "laakso", |edges, next, out| {
                for &(u, v) in edges {
                    // 6-edge gadget: u - a, then parallel branches a - b1 - c
                    // and a - b2 - c, then c - v. Four new vertices per edge.
                    let a = next(4);
                    let (b1, b2, c) = (a + 1, a + 2, a + 3);
                    out.push((u, a));
                    out.push((a, b1));
                    out.push((a, b2));
                    out.push((b1, c));
                    out.push((b2, c));
                    out.push((c, v));
                }
            })?;
            let w = 0.25f64.powi(level as i32);
            let weighted = edges.into_iter().map(|(u, v)| (u, v, w)).collect();
            WeightedGraph::new(n, weighted)?.shortest_path_metric(format!("laakso({level})"))
        }
        SpaceKind::RandomTree { n } => {
            if n == 0 {
                return Err(Error::InvalidParameter("random_tree(0)".into()));
            }
            check(n, format!("random_tree({n})"))?;
            let provenance = format!("random_tree(n={n},seed={seed})");
            let edges = random_tree_edges(n, seed);
            WeightedGraph::new(n, edges)?.shortest_path_metric(provenance)
        }
    }
}

/// Runs `level` rounds of an edge-substitution scheme starting from a single
/// edge on two vertices. `gadget` receives the current edge list, a vertex
/// allocator, and the output edge list. The cap is enforced before each round
/// using the scheme's growth, so oversized levels fail fast.
fn substitute(
    level: u32,
    cap: usize,
    name: &str,
    gadget: impl Fn(&[(usize, usize)], &mut dyn FnMut(usize) -> usize, &mut Vec<(usize, usize)>),
) -> Result<(usize, Vec<(usize, usize)>)> {
    let mut n = 2usize;
    let mut edges = vec![(0usize, 1usize)];
    for round in 0..level {
        let mut out = Vec::new();
        let mut next_n = n;
        {
            let mut alloc = |k: usize| {
                let id = next_n;
                next_n += k;
                id
            };
            gadget(&edges, &mut alloc, &mut out);
        }
        if next_n > cap {
            return Err(Error::SizeCap(format!(
                "{name}({level}) reaches {next_n} points at round {}, cap is {cap}",
                round + 1
            )));
        }
        n = next_n;
        edges = out;
    }
    Ok((n, edges))
}

/// Uniform random labelled tree from a Pruefer sequence. The decode pairs the
/// smallest-labelled leaf with each sequence entry, which is deterministic
/// given the drawn sequence.
fn random_tree_edges(n: usize, seed: u64) -> Vec<(usize, usize, f64)> {
    if n == 1 {
        return Vec::new();
    }
    if n == 2 {
        return vec![(0, 1, 1.0)];
    }
    let mut rng = rng_for(seed, "random-tree", 0);
    let seq: Vec<usize> = (0..n - 2).map(|_| rng.gen_range(0..n)).collect();
    let mut degree = vec![1usize; n];
    for &s in &seq {
        degree[s] += 1;
    }
    let mut leaves: std::collections::BinaryHeap<std::cmp::Reverse<usize>> = (0..n)
        .filter(|&v| degree[v] == 1)
        .map(std::cmp::Reverse)
        .collect();
    let mut edges = Vec::with_capacity(n - 1);
    for &s in &seq {
        let std::cmp::Reverse(leaf) = leaves.pop().expect("a tree always has a leaf");
        edges.push((leaf, s, 1.0));
        degree[s] -= 1;
        if degree[s] == 1 {
            leaves.push(std::cmp::Reverse(s));
        }
    }
    let std::cmp::Reverse(a) = leaves.pop().expect("two leaves remain");
    let std::cmp::Reverse(b) = leaves.pop().expect("two leaves remain");
    edges.push((a, b, 1.0));
    edges
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hypercube_is_hamming() {
        let m = generate(SpaceKind::Hypercube { bits: 3 }, 0).unwrap();
        assert_eq!(m.n(), 8);
        assert_eq!(m.d(0b000, 0b111), 3.0);
        for x in 0..8usize {
            for y in 0..8usize {
                assert_eq!(m.d(x, y), (x ^ y).count_ones() as f64);
            }
        }
    }

    #[test]
    fn grid_corner_distance() {
        let m = generate(SpaceKind::Grid { w: 4, h: 4 }, 0).unwrap();
        assert_eq!(m.d(0, 15), 6.0);
        // L1 closed form on all pairs.
        for i in 0..16usize {
            for j in 0..16usize {
                let (xi, yi) = (i % 4, i / 4);
                let (xj, yj) = (j % 4, j / 4);
                let l1 = xi.abs_diff(xj) + yi.abs_diff(yj);
                assert_eq!(m.d(i, j), l1 as f64);
            }
        }
    }

    #[test]
    fn cycle_wraps() {
        let m = generate(SpaceKind::Cycle { n: 6 }, 0).unwrap();
        assert_eq!(m.d(0, 3), 3.0);
        assert_eq!(m.d(0, 5), 1.0);
        assert_eq!(m.diameter(), 3.0);
    }

    #[test]
    fn diamond_counts_and_distances() {
        let d1 = generate(SpaceKind::Diamond { level: 1 }, 0).unwrap();
        assert_eq!(d1.n(), 4);
        assert_eq!(d1.d(0, 1), 1.0); // source to sink through either branch
        let d2 = generate(SpaceKind::Diamond { level: 2 }, 0).unwrap();
        assert_eq!(d2.n(), 12);
        assert_eq!(d2.d(0, 1), 1.0);
        assert_eq!(d2.min_positive_distance(), Some(0.25));
    }

    #[test]
    fn laakso_counts_and_distances() {
        let l1 = generate(SpaceKind::Laakso { level: 1 }, 0).unwrap();
        assert_eq!(l1.n(), 6);
        assert_eq!(l1.d(0, 1), 1.0); // u -> a -> b -> c -> v, four quarter edges
        let l2 = generate(SpaceKind::Laakso { level: 2 }, 0).unwrap();
        assert_eq!(l2.n(), 30);
        assert_eq!(l2.d(0, 1), 1.0);
        assert_eq!(l2.min_positive_distance(), Some(0.0625));
    }

    #[test]
    fn random_tree_is_tree_metric() {
        for seed in 0..5 {
            let m = generate(SpaceKind::RandomTree { n: twenty(seed) }, seed).unwrap();
            // n-1 edges and connectivity are implied by construction; spot
            // check integer distances and determinism.
            let again = generate(SpaceKind::RandomTree { n: twenty(seed) }, seed).unwrap();
            for (i, j) in m.pairs() {
                assert_eq!(m.d(i, j), again.d(i, j));
                assert_eq!(m.d(i, j).fract(), 0.0);
            }
        }
        fn twenty(seed: u64) -> usize {
            16 + (seed as usize % 5)
        }
    }

    #[test]
    fn random_tree_degenerate_sizes() {
        assert_eq!(generate(SpaceKind::RandomTree { n: 1 }, 3).unwrap().n(), 1);
        let two = generate(SpaceKind::RandomTree { n: 2 }, 3).unwrap();
        assert_eq!(two.d(0, 1), 1.0);
    }

    #[test]
    fn size_caps_enforced() {
        assert!(matches!(
            generate(SpaceKind::Hypercube { bits: 13 }, 0),
            Err(Error::SizeCap(_))
        ));
        assert!(matches!(
            generate(SpaceKind::Diamond { level: 7 }, 0),
            Err(Error::SizeCap(_))
        ));
        assert!(matches!(
            generate(SpaceKind::Laakso { level: 5 }, 0),
            Err(Error::SizeCap(_))
        ));
        assert!(generate_with_cap(SpaceKind::Cycle { n: 10 }, 0, 8).is_err());
    }

    #[test]
    fn kind_parsing() {
        assert_eq!(
            "hypercube:4".parse::<SpaceKind>().unwrap(),
            SpaceKind::Hypercube { bits: 4 }
        );
        assert_eq!(
            "grid:8,8".parse::<SpaceKind>().unwrap(),
            SpaceKind::Grid { w: 8, h: 8 }
        );
        assert_eq!(
            "cycle:16".parse::<SpaceKind>().unwrap(),
            SpaceKind::Cycle { n: 16 }
        );
        assert_eq!(
            "diamond:2".parse::<SpaceKind>().unwrap(),
            SpaceKind::Diamond { level: 2 }
        );
        assert_eq!(
            "laakso:2".parse::<SpaceKind>().unwrap(),
            SpaceKind::Laakso { level: 2 }
        );
        assert_eq!(
            "tree:64".parse::<SpaceKind>().unwrap(),
            SpaceKind::RandomTree { n: 64 }
        );
        assert!("grid:8".parse::<SpaceKind>().is_err());
        assert!("blob:8".parse::<SpaceKind>().is_err());
        assert!("hypercube".parse::<SpaceKind>().is_err());
    }
}
