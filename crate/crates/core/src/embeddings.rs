//! Threshold embeddings built from random partitions, their audits, and
//! multi-scale snowflake maps.
//!
//! A single-scale map at threshold `τ` carves the space at `Δ = τ/2` and
//! emits, per coordinate, `σ_cluster · d(x, complement of x's cluster)` with
//! an independent fair sign bit per cluster, scaled by `1/√m` across the `m`
//! coordinates. Each coordinate is 1-Lipschitz by a two-case argument:
//!
//! * same cluster: the two distances-to-complement differ by at most `d(x,y)`
//!   (they are infima over the same set);
//! * different clusters: each point's complement contains the other point,
//!   so both coordinate values are at most `d(x,y)`.
//!
//! Hence the full map is 1-Lipschitz in the Euclidean norm, exactly, per
//! sample — the property the audit asserts rather than estimates. The payoff
//! for pairs with `d(x,y) ≥ τ` is a lower bound on image distance with high
//! probability, quantified empirically by `K_emp`.
//!
//! The multi-scale map stacks blocks `2^{-εn} · φ_{2^n}` over the dyadic
//! scales covering the distance range, and is audited against the snowflaked
//! metric `d^{1-ε}`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::partitions::Carver;
use crate::seeding::{derive_seed, rng_for};
use crate::spaces::FiniteMetricSpace;
use crate::{Error, Result, CHECK_TOL};
use rand::Rng;

/// A finite-dimensional embedding: `n` points, `m` coordinates.
#[derive(Clone, Debug)]
pub struct EmbeddingMap {
    space_id: String,
    tau: Option<f64>, // None = multi-scale snowflake map
    n: usize,
    m: usize,
    coords: Vec<f64>, // n x m row-major
    scaling: String,
    seed: u64,
    declared_lipschitz: bool,
    snowflake: Option<SnowflakeMeta>,
}

#[derive(Clone, Copy, Debug)]
struct SnowflakeMeta {
    eps: f64,
    n_lo: i32,
    n_hi: i32,
    m_per_scale: usize,
}

#[derive(Serialize, Deserialize)]
struct MapFile {
    tau_or_multi: TauOrMulti,
    m: usize,
    coords: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TauOrMulti {
    Scale(f64),
    Multi(String),
}

impl EmbeddingMap {
    /// Wraps an explicit coordinate matrix (used for hand-built maps).
    pub fn from_rows(
        n: usize,
        m: usize,
        coords: Vec<f64>,
        tau: Option<f64>,
        declared_lipschitz: bool,
    ) -> Result<Self> {
        if n == 0 || m == 0 || coords.len() != n * m {
            return Err(Error::InvalidParameter(format!(
                "coordinate matrix {} does not match {n} x {m}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("non-finite coordinate".into()));
        }
        Ok(EmbeddingMap {
            space_id: "explicit".into(),
            tau,
            n,
            m,
            coords,
            scaling: "explicit".into(),
            seed: 0,
            declared_lipschitz,
            snowflake: None,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn tau(&self) -> Option<f64> {
        self.tau
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn scaling(&self) -> &str {
        &self.scaling
    }

    pub fn space_id(&self) -> &str {
        &self.space_id
    }

    pub fn is_declared_lipschitz(&self) -> bool {
        self.declared_lipschitz
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.coords[i * self.m..(i + 1) * self.m]
    }

    /// Euclidean distance between the images of points `i` and `j`.
    pub fn image_dist(&self, i: usize, j: usize) -> f64 {
        self.row(i)
            .iter()
            .zip(self.row(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// For a multi-scale map: the single-scale block at dyadic exponent `nn`,
    /// with the `2^{-εn}` weight divided back out (so it is the plain `φ_τ`).
    pub fn scale_block(&self, nn: i32) -> Option<EmbeddingMap> {
        let meta = self.snowflake?;
        if nn < meta.n_lo || nn > meta.n_hi {
            return None;
        }
        let offset = (nn - meta.n_lo) as usize * meta.m_per_scale;
        let weight = 2f64.powf(-meta.eps * nn as f64);
        let mut coords = Vec::with_capacity(self.n * meta.m_per_scale);
        for i in 0..self.n {
            let row = self.row(i);
            coords.extend(
                row[offset..offset + meta.m_per_scale]
                    .iter()
                    .map(|&c| c / weight),
            );
        }
        Some(EmbeddingMap {
            space_id: self.space_id.clone(),
            tau: Some(2f64.powi(nn)),
            n: self.n,
            m: meta.m_per_scale,
            coords,
            scaling: format!("1/sqrt({}) per coordinate", meta.m_per_scale),
            seed: self.seed,
            declared_lipschitz: true,
            snowflake: None,
        })
    }

    /// Dyadic exponents `(lo, hi)` of a multi-scale map's blocks.
    pub fn scale_range(&self) -> Option<(i32, i32)> {
        self.snowflake.map(|meta| (meta.n_lo, meta.n_hi))
    }

    /// Snowflake exponent of a multi-scale map.
    pub fn snowflake_eps(&self) -> Option<f64> {
        self.snowflake.map(|meta| meta.eps)
    }

    /// JSON `{tau_or_multi, m, coords}`; `tau_or_multi` is the scale for a
    /// single-scale map and the string `"multi"` otherwise.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&MapFile {
            tau_or_multi: match self.tau {
                Some(t) => TauOrMulti::Scale(t),
                None => TauOrMulti::Multi("multi".into()),
            },
            m: self.m,
            coords: self.coords.clone(),
        })
        .expect("plain data serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: MapFile = serde_json::from_str(text)?;
        let tau = match file.tau_or_multi {
            TauOrMulti::Scale(t) if t.is_finite() && t > 0.0 => Some(t),
            TauOrMulti::Scale(t) => {
                return Err(Error::InvalidParameter(format!("bad map scale {t}")))
            }
            TauOrMulti::Multi(s) if s == "multi" => None,
            TauOrMulti::Multi(s) => {
                return Err(Error::InvalidParameter(format!("bad scale tag {s:?}")))
            }
        };
        if file.m == 0 || file.coords.len() % file.m != 0 || file.coords.is_empty() {
            return Err(Error::InvalidParameter(
                "coordinate matrix shape mismatch".into(),
            ));
        }
        let n = file.coords.len() / file.m;
        let mut map = EmbeddingMap::from_rows(n, file.m, file.coords, tau, false)?;
        map.scaling = "loaded".into();
        map.space_id = "loaded".into();
        Ok(map)
    }
}

/// Builds the `m`-coordinate threshold map at scale `tau` (carving scale
/// `Δ = τ/2`). Coordinates use independent derived seeds, so the result is
/// deterministic in `(seed, m)` and stable under coordinate-parallel
/// construction. Each coordinate's 1-Lipschitzness is checked on all pairs.
pub fn build_threshold_map(
    space: &FiniteMetricSpace,
    tau: f64,
    m: usize,
    seed: u64,
) -> Result<EmbeddingMap> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::InvalidParameter(format!("threshold tau = {tau}")));
    }
    if m == 0 {
        return Err(Error::InvalidParameter(
            "need at least one coordinate".into(),
        ));
    }
    let n = space.n();
    let delta = tau / 2.0;
    let carver = Carver::new(space);
    let inv_sqrt_m = 1.0 / (m as f64).sqrt();

    let columns: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|k| {
            let coord_seed = derive_seed(seed, "coordinate", k as u64);
            let sample = carver.sample(delta, coord_seed).expect("delta validated");
            let mut sign_rng = rng_for(coord_seed, "sign", 0);
            let signs: Vec<f64> = (0..sample.n_clusters)
                .map(|_| f64::from(sign_rng.gen::<bool>()))
                .collect();
            let mut col = vec![0.0; n];
            for x in 0..n {
                if signs[sample.cluster_of[x]] == 1.0 {
                    // Distance to the complement of x's cluster; a partition
                    // with a single cluster has no complement and the
                    // coordinate stays 0 (still 1-Lipschitz).
                    col[x] = nearest_other_cluster(space, &sample.cluster_of, x).unwrap_or(0.0);
                }
            }
            for i in 0..n {
                for j in (i + 1)..n {
                    debug_assert!(
                        (col[i] - col[j]).abs() <= space.d(i, j) + CHECK_TOL,
                        "coordinate {k} breaks the Lipschitz bound on ({i},{j})"
                    );
                }
            }
            col
        })
        .collect();

    let mut coords = vec![0.0; n * m];
    for (k, col) in columns.iter().enumerate() {
        for x in 0..n {
            coords[x * m + k] = col[x] * inv_sqrt_m;
        }
    }
    Ok(EmbeddingMap {
        space_id: space.provenance().to_string(),
        tau: Some(tau),
        n,
        m,
        coords,
        scaling: format!("1/sqrt({m}) per coordinate"),
        seed,
        declared_lipschitz: true,
        snowflake: None,
    })
}

fn nearest_other_cluster(space: &FiniteMetricSpace, cluster_of: &[usize], x: usize) -> Option<f64> {
    let cx = cluster_of[x];
    let mut best = f64::INFINITY;
    for (y, &d) in space.dist_row(x).iter().enumerate() {
        if cluster_of[y] != cx && d < best {
            best = d;
        }
    }
    best.is_finite().then_some(best)
}

/// Per-pair audit row; `ratio = image_dist / d`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuditRow {
    pub i: usize,
    pub j: usize,
    pub d: f64,
    pub image_dist: f64,
    pub ratio: f64,
}

/// Audit of a single-scale map: worst threshold constant and Lipschitz ratio.
#[derive(Clone, Debug)]
pub struct ThresholdAudit {
    pub tau: f64,
    /// Max over pairs with `d >= tau` of `tau / image_dist`; 0 with no such
    /// pairs, infinite if some image pair at threshold distance coincides.
    pub k_emp: f64,
    /// Max over all pairs of `image_dist / d`.
    pub lip_emp: f64,
    pub rows: Vec<AuditRow>,
    /// Pairs breaking the declared Lipschitz contract (ratio above
    /// `1 + 1e-9`). Image coincidence at threshold distance is *not* listed
    /// here — the separation guarantee is an expectation over maps, so a
    /// single map may coincide on a pair at small `m`; that shows up as an
    /// infinite `k_emp` instead.
    pub violations: Vec<(usize, usize)>,
}

pub fn audit_threshold(
    space: &FiniteMetricSpace,
    map: &EmbeddingMap,
    tau: f64,
) -> Result<ThresholdAudit> {
    if map.n() != space.n() {
        return Err(Error::InvalidParameter(format!(
            "map has {} points, space has {}",
            map.n(),
            space.n()
        )));
    }
    if map.tau() != Some(tau) {
        return Err(Error::InvalidParameter(format!(
            "map was built for scale {:?}, audit requested {tau}",
            map.tau()
        )));
    }
    let mut rows = Vec::with_capacity(space.n() * (space.n().saturating_sub(1)) / 2);
    let mut k_emp = 0.0f64;
    let mut lip_emp = 0.0f64;
    let mut violations = Vec::new();
    for (i, j) in space.pairs() {
        let d = space.d(i, j);
        let id = map.image_dist(i, j);
        let ratio = id / d;
        rows.push(AuditRow {
            i,
            j,
            d,
            image_dist: id,
            ratio,
        });
        lip_emp = lip_emp.max(ratio);
        if map.is_declared_lipschitz() && ratio > 1.0 + CHECK_TOL {
            violations.push((i, j));
        }
        if d >= tau {
            k_emp = k_emp.max(tau / id); // inf when the images coincide
        }
    }
    Ok(ThresholdAudit {
        tau,
        k_emp,
        lip_emp,
        rows,
        violations,
    })
}

/// The explicit constant in the multi-scale upper bound
/// `‖Φ(x)-Φ(y)‖² ≤ C_ε · d(x,y)^{2(1-ε)}`: summing the block geometric
/// series below the pair's scale and above it gives
/// `C_ε = 1/(2^{2(1-ε)} - 1) + 4/(1 - 2^{-2ε})`.
pub fn snowflake_upper_constant(eps: f64) -> f64 {
    1.0 / (2f64.powf(2.0 * (1.0 - eps)) - 1.0) + 4.0 / (1.0 - 2f64.powf(-2.0 * eps))
}

/// Dyadic exponent range `(floor(log2 minpos), ceil(log2 diam))`: the
/// smallest block set whose scales `2^n` cover `[minpos, diam]`. Every scale
/// satisfies `2^n ∈ [minpos/2, 2·diam]`; scales outside contribute nothing
/// (below: all pairs separated, coordinates at most the minimum distance;
/// above: thresholds no pair reaches).
pub fn snowflake_scale_range(space: &FiniteMetricSpace) -> Result<(i32, i32)> {
    let minpos = space
        .min_positive_distance()
        .ok_or_else(|| Error::Degenerate("single-point space has no scales".into()))?;
    let n_lo = minpos.log2().floor() as i32;
    let n_hi = space.diameter().log2().ceil() as i32;
    Ok((n_lo, n_hi))
}

/// Builds the multi-scale snowflake map `Φ = Σ_n 2^{-εn} φ_{2^n} ⊗ e_n`
/// restricted to the dyadic scales from [`snowflake_scale_range`], with
/// `m_per_scale` coordinates per block.
pub fn build_snowflake_map(
    space: &FiniteMetricSpace,
    eps: f64,
    m_per_scale: usize,
    seed: u64,
) -> Result<EmbeddingMap> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "snowflake exponent eps = {eps}"
        )));
    }
    if m_per_scale == 0 {
        return Err(Error::InvalidParameter(
            "need at least one coordinate per scale".into(),
        ));
    }
    let (n_lo, n_hi) = snowflake_scale_range(space)?;
    let n = space.n();
    let n_scales = (n_hi - n_lo + 1) as usize;
    let m = n_scales * m_per_scale;

    let blocks: Vec<EmbeddingMap> = (0..n_scales)
        .map(|idx| {
            let nn = n_lo + idx as i32;
            build_threshold_map(
                space,
                2f64.powi(nn),
                m_per_scale,
                derive_seed(seed, "scale", idx as u64),
            )
        })
        .collect::<Result<_>>()?;

    let mut coords = vec![0.0; n * m];
    for (idx, block) in blocks.iter().enumerate() {
        let nn = n_lo + idx as i32;
        let weight = 2f64.powf(-eps * nn as f64);
        for x in 0..n {
            let src = block.row(x);
            let dst = &mut coords[x * m + idx * m_per_scale..x * m + (idx + 1) * m_per_scale];
            for (dv, &sv) in dst.iter_mut().zip(src) {
                *dv = weight * sv;
            }
        }
    }
    Ok(EmbeddingMap {
        space_id: space.provenance().to_string(),
        tau: None,
        n,
        m,
        coords,
        scaling: format!(
            "block n in {n_lo}..={n_hi}: 2^(-{eps}*n) * phi(2^n), 1/sqrt({m_per_scale}) within"
        ),
        seed,
        declared_lipschitz: false,
        snowflake: Some(SnowflakeMeta {
            eps,
            n_lo,
            n_hi,
            m_per_scale,
        }),
    })
}

/// Distortion of a map against a metric, with the worst pairs recorded.
#[derive(Clone, Debug)]
pub struct DistortionReport {
    /// `expansion * contraction`; infinite when images coincide.
    pub value: f64,
    pub expansion: f64,
    pub contraction: f64,
    /// A pair of distinct points with identical images, if any.
    pub coincident: Option<(usize, usize)>,
}

/// `(max ‖φ(x)-φ(y)‖/d) * (max d/‖φ(x)-φ(y)‖)` over all pairs of the given
/// space. Coincident images yield an infinite value (recorded, not an error)
/// so parameter sweeps can log failures and continue.
pub fn distortion(space: &FiniteMetricSpace, map: &EmbeddingMap) -> Result<DistortionReport> {
    if space.n() < 2 {
        return Err(Error::Degenerate(
            "distortion needs at least 2 points".into(),
        ));
    }
    if map.n() != space.n() {
        return Err(Error::InvalidParameter(format!(
            "map has {} points, space has {}",
            map.n(),
            space.n()
        )));
    }
    let mut expansion = 0.0f64;
    let mut contraction = 0.0f64;
    let mut coincident = None;
    for (i, j) in space.pairs() {
        let d = space.d(i, j);
        let id = map.image_dist(i, j);
        expansion = expansion.max(id / d);
        if id == 0.0 && coincident.is_none() {
            coincident = Some((i, j));
        }
        contraction = contraction.max(d / id); // inf when id == 0
    }
    // A collapsed pair makes the distortion infinite outright; computing the
    // product would turn `0 * inf` into NaN when it is the only pair.
    let value = if coincident.is_some() {
        f64::INFINITY
    } else {
        expansion * contraction
    };
    Ok(DistortionReport {
        value,
        expansion,
        contraction,
        coincident,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partitions::padding_report;
    use crate::spaces::{generate, SpaceKind};

    fn two_points() -> FiniteMetricSpace {
        FiniteMetricSpace::from_matrix(2, vec![0.0, 1.0, 1.0, 0.0], "pair").unwrap()
    }

    #[test]
    fn two_point_map_is_lipschitz_for_any_seed() {
        let m = two_points();
        for seed in 0..50 {
            let map = build_threshold_map(&m, 1.0, 8, seed).unwrap();
            assert!(map.image_dist(0, 1) <= 1.0 + CHECK_TOL);
        }
    }

    #[test]
    fn two_point_second_moment_beats_padded_bound() {
        let space = two_points();
        let (tau, eps, trials) = (1.0, 0.5, 2000);
        let delta = tau / 2.0;
        let padding = padding_report(&space, delta, eps, trials, 7).unwrap();
        assert_eq!(padding.delta_emp, 1.0); // eps·Δ-ball is a singleton here
        let m = 10_000;
        let map = build_threshold_map(&space, tau, m, 7).unwrap();
        let observed = map.image_dist(0, 1).powi(2);
        let bound = (padding.delta_emp / 4.0) * eps * eps * delta * delta;
        // Each coordinate contributes (σ1·a − σ2·b)² with singleton clusters,
        // so the mean is ~1/2 and the bound 1/64; 3 SE of slack is plenty.
        let se = (0.25f64 / m as f64).sqrt();
        assert!(
            observed >= bound - 3.0 * se,
            "observed {observed} < bound {bound}"
        );
    }

    #[test]
    fn single_point_space_trivial_audit() {
        let m = FiniteMetricSpace::from_matrix(1, vec![0.0], "pt").unwrap();
        let map = build_threshold_map(&m, 1.0, 4, 0).unwrap();
        let audit = audit_threshold(&m, &map, 1.0).unwrap();
        assert_eq!(audit.rows.len(), 0);
        assert_eq!(audit.k_emp, 0.0);
        assert_eq!(audit.lip_emp, 0.0);
        assert!(audit.violations.is_empty());
    }

    #[test]
    fn identity_like_two_point_audit() {
        let space = two_points();
        let map = EmbeddingMap::from_rows(2, 1, vec![0.0, 1.0], Some(1.0), true).unwrap();
        let audit = audit_threshold(&space, &map, 1.0).unwrap();
        assert_eq!(audit.k_emp, 1.0);
        assert_eq!(audit.lip_emp, 1.0);
        assert!(audit.violations.is_empty());
    }

    #[test]
    fn audit_rejects_scale_mismatch() {
        let space = two_points();
        let map = build_threshold_map(&space, 1.0, 4, 0).unwrap();
        assert!(audit_threshold(&space, &map, 2.0).is_err());
    }

    #[test]
    fn grid_audit_within_padded_bound() {
        let space = generate(SpaceKind::Grid { w: 8, h: 8 }, 0).unwrap();
        let (tau, eps) = (4.0, 1.0 / 16.0);
        let map = build_threshold_map(&space, tau, 1024, 42).unwrap();
        let audit = audit_threshold(&space, &map, tau).unwrap();
        assert!(audit.lip_emp <= 1.0 + CHECK_TOL);
        assert!(audit.violations.is_empty());
        let padding = padding_report(&space, tau / 2.0, eps, 2000, 42).unwrap();
        let bound = 4.0 / (eps * padding.delta_emp.sqrt());
        assert!(
            audit.k_emp <= 1.25 * bound,
            "K_emp {} vs padded bound {bound}",
            audit.k_emp
        );
    }

    #[test]
    fn separated_pairs_have_independent_signs() {
        let space = generate(SpaceKind::Grid { w: 8, h: 8 }, 0).unwrap();
        let tau = 2.0;
        let m = 4096;
        let map = build_threshold_map(&space, tau, m, 5).unwrap();
        // Corner-to-corner pair is far beyond tau, so the per-coordinate
        // sign bits of the two points come from different clusters and are
        // independent: their empirical correlation is O(1/sqrt m).
        let (x, y) = (0, 63);
        assert!(space.d(x, y) >= tau);
        let bits =
            |p: usize| -> Vec<f64> { map.row(p).iter().map(|&c| f64::from(c > 0.0)).collect() };
        let (bx, by) = (bits(x), bits(y));
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (mx, my) = (mean(&bx), mean(&by));
        let cov = bx
            .iter()
            .zip(&by)
            .map(|(a, b)| (a - mx) * (b - my))
            .sum::<f64>()
            / m as f64;
        let var =
            |v: &[f64], mu: f64| v.iter().map(|a| (a - mu).powi(2)).sum::<f64>() / v.len() as f64;
        let corr = cov / (var(&bx, mx) * var(&by, my)).sqrt();
        assert!(corr.abs() <= 4.0 / (m as f64).sqrt(), "corr {corr}");
    }

    #[test]
    fn snowflake_single_scale_on_equidistant_space() {
        let space = two_points();
        let map = build_snowflake_map(&space, 0.5, 16, 3).unwrap();
        assert_eq!(map.scale_range(), Some((0, 0)));
        assert_eq!(map.m(), 16);
        assert!(map.tau().is_none());
    }

    #[test]
    fn snowflake_lower_bound_via_block_audit() {
        let space = two_points();
        let eps = 0.5;
        let map = build_snowflake_map(&space, eps, 256, 11).unwrap();
        let block = map.scale_block(0).unwrap();
        let audit = audit_threshold(&space, &block, 1.0).unwrap();
        let k = audit.k_emp;
        assert!(k.is_finite() && k > 0.0);
        let lower = space.d(0, 1).powf(1.0 - eps) / (4.0 * k);
        assert!(map.image_dist(0, 1) >= lower);
    }

    #[test]
    fn snowflake_upper_bound_explicit_constant() {
        for &eps in &[0.25, 0.5] {
            let c = snowflake_upper_constant(eps);
            let space = generate(SpaceKind::Grid { w: 8, h: 8 }, 0).unwrap();
            let map = build_snowflake_map(&space, eps, 32, 9).unwrap();
            for (i, j) in space.pairs() {
                let d = space.d(i, j);
                let lhs = map.image_dist(i, j).powi(2);
                assert!(
                    lhs <= c * d.powf(2.0 * (1.0 - eps)) * (1.0 + 1e-12),
                    "pair ({i},{j}) d {d}: {lhs} vs C_eps bound"
                );
            }
        }
    }

    #[test]
    fn snowflake_constant_value() {
        // eps = 1/2: 1/(2-1) + 4/(1-1/2) = 9.
        assert!((snowflake_upper_constant(0.5) - 9.0).abs() < 1e-12);
    }

    #[test]
    fn snowflake_block_reconstruction() {
        let space = generate(SpaceKind::Grid { w: 4, h: 4 }, 0).unwrap();
        let eps = 0.25;
        let map = build_snowflake_map(&space, eps, 8, 21).unwrap();
        let (lo, hi) = map.scale_range().unwrap();
        assert_eq!(lo, 0); // unit minimum distance
        assert_eq!(hi, 3); // diameter 6 covered by 2^3
        for nn in lo..=hi {
            let block = map.scale_block(nn).unwrap();
            let audit = audit_threshold(&space, &block, 2f64.powi(nn)).unwrap();
            assert!(audit.lip_emp <= 1.0 + CHECK_TOL, "block {nn}");
        }
        assert!(map.scale_block(hi + 1).is_none());
    }

    #[test]
    fn distortion_examples() {
        // Isometric two-point map.
        let space = two_points();
        let map = EmbeddingMap::from_rows(2, 1, vec![0.0, 1.0], None, false).unwrap();
        let rep = distortion(&space, &map).unwrap();
        assert_eq!(rep.value, 1.0);

        // Scaling by 3 cancels in the product.
        let map3 = EmbeddingMap::from_rows(2, 1, vec![0.0, 3.0], None, false).unwrap();
        assert_eq!(distortion(&space, &map3).unwrap().value, 1.0);

        // Path with d = (1, 1, 2) embedded at 0, 1, 1.5: expansion 1 from the
        // first edge, contraction 2 from the second.
        let g = crate::spaces::WeightedGraph::new(3, vec![(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let path = g.shortest_path_metric("path3").unwrap();
        let line = EmbeddingMap::from_rows(3, 1, vec![0.0, 1.0, 1.5], None, false).unwrap();
        let rep = distortion(&path, &line).unwrap();
        assert_eq!(rep.expansion, 1.0);
        assert_eq!(rep.contraction, 2.0);
        assert_eq!(rep.value, 2.0);
        assert!(rep.coincident.is_none());
    }

    #[test]
    fn distortion_coincident_images_infinite() {
        let space = two_points();
        let map = EmbeddingMap::from_rows(2, 1, vec![0.7, 0.7], None, false).unwrap();
        let rep = distortion(&space, &map).unwrap();
        assert!(rep.value.is_infinite());
        assert_eq!(rep.coincident, Some((0, 1)));
    }

    #[test]
    fn map_json_round_trip() {
        let space = generate(SpaceKind::Grid { w: 3, h: 3 }, 0).unwrap();
        let map = build_threshold_map(&space, 2.0, 6, 13).unwrap();
        let back = EmbeddingMap::from_json(&map.to_json()).unwrap();
        assert_eq!(back.n(), map.n());
        assert_eq!(back.m(), map.m());
        assert_eq!(back.tau(), map.tau());
        for i in 0..map.n() {
            assert_eq!(back.row(i), map.row(i));
        }
        let multi = build_snowflake_map(&space, 0.5, 4, 13).unwrap();
        let back = EmbeddingMap::from_json(&multi.to_json()).unwrap();
        assert_eq!(back.tau(), None);
        assert_eq!(back.m(), multi.m());
    }

    #[test]
    fn deterministic_given_seed() {
        let space = generate(SpaceKind::Grid { w: 5, h: 4 }, 0).unwrap();
        let a = build_threshold_map(&space, 2.0, 32, 77).unwrap();
        let b = build_threshold_map(&space, 2.0, 32, 77).unwrap();
        for i in 0..a.n() {
            assert_eq!(a.row(i), b.row(i));
        }
    }
}
