//! Random Δ-bounded partitions by ball carving, and empirical padding
//! measurement.
//!
//! The sampler draws a radius fraction `u` uniform in `[1/4, 1/2)` and a
//! uniformly random permutation of the points; each point joins the cluster
//! of the first point in permutation order within distance `u·Δ` of it. Every
//! cluster sits inside a ball of radius `< Δ/2`, so Δ-boundedness holds
//! exactly, sample by sample.
//!
//! Membership tests compare the *ratio* `d/Δ` against `u`, so rescaling all
//! distances and `Δ` by a common factor reproduces the same clusters
//! bit-for-bit under the same seed.
//!
//! A partition is `(ε, δ, Δ)`-padded when each point's `εΔ`-ball stays inside
//! the point's own cluster with probability at least `δ`; [`padding_report`]
//! estimates the worst-case `δ` over points by Monte Carlo.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::seeding::{derive_seed, rng_for};
use crate::spaces::FiniteMetricSpace;
use crate::{Error, Result};
use rand::seq::SliceRandom;
use rand::Rng;

/// One sampled partition. Cluster ids are dense, in order of creation.
#[derive(Clone, Debug)]
pub struct PartitionSample {
    pub space_id: String,
    pub delta: f64,
    pub cluster_of: Vec<usize>,
    pub n_clusters: usize,
    pub seed: u64,
}

impl PartitionSample {
    /// Largest diameter among clusters; `0` for singleton-only partitions.
    pub fn max_cluster_diameter(&self, space: &FiniteMetricSpace) -> f64 {
        let n = space.n();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                if self.cluster_of[i] == self.cluster_of[j] {
                    worst = worst.max(space.d(i, j));
                }
            }
        }
        worst
    }
}

/// Reusable sampling context: per-point neighbor lists sorted by distance,
/// so carving a cluster touches only the points inside its radius.
pub struct Carver<'a> {
    space: &'a FiniteMetricSpace,
    neighbors: Vec<Vec<(f64, usize)>>,
}

impl<'a> Carver<'a> {
    pub fn new(space: &'a FiniteMetricSpace) -> Self {
        let n = space.n();
        let neighbors = (0..n)
            .map(|i| {
                let mut row: Vec<(f64, usize)> =
                    space.dist_row(i).iter().copied().zip(0..n).collect();
                row.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
                row
            })
            .collect();
        Carver { space, neighbors }
    }

    pub fn space(&self) -> &FiniteMetricSpace {
        self.space
    }

    /// Draws one partition at scale `delta` from the given seed.
    pub fn sample(&self, delta: f64, seed: u64) -> Result<PartitionSample> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "partition scale delta = {delta}"
            )));
        }
        let n = self.space.n();
        let mut rng = rng_for(seed, "carve", 0);
        let u: f64 = rng.gen_range(0.25..0.5);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);

        let mut cluster_of = vec![usize::MAX; n];
        let mut n_clusters = 0usize;
        let mut unclaimed = n;
        for &c in &perm {
            let mut claimed_any = false;
            for &(d, y) in &self.neighbors[c] {
                if d / delta > u {
                    break;
                }
                if cluster_of[y] == usize::MAX {
                    cluster_of[y] = n_clusters;
                    claimed_any = true;
                    unclaimed -= 1;
                }
            }
            if claimed_any {
                n_clusters += 1;
            }
            if unclaimed == 0 {
                break;
            }
        }
        Ok(PartitionSample {
            space_id: self.space.provenance().to_string(),
            delta,
            cluster_of,
            n_clusters,
            seed,
        })
    }

    /// Is `x`'s `eps·delta`-ball contained in `x`'s cluster?
    fn padded(&self, sample: &PartitionSample, x: usize, eps: f64) -> bool {
        let cx = sample.cluster_of[x];
        for &(d, y) in &self.neighbors[x] {
            if d / sample.delta > eps {
                break;
            }
            if sample.cluster_of[y] != cx {
                return false;
            }
        }
        true
    }
}

/// One-shot convenience over [`Carver::sample`].
pub fn sample_partition(
    space: &FiniteMetricSpace,
    delta: f64,
    seed: u64,
) -> Result<PartitionSample> {
    Carver::new(space).sample(delta, seed)
}

/// Empirical padding of the carving scheme at scale `delta`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PaddingReport {
    pub delta: f64,
    pub eps: f64,
    pub trials: usize,
    pub delta_emp: f64,
    /// Per-point count of trials in which the point was padded.
    pub per_point: Vec<usize>,
}

impl PaddingReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain data serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: PaddingReport = serde_json::from_str(text)?;
        if report.per_point.iter().any(|&c| c > report.trials)
            || !(0.0..=1.0).contains(&report.delta_emp)
        {
            return Err(Error::InvalidParameter(
                "padding report fails its invariants".into(),
            ));
        }
        Ok(report)
    }
}

/// Runs `trials` independent partitions (seeds derived from `(seed, trial)`)
/// and counts, per point, how often its `eps·delta`-ball stays inside its own
/// cluster. `delta_emp` is the worst frequency over points.
pub fn padding_report(
    space: &FiniteMetricSpace,
    delta: f64,
    eps: f64,
    trials: usize,
    seed: u64,
) -> Result<PaddingReport> {
    if !(eps > 0.0 && eps <= 0.5) {
        return Err(Error::InvalidParameter(format!(
            "padding eps = {eps} outside (0, 1/2]"
        )));
    }
    if trials == 0 {
        return Err(Error::InvalidParameter(
            "padding needs at least one trial".into(),
        ));
    }
    let carver = Carver::new(space);
    let n = space.n();
    let per_point = (0..trials)
        .into_par_iter()
        .map(|t| {
            let sample = carver
                .sample(delta, derive_seed(seed, "trial", t as u64))
                .expect("delta validated above");
            (0..n)
                .map(|x| carver.padded(&sample, x, eps) as usize)
                .collect::<Vec<_>>()
        })
        .reduce(
            || vec![0usize; n],
            |mut acc, one| {
                for (a, b) in acc.iter_mut().zip(one) {
                    *a += b;
                }
                acc
            },
        );
    let worst = per_point.iter().copied().min().unwrap_or(0);
    Ok(PaddingReport {
        delta,
        eps,
        trials,
        delta_emp: worst as f64 / trials as f64,
        per_point,
    })
}
