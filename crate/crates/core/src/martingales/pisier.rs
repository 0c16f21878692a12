//! Empirical check of the martingale-increment inequality
//! `E ‖M_n − M_0‖^p ≤ K Σ_t E ‖M_{t+1} − M_t‖^p`.
//!
//! The report carries the two sides and their ratio; the ratio is the
//! empirical value of the best constant `K` for the sampled family. Two
//! regimes are exact and serve as anchors: a single step gives ratio `1`
//! bitwise (numerator and denominator are the same sum), and independent
//! sign increments in a Hilbert space give ratio `1` by orthogonality.

use rand::Rng;

use super::{apply_transition, check_state_map};
use crate::chains::ReversibleChain;
use crate::martingales::duality::{lq_norm, NormContext};
use crate::pow_p;
use crate::seeding::rng_for;
use crate::{Error, Result};

/// Both sides of the increment inequality over a sampled path family.
#[derive(Clone, Debug)]
pub struct PisierReport {
    /// Power applied to norms (the smoothness exponent of the context).
    pub p: f64,
    /// Number of paths averaged.
    pub samples: usize,
    /// Number of increments per path.
    pub steps: usize,
    /// `E ‖M_n − M_0‖^p`.
    pub numerator: f64,
    /// `Σ_t E ‖M_{t+1} − M_t‖^p`.
    pub denominator: f64,
    /// `numerator / denominator` — the empirical constant.
    pub ratio: f64,
}

/// Averages both sides of the inequality over explicit paths.
///
/// Each element of `paths` is one realization `M_0 .. M_n` as vectors; all
/// paths must share a length `≥ 2` and a dimension. Norms are taken in the
/// `l_q` norm of `ctx` and raised to its exponent `p`. A family with no
/// movement at all has denominator zero and no meaningful ratio, which is
/// reported as an error rather than an infinity.
pub fn pisier_check(paths: &[Vec<Vec<f64>>], ctx: &NormContext) -> Result<PisierReport> {
    if paths.is_empty() {
        return Err(Error::InvalidParameter("no paths supplied".into()));
    }
    let len = paths[0].len();
    if len < 2 {
        return Err(Error::InvalidParameter(
            "paths need at least two points to have an increment".into(),
        ));
    }
    let dim = paths[0][0].len();
    for (i, path) in paths.iter().enumerate() {
        if path.len() != len {
            return Err(Error::InvalidParameter(format!(
                "path {i} has {} points, path 0 has {len}",
                path.len()
            )));
        }
        for v in path {
            if v.len() != dim || v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "path {i} has a point of wrong dimension or non-finite value"
                )));
            }
        }
    }
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for path in paths {
        let total: Vec<f64> = path[len - 1]
            .iter()
            .zip(&path[0])
            .map(|(&a, &b)| a - b)
            .collect();
        num += pow_p(lq_norm(&total, ctx.q), ctx.p);
        for t in 0..len - 1 {
            let step: Vec<f64> = path[t + 1]
                .iter()
                .zip(&path[t])
                .map(|(&a, &b)| a - b)
                .collect();
            den += pow_p(lq_norm(&step, ctx.q), ctx.p);
        }
    }
    num /= paths.len() as f64;
    den /= paths.len() as f64;
    if den == 0.0 {
        return Err(Error::Degenerate(
            "all increments vanish; the increment inequality has no content".into(),
        ));
    }
    Ok(PisierReport {
        p: ctx.p,
        samples: paths.len(),
        steps: len - 1,
        numerator: num,
        denominator: den,
        ratio: num / den,
    })
}

/// Samples `trials` centered chain martingale paths of `n_steps` increments.
///
/// Each path starts from a stationary draw and follows the chain; the
/// martingale is the centered forward one, `M_0 = f(Z_0)` and increments
/// `f(Z_{t+1}) − (Pf)(Z_t)`, with all conditional means taken exactly from
/// the transition matrix. Trial `i` uses a generator derived from
/// `(seed, i)`, so any prefix of the family is reproducible.
pub fn sample_martingale_paths(
    chain: &ReversibleChain,
    f: &[Vec<f64>],
    n_steps: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<Vec<Vec<f64>>>> {
    let dim = check_state_map(chain, f)?;
    if n_steps == 0 || trials == 0 {
        return Err(Error::InvalidParameter(
            "need at least one step and one trial".into(),
        ));
    }
    let pf = apply_transition(chain, f);
    let mut paths = Vec::with_capacity(trials);
    for i in 0..trials {
        let mut rng = rng_for(seed, "pisier-path", i as u64);
        let traj = chain.trajectory(n_steps, &mut rng);
        let mut path = Vec::with_capacity(n_steps + 1);
        path.push(f[traj[0]].clone());
        for t in 1..traj.len() {
            let prev: &Vec<f64> = path.last().unwrap();
            let next: Vec<f64> = (0..dim)
                .map(|c| prev[c] + f[traj[t]][c] - pf[traj[t - 1]][c])
                .collect();
            path.push(next);
        }
        paths.push(path);
    }
    Ok(paths)
}

/// Convenience: ±1 random-sign partial sums in one dimension, `trials`
/// paths of `n` steps. Exact sign enumeration is in the tests; this sampled
/// version feeds the command-line verifier.
pub fn sample_sign_paths(n: usize, trials: usize, seed: u64) -> Vec<Vec<Vec<f64>>> {
    (0..trials)
        .map(|i| {
            let mut rng = rng_for(seed, "sign-path", i as u64);
            let mut path = vec![vec![0.0]];
            let mut s = 0.0;
            for _ in 0..n {
                s += if rng.gen::<bool>() { 1.0 } else { -1.0 };
                path.push(vec![s]);
            }
            path
        })
        .collect()
}
