//! Forward/backward martingale decompositions along chain trajectories,
//! dominating sequences, duality maps, and dimension reductions to the plane.
//!
//! Given a reversible chain `{Z_s}`, a vector map `f` on its states, and an
//! even horizon `t`, the decomposition builds two martingales
//!
//! ```text
//! M_0 = f(Z_0),   M_{s+1} − M_s = f(Z_{s+1}) − (Pf)(Z_s)
//! N_0 = f(Z_t),   N_{s+1} − N_s = f(Z_{t−s−1}) − (Pf)(Z_{t−s})
//! ```
//!
//! (`(Pf)(z) = Σ_z' P(z, z') f(z')`; reversibility makes `P` its own
//! time-reversal, so the backward compensator is the same `Pf`). `M` is a
//! martingale in the forward filtration and `N` in the backward one. The
//! even-step partial sums `A_k = Σ_{s≤k} (M_{2s} − M_{2s−1})` and
//! `B_k = Σ_{s≤k} (N_{2s} − N_{2s−1})` satisfy the exact pathwise identity
//!
//! ```text
//! f(Z_t) − f(Z_0) = A_{t/2} − B_{t/2}
//! ```
//!
//! which is the backbone of every displacement bound downstream: the two-step
//! displacement of `f` along the chain is a difference of two martingales
//! whose increments are controlled by one-step geometry.
//!
//! The submodules supply the analytic tooling: [`duality`] for `l_q` duality
//! maps and smoothness constants, [`reduce`] for collapsing vector-valued
//! martingales to the plane while preserving the inequalities that matter,
//! and [`pisier`] for the smoothness moment inequality check.

pub mod duality;
pub mod pisier;
pub mod reduce;

pub use duality::{dot, duality_map, lq_norm, smoothness_violation, NormContext};
pub use pisier::{pisier_check, sample_martingale_paths, sample_sign_paths, PisierReport};
pub use reduce::{
    reduce_dimension_hilbert, reduce_dimension_hilbert_from_norms, reduce_dimension_smooth,
    smooth_reduction_constant, HilbertReduction, SmoothReduction,
};

use crate::chains::ReversibleChain;
use crate::pow_p;
use crate::spaces::FiniteMetricSpace;
use crate::{Error, Result};

/// `(Pf)(z) = Σ_z' P(z, z') f(z')` for every state, as dense rows.
pub fn apply_transition(chain: &ReversibleChain, f: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let dim = f.first().map_or(0, Vec::len);
    (0..chain.n())
        .map(|z| {
            let mut acc = vec![0.0; dim];
            for &(z1, pr) in chain.row(z) {
                for (a, &fz) in acc.iter_mut().zip(&f[z1]) {
                    *a += pr * fz;
                }
            }
            acc
        })
        .collect()
}

fn check_state_map(chain: &ReversibleChain, f: &[Vec<f64>]) -> Result<usize> {
    if f.len() != chain.n() {
        return Err(Error::InvalidParameter(format!(
            "state map covers {} states, chain has {}",
            f.len(),
            chain.n()
        )));
    }
    let dim = f[0].len();
    if dim == 0 {
        return Err(Error::InvalidParameter(
            "state map has zero-dimensional values".into(),
        ));
    }
    for (z, row) in f.iter().enumerate() {
        if row.len() != dim {
            return Err(Error::InvalidParameter(format!(
                "state {z} maps to dimension {}, state 0 to {dim}",
                row.len()
            )));
        }
        if let Some(&bad) = row.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "state {z} maps to non-finite {bad}"
            )));
        }
    }
    Ok(dim)
}

fn check_trajectory(chain: &ReversibleChain, trajectory: &[usize]) -> Result<()> {
    if trajectory.is_empty() {
        return Err(Error::InvalidParameter("empty trajectory".into()));
    }
    if let Some(&bad) = trajectory.iter().find(|&&z| z >= chain.n()) {
        return Err(Error::InvalidParameter(format!(
            "trajectory visits state {bad}, chain has {} states",
            chain.n()
        )));
    }
    for s in 1..trajectory.len() {
        if chain.prob(trajectory[s - 1], trajectory[s]) <= 0.0 {
            return Err(Error::ImpossibleTransition {
                step: s,
                from: trajectory[s - 1],
                to: trajectory[s],
            });
        }
    }
    Ok(())
}

/// A decomposed trajectory: the martingales `M`, `N`, their even-step sums
/// `A`, `B`, and (once attached) the dominating sequences `α`, `β`.
///
/// Vector norms in the trace's invariants are `l_q` with the recorded tag.
#[derive(Clone, Debug)]
pub struct MartingaleTrace {
    /// Horizon (`trajectory.len() − 1`, always even).
    pub t: usize,
    /// Visited states `Z_0 .. Z_t`.
    pub trajectory: Vec<usize>,
    /// `f` along the trajectory (`t + 1` rows).
    pub f_values: Vec<Vec<f64>>,
    /// Norm tag `q ≥ 1` for the vector values.
    pub q: f64,
    /// Forward martingale `M_0 .. M_t`.
    pub m_seq: Vec<Vec<f64>>,
    /// Backward martingale `N_0 .. N_t`.
    pub n_seq: Vec<Vec<f64>>,
    /// `A_0 .. A_{t/2}` (even forward increments summed).
    pub a_seq: Vec<Vec<f64>>,
    /// `B_0 .. B_{t/2}` (even backward increments summed).
    pub b_seq: Vec<Vec<f64>>,
    /// Dominating sequence for `‖A_s − A_{s−1}‖`; empty until attached.
    pub alpha: Vec<f64>,
    /// Dominating sequence for `‖B_s − B_{s−1}‖`; empty until attached.
    pub beta: Vec<f64>,
}

impl MartingaleTrace {
    /// Dimension of the vector values.
    pub fn dim(&self) -> usize {
        self.f_values[0].len()
    }

    /// Half-horizon `u = t/2`, the number of `A`/`B` increments.
    pub fn half(&self) -> usize {
        self.t / 2
    }

    /// Max coordinate error in `f(Z_t) − f(Z_0) = A_{t/2} − B_{t/2}`.
    pub fn identity_error(&self) -> f64 {
        let u = self.half();
        let mut worst = 0.0f64;
        for i in 0..self.dim() {
            let lhs = self.f_values[self.t][i] - self.f_values[0][i];
            let rhs = self.a_seq[u][i] - self.b_seq[u][i];
            worst = worst.max((lhs - rhs).abs());
        }
        worst
    }

    /// Attaches dominating sequences (one value per `A`/`B` increment).
    pub fn attach_dominators(&mut self, alpha: Vec<f64>, beta: Vec<f64>) -> Result<()> {
        let u = self.half();
        if alpha.len() != u || beta.len() != u {
            return Err(Error::InvalidParameter(format!(
                "dominator lengths ({}, {}) do not match t/2 = {u}",
                alpha.len(),
                beta.len()
            )));
        }
        self.alpha = alpha;
        self.beta = beta;
        Ok(())
    }

    /// Worst signed slack of the step-domination invariant,
    /// `max_s max(‖A_s − A_{s−1}‖ − α_s, ‖B_s − B_{s−1}‖ − β_s)`
    /// (positive means violated). Errors if no dominators are attached.
    pub fn domination_margin(&self) -> Result<f64> {
        if self.alpha.is_empty() && self.half() > 0 {
            return Err(Error::InvalidParameter(
                "no dominating sequences attached".into(),
            ));
        }
        let mut worst = f64::NEG_INFINITY;
        for s in 1..=self.half() {
            let da = step_norm(&self.a_seq[s], &self.a_seq[s - 1], self.q);
            let db = step_norm(&self.b_seq[s], &self.b_seq[s - 1], self.q);
            worst = worst.max(da - self.alpha[s - 1]).max(db - self.beta[s - 1]);
        }
        Ok(worst)
    }

    /// One JSON object per step `{t, M, N, A, B, alpha, beta}`; `A`, `B` are
    /// present at even steps (index `t/2`), `alpha`/`beta` at even steps
    /// `≥ 2` when attached, and `null` otherwise.
    pub fn to_jsonl(&self) -> String {
        use serde_json::json;
        let mut out = String::new();
        for s in 0..=self.t {
            let even = s % 2 == 0;
            let k = s / 2;
            let obj = json!({
                "t": s,
                "M": self.m_seq[s],
                "N": self.n_seq[s],
                "A": if even { Some(&self.a_seq[k]) } else { None },
                "B": if even { Some(&self.b_seq[k]) } else { None },
                "alpha": if even && k >= 1 && !self.alpha.is_empty() {
                    Some(self.alpha[k - 1])
                } else {
                    None
                },
                "beta": if even && k >= 1 && !self.beta.is_empty() {
                    Some(self.beta[k - 1])
                } else {
                    None
                },
            });
            out.push_str(&obj.to_string());
            out.push('\n');
        }
        out
    }
}

fn step_norm(a: &[f64], b: &[f64], q: f64) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(&x, &y)| x - y).collect();
    lq_norm(&diff, q)
}

/// Decomposes `f` along a trajectory into the forward martingale `M`, the
/// backward martingale `N`, and their even-step sums `A`, `B`.
///
/// The compensators `(Pf)(z)` are computed exactly from the transition
/// matrix — nothing here is estimated. `q` tags which `l_q` norm the trace's
/// invariants are measured in (use 2 for Euclidean targets).
///
/// The horizon must be even; the defining identity
/// `f(Z_t) − f(Z_0) = A_{t/2} − B_{t/2}` pairs steps two at a time and has no
/// odd-horizon analogue.
pub fn decompose(
    chain: &ReversibleChain,
    f: &[Vec<f64>],
    q: f64,
    trajectory: &[usize],
) -> Result<MartingaleTrace> {
    let dim = check_state_map(chain, f)?;
    check_trajectory(chain, trajectory)?;
    if !(q >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "norm tag q = {q} must be ≥ 1"
        )));
    }
    let t = trajectory.len() - 1;
    if t % 2 != 0 {
        return Err(Error::InvalidParameter(format!(
            "A/B identity requires even t; trajectory has t = {t}"
        )));
    }
    let pf = apply_transition(chain, f);
    let add = |base: &[f64], plus: &[f64], minus: &[f64]| -> Vec<f64> {
        (0..dim).map(|i| base[i] + plus[i] - minus[i]).collect()
    };

    let mut m_seq = Vec::with_capacity(t + 1);
    m_seq.push(f[trajectory[0]].clone());
    for s in 0..t {
        let next = add(&m_seq[s], &f[trajectory[s + 1]], &pf[trajectory[s]]);
        m_seq.push(next);
    }
    let mut n_seq = Vec::with_capacity(t + 1);
    n_seq.push(f[trajectory[t]].clone());
    for s in 0..t {
        let next = add(&n_seq[s], &f[trajectory[t - s - 1]], &pf[trajectory[t - s]]);
        n_seq.push(next);
    }

    let u = t / 2;
    let mut a_seq = vec![vec![0.0; dim]];
    let mut b_seq = vec![vec![0.0; dim]];
    for k in 1..=u {
        a_seq.push(add(&a_seq[k - 1], &m_seq[2 * k], &m_seq[2 * k - 1]));
        b_seq.push(add(&b_seq[k - 1], &n_seq[2 * k], &n_seq[2 * k - 1]));
    }

    let f_values = trajectory.iter().map(|&z| f[z].clone()).collect();
    Ok(MartingaleTrace {
        t,
        trajectory: trajectory.to_vec(),
        f_values,
        q,
        m_seq,
        n_seq,
        a_seq,
        b_seq,
        alpha: Vec::new(),
        beta: Vec::new(),
    })
}

/// The dominating sequences of a trajectory pushed into a metric space by a
/// point map `g` (state index → point index):
///
/// ```text
/// α_s^p = 2^{p−1} d(g Z_{2s}, g Z_{2s−1})^p + 2^{p−1} E[d(g Z', g Z_{2s−1})^p | Z_{2s−1}]
/// β_s^p = 2^{p−1} d(g Z_{t−2s+1}, g Z_{t−2s})^p + 2^{p−1} E[d(g Z', g Z_{t−2s+1})^p | Z_{t−2s+1}]
/// ```
///
/// for `1 ≤ s ≤ t/2`, where `Z'` is one chain step from the conditioning
/// state. `β_s` conditions on `Z_{t−2s+1}` because that is the state whose
/// compensator appears in `B_s − B_{s−1} = f(Z_{t−2s}) − (Pf)(Z_{t−2s+1})`;
/// conditioning there is what makes the step-domination
/// `‖B_s − B_{s−1}‖ ≤ β_s` hold on every single path (not merely in
/// distribution) for every 1-Lipschitz `f` of the metric into a normed
/// space.
pub fn dominating_sequences(
    chain: &ReversibleChain,
    space: &FiniteMetricSpace,
    g: &[usize],
    trajectory: &[usize],
    p: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if g.len() != chain.n() {
        return Err(Error::InvalidParameter(format!(
            "point map covers {} states, chain has {}",
            g.len(),
            chain.n()
        )));
    }
    if let Some(&bad) = g.iter().find(|&&x| x >= space.n()) {
        return Err(Error::InvalidParameter(format!(
            "point map hits {bad}, space has {} points",
            space.n()
        )));
    }
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "moment exponent p = {p} must be ≥ 1"
        )));
    }
    check_trajectory(chain, trajectory)?;
    let t = trajectory.len() - 1;
    if t % 2 != 0 {
        return Err(Error::InvalidParameter(format!(
            "A/B identity requires even t; trajectory has t = {t}"
        )));
    }
    // One-step conditional moment out of each state, exact.
    let pdp: Vec<f64> = (0..chain.n())
        .map(|z| {
            chain
                .row(z)
                .iter()
                .map(|&(z1, pr)| pr * pow_p(space.d(g[z], g[z1]), p))
                .sum()
        })
        .collect();
    let two = 2f64.powf(p - 1.0);
    let u = t / 2;
    let mut alpha = Vec::with_capacity(u);
    let mut beta = Vec::with_capacity(u);
    for s in 1..=u {
        let a_p = two * pow_p(space.d(g[trajectory[2 * s]], g[trajectory[2 * s - 1]]), p)
            + two * pdp[trajectory[2 * s - 1]];
        alpha.push(a_p.powf(1.0 / p));
        let b_p =
            two * pow_p(
                space.d(g[trajectory[t - 2 * s + 1]], g[trajectory[t - 2 * s]]),
                p,
            ) + two * pdp[trajectory[t - 2 * s + 1]];
        beta.push(b_p.powf(1.0 / p));
    }
    Ok((alpha, beta))
}

/// Worst-state conditional-mean defect of the forward and backward
/// martingale increments, computed exactly from the transition matrix.
///
/// Forward: `max_z ‖Σ_z' P(z,z')(f(z') − (Pf)(z))‖_∞` — how far the centered
/// forward increment is from conditional mean zero. Backward: the same with
/// the time-reversed kernel `P̂(z, z') = π_{z'} P(z', z)/π_z` in place of
/// `P`. For an exactly reversible chain both are pure floating-point noise;
/// a non-reversible transition matrix shows up here immediately.
pub fn conditional_mean_defect(chain: &ReversibleChain, f: &[Vec<f64>]) -> Result<(f64, f64)> {
    check_state_map(chain, f)?;
    let n = chain.n();
    let pf = apply_transition(chain, f);
    let mut forward = 0.0f64;
    for z in 0..n {
        let mut acc = vec![0.0; f[0].len()];
        for &(z1, pr) in chain.row(z) {
            for (a, (&fz, &pfz)) in acc.iter_mut().zip(f[z1].iter().zip(&pf[z])) {
                *a += pr * (fz - pfz);
            }
        }
        forward = acc.iter().fold(forward, |w, &a| w.max(a.abs()));
    }
    // Dense reversed kernel, built from detailed balance without
    // renormalization so that any asymmetry is visible, not washed out.
    let pi = chain.pi();
    let mut backward = 0.0f64;
    let mut rev_row = vec![0.0f64; n];
    for z in 0..n {
        rev_row.iter_mut().for_each(|v| *v = 0.0);
        for z1 in 0..n {
            let back = chain.prob(z1, z);
            if back > 0.0 {
                rev_row[z1] = pi[z1] * back / pi[z];
            }
        }
        let mut acc = vec![0.0; f[0].len()];
        for (z1, &pr) in rev_row.iter().enumerate() {
            if pr > 0.0 {
                for (a, (&fz, &pfz)) in acc.iter_mut().zip(f[z1].iter().zip(&pf[z])) {
                    *a += pr * (fz - pfz);
                }
            }
        }
        backward = acc.iter().fold(backward, |w, &a| w.max(a.abs()));
    }
    Ok((forward, backward))
}
