//! Collapsing vector-valued martingales to the plane.
//!
//! Two constructions, both driven by independent fair coins so the reduced
//! process stays a martingale:
//!
//! * **Euclidean** ([`reduce_dimension_hilbert`]): places `N_{t+1}` in `R²`
//!   so that `‖N_t‖ = ‖M_t‖` and `‖N_{t+1} − N_t‖ = ‖M_{t+1} − M_t‖` hold
//!   *exactly* at every step. The new point sits at signed coordinates
//!   `(a, ±b)` in the frame of `N_t`, where `a = ⟨M_{t+1}, M_t⟩/‖M_t‖` is
//!   the parallel component and `b = √(‖M_{t+1}‖² − a²)` the rest; the coin
//!   picks the half-plane.
//!
//! * **Smooth-norm** ([`reduce_dimension_smooth`]): for an `l_q` martingale
//!   (smoothness exponent `p`, constant `C`), builds a planar martingale
//!   whose squared norm tracks `‖M_t − M_0‖^p` from above while its squared
//!   increments stay within a constant `K` of the `p`-th-power increments:
//!
//!   ```text
//!   (i)  ‖M_t − M_0‖^p ≤ ‖N_t‖²
//!   (ii) ‖N_t − N_{t−1}‖² ≤ K(‖ΔM_t‖^p + E[‖ΔM_t‖^p | F_{t−1}])
//!   ```
//!
//!   Both claims hold path by path (the underlying induction is pathwise),
//!   and the implementation records the worst observed slack so tests can
//!   assert them on every enumerated path.

use rand::Rng;

use super::{apply_transition, check_state_map, check_trajectory};
use crate::chains::ReversibleChain;
use crate::martingales::duality::{dot, duality_map, lq_norm, NormContext};
use crate::pow_p;
use crate::seeding::rng_for;
use crate::{Error, Result, CHECK_TOL};

/// A planar image of a Euclidean martingale with norm bookkeeping.
#[derive(Clone, Debug)]
pub struct HilbertReduction {
    /// The reduced sequence `N_0 .. N_T`.
    pub n_seq: Vec<[f64; 2]>,
    /// Worst `|‖N_t‖ − ‖M_t‖|` over all steps.
    pub norm_error: f64,
    /// Worst `|‖N_{t+1} − N_t‖ − ‖M_{t+1} − M_t‖|` over all steps.
    pub step_error: f64,
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|&a| a * a).sum::<f64>().sqrt()
}

fn plane_norm(v: [f64; 2]) -> f64 {
    (v[0] * v[0] + v[1] * v[1]).sqrt()
}

/// `a` along the previous direction, `b` across it, in the frame of
/// `n_prev`; a zero previous point uses the fixed frame `(1,0)`, `(0,1)`.
fn place(n_prev: [f64; 2], a: f64, b: f64) -> [f64; 2] {
    let norm = plane_norm(n_prev);
    if norm > 0.0 {
        let u = [n_prev[0] / norm, n_prev[1] / norm];
        [a * u[0] - b * u[1], a * u[1] + b * u[0]]
    } else {
        [a, b]
    }
}

fn coin(seed: u64, t: usize) -> f64 {
    if rng_for(seed, "reduce-coin", t as u64).gen::<bool>() {
        1.0
    } else {
        -1.0
    }
}

/// Plane-valued copy of a Euclidean martingale, norm- and step-exact.
///
/// `m_seq` is the raw vector sequence `M_0 .. M_T` (any dimension). Coins are
/// derived from `(coin_seed, t)`, so a longer sequence reproduces the
/// reduction of its prefixes.
pub fn reduce_dimension_hilbert(m_seq: &[Vec<f64>], coin_seed: u64) -> Result<HilbertReduction> {
    if m_seq.is_empty() {
        return Err(Error::InvalidParameter("empty martingale sequence".into()));
    }
    let dim = m_seq[0].len();
    for (t, v) in m_seq.iter().enumerate() {
        if v.len() != dim {
            return Err(Error::InvalidParameter(format!(
                "step {t} has dimension {}, step 0 has {dim}",
                v.len()
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NormInconsistency {
                step: t,
                msg: "non-finite value".into(),
            });
        }
    }
    let norms: Vec<f64> = m_seq.iter().map(|v| l2(v)).collect();
    let mut n_seq = vec![[norms[0], 0.0]];
    let mut norm_error = 0.0f64;
    let mut step_error = 0.0f64;
    for t in 0..m_seq.len() - 1 {
        let a = if norms[t] > 0.0 {
            dot(&m_seq[t + 1], &m_seq[t]) / norms[t]
        } else {
            0.0
        };
        let b2 = norms[t + 1] * norms[t + 1] - a * a;
        // Cauchy–Schwarz makes b² ≥ 0 in exact arithmetic; anything beyond
        // rounding noise means the input was not a coherent vector sequence.
        if b2 < -CHECK_TOL * (1.0 + norms[t + 1] * norms[t + 1]) {
            return Err(Error::NormInconsistency {
                step: t + 1,
                msg: format!("cross component squared = {b2}"),
            });
        }
        let b = coin(coin_seed, t + 1) * b2.max(0.0).sqrt();
        let next = place(n_seq[t], a, b);
        norm_error = norm_error.max((plane_norm(next) - norms[t + 1]).abs());
        let dn = [next[0] - n_seq[t][0], next[1] - n_seq[t][1]];
        let dm: Vec<f64> = m_seq[t + 1]
            .iter()
            .zip(&m_seq[t])
            .map(|(&x, &y)| x - y)
            .collect();
        step_error = step_error.max((plane_norm(dn) - l2(&dm)).abs());
        n_seq.push(next);
    }
    Ok(HilbertReduction {
        n_seq,
        norm_error,
        step_error,
    })
}

/// The same reduction from norm data alone: `norms[t] = ‖M_t‖` and
/// `steps[t] = ‖M_{t+1} − M_t‖`. The parallel component is recovered by the
/// law of cosines, so this variant can — and does — detect norm data that no
/// vector sequence realizes: each step must satisfy the triangle inequality
/// `|‖M_{t+1}‖ − ‖M_t‖| ≤ ‖ΔM_t‖ ≤ ‖M_{t+1}‖ + ‖M_t‖`.
pub fn reduce_dimension_hilbert_from_norms(
    norms: &[f64],
    steps: &[f64],
    coin_seed: u64,
) -> Result<HilbertReduction> {
    if norms.is_empty() || steps.len() + 1 != norms.len() {
        return Err(Error::InvalidParameter(format!(
            "{} norms with {} steps; need one step between consecutive norms",
            norms.len(),
            steps.len()
        )));
    }
    if let Some(&bad) = norms
        .iter()
        .chain(steps)
        .find(|&&x| !x.is_finite() || x < 0.0)
    {
        return Err(Error::InvalidParameter(format!(
            "norms must be finite and ≥ 0, got {bad}"
        )));
    }
    let mut n_seq = vec![[norms[0], 0.0]];
    let mut norm_error = 0.0f64;
    let mut step_error = 0.0f64;
    for t in 0..steps.len() {
        let tol = CHECK_TOL * (1.0 + norms[t] + norms[t + 1] + steps[t]);
        if (norms[t + 1] - norms[t]).abs() > steps[t] + tol
            || steps[t] > norms[t + 1] + norms[t] + tol
        {
            return Err(Error::NormInconsistency {
                step: t + 1,
                msg: format!(
                    "no triangle with sides ‖M_t‖ = {}, ‖M_(t+1)‖ = {}, step = {}",
                    norms[t],
                    norms[t + 1],
                    steps[t]
                ),
            });
        }
        let (a, b2) = if norms[t] > 0.0 {
            let a = (norms[t] * norms[t] + norms[t + 1] * norms[t + 1] - steps[t] * steps[t])
                / (2.0 * norms[t]);
            (a, norms[t + 1] * norms[t + 1] - a * a)
        } else {
            (0.0, norms[t + 1] * norms[t + 1])
        };
        let b = coin(coin_seed, t + 1) * b2.max(0.0).sqrt();
        let next = place(n_seq[t], a, b);
        norm_error = norm_error.max((plane_norm(next) - norms[t + 1]).abs());
        let dn = [next[0] - n_seq[t][0], next[1] - n_seq[t][1]];
        step_error = step_error.max((plane_norm(dn) - steps[t]).abs());
        n_seq.push(next);
    }
    Ok(HilbertReduction {
        n_seq,
        norm_error,
        step_error,
    })
}

/// The increment-budget constant `K = 2C + 2p + p²/2` certified by the
/// smooth reduction.
///
/// Where it comes from: the squared increment of `N` splits into the
/// parallel and perpendicular parts. The parallel part is
/// `(p/2)²(x − δ)²/‖N‖²` with `x` the clipped duality pairing and `δ` its
/// conditional mean; `(x − δ)² ≤ 2x² + 2δ²`, the indicator gives
/// `x²/‖N‖² ≤ ‖ΔM‖^p`, and `|δ| ≤ min(E, ‖N‖²)` gives `δ²/‖N‖² ≤ E`, for a
/// total of `(p²/2)(‖ΔM‖^p + E)`. The perpendicular part is
/// `(√(C+p)‖ΔM‖^{p/2} + √p E^{1/2})² ≤ 2(C+p)‖ΔM‖^p + 2pE`. Adding the two
/// budgets and taking the larger coefficient yields `K`.
pub fn smooth_reduction_constant(ctx: &NormContext) -> f64 {
    2.0 * ctx.c + 2.0 * ctx.p + ctx.p * ctx.p / 2.0
}

/// A planar martingale tracking an `l_q` chain martingale from above.
#[derive(Clone, Debug)]
pub struct SmoothReduction {
    /// The reduced sequence `N_0 .. N_T`, `N_0 = (0, 0)`.
    pub n_seq: Vec<[f64; 2]>,
    /// The constant in claim (ii), `2C + 2p + p²/2` for the context used.
    pub k: f64,
    /// Worst observed `‖M_t − M_0‖^p − ‖N_t‖²` (claim (i); ≤ 0 means it held).
    pub claim_i_max_violation: f64,
    /// Worst observed `‖ΔN_t‖² − K(‖ΔM_t‖^p + E[‖ΔM_t‖^p|F_{t−1}])`
    /// (claim (ii); ≤ 0 means it held).
    pub claim_ii_max_violation: f64,
    /// Worst `‖E[N_t | F_{t−1}] − N_{t−1}‖` over the path, with the
    /// conditional mean taken exactly over chain successors and both coin
    /// values.
    pub martingale_defect: f64,
}

/// One step of the smooth reduction in the frame of `n_prev`:
/// `par_num = (p/2)(x − δ)` scales the parallel part, `w` is the
/// perpendicular magnitude, `eps = ±1` the coin. A zero previous point drops
/// the parallel term and sends the perpendicular part along `(0, 1)`.
fn smooth_next(n_prev: [f64; 2], par_num: f64, w: f64, eps: f64) -> [f64; 2] {
    let norm2 = n_prev[0] * n_prev[0] + n_prev[1] * n_prev[1];
    if norm2 > 0.0 {
        let factor = 1.0 + par_num / norm2;
        let norm = norm2.sqrt();
        let perp = [-n_prev[1] / norm, n_prev[0] / norm];
        [
            n_prev[0] * factor + eps * w * perp[0],
            n_prev[1] * factor + eps * w * perp[1],
        ]
    } else {
        [0.0, eps * w]
    }
}

/// Reduces the chain martingale of `f` along a trajectory to the plane.
///
/// The forward martingale is centered (`M_0 = 0`, increments
/// `f(Z_t) − (Pf)(Z_{t−1})`), its one-step conditional laws are computed
/// exactly from the transition matrix, and the planar process follows the
/// recursion
///
/// ```text
/// N_t = N_{t−1} (1 + (p/2) (⟨J_{M_{t−1}}, ΔM_t⟩ 1_A − δ_{t−1}) / ‖N_{t−1}‖²)
///       + ε_t N_{t−1}^⊥ (√(C+p) ‖ΔM_t‖^{p/2} + √p E[‖ΔM_t‖^p | F_{t−1}]^{1/2})
/// ```
///
/// where `A` is the event `‖ΔM_t‖^p ≤ ‖N_{t−1}‖²`, `δ_{t−1}` the exact
/// conditional mean of the clipped pairing (so `N` is a martingale), and
/// `ε_t` a fair coin derived from `(coin_seed, t)`. Claim slacks and the
/// exact conditional-mean defect are recorded for every step.
pub fn reduce_dimension_smooth(
    chain: &ReversibleChain,
    f: &[Vec<f64>],
    trajectory: &[usize],
    ctx: &NormContext,
    coin_seed: u64,
) -> Result<SmoothReduction> {
    let dim = check_state_map(chain, f)?;
    check_trajectory(chain, trajectory)?;
    let (p, q) = (ctx.p, ctx.q);
    let k = smooth_reduction_constant(ctx);
    let pf = apply_transition(chain, f);
    let mut m_prev = vec![0.0; dim]; // centered: M_0 = 0
    let mut n_seq = vec![[0.0f64, 0.0]];
    let mut claim_i = 0.0f64; // t = 0: 0 ≤ 0
    let mut claim_ii = f64::NEG_INFINITY;
    let mut defect = 0.0f64;
    for t in 1..trajectory.len() {
        let (z_prev, z_cur) = (trajectory[t - 1], trajectory[t]);
        let n_prev = n_seq[t - 1];
        let n2 = n_prev[0] * n_prev[0] + n_prev[1] * n_prev[1];
        let j = duality_map(&m_prev, ctx);
        let dm: Vec<f64> = f[z_cur]
            .iter()
            .zip(&pf[z_prev])
            .map(|(&a, &b)| a - b)
            .collect();
        let dm_p = pow_p(lq_norm(&dm, q), p);
        let x = if dm_p <= n2 { dot(&j, &dm) } else { 0.0 };
        // Exact conditional quantities at Z_{t−1}: the p-th moment of the
        // increment and the mean of the clipped pairing.
        let mut e_t = 0.0f64;
        let mut delta = 0.0f64;
        for &(z1, pr) in chain.row(z_prev) {
            let inc: Vec<f64> = f[z1]
                .iter()
                .zip(&pf[z_prev])
                .map(|(&a, &b)| a - b)
                .collect();
            let inc_p = pow_p(lq_norm(&inc, q), p);
            e_t += pr * inc_p;
            if inc_p <= n2 {
                delta += pr * dot(&j, &inc);
            }
        }
        let par_num = (p / 2.0) * (x - delta);
        let w = (ctx.c + p).sqrt() * dm_p.sqrt() + p.sqrt() * e_t.sqrt();
        let eps = coin(coin_seed, t);
        let next = smooth_next(n_prev, par_num, w, eps);

        // Exact conditional mean over successors and both coin values.
        let mut mean = [0.0f64, 0.0];
        for &(z1, pr) in chain.row(z_prev) {
            let inc: Vec<f64> = f[z1]
                .iter()
                .zip(&pf[z_prev])
                .map(|(&a, &b)| a - b)
                .collect();
            let inc_p = pow_p(lq_norm(&inc, q), p);
            let xs = if inc_p <= n2 { dot(&j, &inc) } else { 0.0 };
            let pn = (p / 2.0) * (xs - delta);
            let ws = (ctx.c + p).sqrt() * inc_p.sqrt() + p.sqrt() * e_t.sqrt();
            let up = smooth_next(n_prev, pn, ws, 1.0);
            let down = smooth_next(n_prev, pn, ws, -1.0);
            mean[0] += pr * 0.5 * (up[0] + down[0]);
            mean[1] += pr * 0.5 * (up[1] + down[1]);
        }
        defect = defect.max(plane_norm([mean[0] - n_prev[0], mean[1] - n_prev[1]]));

        for (mp, &d) in m_prev.iter_mut().zip(&dm) {
            *mp += d;
        }
        let n_next2 = next[0] * next[0] + next[1] * next[1];
        claim_i = claim_i.max(pow_p(lq_norm(&m_prev, q), p) - n_next2);
        let dn = [next[0] - n_prev[0], next[1] - n_prev[1]];
        claim_ii = claim_ii.max(dn[0] * dn[0] + dn[1] * dn[1] - k * (dm_p + e_t));
        n_seq.push(next);
    }
    Ok(SmoothReduction {
        n_seq,
        k,
        claim_i_max_violation: claim_i,
        claim_ii_max_violation: if claim_ii.is_finite() { claim_ii } else { 0.0 },
        martingale_defect: defect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::WeightedGraph;

    fn triangle() -> (ReversibleChain, Vec<Vec<f64>>) {
        let g = WeightedGraph::new(3, vec![(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
        let space = g.shortest_path_metric("triangle").unwrap();
        let chain = ReversibleChain::random_walk(&g, 0.5).unwrap();
        let f = (0..3).map(|i| space.dist_row(i).to_vec()).collect();
        (chain, f)
    }

    /// All trajectories of positive probability with horizon `t`.
    fn all_paths(chain: &ReversibleChain, t: usize) -> Vec<Vec<usize>> {
        let mut paths = Vec::new();
        let mut stack: Vec<Vec<usize>> = (0..chain.n()).map(|z| vec![z]).collect();
        while let Some(path) = stack.pop() {
            if path.len() == t + 1 {
                paths.push(path);
                continue;
            }
            let last = *path.last().unwrap();
            for &(z1, _) in chain.row(last) {
                let mut next = path.clone();
                next.push(z1);
                stack.push(next);
            }
        }
        paths
    }

    #[test]
    fn planar_input_is_reproduced_up_to_rotation() {
        let m = vec![
            vec![1.0, 0.0],
            vec![1.0, 2.0],
            vec![-0.5, 2.0],
            vec![0.0, 0.0],
        ];
        for seed in [0u64, 1, 99] {
            let red = reduce_dimension_hilbert(&m, seed).unwrap();
            assert!(red.norm_error <= 1e-9, "norm error {}", red.norm_error);
            assert!(red.step_error <= 1e-9, "step error {}", red.step_error);
        }
    }

    #[test]
    fn random_high_dimensional_walk_preserves_norms() {
        use rand::Rng;
        let mut rng = crate::seeding::rng_for(31, "hilbert-walk", 0);
        let mut m = vec![vec![0.0; 5]];
        for _ in 0..20 {
            let prev = m.last().unwrap().clone();
            m.push(prev.iter().map(|&v| v + rng.gen_range(-1.0..1.0)).collect());
        }
        let red = reduce_dimension_hilbert(&m, 7).unwrap();
        assert_eq!(red.n_seq.len(), 21);
        assert!(red.norm_error <= 1e-9 && red.step_error <= 1e-9);
    }

    #[test]
    fn parallel_component_averages_to_previous_norm() {
        // E[⟨M_{t+1}, M_t⟩/‖M_t‖ | F_t] = ‖M_t‖ when the conditional mean of
        // M_{t+1} is M_t — checked with exact successor enumeration.
        let (chain, f) = triangle();
        let pf = apply_transition(&chain, &f);
        let prefix = [0usize, 1, 1, 2];
        let mut m = f[prefix[0]].clone();
        for s in 1..prefix.len() {
            for (mi, (&fv, &pv)) in m
                .iter_mut()
                .zip(f[prefix[s]].iter().zip(&pf[prefix[s - 1]]))
            {
                *mi += fv - pv;
            }
        }
        let norm = l2(&m);
        assert!(norm > 0.0);
        let last = *prefix.last().unwrap();
        let mut mean_a = 0.0;
        for &(z1, pr) in chain.row(last) {
            let m_next: Vec<f64> = m
                .iter()
                .zip(f[z1].iter().zip(&pf[last]))
                .map(|(&mi, (&fv, &pv))| mi + fv - pv)
                .collect();
            mean_a += pr * dot(&m_next, &m) / norm;
        }
        assert!((mean_a - norm).abs() <= 1e-9, "{mean_a} vs {norm}");
    }

    #[test]
    fn norm_skeleton_detects_triangle_violation() {
        let err =
            reduce_dimension_hilbert_from_norms(&[0.0, 1.0, 5.0], &[1.0, 1.0], 3).unwrap_err();
        match err {
            Error::NormInconsistency { step, .. } => assert_eq!(step, 2),
            other => panic!("unexpected: {other}"),
        }
        // A consistent skeleton reproduces its own data.
        let red = reduce_dimension_hilbert_from_norms(&[0.0, 1.0, 1.5], &[1.0, 2.0], 3).unwrap();
        assert!(red.norm_error <= 1e-9 && red.step_error <= 1e-9);
    }

    #[test]
    fn coin_seed_controls_the_reflection() {
        let m = vec![
            vec![0.0, 0.0, 0.0],
            vec![1.0, 1.0, 0.0],
            vec![1.0, 2.0, 2.0],
        ];
        let a = reduce_dimension_hilbert(&m, 5).unwrap();
        let b = reduce_dimension_hilbert(&m, 5).unwrap();
        assert_eq!(a.n_seq, b.n_seq);
        let flipped = (0..64).any(|s| reduce_dimension_hilbert(&m, s).unwrap().n_seq != a.n_seq);
        assert!(flipped, "no coin seed within 64 changed the reduction");
    }

    #[test]
    fn smooth_constant_martingale_stays_at_origin() {
        let (chain, _) = triangle();
        let f = vec![vec![3.0, -1.0]; 3];
        let ctx = NormContext::new(2.0).unwrap();
        let red = reduce_dimension_smooth(&chain, &f, &[0, 1, 2, 0], &ctx, 11).unwrap();
        assert!(red.n_seq.iter().all(|v| v == &[0.0, 0.0]));
        assert!(red.claim_i_max_violation <= 0.0);
        assert!(red.claim_ii_max_violation <= 0.0);
        assert_eq!(red.martingale_defect, 0.0);
    }

    #[test]
    fn smooth_k_value_hilbert_case() {
        // q = 2: C = 1, p = 2 → K = 2 + 4 + 2 = 8.
        let ctx = NormContext::new(2.0).unwrap();
        assert_eq!(smooth_reduction_constant(&ctx), 8.0);
    }

    #[test]
    fn smooth_claims_hold_on_every_enumerated_path() {
        let (chain, f) = triangle();
        for q in [2.0, 4.0] {
            let ctx = NormContext::new(q).unwrap();
            let paths = all_paths(&chain, 4);
            assert_eq!(paths.len(), 3usize.pow(5)); // lazy walk: full support
            for path in &paths {
                let red = reduce_dimension_smooth(&chain, &f, path, &ctx, 29).unwrap();
                let scale = 1.0 + red.n_seq.iter().map(|v| plane_norm(*v)).fold(0.0, f64::max);
                assert!(
                    red.claim_i_max_violation <= CHECK_TOL * scale,
                    "q={q} path {path:?}: claim (i) violated by {}",
                    red.claim_i_max_violation
                );
                assert!(
                    red.claim_ii_max_violation <= CHECK_TOL * scale,
                    "q={q} path {path:?}: claim (ii) violated by {}",
                    red.claim_ii_max_violation
                );
                assert!(red.martingale_defect <= 1e-9);
            }
        }
    }

    #[test]
    fn smooth_reduction_is_seed_reproducible() {
        let (chain, f) = triangle();
        let ctx = NormContext::new(4.0).unwrap();
        let path = [0usize, 1, 2, 2, 0, 1, 0];
        let a = reduce_dimension_smooth(&chain, &f, &path, &ctx, 101).unwrap();
        let b = reduce_dimension_smooth(&chain, &f, &path, &ctx, 101).unwrap();
        assert_eq!(a.n_seq, b.n_seq);
        let c = reduce_dimension_smooth(&chain, &f, &path, &ctx, 102).unwrap();
        assert_ne!(a.n_seq, c.n_seq);
    }

    #[test]
    fn smooth_rejects_broken_trajectories() {
        let (chain, f) = triangle();
        let ctx = NormContext::new(2.0).unwrap();
        assert!(matches!(
            reduce_dimension_smooth(&chain, &f, &[0, 9], &ctx, 0),
            Err(Error::InvalidParameter(_))
        ));
        let g = WeightedGraph::new(3, vec![(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
        let pure = ReversibleChain::random_walk(&g, 0.0).unwrap();
        assert!(matches!(
            reduce_dimension_smooth(&pure, &f, &[0, 0], &ctx, 0),
            Err(Error::ImpossibleTransition { step: 1, .. })
        ));
    }
}
