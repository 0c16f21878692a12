//! The seven experiment commands.
//!
//! Each command resolves its space, runs the relevant library operations,
//! asserts the invariants those operations advertise, and writes its
//! report files atomically into the output directory. Invariant failures
//! surface as [`CliError::Invariant`] (exit 2), everything wrong with the
//! inputs as [`CliError::Config`] (exit 3).

use std::fs;
use std::path::Path;

use mtype::chains::{
    enflo_ratio, markov_type_ratio, one_step_moment, RatioMethod, ReversibleChain,
    DEFAULT_EXACT_CAP,
};
use mtype::embeddings::{audit_threshold, build_snowflake_map, build_threshold_map, distortion};
use mtype::martingales::{
    conditional_mean_defect, decompose, dominating_sequences, pisier_check,
    reduce_dimension_hilbert, reduce_dimension_smooth, sample_martingale_paths, NormContext,
};
use mtype::partitions::padding_report;
use mtype::seeding::{derive_seed, rng_for};
use mtype::spaces::{generate_with_cap, FiniteMetricSpace, SpaceKind, WeightedGraph};
use mtype::tailcheck::{run_family_experiment, tail_report};

use crate::config::{parse_scales, RunConfig};
use crate::output::write_atomic;
use crate::CliError;

/// Resolves `--space`: either a generator spec (`grid:8,8`) or `file:PATH`
/// pointing at a space JSON dump or a graph edge list.
fn load_space(cfg: &RunConfig) -> Result<FiniteMetricSpace, CliError> {
    let spec = cfg.space.as_deref().expect("validated");
    if let Some(path) = spec.strip_prefix("file:") {
        let text =
            fs::read_to_string(path).map_err(|e| CliError::Config(format!("{path}: {e}")))?;
        let space = if text.trim_start().starts_with('{') {
            FiniteMetricSpace::from_json(&text)
        } else {
            WeightedGraph::parse(&text).and_then(|g| g.shortest_path_metric(path))
        };
        return space.map_err(|e| CliError::Config(format!("{path}: {e}")));
    }
    let kind: SpaceKind = spec.parse().map_err(CliError::from)?;
    let cap = cfg.exact_cap.unwrap_or(mtype::spaces::DEFAULT_MAX_POINTS);
    generate_with_cap(kind, derive_seed(cfg.seed, "space-gen", 0), cap).map_err(CliError::from)
}

fn walk(cfg: &RunConfig, space: &FiniteMetricSpace) -> Result<ReversibleChain, CliError> {
    ReversibleChain::uniform_neighbor_walk(space, cfg.laziness).map_err(CliError::from)
}

pub fn cmd_gen(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let space = load_space(cfg)?;
    write_atomic(&dir.join("space.json"), space.to_json().as_bytes())
}

pub fn cmd_partition(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let space = load_space(cfg)?;
    let tau = cfg.tau.expect("validated");
    let eps = cfg.eps.unwrap_or(1.0 / 16.0);
    let report = padding_report(&space, tau, eps, cfg.trials, cfg.seed)?;
    if cfg.format == "json" {
        write_atomic(&dir.join("partition.json"), report.to_json().as_bytes())
    } else {
        let mut csv = String::from("point,padded,trials\n");
        for (i, &count) in report.per_point.iter().enumerate() {
            csv.push_str(&format!("{i},{count},{}\n", report.trials));
        }
        write_atomic(&dir.join("partition.csv"), csv.as_bytes())
    }
}

pub fn cmd_embed(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let space = load_space(cfg)?;
    let m = cfg.m.unwrap_or(16);
    if let Some(tau) = cfg.tau {
        let map = build_threshold_map(&space, tau, m, cfg.seed)?;
        write_atomic(&dir.join("embedding.json"), map.to_json().as_bytes())?;
        if cfg.audit {
            let audit = audit_threshold(&space, &map, tau)?;
            let mut csv = String::from("i,j,d,image_dist,ratio\n");
            for row in &audit.rows {
                csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    row.i, row.j, row.d, row.image_dist, row.ratio
                ));
            }
            write_atomic(&dir.join("audit.csv"), csv.as_bytes())?;
            let summary = serde_json::json!({
                "tau": audit.tau,
                "k_emp": audit.k_emp,
                "lip_emp": audit.lip_emp,
                "pairs": audit.rows.len(),
            });
            write_atomic(
                &dir.join("audit_summary.json"),
                summary.to_string().as_bytes(),
            )?;
            if !audit.violations.is_empty() {
                return Err(CliError::Invariant(format!(
                    "threshold map broke its Lipschitz contract on {} pairs (first: {:?})",
                    audit.violations.len(),
                    audit.violations[0]
                )));
            }
        }
        Ok(())
    } else {
        let eps = cfg.eps.expect("validated");
        let map = build_snowflake_map(&space, eps, m, cfg.seed)?;
        write_atomic(&dir.join("embedding.json"), map.to_json().as_bytes())?;
        let rep = distortion(&space, &map)?;
        let summary = serde_json::json!({
            "eps": eps,
            "distortion": rep.value,
            "expansion": rep.expansion,
            "contraction": rep.contraction,
        });
        write_atomic(&dir.join("distortion.json"), summary.to_string().as_bytes())?;
        if !rep.value.is_finite() {
            return Err(CliError::Invariant(format!(
                "snowflake map collapsed a pair ({:?}); its lower bound forbids that",
                rep.coincident
            )));
        }
        Ok(())
    }
}

pub fn cmd_mtype(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let space = load_space(cfg)?;
    let chain = walk(cfg, &space)?;
    let identity: Vec<usize> = (0..space.n()).collect();
    let cap = cfg.exact_cap.unwrap_or(DEFAULT_EXACT_CAP);
    let method = if space.n() <= cap {
        RatioMethod::Exact
    } else {
        RatioMethod::MonteCarlo { trials: cfg.trials }
    };
    let report = markov_type_ratio(&chain, &space, &identity, cfg.p, &cfg.t, method, cfg.seed)?;
    if cfg.format == "json" {
        let text = serde_json::to_string_pretty(&report)
            .map_err(|e| CliError::Config(format!("report serialization: {e}")))?;
        write_atomic(&dir.join("mtype.json"), text.as_bytes())?;
    } else {
        write_atomic(&dir.join("mtype.csv"), report.to_csv().as_bytes())?;
    }
    if let Some(bad) = report.entries.iter().find(|e| !e.ratio.is_finite()) {
        return Err(CliError::Invariant(format!(
            "type ratio at t = {} is not finite",
            bad.t
        )));
    }
    Ok(())
}

pub fn cmd_enflo(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let space = load_space(cfg)?;
    let f: Vec<usize> = match &cfg.map {
        Some(path) => {
            let text =
                fs::read_to_string(path).map_err(|e| CliError::Config(format!("{path}: {e}")))?;
            text.lines()
                .enumerate()
                .filter(|(_, l)| !l.trim().is_empty())
                .map(|(i, l)| {
                    l.trim().parse::<usize>().map_err(|_| {
                        CliError::Config(format!(
                            "{path}: line {}: {l:?} is not a point index",
                            i + 1
                        ))
                    })
                })
                .collect::<Result<_, _>>()?
        }
        None => (0..space.n()).collect(),
    };
    let ratio = enflo_ratio(&space, &f, cfg.p)?;
    let bits = f.len().trailing_zeros();
    let type_constant = ratio.powf(1.0 / cfg.p);
    if cfg.format == "json" {
        let text = serde_json::json!({
            "p": cfg.p,
            "bits": bits,
            "ratio": ratio,
            "type_constant": type_constant,
        })
        .to_string();
        write_atomic(&dir.join("enflo.json"), text.as_bytes())?;
    } else {
        let csv = format!(
            "p,bits,ratio,type_constant\n{},{bits},{ratio},{type_constant}\n",
            cfg.p
        );
        write_atomic(&dir.join("enflo.csv"), csv.as_bytes())?;
    }
    if !ratio.is_finite() {
        return Err(CliError::Invariant("Enflo ratio is not finite".into()));
    }
    Ok(())
}

struct CheckRow {
    check: &'static str,
    value: f64,
    bound: f64,
    pass: bool,
}

fn check(check: &'static str, value: f64, bound: f64) -> CheckRow {
    CheckRow {
        check,
        value,
        bound,
        pass: value.is_finite() && value <= bound,
    }
}

pub fn cmd_mgverify(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let space = load_space(cfg)?;
    let chain = walk(cfg, &space)?;
    let n = space.n();
    let q = cfg.q.unwrap_or(2.0);
    let ctx = NormContext::new(q)?;
    let identity: Vec<usize> = (0..n).collect();
    // Distance-row coordinates scaled to be 1-Lipschitz into l_q: each
    // coordinate is 1-Lipschitz, so dividing by n^{1/q} bounds the q-norm of
    // a difference by the distance.
    let scale = 1.0 / (n as f64).powf(1.0 / q);
    let f: Vec<Vec<f64>> = (0..n)
        .map(|i| space.dist_row(i).iter().map(|&d| d * scale).collect())
        .collect();
    let t_max = *cfg.t.iter().max().expect("validated");

    let mut id_err = 0.0f64;
    let mut dom_margin = f64::NEG_INFINITY;
    let mut alpha_sums = Vec::with_capacity(cfg.trials);
    let mut claim_i = 0.0f64;
    let mut claim_ii = 0.0f64;
    let mut smooth_defect = 0.0f64;
    let mut hilbert_norm = 0.0f64;
    let mut hilbert_step = 0.0f64;
    for trial in 0..cfg.trials {
        let mut rng = rng_for(cfg.seed, "mgverify-traj", trial as u64);
        let traj = chain.trajectory(t_max, &mut rng);
        for &t in &cfg.t {
            let mut trace = decompose(&chain, &f, q, &traj[..=t])?;
            id_err = id_err.max(trace.identity_error());
            let (alpha, beta) =
                dominating_sequences(&chain, &space, &identity, &traj[..=t], ctx.p)?;
            if t == t_max {
                alpha_sums.push(alpha.iter().map(|&a| a.powf(ctx.p)).sum::<f64>());
            }
            trace.attach_dominators(alpha, beta)?;
            dom_margin = dom_margin.max(trace.domination_margin()?);
            if t == t_max {
                let red = reduce_dimension_hilbert(
                    &trace.m_seq,
                    derive_seed(cfg.seed, "coin", trial as u64),
                )?;
                hilbert_norm = hilbert_norm.max(red.norm_error);
                hilbert_step = hilbert_step.max(red.step_error);
                let sm = reduce_dimension_smooth(
                    &chain,
                    &f,
                    &traj[..=t],
                    &ctx,
                    derive_seed(cfg.seed, "smooth-coin", trial as u64),
                )?;
                claim_i = claim_i.max(sm.claim_i_max_violation);
                claim_ii = claim_ii.max(sm.claim_ii_max_violation);
                smooth_defect = smooth_defect.max(sm.martingale_defect);
            }
        }
    }
    let (fwd_defect, bwd_defect) = conditional_mean_defect(&chain, &f)?;
    // Stationarity budget: each dominator term has exact stationary mean
    // 2^{p−1}·2·E d^p, so the sum over t/2 terms targets 2^{p−1}·t·E d^p.
    let expected =
        2.0f64.powf(ctx.p - 1.0) * t_max as f64 * one_step_moment(&chain, &space, &identity, ctx.p);
    let mean = alpha_sums.iter().sum::<f64>() / alpha_sums.len() as f64;
    let var = alpha_sums
        .iter()
        .map(|&x| (x - mean) * (x - mean))
        .sum::<f64>()
        / (alpha_sums.len().max(2) - 1) as f64;
    let se = (var / alpha_sums.len() as f64).sqrt();
    let budget_z = if se > 0.0 {
        (mean - expected).abs() / se
    } else {
        0.0
    };
    let paths = sample_martingale_paths(&chain, &f, t_max, cfg.trials, cfg.seed)?;
    let pisier = pisier_check(&paths, &ctx)?;

    let rows = vec![
        check("decomposition_identity_max_error", id_err, 1e-9),
        check("forward_mean_defect", fwd_defect, 1e-9),
        check("backward_mean_defect", bwd_defect, 1e-9),
        check("domination_margin", dom_margin, 1e-9),
        check("alpha_budget_z_score", budget_z, 3.0),
        check("smooth_claim_i_violation", claim_i, 1e-9),
        check("smooth_claim_ii_violation", claim_ii, 1e-9),
        check("smooth_martingale_defect", smooth_defect, 1e-9),
        check("hilbert_norm_error", hilbert_norm, 1e-9),
        check("hilbert_step_error", hilbert_step, 1e-9),
        // Monte-Carlo band: the ratio concentrates under the smoothness
        // constant; 25% headroom covers sampling noise at modest trial counts.
        check("pisier_ratio", pisier.ratio, ctx.c.max(1.0) * 1.25),
    ];
    if cfg.format == "json" {
        let arr: Vec<serde_json::Value> = rows
            .iter()
            .map(|r| {
                serde_json::json!({
                    "check": r.check, "value": r.value, "bound": r.bound, "pass": r.pass,
                })
            })
            .collect();
        write_atomic(
            &dir.join("mgverify.json"),
            serde_json::to_string_pretty(&arr)
                .expect("serializes")
                .as_bytes(),
        )?;
    } else {
        let mut csv = String::from("check,value,bound,pass\n");
        for r in &rows {
            csv.push_str(&format!("{},{},{},{}\n", r.check, r.value, r.bound, r.pass));
        }
        write_atomic(&dir.join("mgverify.csv"), csv.as_bytes())?;
    }
    let failed: Vec<&str> = rows.iter().filter(|r| !r.pass).map(|r| r.check).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Invariant(format!(
            "checks failed: {}",
            failed.join(", ")
        )))
    }
}

pub fn cmd_tailverify(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let space = load_space(cfg)?;
    let chain = walk(cfg, &space)?;
    let scales = parse_scales(cfg.scales.as_deref().expect("validated"))?;
    let t = cfg.t[0];
    let m = cfg.m.unwrap_or(16);
    let exp = run_family_experiment(&space, &chain, &scales, t, cfg.trials, cfg.p, m, cfg.seed)?;
    let rep = tail_report(&exp, None)?;
    if cfg.format == "json" {
        let text = serde_json::json!({
            "p": rep.p,
            "trials": rep.trials,
            "scales": rep.scales,
            "y_grid": rep.y_grid,
            "sup_curve": rep.sup_curve,
            "scale_curves": rep.scale_curves,
            "lhs": rep.lhs,
            "rhs": rep.rhs,
            "ratio": rep.ratio,
            "K_emp": rep.k_emp,
        })
        .to_string();
        write_atomic(&dir.join("tail.json"), text.as_bytes())?;
    } else {
        write_atomic(&dir.join("tail.csv"), rep.to_csv().as_bytes())?;
    }
    write_atomic(
        &dir.join("tail_summary.json"),
        rep.summary_json().as_bytes(),
    )?;
    if exp.domination_violations > 0 {
        return Err(CliError::Invariant(format!(
            "dominating sequence failed on {} steps (worst margin {})",
            exp.domination_violations, exp.domination_margin
        )));
    }
    let (a, b) = (exp.alpha_budget(), exp.beta_budget());
    if !a.within(3.0) || !b.within(3.0) {
        return Err(CliError::Invariant(format!(
            "stationarity budget off by more than 3 standard errors \
             (alpha {:+.4} ± {:.4}, beta {:+.4} ± {:.4})",
            a.observed - a.expected,
            a.std_error,
            b.observed - b.expected,
            b.std_error
        )));
    }
    if rep.inconsistent_budget {
        return Err(CliError::Invariant(
            "tail mass observed with a zero dominating budget".into(),
        ));
    }
    Ok(())
}
