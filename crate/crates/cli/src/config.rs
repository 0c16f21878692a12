//! Run configuration: one flat, fully validated record per invocation.
//!
//! Every command shares the same flag surface; which fields are required is
//! a property of the command and is enforced by [`RunConfig::validate`]
//! before any computation starts. The record is what gets hashed into the
//! manifest, and deserializing one rejects unknown keys so a stale or
//! hand-edited config cannot silently carry fields this binary ignores.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Everything a single run depends on. Serialized verbatim into the
/// manifest; the hash is over the canonical JSON encoding.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Subcommand name (`gen`, `partition`, `embed`, `mtype`, `enflo`,
    /// `mgverify`, `tailverify`).
    pub command: String,
    /// Space spec: generator form `kind:params` or `file:PATH`.
    pub space: Option<String>,
    /// Dyadic scale range `j0:j1`, inclusive.
    pub scales: Option<String>,
    /// Horizon list.
    pub t: Vec<usize>,
    /// Moment exponent.
    pub p: f64,
    /// Norm exponent for martingale checks.
    pub q: Option<f64>,
    /// Monte-Carlo trials.
    pub trials: usize,
    /// Root seed; every stream in the run derives from it.
    pub seed: u64,
    /// Output directory.
    pub out: String,
    /// Override for the exact-enumeration size cap.
    pub exact_cap: Option<usize>,
    /// `csv` or `json`.
    pub format: String,
    /// Partition / threshold scale.
    pub tau: Option<f64>,
    /// Snowflake exponent or padding parameter.
    pub eps: Option<f64>,
    /// Embedding coordinates per scale.
    pub m: Option<usize>,
    /// Walk holding probability.
    pub laziness: f64,
    /// Whether `embed` audits the map pair by pair.
    pub audit: bool,
    /// Point-map file for `enflo`.
    pub map: Option<String>,
}

/// Parses a horizon spec: `a..b` (inclusive), a comma list, or one value.
pub fn parse_t_list(spec: &str) -> Result<Vec<usize>, CliError> {
    let bad = |msg: String| CliError::Config(format!("bad --t {spec:?}: {msg}"));
    let parse_one = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| bad(format!("{s:?} is not an integer")))
    };
    if let Some((a, b)) = spec.split_once("..") {
        let (a, b) = (parse_one(a)?, parse_one(b)?);
        if a > b {
            return Err(bad(format!("range {a}..{b} is empty")));
        }
        return Ok((a..=b).collect());
    }
    spec.split(',').map(parse_one).collect()
}

/// Parses a scale spec `j0:j1` into the inclusive exponent list.
pub fn parse_scales(spec: &str) -> Result<Vec<i32>, CliError> {
    let bad = |msg: String| CliError::Config(format!("bad --scales {spec:?}: {msg}"));
    let (a, b) = spec
        .split_once(':')
        .ok_or_else(|| bad("expected j0:j1".into()))?;
    let parse_one = |s: &str| {
        s.trim()
            .parse::<i32>()
            .map_err(|_| bad(format!("{s:?} is not an integer")))
    };
    let (a, b) = (parse_one(a)?, parse_one(b)?);
    if a > b {
        return Err(bad(format!("range {a}:{b} is empty")));
    }
    Ok((a..=b).collect())
}

impl RunConfig {
    /// Checks every field against its documented range and the per-command
    /// requirements. Nothing is computed before this passes.
    pub fn validate(&self) -> Result<(), CliError> {
        let err = |msg: String| Err(CliError::Config(msg));
        if !(self.p.is_finite() && self.p >= 1.0) {
            return err(format!("--p {} must be a finite number ≥ 1", self.p));
        }
        if let Some(q) = self.q {
            if !(q.is_finite() && q > 1.0) {
                return err(format!("--q {q} must be a finite number > 1"));
            }
        }
        if self.trials == 0 {
            return err("--trials must be positive".into());
        }
        if !(0.0..1.0).contains(&self.laziness) {
            return err(format!("--laziness {} outside [0, 1)", self.laziness));
        }
        if self.format != "csv" && self.format != "json" {
            return err(format!("--format {:?} must be csv or json", self.format));
        }
        if let Some(cap) = self.exact_cap {
            if cap == 0 {
                return err("--exact-cap must be positive".into());
            }
        }
        if let Some(tau) = self.tau {
            if !(tau.is_finite() && tau > 0.0) {
                return err(format!("--tau {tau} must be positive"));
            }
        }
        if let Some(eps) = self.eps {
            if !(eps.is_finite() && eps > 0.0 && eps <= 0.5) {
                return err(format!("--eps {eps} outside (0, 1/2]"));
            }
        }
        if let Some(m) = self.m {
            if m == 0 {
                return err("--m must be positive".into());
            }
        }
        if self.scales.is_some() {
            parse_scales(self.scales.as_ref().unwrap())?;
        }
        if self.out.is_empty() {
            return err("--out must name a directory".into());
        }
        let need_space = || -> Result<(), CliError> {
            if self.space.is_none() {
                return Err(CliError::Config(format!(
                    "{} requires --space",
                    self.command
                )));
            }
            Ok(())
        };
        match self.command.as_str() {
            "gen" => need_space()?,
            "partition" => {
                need_space()?;
                if self.tau.is_none() {
                    return err("partition requires --tau (the partition scale)".into());
                }
            }
            "embed" => {
                need_space()?;
                match (self.tau, self.eps) {
                    (Some(_), Some(_)) => return err("embed takes --tau or --eps, not both".into()),
                    (None, None) => {
                        return err(
                            "embed requires --tau (threshold map) or --eps (snowflake map)".into(),
                        )
                    }
                    (None, Some(_)) if self.audit => {
                        return err("--audit applies to threshold maps (--tau)".into())
                    }
                    _ => {}
                }
            }
            "mtype" => {
                need_space()?;
                if self.t.is_empty() {
                    return err("mtype requires --t (horizon list)".into());
                }
            }
            "enflo" => need_space()?,
            "mgverify" => {
                need_space()?;
                if self.t.iter().any(|&t| t == 0 || t % 2 != 0) {
                    return err(format!(
                        "mgverify horizons must be even and positive, got {:?}",
                        self.t
                    ));
                }
            }
            "tailverify" => {
                need_space()?;
                if self.scales.is_none() {
                    return err("tailverify requires --scales j0:j1".into());
                }
                let t = *self.t.first().unwrap_or(&0);
                if t == 0 || t % 2 != 0 {
                    return err(format!(
                        "tailverify requires one even --t, got {:?}",
                        self.t
                    ));
                }
            }
            other => return err(format!("unknown command {other:?}")),
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut h = Sha256::new();
        h.update(json.as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
