//! `mtype` — seeded, reproducible experiments on finite metric spaces.
//!
//! Every subcommand resolves one [`config::RunConfig`], validates it fully,
//! runs, and leaves report files plus a `manifest.json` (config, config
//! hash, versions, wall time) in the output directory. Report files are
//! byte-identical across reruns with the same config; the manifest's wall
//! time is the only field allowed to differ.
//!
//! Exit codes: 0 on success, 2 when an asserted mathematical invariant
//! failed, 3 for configuration or input errors.

mod commands;
mod config;
mod output;

use std::fmt;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use config::{parse_t_list, RunConfig};

/// Failure classes, one per nonzero exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable or unparsable inputs, unwritable outputs.
    Config(String),
    /// A mathematical invariant asserted by a command did not hold.
    Invariant(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "{msg}"),
            CliError::Invariant(msg) => write!(f, "invariant violation: {msg}"),
        }
    }
}

impl From<mtype::Error> for CliError {
    fn from(e: mtype::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

fn exit_code(e: &CliError) -> i32 {
    match e {
        CliError::Config(_) => 3,
        CliError::Invariant(_) => 2,
    }
}

#[derive(Parser)]
#[command(
    name = "mtype",
    version,
    about = "Seeded batch experiments on finite metric spaces: random partitions, \
             threshold embeddings, Markov/Enflo type ratios, martingale verification, \
             and scale-family tail checks."
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a metric space and write it as JSON.
    Gen(RunArgs),
    /// Sample bounded random partitions and report padding frequencies.
    Partition(RunArgs),
    /// Build a threshold (--tau) or snowflake (--eps) embedding; --audit
    /// checks every pair of a threshold map.
    Embed(RunArgs),
    /// Tabulate Markov type ratios over a horizon list.
    Mtype(RunArgs),
    /// Enflo type ratio of a hypercube point map (identity by default).
    Enflo(RunArgs),
    /// Verify martingale decomposition, domination, reduction, and
    /// increment-inequality claims on sampled trajectories.
    Mgverify(RunArgs),
    /// Run the scale-family tail experiment and report both sides.
    Tailverify(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Space: generator spec like `grid:8,8`, `hypercube:4`, or `file:PATH`
    /// (space JSON or graph edge list).
    #[arg(long)]
    space: Option<String>,
    /// Dyadic scale range `j0:j1`, inclusive (tailverify).
    #[arg(long)]
    scales: Option<String>,
    /// Horizon list: `1..16`, `2,4,8`, or one value.
    #[arg(long)]
    t: Option<String>,
    /// Moment exponent.
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Norm exponent for martingale checks (default 2).
    #[arg(long)]
    q: Option<f64>,
    /// Monte-Carlo trials.
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Root seed; all randomness in the run derives from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (created if missing).
    #[arg(long)]
    out: String,
    /// Override the exact-enumeration size cap.
    #[arg(long = "exact-cap")]
    exact_cap: Option<usize>,
    /// Report format.
    #[arg(long, default_value = "csv", value_parser = ["csv", "json"])]
    format: String,
    /// Partition / threshold scale.
    #[arg(long)]
    tau: Option<f64>,
    /// Snowflake exponent (embed) or padding parameter (partition).
    #[arg(long)]
    eps: Option<f64>,
    /// Embedding coordinates per scale.
    #[arg(long)]
    m: Option<usize>,
    /// Walk holding probability.
    #[arg(long, default_value_t = 0.5)]
    laziness: f64,
    /// Audit the built threshold map pair by pair.
    #[arg(long)]
    audit: bool,
    /// Point-map file for `enflo` (one space index per line).
    #[arg(long)]
    map: Option<String>,
}

fn default_t(command: &str) -> Vec<usize> {
    match command {
        "mtype" => (1..=16).collect(),
        "mgverify" => vec![2, 8, 16],
        "tailverify" => vec![8],
        _ => Vec::new(),
    }
}

impl RunArgs {
    fn into_config(self, command: &str) -> Result<RunConfig, CliError> {
        let t = match &self.t {
            Some(spec) => parse_t_list(spec)?,
            None => default_t(command),
        };
        Ok(RunConfig {
            command: command.into(),
            space: self.space,
            scales: self.scales,
            t,
            p: self.p,
            q: self.q,
            trials: self.trials,
            seed: self.seed,
            out: self.out,
            exact_cap: self.exact_cap,
            format: self.format,
            tau: self.tau,
            eps: self.eps,
            m: self.m,
            laziness: self.laziness,
            audit: self.audit,
            map: self.map,
        })
    }
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 3,
            };
            let _ = e.print();
            return code;
        }
    };
    let (name, args): (&str, RunArgs) = match cli.command {
        Cmd::Gen(a) => ("gen", a),
        Cmd::Partition(a) => ("partition", a),
        Cmd::Embed(a) => ("embed", a),
        Cmd::Mtype(a) => ("mtype", a),
        Cmd::Enflo(a) => ("enflo", a),
        Cmd::Mgverify(a) => ("mgverify", a),
        Cmd::Tailverify(a) => ("tailverify", a),
    };
    let started = Instant::now();
    let outcome = args.into_config(name).and_then(|cfg| {
        cfg.validate()?;
        let dir = output::prepare_out_dir(&cfg)?;
        let run_result = match name {
            "gen" => commands::cmd_gen(&cfg, &dir),
            "partition" => commands::cmd_partition(&cfg, &dir),
            "embed" => commands::cmd_embed(&cfg, &dir),
            "mtype" => commands::cmd_mtype(&cfg, &dir),
            "enflo" => commands::cmd_enflo(&cfg, &dir),
            "mgverify" => commands::cmd_mgverify(&cfg, &dir),
            "tailverify" => commands::cmd_tailverify(&cfg, &dir),
            _ => unreachable!("subcommands are exhaustive"),
        };
        // The manifest records the run whether or not an invariant held, so
        // failed runs stay diagnosable; manifest I/O trouble only surfaces
        // when the run itself was otherwise clean.
        let manifest_result = output::write_manifest(&dir, &cfg, started);
        run_result.and(manifest_result)
    });
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn main() {
    std::process::exit(run());
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_separate_failure_classes() {
        assert_eq!(exit_code(&CliError::Config("x".into())), 3);
        assert_eq!(exit_code(&CliError::Invariant("x".into())), 2);
    }

    #[test]
    fn default_horizons_fit_their_commands() {
        assert_eq!(default_t("mtype").len(), 16);
        assert!(default_t("mgverify").iter().all(|t| t % 2 == 0));
        assert_eq!(default_t("tailverify"), vec![8]);
        assert!(default_t("gen").is_empty());
    }
}
