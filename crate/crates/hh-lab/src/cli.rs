//! Command-line entry points and run artifacts.
//!
//! Exit codes: 0 ok, 1 infrastructure error, 2 violated assumption,
//! 3 failed assertion.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use hh_core::agent::AgentMode;
use hh_core::error::HhError;
use hh_core::json::prior_digest;
use hh_core::mechanism::{det_parameters, prob_parameters, run_game, MechanismConfig, ProbParameters, RunOptions};
use hh_core::num::{Prob, Rational};
use hh_core::prior::DiscretePrior;
use hh_oracle::{enumerate_game, OracleConfig, Variant};

use crate::config::{ExperimentConfig, ExperimentKind, SeedSpec};
use crate::experiments::{
    det_row, hygiene_suite, make_agent, oracle_for_runs, one_step_suite, pdl_suite, prob_row, prob_sweep,
    sim_lemma_suite, small_prob_parameters,
};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "hh-lab", version, about = "Hidden-hallucination exploration experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Experiment config, or a run manifest to replay.
    #[arg(long)]
    pub config: PathBuf,
    /// Master seed; overrides the config's seed list.
    #[arg(long, env = "IE_SEED")]
    pub seed: Option<u64>,
    /// Half-open seed range `a..b`; takes precedence over `--seed`.
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Exact rational arithmetic throughout.
    #[arg(long)]
    pub exact: bool,
    /// `key.path=value` edits applied to the config before validation.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Deterministic exploration runs with the theorem's parameters.
    RunDet(Common),
    /// Probabilistic runs stopped at exploration.
    RunProb(Common),
    /// Oracle and lemma checks.
    Verify {
        #[command(flatten)]
        common: Common,
        /// hygiene, one-step, distribution or sim-lemma; defaults to the config kind.
        #[arg(long)]
        suite: Option<String>,
    },
    /// Prints the mechanism parameters.
    Params(Common),
    /// Good-model mass and estimator accuracy across `n_lrn`.
    Sweep(Common),
}

#[derive(Debug)]
pub enum Failure {
    Infra(anyhow::Error),
    Assumption(String),
    Assertion(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Infra(_) => 1,
            Failure::Assumption(_) => 2,
            Failure::Assertion(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Infra(e) => write!(f, "error: {e:#}"),
            Failure::Assumption(m) => write!(f, "assumption violated: {m}"),
            Failure::Assertion(m) => write!(f, "assertion failed: {m}"),
        }
    }
}

impl From<HhError> for Failure {
    fn from(e: HhError) -> Self {
        match e.root() {
            HhError::AssumptionViolated(_) => Failure::Assumption(e.to_string()),
            _ => Failure::Infra(anyhow::Error::new(e)),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Infra(e)
    }
}

type Outcome = std::result::Result<(), Failure>;

/// Runs a parsed command and returns its exit code.
pub fn run(cli: Cli) -> i32 {
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("{f}");
            f.exit_code()
        }
    }
}

struct Job {
    name: &'static str,
    suite: Option<ExperimentKind>,
    config: ExperimentConfig,
    seeds: Vec<u64>,
    out: PathBuf,
    exact: bool,
}

fn dispatch(command: Command) -> Outcome {
    let (name, common, suite) = match command {
        Command::RunDet(c) => ("run-det", c, None),
        Command::RunProb(c) => ("run-prob", c, None),
        Command::Verify { common, suite } => ("verify", common, suite),
        Command::Params(c) => ("params", c, None),
        Command::Sweep(c) => ("sweep", c, None),
    };
    let (config, manifest_seed) = ExperimentConfig::load(&common.config, &common.overrides)?;
    let seeds = match (&common.seeds, common.seed, manifest_seed) {
        (Some(range), _, _) => SeedSpec::parse(range)?.seeds(),
        (None, Some(s), _) => vec![s],
        (None, None, Some(s)) => vec![s],
        (None, None, None) => config.seeds.seeds(),
    };
    let suite = suite
        .map(|s| {
            serde_json::from_value::<ExperimentKind>(serde_json::Value::String(s.clone()))
                .map_err(|_| Failure::Infra(anyhow::anyhow!("unknown suite {s:?}")))
        })
        .transpose()?;
    let out = common
        .out
        .clone()
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(name));
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let job = Job {
        name,
        suite,
        config,
        seeds,
        out,
        exact: common.exact,
    };
    if job.exact {
        run_typed::<Rational>(&job)
    } else {
        run_typed::<f64>(&job)
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    manifest_version: u32,
    tool: &'static str,
    tool_version: &'static str,
    command: &'a str,
    exact: bool,
    seed: Option<u64>,
    seeds: &'a [u64],
    prior_digest: &'a str,
    config: &'a ExperimentConfig,
    mechanism: Option<&'a MechanismConfig>,
}

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn manifest<'a>(job: &'a Job, digest: &'a str, seed: Option<u64>, mechanism: Option<&'a MechanismConfig>) -> Manifest<'a> {
    Manifest {
        manifest_version: MANIFEST_VERSION,
        tool: "hh-lab",
        tool_version: env!("CARGO_PKG_VERSION"),
        command: job.name,
        exact: job.exact,
        seed,
        seeds: &job.seeds,
        prior_digest: digest,
        config: &job.config,
        mechanism,
    }
}

fn run_dir(out: &Path, seed: u64) -> PathBuf {
    out.join("runs").join(format!("seed-{seed:06}"))
}

fn float_zero<P: Prob>(x: &P) -> bool {
    if P::EXACT {
        *x == P::zero()
    } else {
        x.to_f64().abs() <= hh_core::num::FLOAT_TOL
    }
}

/// Mechanism parameters for oracle suites: the deterministic theorem's
/// when they apply, otherwise the probabilistic ones.
fn suite_mechanism<P: Prob>(prior: &DiscretePrior<P>, config: &ExperimentConfig) -> Result<MechanismConfig, Failure> {
    let mut m = match det_parameters(prior) {
        Ok(d) => d.config,
        Err(_) => prob_params(prior, config)?.config,
    };
    config.mechanism.apply(&mut m)?;
    Ok(m)
}

fn prob_params<P: Prob>(prior: &DiscretePrior<P>, config: &ExperimentConfig) -> Result<ProbParameters, Failure> {
    let s = &config.prob;
    let params = match (s.exact_q_pun, s.n_lrn) {
        (true, Some(n)) => small_prob_parameters(prior, s.rho, s.delta, n, s.total_phases)?,
        (true, None) => {
            return Err(Failure::Infra(anyhow::anyhow!("prob.exact_q_pun needs prob.n_lrn")));
        }
        (false, _) => prob_parameters(prior, s.rho, s.delta, &s.overrides(), s.constants)?,
    };
    Ok(params)
}

fn run_typed<P: Prob>(job: &Job) -> Outcome {
    let prior = job.config.prior.load::<P>()?;
    let digest = prior_digest(&prior);
    match job.name {
        "run-det" => cmd_run_det(job, &prior, &digest),
        "run-prob" => cmd_run_prob(job, &prior, &digest),
        "verify" => cmd_verify(job, &prior, &digest),
        "params" => cmd_params(job, &prior, &digest),
        "sweep" => cmd_sweep(job, &prior, &digest),
        other => Err(Failure::Infra(anyhow::anyhow!("unknown command {other}"))),
    }
}

fn run_options(config: &ExperimentConfig, stop_at_coverage: bool) -> RunOptions {
    RunOptions {
        log_detail: config.log_detail,
        audit_rho0: config.audit_rho0,
        stop_at_coverage,
        ledger_digests: true,
    }
}

fn cmd_run_det<P: Prob>(job: &Job, prior: &DiscretePrior<P>, digest: &str) -> Outcome {
    let mut mech = det_parameters(prior)?.config;
    job.config.mechanism.apply(&mut mech)?;
    let table = match job.config.agent {
        AgentMode::FullyRational => Some(oracle_for_runs(&mech, prior)?),
        AgentMode::CanonicalTruster => None,
    };
    let agent = make_agent(job.config.agent, prior, table.as_ref());
    let options = run_options(&job.config, false);
    let mut rows = Vec::new();
    for &seed in &job.seeds {
        let log = run_game(&mech, prior, agent.as_ref(), seed, None, &options)?;
        let dir = run_dir(&job.out, seed);
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        write_json(&dir.join("manifest.json"), &manifest(job, digest, Some(seed), Some(&mech)))?;
        fs::write(dir.join("game.jsonl"), log.to_jsonl()).context("writing game log")?;
        rows.push(det_row(&log));
    }
    write_json(&job.out.join("manifest.json"), &manifest(job, digest, None, Some(&mech)))?;
    write_csv(&job.out.join("summary.csv"), &rows)?;
    let passed = rows.iter().filter(|r| r.passed()).count();
    write_json(
        &job.out.join("report.json"),
        &serde_json::json!({"runs": rows.len(), "passed": passed, "mechanism": mech, "rows": rows}),
    )?;
    println!("run-det: {passed}/{} runs covered Reach within |Reach| phases", rows.len());
    if passed == rows.len() {
        Ok(())
    } else {
        Err(Failure::Assertion(format!("{} runs missed coverage", rows.len() - passed)))
    }
}

fn cmd_run_prob<P: Prob>(job: &Job, prior: &DiscretePrior<P>, digest: &str) -> Outcome {
    let params = prob_params(prior, &job.config)?;
    let mut mech = params.config.clone();
    job.config.mechanism.apply(&mut mech)?;
    let agent = make_agent(AgentMode::CanonicalTruster, prior, None);
    let options = run_options(&job.config, true);
    let good = (job.config.prob.good_eps_r, job.config.prob.good_eps_p);
    let mut rows = Vec::new();
    for &seed in &job.seeds {
        let log = run_game(&mech, prior, agent.as_ref(), seed, None, &options)?;
        let dir = run_dir(&job.out, seed);
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        write_json(&dir.join("manifest.json"), &manifest(job, digest, Some(seed), Some(&mech)))?;
        fs::write(dir.join("game.jsonl"), log.to_jsonl()).context("writing game log")?;
        rows.push(prob_row(prior, &log, params.eps_r, params.eps_p, good)?);
    }
    write_json(&job.out.join("manifest.json"), &manifest(job, digest, None, Some(&mech)))?;
    write_csv(&job.out.join("summary.csv"), &rows)?;
    let explored = rows.iter().filter(|r| r.phases_to_exploration.is_some()).count();
    let within = rows.iter().filter(|r| r.estimators_within_bounds).count();
    write_json(
        &job.out.join("report.json"),
        &serde_json::json!({"runs": rows.len(), "explored": explored, "estimators_within_bounds": within,
            "parameters": params, "mechanism": mech, "rows": rows}),
    )?;
    println!("run-prob: {explored}/{} runs explored, {within} with estimators within bounds", rows.len());
    Ok(())
}

#[derive(Serialize)]
struct OneStepCsv {
    phase: u64,
    ledgers: usize,
    violations: usize,
    condition_failures: usize,
    escapes: usize,
    p_hal_bound_failures: usize,
    min_p_hal_slack: Option<f64>,
    note: String,
}

fn cmd_verify<P: Prob>(job: &Job, prior: &DiscretePrior<P>, digest: &str) -> Outcome {
    let suite = job.suite.unwrap_or(job.config.kind);
    let v = &job.config.verify;
    let oracle = |phases: u64| -> Result<_, Failure> {
        let mechanism = suite_mechanism(prior, &job.config)?;
        Ok(enumerate_game(
            &OracleConfig {
                mechanism,
                phases,
                agent: job.config.agent,
                variant: Variant::Faithful,
            },
            prior,
        )?)
    };
    write_json(&job.out.join("manifest.json"), &manifest(job, digest, None, None))?;
    let failures: Vec<String> = match suite {
        ExperimentKind::Hygiene => {
            let rows = hygiene_suite(&oracle(v.phases)?)?;
            write_csv(&job.out.join("hygiene.csv"), &rows)?;
            write_json(&job.out.join("report.json"), &serde_json::json!({"suite": "hygiene", "rows": rows}))?;
            rows.iter()
                .filter(|r| {
                    let faithful = r.mechanism == "faithful";
                    let zero = if job.exact { r.exact_zero } else { r.max_tv.abs() <= 1e-12 };
                    faithful != zero
                })
                .map(|r| format!("{} {} phase {:?}: TV {}", r.mechanism, r.ledger_kind, r.phase, r.max_tv))
                .collect()
        }
        ExperimentKind::OneStep => {
            let table = oracle(v.audit_phases.1)?;
            let rho0 = P::from_rational(
                &hh_core::num::rational_from_decimal_f64(v.rho0)
                    .ok_or_else(|| Failure::Infra(anyhow::anyhow!("rho0 is not finite")))?,
            );
            let rows = one_step_suite(&table, v.audit_phases.0..=v.audit_phases.1, rho0)?;
            let flat: Vec<OneStepCsv> = rows
                .iter()
                .map(|r| OneStepCsv {
                    phase: r.phase,
                    ledgers: r.report.as_ref().map_or(0, |a| a.rows.len()),
                    violations: r.report.as_ref().map_or(0, |a| a.violations),
                    condition_failures: r.report.as_ref().map_or(0, |a| a.condition_failures),
                    escapes: r.report.as_ref().map_or(0, |a| a.escapes),
                    p_hal_bound_failures: r.report.as_ref().map_or(0, |a| a.p_hal_bound_failures),
                    min_p_hal_slack: r.report.as_ref().map(|a| a.min_p_hal_slack),
                    note: r.note.clone(),
                })
                .collect();
            write_csv(&job.out.join("one_step.csv"), &flat)?;
            write_json(&job.out.join("report.json"), &serde_json::json!({"suite": "one-step", "rows": rows}))?;
            flat.iter()
                .filter(|r| r.violations > 0 || r.p_hal_bound_failures > 0)
                .map(|r| format!("phase {}: {} violations, {} p_hal failures", r.phase, r.violations, r.p_hal_bound_failures))
                .collect()
        }
        ExperimentKind::Distribution => {
            let table = oracle(v.phases)?;
            let mut rows = Vec::new();
            for phase in 1..=v.phases {
                let tv = table.hallucination_distribution_check(phase)?;
                rows.push(serde_json::json!({"phase": phase, "tv": tv.to_f64(), "zero": float_zero(&tv)}));
            }
            write_json(&job.out.join("report.json"), &serde_json::json!({"suite": "distribution", "rows": rows}))?;
            rows.iter()
                .filter(|r| r["zero"] == false)
                .map(|r| format!("phase {}: TV {}", r["phase"], r["tv"]))
                .collect()
        }
        ExperimentKind::SimLemma => {
            let sim = sim_lemma_suite(v.pairs, v.seed)?;
            let pdl = pdl_suite(v.pdl_pairs, v.seed)?;
            write_csv(&job.out.join("sim_lemma.csv"), &sim.rows)?;
            write_json(
                &job.out.join("report.json"),
                &serde_json::json!({"suite": "sim-lemma", "pairs": sim.pairs, "stated_holds": sim.stated_holds,
                    "proof_holds": sim.proof_holds, "stated_violations_equal_init": sim.stated_violations_equal_init,
                    "pdl": pdl}),
            )?;
            let mut f = Vec::new();
            if sim.stated_holds < sim.pairs {
                f.push(format!("stated bound fails on {}/{} pairs", sim.pairs - sim.stated_holds, sim.pairs));
            }
            if pdl.max_abs_error > 1e-10 {
                f.push(format!("performance-difference error {}", pdl.max_abs_error));
            }
            f
        }
        other => {
            return Err(Failure::Infra(anyhow::anyhow!("{other:?} is not a verification suite")));
        }
    };
    if failures.is_empty() {
        println!("verify {suite:?}: pass");
        Ok(())
    } else {
        for f in &failures {
            println!("verify {suite:?}: {f}");
        }
        Err(Failure::Assertion(format!("{} failed checks", failures.len())))
    }
}

#[derive(Serialize)]
struct ParamRow {
    parameter: String,
    value: String,
}

fn cmd_params<P: Prob>(job: &Job, prior: &DiscretePrior<P>, digest: &str) -> Outcome {
    let mut rows = Vec::new();
    let mut push = |k: &str, v: String| {
        rows.push(ParamRow {
            parameter: k.into(),
            value: v,
        })
    };
    let det = det_parameters(prior);
    if let Ok(d) = &det {
        let eps = if P::EXACT {
            hh_core::num::format_rational(&d.config.eps_pun)
        } else {
            d.config.eps_pun_as::<f64>().to_string()
        };
        push("det.eps_pun", eps);
        push("det.r_min", d.r_min.to_f64().to_string());
        push("det.C", d.c.to_f64().to_string());
        push("det.n_phase", d.config.n_phase.to_string());
        push("det.n_lrn", d.config.n_lrn.to_string());
        push("det.total_phases", d.config.total_phases.to_string());
        push("det.K", (d.config.n_phase as f64 * d.config.total_phases as f64).to_string());
    }
    let prob = prob_params(prior, &job.config);
    if let Ok(p) = &prob {
        for (k, v) in [
            ("prob.eps_pun", p.eps_pun),
            ("prob.r_alt", p.r_alt),
            ("prob.q_pun", p.q_pun),
            ("prob.Delta_0", p.delta_gap),
            ("prob.rho_0", p.rho_0),
            ("prob.rho_prog", p.rho_prog),
            ("prob.n_lrn", p.config.n_lrn as f64),
            ("prob.n_lrn_theorem", p.n_lrn_theorem),
            ("prob.n_phase", p.config.n_phase as f64),
            ("prob.n_phase_theorem", p.n_phase_theorem),
            ("prob.L0", p.l0),
            ("prob.L0_closed_form", p.l0_closed_form),
            ("prob.K", p.k_episodes),
            ("prob.delta_0", p.delta_0),
            ("prob.eps_r", p.eps_r),
            ("prob.eps_p", p.eps_p),
            ("prob.n_0", p.n_0),
        ] {
            push(k, v.to_string());
        }
        push("prob.q_pun_source", p.q_pun_source.clone());
    }
    if let (Err(d), Err(p)) = (&det, &prob) {
        eprintln!("deterministic parameters unavailable: {d:?}");
        return Err(match p {
            Failure::Assumption(m) => Failure::Assumption(m.clone()),
            Failure::Infra(e) => Failure::Infra(anyhow::anyhow!("{e:#}")),
            Failure::Assertion(m) => Failure::Assertion(m.clone()),
        });
    }
    write_json(&job.out.join("manifest.json"), &manifest(job, digest, None, None))?;
    write_csv(&job.out.join("params.csv"), &rows)?;
    write_json(
        &job.out.join("params.json"),
        &serde_json::json!({"det": det.ok().map(|d| serde_json::json!({"config": d.config,
            "r_min": d.r_min.to_f64(), "C": d.c.to_f64()})), "prob": prob.ok()}),
    )?;
    println!("parameter,value");
    for r in &rows {
        println!("{},{}", r.parameter, r.value);
    }
    Ok(())
}

fn cmd_sweep<P: Prob>(job: &Job, prior: &DiscretePrior<P>, digest: &str) -> Outcome {
    let s = &job.config.prob;
    let (summary, runs) = prob_sweep(
        prior,
        s.rho,
        s.delta,
        &job.config.sweep.n_lrn,
        &job.seeds,
        job.config.sweep.phase_cap,
        (s.good_eps_r, s.good_eps_p),
    )?;
    write_json(&job.out.join("manifest.json"), &manifest(job, digest, None, None))?;
    write_csv(&job.out.join("sweep.csv"), &summary)?;
    write_csv(&job.out.join("runs.csv"), &runs)?;
    let monotone = summary.windows(2).all(|w| w[1].mean_good_mass >= w[0].mean_good_mass);
    write_json(&job.out.join("report.json"), &serde_json::json!({"monotone": monotone, "rows": summary}))?;
    for r in &summary {
        println!("n_lrn={} mean_good_mass={:.4} explored={}/{}", r.n_lrn, r.mean_good_mass, r.explored_runs, r.runs);
    }
    if monotone {
        Ok(())
    } else {
        Err(Failure::Assertion("good-model mass is not non-decreasing in n_lrn".into()))
    }
}
