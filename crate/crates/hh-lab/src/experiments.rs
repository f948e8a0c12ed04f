//! Experiment suites shared by the CLI and the acceptance tests.
//!
//! Every suite is a pure function of its inputs and seeds; seed fan-out
//! runs in parallel with no shared mutable state.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use hh_core::agent::{Agent, AgentMode, CanonicalTruster, FullyRational};
use hh_core::analysis::{
    empirical_estimators, good_model_predicate, performance_difference, simulation_gap,
    sufficiently_visiting_policies, Mrp,
};
use hh_core::error::{HhError, Result};
use hh_core::ledger::{ledger_probability, Ledger};
use hh_core::mdp::{
    enumerate_policies, enumerate_trajectories, event_visit_probability, occupancy_omega, policy_value,
    sample_trajectory, Dims, MarkovPolicy, TabularModel, TripleSet,
};
use hh_core::mechanism::{
    det_parameters, prob_parameters, punish_event, q_pun_r_alt_exact, run_game, GameLog, MechanismConfig,
    ProbConstants, ProbOverrides, ProbParameters, RunOptions,
};
use hh_core::num::{Prob, Rational};
use hh_core::prior::{canonical_posterior, DiscretePrior};
use hh_core::rng::Streams;
use hh_oracle::counterexamples::{
    censor_selection_signal, fabricated_rewards_prior, fabricated_rewards_signal, policy_selection_signal,
    signal_hygiene_tv, two_arm_prior,
};
use hh_oracle::{enumerate_game, AuditReport, HygieneKind, JointTable, OracleConfig, Variant};

/// Builds the agent for `mode`; a fully rational agent needs `table`.
pub fn make_agent<'a, P: Prob>(
    mode: AgentMode,
    prior: &'a DiscretePrior<P>,
    table: Option<&'a JointTable<P>>,
) -> Box<dyn Agent<P> + 'a> {
    match (mode, table) {
        (AgentMode::CanonicalTruster, _) => Box::new(CanonicalTruster::new(prior)),
        (AgentMode::FullyRational, Some(t)) => Box::new(FullyRational::new(prior, t)),
        (AgentMode::FullyRational, None) => Box::new(FullyRational::detached(prior)),
    }
}

/// Exact table covering every phase of `config`, for fully rational runs.
pub fn oracle_for_runs<P: Prob>(config: &MechanismConfig, prior: &DiscretePrior<P>) -> Result<JointTable<P>> {
    enumerate_game(
        &OracleConfig {
            mechanism: config.clone(),
            phases: config.total_phases,
            agent: AgentMode::FullyRational,
            variant: Variant::Faithful,
        },
        prior,
    )
}

// Deterministic exploration.

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DetRunRow {
    pub seed: u64,
    pub true_atom: usize,
    pub reach_size: usize,
    pub phases_run: u64,
    pub phases_to_coverage: Option<u64>,
    /// Coverage happened within `|Reach(μ*)|` phases.
    pub covered_in_time: bool,
    /// Every phase before coverage visited a new triple.
    pub new_triple_every_phase: bool,
    /// Every audited hallucination-episode policy lay in `Π_ℓ`.
    pub hal_policy_in_target: bool,
}

impl DetRunRow {
    pub fn passed(&self) -> bool {
        self.covered_in_time && self.new_triple_every_phase
    }
}

pub fn det_row(log: &GameLog) -> DetRunRow {
    let s = &log.summary;
    let until = s.phases_to_coverage.unwrap_or(s.phases_run) as usize;
    DetRunRow {
        seed: s.seed,
        true_atom: s.true_atom,
        reach_size: s.reach_size,
        phases_run: s.phases_run,
        phases_to_coverage: s.phases_to_coverage,
        covered_in_time: s.phases_to_coverage.is_some_and(|p| p as usize <= s.reach_size),
        new_triple_every_phase: s.new_triple_indicator.iter().take(until).all(|b| *b),
        hal_policy_in_target: log
            .phases
            .iter()
            .filter_map(|p| p.audit.as_ref())
            .all(|a| a.target_size == 0 || a.policy_in_target),
    }
}

/// Runs every seed and hands each log to `sink` before dropping it.
pub fn run_seeds<P: Prob>(
    config: &MechanismConfig,
    prior: &DiscretePrior<P>,
    agent: &dyn Agent<P>,
    seeds: &[u64],
    options: &RunOptions,
    sink: &(dyn Fn(&GameLog) -> Result<()> + Sync),
) -> Result<Vec<DetRunRow>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let log = run_game(config, prior, agent, seed, None, options)?;
            sink(&log)?;
            Ok(det_row(&log))
        })
        .collect()
}

/// Deterministic-theorem runs with the theorem's parameters.
pub fn det_theorem<P: Prob>(
    prior: &DiscretePrior<P>,
    mode: AgentMode,
    seeds: &[u64],
    options: &RunOptions,
    sink: &(dyn Fn(&GameLog) -> Result<()> + Sync),
) -> Result<(MechanismConfig, Vec<DetRunRow>)> {
    let config = det_parameters(prior)?.config;
    let table = match mode {
        AgentMode::FullyRational => Some(oracle_for_runs(&config, prior)?),
        AgentMode::CanonicalTruster => None,
    };
    let agent = make_agent(mode, prior, table.as_ref());
    let rows = run_seeds(&config, prior, agent.as_ref(), seeds, options, sink)?;
    Ok((config, rows))
}

// Hygiene and oracle audits.

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HygieneRow {
    pub mechanism: String,
    pub ledger_kind: String,
    pub phase: Option<u64>,
    pub max_tv: f64,
    pub exact_zero: bool,
}

/// Faithful-mechanism rows for phases `1..=L+1` plus the counterexample rows.
pub fn hygiene_suite<P: Prob>(table: &JointTable<P>) -> Result<Vec<HygieneRow>> {
    let mut rows = Vec::new();
    for phase in 1..=table.phases() + 1 {
        for kind in [HygieneKind::Censored, HygieneKind::Honest] {
            let (r, _) = table.hygiene_tv(kind, phase)?;
            rows.push(HygieneRow {
                mechanism: "faithful".into(),
                ledger_kind: format!("{kind:?}").to_lowercase(),
                phase: Some(phase),
                max_tv: r.max_tv,
                exact_zero: r.exact_zero,
            });
        }
    }
    rows.extend(counterexample_rows::<P>()?);
    Ok(rows)
}

pub fn counterexample_rows<P: Prob>() -> Result<Vec<HygieneRow>> {
    let mut rows = Vec::new();
    let mut push = |name: &str, tv: P| {
        rows.push(HygieneRow {
            mechanism: name.into(),
            ledger_kind: "signal".into(),
            phase: None,
            max_tv: tv.to_f64(),
            exact_zero: tv == P::zero(),
        })
    };
    let fab = fabricated_rewards_prior(&[P::zero(), P::from_ratio(4, 5)])?;
    push("fabricated_rewards", signal_hygiene_tv(&fab, &fabricated_rewards_signal(fab.dims(), 1))?.0);
    let bandit = two_arm_prior::<P>()?;
    push("policy_selection", signal_hygiene_tv(&bandit, &policy_selection_signal(bandit.dims()))?.0);
    push("censor_selection", signal_hygiene_tv(&bandit, &censor_selection_signal(bandit.dims()))?.0);
    Ok(rows)
}

/// `Π_ℓ` for priors whose atoms share one transition structure.
pub fn shared_dynamics_target<P: Prob>(
    prior: &DiscretePrior<P>,
    rho0: P,
) -> Result<impl Fn(&TripleSet, &Ledger) -> Result<hh_core::prior::PolicySet>> {
    let model = prior.model(0).clone();
    if prior.atoms().iter().any(|(m, _)| !m.same_dynamics(&model)) {
        return Err(HhError::PreconditionViolated(
            "the target set depends on the unknown dynamics".into(),
        ));
    }
    Ok(move |u: &TripleSet, _: &Ledger| sufficiently_visiting_policies(&model, u, &rho0))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OneStepRow {
    pub phase: u64,
    /// `None` when `Π_ℓ` is all policies, so the gap is undefined.
    pub report: Option<AuditReport>,
    pub note: String,
}

pub fn one_step_suite<P: Prob>(table: &JointTable<P>, phases: std::ops::RangeInclusive<u64>, rho0: P) -> Result<Vec<OneStepRow>> {
    let target = shared_dynamics_target(table.prior(), rho0)?;
    phases
        .map(|phase| match table.one_step_audit(phase, &target) {
            Ok(r) => Ok(OneStepRow {
                phase,
                note: r.verdict().into(),
                report: Some(r),
            }),
            Err(HhError::DegenerateSplit(m)) => Ok(OneStepRow {
                phase,
                report: None,
                note: format!("degenerate split: {m}"),
            }),
            Err(e) => Err(e),
        })
        .collect()
}

// Simulation and performance-difference lemmas.

fn random_dist(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 1e-3).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// Moves at most `eps/2` of mass between two entries: ℓ1 change ≤ `eps`.
fn perturb(rng: &mut ChaCha8Rng, d: &[f64], eps: f64) -> Vec<f64> {
    let mut out = d.to_vec();
    if d.len() < 2 {
        return out;
    }
    let from = rng.gen_range(0..d.len());
    let to = (from + rng.gen_range(1..d.len())) % d.len();
    let amount = (rng.gen::<f64>() * eps / 2.0).min(out[from]) * (1.0 - 1e-9);
    out[from] -= amount;
    out[to] += amount;
    out
}

fn zero_reward_model(dims: Dims, init: Vec<f64>, trans: Vec<Vec<f64>>) -> Result<TabularModel<f64>> {
    TabularModel::new(dims, Arc::new(vec![0.0]), init, trans, vec![vec![1.0]; dims.num_triples()])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimPair {
    pub index: usize,
    pub s: usize,
    pub a: usize,
    pub h: usize,
    pub eps: f64,
    pub init_l1: f64,
    pub lhs: f64,
    pub stated_bound: f64,
    pub proof_bound: f64,
    pub stated_holds: bool,
    pub proof_holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimLemmaReport {
    pub pairs: usize,
    pub stated_holds: usize,
    pub proof_holds: usize,
    /// Violations of the stated bound among pairs with equal initial laws.
    pub stated_violations_equal_init: usize,
    pub rows: Vec<SimPair>,
}

/// `n` random ε-similar pairs with `S, H ≤ 3`, `A ≤ 2`.
pub fn sim_lemma_suite(n: usize, seed: u64) -> Result<SimLemmaReport> {
    let streams = Streams::new(seed);
    let mut rows = Vec::with_capacity(n);
    for index in 0..n {
        let mut rng = streams.stream(&format!("sim-pair:{index}"));
        let dims = Dims::new(rng.gen_range(1..=3), rng.gen_range(1..=2), rng.gen_range(1..=3))?;
        let eps = rng.gen_range(0.01..0.3);
        let explored = TripleSet::from_triples(dims, dims.triples().filter(|_| rng.gen_bool(0.5)));
        let u = explored.complement();
        let init_star = random_dist(&mut rng, dims.s);
        let trans_star: Vec<Vec<f64>> = (0..dims.num_triples()).map(|_| random_dist(&mut rng, dims.s)).collect();
        let init = perturb(&mut rng, &init_star, eps);
        let trans = dims
            .triples()
            .map(|t| {
                if explored.contains(t) {
                    perturb(&mut rng, &trans_star[dims.index(t)], eps)
                } else {
                    random_dist(&mut rng, dims.s)
                }
            })
            .collect();
        let rtilde: Vec<f64> = (0..dims.num_triples()).map(|_| rng.gen()).collect();
        let policy = MarkovPolicy::new(dims, (0..dims.s * dims.h).map(|_| rng.gen_range(0..dims.a)).collect())?;
        let init_l1 = init.iter().zip(&init_star).map(|(a, b)| (a - b).abs()).sum();
        let star = zero_reward_model(dims, init_star, trans_star)?;
        let model = zero_reward_model(dims, init, trans)?;
        let gap = simulation_gap(&model, &star, &u, &rtilde, &policy, &eps)?;
        rows.push(SimPair {
            index,
            s: dims.s,
            a: dims.a,
            h: dims.h,
            eps,
            init_l1,
            stated_holds: gap.holds(),
            proof_holds: gap.holds_proof_bound(),
            lhs: gap.lhs,
            stated_bound: gap.bound,
            proof_bound: gap.proof_bound,
        });
    }
    Ok(SimLemmaReport {
        pairs: n,
        stated_holds: rows.iter().filter(|r| r.stated_holds).count(),
        proof_holds: rows.iter().filter(|r| r.proof_holds).count(),
        stated_violations_equal_init: rows.iter().filter(|r| !r.stated_holds && r.init_l1 == 0.0).count(),
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PdlReport {
    pub pairs: usize,
    pub max_abs_error: f64,
}

/// Performance-difference identity on `n` random MRP pairs.
pub fn pdl_suite(n: usize, seed: u64) -> Result<PdlReport> {
    let streams = Streams::new(seed);
    let mut worst = 0f64;
    for index in 0..n {
        let mut rng = streams.stream(&format!("pdl-pair:{index}"));
        let (s, h) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
        let mut mrp = || Mrp {
            init: random_dist(&mut rng, s),
            trans: (0..h).map(|_| (0..s).map(|_| random_dist(&mut rng, s)).collect()).collect(),
            reward: (0..h).map(|_| (0..s).map(|_| rng.gen()).collect()).collect(),
        };
        let (m1, m2) = (mrp(), mrp());
        let pd = performance_difference(&m1, &m2)?;
        worst = worst.max((pd.lhs - pd.rhs()).abs());
    }
    Ok(PdlReport {
        pairs: n,
        max_abs_error: worst,
    })
}

// Occupancy identity and oracle equivalence.

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OmegaReport {
    pub models: usize,
    pub cases: usize,
    pub max_abs_error: f64,
}

/// `Σ_U ω*^π = P*[E_U]` over every model, policy and subset `U`.
pub fn omega_suite<P: Prob>(prior: &DiscretePrior<P>) -> Result<OmegaReport> {
    let dims = prior.dims();
    let policies = enumerate_policies(dims)?;
    let n = dims.num_triples();
    if n > 16 {
        return Err(HhError::CapExceeded {
            what: "triple subsets",
            needed: 2f64.powi(n as i32),
            cap: 1 << 16,
        });
    }
    let subsets: Vec<TripleSet> = (0u32..1 << n)
        .map(|mask| TripleSet::from_triples(dims, dims.triples().filter(|t| mask >> dims.index(*t) & 1 == 1)))
        .collect();
    let worst = prior
        .atoms()
        .par_iter()
        .map(|(model, _)| {
            let mut w = 0f64;
            for pi in &policies {
                for u in &subsets {
                    let sum = occupancy_omega(model, pi, u).into_values().fold(P::zero(), |a, b| a + b);
                    w = w.max(sum.abs_diff(&event_visit_probability(model, pi, u)).to_f64());
                }
            }
            w
        })
        .reduce(|| 0.0, f64::max);
    Ok(OmegaReport {
        models: prior.len(),
        cases: prior.len() * policies.len() * subsets.len(),
        max_abs_error: worst,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub value_cases: usize,
    pub max_value_error: f64,
    pub posterior_cases: usize,
    pub posterior_mismatches: usize,
    pub max_posterior_error: f64,
}

/// `policy_value` against trajectory enumeration, and the canonical
/// posterior against brute-force Bayes on sampled censored ledgers.
pub fn equivalence_suite<P: Prob>(prior: &DiscretePrior<P>, ledgers: usize, seed: u64) -> Result<EquivalenceReport> {
    let dims = prior.dims();
    let policies = enumerate_policies(dims)?;
    let mut max_value_error = 0f64;
    let mut value_cases = 0;
    for (model, _) in prior.atoms() {
        for pi in &policies {
            let direct = policy_value(model, pi);
            let enumerated = enumerate_trajectories(model, pi)?.into_iter().fold(P::zero(), |acc, (tau, p)| {
                let ret = tau.steps.iter().fold(P::zero(), |a, s| a + prior.support()[s.r].clone());
                acc + p * ret
            });
            max_value_error = max_value_error.max(direct.abs_diff(&enumerated).to_f64());
            value_cases += 1;
        }
    }
    let streams = Streams::new(seed);
    let mut mismatches = 0;
    let mut max_posterior_error = 0f64;
    for i in 0..ledgers {
        let mut rng = streams.stream(&format!("equivalence-ledger:{i}"));
        let truth = rng.gen_range(0..prior.len());
        let censor = TripleSet::from_triples(dims, dims.triples().filter(|_| rng.gen_bool(0.3)));
        let mut ledger = Ledger::new(censor);
        for _ in 0..rng.gen_range(0..=4) {
            let pi = policies[rng.gen_range(0..policies.len())].clone();
            let tau = sample_trajectory(prior.model(truth), &pi, &mut rng);
            ledger.push(pi, &tau);
        }
        let post = canonical_posterior(prior, &ledger, &prior.full_event())?;
        let masses: Vec<P> = prior
            .atoms()
            .iter()
            .map(|(m, w)| w.clone() * ledger_probability(m, &ledger))
            .collect();
        let z = masses.iter().fold(P::zero(), |a, b| a + b.clone());
        for (brute, got) in masses.into_iter().zip(post.weights()) {
            let brute = brute / z.clone();
            let err = brute.abs_diff(got);
            max_posterior_error = max_posterior_error.max(err.to_f64());
            if if P::EXACT { brute != *got } else { !brute.approx_eq(got) } {
                mismatches += 1;
            }
        }
    }
    Ok(EquivalenceReport {
        value_cases,
        max_value_error,
        posterior_cases: ledgers,
        posterior_mismatches: mismatches,
        max_posterior_error,
    })
}

// Probabilistic runs.

/// Probabilistic parameters with exact `q_pun` and `r_alt` substituted and
/// `n_lrn` overridden; `n_phase` then follows from `q_pun` and `Δ0`.
pub fn small_prob_parameters<P: Prob>(
    prior: &DiscretePrior<P>,
    rho: f64,
    delta: f64,
    n_lrn: u64,
    total_phases: Option<u64>,
) -> Result<ProbParameters> {
    let base = prob_parameters(prior, rho, delta, &ProbOverrides::default(), ProbConstants::default())?;
    let eps = P::from_rational(&base.config.eps_pun);
    let exact = q_pun_r_alt_exact(prior, n_lrn, &eps, &extreme_ledgers(prior, n_lrn)?)?;
    prob_parameters(
        prior,
        rho,
        delta,
        &ProbOverrides {
            q_pun: Some(exact.q_pun.to_f64()),
            r_alt: Some(base.r_alt),
            n_lrn: Some(n_lrn),
            n_phase: None,
            total_phases,
        },
        ProbConstants::default(),
    )
}

/// The empty ledger and one holding every trajectory of the first atom
/// under every policy `n_lrn` times. With independent rewards the punish
/// probability only shrinks as triples become explored, so its minimum
/// over realizable ledgers is attained on the second.
fn extreme_ledgers<P: Prob>(prior: &DiscretePrior<P>, n_lrn: u64) -> Result<Vec<Ledger>> {
    let dims = prior.dims();
    let mut full = Ledger::raw(dims);
    for pi in enumerate_policies(dims)? {
        for (tau, p) in enumerate_trajectories(prior.model(0), &pi)? {
            if p > P::zero() {
                for _ in 0..n_lrn {
                    full.push(pi.clone(), &tau);
                }
            }
        }
    }
    Ok(vec![Ledger::raw(dims), full])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbRunRow {
    pub seed: u64,
    pub n_lrn: u64,
    pub true_atom: usize,
    pub phases_run: u64,
    pub phases_to_exploration: Option<u64>,
    pub estimated_triples: usize,
    pub max_reward_error: f64,
    pub max_transition_error: f64,
    pub estimators_within_bounds: bool,
    /// `Pr_can[good | λ_cens, E_pun]` after the last phase.
    pub good_mass: f64,
}

/// One canonical-truster run under `options`.
pub fn prob_run<P: Prob>(
    prior: &DiscretePrior<P>,
    config: &MechanismConfig,
    seed: u64,
    eps_r_bound: f64,
    eps_p_bound: f64,
    good_eps: (f64, f64),
    options: &RunOptions,
) -> Result<ProbRunRow> {
    let agent = CanonicalTruster::new(prior);
    let log = run_game(config, prior, &agent, seed, None, options)?;
    prob_row(prior, &log, eps_r_bound, eps_p_bound, good_eps)
}

/// Estimator errors and good-model mass after a finished run.
pub fn prob_row<P: Prob>(
    prior: &DiscretePrior<P>,
    log: &GameLog,
    eps_r_bound: f64,
    eps_p_bound: f64,
    good_eps: (f64, f64),
) -> Result<ProbRunRow> {
    let config = &log.config;
    let seed = log.summary.seed;
    let dims = prior.dims();
    let star = prior.model(log.summary.true_atom);
    let est = empirical_estimators(dims, prior.support(), &log.hallucination_trajectories, config.n_lrn);
    let mut max_r = 0f64;
    let mut max_p = 0f64;
    let mut estimated = 0;
    for t in dims.triples() {
        let i = dims.index(t);
        if let (Some(r), Some(p)) = (&est.theta_r[i], &est.theta_p[i]) {
            estimated += 1;
            max_r = max_r.max((r - star.mean_reward(t).to_f64()).abs());
            let truth: Vec<f64> = if t.h + 1 < dims.h {
                star.transition(t).iter().map(Prob::to_f64).collect()
            } else {
                (0..dims.s).map(|x| if x == 0 { 1.0 } else { 0.0 }).collect()
            };
            max_p = max_p.max(p.iter().zip(&truth).map(|(a, b)| (a - b).abs()).sum());
        }
    }
    if let Some(p0) = &est.theta_p0 {
        max_p = max_p.max(p0.iter().zip(star.init()).map(|(a, b)| (a - b.to_f64()).abs()).sum());
    }
    let raw = log.raw_ledger(dims);
    let counts = hh_core::ledger::visit_counts(&raw);
    let u = counts.below(config.n_lrn);
    let eps = config.eps_pun_as::<P>();
    let punish = punish_event(prior, &u.complement(), &eps);
    let post = canonical_posterior(prior, &raw.total_censoring(), &punish)?;
    let (er, ep) = (P::from_rational(&f64_rational(good_eps.0)?), P::from_rational(&f64_rational(good_eps.1)?));
    let good_mass = prior
        .atoms()
        .iter()
        .zip(post.weights())
        .filter(|((m, _), _)| good_model_predicate(m, star, &u, &eps, &er, &ep))
        .fold(0.0, |acc, (_, w)| acc + w.to_f64());
    Ok(ProbRunRow {
        seed,
        n_lrn: config.n_lrn,
        true_atom: log.summary.true_atom,
        phases_run: log.summary.phases_run,
        phases_to_exploration: log.summary.phases_to_coverage,
        estimated_triples: estimated,
        max_reward_error: max_r,
        max_transition_error: max_p,
        estimators_within_bounds: max_r <= eps_r_bound && max_p <= eps_p_bound,
        good_mass,
    })
}

fn f64_rational(x: f64) -> Result<Rational> {
    hh_core::num::rational_from_decimal_f64(x).ok_or_else(|| HhError::InvalidInput(format!("{x} is not finite")))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub n_lrn: u64,
    pub runs: usize,
    pub mean_good_mass: f64,
    pub explored_runs: usize,
    pub estimator_pass_runs: usize,
}

/// Probabilistic runs for each `n_lrn`, stopped at exploration or after
/// `phase_cap` phases.
pub fn prob_sweep<P: Prob>(
    prior: &DiscretePrior<P>,
    rho: f64,
    delta: f64,
    n_lrns: &[u64],
    seeds: &[u64],
    phase_cap: u64,
    good_eps: (f64, f64),
) -> Result<(Vec<SweepRow>, Vec<ProbRunRow>)> {
    let options = RunOptions {
        log_detail: hh_core::mechanism::LogDetail::HallucinationOnly,
        audit_rho0: None,
        stop_at_coverage: true,
        ledger_digests: false,
    };
    let mut summary = Vec::new();
    let mut all = Vec::new();
    for &n in n_lrns {
        let params = small_prob_parameters(prior, rho, delta, n, Some(phase_cap))?;
        let (er, ep) = (
            hh_core::mechanism::eps_r(delta, n as f64),
            hh_core::mechanism::eps_p(delta, n as f64, prior.dims().s),
        );
        let rows: Vec<ProbRunRow> = seeds
            .par_iter()
            .map(|&seed| prob_run(prior, &params.config, seed, er, ep, good_eps, &options))
            .collect::<Result<_>>()?;
        summary.push(SweepRow {
            n_lrn: n,
            runs: rows.len(),
            mean_good_mass: rows.iter().map(|r| r.good_mass).sum::<f64>() / rows.len().max(1) as f64,
            explored_runs: rows.iter().filter(|r| r.phases_to_exploration.is_some()).count(),
            estimator_pass_runs: rows.iter().filter(|r| r.estimators_within_bounds).count(),
        });
        all.extend(rows);
    }
    Ok((summary, all))
}
