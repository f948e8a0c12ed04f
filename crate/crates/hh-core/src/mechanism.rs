//! The hidden-hallucination principal.
//!
//! Each phase of `n_phase` episodes hides one hallucination episode `k*`.
//! Every other episode sees the honest ledger (past hallucination-episode
//! data, rewards censored on under-explored triples); `k*` sees the same
//! transitions with rewards on fully-explored triples redrawn from a model
//! sampled from the canonical posterior restricted to the punish event.
//! Only hallucination-episode trajectories ever enter a ledger.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{Agent, AgentMode, EpisodeContext};
use crate::analysis::sufficiently_visiting_policies;
use crate::error::{HhError, Result};
use crate::ledger::{CensoredStep, CensoredTrajectory, Ledger, LedgerKind, VisitCounts};
use crate::mdp::{
    reach_set, sample_categorical, sample_trajectory, MarkovPolicy, TabularModel, Trajectory,
    Triple, TripleSet,
};
use crate::num::{format_rational, parse_rational, Prob, Rational};
use crate::prior::{
    canonical_posterior, canonical_gap, f_min, r_min, DiscretePrior, ModelEvent, Posterior,
};
use crate::rng::{self, Streams};

/// Cap on the support of an exactly enumerated hallucinated-ledger law.
pub const HALLUCINATION_LAW_CAP: u64 = 1_000_000;

mod rational_str {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Rational, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Number(f64),
        }
        let parsed = match Raw::deserialize(d)? {
            Raw::Text(t) => parse_rational(&t),
            Raw::Number(x) => crate::num::rational_from_decimal_f64(x),
        };
        parsed.ok_or_else(|| serde::de::Error::custom("expected a rational number"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismConfig {
    pub n_phase: u64,
    pub n_lrn: u64,
    #[serde(with = "rational_str")]
    pub eps_pun: Rational,
    pub rho: f64,
    pub total_phases: u64,
}

impl MechanismConfig {
    pub fn validate(&self) -> Result<()> {
        let zero = Rational::from_ratio(0, 1);
        let one = Rational::from_ratio(1, 1);
        if self.n_phase == 0 || self.n_lrn == 0 {
            return Err(HhError::InvalidInput("n_phase and n_lrn must be positive".into()));
        }
        if self.eps_pun <= zero || self.eps_pun >= one {
            return Err(HhError::InvalidInput(format!(
                "eps_pun must lie in (0,1), got {}",
                format_rational(&self.eps_pun)
            )));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(HhError::InvalidInput(format!("rho must lie in (0,1], got {}", self.rho)));
        }
        Ok(())
    }

    pub fn phase_of(&self, k: u64) -> u64 {
        (k - 1) / self.n_phase + 1
    }

    pub fn first_episode(&self, phase: u64) -> u64 {
        (phase - 1) * self.n_phase + 1
    }

    /// Initial phases fix `k*` to their first episode.
    pub fn is_initial_phase(&self, phase: u64) -> bool {
        phase <= self.n_lrn
    }

    /// Prior probability, known to the agent, that episode `k` is the
    /// hallucination episode of its phase.
    pub fn p0<P: Prob>(&self, k: u64) -> P {
        let phase = self.phase_of(k);
        if self.is_initial_phase(phase) {
            if k == self.first_episode(phase) {
                P::one()
            } else {
                P::zero()
            }
        } else {
            P::from_ratio(1, self.n_phase as i64)
        }
    }

    pub fn eps_pun_as<P: Prob>(&self) -> P {
        P::from_rational(&self.eps_pun)
    }
}

/// Atoms whose mean reward is at most `eps` on every fully-explored triple.
pub fn punish_event<P: Prob>(prior: &DiscretePrior<P>, explored: &TripleSet, eps: &P) -> ModelEvent {
    ModelEvent::from_indices(
        prior.len(),
        prior
            .atoms()
            .iter()
            .enumerate()
            .filter(|(_, (m, _))| explored.iter().all(|t| !m.mean_reward(t).exceeds(eps)))
            .map(|(i, _)| i),
    )
}

/// Draws `μ_hal ~ Pr_can[· | λ_cens, E_pun]`; returns the atom index.
pub fn sample_hallucinated_model<P: Prob, R: Rng + ?Sized>(
    prior: &DiscretePrior<P>,
    cens: &Ledger,
    punish: &ModelEvent,
    rng: &mut R,
) -> Result<usize> {
    let post = punish_posterior(prior, cens, punish)?;
    Ok(sample_categorical(post.weights(), rng))
}

/// `Pr_can[· | λ_cens, E_pun]`, with the failing triples named on error.
pub fn punish_posterior<'a, P: Prob>(
    prior: &'a DiscretePrior<P>,
    cens: &Ledger,
    punish: &ModelEvent,
) -> Result<Posterior<'a, P>> {
    canonical_posterior(prior, cens, punish).map_err(|e| match e {
        HhError::ZeroEvidence(msg) => HhError::ZeroEvidence(format!(
            "punish event has zero posterior mass (needs f_min(eps_pun) > 0 / q_pun > 0); \
             fully-explored triples {}: {msg}",
            cens_explored_hint(punish, prior.len())
        )),
        other => other,
    })
}

fn cens_explored_hint(punish: &ModelEvent, n: usize) -> String {
    format!("event keeps {} of {n} atoms", punish.len())
}

/// Hallucinated ledger: rewards at fully-explored occurrences drawn iid
/// from `μ_hal`, censored on `U`.
pub fn hallucinate_ledger<P: Prob, R: Rng + ?Sized>(
    cens: &Ledger,
    mu_hal: &TabularModel<P>,
    u: &TripleSet,
    rng: &mut R,
) -> Ledger {
    let mut out = Ledger::new(u.clone());
    for e in cens.entries() {
        let steps = e
            .traj
            .steps
            .iter()
            .enumerate()
            .map(|(h, s)| {
                let t = Triple::new(s.x, s.a, h);
                let r = if u.contains(t) {
                    None
                } else {
                    Some(sample_categorical(mu_hal.reward_dist(t), rng))
                };
                CensoredStep { x: s.x, a: s.a, r }
            })
            .collect();
        out.push_censored(e.policy.clone(), CensoredTrajectory { steps });
    }
    out
}

/// Exact law of [`hallucinate_ledger`] for a fixed `μ_hal`.
pub fn hallucinated_ledger_law<P: Prob>(
    cens: &Ledger,
    mu_hal: &TabularModel<P>,
    u: &TripleSet,
) -> Result<Vec<(Ledger, P)>> {
    let mut partial: Vec<(Vec<CensoredTrajectory>, P)> = vec![(Vec::new(), P::one())];
    for e in cens.entries() {
        let mut options: Vec<(Vec<CensoredStep>, P)> = vec![(Vec::new(), P::one())];
        for (h, s) in e.traj.steps.iter().enumerate() {
            let t = Triple::new(s.x, s.a, h);
            let mut next = Vec::new();
            for (steps, mass) in options {
                if u.contains(t) {
                    let mut st = steps.clone();
                    st.push(CensoredStep { x: s.x, a: s.a, r: None });
                    next.push((st, mass));
                } else {
                    for (r, p) in mu_hal.reward_dist(t).iter().enumerate() {
                        if *p > P::zero() {
                            let mut st = steps.clone();
                            st.push(CensoredStep { x: s.x, a: s.a, r: Some(r) });
                            next.push((st, mass.clone() * p.clone()));
                        }
                    }
                }
            }
            options = next;
        }
        let mut next = Vec::new();
        for (trajs, mass) in &partial {
            for (steps, m) in &options {
                let mut tr = trajs.clone();
                tr.push(CensoredTrajectory { steps: steps.clone() });
                next.push((tr, mass.clone() * m.clone()));
            }
        }
        if next.len() as u64 > HALLUCINATION_LAW_CAP {
            return Err(HhError::CapExceeded {
                what: "hallucinated ledgers",
                needed: next.len() as f64,
                cap: HALLUCINATION_LAW_CAP,
            });
        }
        partial = next;
    }
    Ok(partial
        .into_iter()
        .map(|(trajs, mass)| {
            let mut l = Ledger::new(u.clone());
            for (e, tr) in cens.entries().iter().zip(trajs) {
                l.push_censored(e.policy.clone(), tr);
            }
            (l, mass)
        })
        .collect())
}

/// `λ_hon = cens(λ_raw; U)`.
pub fn honest_ledger(raw: &Ledger, u: &TripleSet) -> Ledger {
    raw.recensor(u)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HhCondition {
    /// `1/n_phase`.
    pub lhs: f64,
    /// `punish_prob · gap / 3H`.
    pub rhs: f64,
    pub holds: bool,
}

/// `1/n_phase ≤ punish_prob · gap / 3H`, decided in the scalar type.
pub fn hh_condition_holds<P: Prob>(n_phase: u64, punish_prob: &P, gap: &P, horizon: usize) -> HhCondition {
    let lhs = P::from_ratio(1, n_phase as i64);
    let rhs = punish_prob.clone() * gap.clone() / P::from_u64(3 * horizon as u64);
    HhCondition {
        lhs: lhs.to_f64(),
        rhs: rhs.to_f64(),
        holds: gap.clone() > P::zero() && lhs.le_tol(&rhs),
    }
}

/// `1 / (1 + q(1−p0)/p0)`; 0 when `p0 = 0`.
pub fn p_hal_bound<P: Prob>(p0: &P, q: &P) -> P {
    if *p0 <= P::zero() {
        return P::zero();
    }
    P::one() / (P::one() + q.clone() * (P::one() - p0.clone()) / p0.clone())
}

fn ceil_u64<P: Prob>(x: &P) -> u64 {
    if P::EXACT {
        let r = x.to_rational();
        let c = r.ceil().to_integer();
        num_traits::ToPrimitive::to_u64(&c).unwrap_or(u64::MAX)
    } else {
        let v = x.to_f64();
        let c = (v * (1.0 - 1e-12)).ceil();
        if c >= u64::MAX as f64 {
            u64::MAX
        } else {
            c as u64
        }
    }
}

#[derive(Clone, Debug)]
pub struct DetParameters<P> {
    pub config: MechanismConfig,
    pub r_min: P,
    /// `C = f_min(eps_pun)`.
    pub c: P,
}

/// Parameters of the deterministic exploration guarantee.
pub fn det_parameters<P: Prob>(prior: &DiscretePrior<P>) -> Result<DetParameters<P>> {
    if !prior.is_deterministic() {
        return Err(HhError::AssumptionViolated("prior atoms must be deterministic".into()));
    }
    if !prior.is_reward_independent() {
        return Err(HhError::AssumptionViolated("prior must be reward-independent".into()));
    }
    let d = prior.dims();
    let rm = r_min(prior);
    if rm <= P::zero() {
        return Err(HhError::AssumptionViolated("r_min must be positive".into()));
    }
    let eps = rm.clone() / P::from_u64(2 * d.h as u64);
    let c = f_min(prior, &eps);
    if c <= P::zero() {
        return Err(HhError::AssumptionViolated("f_min(eps_pun) must be positive".into()));
    }
    let sah = d.num_triples();
    let c_pow = (0..sah).fold(P::one(), |acc, _| acc * c.clone());
    let n_phase = ceil_u64(&(P::from_u64(6 * d.h as u64) / (rm.clone() * c_pow)));
    Ok(DetParameters {
        config: MechanismConfig {
            n_phase,
            n_lrn: 1,
            eps_pun: eps.to_rational(),
            rho: 1.0,
            total_phases: sah as u64,
        },
        r_min: rm,
        c,
    })
}

/// Reward error bound `sqrt(2 ln(1/δ)/n)`.
pub fn eps_r(delta: f64, n_lrn: f64) -> f64 {
    (2.0 * (1.0 / delta).ln() / n_lrn).sqrt()
}

/// Transition error bound `2 sqrt(2(S ln5 + ln(1/δ))/n)`.
pub fn eps_p(delta: f64, n_lrn: f64, s: usize) -> f64 {
    2.0 * (2.0 * (s as f64 * 5f64.ln() + (1.0 / delta).ln()) / n_lrn).sqrt()
}

/// Leading constants of the sample-size and phase-count bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbConstants {
    /// Coefficient of `H^4(...)/Δ0²` in the final `n_lrn` bound.
    pub c_nlrn: f64,
    /// Coefficient of `H^4(...)/Δ0²` in `n_0`.
    pub c_n0: f64,
}

impl Default for ProbConstants {
    fn default() -> Self {
        ProbConstants {
            c_nlrn: 192.0,
            c_n0: 96.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProbOverrides {
    /// Any positive lower bound on the punish probability over all phases.
    pub q_pun: Option<f64>,
    pub r_alt: Option<f64>,
    pub n_lrn: Option<u64>,
    pub n_phase: Option<u64>,
    pub total_phases: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbParameters {
    pub config: MechanismConfig,
    pub rho: f64,
    pub delta: f64,
    pub r_alt: f64,
    pub q_pun: f64,
    pub q_pun_source: String,
    pub eps_pun: f64,
    pub delta_gap: f64,
    pub rho_0: f64,
    pub rho_prog: f64,
    pub iota: f64,
    /// Theorem-sized `n_lrn` before any override.
    pub n_lrn_theorem: f64,
    pub l0: f64,
    /// `36·SAH³·n_lrn/Δ0²`, the closed form printed next to `L0`.
    pub l0_closed_form: f64,
    pub delta_fail: f64,
    pub delta_0: f64,
    pub eps_r: f64,
    pub eps_p: f64,
    pub n_0: f64,
    /// Theorem-sized `n_phase` before any override.
    pub n_phase_theorem: f64,
    pub k_episodes: f64,
    pub constants: ProbConstants,
}

/// Parameters of the probabilistic exploration guarantee.
///
/// Without overrides the prior must be reward-independent, so that
/// `r_alt = r_min` and `q_pun ≥ f_min(eps_pun)^{SAH}`.
pub fn prob_parameters<P: Prob>(
    prior: &DiscretePrior<P>,
    rho: f64,
    delta: f64,
    overrides: &ProbOverrides,
    constants: ProbConstants,
) -> Result<ProbParameters> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(HhError::AssumptionViolated(format!("rho must lie in (0,1], got {rho}")));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(HhError::AssumptionViolated(format!("delta must lie in (0,1], got {delta}")));
    }
    let d = prior.dims();
    let (s, sah, h) = (d.s as f64, d.num_triples() as f64, d.h as f64);
    let independent = prior.is_reward_independent();
    let r_alt_exact: Rational = match overrides.r_alt {
        Some(r) => Rational::from_float(r).ok_or_else(|| HhError::InvalidInput("r_alt".into()))?,
        None if independent => r_min(prior).to_rational(),
        None => {
            return Err(HhError::AssumptionViolated(
                "prior is not reward-independent: supply r_alt and q_pun".into(),
            ))
        }
    };
    let r_alt = num_traits::ToPrimitive::to_f64(&r_alt_exact).unwrap_or(0.0);
    if r_alt <= 0.0 {
        return Err(HhError::AssumptionViolated("r_alt must be positive".into()));
    }
    let rho_exact = crate::num::rational_from_decimal_f64(rho)
        .ok_or_else(|| HhError::InvalidInput("rho".into()))?;
    let eps_exact = r_alt_exact * rho_exact / Rational::from_u64(18 * d.h as u64);
    let eps_pun = num_traits::ToPrimitive::to_f64(&eps_exact).unwrap_or(0.0);
    let (q_pun, q_pun_source) = match overrides.q_pun {
        Some(q) => (q, "override".to_string()),
        None if independent => {
            let f = f_min(prior, &P::from_rational(&eps_exact)).to_f64();
            (f.powf(sah), "f_min^SAH".to_string())
        }
        None => {
            return Err(HhError::AssumptionViolated(
                "prior is not reward-independent: supply q_pun".into(),
            ))
        }
    };
    if q_pun <= 0.0 {
        return Err(HhError::AssumptionViolated("q_pun must be positive".into()));
    }
    let delta_gap = rho * r_alt / 2.0;
    let rho_0 = delta_gap / (3.0 * h);
    let rho_prog = delta_gap * delta_gap / (6.0 * h * h);
    let iota = 4.0 * (20.0 * sah * h / (rho * q_pun * eps_pun * r_alt)).ln();
    let n_lrn_theorem = (constants.c_nlrn * h.powi(4) * (s * 5f64.ln() + (1.0 / delta).ln() + iota)
        / (delta_gap * delta_gap))
        .max((2.0 / delta).ln())
        .ceil();
    let n_lrn = overrides.n_lrn.map(|n| n as f64).unwrap_or(n_lrn_theorem);
    let l0 = 4.0 * sah * n_lrn / rho_prog;
    let l0_closed_form = 36.0 * sah * h * h * n_lrn / (delta_gap * delta_gap);
    let delta_fail = delta / (2.0 * l0);
    let delta_0 = delta_fail * q_pun * eps_pun / (4.0 * sah);
    let n_0 = constants.c_n0 * h.powi(4) * (s * 5f64.ln() + (1.0 / delta_0).ln()) / (delta_gap * delta_gap);
    let n_phase_theorem = (6.0 * h / (delta_gap * q_pun) * (1.0 - 1e-12)).ceil();
    let n_phase = overrides.n_phase.map(|n| n as f64).unwrap_or(n_phase_theorem);
    let total_phases = overrides.total_phases.map(|n| n as f64).unwrap_or(l0.ceil());
    let to_u64 = |v: f64| if v >= u64::MAX as f64 { u64::MAX } else { v as u64 };
    Ok(ProbParameters {
        config: MechanismConfig {
            n_phase: to_u64(n_phase),
            n_lrn: to_u64(n_lrn),
            eps_pun: eps_exact,
            rho,
            total_phases: to_u64(total_phases),
        },
        rho,
        delta,
        r_alt,
        q_pun,
        q_pun_source,
        eps_pun,
        delta_gap,
        rho_0,
        rho_prog,
        iota,
        n_lrn_theorem,
        l0,
        l0_closed_form,
        delta_fail,
        delta_0,
        eps_r: eps_r(delta_0, n_lrn),
        eps_p: eps_p(delta_0, n_lrn, d.s),
        n_0,
        n_phase_theorem,
        k_episodes: l0.ceil() * n_phase,
        constants,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct QpunRalt<P> {
    /// Min over the family of `Pr_can[E_pun(U_λ) | cens(λ)]`, with `U_λ`
    /// the triples seen fewer than `n_lrn` times in `λ`.
    pub q_pun: P,
    /// Min over the family of `Pr_can[r ≤ eps on every triple | cens(λ)]`.
    pub q_pun_all_triples: P,
    /// Min over the family and over `(x,a,h) ∈ U_λ` (the ledger's own
    /// censor set) of `E_can[r(x,a,h) | λ]`.
    pub r_alt: P,
}

/// Exact `q_pun` and `r_alt` over an explicit ledger family.
pub fn q_pun_r_alt_exact<P: Prob>(
    prior: &DiscretePrior<P>,
    n_lrn: u64,
    eps_pun: &P,
    family: &[Ledger],
) -> Result<QpunRalt<P>> {
    if family.len() > 100_000 {
        return Err(HhError::CapExceeded {
            what: "ledger family",
            needed: family.len() as f64,
            cap: 100_000,
        });
    }
    let d = prior.dims();
    let everything = punish_event(prior, &TripleSet::all(d), eps_pun);
    let mut q: Option<P> = None;
    let mut q_all: Option<P> = None;
    let mut r_alt: Option<P> = None;
    let keep_min = |slot: &mut Option<P>, v: P| {
        if slot.as_ref().map_or(true, |s| v < *s) {
            *slot = Some(v);
        }
    };
    for ledger in family {
        let cens = ledger.total_censoring();
        let post = canonical_posterior(prior, &cens, &prior.full_event())?;
        let explored = crate::ledger::underexplored_set(ledger, n_lrn).complement();
        keep_min(&mut q, post.prob_of(&punish_event(prior, &explored, eps_pun)));
        keep_min(&mut q_all, post.prob_of(&everything));
        let post = canonical_posterior(prior, ledger, &prior.full_event())?;
        for t in ledger.censor_set().iter() {
            let mean = prior
                .atoms()
                .iter()
                .zip(post.weights())
                .fold(P::zero(), |acc, ((m, _), w)| acc + w.clone() * m.mean_reward(t).clone());
            keep_min(&mut r_alt, mean);
        }
    }
    Ok(QpunRalt {
        q_pun: q.unwrap_or_else(P::one),
        q_pun_all_triples: q_all.unwrap_or_else(P::one),
        r_alt: r_alt.unwrap_or_else(P::one),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LogDetail {
    /// Every episode is simulated and logged.
    #[default]
    Full,
    /// Only hallucination episodes are simulated; the mechanism state is
    /// identical because other episodes never enter a ledger.
    HallucinationOnly,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    pub log_detail: LogDetail,
    /// When set, each phase audits the hallucination episode against
    /// `Π_ℓ = {π : P*[E_U] ≥ rho_0}`.
    pub audit_rho0: Option<f64>,
    pub stop_at_coverage: bool,
    pub ledger_digests: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            log_detail: LogDetail::Full,
            audit_rho0: None,
            stop_at_coverage: false,
            ledger_digests: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoggedStep {
    pub x: usize,
    pub a: usize,
    pub h: usize,
    pub r: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub k: u64,
    pub phase: u64,
    pub is_hallucination: bool,
    pub revealed: String,
    pub policy: u64,
    pub trajectory: Vec<LoggedStep>,
    pub streams: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseAudit {
    pub target_size: usize,
    pub gap: Option<f64>,
    pub condition: Option<HhCondition>,
    pub policy_in_target: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub phase: u64,
    pub kstar: u64,
    pub underexplored: Vec<[usize; 3]>,
    pub punish_prob: f64,
    pub punish_event_size: usize,
    pub hal_model: usize,
    pub hal_policy: u64,
    /// The hallucination episode visited an under-explored triple.
    pub visited_underexplored: bool,
    /// Number of reachable triples reaching `n_lrn` hallucination visits
    /// for the first time in this phase.
    pub newly_explored: usize,
    pub audit: Option<PhaseAudit>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameSummary {
    pub seed: u64,
    pub true_atom: usize,
    pub agent: AgentMode,
    pub phases_run: u64,
    pub reach_size: usize,
    pub phases_to_coverage: Option<u64>,
    pub new_triple_indicator: Vec<bool>,
    pub visit_counts: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameLog {
    pub config: MechanismConfig,
    pub episodes: Vec<EpisodeRecord>,
    pub phases: Vec<PhaseRecord>,
    pub summary: GameSummary,
    /// Hallucination-episode trajectories in phase order.
    #[serde(skip)]
    pub hallucination_trajectories: Vec<(MarkovPolicy, Trajectory)>,
}

impl GameLog {
    /// One JSON object per line: episodes, then phases, then the summary.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.episodes {
            out.push_str(&serde_json::json!({"type": "episode", "record": e}).to_string());
            out.push('\n');
        }
        for p in &self.phases {
            out.push_str(&serde_json::json!({"type": "phase", "record": p}).to_string());
            out.push('\n');
        }
        out.push_str(&serde_json::json!({"type": "summary", "record": self.summary}).to_string());
        out.push('\n');
        out
    }

    /// Raw hallucination-episode ledger at the end of the run.
    pub fn raw_ledger(&self, dims: crate::mdp::Dims) -> Ledger {
        let mut l = Ledger::raw(dims);
        for (p, t) in &self.hallucination_trajectories {
            l.push(p.clone(), t);
        }
        l
    }
}

fn log_steps<P: Prob>(traj: &Trajectory, support: &[P]) -> Vec<LoggedStep> {
    traj.steps
        .iter()
        .enumerate()
        .map(|(h, s)| LoggedStep {
            x: s.x + 1,
            a: s.a + 1,
            h: h + 1,
            r: support[s.r].to_f64(),
        })
        .collect()
}

fn ledger_id(kind: LedgerKind, phase: u64, ledger: &Ledger, digests: bool) -> String {
    let tag = match kind {
        LedgerKind::Honest => "hon",
        LedgerKind::Hallucinated => "hal",
        LedgerKind::Raw => "raw",
        LedgerKind::TotallyCensored => "cens",
    };
    if digests {
        format!("{tag}:{phase}:{}", ledger.digest())
    } else {
        format!("{tag}:{phase}")
    }
}

/// Runs `config.total_phases` phases of the mechanism against `agent`.
pub fn run_game<P: Prob>(
    config: &MechanismConfig,
    prior: &DiscretePrior<P>,
    agent: &dyn Agent<P>,
    seed: u64,
    true_atom: Option<usize>,
    options: &RunOptions,
) -> Result<GameLog> {
    config.validate()?;
    let dims = prior.dims();
    let streams = Streams::new(seed);
    let truth = match true_atom {
        Some(i) if i < prior.len() => i,
        Some(i) => return Err(HhError::InvalidInput(format!("true atom {i} out of range"))),
        None => {
            let w: Vec<P> = prior.atoms().iter().map(|(_, w)| w.clone()).collect();
            sample_categorical(&w, &mut streams.stream(&rng::truth()))
        }
    };
    let mu_star = prior.model(truth);
    let support = prior.support().clone();
    let eps = config.eps_pun_as::<P>();
    let reach = reach_set(mu_star, &P::from_rational(
        &crate::num::rational_from_decimal_f64(config.rho).expect("validated rho"),
    ))?;

    let mut raw = Ledger::raw(dims);
    let mut cens = Ledger::totally_censored(dims);
    let mut counts = VisitCounts::zeros(dims);
    let mut episodes = Vec::new();
    let mut phases = Vec::new();
    let mut hal_trajs = Vec::new();
    let mut indicator = Vec::new();
    let mut coverage: Option<u64> = None;
    let covered = |c: &VisitCounts| reach.iter().all(|t| c.get(t) >= config.n_lrn);
    if covered(&counts) {
        coverage = Some(0);
    }

    for phase in 1..=config.total_phases {
        let u = counts.below(config.n_lrn);
        let explored = u.complement();
        let punish = punish_event(prior, &explored, &eps);
        let prior_given_cens = canonical_posterior(prior, &cens, &prior.full_event())
            .map_err(|e| e.in_episode(config.first_episode(phase), phase))?;
        let punish_prob = prior_given_cens.prob_of(&punish);
        let hal_atom = sample_hallucinated_model(
            prior,
            &cens,
            &punish,
            &mut streams.stream(&rng::hal_model(phase)),
        )
        .map_err(|e| e.in_episode(config.first_episode(phase), phase))?;
        let hal = hallucinate_ledger(
            &cens,
            prior.model(hal_atom),
            &u,
            &mut streams.stream(&rng::hal_rewards(phase)),
        );
        let hon = honest_ledger(&raw, &u);
        let first = config.first_episode(phase);
        let kstar = if config.is_initial_phase(phase) {
            first
        } else {
            first + streams.stream(&rng::kstar(phase)).gen_range(0..config.n_phase)
        };
        let hal_id = ledger_id(LedgerKind::Hallucinated, phase, &hal, options.ledger_digests);
        let hon_id = ledger_id(LedgerKind::Honest, phase, &hon, options.ledger_digests);

        // Within a phase the choice depends only on (p0 class, ledger).
        let mut cache: HashMap<(bool, bool), MarkovPolicy> = HashMap::new();
        let mut choose = |k: u64, is_hal: bool| -> Result<MarkovPolicy> {
            let special = config.is_initial_phase(phase) && k == first;
            let key = (special, is_hal);
            if let Some(p) = cache.get(&key) {
                return Ok(p.clone());
            }
            let revealed = if is_hal { &hal } else { &hon };
            let p = agent
                .choose_policy(&EpisodeContext { k, phase }, revealed)
                .map_err(|e| e.in_episode(k, phase))?;
            cache.insert(key, p.clone());
            Ok(p)
        };

        let ks: Vec<u64> = match options.log_detail {
            LogDetail::Full => (first..first + config.n_phase).collect(),
            LogDetail::HallucinationOnly => vec![kstar],
        };
        let mut hal_episode = None;
        for k in ks {
            let is_hal = k == kstar;
            let policy = choose(k, is_hal)?;
            let stream = rng::episode_traj(k);
            let traj = sample_trajectory(mu_star, &policy, &mut streams.stream(&stream));
            let mut names = vec![stream];
            if is_hal {
                names.push(rng::hal_model(phase));
                names.push(rng::hal_rewards(phase));
                if !config.is_initial_phase(phase) {
                    names.push(rng::kstar(phase));
                }
                hal_episode = Some((policy.clone(), traj.clone()));
            }
            episodes.push(EpisodeRecord {
                k,
                phase,
                is_hallucination: is_hal,
                revealed: if is_hal { hal_id.clone() } else { hon_id.clone() },
                policy: policy.encode(),
                trajectory: log_steps(&traj, &support),
                streams: names,
            });
        }
        let (hal_policy, hal_traj) = hal_episode.expect("k* lies in its phase");

        let visited_underexplored = hal_traj.triples().any(|t| u.contains(t));
        let audit = match options.audit_rho0 {
            Some(rho0) => Some(audit_phase(
                config, prior, mu_star, &u, &hal, &punish_prob, &hal_policy, rho0,
            )?),
            None => None,
        };

        let before = counts.clone();
        counts.add_visits(hal_traj.triples());
        let newly = reach
            .iter()
            .filter(|t| before.get(*t) < config.n_lrn && counts.get(*t) >= config.n_lrn)
            .count();
        indicator.push(visited_underexplored);
        phases.push(PhaseRecord {
            phase,
            kstar,
            underexplored: u.keys(),
            punish_prob: punish_prob.to_f64(),
            punish_event_size: punish.len(),
            hal_model: hal_atom,
            hal_policy: hal_policy.encode(),
            visited_underexplored,
            newly_explored: newly,
            audit,
        });
        raw.push(hal_policy.clone(), &hal_traj);
        cens.push(hal_policy.clone(), &hal_traj);
        hal_trajs.push((hal_policy, hal_traj));
        if coverage.is_none() && covered(&counts) {
            coverage = Some(phase);
            if options.stop_at_coverage {
                break;
            }
        }
    }

    Ok(GameLog {
        config: config.clone(),
        summary: GameSummary {
            seed,
            true_atom: truth,
            agent: agent.mode(),
            phases_run: phases.len() as u64,
            reach_size: reach.len(),
            phases_to_coverage: coverage,
            new_triple_indicator: indicator,
            visit_counts: counts.as_slice().to_vec(),
        },
        episodes,
        phases,
        hallucination_trajectories: hal_trajs,
    })
}

#[allow(clippy::too_many_arguments)]
fn audit_phase<P: Prob>(
    config: &MechanismConfig,
    prior: &DiscretePrior<P>,
    mu_star: &TabularModel<P>,
    u: &TripleSet,
    hal: &Ledger,
    punish_prob: &P,
    hal_policy: &MarkovPolicy,
    rho0: f64,
) -> Result<PhaseAudit> {
    let target = sufficiently_visiting_policies(mu_star, u, &P::from_rational(
        &Rational::from_float(rho0).ok_or_else(|| HhError::InvalidInput("rho0".into()))?,
    ))?;
    let policy_in_target = target.contains(hal_policy.encode() as usize);
    let post = canonical_posterior(prior, hal, &prior.full_event())?;
    let (gap, condition) = match canonical_gap(&post, &target) {
        Ok(g) => {
            let c = hh_condition_holds(config.n_phase, punish_prob, &g, prior.dims().h);
            (Some(g.to_f64()), Some(c))
        }
        Err(HhError::DegenerateSplit(_)) => (None, None),
        Err(e) => return Err(e),
    };
    Ok(PhaseAudit {
        target_size: target.len(),
        gap,
        condition,
        policy_in_target,
    })
}
