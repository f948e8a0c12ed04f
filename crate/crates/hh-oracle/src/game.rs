//! Exact law of the first `L` phases of the mechanism.
//!
//! The table is layered by phase. Layer `ℓ` holds the joint law of the true
//! atom and the raw hallucination-episode ledger at the start of phase `ℓ`;
//! everything the mechanism reveals in that phase is a function of this
//! pair plus the hallucination draw, whose law is stored per raw ledger.
//! The position of `k*` inside a phase is factored out: neither the ledger
//! evolution nor the hallucination-episode choice depends on it.

use std::collections::BTreeMap;

use hh_core::agent::{AgentMode, EpisodeContext, MechanismPosteriorSource};
use hh_core::error::{HhError, Result};
use hh_core::ledger::{underexplored_set, Ledger};
use hh_core::mdp::{enumerate_trajectories, MarkovPolicy, TripleSet};
use hh_core::mechanism::{
    hallucinated_ledger_law, hh_condition_holds, honest_ledger, p_hal_bound, punish_event,
    HhCondition, MechanismConfig,
};
use hh_core::num::Prob;
use hh_core::prior::{
    argmax_codes, bayes_greedy, canonical_gap, canonical_posterior, conditional_values,
    DiscretePrior, ModelEvent, PolicySet, Posterior, Provenance,
};
use serde::Serialize;

/// Cap on `(atom, raw ledger)` states in one layer.
pub const LEAF_CAP: u64 = 1_000_000;

/// Which principal is enumerated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Faithful,
    /// Mutation: `μ_hal` drawn from `Pr_can[· | λ_cens]`, ignoring the
    /// punish event.
    UnconditionedHallucination,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleConfig {
    pub mechanism: MechanismConfig,
    pub phases: u64,
    pub agent: AgentMode,
    pub variant: Variant,
}

/// Everything the mechanism derives from one raw ledger.
#[derive(Clone, Debug)]
pub struct RawInfo<P> {
    pub u: TripleSet,
    pub cens: Ledger,
    pub hon: Ledger,
    pub punish: ModelEvent,
    /// `Pr_can[E_pun | λ_cens]`.
    pub punish_prob: P,
    /// Atoms `μ_hal` can take, with their probabilities.
    pub hal_models: Vec<(usize, P)>,
    /// Law of `λ_hal`, identical ledgers merged.
    pub hal_law: BTreeMap<Ledger, P>,
}

#[derive(Clone, Debug)]
pub struct Layer<P> {
    pub phase: u64,
    /// Law of `(μ*, λ_raw)` at the start of the phase.
    pub states: BTreeMap<(usize, Ledger), P>,
    pub raws: BTreeMap<Ledger, RawInfo<P>>,
    /// Hallucination-episode choice for each realizable `λ_hal`.
    pub choices: BTreeMap<Ledger, MarkovPolicy>,
}

#[derive(Clone, Debug)]
pub struct JointTable<P> {
    pub config: OracleConfig,
    prior: DiscretePrior<P>,
    /// `layers[ℓ-1]` is phase `ℓ`; the extra last layer is the state after
    /// the final phase.
    layers: Vec<Layer<P>>,
}

fn posterior_masses<P: Prob>(prior: &DiscretePrior<P>, ledger: &Ledger, event: &ModelEvent) -> Result<Vec<P>> {
    Ok(canonical_posterior(prior, ledger, event)?.weights().to_vec())
}

fn raw_info<P: Prob>(
    prior: &DiscretePrior<P>,
    config: &OracleConfig,
    raw: &Ledger,
) -> Result<RawInfo<P>> {
    let u = underexplored_set(raw, config.mechanism.n_lrn);
    let cens = raw.total_censoring();
    let hon = honest_ledger(raw, &u);
    let eps = config.mechanism.eps_pun_as::<P>();
    let punish = punish_event(prior, &u.complement(), &eps);
    let given_cens = canonical_posterior(prior, &cens, &prior.full_event())?;
    let punish_prob = given_cens.prob_of(&punish);
    let event = match config.variant {
        Variant::Faithful => punish.clone(),
        Variant::UnconditionedHallucination => prior.full_event(),
    };
    let weights = posterior_masses(prior, &cens, &event)?;
    let hal_models: Vec<(usize, P)> = weights
        .into_iter()
        .enumerate()
        .filter(|(_, w)| *w > P::zero())
        .collect();
    let mut hal_law: BTreeMap<Ledger, P> = BTreeMap::new();
    for (i, w) in &hal_models {
        for (l, p) in hallucinated_ledger_law(&cens, prior.model(*i), &u)? {
            let slot = hal_law.entry(l).or_insert_with(P::zero);
            *slot = slot.clone() + w.clone() * p;
        }
    }
    Ok(RawInfo {
        u,
        cens,
        hon,
        punish,
        punish_prob,
        hal_models,
        hal_law,
    })
}

impl<P: Prob> Layer<P> {
    fn new<'a>(
        phase: u64,
        states: BTreeMap<(usize, Ledger), P>,
        prior: &DiscretePrior<P>,
        config: &OracleConfig,
    ) -> Result<Self> {
        let mut raws = BTreeMap::new();
        for (_, raw) in states.keys() {
            if !raws.contains_key(raw) {
                raws.insert(raw.clone(), raw_info(prior, config, raw)?);
            }
        }
        Ok(Layer {
            phase,
            states,
            raws,
            choices: BTreeMap::new(),
        })
    }

    /// Unnormalized `Pr[μ*, λ_k = λ]` with hallucination prior `p0`.
    pub fn masses(&self, n_atoms: usize, ledger: &Ledger, p0: &P) -> (Vec<P>, P, P) {
        let mut hal = vec![P::zero(); n_atoms];
        let mut hon = vec![P::zero(); n_atoms];
        for ((atom, raw), w) in &self.states {
            let info = &self.raws[raw];
            if let Some(q) = info.hal_law.get(ledger) {
                hal[*atom] = hal[*atom].clone() + w.clone() * q.clone();
            }
            if info.hon == *ledger {
                hon[*atom] = hon[*atom].clone() + w.clone();
            }
        }
        let sum = |v: &[P]| v.iter().fold(P::zero(), |a, b| a + b.clone());
        let (a, b) = (sum(&hal), sum(&hon));
        let q0 = P::one() - p0.clone();
        let masses = hal
            .into_iter()
            .zip(hon)
            .map(|(x, y)| p0.clone() * x + q0.clone() * y)
            .collect();
        (masses, p0.clone() * a, q0 * b)
    }

    /// Realizable hallucinated ledgers with their total probability.
    pub fn hallucinated_ledgers(&self) -> BTreeMap<Ledger, P> {
        let mut out: BTreeMap<Ledger, P> = BTreeMap::new();
        for ((_, raw), w) in &self.states {
            for (l, q) in &self.raws[raw].hal_law {
                let slot = out.entry(l.clone()).or_insert_with(P::zero);
                *slot = slot.clone() + w.clone() * q.clone();
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HygieneKind {
    Censored,
    Honest,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HygieneReport {
    pub kind: HygieneKind,
    pub phase: u64,
    pub ledgers: usize,
    pub max_tv: f64,
    pub exact_zero: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditRow {
    pub ledger: String,
    pub probability: f64,
    pub punish_prob: f64,
    pub gap: f64,
    pub condition: HhCondition,
    pub argmax: Vec<u64>,
    pub all_in_target: bool,
    pub p_hal: f64,
    pub p_hal_bound: f64,
    pub p_hal_within_bound: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditReport {
    pub phase: u64,
    pub rows: Vec<AuditRow>,
    /// Rows where the condition holds but some maximizer leaves the target.
    pub violations: usize,
    /// Rows where the condition fails.
    pub condition_failures: usize,
    /// Rows where some maximizer leaves the target.
    pub escapes: usize,
    pub p_hal_bound_failures: usize,
    /// Smallest `bound − p_hal`.
    pub min_p_hal_slack: f64,
}

impl AuditReport {
    pub fn verdict(&self) -> &'static str {
        if self.violations > 0 {
            "violated"
        } else if self.condition_failures > 0 && self.escapes == 0 {
            "condition violated, conclusion vacuously held"
        } else {
            "pass"
        }
    }
}

impl<P: Prob> JointTable<P> {
    pub fn prior(&self) -> &DiscretePrior<P> {
        &self.prior
    }

    pub fn phases(&self) -> u64 {
        self.config.phases
    }

    /// Layer for phase `ℓ ∈ 1..=L+1`.
    pub fn layer(&self, phase: u64) -> Result<&Layer<P>> {
        self.layers
            .get((phase as usize).wrapping_sub(1))
            .ok_or_else(|| HhError::OracleUnavailable(format!("phase {phase} beyond the enumerated table")))
    }

    /// Hallucination prior at the hallucination episode of phase `ℓ`.
    pub fn p0_hal(&self, phase: u64) -> P {
        self.config.mechanism.p0(self.config.mechanism.first_episode(phase))
    }

    pub fn total_mass(&self, phase: u64) -> Result<P> {
        Ok(self.layer(phase)?.states.values().fold(P::zero(), |a, b| a + b.clone()))
    }

    pub fn atom_marginal(&self, phase: u64) -> Result<Vec<P>> {
        let mut out = vec![P::zero(); self.prior.len()];
        for ((atom, _), w) in &self.layer(phase)?.states {
            out[*atom] = out[*atom].clone() + w.clone();
        }
        Ok(out)
    }

    pub fn num_states(&self, phase: u64) -> Result<usize> {
        Ok(self.layer(phase)?.states.len())
    }

    /// Leaves of the unfactored game tree for phase `ℓ`: one per
    /// `(μ*, λ_raw, k*, μ_hal, hallucinated draw, trajectory)`.
    pub fn expanded_leaf_count(&self, phase: u64) -> Result<f64> {
        let layer = self.layer(phase)?;
        if phase > self.config.phases {
            return Err(HhError::OracleUnavailable("no choices recorded after the last phase".into()));
        }
        let kstar = if self.config.mechanism.is_initial_phase(phase) {
            1.0
        } else {
            self.config.mechanism.n_phase as f64
        };
        let mut total = 0.0;
        for (atom, raw) in layer.states.keys() {
            let info = &layer.raws[raw];
            for (m, _) in &info.hal_models {
                for (l, _) in hallucinated_ledger_law(&info.cens, self.prior.model(*m), &info.u)? {
                    let pi = &layer.choices[&l];
                    total += kstar * enumerate_trajectories(self.prior.model(*atom), pi)?.len() as f64;
                }
            }
        }
        Ok(total)
    }

    /// Max over realizable `λ` of `TV(Pr[μ* | λ̂ = λ], Pr_can[μ* | λ])`.
    pub fn hygiene_tv(&self, kind: HygieneKind, phase: u64) -> Result<(HygieneReport, P)> {
        let layer = self.layer(phase)?;
        let mut grouped: BTreeMap<&Ledger, Vec<P>> = BTreeMap::new();
        for ((atom, raw), w) in &layer.states {
            let info = &layer.raws[raw];
            let l = match kind {
                HygieneKind::Censored => &info.cens,
                HygieneKind::Honest => &info.hon,
            };
            let row = grouped.entry(l).or_insert_with(|| vec![P::zero(); self.prior.len()]);
            row[*atom] = row[*atom].clone() + w.clone();
        }
        let mut max_tv = P::zero();
        for (l, masses) in &grouped {
            let truth = Posterior::from_masses(&self.prior, masses.clone(), Provenance::default())?;
            let can = canonical_posterior(&self.prior, l, &self.prior.full_event())?;
            let tv = truth.tv(&can);
            if tv > max_tv {
                max_tv = tv;
            }
        }
        Ok((
            HygieneReport {
                kind,
                phase,
                ledgers: grouped.len(),
                max_tv: max_tv.to_f64(),
                exact_zero: max_tv == P::zero(),
            },
            max_tv,
        ))
    }

    /// Max over `λ_cens` of `TV(law(λ_hon | λ_cens, E_pun), law(λ_hal | λ_cens))`.
    pub fn hallucination_distribution_check(&self, phase: u64) -> Result<P> {
        let layer = self.layer(phase)?;
        let mut honest: BTreeMap<&Ledger, BTreeMap<&Ledger, P>> = BTreeMap::new();
        let mut hal: BTreeMap<&Ledger, &BTreeMap<Ledger, P>> = BTreeMap::new();
        for ((atom, raw), w) in &layer.states {
            let info = &layer.raws[raw];
            hal.insert(&info.cens, &info.hal_law);
            if info.punish.contains(*atom) {
                let row = honest.entry(&info.cens).or_default();
                let slot = row.entry(&info.hon).or_insert_with(P::zero);
                *slot = slot.clone() + w.clone();
            }
        }
        let mut worst = P::zero();
        for (cens, law) in &honest {
            let z = law.values().fold(P::zero(), |a, b| a + b.clone());
            let hal_law = hal[cens];
            let mut keys: Vec<&Ledger> = law.keys().copied().collect();
            keys.extend(hal_law.keys());
            keys.sort();
            keys.dedup();
            let mut tv = P::zero();
            for k in keys {
                let a = law.get(k).map(|p| p.clone() / z.clone()).unwrap_or_else(P::zero);
                let b = hal_law.get(k).cloned().unwrap_or_else(P::zero);
                tv = tv + a.abs_diff(&b);
            }
            tv = tv / P::from_u64(2);
            if tv > worst {
                worst = tv;
            }
        }
        Ok(worst)
    }

    /// Exact mechanism posterior weights and `p_hal` at `λ` for episode `k`.
    pub fn mechanism_posterior_at(&self, k: u64, ledger: &Ledger) -> Result<(Vec<P>, P)> {
        let phase = self.config.mechanism.phase_of(k);
        if phase > self.config.phases {
            return Err(HhError::OracleUnavailable(format!(
                "phase {phase} beyond the {} enumerated phases",
                self.config.phases
            )));
        }
        let p0 = self.config.mechanism.p0::<P>(k);
        let (masses, a, b) = self.layer(phase)?.masses(self.prior.len(), ledger, &p0);
        let z = a.clone() + b;
        if z <= P::zero() {
            return Err(HhError::ZeroEvidence(format!(
                "ledger {} is not realizable at episode {k}",
                ledger.digest()
            )));
        }
        let weights = masses.into_iter().map(|m| m / z.clone()).collect();
        Ok((weights, a / z))
    }

    /// Audit of the one-step guarantee at every realizable hallucinated
    /// ledger of phase `ℓ`; `target` maps `(U, λ_cens)` to `Π`.
    pub fn one_step_audit(
        &self,
        phase: u64,
        target: &dyn Fn(&TripleSet, &Ledger) -> Result<PolicySet>,
    ) -> Result<AuditReport> {
        let layer = self.layer(phase)?;
        if phase > self.config.phases {
            return Err(HhError::OracleUnavailable("audit needs an enumerated phase".into()));
        }
        let h = self.prior.dims().h;
        let k = self.config.mechanism.first_episode(phase);
        let p0 = self.p0_hal(phase);
        let mut rows = Vec::new();
        for (ledger, prob) in layer.hallucinated_ledgers() {
            let u = ledger.censor_set().clone();
            let cens = ledger.total_censoring();
            let pi = target(&u, &cens)?;
            let eps = self.config.mechanism.eps_pun_as::<P>();
            let punish = punish_event(&self.prior, &u.complement(), &eps);
            let punish_prob = canonical_posterior(&self.prior, &cens, &self.prior.full_event())?.prob_of(&punish);
            let gap = canonical_gap(&canonical_posterior(&self.prior, &ledger, &self.prior.full_event())?, &pi)?;
            let condition = hh_condition_holds(self.config.mechanism.n_phase, &punish_prob, &gap, h);
            let (weights, p_hal) = self.mechanism_posterior_at(k, &ledger)?;
            let post = Posterior::from_masses(&self.prior, weights, Provenance::default())?;
            let argmax = argmax_codes(&conditional_values(&post)?);
            let all_in_target = argmax.iter().all(|c| pi.contains(*c));
            let bound = p_hal_bound(&p0, &punish_prob);
            rows.push(AuditRow {
                ledger: ledger.digest(),
                probability: prob.to_f64(),
                punish_prob: punish_prob.to_f64(),
                gap: gap.to_f64(),
                condition,
                argmax: argmax.iter().map(|c| *c as u64).collect(),
                all_in_target,
                p_hal_within_bound: p_hal.le_tol(&bound),
                p_hal: p_hal.to_f64(),
                p_hal_bound: (bound - p_hal).to_f64(),
            });
        }
        // `p_hal_bound` holds the slack until here.
        let min_p_hal_slack = rows.iter().map(|r| r.p_hal_bound).fold(f64::INFINITY, f64::min);
        for r in &mut rows {
            r.p_hal_bound += r.p_hal;
        }
        Ok(AuditReport {
            phase,
            violations: rows.iter().filter(|r| r.condition.holds && !r.all_in_target).count(),
            condition_failures: rows.iter().filter(|r| !r.condition.holds).count(),
            escapes: rows.iter().filter(|r| !r.all_in_target).count(),
            p_hal_bound_failures: rows.iter().filter(|r| !r.p_hal_within_bound).count(),
            min_p_hal_slack,
            rows,
        })
    }
}

impl<P: Prob> MechanismPosteriorSource<P> for JointTable<P> {
    fn mechanism_masses(&self, ctx: &EpisodeContext, revealed: &Ledger) -> Result<Vec<P>> {
        Ok(self.mechanism_posterior_at(ctx.k, revealed)?.0)
    }
}

fn choose<P: Prob>(
    prior: &DiscretePrior<P>,
    config: &OracleConfig,
    layer: &Layer<P>,
    ledger: &Ledger,
) -> Result<MarkovPolicy> {
    match config.agent {
        AgentMode::CanonicalTruster => bayes_greedy(&canonical_posterior(prior, ledger, &prior.full_event())?),
        AgentMode::FullyRational => {
            let p0 = config.mechanism.p0::<P>(config.mechanism.first_episode(layer.phase));
            let (masses, _, _) = layer.masses(prior.len(), ledger, &p0);
            bayes_greedy(&Posterior::from_masses(prior, masses, Provenance::default())?)
        }
    }
}

/// Builds the exact joint table for `config.phases` phases.
pub fn enumerate_game<P: Prob>(config: &OracleConfig, prior: &DiscretePrior<P>) -> Result<JointTable<P>> {
    config.mechanism.validate()?;
    let dims = prior.dims();
    let start: BTreeMap<(usize, Ledger), P> = prior
        .atoms()
        .iter()
        .enumerate()
        .map(|(i, (_, w))| ((i, Ledger::raw(dims)), w.clone()))
        .collect();
    let mut layers = vec![Layer::new(1, start, prior, config)?];
    for phase in 1..=config.phases {
        let layer = layers.last_mut().expect("nonempty");
        let ledgers: Vec<Ledger> = layer.hallucinated_ledgers().into_keys().collect();
        for l in ledgers {
            let pi = choose(prior, config, layer, &l).map_err(|e| e.in_episode(config.mechanism.first_episode(phase), phase))?;
            layer.choices.insert(l, pi);
        }
        let mut next: BTreeMap<(usize, Ledger), P> = BTreeMap::new();
        let mut traj_cache: BTreeMap<(usize, MarkovPolicy), Vec<(hh_core::mdp::Trajectory, P)>> = BTreeMap::new();
        for ((atom, raw), w) in &layer.states {
            let info = &layer.raws[raw];
            let mut by_policy: BTreeMap<&MarkovPolicy, P> = BTreeMap::new();
            for (l, q) in &info.hal_law {
                let slot = by_policy.entry(&layer.choices[l]).or_insert_with(P::zero);
                *slot = slot.clone() + q.clone();
            }
            for (pi, q) in by_policy {
                let key = (*atom, pi.clone());
                if !traj_cache.contains_key(&key) {
                    traj_cache.insert(key.clone(), enumerate_trajectories(prior.model(*atom), pi)?);
                }
                for (tau, pt) in &traj_cache[&key] {
                    let mut r = raw.clone();
                    r.push(pi.clone(), tau);
                    let slot = next.entry((*atom, r)).or_insert_with(P::zero);
                    *slot = slot.clone() + w.clone() * q.clone() * pt.clone();
                }
                if next.len() as u64 > LEAF_CAP {
                    return Err(HhError::CapExceeded {
                        what: "oracle states",
                        needed: next.len() as f64,
                        cap: LEAF_CAP,
                    });
                }
            }
        }
        layers.push(Layer::new(phase + 1, next, prior, config)?);
    }
    Ok(JointTable {
        config: config.clone(),
        prior: prior.clone(),
        layers,
    })
}
