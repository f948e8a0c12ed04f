//! Finite priors, canonical posteriors, canonical gaps and Bayes-greedy
//! selection. All Bayesian computation is exact enumeration over atoms.

use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use crate::error::{HhError, Result};
use crate::ledger::{Ledger, LedgerStats};
use crate::mdp::{enumerate_policies, policy_value, Dims, MarkovPolicy, TabularModel, Triple};
use crate::num::Prob;

pub const EXPANSION_CAP: u64 = 100_000;

/// Explicit subset of prior atom indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModelEvent {
    members: Vec<bool>,
}

impl ModelEvent {
    pub fn full(n: usize) -> Self {
        ModelEvent {
            members: vec![true; n],
        }
    }

    pub fn from_indices(n: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut members = vec![false; n];
        for i in indices {
            members[i] = true;
        }
        ModelEvent { members }
    }

    pub fn contains(&self, i: usize) -> bool {
        self.members[i]
    }

    pub fn len(&self) -> usize {
        self.members.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn universe(&self) -> usize {
        self.members.len()
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.members
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(|(i, _)| i)
    }

    pub fn intersection(&self, other: &Self) -> Self {
        ModelEvent {
            members: self
                .members
                .iter()
                .zip(&other.members)
                .map(|(a, b)| *a && *b)
                .collect(),
        }
    }
}

/// Per-atom values of every policy, in canonical-encoding order.
#[derive(Clone, Debug)]
pub struct PolicyValues<P> {
    pub policies: Vec<MarkovPolicy>,
    /// `values[atom][policy]`.
    pub values: Vec<Vec<P>>,
}

#[derive(Clone, Debug)]
pub struct DiscretePrior<P> {
    atoms: Vec<(TabularModel<P>, P)>,
    support: Arc<Vec<P>>,
    values: OnceLock<PolicyValues<P>>,
}

impl<P: Prob> DiscretePrior<P> {
    pub fn new(atoms: Vec<(TabularModel<P>, P)>) -> Result<Self> {
        let first = atoms
            .first()
            .ok_or_else(|| HhError::InvalidModel("prior has no atoms".into()))?;
        let dims = first.0.dims();
        let support = first.0.support().clone();
        let mut total = P::zero();
        let mut shared = Vec::with_capacity(atoms.len());
        for (m, w) in atoms {
            if m.dims() != dims {
                return Err(HhError::InvalidModel("atoms disagree on (S,A,H)".into()));
            }
            if **m.support() != *support {
                return Err(HhError::InvalidModel(
                    "atoms must share one global reward support".into(),
                ));
            }
            if w <= P::zero() {
                return Err(HhError::InvalidModel("prior weights must be positive".into()));
            }
            total = total + w.clone();
            shared.push((m.with_support(support.clone()), w));
        }
        if !total.approx_eq(&P::one()) {
            return Err(HhError::InvalidModel(format!(
                "prior weights sum to {} not 1",
                total.to_f64()
            )));
        }
        Ok(DiscretePrior {
            atoms: shared,
            support,
            values: OnceLock::new(),
        })
    }

    pub fn atoms(&self) -> &[(TabularModel<P>, P)] {
        &self.atoms
    }

    pub fn model(&self, i: usize) -> &TabularModel<P> {
        &self.atoms[i].0
    }

    pub fn weight(&self, i: usize) -> &P {
        &self.atoms[i].1
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn dims(&self) -> Dims {
        self.atoms[0].0.dims()
    }

    pub fn support(&self) -> &Arc<Vec<P>> {
        &self.support
    }

    pub fn full_event(&self) -> ModelEvent {
        ModelEvent::full(self.len())
    }

    pub fn is_deterministic(&self) -> bool {
        self.atoms.iter().all(|(m, _)| m.is_deterministic())
    }

    pub fn map_scalar<Q: Prob>(&self) -> DiscretePrior<Q> {
        let atoms = self
            .atoms
            .iter()
            .map(|(m, w)| (m.map_scalar::<Q>(), Q::from_rational(&w.to_rational())))
            .collect();
        DiscretePrior::new(atoms).expect("scalar conversion preserves validity")
    }

    /// Cached value table over all policies.
    pub fn policy_values(&self) -> Result<&PolicyValues<P>> {
        if let Some(v) = self.values.get() {
            return Ok(v);
        }
        let policies = enumerate_policies(self.dims())?;
        let cells = policies.len() as f64 * self.len() as f64;
        if cells > 5e7 {
            return Err(HhError::CapExceeded {
                what: "policy-value table cells",
                needed: cells,
                cap: 50_000_000,
            });
        }
        let values = self
            .atoms
            .iter()
            .map(|(m, _)| policies.iter().map(|p| policy_value(m, p)).collect())
            .collect();
        let _ = self.values.set(PolicyValues { policies, values });
        Ok(self.values.get().expect("just set"))
    }

    /// Whether transition structure and every per-triple mean reward are
    /// mutually independent under the prior.
    pub fn is_reward_independent(&self) -> bool {
        let dims = self.dims();
        let dyn_key = |m: &TabularModel<P>| -> Vec<P::Key> {
            m.init()
                .iter()
                .chain(m.transitions_by_index().iter().flatten())
                .map(|p| p.key())
                .collect()
        };
        let mut dyn_law: BTreeMap<Vec<P::Key>, P> = BTreeMap::new();
        let mut mean_law: Vec<BTreeMap<P::Key, P>> = vec![BTreeMap::new(); dims.num_triples()];
        let mut joint: BTreeMap<(Vec<P::Key>, Vec<P::Key>), P> = BTreeMap::new();
        for (m, w) in &self.atoms {
            let dk = dyn_key(m);
            let mk: Vec<P::Key> = m.means().iter().map(|p| p.key()).collect();
            add_to(&mut dyn_law, dk.clone(), w);
            for (i, k) in mk.iter().enumerate() {
                add_to(&mut mean_law[i], k.clone(), w);
            }
            add_to(&mut joint, (dk, mk), w);
        }
        joint.iter().all(|((dk, mk), w)| {
            let mut prod = dyn_law[dk].clone();
            for (i, k) in mk.iter().enumerate() {
                prod = prod * mean_law[i][k].clone();
            }
            prod.approx_eq(w)
        })
    }
}

fn add_to<K: Ord, P: Prob>(map: &mut BTreeMap<K, P>, key: K, w: &P) {
    let slot = map.entry(key).or_insert_with(P::zero);
    *slot = slot.clone() + w.clone();
}

/// How a mean reward value becomes a reward distribution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardFamily {
    /// Point mass at the mean.
    Deterministic,
    /// Bernoulli with the given mean, support `{0, 1}`.
    Bernoulli,
}

/// Transition prior with independent per-triple mean-reward marginals.
#[derive(Clone, Debug)]
pub struct FactoredRewardPrior<P> {
    pub dims: Dims,
    /// `(init, transitions by triple index, weight)`.
    pub transition_atoms: Vec<(Vec<P>, Vec<Vec<P>>, P)>,
    /// Per triple: `(mean value, probability)`.
    pub marginals: Vec<Vec<(P, P)>>,
    pub family: RewardFamily,
}

impl<P: Prob> FactoredRewardPrior<P> {
    pub fn num_atoms(&self) -> f64 {
        self.marginals
            .iter()
            .fold(self.transition_atoms.len() as f64, |acc, m| acc * m.len() as f64)
    }

    fn global_support(&self) -> Vec<P> {
        match self.family {
            RewardFamily::Bernoulli => vec![P::zero(), P::one()],
            RewardFamily::Deterministic => {
                let mut vals: Vec<P> = Vec::new();
                for m in &self.marginals {
                    for (v, _) in m {
                        if !vals.iter().any(|u| u == v) {
                            vals.push(v.clone());
                        }
                    }
                }
                vals.sort_by(|a, b| a.partial_cmp(b).expect("comparable"));
                vals
            }
        }
    }

    /// Cartesian product; transition atom outermost, then triples in
    /// row-major order with the first triple most significant.
    pub fn expand(&self) -> Result<DiscretePrior<P>> {
        let count = self.num_atoms();
        if count > EXPANSION_CAP as f64 {
            return Err(HhError::CapExceeded {
                what: "factored prior atoms",
                needed: count,
                cap: EXPANSION_CAP,
            });
        }
        let support = Arc::new(self.global_support());
        let reward_dist = |mean: &P| -> Vec<P> {
            match self.family {
                RewardFamily::Bernoulli => vec![P::one() - mean.clone(), mean.clone()],
                RewardFamily::Deterministic => support
                    .iter()
                    .map(|v| if v == mean { P::one() } else { P::zero() })
                    .collect(),
            }
        };
        let n_t = self.dims.num_triples();
        let mut atoms = Vec::with_capacity(count as usize);
        for (init, trans, tw) in &self.transition_atoms {
            let mut digits = vec![0usize; n_t];
            loop {
                let mut w = tw.clone();
                let mut rewards = Vec::with_capacity(n_t);
                for (i, &d) in digits.iter().enumerate() {
                    let (mean, p) = &self.marginals[i][d];
                    w = w * p.clone();
                    rewards.push(reward_dist(mean));
                }
                let model = TabularModel::new(
                    self.dims,
                    support.clone(),
                    init.clone(),
                    trans.clone(),
                    rewards,
                )?;
                atoms.push((model, w));
                // odometer, last triple fastest
                let mut i = n_t;
                loop {
                    if i == 0 {
                        break;
                    }
                    i -= 1;
                    digits[i] += 1;
                    if digits[i] < self.marginals[i].len() {
                        break;
                    }
                    digits[i] = 0;
                    if i == 0 {
                        i = usize::MAX;
                        break;
                    }
                }
                if i == usize::MAX || n_t == 0 {
                    break;
                }
            }
        }
        DiscretePrior::new(atoms)
    }

    pub fn f_min(&self, eps: &P) -> P {
        self.marginals
            .iter()
            .map(|m| {
                m.iter()
                    .filter(|(v, _)| !v.exceeds(eps))
                    .fold(P::zero(), |acc, (_, p)| acc + p.clone())
            })
            .fold(None, |best: Option<P>, v| match best {
                Some(b) if b <= v => Some(b),
                _ => Some(v),
            })
            .unwrap_or_else(P::one)
    }

    pub fn r_min(&self) -> P {
        self.marginals
            .iter()
            .map(|m| {
                m.iter()
                    .fold(P::zero(), |acc, (v, p)| acc + v.clone() * p.clone())
            })
            .fold(None, |best: Option<P>, v| match best {
                Some(b) if b <= v => Some(b),
                _ => Some(v),
            })
            .unwrap_or_else(P::zero)
    }
}

fn min_over_triples<P: Prob>(dims: Dims, f: impl Fn(Triple) -> P) -> P {
    dims.triples()
        .map(f)
        .fold(None, |best: Option<P>, v| match best {
            Some(b) if b <= v => Some(b),
            _ => Some(v),
        })
        .expect("at least one triple")
}

/// `min_{x,a,h} Pr[r(x,a,h) ≤ eps]`.
pub fn f_min<P: Prob>(prior: &DiscretePrior<P>, eps: &P) -> P {
    min_over_triples(prior.dims(), |t| {
        prior
            .atoms
            .iter()
            .filter(|(m, _)| !m.mean_reward(t).exceeds(eps))
            .fold(P::zero(), |acc, (_, w)| acc + w.clone())
    })
}

/// `min_{x,a,h} E[r(x,a,h)]`.
pub fn r_min<P: Prob>(prior: &DiscretePrior<P>) -> P {
    min_over_triples(prior.dims(), |t| {
        prior
            .atoms
            .iter()
            .fold(P::zero(), |acc, (m, w)| acc + w.clone() * m.mean_reward(t).clone())
    })
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Provenance {
    /// Digest of the conditioning ledger, if any.
    pub ledger: Option<String>,
    /// Size of the conditioning event.
    pub event_size: usize,
    pub label: String,
}

/// Weights over the prior's atoms (zero off-support).
#[derive(Clone, Debug)]
pub struct Posterior<'a, P> {
    prior: &'a DiscretePrior<P>,
    weights: Vec<P>,
    pub provenance: Provenance,
}

impl<'a, P: Prob> Posterior<'a, P> {
    /// Normalizes nonnegative masses; `ZeroEvidence` when they vanish.
    pub fn from_masses(
        prior: &'a DiscretePrior<P>,
        masses: Vec<P>,
        provenance: Provenance,
    ) -> Result<Self> {
        let total = masses.iter().fold(P::zero(), |acc, w| acc + w.clone());
        if total <= P::zero() {
            return Err(HhError::ZeroEvidence(format!(
                "all posterior mass vanished ({})",
                provenance.label
            )));
        }
        let weights = masses.into_iter().map(|w| w / total.clone()).collect();
        Ok(Posterior {
            prior,
            weights,
            provenance,
        })
    }

    pub fn prior(&self) -> &'a DiscretePrior<P> {
        self.prior
    }

    pub fn weights(&self) -> &[P] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> &P {
        &self.weights[i]
    }

    pub fn support(&self) -> ModelEvent {
        ModelEvent::from_indices(
            self.weights.len(),
            self.weights
                .iter()
                .enumerate()
                .filter(|(_, w)| **w > P::zero())
                .map(|(i, _)| i),
        )
    }

    pub fn prob_of(&self, event: &ModelEvent) -> P {
        event
            .indices()
            .fold(P::zero(), |acc, i| acc + self.weights[i].clone())
    }

    /// Total-variation distance to another posterior over the same prior.
    pub fn tv(&self, other: &Posterior<'_, P>) -> P {
        let sum = self
            .weights
            .iter()
            .zip(&other.weights)
            .fold(P::zero(), |acc, (a, b)| acc + a.abs_diff(b));
        sum / P::from_u64(2)
    }
}

/// `Pr_can[μ* ∈ · | λ, E]`.
pub fn canonical_posterior<'a, P: Prob>(
    prior: &'a DiscretePrior<P>,
    ledger: &Ledger,
    event: &ModelEvent,
) -> Result<Posterior<'a, P>> {
    let stats = LedgerStats::from_ledger(ledger, prior.support().len());
    canonical_posterior_from_stats(prior, &stats, event, Some(ledger.digest()))
}

pub fn canonical_posterior_from_stats<'a, P: Prob>(
    prior: &'a DiscretePrior<P>,
    stats: &LedgerStats,
    event: &ModelEvent,
    ledger_digest: Option<String>,
) -> Result<Posterior<'a, P>> {
    let zero = P::zero();
    let weights: Vec<P::Weight> = prior
        .atoms
        .iter()
        .enumerate()
        .map(|(i, (m, w))| {
            if event.contains(i) {
                stats.weight(m, w)
            } else {
                P::weight_of(&zero)
            }
        })
        .collect();
    let provenance = Provenance {
        ledger: ledger_digest,
        event_size: event.len(),
        label: "canonical".into(),
    };
    let weights = P::normalize(&weights).ok_or_else(|| {
        HhError::ZeroEvidence(format!(
            "ledger {} inconsistent with prior restricted to {} atoms",
            provenance.ledger.as_deref().unwrap_or("-"),
            provenance.event_size
        ))
    })?;
    Ok(Posterior {
        prior,
        weights,
        provenance,
    })
}

/// `E[V(π; μ)]` under the posterior.
pub fn conditional_value<P: Prob>(posterior: &Posterior<'_, P>, policy: &MarkovPolicy) -> P {
    posterior
        .prior
        .atoms
        .iter()
        .zip(&posterior.weights)
        .filter(|(_, w)| **w > P::zero())
        .fold(P::zero(), |acc, ((m, _), w)| acc + w.clone() * policy_value(m, policy))
}

/// Conditional values of all policies, canonical-encoding order.
pub fn conditional_values<P: Prob>(posterior: &Posterior<'_, P>) -> Result<Vec<P>> {
    let table = posterior.prior.policy_values()?;
    let mut out = vec![P::zero(); table.policies.len()];
    for (row, w) in table.values.iter().zip(&posterior.weights) {
        if *w <= P::zero() {
            continue;
        }
        for (o, v) in out.iter_mut().zip(row) {
            *o = o.clone() + w.clone() * v.clone();
        }
    }
    Ok(out)
}

/// Membership over policies in canonical-encoding order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PolicySet {
    pub members: Vec<bool>,
}

impl PolicySet {
    pub fn from_fn(policies: &[MarkovPolicy], f: impl Fn(&MarkovPolicy) -> bool) -> Self {
        PolicySet {
            members: policies.iter().map(f).collect(),
        }
    }

    pub fn contains(&self, code: usize) -> bool {
        self.members[code]
    }

    pub fn len(&self) -> usize {
        self.members.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_all(&self) -> bool {
        self.members.iter().all(|b| *b)
    }

    pub fn complement(&self) -> Self {
        PolicySet {
            members: self.members.iter().map(|b| !b).collect(),
        }
    }
}

fn max_of<P: Prob>(vals: impl Iterator<Item = P>) -> Option<P> {
    vals.fold(None, |best: Option<P>, v| match best {
        Some(b) if b >= v => Some(b),
        _ => Some(v),
    })
}

/// `max_{π∈Π} E[V] − max_{π∉Π} E[V]`.
pub fn canonical_gap<P: Prob>(posterior: &Posterior<'_, P>, pi: &PolicySet) -> Result<P> {
    let values = conditional_values(posterior)?;
    gap_from_values(&values, pi)
}

pub fn gap_from_values<P: Prob>(values: &[P], pi: &PolicySet) -> Result<P> {
    if pi.members.len() != values.len() {
        return Err(HhError::InvalidInput("policy set size mismatch".into()));
    }
    if pi.is_empty() {
        return Err(HhError::DegenerateSplit("policy subset is empty".into()));
    }
    if pi.is_all() {
        return Err(HhError::DegenerateSplit("policy subset is every policy".into()));
    }
    let inside = max_of(values.iter().zip(&pi.members).filter(|(_, m)| **m).map(|(v, _)| v.clone()));
    let outside = max_of(values.iter().zip(&pi.members).filter(|(_, m)| !**m).map(|(v, _)| v.clone()));
    Ok(inside.expect("nonempty") - outside.expect("nonempty"))
}

/// Canonical codes of all value-maximizing policies (ties within tolerance).
pub fn argmax_codes<P: Prob>(values: &[P]) -> Vec<usize> {
    let best = greedy_code(values);
    values
        .iter()
        .enumerate()
        .filter(|(_, v)| !values[best].exceeds(v))
        .map(|(i, _)| i)
        .collect()
}

/// Smallest code among maximizers.
pub fn greedy_code<P: Prob>(values: &[P]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if v.exceeds(&values[best]) {
            best = i;
        }
    }
    best
}

/// Bayes-greedy policy with smallest-encoding tie-breaking.
pub fn bayes_greedy<P: Prob>(posterior: &Posterior<'_, P>) -> Result<MarkovPolicy> {
    let values = conditional_values(posterior)?;
    let table = posterior.prior.policy_values()?;
    Ok(table.policies[greedy_code(&values)].clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances;
    use crate::ledger::{ledger_probability, Ledger};
    use crate::mdp::{enumerate_trajectories, optimal_policy, TripleSet};
    use crate::num::Rational;
    use proptest::prelude::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    #[test]
    fn fmin_rmin_on_micro_det() {
        let prior = instances::micro_det_1::<Rational>();
        assert_eq!(f_min(&prior, &r(1, 10)), r(1, 2));
        assert_eq!(f_min(&prior, &r(1, 1)), r(1, 1));
        assert_eq!(r_min(&prior), r(2, 5));
        let factored = instances::micro_det_1_factored::<Rational>();
        assert_eq!(factored.f_min(&r(1, 10)), f_min(&prior, &r(1, 10)));
        assert_eq!(factored.r_min(), r_min(&prior));
    }

    #[test]
    fn fmin_zero_when_all_positive() {
        let prior = instances::constant_reward_prior::<Rational>(r(3, 10));
        assert_eq!(f_min(&prior, &r(0, 1)), r(0, 1));
        assert_eq!(r_min(&prior), r(3, 10));
    }

    #[test]
    fn heterogeneous_rmin_matches_bruteforce() {
        let prior = instances::micro_stoch_1::<Rational>();
        let d = prior.dims();
        let brute = d
            .triples()
            .map(|t| {
                prior
                    .atoms()
                    .iter()
                    .fold(r(0, 1), |acc, (m, w)| acc + w * m.mean_reward(t))
            })
            .min()
            .unwrap();
        assert_eq!(r_min(&prior), brute);
    }

    #[test]
    fn empty_ledger_gives_prior() {
        let prior = instances::micro_stoch_1::<Rational>();
        let post =
            canonical_posterior(&prior, &Ledger::raw(prior.dims()), &prior.full_event()).unwrap();
        for (i, (_, w)) in prior.atoms().iter().enumerate() {
            assert_eq!(post.weight(i), w);
        }
    }

    #[test]
    fn revealed_reward_filters_to_consistent_atom() {
        let prior = instances::micro_det_1::<Rational>();
        let d = prior.dims();
        let truth = prior.model(201);
        let mut ledger = Ledger::raw(d);
        for pi in enumerate_policies(d).unwrap() {
            let tau = enumerate_trajectories(truth, &pi).unwrap().remove(0).0;
            ledger.push(pi, &tau);
        }
        // Every reachable triple is revealed; the unreachable ones stay free.
        let post = canonical_posterior(&prior, &ledger, &prior.full_event()).unwrap();
        assert_eq!(post.support().len(), 4);
        assert!(post.support().contains(201));
    }

    #[test]
    fn impossible_conditioning_is_zero_evidence() {
        let prior = instances::micro_det_1::<f64>();
        let d = prior.dims();
        let truth = prior.model(3);
        let pi = MarkovPolicy::constant(d, 0);
        let tau = enumerate_trajectories(truth, &pi).unwrap().remove(0).0;
        let mut ledger = Ledger::raw(d);
        ledger.push(pi, &tau);
        let wrong = (0..prior.len())
            .find(|&i| ledger_probability(prior.model(i), &ledger) == 0.0)
            .unwrap();
        let event = ModelEvent::from_indices(prior.len(), [wrong]);
        assert!(matches!(
            canonical_posterior(&prior, &ledger, &event),
            Err(HhError::ZeroEvidence(_))
        ));
    }

    #[test]
    fn conditional_value_linearity() {
        let prior = instances::micro_stoch_1::<Rational>();
        let pi = MarkovPolicy::constant(prior.dims(), 1);
        let masses: Vec<Rational> = (0..prior.len())
            .map(|i| if i == 4 || i == 9 { r(1, 1) } else { r(0, 1) })
            .collect();
        let post = Posterior::from_masses(&prior, masses, Provenance::default()).unwrap();
        let expect = (policy_value(prior.model(4), &pi) + policy_value(prior.model(9), &pi)) / r(2, 1);
        assert_eq!(conditional_value(&post, &pi), expect);
        let vals = conditional_values(&post).unwrap();
        assert_eq!(vals[pi.encode() as usize], expect);
    }

    #[test]
    fn point_mass_greedy_matches_dp_optimum() {
        let prior = instances::micro_det_1::<Rational>();
        for i in [0usize, 17, 128, 255] {
            let masses = (0..prior.len()).map(|j| if j == i { r(1, 1) } else { r(0, 1) }).collect();
            let post = Posterior::from_masses(&prior, masses, Provenance::default()).unwrap();
            let greedy = bayes_greedy(&post).unwrap();
            let (v, _) = optimal_policy(prior.model(i));
            assert_eq!(policy_value(prior.model(i), &greedy), v);
        }
    }

    #[test]
    fn ties_break_to_smallest_encoding() {
        // Prior is symmetric in actions everywhere: every policy ties.
        let prior = instances::micro_det_1::<Rational>();
        let post = canonical_posterior(&prior, &Ledger::raw(prior.dims()), &prior.full_event()).unwrap();
        assert_eq!(bayes_greedy(&post).unwrap().encode(), 0);
    }

    #[test]
    fn gap_signs_and_degenerate_splits() {
        let prior = instances::micro_stoch_1::<Rational>();
        let masses = (0..prior.len()).map(|j| if j == 300 { r(1, 1) } else { r(0, 1) }).collect();
        let post = Posterior::from_masses(&prior, masses, Provenance::default()).unwrap();
        let values = conditional_values(&post).unwrap();
        let best = greedy_code(&values);
        let pols = &prior.policy_values().unwrap().policies;
        let unique = argmax_codes(&values).len() == 1;
        let only = PolicySet::from_fn(pols, |p| p.encode() as usize == best);
        let g = canonical_gap(&post, &only).unwrap();
        if unique {
            assert!(g > r(0, 1));
        }
        assert_eq!(g.clone(), -canonical_gap(&post, &only.complement()).unwrap());
        let none = PolicySet::from_fn(pols, |_| false);
        assert!(matches!(canonical_gap(&post, &none), Err(HhError::DegenerateSplit(_))));
        assert!(matches!(
            canonical_gap(&post, &none.complement()),
            Err(HhError::DegenerateSplit(_))
        ));
    }

    #[test]
    fn symmetric_split_has_zero_gap() {
        let prior = instances::micro_det_1::<Rational>();
        let post = canonical_posterior(&prior, &Ledger::raw(prior.dims()), &prior.full_event()).unwrap();
        let pols = &prior.policy_values().unwrap().policies;
        let first_action_one = PolicySet::from_fn(pols, |p| p.action(0, 0) == 0);
        assert_eq!(canonical_gap(&post, &first_action_one).unwrap(), r(0, 1));
    }

    #[test]
    fn factored_expansion_counts_and_independence() {
        let f = instances::micro_det_1_factored::<Rational>();
        let p = f.expand().unwrap();
        assert_eq!(p.len(), 256);
        assert!(p.is_reward_independent());
        assert!(p.is_deterministic());
        let s = instances::micro_stoch_1::<Rational>();
        assert_eq!(s.len(), 512);
        assert!(s.is_reward_independent());
        assert!(!s.is_deterministic());
    }

    #[test]
    fn correlated_prior_is_not_independent() {
        let prior = instances::micro_det_1::<Rational>();
        let d = prior.dims();
        let t0 = Triple::new(0, 0, 0);
        let t1 = Triple::new(0, 1, 0);
        // keep atoms whose rewards agree on two triples: correlated.
        let atoms: Vec<_> = prior
            .atoms()
            .iter()
            .filter(|(m, _)| m.mean_reward(t0) == m.mean_reward(t1))
            .map(|(m, _)| (m.clone(), r(1, 128)))
            .collect();
        let corr = DiscretePrior::new(atoms).unwrap();
        assert_eq!(corr.dims(), d);
        assert!(!corr.is_reward_independent());
    }

    #[test]
    fn sequential_conditioning_is_exact() {
        let prior = instances::micro_stoch_1::<Rational>();
        let d = prior.dims();
        let truth = prior.model(77);
        let pols = enumerate_policies(d).unwrap();
        let u = TripleSet::from_triples(d, [Triple::new(1, 0, 0)]);
        let mut ledger = Ledger::new(u.clone());
        for (k, pi) in pols.iter().enumerate().take(3) {
            let trajs = enumerate_trajectories(truth, pi).unwrap();
            ledger.push(pi.clone(), &trajs[k % trajs.len()].0);
        }
        let whole = canonical_posterior(&prior, &ledger, &prior.full_event()).unwrap();
        // Condition one entry at a time by re-weighting the previous posterior.
        let mut masses: Vec<Rational> = prior.atoms().iter().map(|(_, w)| w.clone()).collect();
        for e in ledger.entries() {
            let mut single = Ledger::new(u.clone());
            single.push_censored(e.policy.clone(), e.traj.clone());
            let step = Posterior::from_masses(&prior, masses.clone(), Provenance::default()).unwrap();
            masses = (0..prior.len())
                .map(|i| step.weight(i) * ledger_probability(prior.model(i), &single))
                .collect();
        }
        let seq = Posterior::from_masses(&prior, masses, Provenance::default()).unwrap();
        assert_eq!(whole.weights(), seq.weights());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn posterior_sums_to_one_and_stays_on_support(seed in any::<u64>()) {
            use rand::SeedableRng;
            let prior = instances::micro_stoch_1::<f64>();
            let d = prior.dims();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let truth = prior.model((seed % 512) as usize);
            let pols = enumerate_policies(d).unwrap();
            let mut ledger = Ledger::raw(d);
            for k in 0..4 {
                let pi = &pols[(seed as usize + k * 5) % 16];
                ledger.push(pi.clone(), &crate::mdp::sample_trajectory(truth, pi, &mut rng));
            }
            let post = canonical_posterior(&prior, &ledger, &prior.full_event()).unwrap();
            let total: f64 = post.weights().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            for i in 0..prior.len() {
                if ledger_probability(prior.model(i), &ledger) == 0.0 {
                    prop_assert_eq!(post.weight(i), &0.0);
                }
            }
        }

        #[test]
        fn greedy_invariant_under_rescaling(seed in any::<u64>(), scale in 1u32..1000) {
            let prior = instances::micro_stoch_1::<Rational>();
            let masses: Vec<Rational> = (0..prior.len())
                .map(|i| r(((seed >> (i % 60)) & 7) as i64 + 1, 1))
                .collect();
            let scaled: Vec<Rational> = masses.iter().map(|m| m * r(scale as i64, 7)).collect();
            let a = Posterior::from_masses(&prior, masses, Provenance::default()).unwrap();
            let b = Posterior::from_masses(&prior, scaled, Provenance::default()).unwrap();
            prop_assert_eq!(bayes_greedy(&a).unwrap(), bayes_greedy(&b).unwrap());
        }

        #[test]
        fn gap_antisymmetry(mask in 1u16..u16::MAX, seed in any::<u64>()) {
            let prior = instances::micro_stoch_1::<Rational>();
            let masses: Vec<Rational> = (0..prior.len())
                .map(|i| r(((seed >> (i % 61)) & 3) as i64 + 1, 1))
                .collect();
            let post = Posterior::from_masses(&prior, masses, Provenance::default()).unwrap();
            let pols = &prior.policy_values().unwrap().policies;
            let set = PolicySet::from_fn(pols, |p| mask >> p.encode() & 1 == 1);
            let g = canonical_gap(&post, &set).unwrap();
            let gc = canonical_gap(&post, &set.complement()).unwrap();
            prop_assert_eq!(g.clone(), -gc.clone());
            prop_assert!(g.max(gc) >= r(0, 1));
        }
    }
}
