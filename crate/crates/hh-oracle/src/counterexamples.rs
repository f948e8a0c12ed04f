//! Non-hygienic mechanisms used as negative controls for the hygiene check.
//!
//! Each mechanism is a signal law `atom -> law of revealed ledger`; its
//! hygiene TV is computed by exact Bayes against the canonical posterior.

use std::collections::BTreeMap;
use std::sync::Arc;

use hh_core::error::Result;
use hh_core::ledger::Ledger;
use hh_core::mdp::{Dims, MarkovPolicy, Step, TabularModel, Trajectory, TripleSet, Triple};
use hh_core::num::Prob;
use hh_core::prior::{canonical_posterior, DiscretePrior, Posterior, Provenance};

/// Max over revealed ledgers of `TV(Pr[μ* | λ], Pr_can[μ* | λ])`, with the
/// maximizing ledger.
pub fn signal_hygiene_tv<P: Prob>(
    prior: &DiscretePrior<P>,
    signal: &dyn Fn(usize) -> Vec<(Ledger, P)>,
) -> Result<(P, Option<Ledger>)> {
    let mut joint: BTreeMap<Ledger, Vec<P>> = BTreeMap::new();
    for (i, (_, w)) in prior.atoms().iter().enumerate() {
        for (l, p) in signal(i) {
            let row = joint.entry(l).or_insert_with(|| vec![P::zero(); prior.len()]);
            row[i] = row[i].clone() + w.clone() * p;
        }
    }
    let mut best = (P::zero(), None);
    for (l, masses) in joint {
        let truth = Posterior::from_masses(prior, masses, Provenance::default())?;
        let can = canonical_posterior(prior, &l, &prior.full_event())?;
        let tv = truth.tv(&can);
        if best.1.is_none() || tv > best.0 {
            best = (tv, Some(l));
        }
    }
    Ok(best)
}

fn bandit_model<P: Prob>(dims: Dims, support: &Arc<Vec<P>>, means: &[usize]) -> Result<TabularModel<P>> {
    let rewards = means
        .iter()
        .map(|&j| {
            let mut d = vec![P::zero(); support.len()];
            d[j] = P::one();
            d
        })
        .collect();
    TabularModel::new(
        dims,
        support.clone(),
        vec![P::one()],
        vec![vec![P::one()]; dims.num_triples()],
        rewards,
    )
}

/// One-step bandit ledger revealing arm `a` (0-based) with reward index `r`.
fn bandit_ledger(dims: Dims, a: usize, r: usize, censored: bool) -> Ledger {
    let t = Triple::new(0, a, 0);
    let censor = if censored {
        TripleSet::from_triples(dims, [t])
    } else {
        TripleSet::empty(dims)
    };
    let mut l = Ledger::new(censor);
    l.push(
        MarkovPolicy::constant(dims, a),
        &Trajectory {
            steps: vec![Step { x: 0, a, r }],
        },
    );
    l
}

/// `S = A = H = 1` with deterministic rewards `support` under a uniform prior.
pub fn fabricated_rewards_prior<P: Prob>(support: &[P]) -> Result<DiscretePrior<P>> {
    let dims = Dims::new(1, 1, 1)?;
    let support = Arc::new(support.to_vec());
    let w = P::one() / P::from_u64(support.len() as u64);
    let atoms = (0..support.len())
        .map(|j| Ok((bandit_model(dims, &support, &[j])?, w.clone())))
        .collect::<Result<Vec<_>>>()?;
    DiscretePrior::new(atoms)
}

/// Always reveals the reward with support index `fabricated`, whatever the
/// true model.
pub fn fabricated_rewards_signal<P: Prob>(dims: Dims, fabricated: usize) -> impl Fn(usize) -> Vec<(Ledger, P)> {
    move |_| vec![(bandit_ledger(dims, 0, fabricated, false), P::one())]
}

/// Two-armed bandit with rewards in `{0, 1}` and a uniform prior over the
/// four reward pairs; atom `2·r(1) + r(2)`.
pub fn two_arm_prior<P: Prob>() -> Result<DiscretePrior<P>> {
    let dims = Dims::new(1, 2, 1)?;
    let support = Arc::new(vec![P::zero(), P::one()]);
    let atoms = (0..4)
        .map(|i| Ok((bandit_model(dims, &support, &[i / 2, i % 2])?, P::from_ratio(1, 4))))
        .collect::<Result<Vec<_>>>()?;
    DiscretePrior::new(atoms)
}

fn arm_rewards(atom: usize) -> [usize; 2] {
    [atom / 2, atom % 2]
}

/// Pulls arm 1, then reveals arm 1 again if it paid 1 and arm 2 otherwise.
pub fn policy_selection_signal<P: Prob>(dims: Dims) -> impl Fn(usize) -> Vec<(Ledger, P)> {
    move |atom| {
        let r = arm_rewards(atom);
        let a2 = if r[0] == 1 { 0 } else { 1 };
        vec![(bandit_ledger(dims, a2, r[a2], false), P::one())]
    }
}

/// Reveals arm 2, censoring its reward when arm 1 paid 1.
pub fn censor_selection_signal<P: Prob>(dims: Dims) -> impl Fn(usize) -> Vec<(Ledger, P)> {
    move |atom| {
        let r = arm_rewards(atom);
        vec![(bandit_ledger(dims, 1, r[1], r[0] == 1), P::one())]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use hh_core::num::Rational;

    #[test]
    fn fabricated_reward_tv_is_one_minus_prior_mass() {
        let support = [Rational::from_u64(0), Rational::from_ratio(4, 5)];
        let prior = fabricated_rewards_prior(&support).unwrap();
        let (tv, _) = signal_hygiene_tv(&prior, &fabricated_rewards_signal(prior.dims(), 1)).unwrap();
        assert_eq!(tv, Rational::from_ratio(1, 2));
        let support: Vec<Rational> = (0..4).map(|i| Rational::from_ratio(i, 4)).collect();
        let prior = fabricated_rewards_prior(&support).unwrap();
        let (tv, _) = signal_hygiene_tv(&prior, &fabricated_rewards_signal(prior.dims(), 2)).unwrap();
        assert_eq!(tv, Rational::from_ratio(3, 4));
    }

    #[test]
    fn policy_selection_posterior_is_a_point_mass_when_arm_two_is_shown() {
        let prior = two_arm_prior::<Rational>().unwrap();
        let (tv, l) = signal_hygiene_tv(&prior, &policy_selection_signal(prior.dims())).unwrap();
        assert_eq!(tv, Rational::from_ratio(1, 2));
        assert_eq!(l.unwrap().entries()[0].policy, MarkovPolicy::constant(prior.dims(), 1));
    }

    #[test]
    fn censor_selection_leaks_the_first_arm() {
        let prior = two_arm_prior::<Rational>().unwrap();
        let (tv, _) = signal_hygiene_tv(&prior, &censor_selection_signal(prior.dims())).unwrap();
        assert_eq!(tv, Rational::from_ratio(1, 2));
    }

    #[test]
    fn honest_signal_is_hygienic() {
        let prior = two_arm_prior::<Rational>().unwrap();
        let dims = prior.dims();
        let honest = move |atom: usize| {
            let r = arm_rewards(atom);
            vec![(bandit_ledger(dims, 1, r[1], false), Rational::from_u64(1))]
        };
        let (tv, _) = signal_hygiene_tv(&prior, &honest).unwrap();
        assert_eq!(tv, Rational::from_u64(0));
    }
}
