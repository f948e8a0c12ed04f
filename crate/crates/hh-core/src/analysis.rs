//! Lemma-level numerical verifiers.
//!
//! Everything here evaluates both sides of an inequality or identity by
//! exact dynamic programming so callers can assert on the result. Stages are
//! 0-based internally; `first_unexplored_stage` reports 1-based stages.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{HhError, Result};
use crate::mdp::{
    enumerate_policies, event_visit_probability, occupancy_omega, policy_value, Dims, MarkovPolicy,
    TabularModel, Trajectory, Triple, TripleSet,
};
use crate::num::Prob;
use crate::prior::PolicySet;

/// Mean rewards at most `eps` on every triple of `explored`.
pub fn is_punished<P: Prob>(model: &TabularModel<P>, explored: &TripleSet, eps: &P) -> bool {
    explored.iter().all(|t| model.mean_reward(t).le_tol(eps))
}

fn l1<P: Prob>(p: &[P], q: &[P]) -> P {
    p.iter().zip(q).fold(P::zero(), |acc, (a, b)| acc + a.abs_diff(b))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityReport<P> {
    pub init_l1: P,
    /// Transition ℓ1 distances on the fully-explored triples.
    pub trans_l1: BTreeMap<Triple, P>,
}

impl<P: Prob> SimilarityReport<P> {
    pub fn max_distance(&self) -> P {
        self.trans_l1.values().fold(self.init_l1.clone(), |m, d| {
            if d.exceeds(&m) {
                d.clone()
            } else {
                m
            }
        })
    }

    pub fn is_similar(&self, eps: &P) -> bool {
        self.max_distance().le_tol(eps)
    }
}

/// ℓ1 distances of initial distributions and of transitions on `explored`.
pub fn similarity<P: Prob>(
    m1: &TabularModel<P>,
    m2: &TabularModel<P>,
    explored: &TripleSet,
) -> SimilarityReport<P> {
    SimilarityReport {
        init_l1: l1(m1.init(), m2.init()),
        trans_l1: explored
            .iter()
            .map(|t| (t, l1(m1.transition(t), m2.transition(t))))
            .collect(),
    }
}

/// `E^π_μ[Σ_h r̃(x_h,a_h,h)·1{E_h}]`, `E_h` = stayed in `U^c` before `h`.
pub fn truncated_return<P: Prob>(
    model: &TabularModel<P>,
    policy: &MarkovPolicy,
    u: &TripleSet,
    rtilde: &[P],
) -> P {
    let dims = model.dims();
    let mut stay: Vec<P> = model.init().to_vec();
    let mut total = P::zero();
    for h in 0..dims.h {
        let mut next = vec![P::zero(); dims.s];
        for (x, m) in stay.iter().enumerate() {
            let t = Triple::new(x, policy.action(x, h), h);
            total = total + m.clone() * rtilde[dims.index(t)].clone();
            if !u.contains(t) && h + 1 < dims.h {
                for (xn, p) in model.transition(t).iter().enumerate() {
                    next[xn] = next[xn].clone() + m.clone() * p.clone();
                }
            }
        }
        stay = next;
    }
    total
}

fn binom2(n: usize) -> u64 {
    (n * n.saturating_sub(1) / 2) as u64
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationGap<P> {
    pub lhs: P,
    /// `C(H,2)·ε`, the constant in the lemma statement.
    pub bound: P,
    /// `C(H+1,2)·ε`, what the performance-difference argument yields once
    /// the initial-distribution term is counted.
    pub proof_bound: P,
}

impl<P: Prob> SimulationGap<P> {
    pub fn holds(&self) -> bool {
        self.lhs.le_tol(&self.bound)
    }

    pub fn holds_proof_bound(&self) -> bool {
        self.lhs.le_tol(&self.proof_bound)
    }
}

/// Both sides of the simulation lemma for one policy.
pub fn simulation_gap<P: Prob>(
    model: &TabularModel<P>,
    model_star: &TabularModel<P>,
    u: &TripleSet,
    rtilde: &[P],
    policy: &MarkovPolicy,
    eps: &P,
) -> Result<SimulationGap<P>> {
    let dims = model.dims();
    if rtilde.len() != dims.num_triples() || rtilde.iter().any(|r| *r < P::zero() || *r > P::one()) {
        return Err(HhError::InvalidInput("rtilde must map every triple into [0,1]".into()));
    }
    if !similarity(model, model_star, &u.complement()).is_similar(eps) {
        return Err(HhError::PreconditionViolated(format!(
            "models are not {}-similar on U^c",
            eps.to_f64()
        )));
    }
    let a = truncated_return(model, policy, u, rtilde);
    let b = truncated_return(model_star, policy, u, rtilde);
    Ok(SimulationGap {
        lhs: a.abs_diff(&b),
        bound: P::from_u64(binom2(dims.h)) * eps.clone(),
        proof_bound: P::from_u64(binom2(dims.h + 1)) * eps.clone(),
    })
}

/// Finite-horizon Markov reward process; stages 0-based.
#[derive(Clone, Debug, PartialEq)]
pub struct Mrp<P> {
    pub init: Vec<P>,
    /// `trans[h][x]` is the next-state law after stage `h`.
    pub trans: Vec<Vec<Vec<P>>>,
    /// `reward[h][x]`.
    pub reward: Vec<Vec<P>>,
}

impl<P: Prob> Mrp<P> {
    pub fn horizon(&self) -> usize {
        self.reward.len()
    }

    pub fn states(&self) -> usize {
        self.init.len()
    }

    /// The chain a Markov policy induces, with reward `rtilde`.
    pub fn from_policy(model: &TabularModel<P>, policy: &MarkovPolicy, rtilde: &[P]) -> Self {
        let dims = model.dims();
        let at = |x: usize, h: usize| Triple::new(x, policy.action(x, h), h);
        Mrp {
            init: model.init().to_vec(),
            trans: (0..dims.h)
                .map(|h| (0..dims.s).map(|x| model.transition(at(x, h)).to_vec()).collect())
                .collect(),
            reward: (0..dims.h)
                .map(|h| (0..dims.s).map(|x| rtilde[dims.index(at(x, h))].clone()).collect())
                .collect(),
        }
    }

    /// The absorbing construction: an extra state `S` with zero reward
    /// that swallows every trajectory right after it visits `U`.
    pub fn absorbing(model: &TabularModel<P>, policy: &MarkovPolicy, u: &TripleSet, rtilde: &[P]) -> Self {
        let dims = model.dims();
        let s1 = dims.s + 1;
        let sink = |i: usize| (0..s1).map(|j| if i == j { P::one() } else { P::zero() }).collect::<Vec<P>>();
        let mut init = model.init().to_vec();
        init.push(P::zero());
        let mut trans = Vec::with_capacity(dims.h);
        let mut reward = Vec::with_capacity(dims.h);
        for h in 0..dims.h {
            let mut th = Vec::with_capacity(s1);
            let mut rh = Vec::with_capacity(s1);
            for x in 0..dims.s {
                let t = Triple::new(x, policy.action(x, h), h);
                rh.push(rtilde[dims.index(t)].clone());
                if u.contains(t) {
                    th.push(sink(dims.s));
                } else {
                    let mut p = model.transition(t).to_vec();
                    p.push(P::zero());
                    th.push(p);
                }
            }
            th.push(sink(dims.s));
            rh.push(P::zero());
            trans.push(th);
            reward.push(rh);
        }
        Mrp { init, trans, reward }
    }

    /// `V_h` for `h = 0..=H`, with `V_H ≡ 0`.
    pub fn values(&self) -> Vec<Vec<P>> {
        let (h_max, s) = (self.horizon(), self.states());
        let mut v = vec![vec![P::zero(); s]; h_max + 1];
        for h in (0..h_max).rev() {
            for x in 0..s {
                let cont = if h + 1 < h_max {
                    self.trans[h][x]
                        .iter()
                        .zip(&v[h + 1])
                        .fold(P::zero(), |acc, (p, w)| acc + p.clone() * w.clone())
                } else {
                    P::zero()
                };
                v[h][x] = self.reward[h][x].clone() + cont;
            }
        }
        v
    }

    /// State-occupancy `d_h(x)` for `h = 0..H`.
    pub fn occupancy(&self) -> Vec<Vec<P>> {
        let mut d = vec![self.init.clone()];
        for h in 0..self.horizon().saturating_sub(1) {
            let mut next = vec![P::zero(); self.states()];
            for (x, m) in d[h].iter().enumerate() {
                for (xn, p) in self.trans[h][x].iter().enumerate() {
                    next[xn] = next[xn].clone() + m.clone() * p.clone();
                }
            }
            d.push(next);
        }
        d
    }

    pub fn value(&self) -> P {
        let v = self.values();
        self.init
            .iter()
            .zip(&v[0])
            .fold(P::zero(), |acc, (p, w)| acc + p.clone() * w.clone())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerformanceDifference<P> {
    pub lhs: P,
    pub init_term: P,
    pub transition_term: P,
}

impl<P: Prob> PerformanceDifference<P> {
    pub fn rhs(&self) -> P {
        self.init_term.clone() + self.transition_term.clone()
    }
}

/// Both sides of the performance-difference identity for two MRPs sharing
/// a reward function (`mrp1`'s reward is used for both).
pub fn performance_difference<P: Prob>(mrp1: &Mrp<P>, mrp2: &Mrp<P>) -> Result<PerformanceDifference<P>> {
    if mrp1.horizon() != mrp2.horizon() || mrp1.states() != mrp2.states() {
        return Err(HhError::InvalidInput("MRPs must share horizon and state space".into()));
    }
    let second = Mrp {
        reward: mrp1.reward.clone(),
        ..mrp2.clone()
    };
    let v2 = second.values();
    let dot = |p: &[P], q: &[P], v: &[P]| {
        p.iter()
            .zip(q)
            .zip(v)
            .fold(P::zero(), |acc, ((a, b), w)| acc + (a.clone() - b.clone()) * w.clone())
    };
    let init_term = dot(&mrp1.init, &second.init, &v2[0]);
    let d1 = mrp1.occupancy();
    let mut transition_term = P::zero();
    for h in 0..mrp1.horizon().saturating_sub(1) {
        for x in 0..mrp1.states() {
            let diff = dot(&mrp1.trans[h][x], &second.trans[h][x], &v2[h + 1]);
            transition_term = transition_term + d1[h][x].clone() * diff;
        }
    }
    Ok(PerformanceDifference {
        lhs: mrp1.value() - second.value(),
        init_term,
        transition_term,
    })
}

/// Membership in the good-model set at phase ℓ.
pub fn good_model_predicate<P: Prob>(
    model: &TabularModel<P>,
    model_star: &TabularModel<P>,
    u: &TripleSet,
    eps_pun: &P,
    eps_r: &P,
    eps_p: &P,
) -> bool {
    let explored = u.complement();
    let two = P::from_u64(2);
    is_punished(model, &explored, &(eps_pun.clone() + two.clone() * eps_r.clone()))
        && similarity(model, model_star, &explored).is_similar(&(two * eps_p.clone()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimators {
    /// Empirical mean reward over the first `n_lrn` visits; `None` when
    /// the triple has fewer visits.
    pub theta_r: Vec<Option<f64>>,
    /// Empirical next-state law; last-stage triples use the terminal sink.
    pub theta_p: Vec<Option<Vec<f64>>>,
    /// Initial-state frequencies over the first `n_lrn` phases.
    pub theta_p0: Option<Vec<f64>>,
}

/// Estimators from hallucination-episode trajectories in phase order.
pub fn empirical_estimators<P: Prob>(
    dims: Dims,
    support: &[P],
    trajectories: &[(MarkovPolicy, Trajectory)],
    n_lrn: u64,
) -> Estimators {
    let n = dims.num_triples();
    let mut count = vec![0u64; n];
    let mut rsum = vec![0f64; n];
    let mut next = vec![vec![0u64; dims.s]; n];
    for (_, tau) in trajectories {
        for (h, step) in tau.steps.iter().enumerate() {
            let i = dims.index(Triple::new(step.x, step.a, h));
            if count[i] >= n_lrn {
                continue;
            }
            count[i] += 1;
            rsum[i] += support[step.r].to_f64();
            let xn = if h + 1 < dims.h { tau.steps[h + 1].x } else { 0 };
            next[i][xn] += 1;
        }
    }
    let nf = n_lrn as f64;
    let theta_p0 = (trajectories.len() as u64 >= n_lrn).then(|| {
        let mut f = vec![0f64; dims.s];
        for (_, tau) in trajectories.iter().take(n_lrn as usize) {
            f[tau.steps[0].x] += 1.0 / nf;
        }
        f
    });
    Estimators {
        theta_r: (0..n).map(|i| (count[i] >= n_lrn).then(|| rsum[i] / nf)).collect(),
        theta_p: (0..n)
            .map(|i| (count[i] >= n_lrn).then(|| next[i].iter().map(|c| *c as f64 / nf).collect()))
            .collect(),
        theta_p0,
    }
}

/// 1-based stage at which the unique trajectory first enters `U`; `H+1`
/// if it never does.
pub fn first_unexplored_stage<P: Prob>(
    model: &TabularModel<P>,
    policy: &MarkovPolicy,
    u: &TripleSet,
) -> Result<usize> {
    if !model.is_deterministic() {
        return Err(HhError::PreconditionViolated("model must be deterministic".into()));
    }
    let dims = model.dims();
    let argmax = |d: &[P]| d.iter().position(|p| *p == P::one()).expect("point mass");
    let mut x = argmax(model.init());
    for h in 0..dims.h {
        let t = Triple::new(x, policy.action(x, h), h);
        if u.contains(t) {
            return Ok(h + 1);
        }
        if h + 1 < dims.h {
            x = argmax(model.transition(t));
        }
    }
    Ok(dims.h + 1)
}

/// `{π : P^π_{μ*}[E_U] ≥ ρ0}`.
pub fn sufficiently_visiting_policies<P: Prob>(
    model_star: &TabularModel<P>,
    u: &TripleSet,
    rho0: &P,
) -> Result<PolicySet> {
    let policies = enumerate_policies(model_star.dims())?;
    Ok(PolicySet::from_fn(&policies, |pi| {
        rho0.le_tol(&event_visit_probability(model_star, pi, u))
    }))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValueBound<P> {
    pub value: P,
    pub bound: P,
}

/// `V(π;μ) ≤ H·P*[E_U] + H(2ε_r + ε_pun) + H(H−1)ε_p`.
pub fn value_upper_bound<P: Prob>(
    model: &TabularModel<P>,
    model_star: &TabularModel<P>,
    policy: &MarkovPolicy,
    u: &TripleSet,
    eps_pun: &P,
    eps_r: &P,
    eps_p: &P,
) -> ValueBound<P> {
    let h = model.dims().h as u64;
    let hp = P::from_u64(h);
    let bound = hp.clone() * event_visit_probability(model_star, policy, u)
        + hp.clone() * (P::from_u64(2) * eps_r.clone() + eps_pun.clone())
        + P::from_u64(h * h.saturating_sub(1)) * eps_p.clone();
    ValueBound {
        value: policy_value(model, policy),
        bound,
    }
}

/// `V(π;μ) ≥ Σ_U r_μ·ω*^π − H(H−1)ε_p`; `bound` is the right side.
pub fn value_lower_bound<P: Prob>(
    model: &TabularModel<P>,
    model_star: &TabularModel<P>,
    policy: &MarkovPolicy,
    u: &TripleSet,
    eps_p: &P,
) -> ValueBound<P> {
    let h = model.dims().h as u64;
    let weighted = occupancy_omega(model_star, policy, u)
        .into_iter()
        .fold(P::zero(), |acc, (t, w)| acc + model.mean_reward(t).clone() * w);
    ValueBound {
        value: policy_value(model, policy),
        bound: weighted - P::from_u64(h * h.saturating_sub(1)) * eps_p.clone(),
    }
}
