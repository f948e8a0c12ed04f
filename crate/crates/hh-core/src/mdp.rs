//! Tabular finite-horizon MDPs and exact dynamic-programming primitives.
//!
//! Indices are 0-based in memory and 1-based in every serialized or
//! displayed form. Rewards are stored as indices into a global support
//! shared by all models of an experiment, so trajectories and ledgers are
//! exact, hashable values independent of the scalar type.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HhError, Result};
use crate::num::Prob;

pub const POLICY_CAP: u64 = 1_000_000;
pub const TRAJECTORY_CAP: u64 = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Dims {
    pub s: usize,
    pub a: usize,
    pub h: usize,
}

impl Dims {
    pub fn new(s: usize, a: usize, h: usize) -> Result<Self> {
        if s == 0 || a == 0 || h == 0 {
            return Err(HhError::InvalidModel(format!(
                "dimensions must be positive, got S={s} A={a} H={h}"
            )));
        }
        Ok(Dims { s, a, h })
    }

    pub fn num_triples(&self) -> usize {
        self.s * self.a * self.h
    }

    pub fn index(&self, t: Triple) -> usize {
        (t.x * self.a + t.a) * self.h + t.h
    }

    pub fn triple(&self, index: usize) -> Triple {
        Triple {
            x: index / (self.a * self.h),
            a: (index / self.h) % self.a,
            h: index % self.h,
        }
    }

    pub fn triples(&self) -> impl Iterator<Item = Triple> + '_ {
        (0..self.num_triples()).map(|i| self.triple(i))
    }

    /// `A^{S·H}` as a float, so oversize spaces can be reported.
    pub fn num_policies(&self) -> f64 {
        (self.a as f64).powf((self.s * self.h) as f64)
    }
}

/// An `(x, a, h)` triple, 0-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub x: usize,
    pub a: usize,
    pub h: usize,
}

impl Triple {
    pub fn new(x: usize, a: usize, h: usize) -> Self {
        Triple { x, a, h }
    }

    /// Parses a 1-based `"x,a,h"` key.
    pub fn parse_key(key: &str, dims: Dims) -> Result<Self> {
        let parts: Vec<&str> = key.split(',').map(str::trim).collect();
        let bad = || HhError::InvalidModel(format!("bad triple key {key:?}"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let mut v = [0usize; 3];
        for (slot, part) in v.iter_mut().zip(&parts) {
            *slot = part.parse::<usize>().map_err(|_| bad())?;
        }
        let [x, a, h] = v;
        if x == 0 || a == 0 || h == 0 || x > dims.s || a > dims.a || h > dims.h {
            return Err(HhError::InvalidModel(format!(
                "triple {key:?} outside S={} A={} H={}",
                dims.s, dims.a, dims.h
            )));
        }
        Ok(Triple::new(x - 1, a - 1, h - 1))
    }

    pub fn key(&self) -> String {
        format!("{},{},{}", self.x + 1, self.a + 1, self.h + 1)
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.x + 1, self.a + 1, self.h + 1)
    }
}

/// Dense set of triples over fixed dimensions.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TripleSet {
    dims: Dims,
    members: Vec<bool>,
}

impl TripleSet {
    pub fn empty(dims: Dims) -> Self {
        TripleSet {
            dims,
            members: vec![false; dims.num_triples()],
        }
    }

    pub fn all(dims: Dims) -> Self {
        TripleSet {
            dims,
            members: vec![true; dims.num_triples()],
        }
    }

    pub fn from_triples(dims: Dims, triples: impl IntoIterator<Item = Triple>) -> Self {
        let mut set = TripleSet::empty(dims);
        for t in triples {
            set.insert(t);
        }
        set
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn contains(&self, t: Triple) -> bool {
        self.members[self.dims.index(t)]
    }

    pub fn contains_index(&self, i: usize) -> bool {
        self.members[i]
    }

    pub fn insert(&mut self, t: Triple) -> bool {
        let i = self.dims.index(t);
        let fresh = !self.members[i];
        self.members[i] = true;
        fresh
    }

    pub fn remove(&mut self, t: Triple) {
        let i = self.dims.index(t);
        self.members[i] = false;
    }

    pub fn complement(&self) -> Self {
        TripleSet {
            dims: self.dims,
            members: self.members.iter().map(|b| !b).collect(),
        }
    }

    pub fn union(&self, other: &Self) -> Self {
        TripleSet {
            dims: self.dims,
            members: self
                .members
                .iter()
                .zip(&other.members)
                .map(|(a, b)| *a || *b)
                .collect(),
        }
    }

    pub fn intersection(&self, other: &Self) -> Self {
        TripleSet {
            dims: self.dims,
            members: self
                .members
                .iter()
                .zip(&other.members)
                .map(|(a, b)| *a && *b)
                .collect(),
        }
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.members
            .iter()
            .zip(&other.members)
            .all(|(a, b)| !a || *b)
    }

    pub fn len(&self) -> usize {
        self.members.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.members.iter().any(|b| *b)
    }

    pub fn is_all(&self) -> bool {
        self.members.iter().all(|b| *b)
    }

    /// Members in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = Triple> + '_ {
        self.members
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(|(i, _)| self.dims.triple(i))
    }

    /// Sorted 1-based keys; the canonical serialized form.
    pub fn keys(&self) -> Vec<[usize; 3]> {
        self.iter().map(|t| [t.x + 1, t.a + 1, t.h + 1]).collect()
    }
}

impl fmt::Display for TripleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, t) in self.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{t}")?;
        }
        write!(f, "}}")
    }
}

/// Deterministic Markov policy; `actions[x*H + h]` is the 0-based action.
///
/// The derived ordering is lexicographic on the row-major action vector,
/// which coincides with the canonical integer encoding order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MarkovPolicy {
    dims: Dims,
    actions: Vec<usize>,
}

impl MarkovPolicy {
    pub fn new(dims: Dims, actions: Vec<usize>) -> Result<Self> {
        if actions.len() != dims.s * dims.h || actions.iter().any(|&a| a >= dims.a) {
            return Err(HhError::InvalidInput(format!(
                "policy needs {} actions in [1,{}]",
                dims.s * dims.h,
                dims.a
            )));
        }
        Ok(MarkovPolicy { dims, actions })
    }

    pub fn constant(dims: Dims, action: usize) -> Self {
        MarkovPolicy {
            dims,
            actions: vec![action; dims.s * dims.h],
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn action(&self, x: usize, h: usize) -> usize {
        self.actions[x * self.dims.h + h]
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    /// Base-A digits, first `(x,h)` most significant.
    pub fn encode(&self) -> u64 {
        self.actions
            .iter()
            .fold(0u64, |code, &a| code.saturating_mul(self.dims.a as u64).saturating_add(a as u64))
    }

    pub fn decode(dims: Dims, mut code: u64) -> Self {
        let n = dims.s * dims.h;
        let mut actions = vec![0; n];
        for slot in actions.iter_mut().rev() {
            *slot = (code % dims.a as u64) as usize;
            code /= dims.a as u64;
        }
        MarkovPolicy { dims, actions }
    }
}

impl fmt::Display for MarkovPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}[", self.encode())?;
        for (i, a) in self.actions.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", a + 1)?;
        }
        write!(f, "]")
    }
}

/// All `A^{S·H}` policies in canonical-encoding order.
pub fn enumerate_policies(dims: Dims) -> Result<Vec<MarkovPolicy>> {
    let count = dims.num_policies();
    if count > POLICY_CAP as f64 {
        return Err(HhError::CapExceeded {
            what: "policies",
            needed: count,
            cap: POLICY_CAP,
        });
    }
    Ok((0..count as u64).map(|c| MarkovPolicy::decode(dims, c)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Step {
    pub x: usize,
    pub a: usize,
    /// Index into the global reward support.
    pub r: usize,
}

/// H steps; the stage of `steps[i]` is `i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Trajectory {
    pub steps: Vec<Step>,
}

impl Trajectory {
    pub fn triples(&self) -> impl Iterator<Item = Triple> + '_ {
        self.steps
            .iter()
            .enumerate()
            .map(|(h, s)| Triple::new(s.x, s.a, h))
    }
}

/// One MDP hypothesis.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularModel<P> {
    dims: Dims,
    support: Arc<Vec<P>>,
    init: Vec<P>,
    trans: Vec<Vec<P>>,
    rewards: Vec<Vec<P>>,
    means: Vec<P>,
}

fn check_distribution<P: Prob>(v: &[P], len: usize, what: &str) -> Result<()> {
    if v.len() != len {
        return Err(HhError::InvalidModel(format!(
            "{what}: expected {len} entries, got {}",
            v.len()
        )));
    }
    if v.iter().any(|p| *p < P::zero()) {
        return Err(HhError::InvalidModel(format!("{what}: negative entry")));
    }
    let total = v.iter().fold(P::zero(), |acc, p| acc + p.clone());
    if !total.approx_eq(&P::one()) {
        return Err(HhError::InvalidModel(format!(
            "{what}: sums to {} not 1",
            total.to_f64()
        )));
    }
    Ok(())
}

fn is_point_mass<P: Prob>(v: &[P]) -> bool {
    v.iter().any(|p| *p == P::one())
}

impl<P: Prob> TabularModel<P> {
    /// `trans` and `rewards` are indexed by [`Dims::index`]; reward vectors
    /// are masses over `support`.
    pub fn new(
        dims: Dims,
        support: Arc<Vec<P>>,
        init: Vec<P>,
        trans: Vec<Vec<P>>,
        rewards: Vec<Vec<P>>,
    ) -> Result<Self> {
        if support.is_empty() {
            return Err(HhError::InvalidModel("empty reward support".into()));
        }
        for w in support.windows(2) {
            if w[0] >= w[1] {
                return Err(HhError::InvalidModel(
                    "reward support must be strictly increasing".into(),
                ));
            }
        }
        if support[0] < P::zero() || support[support.len() - 1] > P::one() {
            return Err(HhError::InvalidModel("reward support outside [0,1]".into()));
        }
        check_distribution(&init, dims.s, "init")?;
        if trans.len() != dims.num_triples() || rewards.len() != dims.num_triples() {
            return Err(HhError::InvalidModel("per-triple tables have wrong length".into()));
        }
        for (i, row) in trans.iter().enumerate() {
            check_distribution(row, dims.s, &format!("transition {}", dims.triple(i)))?;
        }
        for (i, row) in rewards.iter().enumerate() {
            check_distribution(row, support.len(), &format!("reward {}", dims.triple(i)))?;
        }
        let means = rewards
            .iter()
            .map(|row| {
                row.iter()
                    .zip(support.iter())
                    .fold(P::zero(), |acc, (p, r)| acc + p.clone() * r.clone())
            })
            .collect();
        Ok(TabularModel {
            dims,
            support,
            init,
            trans,
            rewards,
            means,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn support(&self) -> &Arc<Vec<P>> {
        &self.support
    }

    pub fn init(&self) -> &[P] {
        &self.init
    }

    pub fn transition(&self, t: Triple) -> &[P] {
        &self.trans[self.dims.index(t)]
    }

    pub fn reward_dist(&self, t: Triple) -> &[P] {
        &self.rewards[self.dims.index(t)]
    }

    pub fn mean_reward(&self, t: Triple) -> &P {
        &self.means[self.dims.index(t)]
    }

    pub fn transitions_by_index(&self) -> &[Vec<P>] {
        &self.trans
    }

    pub fn rewards_by_index(&self) -> &[Vec<P>] {
        &self.rewards
    }

    pub fn means(&self) -> &[P] {
        &self.means
    }

    /// Point masses everywhere that matters: init, transitions before the
    /// last stage, and rewards.
    pub fn is_deterministic(&self) -> bool {
        is_point_mass(&self.init)
            && self.dims.triples().all(|t| {
                (t.h + 1 == self.dims.h || is_point_mass(self.transition(t)))
                    && is_point_mass(self.reward_dist(t))
            })
    }

    /// Same transitions everywhere (used for transition-structure grouping).
    pub fn same_dynamics(&self, other: &Self) -> bool {
        self.init == other.init && self.trans == other.trans
    }

    pub fn map_scalar<Q: Prob>(&self) -> TabularModel<Q> {
        let conv = |v: &[P]| v.iter().map(|p| Q::from_rational(&p.to_rational())).collect::<Vec<Q>>();
        let support: Vec<Q> = conv(&self.support);
        TabularModel {
            dims: self.dims,
            support: Arc::new(support),
            init: conv(&self.init),
            trans: self.trans.iter().map(|r| conv(r)).collect(),
            rewards: self.rewards.iter().map(|r| conv(r)).collect(),
            means: conv(&self.means),
        }
    }

    pub fn with_support(mut self, support: Arc<Vec<P>>) -> Self {
        debug_assert_eq!(*support, *self.support);
        self.support = support;
        self
    }
}

fn sample_index<P: Prob, R: Rng + ?Sized>(dist: &[P], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in dist.iter().enumerate() {
        let p = p.to_f64();
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Samples from a finite distribution given as scalars; zero entries are
/// never returned.
pub fn sample_categorical<P: Prob, R: Rng + ?Sized>(dist: &[P], rng: &mut R) -> usize {
    sample_index(dist, rng)
}

/// `E^π_μ[Σ_h r_h]` by backward DP over mean rewards.
pub fn policy_value<P: Prob>(model: &TabularModel<P>, policy: &MarkovPolicy) -> P {
    let dims = model.dims;
    let mut next = vec![P::zero(); dims.s];
    for h in (0..dims.h).rev() {
        let mut cur = Vec::with_capacity(dims.s);
        for x in 0..dims.s {
            let t = Triple::new(x, policy.action(x, h), h);
            let mut v = model.mean_reward(t).clone();
            if h + 1 < dims.h {
                for (p, vn) in model.transition(t).iter().zip(&next) {
                    v = v + p.clone() * vn.clone();
                }
            }
            cur.push(v);
        }
        next = cur;
    }
    model
        .init
        .iter()
        .zip(&next)
        .fold(P::zero(), |acc, (p, v)| acc + p.clone() * v.clone())
}

/// Exact mass of `traj` under `policy`; 0 when actions disagree with it.
pub fn trajectory_probability<P: Prob>(
    model: &TabularModel<P>,
    policy: &MarkovPolicy,
    traj: &Trajectory,
) -> P {
    let dims = model.dims;
    if traj.steps.len() != dims.h {
        return P::zero();
    }
    let mut prob = model.init[traj.steps[0].x].clone();
    for (h, step) in traj.steps.iter().enumerate() {
        if step.a != policy.action(step.x, h) {
            return P::zero();
        }
        let t = Triple::new(step.x, step.a, h);
        prob = prob * model.reward_dist(t)[step.r].clone();
        if h + 1 < dims.h {
            prob = prob * model.transition(t)[traj.steps[h + 1].x].clone();
        }
    }
    prob
}

pub fn sample_trajectory<P: Prob, R: Rng + ?Sized>(
    model: &TabularModel<P>,
    policy: &MarkovPolicy,
    rng: &mut R,
) -> Trajectory {
    let dims = model.dims;
    let mut steps = Vec::with_capacity(dims.h);
    let mut x = sample_index(&model.init, rng);
    for h in 0..dims.h {
        let a = policy.action(x, h);
        let t = Triple::new(x, a, h);
        let r = sample_index(model.reward_dist(t), rng);
        steps.push(Step { x, a, r });
        if h + 1 < dims.h {
            x = sample_index(model.transition(t), rng);
        }
    }
    Trajectory { steps }
}

/// Every positive-mass trajectory under `policy`, with its mass.
pub fn enumerate_trajectories<P: Prob>(
    model: &TabularModel<P>,
    policy: &MarkovPolicy,
) -> Result<Vec<(Trajectory, P)>> {
    let dims = model.dims;
    // (steps so far, current state, mass)
    let mut frontier: Vec<(Vec<Step>, usize, P)> = model
        .init
        .iter()
        .enumerate()
        .filter(|(_, p)| **p > P::zero())
        .map(|(x, p)| (Vec::with_capacity(dims.h), x, p.clone()))
        .collect();
    for h in 0..dims.h {
        let mut next = Vec::new();
        for (steps, x, mass) in frontier {
            let a = policy.action(x, h);
            let t = Triple::new(x, a, h);
            for (r, pr) in model.reward_dist(t).iter().enumerate() {
                if *pr <= P::zero() {
                    continue;
                }
                let m = mass.clone() * pr.clone();
                let mut base = steps.clone();
                base.push(Step { x, a, r });
                if h + 1 < dims.h {
                    for (xn, pt) in model.transition(t).iter().enumerate() {
                        if *pt > P::zero() {
                            next.push((base.clone(), xn, m.clone() * pt.clone()));
                        }
                    }
                } else {
                    next.push((base, x, m));
                }
            }
            if next.len() as u64 > TRAJECTORY_CAP {
                return Err(HhError::CapExceeded {
                    what: "trajectories",
                    needed: next.len() as f64,
                    cap: TRAJECTORY_CAP,
                });
            }
        }
        frontier = next;
    }
    Ok(frontier
        .into_iter()
        .map(|(steps, _, m)| (Trajectory { steps }, m))
        .collect())
}

/// `max_π P^π_μ[x_h = x]` by backward max-DP.
pub fn reach_probability<P: Prob>(model: &TabularModel<P>, x: usize, h: usize) -> P {
    let dims = model.dims;
    let mut g: Vec<P> = (0..dims.s)
        .map(|s| if s == x { P::one() } else { P::zero() })
        .collect();
    for tau in (0..h).rev() {
        g = (0..dims.s)
            .map(|s| {
                let mut best = P::zero();
                for a in 0..dims.a {
                    let v = model
                        .transition(Triple::new(s, a, tau))
                        .iter()
                        .zip(&g)
                        .fold(P::zero(), |acc, (p, gv)| acc + p.clone() * gv.clone());
                    if v > best {
                        best = v;
                    }
                }
                best
            })
            .collect();
    }
    model
        .init
        .iter()
        .zip(&g)
        .fold(P::zero(), |acc, (p, gv)| acc + p.clone() * gv.clone())
}

/// Triples whose `(x,h)` is reachable with probability at least `rho`.
pub fn reach_set<P: Prob>(model: &TabularModel<P>, rho: &P) -> Result<TripleSet> {
    if *rho <= P::zero() || *rho > P::one() {
        return Err(HhError::PreconditionViolated(format!(
            "rho must lie in (0,1], got {}",
            rho.to_f64()
        )));
    }
    let dims = model.dims;
    let mut set = TripleSet::empty(dims);
    for h in 0..dims.h {
        for x in 0..dims.s {
            let p = reach_probability(model, x, h);
            if !rho.exceeds(&p) {
                for a in 0..dims.a {
                    set.insert(Triple::new(x, a, h));
                }
            }
        }
    }
    Ok(set)
}

/// `P^π_μ[∃h: (x_h,a_h,h) ∈ U]` via forward DP with an absorbing flag.
pub fn event_visit_probability<P: Prob>(
    model: &TabularModel<P>,
    policy: &MarkovPolicy,
    u: &TripleSet,
) -> P {
    let dims = model.dims;
    // [x][flag]
    let mut mass: Vec<[P; 2]> = model
        .init
        .iter()
        .map(|p| [p.clone(), P::zero()])
        .collect();
    for h in 0..dims.h {
        let mut flagged: Vec<[P; 2]> = Vec::with_capacity(dims.s);
        for (x, m) in mass.iter().enumerate() {
            let t = Triple::new(x, policy.action(x, h), h);
            if u.contains(t) {
                flagged.push([P::zero(), m[0].clone() + m[1].clone()]);
            } else {
                flagged.push(m.clone());
            }
        }
        if h + 1 == dims.h {
            mass = flagged;
            break;
        }
        let mut next: Vec<[P; 2]> = (0..dims.s).map(|_| [P::zero(), P::zero()]).collect();
        for (x, m) in flagged.iter().enumerate() {
            let t = Triple::new(x, policy.action(x, h), h);
            for (xn, p) in model.transition(t).iter().enumerate() {
                for f in 0..2 {
                    next[xn][f] = next[xn][f].clone() + m[f].clone() * p.clone();
                }
            }
        }
        mass = next;
    }
    mass.iter().fold(P::zero(), |acc, m| acc + m[1].clone())
}

/// `ω(x,a,h)` for `(x,a,h) ∈ U`: visit at stage h having stayed in `U^c`
/// at every earlier stage. Triples the policy never selects map to 0.
pub fn occupancy_omega<P: Prob>(
    model: &TabularModel<P>,
    policy: &MarkovPolicy,
    u: &TripleSet,
) -> BTreeMap<Triple, P> {
    let dims = model.dims;
    let mut omega: BTreeMap<Triple, P> = u.iter().map(|t| (t, P::zero())).collect();
    let mut stay: Vec<P> = model.init.clone();
    for h in 0..dims.h {
        let mut next = vec![P::zero(); dims.s];
        for (x, m) in stay.iter().enumerate() {
            let t = Triple::new(x, policy.action(x, h), h);
            if u.contains(t) {
                omega.insert(t, m.clone());
            } else if h + 1 < dims.h {
                for (xn, p) in model.transition(t).iter().enumerate() {
                    next[xn] = next[xn].clone() + m.clone() * p.clone();
                }
            }
        }
        stay = next;
    }
    omega
}

/// Optimal value and a greedy optimal policy by backward DP (smallest
/// action on ties).
pub fn optimal_policy<P: Prob>(model: &TabularModel<P>) -> (P, MarkovPolicy) {
    let dims = model.dims;
    let mut actions = vec![0; dims.s * dims.h];
    let mut next = vec![P::zero(); dims.s];
    for h in (0..dims.h).rev() {
        let mut cur = Vec::with_capacity(dims.s);
        for x in 0..dims.s {
            let mut best: Option<(P, usize)> = None;
            for a in 0..dims.a {
                let t = Triple::new(x, a, h);
                let mut v = model.mean_reward(t).clone();
                if h + 1 < dims.h {
                    for (p, vn) in model.transition(t).iter().zip(&next) {
                        v = v + p.clone() * vn.clone();
                    }
                }
                if best.as_ref().map_or(true, |(bv, _)| v.exceeds(bv)) {
                    best = Some((v, a));
                }
            }
            let (v, a) = best.unwrap();
            actions[x * dims.h + h] = a;
            cur.push(v);
        }
        next = cur;
    }
    let value = model
        .init
        .iter()
        .zip(&next)
        .fold(P::zero(), |acc, (p, v)| acc + p.clone() * v.clone());
    (value, MarkovPolicy { dims, actions })
}
