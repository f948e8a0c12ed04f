//! Censored trajectories and ledgers, the only signal agents ever see.
//!
//! A ledger stores its censor set once; every entry is censored by it.
//! Equality is order-sensitive and ledgers are usable as exact map keys.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{HhError, Result};
use crate::mdp::{Dims, MarkovPolicy, TabularModel, Trajectory, Triple, TripleSet};
use crate::num::Prob;
use crate::prior::{DiscretePrior, ModelEvent};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CensoredStep {
    pub x: usize,
    pub a: usize,
    /// Support index, `None` when censored.
    pub r: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CensoredTrajectory {
    pub steps: Vec<CensoredStep>,
}

impl CensoredTrajectory {
    pub fn triples(&self) -> impl Iterator<Item = Triple> + '_ {
        self.steps
            .iter()
            .enumerate()
            .map(|(h, s)| Triple::new(s.x, s.a, h))
    }

    /// Nulls further rewards; censoring composes by union of sets.
    pub fn recensor(&self, u: &TripleSet) -> CensoredTrajectory {
        CensoredTrajectory {
            steps: self
                .steps
                .iter()
                .enumerate()
                .map(|(h, s)| CensoredStep {
                    x: s.x,
                    a: s.a,
                    r: if u.contains(Triple::new(s.x, s.a, h)) {
                        None
                    } else {
                        s.r
                    },
                })
                .collect(),
        }
    }
}

pub fn censor_trajectory(traj: &Trajectory, u: &TripleSet) -> CensoredTrajectory {
    CensoredTrajectory {
        steps: traj
            .steps
            .iter()
            .enumerate()
            .map(|(h, s)| CensoredStep {
                x: s.x,
                a: s.a,
                r: if u.contains(Triple::new(s.x, s.a, h)) {
                    None
                } else {
                    Some(s.r)
                },
            })
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LedgerEntry {
    pub policy: MarkovPolicy,
    pub traj: CensoredTrajectory,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LedgerKind {
    Raw,
    TotallyCensored,
    Honest,
    Hallucinated,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ledger {
    censor: TripleSet,
    entries: Vec<LedgerEntry>,
}

impl Ledger {
    pub fn new(censor: TripleSet) -> Self {
        Ledger {
            censor,
            entries: Vec::new(),
        }
    }

    pub fn raw(dims: Dims) -> Self {
        Ledger::new(TripleSet::empty(dims))
    }

    pub fn totally_censored(dims: Dims) -> Self {
        Ledger::new(TripleSet::all(dims))
    }

    pub fn dims(&self) -> Dims {
        self.censor.dims()
    }

    pub fn censor_set(&self) -> &TripleSet {
        &self.censor
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Appends a raw trajectory, censoring it with the ledger's set.
    pub fn push(&mut self, policy: MarkovPolicy, traj: &Trajectory) {
        let traj = censor_trajectory(traj, &self.censor);
        self.entries.push(LedgerEntry { policy, traj });
    }

    /// Appends an already-censored trajectory; rewards on the censor set
    /// are dropped to keep the invariant.
    pub fn push_censored(&mut self, policy: MarkovPolicy, traj: CensoredTrajectory) {
        let traj = traj.recensor(&self.censor);
        self.entries.push(LedgerEntry { policy, traj });
    }

    /// `cens(λ; U ∪ U_λ)`.
    pub fn recensor(&self, u: &TripleSet) -> Ledger {
        let censor = self.censor.union(u);
        Ledger {
            entries: self
                .entries
                .iter()
                .map(|e| LedgerEntry {
                    policy: e.policy.clone(),
                    traj: e.traj.recensor(&censor),
                })
                .collect(),
            censor,
        }
    }

    pub fn total_censoring(&self) -> Ledger {
        self.recensor(&TripleSet::all(self.dims()))
    }

    pub fn concat(&self, other: &Ledger) -> Result<Ledger> {
        if self.censor != other.censor {
            return Err(HhError::InvalidInput("concatenating ledgers with different censor sets".into()));
        }
        let mut out = self.clone();
        out.entries.extend(other.entries.iter().cloned());
        Ok(out)
    }

    /// Structural part of the kind contract: raw iff U=∅, totally
    /// censored iff U is everything.
    pub fn satisfies_kind(&self, kind: LedgerKind) -> bool {
        match kind {
            LedgerKind::Raw => self.censor.is_empty(),
            LedgerKind::TotallyCensored => self.censor.is_all(),
            LedgerKind::Honest | LedgerKind::Hallucinated => self
                .entries
                .iter()
                .all(|e| e.traj.recensor(&self.censor) == e.traj),
        }
    }

    /// Scalar-free canonical text: sorted U, then entries in order.
    pub fn canonical_string(&self) -> String {
        let mut out = String::new();
        let d = self.dims();
        let _ = write!(out, "S{}A{}H{}|U", d.s, d.a, d.h);
        for [x, a, h] in self.censor.keys() {
            let _ = write!(out, "({x},{a},{h})");
        }
        for e in &self.entries {
            let _ = write!(out, "|{}:", e.policy.encode());
            for s in &e.traj.steps {
                match s.r {
                    Some(r) => {
                        let _ = write!(out, "{},{},{};", s.x + 1, s.a + 1, r);
                    }
                    None => {
                        let _ = write!(out, "{},{},-;", s.x + 1, s.a + 1);
                    }
                }
            }
        }
        out
    }

    /// Short stable identifier (hex SHA-256 prefix of the canonical text).
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.canonical_string().as_bytes());
        hex::encode(&hash[..8])
    }

    /// JSONL: a header line with U, then one line per entry with 1-based
    /// indices and reward values (or null).
    pub fn to_jsonl<P: Prob>(&self, support: &[P]) -> String {
        let d = self.dims();
        let header = serde_json::json!({
            "S": d.s, "A": d.a, "H": d.h,
            "censor": self.censor.keys(),
        });
        let mut out = header.to_string();
        out.push('\n');
        for e in &self.entries {
            let steps: Vec<Value> = e
                .traj
                .steps
                .iter()
                .enumerate()
                .map(|(h, s)| {
                    let r = match s.r {
                        Some(r) => serde_json::json!(support[r].to_f64()),
                        None => Value::Null,
                    };
                    serde_json::json!([s.x + 1, s.a + 1, h + 1, r])
                })
                .collect();
            let policy: Vec<usize> = e.policy.actions().iter().map(|a| a + 1).collect();
            out.push_str(&serde_json::json!({ "policy": policy, "steps": steps }).to_string());
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl<P: Prob>(text: &str, support: &[P]) -> Result<Ledger> {
        let bad = |m: &str| HhError::InvalidInput(format!("ledger JSONL: {m}"));
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Value = serde_json::from_str(lines.next().ok_or_else(|| bad("empty"))?)
            .map_err(|e| bad(&e.to_string()))?;
        let dim = |k: &str| {
            header[k]
                .as_u64()
                .map(|v| v as usize)
                .ok_or_else(|| bad(&format!("missing {k}")))
        };
        let dims = Dims::new(dim("S")?, dim("A")?, dim("H")?)?;
        let mut censor = TripleSet::empty(dims);
        for key in header["censor"].as_array().ok_or_else(|| bad("missing censor"))? {
            let k: Vec<usize> = serde_json::from_value(key.clone()).map_err(|e| bad(&e.to_string()))?;
            if k.len() != 3 {
                return Err(bad("censor triple"));
            }
            censor.insert(Triple::parse_key(&format!("{},{},{}", k[0], k[1], k[2]), dims)?);
        }
        let mut ledger = Ledger::new(censor);
        for line in lines {
            let v: Value = serde_json::from_str(line).map_err(|e| bad(&e.to_string()))?;
            let actions: Vec<usize> =
                serde_json::from_value(v["policy"].clone()).map_err(|e| bad(&e.to_string()))?;
            let policy = MarkovPolicy::new(
                dims,
                actions.iter().map(|a| a.wrapping_sub(1)).collect(),
            )?;
            let mut steps = Vec::new();
            for (h, st) in v["steps"].as_array().ok_or_else(|| bad("steps"))?.iter().enumerate() {
                let x = st[0].as_u64().ok_or_else(|| bad("x"))? as usize;
                let a = st[1].as_u64().ok_or_else(|| bad("a"))? as usize;
                let hh = st[2].as_u64().ok_or_else(|| bad("h"))? as usize;
                if hh != h + 1 || x == 0 || a == 0 || x > dims.s || a > dims.a {
                    return Err(bad("step index out of range"));
                }
                let r = match &st[3] {
                    Value::Null => None,
                    r => {
                        let r = r.as_f64().ok_or_else(|| bad("reward"))?;
                        Some(
                            support
                                .iter()
                                .position(|s| (s.to_f64() - r).abs() <= 1e-12)
                                .ok_or_else(|| bad("reward outside support"))?,
                        )
                    }
                };
                steps.push(CensoredStep { x: x - 1, a: a - 1, r });
            }
            if steps.len() != dims.h {
                return Err(bad("trajectory length"));
            }
            ledger.entries.push(LedgerEntry {
                policy,
                traj: CensoredTrajectory { steps },
            });
        }
        Ok(ledger)
    }
}

/// Mass of one censored trajectory under `policy` in `model`.
pub fn censored_trajectory_probability<P: Prob>(
    model: &TabularModel<P>,
    policy: &MarkovPolicy,
    traj: &CensoredTrajectory,
) -> P {
    let dims = model.dims();
    if traj.steps.len() != dims.h {
        return P::zero();
    }
    let mut prob = model.init()[traj.steps[0].x].clone();
    for (h, s) in traj.steps.iter().enumerate() {
        if s.a != policy.action(s.x, h) {
            return P::zero();
        }
        let t = Triple::new(s.x, s.a, h);
        if let Some(r) = s.r {
            prob = prob * model.reward_dist(t)[r].clone();
        }
        if h + 1 < dims.h {
            prob = prob * model.transition(t)[traj.steps[h + 1].x].clone();
        }
    }
    prob
}

/// Canonical ledger mass: product over entries.
pub fn ledger_probability<P: Prob>(model: &TabularModel<P>, ledger: &Ledger) -> P {
    ledger.entries.iter().fold(P::one(), |acc, e| {
        acc * censored_trajectory_probability(model, &e.policy, &e.traj)
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VisitCounts {
    dims: Dims,
    counts: Vec<u64>,
}

impl VisitCounts {
    pub fn zeros(dims: Dims) -> Self {
        VisitCounts {
            dims,
            counts: vec![0; dims.num_triples()],
        }
    }

    pub fn get(&self, t: Triple) -> u64 {
        self.counts[self.dims.index(t)]
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.counts
    }

    /// Adds one episode's visits; a triple counts once per entry.
    pub fn add_visits(&mut self, triples: impl Iterator<Item = Triple>) {
        let mut seen = TripleSet::empty(self.dims);
        for t in triples {
            if seen.insert(t) {
                self.counts[self.dims.index(t)] += 1;
            }
        }
    }

    pub fn below(&self, n: u64) -> TripleSet {
        TripleSet::from_triples(self.dims, self.dims.triples().filter(|t| self.get(*t) < n))
    }
}

pub fn visit_counts(ledger: &Ledger) -> VisitCounts {
    let mut counts = VisitCounts::zeros(ledger.dims());
    for e in &ledger.entries {
        counts.add_visits(e.traj.triples());
    }
    counts
}

/// `U = {(x,a,h) : N(x,a,h) < n_lrn}`.
pub fn underexplored_set(ledger: &Ledger, n_lrn: u64) -> TripleSet {
    visit_counts(ledger).below(n_lrn)
}

/// Atoms under which the ledger has positive canonical mass.
pub fn consistent_models<P: Prob>(prior: &DiscretePrior<P>, ledger: &Ledger) -> ModelEvent {
    ModelEvent::from_indices(
        prior.len(),
        prior
            .atoms()
            .iter()
            .enumerate()
            .filter(|(_, (m, _))| ledger_probability(m, ledger) > P::zero())
            .map(|(i, _)| i),
    )
}

/// Sufficient statistics of a ledger for canonical likelihoods.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LedgerStats {
    dims: Dims,
    pub init: Vec<u64>,
    /// `[triple][next state]`, stages before H only.
    pub trans: Vec<Vec<u64>>,
    /// `[triple][support index]` over revealed rewards.
    pub rewards: Vec<Vec<u64>>,
    /// False when some entry's actions contradict its policy.
    pub consistent: bool,
}

impl LedgerStats {
    pub fn new(dims: Dims, support_len: usize) -> Self {
        LedgerStats {
            dims,
            init: vec![0; dims.s],
            trans: vec![vec![0; dims.s]; dims.num_triples()],
            rewards: vec![vec![0; support_len]; dims.num_triples()],
            consistent: true,
        }
    }

    pub fn from_ledger(ledger: &Ledger, support_len: usize) -> Self {
        let mut stats = LedgerStats::new(ledger.dims(), support_len);
        for e in ledger.entries() {
            stats.add(&e.policy, &e.traj);
        }
        stats
    }

    pub fn add(&mut self, policy: &MarkovPolicy, traj: &CensoredTrajectory) {
        let h_max = self.dims.h;
        if traj.steps.len() != h_max {
            self.consistent = false;
            return;
        }
        self.init[traj.steps[0].x] += 1;
        for (h, s) in traj.steps.iter().enumerate() {
            if s.a != policy.action(s.x, h) {
                self.consistent = false;
            }
            let i = self.dims.index(Triple::new(s.x, s.a, h));
            if let Some(r) = s.r {
                self.rewards[i][r] += 1;
            }
            if h + 1 < h_max {
                self.trans[i][traj.steps[h + 1].x] += 1;
            }
        }
    }

    /// `prior_weight · Π mass^count` in the scalar's weight domain.
    pub fn weight<P: Prob>(&self, model: &TabularModel<P>, prior_weight: &P) -> P::Weight {
        let mut w = P::weight_of(prior_weight);
        if !self.consistent {
            P::weight_mul_pow(&mut w, &P::zero(), 1);
            return w;
        }
        for (p, &n) in model.init().iter().zip(&self.init) {
            P::weight_mul_pow(&mut w, p, n);
        }
        let trans = model.transitions_by_index();
        let rewards = model.rewards_by_index();
        for i in 0..self.dims.num_triples() {
            for (p, &n) in trans[i].iter().zip(&self.trans[i]) {
                if n > 0 {
                    P::weight_mul_pow(&mut w, p, n);
                }
            }
            for (p, &n) in rewards[i].iter().zip(&self.rewards[i]) {
                if n > 0 {
                    P::weight_mul_pow(&mut w, p, n);
                }
            }
        }
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances;
    use crate::mdp::{enumerate_policies, enumerate_trajectories, sample_trajectory};
    use crate::num::Rational;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn censoring_extremes_and_absorption() {
        let prior = instances::micro_stoch_1::<f64>();
        let m = &prior.atoms()[7].0;
        let d = m.dims();
        let pi = MarkovPolicy::constant(d, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let tau = sample_trajectory(m, &pi, &mut rng);
        let raw = censor_trajectory(&tau, &TripleSet::empty(d));
        assert!(raw.steps.iter().zip(&tau.steps).all(|(c, s)| c.r == Some(s.r)));
        let all = censor_trajectory(&tau, &TripleSet::all(d));
        assert!(all.steps.iter().all(|c| c.r.is_none()));
        let u = TripleSet::from_triples(d, [Triple::new(tau.steps[0].x, 0, 0)]);
        let u2 = u.union(&TripleSet::from_triples(d, [Triple::new(tau.steps[1].x, 0, 1)]));
        assert_eq!(censor_trajectory(&tau, &u).recensor(&u2), censor_trajectory(&tau, &u2));
    }

    #[test]
    fn own_raw_ledger_has_mass_one() {
        let prior = instances::micro_det_1::<Rational>();
        let m = &prior.atoms()[100].0;
        let d = m.dims();
        let mut ledger = Ledger::raw(d);
        for pi in enumerate_policies(d).unwrap().into_iter().take(5) {
            let tau = enumerate_trajectories(m, &pi).unwrap().remove(0).0;
            ledger.push(pi, &tau);
        }
        assert_eq!(ledger_probability(m, &ledger), Rational::from_ratio(1, 1));
        let mut bad = ledger.clone();
        let step = &mut bad.entries[0].traj.steps[0];
        step.r = Some(1 - step.r.unwrap());
        assert_eq!(ledger_probability(m, &bad), Rational::from_ratio(0, 1));
        assert!(ledger.satisfies_kind(LedgerKind::Raw));
        assert!(ledger.total_censoring().satisfies_kind(LedgerKind::TotallyCensored));
    }

    #[test]
    fn counts_and_underexplored() {
        let prior = instances::micro_det_1::<f64>();
        let m = &prior.atoms()[0].0;
        let d = m.dims();
        let pi = MarkovPolicy::constant(d, 0);
        let tau = enumerate_trajectories(m, &pi).unwrap().remove(0).0;
        let mut ledger = Ledger::raw(d);
        assert!(visit_counts(&ledger).as_slice().iter().all(|&c| c == 0));
        assert!(underexplored_set(&ledger, 1).is_all());
        ledger.push(pi.clone(), &tau);
        let visited = TripleSet::from_triples(d, tau.triples());
        assert_eq!(underexplored_set(&ledger, 1), visited.complement());
        // n_lrn = 2: one copy is not enough, a duplicate is.
        assert_eq!(underexplored_set(&ledger, 2), TripleSet::all(d));
        ledger.push(pi, &tau);
        assert_eq!(underexplored_set(&ledger, 2), visited.complement());
        for t in d.triples() {
            assert_eq!(visit_counts(&ledger).get(t), if visited.contains(t) { 2 } else { 0 });
        }
    }

    #[test]
    fn consistent_models_filters_by_equality() {
        let prior = instances::micro_det_1::<f64>();
        let truth = &prior.atoms()[77].0;
        let d = truth.dims();
        let pi = MarkovPolicy::constant(d, 0);
        let tau = enumerate_trajectories(truth, &pi).unwrap().remove(0).0;
        let mut ledger = Ledger::raw(d);
        ledger.push(pi.clone(), &tau);
        let event = consistent_models(&prior, &ledger);
        for (i, (m, _)) in prior.atoms().iter().enumerate() {
            let same = tau.triples().all(|t| m.mean_reward(t) == truth.mean_reward(t));
            assert_eq!(event.contains(i), same);
        }
        assert_eq!(consistent_models(&prior, &Ledger::raw(d)).len(), prior.len());
        let mut contradictory = ledger.clone();
        let mut other = tau.clone();
        other.steps[0].r = 1 - other.steps[0].r;
        contradictory.push(pi, &other);
        assert!(consistent_models(&prior, &contradictory).is_empty());
    }

    #[test]
    fn jsonl_roundtrip() {
        let prior = instances::micro_stoch_1::<f64>();
        let m = &prior.atoms()[3].0;
        let d = m.dims();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = TripleSet::from_triples(d, [Triple::new(0, 1, 0), Triple::new(1, 0, 1)]);
        let mut ledger = Ledger::new(u);
        for pi in enumerate_policies(d).unwrap().into_iter().step_by(3) {
            let tau = sample_trajectory(m, &pi, &mut rng);
            ledger.push(pi, &tau);
        }
        let text = ledger.to_jsonl(m.support());
        assert_eq!(Ledger::from_jsonl(&text, m.support()).unwrap(), ledger);
        assert_eq!(ledger.digest().len(), 16);
    }

    /// Σ over every censored ledger for a fixed policy sequence is 1.
    #[test]
    fn censored_ledger_masses_sum_to_one() {
        let prior = instances::micro_stoch_1::<Rational>();
        let m = &prior.atoms()[200].0;
        let d = m.dims();
        let pols = enumerate_policies(d).unwrap();
        let (p1, p2) = (&pols[3], &pols[10]);
        let u = TripleSet::from_triples(d, [Triple::new(0, 0, 0), Triple::new(1, 1, 1)]);
        let mut table = std::collections::BTreeMap::new();
        for (t1, _) in enumerate_trajectories(m, p1).unwrap() {
            for (t2, _) in enumerate_trajectories(m, p2).unwrap() {
                let mut l = Ledger::new(u.clone());
                l.push(p1.clone(), &t1);
                l.push(p2.clone(), &t2);
                table.insert(l.clone(), ledger_probability(m, &l));
            }
        }
        let total = table.values().fold(Rational::from_ratio(0, 1), |a, b| a + b);
        assert_eq!(total, Rational::from_ratio(1, 1));
    }

    /// Censoring is a pushforward of the raw ledger law.
    #[test]
    fn censoring_is_pushforward() {
        let prior = instances::micro_stoch_1::<Rational>();
        let m = &prior.atoms()[300].0;
        let d = m.dims();
        let pi = &enumerate_policies(d).unwrap()[6];
        let u = TripleSet::from_triples(d, [Triple::new(0, pi.action(0, 0), 0)]);
        let mut pushed: std::collections::BTreeMap<Ledger, Rational> = Default::default();
        for (tau, _) in enumerate_trajectories(m, pi).unwrap() {
            let mut raw = Ledger::raw(d);
            raw.push(pi.clone(), &tau);
            let mass = ledger_probability(m, &raw);
            *pushed.entry(raw.recensor(&u)).or_insert_with(|| Rational::from_ratio(0, 1)) += mass;
        }
        for (cens, mass) in pushed {
            assert_eq!(ledger_probability(m, &cens), mass);
        }
    }

    proptest! {
        #[test]
        fn counts_invariant_under_censoring(seed in any::<u64>(), mask in any::<u8>()) {
            let prior = instances::micro_stoch_1::<f64>();
            let m = &prior.atoms()[(seed % 512) as usize].0;
            let d = m.dims();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut raw = Ledger::raw(d);
            for pi in enumerate_policies(d).unwrap().into_iter().take(6) {
                let tau = sample_trajectory(m, &pi, &mut rng);
                raw.push(pi, &tau);
            }
            let u = TripleSet::from_triples(d, d.triples().filter(|t| mask >> d.index(*t) & 1 == 1));
            prop_assert_eq!(visit_counts(&raw), visit_counts(&raw.recensor(&u)));
        }

        #[test]
        fn counts_add_under_concatenation(seed in any::<u64>()) {
            let prior = instances::micro_stoch_1::<f64>();
            let m = &prior.atoms()[(seed % 512) as usize].0;
            let d = m.dims();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pols = enumerate_policies(d).unwrap();
            let mut a = Ledger::raw(d);
            let mut b = Ledger::raw(d);
            for pi in pols.iter().take(3) {
                a.push(pi.clone(), &sample_trajectory(m, pi, &mut rng));
                b.push(pi.clone(), &sample_trajectory(m, pi, &mut rng));
            }
            let ab = visit_counts(&a.concat(&b).unwrap());
            let (ca, cb) = (visit_counts(&a), visit_counts(&b));
            for t in d.triples() {
                prop_assert_eq!(ab.get(t), ca.get(t) + cb.get(t));
            }
        }
    }
}
