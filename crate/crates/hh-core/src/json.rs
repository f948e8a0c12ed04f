//! JSON schemas for models and priors.
//!
//! Indices in keys are 1-based (`"x,a,h"`). Probabilities may be JSON
//! numbers or strings such as `"1/3"`; both parse to exact rationals, with
//! numbers read through their shortest decimal form. A missing transition
//! at the last stage defaults to a point mass on state 1.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{HhError, Result};
use crate::mdp::{Dims, TabularModel, Triple};
use crate::num::{format_rational, parse_rational, rational_from_decimal_f64, Prob, Rational};
use crate::prior::{DiscretePrior, FactoredRewardPrior, RewardFamily};

/// Exact rational read from a JSON number or string.
#[derive(Clone, Debug, PartialEq)]
pub struct Num(pub Rational);

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        let parsed = match &v {
            Value::String(s) => parse_rational(s),
            Value::Number(n) => n.as_f64().and_then(rational_from_decimal_f64),
            _ => None,
        };
        parsed
            .map(Num)
            .ok_or_else(|| serde::de::Error::custom(format!("expected a number, got {v}")))
    }
}

impl Serialize for Num {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(&self.0))
    }
}

fn nums(v: &[Num]) -> Vec<Rational> {
    v.iter().map(|n| n.0.clone()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardJson {
    pub support: Vec<Num>,
    pub probs: Vec<Num>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelJson {
    #[serde(rename = "S")]
    pub s: usize,
    #[serde(rename = "A")]
    pub a: usize,
    #[serde(rename = "H")]
    pub h: usize,
    pub init: Vec<Num>,
    pub transitions: BTreeMap<String, Vec<Num>>,
    pub rewards: BTreeMap<String, RewardJson>,
}

/// Model with per-triple reward laws on their own supports.
struct LooseModel {
    dims: Dims,
    init: Vec<Rational>,
    trans: Vec<Vec<Rational>>,
    rewards: Vec<Vec<(Rational, Rational)>>,
}

fn keyed<T>(dims: Dims, map: &BTreeMap<String, T>, what: &str) -> Result<Vec<Option<T>>>
where
    T: Clone,
{
    let mut out = vec![None; dims.num_triples()];
    for (k, v) in map {
        let t = Triple::parse_key(k, dims)
            .map_err(|e| HhError::InvalidModel(format!("{what} key {k:?}: {e}")))?;
        out[dims.index(t)] = Some(v.clone());
    }
    Ok(out)
}

fn loose(m: &ModelJson) -> Result<LooseModel> {
    let dims = Dims::new(m.s, m.a, m.h)?;
    let sink: Vec<Rational> = (0..dims.s)
        .map(|i| if i == 0 { Rational::one() } else { Rational::zero() })
        .collect();
    let trans = keyed(dims, &m.transitions, "transition")?
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            let t = dims.triple(i);
            match row {
                Some(r) => Ok(nums(&r)),
                None if t.h + 1 == dims.h => Ok(sink.clone()),
                None => Err(HhError::InvalidModel(format!("missing transition for {t}"))),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let rewards = keyed(dims, &m.rewards, "reward")?
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            let r = row.ok_or_else(|| HhError::InvalidModel(format!("missing reward for {}", dims.triple(i))))?;
            if r.support.len() != r.probs.len() {
                return Err(HhError::InvalidModel(format!(
                    "reward {}: support and probs differ in length",
                    dims.triple(i)
                )));
            }
            Ok(nums(&r.support).into_iter().zip(nums(&r.probs)).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LooseModel {
        dims,
        init: nums(&m.init),
        trans,
        rewards,
    })
}

fn support_of(models: &[LooseModel]) -> Vec<Rational> {
    let mut vals: Vec<Rational> = models
        .iter()
        .flat_map(|m| m.rewards.iter().flatten().map(|(v, _)| v.clone()))
        .collect();
    vals.sort();
    vals.dedup();
    vals
}

fn tighten<P: Prob>(m: &LooseModel, support: &Arc<Vec<P>>, exact: &[Rational]) -> Result<TabularModel<P>> {
    let conv = |v: &[Rational]| v.iter().map(P::from_rational).collect::<Vec<P>>();
    let rewards = m
        .rewards
        .iter()
        .map(|law| {
            let mut row = vec![Rational::zero(); exact.len()];
            for (v, p) in law {
                let i = exact.binary_search(v).expect("support is a union");
                row[i] += p.clone();
            }
            conv(&row)
        })
        .collect();
    TabularModel::new(
        m.dims,
        support.clone(),
        conv(&m.init),
        m.trans.iter().map(|r| conv(r)).collect(),
        rewards,
    )
}

use num_traits::{One, Zero};

pub fn model_from_json<P: Prob>(text: &str) -> Result<TabularModel<P>> {
    let m: ModelJson = serde_json::from_str(text).map_err(|e| HhError::InvalidInput(format!("model JSON: {e}")))?;
    let l = loose(&m)?;
    let exact = support_of(std::slice::from_ref(&l));
    let support = Arc::new(exact.iter().map(P::from_rational).collect());
    tighten(&l, &support, &exact)
}

pub fn model_to_json<P: Prob>(model: &TabularModel<P>) -> ModelJson {
    let d = model.dims();
    let num = |p: &P| Num(p.to_rational());
    ModelJson {
        s: d.s,
        a: d.a,
        h: d.h,
        init: model.init().iter().map(num).collect(),
        transitions: d
            .triples()
            .map(|t| (t.key(), model.transition(t).iter().map(num).collect()))
            .collect(),
        rewards: d
            .triples()
            .map(|t| {
                let (support, probs) = model
                    .support()
                    .iter()
                    .zip(model.reward_dist(t))
                    .filter(|(_, p)| **p > P::zero())
                    .map(|(v, p)| (num(v), num(p)))
                    .unzip();
                (t.key(), RewardJson { support, probs })
            })
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomJson {
    pub model: ModelJson,
    pub weight: Num,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionAtomJson {
    pub init: Vec<Num>,
    #[serde(default)]
    pub transitions: BTreeMap<String, Vec<Num>>,
    pub weight: Num,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactoredJson {
    #[serde(rename = "S")]
    pub s: usize,
    #[serde(rename = "A")]
    pub a: usize,
    #[serde(rename = "H")]
    pub h: usize,
    pub transition_prior: Vec<TransitionAtomJson>,
    /// Keyed by `"x,a,h"`; `"*"` supplies the default marginal. Each entry
    /// lists `[mean, probability]` pairs.
    pub reward_marginals: BTreeMap<String, Vec<(Num, Num)>>,
    pub reward_family: RewardFamily,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum PriorJson {
    Atoms(Vec<AtomJson>),
    Factored(FactoredJson),
}

/// A prior as written: either explicit atoms or a factored description.
#[derive(Clone, Debug)]
pub enum PriorSource<P> {
    Discrete(DiscretePrior<P>),
    Factored(FactoredRewardPrior<P>),
}

impl<P: Prob> PriorSource<P> {
    pub fn discrete(&self) -> Result<DiscretePrior<P>> {
        match self {
            PriorSource::Discrete(p) => Ok(p.clone()),
            PriorSource::Factored(f) => f.expand(),
        }
    }
}

fn factored<P: Prob>(f: &FactoredJson) -> Result<FactoredRewardPrior<P>> {
    let dims = Dims::new(f.s, f.a, f.h)?;
    let conv = |v: &[Num]| v.iter().map(|n| P::from_rational(&n.0)).collect::<Vec<P>>();
    let transition_atoms = f
        .transition_prior
        .iter()
        .map(|t| {
            let shell = ModelJson {
                s: f.s,
                a: f.a,
                h: f.h,
                init: t.init.clone(),
                transitions: t.transitions.clone(),
                rewards: dims
                    .triples()
                    .map(|tr| {
                        (
                            tr.key(),
                            RewardJson {
                                support: vec![Num(Rational::zero())],
                                probs: vec![Num(Rational::one())],
                            },
                        )
                    })
                    .collect(),
            };
            let l = loose(&shell)?;
            Ok((
                conv(&t.init),
                l.trans.iter().map(|r| r.iter().map(P::from_rational).collect()).collect(),
                P::from_rational(&t.weight.0),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let default = f.reward_marginals.get("*");
    let mut marginals = Vec::with_capacity(dims.num_triples());
    let keyed_marg = keyed(
        dims,
        &f.reward_marginals
            .iter()
            .filter(|(k, _)| k.as_str() != "*")
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect(),
        "reward marginal",
    )?;
    for (i, m) in keyed_marg.into_iter().enumerate() {
        let m = m.or_else(|| default.cloned()).ok_or_else(|| {
            HhError::InvalidModel(format!("missing reward marginal for {}", dims.triple(i)))
        })?;
        let total = m.iter().fold(Rational::zero(), |acc, (_, p)| acc + p.0.clone());
        if total != Rational::one() {
            return Err(HhError::InvalidModel(format!(
                "reward marginal for {} sums to {}",
                dims.triple(i),
                format_rational(&total)
            )));
        }
        marginals.push(
            m.iter()
                .map(|(v, p)| (P::from_rational(&v.0), P::from_rational(&p.0)))
                .collect(),
        );
    }
    Ok(FactoredRewardPrior {
        dims,
        transition_atoms,
        marginals,
        family: f.reward_family,
    })
}

pub fn prior_from_json<P: Prob>(text: &str) -> Result<PriorSource<P>> {
    let p: PriorJson = serde_json::from_str(text).map_err(|e| HhError::InvalidInput(format!("prior JSON: {e}")))?;
    prior_from_schema(&p)
}

pub fn prior_from_schema<P: Prob>(p: &PriorJson) -> Result<PriorSource<P>> {
    match p {
        PriorJson::Atoms(atoms) => {
            let looses = atoms.iter().map(|a| loose(&a.model)).collect::<Result<Vec<_>>>()?;
            let exact = support_of(&looses);
            let support: Arc<Vec<P>> = Arc::new(exact.iter().map(P::from_rational).collect());
            let models = looses
                .iter()
                .zip(atoms)
                .map(|(l, a)| Ok((tighten(l, &support, &exact)?, P::from_rational(&a.weight.0))))
                .collect::<Result<Vec<_>>>()?;
            Ok(PriorSource::Discrete(DiscretePrior::new(models)?))
        }
        PriorJson::Factored(f) => Ok(PriorSource::Factored(factored(f)?)),
    }
}

pub fn prior_to_json<P: Prob>(prior: &DiscretePrior<P>) -> PriorJson {
    PriorJson::Atoms(
        prior
            .atoms()
            .iter()
            .map(|(m, w)| AtomJson {
                model: model_to_json(m),
                weight: Num(w.to_rational()),
            })
            .collect(),
    )
}

/// SHA-256 of the canonical atom serialization, hex.
pub fn prior_digest<P: Prob>(prior: &DiscretePrior<P>) -> String {
    let text = serde_json::to_string(&prior_to_json(prior)).expect("serializable");
    hex::encode(Sha256::digest(text.as_bytes()))
}
