//! Built-in micro instances.
//!
//! * `micro-det-1`: S=2, A=2, H=2, start in state 1; at stage 1 action a
//!   moves to state a. Rewards are deterministic with per-triple means
//!   uniform on {0, 0.8}, independent across triples (256 atoms).
//! * `micro-stoch-1`: S=2, A=2, H=2, uniform initial state and two equally
//!   likely transition atoms (uniform; or action 1 favours state 1 and
//!   action 2 favours state 2 with probability 3/4). Bernoulli rewards with
//!   per-triple means uniform on {0, 0.8} (512 atoms).

use crate::mdp::{Dims, Triple};
use crate::num::Prob;
use crate::prior::{DiscretePrior, FactoredRewardPrior, RewardFamily};

pub const NAMES: [&str; 2] = ["micro-det-1", "micro-stoch-1"];

fn point<P: Prob>(s: usize, i: usize) -> Vec<P> {
    (0..s).map(|j| if j == i { P::one() } else { P::zero() }).collect()
}

fn uniform_zero_or<P: Prob>(dims: Dims, high: P) -> Vec<Vec<(P, P)>> {
    let half = P::from_ratio(1, 2);
    vec![vec![(P::zero(), half.clone()), (high, half)]; dims.num_triples()]
}

fn det_dynamics<P: Prob>(dims: Dims) -> (Vec<P>, Vec<Vec<P>>) {
    let trans = dims
        .triples()
        .map(|t| {
            if t.h + 1 < dims.h {
                point(dims.s, t.a.min(dims.s - 1))
            } else {
                point(dims.s, 0)
            }
        })
        .collect();
    (point(dims.s, 0), trans)
}

pub fn micro_det_1_factored<P: Prob>() -> FactoredRewardPrior<P> {
    let dims = Dims::new(2, 2, 2).expect("static dims");
    let (init, trans) = det_dynamics(dims);
    FactoredRewardPrior {
        dims,
        transition_atoms: vec![(init, trans, P::one())],
        marginals: uniform_zero_or(dims, P::from_ratio(4, 5)),
        family: RewardFamily::Deterministic,
    }
}

pub fn micro_det_1<P: Prob>() -> DiscretePrior<P> {
    micro_det_1_factored().expand().expect("static instance")
}

pub fn micro_stoch_1_factored<P: Prob>() -> FactoredRewardPrior<P> {
    let dims = Dims::new(2, 2, 2).expect("static dims");
    let half = P::from_ratio(1, 2);
    let init = vec![half.clone(), half.clone()];
    let sink = |t: Triple| t.h + 1 == dims.h;
    let uniform: Vec<Vec<P>> = dims
        .triples()
        .map(|t| if sink(t) { point(2, 0) } else { vec![half.clone(), half.clone()] })
        .collect();
    let biased: Vec<Vec<P>> = dims
        .triples()
        .map(|t| {
            if sink(t) {
                point(2, 0)
            } else if t.a == 0 {
                vec![P::from_ratio(3, 4), P::from_ratio(1, 4)]
            } else {
                vec![P::from_ratio(1, 4), P::from_ratio(3, 4)]
            }
        })
        .collect();
    FactoredRewardPrior {
        dims,
        transition_atoms: vec![
            (init.clone(), uniform, half.clone()),
            (init, biased, half),
        ],
        marginals: uniform_zero_or(dims, P::from_ratio(4, 5)),
        family: RewardFamily::Bernoulli,
    }
}

pub fn micro_stoch_1<P: Prob>() -> DiscretePrior<P> {
    micro_stoch_1_factored().expand().expect("static instance")
}

/// Micro-DET-1 dynamics with every reward fixed at `c`.
pub fn constant_reward_prior<P: Prob>(c: P) -> DiscretePrior<P> {
    let dims = Dims::new(2, 2, 2).expect("static dims");
    let (init, trans) = det_dynamics(dims);
    FactoredRewardPrior {
        dims,
        transition_atoms: vec![(init, trans, P::one())],
        marginals: vec![vec![(c, P::one())]; dims.num_triples()],
        family: RewardFamily::Deterministic,
    }
    .expand()
    .expect("static instance")
}

pub fn by_name<P: Prob>(name: &str) -> Option<DiscretePrior<P>> {
    match name {
        "micro-det-1" => Some(micro_det_1()),
        "micro-stoch-1" => Some(micro_stoch_1()),
        _ => None,
    }
}

pub fn factored_by_name<P: Prob>(name: &str) -> Option<FactoredRewardPrior<P>> {
    match name {
        "micro-det-1" => Some(micro_det_1_factored()),
        "micro-stoch-1" => Some(micro_stoch_1_factored()),
        _ => None,
    }
}
