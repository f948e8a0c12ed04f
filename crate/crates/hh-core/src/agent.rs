//! Agent behavior models.
//!
//! Both agents know the prior, the mechanism and the episode index. The
//! canonical truster treats the revealed ledger as non-strategic data; the
//! fully rational agent conditions on the mechanism's full signal law,
//! which it obtains from an external source (the exact oracle).

use serde::{Deserialize, Serialize};

use crate::error::{HhError, Result};
use crate::ledger::Ledger;
use crate::mdp::MarkovPolicy;
use crate::num::Prob;
use crate::prior::{bayes_greedy, canonical_posterior, DiscretePrior, Posterior, Provenance};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentMode {
    CanonicalTruster,
    FullyRational,
}

/// What an agent knows besides the revealed ledger.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EpisodeContext {
    pub k: u64,
    pub phase: u64,
}

pub trait Agent<P: Prob>: Send + Sync {
    fn mode(&self) -> AgentMode;
    fn choose_policy(&self, ctx: &EpisodeContext, revealed: &Ledger) -> Result<MarkovPolicy>;
}

/// Unnormalized `Pr[μ* = atom, λ_k = λ]` under the full game measure.
pub trait MechanismPosteriorSource<P: Prob>: Send + Sync {
    fn mechanism_masses(&self, ctx: &EpisodeContext, revealed: &Ledger) -> Result<Vec<P>>;
}

/// Normalized mechanism posterior from a source.
pub fn mechanism_posterior<'a, P: Prob>(
    prior: &'a DiscretePrior<P>,
    source: &dyn MechanismPosteriorSource<P>,
    ctx: &EpisodeContext,
    revealed: &Ledger,
) -> Result<Posterior<'a, P>> {
    let masses = source.mechanism_masses(ctx, revealed)?;
    if masses.len() != prior.len() {
        return Err(HhError::InvalidInput("mechanism masses do not match the prior".into()));
    }
    Posterior::from_masses(
        prior,
        masses,
        Provenance {
            ledger: Some(revealed.digest()),
            event_size: prior.len(),
            label: format!("mechanism k={}", ctx.k),
        },
    )
}

pub struct CanonicalTruster<'a, P> {
    prior: &'a DiscretePrior<P>,
}

impl<'a, P: Prob> CanonicalTruster<'a, P> {
    pub fn new(prior: &'a DiscretePrior<P>) -> Self {
        CanonicalTruster { prior }
    }
}

impl<P: Prob> Agent<P> for CanonicalTruster<'_, P> {
    fn mode(&self) -> AgentMode {
        AgentMode::CanonicalTruster
    }

    fn choose_policy(&self, _ctx: &EpisodeContext, revealed: &Ledger) -> Result<MarkovPolicy> {
        bayes_greedy(&canonical_posterior(self.prior, revealed, &self.prior.full_event())?)
    }
}

pub struct FullyRational<'a, P> {
    prior: &'a DiscretePrior<P>,
    source: Option<&'a dyn MechanismPosteriorSource<P>>,
}

impl<'a, P: Prob> FullyRational<'a, P> {
    pub fn new(prior: &'a DiscretePrior<P>, source: &'a dyn MechanismPosteriorSource<P>) -> Self {
        FullyRational {
            prior,
            source: Some(source),
        }
    }

    /// An agent with no way to compute the mechanism law; every choice
    /// fails with `OracleUnavailable`.
    pub fn detached(prior: &'a DiscretePrior<P>) -> Self {
        FullyRational { prior, source: None }
    }
}

impl<P: Prob> Agent<P> for FullyRational<'_, P> {
    fn mode(&self) -> AgentMode {
        AgentMode::FullyRational
    }

    fn choose_policy(&self, ctx: &EpisodeContext, revealed: &Ledger) -> Result<MarkovPolicy> {
        let source = self.source.ok_or_else(|| {
            HhError::OracleUnavailable("fully rational agent needs an exact oracle".into())
        })?;
        bayes_greedy(&mechanism_posterior(self.prior, source, ctx, revealed)?)
    }
}
