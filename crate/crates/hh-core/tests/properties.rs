//! Cross-module invariants checked on random inputs.

use proptest::prelude::*;

use hh_core::agent::CanonicalTruster;
use hh_core::analysis::{good_model_predicate, value_lower_bound, value_upper_bound};
use hh_core::instances;
use hh_core::mdp::{enumerate_policies, TripleSet};
use hh_core::mechanism::{det_parameters, run_game, LogDetail, RunOptions};

const TOL: f64 = 1e-12;

fn eps_grid() -> impl Strategy<Value = (f64, f64, f64)> {
    (0u32..=4, 0u32..=4, 0u32..=4).prop_map(|(a, b, c)| (a as f64 / 20.0, b as f64 / 20.0, c as f64 / 20.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    /// Every good atom obeys both value bounds under every policy.
    #[test]
    fn good_models_obey_value_bounds(star in 0usize..16, mask in 0u32..256, (eps_pun, eps_r, eps_p) in eps_grid()) {
        let prior = instances::micro_stoch_1::<f64>();
        let d = prior.dims();
        let star = star % prior.len();
        let mu_star = prior.model(star);
        let u = TripleSet::from_triples(d, d.triples().filter(|t| mask >> d.index(*t) & 1 == 1));
        let policies = enumerate_policies(d).unwrap();
        for (mu, _) in prior.atoms() {
            if !good_model_predicate(mu, mu_star, &u, &eps_pun, &eps_r, &eps_p) {
                continue;
            }
            for pi in &policies {
                let up = value_upper_bound(mu, mu_star, pi, &u, &eps_pun, &eps_r, &eps_p);
                prop_assert!(up.value <= up.bound + TOL, "upper {} > {}", up.value, up.bound);
                let lo = value_lower_bound(mu, mu_star, pi, &u, &eps_p);
                prop_assert!(lo.value + TOL >= lo.bound, "lower {} < {}", lo.value, lo.bound);
            }
        }
    }

    /// With the deterministic parameters, every phase before coverage
    /// reaches a new triple, and runs replay exactly from their seed.
    #[test]
    fn deterministic_runs_explore_each_phase(seed in any::<u64>()) {
        let prior = instances::micro_det_1::<f64>();
        let config = det_parameters(&prior).unwrap().config;
        let agent = CanonicalTruster::new(&prior);
        let options = RunOptions { log_detail: LogDetail::HallucinationOnly, ..RunOptions::default() };
        let log = run_game(&config, &prior, &agent, seed, None, &options).unwrap();
        let s = &log.summary;
        let covered = s.phases_to_coverage.expect("covered within S·A·H phases");
        prop_assert!(covered as usize <= s.reach_size);
        prop_assert!(s.new_triple_indicator.iter().take(covered as usize).all(|b| *b));
        let again = run_game(&config, &prior, &agent, seed, None, &options).unwrap();
        prop_assert_eq!(log.to_jsonl(), again.to_jsonl());
    }
}
