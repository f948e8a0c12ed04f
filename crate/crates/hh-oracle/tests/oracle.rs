use hh_core::agent::AgentMode;
use hh_core::analysis::sufficiently_visiting_policies;
use hh_core::error::HhError;
use hh_core::instances;
use hh_core::mdp::TripleSet;
use hh_core::mechanism::{det_parameters, MechanismConfig};
use hh_core::num::{Prob, Rational};
use hh_core::prior::DiscretePrior;
use hh_oracle::{enumerate_game, HygieneKind, OracleConfig, Variant};

fn det_config(phases: u64, agent: AgentMode, variant: Variant) -> (DiscretePrior<Rational>, OracleConfig) {
    let prior = instances::micro_det_1::<Rational>();
    let mechanism = det_parameters(&prior).unwrap().config;
    (
        prior,
        OracleConfig {
            mechanism,
            phases,
            agent,
            variant,
        },
    )
}

fn small_config(n_phase: u64, n_lrn: u64, phases: u64) -> OracleConfig {
    OracleConfig {
        mechanism: MechanismConfig {
            n_phase,
            n_lrn,
            eps_pun: Rational::from_ratio(1, 10),
            rho: 0.5,
            total_phases: phases,
        },
        phases,
        agent: AgentMode::CanonicalTruster,
        variant: Variant::Faithful,
    }
}

#[test]
fn zero_phases_give_the_prior() {
    let (prior, config) = det_config(0, AgentMode::CanonicalTruster, Variant::Faithful);
    let table = enumerate_game(&config, &prior).unwrap();
    let marginal = table.atom_marginal(1).unwrap();
    for (i, (_, w)) in prior.atoms().iter().enumerate() {
        assert_eq!(&marginal[i], w);
    }
    assert!(matches!(table.layer(2), Err(HhError::OracleUnavailable(_))));
}

#[test]
fn layers_preserve_mass_and_the_truth_marginal() {
    let prior = instances::micro_stoch_1::<Rational>();
    let table = enumerate_game(&small_config(3, 1, 2), &prior).unwrap();
    for phase in 1..=3 {
        assert_eq!(table.total_mass(phase).unwrap(), Rational::from_u64(1));
        let marginal = table.atom_marginal(phase).unwrap();
        for (i, (_, w)) in prior.atoms().iter().enumerate() {
            assert_eq!(&marginal[i], w, "phase {phase} atom {i}");
        }
    }
}

#[test]
fn faithful_mechanism_is_hygienic_on_stochastic_instance() {
    let prior = instances::micro_stoch_1::<Rational>();
    let table = enumerate_game(&small_config(3, 1, 2), &prior).unwrap();
    for phase in 1..=3 {
        for kind in [HygieneKind::Censored, HygieneKind::Honest] {
            let (report, tv) = table.hygiene_tv(kind, phase).unwrap();
            assert_eq!(tv, Rational::from_u64(0), "{report:?}");
        }
        assert_eq!(table.hallucination_distribution_check(phase).unwrap(), Rational::from_u64(0));
    }
}

#[test]
fn unconditioned_hallucination_breaks_distribution_equality() {
    let (prior, config) = det_config(2, AgentMode::CanonicalTruster, Variant::UnconditionedHallucination);
    let table = enumerate_game(&config, &prior).unwrap();
    assert!(table.hallucination_distribution_check(2).unwrap() > Rational::from_u64(0));
    let (prior, config) = det_config(2, AgentMode::CanonicalTruster, Variant::Faithful);
    let table = enumerate_game(&config, &prior).unwrap();
    assert_eq!(table.hallucination_distribution_check(2).unwrap(), Rational::from_u64(0));
}

#[test]
fn deterministic_one_step_audit_passes_and_degenerates_in_phase_one() {
    let (prior, config) = det_config(4, AgentMode::FullyRational, Variant::Faithful);
    let table = enumerate_game(&config, &prior).unwrap();
    let model = prior.model(0).clone();
    let target = move |u: &TripleSet, _: &_| sufficiently_visiting_policies(&model, u, &Rational::from_u64(1));
    let err = table.one_step_audit(1, &target).unwrap_err();
    assert!(matches!(err, HhError::DegenerateSplit(_)));
    for phase in 2..=4 {
        let report = table.one_step_audit(phase, &target).unwrap();
        assert!(!report.rows.is_empty());
        assert_eq!(report.violations, 0, "phase {phase}");
        assert_eq!(report.condition_failures, 0, "phase {phase}");
        assert_eq!(report.p_hal_bound_failures, 0, "phase {phase}");
        for row in &report.rows {
            assert!(row.gap >= 0.2 - 1e-12, "gap {} at phase {phase}", row.gap);
        }
    }
}

#[test]
fn mechanism_posterior_beyond_table_is_unavailable() {
    let (prior, config) = det_config(1, AgentMode::CanonicalTruster, Variant::Faithful);
    let table = enumerate_game(&config, &prior).unwrap();
    let k = config.mechanism.first_episode(2);
    let err = table
        .mechanism_posterior_at(k, &hh_core::ledger::Ledger::raw(prior.dims()))
        .unwrap_err();
    assert!(matches!(err, HhError::OracleUnavailable(_)));
}

#[test]
fn float_and_rational_tables_agree() {
    let rational = instances::micro_stoch_1::<Rational>();
    let float = instances::micro_stoch_1::<f64>();
    let config = small_config(2, 1, 1);
    let tr = enumerate_game(&config, &rational).unwrap();
    let tf = enumerate_game(&config, &float).unwrap();
    assert_eq!(tr.num_states(2).unwrap(), tf.num_states(2).unwrap());
    let (_, tv) = tf.hygiene_tv(HygieneKind::Censored, 2).unwrap();
    assert!(tv <= 1e-12);
}
