use proptest::prelude::*;

use quotamatch::checks::{
    all_envies, blocking_pairs, check_feasible, is_complete, is_within_type_envy_free, open_slot_blockings, total_rank,
    within_type_envies,
};
use quotamatch::classic::{break_ties, cwtefm_construct, deferred_acceptance};
use quotamatch::format::{emit_instance, parse_instance};
use quotamatch::gen::{generate, GenParams, QuotaProfile};
use quotamatch::ipmodel::{characteristic_vector, evaluate};
use quotamatch::oracle::{enumerate_feasible, EnumerationBudget};
use quotamatch::pipelines::Diagnostics;
use quotamatch::{
    solve_concept, ApplicantId, ConceptName, Instance, QuotaMode, SolutionConcept, SolverConfig, TieBreakPolicy,
};

fn small_instance() -> impl Strategy<Value = Instance> {
    (
        1usize..=5,
        1usize..=3,
        any::<u64>(),
        prop_oneof![Just(0.0), Just(0.5)],
        any::<bool>(),
        0u32..=1,
        1u32..=2,
    )
        .prop_map(|(n, m, seed, ties, typed, lower, upper)| {
            let mut p = GenParams::small(n, m, seed);
            if typed && n > 1 {
                p = p.with_types(&[n / 2, n - n / 2]);
            }
            p.tie_density = ties;
            p.quotas = QuotaProfile::Uniform {
                lower: lower.min(upper),
                upper,
            };
            generate(&p).unwrap()
        })
}

fn typed_lower_instance() -> impl Strategy<Value = Instance> {
    (prop::collection::vec(1usize..=4, 1..=3), 1usize..=4, any::<u64>()).prop_map(|(counts, m, seed)| {
        let mut p = GenParams::small(0, m, seed).with_types(&counts);
        p.tie_density = 0.4;
        p.quotas = QuotaProfile::TypeLowerFeasible;
        generate(&p).unwrap()
    })
}

fn scored_pairs(inst: &Instance) -> Vec<(ApplicantId, ApplicantId, quotamatch::CompanyId)> {
    let mut out = Vec::new();
    for c in inst.company_ids() {
        for a in inst.applicant_ids() {
            for b in inst.applicant_ids() {
                if a != b && inst.score(a, c).is_some() && inst.score(b, c).is_some() {
                    out.push((a, b, c));
                }
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn emitted_instances_parse_back(inst in small_instance()) {
        prop_assert_eq!(parse_instance(&emit_instance(&inst)).unwrap(), inst);
    }

    #[test]
    fn tie_breaking_refines_scores(inst in small_instance()) {
        let strict = break_ties(&inst, &TieBreakPolicy::ByIndex).unwrap();
        prop_assert!(strict.is_strict());
        for (a, b, c) in scored_pairs(&inst) {
            if inst.score(a, c) > inst.score(b, c) {
                prop_assert!(strict.score(a, c) > strict.score(b, c));
            }
        }
    }

    #[test]
    fn deferred_acceptance_is_stable(inst in small_instance()) {
        let strict = break_ties(&inst, &TieBreakPolicy::ByIndex).unwrap();
        let m = deferred_acceptance(&strict).unwrap();
        prop_assert!(check_feasible(&strict, &m, QuotaMode::UpperOnly).unwrap().is_empty());
        prop_assert!(blocking_pairs(&strict, &m, false).is_empty());
        prop_assert!(blocking_pairs(&inst, &m, true).is_empty());
    }

    #[test]
    fn diagnostics_are_consistent(inst in small_instance(), pick in any::<prop::sample::Index>()) {
        let all: Vec<_> = enumerate_feasible(&inst, QuotaMode::UpperOnly, &EnumerationBudget::default()).unwrap().collect();
        let m = &all[pick.index(all.len())];
        let d = Diagnostics::compute(&inst, m);
        prop_assert_eq!(d.matched + d.unmatched, inst.n());
        prop_assert_eq!(d.within_type_envies + d.cross_type_envies, all_envies(&inst, m).len());
        prop_assert_eq!(d.within_type_envies, within_type_envies(&inst, m).len());
        prop_assert!(d.open_slot_blockings <= d.blocking_pairs);
        prop_assert_eq!(d.open_slot_blockings, open_slot_blockings(&inst, m).len());
        prop_assert_eq!(d.total_rank, total_rank(&inst, m));
        prop_assert!(d.within_type_intensity >= d.within_type_envies as i64);
        prop_assert_eq!(d.profile.iter().map(|p| p.per_type.iter().sum::<usize>()).sum::<usize>(), d.matched);
    }

    #[test]
    fn solver_objectives_match_checkers(inst in small_instance(), k in 0usize..11) {
        let name = ConceptName::model_based().nth(k).unwrap();
        let concept = SolutionConcept::new(name);
        if let Ok(report) = solve_concept(&inst, &concept, &SolverConfig::default()) {
            let solved = concept.instance(&inst);
            prop_assert!(concept.admissible(&solved, &report.matching));
            let values: Vec<i64> = report.objectives.iter().map(|(_, v)| *v).collect();
            prop_assert_eq!(values, concept.objective_values(&solved, &report.matching));
        }
    }

    #[test]
    fn admissible_matchings_satisfy_the_model(inst in small_instance(), k in 0usize..11) {
        let concept = SolutionConcept::new(ConceptName::model_based().nth(k).unwrap());
        let model = concept.build_model(&inst);
        for m in enumerate_feasible(&inst, QuotaMode::WithGlobalTypes, &EnumerationBudget::default()).unwrap() {
            if concept.admissible(&inst, &m) {
                let eval = evaluate(&model, &characteristic_vector(&model, &m));
                prop_assert!(eval.feasible, "{} violates rows {:?}", m, eval.violated);
                prop_assert_eq!(eval.objective_values, concept.objective_values(&inst, &m));
            }
        }
    }

    #[test]
    fn construction_is_complete_and_envy_free_within_types(inst in typed_lower_instance()) {
        let m = cwtefm_construct(&inst).unwrap();
        prop_assert!(is_complete(&inst, &m));
        prop_assert!(is_within_type_envy_free(&inst, &m));
        prop_assert!(check_feasible(&inst, &m, QuotaMode::WithGlobalTypes).unwrap().is_empty());
    }
}
