//! Exhaustive enumeration on tiny instances, used as ground truth for the
//! model-based and combinatorial solvers.

use thiserror::Error;

use crate::checks::{blocking_pairs, check_feasible, QuotaMode};
use crate::instance::{ApplicantId, CompanyId, Instance, Matching};
use crate::pipelines::{ConceptName, SolutionConcept};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnumerationBudget {
    pub max_applicants: usize,
    pub max_companies: usize,
    /// Cap on the size of the product space of assignments.
    pub max_states: u64,
}

impl Default for EnumerationBudget {
    fn default() -> Self {
        EnumerationBudget {
            max_applicants: 6,
            max_companies: 3,
            max_states: 1 << 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("instance exceeds the enumeration budget ({0})")]
    OverBudget(String),
    #[error("no admissible matching")]
    NoAdmissibleMatching,
    #[error("{0} is not defined by an optimisation criterion")]
    Unsupported(ConceptName),
}

/// Every assignment in enumeration order: applicants ascending, each
/// applicant's options in preference order and then unmatched, the last
/// applicant varying fastest.
pub struct Assignments<'a> {
    inst: &'a Instance,
    digits: Vec<usize>,
    done: bool,
}

impl<'a> Assignments<'a> {
    fn current(&self) -> Matching {
        let assignment = self
            .digits
            .iter()
            .enumerate()
            .map(|(i, &d)| self.inst.applicants[i].choices.get(d).map(|ch| ch.company))
            .collect();
        Matching::from_assignment(assignment)
    }

    fn advance(&mut self) {
        for i in (0..self.digits.len()).rev() {
            if self.digits[i] < self.inst.applicants[i].choices.len() {
                self.digits[i] += 1;
                return;
            }
            self.digits[i] = 0;
        }
        self.done = true;
    }
}

impl Iterator for Assignments<'_> {
    type Item = Matching;

    fn next(&mut self) -> Option<Matching> {
        if self.done {
            return None;
        }
        let m = self.current();
        self.advance();
        Some(m)
    }
}

fn check_budget(inst: &Instance, budget: &EnumerationBudget) -> Result<(), OracleError> {
    if inst.n() > budget.max_applicants {
        return Err(OracleError::OverBudget(format!(
            "{} applicants > {}",
            inst.n(),
            budget.max_applicants
        )));
    }
    if inst.m() > budget.max_companies {
        return Err(OracleError::OverBudget(format!(
            "{} companies > {}",
            inst.m(),
            budget.max_companies
        )));
    }
    let states = inst
        .applicants
        .iter()
        .try_fold(1u64, |acc, a| acc.checked_mul(a.choices.len() as u64 + 1));
    match states {
        Some(s) if s <= budget.max_states => Ok(()),
        _ => Err(OracleError::OverBudget(format!(
            "more than {} assignments",
            budget.max_states
        ))),
    }
}

/// Every assignment of applicants to listed companies or to nobody.
pub fn enumerate_all<'a>(inst: &'a Instance, budget: &EnumerationBudget) -> Result<Assignments<'a>, OracleError> {
    check_budget(inst, budget)?;
    Ok(Assignments {
        inst,
        digits: vec![0; inst.n()],
        done: false,
    })
}

/// The assignments passing [`check_feasible`] under `mode`.
pub fn enumerate_feasible<'a>(
    inst: &'a Instance,
    mode: QuotaMode,
    budget: &EnumerationBudget,
) -> Result<impl Iterator<Item = Matching> + 'a, OracleError> {
    Ok(enumerate_all(inst, budget)?.filter(move |m| check_feasible(inst, m, mode).is_ok_and(|v| v.is_empty())))
}

/// Matchings respecting upper quotas with no blocking pair.
pub fn stable_matchings(inst: &Instance, budget: &EnumerationBudget) -> Result<Vec<Matching>, OracleError> {
    Ok(enumerate_feasible(inst, QuotaMode::UpperOnly, budget)?
        .filter(|m| blocking_pairs(inst, m, true).is_empty())
        .collect())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BruteOptimum {
    /// Lexicographically smallest objective vector.
    pub values: Vec<i64>,
    /// Every admissible matching attaining it, in enumeration order.
    pub matchings: Vec<Matching>,
}

/// Best admissible matchings for a model-based concept.
pub fn brute_optimum(
    inst: &Instance,
    concept: &SolutionConcept,
    budget: &EnumerationBudget,
) -> Result<BruteOptimum, OracleError> {
    if concept.name == ConceptName::EqualTypeScores {
        return Err(OracleError::Unsupported(concept.name));
    }
    let inst = concept.instance(inst);
    let mut best: Option<BruteOptimum> = None;
    for m in enumerate_all(&inst, budget)? {
        if !concept.admissible(&inst, &m) {
            continue;
        }
        let values = concept.objective_values(&inst, &m);
        match &mut best {
            Some(b) if values == b.values => b.matchings.push(m),
            Some(b) if values > b.values => {}
            _ => {
                best = Some(BruteOptimum {
                    values,
                    matchings: vec![m],
                })
            }
        }
    }
    best.ok_or(OracleError::NoAdmissibleMatching)
}

/// Best partner each applicant gets in any matching of `set`.
pub fn best_partners(inst: &Instance, set: &[Matching]) -> Vec<Option<CompanyId>> {
    inst.applicant_ids()
        .map(|a: ApplicantId| {
            set.iter()
                .filter_map(|m| m.company_of(a))
                .min_by_key(|&c| inst.rank(a, c).unwrap_or(u32::MAX))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples::{ex_a, ex_b};
    use crate::instance::InstanceBuilder;

    #[test]
    fn ex_a_feasible_matchings() {
        let inst = ex_a();
        let all: Vec<Matching> = enumerate_feasible(&inst, QuotaMode::UpperOnly, &EnumerationBudget::default())
            .unwrap()
            .collect();
        let expected = vec![
            Matching::from_pairs(2, &[(0, 0), (1, 1)]),
            Matching::from_pairs(2, &[(0, 0)]),
            Matching::from_pairs(2, &[(1, 0)]),
            Matching::from_pairs(2, &[(1, 1)]),
            Matching::empty(2),
        ];
        assert_eq!(all, expected);

        let mut lower = ex_a();
        lower.companies[0].lower = 1;
        let count = enumerate_feasible(&lower, QuotaMode::WithLower, &EnumerationBudget::default())
            .unwrap()
            .count();
        assert_eq!(count, 3);
    }

    #[test]
    fn empty_instance_has_one_matching() {
        let inst = InstanceBuilder::new().build();
        let all: Vec<_> = enumerate_feasible(&inst, QuotaMode::UpperOnly, &EnumerationBudget::default())
            .unwrap()
            .collect();
        assert_eq!(all, vec![Matching::empty(0)]);
    }

    #[test]
    fn budget_is_enforced() {
        let mut b = InstanceBuilder::new().company(0, 1);
        for _ in 0..7 {
            b = b.applicant(0, &[(0, 2)]);
        }
        assert!(matches!(
            enumerate_all(&b.build(), &EnumerationBudget::default()),
            Err(OracleError::OverBudget(_))
        ));
    }

    #[test]
    fn ex_b_has_a_unique_stable_matching() {
        let stable = stable_matchings(&ex_b(), &EnumerationBudget::default()).unwrap();
        assert_eq!(stable, vec![Matching::from_pairs(5, &[(0, 1), (1, 2), (3, 0)])]);
    }

    #[test]
    fn ex_a_min_rank_stable() {
        let r = brute_optimum(
            &ex_a(),
            &ConceptName::MinRankStable.into(),
            &EnumerationBudget::default(),
        )
        .unwrap();
        assert_eq!(r.values, vec![0, 3]);
        assert_eq!(r.matchings, vec![Matching::from_pairs(2, &[(0, 0), (1, 1)])]);

        let mut c = SolutionConcept::new(ConceptName::MinRankStable);
        c.prefer_complete = false;
        let r = brute_optimum(&ex_a(), &c, &EnumerationBudget::default()).unwrap();
        assert_eq!(r.values, vec![1]);
        assert_eq!(r.matchings, vec![Matching::from_pairs(2, &[(1, 0)])]);
    }

    #[test]
    fn unsatisfiable_quotas() {
        let inst = InstanceBuilder::new().company(3, 3).applicant(0, &[(0, 2)]).build();
        assert_eq!(
            brute_optimum(&inst, &ConceptName::MinRankEf.into(), &EnumerationBudget::default()),
            Err(OracleError::NoAdmissibleMatching)
        );
    }
}
