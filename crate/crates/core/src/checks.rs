//! Validation and matching-quality checkers: quotas, stability, envy, rank.
//!
//! Every checker is a pure function of an [`Instance`] and a [`Matching`].
//! Blocking pairs follow the weak-stability rule: a company only prefers an
//! applicant to an assignee with a strictly lower score.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::instance::{ApplicantId, CompanyId, Instance, Matching, Score, TypeTag};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Violation {
    QuotaOrder(CompanyId),
    TypeQuotaOrder {
        company: CompanyId,
        ty: TypeTag,
    },
    GlobalQuotaOrder(TypeTag),
    UnknownType {
        applicant: Option<ApplicantId>,
        ty: TypeTag,
    },
    DanglingPreference {
        applicant: ApplicantId,
        company: CompanyId,
    },
    DuplicatePreference {
        applicant: ApplicantId,
        company: CompanyId,
    },
    NegativeScore {
        applicant: ApplicantId,
        company: CompanyId,
    },
    /// Warning only: the applicant can never be matched and is left out of
    /// completeness requirements.
    EmptyPreferenceList(ApplicantId),
    UpperQuota {
        company: CompanyId,
        fill: usize,
        bound: u32,
    },
    LowerQuota {
        company: CompanyId,
        fill: usize,
        bound: u32,
    },
    TypeUpperQuota {
        company: CompanyId,
        ty: TypeTag,
        count: usize,
        bound: u32,
    },
    TypeLowerQuota {
        company: CompanyId,
        ty: TypeTag,
        count: usize,
        bound: u32,
    },
    GlobalUpperQuota {
        ty: TypeTag,
        count: usize,
        bound: u32,
    },
    GlobalLowerQuota {
        ty: TypeTag,
        count: usize,
        bound: u32,
    },
}

impl Violation {
    pub fn is_warning(&self) -> bool {
        matches!(self, Violation::EmptyPreferenceList(_))
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            QuotaOrder(c) => write!(f, "{c}: lower quota exceeds upper quota"),
            TypeQuotaOrder { company, ty } => {
                write!(f, "{company}: quota bounds for type {ty} are inconsistent")
            }
            GlobalQuotaOrder(ty) => write!(f, "global quota for type {ty}: lower exceeds upper"),
            UnknownType { applicant: Some(a), ty } => write!(f, "{a}: unknown type {ty}"),
            UnknownType { applicant: None, ty } => write!(f, "quota refers to unknown type {ty}"),
            DanglingPreference { applicant, company } => {
                write!(f, "{applicant}: preference list cites missing company {company}")
            }
            DuplicatePreference { applicant, company } => {
                write!(f, "{applicant}: {company} listed twice")
            }
            NegativeScore { applicant, company } => {
                write!(f, "{applicant}: negative score at {company}")
            }
            EmptyPreferenceList(a) => write!(f, "{a}: empty preference list (warning)"),
            UpperQuota { company, fill, bound } => {
                write!(f, "{company}: {fill} assignees above upper quota {bound}")
            }
            LowerQuota { company, fill, bound } => {
                write!(f, "{company}: {fill} assignees below lower quota {bound}")
            }
            TypeUpperQuota {
                company,
                ty,
                count,
                bound,
            } => {
                write!(f, "{company}: {count} of type {ty} above quota {bound}")
            }
            TypeLowerQuota {
                company,
                ty,
                count,
                bound,
            } => {
                write!(f, "{company}: {count} of type {ty} below quota {bound}")
            }
            GlobalUpperQuota { ty, count, bound } => {
                write!(f, "type {ty}: {count} assigned above global quota {bound}")
            }
            GlobalLowerQuota { ty, count, bound } => {
                write!(f, "type {ty}: {count} assigned below global quota {bound}")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum MatchingError {
    #[error("matching assigns {applicant} to {company}, which is not an application")]
    UnknownAssignment { applicant: ApplicantId, company: CompanyId },
    #[error("matching covers {found} applicants, instance has {expected}")]
    SizeMismatch { expected: usize, found: usize },
}

/// Which quota families a feasibility check covers; each mode includes the
/// ones before it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum QuotaMode {
    UpperOnly,
    WithLower,
    WithTypes,
    WithGlobalTypes,
}

pub fn validate_instance(inst: &Instance) -> Vec<Violation> {
    let mut out = Vec::new();
    let p = inst.num_types();
    let known = |ty: TypeTag| ty.0 < p;

    for (j, c) in inst.companies.iter().enumerate() {
        let cid = CompanyId(j);
        if c.lower > c.upper {
            out.push(Violation::QuotaOrder(cid));
        }
        let tys: BTreeSet<TypeTag> = c.type_lower.keys().chain(c.type_upper.keys()).copied().collect();
        for ty in tys {
            if !known(ty) {
                out.push(Violation::UnknownType { applicant: None, ty });
                continue;
            }
            let lo = c.type_lower.get(&ty).copied().unwrap_or(0);
            let hi = c.type_upper.get(&ty).copied().unwrap_or(c.upper);
            if lo > hi || hi > c.upper {
                out.push(Violation::TypeQuotaOrder { company: cid, ty });
            }
        }
    }

    let tys: BTreeSet<TypeTag> = inst
        .global_type_lower
        .keys()
        .chain(inst.global_type_upper.keys())
        .copied()
        .collect();
    for ty in tys {
        if !known(ty) {
            out.push(Violation::UnknownType { applicant: None, ty });
        } else if let Some(hi) = inst.global_upper(ty) {
            if inst.global_lower(ty) > hi {
                out.push(Violation::GlobalQuotaOrder(ty));
            }
        }
    }

    for (i, a) in inst.applicants.iter().enumerate() {
        let aid = ApplicantId(i);
        if !known(a.ty) {
            out.push(Violation::UnknownType {
                applicant: Some(aid),
                ty: a.ty,
            });
        }
        if a.choices.is_empty() {
            out.push(Violation::EmptyPreferenceList(aid));
        }
        let mut seen = BTreeSet::new();
        for ch in &a.choices {
            if ch.company.0 >= inst.m() {
                out.push(Violation::DanglingPreference {
                    applicant: aid,
                    company: ch.company,
                });
            } else if !seen.insert(ch.company) {
                out.push(Violation::DuplicatePreference {
                    applicant: aid,
                    company: ch.company,
                });
            }
            if ch.score.0 < 0 {
                out.push(Violation::NegativeScore {
                    applicant: aid,
                    company: ch.company,
                });
            }
        }
    }
    out
}

/// True when `validate_instance` reports nothing but warnings.
pub fn is_valid(inst: &Instance) -> bool {
    validate_instance(inst).iter().all(Violation::is_warning)
}

pub fn check_matching(inst: &Instance, m: &Matching) -> Result<(), MatchingError> {
    if m.num_applicants() != inst.n() {
        return Err(MatchingError::SizeMismatch {
            expected: inst.n(),
            found: m.num_applicants(),
        });
    }
    for (a, c) in m.pairs() {
        if inst.application(a, c).is_none() {
            return Err(MatchingError::UnknownAssignment {
                applicant: a,
                company: c,
            });
        }
    }
    Ok(())
}

pub fn check_feasible(inst: &Instance, m: &Matching, mode: QuotaMode) -> Result<Vec<Violation>, MatchingError> {
    check_matching(inst, m)?;
    let p = inst.num_types();
    let mut per_type = vec![vec![0usize; p]; inst.m()];
    let mut global = vec![0usize; p];
    for (a, c) in m.pairs() {
        let ty = inst.type_of(a).0.min(p - 1);
        per_type[c.0][ty] += 1;
        global[ty] += 1;
    }

    let mut out = Vec::new();
    for (j, comp) in inst.companies.iter().enumerate() {
        let company = CompanyId(j);
        let fill: usize = per_type[j].iter().sum();
        if fill > comp.upper as usize {
            out.push(Violation::UpperQuota {
                company,
                fill,
                bound: comp.upper,
            });
        }
        if mode >= QuotaMode::WithLower && fill < comp.lower as usize {
            out.push(Violation::LowerQuota {
                company,
                fill,
                bound: comp.lower,
            });
        }
        if mode >= QuotaMode::WithTypes {
            for ty in inst.type_tags() {
                let count = per_type[j][ty.0];
                if let Some(&bound) = comp.type_upper.get(&ty) {
                    if count > bound as usize {
                        out.push(Violation::TypeUpperQuota {
                            company,
                            ty,
                            count,
                            bound,
                        });
                    }
                }
                let bound = comp.type_lower(ty);
                if count < bound as usize {
                    out.push(Violation::TypeLowerQuota {
                        company,
                        ty,
                        count,
                        bound,
                    });
                }
            }
        }
    }
    if mode >= QuotaMode::WithGlobalTypes {
        for ty in inst.type_tags() {
            let count = global[ty.0];
            if let Some(bound) = inst.global_upper(ty) {
                if count > bound as usize {
                    out.push(Violation::GlobalUpperQuota { ty, count, bound });
                }
            }
            let bound = inst.global_lower(ty);
            if count < bound as usize {
                out.push(Violation::GlobalLowerQuota { ty, count, bound });
            }
        }
    }
    Ok(out)
}

/// Every applicant with a non-empty preference list is assigned.
pub fn is_complete(inst: &Instance, m: &Matching) -> bool {
    inst.applicant_ids()
        .all(|a| inst.applicant(a).choices.is_empty() || m.company_of(a).is_some())
}

pub fn unmatched_count(inst: &Instance, m: &Matching) -> usize {
    inst.applicant_ids()
        .filter(|&a| !inst.applicant(a).choices.is_empty() && m.company_of(a).is_none())
        .count()
}

/// True when `a` is unmatched or ranks `c` strictly above its own company.
fn wants(inst: &Instance, m: &Matching, a: ApplicantId, rank_c: u32) -> bool {
    match m.company_of(a) {
        None => true,
        Some(own) => inst.rank(a, own).is_some_and(|r| rank_c < r),
    }
}

/// Scores of the current assignees of every company.
fn assignee_scores(inst: &Instance, m: &Matching) -> Vec<Vec<Score>> {
    let mut out = vec![Vec::new(); inst.m()];
    for (a, c) in m.pairs() {
        if let Some(s) = inst.score(a, c) {
            out[c.0].push(s);
        }
    }
    out
}

/// Pairs `(a_i, c_j)` outside `m` where `a_i` wants `c_j` and `c_j` has a free
/// seat or an assignee scored strictly below `a_i`.
///
/// `ties` is accepted for symmetry with the model builders and has no effect.
pub fn blocking_pairs(inst: &Instance, m: &Matching, _ties: bool) -> BTreeSet<(ApplicantId, CompanyId)> {
    let held = assignee_scores(inst, m);
    inst.applications()
        .filter(|e| {
            let c = e.company.0;
            wants(inst, m, e.applicant, e.rank)
                && (held[c].len() < inst.companies[c].upper as usize || held[c].iter().any(|&s| s < e.score))
        })
        .map(|e| (e.applicant, e.company))
        .collect()
}

/// Pairs ruled out by the strict-comparison stability rows: `a_i` wants `c_j`
/// and fewer than `u_j` assignees of `c_j` score strictly above `a_i`.
/// Coincides with [`blocking_pairs`] on instances without ties.
pub fn priority_blocking_pairs(inst: &Instance, m: &Matching) -> BTreeSet<(ApplicantId, CompanyId)> {
    let held = assignee_scores(inst, m);
    inst.applications()
        .filter(|e| {
            let c = e.company.0;
            wants(inst, m, e.applicant, e.rank)
                && held[c].iter().filter(|&&s| s > e.score).count() < inst.companies[c].upper as usize
        })
        .map(|e| (e.applicant, e.company))
        .collect()
}

/// Blocking pairs whose company has fewer than `u_j` assignees.
pub fn open_slot_blockings(inst: &Instance, m: &Matching) -> BTreeSet<(ApplicantId, CompanyId)> {
    let fills = m.fills(inst.m());
    inst.applications()
        .filter(|e| {
            fills[e.company.0] < inst.companies[e.company.0].upper as usize && wants(inst, m, e.applicant, e.rank)
        })
        .map(|e| (e.applicant, e.company))
        .collect()
}

/// A justified envy: `envier` wants `company`, where `envied` sits with a
/// strictly lower score. `intensity` is the score gap on the doubled scale.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Envy {
    pub envier: ApplicantId,
    pub envied: ApplicantId,
    pub company: CompanyId,
    pub intensity: i64,
}

pub fn all_envies(inst: &Instance, m: &Matching) -> Vec<Envy> {
    let mut out = Vec::new();
    for e in inst.applications() {
        if !wants(inst, m, e.applicant, e.rank) {
            continue;
        }
        for h in m.assignees(e.company) {
            let Some(sh) = inst.score(h, e.company) else { continue };
            if e.score > sh {
                out.push(Envy {
                    envier: e.applicant,
                    envied: h,
                    company: e.company,
                    intensity: e.score.0 - sh.0,
                });
            }
        }
    }
    out.sort();
    out
}

pub fn within_type_envies(inst: &Instance, m: &Matching) -> Vec<Envy> {
    all_envies(inst, m)
        .into_iter()
        .filter(|e| inst.type_of(e.envier) == inst.type_of(e.envied))
        .collect()
}

pub fn cross_type_envies(inst: &Instance, m: &Matching) -> Vec<Envy> {
    all_envies(inst, m)
        .into_iter()
        .filter(|e| inst.type_of(e.envier) != inst.type_of(e.envied))
        .collect()
}

pub fn is_envy_free(inst: &Instance, m: &Matching) -> bool {
    all_envies(inst, m).is_empty()
}

pub fn is_within_type_envy_free(inst: &Instance, m: &Matching) -> bool {
    within_type_envies(inst, m).is_empty()
}

/// Sum of ranks over assigned pairs; unmatched applicants add nothing.
pub fn total_rank(inst: &Instance, m: &Matching) -> u64 {
    m.pairs().filter_map(|(a, c)| inst.rank(a, c)).map(u64::from).sum()
}

/// Smallest total slack needed in the weak stability rows: for every pair
/// where the applicant wants the company, the number of seats not held by
/// applicants scoring at least as high.
pub fn total_deficiency(inst: &Instance, m: &Matching) -> u64 {
    let held = assignee_scores(inst, m);
    inst.applications()
        .filter(|e| wants(inst, m, e.applicant, e.rank))
        .map(|e| {
            let u = inst.companies[e.company.0].upper as usize;
            let at_least = held[e.company.0].iter().filter(|&&s| s >= e.score).count();
            u.saturating_sub(at_least) as u64
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples::{ex_a, ex_b};
    use crate::instance::InstanceBuilder;

    fn set(pairs: &[(usize, usize)]) -> BTreeSet<(ApplicantId, CompanyId)> {
        pairs.iter().map(|&(a, c)| (ApplicantId(a), CompanyId(c))).collect()
    }

    #[test]
    fn ex_a_is_valid() {
        assert!(validate_instance(&ex_a()).is_empty());
        assert!(validate_instance(&ex_b()).is_empty());
    }

    #[test]
    fn quota_order_violation() {
        let inst = InstanceBuilder::new().company(3, 2).build();
        assert_eq!(validate_instance(&inst), vec![Violation::QuotaOrder(CompanyId(0))]);
    }

    #[test]
    fn dangling_preference() {
        let inst = InstanceBuilder::new().company(0, 1).applicant(0, &[(4, 2)]).build();
        assert_eq!(
            validate_instance(&inst),
            vec![Violation::DanglingPreference {
                applicant: ApplicantId(0),
                company: CompanyId(4)
            }]
        );
    }

    #[test]
    fn empty_list_is_only_a_warning() {
        let inst = InstanceBuilder::new().company(0, 1).applicant(0, &[]).build();
        let v = validate_instance(&inst);
        assert_eq!(v, vec![Violation::EmptyPreferenceList(ApplicantId(0))]);
        assert!(is_valid(&inst));
        assert!(is_complete(&inst, &Matching::empty(1)));
    }

    #[test]
    fn feasibility_modes() {
        let inst = ex_a();
        let m = Matching::from_pairs(2, &[(0, 0), (1, 1)]);
        assert!(check_feasible(&inst, &m, QuotaMode::UpperOnly).unwrap().is_empty());

        let lowered = InstanceBuilder::new().company(1, 1).build();
        let v = check_feasible(&lowered, &Matching::empty(0), QuotaMode::WithLower).unwrap();
        assert!(matches!(v[..], [Violation::LowerQuota { .. }]));
        assert!(check_feasible(&lowered, &Matching::empty(0), QuotaMode::UpperOnly)
            .unwrap()
            .is_empty());

        let inst = ex_b();
        let m = Matching::from_pairs(5, &[(0, 1), (1, 2), (3, 0)]);
        assert!(check_feasible(&inst, &m, QuotaMode::UpperOnly).unwrap().is_empty());
    }

    #[test]
    fn fabricated_pair_is_rejected() {
        let inst = ex_a();
        let m = Matching::from_pairs(2, &[(0, 1)]);
        assert_eq!(
            check_feasible(&inst, &m, QuotaMode::UpperOnly),
            Err(MatchingError::UnknownAssignment {
                applicant: ApplicantId(0),
                company: CompanyId(1)
            })
        );
    }

    #[test]
    fn completeness() {
        let inst = ex_a();
        assert!(is_complete(&inst, &Matching::from_pairs(2, &[(0, 0), (1, 1)])));
        assert!(!is_complete(&inst, &Matching::from_pairs(2, &[(1, 0)])));
        let empty = InstanceBuilder::new().build();
        assert!(is_complete(&empty, &Matching::empty(0)));
    }

    #[test]
    fn blocking_pairs_on_ex_a() {
        let inst = ex_a();
        let m = Matching::from_pairs(2, &[(0, 0), (1, 1)]);
        assert!(blocking_pairs(&inst, &m, true).is_empty());
        assert!(blocking_pairs(&inst, &m, false).is_empty());

        // a1 unmatched and c1 empty: both applicants want c1.
        let m = Matching::from_pairs(2, &[(1, 1)]);
        assert_eq!(blocking_pairs(&inst, &m, true), set(&[(0, 0), (1, 0)]));
    }

    #[test]
    fn tie_rule_differs_from_priority_rule() {
        let inst = ex_a();
        let m = Matching::from_pairs(2, &[(1, 0)]);
        assert!(blocking_pairs(&inst, &m, true).is_empty());
        // a1 ties a2 at c1, so the strict-comparison rows reject this matching.
        assert_eq!(priority_blocking_pairs(&inst, &m), set(&[(0, 0)]));
    }

    #[test]
    fn ex_b_stable_matching_has_no_blocking_pairs() {
        let inst = ex_b();
        let m = Matching::from_pairs(5, &[(0, 1), (1, 2), (3, 0)]);
        assert!(blocking_pairs(&inst, &m, true).is_empty());
        assert!(open_slot_blockings(&inst, &m).is_empty());
    }

    #[test]
    fn open_slots() {
        let inst = ex_a();
        let m = Matching::from_pairs(2, &[(0, 0), (1, 1)]);
        assert!(open_slot_blockings(&inst, &m).is_empty());

        let mut wider = ex_a();
        wider.companies[0].upper = 2;
        assert_eq!(open_slot_blockings(&wider, &m), set(&[(1, 0)]));
    }

    #[test]
    fn envies_on_ex_b() {
        let inst = ex_b();
        let m = Matching::from_pairs(5, &[(0, 0), (3, 2), (4, 1)]);
        assert!(within_type_envies(&inst, &m).is_empty());
        let cross = cross_type_envies(&inst, &m);
        assert!(cross.contains(&Envy {
            envier: ApplicantId(3),
            envied: ApplicantId(0),
            company: CompanyId(0),
            intensity: 2,
        }));
        assert!(!is_envy_free(&inst, &m));
    }

    #[test]
    fn ranks() {
        let inst = ex_a();
        assert_eq!(total_rank(&inst, &Matching::from_pairs(2, &[(0, 0), (1, 1)])), 3);
        assert_eq!(total_rank(&inst, &Matching::empty(2)), 0);
        let inst = ex_b();
        assert_eq!(
            total_rank(&inst, &Matching::from_pairs(5, &[(0, 1), (1, 2), (3, 0)])),
            6
        );
    }

    #[test]
    fn deficiency_counts_missing_seats() {
        let inst = ex_a();
        // a1 unmatched wants c1 which is empty with u=1: deficiency 1.
        // a2 holds c1, nothing better.
        assert_eq!(total_deficiency(&inst, &Matching::from_pairs(2, &[(1, 1)])), 2);
        assert_eq!(total_deficiency(&inst, &Matching::from_pairs(2, &[(1, 0)])), 0);
    }
}
