//! Combinatorial algorithms: tie-breaking, applicant-proposing deferred
//! acceptance, the lower-quota existence check, the complete within-type
//! envy-free construction, type-specific score adjustments and the
//! equal-bonus sweep for two types.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::checks::{check_feasible, QuotaMode};
use crate::instance::{ApplicantId, CompanyId, Instance, Matching, Score, TypeTag};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ClassicError {
    #[error("{company} has applicants with equal scores")]
    TiesPresent { company: CompanyId },
    #[error("assumption violated: {0}")]
    AssumptionViolated(String),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("tie-break policy not applicable: {0}")]
    InvalidPolicy(String),
    #[error(
        "first-type count jumped from {from} to {to} between consecutive instances (bonus {bonus}, prefix {prefix})"
    )]
    SweepStep {
        bonus: i64,
        prefix: usize,
        from: usize,
        to: usize,
    },
    #[error("no equal type-specific bonus found in the searched range")]
    NotFound,
}

/// How equal scores at a company are ordered.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum TieBreakPolicy {
    /// Lower applicant index first.
    ByIndex,
    /// Types in the listed order (unlisted types last), then by index.
    FavorType(Vec<TypeTag>),
    /// Two types only: the first `i` applicants of the first type, then the
    /// second type, then the remaining first-type applicants.
    FavorPrefix(usize),
    /// The listed applicants first, in order, then the rest by index.
    Order(Vec<ApplicantId>),
}

impl TieBreakPolicy {
    /// Position of every applicant in the tie-break order (0 = favoured).
    pub fn priorities(&self, inst: &Instance) -> Result<Vec<usize>, ClassicError> {
        let n = inst.n();
        let mut keys: Vec<(usize, usize)> = match self {
            TieBreakPolicy::ByIndex => (0..n).map(|i| (0, i)).collect(),
            TieBreakPolicy::FavorType(order) => (0..n)
                .map(|i| {
                    let ty = inst.applicants[i].ty;
                    (order.iter().position(|&t| t == ty).unwrap_or(order.len()), i)
                })
                .collect(),
            TieBreakPolicy::FavorPrefix(prefix) => {
                if inst.num_types() != 2 {
                    return Err(ClassicError::InvalidPolicy(
                        "prefix favouring needs exactly two types".into(),
                    ));
                }
                let n1 = inst.type_population(TypeTag(0));
                if *prefix > n1 {
                    return Err(ClassicError::InvalidPolicy(format!(
                        "prefix {prefix} exceeds {n1} first-type applicants"
                    )));
                }
                let mut seen = 0;
                (0..n)
                    .map(|i| {
                        let group = if inst.applicants[i].ty == TypeTag(0) {
                            seen += 1;
                            if seen <= *prefix {
                                0
                            } else {
                                2
                            }
                        } else {
                            1
                        };
                        (group, i)
                    })
                    .collect()
            }
            TieBreakPolicy::Order(list) => (0..n)
                .map(|i| (list.iter().position(|a| a.0 == i).unwrap_or(list.len()), i))
                .collect(),
        };
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| keys[i]);
        let mut prio = vec![0; n];
        for (pos, i) in order.into_iter().enumerate() {
            prio[i] = pos;
        }
        keys.clear();
        Ok(prio)
    }
}

/// Strict instance whose scores refine the original weak order: a score
/// `s` becomes `s * (n + 1) + (n - priority)`, so the original score is
/// recovered by integer division by `n + 1`.
pub fn break_ties(inst: &Instance, policy: &TieBreakPolicy) -> Result<Instance, ClassicError> {
    let prio = policy.priorities(inst)?;
    let scale = inst.n() as i64 + 1;
    let mut out = inst.clone();
    for (i, app) in out.applicants.iter_mut().enumerate() {
        for ch in &mut app.choices {
            ch.score = Score(ch.score.0 * scale + (scale - 1 - prio[i] as i64));
        }
    }
    Ok(out)
}

fn first_tie(inst: &Instance) -> Option<CompanyId> {
    inst.company_ids().find(|&c| {
        let mut s: Vec<Score> = inst.applicants_of(c).into_iter().map(|(_, s)| s).collect();
        s.sort_unstable();
        s.windows(2).any(|w| w[0] == w[1])
    })
}

/// Applicant-proposing deferred acceptance with per-company capacities and a
/// strict company-side key (larger is better). Applicants for which
/// `eligible` is false do not take part.
pub(crate) fn deferred_acceptance_by<K, F>(
    inst: &Instance,
    capacity: &[usize],
    eligible: impl Fn(ApplicantId) -> bool,
    key: F,
) -> Matching
where
    K: Ord + Copy,
    F: Fn(ApplicantId, CompanyId, Score) -> K,
{
    let mut held: Vec<BinaryHeap<Reverse<(K, usize)>>> = (0..inst.m()).map(|_| BinaryHeap::new()).collect();
    let mut next = vec![0usize; inst.n()];
    let mut free: Vec<usize> = (0..inst.n()).rev().filter(|&i| eligible(ApplicantId(i))).collect();
    let mut matching = Matching::empty(inst.n());

    while let Some(i) = free.pop() {
        let choices = &inst.applicants[i].choices;
        let a = ApplicantId(i);
        while next[i] < choices.len() {
            let ch = &choices[next[i]];
            next[i] += 1;
            let j = ch.company.0;
            if capacity[j] == 0 {
                continue;
            }
            let k = key(a, ch.company, ch.score);
            if held[j].len() < capacity[j] {
                held[j].push(Reverse((k, i)));
                matching.assign(a, Some(ch.company));
                break;
            }
            let Reverse((weakest, w)) = *held[j].peek().expect("full company holds someone");
            if k > weakest {
                held[j].pop();
                held[j].push(Reverse((k, i)));
                matching.assign(a, Some(ch.company));
                matching.assign(ApplicantId(w), None);
                free.push(w);
                break;
            }
        }
    }
    matching
}

fn upper_capacities(inst: &Instance) -> Vec<usize> {
    inst.companies.iter().map(|c| c.upper as usize).collect()
}

/// Applicant-optimal stable matching of an instance without ties.
pub fn deferred_acceptance(strict: &Instance) -> Result<Matching, ClassicError> {
    if let Some(company) = first_tie(strict) {
        return Err(ClassicError::TiesPresent { company });
    }
    Ok(deferred_acceptance_by(
        strict,
        &upper_capacities(strict),
        |_| true,
        |_, _, s| s,
    ))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum HrlOutcome {
    Exists(Matching),
    /// Companies whose fill in every stable matching is below their lower quota.
    NoStableSolution(Vec<CompanyId>),
}

/// Decides whether a strict instance has a stable matching meeting every
/// lower quota: all stable matchings fill each company equally, so one
/// deferred-acceptance run decides it.
pub fn hrl_feasibility_check(strict: &Instance) -> Result<HrlOutcome, ClassicError> {
    let m = deferred_acceptance(strict)?;
    let fills = m.fills(strict.m());
    let short: Vec<CompanyId> = strict
        .company_ids()
        .filter(|c| fills[c.0] < strict.company(*c).lower as usize)
        .collect();
    Ok(if short.is_empty() {
        HrlOutcome::Exists(m)
    } else {
        HrlOutcome::NoStableSolution(short)
    })
}

fn assumption(msg: String) -> ClassicError {
    ClassicError::AssumptionViolated(msg)
}

/// Builds a complete within-type envy-free matching.
///
/// Each type is matched separately by deferred acceptance against
/// artificial per-type quotas that start at the type lower quotas; quotas
/// are then raised one seat at a time, first at companies still below their
/// lower quota, then for the remaining unmatched applicants.
pub fn cwtefm_construct(inst: &Instance) -> Result<Matching, ClassicError> {
    let (n, m, p) = (inst.n(), inst.m(), inst.num_types());
    if !inst.is_complete_bipartite() {
        return Err(assumption("every applicant must list every company".into()));
    }
    let pop: Vec<usize> = inst.type_tags().map(|t| inst.type_population(t)).collect();
    for ty in inst.type_tags() {
        let need: u32 = inst.companies.iter().map(|c| c.type_lower(ty)).sum();
        if need as usize > pop[ty.0] {
            return Err(assumption(format!(
                "type lower quotas for {ty} sum to {need} > {} applicants",
                pop[ty.0]
            )));
        }
        if let Some(u) = inst.global_upper(ty) {
            if (u as usize) < pop[ty.0] {
                return Err(assumption(format!(
                    "global upper quota {u} of {ty} is below its {} applicants",
                    pop[ty.0]
                )));
            }
        }
    }
    for c in inst.company_ids() {
        let comp = inst.company(c);
        let need: u32 = inst.type_tags().map(|t| comp.type_lower(t)).sum();
        if need > comp.upper {
            return Err(assumption(format!(
                "type lower quotas at {c} sum to {need} > upper quota {}",
                comp.upper
            )));
        }
    }
    let capacity: usize = inst.companies.iter().map(|c| c.upper as usize).sum();
    if capacity < n {
        return Err(assumption(format!("total capacity {capacity} is below {n} applicants")));
    }
    let lower_total: usize = inst.companies.iter().map(|c| c.lower as usize).sum();
    if lower_total > n {
        return Err(assumption(format!(
            "lower quotas sum to {lower_total} > {n} applicants"
        )));
    }

    let mut quota: Vec<Vec<usize>> = inst
        .companies
        .iter()
        .map(|c| inst.type_tags().map(|t| c.type_lower(t) as usize).collect())
        .collect();
    let run = |quota: &Vec<Vec<usize>>, ty: usize| {
        let cap: Vec<usize> = (0..m).map(|j| quota[j][ty]).collect();
        deferred_acceptance_by(inst, &cap, |a| inst.type_of(a).0 == ty, |a, _, s| (s, Reverse(a.0)))
    };
    let mut per_type: Vec<Matching> = (0..p).map(|ty| run(&quota, ty)).collect();

    let merged = |per_type: &[Matching]| {
        let mut out = Matching::empty(n);
        for (ty, mt) in per_type.iter().enumerate() {
            for (a, c) in mt.pairs() {
                if inst.type_of(a).0 == ty {
                    out.assign(a, Some(c));
                }
            }
        }
        out
    };
    let has_unmatched = |mt: &Matching, ty: usize| {
        inst.applicant_ids()
            .any(|a| inst.type_of(a).0 == ty && mt.company_of(a).is_none())
    };

    // Raise quotas until every company reaches its lower quota.
    loop {
        let current = merged(&per_type);
        let fills = current.fills(m);
        let Some(j) = (0..m).find(|&j| fills[j] < inst.companies[j].lower as usize) else {
            break;
        };
        let comp = &inst.companies[j];
        let ty = (0..p)
            .find(|&t| has_unmatched(&per_type[t], t) && quota[j][t] < comp.type_upper(TypeTag(t)) as usize)
            .ok_or_else(|| assumption(format!("{} cannot reach its lower quota", CompanyId(j))))?;
        quota[j][ty] += 1;
        per_type[ty] = run(&quota, ty);
    }

    // Seat the remaining applicants one by one.
    loop {
        let current = merged(&per_type);
        let Some(a) = inst.applicant_ids().find(|&a| current.company_of(a).is_none()) else {
            return Ok(current);
        };
        let ty = inst.type_of(a).0;
        let fills = current.fills(m);
        let target = inst.applicant(a).choices.iter().map(|ch| ch.company.0).find(|&j| {
            let comp = &inst.companies[j];
            fills[j] < comp.upper as usize && quota[j][ty] < comp.type_upper(TypeTag(ty)) as usize
        });
        let j = target.ok_or_else(|| assumption(format!("no seat left for type {}", TypeTag(ty))))?;
        quota[j][ty] += 1;
        per_type[ty] = run(&quota, ty);
    }
}

/// Additive score bonus per company and type, on the doubled scale.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScoreAdjustment {
    /// `bonus[company][type]`.
    pub bonus: Vec<Vec<i64>>,
}

impl ScoreAdjustment {
    pub fn zero(inst: &Instance) -> Self {
        ScoreAdjustment {
            bonus: vec![vec![0; inst.num_types()]; inst.m()],
        }
    }

    /// The same bonus per type at every company.
    pub fn equal(inst: &Instance, per_type: &[i64]) -> Self {
        ScoreAdjustment {
            bonus: vec![per_type.to_vec(); inst.m()],
        }
    }

    pub fn is_equal_across_companies(&self) -> bool {
        self.bonus.windows(2).all(|w| w[0] == w[1])
    }

    pub fn adjusted(&self, inst: &Instance, a: ApplicantId, c: CompanyId, s: Score) -> i64 {
        s.0 + self.bonus[c.0][inst.type_of(a).0]
    }

    /// Copy of the instance with adjusted scores; scores may be negative.
    pub fn apply(&self, inst: &Instance) -> Instance {
        let mut out = inst.clone();
        for (i, app) in out.applicants.iter_mut().enumerate() {
            for ch in &mut app.choices {
                ch.score = Score(self.adjusted(inst, ApplicantId(i), ch.company, ch.score));
            }
        }
        out
    }
}

/// Bonuses that make the weakest admitted applicant of every type at a
/// company score the same. Types without assignees at a company are pushed
/// down to that level.
pub fn adjustment_from_wtef(inst: &Instance, m: &Matching) -> ScoreAdjustment {
    let p = inst.num_types();
    let mut adj = ScoreAdjustment::zero(inst);
    for c in inst.company_ids() {
        let mut weakest: Vec<Option<i64>> = vec![None; p];
        for a in m.assignees(c) {
            if let Some(s) = inst.score(a, c) {
                let w = &mut weakest[inst.type_of(a).0];
                *w = Some(w.map_or(s.0, |x| x.min(s.0)));
            }
        }
        let Some(level) = weakest.iter().flatten().copied().max() else {
            continue;
        };
        for ty in 0..p {
            adj.bonus[c.0][ty] = match weakest[ty] {
                Some(w) => level - w,
                None => {
                    let best = inst
                        .applicants_of(c)
                        .into_iter()
                        .filter(|&(a, _)| inst.type_of(a).0 == ty)
                        .map(|(_, s)| s.0)
                        .max();
                    best.map_or(0, |b| (level - b).min(0))
                }
            };
        }
    }
    adj
}

/// True when no applicant who wants a company outscores (after adjustment)
/// one of its assignees. Seats left empty do not count: each company is
/// judged against the seats it actually filled.
pub fn verify_stable_with_adjustment(inst: &Instance, m: &Matching, adj: &ScoreAdjustment) -> bool {
    for e in inst.applications() {
        let wants = match m.company_of(e.applicant) {
            None => true,
            Some(own) => inst.rank(e.applicant, own).is_some_and(|r| e.rank < r),
        };
        if !wants {
            continue;
        }
        let mine = adj.adjusted(inst, e.applicant, e.company, e.score);
        let beaten = m.assignees(e.company).into_iter().any(|h| {
            inst.score(h, e.company)
                .is_some_and(|s| adj.adjusted(inst, h, e.company, s) < mine)
        });
        if beaten {
            return false;
        }
    }
    true
}

/// Deferred acceptance after adding `bonus[type]` to every score, with
/// remaining ties broken by `priority` (lower first).
pub(crate) fn da_with_bonus(inst: &Instance, bonus: &[i64], priority: &[usize]) -> Matching {
    deferred_acceptance_by(
        inst,
        &upper_capacities(inst),
        |_| true,
        |a, _, s| (s.0 + bonus[inst.type_of(a).0], Reverse(priority[a.0])),
    )
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EqualBonusResult {
    /// Bonus per type on the doubled scale, uniform across companies.
    pub bonus: Vec<i64>,
    pub policy: TieBreakPolicy,
    pub matching: Matching,
    /// Number of deferred-acceptance runs performed.
    pub steps: usize,
}

impl EqualBonusResult {
    pub fn adjustment(&self, inst: &Instance) -> ScoreAdjustment {
        ScoreAdjustment::equal(inst, &self.bonus)
    }
}

fn first_type_count(inst: &Instance, m: &Matching) -> usize {
    m.pairs().filter(|&(a, _)| inst.type_of(a) == TypeTag(0)).count()
}

/// Finds a first-type bonus `e` and a tie-break prefix `i` such that
/// deferred acceptance with `e` added to every first-type score and ties
/// broken by [`TieBreakPolicy::FavorPrefix`]`(i)` matches exactly
/// `first_type_target` first-type applicants.
///
/// Bonuses are tried in ascending order over `[-2s-1, 2s+1]` (`s` the
/// maximum doubled score); for each, prefixes `0..=n1`. Successive instances
/// differ by promoting one applicant, so the count moves by at most one per
/// step; a larger jump is reported as an error.
pub fn equal_type_score_sweep(inst: &Instance, first_type_target: usize) -> Result<EqualBonusResult, ClassicError> {
    if inst.num_types() != 2 {
        return Err(ClassicError::PreconditionViolated("exactly two types required".into()));
    }
    if !inst.is_complete_bipartite() {
        return Err(ClassicError::PreconditionViolated(
            "every applicant must list every company".into(),
        ));
    }
    let n1 = inst.type_population(TypeTag(0));
    let n2 = inst.type_population(TypeTag(1));
    let total: usize = inst.companies.iter().map(|c| c.upper as usize).sum();
    if first_type_target > n1 {
        return Err(ClassicError::PreconditionViolated(format!(
            "target {first_type_target} exceeds {n1} first-type applicants"
        )));
    }
    if total < first_type_target || total - first_type_target > n2 {
        return Err(ClassicError::PreconditionViolated(format!(
            "capacity {total} cannot be split as {first_type_target} + at most {n2}"
        )));
    }
    if inst.m() > inst.n() {
        return Err(ClassicError::PreconditionViolated(
            "more companies than applicants".into(),
        ));
    }
    let second_target = total - first_type_target;
    let exact = |ty: usize, want: usize| {
        let t = TypeTag(ty);
        let lo_ok = !inst.global_type_lower.contains_key(&t) || inst.global_lower(t) as usize == want;
        let hi_ok = inst.global_upper(t).is_none_or(|u| u as usize == want);
        lo_ok && hi_ok
    };
    if !exact(0, first_type_target) || !exact(1, second_target) {
        return Err(ClassicError::PreconditionViolated(
            "declared global quotas disagree with the target split".into(),
        ));
    }

    let s = inst.max_score().0;
    let mut previous: Option<usize> = None;
    let mut steps = 0;
    for e in (-2 * s - 1)..=(2 * s + 1) {
        for prefix in 0..=n1 {
            let policy = TieBreakPolicy::FavorPrefix(prefix);
            let prio = policy.priorities(inst)?;
            let matching = da_with_bonus(inst, &[e, 0], &prio);
            steps += 1;
            let count = first_type_count(inst, &matching);
            if let Some(prev) = previous {
                if count.abs_diff(prev) > 1 {
                    return Err(ClassicError::SweepStep {
                        bonus: e,
                        prefix,
                        from: prev,
                        to: count,
                    });
                }
            }
            previous = Some(count);
            if count == first_type_target {
                return Ok(EqualBonusResult {
                    bonus: vec![e, 0],
                    policy,
                    matching,
                    steps,
                });
            }
        }
    }
    Err(ClassicError::NotFound)
}

pub(crate) fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for k in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(k);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Searches uniform per-type bonuses (the last type fixed at zero) for a
/// deferred-acceptance outcome that satisfies every quota of the instance.
///
/// Bonus vectors are visited by increasing total magnitude within
/// `[-s-1, s+1]` per type, and for each vector every type-favouring
/// tie-break order is tried. Works for any number of types but, unlike the
/// two-type sweep, is not guaranteed to succeed.
pub fn equal_type_score_search(inst: &Instance) -> Result<EqualBonusResult, ClassicError> {
    let p = inst.num_types();
    let s = inst.max_score().0;
    let range: Vec<i64> = (-s - 1..=s + 1).collect();
    let mut vectors: Vec<Vec<i64>> = vec![vec![]];
    for _ in 0..p.saturating_sub(1) {
        vectors = vectors
            .into_iter()
            .flat_map(|v| {
                range.iter().map(move |&b| {
                    let mut w = v.clone();
                    w.push(b);
                    w
                })
            })
            .collect();
    }
    for v in &mut vectors {
        v.push(0);
    }
    vectors.sort_by_key(|v| (v.iter().map(|b| b.abs()).sum::<i64>(), v.clone()));

    let orders: Vec<TieBreakPolicy> = permutations(&(0..p).collect::<Vec<_>>())
        .into_iter()
        .map(|perm| TieBreakPolicy::FavorType(perm.into_iter().map(TypeTag).collect()))
        .collect();
    let prios: Vec<Vec<usize>> = orders.iter().map(|o| o.priorities(inst)).collect::<Result<_, _>>()?;

    let mut steps = 0;
    for bonus in vectors {
        for (policy, prio) in orders.iter().zip(&prios) {
            let matching = da_with_bonus(inst, &bonus, prio);
            steps += 1;
            let ok = check_feasible(inst, &matching, QuotaMode::WithGlobalTypes).is_ok_and(|v| v.is_empty());
            if ok {
                return Ok(EqualBonusResult {
                    bonus,
                    policy: policy.clone(),
                    matching,
                    steps,
                });
            }
        }
    }
    Err(ClassicError::NotFound)
}

/// Bonus and favoured-prefix length for type position `t`: every step
/// either favours one more applicant of the type among equal adjusted
/// scores or moves the whole type up by one.
fn position(t: usize, lo: i64, count: usize) -> (i64, usize) {
    (lo + (t / (count + 1)) as i64, t % (count + 1))
}

fn refined_policy(inst: &Instance, roles: &[TypeTag], prefixes: &[usize]) -> TieBreakPolicy {
    let reference = roles[roles.len() - 1];
    let mut seen = vec![0; inst.num_types()];
    let mut favoured = Vec::new();
    let mut rest = Vec::new();
    for a in inst.applicant_ids() {
        let ty = inst.type_of(a);
        seen[ty.0] += 1;
        if ty == reference {
            rest.push(a);
        } else if seen[ty.0] <= prefixes[ty.0] {
            favoured.push(a);
        }
    }
    favoured.extend(rest);
    TieBreakPolicy::Order(favoured)
}

/// Searches per-type bonuses refined by favoured prefixes for an outcome
/// meeting exact global type quotas `targets` and every other quota.
///
/// For each ordering of the types, the last is the reference with bonus
/// zero and the first is bisected on its matched count (then walked along
/// the run of positions meeting its target) for each combination of the
/// middle types' positions, scanned by increasing bonus magnitude.
///
/// Bonus vectors whose outcome met every global type target but broke some
/// other quota are appended to `near_misses`, once each.
pub fn equal_type_score_refined(
    inst: &Instance,
    targets: &[usize],
    max_steps: usize,
    near_misses: &mut Vec<Vec<i64>>,
) -> Result<EqualBonusResult, ClassicError> {
    let p = inst.num_types();
    if p < 2 || targets.len() != p {
        return Err(ClassicError::PreconditionViolated(
            "one target per type and at least two types required".into(),
        ));
    }
    let s = inst.max_score().0;
    let lo = -s - 1;
    let span = (2 * s + 3) as usize;
    let counts: Vec<usize> = inst.type_tags().map(|t| inst.type_population(t)).collect();
    let steps = std::cell::Cell::new(0);
    for perm in permutations(&(0..p).collect::<Vec<_>>()) {
        let roles: Vec<TypeTag> = perm.into_iter().map(TypeTag).collect();
        let first = roles[0];
        // positions[r] belongs to roles[r]; the reference has none.
        let run = |positions: &[usize]| {
            let mut bonus = vec![0; p];
            let mut prefixes = vec![0; p];
            for (r, &t) in positions.iter().enumerate() {
                let k = roles[r].0;
                (bonus[k], prefixes[k]) = position(t, lo, counts[k]);
            }
            let policy = refined_policy(inst, &roles, &prefixes);
            let prio = policy.priorities(inst).expect("order policies are always valid");
            steps.set(steps.get() + 1);
            let matching = da_with_bonus(inst, &bonus, &prio);
            let count = matching.pairs().filter(|&(a, _)| inst.type_of(a) == first).count();
            (bonus, policy, matching, count)
        };
        let middle: Vec<Vec<usize>> = roles[1..p - 1]
            .iter()
            .map(|k| {
                let mut ts: Vec<usize> = (0..span * (counts[k.0] + 1)).collect();
                ts.sort_by_key(|&t| (position(t, lo, counts[k.0]).0.abs(), t));
                ts
            })
            .collect();
        let first_len = span * (counts[first.0] + 1);
        let mut odometer = vec![0usize; middle.len()];
        'outer: loop {
            if steps.get() >= max_steps {
                return Err(ClassicError::NotFound);
            }
            let mut positions = vec![0; p - 1];
            for (r, &d) in odometer.iter().enumerate() {
                positions[r + 1] = middle[r][d];
            }
            let (mut a, mut b) = (0, first_len);
            while a < b {
                let mid = (a + b) / 2;
                positions[0] = mid;
                if run(&positions).3 >= targets[first.0] {
                    b = mid;
                } else {
                    a = mid + 1;
                }
            }
            for t in a..first_len {
                positions[0] = t;
                let (bonus, policy, matching, count) = run(&positions);
                if count != targets[first.0] {
                    break;
                }
                if check_feasible(inst, &matching, QuotaMode::WithGlobalTypes).is_ok_and(|v| v.is_empty()) {
                    return Ok(EqualBonusResult {
                        bonus,
                        policy,
                        matching,
                        steps: steps.get(),
                    });
                }
                let met = inst
                    .type_tags()
                    .all(|ty| matching.pairs().filter(|&(a, _)| inst.type_of(a) == ty).count() == targets[ty.0]);
                if met && !near_misses.contains(&bonus) {
                    near_misses.push(bonus);
                }
            }
            for r in 0..odometer.len() {
                odometer[r] += 1;
                if odometer[r] < middle[r].len() {
                    continue 'outer;
                }
                odometer[r] = 0;
            }
            break;
        }
    }
    Err(ClassicError::NotFound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checks::{blocking_pairs, is_complete, within_type_envies};
    use crate::examples::{ex_a, ex_b};
    use crate::instance::InstanceBuilder;

    fn pairs(n: usize, p: &[(usize, usize)]) -> Matching {
        Matching::from_pairs(n, p)
    }

    #[test]
    fn ex_a_tie_breaks() {
        let inst = ex_a();
        let toward_a1 = break_ties(&inst, &TieBreakPolicy::ByIndex).unwrap();
        assert!(toward_a1.score(ApplicantId(0), CompanyId(0)) > toward_a1.score(ApplicantId(1), CompanyId(0)));
        assert_eq!(deferred_acceptance(&toward_a1).unwrap(), pairs(2, &[(0, 0), (1, 1)]));

        let toward_a2 = break_ties(&inst, &TieBreakPolicy::Order(vec![ApplicantId(1)])).unwrap();
        assert!(toward_a2.score(ApplicantId(1), CompanyId(0)) > toward_a2.score(ApplicantId(0), CompanyId(0)));
        assert_eq!(deferred_acceptance(&toward_a2).unwrap(), pairs(2, &[(1, 0)]));
    }

    #[test]
    fn break_ties_refines_and_is_recoverable() {
        let inst = ex_b();
        let strict = break_ties(&inst, &TieBreakPolicy::ByIndex).unwrap();
        assert!(strict.is_strict());
        let scale = inst.n() as i64 + 1;
        for (orig, new) in inst.applications().zip(strict.applications()) {
            assert_eq!(new.score.0 / scale, orig.score.0);
        }
        // Already strict: order unchanged.
        let again = break_ties(&strict, &TieBreakPolicy::FavorType(vec![TypeTag(1)])).unwrap();
        for c in strict.company_ids() {
            let mut a: Vec<_> = strict.applicants_of(c);
            let mut b: Vec<_> = again.applicants_of(c);
            a.sort_by_key(|&(_, s)| s);
            b.sort_by_key(|&(_, s)| s);
            let ia: Vec<_> = a.iter().map(|x| x.0).collect();
            let ib: Vec<_> = b.iter().map(|x| x.0).collect();
            assert_eq!(ia, ib);
        }
    }

    #[test]
    fn da_rejects_ties() {
        assert_eq!(
            deferred_acceptance(&ex_a()),
            Err(ClassicError::TiesPresent { company: CompanyId(0) })
        );
    }

    #[test]
    fn ex_b_unique_stable_matching() {
        let inst = ex_b();
        let expected = pairs(5, &[(0, 1), (1, 2), (3, 0)]);
        for policy in [
            TieBreakPolicy::ByIndex,
            TieBreakPolicy::Order(vec![ApplicantId(2), ApplicantId(1)]),
        ] {
            let strict = break_ties(&inst, &policy).unwrap();
            assert_eq!(deferred_acceptance(&strict).unwrap(), expected);
        }
    }

    #[test]
    fn hrl_check() {
        let mut inst = ex_a();
        inst.companies[1].lower = 1;
        let strict = break_ties(&inst, &TieBreakPolicy::Order(vec![ApplicantId(1)])).unwrap();
        assert_eq!(
            hrl_feasibility_check(&strict).unwrap(),
            HrlOutcome::NoStableSolution(vec![CompanyId(1)])
        );

        let strict = break_ties(&ex_a(), &TieBreakPolicy::ByIndex).unwrap();
        assert!(matches!(hrl_feasibility_check(&strict).unwrap(), HrlOutcome::Exists(_)));
    }

    #[test]
    fn cwtefm_single_type() {
        let inst = InstanceBuilder::new()
            .company(1, 2)
            .company(1, 2)
            .company_type_quota(0, 0, 1, None)
            .company_type_quota(1, 0, 1, None)
            .applicant(0, &[(0, 6), (1, 2)])
            .applicant(0, &[(0, 4), (1, 8)])
            .applicant(0, &[(0, 8), (1, 4)])
            .build();
        let m = cwtefm_construct(&inst).unwrap();
        assert!(is_complete(&inst, &m));
        assert!(within_type_envies(&inst, &m).is_empty());
    }

    #[test]
    fn cwtefm_capacity_shortfall() {
        // Five applicants, three unit seats.
        assert!(matches!(
            cwtefm_construct(&ex_b()),
            Err(ClassicError::AssumptionViolated(_))
        ));
    }

    #[test]
    fn cwtefm_two_types_with_type_lower() {
        let mut inst = ex_b();
        for c in &mut inst.companies {
            c.upper = 2;
        }
        inst.companies[2].type_lower.insert(TypeTag(1), 1);
        let m = cwtefm_construct(&inst).unwrap();
        assert!(is_complete(&inst, &m));
        assert!(within_type_envies(&inst, &m).is_empty());
        assert!(check_feasible(&inst, &m, QuotaMode::WithGlobalTypes)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn adjustment_single_type_is_zero() {
        let inst = ex_a();
        let m = pairs(2, &[(0, 0), (1, 1)]);
        assert_eq!(adjustment_from_wtef(&inst, &m), ScoreAdjustment::zero(&inst));
        assert!(verify_stable_with_adjustment(&inst, &m, &ScoreAdjustment::zero(&inst)));
    }

    #[test]
    fn adjustment_aligns_weakest() {
        let inst = ex_b();
        // a4 envies a1 at c1 across types; within types there is no envy.
        let m = pairs(5, &[(0, 0), (3, 2), (4, 1)]);
        assert!(!verify_stable_with_adjustment(&inst, &m, &ScoreAdjustment::zero(&inst)));
        let adj = adjustment_from_wtef(&inst, &m);
        assert!(verify_stable_with_adjustment(&inst, &m, &adj));
    }

    #[test]
    fn ex_b_bonus_shrinks_first_type() {
        let inst = ex_b();
        let prio = TieBreakPolicy::ByIndex.priorities(&inst).unwrap();
        let m0 = da_with_bonus(&inst, &[0, 0], &prio);
        assert_eq!(m0, pairs(5, &[(0, 1), (1, 2), (3, 0)]));
        let m2 = da_with_bonus(&inst, &[4, 0], &prio);
        assert_eq!(m2, pairs(5, &[(0, 0), (3, 2), (4, 1)]));
        assert_eq!(first_type_count(&inst, &m0), 2);
        assert_eq!(first_type_count(&inst, &m2), 1);
    }

    #[test]
    fn sweep_on_ex_b() {
        let inst = ex_b();
        for target in 0..=3 {
            let r = equal_type_score_sweep(&inst, target);
            if target == 0 {
                // Only two second-type applicants for three seats.
                assert!(matches!(r, Err(ClassicError::PreconditionViolated(_))));
                continue;
            }
            let r = r.unwrap();
            assert_eq!(first_type_count(&inst, &r.matching), target);
            let adjusted = r.adjustment(&inst).apply(&inst);
            assert!(blocking_pairs(&adjusted, &r.matching, true).is_empty());
        }
    }

    #[test]
    fn sweep_zero_target_uses_large_negative_bonus() {
        let inst = InstanceBuilder::new()
            .types(&["T1", "T2"])
            .company(0, 1)
            .company(0, 1)
            .applicant(0, &[(0, 20), (1, 20)])
            .applicant(1, &[(0, 2), (1, 2)])
            .applicant(1, &[(1, 4), (0, 4)])
            .build();
        let r = equal_type_score_sweep(&inst, 0).unwrap();
        assert_eq!(r.bonus[0], -2 * 20 - 1);
        assert_eq!(first_type_count(&inst, &r.matching), 0);
    }

    #[test]
    fn prefix_policy_validation() {
        assert!(TieBreakPolicy::FavorPrefix(0).priorities(&ex_a()).is_err());
        assert!(TieBreakPolicy::FavorPrefix(4).priorities(&ex_b()).is_err());
        let prio = TieBreakPolicy::FavorPrefix(1).priorities(&ex_b()).unwrap();
        assert_eq!(prio, vec![0, 3, 4, 1, 2]);
    }
}
