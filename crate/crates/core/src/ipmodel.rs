//! Solver-agnostic 0-1 linear models of the matching problems.
//!
//! [`build_base`] creates one binary match variable per application together
//! with the applicant and capacity rows; the `add_*` functions append one
//! constraint family or objective each. Objectives are kept in push order,
//! which is also their lexicographic priority.

use std::collections::HashMap;
use std::fmt;

use crate::instance::{ApplicantId, Application, CompanyId, Instance, Matching, TypeTag};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarKind {
    Match(ApplicantId, CompanyId),
    Deficiency(ApplicantId, CompanyId),
    Envy {
        envier: ApplicantId,
        envied: ApplicantId,
        company: CompanyId,
    },
    OpenSlot(ApplicantId, CompanyId),
    Unmatched(ApplicantId),
}

impl fmt::Display for VarKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarKind::Match(a, c) => write!(f, "x({a},{c})"),
            VarKind::Deficiency(a, c) => write!(f, "d({a},{c})"),
            VarKind::Envy {
                envier,
                envied,
                company,
            } => write!(f, "e({envier},{envied},{company})"),
            VarKind::OpenSlot(a, c) => write!(f, "o({a},{c})"),
            VarKind::Unmatched(a) => write!(f, "z({a})"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Domain {
    Binary,
    /// Integers in `0..=max`.
    Integer {
        max: i64,
    },
}

impl Domain {
    pub fn max(self) -> i64 {
        match self {
            Domain::Binary => 1,
            Domain::Integer { max } => max,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Variable {
    pub kind: VarKind,
    pub domain: Domain,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sense {
    Ge,
    Le,
    Eq,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Ge => ">=",
            Sense::Le => "<=",
            Sense::Eq => "=",
        })
    }
}

/// Source family of a constraint row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RowTag {
    /// Applicant takes at most one seat.
    Eq1,
    /// Company upper quota.
    Eq2,
    /// Stability with strict score comparison.
    Eq3,
    /// Stability with weak score comparison (ties).
    Eq4,
    /// Company lower quota.
    Eq5,
    Eq6,
    Eq7,
    Eq8,
    Eq9,
    /// Stability plus non-negative deficiency.
    Eq10,
    /// Stability plus a binary blocking indicator.
    Eq11,
    /// Envy-freeness.
    Eq12,
    /// Within-type envy-freeness.
    Eq13,
    /// Envy with deficiency, for tracked pairs.
    Eq14,
    /// Open-slot blocking indicator.
    Eq15,
    /// Every applicant with a non-empty list is matched.
    Complete,
    Fix,
    LexFix,
}

impl fmt::Display for RowTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RowTag::Complete => "COMPLETE".to_string(),
            RowTag::Fix => "FIX".to_string(),
            RowTag::LexFix => "LEXFIX".to_string(),
            other => format!("{other:?}").to_uppercase(),
        };
        f.write_str(&s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearConstraint {
    pub terms: Vec<(i64, VarId)>,
    pub sense: Sense,
    pub rhs: i64,
    pub tag: RowTag,
}

impl LinearConstraint {
    pub fn activity(&self, values: &[i64]) -> i64 {
        self.terms.iter().map(|&(a, v)| a * values[v.0]).sum()
    }

    pub fn is_satisfied(&self, values: &[i64]) -> bool {
        let act = self.activity(values);
        match self.sense {
            Sense::Ge => act >= self.rhs,
            Sense::Le => act <= self.rhs,
            Sense::Eq => act == self.rhs,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ObjectiveKind {
    Rank,
    Deficiency,
    BlockingPairs,
    EnvyCount,
    EnvyIntensity,
    OpenSlotBlockings,
    Unmatched,
    Custom(String),
}

impl fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObjectiveKind::Rank => f.write_str("rank"),
            ObjectiveKind::Deficiency => f.write_str("deficiency"),
            ObjectiveKind::BlockingPairs => f.write_str("blocking-pairs"),
            ObjectiveKind::EnvyCount => f.write_str("envy-count"),
            ObjectiveKind::EnvyIntensity => f.write_str("envy-intensity"),
            ObjectiveKind::OpenSlotBlockings => f.write_str("open-slot-blockings"),
            ObjectiveKind::Unmatched => f.write_str("unmatched"),
            ObjectiveKind::Custom(s) => f.write_str(s),
        }
    }
}

/// A minimisation objective.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Objective {
    pub kind: ObjectiveKind,
    pub terms: Vec<(i64, VarId)>,
}

impl Objective {
    pub fn value(&self, values: &[i64]) -> i64 {
        self.terms.iter().map(|&(a, v)| a * values[v.0]).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ObjectiveId(pub usize);

#[derive(Clone, Debug, Default)]
pub struct LinearModel {
    pub vars: Vec<Variable>,
    pub constraints: Vec<LinearConstraint>,
    pub objectives: Vec<Objective>,
    index: HashMap<VarKind, VarId>,
    /// Drop rows whose bound is already implied by the variable domains.
    pub prune_vacuous: bool,
}

impl LinearModel {
    pub fn new() -> Self {
        LinearModel {
            prune_vacuous: true,
            ..Default::default()
        }
    }

    pub fn add_var(&mut self, kind: VarKind, domain: Domain) -> VarId {
        if let Some(&id) = self.index.get(&kind) {
            return id;
        }
        let id = VarId(self.vars.len());
        self.vars.push(Variable { kind, domain });
        self.index.insert(kind, id);
        id
    }

    pub fn var(&self, kind: VarKind) -> Option<VarId> {
        self.index.get(&kind).copied()
    }

    pub fn x(&self, a: ApplicantId, c: CompanyId) -> Option<VarId> {
        self.var(VarKind::Match(a, c))
    }

    /// Appends a row, merging duplicate variables and dropping zero terms.
    pub fn add_constraint(&mut self, terms: Vec<(i64, VarId)>, sense: Sense, rhs: i64, tag: RowTag) {
        let row = LinearConstraint {
            terms: merge_terms(terms),
            sense,
            rhs,
            tag,
        };
        self.constraints.push(row);
    }

    /// Like [`add_constraint`](Self::add_constraint) but skips rows that every
    /// assignment within the domains satisfies, when pruning is enabled.
    pub fn add_prunable(&mut self, terms: Vec<(i64, VarId)>, sense: Sense, rhs: i64, tag: RowTag) {
        let terms = merge_terms(terms);
        if self.prune_vacuous {
            let (lo, hi) = self.activity_range(&terms);
            let vacuous = match sense {
                Sense::Ge => lo >= rhs,
                Sense::Le => hi <= rhs,
                Sense::Eq => lo == rhs && hi == rhs,
            };
            if vacuous {
                return;
            }
        }
        self.constraints.push(LinearConstraint { terms, sense, rhs, tag });
    }

    fn activity_range(&self, terms: &[(i64, VarId)]) -> (i64, i64) {
        terms.iter().fold((0, 0), |(lo, hi), &(a, v)| {
            let top = a * self.vars[v.0].domain.max();
            (lo + top.min(0), hi + top.max(0))
        })
    }

    pub fn push_objective(&mut self, kind: ObjectiveKind, terms: Vec<(i64, VarId)>) -> ObjectiveId {
        self.objectives.push(Objective {
            kind,
            terms: merge_terms(terms),
        });
        ObjectiveId(self.objectives.len() - 1)
    }

    pub fn count_tag(&self, tag: RowTag) -> usize {
        self.constraints.iter().filter(|r| r.tag == tag).count()
    }

    fn remove_tags(&mut self, tags: &[RowTag]) {
        self.constraints.retain(|r| !tags.contains(&r.tag));
    }
}

fn merge_terms(terms: Vec<(i64, VarId)>) -> Vec<(i64, VarId)> {
    let mut terms = terms;
    terms.sort_by_key(|&(_, v)| v);
    let mut out: Vec<(i64, VarId)> = Vec::with_capacity(terms.len());
    for (a, v) in terms {
        match out.last_mut() {
            Some(last) if last.1 == v => last.0 += a,
            _ => out.push((a, v)),
        }
    }
    out.retain(|&(a, _)| a != 0);
    out
}

impl fmt::Display for LinearModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let fmt_terms = |f: &mut fmt::Formatter<'_>, terms: &[(i64, VarId)]| -> fmt::Result {
            if terms.is_empty() {
                return write!(f, "0");
            }
            for (k, &(a, v)) in terms.iter().enumerate() {
                let sep = if k == 0 { "" } else { " + " };
                write!(f, "{sep}{a} {}", self.vars[v.0].kind)?;
            }
            Ok(())
        };
        for (k, obj) in self.objectives.iter().enumerate() {
            write!(f, "min[{}] {}: ", k + 1, obj.kind)?;
            fmt_terms(f, &obj.terms)?;
            writeln!(f)?;
        }
        for row in &self.constraints {
            write!(f, "{}: ", row.tag)?;
            fmt_terms(f, &row.terms)?;
            writeln!(f, " {} {}", row.sense, row.rhs)?;
        }
        for v in &self.vars {
            match v.domain {
                Domain::Binary => writeln!(f, "bin {}", v.kind)?,
                Domain::Integer { max } => writeln!(f, "int {} in [0, {max}]", v.kind)?,
            }
        }
        Ok(())
    }
}

/// Applications of `a` ranked at or above `rank`.
fn at_least_as_good(inst: &Instance, a: ApplicantId, rank: u32) -> impl Iterator<Item = CompanyId> + '_ {
    inst.applicant(a).choices[..rank as usize].iter().map(|ch| ch.company)
}

fn upper(inst: &Instance, c: CompanyId) -> i64 {
    i64::from(inst.company(c).upper)
}

/// Applicant and capacity rows only.
pub fn build_feasibility(inst: &Instance) -> LinearModel {
    let mut model = LinearModel::new();
    for e in inst.applications() {
        model.add_var(VarKind::Match(e.applicant, e.company), Domain::Binary);
    }
    for a in inst.applicant_ids() {
        let terms: Vec<_> = inst
            .applicant(a)
            .choices
            .iter()
            .filter_map(|ch| model.x(a, ch.company))
            .map(|v| (1, v))
            .collect();
        if !terms.is_empty() {
            model.add_constraint(terms, Sense::Le, 1, RowTag::Eq1);
        }
    }
    for c in inst.company_ids() {
        let terms: Vec<_> = inst
            .applicants_of(c)
            .into_iter()
            .filter_map(|(a, _)| model.x(a, c))
            .map(|v| (1, v))
            .collect();
        if !terms.is_empty() {
            model.add_constraint(terms, Sense::Le, upper(inst, c), RowTag::Eq2);
        }
    }
    model
}

/// Terms of the stability row of application `e`: `u_j` on every match at
/// least as good for the applicant, plus one on each competitor at `c_j`
/// scored above (`ties == false`) or at least as high (`ties == true`).
fn stability_terms(model: &LinearModel, inst: &Instance, e: &Application, ties: bool) -> Vec<(i64, VarId)> {
    let u = upper(inst, e.company);
    let mut terms: Vec<(i64, VarId)> = at_least_as_good(inst, e.applicant, e.rank)
        .filter_map(|c| model.x(e.applicant, c))
        .map(|v| (u, v))
        .collect();
    for (h, s) in inst.applicants_of(e.company) {
        let beats = if ties { s >= e.score } else { s > e.score };
        if beats {
            if let Some(v) = model.x(h, e.company) {
                terms.push((1, v));
            }
        }
    }
    terms
}

/// Feasibility rows plus one stability row per application.
pub fn build_base(inst: &Instance, ties: bool) -> LinearModel {
    let mut model = build_feasibility(inst);
    add_stability(&mut model, inst, ties);
    model
}

pub fn add_stability(model: &mut LinearModel, inst: &Instance, ties: bool) {
    let tag = if ties { RowTag::Eq4 } else { RowTag::Eq3 };
    for e in inst.applications() {
        let terms = stability_terms(model, inst, &e, ties);
        model.add_constraint(terms, Sense::Ge, upper(inst, e.company), tag);
    }
}

pub fn add_lower_quotas(model: &mut LinearModel, inst: &Instance) {
    for c in inst.company_ids() {
        let lower = inst.company(c).lower;
        if lower == 0 {
            continue;
        }
        let terms = inst
            .applicants_of(c)
            .into_iter()
            .filter_map(|(a, _)| model.x(a, c))
            .map(|v| (1, v))
            .collect();
        model.add_constraint(terms, Sense::Ge, i64::from(lower), RowTag::Eq5);
    }
}

fn type_terms(model: &LinearModel, inst: &Instance, c: CompanyId, ty: TypeTag) -> Vec<(i64, VarId)> {
    inst.applicants_of(c)
        .into_iter()
        .filter(|&(a, _)| inst.type_of(a) == ty)
        .filter_map(|(a, _)| model.x(a, c))
        .map(|v| (1, v))
        .collect()
}

/// Per company and type bounds. Upper rows at least as large as the company
/// quota or the number of such applicants, and zero lower rows, are skipped
/// when pruning is on.
pub fn add_type_quotas(model: &mut LinearModel, inst: &Instance) {
    for c in inst.company_ids() {
        let comp = inst.company(c);
        for ty in inst.type_tags() {
            let terms = type_terms(model, inst, c, ty);
            if let Some(&u) = comp.type_upper.get(&ty) {
                let implied = u >= comp.upper || u as usize >= terms.len();
                if !(model.prune_vacuous && implied) {
                    model.add_constraint(terms.clone(), Sense::Le, i64::from(u), RowTag::Eq6);
                }
            }
            let l = comp.type_lower(ty);
            if l > 0 || (!model.prune_vacuous && comp.type_lower.contains_key(&ty)) {
                model.add_constraint(terms, Sense::Ge, i64::from(l), RowTag::Eq7);
            }
        }
    }
}

pub fn add_global_type_quotas(model: &mut LinearModel, inst: &Instance) {
    for ty in inst.type_tags() {
        let terms: Vec<(i64, VarId)> = inst
            .applications()
            .filter(|e| inst.type_of(e.applicant) == ty)
            .filter_map(|e| model.x(e.applicant, e.company))
            .map(|v| (1, v))
            .collect();
        let population = inst
            .applicant_ids()
            .filter(|&a| inst.type_of(a) == ty && !inst.applicant(a).choices.is_empty())
            .count();
        if let Some(u) = inst.global_upper(ty) {
            if !(model.prune_vacuous && u as usize >= population) {
                model.add_constraint(terms.clone(), Sense::Le, i64::from(u), RowTag::Eq8);
            }
        }
        let l = inst.global_lower(ty);
        if l > 0 || (!model.prune_vacuous && inst.global_type_lower.contains_key(&ty)) {
            model.add_constraint(terms, Sense::Ge, i64::from(l), RowTag::Eq9);
        }
    }
}

/// Every applicant with a non-empty list is matched.
pub fn add_completeness(model: &mut LinearModel, inst: &Instance) {
    for a in inst.applicant_ids() {
        let terms: Vec<_> = inst
            .applicant(a)
            .choices
            .iter()
            .filter_map(|ch| model.x(a, ch.company))
            .map(|v| (1, v))
            .collect();
        if !terms.is_empty() {
            model.add_constraint(terms, Sense::Eq, 1, RowTag::Complete);
        }
    }
}

/// Replaces the stability rows by rows with a non-negative deficiency and
/// pushes `min sum d`.
pub fn add_min_deficiency(model: &mut LinearModel, inst: &Instance) -> ObjectiveId {
    model.remove_tags(&[RowTag::Eq3, RowTag::Eq4]);
    let mut objective = Vec::new();
    for e in inst.applications() {
        let u = upper(inst, e.company);
        let d = model.add_var(VarKind::Deficiency(e.applicant, e.company), Domain::Integer { max: u });
        let mut terms = stability_terms(model, inst, &e, true);
        terms.push((1, d));
        model.add_constraint(terms, Sense::Ge, u, RowTag::Eq10);
        objective.push((1, d));
    }
    model.push_objective(ObjectiveKind::Deficiency, objective)
}

/// Replaces the stability rows by rows with a binary blocking indicator
/// scaled by `u_j`, and pushes `min sum d` (the number of blocking pairs).
pub fn add_almost_stable(model: &mut LinearModel, inst: &Instance) -> ObjectiveId {
    model.remove_tags(&[RowTag::Eq3, RowTag::Eq4]);
    let mut objective = Vec::new();
    for e in inst.applications() {
        let u = upper(inst, e.company);
        let d = model.add_var(VarKind::Deficiency(e.applicant, e.company), Domain::Binary);
        let mut terms = stability_terms(model, inst, &e, true);
        terms.push((u, d));
        model.add_constraint(terms, Sense::Ge, u, RowTag::Eq11);
        objective.push((1, d));
    }
    model.push_objective(ObjectiveKind::BlockingPairs, objective)
}

/// `sum_{k: r_ik <= r_ij} x_ik - x_hj` for the pair `(e, h)`.
fn envy_terms(model: &LinearModel, inst: &Instance, e: &Application, h: ApplicantId) -> Vec<(i64, VarId)> {
    let mut terms: Vec<(i64, VarId)> = at_least_as_good(inst, e.applicant, e.rank)
        .filter_map(|c| model.x(e.applicant, c))
        .map(|v| (1, v))
        .collect();
    if let Some(v) = model.x(h, e.company) {
        terms.push((-1, v));
    }
    terms
}

/// Ordered pairs `(e, h)` of distinct applicants at the same company.
fn application_pairs(inst: &Instance) -> Vec<(Application, ApplicantId, i64)> {
    let mut out = Vec::new();
    for e in inst.applications() {
        for (h, s) in inst.applicants_of(e.company) {
            if h != e.applicant {
                out.push((e, h, e.score.0 - s.0));
            }
        }
    }
    out
}

fn add_envy_rows(model: &mut LinearModel, inst: &Instance, same_type_only: bool, tag: RowTag) {
    for (e, h, gap) in application_pairs(inst) {
        if gap <= 0 || (same_type_only && inst.type_of(e.applicant) != inst.type_of(h)) {
            continue;
        }
        let terms = envy_terms(model, inst, &e, h);
        model.add_constraint(terms, Sense::Ge, 0, tag);
    }
}

/// Rules out every justified envy.
pub fn add_envy_free(model: &mut LinearModel, inst: &Instance) {
    add_envy_rows(model, inst, false, RowTag::Eq12);
}

/// Rules out justified envy between applicants of the same type.
pub fn add_within_type_envy_free(model: &mut LinearModel, inst: &Instance) {
    add_envy_rows(model, inst, true, RowTag::Eq13);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EnvyWeight {
    Count,
    Intensity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EnvyScope {
    CrossType,
    AllPairs,
}

/// Envy rows with a binary deficiency for every tracked pair of applicants
/// at the same company, and an objective counting (or weighting by score
/// gap) the pairs whose envy is justified.
///
/// Rows are generated for every ordered pair regardless of score order. A
/// pair whose envier does not score strictly higher carries zero weight;
/// its row is dropped when pruning is on since the deficiency can absorb it
/// at no cost.
pub fn add_envy_tracking(
    model: &mut LinearModel,
    inst: &Instance,
    weight: EnvyWeight,
    scope: EnvyScope,
) -> ObjectiveId {
    let mut objective = Vec::new();
    for (e, h, gap) in application_pairs(inst) {
        if scope == EnvyScope::CrossType && inst.type_of(e.applicant) == inst.type_of(h) {
            continue;
        }
        let w = match weight {
            EnvyWeight::Count => i64::from(gap > 0),
            EnvyWeight::Intensity => gap.max(0),
        };
        if w == 0 && model.prune_vacuous {
            continue;
        }
        let d = model.add_var(
            VarKind::Envy {
                envier: e.applicant,
                envied: h,
                company: e.company,
            },
            Domain::Binary,
        );
        let mut terms = envy_terms(model, inst, &e, h);
        terms.push((1, d));
        model.add_constraint(terms, Sense::Ge, 0, RowTag::Eq14);
        objective.push((w, d));
    }
    let kind = match weight {
        EnvyWeight::Count => ObjectiveKind::EnvyCount,
        EnvyWeight::Intensity => ObjectiveKind::EnvyIntensity,
    };
    model.push_objective(kind, objective)
}

pub fn add_cross_type_envy_tracking(model: &mut LinearModel, inst: &Instance, weight: EnvyWeight) -> ObjectiveId {
    add_envy_tracking(model, inst, weight, EnvyScope::CrossType)
}

/// One binary indicator per application that is forced to one when the
/// applicant wants the company and the company has a free seat; pushes
/// `min sum d`.
pub fn add_open_slot_counting(model: &mut LinearModel, inst: &Instance) -> ObjectiveId {
    let mut objective = Vec::new();
    for e in inst.applications() {
        let u = upper(inst, e.company);
        let d = model.add_var(VarKind::OpenSlot(e.applicant, e.company), Domain::Binary);
        let mut terms: Vec<(i64, VarId)> = at_least_as_good(inst, e.applicant, e.rank)
            .filter_map(|c| model.x(e.applicant, c))
            .map(|v| (u, v))
            .collect();
        terms.push((u, d));
        for (h, _) in inst.applicants_of(e.company) {
            if let Some(v) = model.x(h, e.company) {
                terms.push((1, v));
            }
        }
        model.add_constraint(terms, Sense::Ge, u, RowTag::Eq15);
        objective.push((1, d));
    }
    model.push_objective(ObjectiveKind::OpenSlotBlockings, objective)
}

pub fn add_rank_objective(model: &mut LinearModel, inst: &Instance) -> ObjectiveId {
    let terms = inst
        .applications()
        .filter_map(|e| model.x(e.applicant, e.company).map(|v| (i64::from(e.rank), v)))
        .collect();
    model.push_objective(ObjectiveKind::Rank, terms)
}

/// Slack variable per applicant with a non-empty list, equal to one when the
/// applicant is unmatched; pushes `min sum z`. Replaces the applicant's
/// at-most-one row with an equality.
pub fn add_unmatched_objective(model: &mut LinearModel, inst: &Instance) -> ObjectiveId {
    let mut objective = Vec::new();
    for a in inst.applicant_ids() {
        let mut terms: Vec<(i64, VarId)> = inst
            .applicant(a)
            .choices
            .iter()
            .filter_map(|ch| model.x(a, ch.company))
            .map(|v| (1, v))
            .collect();
        if terms.is_empty() {
            continue;
        }
        let z = model.add_var(VarKind::Unmatched(a), Domain::Binary);
        terms.push((1, z));
        model.add_constraint(terms, Sense::Eq, 1, RowTag::Eq1);
        objective.push((1, z));
    }
    model.push_objective(ObjectiveKind::Unmatched, objective)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Evaluation {
    pub feasible: bool,
    /// Indices of violated rows.
    pub violated: Vec<usize>,
    pub out_of_domain: Vec<VarId>,
    pub objective_values: Vec<i64>,
}

pub fn evaluate(model: &LinearModel, values: &[i64]) -> Evaluation {
    assert_eq!(values.len(), model.vars.len(), "assignment must cover every variable");
    let out_of_domain: Vec<VarId> = model
        .vars
        .iter()
        .enumerate()
        .filter(|(k, v)| values[*k] < 0 || values[*k] > v.domain.max())
        .map(|(k, _)| VarId(k))
        .collect();
    let violated: Vec<usize> = model
        .constraints
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.is_satisfied(values))
        .map(|(k, _)| k)
        .collect();
    Evaluation {
        feasible: violated.is_empty() && out_of_domain.is_empty(),
        violated,
        out_of_domain,
        objective_values: model.objectives.iter().map(|o| o.value(values)).collect(),
    }
}

/// Assignment vector for `m`: match variables from the matching, every other
/// variable at the smallest domain value that satisfies its rows (zero when
/// none does).
pub fn characteristic_vector(model: &LinearModel, m: &Matching) -> Vec<i64> {
    let mut values = vec![0i64; model.vars.len()];
    for (k, v) in model.vars.iter().enumerate() {
        if let VarKind::Match(a, c) = v.kind {
            values[k] = i64::from(m.company_of(a) == Some(c));
        }
    }
    let mut rows_of: Vec<Vec<usize>> = vec![Vec::new(); model.vars.len()];
    for (r, row) in model.constraints.iter().enumerate() {
        for &(_, v) in &row.terms {
            rows_of[v.0].push(r);
        }
    }
    for (k, v) in model.vars.iter().enumerate() {
        if matches!(v.kind, VarKind::Match(..)) {
            continue;
        }
        for val in 0..=v.domain.max() {
            values[k] = val;
            if rows_of[k].iter().all(|&r| model.constraints[r].is_satisfied(&values)) {
                break;
            }
            if val == v.domain.max() {
                values[k] = 0;
            }
        }
    }
    values
}

pub fn matching_from_values(model: &LinearModel, n: usize, values: &[i64]) -> Matching {
    let mut m = Matching::empty(n);
    for (k, v) in model.vars.iter().enumerate() {
        if let VarKind::Match(a, c) = v.kind {
            if values[k] == 1 {
                m.assign(a, Some(c));
            }
        }
    }
    m
}

/// Objective value `kind` would take for `m`, computed by the checkers.
pub fn objective_from_checkers(kind: &ObjectiveKind, inst: &Instance, m: &Matching, scope: EnvyScope) -> Option<i64> {
    use crate::checks::*;
    let envies = || match scope {
        EnvyScope::CrossType => cross_type_envies(inst, m),
        EnvyScope::AllPairs => all_envies(inst, m),
    };
    Some(match kind {
        ObjectiveKind::Rank => total_rank(inst, m) as i64,
        ObjectiveKind::Deficiency => total_deficiency(inst, m) as i64,
        ObjectiveKind::BlockingPairs => blocking_pairs(inst, m, true).len() as i64,
        ObjectiveKind::EnvyCount => envies().len() as i64,
        ObjectiveKind::EnvyIntensity => envies().iter().map(|e| e.intensity).sum(),
        ObjectiveKind::OpenSlotBlockings => open_slot_blockings(inst, m).len() as i64,
        ObjectiveKind::Unmatched => unmatched_count(inst, m) as i64,
        ObjectiveKind::Custom(_) => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples::{ex_a, ex_b};
    use crate::instance::InstanceBuilder;

    #[test]
    fn base_row_counts_ex_a() {
        let model = build_base(&ex_a(), true);
        assert_eq!(model.vars.len(), 3);
        assert_eq!(model.count_tag(RowTag::Eq1), 2);
        assert_eq!(model.count_tag(RowTag::Eq2), 2);
        assert_eq!(model.count_tag(RowTag::Eq4), 3);
    }

    #[test]
    fn base_row_counts_ex_b() {
        let model = build_base(&ex_b(), false);
        assert_eq!(model.vars.len(), 15);
        assert_eq!(model.count_tag(RowTag::Eq1), 5);
        assert_eq!(model.count_tag(RowTag::Eq2), 3);
        assert_eq!(model.count_tag(RowTag::Eq3), 15);
    }

    #[test]
    fn empty_instance_model() {
        let inst = InstanceBuilder::new().build();
        let model = build_base(&inst, true);
        assert!(model.vars.is_empty() && model.constraints.is_empty());
        assert!(evaluate(&model, &[]).feasible);
    }

    #[test]
    fn lower_quota_rows() {
        let mut inst = ex_a();
        let mut model = build_base(&inst, true);
        add_lower_quotas(&mut model, &inst);
        assert_eq!(model.count_tag(RowTag::Eq5), 0);

        inst.companies[0].lower = 1;
        add_lower_quotas(&mut model, &inst);
        let rows: Vec<_> = model.constraints.iter().filter(|r| r.tag == RowTag::Eq5).collect();
        assert_eq!(rows.len(), 1);
        let x11 = model.x(ApplicantId(0), CompanyId(0)).unwrap();
        let x21 = model.x(ApplicantId(1), CompanyId(0)).unwrap();
        assert_eq!(rows[0].terms, vec![(1, x11), (1, x21)]);
        assert_eq!(rows[0].rhs, 1);
    }

    #[test]
    fn evaluate_ex_a() {
        let inst = ex_a();
        let mut model = build_base(&inst, true);
        add_rank_objective(&mut model, &inst);
        let v = characteristic_vector(&model, &Matching::from_pairs(2, &[(0, 0), (1, 1)]));
        let ev = evaluate(&model, &v);
        assert!(ev.feasible);
        assert_eq!(ev.objective_values, vec![3]);

        // All-zero vector: stability rows have 0 on the left and u_j on the right.
        let ev = evaluate(&model, &[0, 0, 0]);
        assert!(!ev.feasible);

        let mut plain = build_feasibility(&inst);
        add_rank_objective(&mut plain, &inst);
        let ev = evaluate(&plain, &[0, 0, 0]);
        assert!(ev.feasible);
        assert_eq!(ev.objective_values, vec![0]);
    }

    #[test]
    fn envy_tracking_prunes_zero_weight_rows() {
        let inst = ex_b();
        let mut model = build_feasibility(&inst);
        add_cross_type_envy_tracking(&mut model, &inst, EnvyWeight::Count);
        let pruned = model.count_tag(RowTag::Eq14);

        let mut full = build_feasibility(&inst);
        full.prune_vacuous = false;
        add_cross_type_envy_tracking(&mut full, &inst, EnvyWeight::Count);
        // 3 type-1 x 2 type-2 applicants, both directions, 3 companies.
        assert_eq!(full.count_tag(RowTag::Eq14), 36);
        assert!(pruned < 36);
        let positive = application_pairs(&inst)
            .into_iter()
            .filter(|(e, h, gap)| *gap > 0 && inst.type_of(e.applicant) != inst.type_of(*h))
            .count();
        assert_eq!(pruned, positive);
    }

    #[test]
    fn single_type_rows_coincide() {
        let inst = ex_a();
        let mut ef = build_feasibility(&inst);
        add_envy_free(&mut ef, &inst);
        let mut wtef = build_feasibility(&inst);
        add_within_type_envy_free(&mut wtef, &inst);
        let ef_rows: Vec<_> = ef.constraints.iter().map(|r| (&r.terms, r.rhs)).collect();
        let wtef_rows: Vec<_> = wtef.constraints.iter().map(|r| (&r.terms, r.rhs)).collect();
        assert_eq!(ef_rows, wtef_rows);
        let mut cross = build_feasibility(&inst);
        add_cross_type_envy_tracking(&mut cross, &inst, EnvyWeight::Intensity);
        assert_eq!(cross.count_tag(RowTag::Eq14), 0);
    }

    #[test]
    fn dump_lists_tags() {
        let inst = ex_a();
        let mut model = build_base(&inst, true);
        add_rank_objective(&mut model, &inst);
        let text = model.to_string();
        assert!(text.starts_with("min[1] rank: 1 x(a1,c1)"));
        assert!(text.contains("EQ4: "));
        assert!(text.contains("bin x(a2,c2)"));
    }
}
