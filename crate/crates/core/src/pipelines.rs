//! Named solution concepts: which constraint families go into the model,
//! in which order the objectives are minimised, and the report produced
//! for a solved instance.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::checks::{self, check_feasible, validate_instance, QuotaMode, Violation};
use crate::classic::{
    break_ties, cwtefm_construct, deferred_acceptance, equal_type_score_refined, equal_type_score_search,
    equal_type_score_sweep, permutations, ClassicError, EqualBonusResult, ScoreAdjustment, TieBreakPolicy,
};
use crate::format::instance_hash;
use crate::instance::{Instance, Matching, TypeTag};
use crate::ipmodel::{self, EnvyScope, EnvyWeight, LinearModel, ObjectiveKind};
use crate::solver::{solve, solve_lexicographic_from, SolveStats, SolveStatus, SolverConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConceptName {
    MinRankStable,
    MinDeficiency,
    AlmostStable,
    MinRankEf,
    MinOsbEf,
    MinEnvyCountCwtefm,
    MinEnvyIntensityCwtefm,
    MinRankMinEnvyCountCwtefm,
    MinRankMinEnvyIntensityCwtefm,
    MinOsbMinEnvyCountCwtefm,
    MinOsbMinEnvyIntensityCwtefm,
    EqualTypeScores,
}

impl ConceptName {
    pub const ALL: [ConceptName; 12] = [
        ConceptName::MinRankStable,
        ConceptName::MinDeficiency,
        ConceptName::AlmostStable,
        ConceptName::MinRankEf,
        ConceptName::MinOsbEf,
        ConceptName::MinEnvyCountCwtefm,
        ConceptName::MinEnvyIntensityCwtefm,
        ConceptName::MinRankMinEnvyCountCwtefm,
        ConceptName::MinRankMinEnvyIntensityCwtefm,
        ConceptName::MinOsbMinEnvyCountCwtefm,
        ConceptName::MinOsbMinEnvyIntensityCwtefm,
        ConceptName::EqualTypeScores,
    ];

    /// Concepts solved through the integer model.
    pub fn model_based() -> impl Iterator<Item = ConceptName> {
        Self::ALL.into_iter().filter(|c| *c != ConceptName::EqualTypeScores)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ConceptName::MinRankStable => "MinRank-Stable",
            ConceptName::MinDeficiency => "MinDeficiency",
            ConceptName::AlmostStable => "AlmostStable",
            ConceptName::MinRankEf => "MinRank-EF",
            ConceptName::MinOsbEf => "MinOSB-EF",
            ConceptName::MinEnvyCountCwtefm => "Min#E-CWTEFM",
            ConceptName::MinEnvyIntensityCwtefm => "MinEI-CWTEFM",
            ConceptName::MinRankMinEnvyCountCwtefm => "MinRank-Min#E-CWTEFM",
            ConceptName::MinRankMinEnvyIntensityCwtefm => "MinRank-MinEI-CWTEFM",
            ConceptName::MinOsbMinEnvyCountCwtefm => "MinOSB-Min#E-CWTEFM",
            ConceptName::MinOsbMinEnvyIntensityCwtefm => "MinOSB-MinEI-CWTEFM",
            ConceptName::EqualTypeScores => "EqualTypeScores",
        }
    }

    pub fn is_cwtefm(self) -> bool {
        matches!(
            self,
            ConceptName::MinEnvyCountCwtefm
                | ConceptName::MinEnvyIntensityCwtefm
                | ConceptName::MinRankMinEnvyCountCwtefm
                | ConceptName::MinRankMinEnvyIntensityCwtefm
                | ConceptName::MinOsbMinEnvyCountCwtefm
                | ConceptName::MinOsbMinEnvyIntensityCwtefm
        )
    }

    fn envy_weight(self) -> Option<EnvyWeight> {
        match self {
            ConceptName::MinEnvyCountCwtefm
            | ConceptName::MinRankMinEnvyCountCwtefm
            | ConceptName::MinOsbMinEnvyCountCwtefm => Some(EnvyWeight::Count),
            ConceptName::MinEnvyIntensityCwtefm
            | ConceptName::MinRankMinEnvyIntensityCwtefm
            | ConceptName::MinOsbMinEnvyIntensityCwtefm => Some(EnvyWeight::Intensity),
            _ => None,
        }
    }
}

impl fmt::Display for ConceptName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("unknown solution concept `{0}`")]
pub struct UnknownConcept(pub String);

impl FromStr for ConceptName {
    type Err = UnknownConcept;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| UnknownConcept(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct QuotaOverrides {
    pub upper: Option<u32>,
    pub lower: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SolutionConcept {
    pub name: ConceptName,
    pub quota_overrides: QuotaOverrides,
    /// Weak stability rows (equal scores never justify replacement) when
    /// true, strict-comparison rows otherwise.
    pub ties: bool,
    /// Within-type envy-freeness as a hard constraint for the CWTEFM
    /// concepts. When false, envy is tracked over all pairs instead.
    pub wtef: bool,
    /// Outside the CWTEFM concepts, minimise the number of unmatched
    /// applicants right after the concept's primary criterion.
    pub prefer_complete: bool,
}

impl SolutionConcept {
    pub fn new(name: ConceptName) -> Self {
        SolutionConcept {
            name,
            quota_overrides: QuotaOverrides::default(),
            ties: true,
            wtef: true,
            prefer_complete: true,
        }
    }

    pub fn with_overrides(mut self, upper: Option<u32>, lower: Option<u32>) -> Self {
        self.quota_overrides = QuotaOverrides { upper, lower };
        self
    }

    pub fn label(&self) -> String {
        let mut s = self.name.to_string();
        if let Some(u) = self.quota_overrides.upper {
            s.push_str(&format!(" u={u}"));
        }
        if let Some(l) = self.quota_overrides.lower {
            s.push_str(&format!(" l={l}"));
        }
        if self.name.is_cwtefm() && !self.wtef {
            s.push_str(" no-wtef");
        }
        s
    }

    /// The instance with the overrides applied.
    pub fn instance(&self, inst: &Instance) -> Instance {
        let o = self.quota_overrides;
        if o.upper.is_none() && o.lower.is_none() {
            inst.clone()
        } else {
            inst.with_quota_overrides(o.upper, o.lower)
        }
    }

    pub fn envy_scope(&self) -> EnvyScope {
        if self.wtef {
            EnvyScope::CrossType
        } else {
            EnvyScope::AllPairs
        }
    }

    pub fn requires_complete(&self) -> bool {
        self.name.is_cwtefm()
    }

    /// Objectives in lexicographic order.
    pub fn objectives(&self) -> Vec<ObjectiveKind> {
        use ConceptName::*;
        use ObjectiveKind as K;
        let unmatched = || self.prefer_complete.then_some(K::Unmatched);
        let envy = |w| match w {
            EnvyWeight::Count => K::EnvyCount,
            EnvyWeight::Intensity => K::EnvyIntensity,
        };
        let list: Vec<Option<ObjectiveKind>> = match self.name {
            MinRankStable | MinRankEf => vec![unmatched(), Some(K::Rank)],
            MinDeficiency => vec![Some(K::Deficiency), unmatched()],
            AlmostStable => vec![Some(K::BlockingPairs), unmatched()],
            MinOsbEf => vec![unmatched(), Some(K::OpenSlotBlockings)],
            MinEnvyCountCwtefm | MinEnvyIntensityCwtefm => vec![self.name.envy_weight().map(envy)],
            MinRankMinEnvyCountCwtefm | MinRankMinEnvyIntensityCwtefm => {
                vec![self.name.envy_weight().map(envy), Some(K::Rank)]
            }
            MinOsbMinEnvyCountCwtefm | MinOsbMinEnvyIntensityCwtefm => {
                vec![self.name.envy_weight().map(envy), Some(K::OpenSlotBlockings)]
            }
            EqualTypeScores => vec![],
        };
        list.into_iter().flatten().collect()
    }

    /// Whether `m` belongs to the concept's admissible set (quotas plus the
    /// concept's stability, envy and completeness requirements). `inst` must
    /// already carry the overrides.
    pub fn admissible(&self, inst: &Instance, m: &Matching) -> bool {
        use ConceptName::*;
        if !check_feasible(inst, m, QuotaMode::WithGlobalTypes).is_ok_and(|v| v.is_empty()) {
            return false;
        }
        if self.requires_complete() && !checks::is_complete(inst, m) {
            return false;
        }
        match self.name {
            MinRankStable if self.ties => checks::blocking_pairs(inst, m, true).is_empty(),
            MinRankStable => checks::priority_blocking_pairs(inst, m).is_empty(),
            MinRankEf | MinOsbEf => checks::is_envy_free(inst, m),
            name if name.is_cwtefm() => !self.wtef || checks::is_within_type_envy_free(inst, m),
            _ => true,
        }
    }

    /// Objective vector of `m` computed by the checkers.
    pub fn objective_values(&self, inst: &Instance, m: &Matching) -> Vec<i64> {
        self.objectives()
            .iter()
            .map(|k| ipmodel::objective_from_checkers(k, inst, m, self.envy_scope()).expect("built-in objective"))
            .collect()
    }

    /// Model rows up to and including `stage`, without objectives.
    pub fn build_stage(&self, inst: &Instance, stage: Stage) -> LinearModel {
        let mut model = ipmodel::build_feasibility(inst);
        if self.requires_complete() {
            ipmodel::add_completeness(&mut model, inst);
        }
        if stage >= Stage::LowerQuotas {
            ipmodel::add_lower_quotas(&mut model, inst);
        }
        if stage >= Stage::TypeQuotas {
            ipmodel::add_type_quotas(&mut model, inst);
        }
        if stage >= Stage::GlobalQuotas {
            ipmodel::add_global_type_quotas(&mut model, inst);
        }
        if stage >= Stage::Concept {
            use ConceptName::*;
            match self.name {
                MinRankStable => ipmodel::add_stability(&mut model, inst, self.ties),
                MinRankEf | MinOsbEf => ipmodel::add_envy_free(&mut model, inst),
                name if name.is_cwtefm() && self.wtef => ipmodel::add_within_type_envy_free(&mut model, inst),
                _ => {}
            }
        }
        model
    }

    /// The complete model with objectives pushed in lexicographic order.
    pub fn build_model(&self, inst: &Instance) -> LinearModel {
        let mut model = self.build_stage(inst, Stage::Concept);
        for kind in self.objectives() {
            match kind {
                ObjectiveKind::Rank => ipmodel::add_rank_objective(&mut model, inst),
                ObjectiveKind::Deficiency => ipmodel::add_min_deficiency(&mut model, inst),
                ObjectiveKind::BlockingPairs => ipmodel::add_almost_stable(&mut model, inst),
                ObjectiveKind::EnvyCount => {
                    ipmodel::add_envy_tracking(&mut model, inst, EnvyWeight::Count, self.envy_scope())
                }
                ObjectiveKind::EnvyIntensity => {
                    ipmodel::add_envy_tracking(&mut model, inst, EnvyWeight::Intensity, self.envy_scope())
                }
                ObjectiveKind::OpenSlotBlockings => ipmodel::add_open_slot_counting(&mut model, inst),
                ObjectiveKind::Unmatched => ipmodel::add_unmatched_objective(&mut model, inst),
                ObjectiveKind::Custom(_) => unreachable!("concepts use built-in objectives"),
            };
        }
        model
    }
}

impl From<ConceptName> for SolutionConcept {
    fn from(name: ConceptName) -> Self {
        SolutionConcept::new(name)
    }
}

/// Constraint families in the order they are added.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    /// Applicant and capacity rows, plus completeness where required.
    Feasibility,
    LowerQuotas,
    TypeQuotas,
    GlobalQuotas,
    /// Stability, envy-freeness or within-type envy-freeness.
    Concept,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Feasibility,
        Stage::LowerQuotas,
        Stage::TypeQuotas,
        Stage::GlobalQuotas,
        Stage::Concept,
    ];
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Feasibility => "feasibility",
            Stage::LowerQuotas => "lower quotas",
            Stage::TypeQuotas => "type quotas",
            Stage::GlobalQuotas => "global type quotas",
            Stage::Concept => "concept",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CompanyProfile {
    pub company: String,
    pub total: usize,
    pub per_type: Vec<usize>,
}

/// Quality figures of a matching, all recomputed from the instance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Diagnostics {
    pub profile: Vec<CompanyProfile>,
    pub matched: usize,
    pub unmatched: usize,
    pub total_rank: u64,
    pub within_type_envies: usize,
    /// Doubled scale.
    pub within_type_intensity: i64,
    pub cross_type_envies: usize,
    /// Doubled scale.
    pub cross_type_intensity: i64,
    pub blocking_pairs: usize,
    pub open_slot_blockings: usize,
    pub deficiency: u64,
}

impl Diagnostics {
    pub fn compute(inst: &Instance, m: &Matching) -> Self {
        let profile = inst
            .company_ids()
            .map(|c| {
                let mut per_type = vec![0; inst.num_types()];
                for a in m.assignees(c) {
                    per_type[inst.type_of(a).0] += 1;
                }
                CompanyProfile {
                    company: inst.company(c).name.clone(),
                    total: m.fill(c),
                    per_type,
                }
            })
            .collect();
        let within = checks::within_type_envies(inst, m);
        let cross = checks::cross_type_envies(inst, m);
        Diagnostics {
            profile,
            matched: m.size(),
            unmatched: checks::unmatched_count(inst, m),
            total_rank: checks::total_rank(inst, m),
            within_type_envies: within.len(),
            within_type_intensity: within.iter().map(|e| e.intensity).sum(),
            cross_type_envies: cross.len(),
            cross_type_intensity: cross.iter().map(|e| e.intensity).sum(),
            blocking_pairs: checks::blocking_pairs(inst, m, true).len(),
            open_slot_blockings: checks::open_slot_blockings(inst, m).len(),
            deficiency: checks::total_deficiency(inst, m),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolveReport {
    pub concept: String,
    pub instance_hash: String,
    pub matching: Matching,
    pub diagnostics: Diagnostics,
    /// Objective labels and values, in lexicographic order.
    pub objectives: Vec<(String, i64)>,
    /// Per-type bonus (doubled scale) for the equal-score concept.
    pub bonus: Option<Vec<i64>>,
    pub tie_break: Option<TieBreakPolicy>,
    pub stats: SolveStats,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum PipelineError {
    #[error("invalid instance: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidInstance(Vec<Violation>),
    #[error("infeasible: no matching satisfies the {stage} constraints")]
    Infeasible { stage: Stage },
    #[error("search limit reached before optimality was proven")]
    LimitReached { incumbent: Option<Box<SolveReport>> },
    #[error(transparent)]
    Classic(#[from] ClassicError),
}

fn report(
    inst: &Instance,
    hash: &str,
    concept: &SolutionConcept,
    matching: Matching,
    objectives: Vec<(String, i64)>,
    stats: SolveStats,
) -> SolveReport {
    SolveReport {
        concept: concept.label(),
        instance_hash: hash.to_string(),
        diagnostics: Diagnostics::compute(inst, &matching),
        matching,
        objectives,
        bonus: None,
        tie_break: None,
        stats,
    }
}

/// First constraint family whose addition makes the model infeasible.
pub fn diagnose_infeasibility(inst: &Instance, concept: &SolutionConcept, config: &SolverConfig) -> Option<Stage> {
    Stage::ALL.into_iter().find(|&stage| {
        let model = concept.build_stage(inst, stage);
        solve(&model, config).status == SolveStatus::Infeasible
    })
}

struct EqualScores {
    bonus: Vec<i64>,
    tie_break: Option<TieBreakPolicy>,
    matching: Matching,
    stats: SolveStats,
}

impl From<EqualBonusResult> for EqualScores {
    fn from(r: EqualBonusResult) -> Self {
        EqualScores {
            bonus: r.bonus,
            tie_break: Some(r.policy),
            matching: r.matching,
            stats: SolveStats::default(),
        }
    }
}

fn equal_scores(inst: &Instance, config: &SolverConfig) -> Result<EqualScores, ClassicError> {
    let exact = |t: TypeTag| inst.global_upper(t).is_some_and(|u| u == inst.global_lower(t));
    let feasible = |m: &Matching| check_feasible(inst, m, QuotaMode::WithGlobalTypes).is_ok_and(|v| v.is_empty());
    if inst.num_types() == 2 && inst.type_tags().all(exact) {
        let target = inst.global_lower(TypeTag(0)) as usize;
        if let Ok(r) = equal_type_score_sweep(inst, target) {
            if feasible(&r.matching) {
                return Ok(r.into());
            }
        }
    }
    let mut near_misses = Vec::new();
    if inst.num_types() >= 2 && inst.type_tags().all(exact) {
        let targets: Vec<usize> = inst.type_tags().map(|t| inst.global_lower(t) as usize).collect();
        if let Ok(r) = equal_type_score_refined(inst, &targets, REFINED_STEPS, &mut near_misses) {
            return Ok(r.into());
        }
        for b in &mut near_misses {
            let shift = b[b.len() - 1];
            b.iter_mut().for_each(|x| *x -= shift);
        }
        let mut seen = Vec::new();
        near_misses.retain(|b| {
            let fresh = !seen.contains(b);
            if fresh {
                seen.push(b.clone());
            }
            fresh
        });
    }
    // Weakly stable matchings under bonuses that already met the type
    // targets, where ties may be broken differently at every company.
    let deadline = Instant::now() + config.time_limit;
    let stable = SolutionConcept::new(ConceptName::MinRankStable);
    let mut stats = SolveStats::default();
    for bonus in near_misses {
        let remaining = deadline.saturating_duration_since(Instant::now());
        if remaining.is_zero() {
            break;
        }
        let adjusted = ScoreAdjustment::equal(inst, &bonus).apply(inst);
        let model = stable.build_stage(&adjusted, Stage::Concept);
        let cfg = SolverConfig {
            node_limit: config.node_limit.min(EXACT_NODES),
            time_limit: remaining,
            ..config.clone()
        };
        let out = solve(&model, &cfg);
        stats.nodes += out.stats.nodes;
        stats.propagations += out.stats.propagations;
        if let (SolveStatus::Optimal, Some(values)) = (out.status, out.assignment) {
            let matching = ipmodel::matching_from_values(&model, inst.n(), &values);
            if feasible(&matching) {
                return Ok(EqualScores {
                    bonus,
                    tie_break: None,
                    matching,
                    stats,
                });
            }
        }
    }
    equal_type_score_search(inst).map(Into::into)
}

const EXACT_NODES: u64 = 20_000;
const REFINED_STEPS: usize = 200_000;

fn type_orders(p: usize) -> Vec<Vec<TypeTag>> {
    if p > 4 {
        return vec![(0..p).map(TypeTag).collect()];
    }
    permutations(&(0..p).collect::<Vec<_>>())
        .into_iter()
        .map(|perm| perm.into_iter().map(TypeTag).collect())
        .collect()
}

/// Best admissible matching among a few combinatorial constructions
/// (deferred acceptance under several tie-breaks, the complete within-type
/// envy-free construction), used to start the exact search.
pub fn starting_matching(inst: &Instance, concept: &SolutionConcept) -> Option<Matching> {
    let mut candidates = Vec::new();
    let policies = std::iter::once(TieBreakPolicy::ByIndex)
        .chain(type_orders(inst.num_types()).into_iter().map(TieBreakPolicy::FavorType));
    for policy in policies {
        if let Ok(m) = break_ties(inst, &policy).and_then(|strict| deferred_acceptance(&strict)) {
            candidates.push(m);
        }
    }
    if let Ok(m) = cwtefm_construct(inst) {
        candidates.push(m);
    }
    candidates
        .into_iter()
        .filter(|m| concept.admissible(inst, m))
        .min_by_key(|m| concept.objective_values(inst, m))
}

/// Solves `inst` under `concept`.
pub fn solve_concept(
    inst: &Instance,
    concept: &SolutionConcept,
    config: &SolverConfig,
) -> Result<SolveReport, PipelineError> {
    let errors: Vec<Violation> = validate_instance(inst)
        .into_iter()
        .filter(|v| !v.is_warning())
        .collect();
    if !errors.is_empty() {
        return Err(PipelineError::InvalidInstance(errors));
    }
    let inst = concept.instance(inst);
    let hash = instance_hash(&inst);

    if concept.name == ConceptName::EqualTypeScores {
        return match equal_scores(&inst, config) {
            Ok(r) => {
                let mut rep = report(&inst, &hash, concept, r.matching, Vec::new(), r.stats);
                rep.bonus = Some(r.bonus);
                rep.tie_break = r.tie_break;
                Ok(rep)
            }
            Err(ClassicError::NotFound) => {
                match diagnose_infeasibility(&inst, &SolutionConcept::new(ConceptName::MinDeficiency), config) {
                    Some(stage) => Err(PipelineError::Infeasible { stage }),
                    None => Err(ClassicError::NotFound.into()),
                }
            }
            Err(e) => Err(e.into()),
        };
    }

    let model = concept.build_model(&inst);
    let hint = starting_matching(&inst, concept).map(|m| ipmodel::characteristic_vector(&model, &m));
    let out = solve_lexicographic_from(&model, config, hint.as_deref());
    let labelled = |values: &[i64]| -> Vec<(String, i64)> {
        model
            .objectives
            .iter()
            .zip(values)
            .map(|(o, &v)| (o.kind.to_string(), v))
            .collect()
    };
    match out.status {
        SolveStatus::Optimal => {
            let values = out.assignment.as_deref().expect("optimal outcome has an assignment");
            let m = ipmodel::matching_from_values(&model, inst.n(), values);
            Ok(report(
                &inst,
                &hash,
                concept,
                m,
                labelled(&out.objective_values),
                out.stats,
            ))
        }
        SolveStatus::Infeasible => Err(PipelineError::Infeasible {
            stage: diagnose_infeasibility(&inst, concept, config).unwrap_or(Stage::Concept),
        }),
        SolveStatus::LimitReached => {
            let incumbent = out.assignment.as_deref().map(|values| {
                let m = ipmodel::matching_from_values(&model, inst.n(), values);
                Box::new(report(
                    &inst,
                    &hash,
                    concept,
                    m,
                    labelled(&out.objective_values),
                    out.stats,
                ))
            });
            Err(PipelineError::LimitReached { incumbent })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComparisonRow {
    pub concept: String,
    pub result: Result<SolveReport, PipelineError>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Comparison {
    pub instance_hash: String,
    pub type_names: Vec<String>,
    pub rows: Vec<ComparisonRow>,
}

/// Solves every concept on the same instance, one row each.
pub fn compare_concepts(inst: &Instance, concepts: &[SolutionConcept], config: &SolverConfig) -> Comparison {
    let rows = concepts
        .iter()
        .map(|c| ComparisonRow {
            concept: c.label(),
            result: solve_concept(inst, c, config),
        })
        .collect();
    Comparison {
        instance_hash: instance_hash(inst),
        type_names: inst.type_names.clone(),
        rows,
    }
}

fn half(v: i64) -> String {
    crate::instance::Score(v).to_string()
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "instance {}", self.instance_hash)?;
        writeln!(
            f,
            "{:<28} {:<30} {:>6} {:>9} {:>8} {:>8} {:>6} {:>6}",
            "concept", "profile (all/per type)", "rank", "unmatched", "wt-envy", "x-envy", "block", "osb"
        )?;
        for row in &self.rows {
            match &row.result {
                Ok(r) => {
                    let d = &r.diagnostics;
                    let profile: Vec<String> = d
                        .profile
                        .iter()
                        .map(|p| {
                            let per: Vec<String> = p.per_type.iter().map(|k| k.to_string()).collect();
                            format!("{}/{}", p.total, per.join(":"))
                        })
                        .collect();
                    writeln!(
                        f,
                        "{:<28} {:<30} {:>6} {:>9} {:>8} {:>8} {:>6} {:>6}",
                        row.concept,
                        profile.join(" "),
                        d.total_rank,
                        d.unmatched,
                        format!("{}({})", d.within_type_envies, half(d.within_type_intensity)),
                        format!("{}({})", d.cross_type_envies, half(d.cross_type_intensity)),
                        d.blocking_pairs,
                        d.open_slot_blockings
                    )?;
                }
                Err(e) => writeln!(f, "{:<28} {}", row.concept, e)?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples::{ex_a, ex_b};
    use crate::instance::{ApplicantId, CompanyId, InstanceBuilder};

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    #[test]
    fn names_round_trip_case_insensitively() {
        for c in ConceptName::ALL {
            assert_eq!(c.as_str().parse::<ConceptName>().unwrap(), c);
            assert_eq!(c.as_str().to_lowercase().parse::<ConceptName>().unwrap(), c);
        }
        assert!("MinRank".parse::<ConceptName>().is_err());
    }

    #[test]
    fn ex_a_min_rank_stable_prefers_complete() {
        let r = solve_concept(&ex_a(), &ConceptName::MinRankStable.into(), &cfg()).unwrap();
        assert_eq!(r.matching, Matching::from_pairs(2, &[(0, 0), (1, 1)]));
        assert_eq!(r.diagnostics.total_rank, 3);

        let mut c = SolutionConcept::new(ConceptName::MinRankStable);
        c.prefer_complete = false;
        let r = solve_concept(&ex_a(), &c, &cfg()).unwrap();
        assert_eq!(r.matching, Matching::from_pairs(2, &[(1, 0)]));
    }

    #[test]
    fn ex_b_stable_concepts_agree() {
        let unique = Matching::from_pairs(5, &[(0, 1), (1, 2), (3, 0)]);
        for name in [
            ConceptName::MinRankStable,
            ConceptName::MinDeficiency,
            ConceptName::AlmostStable,
        ] {
            let r = solve_concept(&ex_b(), &name.into(), &cfg()).unwrap();
            assert_eq!(r.matching, unique, "{name}");
        }
    }

    #[test]
    fn lower_quota_kills_stability_but_not_envy_freeness() {
        let inst = InstanceBuilder::new()
            .company(0, 1)
            .company(1, 1)
            .applicant(0, &[(0, 8)])
            .applicant(0, &[(0, 12), (1, 12)])
            .build();
        let cmp = compare_concepts(
            &inst,
            &[ConceptName::MinRankStable.into(), ConceptName::MinRankEf.into()],
            &cfg(),
        );
        assert_eq!(
            cmp.rows[0].result,
            Err(PipelineError::Infeasible { stage: Stage::Concept })
        );
        let r = cmp.rows[1].result.as_ref().unwrap();
        assert_eq!(r.matching.company_of(ApplicantId(1)), Some(CompanyId(1)));
        assert!(cmp.to_string().contains("MinRank-EF"));
    }

    #[test]
    fn staged_diagnosis_reports_lower_quotas() {
        let inst = InstanceBuilder::new().company(2, 2).applicant(0, &[(0, 2)]).build();
        let err = solve_concept(&inst, &ConceptName::MinRankEf.into(), &cfg()).unwrap_err();
        assert_eq!(
            err,
            PipelineError::Infeasible {
                stage: Stage::LowerQuotas
            }
        );
    }

    #[test]
    fn diagnostics_profile_sums_to_size() {
        let r = solve_concept(&ex_b(), &ConceptName::MinRankStable.into(), &cfg()).unwrap();
        let total: usize = r.diagnostics.profile.iter().map(|p| p.total).sum();
        assert_eq!(total, r.matching.size());
        for p in &r.diagnostics.profile {
            assert_eq!(p.per_type.iter().sum::<usize>(), p.total);
        }
    }

    #[test]
    fn equal_type_scores_on_two_types() {
        let mut inst = ex_b();
        inst.global_type_lower.insert(TypeTag(0), 2);
        inst.global_type_upper.insert(TypeTag(0), 2);
        inst.global_type_lower.insert(TypeTag(1), 1);
        inst.global_type_upper.insert(TypeTag(1), 1);
        let r = solve_concept(&inst, &ConceptName::EqualTypeScores.into(), &cfg()).unwrap();
        assert!(check_feasible(&inst, &r.matching, QuotaMode::WithGlobalTypes)
            .unwrap()
            .is_empty());
        assert_eq!(r.bonus.as_ref().unwrap().len(), 2);
    }
}
