//! Problem representation: applicants, companies, applications and quotas.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! index_newtype {
    ($name:ident, $prefix:literal) => {
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub struct $name(pub usize);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0 + 1)
            }
        }
    };
}

index_newtype!(ApplicantId, "a");
index_newtype!(CompanyId, "c");
index_newtype!(TypeTag, "T");

/// A company's score of an applicant, stored on a doubled scale so that
/// half points stay integral. `Score(15)` is 7.5 points.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Score(pub i64);

impl Score {
    /// Whole points, e.g. `Score::points(5)` is 5.0.
    pub const fn points(p: i64) -> Self {
        Score(2 * p)
    }

    pub const fn doubled(d: i64) -> Self {
        Score(d)
    }

    /// Parses a decimal point value; only `.0` and `.5` fractions are accepted.
    pub fn from_decimal(value: f64) -> Option<Self> {
        if !value.is_finite() {
            return None;
        }
        let twice = value * 2.0;
        if (twice - twice.round()).abs() > 1e-9 {
            return None;
        }
        Some(Score(twice.round() as i64))
    }

    pub fn as_points(self) -> f64 {
        self.0 as f64 / 2.0
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 % 2 == 0 {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{:.1}", self.as_points())
        }
    }
}

/// One entry of an applicant's preference list together with the score the
/// listed company gave the applicant.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Choice {
    pub company: CompanyId,
    pub score: Score,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Applicant {
    pub name: String,
    pub ty: TypeTag,
    /// Most preferred first; the rank of `choices[k]` is `k + 1`.
    pub choices: Vec<Choice>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Company {
    pub name: String,
    pub lower: u32,
    pub upper: u32,
    pub type_lower: BTreeMap<TypeTag, u32>,
    pub type_upper: BTreeMap<TypeTag, u32>,
}

impl Company {
    pub fn new(name: impl Into<String>, lower: u32, upper: u32) -> Self {
        Company {
            name: name.into(),
            lower,
            upper,
            type_lower: BTreeMap::new(),
            type_upper: BTreeMap::new(),
        }
    }

    pub fn type_lower(&self, ty: TypeTag) -> u32 {
        self.type_lower.get(&ty).copied().unwrap_or(0)
    }

    /// Per-type upper bound, falling back to the overall upper quota.
    pub fn type_upper(&self, ty: TypeTag) -> u32 {
        self.type_upper.get(&ty).copied().unwrap_or(self.upper).min(self.upper)
    }
}

/// An application `(a_i, c_j)` in `E`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Application {
    pub applicant: ApplicantId,
    pub company: CompanyId,
    /// 1-based position in the applicant's list.
    pub rank: u32,
    pub score: Score,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub type_names: Vec<String>,
    pub applicants: Vec<Applicant>,
    pub companies: Vec<Company>,
    pub global_type_lower: BTreeMap<TypeTag, u32>,
    pub global_type_upper: BTreeMap<TypeTag, u32>,
}

impl Instance {
    pub fn n(&self) -> usize {
        self.applicants.len()
    }

    pub fn m(&self) -> usize {
        self.companies.len()
    }

    pub fn num_types(&self) -> usize {
        self.type_names.len().max(1)
    }

    pub fn applicant_ids(&self) -> impl Iterator<Item = ApplicantId> + '_ {
        (0..self.applicants.len()).map(ApplicantId)
    }

    pub fn company_ids(&self) -> impl Iterator<Item = CompanyId> + '_ {
        (0..self.companies.len()).map(CompanyId)
    }

    pub fn type_tags(&self) -> impl Iterator<Item = TypeTag> {
        (0..self.num_types()).map(TypeTag)
    }

    pub fn applicant(&self, a: ApplicantId) -> &Applicant {
        &self.applicants[a.0]
    }

    pub fn company(&self, c: CompanyId) -> &Company {
        &self.companies[c.0]
    }

    pub fn type_of(&self, a: ApplicantId) -> TypeTag {
        self.applicants[a.0].ty
    }

    /// All applications in applicant order, then preference order.
    pub fn applications(&self) -> impl Iterator<Item = Application> + '_ {
        self.applicants.iter().enumerate().flat_map(|(i, app)| {
            app.choices.iter().enumerate().map(move |(k, ch)| Application {
                applicant: ApplicantId(i),
                company: ch.company,
                rank: k as u32 + 1,
                score: ch.score,
            })
        })
    }

    pub fn num_applications(&self) -> usize {
        self.applicants.iter().map(|a| a.choices.len()).sum()
    }

    pub fn application(&self, a: ApplicantId, c: CompanyId) -> Option<Application> {
        let app = self.applicants.get(a.0)?;
        app.choices.iter().position(|ch| ch.company == c).map(|k| Application {
            applicant: a,
            company: c,
            rank: k as u32 + 1,
            score: app.choices[k].score,
        })
    }

    pub fn rank(&self, a: ApplicantId, c: CompanyId) -> Option<u32> {
        self.applicants[a.0]
            .choices
            .iter()
            .position(|ch| ch.company == c)
            .map(|k| k as u32 + 1)
    }

    pub fn score(&self, a: ApplicantId, c: CompanyId) -> Option<Score> {
        self.applicants[a.0]
            .choices
            .iter()
            .find(|ch| ch.company == c)
            .map(|ch| ch.score)
    }

    /// Applicants that listed `c`, in applicant order.
    pub fn applicants_of(&self, c: CompanyId) -> Vec<(ApplicantId, Score)> {
        self.applicant_ids()
            .filter_map(|a| self.score(a, c).map(|s| (a, s)))
            .collect()
    }

    /// Instance-wide maximum score (doubled scale); zero when `E` is empty.
    pub fn max_score(&self) -> Score {
        self.applications().map(|a| a.score).max().unwrap_or_default()
    }

    pub fn type_population(&self, ty: TypeTag) -> usize {
        self.applicants.iter().filter(|a| a.ty == ty).count()
    }

    pub fn global_lower(&self, ty: TypeTag) -> u32 {
        self.global_type_lower.get(&ty).copied().unwrap_or(0)
    }

    pub fn global_upper(&self, ty: TypeTag) -> Option<u32> {
        self.global_type_upper.get(&ty).copied()
    }

    /// True when every applicant lists every company.
    pub fn is_complete_bipartite(&self) -> bool {
        self.applicants.iter().all(|a| {
            let mut seen = vec![false; self.m()];
            for ch in &a.choices {
                if ch.company.0 < seen.len() {
                    seen[ch.company.0] = true;
                }
            }
            seen.into_iter().all(|s| s)
        })
    }

    /// True when no company has two applicants with equal scores.
    pub fn is_strict(&self) -> bool {
        self.company_ids().all(|c| {
            let mut scores: Vec<Score> = self.applicants_of(c).into_iter().map(|(_, s)| s).collect();
            scores.sort_unstable();
            scores.windows(2).all(|w| w[0] != w[1])
        })
    }

    /// Replaces every company's upper and/or lower quota, clamping per-type
    /// bounds so they stay below the new upper quota.
    pub fn with_quota_overrides(&self, upper: Option<u32>, lower: Option<u32>) -> Instance {
        let mut out = self.clone();
        for c in &mut out.companies {
            if let Some(u) = upper {
                c.upper = u;
                for v in c.type_upper.values_mut() {
                    *v = (*v).min(u);
                }
                for v in c.type_lower.values_mut() {
                    *v = (*v).min(u);
                }
            }
            if let Some(l) = lower {
                c.lower = l;
            }
        }
        out
    }
}

/// Incremental construction of instances, used by tests, the generator and
/// the file parser.
#[derive(Clone, Debug, Default)]
pub struct InstanceBuilder {
    inst: Option<Instance>,
}

impl InstanceBuilder {
    pub fn new() -> Self {
        InstanceBuilder {
            inst: Some(Instance {
                type_names: vec!["T1".to_string()],
                applicants: Vec::new(),
                companies: Vec::new(),
                global_type_lower: BTreeMap::new(),
                global_type_upper: BTreeMap::new(),
            }),
        }
    }

    fn inst(&mut self) -> &mut Instance {
        self.inst.as_mut().expect("builder already consumed")
    }

    pub fn types<S: AsRef<str>>(mut self, names: &[S]) -> Self {
        self.inst().type_names = names.iter().map(|s| s.as_ref().to_string()).collect();
        self
    }

    pub fn company(mut self, lower: u32, upper: u32) -> Self {
        let name = format!("c{}", self.inst().companies.len() + 1);
        self.inst().companies.push(Company::new(name, lower, upper));
        self
    }

    pub fn company_type_quota(mut self, c: usize, ty: usize, lower: u32, upper: Option<u32>) -> Self {
        let comp = &mut self.inst().companies[c];
        if lower > 0 {
            comp.type_lower.insert(TypeTag(ty), lower);
        }
        if let Some(u) = upper {
            comp.type_upper.insert(TypeTag(ty), u);
        }
        self
    }

    /// Adds an applicant of type `ty` with `(company index, doubled score)`
    /// choices in preference order.
    pub fn applicant(mut self, ty: usize, choices: &[(usize, i64)]) -> Self {
        let name = format!("a{}", self.inst().applicants.len() + 1);
        self.inst().applicants.push(Applicant {
            name,
            ty: TypeTag(ty),
            choices: choices
                .iter()
                .map(|&(c, s)| Choice {
                    company: CompanyId(c),
                    score: Score(s),
                })
                .collect(),
        });
        self
    }

    pub fn global_quota(mut self, ty: usize, lower: u32, upper: Option<u32>) -> Self {
        if lower > 0 {
            self.inst().global_type_lower.insert(TypeTag(ty), lower);
        }
        if let Some(u) = upper {
            self.inst().global_type_upper.insert(TypeTag(ty), u);
        }
        self
    }

    pub fn build(mut self) -> Instance {
        self.inst.take().expect("builder already consumed")
    }
}

/// A partial assignment of applicants to companies.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Matching {
    assignment: Vec<Option<CompanyId>>,
}

impl Matching {
    pub fn empty(n: usize) -> Self {
        Matching {
            assignment: vec![None; n],
        }
    }

    pub fn from_pairs(n: usize, pairs: &[(usize, usize)]) -> Self {
        let mut m = Matching::empty(n);
        for &(a, c) in pairs {
            m.assign(ApplicantId(a), Some(CompanyId(c)));
        }
        m
    }

    pub fn from_assignment(assignment: Vec<Option<CompanyId>>) -> Self {
        Matching { assignment }
    }

    pub fn assign(&mut self, a: ApplicantId, c: Option<CompanyId>) {
        self.assignment[a.0] = c;
    }

    pub fn company_of(&self, a: ApplicantId) -> Option<CompanyId> {
        self.assignment.get(a.0).copied().flatten()
    }

    pub fn num_applicants(&self) -> usize {
        self.assignment.len()
    }

    pub fn size(&self) -> usize {
        self.assignment.iter().filter(|c| c.is_some()).count()
    }

    pub fn assignment(&self) -> &[Option<CompanyId>] {
        &self.assignment
    }

    /// Assigned pairs in applicant order.
    pub fn pairs(&self) -> impl Iterator<Item = (ApplicantId, CompanyId)> + '_ {
        self.assignment
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.map(|c| (ApplicantId(i), c)))
    }

    pub fn assignees(&self, c: CompanyId) -> Vec<ApplicantId> {
        self.pairs().filter(|&(_, d)| d == c).map(|(a, _)| a).collect()
    }

    pub fn fill(&self, c: CompanyId) -> usize {
        self.assignment.iter().filter(|&&d| d == Some(c)).count()
    }

    pub fn fills(&self, m: usize) -> Vec<usize> {
        let mut out = vec![0; m];
        for c in self.assignment.iter().flatten() {
            if c.0 < m {
                out[c.0] += 1;
            }
        }
        out
    }
}

impl fmt::Display for Matching {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, (a, c)) in self.pairs().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{a}{c}")?;
        }
        write!(f, "}}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_decimal_parsing() {
        assert_eq!(Score::from_decimal(7.5), Some(Score(15)));
        assert_eq!(Score::from_decimal(3.0), Some(Score::points(3)));
        assert_eq!(Score::from_decimal(3.25), None);
        assert_eq!(Score(15).to_string(), "7.5");
        assert_eq!(Score(14).to_string(), "7");
    }

    #[test]
    fn ranks_and_lookups() {
        let inst = InstanceBuilder::new()
            .company(0, 1)
            .company(0, 1)
            .applicant(0, &[(0, 2)])
            .applicant(0, &[(0, 2), (1, 4)])
            .build();
        assert_eq!(inst.rank(ApplicantId(1), CompanyId(1)), Some(2));
        assert_eq!(inst.score(ApplicantId(0), CompanyId(1)), None);
        assert_eq!(inst.num_applications(), 3);
        assert_eq!(inst.max_score(), Score(4));
        assert!(!inst.is_strict());
        assert!(!inst.is_complete_bipartite());
    }

    #[test]
    fn matching_display_and_fill() {
        let m = Matching::from_pairs(3, &[(0, 0), (2, 0)]);
        assert_eq!(m.to_string(), "{a1c1, a3c1}");
        assert_eq!(m.fill(CompanyId(0)), 2);
        assert_eq!(m.size(), 2);
    }
}
