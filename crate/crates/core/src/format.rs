//! On-disk formats: TOML instance files and JSON or tabular matching files.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use toml::Spanned;

use crate::checks::{check_matching, MatchingError};
use crate::instance::{Applicant, ApplicantId, Choice, Company, CompanyId, Instance, Matching, Score, TypeTag};
use crate::pipelines::{CompanyProfile, Diagnostics, SolveReport};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{}field `{field}`: {message}", .line.map(|l| format!("line {l}, ")).unwrap_or_default())]
    Field {
        field: String,
        line: Option<usize>,
        message: String,
    },
    #[error(transparent)]
    Matching(#[from] MatchingError),
}

fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

fn field_err(field: impl Into<String>, line: Option<usize>, message: impl Into<String>) -> FormatError {
    FormatError::Field {
        field: field.into(),
        line,
        message: message.into(),
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDoc {
    #[serde(default)]
    types: Vec<String>,
    #[serde(default)]
    applicants: Vec<ApplicantRec>,
    #[serde(default)]
    companies: Vec<CompanyRec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    global_quotas: Vec<GlobalRec>,
    #[serde(default)]
    scores: Vec<ScoreRec>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ApplicantRec {
    name: Spanned<String>,
    #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
    ty: Option<Spanned<String>>,
    prefs: Vec<Spanned<String>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CompanyRec {
    name: Spanned<String>,
    #[serde(default)]
    lower: u32,
    upper: u32,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    type_lower: BTreeMap<String, u32>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    type_upper: BTreeMap<String, u32>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GlobalRec {
    #[serde(rename = "type")]
    ty: Spanned<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lower: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    upper: Option<u32>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScoreRec {
    applicant: Spanned<String>,
    company: Spanned<String>,
    score: Spanned<f64>,
}

fn spanned<T>(v: T) -> Spanned<T> {
    Spanned::new(0..0, v)
}

/// Parses an instance file. Structural problems (unknown names, bad score
/// fractions, missing or duplicate scores) are errors; quota consistency is
/// left to validation.
pub fn parse_instance(src: &str) -> Result<Instance, FormatError> {
    let doc: InstanceDoc = toml::from_str(src).map_err(|e| FormatError::Syntax {
        line: e.span().map_or(1, |s| line_of(src, s.start)),
        message: e.message().to_string(),
    })?;
    let at = |span: std::ops::Range<usize>| Some(line_of(src, span.start));

    let type_names = if doc.types.is_empty() {
        vec!["T1".to_string()]
    } else {
        doc.types.clone()
    };
    let mut type_index: HashMap<&str, TypeTag> = HashMap::new();
    for (k, t) in type_names.iter().enumerate() {
        if type_index.insert(t.as_str(), TypeTag(k)).is_some() {
            return Err(field_err(format!("types[{k}]"), None, format!("duplicate type `{t}`")));
        }
    }
    let lookup_type = |name: &Spanned<String>, field: String| {
        type_index
            .get(name.get_ref().as_str())
            .copied()
            .ok_or_else(|| field_err(field, at(name.span()), format!("unknown type `{}`", name.get_ref())))
    };

    let mut company_index: HashMap<String, CompanyId> = HashMap::new();
    let mut companies = Vec::new();
    for (j, rec) in doc.companies.iter().enumerate() {
        let name = rec.name.get_ref().clone();
        if company_index.insert(name.clone(), CompanyId(j)).is_some() {
            return Err(field_err(
                format!("companies[{j}].name"),
                at(rec.name.span()),
                format!("duplicate company `{name}`"),
            ));
        }
        let mut c = Company::new(name, rec.lower, rec.upper);
        for (map, out, label) in [
            (&rec.type_lower, &mut c.type_lower, "type_lower"),
            (&rec.type_upper, &mut c.type_upper, "type_upper"),
        ] {
            for (t, &v) in map {
                let ty = type_index.get(t.as_str()).copied().ok_or_else(|| {
                    field_err(
                        format!("companies[{j}].{label}.{t}"),
                        at(rec.name.span()),
                        format!("unknown type `{t}`"),
                    )
                })?;
                out.insert(ty, v);
            }
        }
        companies.push(c);
    }

    let mut scores: HashMap<(String, String), (Score, usize)> = HashMap::new();
    for (k, rec) in doc.scores.iter().enumerate() {
        let field = format!("scores[{k}].score");
        let value = *rec.score.get_ref();
        let score = Score::from_decimal(value).ok_or_else(|| {
            field_err(
                field.clone(),
                at(rec.score.span()),
                format!("{value} is not a whole or half point"),
            )
        })?;
        let key = (rec.applicant.get_ref().clone(), rec.company.get_ref().clone());
        if scores.insert(key.clone(), (score, k)).is_some() {
            return Err(field_err(
                format!("scores[{k}]"),
                at(rec.applicant.span()),
                format!("duplicate score for ({}, {})", key.0, key.1),
            ));
        }
    }

    let mut applicants = Vec::new();
    let mut used = vec![false; doc.scores.len()];
    let mut applicant_names: HashMap<&str, usize> = HashMap::new();
    for (i, rec) in doc.applicants.iter().enumerate() {
        let name = rec.name.get_ref();
        if applicant_names.insert(name.as_str(), i).is_some() {
            return Err(field_err(
                format!("applicants[{i}].name"),
                at(rec.name.span()),
                format!("duplicate applicant `{name}`"),
            ));
        }
        let ty = match &rec.ty {
            Some(t) => lookup_type(t, format!("applicants[{i}].type"))?,
            None if type_names.len() == 1 => TypeTag(0),
            None => {
                return Err(field_err(
                    format!("applicants[{i}].type"),
                    at(rec.name.span()),
                    "missing type",
                ))
            }
        };
        let mut choices = Vec::new();
        for (r, p) in rec.prefs.iter().enumerate() {
            let field = format!("applicants[{i}].prefs[{r}]");
            let company = *company_index.get(p.get_ref()).ok_or_else(|| {
                field_err(
                    field.clone(),
                    at(p.span()),
                    format!("unknown company `{}`", p.get_ref()),
                )
            })?;
            let &(score, k) = scores
                .get(&(name.clone(), p.get_ref().clone()))
                .ok_or_else(|| field_err(field, at(p.span()), format!("no score for ({name}, {})", p.get_ref())))?;
            used[k] = true;
            choices.push(Choice { company, score });
        }
        applicants.push(Applicant {
            name: name.clone(),
            ty,
            choices,
        });
    }
    if let Some(k) = used.iter().position(|u| !u) {
        let rec = &doc.scores[k];
        return Err(field_err(
            format!("scores[{k}]"),
            at(rec.applicant.span()),
            format!(
                "({}, {}) is not an application",
                rec.applicant.get_ref(),
                rec.company.get_ref()
            ),
        ));
    }

    let mut global_type_lower = BTreeMap::new();
    let mut global_type_upper = BTreeMap::new();
    for (k, rec) in doc.global_quotas.iter().enumerate() {
        let ty = lookup_type(&rec.ty, format!("global_quotas[{k}].type"))?;
        if let Some(l) = rec.lower {
            global_type_lower.insert(ty, l);
        }
        if let Some(u) = rec.upper {
            global_type_upper.insert(ty, u);
        }
    }

    Ok(Instance {
        type_names,
        applicants,
        companies,
        global_type_lower,
        global_type_upper,
    })
}

/// Canonical text of an instance; `parse_instance` inverts it exactly.
pub fn emit_instance(inst: &Instance) -> String {
    let type_name = |t: &TypeTag| inst.type_names[t.0].clone();
    let names = |m: &BTreeMap<TypeTag, u32>| m.iter().map(|(t, &v)| (type_name(t), v)).collect();
    let global_types: std::collections::BTreeSet<TypeTag> = inst
        .global_type_lower
        .keys()
        .chain(inst.global_type_upper.keys())
        .copied()
        .collect();
    let doc = InstanceDoc {
        types: inst.type_names.clone(),
        applicants: inst
            .applicants
            .iter()
            .map(|a| ApplicantRec {
                name: spanned(a.name.clone()),
                ty: Some(spanned(type_name(&a.ty))),
                prefs: a
                    .choices
                    .iter()
                    .map(|ch| spanned(inst.companies[ch.company.0].name.clone()))
                    .collect(),
            })
            .collect(),
        companies: inst
            .companies
            .iter()
            .map(|c| CompanyRec {
                name: spanned(c.name.clone()),
                lower: c.lower,
                upper: c.upper,
                type_lower: names(&c.type_lower),
                type_upper: names(&c.type_upper),
            })
            .collect(),
        global_quotas: global_types
            .into_iter()
            .map(|t| GlobalRec {
                ty: spanned(type_name(&t)),
                lower: inst.global_type_lower.get(&t).copied(),
                upper: inst.global_type_upper.get(&t).copied(),
            })
            .collect(),
        scores: inst
            .applications()
            .map(|e| ScoreRec {
                applicant: spanned(inst.applicant(e.applicant).name.clone()),
                company: spanned(inst.company(e.company).name.clone()),
                score: spanned(e.score.as_points()),
            })
            .collect(),
    };
    toml::to_string(&doc).expect("instance documents always serialise")
}

/// Hex SHA-256 of the canonical text.
pub fn instance_hash(inst: &Instance) -> String {
    hex::encode(Sha256::digest(emit_instance(inst).as_bytes()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub applicant: String,
    pub company: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileRecord {
    pub company: String,
    pub total: usize,
    pub per_type: BTreeMap<String, usize>,
}

/// Diagnostics as written to matching files; intensities in points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub profile: Vec<ProfileRecord>,
    pub matched: usize,
    pub unmatched: usize,
    pub total_rank: u64,
    pub within_type_envies: usize,
    pub within_type_intensity: f64,
    pub cross_type_envies: usize,
    pub cross_type_intensity: f64,
    pub blocking_pairs: usize,
    pub open_slot_blockings: usize,
    pub deficiency: u64,
}

impl DiagnosticsRecord {
    pub fn new(inst: &Instance, d: &Diagnostics) -> Self {
        let profile = d
            .profile
            .iter()
            .map(|p: &CompanyProfile| ProfileRecord {
                company: p.company.clone(),
                total: p.total,
                per_type: inst
                    .type_names
                    .iter()
                    .cloned()
                    .zip(p.per_type.iter().copied())
                    .collect(),
            })
            .collect();
        DiagnosticsRecord {
            profile,
            matched: d.matched,
            unmatched: d.unmatched,
            total_rank: d.total_rank,
            within_type_envies: d.within_type_envies,
            within_type_intensity: Score(d.within_type_intensity).as_points(),
            cross_type_envies: d.cross_type_envies,
            cross_type_intensity: Score(d.cross_type_intensity).as_points(),
            blocking_pairs: d.blocking_pairs,
            open_slot_blockings: d.open_slot_blockings,
            deficiency: d.deficiency,
        }
    }

    /// Names of the fields that differ from `other`.
    pub fn differences(&self, other: &DiagnosticsRecord) -> Vec<String> {
        let mut out = Vec::new();
        let mut cmp = |name: &str, same: bool| {
            if !same {
                out.push(name.to_string());
            }
        };
        cmp("profile", self.profile == other.profile);
        cmp("matched", self.matched == other.matched);
        cmp("unmatched", self.unmatched == other.unmatched);
        cmp("total_rank", self.total_rank == other.total_rank);
        cmp(
            "within_type_envies",
            self.within_type_envies == other.within_type_envies,
        );
        cmp(
            "within_type_intensity",
            self.within_type_intensity == other.within_type_intensity,
        );
        cmp("cross_type_envies", self.cross_type_envies == other.cross_type_envies);
        cmp(
            "cross_type_intensity",
            self.cross_type_intensity == other.cross_type_intensity,
        );
        cmp("blocking_pairs", self.blocking_pairs == other.blocking_pairs);
        cmp(
            "open_slot_blockings",
            self.open_slot_blockings == other.open_slot_blockings,
        );
        cmp("deficiency", self.deficiency == other.deficiency);
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveRecord {
    pub name: String,
    pub value: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchingFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concept: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance_hash: Option<String>,
    pub pairs: Vec<PairRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<DiagnosticsRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub objectives: Vec<ObjectiveRecord>,
    /// Per-type bonus in points, for the equal-score concept.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bonus: Option<BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<u64>,
}

impl MatchingFile {
    pub fn from_matching(inst: &Instance, m: &Matching) -> Self {
        MatchingFile {
            concept: None,
            instance_hash: None,
            pairs: pair_records(inst, m),
            diagnostics: Some(DiagnosticsRecord::new(inst, &Diagnostics::compute(inst, m))),
            objectives: Vec::new(),
            bonus: None,
            nodes: None,
        }
    }

    pub fn from_report(inst: &Instance, r: &SolveReport) -> Self {
        MatchingFile {
            concept: Some(r.concept.clone()),
            instance_hash: Some(r.instance_hash.clone()),
            pairs: pair_records(inst, &r.matching),
            diagnostics: Some(DiagnosticsRecord::new(inst, &r.diagnostics)),
            objectives: r
                .objectives
                .iter()
                .map(|(name, value)| ObjectiveRecord {
                    name: name.clone(),
                    value: *value,
                })
                .collect(),
            bonus: r.bonus.as_ref().map(|b| {
                inst.type_names
                    .iter()
                    .cloned()
                    .zip(b.iter().map(|&v| Score(v).as_points()))
                    .collect()
            }),
            nodes: Some(r.stats.nodes),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("matching files always serialise");
        s.push('\n');
        s
    }

    pub fn from_json(src: &str) -> Result<Self, FormatError> {
        serde_json::from_str(src).map_err(|e| FormatError::Syntax {
            line: e.line(),
            message: e.to_string(),
        })
    }

    /// The matching the pairs describe, checked against the instance.
    pub fn matching(&self, inst: &Instance) -> Result<Matching, FormatError> {
        let applicants: HashMap<&str, usize> = inst
            .applicants
            .iter()
            .enumerate()
            .map(|(i, a)| (a.name.as_str(), i))
            .collect();
        let companies: HashMap<&str, usize> = inst
            .companies
            .iter()
            .enumerate()
            .map(|(j, c)| (c.name.as_str(), j))
            .collect();
        let mut m = Matching::empty(inst.n());
        for (k, p) in self.pairs.iter().enumerate() {
            let a = *applicants.get(p.applicant.as_str()).ok_or_else(|| {
                field_err(
                    format!("pairs[{k}].applicant"),
                    None,
                    format!("unknown applicant `{}`", p.applicant),
                )
            })?;
            let c = *companies.get(p.company.as_str()).ok_or_else(|| {
                field_err(
                    format!("pairs[{k}].company"),
                    None,
                    format!("unknown company `{}`", p.company),
                )
            })?;
            if m.company_of(ApplicantId(a)).is_some() {
                return Err(field_err(
                    format!("pairs[{k}]"),
                    None,
                    format!("`{}` assigned twice", p.applicant),
                ));
            }
            m.assign(ApplicantId(a), Some(CompanyId(c)));
        }
        check_matching(inst, &m)?;
        Ok(m)
    }
}

fn pair_records(inst: &Instance, m: &Matching) -> Vec<PairRecord> {
    m.pairs()
        .map(|(a, c)| PairRecord {
            applicant: inst.applicant(a).name.clone(),
            company: inst.company(c).name.clone(),
        })
        .collect()
}

/// Human-readable rendering of a matching file.
pub fn render_table(inst: &Instance, file: &MatchingFile) -> String {
    let mut out = String::new();
    if let Some(c) = &file.concept {
        let _ = writeln!(out, "concept   {c}");
    }
    if let Some(h) = &file.instance_hash {
        let _ = writeln!(out, "instance  {h}");
    }
    let _ = writeln!(
        out,
        "\n{:<12} {:<12} {:<8} {:>5} {:>6}",
        "applicant", "company", "type", "rank", "score"
    );
    let by_name: HashMap<&str, usize> = inst
        .applicants
        .iter()
        .enumerate()
        .map(|(i, a)| (a.name.as_str(), i))
        .collect();
    let comp_by_name: HashMap<&str, usize> = inst
        .companies
        .iter()
        .enumerate()
        .map(|(j, c)| (c.name.as_str(), j))
        .collect();
    for p in &file.pairs {
        let (a, c) = (
            ApplicantId(by_name[p.applicant.as_str()]),
            CompanyId(comp_by_name[p.company.as_str()]),
        );
        let ty = &inst.type_names[inst.type_of(a).0];
        let rank = inst.rank(a, c).map_or("-".into(), |r| r.to_string());
        let score = inst.score(a, c).map_or("-".into(), |s| s.to_string());
        let _ = writeln!(
            out,
            "{:<12} {:<12} {:<8} {:>5} {:>6}",
            p.applicant, p.company, ty, rank, score
        );
    }
    if let Some(d) = &file.diagnostics {
        let _ = writeln!(out, "\n{:<12} {:>5}  per type", "company", "all");
        for p in &d.profile {
            let per: Vec<String> = p.per_type.iter().map(|(t, k)| format!("{t}={k}")).collect();
            let _ = writeln!(out, "{:<12} {:>5}  {}", p.company, p.total, per.join(" "));
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "matched               {}", d.matched);
        let _ = writeln!(out, "unmatched             {}", d.unmatched);
        let _ = writeln!(out, "total rank            {}", d.total_rank);
        let _ = writeln!(
            out,
            "within-type envies    {} ({})",
            d.within_type_envies, d.within_type_intensity
        );
        let _ = writeln!(
            out,
            "cross-type envies     {} ({})",
            d.cross_type_envies, d.cross_type_intensity
        );
        let _ = writeln!(out, "blocking pairs        {}", d.blocking_pairs);
        let _ = writeln!(out, "open-slot blockings   {}", d.open_slot_blockings);
        let _ = writeln!(out, "deficiency            {}", d.deficiency);
    }
    for o in &file.objectives {
        let _ = writeln!(out, "objective {:<12} {}", o.name, o.value);
    }
    if let Some(b) = &file.bonus {
        let parts: Vec<String> = b.iter().map(|(t, v)| format!("{t}={v}")).collect();
        let _ = writeln!(out, "bonus     {}", parts.join(" "));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples::{ex_a, ex_b};

    #[test]
    fn round_trip_examples() {
        for inst in [ex_a(), ex_b()] {
            let text = emit_instance(&inst);
            assert_eq!(parse_instance(&text).unwrap(), inst);
        }
    }

    #[test]
    fn half_points_and_errors() {
        let src = r#"
types = ["local"]

[[applicants]]
name = "a1"
prefs = ["c1"]

[[companies]]
name = "c1"
upper = 1

[[scores]]
applicant = "a1"
company = "c1"
score = 7.5
"#;
        let inst = parse_instance(src).unwrap();
        assert_eq!(inst.score(ApplicantId(0), CompanyId(0)), Some(Score(15)));

        let bad = src.replace("7.5", "7.25");
        match parse_instance(&bad).unwrap_err() {
            FormatError::Field { field, line, .. } => {
                assert_eq!(field, "scores[0].score");
                assert_eq!(line, Some(15));
            }
            e => panic!("unexpected {e}"),
        }

        let missing = src.replace("prefs = [\"c1\"]", "prefs = [\"c1\", \"c2\"]");
        assert!(parse_instance(&missing)
            .unwrap_err()
            .to_string()
            .contains("unknown company `c2`"));

        let syntax = src.replace("upper = 1", "upper = ");
        assert!(matches!(
            parse_instance(&syntax),
            Err(FormatError::Syntax { line: 10, .. })
        ));
    }

    #[test]
    fn matching_file_round_trip() {
        let inst = ex_a();
        let m = Matching::from_pairs(2, &[(0, 0), (1, 1)]);
        let file = MatchingFile::from_matching(&inst, &m);
        let back = MatchingFile::from_json(&file.to_json()).unwrap();
        assert_eq!(back.matching(&inst).unwrap(), m);
        assert_eq!(back.diagnostics.as_ref().unwrap().total_rank, 3);
        assert!(render_table(&inst, &back).contains("total rank            3"));
    }

    #[test]
    fn fabricated_pair_is_rejected() {
        let inst = ex_a();
        let file = MatchingFile {
            concept: None,
            instance_hash: None,
            pairs: vec![PairRecord {
                applicant: "a1".into(),
                company: "c2".into(),
            }],
            diagnostics: None,
            objectives: Vec::new(),
            bonus: None,
            nodes: None,
        };
        assert!(matches!(
            file.matching(&inst),
            Err(FormatError::Matching(MatchingError::UnknownAssignment { .. }))
        ));
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(instance_hash(&ex_b()), instance_hash(&ex_b()));
        assert_ne!(instance_hash(&ex_a()), instance_hash(&ex_b()));
    }
}
