//! Seeded random instances: small markets for property tests and
//! application-shaped markets for benchmarks.

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::instance::{Applicant, Choice, Company, CompanyId, Instance, Score, TypeTag};

#[derive(Clone, Debug, PartialEq)]
pub enum QuotaProfile {
    /// Every company gets `(lower, upper)`; no type quotas.
    Uniform { lower: u32, upper: u32 },
    /// 25 applicants (5 foreign), 5 companies with quotas (4, 6) and at most
    /// 2 foreign students each.
    Shape2016,
    /// 40 applicants (13 foreign), 8 companies with quotas (3, 6) and at
    /// least one foreign student each.
    Shape2017,
    /// 63 applicants (29 Hungarian, 15 regional, 19 other), 3 companies
    /// with 16/22/22 seats, at least 8 Hungarians at the first company and
    /// exact totals 25/12/10 per type.
    Workshop,
    /// Random type lower quotas that satisfy the assumptions of the complete
    /// within-type envy-free construction. Requires full lists.
    TypeLowerFeasible,
    /// Two types with exact global quotas `first` and `capacity - first`,
    /// unit-free random capacities with `m <= n`. Requires full lists.
    TwoTypeExact { first: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenParams {
    pub n: usize,
    pub m: usize,
    /// Applicants per type; must sum to `n`.
    pub type_counts: Vec<usize>,
    pub type_names: Vec<String>,
    /// Whole-point score range (inclusive).
    pub score_min: i64,
    pub score_max: i64,
    /// Chance that a drawn score gets an extra half point.
    pub half_point_prob: f64,
    /// 0 gives distinct scores per company where the grid allows it; larger
    /// values coarsen the score grid and so create ties.
    pub tie_density: f64,
    pub quotas: QuotaProfile,
    /// Every applicant lists every company.
    pub full_lists: bool,
    /// List length when lists are partial.
    pub list_len: usize,
    /// Skews preferences towards low-index companies; 0 is uniform.
    pub popularity: f64,
    /// Seats per company already filled before matching (workshop shape).
    pub preselected: Vec<u32>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
}

impl GenParams {
    /// `n` single-type applicants, `m` companies with quotas `(0, 1)`, full
    /// lists and distinct scores.
    pub fn small(n: usize, m: usize, seed: u64) -> Self {
        GenParams {
            n,
            m,
            type_counts: vec![n],
            type_names: vec!["T1".into()],
            score_min: 1,
            score_max: 10,
            half_point_prob: 0.3,
            tie_density: 0.0,
            quotas: QuotaProfile::Uniform { lower: 0, upper: 1 },
            full_lists: true,
            list_len: m,
            popularity: 0.0,
            preselected: Vec::new(),
            seed,
        }
    }

    pub fn with_types(mut self, counts: &[usize]) -> Self {
        self.type_counts = counts.to_vec();
        self.type_names = (1..=counts.len()).map(|k| format!("T{k}")).collect();
        self.n = counts.iter().sum();
        self
    }

    pub fn shape_2016(seed: u64) -> Self {
        let mut p = GenParams::small(25, 5, seed).with_types(&[20, 5]);
        p.type_names = vec!["local".into(), "foreign".into()];
        p.quotas = QuotaProfile::Shape2016;
        p.half_point_prob = 0.1;
        p.tie_density = 0.3;
        p.popularity = 0.5;
        p
    }

    pub fn shape_2017(seed: u64) -> Self {
        let mut p = GenParams::small(40, 8, seed).with_types(&[27, 13]);
        p.type_names = vec!["local".into(), "foreign".into()];
        p.quotas = QuotaProfile::Shape2017;
        p.half_point_prob = 0.1;
        p.tie_density = 0.3;
        p.popularity = 0.5;
        p
    }

    /// Seats are net of the pre-selected participants, split 3/5/5; scores
    /// are whole points.
    pub fn workshop(seed: u64) -> Self {
        let mut p = GenParams::small(63, 3, seed).with_types(&[29, 15, 19]);
        p.type_names = vec!["hungarian".into(), "regional".into(), "other".into()];
        p.quotas = QuotaProfile::Workshop;
        p.half_point_prob = 0.0;
        p.tie_density = 0.05;
        p.preselected = vec![3, 5, 5];
        p
    }
}

fn score_grid(params: &GenParams) -> Vec<i64> {
    let levels: Vec<i64> = (params.score_min..=params.score_max).map(|p| 2 * p).collect();
    if params.tie_density <= 0.0 {
        return (2 * params.score_min..=2 * params.score_max).collect();
    }
    let keep = ((levels.len() as f64) * (1.0 - params.tie_density)).round().max(1.0) as usize;
    if keep >= levels.len() {
        return levels;
    }
    (0..keep)
        .map(|k| {
            let pos = if keep == 1 {
                0
            } else {
                k * (levels.len() - 1) / (keep - 1)
            };
            levels[pos]
        })
        .collect()
}

fn draw_scores(params: &GenParams, rng: &mut ChaCha8Rng) -> Vec<Vec<i64>> {
    let grid = score_grid(params);
    let top = 2 * params.score_max;
    let mut by_company = vec![vec![0i64; params.n]; params.m];
    for row in &mut by_company {
        if params.tie_density <= 0.0 && params.n <= grid.len() {
            for (i, k) in sample(rng, grid.len(), params.n).into_iter().enumerate() {
                row[i] = grid[k];
            }
        } else {
            for s in row.iter_mut() {
                let mut v = grid[rng.gen_range(0..grid.len())];
                if params.tie_density > 0.0 && v < top && rng.gen_bool(params.half_point_prob) {
                    v += 1;
                }
                *s = v;
            }
        }
    }
    by_company
}

fn draw_preferences(params: &GenParams, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let len = if params.full_lists {
        params.m
    } else {
        params.list_len.min(params.m)
    };
    (0..params.n)
        .map(|_| {
            let mut remaining: Vec<usize> = (0..params.m).collect();
            let mut list = Vec::with_capacity(len);
            while list.len() < len {
                let weights: Vec<f64> = remaining
                    .iter()
                    .map(|&j| 1.0 / (1.0 + params.popularity * j as f64))
                    .collect();
                let k = WeightedIndex::new(&weights).expect("positive weights").sample(rng);
                list.push(remaining.remove(k));
            }
            list
        })
        .collect()
}

fn bad(msg: impl Into<String>) -> GenError {
    GenError::InvalidParams(msg.into())
}

fn shape_dims(params: &GenParams) -> Option<(usize, usize, Vec<usize>)> {
    match params.quotas {
        QuotaProfile::Shape2016 => Some((25, 5, vec![20, 5])),
        QuotaProfile::Shape2017 => Some((40, 8, vec![27, 13])),
        QuotaProfile::Workshop => Some((63, 3, vec![29, 15, 19])),
        _ => None,
    }
}

/// Builds the instance described by `params`; the same parameters always
/// give the same instance.
pub fn generate(params: &GenParams) -> Result<Instance, GenError> {
    if let Some((n, m, counts)) = shape_dims(params) {
        if params.n != n || params.m != m || params.type_counts != counts {
            return Err(bad(format!("shape requires n={n}, m={m}, type counts {counts:?}")));
        }
    }
    if params.type_counts.is_empty() || params.type_counts.iter().sum::<usize>() != params.n {
        return Err(bad("type counts must be non-empty and sum to n"));
    }
    if params.type_names.len() != params.type_counts.len() {
        return Err(bad("one name per type required"));
    }
    if params.score_min < 0 || params.score_min > params.score_max {
        return Err(bad("score range must be non-negative and non-empty"));
    }
    if !(0.0..=1.0).contains(&params.half_point_prob) || !(0.0..1.0).contains(&params.tie_density) {
        return Err(bad(
            "probabilities must lie in [0, 1) for tie density and [0, 1] for half points",
        ));
    }
    if params.popularity < 0.0 {
        return Err(bad("popularity must be non-negative"));
    }
    let needs_full = matches!(
        params.quotas,
        QuotaProfile::TypeLowerFeasible | QuotaProfile::TwoTypeExact { .. }
    );
    if needs_full && !params.full_lists {
        return Err(bad("this quota profile requires full preference lists"));
    }
    if !params.full_lists && params.list_len == 0 {
        return Err(bad("list length must be positive"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let scores = draw_scores(params, &mut rng);
    let prefs = draw_preferences(params, &mut rng);

    let mut types = Vec::with_capacity(params.n);
    for (k, &c) in params.type_counts.iter().enumerate() {
        types.extend(std::iter::repeat_n(TypeTag(k), c));
    }
    let applicants: Vec<Applicant> = (0..params.n)
        .map(|i| Applicant {
            name: format!("a{}", i + 1),
            ty: types[i],
            choices: prefs[i]
                .iter()
                .map(|&j| Choice {
                    company: CompanyId(j),
                    score: Score(scores[j][i]),
                })
                .collect(),
        })
        .collect();
    let mut inst = Instance {
        type_names: params.type_names.clone(),
        applicants,
        companies: (0..params.m)
            .map(|j| Company::new(format!("c{}", j + 1), 0, 1))
            .collect(),
        global_type_lower: Default::default(),
        global_type_upper: Default::default(),
    };
    apply_quotas(params, &mut inst, &mut rng)?;
    Ok(inst)
}

fn apply_quotas(params: &GenParams, inst: &mut Instance, rng: &mut ChaCha8Rng) -> Result<(), GenError> {
    let (n, m) = (params.n, params.m);
    let p = params.type_counts.len();
    match &params.quotas {
        QuotaProfile::Uniform { lower, upper } => {
            if lower > upper {
                return Err(bad("lower quota above upper quota"));
            }
            for c in &mut inst.companies {
                c.lower = *lower;
                c.upper = *upper;
            }
        }
        QuotaProfile::Shape2016 => {
            for c in &mut inst.companies {
                c.lower = 4;
                c.upper = 6;
                c.type_upper.insert(TypeTag(1), 2);
            }
        }
        QuotaProfile::Shape2017 => {
            for c in &mut inst.companies {
                c.lower = 3;
                c.upper = 6;
                c.type_lower.insert(TypeTag(1), 1);
            }
        }
        QuotaProfile::Workshop => {
            let seats = [16u32, 22, 22];
            let pre = if params.preselected.is_empty() {
                vec![0; 3]
            } else {
                params.preselected.clone()
            };
            if pre.len() != 3 || pre.iter().zip(seats).any(|(&a, b)| a > b) {
                return Err(bad("pre-selected seats must be given per company and fit"));
            }
            for (j, c) in inst.companies.iter_mut().enumerate() {
                c.upper = seats[j] - pre[j];
                c.lower = c.upper;
            }
            let first = &mut inst.companies[0];
            first.type_lower.insert(TypeTag(0), 8.min(first.upper));
            for (k, total) in [25u32, 12, 10].into_iter().enumerate() {
                inst.global_type_lower.insert(TypeTag(k), total);
                inst.global_type_upper.insert(TypeTag(k), total);
            }
        }
        QuotaProfile::TypeLowerFeasible => {
            if m == 0 || n == 0 {
                return Err(bad("need at least one applicant and one company"));
            }
            let mut upper: Vec<u32> = (0..m).map(|_| rng.gen_range(1..=3)).collect();
            while (upper.iter().sum::<u32>() as usize) < n {
                let j = rng.gen_range(0..m);
                upper[j] += 1;
            }
            let mut remaining_type: Vec<usize> = params.type_counts.clone();
            for (j, c) in inst.companies.iter_mut().enumerate() {
                c.upper = upper[j];
                let mut room = upper[j] as usize;
                for (k, rem) in remaining_type.iter_mut().enumerate() {
                    let cap = room.min(*rem).min(2);
                    let l = rng.gen_range(0..=cap);
                    if l > 0 {
                        c.type_lower.insert(TypeTag(k), l as u32);
                        *rem -= l;
                        room -= l;
                    }
                }
                let typed: u32 = c.type_lower.values().sum();
                c.lower = rng.gen_range(typed..=c.upper.min(typed + 1));
            }
            let mut lower_total: usize = inst.companies.iter().map(|c| c.lower as usize).sum();
            while lower_total > n {
                let j = inst
                    .companies
                    .iter()
                    .position(|c| c.lower > c.type_lower.values().sum::<u32>())
                    .expect("slack lower quota");
                inst.companies[j].lower -= 1;
                lower_total -= 1;
            }
        }
        &QuotaProfile::TwoTypeExact { first } => {
            if p != 2 {
                return Err(bad("exactly two types required"));
            }
            let (n1, n2) = (params.type_counts[0], params.type_counts[1]);
            if m == 0 || m > n {
                return Err(bad("need 1 <= m <= n"));
            }
            let lo = first.max(m);
            let hi = (first + n2).min(n);
            if first > n1 || lo > hi {
                return Err(bad("no capacity fits the requested split"));
            }
            let capacity = rng.gen_range(lo..=hi);
            let mut upper = vec![1u32; m];
            for _ in m..capacity {
                upper[rng.gen_range(0..m)] += 1;
            }
            for (j, c) in inst.companies.iter_mut().enumerate() {
                c.upper = upper[j];
            }
            let second = (capacity - first) as u32;
            inst.global_type_lower.insert(TypeTag(0), first as u32);
            inst.global_type_upper.insert(TypeTag(0), first as u32);
            inst.global_type_lower.insert(TypeTag(1), second);
            inst.global_type_upper.insert(TypeTag(1), second);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checks::validate_instance;

    #[test]
    fn deterministic() {
        let p = GenParams::small(5, 3, 42);
        assert_eq!(generate(&p).unwrap(), generate(&p).unwrap());
        let q = GenParams { seed: 43, ..p.clone() };
        assert_ne!(generate(&p).unwrap(), generate(&q).unwrap());
    }

    #[test]
    fn strict_when_tie_density_zero() {
        for seed in 0..20 {
            let inst = generate(&GenParams::small(6, 3, seed)).unwrap();
            assert!(inst.is_strict());
            assert!(inst.is_complete_bipartite());
            assert_eq!(inst.num_applications(), 18);
        }
    }

    #[test]
    fn shapes() {
        let i16 = generate(&GenParams::shape_2016(1)).unwrap();
        assert_eq!((i16.n(), i16.m(), i16.type_population(TypeTag(1))), (25, 5, 5));
        assert!(i16
            .companies
            .iter()
            .all(|c| c.lower == 4 && c.upper == 6 && c.type_upper(TypeTag(1)) == 2));

        let i17 = generate(&GenParams::shape_2017(1)).unwrap();
        assert_eq!((i17.n(), i17.m(), i17.type_population(TypeTag(1))), (40, 8, 13));
        assert!(i17
            .companies
            .iter()
            .all(|c| c.lower == 3 && c.upper == 6 && c.type_lower(TypeTag(1)) == 1));

        let mut wp = GenParams::workshop(1);
        wp.preselected.clear();
        let w = generate(&wp).unwrap();
        let seats: Vec<u32> = w.companies.iter().map(|c| c.upper).collect();
        assert_eq!(seats, vec![16, 22, 22]);
        assert_eq!(w.companies[0].type_lower(TypeTag(0)), 8);
        for (k, t) in [25, 12, 10].into_iter().enumerate() {
            assert_eq!(w.global_lower(TypeTag(k)), t);
            assert_eq!(w.global_upper(TypeTag(k)), Some(t));
        }
        let net = generate(&GenParams::workshop(1)).unwrap();
        assert_eq!(net.companies.iter().map(|c| c.upper).sum::<u32>(), 47);

        for inst in [i16, i17, w, net] {
            assert!(validate_instance(&inst).is_empty());
        }
    }

    #[test]
    fn scores_stay_in_range() {
        let mut p = GenParams::small(30, 4, 7);
        p.tie_density = 0.5;
        p.half_point_prob = 0.5;
        let inst = generate(&p).unwrap();
        for e in inst.applications() {
            assert!((2..=20).contains(&e.score.0));
        }
        assert!(!inst.is_strict());
    }

    #[test]
    fn partial_lists() {
        let mut p = GenParams::small(10, 4, 3);
        p.full_lists = false;
        p.list_len = 2;
        let inst = generate(&p).unwrap();
        assert_eq!(inst.num_applications(), 20);
    }

    #[test]
    fn shape_dimensions_are_enforced() {
        let mut p = GenParams::shape_2016(0);
        p.n = 24;
        assert!(generate(&p).is_err());
    }
}
