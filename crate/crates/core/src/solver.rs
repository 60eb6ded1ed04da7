//! Exact depth-first branch-and-bound for [`LinearModel`]s.
//!
//! All arithmetic is integral. Rows are normalised to `sum a x >= b` and
//! propagated to bounds consistency; the bound on the objective is the value
//! at the variables' lower bounds, strengthened by the cheapest remaining
//! option of every unsatisfied "pick one" row. Objectives are staged
//! lexicographically by [`solve_lexicographic`].

use std::time::{Duration, Instant};

use crate::ipmodel::{Domain, LinearModel, RowTag, Sense, VarKind};

/// Extra row as (terms over variable indices, sense, right-hand side).
type ExtraRow = (Vec<(i64, usize)>, Sense, i64);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BranchRule {
    FirstUnfixed,
    MostConstrained,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolverConfig {
    /// Per objective stage.
    pub node_limit: u64,
    /// Across all stages of one call.
    pub time_limit: Duration,
    /// Forces [`BranchRule::FirstUnfixed`] over the model's variable order.
    pub deterministic: bool,
    pub branch_rule: BranchRule,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            node_limit: 200_000_000,
            time_limit: Duration::from_secs(600),
            deterministic: true,
            branch_rule: BranchRule::FirstUnfixed,
        }
    }
}

impl SolverConfig {
    fn rule(&self) -> BranchRule {
        if self.deterministic {
            BranchRule::FirstUnfixed
        } else {
            self.branch_rule
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    LimitReached,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub nodes: u64,
    pub propagations: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    /// One value per model variable: the optimum, or the best incumbent when
    /// a limit was reached.
    pub assignment: Option<Vec<i64>>,
    /// Every stacked objective evaluated at `assignment`.
    pub objective_values: Vec<i64>,
    pub stats: SolveStats,
}

struct Row {
    terms: Vec<(i64, usize)>,
    rhs: i64,
    /// Largest change any single term can make; rows with more slack than
    /// this cannot tighten anything.
    max_span: i64,
}

struct Engine {
    rows: Vec<Row>,
    occ: Vec<Vec<(usize, i64)>>,
    lb: Vec<i64>,
    ub: Vec<i64>,
    maxact: Vec<i64>,
    trail: Vec<(usize, i64, i64)>,
    queue: Vec<usize>,
    queued: Vec<bool>,
    objective: Vec<(i64, usize)>,
    cutoff_row: Option<usize>,
    /// Disjoint rows of the form `sum x >= 1` over binaries.
    covers: Vec<Vec<usize>>,
    obj_coef: Vec<i64>,
    propagations: u64,
}

impl Engine {
    fn new(model: &LinearModel, objective: Option<usize>, extra: &[ExtraRow]) -> Self {
        let nv = model.vars.len();
        let lb = vec![0; nv];
        let ub: Vec<i64> = model.vars.iter().map(|v| v.domain.max()).collect();
        let mut rows = Vec::new();
        let mut push = |terms: Vec<(i64, usize)>, sense: Sense, rhs: i64| match sense {
            Sense::Ge => rows.push((terms, rhs)),
            Sense::Le => rows.push((terms.into_iter().map(|(a, v)| (-a, v)).collect(), -rhs)),
            Sense::Eq => {
                rows.push((terms.clone(), rhs));
                rows.push((terms.into_iter().map(|(a, v)| (-a, v)).collect(), -rhs));
            }
        };
        for r in &model.constraints {
            push(r.terms.iter().map(|&(a, v)| (a, v.0)).collect(), r.sense, r.rhs);
        }
        for (terms, sense, rhs) in extra {
            push(terms.clone(), *sense, *rhs);
        }

        let objective: Vec<(i64, usize)> = objective
            .map(|k| model.objectives[k].terms.iter().map(|&(a, v)| (a, v.0)).collect())
            .unwrap_or_default();
        let mut obj_coef = vec![0; nv];
        for &(a, v) in &objective {
            obj_coef[v] += a;
        }
        let cutoff_row = if objective.is_empty() {
            None
        } else {
            rows.push((objective.iter().map(|&(a, v)| (-a, v)).collect(), i64::MIN / 4));
            Some(rows.len() - 1)
        };

        let rows: Vec<Row> = rows
            .into_iter()
            .map(|(terms, rhs)| {
                let max_span = terms.iter().map(|&(a, v)| a.abs() * (ub[v] - lb[v])).max().unwrap_or(0);
                Row { terms, rhs, max_span }
            })
            .collect();
        let mut occ = vec![Vec::new(); nv];
        for (r, row) in rows.iter().enumerate() {
            for &(a, v) in &row.terms {
                occ[v].push((r, a));
            }
        }
        let maxact = rows
            .iter()
            .map(|row| {
                row.terms
                    .iter()
                    .map(|&(a, v)| if a > 0 { a * ub[v] } else { a * lb[v] })
                    .sum()
            })
            .collect();

        // Greedy disjoint cover rows for the bound.
        let mut used = vec![false; nv];
        let mut covers = Vec::new();
        for r in &model.constraints {
            let is_cover = matches!(r.sense, Sense::Ge | Sense::Eq)
                && r.rhs == 1
                && r.terms
                    .iter()
                    .all(|&(a, v)| a == 1 && model.vars[v.0].domain == Domain::Binary);
            if is_cover && r.terms.iter().all(|&(_, v)| !used[v.0] && obj_coef[v.0] >= 0) {
                for &(_, v) in &r.terms {
                    used[v.0] = true;
                }
                covers.push(r.terms.iter().map(|&(_, v)| v.0).collect());
            }
        }

        let nrows = rows.len();
        Engine {
            rows,
            occ,
            lb,
            ub,
            maxact,
            trail: Vec::new(),
            queue: (0..nrows).collect(),
            queued: vec![true; nrows],
            objective,
            cutoff_row,
            covers,
            obj_coef,
            propagations: 0,
        }
    }

    fn contribution(a: i64, lb: i64, ub: i64) -> i64 {
        if a > 0 {
            a * ub
        } else {
            a * lb
        }
    }

    fn set_bounds(&mut self, v: usize, lb: i64, ub: i64, skip_row: usize) {
        let (old_lb, old_ub) = (self.lb[v], self.ub[v]);
        if old_lb == lb && old_ub == ub {
            return;
        }
        self.trail.push((v, old_lb, old_ub));
        self.lb[v] = lb;
        self.ub[v] = ub;
        for &(r, a) in &self.occ[v] {
            let delta = Self::contribution(a, lb, ub) - Self::contribution(a, old_lb, old_ub);
            if delta == 0 {
                continue;
            }
            self.maxact[r] += delta;
            if r != skip_row && !self.queued[r] {
                self.queued[r] = true;
                self.queue.push(r);
            }
        }
    }

    fn undo_to(&mut self, len: usize) {
        while self.trail.len() > len {
            let (v, old_lb, old_ub) = self.trail.pop().unwrap();
            let (lb, ub) = (self.lb[v], self.ub[v]);
            for &(r, a) in &self.occ[v] {
                self.maxact[r] += Self::contribution(a, old_lb, old_ub) - Self::contribution(a, lb, ub);
            }
            self.lb[v] = old_lb;
            self.ub[v] = old_ub;
        }
    }

    fn clear_queue(&mut self) {
        for r in self.queue.drain(..) {
            self.queued[r] = false;
        }
    }

    fn enqueue(&mut self, r: usize) {
        if !self.queued[r] {
            self.queued[r] = true;
            self.queue.push(r);
        }
    }

    /// Returns false on conflict.
    fn propagate(&mut self) -> bool {
        while let Some(r) = self.queue.pop() {
            self.queued[r] = false;
            self.propagations += 1;
            let slack = self.maxact[r] - self.rows[r].rhs;
            if slack < 0 {
                self.clear_queue();
                return false;
            }
            if slack >= self.rows[r].max_span {
                continue;
            }
            for k in 0..self.rows[r].terms.len() {
                let (a, v) = self.rows[r].terms[k];
                let (lb, ub) = (self.lb[v], self.ub[v]);
                if lb == ub {
                    continue;
                }
                if a > 0 {
                    if a * (ub - lb) > slack {
                        self.set_bounds(v, ub - slack / a, ub, r);
                    }
                } else if -a * (ub - lb) > slack {
                    self.set_bounds(v, lb, lb + slack / -a, r);
                }
            }
        }
        true
    }

    /// Whether `values` lies within the current bounds and satisfies every
    /// row except the objective cutoff.
    fn admits(&self, values: &[i64]) -> bool {
        (0..values.len()).all(|v| self.lb[v] <= values[v] && values[v] <= self.ub[v])
            && self.rows.iter().enumerate().all(|(r, row)| {
                Some(r) == self.cutoff_row || row.terms.iter().map(|&(a, v)| a * values[v]).sum::<i64>() >= row.rhs
            })
    }

    fn lower_bound(&self) -> i64 {
        let mut bound: i64 = self
            .objective
            .iter()
            .map(|&(a, v)| if a > 0 { a * self.lb[v] } else { a * self.ub[v] })
            .sum();
        for cover in &self.covers {
            if cover.iter().any(|&v| self.lb[v] >= 1) {
                continue;
            }
            let cheapest = cover
                .iter()
                .filter(|&&v| self.ub[v] >= 1)
                .map(|&v| self.obj_coef[v])
                .min()
                .unwrap_or(0);
            bound += cheapest;
        }
        bound
    }

    fn objective_value(&self) -> i64 {
        self.objective.iter().map(|&(a, v)| a * self.lb[v]).sum()
    }

    fn set_cutoff(&mut self, best: i64) {
        if let Some(r) = self.cutoff_row {
            self.rows[r].rhs = -(best - 1);
            self.enqueue(r);
        }
    }

    fn most_constrained(&self) -> Option<usize> {
        self.covers
            .iter()
            .filter(|c| !c.iter().any(|&v| self.lb[v] >= 1))
            .filter_map(|c| {
                let free: Vec<usize> = c.iter().copied().filter(|&v| self.lb[v] < self.ub[v]).collect();
                free.first().map(|&v| (free.len(), v))
            })
            .min()
            .map(|(_, v)| v)
    }
}

struct Frame {
    trail_len: usize,
    var_pos: usize,
    values: Vec<i64>,
    next: usize,
}

struct SingleResult {
    status: SolveStatus,
    assignment: Option<Vec<i64>>,
    stats: SolveStats,
}

/// Branching order: match variables first, in model order, then the rest.
fn branch_order(model: &LinearModel) -> Vec<usize> {
    let (mut first, mut rest): (Vec<usize>, Vec<usize>) =
        (0..model.vars.len()).partition(|&k| matches!(model.vars[k].kind, VarKind::Match(..)));
    first.append(&mut rest);
    first
}

fn solve_single(
    model: &LinearModel,
    objective: Option<usize>,
    extra: &[ExtraRow],
    config: &SolverConfig,
    deadline: Instant,
    hint: Option<&[i64]>,
) -> SingleResult {
    let mut eng = Engine::new(model, objective, extra);
    let hint = hint.filter(|h| h.len() == model.vars.len());
    let order = branch_order(model);
    let rule = config.rule();
    let mut stats = SolveStats::default();
    let mut best: Option<(i64, Vec<i64>)> = None;

    if !eng.propagate() {
        return SingleResult {
            status: SolveStatus::Infeasible,
            assignment: None,
            stats: SolveStats {
                nodes: 1,
                propagations: eng.propagations,
            },
        };
    }
    let root_bound = eng.lower_bound();
    if let Some(h) = hint.filter(|h| eng.admits(h)) {
        let value = eng.objective.iter().map(|&(a, v)| a * h[v]).sum();
        if objective.is_none() || value <= root_bound {
            return SingleResult {
                status: SolveStatus::Optimal,
                assignment: Some(h.to_vec()),
                stats: SolveStats {
                    nodes: 1,
                    propagations: eng.propagations,
                },
            };
        }
        best = Some((value, h.to_vec()));
        eng.set_cutoff(value);
        if !eng.propagate() {
            return SingleResult {
                status: SolveStatus::Optimal,
                assignment: best.map(|(_, a)| a),
                stats: SolveStats {
                    nodes: 1,
                    propagations: eng.propagations,
                },
            };
        }
    }
    let mut stack: Vec<Frame> = Vec::new();
    let mut limit_hit = false;

    'search: loop {
        stats.nodes += 1;
        if stats.nodes > config.node_limit || (stats.nodes % 512 == 0 && Instant::now() >= deadline) {
            limit_hit = true;
            break 'search;
        }

        let pruned = match &best {
            Some((b, _)) => eng.lower_bound() >= *b,
            None => false,
        };
        if !pruned {
            let scan_from = stack.last().map(|f| f.var_pos + 1).unwrap_or(0);
            let pick = match rule {
                BranchRule::MostConstrained => eng
                    .most_constrained()
                    .and_then(|v| order.iter().position(|&w| w == v))
                    .or_else(|| (0..order.len()).find(|&p| eng.lb[order[p]] < eng.ub[order[p]])),
                BranchRule::FirstUnfixed => (scan_from..order.len()).find(|&p| eng.lb[order[p]] < eng.ub[order[p]]),
            };
            match pick {
                None => {
                    let value = eng.objective_value();
                    if best.as_ref().is_none_or(|(b, _)| value < *b) {
                        best = Some((value, eng.lb.clone()));
                        eng.set_cutoff(value);
                    }
                    if objective.is_none() || value <= root_bound {
                        break 'search;
                    }
                }
                Some(pos) => {
                    let v = order[pos];
                    let (lb, ub) = (eng.lb[v], eng.ub[v]);
                    let mut values: Vec<i64> = if matches!(model.vars[v].kind, VarKind::Match(..)) {
                        (lb..=ub).rev().collect()
                    } else {
                        (lb..=ub).collect()
                    };
                    if let Some(k) = hint.and_then(|h| values.iter().position(|&x| x == h[v])) {
                        let preferred = values.remove(k);
                        values.insert(0, preferred);
                    }
                    stack.push(Frame {
                        trail_len: eng.trail.len(),
                        var_pos: pos,
                        values,
                        next: 0,
                    });
                }
            }
        }

        loop {
            let Some(top) = stack.last_mut() else { break 'search };
            let trail_len = top.trail_len;
            if top.next < top.values.len() {
                let val = top.values[top.next];
                top.next += 1;
                let v = order[top.var_pos];
                eng.undo_to(trail_len);
                eng.set_bounds(v, val, val, usize::MAX);
                if let Some(r) = eng.cutoff_row {
                    eng.enqueue(r);
                }
                if eng.propagate() {
                    continue 'search;
                }
            } else {
                eng.undo_to(trail_len);
                stack.pop();
            }
        }
    }

    stats.propagations = eng.propagations;
    let status = match (&best, limit_hit) {
        (_, true) => SolveStatus::LimitReached,
        (Some(_), false) => SolveStatus::Optimal,
        (None, false) => SolveStatus::Infeasible,
    };
    SingleResult {
        status,
        assignment: best.map(|(_, a)| a),
        stats,
    }
}

fn outcome(model: &LinearModel, status: SolveStatus, assignment: Option<Vec<i64>>, stats: SolveStats) -> SolveOutcome {
    let objective_values = assignment
        .as_ref()
        .map(|a| model.objectives.iter().map(|o| o.value(a)).collect())
        .unwrap_or_default();
    SolveOutcome {
        status,
        assignment,
        objective_values,
        stats,
    }
}

/// Minimises the first stacked objective (or finds any feasible assignment
/// when there is none).
pub fn solve(model: &LinearModel, config: &SolverConfig) -> SolveOutcome {
    solve_from(model, config, None)
}

/// [`solve`] starting from a known assignment: when `hint` is feasible it
/// becomes the first incumbent, and branching tries its values first.
pub fn solve_from(model: &LinearModel, config: &SolverConfig, hint: Option<&[i64]>) -> SolveOutcome {
    let deadline = Instant::now() + config.time_limit;
    let objective = (!model.objectives.is_empty()).then_some(0);
    let r = solve_single(model, objective, &[], config, deadline, hint);
    outcome(model, r.status, r.assignment, r.stats)
}

/// Minimises the stacked objectives in order, fixing each optimum with an
/// equality row before moving to the next.
pub fn solve_lexicographic(model: &LinearModel, config: &SolverConfig) -> SolveOutcome {
    solve_lexicographic_from(model, config, None)
}

/// [`solve_lexicographic`] with a starting assignment for the first stage.
/// Each later stage starts from the previous stage's optimum.
pub fn solve_lexicographic_from(model: &LinearModel, config: &SolverConfig, hint: Option<&[i64]>) -> SolveOutcome {
    let deadline = Instant::now() + config.time_limit;
    if model.objectives.is_empty() {
        return solve_from(model, config, hint);
    }
    let mut fixes: Vec<ExtraRow> = Vec::new();
    let mut stats = SolveStats::default();
    let mut last: Option<Vec<i64>> = hint.map(|h| h.to_vec());
    for k in 0..model.objectives.len() {
        let r = solve_single(model, Some(k), &fixes, config, deadline, last.as_deref());
        stats.nodes += r.stats.nodes;
        stats.propagations += r.stats.propagations;
        if r.status != SolveStatus::Optimal {
            return outcome(model, r.status, r.assignment, stats);
        }
        let assignment = r.assignment.expect("optimal stage has an assignment");
        let obj = &model.objectives[k];
        let value = obj.value(&assignment);
        fixes.push((obj.terms.iter().map(|&(a, v)| (a, v.0)).collect(), Sense::Eq, value));
        last = Some(assignment);
    }
    outcome(model, SolveStatus::Optimal, last, stats)
}

/// The model with a `LEXFIX` row pinning objective `k` to `value`.
pub fn with_lexfix(model: &LinearModel, k: usize, value: i64) -> LinearModel {
    let mut out = model.clone();
    let terms = model.objectives[k].terms.clone();
    out.add_constraint(terms, Sense::Eq, value, RowTag::LexFix);
    out
}
