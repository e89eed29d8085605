//! Dense two-phase primal simplex with depth-first branch-and-bound.
//!
//! Meant for small models (oracles, tests, cross-checks); it stores the full
//! tableau.

use std::time::Instant;

use super::{Backend, Capabilities, Integrality, Limits, LinearModel, RowSense, SolveResult, SolveStatus};
use crate::error::Result;

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-10;
const DEGENERATE_SWITCH: usize = 50;

/// Built-in dense simplex backend.
#[derive(Clone, Debug)]
pub struct EmbeddedBackend {
    pub max_nodes: usize,
}

impl Default for EmbeddedBackend {
    fn default() -> Self {
        EmbeddedBackend { max_nodes: 1_000_000 }
    }
}

/// How an original variable maps onto non-negative standard columns.
#[derive(Clone, Copy, Debug)]
enum ColMap {
    /// x = l + x'
    Shift { col: usize, lower: f64 },
    /// x = u - x'
    Mirror { col: usize, upper: f64 },
    /// x = x+ - x-
    Free { pos: usize, neg: usize },
}

#[derive(Debug)]
enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    Interrupted,
}

struct LpOutcome {
    status: LpStatus,
    values: Vec<f64>,
    objective: f64,
    duals: Vec<f64>,
    reduced_costs: Vec<f64>,
}

struct Tableau {
    rows: usize,
    width: usize,
    data: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.data[r * self.width + self.width - 1]
    }

    fn pivot(&mut self, pr: usize, pc: usize, cost: &mut [f64]) {
        let w = self.width;
        let p = self.at(pr, pc);
        for v in &mut self.data[pr * w..(pr + 1) * w] {
            *v /= p;
        }
        let pivot_row: Vec<f64> = self.data[pr * w..(pr + 1) * w].to_vec();
        for r in 0..self.rows {
            if r == pr {
                continue;
            }
            let f = self.data[r * w + pc];
            if f != 0.0 {
                for (v, pv) in self.data[r * w..(r + 1) * w].iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                self.data[r * w + pc] = 0.0;
            }
        }
        let f = cost[pc];
        if f != 0.0 {
            for (v, pv) in cost.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            cost[pc] = 0.0;
        }
        self.basis[pr] = pc;
    }

    /// Runs primal simplex on the reduced-cost row `cost` (last entry holds the
    /// negated objective). Columns at index >= `enter_limit` never enter.
    fn optimise(&mut self, cost: &mut [f64], enter_limit: usize, deadline: Option<Instant>) -> LpStatus {
        let mut degenerate = 0usize;
        let mut iter = 0usize;
        loop {
            iter += 1;
            if iter % 256 == 0 && deadline.is_some_and(|d| Instant::now() >= d) {
                return LpStatus::Interrupted;
            }
            let bland = degenerate >= DEGENERATE_SWITCH;
            let mut entering = None;
            let mut best = -COST_TOL;
            for (j, &d) in cost[..enter_limit].iter().enumerate() {
                if d < best {
                    entering = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(pc) = entering else {
                return LpStatus::Optimal;
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, pc);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(r).max(0.0) / a;
                    let better = match leave {
                        None => true,
                        Some((lr, lratio)) => {
                            ratio < lratio - 1e-12 || (ratio <= lratio + 1e-12 && self.basis[r] < self.basis[lr])
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            let Some((pr, ratio)) = leave else {
                return LpStatus::Unbounded;
            };
            if ratio <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(pr, pc, cost);
        }
    }
}

fn solve_lp(model: &LinearModel, lower: &[f64], upper: &[f64], deadline: Option<Instant>) -> LpOutcome {
    let n = model.num_vars();
    let mut maps = Vec::with_capacity(n);
    let mut ncols = 0usize;
    let mut bound_rows: Vec<(usize, f64)> = Vec::new();
    for j in 0..n {
        let (l, u) = (lower[j], upper[j]);
        let map = if l.is_finite() {
            if u.is_finite() {
                bound_rows.push((ncols, u - l));
            }
            ColMap::Shift { col: ncols, lower: l }
        } else if u.is_finite() {
            ColMap::Mirror { col: ncols, upper: u }
        } else {
            ncols += 1;
            ColMap::Free {
                pos: ncols - 1,
                neg: ncols,
            }
        };
        ncols += 1;
        maps.push(map);
    }

    // Standard-form rows: (coefficients over structural columns, sense, rhs).
    let m_orig = model.num_rows();
    let m = m_orig + bound_rows.len();
    let mut rows: Vec<(Vec<f64>, RowSense, f64)> = Vec::with_capacity(m);
    for row in model.constraints() {
        let mut coef = vec![0.0; ncols];
        let mut rhs = row.rhs;
        for &(v, a) in &row.terms {
            match maps[v.0] {
                ColMap::Shift { col, lower } => {
                    coef[col] += a;
                    rhs -= a * lower;
                }
                ColMap::Mirror { col, upper } => {
                    coef[col] -= a;
                    rhs -= a * upper;
                }
                ColMap::Free { pos, neg } => {
                    coef[pos] += a;
                    coef[neg] -= a;
                }
            }
        }
        rows.push((coef, row.sense, rhs));
    }
    for &(col, width) in &bound_rows {
        let mut coef = vec![0.0; ncols];
        coef[col] = 1.0;
        rows.push((coef, RowSense::Le, width));
    }

    let mut cost_std = vec![0.0; ncols];
    let mut offset = 0.0;
    for (j, &c) in model.objective().iter().enumerate() {
        match maps[j] {
            ColMap::Shift { col, lower } => {
                cost_std[col] += c;
                offset += c * lower;
            }
            ColMap::Mirror { col, upper } => {
                cost_std[col] -= c;
                offset += c * upper;
            }
            ColMap::Free { pos, neg } => {
                cost_std[pos] += c;
                cost_std[neg] -= c;
            }
        }
    }

    // Column layout: structural | slacks | artificials | rhs.
    let slack_of: Vec<Option<usize>> = {
        let mut next = ncols;
        rows.iter()
            .map(|(_, s, _)| match s {
                RowSense::Eq => None,
                _ => {
                    next += 1;
                    Some(next - 1)
                }
            })
            .collect()
    };
    let nslack = slack_of.iter().flatten().count();
    let flip: Vec<f64> = rows.iter().map(|(_, _, b)| if *b < 0.0 { -1.0 } else { 1.0 }).collect();
    // A row needs an artificial unless its slack enters with +1 after flipping.
    let needs_art: Vec<bool> = rows
        .iter()
        .zip(&flip)
        .map(|((_, s, _), f)| match s {
            RowSense::Le => *f < 0.0,
            RowSense::Ge => *f > 0.0,
            RowSense::Eq => true,
        })
        .collect();
    let nart = needs_art.iter().filter(|&&b| b).count();
    let art_start = ncols + nslack;
    let width = art_start + nart + 1;

    let mut tab = Tableau {
        rows: m,
        width,
        data: vec![0.0; m * width],
        basis: vec![0; m],
    };
    let mut unit_col = vec![0usize; m];
    let mut next_art = art_start;
    for (r, (coef, sense, b)) in rows.iter().enumerate() {
        let f = flip[r];
        let base = r * width;
        for (c, &a) in coef.iter().enumerate() {
            tab.data[base + c] = f * a;
        }
        if let Some(s) = slack_of[r] {
            let sign = if *sense == RowSense::Le { 1.0 } else { -1.0 };
            tab.data[base + s] = f * sign;
        }
        tab.data[base + width - 1] = f * b;
        if needs_art[r] {
            tab.data[base + next_art] = 1.0;
            unit_col[r] = next_art;
            next_art += 1;
        } else {
            unit_col[r] = slack_of[r].expect("slack row");
        }
        tab.basis[r] = unit_col[r];
    }

    let infeasible = || LpOutcome {
        status: LpStatus::Infeasible,
        values: Vec::new(),
        objective: f64::INFINITY,
        duals: Vec::new(),
        reduced_costs: Vec::new(),
    };

    // Phase 1: minimise the sum of artificials.
    if nart > 0 {
        let mut cost = vec![0.0; width];
        for c in art_start..art_start + nart {
            cost[c] = 1.0;
        }
        for r in 0..m {
            if tab.basis[r] >= art_start {
                for c in 0..width {
                    cost[c] -= tab.at(r, c);
                }
            }
        }
        match tab.optimise(&mut cost, art_start, deadline) {
            LpStatus::Interrupted => {
                return LpOutcome {
                    status: LpStatus::Interrupted,
                    ..infeasible()
                }
            }
            LpStatus::Unbounded => unreachable!("phase one is bounded below"),
            _ => {}
        }
        let scale = 1.0 + rows.iter().map(|(_, _, b)| b.abs()).fold(0.0, f64::max);
        if -cost[width - 1] > 1e-9 * scale {
            return infeasible();
        }
        // Drive zero-level artificials out of the basis where possible.
        for r in 0..m {
            if tab.basis[r] >= art_start {
                if let Some(pc) = (0..art_start).find(|&c| tab.at(r, c).abs() > 1e-7) {
                    tab.pivot(r, pc, &mut cost);
                }
            }
        }
    }

    // Phase 2.
    let mut cost = vec![0.0; width];
    cost[..ncols].copy_from_slice(&cost_std);
    for r in 0..m {
        let cb = cost[tab.basis[r]];
        if cb != 0.0 {
            for c in 0..width {
                cost[c] -= cb * tab.at(r, c);
            }
        }
    }
    match tab.optimise(&mut cost, art_start, deadline) {
        LpStatus::Optimal => {}
        status => return LpOutcome { status, ..infeasible() },
    }

    let mut std_x = vec![0.0; width - 1];
    for r in 0..m {
        std_x[tab.basis[r]] = tab.rhs(r);
    }
    let values: Vec<f64> = maps
        .iter()
        .enumerate()
        .map(|(j, map)| {
            let x = match *map {
                ColMap::Shift { col, lower } => lower + std_x[col],
                ColMap::Mirror { col, upper } => upper - std_x[col],
                ColMap::Free { pos, neg } => std_x[pos] - std_x[neg],
            };
            x.clamp(lower[j], upper[j])
        })
        .collect();

    // The reduced cost of a row's unit column is minus its dual.
    let duals: Vec<f64> = (0..m_orig).map(|r| -cost[unit_col[r]] * flip[r]).collect();
    let mut reduced_costs = model.objective().to_vec();
    for (row, y) in model.constraints().iter().zip(&duals) {
        for &(v, a) in &row.terms {
            reduced_costs[v.0] -= y * a;
        }
    }
    let objective = model.objective_value(&values);
    debug_assert!((objective - (-cost[width - 1] + offset)).abs() < 1e-6 * (1.0 + objective.abs()));
    LpOutcome {
        status: LpStatus::Optimal,
        values,
        objective,
        duals,
        reduced_costs,
    }
}

impl EmbeddedBackend {
    fn solve_mip(&self, model: &LinearModel, limits: &Limits, start: Instant) -> SolveResult {
        let deadline = limits.time_limit.map(|t| start + t);
        let lower0: Vec<f64> = model.variables().iter().map(|v| v.lower).collect();
        let upper0: Vec<f64> = model.variables().iter().map(|v| v.upper).collect();
        let ints: Vec<usize> = model
            .variables()
            .iter()
            .enumerate()
            .filter(|(_, v)| v.integrality == Integrality::Binary)
            .map(|(j, _)| j)
            .collect();

        let mut incumbent: Option<(f64, Vec<f64>)> = None;
        // (lower, upper, parent bound)
        let mut stack = vec![(lower0, upper0, f64::NEG_INFINITY)];
        let mut nodes = 0usize;
        let mut unbounded = false;
        let mut timed_out = false;
        let mut open_bound = f64::INFINITY;

        while let Some((lo, up, parent)) = stack.pop() {
            let cutoff = incumbent.as_ref().map(|(o, _)| *o);
            if let Some(best) = cutoff {
                if parent >= best - gap_allowance(best, limits.rel_gap) {
                    continue;
                }
            }
            if nodes >= self.max_nodes || deadline.is_some_and(|d| Instant::now() >= d) {
                timed_out = true;
                open_bound = open_bound.min(parent);
                for (_, _, b) in &stack {
                    open_bound = open_bound.min(*b);
                }
                break;
            }
            nodes += 1;
            let lp = solve_lp(model, &lo, &up, deadline);
            match lp.status {
                LpStatus::Infeasible => continue,
                LpStatus::Unbounded => {
                    unbounded = true;
                    break;
                }
                LpStatus::Interrupted => {
                    timed_out = true;
                    open_bound = stack.iter().map(|s| s.2).fold(parent, f64::min);
                    break;
                }
                LpStatus::Optimal => {}
            }
            if let Some(best) = cutoff {
                if lp.objective >= best - gap_allowance(best, limits.rel_gap) {
                    continue;
                }
            }
            let branch = ints
                .iter()
                .copied()
                .filter(|&j| {
                    let x = lp.values[j];
                    (x - x.round()).abs() > 1e-6
                })
                .max_by(|&a, &b| {
                    let fa = (lp.values[a] - 0.5).abs();
                    let fb = (lp.values[b] - 0.5).abs();
                    fb.partial_cmp(&fa).unwrap().then(b.cmp(&a))
                });
            match branch {
                None => {
                    let mut x = lp.values;
                    for &j in &ints {
                        x[j] = x[j].round();
                    }
                    let obj = model.objective_value(&x);
                    if incumbent.as_ref().map_or(true, |(o, _)| obj < *o) {
                        incumbent = Some((obj, x));
                    }
                }
                Some(j) => {
                    let go_up_first = lp.values[j] >= 0.5;
                    let mut down = (lo.clone(), up.clone(), lp.objective);
                    down.1[j] = 0.0;
                    let mut upn = (lo, up, lp.objective);
                    upn.0[j] = 1.0;
                    if go_up_first {
                        stack.push(down);
                        stack.push(upn);
                    } else {
                        stack.push(upn);
                        stack.push(down);
                    }
                }
            }
        }

        let wall_time = start.elapsed();
        if unbounded {
            return empty(SolveStatus::Unbounded, wall_time);
        }
        match incumbent {
            Some((obj, values)) => SolveResult {
                status: if timed_out {
                    SolveStatus::TimeLimit
                } else {
                    SolveStatus::Optimal
                },
                objective: obj,
                best_bound: if timed_out { open_bound.min(obj) } else { obj },
                values,
                duals: None,
                reduced_costs: None,
                wall_time,
            },
            None if timed_out => SolveResult {
                best_bound: open_bound,
                ..empty(SolveStatus::TimeLimit, wall_time)
            },
            None => empty(SolveStatus::Infeasible, wall_time),
        }
    }
}

fn gap_allowance(best: f64, rel_gap: f64) -> f64 {
    (rel_gap * best.abs()).max(1e-9)
}

fn empty(status: SolveStatus, wall_time: std::time::Duration) -> SolveResult {
    SolveResult {
        status,
        values: Vec::new(),
        objective: f64::INFINITY,
        best_bound: f64::NEG_INFINITY,
        duals: None,
        reduced_costs: None,
        wall_time,
    }
}

impl Backend for EmbeddedBackend {
    fn name(&self) -> &'static str {
        "embedded"
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            duals: true,
            integers: true,
        }
    }

    fn solve_validated(&self, model: &LinearModel, limits: &Limits) -> Result<SolveResult> {
        let start = Instant::now();
        if model.is_mip() {
            return Ok(self.solve_mip(model, limits, start));
        }
        let lower: Vec<f64> = model.variables().iter().map(|v| v.lower).collect();
        let upper: Vec<f64> = model.variables().iter().map(|v| v.upper).collect();
        let deadline = limits.time_limit.map(|t| start + t);
        let lp = solve_lp(model, &lower, &upper, deadline);
        let wall_time = start.elapsed();
        Ok(match lp.status {
            LpStatus::Optimal => SolveResult {
                status: SolveStatus::Optimal,
                objective: lp.objective,
                best_bound: lp.objective,
                values: lp.values,
                duals: Some(lp.duals),
                reduced_costs: Some(lp.reduced_costs),
                wall_time,
            },
            LpStatus::Infeasible => empty(SolveStatus::Infeasible, wall_time),
            LpStatus::Unbounded => empty(SolveStatus::Unbounded, wall_time),
            LpStatus::Interrupted => empty(SolveStatus::TimeLimit, wall_time),
        })
    }
}
