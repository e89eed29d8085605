//! Exhaustive reference solver for small instances.
//!
//! Every admissible design is enumerated and its flows are optimised with an
//! independent per-period LP on the embedded simplex backend.

use crate::error::{Error, Result};
use crate::geometry::NeighbourhoodGraph;
use crate::model::Instance;
use crate::solver::{Integrality, LinearModel, RowSense, Solver, VarId};

pub const SINGLE_LOOP_LIMIT: usize = 8;
pub const MULTI_LOOP_LIMIT: usize = 6;
pub const PACKING_LIMIT: usize = 14;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub objective: f64,
    /// Loops of one optimal design.
    pub loops: Vec<Vec<usize>>,
}

/// Optimal expected cost of `loops` (pairwise disjoint actor sets; other
/// actors trade with the grid only).
pub fn design_cost(instance: &Instance, loops: &[Vec<usize>], solver: &Solver) -> Result<f64> {
    let mut total = 0.0;
    for k in 0..instance.periods() {
        total += instance.probability(k) * period_cost(instance, loops, k, solver)?;
    }
    Ok(total)
}

fn period_cost(instance: &Instance, loops: &[Vec<usize>], k: usize, solver: &Solver) -> Result<f64> {
    let n = instance.n();
    let mut m = LinearModel::new(format!("oracle_{k}"));
    let buy: Vec<VarId> = (0..n)
        .map(|i| {
            m.add_named_var(
                format!("f{i}"),
                0.0,
                f64::INFINITY,
                Integrality::Continuous,
                instance.buy(i, k),
            )
        })
        .collect();
    let sell: Vec<VarId> = (0..n)
        .map(|i| {
            m.add_named_var(
                format!("r{i}"),
                0.0,
                f64::INFINITY,
                Integrality::Continuous,
                -instance.sell(i, k),
            )
        })
        .collect();
    let mut balance: Vec<Vec<(VarId, f64)>> = (0..n).map(|i| vec![(sell[i], 1.0), (buy[i], -1.0)]).collect();
    let mut circ: Vec<Vec<(VarId, f64)>> = (0..n).map(|i| vec![(sell[i], 1.0)]).collect();
    for (l, members) in loops.iter().enumerate() {
        for &i in members {
            for &j in members {
                if i == j {
                    continue;
                }
                let cap = instance.net_prod(i, k).min(instance.net_cons(j, k));
                let e = m.add_named_var(format!("e{i}_{j}"), 0.0, cap, Integrality::Continuous, 0.0);
                balance[i].push((e, 1.0));
                balance[j].push((e, -1.0));
                circ[i].push((e, 1.0));
            }
        }
        let surplus: f64 = members.iter().map(|&i| instance.surplus(i, k)).sum();
        if surplus >= 0.0 {
            m.add_row(
                format!("loop{l}"),
                members.iter().map(|&i| (sell[i], 1.0)).collect(),
                RowSense::Le,
                surplus,
            );
        } else {
            for &i in members {
                m.set_bounds(sell[i], 0.0, 0.0);
            }
        }
    }
    for i in 0..n {
        m.add_row(
            format!("bal{i}"),
            std::mem::take(&mut balance[i]),
            RowSense::Eq,
            instance.surplus(i, k),
        );
        m.add_row(
            format!("circ{i}"),
            std::mem::take(&mut circ[i]),
            RowSense::Le,
            instance.bound(i, k),
        );
    }
    Ok(solver.solve_optimal(&m)?.objective)
}

fn admissible(instance: &Instance, graph: &NeighbourhoodGraph, members: &[usize]) -> bool {
    let power: f64 = members.iter().map(|&i| instance.actors()[i].installed_power_kwc).sum();
    graph.is_clique(members) && power <= instance.legal().max_installed_power_kwc
}

fn respects_coupling(instance: &Instance, loop_of: &[Option<usize>]) -> bool {
    instance
        .coupled_indices()
        .into_iter()
        .all(|(a, b)| loop_of[a] == loop_of[b])
}

/// Minimum over all designs. Single-loop mode enumerates every member subset
/// (n <= 8); multi-loop mode enumerates every partition of the actors into
/// loops of two or more members plus unassigned actors (n <= 6).
pub fn brute_force_oracle(instance: &Instance, graph: &NeighbourhoodGraph, multi: bool) -> Result<OracleResult> {
    let n = instance.n();
    let limit = if multi { MULTI_LOOP_LIMIT } else { SINGLE_LOOP_LIMIT };
    if n > limit {
        return Err(Error::OracleTooLarge { n, limit });
    }
    let solver = Solver::embedded();
    let designs = if multi {
        partitions(n)
            .into_iter()
            .map(|blocks| blocks.into_iter().filter(|b| b.len() >= 2).collect::<Vec<_>>())
            .collect::<Vec<_>>()
    } else {
        (0u32..1 << n)
            .map(|mask| vec![(0..n).filter(|&i| mask & (1 << i) != 0).collect::<Vec<_>>()])
            .collect()
    };

    let mut best: Option<OracleResult> = None;
    for loops in designs {
        if !loops.iter().all(|l| admissible(instance, graph, l)) {
            continue;
        }
        let mut loop_of = vec![None; n];
        for (l, members) in loops.iter().enumerate() {
            for &i in members {
                loop_of[i] = Some(l);
            }
        }
        if !respects_coupling(instance, &loop_of) {
            continue;
        }
        let cost = design_cost(instance, &loops, &solver)?;
        if best.as_ref().map_or(true, |b| cost < b.objective - 1e-12) {
            best = Some(OracleResult { objective: cost, loops });
        }
    }
    Ok(best.expect("the empty design is always admissible"))
}

/// Multi-loop optimum by dynamic programming over actor subsets (n <= 14).
/// Loops do not interact, so a design costs the all-grid baseline plus the
/// saving of each loop priced alone.
pub fn packing_oracle(instance: &Instance, graph: &NeighbourhoodGraph) -> Result<OracleResult> {
    let n = instance.n();
    if n > PACKING_LIMIT {
        return Err(Error::OracleTooLarge {
            n,
            limit: PACKING_LIMIT,
        });
    }
    let solver = Solver::embedded();
    let coupled = instance.coupled_indices();
    let members_of = |mask: usize| -> Vec<usize> { (0..n).filter(|&i| mask & (1 << i) != 0).collect() };
    let base = design_cost(instance, &[], &solver)?;
    let mut saving = vec![None; 1 << n];
    for (mask, slot) in saving.iter_mut().enumerate() {
        let members = members_of(mask);
        let split = coupled.iter().any(|&(a, b)| (mask >> a & 1) != (mask >> b & 1));
        if members.len() >= 2 && !split && admissible(instance, graph, &members) {
            *slot = Some(design_cost(instance, &[members], &solver)? - base);
        }
    }
    // best[mask]: cheapest packing of loops inside `mask`; choice[mask]: the
    // loop holding its lowest actor, 0 when that actor stays out.
    let mut best = vec![0.0f64; 1 << n];
    let mut choice = vec![0usize; 1 << n];
    for mask in 1..1usize << n {
        let low = mask & mask.wrapping_neg();
        let rest = mask & !low;
        best[mask] = best[rest];
        let mut sub = rest;
        loop {
            let l = sub | low;
            if let Some(s) = saving[l] {
                if s + best[mask & !l] < best[mask] - 1e-12 {
                    best[mask] = s + best[mask & !l];
                    choice[mask] = l;
                }
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & rest;
        }
    }
    let mut loops = Vec::new();
    let mut mask = (1usize << n) - 1;
    while mask != 0 {
        let low = mask & mask.wrapping_neg();
        match choice[mask] {
            0 => mask &= !low,
            l => {
                loops.push(members_of(l));
                mask &= !l;
            }
        }
    }
    Ok(OracleResult {
        objective: base + best[(1 << n) - 1],
        loops,
    })
}

/// All set partitions of `0..n` (restricted growth strings).
pub fn partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    let mut labels = vec![0usize; n];
    fn rec(i: usize, max: usize, labels: &mut Vec<usize>, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == labels.len() {
            let blocks = labels.iter().copied().max().map_or(0, |m| m + 1);
            let mut parts = vec![Vec::new(); blocks];
            for (idx, &b) in labels.iter().enumerate() {
                parts[b].push(idx);
            }
            out.push(parts);
            return;
        }
        for b in 0..=max {
            labels[i] = b;
            rec(i + 1, if b == max { max + 1 } else { max }, labels, out);
        }
    }
    if n == 0 {
        return vec![Vec::new()];
    }
    rec(0, 0, &mut labels, &mut out);
    out
}
