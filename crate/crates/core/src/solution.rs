//! Design solutions (loops plus flows) and their legality checks.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::NeighbourhoodGraph;
use crate::model::Instance;

/// Absolute tolerance used by every energy-balance check, kWh.
pub const BALANCE_TOL: f64 = 1e-6;

/// Solver values below this magnitude are read as zero, kWh.
pub const NOISE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    SlCpct,
    SlExt,
    MlCpct,
    MlCol,
    MlColExt,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::SlCpct,
        ModelKind::SlExt,
        ModelKind::MlCpct,
        ModelKind::MlCol,
        ModelKind::MlColExt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::SlCpct => "slcpct",
            ModelKind::SlExt => "slext",
            ModelKind::MlCpct => "mlcpct",
            ModelKind::MlCol => "mlcol",
            ModelKind::MlColExt => "mlcolext",
        }
    }

    pub fn is_single_loop(self) -> bool {
        matches!(self, ModelKind::SlCpct | ModelKind::SlExt)
    }

    pub fn is_decomposition(self) -> bool {
        matches!(self, ModelKind::SlExt | ModelKind::MlColExt)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == lower)
            .ok_or_else(|| Error::Input(format!("unknown model `{s}`")))
    }
}

/// Energy sent from one actor to another during one period.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    pub from: usize,
    pub to: usize,
    pub period: usize,
    pub kwh: f64,
}

/// A loop design together with the energy flows realising it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignSolution {
    pub model: ModelKind,
    pub actor_ids: Vec<String>,
    /// Loops with at least two members, members sorted, loops ordered by
    /// their first member.
    pub loops: Vec<Vec<usize>>,
    /// Loop index of each actor.
    pub assignment: Vec<Option<usize>>,
    /// Nonzero internal flows.
    pub flows: Vec<Flow>,
    /// Grid purchases, flat `[actor * periods + period]`.
    pub grid_buy: Vec<f64>,
    /// Grid sales, same layout as `grid_buy`.
    pub grid_sell: Vec<f64>,
    /// `surplus[l][k]`: loop `l` has a nonnegative net surplus at period `k`.
    pub surplus: Vec<Vec<bool>>,
    pub objective: f64,
    pub periods: usize,
}

/// Sorts members, drops singleton loops and orders loops canonically.
pub fn normalize_loops(loops: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = loops
        .into_iter()
        .map(|mut l| {
            l.sort_unstable();
            l.dedup();
            l
        })
        .filter(|l| l.len() >= 2)
        .collect();
    out.sort();
    out
}

impl DesignSolution {
    /// Assembles a solution from raw loops and per-period quantities. The
    /// objective is recomputed from grid trades.
    pub fn assemble(
        model: ModelKind,
        instance: &Instance,
        loops: Vec<Vec<usize>>,
        mut flows: Vec<Flow>,
        grid_buy: Vec<f64>,
        grid_sell: Vec<f64>,
    ) -> Self {
        let n = instance.n();
        let periods = instance.periods();
        let loops = normalize_loops(loops);
        let mut assignment = vec![None; n];
        for (l, members) in loops.iter().enumerate() {
            for &i in members {
                assignment[i] = Some(l);
            }
        }
        flows.retain(|f| f.kwh != 0.0);
        flows.sort_by_key(|f| (f.period, f.from, f.to));
        let surplus = loops
            .iter()
            .map(|members| {
                (0..periods)
                    .map(|k| loop_surplus(instance, members, k) >= 0.0)
                    .collect()
            })
            .collect();
        let objective = grid_objective(instance, &grid_buy, &grid_sell);
        DesignSolution {
            model,
            actor_ids: instance.actors().iter().map(|a| a.id.clone()).collect(),
            loops,
            assignment,
            flows,
            grid_buy,
            grid_sell,
            surplus,
            objective,
            periods,
        }
    }

    pub fn buy(&self, i: usize, k: usize) -> f64 {
        self.grid_buy[i * self.periods + k]
    }

    pub fn sell(&self, i: usize, k: usize) -> f64 {
        self.grid_sell[i * self.periods + k]
    }

    /// Per-actor, per-period totals of sent and received internal energy.
    pub fn flow_totals(&self, n: usize) -> (Vec<f64>, Vec<f64>) {
        let mut out = vec![0.0; n * self.periods];
        let mut inn = vec![0.0; n * self.periods];
        for f in &self.flows {
            out[f.from * self.periods + f.period] += f.kwh;
            inn[f.to * self.periods + f.period] += f.kwh;
        }
        (out, inn)
    }

    /// Realised expected cost of one actor.
    pub fn actor_cost(&self, instance: &Instance, i: usize) -> f64 {
        (0..self.periods)
            .map(|k| {
                instance.probability(k) * (instance.buy(i, k) * self.buy(i, k) - instance.sell(i, k) * self.sell(i, k))
            })
            .sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Net surplus `sum (P - C)` of a set of actors at period `k`.
pub fn loop_surplus(instance: &Instance, members: &[usize], k: usize) -> f64 {
    members.iter().map(|&i| instance.surplus(i, k)).sum()
}

/// Expected grid cost `sum_k p_k sum_i (F f - R r)`.
pub fn grid_objective(instance: &Instance, buy: &[f64], sell: &[f64]) -> f64 {
    let periods = instance.periods();
    let mut total = 0.0;
    for i in 0..instance.n() {
        for k in 0..periods {
            let idx = i * periods + k;
            total += instance.probability(k) * (instance.buy(i, k) * buy[idx] - instance.sell(i, k) * sell[idx]);
        }
    }
    total
}

/// Checks every legality property of a solution and returns one message per
/// violation:
///
/// * nonnegative quantities and flow balance at every actor and period;
/// * loops are cliques of the neighbourhood graph within the power cap,
///   coupled actors share their loop status;
/// * flows only between members of the same loop;
/// * with forced individual self-consumption, no actor takes in more than it
///   consumes;
/// * member grid sales never exceed a nonnegative loop surplus, and vanish
///   when the loop is in deficit.
pub fn check_solution(instance: &Instance, graph: &NeighbourhoodGraph, sol: &DesignSolution) -> Vec<String> {
    let mut out = Vec::new();
    let n = instance.n();
    let periods = instance.periods();
    if sol.periods != periods || sol.grid_buy.len() != n * periods || sol.grid_sell.len() != n * periods {
        out.push("solution dimensions do not match the instance".into());
        return out;
    }
    for (name, series) in [("grid_buy", &sol.grid_buy), ("grid_sell", &sol.grid_sell)] {
        if let Some(v) = series.iter().find(|v| **v < -BALANCE_TOL) {
            out.push(format!("{name} has negative value {v}"));
        }
    }
    for f in &sol.flows {
        if f.kwh < -BALANCE_TOL {
            out.push(format!("flow {}->{} at {} is negative", f.from, f.to, f.period));
        }
        if f.from == f.to {
            out.push(format!("self flow at actor {}", f.from));
        }
        match (sol.assignment[f.from], sol.assignment[f.to]) {
            (Some(a), Some(b)) if a == b => {}
            _ if f.kwh <= BALANCE_TOL => {}
            _ => out.push(format!(
                "flow {}->{} at period {} between actors outside a common loop",
                f.from, f.to, f.period
            )),
        }
    }

    let legal = instance.legal();
    for (l, members) in sol.loops.iter().enumerate() {
        if !graph.is_clique(members) {
            out.push(format!("loop {l} is not a clique"));
        }
        let power: f64 = members.iter().map(|&i| instance.actors()[i].installed_power_kwc).sum();
        if power > legal.max_installed_power_kwc + 1e-9 {
            out.push(format!("loop {l} installed power {power} exceeds the cap"));
        }
    }
    for (i, j) in instance.coupled_indices() {
        if sol.assignment[i] != sol.assignment[j] {
            out.push(format!("coupled actors {i} and {j} are split"));
        }
    }

    let (sent, received) = sol.flow_totals(n);
    for i in 0..n {
        for k in 0..periods {
            let idx = i * periods + k;
            let lhs = sent[idx] + sol.grid_sell[idx] + instance.net_cons(i, k);
            let rhs = received[idx] + sol.grid_buy[idx] + instance.net_prod(i, k);
            if (lhs - rhs).abs() > BALANCE_TOL {
                out.push(format!("balance residual {} at actor {i}, period {k}", lhs - rhs));
            }
            if sent[idx] + sol.grid_sell[idx] > instance.bound(i, k) + BALANCE_TOL {
                out.push(format!("actor {i} distributes more than it may at period {k}"));
            }
            if legal.force_individual_sc && received[idx] + sol.grid_buy[idx] > instance.net_cons(i, k) + BALANCE_TOL {
                out.push(format!("actor {i} takes in more than it consumes at period {k}"));
            }
        }
    }

    for (l, members) in sol.loops.iter().enumerate() {
        for k in 0..periods {
            let s = loop_surplus(instance, members, k);
            let sales: f64 = members.iter().map(|&i| sol.sell(i, k)).sum();
            if s >= 0.0 {
                if sales > s + BALANCE_TOL {
                    out.push(format!("loop {l} sells {sales} above its surplus {s} at period {k}"));
                }
            } else if sales > BALANCE_TOL {
                out.push(format!("loop {l} in deficit sells {sales} at period {k}"));
            }
        }
    }
    out
}
