//! Compact single-loop and multi-loop MILP formulations.

use crate::error::{Error, Result};
use crate::geometry::NeighbourhoodGraph;
use crate::model::Instance;
use crate::solution::{DesignSolution, Flow, ModelKind, NOISE_TOL};
use crate::solver::{LinearModel, RowSense, SolveResult, VarId, VarKey};

/// Gap used to make the loop-surplus sign test strict on the negative side, kWh.
pub const SURPLUS_EPS: f64 = 1e-6;

/// Tolerance for reading a binary value as 0 or 1.
pub const BINARY_TOL: f64 = 1e-6;

/// Big-M bounding one actor's grid sales: the total net surplus, raised to the
/// largest circulation bound when individual self-consumption is not forced.
pub fn sales_big_m(instance: &Instance, k: usize) -> f64 {
    (0..instance.n())
        .map(|i| instance.bound(i, k))
        .fold(instance.q(k), f64::max)
}

/// Ordered pairs `(i, j)` over graph edges that can carry flow at period `k`.
pub fn flow_pairs(instance: &Instance, graph: &NeighbourhoodGraph, k: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..instance.n() {
        if instance.net_prod(i, k) <= 0.0 {
            continue;
        }
        for &j in graph.neighbours(i) {
            if instance.net_cons(j, k) > 0.0 {
                out.push((i, j));
            }
        }
    }
    out
}

/// Flow variables shared by every compact and extended model.
pub(crate) struct FlowLayer {
    /// Per period: `(i, j, e_ij)`.
    pub edges: Vec<Vec<(usize, usize, VarId)>>,
    pub buy: Vec<VarId>,
    /// `None` where the circulation bound is zero.
    pub sell: Vec<Option<VarId>>,
}

/// Adds `e`, `f`, `r` with objective `p (F f - R r)`, flow balance and the
/// circulation bound.
pub(crate) fn add_flow_layer(model: &mut LinearModel, instance: &Instance, graph: &NeighbourhoodGraph) -> FlowLayer {
    add_flow_layer_filtered(model, instance, graph, |_, _| true)
}

/// As [`add_flow_layer`], creating flow variables only for pairs accepted by
/// `keep`.
pub(crate) fn add_flow_layer_filtered(
    model: &mut LinearModel,
    instance: &Instance,
    graph: &NeighbourhoodGraph,
    keep: impl Fn(usize, usize) -> bool,
) -> FlowLayer {
    let n = instance.n();
    let periods = instance.periods();
    let mut layer = FlowLayer {
        edges: Vec::with_capacity(periods),
        buy: Vec::with_capacity(n * periods),
        sell: Vec::with_capacity(n * periods),
    };
    for k in 0..periods {
        let edges = flow_pairs(instance, graph, k)
            .into_iter()
            .filter(|&(i, j)| keep(i, j))
            .map(|(i, j)| (i, j, model.add_nonneg(VarKey::new("e", &[i, j, k]), 0.0)))
            .collect();
        layer.edges.push(edges);
    }
    for i in 0..n {
        for k in 0..periods {
            let p = instance.probability(k);
            layer
                .buy
                .push(model.add_nonneg(VarKey::new("f", &[i, k]), p * instance.buy(i, k)));
            let r = (instance.bound(i, k) > 0.0)
                .then(|| model.add_nonneg(VarKey::new("r", &[i, k]), -p * instance.sell(i, k)));
            layer.sell.push(r);
        }
    }
    for k in 0..periods {
        let mut out_terms: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); n];
        let mut balance: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); n];
        for &(i, j, e) in &layer.edges[k] {
            balance[i].push((e, 1.0));
            balance[j].push((e, -1.0));
            out_terms[i].push((e, 1.0));
        }
        for i in 0..n {
            let idx = i * periods + k;
            let mut terms = std::mem::take(&mut balance[i]);
            let mut circ = std::mem::take(&mut out_terms[i]);
            if let Some(r) = layer.sell[idx] {
                terms.push((r, 1.0));
                circ.push((r, 1.0));
            }
            terms.push((layer.buy[idx], -1.0));
            model.add_row(format!("kir_{i}_{k}"), terms, RowSense::Eq, instance.surplus(i, k));
            if !circ.is_empty() {
                model.add_row(format!("circ_{i}_{k}"), circ, RowSense::Le, instance.bound(i, k));
            }
        }
    }
    layer
}

/// Rows tying a loop's membership binaries to its surplus indicator and
/// collective self-consumption variables at period `k`:
/// `y_i <= Q x_i`, `y_i <= r_i`, `y_i >= r_i - Q (1 - x_i)`,
/// `sum y <= sum x (P - C) + M (1 - z)`, `y_i <= M z`, and
/// `z = 1 <=> sum x (P - C) >= 0`.
fn add_collective_rows(
    model: &mut LinearModel,
    instance: &Instance,
    layer: &FlowLayer,
    x: &[VarId],
    z: VarId,
    y_key: impl Fn(usize) -> VarKey,
    tag: &str,
    k: usize,
) {
    let n = instance.n();
    let periods = instance.periods();
    let q = sales_big_m(instance, k);
    let m = instance.m(k);
    let mut sum_terms = Vec::new();
    for i in 0..n {
        let Some(r) = layer.sell[i * periods + k] else {
            continue;
        };
        let y = model.add_nonneg(y_key(i), 0.0);
        model.add_row(
            format!("csc1_{tag}{i}_{k}"),
            vec![(y, 1.0), (x[i], -q)],
            RowSense::Le,
            0.0,
        );
        model.add_row(
            format!("csc2_{tag}{i}_{k}"),
            vec![(y, 1.0), (r, -1.0)],
            RowSense::Le,
            0.0,
        );
        model.add_row(
            format!("csc3_{tag}{i}_{k}"),
            vec![(y, 1.0), (r, -1.0), (x[i], -q)],
            RowSense::Ge,
            -q,
        );
        model.add_row(format!("csc5_{tag}{i}_{k}"), vec![(y, 1.0), (z, -m)], RowSense::Le, 0.0);
        sum_terms.push((y, 1.0));
    }
    let surplus: Vec<(VarId, f64)> = (0..n)
        .filter(|&i| instance.surplus(i, k) != 0.0)
        .map(|i| (x[i], instance.surplus(i, k)))
        .collect();
    if !sum_terms.is_empty() {
        let mut terms = sum_terms;
        terms.extend(surplus.iter().map(|&(v, a)| (v, -a)));
        terms.push((z, m));
        model.add_row(format!("csc4_{tag}{k}"), terms, RowSense::Le, m);
    }
    let mut ge = surplus.clone();
    ge.push((z, -m));
    model.add_row(format!("zlo_{tag}{k}"), ge, RowSense::Ge, -m);
    let mut le = surplus;
    le.push((z, -(m + SURPLUS_EPS)));
    model.add_row(format!("zhi_{tag}{k}"), le, RowSense::Le, -SURPLUS_EPS);
}

/// Single-loop compact model.
pub fn build_slcpct(instance: &Instance, graph: &NeighbourhoodGraph) -> LinearModel {
    let n = instance.n();
    let periods = instance.periods();
    let mut model = LinearModel::new("slcpct");
    let x: Vec<VarId> = (0..n).map(|i| model.add_binary(VarKey::new("x", &[i]), 0.0)).collect();
    let layer = add_flow_layer(&mut model, instance, graph);

    for k in 0..periods {
        for &(i, j, e) in &layer.edges[k] {
            model.add_row(
                format!("excp_{i}_{j}_{k}"),
                vec![(e, 1.0), (x[i], -instance.net_prod(i, k))],
                RowSense::Le,
                0.0,
            );
            model.add_row(
                format!("excc_{i}_{j}_{k}"),
                vec![(e, 1.0), (x[j], -instance.net_cons(j, k))],
                RowSense::Le,
                0.0,
            );
        }
        let z = model.add_binary(VarKey::new("z", &[k]), 0.0);
        add_collective_rows(
            &mut model,
            instance,
            &layer,
            &x,
            z,
            |i| VarKey::new("y", &[i, k]),
            "",
            k,
        );
    }
    add_design_rows(&mut model, instance, graph, &x, "");
    model
}

/// Conflict, power and coupling rows over one loop's membership binaries.
fn add_design_rows(model: &mut LinearModel, instance: &Instance, graph: &NeighbourhoodGraph, x: &[VarId], tag: &str) {
    let n = instance.n();
    for i in 0..n {
        for j in i + 1..n {
            if !graph.has_edge(i, j) {
                model.add_row(
                    format!("conf_{tag}{i}_{j}"),
                    vec![(x[i], 1.0), (x[j], 1.0)],
                    RowSense::Le,
                    1.0,
                );
            }
        }
    }
    let power: Vec<(VarId, f64)> = (0..n)
        .filter(|&i| instance.actors()[i].installed_power_kwc > 0.0)
        .map(|i| (x[i], instance.actors()[i].installed_power_kwc))
        .collect();
    if !power.is_empty() {
        model.add_row(
            format!("power_{tag}"),
            power,
            RowSense::Le,
            instance.legal().max_installed_power_kwc,
        );
    }
    for (a, b) in instance.coupled_indices() {
        model.add_row(
            format!("couple_{tag}{a}_{b}"),
            vec![(x[a], 1.0), (x[b], -1.0)],
            RowSense::Eq,
            0.0,
        );
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MultiLoopOptions {
    /// Number of loop slots; `None` means `max(1, n / 2)`.
    pub max_loops: Option<usize>,
    pub symmetry_breaking: bool,
}

impl Default for MultiLoopOptions {
    fn default() -> Self {
        MultiLoopOptions {
            max_loops: None,
            symmetry_breaking: true,
        }
    }
}

impl MultiLoopOptions {
    pub fn loops_for(&self, n: usize) -> usize {
        self.max_loops.unwrap_or((n / 2).max(1))
    }
}

/// Multi-loop compact model.
pub fn build_mlcpct(instance: &Instance, graph: &NeighbourhoodGraph, options: MultiLoopOptions) -> Result<LinearModel> {
    let n = instance.n();
    let periods = instance.periods();
    let loops = options.loops_for(n);
    if loops < 1 {
        return Err(Error::Input("max_loops must be at least 1".into()));
    }
    let mut model = LinearModel::new("mlcpct");
    let x: Vec<Vec<VarId>> = (0..loops)
        .map(|l| {
            (0..n)
                .map(|i| model.add_binary(VarKey::new("xl", &[l, i]), 0.0))
                .collect()
        })
        .collect();
    let layer = add_flow_layer(&mut model, instance, graph);

    // One w per loop and undirected edge that carries flow in some period.
    let mut used = vec![false; n * n];
    for edges in &layer.edges {
        for &(i, j, _) in edges {
            used[i.min(j) * n + i.max(j)] = true;
        }
    }
    let mut w: Vec<Vec<Option<VarId>>> = vec![vec![None; n * n]; loops];
    for (l, wl) in w.iter_mut().enumerate() {
        for (i, j) in graph.edges() {
            if used[i * n + j] {
                let v = model.add_binary(VarKey::new("w", &[l, i, j]), 0.0);
                model.add_row(
                    format!("w1_{l}_{i}_{j}"),
                    vec![(v, 1.0), (x[l][i], -1.0)],
                    RowSense::Le,
                    0.0,
                );
                model.add_row(
                    format!("w2_{l}_{i}_{j}"),
                    vec![(v, 1.0), (x[l][j], -1.0)],
                    RowSense::Le,
                    0.0,
                );
                wl[i * n + j] = Some(v);
            }
        }
    }
    for k in 0..periods {
        for &(i, j, e) in &layer.edges[k] {
            let d = instance.flow_cap(i, j, k);
            let mut terms = vec![(e, 1.0)];
            for wl in &w {
                terms.push((wl[i.min(j) * n + i.max(j)].expect("edge gate"), -d));
            }
            model.add_row(format!("gate_{i}_{j}_{k}"), terms, RowSense::Le, 0.0);
        }
        for (l, xl) in x.iter().enumerate() {
            let z = model.add_binary(VarKey::new("zl", &[l, k]), 0.0);
            add_collective_rows(
                &mut model,
                instance,
                &layer,
                xl,
                z,
                |i| VarKey::new("yl", &[l, i, k]),
                &format!("l{l}_"),
                k,
            );
        }
    }
    for (l, xl) in x.iter().enumerate() {
        add_design_rows(&mut model, instance, graph, xl, &format!("l{l}_"));
    }
    for i in 0..n {
        model.add_row(
            format!("oneloop_{i}"),
            x.iter().map(|xl| (xl[i], 1.0)).collect(),
            RowSense::Le,
            1.0,
        );
    }
    if options.symmetry_breaking {
        for l in 0..loops.saturating_sub(1) {
            let mut terms: Vec<(VarId, f64)> = x[l].iter().map(|&v| (v, 1.0)).collect();
            terms.extend(x[l + 1].iter().map(|&v| (v, -1.0)));
            model.add_row(format!("sym_{l}"), terms, RowSense::Ge, 0.0);
        }
    }
    Ok(model)
}

/// Reads a binary, failing when it is not within [`BINARY_TOL`] of 0 or 1.
pub(crate) fn read_binary(model: &LinearModel, values: &[f64], var: VarId) -> Result<bool> {
    let v = values[var.0];
    if v <= BINARY_TOL {
        Ok(false)
    } else if v >= 1.0 - BINARY_TOL {
        Ok(true)
    } else {
        Err(Error::FractionalBinary {
            name: model.variables()[var.0].name.clone(),
            value: v,
        })
    }
}

/// Flows and grid trades read from the `e`, `f`, `r` variables of a model.
pub(crate) fn read_flows(model: &LinearModel, values: &[f64], instance: &Instance) -> (Vec<Flow>, Vec<f64>, Vec<f64>) {
    let periods = instance.periods();
    let mut flows = Vec::new();
    let mut buy = vec![0.0; instance.n() * periods];
    let mut sell = vec![0.0; instance.n() * periods];
    for (idx, value) in values.iter().enumerate() {
        let Some(key) = model.key_of(VarId(idx)) else {
            continue;
        };
        let v = if value.abs() < NOISE_TOL { 0.0 } else { *value };
        match (key.family, key.index.as_slice()) {
            ("e", &[i, j, k]) if v != 0.0 => flows.push(Flow {
                from: i,
                to: j,
                period: k,
                kwh: v,
            }),
            ("f", &[i, k]) => buy[i * periods + k] = v,
            ("r", &[i, k]) => sell[i * periods + k] = v,
            _ => {}
        }
    }
    (flows, buy, sell)
}

/// Builds a [`DesignSolution`] from an optimal solve of a compact or
/// extended model. `columns` holds the candidate loops of an extended model.
pub fn extract_solution(
    kind: ModelKind,
    instance: &Instance,
    model: &LinearModel,
    result: &SolveResult,
    columns: Option<&[Vec<usize>]>,
) -> Result<DesignSolution> {
    if !result.has_solution() {
        return Err(Error::Status {
            model: model.name.clone(),
            status: result.status,
        });
    }
    let values = &result.values;
    for (idx, v) in model.variables().iter().enumerate() {
        if v.integrality == crate::solver::Integrality::Binary {
            read_binary(model, values, VarId(idx))?;
        }
    }
    let n = instance.n();
    let loops: Vec<Vec<usize>> = match kind {
        ModelKind::SlCpct | ModelKind::SlExt => {
            let members = (0..n)
                .filter(|&i| model.var(&VarKey::new("x", &[i])).is_some_and(|v| values[v.0] > 0.5))
                .collect();
            vec![members]
        }
        ModelKind::MlCpct => {
            let mut loops: Vec<Vec<usize>> = Vec::new();
            for (idx, key) in (0..model.num_vars()).filter_map(|j| model.key_of(VarId(j)).map(|k| (j, k))) {
                if key.family == "xl" && values[idx] > 0.5 {
                    let (l, i) = (key.index[0], key.index[1]);
                    if loops.len() <= l {
                        loops.resize(l + 1, Vec::new());
                    }
                    loops[l].push(i);
                }
            }
            loops
        }
        ModelKind::MlCol | ModelKind::MlColExt => {
            let columns =
                columns.ok_or_else(|| Error::Input("extended model extraction needs the candidate loops".into()))?;
            columns
                .iter()
                .enumerate()
                .filter(|(h, _)| model.var(&VarKey::new("v", &[*h])).is_some_and(|v| values[v.0] > 0.5))
                .map(|(_, c)| c.clone())
                .collect()
        }
    };
    let (flows, buy, sell) = read_flows(model, values, instance);
    let sol = DesignSolution::assemble(kind, instance, loops, flows, buy, sell);
    let tol = 1e-6 * result.objective.abs().max(1.0);
    if (sol.objective - result.objective).abs() > tol {
        return Err(Error::Backend(format!(
            "recomputed objective {} differs from solver objective {}",
            sol.objective, result.objective
        )));
    }
    Ok(sol)
}
