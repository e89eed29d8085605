use rand::seq::SliceRandom;
use rand::RngCore;

use super::{add_period_flows, Affine, Decomposition, RowTag, Subproblem};
use crate::compact::{flow_pairs, sales_big_m, SURPLUS_EPS};
use crate::geometry::NeighbourhoodGraph;
use crate::model::Instance;
use crate::solution::{loop_surplus, ModelKind};
use crate::solver::{LinearModel, RowSense, VarId, VarKey};

/// Single-loop decomposition. Design vector: `x_0..x_{n-1}` followed by one
/// surplus indicator `z_k` per period.
pub struct SlDecomposition<'a> {
    instance: &'a Instance,
    graph: &'a NeighbourhoodGraph,
    subproblems: Vec<Subproblem>,
}

impl<'a> SlDecomposition<'a> {
    pub fn new(instance: &'a Instance, graph: &'a NeighbourhoodGraph) -> Self {
        let subproblems = (0..instance.periods())
            .map(|k| subproblem(instance, graph, k))
            .collect();
        SlDecomposition {
            instance,
            graph,
            subproblems,
        }
    }

    /// Design vector for membership `x`, with each `z_k` set by the sign of
    /// the loop surplus.
    pub fn design(&self, x: &[bool]) -> Vec<f64> {
        let members: Vec<usize> = (0..x.len()).filter(|&i| x[i]).collect();
        let mut d: Vec<f64> = x.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        d.extend((0..self.instance.periods()).map(|k| {
            if loop_surplus(self.instance, &members, k) > -SURPLUS_EPS {
                1.0
            } else {
                0.0
            }
        }));
        d
    }

    fn z(&self, k: usize) -> usize {
        self.instance.n() + k
    }
}

fn subproblem(instance: &Instance, graph: &NeighbourhoodGraph, k: usize) -> Subproblem {
    let n = instance.n();
    let z = n + k;
    let q = sales_big_m(instance, k);
    let m = instance.m(k);
    let mut sub = Subproblem::new(k, format!("slsub_{k}"));
    let pairs = flow_pairs(instance, graph, k);
    let (edges, sell) = add_period_flows(&mut sub, instance, &pairs);
    for &(i, j, e) in &edges {
        sub.row(
            format!("excp_{i}_{j}_{k}"),
            vec![(e, 1.0)],
            RowSense::Le,
            Affine {
                constant: 0.0,
                terms: vec![(i, instance.net_prod(i, k))],
            },
            RowTag::ExchangeProducer { from: i, to: j },
        );
        sub.row(
            format!("excc_{i}_{j}_{k}"),
            vec![(e, 1.0)],
            RowSense::Le,
            Affine {
                constant: 0.0,
                terms: vec![(j, instance.net_cons(j, k))],
            },
            RowTag::ExchangeConsumer { from: i, to: j },
        );
    }
    let mut ys = Vec::new();
    for i in 0..n {
        let Some(r) = sell[i] else {
            continue;
        };
        let y = sub.var(VarKey::new("y", &[i, k]), 0.0, instance.bound(i, k));
        sub.row(
            format!("csc1_{i}_{k}"),
            vec![(y, 1.0)],
            RowSense::Le,
            Affine {
                constant: 0.0,
                terms: vec![(i, q)],
            },
            RowTag::SalesMember { actor: i },
        );
        sub.row(
            format!("csc2_{i}_{k}"),
            vec![(y, 1.0), (r, -1.0)],
            RowSense::Le,
            Affine::constant(0.0),
            RowTag::SalesCap { actor: i },
        );
        sub.row(
            format!("csc3_{i}_{k}"),
            vec![(y, 1.0), (r, -1.0)],
            RowSense::Ge,
            Affine {
                constant: -q,
                terms: vec![(i, q)],
            },
            RowTag::SalesLink { actor: i },
        );
        sub.row(
            format!("csc5_{i}_{k}"),
            vec![(y, 1.0)],
            RowSense::Le,
            Affine {
                constant: 0.0,
                terms: vec![(z, m)],
            },
            RowTag::SalesIndicator { actor: i },
        );
        ys.push((y, 1.0));
    }
    if !ys.is_empty() {
        let mut terms: Vec<(usize, f64)> = (0..n)
            .filter(|&i| instance.surplus(i, k) != 0.0)
            .map(|i| (i, instance.surplus(i, k)))
            .collect();
        terms.push((z, -m));
        sub.row(
            format!("csc4_{k}"),
            ys,
            RowSense::Le,
            Affine { constant: m, terms },
            RowTag::LoopSurplus,
        );
    }
    sub
}

impl Decomposition for SlDecomposition<'_> {
    fn kind(&self) -> ModelKind {
        ModelKind::SlExt
    }

    fn instance(&self) -> &Instance {
        self.instance
    }

    fn subproblems(&self) -> &[Subproblem] {
        &self.subproblems
    }

    fn master(&self) -> (LinearModel, Vec<VarId>) {
        let inst = self.instance;
        let n = inst.n();
        let mut m = LinearModel::new("slext_master");
        let x: Vec<VarId> = (0..n).map(|i| m.add_binary(VarKey::new("x", &[i]), 0.0)).collect();
        let z: Vec<VarId> = (0..inst.periods())
            .map(|k| m.add_binary(VarKey::new("z", &[k]), 0.0))
            .collect();
        for i in 0..n {
            for j in i + 1..n {
                if !self.graph.has_edge(i, j) {
                    m.add_row(
                        format!("conf_{i}_{j}"),
                        vec![(x[i], 1.0), (x[j], 1.0)],
                        RowSense::Le,
                        1.0,
                    );
                }
            }
        }
        let power: Vec<(VarId, f64)> = (0..n)
            .filter(|&i| inst.actors()[i].installed_power_kwc > 0.0)
            .map(|i| (x[i], inst.actors()[i].installed_power_kwc))
            .collect();
        if !power.is_empty() {
            m.add_row("power", power, RowSense::Le, inst.legal().max_installed_power_kwc);
        }
        for (a, b) in inst.coupled_indices() {
            m.add_row(
                format!("couple_{a}_{b}"),
                vec![(x[a], 1.0), (x[b], -1.0)],
                RowSense::Eq,
                0.0,
            );
        }
        for (k, &zk) in z.iter().enumerate() {
            let big = inst.m(k);
            let surplus: Vec<(VarId, f64)> = (0..n)
                .filter(|&i| inst.surplus(i, k) != 0.0)
                .map(|i| (x[i], inst.surplus(i, k)))
                .collect();
            let mut ge = surplus.clone();
            ge.push((zk, -big));
            m.add_row(format!("zlo_{k}"), ge, RowSense::Ge, -big);
            let mut le = surplus;
            le.push((zk, -(big + SURPLUS_EPS)));
            m.add_row(format!("zhi_{k}"), le, RowSense::Le, -SURPLUS_EPS);
        }
        let mut design = x;
        design.extend(z);
        (m, design)
    }

    fn empty_design(&self) -> Vec<f64> {
        self.design(&vec![false; self.instance.n()])
    }

    fn loops(&self, design: &[f64]) -> Vec<Vec<usize>> {
        vec![(0..self.instance.n()).filter(|&i| design[i] > 0.5).collect()]
    }

    fn closed_form_cut(&self, k: usize, duals: &[f64]) -> Affine {
        let inst = self.instance;
        let q = sales_big_m(inst, k);
        let m = inst.m(k);
        let z = self.z(k);
        let mut cut = Affine::default();
        for (tag, &y) in self.subproblems[k].tags().iter().zip(duals) {
            match *tag {
                RowTag::ExchangeProducer { from, .. } => cut.terms.push((from, y * inst.net_prod(from, k))),
                RowTag::ExchangeConsumer { to, .. } => cut.terms.push((to, y * inst.net_cons(to, k))),
                RowTag::Balance { actor } => cut.constant += y * inst.surplus(actor, k),
                RowTag::Circulation { actor } => cut.constant += y * inst.bound(actor, k),
                RowTag::SalesMember { actor } => cut.terms.push((actor, y * q)),
                RowTag::SalesCap { .. } => {}
                RowTag::SalesLink { actor } => {
                    cut.constant -= y * q;
                    cut.terms.push((actor, y * q));
                }
                RowTag::LoopSurplus => {
                    cut.constant += y * m;
                    cut.terms.push((z, -y * m));
                    cut.terms.extend((0..inst.n()).map(|i| (i, y * inst.surplus(i, k))));
                }
                RowTag::SalesIndicator { .. } => cut.terms.push((z, y * m)),
                RowTag::Gate { .. } | RowTag::ExportBlock { .. } | RowTag::CandidateSurplus { .. } => {
                    unreachable!("extended-model row in a single-loop subproblem")
                }
            }
        }
        cut.compact()
    }

    fn random_design(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let inst = self.instance;
        let n = inst.n();
        let cap = inst.legal().max_installed_power_kwc;
        let coupled = inst.coupled_indices();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let target = (rng.next_u32() as usize) % (n + 1);
        let mut chosen: Vec<usize> = Vec::new();
        let mut power = 0.0;
        for i in order {
            if chosen.len() >= target || chosen.contains(&i) {
                continue;
            }
            // The actor and everyone coupled to it, transitively.
            let mut group = vec![i];
            let mut grew = true;
            while grew {
                grew = false;
                for &(a, b) in &coupled {
                    for (u, v) in [(a, b), (b, a)] {
                        if group.contains(&u) && !group.contains(&v) {
                            group.push(v);
                            grew = true;
                        }
                    }
                }
            }
            let extra: f64 = group.iter().map(|&g| inst.actors()[g].installed_power_kwc).sum();
            let mut all = chosen.clone();
            all.extend(&group);
            if power + extra <= cap && self.graph.is_clique(&all) {
                chosen = all;
                power += extra;
            }
        }
        let mut x = vec![false; n];
        for i in chosen {
            x[i] = true;
        }
        self.design(&x)
    }
}
