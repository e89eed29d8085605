use rand::seq::SliceRandom;
use rand::RngCore;

use super::{add_period_flows, Affine, Decomposition, RowTag, Subproblem};
use crate::cliques::{loop_big_m, LoopCandidate};
use crate::compact::{flow_pairs, sales_big_m};
use crate::geometry::NeighbourhoodGraph;
use crate::model::Instance;
use crate::solution::{loop_surplus, ModelKind};
use crate::solver::{LinearModel, RowSense, VarId, VarKey};

/// Decomposition of the extended model. Design vector: one `v_h` per
/// candidate, in candidate order.
pub struct MlDecomposition<'a> {
    instance: &'a Instance,
    candidates: &'a [LoopCandidate],
    /// Candidates containing both actors of an ordered pair, by `i * n + j`.
    shared: Vec<Vec<usize>>,
    subproblems: Vec<Subproblem>,
}

impl<'a> MlDecomposition<'a> {
    pub fn new(instance: &'a Instance, graph: &NeighbourhoodGraph, candidates: &'a [LoopCandidate]) -> Self {
        let n = instance.n();
        let mut shared: Vec<Vec<usize>> = vec![Vec::new(); n * n];
        for (h, c) in candidates.iter().enumerate() {
            for &i in &c.members {
                for &j in &c.members {
                    if i != j {
                        shared[i * n + j].push(h);
                    }
                }
            }
        }
        let mut d = MlDecomposition {
            instance,
            candidates,
            shared,
            subproblems: Vec::new(),
        };
        d.subproblems = (0..instance.periods()).map(|k| d.subproblem(graph, k)).collect();
        d
    }

    /// Design vector selecting the candidates at the given positions.
    pub fn design(&self, selected: &[usize]) -> Vec<f64> {
        let mut d = vec![0.0; self.candidates.len()];
        for &h in selected {
            d[h] = 1.0;
        }
        d
    }

    fn blocking(&self, i: usize, k: usize) -> Vec<usize> {
        (0..self.candidates.len())
            .filter(|&h| self.candidates[h].contains(i) && !self.candidates[h].is_net_producer(k))
            .collect()
    }

    fn subproblem(&self, graph: &NeighbourhoodGraph, k: usize) -> Subproblem {
        let inst = self.instance;
        let n = inst.n();
        let q = sales_big_m(inst, k);
        let mut sub = Subproblem::new(k, format!("mlsub_{k}"));
        let pairs: Vec<(usize, usize)> = flow_pairs(inst, graph, k)
            .into_iter()
            .filter(|&(i, j)| !self.shared[i * n + j].is_empty())
            .collect();
        let (edges, sell) = add_period_flows(&mut sub, inst, &pairs);
        for &(i, j, e) in &edges {
            let d = inst.flow_cap(i, j, k);
            sub.row(
                format!("gate_{i}_{j}_{k}"),
                vec![(e, 1.0)],
                RowSense::Le,
                Affine {
                    constant: 0.0,
                    terms: self.shared[i * n + j].iter().map(|&h| (h, d)).collect(),
                },
                RowTag::Gate { from: i, to: j },
            );
        }
        for i in 0..n {
            let Some(r) = sell[i] else {
                continue;
            };
            let blocking = self.blocking(i, k);
            if !blocking.is_empty() {
                sub.row(
                    format!("block_{i}_{k}"),
                    vec![(r, 1.0)],
                    RowSense::Le,
                    Affine {
                        constant: q,
                        terms: blocking.into_iter().map(|h| (h, -q)).collect(),
                    },
                    RowTag::ExportBlock { actor: i },
                );
            }
        }
        for (h, c) in self.candidates.iter().enumerate() {
            if !c.is_net_producer(k) {
                continue;
            }
            let sells: Vec<(VarId, f64)> = c.members.iter().filter_map(|&i| sell[i].map(|r| (r, 1.0))).collect();
            if sells.is_empty() {
                continue;
            }
            let s = loop_surplus(inst, &c.members, k);
            let big = loop_big_m(inst, &c.members, k);
            sub.row(
                format!("lsur_{h}_{k}"),
                sells,
                RowSense::Le,
                Affine {
                    constant: big,
                    terms: vec![(h, s - big)],
                },
                RowTag::CandidateSurplus { candidate: h },
            );
        }
        sub
    }
}

impl Decomposition for MlDecomposition<'_> {
    fn kind(&self) -> ModelKind {
        ModelKind::MlColExt
    }

    fn instance(&self) -> &Instance {
        self.instance
    }

    fn subproblems(&self) -> &[Subproblem] {
        &self.subproblems
    }

    fn master(&self) -> (LinearModel, Vec<VarId>) {
        let mut m = LinearModel::new("mlcolext_master");
        let v: Vec<VarId> = self
            .candidates
            .iter()
            .map(|c| m.add_binary(VarKey::new("v", &[c.id]), 0.0))
            .collect();
        for i in 0..self.instance.n() {
            let terms: Vec<(VarId, f64)> = (0..self.candidates.len())
                .filter(|&h| self.candidates[h].contains(i))
                .map(|h| (v[h], 1.0))
                .collect();
            if terms.len() > 1 {
                m.add_row(format!("pack_{i}"), terms, RowSense::Le, 1.0);
            }
        }
        (m, v)
    }

    fn empty_design(&self) -> Vec<f64> {
        vec![0.0; self.candidates.len()]
    }

    fn loops(&self, design: &[f64]) -> Vec<Vec<usize>> {
        self.candidates
            .iter()
            .zip(design)
            .filter(|(_, &v)| v > 0.5)
            .map(|(c, _)| c.members.clone())
            .collect()
    }

    fn closed_form_cut(&self, k: usize, duals: &[f64]) -> Affine {
        let inst = self.instance;
        let n = inst.n();
        let q = sales_big_m(inst, k);
        let mut cut = Affine::default();
        for (tag, &y) in self.subproblems[k].tags().iter().zip(duals) {
            match *tag {
                RowTag::Gate { from, to } => {
                    let d = inst.flow_cap(from, to, k);
                    cut.terms.extend(self.shared[from * n + to].iter().map(|&h| (h, y * d)));
                }
                RowTag::Balance { actor } => cut.constant += y * inst.surplus(actor, k),
                RowTag::Circulation { actor } => cut.constant += y * inst.bound(actor, k),
                RowTag::ExportBlock { actor } => {
                    cut.constant += y * q;
                    cut.terms
                        .extend(self.blocking(actor, k).into_iter().map(|h| (h, -y * q)));
                }
                RowTag::CandidateSurplus { candidate } => {
                    let members = &self.candidates[candidate].members;
                    let big = loop_big_m(inst, members, k);
                    cut.constant += y * big;
                    cut.terms.push((candidate, -y * (big - loop_surplus(inst, members, k))));
                }
                _ => unreachable!("single-loop row in an extended-model subproblem"),
            }
        }
        cut.compact()
    }

    fn random_design(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let mut order: Vec<usize> = (0..self.candidates.len()).collect();
        order.shuffle(rng);
        let target = (rng.next_u32() as usize) % (self.candidates.len() + 1);
        let mut used = vec![false; self.instance.n()];
        let mut chosen = Vec::new();
        for h in order {
            if chosen.len() >= target {
                break;
            }
            let members = &self.candidates[h].members;
            if members.iter().all(|&i| !used[i]) {
                members.iter().for_each(|&i| used[i] = true);
                chosen.push(h);
            }
        }
        self.design(&chosen)
    }
}
