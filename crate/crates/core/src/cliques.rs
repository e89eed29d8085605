//! Loop candidate generation and the extended (column) model.
//!
//! Coupled actors are contracted into a single node before enumeration, so
//! every candidate respects the coupling by construction.

use std::collections::BTreeSet;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compact::{add_flow_layer_filtered, sales_big_m};
use crate::error::{Error, Result};
use crate::geometry::NeighbourhoodGraph;
use crate::model::Instance;
use crate::solution::loop_surplus;
use crate::solver::{LinearModel, RowSense, VarId, VarKey};

pub const DEFAULT_CANDIDATE_CAP: usize = 100_000;

/// A maximal feasible loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopCandidate {
    pub id: usize,
    /// Sorted actor indices.
    pub members: Vec<usize>,
    pub installed_power_kwc: f64,
    /// Periods at which the loop has a nonnegative net surplus.
    pub net_producer_periods: Vec<usize>,
}

impl LoopCandidate {
    pub fn contains(&self, i: usize) -> bool {
        self.members.binary_search(&i).is_ok()
    }

    pub fn is_net_producer(&self, k: usize) -> bool {
        self.net_producer_periods.binary_search(&k).is_ok()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CliqueMode {
    /// Maximal cliques first, then knapsack-maximal subsets of oversized ones.
    #[default]
    TwoStage,
    /// Bron–Kerbosch that never adds a node exceeding the remaining capacity.
    CapacityAware,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CandidateOptions {
    pub mode: CliqueMode,
    pub cap: usize,
}

impl Default for CandidateOptions {
    fn default() -> Self {
        CandidateOptions {
            mode: CliqueMode::TwoStage,
            cap: DEFAULT_CANDIDATE_CAP,
        }
    }
}

/// All maximal cliques of `graph` that contain at least one seed, sorted.
pub fn enumerate_maximal_cliques(graph: &NeighbourhoodGraph, seeds: &[usize]) -> Vec<Vec<usize>> {
    let mut seeds: Vec<usize> = seeds.to_vec();
    seeds.sort_unstable();
    seeds.dedup();
    let found: Vec<Vec<Vec<usize>>> = seeds
        .par_iter()
        .map(|&s| {
            let mut out = Vec::new();
            let p: Vec<usize> = graph.neighbours(s).to_vec();
            bron_kerbosch(graph, &mut vec![s], p, Vec::new(), &mut out);
            out
        })
        .collect();
    let set: BTreeSet<Vec<usize>> = found
        .into_iter()
        .flatten()
        .map(|mut c| {
            c.sort_unstable();
            c
        })
        .collect();
    set.into_iter().collect()
}

fn bron_kerbosch(
    graph: &NeighbourhoodGraph,
    r: &mut Vec<usize>,
    p: Vec<usize>,
    x: Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if p.is_empty() {
        if x.is_empty() {
            out.push(r.clone());
        }
        return;
    }
    let pivot = p
        .iter()
        .chain(&x)
        .copied()
        .max_by_key(|&u| p.iter().filter(|&&v| graph.has_edge(u, v)).count())
        .expect("p is nonempty");
    let mut p = p;
    let mut x = x;
    let branch: Vec<usize> = p.iter().copied().filter(|&v| !graph.has_edge(pivot, v)).collect();
    for v in branch {
        let np = p.iter().copied().filter(|&u| graph.has_edge(u, v)).collect();
        let nx = x.iter().copied().filter(|&u| graph.has_edge(u, v)).collect();
        r.push(v);
        bron_kerbosch(graph, r, np, nx, out);
        r.pop();
        p.retain(|&u| u != v);
        x.push(v);
    }
}

/// Maximal subsets of items whose total weight fits in `capacity`. Items
/// heavier than the capacity belong to no subset. Returned subsets hold item
/// indices in increasing order.
pub fn knapsack_maximal_subsets(weights: &[f64], capacity: f64) -> Vec<Vec<usize>> {
    let items: Vec<usize> = (0..weights.len())
        .filter(|&i| {
            if weights[i] > capacity {
                warn!("item {i} with weight {} exceeds capacity {capacity}", weights[i]);
                false
            } else {
                true
            }
        })
        .collect();
    let mut out = Vec::new();
    let mut chosen = Vec::new();
    knapsack_rec(weights, capacity, &items, 0, 0.0, &mut chosen, &mut out);
    out
}

fn knapsack_rec(
    w: &[f64],
    cap: f64,
    items: &[usize],
    pos: usize,
    load: f64,
    chosen: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if pos == items.len() {
        let fits_more = items.iter().any(|&i| !chosen.contains(&i) && load + w[i] <= cap);
        if !fits_more {
            out.push(chosen.clone());
        }
        return;
    }
    let i = items[pos];
    if load + w[i] <= cap {
        chosen.push(i);
        knapsack_rec(w, cap, items, pos + 1, load + w[i], chosen, out);
        chosen.pop();
    }
    // A skipped item must be blocked by the final load.
    let rest: f64 = items[pos + 1..].iter().map(|&j| w[j]).sum();
    if load + rest + w[i] > cap {
        knapsack_rec(w, cap, items, pos + 1, load, chosen, out);
    }
}

/// Maximal cliques where every member fits the remaining capacity.
fn capacity_aware_cliques(
    graph: &NeighbourhoodGraph,
    weights: &[f64],
    capacity: f64,
    seeds: &[usize],
) -> Vec<Vec<usize>> {
    fn rec(
        graph: &NeighbourhoodGraph,
        w: &[f64],
        cap: f64,
        r: &mut Vec<usize>,
        load: f64,
        p: Vec<usize>,
        x: Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        let p: Vec<usize> = p.into_iter().filter(|&v| load + w[v] <= cap).collect();
        let x: Vec<usize> = x.into_iter().filter(|&v| load + w[v] <= cap).collect();
        if p.is_empty() {
            if x.is_empty() {
                out.push(r.clone());
            }
            return;
        }
        let mut p = p;
        let mut x = x;
        while let Some(v) = p.first().copied() {
            let np = p.iter().copied().filter(|&u| u != v && graph.has_edge(u, v)).collect();
            let nx = x.iter().copied().filter(|&u| graph.has_edge(u, v)).collect();
            r.push(v);
            rec(graph, w, cap, r, load + w[v], np, nx, out);
            r.pop();
            p.remove(0);
            x.push(v);
        }
    }
    let mut set = BTreeSet::new();
    for &s in seeds {
        if weights[s] > capacity {
            continue;
        }
        let mut out = Vec::new();
        rec(
            graph,
            weights,
            capacity,
            &mut vec![s],
            weights[s],
            graph.neighbours(s).to_vec(),
            Vec::new(),
            &mut out,
        );
        for mut c in out {
            c.sort_unstable();
            set.insert(c);
        }
    }
    set.into_iter().collect()
}

/// Coupled actors merged into one node each.
struct Contracted {
    groups: Vec<Vec<usize>>,
    graph: NeighbourhoodGraph,
    power: Vec<f64>,
}

fn contract(instance: &Instance, graph: &NeighbourhoodGraph) -> Contracted {
    let n = instance.n();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], i: usize) -> usize {
        let mut root = i;
        while parent[root] != root {
            root = parent[root];
        }
        parent[i] = root;
        root
    }
    for (a, b) in instance.coupled_indices() {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut by_root: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let r = find(&mut parent, i);
        by_root[r].push(i);
    }
    let cap = instance.legal().max_installed_power_kwc;
    let groups: Vec<Vec<usize>> = by_root
        .into_iter()
        .filter(|g| !g.is_empty() && graph.is_clique(g))
        .filter(|g| {
            let p: f64 = g.iter().map(|&i| instance.actors()[i].installed_power_kwc).sum();
            p <= cap
        })
        .collect();
    let power = groups
        .iter()
        .map(|g| g.iter().map(|&i| instance.actors()[i].installed_power_kwc).sum())
        .collect();
    let m = groups.len();
    let mut edges = Vec::new();
    for a in 0..m {
        for b in a + 1..m {
            if groups[a]
                .iter()
                .all(|&i| groups[b].iter().all(|&j| graph.has_edge(i, j)))
            {
                edges.push((a, b));
            }
        }
    }
    Contracted {
        graph: NeighbourhoodGraph::from_edges(m, edges),
        groups,
        power,
    }
}

/// Enumerates every maximal feasible loop: a clique of the neighbourhood
/// graph within the power cap, with at least two members, one candidate
/// producer and one candidate consumer, honouring coupled pairs, and not
/// contained in another such loop.
pub fn generate_loop_candidates(
    instance: &Instance,
    graph: &NeighbourhoodGraph,
    options: CandidateOptions,
) -> Result<Vec<LoopCandidate>> {
    let c = contract(instance, graph);
    let cap = instance.legal().max_installed_power_kwc;
    let seeds: Vec<usize> = (0..c.groups.len())
        .filter(|&g| c.groups[g].iter().any(|&i| instance.is_candidate_producer(i)))
        .collect();

    let node_sets: Vec<Vec<usize>> = match options.mode {
        CliqueMode::TwoStage => {
            let mut sets = BTreeSet::new();
            for clique in enumerate_maximal_cliques(&c.graph, &seeds) {
                let power: f64 = clique.iter().map(|&g| c.power[g]).sum();
                if power <= cap {
                    sets.insert(clique.clone());
                } else {
                    let (free, weighted): (Vec<usize>, Vec<usize>) = clique.iter().partition(|&&g| c.power[g] <= 0.0);
                    let weights: Vec<f64> = weighted.iter().map(|&g| c.power[g]).collect();
                    for subset in knapsack_maximal_subsets(&weights, cap) {
                        let mut s: Vec<usize> = free.clone();
                        s.extend(subset.into_iter().map(|k| weighted[k]));
                        s.sort_unstable();
                        sets.insert(s);
                    }
                }
                if sets.len() > options.cap {
                    return Err(too_many(instance, &c, &clique, options.cap));
                }
            }
            sets.into_iter().collect()
        }
        CliqueMode::CapacityAware => capacity_aware_cliques(&c.graph, &c.power, cap, &seeds),
    };

    let mut loops: Vec<Vec<usize>> = node_sets
        .into_iter()
        .map(|nodes| {
            let mut members: Vec<usize> = nodes.iter().flat_map(|&g| c.groups[g].iter().copied()).collect();
            members.sort_unstable();
            members
        })
        .filter(|m| {
            m.len() >= 2
                && m.iter().any(|&i| instance.is_candidate_producer(i))
                && m.iter().any(|&i| instance.is_candidate_consumer(i))
        })
        .collect();
    loops.sort();
    loops.dedup();
    if loops.len() > options.cap {
        let first = loops[0].clone();
        return Err(Error::TooManyCandidates {
            cap: options.cap,
            clique: first.iter().map(|&i| instance.actors()[i].id.clone()).collect(),
        });
    }
    let loops = drop_contained(instance.n(), loops);

    Ok(loops
        .into_iter()
        .enumerate()
        .map(|(id, members)| candidate(instance, id, members))
        .collect())
}

fn too_many(instance: &Instance, c: &Contracted, clique: &[usize], cap: usize) -> Error {
    Error::TooManyCandidates {
        cap,
        clique: clique
            .iter()
            .flat_map(|&g| c.groups[g].iter().map(|&i| instance.actors()[i].id.clone()))
            .collect(),
    }
}

fn drop_contained(n: usize, loops: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    let words = n.div_ceil(64).max(1);
    let bits: Vec<Vec<u64>> = loops
        .iter()
        .map(|l| {
            let mut b = vec![0u64; words];
            for &i in l {
                b[i / 64] |= 1 << (i % 64);
            }
            b
        })
        .collect();
    let keep: Vec<bool> = (0..loops.len())
        .into_par_iter()
        .map(|a| {
            !(0..loops.len()).any(|b| {
                b != a && loops[b].len() > loops[a].len() && bits[a].iter().zip(&bits[b]).all(|(x, y)| x & !y == 0)
            })
        })
        .collect();
    loops
        .into_iter()
        .zip(keep)
        .filter_map(|(l, k)| k.then_some(l))
        .collect()
}

fn candidate(instance: &Instance, id: usize, members: Vec<usize>) -> LoopCandidate {
    let installed_power_kwc = members.iter().map(|&i| instance.actors()[i].installed_power_kwc).sum();
    let net_producer_periods = (0..instance.periods())
        .filter(|&k| loop_surplus(instance, &members, k) >= 0.0)
        .collect();
    LoopCandidate {
        id,
        members,
        installed_power_kwc,
        net_producer_periods,
    }
}

#[derive(Serialize)]
struct CandidateDoc<'a> {
    id: usize,
    members: Vec<&'a str>,
    installed_power_kwc: f64,
    net_producer_period_count: usize,
    net_producer_periods: &'a [usize],
}

/// Candidate set as JSON, members given by actor id.
pub fn candidates_to_json(instance: &Instance, candidates: &[LoopCandidate]) -> Result<String> {
    let docs: Vec<CandidateDoc> = candidates
        .iter()
        .map(|c| CandidateDoc {
            id: c.id,
            members: c.members.iter().map(|&i| instance.actors()[i].id.as_str()).collect(),
            installed_power_kwc: c.installed_power_kwc,
            net_producer_period_count: c.net_producer_periods.len(),
            net_producer_periods: &c.net_producer_periods,
        })
        .collect();
    Ok(serde_json::to_string_pretty(&docs)?)
}

/// Big-M for the loop-surplus row of a candidate at period `k`.
pub fn loop_big_m(instance: &Instance, members: &[usize], k: usize) -> f64 {
    let bound: f64 = members.iter().map(|&i| instance.bound(i, k)).sum();
    instance.q(k).max(bound)
}

/// Extended model over the candidate loops.
pub fn build_mlcol(instance: &Instance, graph: &NeighbourhoodGraph, candidates: &[LoopCandidate]) -> LinearModel {
    let n = instance.n();
    let periods = instance.periods();
    let mut model = LinearModel::new("mlcol");
    let v: Vec<VarId> = candidates
        .iter()
        .map(|c| model.add_binary(VarKey::new("v", &[c.id]), 0.0))
        .collect();
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
    let layer = add_flow_layer_filtered(&mut model, instance, graph, |i, j| !shared[i * n + j].is_empty());

    for k in 0..periods {
        for &(i, j, e) in &layer.edges[k] {
            let d = instance.flow_cap(i, j, k);
            let mut terms = vec![(e, 1.0)];
            terms.extend(shared[i * n + j].iter().map(|&h| (v[h], -d)));
            model.add_row(format!("gate_{i}_{j}_{k}"), terms, RowSense::Le, 0.0);
        }
        let q = sales_big_m(instance, k);
        for i in 0..n {
            let Some(r) = layer.sell[i * periods + k] else {
                continue;
            };
            let blocking: Vec<(VarId, f64)> = candidates
                .iter()
                .enumerate()
                .filter(|(_, c)| c.contains(i) && !c.is_net_producer(k))
                .map(|(h, _)| (v[h], q))
                .collect();
            if !blocking.is_empty() {
                let mut terms = vec![(r, 1.0)];
                terms.extend(blocking);
                model.add_row(format!("block_{i}_{k}"), terms, RowSense::Le, q);
            }
        }
        for (h, c) in candidates.iter().enumerate() {
            if !c.is_net_producer(k) {
                continue;
            }
            let sells: Vec<(VarId, f64)> = c
                .members
                .iter()
                .filter_map(|&i| layer.sell[i * periods + k].map(|r| (r, 1.0)))
                .collect();
            if sells.is_empty() {
                continue;
            }
            let s = loop_surplus(instance, &c.members, k);
            let big = loop_big_m(instance, &c.members, k);
            let mut terms = sells;
            terms.push((v[h], big - s));
            model.add_row(format!("lsur_{h}_{k}"), terms, RowSense::Le, big);
        }
    }
    for i in 0..n {
        let terms: Vec<(VarId, f64)> = candidates
            .iter()
            .enumerate()
            .filter(|(_, c)| c.contains(i))
            .map(|(h, _)| (v[h], 1.0))
            .collect();
        if terms.len() > 1 {
            model.add_row(format!("pack_{i}"), terms, RowSense::Le, 1.0);
        }
    }
    model
}

/// Memberships of candidates, in candidate order.
pub fn columns(candidates: &[LoopCandidate]) -> Vec<Vec<usize>> {
    candidates.iter().map(|c| c.members.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compact::extract_solution;
    use crate::geometry::build_neighbourhood_graph;
    use crate::model::fixtures::{actor, grid, pair};
    use crate::model::{baseline_objective, LegalParams, ScenarioSet};
    use crate::solution::ModelKind;
    use crate::solver::Solver;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn triangle_is_one_clique() {
        let g = NeighbourhoodGraph::from_edges(3, [(0, 1), (1, 2), (0, 2)]);
        assert_eq!(enumerate_maximal_cliques(&g, &[0, 1, 2]), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn path_keeps_seeded_cliques_only() {
        let g = NeighbourhoodGraph::from_edges(3, [(0, 1), (1, 2)]);
        assert_eq!(enumerate_maximal_cliques(&g, &[0]), vec![vec![0, 1]]);
        assert!(enumerate_maximal_cliques(&g, &[]).is_empty());
    }

    fn brute_maximal_cliques(g: &NeighbourhoodGraph, seeds: &[usize]) -> Vec<Vec<usize>> {
        let n = g.n();
        let cliques: Vec<Vec<usize>> = (1u32..1 << n)
            .map(|m| (0..n).filter(|&i| m & (1 << i) != 0).collect::<Vec<_>>())
            .filter(|s| g.is_clique(s))
            .collect();
        let mut out: Vec<Vec<usize>> = cliques
            .iter()
            .filter(|s| {
                (0..n).all(|v| s.contains(&v) || !s.iter().all(|&u| g.has_edge(u, v)))
                    && s.iter().any(|i| seeds.contains(i))
            })
            .cloned()
            .collect();
        out.sort();
        out
    }

    #[test]
    fn unit_disk_cliques_match_exhaustive_search() {
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<(f64, f64)> = (0..15)
                .map(|_| (rng.gen_range(0.0..4.0), rng.gen_range(0.0..4.0)))
                .collect();
            let mut edges = Vec::new();
            for i in 0..15 {
                for j in i + 1..15 {
                    if (pts[i].0 - pts[j].0).hypot(pts[i].1 - pts[j].1) < 1.5 {
                        edges.push((i, j));
                    }
                }
            }
            let g = NeighbourhoodGraph::from_edges(15, edges);
            let seeds: Vec<usize> = (0..15).filter(|_| rng.gen_bool(0.3)).collect();
            assert_eq!(enumerate_maximal_cliques(&g, &seeds), brute_maximal_cliques(&g, &seeds));
        }
    }

    #[test]
    fn knapsack_examples() {
        assert_eq!(
            knapsack_maximal_subsets(&[2.0, 2.0, 2.0], 3.0),
            vec![vec![0], vec![1], vec![2]]
        );
        assert_eq!(knapsack_maximal_subsets(&[1.0, 1.0, 1.0], 3.0), vec![vec![0, 1, 2]]);
        assert_eq!(knapsack_maximal_subsets(&[4.0, 1.0], 3.0), vec![vec![1]]);
    }

    fn brute_knapsack(w: &[f64], cap: f64) -> Vec<Vec<usize>> {
        let n = w.len();
        let feasible = |m: u32| (0..n).filter(|&i| m & (1 << i) != 0).map(|i| w[i]).sum::<f64>() <= cap;
        let mut out: Vec<Vec<usize>> = (0u32..1 << n)
            .filter(|&m| feasible(m) && (0..n).all(|i| m & (1 << i) != 0 || !feasible(m | (1 << i))))
            .map(|m| (0..n).filter(|&i| m & (1 << i) != 0).collect())
            .collect();
        out.sort();
        out
    }

    proptest! {
        #[test]
        fn knapsack_matches_exhaustive(w in proptest::collection::vec(0.1f64..5.0, 0..9), cap in 0.5f64..12.0) {
            let mut got = knapsack_maximal_subsets(&w, cap);
            got.sort();
            prop_assert_eq!(got, brute_knapsack(&w, cap));
        }
    }

    #[test]
    fn pair_yields_one_candidate() {
        let inst = pair();
        let g = build_neighbourhood_graph(&inst).unwrap();
        let c = generate_loop_candidates(&inst, &g, CandidateOptions::default()).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].members, vec![0, 1]);
        assert_eq!(c[0].net_producer_periods, vec![0]);
    }

    #[test]
    fn oversized_clique_is_split_by_producers() {
        let mut actors = vec![
            actor("p1", 45.0, 1.0, 2000.0, &[9.0], &[0.0]),
            actor("p2", 45.001, 1.0, 2000.0, &[9.0], &[0.0]),
        ];
        for k in 0..3 {
            actors.push(actor(
                &format!("c{k}"),
                45.0,
                1.001 + k as f64 * 1e-3,
                0.0,
                &[0.0],
                &[4.0],
            ));
        }
        let inst = Instance::new(actors, grid(1), ScenarioSet::single(), LegalParams::default());
        let g = build_neighbourhood_graph(&inst).unwrap();
        let c = generate_loop_candidates(&inst, &g, CandidateOptions::default()).unwrap();
        let members: Vec<Vec<usize>> = c.iter().map(|c| c.members.clone()).collect();
        assert_eq!(members, vec![vec![0, 2, 3, 4], vec![1, 2, 3, 4]]);
    }

    #[test]
    fn coupled_actors_enter_together() {
        let inst = Instance::new(
            vec![
                actor("p", 45.0, 1.0, 2.0, &[5.0], &[0.0]),
                actor("c1", 45.001, 1.0, 0.0, &[0.0], &[2.0]),
                actor("c2", 45.002, 1.0, 0.0, &[0.0], &[2.0]),
                actor("far", 46.0, 1.0, 0.0, &[0.0], &[2.0]),
            ],
            grid(1),
            ScenarioSet::single(),
            LegalParams {
                coupled_pairs: vec![("c2".into(), "far".into())],
                ..LegalParams::default()
            },
        );
        let g = build_neighbourhood_graph(&inst).unwrap();
        let c = generate_loop_candidates(&inst, &g, CandidateOptions::default()).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].members, vec![0, 1]);
    }

    #[test]
    fn candidate_cap_is_enforced() {
        let inst = pair();
        let g = build_neighbourhood_graph(&inst).unwrap();
        let opts = CandidateOptions {
            cap: 0,
            ..CandidateOptions::default()
        };
        assert!(matches!(
            generate_loop_candidates(&inst, &g, opts),
            Err(Error::TooManyCandidates { cap: 0, .. })
        ));
    }

    #[test]
    fn pair_column_reaches_zero_cost() {
        let inst = pair();
        let g = build_neighbourhood_graph(&inst).unwrap();
        let c = generate_loop_candidates(&inst, &g, CandidateOptions::default()).unwrap();
        let m = build_mlcol(&inst, &g, &c);
        let res = Solver::highs().solve_optimal(&m).unwrap();
        assert!(res.objective.abs() < 1e-9);
        let sol = extract_solution(ModelKind::MlCol, &inst, &m, &res, Some(&columns(&c))).unwrap();
        assert_eq!(sol.loops, vec![vec![0, 1]]);
    }

    #[test]
    fn no_columns_is_the_baseline() {
        let inst = pair();
        let g = build_neighbourhood_graph(&inst).unwrap();
        let res = Solver::highs().solve_optimal(&build_mlcol(&inst, &g, &[])).unwrap();
        assert!((res.objective - baseline_objective(&inst)).abs() < 1e-9);
    }

    #[test]
    fn overlapping_columns_are_packed() {
        // Two producers share one consumer; only one column can be chosen.
        let inst = Instance::new(
            vec![
                actor("p1", 45.0, 1.0, 2.0, &[4.0], &[0.0]),
                actor("c", 45.005, 1.0, 0.0, &[0.0], &[5.0]),
                actor("p2", 45.01, 1.0, 2.0, &[4.0], &[0.0]),
            ],
            grid(1),
            ScenarioSet::single(),
            LegalParams {
                max_distance_km: 1.0,
                ..LegalParams::default()
            },
        );
        let g = build_neighbourhood_graph(&inst).unwrap();
        let c = generate_loop_candidates(&inst, &g, CandidateOptions::default()).unwrap();
        assert_eq!(columns(&c), vec![vec![0, 1], vec![1, 2]]);
        let m = build_mlcol(&inst, &g, &c);
        assert!(m.constraints().iter().any(|r| r.name == "pack_1"));
        let res = Solver::highs().solve_optimal(&m).unwrap();
        let sol = extract_solution(ModelKind::MlCol, &inst, &m, &res, Some(&columns(&c))).unwrap();
        assert_eq!(sol.loops.len(), 1);
        // 4 kWh exchanged, 1 kWh bought, 4 kWh sold by the other producer.
        assert!((res.objective - (0.204 - 4.0 * 0.1339)).abs() < 1e-9);
    }

    #[test]
    fn json_export_names_actors() {
        let inst = pair();
        let g = build_neighbourhood_graph(&inst).unwrap();
        let c = generate_loop_candidates(&inst, &g, CandidateOptions::default()).unwrap();
        let json = candidates_to_json(&inst, &c).unwrap();
        assert!(json.contains("\"prod\"") && json.contains("\"net_producer_period_count\": 1"));
    }
}
