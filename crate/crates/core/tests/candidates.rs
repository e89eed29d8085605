mod common;

use common::{close, clustered_instance, random_instance};
use loopforge_core::cliques::{build_mlcol, columns, generate_loop_candidates, CandidateOptions, CliqueMode};
use loopforge_core::compact::{build_mlcpct, extract_solution, MultiLoopOptions};
use loopforge_core::geometry::{build_neighbourhood_graph, NeighbourhoodGraph};
use loopforge_core::model::Instance;
use loopforge_core::oracle::{brute_force_oracle, design_cost};
use loopforge_core::solution::{check_solution, loop_surplus, ModelKind};
use loopforge_core::solver::{Limits, Solver};

/// Every maximal feasible loop, by subset enumeration.
fn brute_force_loops(inst: &Instance, g: &NeighbourhoodGraph) -> Vec<Vec<usize>> {
    let n = inst.n();
    let cap = inst.legal().max_installed_power_kwc;
    let coupled = inst.coupled_indices();
    let feasible = |mask: u32| -> bool {
        let members: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
        let power: f64 = members.iter().map(|&i| inst.actors()[i].installed_power_kwc).sum();
        members.len() >= 2
            && g.is_clique(&members)
            && power <= cap
            && members.iter().any(|&i| inst.is_candidate_producer(i))
            && members.iter().any(|&i| inst.is_candidate_consumer(i))
            && coupled.iter().all(|&(a, b)| (mask >> a) & 1 == (mask >> b) & 1)
    };
    let all: Vec<u32> = (0u32..1 << n).filter(|&m| feasible(m)).collect();
    let mut out: Vec<Vec<usize>> = all
        .iter()
        .filter(|&&m| !all.iter().any(|&o| o != m && o & m == m))
        .map(|&m| (0..n).filter(|&i| m & (1 << i) != 0).collect())
        .collect();
    out.sort();
    out
}

#[test]
fn candidates_are_exactly_the_maximal_feasible_loops() {
    let mut nonempty = 0;
    for seed in 0..10 {
        let n = 8 + seed as usize % 8;
        let inst = if seed % 2 == 0 {
            random_instance(seed, n, 3)
        } else {
            clustered_instance(seed, n, 3)
        };
        let g = build_neighbourhood_graph(&inst).unwrap();
        let expected = brute_force_loops(&inst, &g);
        for mode in [CliqueMode::TwoStage, CliqueMode::CapacityAware] {
            let got = generate_loop_candidates(
                &inst,
                &g,
                CandidateOptions {
                    mode,
                    ..CandidateOptions::default()
                },
            )
            .unwrap();
            assert_eq!(columns(&got), expected, "seed {seed}, {mode:?}");
            for c in &got {
                for k in 0..inst.periods() {
                    assert_eq!(c.is_net_producer(k), loop_surplus(&inst, &c.members, k) >= 0.0);
                }
            }
        }
        if expected.len() >= 2 {
            nonempty += 1;
        }
    }
    assert!(nonempty >= 5);
}

/// Cheapest design made of pairwise disjoint candidate columns.
fn best_packing(inst: &Instance, cols: &[Vec<usize>]) -> f64 {
    fn rec(
        inst: &Instance,
        cols: &[Vec<usize>],
        h: usize,
        used: &mut Vec<bool>,
        chosen: &mut Vec<Vec<usize>>,
        best: &mut f64,
    ) {
        if h == cols.len() {
            *best = best.min(design_cost(inst, chosen, &Solver::embedded()).unwrap());
            return;
        }
        rec(inst, cols, h + 1, used, chosen, best);
        if cols[h].iter().all(|&i| !used[i]) {
            cols[h].iter().for_each(|&i| used[i] = true);
            chosen.push(cols[h].clone());
            rec(inst, cols, h + 1, used, chosen, best);
            chosen.pop();
            cols[h].iter().for_each(|&i| used[i] = false);
        }
    }
    let mut best = f64::INFINITY;
    rec(inst, cols, 0, &mut vec![false; inst.n()], &mut Vec::new(), &mut best);
    best
}

#[test]
fn extended_model_matches_column_packing_enumeration() {
    let solver = Solver::highs().with_limits(Limits::default().with_gap(1e-9));
    for seed in 300..312 {
        let inst = if seed % 2 == 0 {
            random_instance(seed, 3 + seed as usize % 4, 1 + seed as usize % 3)
        } else {
            clustered_instance(seed, 9, 3)
        };
        let g = build_neighbourhood_graph(&inst).unwrap();
        let cands = generate_loop_candidates(&inst, &g, CandidateOptions::default()).unwrap();
        let expected = best_packing(&inst, &columns(&cands));
        let m = build_mlcol(&inst, &g, &cands);
        let res = solver.solve_optimal(&m).unwrap();
        assert!(
            close(res.objective, expected, 1e-6),
            "seed {seed}: {} vs {expected}",
            res.objective
        );
        let sol = extract_solution(ModelKind::MlCol, &inst, &m, &res, Some(&columns(&cands))).unwrap();
        let v = check_solution(&inst, &g, &sol);
        assert!(v.is_empty(), "seed {seed}: {v:?}");
        if inst.n() <= 6 {
            let oracle = brute_force_oracle(&inst, &g, true).unwrap();
            assert!(res.objective >= oracle.objective - 1e-9);
        }
    }
}

#[test]
fn extended_model_restricts_compact_multi_loop() {
    let solver = Solver::highs().with_limits(Limits::default().with_gap(1e-9));
    let mut equal = 0;
    for seed in 400..408 {
        let inst = clustered_instance(seed, 9, 3);
        let g = build_neighbourhood_graph(&inst).unwrap();
        let cands = generate_loop_candidates(&inst, &g, CandidateOptions::default()).unwrap();
        let col = solver.solve_optimal(&build_mlcol(&inst, &g, &cands)).unwrap();
        let cpct = solver
            .solve_optimal(&build_mlcpct(&inst, &g, MultiLoopOptions::default()).unwrap())
            .unwrap();
        assert!(
            col.objective >= cpct.objective - 1e-6,
            "seed {seed}: {} < {}",
            col.objective,
            cpct.objective
        );
        if close(col.objective, cpct.objective, 1e-6) {
            equal += 1;
        }
    }
    assert!(equal >= 4, "only {equal} of 8 instances agree");
}
