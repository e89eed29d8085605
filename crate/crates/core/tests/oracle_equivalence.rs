mod common;

use common::{close, random_instance};
use loopforge_core::compact::{build_mlcpct, build_slcpct, extract_solution, MultiLoopOptions};
use loopforge_core::generate::{generate_instance, Distribution, GenerationConfig, ReferenceProfiles};
use loopforge_core::geometry::build_neighbourhood_graph;
use loopforge_core::model::baseline_objective;
use loopforge_core::oracle::{brute_force_oracle, packing_oracle};
use loopforge_core::run::{solve, RunStatus, SolveOptions};
use loopforge_core::solution::{check_solution, ModelKind};
use loopforge_core::solver::{Limits, Solver};

#[test]
fn single_loop_matches_enumeration() {
    let solver = Solver::highs().with_limits(Limits::default().with_gap(1e-9));
    let mut improved = 0;
    for seed in 0..12 {
        let inst = random_instance(seed, 3 + seed as usize % 5, 1 + seed as usize % 4);
        let g = build_neighbourhood_graph(&inst).unwrap();
        let oracle = brute_force_oracle(&inst, &g, false).unwrap();
        let m = build_slcpct(&inst, &g);
        let res = solver.solve_optimal(&m).unwrap();
        assert!(
            close(res.objective, oracle.objective, 1e-6),
            "seed {seed}: {} vs {}",
            res.objective,
            oracle.objective
        );
        assert!(res.objective <= baseline_objective(&inst) + 1e-9);
        if res.objective < baseline_objective(&inst) - 1e-9 {
            improved += 1;
        }
        let sol = extract_solution(ModelKind::SlCpct, &inst, &m, &res, None).unwrap();
        let v = check_solution(&inst, &g, &sol);
        assert!(v.is_empty(), "seed {seed}: {v:?}");
    }
    assert!(improved >= 4, "only {improved} instances form a profitable loop");
}

#[test]
fn multi_loop_matches_partition_enumeration() {
    let solver = Solver::highs().with_limits(Limits::default().with_gap(1e-9));
    let mut several = 0;
    for seed in 100..110 {
        let inst = random_instance(seed, 3 + seed as usize % 4, 1 + seed as usize % 3);
        let g = build_neighbourhood_graph(&inst).unwrap();
        let oracle = brute_force_oracle(&inst, &g, true).unwrap();
        for symmetry_breaking in [true, false] {
            let m = build_mlcpct(
                &inst,
                &g,
                MultiLoopOptions {
                    max_loops: None,
                    symmetry_breaking,
                },
            )
            .unwrap();
            let res = solver.solve_optimal(&m).unwrap();
            assert!(
                close(res.objective, oracle.objective, 1e-6),
                "seed {seed}: {} vs {}",
                res.objective,
                oracle.objective
            );
            let sol = extract_solution(ModelKind::MlCpct, &inst, &m, &res, None).unwrap();
            let v = check_solution(&inst, &g, &sol);
            assert!(v.is_empty(), "seed {seed}: {v:?}");
        }
        if oracle.loops.len() >= 2 {
            several += 1;
        }
    }
    assert!(several >= 1, "no instance uses two loops");
}

#[test]
fn two_actor_multi_loop_equals_single_loop() {
    for seed in 200..205 {
        let inst = random_instance(seed, 2, 3);
        let g = build_neighbourhood_graph(&inst).unwrap();
        let sl = Solver::highs().solve_optimal(&build_slcpct(&inst, &g)).unwrap();
        let ml = Solver::highs()
            .solve_optimal(&build_mlcpct(&inst, &g, MultiLoopOptions::default()).unwrap())
            .unwrap();
        assert!(close(sl.objective, ml.objective, 1e-9));
    }
}

#[test]
fn packing_oracle_matches_partition_enumeration() {
    for seed in 300..312 {
        let inst = random_instance(seed, 2 + seed as usize % 5, 1 + seed as usize % 3);
        let g = build_neighbourhood_graph(&inst).unwrap();
        let partition = brute_force_oracle(&inst, &g, true).unwrap();
        let packing = packing_oracle(&inst, &g).unwrap();
        assert!(close(packing.objective, partition.objective, 1e-9), "seed {seed}");
    }
}

// One cluster of a clustered week: nine actors, 168 periods.
#[test]
fn multi_loop_reaches_the_packing_optimum_on_a_cluster() {
    let profiles = ReferenceProfiles::synthetic(2022);
    let gen = GenerationConfig {
        distribution: Distribution::Clustered,
        ..GenerationConfig::reference(4, 15, 7)
    };
    let inst = generate_instance(&gen, &profiles)
        .unwrap()
        .subset(&[0, 1, 2, 3, 4, 11, 12, 13, 14]);
    let g = build_neighbourhood_graph(&inst).unwrap();
    let oracle = packing_oracle(&inst, &g).unwrap();
    let out = solve(ModelKind::MlCpct, &inst, &SolveOptions::default()).unwrap();
    assert_eq!(out.status, RunStatus::Optimal);
    let obj = out.objective.unwrap();
    assert!(close(obj, oracle.objective, 1e-6), "{obj} vs {}", oracle.objective);
}
