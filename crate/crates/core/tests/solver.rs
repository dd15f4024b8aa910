mod common;

use cac_model::chain::{
    assemble, residual, solve, solve_model_with, Axis, SolverMethod, SolverOptions, TransitionMatrix, TransitionOperator,
};
use cac_model::exec::Execution;
use cac_model::metrics::connection_marginal;
use cac_model::Error;
use common::{random_config, toy};

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

#[test]
fn two_state_closed_forms() {
    let swap = TransitionMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
    let lazy = TransitionMatrix::from_dense(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
    for method in [SolverMethod::GaussSeidel, SolverMethod::Power, SolverMethod::Direct] {
        let opts = SolverOptions { method, tolerance: 1e-14, ..Default::default() };
        // plain power iteration cycles on the swap chain; the others must not
        if method != SolverMethod::Power {
            let pi = solve(&swap, &opts).unwrap().pi;
            assert!((pi[0] - 0.5).abs() < 1e-12 && (pi[1] - 0.5).abs() < 1e-12, "{method:?}");
        }
        let pi = solve(&lazy, &opts).unwrap().pi;
        assert!((pi[0] - 2.0 / 3.0).abs() < 1e-12 && (pi[1] - 1.0 / 3.0).abs() < 1e-12, "{method:?}");
    }
}

#[test]
fn matches_long_power_iteration() {
    let (_, p) = assemble(&toy()).unwrap();
    let n = p.dim();
    let mut pi = vec![1.0 / n as f64; n];
    for _ in 0..1_000_000 {
        let mut next = vec![0.0; n];
        for (i, w) in pi.iter().enumerate() {
            p.for_each_in_row(i, |j, v| next[j] += w * v);
        }
        let change = l1(&next, &pi);
        pi = next;
        if change < 1e-15 {
            break;
        }
    }
    // the residual bounds the error only up to the mixing time, so solve tightly here
    let solved = solve(&p, &SolverOptions { tolerance: 1e-13, ..Default::default() }).unwrap();
    assert!(l1(&solved.pi, &pi) < 1e-8, "L1 gap {}", l1(&solved.pi, &pi));
}

#[test]
fn every_method_agrees_on_random_configs() {
    for seed in 100..110 {
        let mut config = random_config(seed);
        let mut solutions = Vec::new();
        for (method, aggregate) in
            [(SolverMethod::GaussSeidel, true), (SolverMethod::GaussSeidel, false), (SolverMethod::Power, true), (SolverMethod::Direct, false)]
        {
            config.solver = SolverOptions { method, aggregate, tolerance: 1e-13, max_sweeps: 200_000, ..Default::default() };
            let (_, ss) = solve_model_with(&config, Execution::Sequential).unwrap();
            assert!(ss.residual <= 1e-10 || method == SolverMethod::Direct, "seed {seed} {method:?}: {}", ss.residual);
            solutions.push(ss.pi);
        }
        for s in &solutions[1..] {
            assert!(l1(s, &solutions[0]) < 1e-8, "seed {seed}: gap {}", l1(s, &solutions[0]));
        }
    }
}

#[test]
fn matrix_free_and_explicit_agree() {
    let mut config = toy();
    let (_, explicit) = solve_model_with(&config, Execution::Sequential).unwrap();
    config.solver.memory_budget_mb = 0;
    let (op, free) = solve_model_with(&config, Execution::Sequential).unwrap();
    assert!(l1(&explicit.pi, &free.pi) < 1e-9);
    assert!(residual(&op, &free.pi) <= 1e-10);
}

#[test]
fn power_method_is_thread_count_independent() {
    let mut config = toy();
    config.solver.method = SolverMethod::Power;
    let (_, a) = solve_model_with(&config, Execution::Sequential).unwrap();
    let (_, b) = solve_model_with(&config, Execution::Parallel).unwrap();
    assert_eq!(a.pi, b.pi);
    assert_eq!(a.sweeps_used, b.sweeps_used);
}

#[test]
fn marginals_are_distributions() {
    let (op, ss) = solve_model_with(&toy(), Execution::Sequential).unwrap();
    let space = op.space();
    for axis in [Axis::Phase, Axis::Queue, Axis::Connections] {
        let m = space.marginal(&ss.pi, axis).unwrap();
        assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    assert_eq!(connection_marginal(&ss.pi, space).unwrap().len(), 4);
    assert!(space.marginal(&ss.pi[1..], Axis::Queue).is_err());
}

#[test]
fn iteration_cap_reports_residual() {
    let mut config = toy();
    config.solver.max_sweeps = 1;
    config.solver.tolerance = 1e-300;
    match solve_model_with(&config, Execution::Sequential) {
        Err(Error::NotConverged { residual, sweeps }) => {
            assert_eq!(sweeps, 1);
            assert!(residual > 0.0 && residual.is_finite());
        }
        other => panic!("expected non-convergence, got {other:?}"),
    }
}

#[test]
fn direct_method_refuses_large_chains() {
    let mut config = common::table1();
    config.solver.method = SolverMethod::Direct;
    assert!(matches!(solve_model_with(&config, Execution::Sequential), Err(Error::Solver(_))));
}
