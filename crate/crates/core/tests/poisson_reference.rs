mod common;

use cac_model::metrics::evaluate;
use cac_model::CacPolicy;
use common::{reference, single_phase};

#[test]
fn single_phase_matches_direct_construction() {
    let cases = [
        (0.8, 12, 6, CacPolicy::Threshold { c_max: 4 }, 20.0, 0.3, 40.0),
        (1.5, 8, 10, CacPolicy::queue_aware(5, 3), 10.0, 0.5, 30.0),
        (0.3, 20, 4, CacPolicy::Unrestricted { c_trunc: 5 }, 30.0, 0.2, 60.0),
        (2.0, 5, 3, CacPolicy::Threshold { c_max: 2 }, 5.0, 1.0, 100.0),
    ];
    for (lambda, x, a, policy, rho, d, t) in cases {
        let mut config = single_phase(lambda, x, a, policy, rho, d, t);
        config.solver.tolerance = 1e-14;
        let got = evaluate(&config).unwrap();
        let want = reference::solve(&config);
        let pairs = [
            (got.p_block, want.p_block),
            (got.n_connections, want.n_connections),
            (got.n_queue, want.n_queue),
            (got.n_drop, want.n_drop),
            (got.p_drop, want.p_drop),
            (got.lambda_bar, want.lambda_bar),
            (got.throughput, want.throughput),
            (got.delay, want.delay),
        ];
        for (i, (g, w)) in pairs.into_iter().enumerate() {
            assert!((g - w).abs() <= 1e-10, "{} metric {i}: {g} vs {w}", config.policy.name());
        }
    }
}
