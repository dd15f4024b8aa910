mod common;

use cac_model::chain::{assemble, queue_transition_kernel, ConnectionDynamics, SystemConfig};
use cac_model::channel::{service_pmf, subchannel_rate_pmf, ChannelParams};
use cac_model::mmpp::{phase_step_matrix, poisson_pmf, MmppParams};
use cac_model::CacPolicy;
use common::{rate_table, single_phase};
use proptest::prelude::*;

#[test]
fn two_state_phase_step_closed_form() {
    let (a, b, t) = (1.3, 0.4, 0.7);
    let m = MmppParams::new(&[vec![-a, a], vec![b, -b]], vec![1.0, 2.0]).unwrap();
    let p = phase_step_matrix(&m, t).unwrap();
    let decay = (-(a + b) * t).exp();
    let expect = [
        [(b + a * decay) / (a + b), a * (1.0 - decay) / (a + b)],
        [b * (1.0 - decay) / (a + b), (a + b * decay) / (a + b)],
    ];
    for i in 0..2 {
        for j in 0..2 {
            assert!((p[(i, j)] - expect[i][j]).abs() < 1e-13, "({i},{j}) {} vs {}", p[(i, j)], expect[i][j]);
        }
    }
}

#[test]
fn long_frames_use_the_squaring_path() {
    // q t = 200, far beyond a single uniformisation
    let m = MmppParams::new(&[vec![-100.0, 100.0], vec![50.0, -50.0]], vec![0.0, 1.0]).unwrap();
    let p = phase_step_matrix(&m, 2.0).unwrap();
    for i in 0..2 {
        assert!((p[(i, 0)] - 1.0 / 3.0).abs() < 1e-12);
        assert!((p[(i, 1)] - 2.0 / 3.0).abs() < 1e-12);
    }
}

#[test]
fn poisson_mass_at_one() {
    let p = poisson_pmf(0.8, 40);
    assert!((p.get(1) - 0.359_463_171_1).abs() < 1e-9);
    assert!((p.get(1) - 0.8 * (-0.8f64).exp()).abs() < 1e-15);
}

#[test]
fn rayleigh_outage_at_mean_snr() {
    let ch = ChannelParams::new(1, 0.0, 1.0, rate_table(&[(f64::NEG_INFINITY, 0), (0.0, 1)])).unwrap();
    let p = subchannel_rate_pmf(&ch);
    assert!((p.get(1) - (-1.0f64).exp()).abs() < 1e-12);
    assert!((p.get(0) + p.get(1) - 1.0).abs() < 1e-15);
}

#[test]
fn service_is_a_convolution_over_subchannels() {
    let table = rate_table(&[(f64::NEG_INFINITY, 0), (2.0, 1), (10.0, 3)]);
    let one = subchannel_rate_pmf(&ChannelParams::new(1, 6.0, 2.0, table.clone()).unwrap());
    let three = service_pmf(&ChannelParams::new(3, 6.0, 2.0, table).unwrap());
    assert_eq!(three.support_max(), 9);
    let mut direct = 0.0;
    for a in 0..=3 {
        for b in 0..=3 {
            for c in 0..=3 {
                if a + b + c == 4 {
                    direct += one.get(a) * one.get(b) * one.get(c);
                }
            }
        }
    }
    assert!((three.get(4) - direct).abs() < 1e-15);
}

fn deterministic_one_packet() -> ChannelParams {
    ChannelParams::new(1, 10.0, 1.0, rate_table(&[(f64::NEG_INFINITY, 1)])).unwrap()
}

#[test]
fn queue_kernel_by_enumeration() {
    // one connection, one phase, lambda = 1, A = 3, X = 3, exactly one packet served
    let mut config = single_phase(1.0, 3, 3, CacPolicy::Threshold { c_max: 1 }, 1.0, 1.0, 1.0);
    config.channel = deterministic_one_packet();
    let k = queue_transition_kernel(&config, 1, 0).unwrap();
    let e = (-1.0f64).exp();
    let batch = [e, e, e / 2.0, 1.0 - 2.5 * e];
    for x in 0..=3usize {
        let mut next = [0.0; 4];
        let mut drops = 0.0;
        for (a, pa) in batch.iter().enumerate() {
            let raw = x - x.min(1) + a;
            next[raw.min(3)] += pa;
            drops += pa * raw.saturating_sub(3) as f64;
        }
        for (x2, p) in next.iter().enumerate() {
            assert!((k.next_len(x).get(x2 as i64) - p).abs() < 1e-15, "x={x} x'={x2}");
        }
        assert!((k.expected_drops(x) - drops).abs() < 1e-15);
        assert!((k.expected_served(x) - x.min(1) as f64).abs() < 1e-14);
    }
}

#[test]
fn smallest_chain_by_hand() {
    // S=1, X=1, C=1: four states (x, c)
    let lambda = 0.5;
    let mut config: SystemConfig = single_phase(lambda, 1, 3, CacPolicy::Threshold { c_max: 1 }, 6.0, 0.5, 50.0);
    config.channel = ChannelParams::new(1, 0.0, 1.0, rate_table(&[(f64::NEG_INFINITY, 0), (0.0, 1)])).unwrap();
    let (space, p) = assemble(&config).unwrap();
    assert_eq!(space.total_states(), 4);

    let r = config.conn_arrivals_per_frame();
    let pd = config.departure_probability();
    let conn = |c: usize, c2: usize| match (c, c2) {
        (0, 1) => 1.0 - (-r).exp(),
        (0, _) => (-r).exp(),
        (_, 0) => pd,
        _ => 1.0 - pd,
    };
    let serve = (-1.0f64).exp();
    let queue = |x: usize, c: usize, x2: usize| {
        let no_arrival = (-lambda * c as f64).exp();
        let empty = if x == 0 { no_arrival } else { no_arrival * serve };
        if x2 == 0 {
            empty
        } else {
            1.0 - empty
        }
    };
    for c in 0..=1 {
        for x in 0..=1 {
            for c2 in 0..=1 {
                for x2 in 0..=1 {
                    let expect = conn(c, c2) * queue(x, c, x2);
                    let got = p.get(space.index(0, x, c), space.index(0, x2, c2));
                    assert!((got - expect).abs() < 1e-14, "({x},{c})->({x2},{c2}): {got} vs {expect}");
                }
            }
        }
    }
}

#[test]
fn sequential_admission_stops_at_the_bound() {
    let d = ConnectionDynamics::new(2.0, 0.0);
    let policy = CacPolicy::Threshold { c_max: 3 };
    let w = d.transition(&policy, 0, 1);
    // from 1 connection at most 2 more fit; every request beyond is rejected
    let e = (-2.0f64).exp();
    assert!((w.get(1) - e).abs() < 1e-13);
    assert!((w.get(2) - 2.0 * e).abs() < 1e-13);
    assert!((w.get(3) - (1.0 - 3.0 * e)).abs() < 1e-12);
    assert_eq!(w.get(4), 0.0);
}

#[test]
fn queue_aware_admission_depends_on_queue() {
    let d = ConnectionDynamics::new(0.5, 0.0);
    let policy = CacPolicy::queue_aware(5, 4);
    assert_eq!(d.transition(&policy, 5, 2).get(2), 1.0);
    assert!(d.transition(&policy, 4, 2).get(3) > 0.0);
}

proptest! {
    #[test]
    fn phase_steps_compose(a in 0.01f64..50.0, b in 0.01f64..50.0, c in 0.0f64..20.0, t in 0.001f64..1.0, s in 0.001f64..1.0) {
        let g = vec![vec![0.0, a, 0.0], vec![0.0, 0.0, b], vec![c + 0.01, 0.0, 0.0]];
        let m = MmppParams::new(&g, vec![0.0; 3]).unwrap();
        let composed = phase_step_matrix(&m, t).unwrap().matmul(&phase_step_matrix(&m, s).unwrap());
        let direct = phase_step_matrix(&m, t + s).unwrap();
        prop_assert!(composed.max_abs_diff(&direct) < 1e-12);
    }
}
