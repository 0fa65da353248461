use proptest::prelude::*;

use pmp_thermo::lindblad::{integrate, IntegrateOptions};
use pmp_thermo::planner::{DeadlineOptions, Endpoints, JumpKind, Planner};
use pmp_thermo::pmp::{bang_bang_violations, conserved_k_residual};
use pmp_thermo::qubit::{adiabatic_f, QubitParams};

fn planner() -> Planner {
    Planner::new(QubitParams::from_ratio(0.3).unwrap()).unwrap()
}

fn worked() -> Endpoints {
    Endpoints::new(0.07, 1.0, 0.26, 6.0).unwrap()
}

#[test]
fn cycle_heat_is_the_enclosed_area() {
    let p = planner();
    let c = p.cycle_decomposition(-0.05).unwrap();
    // trapezoid rule for -closed integral of u dp around the sampled loop
    let mut area = 0.0;
    for seg in [&c.hot, &c.cold] {
        let pts = seg.sample_uniform_time(20_001);
        for w in pts.windows(2) {
            area -= 0.5 * (w[0].u + w[1].u) * (w[1].p - w[0].p);
        }
    }
    assert!(c.q_cycle < 0.0);
    assert!((area - c.q_cycle).abs() < 1e-6 * c.q_cycle.abs(), "{area} vs {}", c.q_cycle);
}

#[test]
fn cycle_heat_vanishes_at_threshold() {
    let p = planner();
    let qs: Vec<f64> =
        [1e-2, 1e-3, 1e-4, 1e-5].iter().map(|e| p.cycle_decomposition(p.k_star() + e).unwrap().q_cycle.abs()).collect();
    assert!(qs.windows(2).all(|w| w[1] < w[0]));
    assert!(qs[3] < 0.1 * qs[0], "{qs:?}");
}

#[test]
fn forward_simulation_reproduces_plans() {
    let p = planner();
    let model = p.params().model();
    for n in 0..4 {
        let plan = p.build_trajectory(&worked(), -0.05, n).unwrap();
        let opts = IntegrateOptions { record: false, ..Default::default() };
        let sim = integrate(&model, &plan.initial_state(), &plan.to_protocol(), &opts).unwrap();
        let rel = ((sim.ledger.heat_released - plan.total_heat) / plan.total_heat).abs();
        assert!(rel < 1e-6, "N = {n}: {rel}");
        let nodes = plan.pmp_nodes(200);
        assert!(conserved_k_residual(&model, &nodes, plan.k).unwrap().max() < 1e-9);
        assert_eq!(bang_bang_violations(&model, &nodes, 1e-9).unwrap(), 0);
    }
}

#[test]
fn deadline_of_a_plan_below_threshold_returns_that_plan() {
    let p = planner();
    let k0 = -0.1;
    let plan = p.build_trajectory(&worked(), k0, 0).unwrap();
    let found = p.plan_for_deadline(&worked(), plan.total_time, &DeadlineOptions::default()).unwrap();
    assert_eq!(found.n_cycles, 0);
    assert!((found.k - k0).abs() < 1e-9);
    assert!((found.total_heat - plan.total_heat).abs() < 1e-9);
}

#[test]
fn longer_deadlines_release_less_heat() {
    let p = planner();
    let qs: Vec<f64> = [20.0, 50.0, 100.0, 200.0, 500.0]
        .iter()
        .map(|&t| p.plan_for_deadline(&worked(), t, &DeadlineOptions::default()).unwrap().total_heat)
        .collect();
    assert!(qs.windows(2).all(|w| w[1] < w[0]), "{qs:?}");
}

#[test]
fn long_deadline_runs_cycles_near_maximum_power() {
    let p = planner();
    let plan = p.plan_for_deadline(&worked(), 1e3, &DeadlineOptions::default()).unwrap();
    let rate = plan.cycle_rate().expect("cycles are used");
    assert!(((rate - p.k_star()) / p.k_star()).abs() < 0.05);
    assert!((plan.total_time - 1e3).abs() < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn plan_invariants(frac in 0.02f64..0.98, n in 0usize..4) {
        let p = planner();
        let k = p.k_star() * frac;
        let plan = p.build_trajectory(&worked(), k, n).unwrap();
        let (dt, dq) = plan.decomposition_residual();
        prop_assert!(dt < 1e-10 && dq < 1e-10);
        for j in plan.jumps() {
            if j.kind == JumpKind::Switching {
                prop_assert!((j.q_from.unwrap() - j.q_to.unwrap()).abs() < 1e-9);
                prop_assert!(adiabatic_f(p.params(), j.p, k).unwrap().abs() < 1e-8);
            }
        }
        // consecutive isotherms meet at the same population
        let segs: Vec<_> = plan.segments().collect();
        for w in segs.windows(2) {
            prop_assert!((w[0].segment.p1() - w[1].segment.p0()).abs() < 1e-12);
        }
    }
}
