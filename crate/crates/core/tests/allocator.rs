use urllc_core::allocator::{
    build_gp_mrc, check_feasibility, rate_params, sinr_thresholds, AlgorithmRegistry, AllocationResult,
    AllocationStatus, OptimizeOptions,
};
use urllc_core::gp::log_transform;
use urllc_core::receiver::ReceiverKind;
use urllc_core::scenario::{parse_scenario, Scenario, ScenarioTemplate};

const DEFAULTS: &str = include_str!("../../../defaults.json");

fn defaults() -> Scenario {
    parse_scenario(DEFAULTS).unwrap()
}

fn run(s: &Scenario, rx: ReceiverKind, alg: &str) -> AllocationResult {
    AlgorithmRegistry::standard()
        .get(alg)
        .unwrap()
        .allocate(s, &*rx.receiver(), &OptimizeOptions::default())
        .unwrap()
}

/// Checks the result against the problem constraints using only the
/// closed-form bounds, independently of the GP machinery.
fn assert_feasible(s: &Scenario, rx: ReceiverKind, r: &AllocationResult) {
    let params = rate_params(s, true).unwrap();
    let t = sinr_thresholds(s, &params).unwrap();
    let gamma = rx.receiver().sinr_lb(s, &r.allocation.p_pilot, &r.allocation.p_data).unwrap();
    let (k, l) = (s.k() as f64, s.system.blocklength as f64);
    for (i, d) in s.devices.iter().enumerate() {
        assert!(gamma[i] >= t[i] * (1.0 - 1e-7), "device {i}: sinr {} < {}", gamma[i], t[i]);
        let used = k * r.allocation.p_pilot[i] + (l - k) * r.allocation.p_data[i];
        assert!(used <= d.energy * (1.0 + 1e-7), "device {i}: energy {used} > {}", d.energy);
        assert!(r.allocation.p_pilot[i] > 0.0 && r.allocation.p_data[i] > 0.0);
    }
}

#[test]
fn mrc_round_for_two_devices_has_expected_shape() {
    let mut t = ScenarioTemplate::default();
    t.energy = 1.0;
    let s = t.generate(9, 2, 200.0).unwrap();
    let params = rate_params(&s, true).unwrap();
    let th = sinr_thresholds(&s, &params).unwrap();
    let gp = build_gp_mrc(&s, &th, &[0.4, 0.7], None).unwrap();
    assert_eq!(gp.problem.num_vars(), 6);
    assert_eq!(gp.problem.constraints.len(), 6);
    let prog = log_transform(&gp.problem);
    let lse = prog.constraints.iter().filter(|c| !c.factors.is_empty()).count();
    // Two SINR and two energy constraints stay log-sum-exp; the two
    // SINR-target constraints are single monomials and become affine.
    assert_eq!((lse, prog.constraints.len() - lse), (4, 2));
}

#[test]
fn defaults_converge_quickly_and_satisfy_constraints() {
    let s = defaults();
    for rx in ReceiverKind::ALL {
        let r = run(&s, rx, "proposed");
        assert_eq!(r.status, AllocationStatus::Converged, "{rx}");
        assert!(r.trace.rounds() <= 10, "{rx}: {} rounds", r.trace.rounds());
        assert!(r.trace.is_monotone(1e-9), "{rx}: {:?}", r.trace.objectives());
        assert_eq!(r.violation_count(), 0);
        assert_feasible(&s, rx, &r);
        // Scoring is the weighted sum of the reported rates.
        let sum: f64 = s.weights().iter().zip(&r.scored_rate).map(|(w, v)| w * v).sum();
        assert!((sum - r.weighted_sum).abs() < 1e-12);
    }
}

#[test]
fn fixed_pilot_keeps_pilots_at_uniform_power() {
    let s = defaults();
    for rx in ReceiverKind::ALL {
        let r = run(&s, rx, "fixed_pilot");
        for (p, d) in r.allocation.p_pilot.iter().zip(&s.devices) {
            let want = d.energy / s.system.blocklength as f64;
            assert!((p / want - 1.0).abs() < 1e-12, "{rx}: {p} vs {want}");
        }
        assert_feasible(&s, rx, &r);
        let joint = run(&s, rx, "proposed");
        assert!(joint.weighted_sum >= r.weighted_sum * (1.0 - 1e-6), "{rx}");
    }
}

#[test]
fn conventional_rescores_upper_bound_powers() {
    let s = defaults();
    for rx in ReceiverKind::ALL {
        let ub = run(&s, rx, "upper_bound");
        let conv = run(&s, rx, "conventional");
        assert_eq!(ub.allocation, conv.allocation);
        assert_eq!(ub.shannon_sum, conv.shannon_sum);
        assert!(conv.weighted_sum <= ub.weighted_sum);
        for (i, v) in conv.violations.iter().enumerate() {
            if *v {
                assert_eq!(conv.scored_rate[i], 0.0);
                assert!(conv.rate_lb[i] < s.devices[i].rate_req);
            } else {
                assert_eq!(conv.scored_rate[i], conv.rate_lb[i]);
            }
        }
    }
}

#[test]
fn feasibility_scales_with_energy() {
    let s = defaults();
    let params = rate_params(&s, true).unwrap();
    let th = sinr_thresholds(&s, &params).unwrap();
    let opts = OptimizeOptions::default();
    for rx in ReceiverKind::ALL {
        let receiver = rx.receiver();
        // Interference grows with the powers, so phi saturates rather than
        // growing without bound; it must still increase with the budget.
        let phis: Vec<f64> = [0.5, 2.0, 1e6]
            .iter()
            .map(|&e| check_feasibility(&s.with_energy(e), &*receiver, &th, &opts).unwrap().phi)
            .collect();
        assert!(phis.windows(2).all(|w| w[1] > w[0]) && phis[2] > 1.0, "{rx}: {phis:?}");
        let none = check_feasibility(&s.with_energy(0.0), &*receiver, &th, &opts).unwrap();
        assert_eq!(none.phi, 0.0);
        let r = run(&s.with_energy(0.0), rx, "proposed");
        assert_eq!(r.status, AllocationStatus::Infeasible);
        assert_eq!((r.weighted_sum, r.violation_count()), (0.0, s.k()));
    }
}

#[test]
fn zf_feasibility_rounds_reach_a_feasible_point() {
    let s = defaults().with_rate_req(4.0);
    let params = rate_params(&s, true).unwrap();
    let th = sinr_thresholds(&s, &params).unwrap();
    let zf = ReceiverKind::Zf.receiver();
    let f = check_feasibility(&s, &*zf, &th, &OptimizeOptions::default()).unwrap();
    assert!(f.feasible(), "phi {}", f.phi);
    // The product bound under-estimates the SINR away from its anchor, so
    // the exact bound at the returned powers must clear phi * t.
    let gamma = zf.sinr_lb(&s, &f.p_pilot, &f.p_data).unwrap();
    for (g, t) in gamma.iter().zip(&th) {
        assert!(*g >= f.phi * t * (1.0 - 1e-6), "{g} < {} * {t}", f.phi);
    }
}

#[test]
fn random_instances_ascend_monotonically() {
    for seed in 0..6 {
        let s = ScenarioTemplate::default().generate(seed, 6, 300.0).unwrap();
        for rx in ReceiverKind::ALL {
            let r = run(&s, rx, "proposed");
            if r.status == AllocationStatus::Infeasible {
                continue;
            }
            assert!(r.trace.is_monotone(1e-9), "seed {seed} {rx}: {:?}", r.trace.objectives());
            assert_feasible(&s, rx, &r);
        }
    }
}

// Full rounds have six variables; frozen-pilot rounds have four and fit the
// brute-force grid.
#[test]
fn frozen_pilot_rounds_match_grid_search() {
    use urllc_core::allocator::build_gp;
    use urllc_core::gp::{grid_oracle, solve, GpStatus, SolverOptions};
    let mut checked = 0;
    for seed in 0..20 {
        let s = ScenarioTemplate::default().generate(100 + seed, 2, 300.0).unwrap();
        let params = rate_params(&s, true).unwrap();
        let th = sinr_thresholds(&s, &params).unwrap();
        let l = s.system.blocklength as f64;
        let pilots: Vec<f64> = s.devices.iter().map(|d| d.energy / l).collect();
        let rx = if seed % 2 == 0 { ReceiverKind::Mrc } else { ReceiverKind::Zf };
        let w = [0.2 + 0.04 * seed as f64, 0.5];
        let gp = build_gp(&s, &*rx.receiver(), &th, &w, &pilots, Some(&pilots)).unwrap();
        assert_eq!(gp.problem.num_vars(), 4);
        let sol = solve(&gp.problem, None, &SolverOptions::default()).unwrap();
        let pd_max = s.devices[0].energy / (l - 2.0);
        let mut ranges = vec![(0.0, 0.0); 4];
        for (k, v) in gp.chi.iter().enumerate() {
            ranges[v.0] = (0.5 * th[k], 1e5);
        }
        for v in &gp.data {
            ranges[v.0] = (1e-9, pd_max);
        }
        let oracle = grid_oracle(&gp.problem, &ranges, 24).unwrap();
        match (sol.status, oracle) {
            (GpStatus::Optimal, Some(o)) => {
                assert!(o.objective <= sol.objective_value + 0.01 * sol.objective_value.abs(), "seed {seed}");
                checked += 1;
            }
            (GpStatus::Infeasible, None) => {}
            (st, o) => panic!("seed {seed}: solver {st}, oracle {o:?}"),
        }
    }
    assert!(checked >= 10);
}

#[test]
fn starved_budget_is_infeasible_for_solver_and_grid() {
    use urllc_core::allocator::build_gp;
    use urllc_core::gp::{grid_oracle, solve, GpStatus, SolverOptions};
    let s = ScenarioTemplate::default().generate(1, 2, 300.0).unwrap().with_energy(1e-12);
    let params = rate_params(&s, true).unwrap();
    let th = sinr_thresholds(&s, &params).unwrap();
    let pilots = vec![1e-14; 2];
    let gp = build_gp(&s, &*ReceiverKind::Mrc.receiver(), &th, &[1.0, 1.0], &pilots, Some(&pilots)).unwrap();
    let sol = solve(&gp.problem, None, &SolverOptions::default()).unwrap();
    assert_eq!(sol.status, GpStatus::Infeasible);
    let ranges = vec![(1e-12, 1e6); 4];
    assert!(grid_oracle(&gp.problem, &ranges, 12).unwrap().is_none());
}
