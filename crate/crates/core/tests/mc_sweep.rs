use urllc_core::allocator::OptimizeOptions;
use urllc_core::mc::{empirical_ergodic_rate, McConfig};
use urllc_core::receiver::ReceiverKind;
use urllc_core::scenario::ScenarioTemplate;
use urllc_core::sweep::{run_sweep, SweepAxis, SweepSpec};

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap()
}

// The closed-form bounds are Jensen bounds built from E{1/gamma}; that
// expectation itself is reproduced by simulation.
#[test]
fn mean_inverse_sinr_matches_closed_form() {
    let mut t = ScenarioTemplate::default();
    t.antennas = 64;
    let s = t.generate(21, 4, 250.0).unwrap();
    let pp = vec![0.01, 0.02, 0.005, 0.015];
    let pd = vec![0.02, 0.01, 0.02, 0.01];
    for rx in ReceiverKind::ALL {
        let cfg = McConfig::new(10_000, 3, rx).unwrap();
        let rep = empirical_ergodic_rate(&s, &pp, &pd, &cfg).unwrap();
        for k in 0..4 {
            let want = 1.0 / rep.sinr_lb[k];
            let got = rep.mean_inv_sinr[k];
            assert!((got / want - 1.0).abs() < 0.03, "{rx} device {k}: {got} vs {want}");
            assert!(rep.empirical[k] >= rep.rate_lb[k] - 2.0 * rep.stderr[k], "{rx} device {k}");
        }
        assert_eq!(rep.redrawn, 0);
    }
}

#[test]
fn monte_carlo_is_independent_of_thread_count() {
    let s = ScenarioTemplate::default().generate(5, 6, 300.0).unwrap();
    let p = vec![0.02; 6];
    for rx in ReceiverKind::ALL {
        let cfg = McConfig::new(300, 17, rx).unwrap();
        let one = pool(1).install(|| empirical_ergodic_rate(&s, &p, &p, &cfg).unwrap());
        let three = pool(3).install(|| empirical_ergodic_rate(&s, &p, &p, &cfg).unwrap());
        assert_eq!(one, three);
        let reseeded = empirical_ergodic_rate(&s, &p, &p, &McConfig::new(300, 18, rx).unwrap()).unwrap();
        assert_ne!(one.empirical, reseeded.empirical);
    }
}

#[test]
fn sweeps_are_reproducible_across_thread_counts() {
    let mut spec = SweepSpec::preset(SweepAxis::DeviceCount, ReceiverKind::Mrc);
    spec.values = vec![2.0, 3.0];
    spec.snapshots = 3;
    let algs = ["proposed", "conventional", "fixed_pilot"];
    let opts = OptimizeOptions::default();
    let a = pool(1).install(|| run_sweep(&spec, &algs, &opts).unwrap());
    let b = pool(4).install(|| run_sweep(&spec, &algs, &opts).unwrap());
    assert_eq!(a, b);
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.rows.len(), 2 * 3 * 3);
}

#[test]
fn proposed_energy_curve_is_nondecreasing() {
    let mut spec = SweepSpec::preset(SweepAxis::Energy, ReceiverKind::Mrc);
    spec.values = vec![0.5, 1.0, 2.0, 4.0];
    spec.snapshots = 4;
    spec.devices = 6;
    let res = run_sweep(&spec, &["proposed"], &OptimizeOptions::default()).unwrap();
    let means: Vec<f64> = res.summary().iter().map(|s| s.mean_weighted_sum).collect();
    assert!(means.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-6)), "{means:?}");
}
