use proptest::prelude::*;

use urllc_core::gp::{parse_problem, solve, Constraint, GpProblem, GpStatus, Monomial, Posynomial, SolverOptions};

/// A random problem together with a point that strictly satisfies it.
#[derive(Debug, Clone)]
struct Instance {
    problem: GpProblem,
    interior: Vec<f64>,
}

fn instance() -> impl Strategy<Value = Instance> {
    (1usize..5).prop_flat_map(|n| {
        let point = prop::collection::vec(-2.0f64..2.0, n);
        let objective = prop::collection::vec(0.0f64..2.0, n);
        let term = (
            -1.5f64..1.5,
            prop::collection::vec(prop_oneof![Just(0.0), -2.0f64..2.0, Just(1.0)], n),
        );
        let constraint = (prop::collection::vec(term, 1..4), 0.1f64..0.9);
        (Just(n), point, objective, prop::collection::vec(constraint, 1..5))
    })
    .prop_map(|(n, ln_point, objective, constraints)| {
        let interior: Vec<f64> = ln_point.iter().map(|v| v.exp()).collect();
        let mut p = GpProblem::new();
        let vars: Vec<_> = (0..n).map(|i| p.add_var(format!("v{i}"))).collect();
        p.maximize(vars.iter().zip(&objective).map(|(&v, &c)| (v, c)));
        for (j, (terms, slack)) in constraints.into_iter().enumerate() {
            let lhs = Posynomial::new(terms.into_iter().map(|(lc, exps)| {
                Monomial::new(lc.exp(), vars.iter().zip(exps).map(|(&v, e)| (v, e)))
            }));
            // Scale the right side so the interior point has slack.
            let rhs = lhs.eval(&interior) / slack;
            p.push(Constraint::new(format!("c{j}"), lhs, Monomial::constant(rhs)));
        }
        // Box the variables so the log-space problem is compact; a variable
        // that nothing bounds below would drift to zero.
        for (i, &v) in vars.iter().enumerate() {
            p.set_upper_bound(v, 20.0 * interior[i]).unwrap();
            let floor = Posynomial::new([Monomial::new(interior[i] / 20.0, [(v, -1.0)])]);
            p.push(Constraint::new(format!("lo{i}"), floor, Monomial::constant(1.0)));
        }
        Instance { problem: p, interior }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn text_round_trip(inst in instance()) {
        let text = inst.problem.to_string();
        let back = parse_problem(&text).unwrap();
        prop_assert_eq!(back.to_string(), text);
        prop_assert_eq!(back.num_vars(), inst.problem.num_vars());
        let ratio_a = inst.problem.max_violation(&inst.interior);
        let ratio_b = back.max_violation(&inst.interior);
        prop_assert!((ratio_a - ratio_b).abs() < 1e-12);
    }

    #[test]
    fn solutions_are_feasible_and_no_worse_than_a_known_point(inst in instance()) {
        let sol = solve(&inst.problem, None, &SolverOptions::default()).unwrap();
        prop_assert_eq!(sol.status, GpStatus::Optimal);
        prop_assert!(inst.problem.max_violation(&sol.values) <= 1e-8);
        let known = inst.problem.log_objective(&inst.interior);
        prop_assert!(sol.objective_value >= known - 1e-7);
    }

    #[test]
    fn warm_and_cold_starts_agree(inst in instance()) {
        let opts = SolverOptions::default();
        let cold = solve(&inst.problem, None, &opts).unwrap();
        let warm = solve(&inst.problem, Some(&inst.interior), &opts).unwrap();
        prop_assert!((cold.objective_value - warm.objective_value).abs() <= 1e-6 * cold.objective_value.abs().max(1.0));
    }

    #[test]
    fn solving_is_deterministic(inst in instance()) {
        let opts = SolverOptions::default();
        let a = solve(&inst.problem, None, &opts).unwrap();
        let b = solve(&inst.problem, None, &opts).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&a.values), bits(&b.values));
    }
}

#[test]
fn parse_errors_carry_line_numbers() {
    let err = parse_problem("var x\nmax x\nc: x + <= 1\n").unwrap_err();
    assert!(err.to_string().contains("line 3"), "{err}");
}
