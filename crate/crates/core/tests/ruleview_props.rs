mod common;

use common::*;
use evidential_core::io::network_to_string;
use evidential_core::ruleview::{parse_rule_beam_text, render_valuation};
use evidential_core::{
    compile_query_node, evaluate_expression_query, parse_expr, parse_query, parse_rule_beam, render_rule_beam,
    validate_rule_query, Atom, Error, Expr, NodeValuation, Query, Variable,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn beams_round_trip(seed in any::<u64>()) {
        let mut r = rng(seed);
        let net = if r.gen_bool(0.5) { random_prob_network(&mut r, 4) } else { random_ds_network(&mut r, 4, 4) };
        for v in net.valuations() {
            let text = render_rule_beam(&net, v.name()).unwrap().to_string();
            let back: NodeValuation = parse_rule_beam(&text, net.variables()).unwrap();
            prop_assert_eq!(back.node(), v.node());
            prop_assert!(max_diff(&back.to_mass().unwrap(), &v.to_mass().unwrap()) <= 1e-12);
            prop_assert_eq!(render_valuation(&back).unwrap().to_string(), text);
        }
    }

    #[test]
    fn gates_preserve_expression_semantics(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(1..=4);
        let net = random_prob_network(&mut r, n);
        let before = network_to_string(&net).unwrap();
        let atoms = r.gen_range(1..=4);
        let expr = random_expr(&mut r, net.variables(), atoms);
        let a = evaluate_expression_query(&net, &expr, None).unwrap();
        prop_assert!((a.belief - brute_event(&net, &expr, None)).abs() <= 1e-9);
        prop_assert!(a.is_point());
        prop_assert_eq!(network_to_string(&net).unwrap(), before);
    }

    #[test]
    fn ds_answers_bracket_probabilities(seed in any::<u64>()) {
        let mut r = rng(seed);
        let net = random_ds_network(&mut r, 3, 4);
        let atoms = r.gen_range(1..=3);
        let expr = random_expr(&mut r, net.variables(), atoms);
        let a = evaluate_expression_query(&net, &expr, None).unwrap();
        prop_assert!(a.belief >= -1e-12 && a.belief <= a.plausibility + 1e-12 && a.plausibility <= 1.0 + 1e-12);
        // Bel(e) + Bel(not e) never exceeds one
        let b = evaluate_expression_query(&net, &Expr::Not(Box::new(expr)), None).unwrap();
        prop_assert!(a.belief + b.belief <= 1.0 + 1e-9);
        prop_assert!((a.plausibility - (1.0 - b.belief)).abs() <= 1e-9);
    }

    #[test]
    fn three_valued_answers_are_distributions(seed in any::<u64>()) {
        let mut r = rng(seed);
        let net = if r.gen_bool(0.5) { random_prob_network(&mut r, 4) } else { random_ds_network(&mut r, 4, 3) };
        let before = network_to_string(&net).unwrap();
        let atoms = r.gen_range(1..=3);
        let premise = random_expr(&mut r, net.variables(), atoms);
        let v = net.variables().choose(&mut r).unwrap();
        let conclusion = Atom::new(v.name(), v.domain().choose(&mut r).unwrap().clone());
        let a = validate_rule_query(&net, &premise, &conclusion).unwrap();
        for x in [a.t, a.n, a.q, a.ignorance] {
            prop_assert!(x >= -1e-12);
        }
        prop_assert!((a.t + a.n + a.q + a.ignorance - 1.0).abs() <= 1e-9);
        prop_assert_eq!(network_to_string(&net).unwrap(), before);
    }

    #[test]
    fn printed_expressions_parse_back(seed in any::<u64>()) {
        let mut r = rng(seed);
        let net = random_prob_network(&mut r, 4);
        let atoms = r.gen_range(1..=5);
        let expr = random_expr(&mut r, net.variables(), atoms);
        let text = expr.to_string();
        let back = parse_expr(&text).unwrap();
        // same truth table, whatever the grouping
        for (cfg, _) in enumerate_joint(&net) {
            let look = |name: &str| label(&net, &cfg, name);
            prop_assert_eq!(expr.eval(&look).unwrap(), back.eval(&look).unwrap());
        }
    }
}

fn tf(name: &str) -> Variable {
    binary(name)
}

#[test]
fn deterministic_rows_print_one_and_zero() {
    let v = NodeValuation::probabilistic(tf("y"), vec![], vec![vec![1.0, 0.0]]).unwrap();
    let text = render_valuation(&v).unwrap().to_string();
    assert_eq!(text, "NODE y KIND PROBABILISTIC\nIF TRUE THEN y='t' WITH 1.0\nIF TRUE THEN y='f' WITH 0.0\n");
}

#[test]
fn malformed_beams_are_rejected() {
    let vars = [tf("x"), tf("y")];
    let incomplete = "NODE y GIVEN x KIND PROBABILISTIC\nIF x='t' THEN y='t' WITH 0.5\nIF x='t' THEN y='f' WITH 0.5\n";
    assert!(parse_rule_beam::<f64>(incomplete, &vars).is_err());
    let unbalanced = "NODE y KIND PROBABILISTIC\nIF TRUE THEN y='t' WITH 0.5\nIF TRUE THEN y='f' WITH 0.4\n";
    assert!(parse_rule_beam::<f64>(unbalanced, &vars).is_err());
    assert!(matches!(parse_rule_beam_text("NODE y KIND PROBABILISTIC\nTHEN y='t'\n"), Err(Error::Parse { .. })));
    assert!(parse_rule_beam_text("IF TRUE THEN y='t' WITH 1\n").is_err());
    let unknown = "NODE y KIND PROBABILISTIC\nIF TRUE THEN y='maybe' WITH 1.0\n";
    assert!(parse_rule_beam::<f64>(unknown, &vars).is_err());
}

#[test]
fn gate_names_avoid_existing_variables() {
    let mut r = rng(2);
    let net = random_prob_network(&mut r, 2);
    let expr = parse_expr("v0='t' and (v1='f' or not v0='f')").unwrap();
    let c = compile_query_node(&net, &Query::Expr(expr)).unwrap();
    assert!(!c.added.is_empty());
    assert!(c.added.iter().all(|n| net.variable(n).is_err()));
    assert!(c.added.contains(&c.node));
    assert_eq!(c.network.variable(&c.node).unwrap().domain(), ["t", "n"]);
}

#[test]
fn rule_queries_use_a_three_valued_node() {
    let mut r = rng(4);
    let net = random_prob_network(&mut r, 2);
    let Query::Rule { premise, conclusion } = parse_query("if v0='t' then v1='t'").unwrap() else {
        panic!("expected a rule");
    };
    let c =
        compile_query_node(&net, &Query::Rule { premise: premise.clone(), conclusion: conclusion.clone() }).unwrap();
    assert_eq!(c.network.variable(&c.node).unwrap().domain(), ["t", "n", "?"]);
    let a = validate_rule_query(&net, &premise, &conclusion).unwrap();
    let premise_p = brute_event(&net, &premise, None);
    assert!((a.q - (1.0 - premise_p)).abs() <= 1e-9);
}

#[test]
fn impossible_conditions_are_reported() {
    let mut r = rng(9);
    let net = random_prob_network(&mut r, 2);
    let never = parse_expr("v0='t' and v0='f'").unwrap();
    let e = evaluate_expression_query(&net, &Expr::atom("v1", "t"), Some(&never)).unwrap_err();
    assert!(matches!(e, Error::TotalConflict(_)), "{e}");
}
