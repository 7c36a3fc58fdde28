use welfarist::arith::{compare, Expr, Precision, ValueOrdering};
use welfarist::conditions::{
    analytic_verdict, check_condition, marginal_growth_envelope, numeric_lemma_suite, threshold_bisect, Bounds,
    ConditionId, Family, Verdict,
};
use welfarist::constructions::*;
use welfarist::fairness::{is_ef, is_ef1, is_pareto_optimal, PoVerdict};
use welfarist::model::{classify, is_positive_admitting, parse_instance, Allocation, Instance, Rational};
use welfarist::solver::{chosen_all_ef1, enumerate_maximizers, solve_branch_bound, structured_ik_argmax, SolverConfig};
use welfarist::welfare::{delta, eval, harmonic_integral, ExtendedValue, WelfareFunction};

fn wf(s: &str) -> WelfareFunction {
    s.parse().unwrap()
}

fn q(n: i64, d: i64) -> Rational {
    Rational::from((n, d))
}

fn r(n: i64) -> Rational {
    Rational::from(n)
}

fn utilitarian(inst: &Instance, a: &Allocation) -> Rational {
    a.utilities(inst).into_iter().sum()
}

fn every_allocation(n: usize, m: usize) -> impl Iterator<Item = Allocation> {
    (0..n.pow(m as u32)).map(move |mut code| {
        let mut v = vec![0; m];
        for slot in v.iter_mut().rev() {
            *slot = code % n;
            code /= n;
        }
        Allocation::from_assignment(v)
    })
}

// ---- model ----

#[test]
fn parse_instance_documents() {
    let inst = parse_instance(r#"{"agents":2,"utilities":[["1","1/2"],["0","3"]]}"#).unwrap();
    assert_eq!((inst.agents(), inst.goods()), (2, 2));
    assert_eq!(inst.utility(0, 1), &q(1, 2));
    assert!(parse_instance(r#"{"agents":1,"utilities":[["1"]]}"#).is_err());
    assert!(parse_instance(r#"{"agents":2,"utilities":[["-1","0"],["0","1"]]}"#).is_err());
}

#[test]
fn classify_examples() {
    let chain = chain_instance(4).unwrap();
    let p = classify(&chain);
    assert!(p.integer_valued && !p.two_value);
    // every row of the chain instance sums to n
    assert!(p.normalized);

    let ones = Instance::from_integers(&[[1, 1, 1], [1, 1, 1]]).unwrap();
    let p = classify(&ones);
    assert!(p.identical_good && p.binary && p.two_value && p.normalized);

    let p = classify(&identical_two_value(3, 1, &r(2), &r(5)).unwrap());
    assert!(p.identical_good && p.two_value && !p.normalized);
}

#[test]
fn positive_admitting_examples() {
    let (ok, witness) = is_positive_admitting(&chain_instance(4).unwrap());
    assert!(ok);
    assert_eq!(witness.unwrap().assignment(), &[0, 1, 2, 3]);
    assert!(!is_positive_admitting(&Instance::from_integers(&[[1, 1], [0, 0]]).unwrap()).0);
    assert!(!is_positive_admitting(&Instance::from_integers(&[[1, 0], [1, 0]]).unwrap()).0);
}

#[test]
fn bundle_utilities_on_chain() {
    let chain = chain_instance(4).unwrap();
    assert_eq!(chain.bundle_utility(0, &[0]).unwrap(), r(4));
    assert_eq!(chain.bundle_utility(1, &[0, 1]).unwrap(), r(4));
    assert_eq!(chain.bundle_utility(2, &[]).unwrap(), r(0));
}

// ---- welfare ----

#[test]
fn eval_examples() {
    assert_eq!(
        eval(&wf("harmonic:0"), &r(4), 128).unwrap(),
        ExtendedValue::Rational(q(25, 12))
    );
    assert_eq!(eval(&wf("harmonic:-1"), &r(0), 128).unwrap(), ExtendedValue::NegInf);
    assert_eq!(
        eval(&wf("harmonic:-1"), &r(1), 128).unwrap(),
        ExtendedValue::Rational(r(0))
    );
    assert_eq!(
        eval(&wf("pmean:1/2"), &r(0), 128).unwrap(),
        ExtendedValue::Rational(r(0))
    );
    assert_eq!(eval(&wf("log"), &r(1), 128).unwrap(), ExtendedValue::LogProduct(r(1)));
    assert_eq!(eval(&wf("log"), &r(0), 128).unwrap(), ExtendedValue::NegInf);
}

#[test]
fn harmonic_integral_examples() {
    let i = harmonic_integral(&r(0), &r(4), 1e-12).unwrap();
    assert!(i.contains_rational(&q(25, 12)) && i.width_f64() < 1e-9);
    let z = harmonic_integral(&r(0), &r(0), 1e-12).unwrap();
    assert!(z.contains_f64(0.0));
    let m = harmonic_integral(&r(-1), &r(3), 1e-12).unwrap();
    assert!(m.contains_rational(&q(3, 2)));
}

#[test]
fn delta_examples() {
    let h0 = wf("harmonic:0");
    assert_eq!(delta(&h0, 1, &r(1), 128).unwrap(), ExtendedValue::Rational(q(1, 2)));
    assert_eq!(delta(&h0, 1, &r(2), 128).unwrap(), ExtendedValue::Rational(q(7, 12)));
    assert_eq!(delta(&wf("log"), 0, &r(5), 128).unwrap(), ExtendedValue::PosInf);
    match delta(&wf("pmean:1/2"), 1, &r(6), 128).unwrap() {
        ExtendedValue::Interval(i) => {
            assert!(i.lo > 1.014 && i.hi < 1.0147, "{i}");
        }
        other => panic!("expected an interval, got {other:?}"),
    }
}

#[test]
fn compare_examples() {
    let p = Precision::default();
    let lhs = Expr::ln(r(2)) + &Expr::ln(r(3));
    assert_eq!(compare(&lhs, &Expr::ln(r(6)), &p), ValueOrdering::Equal);
    let a = Expr::ln(r(4));
    let b = Expr::ln(r(4)) + &Expr::neg_inf() + &Expr::ln(r(3)) + &Expr::ln(r(4));
    assert_eq!(compare(&a, &b, &p), ValueOrdering::Greater);
    let f = wf("pmean:1/2");
    let d = welfarist::welfare::delta_expr(&f, 1, &r(6)).unwrap();
    assert_eq!(
        compare(&d, &Expr::rational(r(1)), &Precision::with_ceiling(64)),
        ValueOrdering::Greater
    );
}

// ---- fairness ----

#[test]
fn ef1_examples() {
    let chain = chain_instance(4).unwrap();
    let (diagonal, shifted) = chain_allocations(4).unwrap();
    assert!(is_ef1(&chain, &shifted).holds);
    assert!(is_ef1(&chain, &diagonal).holds);
    let units = Instance::from_integers(&[[1, 1], [1, 1]]).unwrap();
    let report = is_ef1(&units, &Allocation::from_assignment(vec![0, 0]));
    assert!(!report.holds);
    assert_eq!((report.violations[0].envious, report.violations[0].envied), (1, 0));
}

#[test]
fn ef_examples() {
    let single = Instance::from_integers(&[[1], [1]]).unwrap();
    assert!(!is_ef(&single, &Allocation::from_assignment(vec![0])));
    let zeros = Instance::from_integers(&[[0, 0], [0, 0]]).unwrap();
    assert!(is_ef(&zeros, &Allocation::from_assignment(vec![1, 1])));
    let fans = Instance::from_integers(&[[1, 0], [0, 1]]).unwrap();
    assert!(is_ef(&fans, &Allocation::from_assignment(vec![0, 1])));
}

#[test]
fn po_examples() {
    let chain = chain_instance(4).unwrap();
    let (_, shifted) = chain_allocations(4).unwrap();
    assert_eq!(is_pareto_optimal(&chain, &shifted, 1 << 20), PoVerdict::ParetoOptimal);
    let one = Instance::from_integers(&[[1], [0]]).unwrap();
    assert!(matches!(
        is_pareto_optimal(&one, &Allocation::from_assignment(vec![1]), 100),
        PoVerdict::Dominated(_)
    ));
    let wide = Instance::new(vec![vec![r(1); 20]; 2]).unwrap();
    assert!(matches!(
        is_pareto_optimal(&wide, &Allocation::from_assignment(vec![0; 20]), 1000),
        PoVerdict::BudgetExceeded { .. }
    ));
}

// ---- solver ----

#[test]
fn chain_maximizers() {
    let cfg = SolverConfig::default();
    let chain = chain_instance(4).unwrap();
    let (diagonal, shifted) = chain_allocations(4).unwrap();
    let nash = enumerate_maximizers(&chain, &wf("log"), &cfg).unwrap();
    assert_eq!(nash.allocations, vec![diagonal.clone()]);
    assert_eq!(utilitarian(&chain, &diagonal), r(7));
    let harmonic = enumerate_maximizers(&chain, &wf("harmonic:0"), &cfg).unwrap();
    assert!(harmonic.allocations.contains(&shifted));
    assert_eq!(utilitarian(&chain, &shifted), r(11));
    let five = chain_instance(5).unwrap();
    assert!(classify(&five).integer_valued && classify(&five).positive_admitting);
}

#[test]
fn degenerate_and_tiny_instances() {
    let cfg = SolverConfig::default();
    let empty = Instance::new(vec![vec![], vec![]]).unwrap();
    let set = enumerate_maximizers(&empty, &wf("log"), &cfg).unwrap();
    assert_eq!(set.allocations.len(), 1);
    let units = Instance::from_integers(&[[1, 1], [1, 1]]).unwrap();
    let set = enumerate_maximizers(&units, &wf("log"), &cfg).unwrap();
    let got: Vec<_> = set.allocations.iter().map(|a| a.assignment().to_vec()).collect();
    assert_eq!(got, vec![vec![0, 1], vec![1, 0]]);
    let single = Instance::from_integers(&[[2], [5]]).unwrap();
    let (a, _) = solve_branch_bound(&single, &wf("pmean:1/2"), &cfg).unwrap();
    assert_eq!(a.assignment(), &[1]);
}

#[test]
fn branch_and_bound_on_split_instance() {
    let cfg = SolverConfig::default();
    let inst = normalized_two_split(3).unwrap();
    let f = wf("pmean:0");
    let (_, w) = solve_branch_bound(&inst, &f, &cfg).unwrap();
    let oracle = enumerate_maximizers(&inst, &f, &cfg).unwrap();
    assert_eq!(compare(&w, &oracle.welfare, &cfg.precision), ValueOrdering::Equal);
}

#[test]
fn chosen_all_ef1_examples() {
    let cfg = SolverConfig::default();
    assert!(chosen_all_ef1(&chain_instance(4).unwrap(), &wf("log"), &cfg).unwrap().0);

    let pair = identical_two_value(2, 0, &r(6), &r(1)).unwrap();
    let (ok, bad) = chosen_all_ef1(&pair, &wf("pmean:1/2"), &cfg).unwrap();
    assert!(!ok);
    assert_eq!(bad.unwrap().assignment(), &[0, 0]);

    let tie = flat_function_gadget(2, &r(1), &r(2)).unwrap();
    assert!(!chosen_all_ef1(&tie.instance, &wf("flat:1:2"), &cfg).unwrap().0);
}

#[test]
fn structured_argmax_examples() {
    let p = Precision::default();
    assert_eq!(structured_ik_argmax(20, &wf("pmean:0"), &p).unwrap().0, 20);
    let psi = wf("combo:1*pmean:0+40*pmean:-1");
    assert_eq!(structured_ik_argmax(20, &psi, &p).unwrap().0, 18);
    assert_eq!(structured_ik_argmax(100, &psi, &p).unwrap().0, 96);
}

// ---- conditions ----

#[test]
fn bounded_condition_examples() {
    let r4 = check_condition(&wf("pmean:1/2"), ConditionId::C4, &Bounds::new(100, 1)).unwrap();
    assert_eq!(r4.verdict, Verdict::NoViolationFound);
    let r3b = check_condition(&wf("modlog:1/2"), ConditionId::C3b, &Bounds::new(30, 50)).unwrap();
    assert_eq!(r3b.verdict, Verdict::NoViolationFound);
    let v = check_condition(&wf("modlog:2"), ConditionId::C3b, &Bounds::new(3, 5)).unwrap();
    let w = v.verdict.witness().expect("violated");
    assert_eq!(w.param_u64("k"), Some(0));
    assert!(w.param_u64("a").unwrap() >= 2);
}

#[test]
fn analytic_examples() {
    assert_eq!(analytic_verdict(&wf("modlog:2"), ConditionId::C3), Some(false));
    assert_eq!(analytic_verdict(&wf("harmonic:-1"), ConditionId::C5), Some(true));
    assert_eq!(analytic_verdict(&wf("pmean:0"), ConditionId::C4), Some(true));
}

#[test]
fn degenerate_bracket_is_rejected() {
    let b = Bounds::new(2, 8);
    assert!(threshold_bisect(Family::ModLog, ConditionId::C3b, q(1, 4), q(1, 2), &b, 5).is_err());
}

#[test]
fn growth_envelopes() {
    let p = Precision::default();
    let log = marginal_growth_envelope(&wf("log"), 10_000, &p).unwrap();
    assert!(log.within());
    let harmonic = marginal_growth_envelope(&wf("harmonic:0"), 10_000, &p).unwrap();
    assert!(harmonic.within());
    let root = marginal_growth_envelope(&wf("pmean:1/2"), 200, &p).unwrap();
    assert!(!root.within());
}

#[test]
fn lemma_suite_passes() {
    let report = numeric_lemma_suite(&Precision::default());
    assert!(report.passed());
    assert_eq!(report.h_first_failure, None);
}

// ---- constructions ----

#[test]
fn identical_two_value_shapes() {
    let pair = identical_two_value(2, 0, &r(6), &r(1)).unwrap();
    assert_eq!(pair.goods(), 2);
    let p = classify(&pair);
    assert!(p.identical_good && p.two_value);

    let flat = classify(&identical_two_value(3, 1, &r(2), &r(2)).unwrap());
    assert!(flat.identical_good && flat.two_value);

    let inst = identical_two_value(2, 1, &r(3), &r(5)).unwrap();
    for a in every_allocation(2, inst.goods()).filter(|a| is_ef1(&inst, a).holds) {
        let sizes: Vec<usize> = a.bundles(2).iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![2, 2]);
    }
}

#[test]
fn normalized_three_shapes() {
    let inst = normalized_three(3, 1, &r(1), &r(1), &q(1, 2)).unwrap();
    let p = classify(&inst);
    assert!(p.normalized && p.positive_admitting);
    assert_eq!(normalized_three(3, 2, &r(2), &r(1), &q(1, 2)).unwrap().goods(), 6);
}

#[test]
fn concavity_gadget_shapes() {
    let inst = concavity_gadget(&r(1), &q(1, 2)).unwrap();
    assert_eq!(inst.goods(), 4);
    assert!(inst.rows().iter().flatten().all(|u| *u == q(1, 2)));
    let p = classify(&inst);
    assert!(p.identical_good && p.normalized);

    let third = concavity_gadget(&r(1), &q(1, 3)).unwrap();
    let n = third.agents();
    for a in every_allocation(n, third.goods()).filter(|a| is_ef1(&third, a).holds) {
        let sizes: Vec<usize> = a.bundles(n).iter().map(Vec::len).collect();
        assert!(sizes.iter().all(|&s| s == sizes[0]), "{sizes:?}");
    }
}

#[test]
fn binary_gadget_shapes() {
    let two = binary_gadget(2, 1).unwrap();
    assert_eq!(two.goods(), 4);
    assert!(two.rows().iter().flatten().all(|u| *u == 1));
    let p = classify(&binary_gadget(4, 0).unwrap());
    assert!(p.binary && p.positive_admitting);
    assert_eq!(binary_gadget(3, 2).unwrap().goods(), 7);
}

#[test]
fn two_value_gadget_shapes() {
    let inst = two_value_gadget(2, 2, 1, 0, 3, 2).unwrap();
    assert_eq!(inst.goods(), 5);
    let p = classify(&inst);
    assert!(p.integer_valued && p.two_value);
    assert!(two_value_gadget(2, 0, 1, 1, 3, 2).is_err());
}

#[test]
fn integer_general_shapes() {
    let small = integer_general(2, 1, 1, 1).unwrap();
    assert_eq!(small.goods(), 3);
    assert_eq!(small.utility(0, 0), &r(0));
    let big = integer_general(3, 2, 4, 3).unwrap();
    assert_eq!(big.goods(), 7);
    let p = classify(&big);
    assert!(p.integer_valued && p.positive_admitting);
}

#[test]
fn flat_gadget_shape() {
    let tie = flat_function_gadget(2, &r(1), &r(2)).unwrap();
    assert_eq!(tie.d, 4);
    assert!(tie.instance.rows().iter().flatten().all(|u| *u == q(1, 4)));
}

#[test]
fn normalized_two_shapes() {
    let scaled = normalized_two_scaled(&r(1)).unwrap();
    assert_eq!(scaled.row_total(0), r(25));
    assert_eq!(scaled.row_total(1), r(25));
    let split = normalized_two_split(2).unwrap();
    assert_eq!(split.goods(), 5);
    assert_eq!(split.row_total(1), r(9));
    assert_eq!(normalized_two_split(20).unwrap().goods(), 41);
}
