//! Acceptance suite: one line per criterion, exit status 0 unless an unexpected failure occurs.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use welfarist::arith::{compare, Precision, ValueOrdering};
use welfarist::campaign::{run_campaign, CampaignSpec, TheoremId};
use welfarist::conditions::{
    check_condition, check_condition_adaptive, implication_scan, marginal_growth_envelope, numeric_lemma_suite,
    threshold_bisect, Bounds, ConditionId, Family, Growth, Verdict,
};
use welfarist::constructions::{
    chain_allocations, chain_instance, flat_function_gadget, identical_two_value, integer_general,
    normalized_two_split, split_allocation,
};
use welfarist::fairness::{is_ef1, is_pareto_optimal, PoVerdict};
use welfarist::model::{random_instance, ClassConstraint, Rational};
use welfarist::solver::{
    chosen_all_ef1, enumerate_maximizers, solve_branch_bound, structured_ik_argmax, welfare, SolverConfig,
};
use welfarist::welfare::{eval, harmonic_integral, ExtendedValue, WelfareFunction};

/// Criteria whose stated target cannot be met as written.
const UNATTAINABLE: &[u32] = &[5];

const BATTERY: &[&str] = &[
    "log",
    "modlog:0",
    "modlog:1/2",
    "modlog:1",
    "modlog:2",
    "harmonic:-1",
    "harmonic:-1/2",
    "harmonic:0",
    "harmonic:2/5",
    "harmonic:1",
    "pmean:-1",
    "pmean:0",
    "pmean:1/2",
    "pmean:1",
];

struct Check {
    notes: Vec<String>,
    failed: bool,
}

impl Check {
    fn new() -> Self {
        Check {
            notes: Vec::new(),
            failed: false,
        }
    }

    fn require(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failed = true;
            self.notes.push(format!("FAILED {}", what.into()));
        }
    }

    fn note(&mut self, what: impl Into<String>) {
        self.notes.push(what.into());
    }

    fn within(&mut self, started: Instant, limit: Duration) {
        let took = started.elapsed();
        self.require(took <= limit, format!("runtime {took:.2?} exceeds {limit:?}"));
    }
}

type Outcome = Result<Check, String>;
type Criterion = (u32, &'static str, fn() -> Outcome);

fn wf(s: &str) -> WelfareFunction {
    s.parse().expect("built-in welfare spec")
}

fn q(n: i64, d: i64) -> Rational {
    Rational::from((n, d))
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn chain_reproduction() -> Outcome {
    let started = Instant::now();
    let mut c = Check::new();
    let cfg = SolverConfig::default();
    let n = 4;
    let inst = chain_instance(n).map_err(err)?;
    let (diagonal, shifted) = chain_allocations(n).map_err(err)?;
    let nash = enumerate_maximizers(&inst, &wf("log"), &cfg).map_err(err)?;
    c.require(
        nash.allocations == vec![diagonal.clone()],
        "log maximizer set is exactly the diagonal allocation",
    );
    let total = |a: &welfarist::Allocation| a.utilities(&inst).into_iter().sum::<Rational>();
    c.require(total(&diagonal) == 2 * n as i64 - 1, "diagonal utilitarian sum 2n-1");
    let harmonic = enumerate_maximizers(&inst, &wf("harmonic:0"), &cfg).map_err(err)?;
    c.require(
        harmonic.allocations.contains(&shifted),
        "harmonic maximizers include the shifted allocation",
    );
    let n = n as i64;
    c.require(total(&shifted) == n * n - 2 * n + 3, "shifted utilitarian sum n^2-2n+3");
    c.require(is_ef1(&inst, &shifted).holds, "shifted allocation is EF1");
    c.require(
        is_pareto_optimal(&inst, &shifted, 1 << 20) == PoVerdict::ParetoOptimal,
        "shifted allocation is PO",
    );
    c.note(format!(
        "sums 7 and 11, {} harmonic maximizer(s)",
        harmonic.allocations.len()
    ));
    c.within(started, Duration::from_secs(1));
    Ok(c)
}

fn campaign_check(c: &mut Check, theorem: TheoremId, welfare: &str, trials: u32, seed: u64) -> Result<(), String> {
    let mut spec = CampaignSpec::new(theorem, trials, seed);
    spec.welfare = wf(welfare);
    let out = run_campaign(&spec).map_err(err)?;
    c.require(
        out.violations == 0 && out.inconclusive == 0,
        format!(
            "{welfare}: {} violations, {} inconclusive",
            out.violations, out.inconclusive
        ),
    );
    c.note(format!("{welfare}: {trials} trials clean"));
    Ok(())
}

fn nash_property_suite() -> Outcome {
    let started = Instant::now();
    let mut c = Check::new();
    campaign_check(&mut c, TheoremId::MnwAllClasses, "log", 500, 42)?;
    c.within(started, Duration::from_secs(120));
    Ok(c)
}

fn modified_log_integer() -> Outcome {
    let mut c = Check::new();
    for (i, cst) in ["0", "1/2", "1"].iter().enumerate() {
        campaign_check(
            &mut c,
            TheoremId::ModlogInteger,
            &format!("modlog:{cst}"),
            300,
            100 + i as u64,
        )?;
    }
    let f = wf("modlog:2");
    let report = check_condition(&f, ConditionId::C3b, &Bounds::new(3, 5)).map_err(err)?;
    let Some(w) = report.verdict.witness() else {
        c.require(false, "modlog:2 violates the identical-good condition");
        return Ok(c);
    };
    let (k, a) = (w.param_u64("k").unwrap_or(0), w.param("a").cloned().unwrap_or_default());
    let inst = identical_two_value(2, k, &a, &Rational::from(1)).map_err(err)?;
    let (all_ef1, bad) = chosen_all_ef1(&inst, &f, &SolverConfig::default()).map_err(err)?;
    c.require(
        !all_ef1 && bad.is_some(),
        "modlog:2 has a non-EF1 maximizer on the derived instance",
    );
    c.note(format!("modlog:2 witness k={k} a={a}"));
    Ok(c)
}

fn harmonic_boundary() -> Outcome {
    let mut c = Check::new();
    for cst in ["-1", "-1/2", "0", "2/5"] {
        let f = wf(&format!("harmonic:{cst}"));
        let r = check_condition(&f, ConditionId::C3b, &Bounds::new(30, 50)).map_err(err)?;
        c.require(
            r.verdict == Verdict::NoViolationFound,
            format!("harmonic:{cst} passes bounded check"),
        );
    }
    let start = Bounds::new(4, 8);
    for cst in ["1/2", "1"] {
        let f = wf(&format!("harmonic:{cst}"));
        let r = check_condition_adaptive(&f, ConditionId::C3b, &start, &Growth::default()).map_err(err)?;
        match r.verdict.witness() {
            Some(w) => {
                c.require(
                    w.lhs.as_rational().is_some() && w.rhs.as_rational().is_some(),
                    format!("harmonic:{cst} witness compared as exact rationals"),
                );
                c.note(format!(
                    "harmonic:{cst} witness k={:?} a={:?}",
                    w.param_u64("k"),
                    w.param_u64("a")
                ));
            }
            None => c.require(false, format!("harmonic:{cst} yields an adaptive witness")),
        }
    }
    let f = wf("harmonic:-3/4");
    let r = check_condition_adaptive(&f, ConditionId::C6a, &start, &Growth::default()).map_err(err)?;
    let Some(w) = r.verdict.witness() else {
        c.require(false, "harmonic:-3/4 yields a witness for the integer-class condition");
        return Ok(c);
    };
    let p = |name| w.param_u64(name).unwrap_or(0);
    let inst = integer_general(2, p("k"), p("a"), p("b")).map_err(err)?;
    let (all_ef1, _) = chosen_all_ef1(&inst, &f, &SolverConfig::default()).map_err(err)?;
    c.require(
        !all_ef1,
        "harmonic:-3/4 has a non-EF1 maximizer on the derived integer instance",
    );
    c.note(format!("harmonic:-3/4 witness k={} a={} b={}", p("k"), p("a"), p("b")));
    Ok(c)
}

fn power_mean_results() -> Outcome {
    let mut c = Check::new();
    let root = wf("pmean:1/2");
    let r = check_condition(&root, ConditionId::C4, &Bounds::new(100, 1)).map_err(err)?;
    c.require(
        r.verdict == Verdict::NoViolationFound,
        "pmean:1/2 passes the binary condition for k <= 100",
    );

    let r = check_condition(&root, ConditionId::C3, &Bounds::new(2, 6)).map_err(err)?;
    match r.verdict.witness() {
        Some(w) => {
            let at = (w.param_u64("k"), w.param_u64("a"), w.param_u64("b"));
            c.require(
                at == (Some(0), Some(6), Some(1)),
                format!("witness at (0, 6, 1), got {at:?}"),
            );
            c.require(w.lhs.as_rational() == Some(&Rational::from(1)), "left side equals 1");
            let i = w.rhs.enclose(64);
            c.require(
                i.lo > q(10140, 10000) && i.hi < q(10142, 10000),
                format!("right side {i} inside the stated bracket (1.014, 1.0142)"),
            );
            c.require(
                i.lo > q(10146, 10000) && i.hi < q(10147, 10000),
                format!("right side {i} inside (1.0146, 1.0147)"),
            );
            c.require(
                compare(&w.lhs, &w.rhs, &Precision::with_ceiling(64)) == ValueOrdering::Less,
                "1 < sqrt(12) - sqrt(6) decided at 64 bits",
            );
        }
        None => c.require(false, "pmean:1/2 violates the identical-good condition"),
    }

    let r = check_condition(&wf("pmean:1"), ConditionId::C4, &Bounds::new(2, 1)).map_err(err)?;
    c.require(
        r.verdict.witness().and_then(|w| w.param_u64("k")) == Some(0),
        "pmean:1 violates the binary condition at k = 0",
    );
    campaign_check(&mut c, TheoremId::PmeanBinary, "pmean:1/2", 200, 9)?;
    Ok(c)
}

fn threshold_bisection() -> Outcome {
    let mut c = Check::new();
    let width = q(1, 1 << 10);

    let started = Instant::now();
    let bounds = Bounds::new(2, 32).with_power_probes(1 << 30);
    let (lo, hi) = threshold_bisect(
        Family::ModLog,
        ConditionId::C3b,
        q(1, 2),
        Rational::from(2),
        &bounds,
        20,
    )
    .map_err(err)?;
    c.require(lo <= 1 && hi >= 1, format!("modlog bracket [{lo}, {hi}] contains 1"));
    c.require(Rational::from(&hi - &lo) <= width, "modlog bracket width <= 2^-10");
    c.note(format!("modlog [{:.8}, {:.8}]", lo.to_f64(), hi.to_f64()));
    c.within(started, Duration::from_secs(300));

    let started = Instant::now();
    let bounds = Bounds::new(2, 32).with_power_probes(1 << 26);
    let (lo, hi) = threshold_bisect(
        Family::ModHarmonic,
        ConditionId::C3b,
        Rational::new(),
        Rational::from(1),
        &bounds,
        20,
    )
    .map_err(err)?;
    let target = 1.0 / std::f64::consts::LN_2 - 1.0;
    c.require(
        lo.to_f64() <= target && hi.to_f64() >= target,
        format!("harmonic bracket [{lo}, {hi}] contains 1/ln 2 - 1"),
    );
    c.require(Rational::from(&hi - &lo) <= width, "harmonic bracket width <= 2^-10");
    c.note(format!("harmonic [{:.8}, {:.8}]", lo.to_f64(), hi.to_f64()));
    c.within(started, Duration::from_secs(300));
    Ok(c)
}

fn integral_consistency() -> Outcome {
    let mut c = Check::new();
    let mut worst = 0f64;
    for cst in [q(-1, 1), q(-1, 2), q(0, 1), q(1, 2), q(1, 1)] {
        let f = WelfareFunction::ModHarmonic(cst.clone());
        for x in 0..=8i64 {
            if cst == -1 && x == 0 {
                continue;
            }
            let x = Rational::from(x);
            let ExtendedValue::Rational(exact) = eval(&f, &x, 128).map_err(err)? else {
                c.require(false, format!("h_{cst}({x}) has a closed form"));
                continue;
            };
            let i = harmonic_integral(&cst, &x, 1e-12).map_err(err)?;
            let gap = (i.mid_f64() - exact.to_f64()).abs() + i.width_f64();
            worst = worst.max(gap);
            c.require(gap < 1e-9, format!("h_{cst}({x}): quadrature off by {gap:e}"));
        }
    }
    for j in 4..=32i64 {
        let x = q(j, 4);
        let shifted = Rational::from(&x - 1);
        let a = harmonic_integral(&q(-1, 1), &x, 1e-12).map_err(err)?;
        let b = harmonic_integral(&Rational::new(), &shifted, 1e-12).map_err(err)?;
        let gap = (a.mid_f64() - b.mid_f64()).abs();
        c.require(gap < 1e-9, format!("h_-1({x}) vs h_0({shifted}): {gap:e}"));
        if j % 4 == 0 {
            let ea = eval(&wf("harmonic:-1"), &x, 128).map_err(err)?;
            let eb = eval(&wf("harmonic:0"), &shifted, 128).map_err(err)?;
            c.require(ea == eb, format!("exact h_-1({x}) = h_0({shifted})"));
        }
    }
    c.note(format!("worst integer-point gap {worst:.1e}"));
    Ok(c)
}

fn structured_argmax() -> Outcome {
    let mut c = Check::new();
    let p = Precision::default();
    let nash = wf("pmean:0");
    let psi = wf("combo:1*pmean:0+40*pmean:-1");
    for (k, f, label, want) in [
        (20, &nash, "pmean:0", 20),
        (20, &psi, "psi", 18),
        (100, &psi, "psi", 96),
    ] {
        let (x, _) = structured_ik_argmax(k, f, &p).map_err(err)?;
        c.require(x == want, format!("{label} at k={k}: x={x}, expected {want}"));
    }
    let cfg = SolverConfig::default();
    for k in 1..=4 {
        for f in [&nash, &psi] {
            let (x, _) = structured_ik_argmax(k, f, &p).map_err(err)?;
            let inst = normalized_two_split(k).map_err(err)?;
            let w = welfare(&inst, f, &split_allocation(k, x).map_err(err)?).map_err(err)?;
            let full = enumerate_maximizers(&inst, f, &cfg).map_err(err)?;
            c.require(
                compare(&w, &full.welfare, &p) == ValueOrdering::Equal,
                format!("{f} at k={k}: structured optimum matches enumeration"),
            );
        }
    }
    c.note("x = 20, 18, 96; enumeration agrees for k <= 4");
    Ok(c)
}

fn flat_tie() -> Outcome {
    let mut c = Check::new();
    let f = wf("flat:1:2");
    let tie = flat_function_gadget(2, &Rational::from(1), &Rational::from(2)).map_err(err)?;
    let cfg = SolverConfig::default();
    let wa = welfare(&tie.instance, &f, &tie.balanced).map_err(err)?;
    let wb = welfare(&tie.instance, &f, &tie.skewed).map_err(err)?;
    c.require(
        compare(&wa, &wb, &cfg.precision) == ValueOrdering::Equal,
        "balanced and skewed welfare tie",
    );
    c.require(is_ef1(&tie.instance, &tie.balanced).holds, "balanced allocation is EF1");
    c.require(
        !is_ef1(&tie.instance, &tie.skewed).holds,
        "skewed allocation is not EF1",
    );
    let set = enumerate_maximizers(&tie.instance, &f, &cfg).map_err(err)?;
    c.require(
        set.allocations.contains(&tie.balanced) && set.allocations.contains(&tie.skewed),
        "both allocations are maximizers",
    );
    c.note(format!(
        "{} maximizers on {} goods",
        set.allocations.len(),
        tie.instance.goods()
    ));
    Ok(c)
}

fn numeric_lemmas() -> Outcome {
    let mut c = Check::new();
    let p = Precision::default();
    let lemmas = numeric_lemma_suite(&p);
    c.require(lemmas.g_near_limit, "g(10^6) within 1e-3 of -1/2");
    c.require(lemmas.h_first_failure.is_none(), "h strictly increasing on [1, 1000]");
    for spec in ["log", "harmonic:0"] {
        let env = marginal_growth_envelope(&wf(spec), 10_000, &p).map_err(err)?;
        c.require(env.within(), format!("{spec} stays within the envelope up to 10^4"));
    }
    let env = marginal_growth_envelope(&wf("pmean:1/2"), 10_000, &p).map_err(err)?;
    c.require(env.first_breach.is_some(), "pmean:1/2 breaches the envelope");
    c.note(format!("pmean:1/2 first breach at x = {:?}", env.first_breach));
    Ok(c)
}

fn implication_harness() -> Outcome {
    let mut c = Check::new();
    let bounds = Bounds::default();
    for spec in BATTERY {
        let report = implication_scan(&wf(spec), &bounds).map_err(err)?;
        c.require(
            report.consistent(),
            format!("{spec}: inconsistent arrows {:?}", report.inconsistencies),
        );
    }
    c.note(format!("{} functions consistent", BATTERY.len()));
    Ok(c)
}

fn solver_oracle() -> Outcome {
    let mut c = Check::new();
    let cfg = SolverConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut mismatches = 0;
    for trial in 0..500 {
        let n = rng.gen_range(2..=3);
        let m = rng.gen_range(1..=7);
        let inst = random_instance(n, m, ClassConstraint::unrestricted(), 5, rng.gen()).map_err(err)?;
        let f = wf(BATTERY[trial % BATTERY.len()]);
        let (_, bb) = solve_branch_bound(&inst, &f, &cfg).map_err(err)?;
        let full = enumerate_maximizers(&inst, &f, &cfg).map_err(err)?;
        if compare(&bb, &full.welfare, &cfg.precision) != ValueOrdering::Equal {
            mismatches += 1;
        }
    }
    c.require(mismatches == 0, format!("{mismatches} mismatches"));
    c.note("500 instances, 0 mismatches");
    Ok(c)
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        (1, "chain instance reproduction", chain_reproduction),
        (2, "Nash maximizers EF1 on random instances", nash_property_suite),
        (3, "modified logarithm on integer instances", modified_log_integer),
        (4, "modified harmonic boundary", harmonic_boundary),
        (5, "power-mean results", power_mean_results),
        (6, "threshold bisection", threshold_bisection),
        (7, "harmonic integral consistency", integral_consistency),
        (8, "structured argmax", structured_argmax),
        (9, "flat-function tie", flat_tie),
        (10, "numeric lemma suite", numeric_lemmas),
        (11, "implication harness", implication_harness),
        (12, "solver oracle equivalence", solver_oracle),
    ];
    let mut unexpected = 0;
    for (id, name, run) in criteria {
        let started = Instant::now();
        let (passed, notes) = match run() {
            Ok(check) => (!check.failed, check.notes),
            Err(e) => (false, vec![format!("error: {e}")]),
        };
        let documented = !passed && UNATTAINABLE.contains(&id);
        let tag = match (passed, documented) {
            (true, _) => "PASS",
            (false, true) => "FAIL (documented)",
            (false, false) => "FAIL",
        };
        println!(
            "criterion {id:>2} {tag}: {name} [{:.2?}] {}",
            started.elapsed(),
            notes.join("; ")
        );
        if !passed && !documented {
            unexpected += 1;
        }
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
