//! `welfarist` command-line front end.
//!
//! JSON goes to stdout, a short human summary to stderr. Exit codes: 0 pass/optimum,
//! 1 violation or counterexample, 2 usage or parse error, 3 inconclusive at the precision ceiling.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use welfarist::campaign::{run_campaign, CampaignSpec, TheoremId};
use welfarist::conditions::{
    check_condition, check_condition_adaptive, marginal_growth_envelope, numeric_lemma_suite, Bounds, ConditionError,
    ConditionId, Growth, VerdictKind,
};
use welfarist::constructions as cons;
use welfarist::fairness::{is_ef, is_ef1, is_pareto_optimal, PoVerdict};
use welfarist::model::{
    allocation_json, classify, parse_allocation, parse_instance, parse_rational, serialize_instance,
};
use welfarist::solver::{enumerate_maximizers, solve_branch_bound, Exactness, SolveError, SolverConfig};
use welfarist::welfare::ExtendedValue;
use welfarist::{Allocation, Instance, Precision, Rational, WelfareFunction};

const CEILING_ENV: &str = "WELFARIST_PRECISION_CEILING";
const DEFAULT_CEILING: u32 = 4096;

#[derive(Parser)]
#[command(
    name = "welfarist",
    version,
    about = "Additive welfarist rules, EF1 checks and welfare-function conditions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Maximize sum_i f(u_i) over all allocations.
    Solve {
        instance: PathBuf,
        #[arg(long)]
        welfare: String,
        /// Print every maximizer instead of one.
        #[arg(long)]
        all: bool,
        #[arg(long)]
        precision_bits: Option<u32>,
    },
    /// Test an allocation for EF1, EF or Pareto optimality.
    Check {
        kind: CheckKind,
        instance: PathBuf,
        allocation: PathBuf,
        /// Allocations scanned before a PO check gives up.
        #[arg(long, default_value_t = 50_000_000)]
        budget: u64,
    },
    /// Report which instance classes the instance belongs to.
    Classify { instance: PathBuf },
    /// Bounded search for a violation of one condition.
    Condition {
        condition: String,
        #[arg(long)]
        welfare: String,
        /// An integer or `adaptive`.
        #[arg(long, default_value = "10")]
        k_max: String,
        /// An integer or `adaptive`.
        #[arg(long, default_value = "20")]
        a_max: String,
        /// Comma-separated positive rationals for real-quantified conditions.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        precision_bits: Option<u32>,
    },
    /// Emit one of the built-in instances.
    Construct {
        #[command(subcommand)]
        which: Construction,
    },
    /// Seeded random instances of a class, checking that every maximizer is EF1.
    Campaign(CampaignArgs),
    /// Numeric lemmas and marginal-growth envelopes.
    Lemmas {
        #[arg(long, default_value_t = 10_000)]
        envelope_x_max: u64,
        #[arg(long)]
        precision_bits: Option<u32>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckKind {
    Ef1,
    Ef,
    Po,
}

#[derive(Args)]
struct CampaignArgs {
    #[arg(long)]
    theorem: String,
    /// Defaults to the theorem's own function.
    #[arg(long)]
    welfare: Option<String>,
    #[arg(long, default_value_t = 200)]
    trials: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    n_max: usize,
    #[arg(long, default_value_t = 7)]
    m_max: usize,
    #[arg(long, default_value_t = 5)]
    max_value: u64,
    #[arg(long)]
    precision_bits: Option<u32>,
}

#[derive(Subcommand)]
enum Construction {
    /// n agents on a chain of n goods, with the diagonal and shifted allocations.
    Chain {
        #[arg(long, default_value_t = 4)]
        n: usize,
    },
    /// Identical goods; agent 1 values each at a, the rest at b; (k+1)n goods.
    IdenticalTwoValue {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long)]
        k: u64,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
    },
    /// k(n-1)+2 goods with equal row sums; n >= 3.
    NormalizedThree {
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long)]
        k: u64,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long)]
        eps: String,
    },
    /// Two agents and 2 ceil(c/delta) equal goods.
    ConcavityGadget {
        #[arg(long)]
        c: String,
        #[arg(long)]
        delta: String,
    },
    /// 0/1 instance with 2k+n goods.
    Binary {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long)]
        k: u64,
    },
    /// Values in {a, b} with (k+1)(n-1)+l+r+1 goods; needs (k+1)b > lb + ra.
    TwoValue {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long)]
        k: u64,
        #[arg(long)]
        l: u64,
        #[arg(long)]
        r: u64,
        #[arg(long)]
        a: u64,
        #[arg(long)]
        b: u64,
    },
    /// Integer instance with kn+1 goods; agent 1 values the first at b-1.
    IntegerGeneral {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long)]
        k: u64,
        #[arg(long)]
        a: u64,
        #[arg(long)]
        b: u64,
    },
    /// Instance with a balanced and a skewed allocation tying under `flat:a:b`.
    FlatTie {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
    },
    /// Two agents, nine goods, both rows summing to 25z.
    ScaledPair {
        #[arg(long)]
        z: String,
    },
    /// Two agents and 2k+1 goods for the structured argmax.
    Split {
        #[arg(long)]
        k: u64,
        /// Also emit the allocation giving agent 1 the first x goods.
        #[arg(long)]
        x: Option<u64>,
    },
}

/// Failure carrying its exit code.
enum Failure {
    Usage(String),
    Inconclusive(String),
}

type Outcome = Result<(Value, u8), Failure>;

fn usage<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Usage(e.to_string())
}

fn precision(bits: Option<u32>) -> Result<Precision, Failure> {
    let env = match std::env::var(CEILING_ENV) {
        Ok(s) => Some(
            s.trim()
                .parse::<u32>()
                .map_err(|_| Failure::Usage(format!("{CEILING_ENV} must be a positive integer, got `{s}`")))?,
        ),
        Err(_) => None,
    };
    let ceiling = match (bits, env) {
        (Some(b), Some(e)) => b.min(e),
        (Some(b), None) => b,
        (None, Some(e)) => e,
        (None, None) => DEFAULT_CEILING,
    };
    if ceiling < 64 {
        return Err(Failure::Usage(format!(
            "precision ceiling must be at least 64 bits, got {ceiling}"
        )));
    }
    Ok(Precision::with_ceiling(ceiling))
}

fn read_instance(path: &Path) -> Result<Instance, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    parse_instance(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn parse_welfare(spec: &str) -> Result<WelfareFunction, Failure> {
    spec.parse().map_err(usage)
}

fn rat(s: &str) -> Result<Rational, Failure> {
    parse_rational(s).map_err(usage)
}

fn instance_json(inst: &Instance) -> Value {
    serde_json::from_str(&serialize_instance(inst)).expect("serialized instance is JSON")
}

fn solve_error(e: SolveError) -> Failure {
    match e {
        SolveError::Inconclusive(bits) => Failure::Inconclusive(format!("comparison undecided at {bits} bits")),
        other => usage(other),
    }
}

fn condition_error(e: ConditionError) -> Failure {
    match e {
        ConditionError::Inconclusive(bits) => Failure::Inconclusive(format!("comparison undecided at {bits} bits")),
        other => usage(other),
    }
}

fn exactness_json(e: Exactness) -> Value {
    match e {
        Exactness::Exact => json!("exact"),
        Exactness::IntervalCertified(bits) => json!({"interval_certified_bits": bits}),
        Exactness::Inconclusive => json!("inconclusive"),
    }
}

fn cmd_solve(path: &Path, welfare: &str, all: bool, bits: Option<u32>) -> Outcome {
    let inst = read_instance(path)?;
    let f = parse_welfare(welfare)?;
    let prec = precision(bits)?;
    let cfg = SolverConfig {
        precision: prec,
        ..SolverConfig::default()
    };
    let n = inst.agents();
    if all {
        let set = enumerate_maximizers(&inst, &f, &cfg).map_err(solve_error)?;
        let value = ExtendedValue::from_expr(&set.welfare, prec.start_bits);
        eprintln!("{} maximizer(s), welfare {value}", set.allocations.len());
        let body = json!({
            "welfare_function": f.to_string(),
            "welfare": value.to_json(),
            "exactness": exactness_json(set.exactness),
            "maximizers": set.allocations.iter().map(|a| allocation_json(a, n)).collect::<Vec<_>>(),
        });
        let code = if set.exactness == Exactness::Inconclusive { 3 } else { 0 };
        Ok((body, code))
    } else {
        let (alloc, w) = solve_branch_bound(&inst, &f, &cfg).map_err(solve_error)?;
        let value = ExtendedValue::from_expr(&w, prec.start_bits);
        eprintln!("maximizer {:?}, welfare {value}", alloc.bundles(n));
        let body = json!({
            "welfare_function": f.to_string(),
            "welfare": value.to_json(),
            "allocation": allocation_json(&alloc, n),
        });
        Ok((body, 0))
    }
}

fn cmd_check(kind: CheckKind, inst_path: &Path, alloc_path: &Path, budget: u64) -> Outcome {
    let inst = read_instance(inst_path)?;
    let text = fs::read_to_string(alloc_path).map_err(|e| Failure::Usage(format!("{}: {e}", alloc_path.display())))?;
    let alloc = parse_allocation(&text, &inst).map_err(|e| Failure::Usage(format!("{}: {e}", alloc_path.display())))?;
    let n = inst.agents();
    match kind {
        CheckKind::Ef1 => {
            let report = is_ef1(&inst, &alloc);
            eprintln!("EF1: {}", if report.holds { "holds" } else { "violated" });
            let body = json!({"property": "ef1", "holds": report.holds, "violations": report.violations});
            Ok((body, u8::from(!report.holds)))
        }
        CheckKind::Ef => {
            let holds = is_ef(&inst, &alloc);
            eprintln!("EF: {}", if holds { "holds" } else { "violated" });
            Ok((json!({"property": "ef", "holds": holds}), u8::from(!holds)))
        }
        CheckKind::Po => match is_pareto_optimal(&inst, &alloc, budget) {
            PoVerdict::ParetoOptimal => {
                eprintln!("PO: holds");
                Ok((json!({"property": "po", "holds": true}), 0))
            }
            PoVerdict::Dominated(by) => {
                eprintln!("PO: dominated by {:?}", by.bundles(n));
                Ok((
                    json!({"property": "po", "holds": false, "dominated_by": allocation_json(&by, n)}),
                    1,
                ))
            }
            PoVerdict::BudgetExceeded { scanned } => Err(Failure::Inconclusive(format!(
                "PO scan stopped after {scanned} allocations"
            ))),
        },
    }
}

fn cmd_classify(path: &Path) -> Outcome {
    let inst = read_instance(path)?;
    let profile = classify(&inst);
    eprintln!("{} agents, {} goods", inst.agents(), inst.goods());
    let body = json!({
        "agents": inst.agents(),
        "goods": inst.goods(),
        "classes": serde_json::to_value(profile).expect("profile serializes"),
    });
    Ok((body, 0))
}

fn bound_arg(text: &str, name: &str) -> Result<Option<u64>, Failure> {
    if text.eq_ignore_ascii_case("adaptive") {
        return Ok(None);
    }
    text.parse()
        .map(Some)
        .map_err(|_| Failure::Usage(format!("--{name} must be an integer or `adaptive`, got `{text}`")))
}

fn cmd_condition(
    cond: &str,
    welfare: &str,
    k_max: &str,
    a_max: &str,
    grid: Option<&str>,
    bits: Option<u32>,
) -> Outcome {
    let cond: ConditionId = cond.parse().map_err(usage)?;
    let f = parse_welfare(welfare)?;
    let k = bound_arg(k_max, "k-max")?;
    let a = bound_arg(a_max, "a-max")?;
    let adaptive = k.is_none() || a.is_none();
    let mut bounds = Bounds::new(k.unwrap_or(4), a.unwrap_or(8));
    bounds.precision = precision(bits)?;
    if let Some(g) = grid {
        bounds.real_grid = Bounds::parse_grid(g).map_err(usage)?;
    }
    let report = if adaptive {
        let mut growth = Growth::default();
        if let Some(k) = k {
            growth.k_cap = k;
        }
        if let Some(a) = a {
            growth.a_cap = a;
        }
        check_condition_adaptive(&f, cond, &bounds, &growth)
    } else {
        check_condition(&f, cond, &bounds)
    }
    .map_err(condition_error)?;
    let code = match report.verdict.kind() {
        VerdictKind::NoViolationFound => 0,
        VerdictKind::Violated => 1,
        VerdictKind::Inconclusive => 3,
    };
    eprintln!(
        "{} for {}: {:?} after {} tuples",
        cond,
        f,
        report.verdict.kind(),
        report.tuples_checked
    );
    Ok((report.to_json(), code))
}

fn with_allocations(inst: &Instance, named: &[(&str, &Allocation)]) -> Value {
    let n = inst.agents();
    let allocations: serde_json::Map<String, Value> = named
        .iter()
        .map(|(k, a)| (k.to_string(), allocation_json(a, n)))
        .collect();
    json!({"instance": instance_json(inst), "allocations": allocations})
}

fn cmd_construct(which: &Construction) -> Outcome {
    let body = match which {
        Construction::Chain { n } => {
            let inst = cons::chain_instance(*n).map_err(usage)?;
            let (diagonal, shifted) = cons::chain_allocations(*n).map_err(usage)?;
            with_allocations(&inst, &[("diagonal", &diagonal), ("shifted", &shifted)])
        }
        Construction::IdenticalTwoValue { n, k, a, b } => {
            json!({"instance": instance_json(&cons::identical_two_value(*n, *k, &rat(a)?, &rat(b)?).map_err(usage)?)})
        }
        Construction::NormalizedThree { n, k, a, b, eps } => {
            let inst = cons::normalized_three(*n, *k, &rat(a)?, &rat(b)?, &rat(eps)?).map_err(usage)?;
            json!({"instance": instance_json(&inst)})
        }
        Construction::ConcavityGadget { c, delta } => {
            json!({"instance": instance_json(&cons::concavity_gadget(&rat(c)?, &rat(delta)?).map_err(usage)?)})
        }
        Construction::Binary { n, k } => {
            json!({"instance": instance_json(&cons::binary_gadget(*n, *k).map_err(usage)?)})
        }
        Construction::TwoValue { n, k, l, r, a, b } => {
            json!({"instance": instance_json(&cons::two_value_gadget(*n, *k, *l, *r, *a, *b).map_err(usage)?)})
        }
        Construction::IntegerGeneral { n, k, a, b } => {
            json!({"instance": instance_json(&cons::integer_general(*n, *k, *a, *b).map_err(usage)?)})
        }
        Construction::FlatTie { n, a, b } => {
            let tie = cons::flat_function_gadget(*n, &rat(a)?, &rat(b)?).map_err(usage)?;
            let mut body = with_allocations(&tie.instance, &[("balanced", &tie.balanced), ("skewed", &tie.skewed)]);
            body["flat_width"] = json!(tie.d);
            body["goods_per_agent"] = json!(tie.c);
            body
        }
        Construction::ScaledPair { z } => {
            json!({"instance": instance_json(&cons::normalized_two_scaled(&rat(z)?).map_err(usage)?)})
        }
        Construction::Split { k, x } => {
            let inst = cons::normalized_two_split(*k).map_err(usage)?;
            match x {
                Some(x) => {
                    let alloc = cons::split_allocation(*k, *x).map_err(usage)?;
                    with_allocations(&inst, &[("split", &alloc)])
                }
                None => json!({"instance": instance_json(&inst)}),
            }
        }
    };
    Ok((body, 0))
}

fn cmd_campaign(args: &CampaignArgs) -> Outcome {
    let theorem: TheoremId = args.theorem.parse().map_err(usage)?;
    let mut spec = CampaignSpec::new(theorem, args.trials, args.seed);
    if let Some(w) = &args.welfare {
        spec.welfare = parse_welfare(w)?;
    }
    spec.n_max = args.n_max;
    spec.m_max = args.m_max;
    spec.max_value = args.max_value;
    spec.solver.precision = precision(args.precision_bits)?;
    let outcome = run_campaign(&spec).map_err(usage)?;
    eprintln!(
        "{} with {}: {} trials, {} violations, {} inconclusive, counterexample {}",
        theorem,
        outcome.welfare,
        outcome.trials,
        outcome.violations,
        outcome.inconclusive,
        if outcome.counterexample.is_some() {
            "found"
        } else {
            "none"
        }
    );
    let code = if outcome.inconclusive > 0 {
        3
    } else if !outcome.matches_expectation() {
        1
    } else {
        0
    };
    Ok((outcome.to_json(), code))
}

fn cmd_lemmas(x_max: u64, bits: Option<u32>) -> Outcome {
    let prec = precision(bits)?;
    let lemmas = numeric_lemma_suite(&prec);
    let mut envelopes = serde_json::Map::new();
    let mut ok = lemmas.passed();
    for (spec, bounded) in [("log", true), ("harmonic:0", true), ("pmean:1/2", false)] {
        let f = parse_welfare(spec)?;
        let env = marginal_growth_envelope(&f, x_max, &prec).map_err(condition_error)?;
        ok &= env.within() == bounded;
        envelopes.insert(spec.to_string(), env.to_json());
    }
    eprintln!("lemma suite {}", if ok { "passed" } else { "FAILED" });
    let body = json!({"lemmas": lemmas.to_json(), "envelopes": envelopes, "passed": ok});
    Ok((body, u8::from(!ok)))
}

/// Writes to stdout, tolerating a closed pipe.
fn emit(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Solve {
            instance,
            welfare,
            all,
            precision_bits,
        } => cmd_solve(instance, welfare, *all, *precision_bits),
        Command::Check {
            kind,
            instance,
            allocation,
            budget,
        } => cmd_check(*kind, instance, allocation, *budget),
        Command::Classify { instance } => cmd_classify(instance),
        Command::Condition {
            condition,
            welfare,
            k_max,
            a_max,
            grid,
            precision_bits,
        } => cmd_condition(condition, welfare, k_max, a_max, grid.as_deref(), *precision_bits),
        Command::Construct { which } => cmd_construct(which),
        Command::Campaign(args) => cmd_campaign(args),
        Command::Lemmas {
            envelope_x_max,
            precision_bits,
        } => cmd_lemmas(*envelope_x_max, *precision_bits),
    };
    match outcome {
        Ok((body, code)) => {
            emit(&serde_json::to_string_pretty(&body).expect("report serializes"));
            ExitCode::from(code)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Inconclusive(msg)) => {
            eprintln!("inconclusive: {msg}");
            emit(&json!({"inconclusive": msg}).to_string());
            ExitCode::from(3)
        }
    }
}
