//! Seeded randomized checks that a welfare function's maximizers are EF1 on an instance
//! class, with a constructed counterexample when the function is known to fail there.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use thiserror::Error;

use crate::conditions::{
    analytic_verdict, check_condition_adaptive, Bounds, ConditionError, ConditionId, Growth, Witness,
};
use crate::constructions::{binary_gadget, identical_two_value, integer_general, two_value_gadget, ConstructionError};
use crate::model::{random_instance, serialize_instance, Allocation, ClassConstraint, Instance, ModelError, Rational};
use crate::solver::{chosen_all_ef1, SolveError, SolverConfig};
use crate::welfare::{WelfareError, WelfareFunction};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CampaignError {
    #[error("unknown theorem id `{0}`")]
    UnknownTheorem(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Condition(#[from] ConditionError),
    #[error(transparent)]
    Construction(#[from] ConstructionError),
    #[error(transparent)]
    Welfare(#[from] WelfareError),
    #[error("invalid campaign: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InstanceClass {
    /// Any non-negative utilities (multiples of 1/4 here).
    All,
    Integer,
    IdenticalGoodInteger,
    Binary,
    TwoValueInteger,
}

impl InstanceClass {
    pub fn constraint(self) -> ClassConstraint {
        let mut c = ClassConstraint {
            positive_admitting: true,
            ..ClassConstraint::default()
        };
        match self {
            InstanceClass::All => {}
            InstanceClass::Integer => c.integer = true,
            InstanceClass::IdenticalGoodInteger => {
                c.integer = true;
                c.identical_good = true;
            }
            InstanceClass::Binary => c.binary = true,
            InstanceClass::TwoValueInteger => {
                c.integer = true;
                c.two_value = true;
            }
        }
        c
    }

    /// The condition characterizing EF1 guarantees on the class, as `(necessary, sufficient)`.
    pub fn conditions(self) -> (ConditionId, ConditionId) {
        match self {
            InstanceClass::All => (ConditionId::C1, ConditionId::C1),
            InstanceClass::Integer => (ConditionId::C6a, ConditionId::C6b),
            InstanceClass::IdenticalGoodInteger => (ConditionId::C3, ConditionId::C3),
            InstanceClass::Binary => (ConditionId::C4, ConditionId::C4),
            InstanceClass::TwoValueInteger => (ConditionId::C5, ConditionId::C5),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TheoremId {
    MnwAllClasses,
    MhwInteger,
    ModlogInteger,
    HarmonicIntegerFails,
    PmeanBinary,
    IdenticalGoodInteger,
    TwoValueInteger,
}

impl TheoremId {
    pub const ALL: [TheoremId; 7] = [
        TheoremId::MnwAllClasses,
        TheoremId::MhwInteger,
        TheoremId::ModlogInteger,
        TheoremId::HarmonicIntegerFails,
        TheoremId::PmeanBinary,
        TheoremId::IdenticalGoodInteger,
        TheoremId::TwoValueInteger,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TheoremId::MnwAllClasses => "mnw-all-classes",
            TheoremId::MhwInteger => "mhw-integer",
            TheoremId::ModlogInteger => "modlog-integer",
            TheoremId::HarmonicIntegerFails => "harmonic-integer-fails",
            TheoremId::PmeanBinary => "pmean-binary",
            TheoremId::IdenticalGoodInteger => "identical-good-integer",
            TheoremId::TwoValueInteger => "two-value-integer",
        }
    }

    pub fn class(self) -> InstanceClass {
        match self {
            TheoremId::MnwAllClasses => InstanceClass::All,
            TheoremId::MhwInteger | TheoremId::ModlogInteger | TheoremId::HarmonicIntegerFails => {
                InstanceClass::Integer
            }
            TheoremId::PmeanBinary => InstanceClass::Binary,
            TheoremId::IdenticalGoodInteger => InstanceClass::IdenticalGoodInteger,
            TheoremId::TwoValueInteger => InstanceClass::TwoValueInteger,
        }
    }

    pub fn default_welfare(self) -> &'static str {
        match self {
            TheoremId::MnwAllClasses => "log",
            TheoremId::MhwInteger => "harmonic:0",
            TheoremId::ModlogInteger => "modlog:1",
            TheoremId::HarmonicIntegerFails => "harmonic:-3/4",
            TheoremId::PmeanBinary => "pmean:1/2",
            TheoremId::IdenticalGoodInteger => "harmonic:2/5",
            TheoremId::TwoValueInteger => "modlog:1/2",
        }
    }

    /// Whether every maximizer should be EF1 on the class; `None` when no result covers `f`.
    pub fn expected(self, f: &WelfareFunction) -> Option<bool> {
        // EF1 of maximum harmonic welfare on integer instances is a known earlier result
        if self == TheoremId::MhwInteger && *f == WelfareFunction::ModHarmonic(Rational::new()) {
            return Some(true);
        }
        let (necessary, sufficient) = self.class().conditions();
        if analytic_verdict(f, sufficient) == Some(true) {
            Some(true)
        } else if analytic_verdict(f, necessary) == Some(false) {
            Some(false)
        } else {
            None
        }
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TheoremId {
    type Err = CampaignError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TheoremId::ALL
            .into_iter()
            .find(|t| t.name() == s.trim())
            .ok_or_else(|| CampaignError::UnknownTheorem(s.to_string()))
    }
}

#[derive(Clone, Debug)]
pub struct CampaignSpec {
    pub theorem: TheoremId,
    pub welfare: WelfareFunction,
    pub trials: u32,
    pub seed: u64,
    pub n_min: usize,
    pub n_max: usize,
    pub m_max: usize,
    pub max_value: u64,
    pub solver: SolverConfig,
}

impl CampaignSpec {
    pub fn new(theorem: TheoremId, trials: u32, seed: u64) -> Self {
        CampaignSpec {
            theorem,
            welfare: theorem.default_welfare().parse().expect("built-in welfare spec"),
            trials,
            seed,
            n_min: 2,
            n_max: 3,
            m_max: 7,
            max_value: 5,
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Counterexample {
    /// Trial index, or `None` for a constructed instance.
    pub trial: Option<u32>,
    pub instance: Instance,
    pub allocation: Allocation,
    /// The condition witness the construction came from.
    pub witness: Option<Witness>,
}

#[derive(Clone, Debug)]
pub struct CampaignOutcome {
    pub theorem: TheoremId,
    pub welfare: String,
    pub expected: Option<bool>,
    pub trials: u32,
    pub violations: u32,
    pub inconclusive: u32,
    pub counterexample: Option<Counterexample>,
}

impl CampaignOutcome {
    /// Whether the observations agree with the expectation.
    pub fn matches_expectation(&self) -> bool {
        match self.expected {
            Some(true) => self.violations == 0,
            Some(false) => self.counterexample.is_some(),
            None => true,
        }
    }

    pub fn to_json(&self) -> Value {
        let cex = self.counterexample.as_ref().map(|c| {
            json!({
                "trial": c.trial,
                "instance": serde_json::from_str::<Value>(&serialize_instance(&c.instance)).unwrap_or(Value::Null),
                "allocation": crate::model::allocation_json(&c.allocation, c.instance.agents()),
                "witness": c.witness.as_ref().map(|w| w.to_json(64)),
            })
        });
        json!({
            "theorem": self.theorem.name(),
            "welfare": self.welfare,
            "expected_all_ef1": self.expected,
            "trials": self.trials,
            "violations": self.violations,
            "inconclusive": self.inconclusive,
            "counterexample": cex,
            "matches_expectation": self.matches_expectation(),
        })
    }
}

/// Instance of the class built from a witness of the class's necessary condition.
pub fn construction_from_witness(class: InstanceClass, w: &Witness) -> Result<Instance, CampaignError> {
    let need = |name: &str| {
        w.param_u64(name)
            .ok_or_else(|| CampaignError::Invalid(format!("witness parameter {name} is missing or not an integer")))
    };
    let rat = |name: &str| {
        w.param(name)
            .cloned()
            .ok_or_else(|| CampaignError::Invalid(format!("witness parameter {name} is missing")))
    };
    Ok(match class {
        InstanceClass::All | InstanceClass::IdenticalGoodInteger => {
            identical_two_value(2, need("k")?, &rat("a")?, &rat("b")?)?
        }
        InstanceClass::Binary => binary_gadget(2, need("k")?)?,
        InstanceClass::Integer => integer_general(2, need("k")?, need("a")?, need("b")?)?,
        InstanceClass::TwoValueInteger => {
            if w.relation.starts_with("delta_{k+1}(a)") {
                // the right-hand chain fails: delta_{k+1}(a) <= delta_{k+2}(1)
                identical_two_value(2, need("k")? + 1, &Rational::from(1), &rat("a")?)?
            } else {
                two_value_gadget(2, need("k")?, need("l")?, need("r")?, need("a")?, need("b")?)?
            }
        }
    })
}

/// A non-EF1 maximizer on the construction derived from the necessary condition's witness.
pub fn constructed_counterexample(
    f: &WelfareFunction,
    class: InstanceClass,
    solver: &SolverConfig,
) -> Result<Option<Counterexample>, CampaignError> {
    let (necessary, _) = class.conditions();
    let report = check_condition_adaptive(f, necessary, &Bounds::new(4, 8), &Growth::default())?;
    let Some(w) = report.verdict.witness() else {
        return Ok(None);
    };
    let instance = construction_from_witness(class, w)?;
    let (all_ef1, bad) = chosen_all_ef1(&instance, f, solver)?;
    Ok(match (all_ef1, bad) {
        (false, Some(allocation)) => Some(Counterexample {
            trial: None,
            instance,
            allocation,
            witness: Some(w.clone()),
        }),
        _ => None,
    })
}

type TrialResult = Result<(Instance, bool, Option<Allocation>), SolveError>;

fn run_trial(
    spec: &CampaignSpec,
    class: InstanceClass,
    (n, m, seed): (usize, usize, u64),
) -> Result<TrialResult, CampaignError> {
    let inst = random_instance(n, m, class.constraint(), spec.max_value, seed)?;
    Ok(chosen_all_ef1(&inst, &spec.welfare, &spec.solver).map(|(ok, bad)| (inst, ok, bad)))
}

/// Trials run on scoped worker threads; results are aggregated in trial order.
pub fn run_campaign(spec: &CampaignSpec) -> Result<CampaignOutcome, CampaignError> {
    if spec.n_min < 2 || spec.n_min > spec.n_max || spec.m_max < spec.n_max {
        return Err(CampaignError::Invalid("need 2 <= n_min <= n_max <= m_max".into()));
    }
    let class = spec.theorem.class();
    let expected = spec.theorem.expected(&spec.welfare);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let draws: Vec<(usize, usize, u64)> = (0..spec.trials)
        .map(|_| {
            let n = rng.gen_range(spec.n_min..=spec.n_max);
            let m = rng.gen_range(n..=spec.m_max);
            (n, m, rng.gen())
        })
        .collect();

    let workers = std::thread::available_parallelism()
        .map_or(1, |w| w.get())
        .min(draws.len().max(1));
    let chunk = draws.len().div_ceil(workers).max(1);
    let results: Vec<Result<TrialResult, CampaignError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = draws
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(|&d| run_trial(spec, class, d)).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("campaign worker panicked"))
            .collect()
    });

    let mut violations = 0;
    let mut inconclusive = 0;
    let mut counterexample = None;
    for (trial, result) in (0..spec.trials).zip(results) {
        match result? {
            Ok((_, true, _)) => {}
            Ok((inst, false, bad)) => {
                violations += 1;
                if counterexample.is_none() {
                    counterexample = bad.map(|allocation| Counterexample {
                        trial: Some(trial),
                        instance: inst,
                        allocation,
                        witness: None,
                    });
                }
            }
            Err(SolveError::Inconclusive(_)) => inconclusive += 1,
            Err(e) => return Err(e.into()),
        }
    }
    if counterexample.is_none() && expected == Some(false) {
        counterexample = constructed_counterexample(&spec.welfare, class, &spec.solver)?;
    }
    Ok(CampaignOutcome {
        theorem: spec.theorem,
        welfare: spec.welfare.to_string(),
        expected,
        trials: spec.trials,
        violations,
        inconclusive,
        counterexample,
    })
}
