//! Additive welfarist allocation rules over indivisible goods with exact arithmetic:
//! instances and allocations, welfare functions, EF1/PO checks, maximizer search,
//! bounded verification of welfare-function conditions, and the instance constructions
//! used to witness their necessity.

pub mod arith;
pub mod campaign;
pub mod conditions;
pub mod constructions;
pub mod fairness;
pub mod model;
pub mod solver;
pub mod welfare;

pub use arith::{compare, Expr, Interval, Precision, ValueOrdering};
pub use model::{Allocation, Instance, Rational};
pub use welfare::{ExtendedValue, WelfareFunction};
