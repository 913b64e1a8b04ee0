//! Resilient planning for grid-world UAV surveillance missions.
//!
//! Operators supply temporal-logic preferences at runtime; the planner folds
//! them into its objective without touching the world model, and every plan
//! is scored against a stochastic assessment model.

pub mod assess;
pub mod domain;
pub mod ltl;
pub mod planner;
pub mod prefs;
pub mod scalar;
pub mod scenarios;
pub mod sexpr;

pub use num_rational::Rational64;

/// Assessment in floating point.
pub type AssessmentModel = assess::AssessmentModel<f64>;
/// Assessment in exact rational arithmetic.
pub type ExactAssessmentModel = assess::AssessmentModel<Rational64>;
pub type ReturnReport = assess::ReturnReport<f64>;
pub type ExactReturnReport = assess::ReturnReport<Rational64>;
pub type OptimalReport = assess::OptimalReport<f64>;
pub type ExactOptimalReport = assess::OptimalReport<Rational64>;
pub type Comparison = scenarios::Comparison<f64>;
pub type ExactComparison = scenarios::Comparison<Rational64>;
