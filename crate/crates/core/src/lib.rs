//! Optimal recovery from partial information.
//!
//! The numerical modules are generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar type. [`settings`] and [`equivalence`] work in
//! `f64` only.

pub mod equivalence;
pub mod error;
pub mod estimators;
pub mod geometry;
pub mod linalg;
pub mod lp;
pub mod maxent;
pub mod model;
pub mod quadrature;
pub mod scalar;
pub mod settings;
pub mod splines;

pub use error::{Error, Result};
pub use quadrature::{QuadratureKind, QuadratureRule};
pub use scalar::Real;

pub type Problem1D64 = model::Problem1D<f64>;
pub type Problem1D32 = model::Problem1D<f32>;
pub type InformationOperator64 = model::InformationOperator<f64>;
pub type InformationOperator32 = model::InformationOperator<f32>;
pub type Strategy64 = model::Strategy<f64>;
pub type Strategy32 = model::Strategy<f32>;
pub type Member64 = model::Member<f64>;
pub type Member32 = model::Member<f32>;

pub type CubicSpline64 = splines::CubicSpline<f64>;
pub type CubicSpline32 = splines::CubicSpline<f32>;
pub type SmoothingProblem64 = splines::SmoothingProblem<f64>;
pub type SmoothingProblem32 = splines::SmoothingProblem<f32>;

pub type ProbVector64 = maxent::ProbVector<f64>;
pub type ProbVector32 = maxent::ProbVector<f32>;
pub type MomentConstraints64 = maxent::MomentConstraints<f64>;
pub type MomentConstraints32 = maxent::MomentConstraints<f32>;

pub type ScalarEstimationSetting64 = estimators::ScalarEstimationSetting<f64>;
pub type ScalarEstimationSetting32 = estimators::ScalarEstimationSetting<f32>;
pub type ScalarAlgorithm64 = estimators::ScalarAlgorithm<f64>;
pub type ScalarAlgorithm32 = estimators::ScalarAlgorithm<f32>;
