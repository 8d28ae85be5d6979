//! Finite alternating Markov chains evolved exactly as reverse-KL alternating
//! projections, with numerical certificates for the projection and duality
//! theorems.
//!
//! Everything is generic over the scalar type through [`scalar::Real`]
//! (implemented for `f64` and `f32`); the aliases below fix the scalar.

// `!(a <= b)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod divergences;
pub mod dynamics;
pub mod error;
pub mod instances;
pub mod io;
pub mod measures;
pub mod projections;
pub mod scalar;
pub mod verify;

pub use error::{Error, Result};

pub type JointMeasureF64 = measures::JointMeasure<f64>;
pub type MarginalF64 = measures::MarginalDistribution<f64>;
pub type ConditionalKernelF64 = measures::ConditionalKernel<f64>;
pub type TransitionMatrixF64 = dynamics::TransitionMatrix<f64>;
pub type ChainSpecF64 = dynamics::AlternatingChainSpec<f64>;
pub type DivergenceF64 = divergences::Divergence<f64>;

pub type JointMeasureF32 = measures::JointMeasure<f32>;
pub type MarginalF32 = measures::MarginalDistribution<f32>;
pub type ConditionalKernelF32 = measures::ConditionalKernel<f32>;
pub type TransitionMatrixF32 = dynamics::TransitionMatrix<f32>;
pub type ChainSpecF32 = dynamics::AlternatingChainSpec<f32>;
pub type DivergenceF32 = divergences::Divergence<f32>;
