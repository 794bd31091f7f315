//! Master equations, stochastic unravelings and linearized noise spectra for
//! optical cavities under all-optical (cascaded) and electro-optical
//! (measurement based) feedback.
//!
//! Units: the first cavity's decay rate is 1 and ħ = 1. Quadratures are
//! `x = a + a†`, `y = −ia + ia†`, so the vacuum variance of each is 1.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evolve;
pub mod fock;
pub mod generators;
pub mod langevin;
pub mod policy;
pub mod scenario;
pub mod superop;
pub mod trajectories;

pub use error::{Error, Result};
pub use fock::{
    annihilation, creation, dissipator_apply, embed, expect, h_superop_apply, make_space, number, quadratures,
    variance, BathParams, CMatrix, CVector, DensityMatrix, Operator, Space, C64,
};
pub use policy::NumericPolicy;
pub use superop::Liouvillian;
