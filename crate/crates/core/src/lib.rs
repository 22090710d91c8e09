//! Optimal control of anisotropic Allen-Cahn equations.
//!
//! The crate is organised bottom-up: [`anisotropy`] evaluates regularized BGN
//! anisotropies, [`fem`] provides P1 assembly and linear solves, [`state`] time
//! steps the state equation, [`sensitivity`] computes reduced gradients and
//! Hessian actions, [`optimizer`] runs trust-region Newton with Steihaug-CG, and
//! [`scenarios`] wires everything into configurable experiments.

pub mod anisotropy;
pub mod fem;
pub mod state;
pub mod sensitivity;
pub mod optimizer;
pub mod scenarios;
