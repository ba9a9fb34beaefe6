//! Monolithic finite-element simulation of thin viscous flow through the
//! contact interface between a deformable solid and a rigid flat: augmented
//! Lagrangian contact, Reynolds thin-film flow, fluid-structure tractions
//! and trapped-fluid pools, resolved in a single Newton loop with
//! per-iteration interface partitioning.

pub mod assembly;
pub mod config;
pub mod contact;
pub mod dofs;
pub mod elasticity;
pub mod fem;
pub mod fsi;
pub mod geometry;
pub mod linsolve;
pub mod partition;
pub mod postproc;
pub mod reynolds;
pub mod runner;
pub mod selfcheck;
pub mod solver;
pub mod trapped;

pub use assembly::CouplingMode;
