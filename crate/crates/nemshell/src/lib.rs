//! Nematic liquid crystal hydrodynamics in a flexible channel.
//!
//! The crate simulates a simplified Ericksen--Leslie liquid crystal with
//! Ginzburg--Landau relaxation, coupled to a 1D viscoelastic shell that forms
//! the top wall of a periodic channel. The moving domain is handled by a
//! Hanzawa transform back to a fixed reference channel; the fluid/shell pair
//! is discretized by a divergence-free spectral Galerkin basis matched at the
//! interface, the director field by a collocation grid, and the two are
//! coupled by a windowed Picard iteration.
//!
//! Everything checkable is checked: the energy inequality, the director
//! maximum principle, interface kinematics, weak divergence-freeness of the
//! pushed bases, and the scaling of the Ginzburg--Landau penalty as the
//! relaxation length goes to zero.

pub mod analysis;
pub mod basis;
pub mod config;
pub mod director;
pub mod energy;
pub mod error;
pub mod exec;
pub mod fluid_assembly;
pub mod geometry;
pub mod io;
pub mod modes;
pub mod quad;
pub mod scenario;
pub mod shell;
pub mod stepper;

pub use error::{Error, Result};
