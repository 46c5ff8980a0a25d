//! Two-grid mixed finite element methods for the incompressible
//! Navier-Stokes equations on the unit square.
//!
//! A nonlinear Galerkin problem is integrated on a coarse mesh; a single
//! linear saddle-point problem per time step is then solved on a nested fine
//! mesh, linearized about the coarse velocity (Oseen form, one Newton step,
//! or the dynamical postprocessing variant). The crate also contains the
//! manufactured-solution machinery and convergence-study harness used to
//! measure observed error rates.

pub mod assembly;
pub mod element;
pub mod error;
pub mod harness;
pub mod mesh;
pub mod mms;
pub mod par;
pub mod quadrature;
pub mod saddle;
pub mod spaces;
pub mod sparse;
pub mod stepper;

pub use error::{Error, Result};
pub use mesh::{Mesh, MeshStats};
pub use spaces::{ElementFamily, FeFunction, FieldKind, MixedSpace};
