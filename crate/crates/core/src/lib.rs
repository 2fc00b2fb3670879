//! Nonlinear spectral decompositions of finite-dimensional signals.
//!
//! The toolkit runs the gradient flow du/dt = -p(t), with p(t) the
//! minimal-norm subgradient of an absolutely one-homogeneous functional
//! J(u) = ||Au||_1, exactly: for polyhedral J the slope is piecewise
//! constant, every segment slope is a nonlinear eigenvector (lambda p in
//! dJ(p)) when A A^T is diagonally dominant, and the flow decomposes the
//! datum into a finite atomic spectral measure. On top of the flow sit
//! the equivalent variational and inverse-scale-space formulations,
//! spectral filtering, and extinction-time analysis with sharp two-sided
//! bounds.
//!
//! Modules follow the pipeline:
//!
//! * [`functionals`] builds J (1D total variation, l1, max-norm,
//!   staggered-grid divergence, custom operators);
//! * [`minsub`] computes minimal-norm subgradients and eigenvector tests;
//! * [`flow`] integrates the flow event-by-event, with an implicit-Euler
//!   oracle;
//! * [`spectral`] turns trajectories into spectral measures and filters;
//! * [`equivalence`] solves the variational problem (taut string, soft
//!   thresholding, primal-dual) and reparametrizes to inverse scale space;
//! * [`extinction`] computes dual norms, ground states, extinction
//!   profiles and the bound chain;
//! * [`oracle`] holds exact-arithmetic and brute-force test oracles.
//!
//! ```
//! use specflow_core::flow::{run_event_driven, FlowOptions};
//! use specflow_core::functionals::tv1d;
//! use specflow_core::spectral::spectral_measure;
//! use specflow_core::Signal;
//!
//! # fn main() -> specflow_core::Result<()> {
//! let functional = tv1d(4)?;
//! let signal = Signal::new(vec![1.0, 1.0, -1.0, -1.0])?;
//! let trajectory = run_event_driven(&functional, &signal, &FlowOptions::default())?;
//! assert!(trajectory.extinct);
//! assert_eq!(trajectory.segments(), 1); // the datum is an eigenvector
//! let measure = spectral_measure(&trajectory)?;
//! assert_eq!(measure.atoms.len(), 1);
//! assert!((measure.atoms[0].lambda - 1.0).abs() < 1e-10);
//! # Ok(())
//! # }
//! ```

pub mod boxqp;
pub mod equivalence;
pub mod error;
pub mod extinction;
pub mod flow;
pub mod functional;
pub mod functionals;
pub mod io;
pub mod linalg;
pub mod minsub;
pub mod oracle;
pub mod signal;
pub mod spectral;
pub mod tol;

pub use error::{Error, Result};
pub use functional::{Membership, PolyhedralFunctional, StructureTag, Subgradient};
pub use signal::Signal;
