//! Motion generation with optimization fabrics.
//!
//! A *spec* `(M, f)` stands for the second-order system `M ẍ + f = 0`. Specs
//! living on task spaces are pulled back through differentiable task maps and
//! summed at the root of a star-shaped transform tree. Geometries (velocity
//! homogeneous acceleration policies) are weighted by the energy tensors of
//! Finsler energies, energized so that they conserve the combined system
//! energy, and finally forced by a potential and damped so that the resulting
//! motion converges to the potential's minimum.
//!
//! The crate is organised bottom-up:
//!
//! * [`spec`] and [`taskmap`]: the spec algebra, task maps and transform trees.
//! * [`energy`]: energy Lagrangians, their Euler–Lagrange terms and oracles.
//! * [`geometry`]: geometry generators and metric-weighted combination.
//! * [`energization`]: energy projectors and the energization transform.
//! * [`forcing`]: acceleration-based potentials, damping and speed control.
//! * [`kinematics`]: planar arm, distance maps and polar charts.
//! * [`sim`]: fixed-step RK4 rollouts, experiments and trajectory metrics.

pub mod energization;
pub mod energy;
pub mod error;
pub mod field;
pub mod forcing;
pub mod geometry;
pub mod kinematics;
pub mod linalg;
pub mod sim;
pub mod spec;
pub mod taskmap;

pub use error::{FabricError, Result, State};

/// Dynamically sized column vector used for positions, velocities and forces.
pub type Vector = nalgebra::DVector<f64>;
/// Dynamically sized matrix used for metrics and Jacobians.
pub type Matrix = nalgebra::DMatrix<f64>;
