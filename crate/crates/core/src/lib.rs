//! Random walks on Z² with finitely supported step laws.
//!
//! * [`lattice`]: points, exact step laws, moments, the difference law.
//! * [`engine`]: exact (big-integer) and floating n-step distributions,
//!   return probabilities, balls and the return-probability series.
//! * [`verify`]: exact finite-n checks of the recurrence argument for
//!   symmetric walks and of the two-walk reduction.
//! * [`sim`]: seeded, order-independent Monte Carlo.
//! * [`cli`]: the `z2walk` command-line tool.

pub mod cli;
pub mod engine;
pub mod lattice;
mod limbs;
pub mod sim;
pub mod verify;

pub use engine::{Backend, ExactDist, FloatDist};
pub use lattice::{LatticePoint, RationalMoment, StepLaw};
