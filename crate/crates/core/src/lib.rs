//! Output bounds for small MLP implicit neural representations (INRs).
//!
//! Two ways of bounding what a network `f: R^3 -> R` produces over a box:
//!
//! * [`affine`]: guaranteed intervals via affine arithmetic (range analysis)
//!   with minimax linearisation of the activations, in four
//!   coefficient-management variants.
//! * [`paf`]: probabilistic affine forms over independent unit random
//!   variables, linearised in the least-squares sense and read off as a
//!   Gaussian; the Gaussian yields "soft" bounds `mu +- t * sigma`.
//!
//! [`extract`] uses either kind of bound to drive a k-d tree search for
//! active marching-cubes cells, and to ray cast signed distance fields.
//! [`eval`] scores the predictions against dense ground truth and Monte Carlo
//! sampling.

pub mod affine;
pub mod cli;
pub mod error;
pub mod eval;
pub mod extract;
pub mod inr;
pub mod paf;
pub mod region;
pub mod special;
pub mod stats;

mod terms;

pub use error::{Error, Result};
pub use inr::{Activation, LinearLayer, MlpNetwork, ScalarVolume};
pub use region::Region;
