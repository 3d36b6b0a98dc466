//! Optimal bounds on McDiarmid subdiameters and failure probabilities of a
//! partially observed response function.
//!
//! The inputs are legacy point observations, per-coordinate Lipschitz
//! constants with an additive tolerance, and a lower bound on the mean
//! output. The crate computes:
//!
//! * the McShane envelopes of the data, the gap size and the Markov maximum
//!   ([`envelope`]);
//! * least upper bounds on the McDiarmid subdiameters ([`diameter`]);
//! * upper and lower bounds on `μ[g ≤ θ]` over all consistent functions and
//!   product measures ([`pof`]);
//! * redundancy checks and an active-set loop that prunes large datasets
//!   ([`redundancy`]).
//!
//! All searches run on a seeded two-loop differential-evolution solver
//! ([`solver`]) and are reproducible bit for bit.
//!
//! ```
//! use lipbound::model::{BoxDomain, Dataset, LipschitzSpec, ProblemSpec};
//! use lipbound::pof::phat_1d;
//!
//! let spec = ProblemSpec::new(
//!     BoxDomain::unit(1),
//!     LipschitzSpec::exact(vec![1.0]).unwrap(),
//!     Dataset::new(vec![vec![0.375]], vec![0.25], None).unwrap(),
//!     0.5,
//!     0.0,
//! )
//! .unwrap();
//! assert_eq!(spec.data.len(), 1);
//! assert!((phat_1d(0.375, 0.25, 1.0, 0.5, 0.0).unwrap() - 3.0 / 7.0).abs() < 1e-15);
//! ```

pub mod diameter;
pub mod envelope;
pub mod error;
pub mod model;
pub mod pof;
pub mod redundancy;
pub mod report;
pub mod solver;

pub use error::{Error, Result};
pub use model::PointValues;
