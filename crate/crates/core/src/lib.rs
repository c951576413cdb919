//! Locally private estimation toolkit.
//!
//! Mechanisms and estimators for private mean estimation problems, privacy
//! audits and conversions for finite channels, closed-form minimax lower
//! bounds, exact information-theoretic oracles for small instances, and a
//! reproducible Monte Carlo harness tying them together.

pub mod accounting;
pub mod bounds;
pub mod channels;
pub mod divergence;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod mechanisms;
pub mod normal;
pub mod oracles;
pub mod rng;

pub use accounting::{CompositionLedger, PrivacySpec};
pub use bounds::{LowerBoundReport, Loss, SdpiEstimate};
pub use channels::DiscreteChannel;
pub use error::{Error, Result};
pub use estimators::{Family, ProblemSpec};
pub use mechanisms::PrivateRelease;
pub use rng::SeededRng;
