//! Analytic conjugacy of perturbed rotation actions of finitely presented
//! groups on the torus `T^d`.
//!
//! The crate is organised bottom-up:
//!
//! * [`presentation`]: groups given by generators and relators, and their
//!   actions by rotation vectors;
//! * [`field`]: Fourier vector fields, weighted analytic norms, truncation,
//!   rotation push-forwards and grid-based composition;
//! * [`cochain`]: the differentials `d0`, `d1`, their adjoints, the per-mode
//!   box operator, harmonic projection and the cohomological solver;
//! * [`moser`]: exponentials of vector fields as near-identity maps, the
//!   composition remainder `s1`, inversion and conjugation;
//! * [`kam`]: the iteration schedule, one KAM step and the driver.
//!
//! Mode-wise loops and grid evaluations run on rayon when the `parallel`
//! feature (default) is enabled, and sequentially otherwise.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod audit;
pub mod cochain;
pub mod error;
pub mod field;
pub mod kam;
pub mod moser;
pub mod par;
pub mod presentation;

pub use cochain::{BoxBlock, BoxOperator, Cochain, Convention};
pub use error::{KamError, Result};
pub use field::{FourierField, GridConfig};
pub use kam::{ConjugacyResult, HarmonicMode, KamConfig, KamEngine, RunStatus, Schedule};
pub use moser::{Moser, MoserGates, NearIdentityMap, PerturbedGenerator};
pub use presentation::{check_action, Letter, Presentation, RotationAction, RotationVector};
