//! Classical random-phase simulation of mode-entangled interferometry.
//!
//! Independent classical fields, each carrying a TE₀/TE₁ superposition and an
//! independent uniformly distributed global phase, are routed through ideal
//! directional couplers that swap their TE₁ components. Ensemble averages of the
//! mode-analyzer intensity differences then reproduce Bell-type correlations,
//! three-field GHZ-like correlations, and `cos(Nθ)` super-resolution fringes.
//!
//! Modules:
//! - [`ensemble`]: phase distributions, counter-based RNG streams, and
//!   deterministic parallel Monte-Carlo averaging.
//! - [`optics`]: mode states, analyzers, and coupler exchange networks.
//! - [`correlation`]: density matrices, two/three/N-field correlations, CHSH.
//! - [`metrology`]: phase-error analysis (standard vs Heisenberg scaling).
//! - [`bpm`]: slab mode solver, Crank–Nicolson beam propagation, coupler design.
//! - [`experiment`]: config parsing and the artifact-writing experiment runner.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bpm;
pub mod correlation;
pub mod ensemble;
pub mod error;
pub mod experiment;
pub mod metrology;
pub mod optics;

pub use error::{Error, Result};

/// Library version echoed into run metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
