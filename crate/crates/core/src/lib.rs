//! Tree-code construction and certification, adversarial question games,
//! and compilation of winning strategies into protocols that survive noisy
//! channels, with simulators and bounds to check every claim at desk scale.
//!
//! - [`treecode`]: randomized r-bit binary tree codes (generate, certify,
//!   decode, extend), walk counting and the construction failure bound
//! - [`ulamgame`]: strategies and exact solving for question games with lies
//! - [`bridge`]: protocol <-> strategy conversions and robust compilation
//! - [`channelsim`]: adversarial and probabilistic channel execution,
//!   exhaustive sweeps, Monte Carlo estimation, tail bounds

pub mod bridge;
pub mod channelsim;
pub mod rng;
pub mod treecode;
pub mod ulamgame;
