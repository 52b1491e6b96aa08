//! Deterministic two-drone racing simulator and self-play RL toolkit.
//!
//! The crate is organized as a pipeline:
//!
//! - [`physics`]: rigid-body quadrotor dynamics stepped at the fast rate (500 Hz),
//!   with first-order motor lag and rotor drag.
//! - [`control`]: action-to-command mapping, body-rate PID, and motor allocation.
//! - [`track`]: gates, obstacles, bounds, pass/collision checks, built-in tracks.
//! - [`env`]: the two-agent racing environment (observations, rewards, resets,
//!   domain randomization).
//! - [`net`]: a small feedforward network engine with analytic gradients and a
//!   Gaussian policy head.
//! - [`ippo`]: independent-PPO training over batches of parallel environments.
//! - [`race`]: evaluation — single-agent track metrics and head-to-head matrices.
//! - [`scripted`]: a waypoint-following pilot used as an evaluation baseline and
//!   as a feasibility oracle for the built-in tracks.
//! - [`config`] / [`checkpoint`] / [`logs`]: run configuration, policy
//!   checkpoints, and line-delimited training/trajectory logs.

pub mod checkpoint;
pub mod config;
pub mod control;
pub mod env;
pub mod ippo;
pub mod logs;
pub mod net;
pub mod physics;
pub mod race;
pub mod scripted;
pub mod track;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid track: {0}")]
    InvalidTrack(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("numeric fault: {0}")]
    Numeric(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
