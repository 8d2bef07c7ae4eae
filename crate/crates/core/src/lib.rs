//! Grab-and-lift policies learned from reward-window states.
//!
//! The crate bundles every stage of the pipeline: a kinematic arm simulator
//! with a synthetic camera ([`sim`]), capture-session datasets ([`dataset`]),
//! an image classifier whose softmax success probability is the reward
//! ([`reward`]), state encoders for raw pixels, PCA and the window of the last
//! N rewards ([`state`]), DDPG and TD3 learners ([`rl`]), and an experiment
//! harness that compares state representations ([`harness`]). [`nn`] is the
//! small neural-network library underneath.
//!
//! The `examples/` directory walks through each stage; the `rwstate` binary
//! drives the same steps from the command line.

mod binio;
pub mod error;
pub mod image;
pub mod rng;

pub mod nn;
pub mod sim;
pub mod dataset;
pub mod reward;
pub mod state;
pub mod rl;
pub mod harness;

pub use error::{Error, Result};
pub use image::Image;
